# -*- coding: utf-8 -*-

import math
import os
from typing import AnyStr

from curriplan.error import ArtifactError

# slack used when comparing products of float ratios against integer
# counts, e.g. ceil(0.3 * 10) must be 3, not 4.
EPSILON = 1e-9


def fixNL(s):
    return s.replace("\r\n", "\n").replace("\r", "\n")


# clamps the given value to a specific range. both limits are optional.
def clamp(val, minVal=None, maxVal=None):
    ret = val

    if minVal != None:
        ret = max(ret, minVal)

    if maxVal != None:
        ret = min(ret, maxVal)

    return ret


# convert given string to float, clamping it to the given range
# (optional). never throws any exceptions, return defVal (possibly clamped
# as well) on any errors. nan and infinities count as errors.
def str2float(s, defVal, minVal=None, maxVal=None):
    val = defVal

    try:
        tmp = float(s)

        if math.isfinite(tmp):
            val = tmp
    except (ValueError, OverflowError, TypeError):
        pass

    if val is None:
        return None

    return clamp(val, minVal, maxVal)


# like str2float, but for ints.
def str2int(s, defVal, minVal=None, maxVal=None, radix=10):
    val = defVal

    try:
        val = int(s, radix)
    except (ValueError, TypeError):
        pass

    if val is None:
        return None

    return clamp(val, minVal, maxVal)


# return float(val1) / val2, or 0.0 if val2 is 0.0
def safeDiv(val1, val2):
    if val2 != 0.0:
        return float(val1) / val2
    else:
        return 0.0


# round half away from zero, e.g. 30.5 -> 31, -2.5 -> -3.
def roundHalfAway(val):
    if val >= 0:
        return int(math.floor(val + 0.5))
    else:
        return -int(math.floor(-val + 0.5))


# split integer 'n' in proportion to 'weights' (summing to 1) by largest
# remainder, ties going to the earlier weight.
def largestRemainder(n, weights):
    exact = [n * w for w in weights]
    counts = [int(math.floor(x + EPSILON)) for x in exact]

    rest = n - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-(exact[i] - counts[i]), i))

    for i in order[:max(rest, 0)]:
        counts[i] += 1

    return counts


# ceil(ratio * count) for a float ratio and an integer count, tolerant
# of the representation error in the product.
def ceilRatio(ratio, count):
    return int(math.ceil(ratio * count - EPSILON))


# remove duplicates from 'seq', keeping the first occurrence of each item.
def unique(seq):
    seen = set()
    ret = []

    for it in seq:
        if it not in seen:
            seen.add(it)
            ret.append(it)

    return ret


# load 'filename', returning its contents as a string (or bytes if
# 'binary'). raises ArtifactError on errors.
def loadFile(filename: str, binary: bool = False) -> AnyStr:
    try:
        if binary:
            f = open(filename, "rb")
        else:
            f = open(filename, "r", encoding="UTF-8")

        try:
            return f.read()
        finally:
            f.close()

    except UnicodeDecodeError as e:
        raise ArtifactError("Error loading file '%s': %s" % (filename, e))
    except IOError as e:
        raise ArtifactError("Error loading file '%s': %s" % (filename, e.strerror))


# write 'data' to 'filename', creating the parent directory if needed.
# strings are written as UTF-8 with '\n' line endings on every platform.
# raises ArtifactError on errors.
def writeToFile(filename: str, data: AnyStr) -> None:
    try:
        parent = os.path.dirname(filename)
        if parent:
            os.makedirs(parent, exist_ok=True)

        f = open(filename, "wb")

        try:
            if isinstance(data, str):
                f.write(data.encode("UTF-8"))
            else:
                f.write(data)
        finally:
            f.close()

    except IOError as e:
        raise ArtifactError("Error writing file '%s': %s" % (filename, e.strerror))
