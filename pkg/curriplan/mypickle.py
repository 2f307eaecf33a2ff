import copy

import curriplan.util as util
from curriplan.error import ConfigError


# keep track about one object's variables
class Vars:
    def __init__(self):
        self.cvars = []

    def __iter__(self):
        for v in self.cvars:
            yield v

    def setDefaults(self, obj):
        for it in self.cvars:
            setattr(obj, it.name, copy.deepcopy(it.defVal))

    # transform string 's' (loaded from file) into a form suitable for
    # load() to take. blank lines and lines starting with '#' are
    # skipped.
    @staticmethod
    def makeVals(s):
        tmp = util.fixNL(str(s)).split("\n")

        vals = {}
        for it in tmp:
            it = it.strip()

            if not it or it.startswith("#"):
                continue

            if it.find(":") == -1:
                raise ConfigError("invalid config line '%s'" % it)

            name, v = it.split(":", 1)
            vals[name.strip()] = v.strip()

        return vals

    def save(self, prefix, obj):
        s = ""

        for it in self.cvars:
            s += it.toStr(getattr(obj, it.name), prefix + it.name2)

        return s

    # load values matching our variables from 'vals', deleting each one
    # consumed so the caller can report leftovers.
    def load(self, vals, prefix, obj):
        for it in self.cvars:
            name = prefix + it.name2
            if name in vals:
                setattr(obj, it.name, it.fromStr(vals[name], name))
                del vals[name]

    # {saved name: value} for embedding in documents
    def toDict(self, prefix, obj):
        d = {}

        for it in self.cvars:
            d[prefix + it.name2] = getattr(obj, it.name)

        return d

    def addVar(self, var):
        self.cvars.append(var)

    def addBool(self, *params):
        self.addVar(BoolVar(*params))

    def addFloat(self, *params):
        self.addVar(FloatVar(*params))

    def addInt(self, *params):
        self.addVar(IntVar(*params))


class ConfVar:
    # name2 is the name to use while saving/loading the variable.
    def __init__(self, name, defVal, name2):
        self.name = name
        self.defVal = defVal
        self.name2 = name2


class BoolVar(ConfVar):
    def __init__(self, name, defVal, name2):
        ConfVar.__init__(self, name, defVal, name2)

    def toStr(self, val, prefix):
        return "%s:%s\n" % (prefix, str(bool(val)))

    def fromStr(self, val, prefix):
        low = val.lower()

        if low in ("true", "1", "yes"):
            return True
        elif low in ("false", "0", "no"):
            return False

        raise ConfigError("%s: invalid boolean '%s'" % (prefix, val))


class NumericVar(ConfVar):
    def __init__(self, name, defVal, name2, minVal, maxVal):
        ConfVar.__init__(self, name, defVal, name2)
        self.minVal = minVal
        self.maxVal = maxVal

    def checkRange(self, val, prefix):
        if (self.minVal is not None) and (val < self.minVal):
            raise ConfigError(
                "%s: %s is below minimum %s" % (prefix, val, self.minVal)
            )

        if (self.maxVal is not None) and (val > self.maxVal):
            raise ConfigError(
                "%s: %s is above maximum %s" % (prefix, val, self.maxVal)
            )

        return val


# floats are saved with repr() so that save -> load is exact and the
# config hash sees every bit of the value.
class FloatVar(NumericVar):
    def __init__(self, name, defVal, name2, minVal, maxVal):
        NumericVar.__init__(self, name, defVal, name2, minVal, maxVal)

    def toStr(self, val, prefix):
        return "%s:%r\n" % (prefix, float(val))

    def fromStr(self, val, prefix):
        v = util.str2float(val, None)

        if v is None:
            raise ConfigError("%s: invalid number '%s'" % (prefix, val))

        return self.checkRange(v, prefix)


class IntVar(NumericVar):
    def __init__(self, name, defVal, name2, minVal, maxVal):
        NumericVar.__init__(self, name, defVal, name2, minVal, maxVal)

    def toStr(self, val, prefix):
        return "%s:%d\n" % (prefix, val)

    def fromStr(self, val, prefix):
        v = util.str2int(val, None)

        if v is None:
            raise ConfigError("%s: invalid integer '%s'" % (prefix, val))

        return self.checkRange(v, prefix)
