# Slice difficulty: four factor scores, their sum, and the Easy /
# Medium / Hard tiers built on it.

import logging

import curriplan.imagemetrics as imagemetrics
from curriplan.error import ValidationError

log = logging.getLogger(__name__)

# difficulty tiers
EASY = "Easy"
MEDIUM = "Medium"
HARD = "Hard"

TIERS = (EASY, MEDIUM, HARD)

# smallest and largest attainable scores under the factor tables
MIN_SCORE = 2.0
MAX_SCORE = 11.0

# box area bands (pixels) for the size factor. both bounds belong to the
# middle band.
SIZE_SMALL_MAX = 400
SIZE_LARGE_MIN = 1000

_qualityFactor = {
    imagemetrics.HIGH: 0.5,
    imagemetrics.MEDIUM: 1.0,
    imagemetrics.LOW: 2.0,
}


# the four difficulty factors of one slice
class ComplexityFactors:
    def __init__(self, fCnt, fSize, fShape, fQual):
        # nodule count
        self.fCnt = fCnt

        # size of the smallest nodule
        self.fSize = fSize

        # number of irregularly shaped nodules
        self.fShape = fShape

        # image quality
        self.fQual = fQual

    def astuple(self):
        return (self.fCnt, self.fSize, self.fShape, self.fQual)

    def toDict(self):
        return {
            "f_cnt": self.fCnt,
            "f_size": self.fSize,
            "f_shape": self.fShape,
            "f_qual": self.fQual,
        }

    @staticmethod
    def fromDict(d):
        return ComplexityFactors(d["f_cnt"], d["f_size"], d["f_shape"], d["f_qual"])

    def __eq__(self, other):
        return isinstance(other, ComplexityFactors) and (
            self.astuple() == other.astuple()
        )

    def __repr__(self):
        return "ComplexityFactors%r" % (self.astuple(),)


# tier boundaries: Easy is c <= easyMax, Medium is easyMax < c <=
# mediumMax, Hard is above.
class TierThresholds:
    def __init__(self, easyMax=4.0, mediumMax=7.5):
        if easyMax >= mediumMax:
            raise ValidationError(
                "easy_max (%r) must be below medium_max (%r)" % (easyMax, mediumMax)
            )

        self.easyMax = easyMax
        self.mediumMax = mediumMax

    @staticmethod
    def fromConfig(cfg):
        return TierThresholds(cfg.easyMax, cfg.mediumMax)


def countFactor(count):
    if count == 0:
        return 0.5
    elif count == 1:
        return 1.0
    elif count <= 3:
        return 2.5
    else:
        return 4.0


# 'area' is the pixel area of the smallest box
def sizeFactor(area):
    if area > SIZE_LARGE_MIN:
        return 0.5
    elif area >= SIZE_SMALL_MAX:
        return 1.0
    else:
        return 3.0


def shapeFactor(irregular):
    if irregular == 0:
        return 0.5
    elif irregular == 1:
        return 1.0
    else:
        return 2.0


# factors of slice 's', which must carry quality features. slices
# without boxes score best on size and shape.
def complexityFactors(s, cfg=None):
    if s.quality is None:
        raise ValidationError("quality features missing", sliceId=s.sliceId)

    tau = cfg.aspectTau if cfg else 1.5

    if cfg:
        tier = imagemetrics.qualityTierCfg(s.quality, cfg)
    else:
        tier = imagemetrics.qualityTier(s.quality)

    fQual = _qualityFactor[tier]

    if not s.boxes:
        return ComplexityFactors(0.5, 0.5, 0.5, fQual)

    smallest = min(b.area() for b in s.boxes)
    irregular = sum(1 for b in s.boxes if b.aspect() > tau)

    return ComplexityFactors(
        countFactor(len(s.boxes)), sizeFactor(smallest), shapeFactor(irregular), fQual
    )


def complexityScore(f):
    return f.fCnt + f.fSize + f.fShape + f.fQual


def difficultyTier(c, thresholds=None):
    if thresholds is None:
        thresholds = TierThresholds()

    if c <= thresholds.easyMax:
        return EASY
    elif c <= thresholds.mediumMax:
        return MEDIUM
    else:
        return HARD


# score every slice of manifest 'm', returning a new manifest whose
# records carry factors and complexity.
def scoreManifest(m, cfg=None):
    out = []

    for s in m.slices:
        f = complexityFactors(s, cfg)

        s = s.clone()
        s.factors = f
        s.complexity = complexityScore(f)

        out.append(s)

    log.info("scored %d slices", len(out))

    return m.withSlices(out, "score")


# tier of an already scored slice
def sliceTier(s, thresholds):
    if not s.isScored():
        raise ValidationError("slice has not been scored", sliceId=s.sliceId)

    return difficultyTier(s.complexity, thresholds)


# key = tier, value = number of slices, over every tier
def tierHistogram(m, thresholds):
    hist = {t: 0 for t in TIERS}

    for s in m.slices:
        hist[sliceTier(s, thresholds)] += 1

    return hist
