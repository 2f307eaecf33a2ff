# Scale-adaptive curriculum: rules that stretch or shrink a static
# curriculum to the fraction 'rho' of the full training set available.

import logging

import curriplan.curriculum as curriculum
import curriplan.util as util
from curriplan.error import ValidationError

log = logging.getLogger(__name__)

# upper bound of the adapted dropout probability
MAX_DROPOUT = 0.3


class SaclParams:
    def __init__(
        self,
        beta=0.7,
        gamma=0.3,
        eMin=20,
        r0=0.1,
        deltaR=0.3,
        lrShrink=0.3,
        wdBase=0.0005,
        pDropBase=0.0,
        stageIndexBase=1,
    ):
        # scaling sensitivity of the epoch rule
        self.beta = beta

        # fraction of the baseline epochs always kept
        self.gamma = gamma

        # epoch floor
        self.eMin = eMin

        # hard ratio at full scale, and its growth towards small scales
        self.r0 = r0
        self.deltaR = deltaR

        self.lrShrink = lrShrink
        self.wdBase = wdBase
        self.pDropBase = pDropBase

        # 1: stage s of S is s/S of the way through, 0: (s - 1)/S
        self.stageIndexBase = stageIndexBase

        self.validate()

    def validate(self):
        if not (0.0 < self.beta <= 1.0):
            raise ValidationError("beta must be in (0, 1], got %r" % self.beta)

        if not (0.0 < self.gamma < 1.0):
            raise ValidationError("gamma must be in (0, 1), got %r" % self.gamma)

        if self.eMin < 1:
            raise ValidationError("minimum epochs must be >= 1, got %r" % self.eMin)

        if (self.r0 < 0) or (self.deltaR < 0) or (
            self.r0 + self.deltaR > 1.0 + util.EPSILON
        ):
            raise ValidationError("r0 and delta_r must be >= 0 with a sum <= 1")

        if self.stageIndexBase not in (0, 1):
            raise ValidationError("stage index base must be 0 or 1")

    @staticmethod
    def fromConfig(cfg):
        return SaclParams(
            cfg.beta,
            cfg.gamma,
            cfg.eMin,
            cfg.r0,
            cfg.deltaR,
            cfg.lrShrink,
            cfg.wdBase,
            cfg.pDropBase,
            cfg.stageIndexBase,
        )


def _checkRho(rho):
    if not (0.0 < rho <= 1.0):
        raise ValidationError("rho must be in (0, 1], got %r" % rho)


# epochs for a stage of 'epochs' baseline epochs at scale 'rho'. never
# more than the baseline.
def adaptEpochs(epochs, rho, p):
    if epochs < 1:
        raise ValidationError("baseline epochs must be >= 1, got %r" % epochs)

    _checkRho(rho)

    val = max(rho**p.beta * epochs, p.gamma * epochs, p.eMin)

    return min(util.roundHalfAway(val), epochs)


def minHardRatio(rho, p):
    _checkRho(rho)

    return p.r0 + (1.0 - rho) * p.deltaR


# learning rate for stage 's' of 'stageCount' stages. 's' is counted
# from p.stageIndexBase.
def adaptLr(lr, rho, s, stageCount, p):
    if lr <= 0:
        raise ValidationError("learning rate must be positive, got %r" % lr)

    _checkRho(rho)

    first = p.stageIndexBase
    if not (first <= s < first + stageCount):
        raise ValidationError(
            "stage index %d outside %d..%d" % (s, first, first + stageCount - 1)
        )

    return lr * (1.0 - p.lrShrink * (1.0 - rho) * s / float(stageCount))


# (weight decay, dropout probability)
def adaptRegularization(rho, p):
    _checkRho(rho)

    wd = p.wdBase * (2.0 - rho)
    pDrop = min(MAX_DROPOUT, p.pDropBase + 0.2 * (1.0 - rho))

    return (wd, pDrop)


# a copy of 'static' adapted to scale 'rho'
def buildSaclPlan(static, rho, p):
    _checkRho(rho)
    static.validate()

    stageCount = len(static.stages)
    stages = []

    for st in static.stages:
        st = st.copy()

        s = st.index - 1 + p.stageIndexBase

        st.epochs = adaptEpochs(st.epochs, rho, p)
        st.lr = adaptLr(st.lr, rho, s, stageCount, p)
        st.minHardRatio = minHardRatio(rho, p)

        stages.append(st)

    plan = curriculum.CurriculumPlan(stages, rho, curriculum.SACL)
    plan.weightDecay, plan.dropout = adaptRegularization(rho, p)
    plan.stageIndexBase = p.stageIndexBase
    plan.provenance = dict(static.provenance)

    log.info(
        "adapted plan to rho %.4f: epochs %s, hard ratio %.4f",
        rho,
        [st.epochs for st in stages],
        minHardRatio(rho, p),
    )

    return plan
