# The three-stage curriculum: per-stage training parameters and the
# eligibility rules deciding which slices each stage trains on.

import logging

import curriplan.artifact as artifact
import curriplan.complexity as complexity
import curriplan.config as config
import curriplan.imagemetrics as imagemetrics
from curriplan.error import ValidationError

log = logging.getLogger(__name__)

# plan kinds
BASELINE = "baseline"
CL = "cl"
SACL = "sacl"

KINDS = (BASELINE, CL, SACL)

# labeled tiers and negative quality tiers admitted by each stage
_stageTiers = {
    1: ((complexity.EASY,), (imagemetrics.HIGH,)),
    2: (
        (complexity.EASY, complexity.MEDIUM),
        (imagemetrics.HIGH, imagemetrics.MEDIUM),
    ),
    3: (complexity.TIERS, imagemetrics.QUALITY_TIERS),
}


class LossWeights:
    def __init__(self, box, cls, dfl):
        self.box = box
        self.cls = cls
        self.dfl = dfl

        if min(box, cls, dfl) < 0:
            raise ValidationError("loss weights must be non-negative")

    def astuple(self):
        return (self.box, self.cls, self.dfl)

    def toDict(self):
        return {"box": self.box, "cls": self.cls, "dfl": self.dfl}

    @staticmethod
    def fromDict(d):
        return LossWeights(d["box"], d["cls"], d["dfl"])


class AugmentationPolicy:
    def __init__(self, rotationDeg, translateFrac, scaleFrac):
        # maximum rotation, degrees
        self.rotationDeg = rotationDeg

        # maximum translation and scaling, fractions of the image size
        self.translateFrac = translateFrac
        self.scaleFrac = scaleFrac

        if rotationDeg < 0:
            raise ValidationError("rotation must be non-negative")

        if not (0.0 <= translateFrac <= 1.0) or not (0.0 <= scaleFrac <= 1.0):
            raise ValidationError("augmentation fractions must be within 0-1")

    def astuple(self):
        return (self.rotationDeg, self.translateFrac, self.scaleFrac)

    def toDict(self):
        return {
            "rotation_deg": self.rotationDeg,
            "translate_frac": self.translateFrac,
            "scale_frac": self.scaleFrac,
        }

    @staticmethod
    def fromDict(d):
        return AugmentationPolicy(
            d["rotation_deg"], d["translate_frac"], d["scale_frac"]
        )


class StagePlan:
    def __init__(
        self,
        index,
        resolution,
        epochs,
        lr,
        loss,
        aug,
        eligibleTiers,
        eligibleNegQuality,
        minHardRatio,
    ):
        # 1-based stage number
        self.index = index

        # input side length, pixels
        self.resolution = resolution

        self.epochs = epochs
        self.lr = lr

        # LossWeights
        self.loss = loss

        # AugmentationPolicy
        self.aug = aug

        # difficulty tiers of labeled slices trained on in this stage
        self.eligibleTiers = tuple(eligibleTiers)

        # quality tiers of negative slices trained on in this stage
        self.eligibleNegQuality = tuple(eligibleNegQuality)

        # smallest fraction of Hard slices per batch
        self.minHardRatio = minHardRatio

    def validate(self):
        if self.epochs < 1:
            raise ValidationError("stage %d: epochs must be >= 1" % self.index)

        if self.lr <= 0:
            raise ValidationError("stage %d: lr must be positive" % self.index)

        if self.resolution not in config.RESOLUTIONS:
            raise ValidationError(
                "stage %d: resolution %d is not one of %s"
                % (self.index, self.resolution, config.RESOLUTIONS)
            )

        if not (0.0 <= self.minHardRatio <= 1.0):
            raise ValidationError(
                "stage %d: hard ratio must be within 0-1" % self.index
            )

    def copy(self):
        return StagePlan.fromDict(self.toDict())

    def toDict(self):
        return {
            "index": self.index,
            "resolution_px": self.resolution,
            "epochs": self.epochs,
            "lr": self.lr,
            "loss": self.loss.toDict(),
            "aug": self.aug.toDict(),
            "eligible_tiers": list(self.eligibleTiers),
            "eligible_neg_quality": list(self.eligibleNegQuality),
            "min_hard_ratio": self.minHardRatio,
        }

    @staticmethod
    def fromDict(d):
        return StagePlan(
            d["index"],
            d["resolution_px"],
            d["epochs"],
            d["lr"],
            LossWeights.fromDict(d["loss"]),
            AugmentationPolicy.fromDict(d["aug"]),
            d["eligible_tiers"],
            d["eligible_neg_quality"],
            d["min_hard_ratio"],
        )


class CurriculumPlan:
    def __init__(self, stages, rho=1.0, kind=CL):
        # list of StagePlans, ordered by index
        self.stages = list(stages)

        # data scale the plan was adapted to
        self.rho = rho

        # one of KINDS
        self.kind = kind

        # plan-level regularization
        self.weightDecay = 0.0005
        self.dropout = 0.0

        # base of the stage index in the learning rate rule
        self.stageIndexBase = 1

        # key = "configHash" / "seed" / "generator"
        self.provenance = {}

    def getStage(self, index):
        return self.stages[index - 1]

    def totalEpochs(self):
        return sum(st.epochs for st in self.stages)

    def validate(self):
        for i, st in enumerate(self.stages):
            if st.index != i + 1:
                raise ValidationError("stages must be numbered 1..%d" % len(self.stages))

            st.validate()

        if not (0.0 < self.rho <= 1.0):
            raise ValidationError("plan rho must be in (0, 1], got %r" % self.rho)

        if self.kind not in KINDS:
            raise ValidationError("unknown plan kind %r" % self.kind)

    def copy(self):
        return planFromDict(planToDict(self))


# the static curriculum described by 'cfg'
def buildStaticPlan(cfg):
    cfg.validate()

    stages = []

    for sc in cfg.stages:
        tiers, negQuality = _stageTiers[sc.index]

        st = StagePlan(
            sc.index,
            sc.resolution,
            sc.epochs,
            sc.lr,
            LossWeights(sc.lossBox, sc.lossCls, sc.lossDfl),
            AugmentationPolicy(sc.augRotation, sc.augTranslate, sc.augScale),
            tiers,
            negQuality,
            cfg.r0,
        )
        st.validate()

        stages.append(st)

    plan = CurriculumPlan(stages, 1.0, CL)
    plan.weightDecay = cfg.wdBase
    plan.dropout = cfg.pDropBase
    plan.stageIndexBase = cfg.stageIndexBase
    plan.provenance = {
        "configHash": cfg.hash(),
        "seed": cfg.seed,
        "generator": artifact.GENERATOR,
    }

    log.info("built static plan, %d epochs in total", plan.totalEpochs())

    return plan


# single-stage plan over every slice with no hard floor, the reference
# the curricula are compared against
def buildBaselinePlan(cfg):
    cfg.validate()

    sc = cfg.getStage(2)

    st = StagePlan(
        1,
        cfg.baseResolution,
        cfg.baseEpochs,
        cfg.baseLr,
        LossWeights(sc.lossBox, sc.lossCls, sc.lossDfl),
        AugmentationPolicy(sc.augRotation, sc.augTranslate, sc.augScale),
        complexity.TIERS,
        imagemetrics.QUALITY_TIERS,
        0.0,
    )
    st.validate()

    plan = CurriculumPlan([st], 1.0, BASELINE)
    plan.weightDecay = cfg.wdBase
    plan.dropout = cfg.pDropBase
    plan.stageIndexBase = cfg.stageIndexBase
    plan.provenance = {
        "configHash": cfg.hash(),
        "seed": cfg.seed,
        "generator": artifact.GENERATOR,
    }

    log.info("built baseline plan, %d epochs", plan.totalEpochs())

    return plan


# (eligible, hardPool) slice IDs of 'slices' (scored SliceRecords) for
# stage 'stage', both in input order. the hard pool holds every labeled
# Hard slice whether or not the stage is eligible to train on it.
def stagePool(stage, slices, cfg):
    thresholds = complexity.TierThresholds.fromConfig(cfg)

    eligible = []
    hardPool = []

    for s in slices:
        if s.hasNodules():
            tier = complexity.sliceTier(s, thresholds)

            if tier in stage.eligibleTiers:
                eligible.append(s.sliceId)

            if tier == complexity.HARD:
                hardPool.append(s.sliceId)
        else:
            if not s.isScored():
                raise ValidationError("slice has not been scored", sliceId=s.sliceId)

            if s.quality is None:
                raise ValidationError("quality features missing", sliceId=s.sliceId)

            if imagemetrics.qualityTierCfg(s.quality, cfg) in stage.eligibleNegQuality:
                eligible.append(s.sliceId)

    return (eligible, hardPool)


def planToDict(plan):
    return {
        "kind": plan.kind,
        "rho": plan.rho,
        "weight_decay": plan.weightDecay,
        "dropout": plan.dropout,
        "stage_index_base": plan.stageIndexBase,
        "provenance": dict(plan.provenance),
        "stages": [st.toDict() for st in plan.stages],
    }


def planFromDict(d):
    try:
        plan = CurriculumPlan(
            [StagePlan.fromDict(sd) for sd in d["stages"]], d["rho"], d["kind"]
        )
        plan.weightDecay = d["weight_decay"]
        plan.dropout = d["dropout"]
        plan.stageIndexBase = d["stage_index_base"]
        plan.provenance = dict(d.get("provenance", {}))
    except (KeyError, TypeError) as e:
        raise ValidationError("malformed plan: missing or bad field %s" % e)

    plan.validate()

    return plan


# the plan's training parameters without the rho / kind / provenance
# metadata. two plans that train identically compare equal here.
def planFields(plan):
    d = planToDict(plan)

    for key in ("kind", "rho", "provenance"):
        del d[key]

    return d
