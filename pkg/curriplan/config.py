# Run configuration. Every tunable constant of the pipeline is a config
# variable here, saved as "Name:value" lines. Per-stage values are saved
# under a "StageN/" prefix.

import hashlib
import os

import curriplan.mypickle as mypickle
import curriplan.util as util
from curriplan.error import ConfigError

# prefix of environment variables overriding config values
ENV_PREFIX = "CURRIPLAN_"

# number of curriculum stages
STAGE_COUNT = 3

# allowed stage input resolutions
RESOLUTIONS = (512, 640, 768)

# stage defaults: (resolution, epochs, lr, (box, cls, dfl),
# (rotation deg, translate, scale))
_stageDefaults = {
    1: (512, 50, 0.003, (2.0, 4.0, 0.1), (3.0, 0.05, 0.10)),
    2: (640, 100, 0.002, (5.0, 2.0, 0.5), (8.0, 0.10, 0.20)),
    3: (768, 100, 0.001, (7.0, 1.5, 1.0), (12.0, 0.15, 0.30)),
}


# configuration of one curriculum stage
class StageConfig:
    cvars = None

    def __init__(self, index):

        # 1-based stage number
        self.index = index

        if not self.__class__.cvars:
            v = self.__class__.cvars = mypickle.Vars()

            # defaults are those of stage 1; setStageDefaults() below
            # overwrites them with the right row.
            res, epochs, lr, loss, aug = _stageDefaults[1]

            v.addInt("resolution", res, "Resolution", 1, 8192)
            v.addInt("epochs", epochs, "Epochs", 1, 100000)
            v.addFloat("lr", lr, "Lr", 0.0, 10.0)

            v.addFloat("lossBox", loss[0], "LossBox", 0.0, 1000.0)
            v.addFloat("lossCls", loss[1], "LossCls", 0.0, 1000.0)
            v.addFloat("lossDfl", loss[2], "LossDfl", 0.0, 1000.0)

            v.addFloat("augRotation", aug[0], "AugRotation", 0.0, 360.0)
            v.addFloat("augTranslate", aug[1], "AugTranslate", 0.0, 1.0)
            v.addFloat("augScale", aug[2], "AugScale", 0.0, 1.0)

        self.setStageDefaults()

    def setStageDefaults(self):
        self.__class__.cvars.setDefaults(self)

        res, epochs, lr, loss, aug = _stageDefaults[self.index]

        self.resolution = res
        self.epochs = epochs
        self.lr = lr
        self.lossBox, self.lossCls, self.lossDfl = loss
        self.augRotation, self.augTranslate, self.augScale = aug

    def prefix(self):
        return "Stage%d/" % self.index

    def save(self):
        return self.cvars.save(self.prefix(), self)

    def load(self, vals):
        self.cvars.load(vals, self.prefix(), self)

    def toDict(self):
        return self.cvars.toDict(self.prefix(), self)


# the resolved configuration of one run
class ConfigRun:
    cvars = None

    def __init__(self):
        if not self.__class__.cvars:
            v = self.__class__.cvars = mypickle.Vars()

            # all randomness is derived from this
            v.addInt("seed", 0, "Seed", 0, 2**63 - 1)

            # data scale handed to the SACL rules
            v.addFloat("rho", 1.0, "Rho", 0.0, 1.0)

            v.addInt("batchSize", 16, "BatchSize", 1, 65536)

            # manifest parsing: reject unknown record fields unless set
            v.addBool("lenient", False, "Lenient")

            # preprocessing
            v.addFloat("minDiameterMm", 3.0, "MinDiameterMm", 0.0, 1000.0)
            v.addInt("bgRatio", 2, "BackgroundRatio", 0, 1000)
            v.addFloat("claheClip", 2.0, "ClaheClipLimit", 1.0, 1000.0)
            v.addInt("claheTiles", 8, "ClaheTiles", 1, 256)
            v.addInt("imageSize", 512, "ImageSize", 8, 8192)

            # image quality tiers
            v.addFloat("qualHighLaplacian", 500.0, "Quality/HighLaplacian", 0.0, None)
            v.addFloat("qualHighContrast", 30.0, "Quality/HighContrast", 0.0, None)
            v.addFloat("qualLowLaplacian", 100.0, "Quality/LowLaplacian", 0.0, None)
            v.addFloat("qualLowContrast", 10.0, "Quality/LowContrast", 0.0, None)

            # complexity scoring
            v.addFloat("aspectTau", 1.5, "AspectRatioLimit", 1.0, 1000.0)
            v.addFloat("easyMax", 4.0, "Tier/EasyMax", 0.0, 100.0)
            v.addFloat("mediumMax", 7.5, "Tier/MediumMax", 0.0, 100.0)

            # patient-level split
            v.addFloat("splitTrain", 0.8, "Split/Train", 0.0, 1.0)
            v.addFloat("splitVal", 0.1, "Split/Val", 0.0, 1.0)
            v.addFloat("splitTest", 0.1, "Split/Test", 0.0, 1.0)

            # scale-adaptive rules
            v.addFloat("beta", 0.7, "Sacl/Beta", 0.0, 1.0)
            v.addFloat("gamma", 0.3, "Sacl/Gamma", 0.0, 1.0)
            v.addInt("eMin", 20, "Sacl/MinEpochs", 1, 100000)
            v.addFloat("r0", 0.1, "Sacl/HardRatioBase", 0.0, 1.0)
            v.addFloat("deltaR", 0.3, "Sacl/HardRatioDelta", 0.0, 1.0)
            v.addFloat("lrShrink", 0.3, "Sacl/LrShrink", 0.0, 1.0)
            v.addFloat("wdBase", 0.0005, "Sacl/WeightDecay", 0.0, 1.0)
            v.addFloat("pDropBase", 0.0, "Sacl/Dropout", 0.0, 0.3)
            v.addInt("stageIndexBase", 1, "Sacl/StageIndexBase", 0, 1)

            # single-stage reference plan without a curriculum. loss weights
            # and augmentation are those of stage 2.
            v.addInt("baseEpochs", 250, "Baseline/Epochs", 1, 100000)
            v.addFloat("baseLr", 0.002, "Baseline/Lr", 0.0, 10.0)
            v.addInt("baseResolution", 640, "Baseline/Resolution", 1, 8192)

        self.__class__.cvars.setDefaults(self)

        self.stages = [StageConfig(i) for i in range(1, STAGE_COUNT + 1)]

    def getStage(self, index):
        return self.stages[index - 1]

    def save(self):
        s = self.cvars.save("", self)

        for st in self.stages:
            s += st.save()

        return s

    # load values from a "Name:value" text. unknown names are an error.
    def load(self, s):
        self.loadVals(mypickle.Vars.makeVals(s))

    def loadVals(self, vals):
        vals = dict(vals)

        self.cvars.load(vals, "", self)

        for st in self.stages:
            st.load(vals)

        if vals:
            raise ConfigError(
                "unknown config variable(s): %s" % ", ".join(sorted(vals))
            )

    # apply overrides from environment 'env' (os.environ by default).
    # Stage1/Epochs is set by CURRIPLAN_STAGE1_EPOCHS and so on.
    def applyEnv(self, env=None):
        if env is None:
            env = os.environ

        names = {}
        for name in self.savedNames():
            names[ENV_PREFIX + name.upper().replace("/", "_")] = name

        vals = {}
        for key, val in env.items():
            if key in names:
                vals[names[key]] = val

        if vals:
            self.loadVals(vals)

    def savedNames(self):
        ret = [it.name2 for it in self.cvars]

        for st in self.stages:
            ret += [st.prefix() + it.name2 for it in st.cvars]

        return ret

    def toDict(self):
        d = self.cvars.toDict("", self)

        for st in self.stages:
            d.update(st.toDict())

        return d

    def hash(self):
        return hashlib.sha256(self.save().encode("UTF-8")).hexdigest()

    def copy(self):
        cfg = ConfigRun()
        cfg.load(self.save())

        return cfg

    # check relations between variables that single-variable ranges
    # can't express. raises ConfigError.
    def validate(self):
        if self.rho <= 0.0:
            raise ConfigError("Rho must be in (0, 1], got %r" % self.rho)

        if self.beta <= 0.0:
            raise ConfigError("Sacl/Beta must be in (0, 1], got %r" % self.beta)

        if not (0.0 < self.gamma < 1.0):
            raise ConfigError("Sacl/Gamma must be in (0, 1), got %r" % self.gamma)

        if self.r0 + self.deltaR > 1.0 + util.EPSILON:
            raise ConfigError(
                "Sacl/HardRatioBase + Sacl/HardRatioDelta must not exceed 1"
            )

        if self.easyMax >= self.mediumMax:
            raise ConfigError("Tier/EasyMax must be below Tier/MediumMax")

        if self.qualLowLaplacian > self.qualHighLaplacian:
            raise ConfigError(
                "Quality/LowLaplacian must not exceed Quality/HighLaplacian"
            )

        if self.qualLowContrast > self.qualHighContrast:
            raise ConfigError(
                "Quality/LowContrast must not exceed Quality/HighContrast"
            )

        total = self.splitTrain + self.splitVal + self.splitTest
        if abs(total - 1.0) > 1e-6:
            raise ConfigError("Split ratios must sum to 1, got %r" % total)

        for st in self.stages:
            if st.resolution not in RESOLUTIONS:
                raise ConfigError(
                    "%sResolution must be one of %s, got %d"
                    % (st.prefix(), RESOLUTIONS, st.resolution)
                )

            if st.lr <= 0.0:
                raise ConfigError("%sLr must be positive" % st.prefix())

    def splitRatios(self):
        return (self.splitTrain, self.splitVal, self.splitTest)


# load config file 'filename' on top of the defaults
def loadConfigFile(filename):
    cfg = ConfigRun()
    cfg.load(util.loadFile(filename))

    return cfg
