# Simulated training: runs a curriculum plan against a synthetic binary
# task with a logistic learner, logs every applied hyperparameter, and
# verifies afterwards that the run followed the plan.

import collections
import logging

import numpy as np

import curriplan.complexity as complexity
import curriplan.rng as rng
import curriplan.sampler as sampler
import curriplan.util as util
from curriplan.error import ValidationError

log = logging.getLogger(__name__)

# feature dimensions of the synthetic task
FEATURE_DIM = 8

# share of labels flipped per difficulty tier
FLIP_RATES = {
    complexity.EASY: 0.0,
    complexity.MEDIUM: 0.10,
    complexity.HARD: 0.25,
}

# distance of each blob center from the origin along every axis
BLOB_OFFSET = 1.0

# relative tolerance of the learning rate check
LR_TOLERANCE = 1e-12

# keeps log() finite
PROB_EPSILON = 1e-12

# fidelity check names
CHECK_EPOCHS = "epochs"
CHECK_LR = "lr"
CHECK_FLOOR = "hard_floor"
CHECK_BATCHES = "batch_count"

CHECKS = (CHECK_EPOCHS, CHECK_LR, CHECK_FLOOR, CHECK_BATCHES)


class SyntheticSample:
    def __init__(self, sampleId, features, label, difficulty, patientId, flipped):
        self.sampleId = sampleId

        # numpy vector of FEATURE_DIM floats
        self.features = features

        # observed label, 0 or 1, after any flip
        self.label = label

        # difficulty tier
        self.difficulty = difficulty

        self.patientId = patientId

        # True if the label was flipped
        self.flipped = flipped


class SyntheticDataset:
    def __init__(self, samples, seed, mix):
        # list of SyntheticSamples
        self.samples = samples

        self.seed = seed
        self.mix = tuple(mix)

    def __len__(self):
        return len(self.samples)

    def ids(self):
        return [s.sampleId for s in self.samples]

    # key = tier, value = number of samples
    def tierCounts(self):
        ret = {t: 0 for t in complexity.TIERS}

        for s in self.samples:
            ret[s.difficulty] += 1

        return ret

    def flippedCount(self, tier=None):
        return sum(
            1 for s in self.samples if s.flipped and (tier in (None, s.difficulty))
        )

    def features(self):
        return np.array([s.features for s in self.samples], dtype=np.float64)

    def labels(self):
        return np.array([s.label for s in self.samples], dtype=np.float64)

    # (eligible, hardPool) sample IDs for 'stage'. every sample is
    # labeled and its tier is its difficulty.
    def stagePool(self, stage):
        eligible = [s.sampleId for s in self.samples if s.difficulty in stage.eligibleTiers]
        hardPool = [s.sampleId for s in self.samples if s.difficulty == complexity.HARD]

        return (eligible, hardPool)


def _checkMix(mix):
    if len(mix) != len(complexity.TIERS):
        raise ValidationError(
            "tier mix needs %d proportions, got %d" % (len(complexity.TIERS), len(mix))
        )

    if any(x < 0 for x in mix) or (abs(sum(mix) - 1.0) > 1e-6):
        raise ValidationError("tier mix must be non-negative and sum to 1")


# 'n' samples from two Gaussian blobs, one per class, in equal numbers.
# tiers are dealt out in proportion to 'mix' (Easy, Medium, Hard) and an
# exact quota of each tier's labels is flipped. consecutive samples share
# a patient ID in groups of 'patientSize'.
def generateSyntheticDataset(n, mix=(0.5, 0.3, 0.2), seed=0, patientSize=4):
    if n < 1:
        raise ValidationError("sample count must be >= 1, got %r" % n)

    if patientSize < 1:
        raise ValidationError("patient size must be >= 1")

    _checkMix(mix)

    gen = rng.stream(seed, "synthetic")

    truth = gen.permutation(np.array([0] * (n - n // 2) + [1] * (n // 2)))

    centers = np.where(truth == 1, BLOB_OFFSET, -BLOB_OFFSET)
    feats = centers[:, None] + gen.standard_normal((n, FEATURE_DIM))

    tiers = []
    for tier, cnt in zip(complexity.TIERS, util.largestRemainder(n, mix)):
        tiers += [tier] * cnt

    tiers = [tiers[i] for i in gen.permutation(n)]

    flipped = np.zeros(n, dtype=bool)

    for tier in complexity.TIERS:
        members = np.array([i for i in range(n) if tiers[i] == tier], dtype=np.int64)
        quota = util.roundHalfAway(FLIP_RATES[tier] * len(members))

        if quota:
            flipped[gen.permutation(members)[:quota]] = True

    labels = np.where(flipped, 1 - truth, truth)

    samples = []
    for i in range(n):
        samples.append(
            SyntheticSample(
                "s%05d" % i,
                feats[i],
                int(labels[i]),
                tiers[i],
                "p%04d" % (i // patientSize),
                bool(flipped[i]),
            )
        )

    log.info(
        "generated %d synthetic samples, %d labels flipped", n, int(flipped.sum())
    )

    return SyntheticDataset(samples, seed, mix)


# logistic regression trained by one plain gradient step per batch
class LogisticLearner:
    def __init__(self, dim):
        self.weights = np.zeros(dim, dtype=np.float64)
        self.bias = 0.0

    def predict(self, x):
        return 1.0 / (1.0 + np.exp(-(x @ self.weights + self.bias)))

    # mean binary cross-entropy over (x, y)
    def loss(self, x, y):
        p = np.clip(self.predict(x), PROB_EPSILON, 1.0 - PROB_EPSILON)

        return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))

    # one step on batch (x, y); returns the loss before the step
    def step(self, x, y, lr, weightDecay):
        loss = self.loss(x, y)

        err = self.predict(x) - y
        gradW = x.T @ err / len(y) + weightDecay * self.weights
        gradB = float(np.mean(err))

        self.weights = self.weights - lr * gradW
        self.bias = self.bias - lr * gradB

        return loss


# one executed batch
class BatchRecord:
    def __init__(
        self, stage, epoch, batch, lr, weightDecay, hardCount, size, floorMet, loss
    ):
        self.stage = stage
        self.epoch = epoch
        self.batch = batch

        # hyperparameters the step was run with
        self.lr = lr
        self.weightDecay = weightDecay

        self.hardCount = hardCount
        self.size = size

        # the sampler's verdict on the batch's hard floor
        self.floorMet = floorMet

        # batch loss before the step
        self.loss = loss

    def where(self):
        return "stage %d epoch %d batch %d" % (self.stage, self.epoch, self.batch)

    def toDict(self):
        return {
            "stage": self.stage,
            "epoch": self.epoch,
            "batch": self.batch,
            "lr": self.lr,
            "weight_decay": self.weightDecay,
            "hard_count": self.hardCount,
            "size": self.size,
            "floor_met": self.floorMet,
            "loss": self.loss,
        }

    @staticmethod
    def fromDict(d):
        return BatchRecord(
            d["stage"],
            d["epoch"],
            d["batch"],
            d["lr"],
            d["weight_decay"],
            d["hard_count"],
            d["size"],
            d["floor_met"],
            d["loss"],
        )


class TrainLog:
    def __init__(self, batchSize, seed):
        self.batchSize = batchSize
        self.seed = seed

        # list of BatchRecords in execution order
        self.records = []

        # key = stage index, value = epochs executed
        self.epochsByStage = {}

        # key = stage index, value = eligible pool size
        self.eligibleByStage = {}

        # key = (stage, epoch), value = batches the sampler planned
        self.plannedBatches = {}

        # full-dataset loss before training and after each stage
        self.initialLoss = None
        self.stageLoss = {}

        # plan / dataset mismatches noticed during the run
        self.notes = []

    def __len__(self):
        return len(self.records)

    # [(stage, epoch, mean batch loss), ...] in execution order
    def lossTrajectory(self):
        sums = {}

        for r in self.records:
            tot, cnt = sums.get((r.stage, r.epoch), (0.0, 0))
            sums[(r.stage, r.epoch)] = (tot + r.loss, cnt + 1)

        return [(s, e, tot / cnt) for (s, e), (tot, cnt) in sums.items()]

    def toDict(self):
        return {
            "batch_size": self.batchSize,
            "seed": self.seed,
            "epochs_by_stage": {str(k): v for k, v in self.epochsByStage.items()},
            "eligible_by_stage": {str(k): v for k, v in self.eligibleByStage.items()},
            "planned_batches": [
                [s, e, cnt] for (s, e), cnt in self.plannedBatches.items()
            ],
            "initial_loss": self.initialLoss,
            "stage_loss": {str(k): v for k, v in self.stageLoss.items()},
            "notes": self.notes,
            "records": [r.toDict() for r in self.records],
        }

    @staticmethod
    def fromDict(d):
        tl = TrainLog(d["batch_size"], d["seed"])

        tl.records = [BatchRecord.fromDict(rd) for rd in d["records"]]
        tl.epochsByStage = {int(k): v for k, v in d["epochs_by_stage"].items()}
        tl.eligibleByStage = {int(k): v for k, v in d["eligible_by_stage"].items()}
        tl.plannedBatches = {(s, e): cnt for s, e, cnt in d["planned_batches"]}
        tl.initialLoss = d["initial_loss"]
        tl.stageLoss = {int(k): v for k, v in d["stage_loss"].items()}
        tl.notes = list(d["notes"])

        return tl


# execute 'plan' on dataset 'data'
def runPlan(plan, data, batchSize, seed):
    plan.validate()

    index = {s.sampleId: i for i, s in enumerate(data.samples)}
    x = data.features()
    y = data.labels()

    learner = LogisticLearner(x.shape[1])

    tl = TrainLog(batchSize, seed)
    tl.initialLoss = learner.loss(x, y)

    for stage in plan.stages:
        eligible, hardPool = data.stagePool(stage)

        if not eligible:
            raise ValidationError(
                "stage %d has no eligible samples in the dataset" % stage.index
            )

        if not hardPool and stage.minHardRatio > 0:
            msg = "stage %d: hard floor %.4f with no Hard samples" % (
                stage.index,
                stage.minHardRatio,
            )
            log.warning(msg)
            tl.notes.append(msg)

        tl.eligibleByStage[stage.index] = len(eligible)

        for epoch in range(1, stage.epochs + 1):
            batches = list(
                sampler.iterEpochBatches(
                    eligible,
                    hardPool,
                    batchSize,
                    stage.minHardRatio,
                    seed,
                    epoch,
                    stage.index,
                )
            )
            tl.plannedBatches[(stage.index, epoch)] = len(batches)

            for count, b in enumerate(batches):
                rows = [index[sid] for sid in b.sliceIds]
                loss = learner.step(x[rows], y[rows], stage.lr, plan.weightDecay)

                tl.records.append(
                    BatchRecord(
                        stage.index,
                        epoch,
                        count,
                        stage.lr,
                        plan.weightDecay,
                        b.hardCount(),
                        len(b),
                        b.floorMet,
                        loss,
                    )
                )

        tl.epochsByStage[stage.index] = stage.epochs
        tl.stageLoss[stage.index] = learner.loss(x, y)

        log.info(
            "stage %d: %d epochs, loss %.4f",
            stage.index,
            stage.epochs,
            tl.stageLoss[stage.index],
        )

    return tl


class CheckResult:
    def __init__(self, name, passed, counterexample=None):
        self.name = name
        self.passed = passed

        # description of the first violation, if any
        self.counterexample = counterexample

    def toDict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "counterexample": self.counterexample,
        }


class FidelityReport:
    def __init__(self, checks):
        # list of CheckResults, in CHECKS order
        self.checks = checks

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def get(self, name):
        for c in self.checks:
            if c.name == name:
                return c

        return None

    def toDict(self):
        return {
            "passed": self.passed,
            "checks": [c.toDict() for c in self.checks],
        }


# every stage ran exactly its planned number of epochs
def _checkEpochs(tl, plan):
    for st in plan.stages:
        logged = len(util.unique(r.epoch for r in tl.records if r.stage == st.index))

        if logged != st.epochs:
            return "stage %d: %d epochs logged, %d planned" % (
                st.index,
                logged,
                st.epochs,
            )

        if tl.epochsByStage.get(st.index) != st.epochs:
            return "stage %d: summary says %r epochs, %d planned" % (
                st.index,
                tl.epochsByStage.get(st.index),
                st.epochs,
            )

    return None


def _checkLr(tl, plan):
    stages = {st.index: st for st in plan.stages}

    for r in tl.records:
        st = stages.get(r.stage)

        if st is None:
            return "%s: stage not in plan" % r.where()

        if abs(r.lr - st.lr) > LR_TOLERANCE * abs(st.lr):
            return "%s: lr %r, planned %r" % (r.where(), r.lr, st.lr)

    return None


# every batch meets its hard floor or is flagged as not meeting it
def _checkFloor(tl, plan):
    stages = {st.index: st for st in plan.stages}

    for r in tl.records:
        st = stages.get(r.stage)

        if st is None:
            return "%s: stage not in plan" % r.where()

        need = util.ceilRatio(st.minHardRatio, r.size)

        if r.floorMet and (r.hardCount < need):
            return "%s: %d Hard of %d, floor needs %d" % (
                r.where(),
                r.hardCount,
                r.size,
                need,
            )

    return None


# the log holds, for every epoch, exactly the batches the sampler plans
# for that epoch's pools in 'data', and its summary agrees
def _checkBatches(tl, plan, data):
    logged = collections.Counter((r.stage, r.epoch) for r in tl.records)
    expected = 0

    for st in plan.stages:
        eligible, hardPool = data.stagePool(st)

        if not eligible:
            return "stage %d: no eligible samples in the dataset" % st.index

        least = -(-len(eligible) // tl.batchSize)

        for epoch in range(1, st.epochs + 1):
            want = sum(
                1
                for b in sampler.iterEpochBatches(
                    eligible,
                    hardPool,
                    tl.batchSize,
                    st.minHardRatio,
                    tl.seed,
                    epoch,
                    st.index,
                )
            )

            if want < least:
                return "stage %d epoch %d: sampler plans %d batches, pool needs %d" % (
                    st.index,
                    epoch,
                    want,
                    least,
                )

            got = logged.get((st.index, epoch), 0)

            if got != want:
                return "stage %d epoch %d: %d batches logged, sampler plans %d" % (
                    st.index,
                    epoch,
                    got,
                    want,
                )

            summary = tl.plannedBatches.get((st.index, epoch))

            if summary != want:
                return "stage %d epoch %d: summary says %r batches, sampler %d" % (
                    st.index,
                    epoch,
                    summary,
                    want,
                )

            expected += want

    if len(tl.records) != expected:
        return "%d batches logged, %d planned" % (len(tl.records), expected)

    return None


# run every fidelity check of 'tl' against 'plan'. 'data' is the dataset
# the run trained on; batch counts are re-derived from it.
def verifyExecution(tl, plan, data):
    checks = []

    for name, func in (
        (CHECK_EPOCHS, _checkEpochs),
        (CHECK_LR, _checkLr),
        (CHECK_FLOOR, _checkFloor),
        (CHECK_BATCHES, lambda tl, plan: _checkBatches(tl, plan, data)),
    ):
        bad = func(tl, plan)
        checks.append(CheckResult(name, bad is None, bad))

        if bad:
            log.warning("fidelity check '%s' failed: %s", name, bad)

    return FidelityReport(checks)
