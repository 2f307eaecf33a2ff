# Per-epoch batch composition with a guaranteed minimum share of Hard
# slices in every batch.
#
# The epoch's eligible slices are shuffled into a queue. Each batch takes
# a window of up to B slices from the front of the queue. When the window
# holds too few Hard slices, its last non-Hard members are put back at
# the front of the queue and the freed slots are filled from a separately
# shuffled cycle over the hard pool. Put back slices land in the next
# batch, so every eligible slice is still trained on once per epoch.

import collections
import logging

import curriplan.rng as rng
import curriplan.util as util
from curriplan.error import ValidationError

log = logging.getLogger(__name__)


class Batch:
    def __init__(self, sliceIds, hardFlags, required, floorMet):
        self.sliceIds = sliceIds

        # parallel to sliceIds; True for members of the hard pool
        self.hardFlags = hardFlags

        # number of Hard members this batch must have
        self.required = required

        self.floorMet = floorMet

    def __len__(self):
        return len(self.sliceIds)

    def hardCount(self):
        return sum(self.hardFlags)

    def toDict(self):
        return {
            "slice_ids": self.sliceIds,
            "hard_flags": self.hardFlags,
            "required_hard": self.required,
            "floor_met": self.floorMet,
        }

    @staticmethod
    def fromDict(d):
        return Batch(
            list(d["slice_ids"]),
            list(d["hard_flags"]),
            d["required_hard"],
            d["floor_met"],
        )


class BatchPlan:
    def __init__(self, stageIndex, epochIndex, batchSize, minHardRatio, seed):
        self.stageIndex = stageIndex
        self.epochIndex = epochIndex
        self.batchSize = batchSize
        self.minHardRatio = minHardRatio
        self.seed = seed

        # list of Batches
        self.batches = []

        # True if some batch misses its hard floor, including every
        # batch of an epoch with an empty hard pool and a floor > 0
        self.floorUnmet = False

    def __len__(self):
        return len(self.batches)

    def __iter__(self):
        return iter(self.batches)

    def sliceIds(self):
        ret = []

        for b in self.batches:
            ret.extend(b.sliceIds)

        return ret

    def toDict(self):
        return {
            "stage_index": self.stageIndex,
            "epoch_index": self.epochIndex,
            "batch_size": self.batchSize,
            "min_hard_ratio": self.minHardRatio,
            "seed": self.seed,
            "prng": rng.PRNG_NAME,
            "floor_unmet": self.floorUnmet,
            "batches": [b.toDict() for b in self.batches],
        }

    @staticmethod
    def fromDict(d):
        bp = BatchPlan(
            d["stage_index"],
            d["epoch_index"],
            d["batch_size"],
            d["min_hard_ratio"],
            d["seed"],
        )
        bp.batches = [Batch.fromDict(bd) for bd in d["batches"]]
        bp.floorUnmet = d["floor_unmet"]

        return bp

    # one line per batch: "<index>\t<id> <id>* ...", hard members
    # marked with '*'.
    def toText(self):
        lines = []

        for i, b in enumerate(self.batches):
            ids = [
                sid + ("*" if hard else "") for sid, hard in zip(b.sliceIds, b.hardFlags)
            ]
            lines.append("%d\t%s" % (i, " ".join(ids)))

        return "".join(s + "\n" for s in lines)


# endless cycle over the distinct hard pool, reshuffled on every pass
class _HardCycle:
    def __init__(self, ids, seed, tag):
        self.ids = ids
        self.gen = rng.stream(seed, tag)

        self.order = []
        self.pos = 0

    # next id not in 'exclude'. the caller guarantees one exists.
    def next(self, exclude):
        while True:
            if self.pos >= len(self.order):
                self.order = [self.ids[i] for i in self.gen.permutation(len(self.ids))]
                self.pos = 0

            sid = self.order[self.pos]
            self.pos += 1

            if sid not in exclude:
                return sid


def _checkArgs(eligible, batchSize, rMin):
    if batchSize < 1:
        raise ValidationError("batch size must be >= 1, got %r" % batchSize)

    if not (0.0 <= rMin <= 1.0):
        raise ValidationError("hard ratio must be within 0-1, got %r" % rMin)

    if not eligible:
        raise ValidationError("cannot sample from an empty pool")


# number of hard slices to add to a last batch holding 'size' slices of
# which 'hard' are Hard: the fewest meeting the floor, or as many as
# allowed if none do.
def _finalInjection(size, hard, rMin, limit):
    for j in range(limit + 1):
        if hard + j >= util.ceilRatio(rMin, size + j):
            return j

    return limit


# yield the Batches of one epoch in order
def iterEpochBatches(
    eligible, hardPool, batchSize, rMin, seed, epochIndex, stageIndex=1
):
    eligible = util.unique(eligible)
    _checkArgs(eligible, batchSize, rMin)

    hardIds = util.unique(hardPool)
    hardSet = set(hardIds)

    # a floor filling whole batches leaves no room for the non-Hard
    # slices every epoch must still cover
    if (
        hardIds
        and (util.ceilRatio(rMin, batchSize) >= batchSize)
        and any(sid not in hardSet for sid in eligible)
    ):
        raise ValidationError(
            "hard floor %r fills every batch of %d; no room for non-Hard slices"
            % (rMin, batchSize)
        )

    queue = collections.deque(
        rng.shuffled(eligible, seed, "sample/%d/%d" % (stageIndex, epochIndex))
    )
    cycle = _HardCycle(hardIds, seed, "hard/%d/%d" % (stageIndex, epochIndex))

    # hard slots of a full batch
    hardSlots = util.ceilRatio(rMin, batchSize) if hardIds else 0

    while queue:
        window = [queue.popleft() for i in range(min(batchSize, len(queue)))]

        hard = [sid for sid in window if sid in hardSet]
        nonHard = [sid for sid in window if sid not in hardSet]

        avail = len(hardSet) - len(hard)

        # a batch always keeps one non-Hard member if it has any, so the
        # queue shrinks on every batch
        inject = min(
            max(hardSlots - len(hard), 0),
            avail,
            batchSize - len(hard) - (1 if nonHard else 0),
        )

        keep = min(len(nonHard), batchSize - len(hard) - inject)
        displaced = nonHard[keep:]

        if displaced:
            queue.extendleft(reversed(displaced))
            displacedSet = set(displaced)
            members = [sid for sid in window if sid not in displacedSet]
        else:
            members = list(window)

            if not queue:
                inject = _finalInjection(
                    len(members),
                    len(hard),
                    rMin,
                    min(avail, batchSize - len(members)),
                )

        inBatch = set(members)
        for i in range(inject):
            sid = cycle.next(inBatch)
            inBatch.add(sid)
            members.append(sid)

        flags = [sid in hardSet for sid in members]
        required = util.ceilRatio(rMin, len(members)) if hardIds else 0
        floorMet = sum(flags) >= util.ceilRatio(rMin, len(members))

        yield Batch(members, flags, required, floorMet)


# materialize one epoch's batches
def buildEpochBatches(
    eligible, hardPool, batchSize, rMin, seed, epochIndex, stageIndex=1
):
    bp = BatchPlan(stageIndex, epochIndex, batchSize, rMin, seed)

    for b in iterEpochBatches(
        eligible, hardPool, batchSize, rMin, seed, epochIndex, stageIndex
    ):
        bp.batches.append(b)

        if not b.floorMet:
            bp.floorUnmet = True

    if bp.floorUnmet:
        log.warning(
            "stage %d epoch %d: hard floor %.3f unmet in some batches "
            "(hard pool %d)",
            stageIndex,
            epochIndex,
            rMin,
            len(set(hardPool)),
        )

    return bp
