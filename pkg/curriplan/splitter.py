# Patient-level train / val / test splitting and patient-level data scale
# subsets. All slices of a patient always end up on the same side.

import logging

import curriplan.rng as rng
import curriplan.util as util
from curriplan.error import ValidationError

log = logging.getLogger(__name__)

SUBSET_NAMES = ("train", "val", "test")

# the data scales compared in reports
RHO_GRID = (0.1, 0.2, 0.5, 1.0)


class DatasetSplit:
    def __init__(self, seed, ratios):
        self.seed = seed
        self.ratios = tuple(ratios)
        self.prng = rng.PRNG_NAME

        # key = subset name, value = list of slice IDs in manifest order
        self.slices = {name: [] for name in SUBSET_NAMES}

        # key = subset name, value = list of patient IDs in assignment
        # order
        self.patients = {name: [] for name in SUBSET_NAMES}

    @property
    def train(self):
        return self.slices["train"]

    @property
    def val(self):
        return self.slices["val"]

    @property
    def test(self):
        return self.slices["test"]

    def summary(self):
        return {
            name: {
                "slices": len(self.slices[name]),
                "patients": len(self.patients[name]),
            }
            for name in SUBSET_NAMES
        }

    def toDict(self):
        return {
            "seed": self.seed,
            "prng": self.prng,
            "ratios": list(self.ratios),
            "subsets": {name: self.slices[name] for name in SUBSET_NAMES},
            "patients": {name: self.patients[name] for name in SUBSET_NAMES},
            "summary": self.summary(),
        }

    @staticmethod
    def fromDict(d):
        sp = DatasetSplit(d["seed"], d["ratios"])

        for name in SUBSET_NAMES:
            sp.slices[name] = list(d["subsets"][name])
            sp.patients[name] = list(d["patients"][name])

        return sp


# a patient-closed fraction of the training set
class ScaleSubset:
    def __init__(self, rho, sliceIds, achievedRho, patients, seed):
        # requested fraction, in (0, 1]
        self.rho = rho

        self.sliceIds = list(sliceIds)

        # actual fraction of training slices
        self.achievedRho = achievedRho

        self.patients = list(patients)
        self.seed = seed

    def toDict(self):
        return {
            "rho": self.rho,
            "achievedRho": self.achievedRho,
            "seed": self.seed,
            "prng": rng.PRNG_NAME,
            "patients": self.patients,
            "sliceIds": self.sliceIds,
        }

    @staticmethod
    def fromDict(d):
        return ScaleSubset(
            d["rho"], d["sliceIds"], d["achievedRho"], d["patients"], d["seed"]
        )


# patients per subset for 'n' patients: largest remainder over the ratios
# (ties go to the earlier subset), then every subset gets at least one
# patient, taken from the currently largest subset.
def patientCounts(n, ratios):
    counts = util.largestRemainder(n, ratios)

    for i in range(len(counts)):
        if counts[i] == 0:
            largest = max(range(len(counts)), key=lambda j: (counts[j], -j))
            counts[largest] -= 1
            counts[i] += 1

    return counts


def patientSplit(m, ratios=(0.8, 0.1, 0.1), seed=0):
    if len(ratios) != 3:
        raise ValidationError("expected three split ratios, got %d" % len(ratios))

    if any(r < 0 for r in ratios) or (abs(sum(ratios) - 1.0) > 1e-6):
        raise ValidationError("split ratios must be non-negative and sum to 1")

    if len(m) == 0:
        raise ValidationError("cannot split an empty manifest")

    patients = m.patients()

    if len(patients) < 3:
        raise ValidationError(
            "patient-level splitting needs at least 3 patients, got %d"
            % len(patients)
        )

    order = rng.shuffled(patients, seed, "split")
    counts = patientCounts(len(order), ratios)

    sp = DatasetSplit(seed, ratios)
    subsetOf = {}

    pos = 0
    for name, cnt in zip(SUBSET_NAMES, counts):
        sp.patients[name] = order[pos : pos + cnt]

        for p in sp.patients[name]:
            subsetOf[p] = name

        pos += cnt

    for s in m.slices:
        sp.slices[subsetOf[s.patientId]].append(s.sliceId)

    log.info(
        "split %d patients into %d/%d/%d",
        len(order),
        counts[0],
        counts[1],
        counts[2],
    )

    return sp


# the shuffled patient order of the training set 'train' (slice IDs of
# manifest 'm'), each patient's slice IDs, and the (slice ID, patient
# ID) pairs in manifest order.
def _trainPatients(m, train, seed):
    wanted = set(train)
    byPatient = {}
    members = []

    for s in m.slices:
        if s.sliceId in wanted:
            byPatient.setdefault(s.patientId, []).append(s.sliceId)
            members.append((s.sliceId, s.patientId))

    if not byPatient:
        raise ValidationError("cannot subsample an empty training set")

    order = rng.shuffled(list(byPatient), seed, "subset")

    return order, byPatient, members


def _take(order, byPatient, members, rho, seed):
    if not (0.0 < rho <= 1.0):
        raise ValidationError("rho must be in (0, 1], got %r" % rho)

    total = sum(len(v) for v in byPatient.values())

    if rho >= 1.0:
        chosen = list(order)
    else:
        target = rho * total
        chosen = []
        cum = 0

        for p in order:
            if cum + len(byPatient[p]) > target + util.EPSILON:
                break

            chosen.append(p)
            cum += len(byPatient[p])

        if len(chosen) < len(order):
            nxt = order[len(chosen)]
            over = cum + len(byPatient[nxt])

            # one more patient iff that lands strictly closer, and always
            # at least one patient
            if (not chosen) or (abs(over - target) < abs(cum - target) - util.EPSILON):
                chosen.append(nxt)

    chosenSet = set(chosen)
    ids = [sid for sid, p in members if p in chosenSet]

    return ScaleSubset(rho, ids, len(ids) / float(total), chosen, seed)


# patient-closed subset of training slices 'train' whose slice fraction
# comes as close to 'rho' as the greedy patient order allows. subsets for
# different rho under one seed are nested.
def subsampleScale(m, train, rho, seed=0):
    order, byPatient, members = _trainPatients(m, train, seed)

    sub = _take(order, byPatient, members, rho, seed)

    log.info(
        "rho %.3f -> %d patients, achieved %.4f", rho, len(sub.patients), sub.achievedRho
    )

    return sub


def subsampleScales(m, train, grid=RHO_GRID, seed=0):
    order, byPatient, members = _trainPatients(m, train, seed)

    return [_take(order, byPatient, members, rho, seed) for rho in grid]
