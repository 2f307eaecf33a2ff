# The dataset manifest: one record per CT slice, stored as line-delimited
# JSON. Every other module works from a DatasetManifest.

import copy
import json
import logging
from typing import Dict, List, Optional

import pydantic
from pydantic import BaseModel, ConfigDict, Field

import curriplan.util as util
from curriplan.complexity import ComplexityFactors
from curriplan.error import ValidationError
from curriplan.imagemetrics import QualityFeatures

log = logging.getLogger(__name__)

MANIFEST_SCHEMA_VERSION = 1

# key of the optional first line carrying manifest metadata
HEADER_KEY = "manifest_header"


# on-disk record schema. parsing is strict: unknown fields are rejected
# unless the caller asks for lenient mode, in which case they're dropped
# before validation.
class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


class BoxLine(_Strict):
    x_px: int
    y_px: int
    w_px: int
    h_px: int


class QualityLine(_Strict):
    laplacian_var: float = Field(ge=0)
    contrast: float = Field(ge=0)
    lung_coverage: float = Field(ge=0, le=1)


class FactorsLine(_Strict):
    f_cnt: float
    f_size: float
    f_shape: float
    f_qual: float


class SliceLine(_Strict):
    slice_id: str = Field(min_length=1)
    patient_id: str = Field(min_length=1)
    image_path: str
    width_px: int = Field(gt=0)
    height_px: int = Field(gt=0)
    spacing_mm: float
    boxes: List[BoxLine]
    quality: Optional[QualityLine] = None
    complexity: Optional[float] = Field(default=None, ge=0)
    factors: Optional[FactorsLine] = None


class HeaderLine(_Strict):
    source_tag: str = ""
    schema_version: int = MANIFEST_SCHEMA_VERSION
    config_hash: Optional[str] = None
    steps: List[str] = []


# nested record models by field name, for lenient filtering
_nested = {
    "boxes": BoxLine,
    "quality": QualityLine,
    "factors": FactorsLine,
}


# an annotated nodule bounding box, in pixels with a top-left origin
class NoduleBox:
    def __init__(self, x, y, w, h):
        self.x = x
        self.y = y
        self.w = w
        self.h = h

    def area(self):
        return self.w * self.h

    # length of the longer side, the usual diameter proxy for a box
    def diameterMm(self, spacingMm):
        return max(self.w, self.h) * spacingMm

    def aspect(self):
        return max(self.w / float(self.h), self.h / float(self.w))

    def inside(self, width, height):
        return (
            (self.x >= 0)
            and (self.y >= 0)
            and (self.x + self.w <= width)
            and (self.y + self.h <= height)
        )

    def toDict(self):
        return {"x_px": self.x, "y_px": self.y, "w_px": self.w, "h_px": self.h}

    def __eq__(self, other):
        return isinstance(other, NoduleBox) and (self.toDict() == other.toDict())

    def __repr__(self):
        return "NoduleBox(%d, %d, %d, %d)" % (self.x, self.y, self.w, self.h)


# one CT slice
class SliceRecord:
    def __init__(
        self,
        sliceId,
        patientId,
        imagePath,
        width,
        height,
        spacingMm,
        boxes=None,
        quality=None,
        complexity=None,
        factors=None,
    ):
        self.sliceId: str = sliceId
        self.patientId: str = patientId

        # relative path of the PNG
        self.imagePath: str = imagePath

        # image dimensions in pixels
        self.width: int = width
        self.height: int = height

        # in-plane pixel spacing, mm / pixel
        self.spacingMm: float = spacingMm

        self.boxes: List[NoduleBox] = list(boxes or [])

        # QualityFeatures, or None until assessed
        self.quality: Optional[QualityFeatures] = quality

        # complexity score and its factors, or None until scored
        self.complexity: Optional[float] = complexity
        self.factors: Optional[ComplexityFactors] = factors

    def hasNodules(self):
        return len(self.boxes) > 0

    def isScored(self):
        return self.complexity is not None

    # shallow copy with its own box list
    def clone(self):
        s = copy.copy(self)
        s.boxes = list(self.boxes)

        return s

    # check the record's invariants, raising ValidationError naming the
    # slice and field.
    def validate(self, line=None):
        if not (self.spacingMm > 0):
            raise ValidationError(
                "spacing_mm must be positive, got %r" % self.spacingMm,
                line,
                self.sliceId,
            )

        for i, b in enumerate(self.boxes):
            if b.w <= 0:
                raise ValidationError(
                    "boxes[%d].w_px must be positive, got %d" % (i, b.w),
                    line,
                    self.sliceId,
                )

            if b.h <= 0:
                raise ValidationError(
                    "boxes[%d].h_px must be positive, got %d" % (i, b.h),
                    line,
                    self.sliceId,
                )

            if not b.inside(self.width, self.height):
                raise ValidationError(
                    "boxes[%d] %r lies outside the %dx%d image"
                    % (i, b, self.width, self.height),
                    line,
                    self.sliceId,
                )

    def toDict(self):
        d = {
            "slice_id": self.sliceId,
            "patient_id": self.patientId,
            "image_path": self.imagePath,
            "width_px": self.width,
            "height_px": self.height,
            "spacing_mm": self.spacingMm,
            "boxes": [b.toDict() for b in self.boxes],
        }

        if self.quality is not None:
            d["quality"] = self.quality.toDict()

        if self.complexity is not None:
            d["complexity"] = self.complexity

        if self.factors is not None:
            d["factors"] = self.factors.toDict()

        return d

    @staticmethod
    def fromLine(rec: SliceLine):
        return SliceRecord(
            rec.slice_id,
            rec.patient_id,
            rec.image_path,
            rec.width_px,
            rec.height_px,
            rec.spacing_mm,
            [NoduleBox(b.x_px, b.y_px, b.w_px, b.h_px) for b in rec.boxes],
            QualityFeatures.fromDict(rec.quality.model_dump()) if rec.quality else None,
            rec.complexity,
            ComplexityFactors.fromDict(rec.factors.model_dump())
            if rec.factors
            else None,
        )

    def __eq__(self, other):
        return isinstance(other, SliceRecord) and (self.toDict() == other.toDict())

    def __repr__(self):
        return "SliceRecord(%r, patient %r, %d boxes)" % (
            self.sliceId,
            self.patientId,
            len(self.boxes),
        )


class DatasetManifest:
    def __init__(self, slices, sourceTag=""):
        # ordered list of SliceRecords
        self.slices: List[SliceRecord] = list(slices)

        # free-form provenance
        self.sourceTag: str = sourceTag

        # preprocessing steps applied so far, e.g. ["filter", "select"]
        self.steps: List[str] = []

    def __len__(self):
        return len(self.slices)

    def __iter__(self):
        return iter(self.slices)

    # new manifest with the same metadata and the given slices
    def withSlices(self, slices, step=None):
        m = DatasetManifest(slices, self.sourceTag)
        m.steps = list(self.steps)

        if step:
            m.steps.append(step)

        return m

    def byId(self) -> Dict[str, SliceRecord]:
        return {s.sliceId: s for s in self.slices}

    def sliceIds(self):
        return [s.sliceId for s in self.slices]

    # patient IDs in order of first appearance
    def patients(self):
        return util.unique(s.patientId for s in self.slices)

    # key = patient ID, value = list of that patient's slices in manifest
    # order
    def slicesByPatient(self):
        ret = {}

        for s in self.slices:
            ret.setdefault(s.patientId, []).append(s)

        return ret

    def subset(self, sliceIds):
        wanted = set(sliceIds)

        return self.withSlices([s for s in self.slices if s.sliceId in wanted])

    def validate(self):
        seen = set()

        for s in self.slices:
            if s.sliceId in seen:
                raise ValidationError("duplicate slice_id", sliceId=s.sliceId)

            seen.add(s.sliceId)
            s.validate()


# drop keys the record schema doesn't know, recursing into nested
# records.
def _dropUnknown(d, model):
    ret = {}

    for key, val in d.items():
        if key not in model.model_fields:
            log.debug("ignoring unknown field '%s'", key)
            continue

        sub = _nested.get(key)

        if sub and isinstance(val, list):
            val = [_dropUnknown(v, sub) if isinstance(v, dict) else v for v in val]
        elif sub and isinstance(val, dict):
            val = _dropUnknown(val, sub)

        ret[key] = val

    return ret


def _describe(e: pydantic.ValidationError):
    err = e.errors()[0]
    loc = ".".join(str(it) for it in err["loc"])

    return "%s: %s" % (loc or "record", err["msg"])


# parse manifest text 'text'. 'name' is used in messages only.
def parseManifest(text, lenient=False, name="<manifest>"):
    slices = []
    header = HeaderLine()
    seen = {}

    lines = util.fixNL(text).split("\n")

    for i, line in enumerate(lines):
        lineNr = i + 1

        if not line.strip():
            continue

        try:
            d = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValidationError("malformed record in %s: %s" % (name, e.msg), lineNr)

        if not isinstance(d, dict):
            raise ValidationError("record must be a JSON object", lineNr)

        if HEADER_KEY in d:
            if slices:
                raise ValidationError("manifest header must be the first line", lineNr)

            try:
                header = HeaderLine.model_validate_json(json.dumps(d[HEADER_KEY]))
            except pydantic.ValidationError as e:
                raise ValidationError("bad manifest header: %s" % _describe(e), lineNr)

            continue

        sliceId = d.get("slice_id") if isinstance(d.get("slice_id"), str) else None

        if lenient:
            line = json.dumps(_dropUnknown(d, SliceLine))

        try:
            rec = SliceLine.model_validate_json(line)
        except pydantic.ValidationError as e:
            raise ValidationError(_describe(e), lineNr, sliceId)

        s = SliceRecord.fromLine(rec)
        s.validate(lineNr)

        if s.sliceId in seen:
            raise ValidationError(
                "duplicate slice_id (first seen on line %d)" % seen[s.sliceId],
                lineNr,
                s.sliceId,
            )

        seen[s.sliceId] = lineNr
        slices.append(s)

    m = DatasetManifest(slices, header.source_tag)
    m.steps = list(header.steps)

    log.info("parsed %d slices from %s", len(slices), name)

    return m


# load a manifest file. bytes that are not UTF-8 are a validation error
# on the line holding them.
def loadManifest(path, lenient=False):
    data = util.loadFile(path, binary=True)

    try:
        text = data.decode("UTF-8")
    except UnicodeDecodeError as e:
        before = data[: e.start].replace(b"\r\n", b"\n").replace(b"\r", b"\n")

        raise ValidationError(
            "invalid UTF-8 in %s: %s" % (path, e.reason), before.count(b"\n") + 1
        )

    return parseManifest(text, lenient, path)


def manifestToText(m, configHash=None):
    header = {
        "source_tag": m.sourceTag,
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "steps": m.steps,
    }

    if configHash:
        header["config_hash"] = configHash

    out = [json.dumps({HEADER_KEY: header}, separators=(",", ":"))]

    for s in m.slices:
        out.append(json.dumps(s.toDict(), separators=(",", ":")))

    return "\n".join(out) + "\n"


def saveManifest(m, path, configHash=None):
    util.writeToFile(path, manifestToText(m, configHash))


# remove boxes whose diameter is below 'minDiameterMm'. slices left
# without boxes are kept as negatives.
def filterSmallNodules(m, minDiameterMm=3.0):
    out = []
    removed = 0

    for s in m.slices:
        keep = [b for b in s.boxes if b.diameterMm(s.spacingMm) >= minDiameterMm]

        if len(keep) == len(s.boxes):
            out.append(s)
            continue

        removed += len(s.boxes) - len(keep)

        s = s.clone()
        s.boxes = keep

        # scores depend on the boxes
        s.complexity = None
        s.factors = None

        out.append(s)

    log.info("removed %d boxes below %.2f mm", removed, minDiameterMm)

    return m.withSlices(out, "filter")


# keep every slice with a box and, per patient, the best background
# slices up to 'bgRatio' per nodule slice (or 'bgRatio' in total for
# patients without nodules). background slices are ranked by descending
# lung_coverage * contrast, ties broken by slice_id.
def selectSlices(m, bgRatio=2):
    if bgRatio < 0:
        raise ValidationError("background ratio must be non-negative")

    for s in m.slices:
        if s.quality is None:
            raise ValidationError("quality features missing", sliceId=s.sliceId)

    keepIds = set()

    for patientId, slices in m.slicesByPatient().items():
        nodule = [s for s in slices if s.hasNodules()]
        background = [s for s in slices if not s.hasNodules()]

        keepIds.update(s.sliceId for s in nodule)

        limit = bgRatio * max(len(nodule), 1)
        background.sort(key=lambda s: (-s.quality.composite(), s.sliceId))

        keepIds.update(s.sliceId for s in background[:limit])

    out = [s for s in m.slices if s.sliceId in keepIds]

    log.info("selected %d of %d slices", len(out), len(m.slices))

    return m.withSlices(out, "select")
