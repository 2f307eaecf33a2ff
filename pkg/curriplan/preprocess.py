# Preprocessing of real slice images: quality assessment against lung
# masks, CLAHE enhancement and letterboxing, and the ingest pipeline that
# chains them with nodule filtering and slice selection.

import logging
import os

import curriplan.imagemetrics as imagemetrics
import curriplan.manifest as manifest
import curriplan.util as util
from curriplan.error import ValidationError

log = logging.getLogger(__name__)


# quality features of the image at 'imagePath' given the binary lung mask
# at 'maskPath'
def assessSlice(imagePath, maskPath):
    img = imagemetrics.readImage(imagePath)
    mask = imagemetrics.readImage(maskPath)

    return imagemetrics.qualityFeatures(img, mask)


def _readSliceImage(s, imagesDir):
    img = imagemetrics.readImage(os.path.join(imagesDir, s.imagePath))

    if (img.width, img.height) != (s.width, s.height):
        raise ValidationError(
            "image is %dx%d but the record says %dx%d"
            % (img.width, img.height, s.width, s.height),
            sliceId=s.sliceId,
        )

    return img


# fill in quality features for every slice lacking them. the mask of a
# slice lives at the same relative path under 'masksDir' as its image
# under 'imagesDir'.
def assessManifest(m, imagesDir, masksDir):
    out = []
    assessed = 0

    for s in m.slices:
        if s.quality is None:
            _readSliceImage(s, imagesDir)

            q = assessSlice(
                os.path.join(imagesDir, s.imagePath),
                os.path.join(masksDir, s.imagePath),
            )

            s = s.clone()
            s.quality = q

            # the quality factor changes
            s.complexity = None
            s.factors = None

            assessed += 1

        out.append(s)

    log.info("assessed %d slices", assessed)

    return m.withSlices(out, "assess")


# map slice record 's' onto its letterboxed image: boxes are scaled,
# shifted by the padding and kept inside the new bounds, and pixel
# spacing grows by 1 / scale.
def letterboxSlice(s, scale, padX, padY, size):
    boxes = []

    for b in s.boxes:
        x = util.clamp(util.roundHalfAway(b.x * scale) + padX, 0, size - 1)
        y = util.clamp(util.roundHalfAway(b.y * scale) + padY, 0, size - 1)
        w = util.clamp(util.roundHalfAway(b.w * scale), 1, size - x)
        h = util.clamp(util.roundHalfAway(b.h * scale), 1, size - y)

        boxes.append(manifest.NoduleBox(x, y, w, h))

    s = s.clone()
    s.width = size
    s.height = size
    s.spacingMm = s.spacingMm / scale
    s.boxes = boxes

    # box areas changed
    s.complexity = None
    s.factors = None

    return s


# CLAHE then letterbox every slice, writing "<outDir>/<slice_id>.png".
# the returned manifest points at the new files, relative to 'outDir'.
def enhanceManifest(m, imagesDir, outDir, cfg, size=None):
    if size is None:
        size = cfg.imageSize

    out = []

    for s in m.slices:
        img = _readSliceImage(s, imagesDir)

        img = imagemetrics.clahe(img, cfg.claheClip, cfg.claheTiles)
        img, scale, padX, padY = imagemetrics.letterbox(img, size)

        name = "%s.png" % s.sliceId
        imagemetrics.writeImage(os.path.join(outDir, name), img)

        s = letterboxSlice(s, scale, padX, padY, size)
        s.imagePath = name

        out.append(s)

    log.info("enhanced %d slices into %s", len(out), outDir)

    return m.withSlices(out, "enhance")


# the ingest pipeline: (assess) -> filter -> select -> (enhance).
# assessment runs when 'masksDir' is given, enhancement when 'outDir' is.
def ingest(m, cfg, imagesDir=".", masksDir=None, outDir=None):
    if masksDir:
        m = assessManifest(m, imagesDir, masksDir)

    m = manifest.filterSmallNodules(m, cfg.minDiameterMm)
    m = manifest.selectSlices(m, cfg.bgRatio)

    if outDir:
        m = enhanceManifest(m, imagesDir, outDir, cfg)

    return m
