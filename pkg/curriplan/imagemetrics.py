# Per-slice image quality features and CLAHE enhancement. Images are
# 8-bit grayscale rasters held as (height, width) uint8 numpy arrays.

import logging
import os

import cv2
import numpy as np

import curriplan.util as util
from curriplan.error import ArtifactError, ValidationError

log = logging.getLogger(__name__)

# quality tiers
HIGH = "High"
MEDIUM = "Medium"
LOW = "Low"

QUALITY_TIERS = (HIGH, MEDIUM, LOW)

# 4-neighbour Laplacian stencil
LAPLACIAN_KERNEL = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)


# an 8-bit grayscale image
class GrayImage:
    def __init__(self, pixels):
        pixels = np.asarray(pixels)

        if pixels.ndim != 2:
            raise ValidationError(
                "image must be two-dimensional, got shape %s" % (pixels.shape,)
            )

        if pixels.dtype != np.uint8:
            if pixels.size and ((pixels.min() < 0) or (pixels.max() > 255)):
                raise ValidationError("pixel intensities must be within 0-255")

            pixels = pixels.astype(np.uint8)

        # row-major, shape (height, width)
        self.pixels = pixels

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    def isEmpty(self):
        return self.pixels.size == 0


# image quality signals of one slice
class QualityFeatures:
    def __init__(self, laplacianVar, contrast, lungCoverage):
        # variance of the Laplacian response (sharpness)
        self.laplacianVar = float(laplacianVar)

        # standard deviation of intensities
        self.contrast = float(contrast)

        # fraction of pixels inside the lung mask, 0-1
        self.lungCoverage = float(lungCoverage)

    def validate(self):
        if (self.laplacianVar < 0) or (self.contrast < 0) or (self.lungCoverage < 0):
            raise ValidationError("quality features must be non-negative")

        if self.lungCoverage > 1.0:
            raise ValidationError("lung_coverage must not exceed 1")

    # background slice ranking key
    def composite(self):
        return self.lungCoverage * self.contrast

    def toDict(self):
        return {
            "laplacian_var": self.laplacianVar,
            "contrast": self.contrast,
            "lung_coverage": self.lungCoverage,
        }

    @staticmethod
    def fromDict(d):
        return QualityFeatures(d["laplacian_var"], d["contrast"], d["lung_coverage"])

    def __eq__(self, other):
        return isinstance(other, QualityFeatures) and (
            self.toDict() == other.toDict()
        )

    def __repr__(self):
        return "QualityFeatures(%r, %r, %r)" % (
            self.laplacianVar,
            self.contrast,
            self.lungCoverage,
        )


# population variance of the 3x3 Laplacian response over the valid
# interior (no padding).
def laplacianVariance(img):
    if (img.width < 3) or (img.height < 3):
        raise ValidationError(
            "Laplacian needs at least a 3x3 image, got %dx%d" % (img.width, img.height)
        )

    resp = cv2.filter2D(
        img.pixels.astype(np.float64),
        cv2.CV_64F,
        LAPLACIAN_KERNEL,
        borderType=cv2.BORDER_REPLICATE,
    )

    return float(resp[1:-1, 1:-1].var())


# population standard deviation of all intensities
def contrastStddev(img):
    if img.isEmpty():
        raise ValidationError("contrast of an empty image is undefined")

    return float(img.pixels.astype(np.float64).std())


# fraction of 'mask' pixels equal to 255. 'img' only fixes the expected
# dimensions.
def lungCoverage(img, mask):
    if (img.width != mask.width) or (img.height != mask.height):
        raise ValidationError(
            "mask is %dx%d but image is %dx%d"
            % (mask.width, mask.height, img.width, img.height)
        )

    if mask.isEmpty():
        raise ValidationError("mask is empty")

    inside = np.count_nonzero(mask.pixels == 255)
    outside = np.count_nonzero(mask.pixels == 0)

    if inside + outside != mask.pixels.size:
        raise ValidationError("mask must contain only the values 0 and 255")

    return inside / float(mask.pixels.size)


def qualityFeatures(img, mask):
    return QualityFeatures(
        laplacianVariance(img), contrastStddev(img), lungCoverage(img, mask)
    )


# contrast-limited adaptive histogram equalization over a tiles x tiles
# grid. the per-tile histograms have 256 bins and are clipped at
# clipLimit * tilePixels / 256 with the excess spread uniformly; tile
# mappings are interpolated bilinearly between tile centers.
def clahe(img, clipLimit=2.0, tiles=8):
    if clipLimit < 1.0:
        raise ValidationError("CLAHE clip limit must be >= 1, got %r" % clipLimit)

    if tiles < 1:
        raise ValidationError("CLAHE needs at least one tile per side")

    if (img.width < tiles) or (img.height < tiles):
        raise ValidationError(
            "a %dx%d image is smaller than the %dx%d tile grid"
            % (img.width, img.height, tiles, tiles)
        )

    eq = cv2.createCLAHE(clipLimit=float(clipLimit), tileGridSize=(tiles, tiles))

    return GrayImage(eq.apply(np.ascontiguousarray(img.pixels)))


# High iff sharp and high-contrast, Low iff blurry or flat, Medium
# otherwise. the threshold defaults match ConfigRun.
def qualityTier(
    q,
    highLaplacian=500.0,
    highContrast=30.0,
    lowLaplacian=100.0,
    lowContrast=10.0,
):
    if (q.laplacianVar > highLaplacian) and (q.contrast > highContrast):
        return HIGH

    if (q.laplacianVar < lowLaplacian) or (q.contrast < lowContrast):
        return LOW

    return MEDIUM


def qualityTierCfg(q, cfg):
    return qualityTier(
        q,
        cfg.qualHighLaplacian,
        cfg.qualHighContrast,
        cfg.qualLowLaplacian,
        cfg.qualLowContrast,
    )


# resize so that the longer side equals 'size' and pad the shorter side
# with zeros, keeping the aspect ratio. returns (image, scale, padX,
# padY), where padX/padY are the left/top padding; odd padding puts the
# extra pixel at the bottom/right.
def letterbox(img, size=512):
    if img.isEmpty():
        raise ValidationError("cannot letterbox an empty image")

    scale = size / float(max(img.width, img.height))

    newW = util.clamp(util.roundHalfAway(img.width * scale), 1, size)
    newH = util.clamp(util.roundHalfAway(img.height * scale), 1, size)

    if (newW, newH) == (img.width, img.height):
        resized = img.pixels
    else:
        interp = cv2.INTER_AREA if scale < 1.0 else cv2.INTER_LINEAR
        resized = cv2.resize(img.pixels, (newW, newH), interpolation=interp)

    padX = (size - newW) // 2
    padY = (size - newH) // 2

    out = np.zeros((size, size), dtype=np.uint8)
    out[padY : padY + newH, padX : padX + newW] = resized

    return (GrayImage(out), scale, padX, padY)


# read an 8-bit PNG as grayscale. colour images are converted with the
# BT.601 luma weights.
def readImage(path):
    data = cv2.imread(path, cv2.IMREAD_UNCHANGED)

    if data is None:
        raise ArtifactError("cannot read image '%s'" % path)

    if data.dtype != np.uint8:
        raise ValidationError("'%s' is not an 8-bit image" % path)

    if data.ndim == 3:
        if data.shape[2] == 4:
            data = cv2.cvtColor(data, cv2.COLOR_BGRA2GRAY)
        elif data.shape[2] == 3:
            data = cv2.cvtColor(data, cv2.COLOR_BGR2GRAY)
        else:
            data = data[:, :, 0]

    log.debug("read %s (%dx%d)", path, data.shape[1], data.shape[0])

    return GrayImage(data)


def writeImage(path, img):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)

    if not cv2.imwrite(path, img.pixels):
        raise ArtifactError("cannot write image '%s'" % path)
