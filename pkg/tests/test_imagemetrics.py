import random

import numpy as np
import pytest

import curriplan.imagemetrics as imagemetrics
from curriplan.error import ArtifactError, ValidationError

# test image quality features, CLAHE and letterboxing


def img(rows):
    return imagemetrics.GrayImage(np.array(rows, dtype=np.int64))


def constant(w, h, val):
    return imagemetrics.GrayImage(np.full((h, w), val, dtype=np.uint8))


def checkerboard(w, h):
    return img([[255 * ((x + y) % 2) for x in range(w)] for y in range(h)])


# per-pixel Laplacian variance over the interior
def laplacianOracle(rows):
    h = len(rows)
    w = len(rows[0])
    vals = []

    for y in range(1, h - 1):
        for x in range(1, w - 1):
            vals.append(
                rows[y - 1][x]
                + rows[y + 1][x]
                + rows[y][x - 1]
                + rows[y][x + 1]
                - 4 * rows[y][x]
            )

    mean = sum(vals) / float(len(vals))

    return sum((v - mean) ** 2 for v in vals) / len(vals)


def contrastOracle(rows):
    vals = [v for r in rows for v in r]
    mean = sum(vals) / float(len(vals))

    return (sum((v - mean) ** 2 for v in vals) / len(vals)) ** 0.5


def testOracles():
    r = random.Random(5)

    for i in range(50):
        rows = [[r.randint(0, 255) for x in range(16)] for y in range(16)]

        assert imagemetrics.laplacianVariance(img(rows)) == pytest.approx(
            laplacianOracle(rows), rel=1e-12, abs=1e-9
        )
        assert imagemetrics.contrastStddev(img(rows)) == pytest.approx(
            contrastOracle(rows), rel=1e-12, abs=1e-9
        )


def testConstant():
    c = constant(16, 16, 137)

    assert imagemetrics.laplacianVariance(c) == 0.0
    assert imagemetrics.contrastStddev(c) == 0.0


def testCheckerboard():
    cb = checkerboard(16, 16)

    assert imagemetrics.laplacianVariance(cb) == pytest.approx(1020.0**2, rel=1e-12)
    assert imagemetrics.contrastStddev(cb) == pytest.approx(127.5, rel=1e-12)


def testSmallImages():
    with pytest.raises(ValidationError):
        imagemetrics.laplacianVariance(constant(2, 5, 0))

    with pytest.raises(ValidationError):
        imagemetrics.contrastStddev(imagemetrics.GrayImage(np.zeros((0, 0))))

    assert imagemetrics.laplacianVariance(constant(3, 3, 9)) == 0.0


def testGrayImage():
    g = img([[0, 1, 2], [3, 4, 5]])

    assert (g.width, g.height) == (3, 2)
    assert g.pixels[1, 0] == 3
    assert g.pixels.dtype == np.uint8

    with pytest.raises(ValidationError):
        img([[256]])

    with pytest.raises(ValidationError):
        img([[0, -1]])

    with pytest.raises(ValidationError):
        imagemetrics.GrayImage(np.zeros((2, 2, 3)))


def testLungCoverage():
    im = constant(8, 4, 50)

    mask = np.zeros((4, 8), dtype=np.uint8)
    mask[:, :4] = 255

    assert imagemetrics.lungCoverage(im, imagemetrics.GrayImage(mask)) == 0.5
    assert imagemetrics.lungCoverage(im, constant(8, 4, 0)) == 0.0
    assert imagemetrics.lungCoverage(im, constant(8, 4, 255)) == 1.0

    with pytest.raises(ValidationError):
        imagemetrics.lungCoverage(im, constant(8, 4, 7))

    with pytest.raises(ValidationError):
        imagemetrics.lungCoverage(im, constant(4, 8, 255))

    q = imagemetrics.qualityFeatures(im, imagemetrics.GrayImage(mask))
    assert q == imagemetrics.QualityFeatures(0.0, 0.0, 0.5)


def testQualityTier():
    qt = imagemetrics.qualityTier
    QF = imagemetrics.QualityFeatures

    assert qt(QF(600, 40, 0.5)) == imagemetrics.HIGH
    assert qt(QF(50, 40, 0.5)) == imagemetrics.LOW
    assert qt(QF(600, 5, 0.5)) == imagemetrics.LOW
    assert qt(QF(300, 20, 0.5)) == imagemetrics.MEDIUM

    # strict comparisons at the boundaries
    assert qt(QF(500, 40, 0.5)) == imagemetrics.MEDIUM
    assert qt(QF(600, 30, 0.5)) == imagemetrics.MEDIUM
    assert qt(QF(100, 10, 0.5)) == imagemetrics.MEDIUM

    assert qt(QF(300, 20, 0.5), highLaplacian=200, highContrast=10) == imagemetrics.HIGH


def testQualityFeatures():
    q = imagemetrics.QualityFeatures(600, 40, 0.25)

    assert q.composite() == 10.0
    assert imagemetrics.QualityFeatures.fromDict(q.toDict()) == q

    with pytest.raises(ValidationError):
        imagemetrics.QualityFeatures(1, 1, 1.5).validate()

    with pytest.raises(ValidationError):
        imagemetrics.QualityFeatures(-1, 1, 0.5).validate()


def testClahe():
    r = np.random.default_rng(3)
    im = imagemetrics.GrayImage(r.integers(0, 256, (64, 48)))

    out = imagemetrics.clahe(im, 2.0, 8)

    assert out.pixels.shape == (64, 48)
    assert out.pixels.dtype == np.uint8

    c = imagemetrics.clahe(constant(32, 32, 90), 2.0, 8)
    assert len(np.unique(c.pixels)) == 1

    # one tile and no effective clipping: a single monotone mapping
    im = imagemetrics.GrayImage(r.integers(40, 120, (32, 32)))
    out = imagemetrics.clahe(im, 1000.0, 1)

    src = im.pixels.ravel()
    dst = out.pixels.ravel()
    order = np.argsort(src, kind="stable")

    assert np.all(np.diff(dst[order].astype(np.int64)) >= 0)

    # and it stretches the narrow input range
    assert int(dst.max()) - int(dst.min()) > int(src.max()) - int(src.min())


# per-tile equalization tables built straight from the clipped tile
# histograms. returns (tables, tileW, tileH), tables[ty][tx] a 256-entry
# array. the image is extended by mirroring to a whole number of tiles.
def claheTables(pixels, clipLimit, tiles):
    h, w = pixels.shape

    if (h % tiles) or (w % tiles):
        pixels = np.pad(
            pixels, ((0, tiles - h % tiles), (0, tiles - w % tiles)), mode="reflect"
        )

    tileH = pixels.shape[0] // tiles
    tileW = pixels.shape[1] // tiles
    area = tileW * tileH
    bound = clipLimit * area / 256.0
    limit = max(int(bound), 1)

    tables = []

    for ty in range(tiles):
        row = []

        for tx in range(tiles):
            tile = pixels[ty * tileH : (ty + 1) * tileH, tx * tileW : (tx + 1) * tileW]
            hist = np.bincount(tile.ravel(), minlength=256).astype(np.int64)

            excess = int(np.maximum(hist - limit, 0).sum())
            hist = np.minimum(hist, limit)

            # nothing above the clip bound before redistribution. a bound
            # under one pixel still lets each level keep one
            assert hist.max() <= max(bound, 1.0)
            assert hist.sum() + excess == area

            hist += excess // 256
            residual = excess % 256

            if residual:
                step = max(256 // residual, 1)

                for i in range(0, 256, step):
                    if residual == 0:
                        break

                    hist[i] += 1
                    residual -= 1

            assert hist.sum() == area

            row.append(np.cumsum(hist) * 255.0 / area)

        tables.append(row)

    return (tables, tileW, tileH)


# every output pixel must lie within the values the tables of its
# neighboring tiles give its input level
def checkAgainstTables(src, dst, clipLimit, tiles):
    tables, tileW, tileH = claheTables(src, clipLimit, tiles)
    h, w = src.shape

    for y in range(h):
        ty = y // tileH
        rows = range(max(ty - 1, 0), min(ty + 2, tiles))

        for x in range(w):
            tx = x // tileW
            cols = range(max(tx - 1, 0), min(tx + 2, tiles))

            v = src[y, x]
            vals = [tables[j][i][v] for j in rows for i in cols]

            assert min(vals) - 1 <= dst[y, x] <= max(vals) + 1, (x, y)


def testClaheTileOracle():
    r = np.random.default_rng(11)

    for shape, lo, hi, tiles in (
        ((64, 64), 0, 256, 8),
        ((64, 48), 100, 110, 8),
        ((37, 50), 0, 256, 8),
        ((37, 50), 60, 70, 4),
        ((32, 32), 90, 100, 1),
    ):
        im = imagemetrics.GrayImage(r.integers(lo, hi, shape))

        for clipLimit in (1.0, 2.0, 4.0):
            out = imagemetrics.clahe(im, clipLimit, tiles)

            assert out.pixels.shape == shape
            assert out.pixels.dtype == np.uint8
            assert 0 <= int(out.pixels.min()) <= int(out.pixels.max()) <= 255

            checkAgainstTables(
                im.pixels.astype(np.int64),
                out.pixels.astype(np.int64),
                clipLimit,
                tiles,
            )


def testClaheErrors():
    with pytest.raises(ValidationError):
        imagemetrics.clahe(constant(32, 32, 0), 0.5, 8)

    with pytest.raises(ValidationError):
        imagemetrics.clahe(constant(4, 4, 0), 2.0, 8)

    with pytest.raises(ValidationError):
        imagemetrics.clahe(constant(32, 32, 0), 2.0, 0)


def testLetterbox():
    out, scale, padX, padY = imagemetrics.letterbox(constant(100, 50, 200), 64)

    assert (out.width, out.height) == (64, 64)
    assert scale == 0.64
    assert (padX, padY) == (0, 16)

    assert np.all(out.pixels[:16, :] == 0)
    assert np.all(out.pixels[48:, :] == 0)
    assert np.all(out.pixels[16:48, :] == 200)

    # odd padding puts the extra pixel at the bottom
    out, scale, padX, padY = imagemetrics.letterbox(constant(64, 33, 10), 64)
    assert (scale, padX, padY) == (1.0, 0, 15)
    assert np.all(out.pixels[15:48, :] == 10)
    assert np.all(out.pixels[48:, :] == 0)

    # upscaling
    out, scale, padX, padY = imagemetrics.letterbox(constant(16, 32, 5), 64)
    assert (scale, padX, padY) == (2.0, 16, 0)


def testReadWrite(tmp_path):
    r = np.random.default_rng(1)
    im = imagemetrics.GrayImage(r.integers(0, 256, (20, 30)))

    fn = str(tmp_path / "a" / "b.png")
    imagemetrics.writeImage(fn, im)

    back = imagemetrics.readImage(fn)
    assert np.array_equal(back.pixels, im.pixels)

    with pytest.raises(ArtifactError):
        imagemetrics.readImage(str(tmp_path / "nosuchfile.png"))
