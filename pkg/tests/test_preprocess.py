import os

import numpy as np
import pytest

import curriplan.imagemetrics as imagemetrics
import curriplan.manifest as manifest
import curriplan.preprocess as preprocess
import tests.u as u
from curriplan.error import ArtifactError, ValidationError

# test the image preprocessing pipeline


def writeSlice(imagesDir, masksDir, s, seed=0):
    r = np.random.default_rng(seed)
    img = imagemetrics.GrayImage(r.integers(0, 256, (s.height, s.width)))
    imagemetrics.writeImage(os.path.join(imagesDir, s.imagePath), img)

    if masksDir:
        mask = np.zeros((s.height, s.width), dtype=np.uint8)
        mask[:, : s.width // 2] = 255
        imagemetrics.writeImage(
            os.path.join(masksDir, s.imagePath), imagemetrics.GrayImage(mask)
        )

    return img


def testLetterboxSlice():
    s = u.slice("a", boxes=[u.box(10, 10, 20, 10)], width=100, height=50, spacing=0.7)
    s.complexity = 5.0

    out = preprocess.letterboxSlice(s, 0.64, 0, 16, 64)

    assert (out.width, out.height) == (64, 64)
    assert out.boxes == [manifest.NoduleBox(6, 22, 13, 6)]
    assert out.spacingMm == pytest.approx(0.7 / 0.64)
    assert out.complexity is None

    # original untouched
    assert s.boxes == [u.box(10, 10, 20, 10)]
    assert s.complexity == 5.0


def testLetterboxSliceClamps():
    s = u.slice("a", boxes=[u.box(15, 15, 10, 10)], width=20, height=20)

    out = preprocess.letterboxSlice(s, 1.0, 0, 0, 20)

    assert out.boxes == [manifest.NoduleBox(15, 15, 5, 5)]
    out.validate()


def testAssess(tmp_path):
    images = str(tmp_path / "img")
    masks = str(tmp_path / "mask")

    a = u.slice("a", "pa", width=32, height=24)
    b = u.slice("b", "pa", quality=u.quality(), complexity=2.0)

    img = writeSlice(images, masks, a)

    m = manifest.DatasetManifest([a, b])
    out = preprocess.assessManifest(m, images, masks)

    q = out.byId()["a"].quality
    assert q.lungCoverage == 0.5
    assert q.contrast == pytest.approx(imagemetrics.contrastStddev(img))
    assert q.laplacianVar == pytest.approx(imagemetrics.laplacianVariance(img))

    # already assessed slices are kept as they are
    assert out.byId()["b"] == b
    assert out.steps == ["assess"]

    assert preprocess.assessSlice(
        os.path.join(images, a.imagePath), os.path.join(masks, a.imagePath)
    ) == q


def testAssessErrors(tmp_path):
    images = str(tmp_path / "img")
    masks = str(tmp_path / "mask")

    a = u.slice("a", width=32, height=24)
    writeSlice(images, masks, a)

    # the record disagrees with the image on disk
    bad = u.slice("a", width=24, height=32)

    with pytest.raises(ValidationError) as e:
        preprocess.assessManifest(manifest.DatasetManifest([bad]), images, masks)

    assert e.value.sliceId == "a"

    with pytest.raises(ArtifactError):
        preprocess.assessManifest(
            manifest.DatasetManifest([a]), images, str(tmp_path / "nomasks")
        )


def testEnhance(tmp_path):
    images = str(tmp_path / "img")
    outDir = str(tmp_path / "out")

    a = u.slice("a", "pa", [u.box(4, 4, 8, 8)], u.quality(), width=64, height=32)
    writeSlice(images, None, a)

    cfg = u.cfg(imageSize=32)
    out = preprocess.enhanceManifest(manifest.DatasetManifest([a]), images, outDir, cfg)

    s = out.slices[0]
    assert s.imagePath == "a.png"
    assert (s.width, s.height) == (32, 32)
    assert s.boxes == [manifest.NoduleBox(2, 10, 4, 4)]
    assert out.steps == ["enhance"]

    img = imagemetrics.readImage(os.path.join(outDir, "a.png"))
    assert (img.width, img.height) == (32, 32)

    # padding rows stay black
    assert np.all(img.pixels[:8, :] == 0)
    assert np.all(img.pixels[24:, :] == 0)


def testIngest(tmp_path):
    images = str(tmp_path / "img")
    masks = str(tmp_path / "mask")
    outDir = str(tmp_path / "out")

    slices = [
        u.slice("n1", "pa", [u.box(2, 2, 10, 10)], width=32, height=32, spacing=0.5),
        # 4 px at 0.5 mm is below the 3 mm floor
        u.slice("n2", "pa", [u.box(2, 2, 4, 4)], width=32, height=32, spacing=0.5),
        u.slice("b1", "pa", width=32, height=32),
        u.slice("b2", "pa", width=32, height=32),
        u.slice("b3", "pa", width=32, height=32),
    ]

    for i, s in enumerate(slices):
        writeSlice(images, masks, s, i)

    m = manifest.DatasetManifest(slices)
    out = preprocess.ingest(m, u.cfg(bgRatio=1, imageSize=16), images, masks, outDir)

    assert out.steps == ["assess", "filter", "select", "enhance"]
    assert all(s.quality is not None for s in out)

    # one nodule slice left, so one background slice per patient
    assert len([s for s in out if s.hasNodules()]) == 1
    assert len(out) == 2

    for s in out:
        assert os.path.exists(os.path.join(outDir, s.imagePath))
        assert (s.width, s.height) == (16, 16)


def testIngestWithoutImages():
    m = manifest.DatasetManifest(
        [
            u.slice("n1", boxes=[u.box()], quality=u.quality()),
            u.slice("b1", quality=u.quality()),
        ]
    )

    out = preprocess.ingest(m, u.cfg())

    assert out.sliceIds() == ["n1", "b1"]
    assert out.steps == ["filter", "select"]
