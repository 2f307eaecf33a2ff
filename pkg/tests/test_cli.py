import json
import os

import pytest

import curriplan.curriplan as cli
import curriplan.imagemetrics as imagemetrics
import curriplan.manifest as manifest
import curriplan.simharness as simharness
import tests.u as u

# test the command line tools, run in-process


@pytest.fixture(autouse=True)
def cleanEnv(tmp_path, monkeypatch):
    # no stray .env file or CURRIPLAN_ variables
    monkeypatch.chdir(tmp_path)

    for key in list(os.environ):
        if key.startswith("CURRIPLAN_"):
            monkeypatch.delenv(key)


# manifest of 12 patients, each with one Easy, one Medium and one Hard
# nodule slice and one negative
def writeManifest(path):
    slices = []

    for p in range(12):
        pid = "p%02d" % p

        slices.append(u.slice(pid + "e", pid, [u.box(w=40, h=40)], u.quality()))
        slices.append(
            u.slice(pid + "m", pid, [u.box(w=15, h=15)], u.quality(imagemetrics.MEDIUM))
        )
        slices.append(
            u.slice(
                pid + "h",
                pid,
                [u.box(10 + 20 * i, 10, 5, 30) for i in range(4)],
                u.quality(imagemetrics.LOW),
            )
        )
        slices.append(u.slice(pid + "n", pid, [], u.quality()))

    manifest.saveManifest(manifest.DatasetManifest(slices, "test"), path)

    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


def readDoc(path):
    return json.loads(open(path).read())


# raw manifest -> scored manifest -> split -> subset, returning paths
def pipeline(tmp_path, rho=0.5, seed=7):
    raw = writeManifest(str(tmp_path / "raw.jsonl"))
    scored = str(tmp_path / "scored.jsonl")
    split = str(tmp_path / "split.json")
    subset = str(tmp_path / "subset.json")

    assert run("score", "--manifest", raw, "--out", scored) == cli.EXIT_OK
    assert run("split", "--manifest", scored, "--seed", seed, "--out", split) == 0
    assert (
        run(
            "subset",
            "--manifest",
            scored,
            "--split",
            split,
            "--rho",
            rho,
            "--seed",
            seed,
            "--out",
            subset,
        )
        == 0
    )

    return scored, split, subset


def testPlanSacl(capsys):
    assert run("plan-sacl", "--rho", 0.1, "--seed", 7) == cli.EXIT_OK

    doc = json.loads(capsys.readouterr().out)

    assert doc["schema"] == "curriplan/plan"
    assert doc["plan"]["kind"] == "sacl"
    assert [st["epochs"] for st in doc["plan"]["stages"]] == [20, 30, 30]
    assert doc["config"]["Seed"] == 7
    assert doc["configHash"] == doc["plan"]["provenance"]["configHash"]


def testPlanCl(capsys):
    assert run("plan-cl", "--set", "Stage2/Epochs:80") == 0

    doc = json.loads(capsys.readouterr().out)

    assert doc["plan"]["kind"] == "cl"
    assert [st["epochs"] for st in doc["plan"]["stages"]] == [50, 80, 100]


def testPlanBaseline(tmp_path, capsys):
    assert run("plan-baseline", "--set", "Baseline/Epochs:6") == 0

    doc = json.loads(capsys.readouterr().out)

    assert doc["plan"]["kind"] == "baseline"
    assert [(st["epochs"], st["lr"]) for st in doc["plan"]["stages"]] == [(6, 0.002)]
    assert doc["plan"]["stages"][0]["min_hard_ratio"] == 0.0

    plan = str(tmp_path / "plan.json")
    outDir = str(tmp_path / "sim")

    assert run("plan-baseline", "--set", "Baseline/Epochs:6", "--out", plan) == 0
    assert run("simulate", "--plan", plan, "--n", 40, "--out", outDir) == 0
    assert readDoc(os.path.join(outDir, cli.FIDELITY_JSON))["fidelity"]["passed"]


def testConfigSources(tmp_path, capsys, monkeypatch):
    conf = tmp_path / "run.conf"
    conf.write_text("Sacl/MinEpochs:25\nSeed:1\n")

    (tmp_path / ".env").write_text("CURRIPLAN_SEED=2\n")

    assert run("plan-sacl", "--conf", conf, "--rho", 0.1) == 0
    doc = json.loads(capsys.readouterr().out)

    # the environment beats the config file
    assert doc["config"]["Seed"] == 2
    assert [st["epochs"] for st in doc["plan"]["stages"]] == [25, 30, 30]

    monkeypatch.setenv("CURRIPLAN_SEED", "3")

    assert run("plan-sacl", "--rho", 0.1) == 0
    assert json.loads(capsys.readouterr().out)["config"]["Seed"] == 3

    # and flags beat everything
    assert run("plan-sacl", "--rho", 0.1, "--seed", 4) == 0
    assert json.loads(capsys.readouterr().out)["config"]["Seed"] == 4


def testSplitDeterministic(tmp_path):
    raw = writeManifest(str(tmp_path / "raw.jsonl"))

    a = str(tmp_path / "a.json")
    b = str(tmp_path / "b.json")

    assert run("split", "--manifest", raw, "--seed", 5, "--out", a) == 0
    assert run("split", "--manifest", raw, "--seed", 5, "--out", b) == 0

    assert open(a, "rb").read() == open(b, "rb").read()

    summary = readDoc(a)["split"]["summary"]
    assert [summary[k]["patients"] for k in ("train", "val", "test")] == [10, 1, 1]


def testScoreHistogram(tmp_path):
    raw = writeManifest(str(tmp_path / "raw.jsonl"))
    scored = str(tmp_path / "scored.jsonl")
    hist = str(tmp_path / "tiers" / "hist.csv")

    assert run("score", "--manifest", raw, "--histogram", hist, "--out", scored) == 0

    configHash, header, rows = u.readCsv(open(hist).read())

    assert header == ["tier", "count", "share"]
    assert [r[0] for r in rows] == ["Easy", "Medium", "Hard"]
    assert sum(int(r[1]) for r in rows) == len(manifest.loadManifest(scored))
    assert [r[1] for r in rows] == ["24", "12", "12"]


def testPipeline(tmp_path, capsys):
    scored, split, subset = pipeline(tmp_path)

    m = manifest.loadManifest(scored)
    assert m.steps == ["score"]
    assert [s.complexity for s in m.slices[:4]] == [2.5, 5.5, 11.0, 2.0]

    sub = readDoc(subset)["subset"]
    assert sub["rho"] == 0.5
    assert sub["achievedRho"] == 0.5

    plan = str(tmp_path / "plan.json")
    assert (
        run("plan-sacl", "--subset", subset, "--manifest", scored, "--out", plan) == 0
    )

    doc = readDoc(plan)
    assert doc["plan"]["rho"] == 0.5
    assert [st["epochs"] for st in doc["plan"]["stages"]] == [31, 62, 62]

    # 5 training patients
    assert [p["eligible"] for p in doc["pools"]] == [10, 15, 20]
    assert [p["hard_pool"] for p in doc["pools"]] == [5, 5, 5]

    capsys.readouterr()

    args = ["sample", "--plan", plan, "--manifest", scored, "--subset", subset]
    assert run(*(args + ["--stage", 2, "--epoch", 3, "--batch", 4])) == 0

    bp = json.loads(capsys.readouterr().out)["batches"]
    assert (bp["stage_index"], bp["epoch_index"]) == (2, 3)
    assert not bp["floor_unmet"]

    for b in bp["batches"]:
        assert sum(b["hard_flags"]) >= b["required_hard"]

    assert run(*(args + ["--format", "text"])) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("0\t")
    assert "*" in lines[0]

    assert run(*(args + ["--stage", 4])) == cli.EXIT_INVALID
    assert run(*(args + ["--epoch", 32])) == cli.EXIT_INVALID


def testSimulate(tmp_path):
    plan = str(tmp_path / "plan.json")
    outDir = str(tmp_path / "sim")

    assert run("plan-sacl", "--rho", 0.2, "--out", plan) == 0
    assert run("simulate", "--plan", plan, "--n", 80, "--seed", 3, "--out", outDir) == 0

    rep = readDoc(os.path.join(outDir, cli.FIDELITY_JSON))["fidelity"]
    assert rep["passed"]

    tl = simharness.TrainLog.fromDict(
        readDoc(os.path.join(outDir, cli.TRAINLOG_JSON))["trainlog"]
    )
    assert tl.epochsByStage == {1: 20, 2: 32, 3: 32}

    dataset = readDoc(os.path.join(outDir, cli.TRAINLOG_JSON))["dataset"]
    assert dataset["n"] == 80
    assert dataset["tier_counts"] == {"Easy": 40, "Medium": 24, "Hard": 16}

    configHash, header, rows = u.readCsv(
        open(os.path.join(outDir, cli.LOSS_CSV)).read()
    )
    assert header == ["stage", "epoch", "mean_loss"]
    assert len(rows) == 84

    # the same run again gives the same bytes
    again = str(tmp_path / "sim2")
    assert run("simulate", "--plan", plan, "--n", 80, "--seed", 3, "--out", again) == 0

    for name in (cli.TRAINLOG_JSON, cli.FIDELITY_JSON, cli.LOSS_CSV):
        assert (
            open(os.path.join(outDir, name), "rb").read()
            == open(os.path.join(again, name), "rb").read()
        )


def testSimulateErrors(tmp_path, capsys):
    plan = str(tmp_path / "plan.json")
    assert run("plan-cl", "--out", plan) == 0

    assert run("simulate", "--plan", plan) == cli.EXIT_USAGE

    out = str(tmp_path / "sim")
    assert run("simulate", "--plan", plan, "--mix", "1,x,0", "--out", out) == 1
    assert run("simulate", "--plan", plan, "--mix", "0,0,1", "--out", out) == 1


def testReport(tmp_path):
    scored, split, subset = pipeline(tmp_path)
    outDir = str(tmp_path / "report")

    assert run("report", "--manifest", scored, "--out", outDir) == 0

    for name in ("complexity_histogram.csv", "stage_pools.csv", "rho_grid.csv"):
        assert os.path.exists(os.path.join(outDir, name))

    configHash, header, rows = u.readCsv(
        open(os.path.join(outDir, "complexity_histogram.csv")).read()
    )
    assert rows == [["Easy", "24", "0.5000"], ["Medium", "12", "0.2500"], ["Hard", "12", "0.2500"]]

    assert open(os.path.join(outDir, "report.pdf"), "rb").read().startswith(b"%PDF")


def testIngest(tmp_path, capsys):
    raw = writeManifest(str(tmp_path / "raw.jsonl"))

    assert run("ingest", "--manifest", raw, "--set", "BackgroundRatio:0") == 0

    m = manifest.parseManifest(capsys.readouterr().out)
    assert len(m) == 36
    assert m.steps == ["filter", "select"]


def testMalformedManifest(tmp_path, capsys):
    path = tmp_path / "bad.jsonl"
    path.write_text(u.line("a1") + "\n" + "{oops\n")

    assert run("score", "--manifest", path) == cli.EXIT_INVALID
    assert "line 2" in capsys.readouterr().err

    path.write_text(u.line("a1", scanner="GE") + "\n")

    assert run("split", "--manifest", path) == cli.EXIT_INVALID
    assert run("score", "--manifest", path, "--lenient") == cli.EXIT_INVALID
    assert "quality" in capsys.readouterr().err

    # not UTF-8
    path.write_bytes(u.line("a1").encode("UTF-8") + b"\n\xff\n")

    assert run("score", "--manifest", path) == cli.EXIT_INVALID
    assert "line 2" in capsys.readouterr().err


def testUsageErrors(capsys):
    assert run("frobnicate") == cli.EXIT_USAGE
    assert run() == cli.EXIT_USAGE
    assert run("score") == cli.EXIT_USAGE
    assert run("plan-sacl", "--rho", "abc") == cli.EXIT_USAGE

    assert "curriplan:" in capsys.readouterr().err


def testBadValues(tmp_path):
    assert run("plan-sacl", "--rho", 1.5) == cli.EXIT_INVALID
    assert run("plan-sacl", "--set", "Sacl/Beta:7") == cli.EXIT_INVALID
    assert run("plan-sacl", "--set", "NoSuchVar:1") == cli.EXIT_INVALID


def testMissingFiles(tmp_path):
    assert run("score", "--manifest", tmp_path / "none.jsonl") == cli.EXIT_IO
    assert run("sample", "--plan", tmp_path / "none.json", "--manifest", "x") == 2
    assert run("plan-cl", "--conf", tmp_path / "none.conf") == cli.EXIT_IO

    # a document of the wrong kind
    split = str(tmp_path / "split.json")
    raw = writeManifest(str(tmp_path / "raw.jsonl"))
    assert run("split", "--manifest", raw, "--out", split) == 0
    assert run("sample", "--plan", split, "--manifest", raw) == cli.EXIT_IO
