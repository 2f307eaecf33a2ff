# Command line entry point. Every subcommand resolves one ConfigRun,
# runs one pipeline step and writes its artifacts.

import logging
import os
import sys

import dotenv

import curriplan.artifact as artifact
import curriplan.complexity as complexity
import curriplan.config as config
import curriplan.curriculum as curriculum
import curriplan.manifest as manifest
import curriplan.opts as opts
import curriplan.preprocess as preprocess
import curriplan.reports as reports
import curriplan.sacl as sacl
import curriplan.sampler as sampler
import curriplan.simharness as simharness
import curriplan.splitter as splitter
import curriplan.util as util
from curriplan.error import (
    ArtifactError,
    ConfigError,
    UsageError,
    ValidationError,
)

log = logging.getLogger(__name__)

# exit statuses
EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_USAGE = 64

TRAINLOG_JSON = "trainlog.json"
FIDELITY_JSON = "fidelity.json"
LOSS_CSV = "loss.csv"


# defaults, then the config file, then the environment (and .env), then
# --set values, then dedicated flags
def resolveConfig(args, env=None):
    if args.conf:
        cfg = config.loadConfigFile(args.conf)
    else:
        cfg = config.ConfigRun()

    if env is None:
        env = {}

        path = dotenv.find_dotenv(usecwd=True)
        if path:
            for key, val in dotenv.dotenv_values(path).items():
                if val is not None:
                    env[key] = val

        env.update(os.environ)

    cfg.applyEnv(env)

    for it in args.set:
        cfg.load(it)

    if args.seed is not None:
        cfg.seed = args.seed

    if args.rho is not None:
        cfg.rho = args.rho

    if args.batch is not None:
        cfg.batchSize = args.batch

    if args.lenient:
        cfg.lenient = True

    # flag values skip the variable range checks; a save/load round trip
    # applies them
    cfg = cfg.copy()
    cfg.validate()

    return cfg


def _output(args, data):
    if args.out:
        util.writeToFile(args.out, data)
    else:
        sys.stdout.write(data)


def _needOut(args):
    if not args.out:
        raise UsageError("%s needs --out DIR" % args.cmd)


def _loadManifest(args, cfg):
    return manifest.loadManifest(args.manifest, cfg.lenient)


def _readSplit(path):
    return splitter.DatasetSplit.fromDict(
        artifact.readDocument(path, artifact.SPLIT)["split"]
    )


def _readSubset(path):
    return splitter.ScaleSubset.fromDict(
        artifact.readDocument(path, artifact.SUBSET)["subset"]
    )


def _readPlan(path):
    return curriculum.planFromDict(artifact.readDocument(path, artifact.PLAN)["plan"])


def cmdIngest(args, cfg):
    m = _loadManifest(args, cfg)

    images = args.images
    if images is None:
        images = os.path.dirname(os.path.abspath(args.manifest))

    m = preprocess.ingest(m, cfg, images, args.masks, args.enhanced)

    _output(args, manifest.manifestToText(m, cfg.hash()))


def cmdScore(args, cfg):
    m = complexity.scoreManifest(_loadManifest(args, cfg), cfg)

    _output(args, manifest.manifestToText(m, cfg.hash()))

    if args.histogram:
        artifact.writeCsv(
            args.histogram,
            reports.HISTOGRAM_HEADER,
            reports.histogramRows(m, cfg),
            cfg.hash(),
        )


def cmdSplit(args, cfg):
    m = _loadManifest(args, cfg)
    sp = splitter.patientSplit(m, cfg.splitRatios(), cfg.seed)

    doc = artifact.makeDocument(artifact.SPLIT, {"split": sp.toDict()}, cfg)
    _output(args, artifact.dumps(doc))


def cmdSubset(args, cfg):
    m = _loadManifest(args, cfg)
    sp = _readSplit(args.split)

    sub = splitter.subsampleScale(m, sp.train, cfg.rho, cfg.seed)

    doc = artifact.makeDocument(artifact.SUBSET, {"subset": sub.toDict()}, cfg)
    _output(args, artifact.dumps(doc))


# the scored slices a plan is sampled from: the subset, else the split's
# training set, else the whole manifest
def _trainingSlices(m, split=None, subset=None):
    if subset is not None:
        return m.subset(subset.sliceIds)

    if split is not None:
        return m.subset(split.train)

    return m


def _plan(args, cfg, kind):
    static = curriculum.buildStaticPlan(cfg)
    subset = _readSubset(args.subset) if args.subset else None

    if kind == curriculum.SACL:
        rho = subset.achievedRho if subset else cfg.rho
        plan = sacl.buildSaclPlan(static, rho, sacl.SaclParams.fromConfig(cfg))
    elif kind == curriculum.BASELINE:
        plan = curriculum.buildBaselinePlan(cfg)
    else:
        plan = static

    body = {"plan": curriculum.planToDict(plan)}

    if args.manifest:
        m = _trainingSlices(_loadManifest(args, cfg), subset=subset)

        body["pools"] = [
            dict(zip(reports.POOLS_HEADER, row))
            for row in reports.stagePoolRows(plan, m, cfg)
        ]

    _output(args, artifact.dumps(artifact.makeDocument(artifact.PLAN, body, cfg)))


def cmdPlanBaseline(args, cfg):
    _plan(args, cfg, curriculum.BASELINE)


def cmdPlanCl(args, cfg):
    _plan(args, cfg, curriculum.CL)


def cmdPlanSacl(args, cfg):
    _plan(args, cfg, curriculum.SACL)


def cmdSample(args, cfg):
    plan = _readPlan(args.plan)

    if not (1 <= args.stage <= len(plan.stages)):
        raise ValidationError(
            "stage %d not in plan (1..%d)" % (args.stage, len(plan.stages))
        )

    stage = plan.getStage(args.stage)

    if not (1 <= args.epoch <= stage.epochs):
        raise ValidationError(
            "epoch %d not in stage %d (1..%d)" % (args.epoch, stage.index, stage.epochs)
        )

    m = _trainingSlices(
        _loadManifest(args, cfg),
        _readSplit(args.split) if args.split else None,
        _readSubset(args.subset) if args.subset else None,
    )

    eligible, hardPool = curriculum.stagePool(stage, m.slices, cfg)

    bp = sampler.buildEpochBatches(
        eligible,
        hardPool,
        cfg.batchSize,
        stage.minHardRatio,
        cfg.seed,
        args.epoch,
        stage.index,
    )

    if args.format == "text":
        _output(args, bp.toText())
    else:
        doc = artifact.makeDocument(artifact.BATCHES, {"batches": bp.toDict()}, cfg)
        _output(args, artifact.dumps(doc))


def _parseMix(s):
    try:
        mix = tuple(float(x) for x in s.split(","))
    except ValueError:
        raise ValidationError("invalid tier mix '%s'" % s)

    return mix


def cmdSimulate(args, cfg):
    _needOut(args)

    plan = _readPlan(args.plan)
    data = simharness.generateSyntheticDataset(args.n, _parseMix(args.mix), cfg.seed)

    tl = simharness.runPlan(plan, data, cfg.batchSize, cfg.seed)
    rep = simharness.verifyExecution(tl, plan, data)

    artifact.writeDocument(
        os.path.join(args.out, TRAINLOG_JSON),
        artifact.makeDocument(
            artifact.TRAINLOG,
            {
                "dataset": {
                    "n": len(data),
                    "mix": list(data.mix),
                    "tier_counts": data.tierCounts(),
                    "flipped": data.flippedCount(),
                },
                "trainlog": tl.toDict(),
            },
            cfg,
        ),
    )
    artifact.writeDocument(
        os.path.join(args.out, FIDELITY_JSON),
        artifact.makeDocument(artifact.FIDELITY, {"fidelity": rep.toDict()}, cfg),
    )
    artifact.writeCsv(
        os.path.join(args.out, LOSS_CSV),
        ["stage", "epoch", "mean_loss"],
        [(s, e, "%.10f" % loss) for s, e, loss in tl.lossTrajectory()],
        cfg.hash(),
    )

    if not rep.passed:
        failed = [c.name for c in rep.checks if not c.passed]
        raise ValidationError("fidelity checks failed: %s" % ", ".join(failed))


def cmdReport(args, cfg):
    _needOut(args)

    m = _loadManifest(args, cfg) if args.manifest else None

    reports.Report(cfg, m).write(args.out)


_commands = {
    "ingest": cmdIngest,
    "score": cmdScore,
    "split": cmdSplit,
    "subset": cmdSubset,
    "plan-baseline": cmdPlanBaseline,
    "plan-cl": cmdPlanCl,
    "plan-sacl": cmdPlanSacl,
    "sample": cmdSample,
    "simulate": cmdSimulate,
    "report": cmdReport,
}


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]

    try:
        args = opts.parse(argv)

        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )

        cfg = resolveConfig(args)
        _commands[args.cmd](args, cfg)

    except UsageError as e:
        sys.stderr.write("curriplan: %s\n" % e)
        return EXIT_USAGE

    except (ValidationError, ConfigError) as e:
        sys.stderr.write("curriplan: error: %s\n" % e)
        return EXIT_INVALID

    except ArtifactError as e:
        sys.stderr.write("curriplan: error: %s\n" % e)
        return EXIT_IO

    except OSError as e:
        sys.stderr.write("curriplan: error: %s\n" % e)
        return EXIT_IO

    return EXIT_OK


def run():
    sys.exit(main())
