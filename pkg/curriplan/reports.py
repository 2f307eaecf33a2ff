# Summary tables: the complexity histogram of a scored manifest, the
# per-stage pool sizes of a plan, and the adapted parameters across the
# data scale grid. Each table is written as CSV, and all of them together
# as one PDF.

import logging
import os

import curriplan.artifact as artifact
import curriplan.complexity as complexity
import curriplan.curriculum as curriculum
import curriplan.pdf as pdf
import curriplan.sacl as sacl
import curriplan.splitter as splitter
import curriplan.util as util

log = logging.getLogger(__name__)

HISTOGRAM_HEADER = ["tier", "count", "share"]
POOLS_HEADER = ["stage", "eligible", "labeled", "negatives", "hard_pool"]

HISTOGRAM_CSV = "complexity_histogram.csv"
POOLS_CSV = "stage_pools.csv"
RHO_GRID_CSV = "rho_grid.csv"
REPORT_PDF = "report.pdf"


def rhoGridHeader(stageCount):
    return (
        ["rho"]
        + ["epochs_s%d" % i for i in range(1, stageCount + 1)]
        + ["lr_s%d" % i for i in range(1, stageCount + 1)]
        + ["hard_floor", "weight_decay", "dropout"]
    )


# [(tier, count, share), ...] over every tier of scored manifest 'm'
def histogramRows(m, cfg):
    hist = complexity.tierHistogram(m, complexity.TierThresholds.fromConfig(cfg))

    return [
        (tier, hist[tier], "%.4f" % util.safeDiv(hist[tier], len(m)))
        for tier in complexity.TIERS
    ]


# [(stage, eligible, labeled, negatives, hardPool), ...] for the stages of
# 'plan' over the scored slices of 'm'
def stagePoolRows(plan, m, cfg):
    byId = m.byId()
    rows = []

    for st in plan.stages:
        eligible, hardPool = curriculum.stagePool(st, m.slices, cfg)
        labeled = sum(1 for sid in eligible if byId[sid].hasNodules())

        rows.append(
            (st.index, len(eligible), labeled, len(eligible) - labeled, len(hardPool))
        )

    return rows


# one row per data scale in 'grid': the SACL plan's epochs and learning
# rates per stage, its hard floor, weight decay and dropout. a single
# stage 'baseline' plan adds a reference row, its values in the stage 1
# columns.
def rhoGridRows(static, params, grid=splitter.RHO_GRID, baseline=None):
    rows = []
    stageCount = len(static.stages)

    for rho in grid:
        plan = sacl.buildSaclPlan(static, rho, params)

        rows.append(
            [rho]
            + [st.epochs for st in plan.stages]
            + [st.lr for st in plan.stages]
            + [plan.stages[0].minHardRatio, plan.weightDecay, plan.dropout]
        )

    if baseline is not None:
        st = baseline.stages[0]
        blank = [""] * (stageCount - 1)

        rows.append(
            [baseline.kind, st.epochs]
            + blank
            + [st.lr]
            + blank
            + [st.minHardRatio, baseline.weightDecay, baseline.dropout]
        )

    return rows


class Report:
    def __init__(self, cfg, m=None):
        self.cfg = cfg

        # scored manifest, or None for the parameter tables only
        self.m = m

        self.static = curriculum.buildStaticPlan(cfg)
        self.baseline = curriculum.buildBaselinePlan(cfg)
        self.params = sacl.SaclParams.fromConfig(cfg)

        # list of (title, CSV file name, header, rows)
        self.tables = []

        if m is not None:
            self.tables.append(
                (
                    "Complexity tiers (%d slices)" % len(m),
                    HISTOGRAM_CSV,
                    HISTOGRAM_HEADER,
                    histogramRows(m, cfg),
                )
            )
            self.tables.append(
                (
                    "Stage pools",
                    POOLS_CSV,
                    POOLS_HEADER,
                    stagePoolRows(self.static, m, cfg),
                )
            )

        self.tables.append(
            (
                "Adapted parameters across data scales",
                RHO_GRID_CSV,
                rhoGridHeader(len(self.static.stages)),
                rhoGridRows(
                    self.static, self.params, baseline=self.baseline
                ),
            )
        )

    # write every table as CSV and the PDF summary into 'outDir'.
    # returns the list of paths written.
    def write(self, outDir):
        configHash = self.cfg.hash()
        paths = []

        for title, name, header, rows in self.tables:
            path = os.path.join(outDir, name)
            artifact.writeCsv(path, header, rows, configHash)
            paths.append(path)

        path = os.path.join(outDir, REPORT_PDF)
        util.writeToFile(path, self.generate())
        paths.append(path)

        log.info("wrote %d report files to %s", len(paths), outDir)

        return paths

    def generate(self):
        tf = pdf.TextFormatter()

        tf.addText("Curriculum report", fs=14, font=pdf.BOLD)
        tf.addWrappedText("Config hash: %s" % self.cfg.hash(), "  ")
        tf.addSpace(5.0)

        for title, name, header, rows in self.tables:
            tf.addText(title, fs=12, font=pdf.BOLD)
            tf.addSpace(2.0)
            tf.addTable(header, [[_cell(c) for c in r] for r in rows])
            tf.addSpace(5.0)

        return tf.generate("Curriculum report")


def _cell(val):
    if isinstance(val, float):
        return "%.6g" % val

    return val
