# Command line parsing. Parse errors raise UsageError instead of exiting
# so that main() decides the exit status.

import argparse

import curriplan.artifact as artifact
from curriplan.error import UsageError


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError("%s\n%s" % (message, self.format_usage().rstrip()))


def _addCommon(p):
    p.add_argument("--conf", help="config file of Name:value lines")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="NAME:VALUE",
        help="override one config variable, e.g. Stage2/Lr:0.002",
    )
    p.add_argument("--seed", type=int, help="seed of every random stream")
    p.add_argument("--rho", type=float, help="data scale, in (0, 1]")
    p.add_argument("--batch", type=int, help="batch size")
    p.add_argument(
        "--lenient",
        action="store_true",
        help="ignore unknown manifest fields instead of rejecting them",
    )
    p.add_argument("--verbose", action="store_true", help="log progress")
    p.add_argument("--out", help="output path; standard output if omitted")


def makeParser():
    parser = ArgumentParser(
        prog="curriplan",
        description="Curriculum scheduling for slice-level detection training.",
    )
    parser.add_argument("--version", action="version", version=artifact.GENERATOR)

    sub = parser.add_subparsers(dest="cmd", metavar="SUBCOMMAND")
    sub.required = True

    p = sub.add_parser("ingest", help="assess, filter, select and enhance slices")
    _addCommon(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--images", default=None, help="image root directory")
    p.add_argument("--masks", help="lung mask root directory; assess quality")
    p.add_argument("--enhanced", help="write CLAHE + letterboxed images here")

    p = sub.add_parser("score", help="score slice complexity")
    _addCommon(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--histogram", help="write the tier histogram CSV here")

    p = sub.add_parser("split", help="patient-level train/val/test split")
    _addCommon(p)
    p.add_argument("--manifest", required=True)

    p = sub.add_parser("subset", help="patient-level subset of the training set")
    _addCommon(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)

    for name, helpText in (
        ("plan-baseline", "single-stage plan without a curriculum"),
        ("plan-cl", "static curriculum plan"),
        ("plan-sacl", "scale-adapted curriculum plan"),
    ):
        p = sub.add_parser(name, help=helpText)
        _addCommon(p)
        p.add_argument("--manifest", help="scored manifest; adds stage pool sizes")
        p.add_argument("--subset", help="subset document; its achieved rho is used")

    p = sub.add_parser("sample", help="batches of one stage epoch")
    _addCommon(p)
    p.add_argument("--plan", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", help="restrict to the training set of this split")
    p.add_argument("--subset", help="restrict to this subset")
    p.add_argument("--stage", type=int, default=1)
    p.add_argument("--epoch", type=int, default=1)
    p.add_argument("--format", choices=("json", "text"), default="json")

    p = sub.add_parser("simulate", help="run a plan on a synthetic task")
    _addCommon(p)
    p.add_argument("--plan", required=True)
    p.add_argument("--n", type=int, default=200, help="synthetic sample count")
    p.add_argument(
        "--mix",
        default="0.5,0.3,0.2",
        help="Easy,Medium,Hard proportions of the synthetic samples",
    )

    p = sub.add_parser("report", help="CSV and PDF summary tables")
    _addCommon(p)
    p.add_argument("--manifest", help="scored manifest")

    return parser


def parse(argv):
    return makeParser().parse_args(argv)
