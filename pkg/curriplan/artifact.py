# JSON documents written by the command line tools. Every document
# names its schema and embeds the resolved run config, and is serialized
# canonically so that identical runs produce identical bytes.

import csv
import io
import json

import curriplan.util as util
from curriplan.error import ArtifactError

VERSION = "1.0.0"
GENERATOR = "curriplan %s" % VERSION

SCHEMA_VERSION = 1

# document kinds
PLAN = "plan"
SPLIT = "split"
SUBSET = "subset"
BATCHES = "batches"
TRAINLOG = "trainlog"
FIDELITY = "fidelity"


def makeDocument(kind, body, cfg):
    doc = {
        "schema": "curriplan/%s" % kind,
        "schemaVersion": SCHEMA_VERSION,
        "generator": GENERATOR,
        "config": cfg.toDict(),
        "configHash": cfg.hash(),
    }

    for key, val in body.items():
        if key in doc:
            raise ValueError("document body may not override '%s'" % key)

        doc[key] = val

    return doc


def dumps(doc):
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def writeDocument(path, doc):
    util.writeToFile(path, dumps(doc))


# read a document, checking that it is of the expected kind
def readDocument(path, kind):
    s = util.loadFile(path)

    try:
        doc = json.loads(s)
    except json.JSONDecodeError as e:
        raise ArtifactError("'%s' is not a JSON document: %s" % (path, e.msg))

    if not isinstance(doc, dict):
        raise ArtifactError("'%s' is not a curriplan document" % path)

    expected = "curriplan/%s" % kind
    if doc.get("schema") != expected:
        raise ArtifactError(
            "'%s' holds schema '%s', expected '%s'" % (path, doc.get("schema"), expected)
        )

    version = doc.get("schemaVersion")
    if not isinstance(version, int) or (version > SCHEMA_VERSION):
        raise ArtifactError(
            "'%s' has unsupported schema version %r" % (path, version)
        )

    return doc


# CSV text with a leading config hash comment line
def csvText(header, rows, configHash):
    buf = io.StringIO()
    buf.write("# config_hash: %s\n" % configHash)

    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)

    for row in rows:
        w.writerow(row)

    return buf.getvalue()


def writeCsv(path, header, rows, configHash):
    util.writeToFile(path, csvText(header, rows, configHash))

