"""Report serialization: one nested JSON document plus flat CSV tables.

The JSON document validates against the schema shipped with the package and
round-trips exactly (floats serialize with full precision).  Tables are
plot-ready: one row per quadrature node for sampled functions, one row per
iteration for residual histories, 17 significant digits.
"""
import json
import os
import sys
from importlib import resources

import numpy as np
import jsonschema

from . import __version__


class ReportWriteError(RuntimeError):
    def __init__(self, path, reason):
        self.path = str(path)
        super().__init__("cannot write %s: %s" % (path, reason))


def _plain(obj):
    """Recursively convert numpy scalars/arrays for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def load_schema():
    with resources.files("bergbal").joinpath("report.schema.json").open() as fh:
        return json.load(fh)


def build_report(config_echo, versions_extra=None):
    """Skeleton report; callers fill outputs/tables/verdicts/timing."""
    versions = {"bergbal": __version__,
                "python": sys.version.split()[0],
                "numpy": np.__version__}
    import scipy
    versions["scipy"] = scipy.__version__
    if versions_extra:
        versions.update(versions_extra)
    return {
        "report_version": 1,
        "config": _plain(config_echo),
        "versions": versions,
        "conventions": {
            "coordinate": "t = log|z|^2 on the punctured line",
            "reference_potential": "log(1 + e^t), volume normalized to 1",
            "residual": "sup over quadrature nodes of |B_m - C_m|",
            "weight_character": "section j carries the factor e^{j y}",
        },
        "outputs": {},
        "tables": [],
        "verdicts": {},
        "warnings": [],
        "error": None,
        "timing": {"seconds": 0.0},
    }


def validate_report(report):
    jsonschema.validate(report, load_schema())


def write_report(report, out_dir, tables=True):
    """Write report.json and one CSV per table; returns the written paths."""
    report = _plain(report)
    validate_report(report)
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise ReportWriteError(out_dir, e)
    paths = []
    jpath = os.path.join(out_dir, "report.json")
    try:
        with open(jpath, "w") as fh:
            json.dump(report, fh, indent=1, sort_keys=True)
            fh.write("\n")
    except OSError as e:
        raise ReportWriteError(jpath, e)
    paths.append(jpath)
    if tables:
        for table in report.get("tables", []):
            cpath = os.path.join(out_dir, table["name"] + ".csv")
            cols = table["columns"]
            names = list(cols)
            rows = len(cols[names[0]]) if names else 0
            try:
                with open(cpath, "w") as fh:
                    fh.write(",".join(names) + "\n")
                    for r in range(rows):
                        fh.write(",".join(_cell(cols[n][r]) for n in names) + "\n")
            except OSError as e:
                raise ReportWriteError(cpath, e)
            paths.append(cpath)
    return paths


def _cell(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def load_report(path):
    with open(path) as fh:
        return json.load(fh)
