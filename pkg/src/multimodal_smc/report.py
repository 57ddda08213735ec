"""
CSV and JSON emission for experiment results.
"""
from __future__ import annotations

import json
import math
import os
import platform
import subprocess
import sys
from pathlib import Path

import numpy as np


class ReportError(ValueError):
    """Results that cannot be written (non-finite values or bad shapes)."""


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(float(v)):
            raise ReportError(f"non-finite value {v!r} in results")
        return "%.17g" % float(v)
    return str(v)


def _check_finite(obj, path="results"):
    if isinstance(obj, (float, np.floating)) and math.isnan(float(obj)):
        raise ReportError(f"NaN at {path}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}[{i}]")
    elif isinstance(obj, np.ndarray) and obj.dtype.kind == "f" and np.isnan(obj).any():
        raise ReportError(f"NaN at {path}")


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_csv(path, header, rows):
    """Header row plus data rows; floats with 17 significant digits."""
    lines = [",".join(header)]
    for r in rows:
        if len(r) != len(header):
            raise ReportError("row length does not match header")
        lines.append(",".join(_fmt(v) for v in r))
    Path(path).write_text("\n".join(lines) + "\n")


def git_describe():
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def versions():
    import numba
    import scipy
    from . import __version__
    return {"package": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def emit_report(name, header, rows, summary, config, out_dir=".", fmt="csv", wall_time=None):
    """Write <name>.csv (or <name>.json) plus <name>.manifest.json.

    Parameters
    ----------
    name : str
        File stem.
    header : list of str
    rows : iterable of tuples
    summary : dict
        Scalar results; copied into the manifest.
    config : dict
        Fully resolved parameters, seed included.
    fmt : {"csv", "json"}

    Returns
    -------
    list of Path
    """
    rows = list(rows)
    _check_finite(summary, "summary")
    for i, r in enumerate(rows):
        for v in r:
            if isinstance(v, (float, np.floating)) and math.isnan(float(v)):
                raise ReportError(f"NaN in row {i}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "csv":
        p = out / f"{name}.csv"
        write_csv(p, header, rows)
    elif fmt == "json":
        p = out / f"{name}.json"
        doc = {"header": header, "rows": to_jsonable(rows), "summary": to_jsonable(summary)}
        p.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    else:
        raise ReportError(f"unknown format {fmt!r}")
    written.append(p)
    manifest = {"name": name, "parameters": to_jsonable(config), "seed": config.get("seed"),
                "summary": to_jsonable(summary), "versions": versions(),
                "git_describe": git_describe(), "wall_time_s": wall_time,
                "argv": sys.argv, "cwd": os.getcwd()}
    m = out / f"{name}.manifest.json"
    m.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    written.append(m)
    return written
