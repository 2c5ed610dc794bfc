"""Experiment rows and their CSV / JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

COLUMNS = ("experiment", "algorithm", "param", "trial", "C_s", "C_B", "C_E",
           "gamma_A", "iterations", "wall_ms", "feasible")
_FLOATS = ("param", "C_s", "C_B", "C_E", "gamma_A", "wall_ms")
NAN = float("nan")


@dataclass(frozen=True)
class ExperimentResult:
    experiment: str
    algorithm: str
    param: float
    trial: int
    C_s: float = NAN
    C_B: float = NAN
    C_E: float = NAN
    gamma_A: float = NAN
    iterations: int = 0
    wall_ms: float = NAN
    feasible: bool = False
    error: str = ""  # solver exception text; not serialized

    def sort_key(self):
        return (self.experiment, self.param, self.trial, self.algorithm)

    @property
    def has_nan(self) -> bool:
        return any(math.isnan(getattr(self, k)) for k in ("C_s", "C_B", "C_E", "gamma_A"))


def sort_results(rows):
    return sorted(rows, key=ExperimentResult.sort_key)


def _num(x) -> str:
    x = float(x)
    if math.isnan(x):
        return ""
    if x == 0.0:
        return "0"
    return format(x, ".9g")


def _record(r: ExperimentResult, timing: bool = True) -> dict:
    # a missing metric cannot back a feasible claim
    feasible = bool(r.feasible) and not r.has_nan
    out = {}
    for k in COLUMNS:
        v = getattr(r, k)
        if k == "feasible":
            out[k] = "true" if feasible else "false"
        elif k == "wall_ms" and not timing:
            out[k] = "0"
        elif k in _FLOATS:
            out[k] = _num(v)
        else:
            out[k] = str(v)
    return out


def _typed(rec: dict) -> dict:
    item = {}
    for k in COLUMNS:
        s = rec[k]
        if k == "feasible":
            item[k] = s == "true"
        elif k in ("iterations", "trial"):
            item[k] = int(s)
        elif k in _FLOATS:
            item[k] = None if s == "" else float(s)
        else:
            item[k] = s
    return item


def to_csv(rows, timing: bool = True) -> str:
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    wr.writeheader()
    for r in sort_results(rows):
        wr.writerow(_record(r, timing))
    return buf.getvalue()


def to_json(rows, timing: bool = True) -> str:
    recs = []
    for r in sort_results(rows):
        recs.append(_typed(_record(r, timing)))
    return json.dumps(recs, indent=1) + "\n"


def emit(rows, fmt: str, path, timing: bool = True) -> None:
    """Write rows sorted by (experiment, param, trial, algorithm). I/O errors propagate."""
    rows = list(rows)
    if not rows:
        raise ValueError("nothing to emit")
    if fmt == "csv":
        text = to_csv(rows, timing)
    elif fmt == "json":
        text = to_json(rows, timing)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def parse_csv(text: str) -> list:
    """Read emitted CSV back into plain dicts with typed values (None for blanks)."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        out.append(_typed(rec))
    return out


def parse_json(text: str) -> list:
    return json.loads(text)


def mean_by(rows, key=("experiment", "algorithm", "param"), field_name="C_s"):
    """Average ``field_name`` over trials; NaN entries are skipped."""
    acc = {}
    for r in rows:
        v = getattr(r, field_name)
        if isinstance(v, float) and math.isnan(v):
            continue
        k = tuple(getattr(r, f) for f in key)
        s, n = acc.get(k, (0.0, 0))
        acc[k] = (s + v, n + 1)
    return {k: s / n for k, (s, n) in sorted(acc.items())}
