"""Convergence-study harness: build rules over a ladder of n and report.

Each row records the rule size, weight sum, remainder measure, the empirical
fooling-function error, the asymptotic bound and their ratio.  The rate is
the least-squares slope of log(error) against log(n) over the upper half of
the ladder, where the asymptotic regime applies.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .domain import StarDomain, jordan_measure
from .engine import (
    Exponent,
    evaluate,
    fooling_function,
    reference_integral,
    theorem_bound,
)
from .errors import ConfigError
from .nodes import build_nodeset
from .partition import CubatureRule, compute_weights

REPORT_FORMAT_TAG = "starquad-convergence v1"
REPORT_COLUMNS = (
    "n", "S_size", "h_n", "sum_weights", "remainder",
    "fooling_error", "theorem_bound", "ratio", "wall_time_s",
)

DEFAULT_MEASURE_RESOLUTION = 1152  # divisible by 6: exact for aligned shapes
DEFAULT_PROBE_RESOLUTION = 8
_MAX_AUTO_RESOLUTION = 8192


def build_rule(dom: StarDomain, n: int, subgrid: int = 4,
               probe_resolution: int = DEFAULT_PROBE_RESOLUTION,
               measure_resolution: int = DEFAULT_MEASURE_RESOLUTION,
               bracket=None) -> CubatureRule:
    """Full pipeline: measure bracket, node set, weights."""
    if bracket is None:
        bracket = jordan_measure(dom, measure_resolution)
    nodes = build_nodeset(dom, n, bracket.midpoint, probe_resolution)
    return compute_weights(dom, nodes, subgrid=subgrid, bracket=bracket)


def auto_resolution(dom: StarDomain, h_n: float, subgrid: int) -> int:
    """Default reference-grid resolution: 4x the weight-probe grid."""
    span = float(dom.bbox_span().max())
    res = int(math.ceil(4.0 * span * subgrid / (2.0 * h_n)))
    return max(64, min(res, _MAX_AUTO_RESOLUTION))


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    s_size: int
    h_n: float
    sum_weights: float
    remainder: float
    fooling_error: float
    theorem_bound: float
    ratio: float
    wall_time_s: float


@dataclass(frozen=True)
class ConvergenceReport:
    domain_id: str
    p: str
    subgrid: int
    seed: int
    rows: tuple
    slope: float
    failures: tuple = field(default=())


def fit_slope(rows) -> float:
    """Log-log slope of the fooling error over the upper half of the ladder."""
    usable = [r for r in rows if r.fooling_error > 0]
    if len(usable) < 2:
        return math.nan
    upper = usable[-max(2, (len(usable) + 1) // 2):]
    logn = np.log([r.n for r in upper])
    loge = np.log([r.fooling_error for r in upper])
    return float(np.polyfit(logn, loge, 1)[0])


def run_convergence(dom: StarDomain, exp: Exponent, n_list,
                    subgrid: int = 4, resolution: int = None, seed: int = 0,
                    probe_resolution: int = DEFAULT_PROBE_RESOLUTION,
                    measure_resolution: int = DEFAULT_MEASURE_RESOLUTION,
                    ) -> ConvergenceReport:
    """Build one rule per n and measure it against the asymptotic bound.

    ``n_list`` must be ascending with at least 3 entries.  A row that fails
    to build is recorded under ``failures`` and skipped; it does not abort
    the remaining rows.
    """
    n_list = list(n_list)
    if len(n_list) < 3:
        raise ValueError("n_list needs at least 3 entries")
    if sorted(n_list) != n_list:
        raise ValueError("n_list must be ascending")
    exp = Exponent.parse(exp.p if isinstance(exp, Exponent) else exp)
    exp.validate_for_dim(dom.d)

    bracket = jordan_measure(dom, measure_resolution)
    rows = []
    failures = []
    for n in n_list:
        start = time.perf_counter()
        try:
            rule = build_rule(dom, n, subgrid, probe_resolution,
                              measure_resolution, bracket=bracket)
            res = resolution or auto_resolution(dom, rule.h_n, subgrid)
            fool = fooling_function(rule, exp)
            err = abs(reference_integral(dom, fool, res) - evaluate(rule, fool))
            bound = theorem_bound(dom.d, exp, rule.bracket.midpoint, n)
            rows.append(ConvergenceRow(
                n=n,
                s_size=len(rule),
                h_n=rule.h_n,
                sum_weights=rule.sum_weights,
                remainder=rule.diagnostics.remainder,
                fooling_error=err,
                theorem_bound=bound,
                ratio=err / bound,
                wall_time_s=time.perf_counter() - start,
            ))
        except Exception as exc:  # record and continue with the next n
            failures.append((n, f"{type(exc).__name__}: {exc}"))
    return ConvergenceReport(
        domain_id=dom.name,
        p=str(exp),
        subgrid=subgrid,
        seed=seed,
        rows=tuple(rows),
        slope=fit_slope(rows),
        failures=tuple(failures),
    )


def report_to_csv(report: ConvergenceReport) -> str:
    lines = [
        f"# {REPORT_FORMAT_TAG}",
        f"# domain={report.domain_id}",
        f"# p={report.p}",
        f"# subgrid={report.subgrid}",
        f"# seed={report.seed}",
        f"# slope={report.slope!r}",
    ]
    for n, msg in report.failures:
        lines.append(f"# failed n={n}: {msg}")
    lines.append(",".join(REPORT_COLUMNS))
    for r in report.rows:
        lines.append(",".join([
            str(r.n), str(r.s_size), repr(r.h_n), repr(r.sum_weights),
            repr(r.remainder), repr(r.fooling_error), repr(r.theorem_bound),
            repr(r.ratio), repr(r.wall_time_s),
        ]))
    return "\n".join(lines) + "\n"


def save_report_csv(report: ConvergenceReport, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(report_to_csv(report))


def report_from_csv(text: str) -> ConvergenceReport:
    meta = {}
    failures = []
    rows = []
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# {REPORT_FORMAT_TAG}":
        raise ConfigError(f"not a {REPORT_FORMAT_TAG} file")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("failed "):
                n_part, _, msg = body[len("failed "):].partition(": ")
                failures.append((int(n_part.split("=")[1]), msg))
            elif "=" in body:
                key, _, val = body.partition("=")
                meta[key.strip()] = val.strip()
            continue
        if line.startswith("n,"):
            continue
        parts = line.split(",")
        if len(parts) != len(REPORT_COLUMNS):
            raise ConfigError("row does not match the report columns",
                              line=lineno)
        rows.append(ConvergenceRow(
            n=int(parts[0]), s_size=int(parts[1]), h_n=float(parts[2]),
            sum_weights=float(parts[3]), remainder=float(parts[4]),
            fooling_error=float(parts[5]), theorem_bound=float(parts[6]),
            ratio=float(parts[7]), wall_time_s=float(parts[8]),
        ))
    return ConvergenceReport(
        domain_id=meta.get("domain", "?"),
        p=meta.get("p", "?"),
        subgrid=int(meta.get("subgrid", "0")),
        seed=int(meta.get("seed", "0")),
        rows=tuple(rows),
        slope=float(meta.get("slope", "nan")),
        failures=tuple(failures),
    )


def load_report_csv(path) -> ConvergenceReport:
    with open(path) as fh:
        return report_from_csv(fh.read())
