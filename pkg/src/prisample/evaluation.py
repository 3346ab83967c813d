"""Accuracy of estimated distributions against the full-data truth.

For each weighting ``w`` and target, repeated independent master samples are
drawn, ``k`` items are played out with the always-true predicate, and the
estimated curve is compared with the exact one by the maximum absolute
difference of the two cumulative curves (a KS-style distance).  A table
cell holds the median distance over the runs.
"""

from __future__ import annotations

import io
import statistics
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedCurve
from .estimate import DistributionEstimate, MassDistributionEstimate, mass_distribution, ordinary_cdf
from .model import TRUE, Feature, Kind, Population, Ratio, Uniform, WeightSpec
from .playout import sample_by_predicate
from .sampler import create_master
from .synth import true_cdf, true_mass

NODE_WEIGHTS = (Uniform(), Feature("fo"), Feature("fr"), Feature("ac"))
LINK_WEIGHTS = (Uniform(), Feature("fo1"), Feature("fo2"), Ratio("fo2", "fo1"))


def _check_curve(x: np.ndarray, y: np.ndarray, what: str) -> None:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or len(x) == 0:
        raise MalformedCurve(f"{what}: coordinates must be equal-length non-empty vectors")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise MalformedCurve(f"{what}: non-finite coordinate")
    if np.any(np.diff(x) < 0) or np.any(np.diff(y) < 0):
        raise MalformedCurve(f"{what}: curve is not non-decreasing")
    if y[0] < 0 or y[-1] > 1 + 1e-12:
        raise MalformedCurve(f"{what}: values outside [0, 1]")


def _step(x: np.ndarray, y: np.ndarray, at: np.ndarray) -> np.ndarray:
    # right-continuous step through (x, y), zero left of the first breakpoint
    idx = np.searchsorted(x, at, side="right") - 1
    return np.where(idx >= 0, y[np.clip(idx, 0, None)], 0.0)


def _polyline(x: np.ndarray, y: np.ndarray, at: np.ndarray) -> np.ndarray:
    # mass curve through the origin and its points; records tied on the
    # quantile variable share their block's mass evenly
    return np.interp(at, np.r_[0.0, x], np.r_[0.0, y])


ALIGNMENTS = ("value", "quantile")


def _aligned(est, truth, align="value"):
    """Both curves evaluated on the union of their breakpoints.

    Ordinary CDFs are steps in y.  Mass curves are compared either as the
    cumulative mass share r against the quantile variable's value y (steps
    in y, ``align="value"``) or as r against the record share q
    (``align="quantile"``), joining points by straight lines from the origin.
    """
    if isinstance(est, DistributionEstimate) and isinstance(truth, DistributionEstimate):
        pairs = (est.y, est.q), (truth.y, truth.q)
        align = "value"
    elif isinstance(est, MassDistributionEstimate) and isinstance(truth, MassDistributionEstimate):
        if align == "value":
            pairs = (est.y, est.r), (truth.y, truth.r)
        elif align == "quantile":
            pairs = (est.q, est.r), (truth.q, truth.r)
        else:
            raise ValueError(f"align must be one of {ALIGNMENTS}")
    else:
        raise TypeError("ks_statistic needs two curves of the same type")
    (xe, ye), (xt, yt) = pairs
    _check_curve(xe, ye, "estimate")
    _check_curve(xt, yt, "truth")
    if isinstance(est, MassDistributionEstimate):
        _check_curve(est.q, est.r, "estimate")
        _check_curve(truth.q, truth.r, "truth")
    grid = np.union1d(xe, xt)
    if align == "value":
        return grid, _step(xe, ye, grid), _step(xt, yt, grid)
    return grid, _polyline(xe, ye, grid), _polyline(xt, yt, grid)


def ks_statistic(est, truth, align: str = "value") -> float:
    _, fe, ft = _aligned(est, truth, align)
    return float(np.max(np.abs(fe - ft)))


def qq_curve(
    est: MassDistributionEstimate, truth: MassDistributionEstimate, align: str = "value"
) -> list[tuple[float, float]]:
    """(true r, estimated r) pairs on the union grid, ready for plotting."""
    _, fe, ft = _aligned(est, truth, align)
    return list(zip(ft.tolist(), fe.tolist()))


def format_qq(points) -> str:
    return "".join(f"{a!r} {b!r}\n" for a, b in points)


# --------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class EvalSpec:
    dataset: object
    weights: tuple[WeightSpec, ...]
    targets: tuple[tuple[str, str | None], ...]
    runs: int = 100
    k: int = 1000
    base_seed: int = 0
    align: str = "value"

    def __post_init__(self):
        if self.align not in ALIGNMENTS:
            raise ValueError(f"align must be one of {ALIGNMENTS}")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        object.__setattr__(self, "weights", tuple(self.weights))
        object.__setattr__(
            self, "targets",
            tuple((t, None) if isinstance(t, str) else (t[0], t[1]) for t in self.targets),
        )


@dataclass(frozen=True)
class KsCell:
    weight: str
    target: str
    by: str | None
    median_ks: float
    runs: int
    values: tuple[float, ...] = field(repr=False, default=())


@dataclass(frozen=True)
class KsTable:
    cells: tuple[KsCell, ...]

    def value(self, weight, target: str, by: str | None = None) -> float:
        weight = str(weight)
        for c in self.cells:
            if (c.weight, c.target, c.by) == (weight, target, by):
                return c.median_ks
        raise KeyError((weight, target, by))


def default_targets(kind: Kind, mass: bool) -> tuple[tuple[str, str | None], ...]:
    if kind is Kind.LINK:
        if mass:
            return tuple(("ffan", by) for by in ("fo1", "fo2", "ffan"))
        return (("ffan", None),)
    feats = ("fo", "fr", "ac")
    if mass:
        return tuple((x, by) for by in feats for x in feats)
    return tuple((x, None) for x in feats)


def default_weights(kind: Kind) -> tuple[WeightSpec, ...]:
    return LINK_WEIGHTS if kind is Kind.LINK else NODE_WEIGHTS


def _truth(pop, target, by):
    return true_cdf(pop, target) if by is None else true_mass(pop, target, by)


def _estimate(sample, target, by):
    return ordinary_cdf(sample, target) if by is None else mass_distribution(sample, target, by)


def run_eval(spec: EvalSpec) -> KsTable:
    """Median KS per (weighting, target) over ``spec.runs`` master samples.

    Run ``r`` (1-based) uses seed ``base_seed + r``; draws differ between
    weightings because the weight spec is part of the draw key.
    """
    pop = Population.of(spec.dataset)
    truths = {t: _truth(pop, *t) for t in spec.targets}
    values = {(w, t): [] for w in spec.weights for t in spec.targets}
    for r in range(1, spec.runs + 1):
        for w in spec.weights:
            master = create_master(pop, w, spec.base_seed + r)
            sample = sample_by_predicate(master, TRUE, spec.k)
            for t in spec.targets:
                values[w, t].append(ks_statistic(_estimate(sample, *t), truths[t], spec.align))
    cells = tuple(
        KsCell(str(w), t[0], t[1], float(statistics.median(v)), len(v), tuple(v))
        for (w, t), v in values.items()
    )
    return KsTable(cells)


def _label(weight: str) -> str:
    return weight.split(":", 1)[1] if ":" in weight else ("uni" if weight == "uniform" else weight)


def format_table(table: KsTable, fmt: str = "text") -> str:
    """``text``: aligned grid, rows (w, X') by columns X.  ``rows``: CSV records."""
    out = io.StringIO()
    if fmt == "rows":
        out.write("w,X,X',median_ks,runs\n")
        for c in table.cells:
            out.write(f"{c.weight},{c.target},{c.by or ''},{c.median_ks!r},{c.runs}\n")
        return out.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    targets = list(dict.fromkeys(c.target for c in table.cells))
    rows = list(dict.fromkeys((c.weight, c.by) for c in table.cells))
    mass = any(by is not None for _, by in rows)
    grid = {(c.weight, c.by, c.target): c.median_ks for c in table.cells}
    header = ["w"] + (["X'"] if mass else []) + [f"X={t}" for t in targets]
    body = []
    for w, by in rows:
        line = [_label(w)] + ([by or "-"] if mass else [])
        line += [f"{grid[w, by, t]:.3f}" if (w, by, t) in grid else "-" for t in targets]
        body.append(line)
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    for r in [header, *body]:
        out.write("  ".join(s.rjust(n) for s, n in zip(r, widths)).rstrip() + "\n")
    runs = sorted({c.runs for c in table.cells})
    out.write(f"# median KS over {','.join(map(str, runs))} runs\n")
    return out.getvalue()
