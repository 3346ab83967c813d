"""Horvitz-Thompson estimates from played-out samples.

A sampled entry with weight ``w`` under threshold ``z`` was included with
probability ``p = min(1, w/z)`` (1 when ``z == 0``); sums and counts weight
each entry by ``1/p``.  Ordinary and mass distribution curves are ratios of
such cumulative estimates, evaluated at the distinct sampled values of the
quantile variable.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptySample, MissingFeature
from .model import TRUE, WEIGHT, And, Const, Predicate
from .playout import SampleEntry, SampleResult
from .sampler import inclusion_prob


def entry_value(entry: SampleEntry, name: str) -> float:
    try:
        return entry.features[name]
    except KeyError:
        if name == WEIGHT:
            return entry.weight
        raise MissingFeature(name, entry.id) from None


def _matches(entry: SampleEntry, pred: Predicate) -> bool:
    if isinstance(pred, Const):
        return pred.value
    for name in pred.features():
        if name not in entry.features:
            raise MissingFeature(name, entry.id)
    return pred._eval(entry.features)


def _inverse_prob(entry: SampleEntry, z: float) -> float:
    return 1.0 / inclusion_prob(entry.weight, z)


def prefix_fsum(values: Iterable[float]) -> list[float]:
    """Correctly rounded running sums (Shewchuk partials)."""
    partials: list[float] = []
    out = []
    for x in values:
        i = 0
        for y in partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                partials[i] = lo
                i += 1
            x = hi
        partials[i:] = [x]
        out.append(math.fsum(partials))
    return out


def subset_sum(sample: SampleResult, feature: str, pred: Predicate = TRUE) -> float:
    z = sample.threshold
    return math.fsum(
        entry_value(e, feature) / inclusion_prob(e.weight, z)
        for e in sample.entries
        if _matches(e, pred)
    )


def subset_count(sample: SampleResult, pred: Predicate = TRUE) -> float:
    z = sample.threshold
    return math.fsum(_inverse_prob(e, z) for e in sample.entries if _matches(e, pred))


def restrict(sample: SampleResult, pred: Predicate) -> SampleResult:
    """Keep the entries matching ``pred``; threshold and mode are unchanged."""
    if pred == TRUE:
        return sample
    kept = tuple(e for e in sample.entries if _matches(e, pred))
    combined = pred if sample.predicate == TRUE else And(sample.predicate, pred)
    return dataclasses.replace(sample, entries=kept, predicate=combined)


@dataclass(frozen=True, eq=False)
class DistributionEstimate:
    variable: str
    y: np.ndarray
    q: np.ndarray
    weight_spec: str
    k: int

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.y.tolist(), self.q.tolist()))


@dataclass(frozen=True, eq=False)
class MassDistributionEstimate:
    mass_variable: str
    quantile_variable: str
    q: np.ndarray
    r: np.ndarray
    weight_spec: str
    k: int
    y: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.q.tolist(), self.r.tolist()))


def _grouped_prefix(keys: Sequence[float], *columns: Sequence[float]):
    """Sort by key and return distinct keys with cumulative column sums at each."""
    order = sorted(range(len(keys)), key=keys.__getitem__)
    sorted_keys = [keys[i] for i in order]
    prefixes = [prefix_fsum(col[i] for i in order) for col in columns]
    # last index of every run of equal keys
    ends = [i for i in range(len(order)) if i + 1 == len(order) or sorted_keys[i + 1] != sorted_keys[i]]
    return (
        np.array([sorted_keys[i] for i in ends]),
        *(np.array([p[i] for i in ends]) for p in prefixes),
    )


def ordinary_cdf(sample: SampleResult, variable: str) -> DistributionEstimate:
    """Estimated CDF of ``variable``: the share of records with value <= y."""
    if not sample.entries:
        raise EmptySample("cannot estimate a distribution from an empty sample")
    z = sample.threshold
    ys = [entry_value(e, variable) for e in sample.entries]
    counts = [_inverse_prob(e, z) for e in sample.entries]
    y, n_le = _grouped_prefix(ys, counts)
    return DistributionEstimate(variable, y, n_le / n_le[-1], sample.weight_spec, sample.k_returned)


def mass_distribution(
    sample: SampleResult, mass_variable: str, quantile_variable: str
) -> MassDistributionEstimate:
    """Curve (q(y), r(y)): share of records with quantile value <= y against
    the share of ``mass_variable``'s total they hold."""
    if not sample.entries:
        raise EmptySample("cannot estimate a distribution from an empty sample")
    z = sample.threshold
    ys = [entry_value(e, quantile_variable) for e in sample.entries]
    inv = [_inverse_prob(e, z) for e in sample.entries]
    mass = [entry_value(e, mass_variable) / inclusion_prob(e.weight, z) for e in sample.entries]
    y, n_le, x_le = _grouped_prefix(ys, inv, mass)
    if x_le[-1] == 0:
        raise EmptySample(f"sampled total of {mass_variable} is zero")
    return MassDistributionEstimate(
        mass_variable, quantile_variable, n_le / n_le[-1], x_le / x_le[-1],
        sample.weight_spec, sample.k_returned, y,
    )


# --------------------------------------------------------------------------
# output


def estimate_to_dict(est, z: float | None = None) -> dict:
    if isinstance(est, DistributionEstimate):
        out = {"type": "cdf", "variable": est.variable, "columns": ["y", "q"]}
    else:
        out = {
            "type": "mass",
            "mass_variable": est.mass_variable,
            "quantile_variable": est.quantile_variable,
            "columns": ["q", "r", "y"],
        }
    points = [list(p) for p in est.points]
    if isinstance(est, MassDistributionEstimate):
        for p, y in zip(points, est.y.tolist()):
            p.append(y)
    out.update(weight_spec=est.weight_spec, k=est.k, z=z, points=points)
    return out


def format_estimate(est, z: float | None = None, fmt: str = "text") -> str:
    """``text`` is a JSON document; ``rows`` is a header plus one tab-separated point per line."""
    data = estimate_to_dict(est, z)
    if fmt == "text":
        return json.dumps(data, indent=1) + "\n"
    if fmt != "rows":
        raise ValueError(f"unknown format {fmt!r}")
    out = io.StringIO()
    out.write("\t".join(data["columns"]) + "\n")
    for p in data["points"]:
        out.write("\t".join(repr(v) for v in p) + "\n")
    return out.getvalue()
