"""Synthetic social-graph populations with correlated heavy-tailed features.

Node features ``fo``, ``fr``, ``ac`` are drawn through a Gaussian copula:
correlated standard normals are pushed through each feature's marginal
inverse CDF and rounded to integers.  The latent Gaussian correlation for a
target Spearman coefficient starts from ``2 sin(pi r_s / 6)``; because
rounding heavy-tailed values creates large blocks of ties (about half of a
Pareto(1.2) feature is 1), that value is then corrected numerically so the
rank correlation of the rounded features hits the target.

Links pick both endpoints with probability proportional to ``fo``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
from scipy import optimize, special, stats

from .errors import InsufficientNodes, NotPositiveSemidefinite
from .estimate import DistributionEstimate, MassDistributionEstimate
from .model import NODE_FEATURES, Population, Record, link, node

DEFAULT_SPEARMAN = ((1.0, 0.82, 0.53), (0.82, 1.0, 0.44), (0.53, 0.44, 1.0))

_CHUNK = 1 << 16
_CALIBRATION_SIZE = 60_000
_CALIBRATION_SEED = 20100701
_LINK_STREAM = 1


@dataclass(frozen=True)
class Marginal:
    family: str = "pareto"
    alpha: float = 1.2
    minimum: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.family == "pareto":
            if not (self.alpha > 0 and self.minimum > 0):
                raise ValueError("pareto marginal needs alpha > 0 and minimum > 0")
        elif self.family == "lognormal":
            if not self.sigma > 0:
                raise ValueError("lognormal marginal needs sigma > 0")
        else:
            raise ValueError(f"unknown marginal family {self.family!r}")

    def from_normal(self, z: np.ndarray) -> np.ndarray:
        """Inverse-CDF transform of standard normals, rounded to integers."""
        if self.family == "pareto":
            tail = special.ndtr(-z)
            return np.floor(self.minimum * tail ** (-1.0 / self.alpha))
        return np.rint(np.exp(self.mu + self.sigma * z))


def _default_marginals():
    return {"fo": Marginal(alpha=1.2), "fr": Marginal(alpha=1.2), "ac": Marginal(alpha=1.5)}


@dataclass(frozen=True)
class SynthConfig:
    n_nodes: int = 100_000
    n_links: int = 100_000
    seed: int = 0
    spearman: tuple = DEFAULT_SPEARMAN
    marginals: Mapping[str, Marginal] = field(default_factory=_default_marginals)

    def __post_init__(self):
        s = np.asarray(self.spearman, dtype=float)
        if s.shape != (3, 3):
            raise ValueError("spearman must be a 3x3 matrix over (fo, fr, ac)")
        if not np.allclose(s, s.T) or not np.all(np.diag(s) == 1) or np.any(np.abs(s) > 1):
            raise ValueError("spearman matrix must be symmetric with unit diagonal and entries in [-1, 1]")
        if set(self.marginals) != set(NODE_FEATURES):
            raise ValueError(f"marginals must be given for exactly {', '.join(NODE_FEATURES)}")
        if self.n_nodes < 0 or self.n_links < 0:
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "spearman", tuple(tuple(float(v) for v in row) for row in s))

    @classmethod
    def from_dict(cls, data: dict) -> SynthConfig:
        data = dict(data)
        if "marginals" in data:
            data["marginals"] = {k: Marginal(**v) for k, v in data["marginals"].items()}
        if "spearman" in data:
            data["spearman"] = tuple(tuple(row) for row in data["spearman"])
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spearman"] = [list(row) for row in self.spearman]
        return d


def load_config(path) -> SynthConfig:
    with open(path) as fh:
        return SynthConfig.from_dict(json.load(fh))


def spearman_to_pearson(r_s: float) -> float:
    """Gaussian correlation giving Spearman ``r_s`` for continuous margins."""
    return 2.0 * math.sin(math.pi * r_s / 6.0)


@lru_cache(maxsize=64)
def _calibrated_rho(a: Marginal, b: Marginal, r_s: float) -> float:
    start = spearman_to_pearson(r_s)
    if r_s == 0 or abs(r_s) == 1:
        return start
    rng = np.random.default_rng(_CALIBRATION_SEED)
    z1, z2 = rng.standard_normal((2, _CALIBRATION_SIZE))
    rank_a = stats.rankdata(a.from_normal(z1))

    def gap(rho):
        y = b.from_normal(rho * z1 + math.sqrt(1.0 - rho * rho) * z2)
        return stats.pearsonr(rank_a, stats.rankdata(y)).statistic - r_s

    lo, hi = (start, 0.9999) if r_s > 0 else (-0.9999, start)
    if gap(lo) * gap(hi) > 0:
        # target beyond what the tied ranks can reach; take the nearest end
        return hi if r_s > 0 else lo
    return optimize.brentq(gap, lo, hi, xtol=1e-5)


def latent_correlation(config: SynthConfig) -> np.ndarray:
    """Gaussian-copula correlation matrix realising the Spearman targets."""
    s = np.asarray(config.spearman)
    margs = [config.marginals[f] for f in NODE_FEATURES]
    rho = np.eye(3)
    for i in range(3):
        for j in range(i + 1, 3):
            rho[i, j] = rho[j, i] = _calibrated_rho(margs[i], margs[j], s[i, j])
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise NotPositiveSemidefinite(f"latent correlation matrix is not PSD:\n{rho}")
    return rho


def _matrix_root(rho: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(rho)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(rho)
        return vecs * np.sqrt(np.clip(vals, 0, None))


def generate_nodes(config: SynthConfig) -> list[Record]:
    """Nodes ``n0 .. n{N-1}``; draws for record i depend only on (seed, i // 2**16)."""
    root = _matrix_root(latent_correlation(config))
    margs = [config.marginals[f] for f in NODE_FEATURES]
    records = []
    for start in range(0, config.n_nodes, _CHUNK):
        m = min(_CHUNK, config.n_nodes - start)
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, start // _CHUNK]))
        z = rng.standard_normal((m, 3)) @ root.T
        cols = [marg.from_normal(z[:, c]).tolist() for c, marg in enumerate(margs)]
        records.extend(node(f"n{start + i}", *vals) for i, vals in enumerate(zip(*cols)))
    return records


def generate_links(nodes: Iterable[Record], n_links: int, seed: int) -> list[Record]:
    """Distinct directed links, both endpoints drawn with probability proportional to fo."""
    nodes = list(nodes)
    fo = np.array([r["fo"] for r in nodes], dtype=float)
    eligible = np.flatnonzero(fo > 0)
    m = len(eligible)
    if m < 2:
        raise InsufficientNodes("need at least two nodes with fo > 0")
    if n_links > m * (m - 1):
        raise InsufficientNodes(f"{n_links} distinct links requested but only {m * (m - 1)} exist")
    cdf = np.cumsum(fo[eligible])
    total = cdf[-1]
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(_LINK_STREAM,)))

    pairs, seen = [], set()
    stalls = 0
    while len(pairs) < n_links:
        need = n_links - len(pairs)
        batch = 2 * need + 16
        u1 = eligible[np.searchsorted(cdf, rng.random(batch) * total, side="right")]
        u2 = eligible[np.searchsorted(cdf, rng.random(batch) * total, side="right")]
        before = len(pairs)
        for a, b in zip(u1.tolist(), u2.tolist()):
            if a != b and (a, b) not in seen:
                seen.add((a, b))
                pairs.append((a, b))
                if len(pairs) == n_links:
                    break
        stalls = stalls + 1 if len(pairs) == before else 0
        if stalls > 1000:
            raise InsufficientNodes("could not find enough distinct links")
    return [link(nodes[a].id, nodes[b].id, fo[a], fo[b]) for a, b in pairs]


def generate(config: SynthConfig) -> tuple[list[Record], list[Record]]:
    nodes = generate_nodes(config)
    links = generate_links(nodes, config.n_links, config.seed) if config.n_links else []
    return nodes, links


# --------------------------------------------------------------------------
# exact population curves


def true_cdf(records, variable: str) -> DistributionEstimate:
    pop = Population.of(records)
    x = pop.column(variable)
    y, counts = np.unique(x, return_counts=True)
    cum = np.cumsum(counts)
    return DistributionEstimate(variable, y, cum / cum[-1], "exact", len(pop))


def true_mass(records, mass_variable: str, quantile_variable: str) -> MassDistributionEstimate:
    pop = Population.of(records)
    xj = pop.column(quantile_variable)
    xl = pop.column(mass_variable)
    order = np.argsort(xj, kind="stable")
    xj, xl = xj[order], xl[order]
    ends = np.flatnonzero(np.r_[xj[1:] != xj[:-1], True])
    count = (ends + 1).astype(float)
    mass = np.cumsum(xl)[ends]
    return MassDistributionEstimate(
        mass_variable, quantile_variable, count / count[-1], mass / mass[-1],
        "exact", len(pop), xj[ends],
    )


# --------------------------------------------------------------------------
# fidelity diagnostics


def spearman_matrix(records, features=NODE_FEATURES) -> np.ndarray:
    pop = Population.of(records)
    data = np.column_stack([pop.column(f) for f in features])
    return np.atleast_2d(stats.spearmanr(data).statistic)


def tail_slope(values, lo: float = 1e-3, hi: float = 1e-2) -> float:
    """Least-squares slope of log CCDF vs log value over CCDF levels in [lo, hi]."""
    x = np.sort(np.asarray(values, dtype=float))[::-1]
    ccdf = np.arange(1, len(x) + 1) / len(x)
    keep = (ccdf >= lo) & (ccdf <= hi) & (x > 0)
    return float(np.polyfit(np.log(x[keep]), np.log(ccdf[keep]), 1)[0])
