"""Priority sampling and the master sample.

Every record ``i`` with weight ``w_i`` receives a draw ``u_i`` in (0, 1] and
a priority ``w_i / u_i``.  The master sample is the population sorted by
decreasing priority; any sample of size ``k`` is its first ``k`` entries and
the threshold ``z(k)`` is the priority of entry ``k + 1``.  With
``p_i = min(1, w_i / z)`` the estimate ``max(w_i, z)`` of a sampled weight
is unbiased.

Draws are a pure function of ``(weight spec, seed, record id)`` so that
masters are reproducible regardless of input order, and masters built under
different weight specs use independent randomness.
"""

from __future__ import annotations

import hashlib
import json
import os
import weakref
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CorruptMaster, DuplicateId, ParseError
from .model import Population, Record, WeightSpec, parse_weight, weight_of

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class PriorityEntry:
    id: str
    weight: float
    draw: float
    priority: float


# --------------------------------------------------------------------------
# seeded per-key draws


def _hash64(data: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def stream_key(spec: WeightSpec, seed: int) -> int:
    """64-bit key for the draw stream of one (weight spec, seed) pair."""
    return _hash64(f"{spec}\x00{int(seed) & _MASK64}".encode())


def id_hashes(ids: Sequence[str]) -> np.ndarray:
    return np.fromiter((_hash64(i.encode()) for i in ids), dtype=np.uint64, count=len(ids))


_HASH_CACHE: "weakref.WeakKeyDictionary[Population, np.ndarray]" = weakref.WeakKeyDictionary()


def _population_hashes(pop: Population) -> np.ndarray:
    h = _HASH_CACHE.get(pop)
    if h is None:
        h = _HASH_CACHE[pop] = id_hashes(pop.ids)
    return h


def _mix(x: np.ndarray) -> np.ndarray:
    # splitmix64 finaliser
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def uniform_draws(hashes: np.ndarray, key: int) -> np.ndarray:
    """Map per-id hashes to draws in (0, 1] for the stream ``key``.

    Uses the top 53 bits of the mixed hash so that every value is an exact
    double: ``u = (h53 + 1) / 2**53``.
    """
    with np.errstate(over="ignore"):
        h = _mix(np.asarray(hashes, dtype=np.uint64) ^ np.uint64(key))
    return ((h >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def draws_for(ids: Sequence[str], spec: WeightSpec, seed: int) -> np.ndarray:
    return uniform_draws(id_hashes(ids), stream_key(spec, seed))


def _priorities(weights: np.ndarray, draws: np.ndarray) -> np.ndarray:
    out = np.zeros_like(weights)
    pos = weights > 0
    np.divide(weights, draws, out=out, where=pos)
    return out


# --------------------------------------------------------------------------
# construction


def assign_priorities(
    records: Iterable[Record],
    spec: WeightSpec,
    seed: int,
    draws: Sequence[float] | None = None,
) -> list[PriorityEntry]:
    """One priority entry per record.

    ``draws`` overrides the seeded draws (one value in (0, 1] per record);
    it exists for hand-checkable examples.
    """
    records = list(records)
    weights = np.array([weight_of(r, spec) for r in records], dtype=float)
    if draws is None:
        u = draws_for([r.id for r in records], spec, seed)
    else:
        u = np.asarray(draws, dtype=float)
        if u.shape != weights.shape or np.any((u <= 0) | (u > 1)):
            raise ValueError("draws must be one value in (0, 1] per record")
    prio = _priorities(weights, u)
    return [
        PriorityEntry(r.id, float(w), float(d), float(p))
        for r, w, d, p in zip(records, weights, u, prio)
    ]


@dataclass(frozen=True, eq=False)
class MasterSample:
    """Population in decreasing priority order (ties by ascending id).

    ``features`` holds feature columns aligned with the master order; it is
    ``None`` when the master was built or loaded without its records, in
    which case only the always-true predicate can be played out.
    """

    ids: tuple[str, ...]
    weights: np.ndarray
    draws: np.ndarray
    priorities: np.ndarray
    weight_spec: WeightSpec
    seed: int
    population_size: int
    capped: bool = False
    k_max: int | None = None
    features: Mapping[str, np.ndarray] | None = None

    def __len__(self):
        return len(self.ids)

    @cached_property
    def entries(self) -> tuple[PriorityEntry, ...]:
        return tuple(
            PriorityEntry(i, float(w), float(u), float(p))
            for i, w, u, p in zip(self.ids, self.weights, self.draws, self.priorities)
        )

    @cached_property
    def checksum(self) -> str:
        """SHA-256 over the ordered content and the metadata."""
        h = hashlib.sha256()
        h.update(_meta_text(self).encode())
        h.update("\n".join(self.ids).encode())
        h.update(np.ascontiguousarray(self.weights, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.priorities, dtype="<f8").tobytes())
        return h.hexdigest()

    def with_features(self, records: Iterable[Record] | Population) -> MasterSample:
        pop = Population.of(records)
        index = {rid: i for i, rid in enumerate(pop.ids)}
        try:
            rows = np.array([index[i] for i in self.ids], dtype=np.intp)
        except KeyError as exc:
            raise CorruptMaster(f"master id {exc.args[0]!r} not present in records") from None
        feats = {name: _readonly(col[rows]) for name, col in pop.columns.items()}
        return _replace_features(self, feats)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


def _replace_features(m: MasterSample, feats) -> MasterSample:
    return MasterSample(
        m.ids, m.weights, m.draws, m.priorities, m.weight_spec, m.seed,
        m.population_size, m.capped, m.k_max, feats,
    )


def _meta_text(m: MasterSample) -> str:
    return f"{m.weight_spec}|{m.seed}|{m.population_size}|{int(m.capped)}|{m.k_max}|{len(m.ids)}\n"


def build_master(
    entries: Sequence[PriorityEntry],
    spec: WeightSpec,
    seed: int,
    k_max: int | None = None,
    records: Iterable[Record] | Population | None = None,
) -> MasterSample:
    """Sort priority entries into a master sample, optionally capped at ``k_max``."""
    seen = set()
    for e in entries:
        if e.id in seen:
            raise DuplicateId(e.id)
        seen.add(e.id)
    if k_max is not None and k_max < 0:
        raise ValueError("k_max must be non-negative")
    ordered = sorted(entries, key=lambda e: (-e.priority, e.id))
    n = len(ordered)
    capped = k_max is not None and k_max < n
    if capped:
        ordered = ordered[:k_max]
    master = MasterSample(
        ids=tuple(e.id for e in ordered),
        weights=_readonly(np.array([e.weight for e in ordered], dtype=float)),
        draws=_readonly(np.array([e.draw for e in ordered], dtype=float)),
        priorities=_readonly(np.array([e.priority for e in ordered], dtype=float)),
        weight_spec=spec,
        seed=int(seed),
        population_size=n,
        capped=capped,
        k_max=k_max,
    )
    if records is not None:
        master = master.with_features(records)
    return master


def create_master(
    records: Iterable[Record] | Population,
    spec: WeightSpec,
    seed: int,
    k_max: int | None = None,
) -> MasterSample:
    """Vectorised ``assign_priorities`` + ``build_master`` with features attached.

    Produces exactly the same master as the two-step route.
    """
    pop = Population.of(records)
    weights = np.asarray(spec.weights(pop), dtype=float)
    u = uniform_draws(_population_hashes(pop), stream_key(spec, seed))
    prio = _priorities(weights, u)
    order = np.lexsort((_id_rank(pop), -prio))
    n = len(pop)
    capped = k_max is not None and k_max < n
    if k_max is not None and k_max < 0:
        raise ValueError("k_max must be non-negative")
    if capped:
        order = order[:k_max]
    ids = tuple(pop.ids[i] for i in order)
    return MasterSample(
        ids=ids,
        weights=_readonly(weights[order]),
        draws=_readonly(u[order]),
        priorities=_readonly(prio[order]),
        weight_spec=spec,
        seed=int(seed),
        population_size=n,
        capped=capped,
        k_max=k_max,
        features={name: _readonly(col[order]) for name, col in pop.columns.items()},
    )


_RANK_CACHE: "weakref.WeakKeyDictionary[Population, np.ndarray]" = weakref.WeakKeyDictionary()


def _id_rank(pop: Population) -> np.ndarray:
    rank = _RANK_CACHE.get(pop)
    if rank is None:
        order = np.argsort(np.array(pop.ids, dtype=str), kind="stable")
        rank = np.empty(len(order), dtype=np.intp)
        rank[order] = np.arange(len(order))
        _RANK_CACHE[pop] = rank
    return rank


# --------------------------------------------------------------------------
# thresholds and estimates


def threshold(master: MasterSample, k: int) -> float:
    """The (k+1)-st highest priority, or 0 when the master has at most k entries."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return float(master.priorities[k]) if k < len(master) else 0.0


def inclusion_prob(w: float, z: float) -> float:
    if z == 0:
        return 1.0
    return min(1.0, w / z)


def ht_weight_estimate(w: float, z: float, sampled: bool) -> float:
    return max(w, z) if sampled else 0.0


# --------------------------------------------------------------------------
# persistence


def sidecar_path(path) -> str:
    return os.fspath(path) + ".meta.json"


def format_master_csv(master: MasterSample) -> str:
    lines = ["id,weight,priority"]
    lines += [
        f"{i},{w!r},{p!r}"
        for i, w, p in zip(master.ids, master.weights.tolist(), master.priorities.tolist())
    ]
    return "\n".join(lines) + "\n"


def master_metadata(master: MasterSample) -> dict:
    return {
        "weight_spec": str(master.weight_spec),
        "seed": master.seed,
        "population_size": master.population_size,
        "capped": master.capped,
        "k_max": master.k_max,
        "length": len(master),
        "checksum": master.checksum,
    }


def save_master(master: MasterSample, path) -> None:
    """Write ``path`` (id,weight,priority rows) and ``path.meta.json``."""
    for i in master.ids:
        if "," in i or "\n" in i:
            raise ValueError(f"id {i!r} cannot be written to CSV")
    with open(path, "w", newline="") as fh:
        fh.write(format_master_csv(master))
    with open(sidecar_path(path), "w") as fh:
        json.dump(master_metadata(master), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_master(path, records: Iterable[Record] | Population | None = None) -> MasterSample:
    """Load a saved master, verifying order and checksum.

    Draws are re-derived from the seed; they are not stored.
    """
    try:
        with open(sidecar_path(path)) as fh:
            meta = json.load(fh)
        spec = parse_weight(meta["weight_spec"])
        seed = int(meta["seed"])
    except (OSError, ValueError, KeyError) as exc:
        raise CorruptMaster(f"{sidecar_path(path)}: unreadable metadata: {exc}") from None

    ids, weights, prios = [], [], []
    with open(path, newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != "id,weight,priority":
            raise ParseError(f"{path}: line 1: expected header 'id,weight,priority'")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 3:
                raise ParseError(f"{path}: line {lineno}: expected 3 fields")
            try:
                w, p = float(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: bad number") from None
            ids.append(parts[0])
            weights.append(w)
            prios.append(p)

    for n in range(1, len(ids)):
        if (-prios[n - 1], ids[n - 1]) >= (-prios[n], ids[n]):
            raise CorruptMaster(f"{path}: line {n + 2}: entries out of priority order")
    weights_a = np.array(weights, dtype=float)
    master = MasterSample(
        ids=tuple(ids),
        weights=_readonly(weights_a),
        draws=_readonly(draws_for(ids, spec, seed)),
        priorities=_readonly(np.array(prios, dtype=float)),
        weight_spec=spec,
        seed=seed,
        population_size=int(meta["population_size"]),
        capped=bool(meta["capped"]),
        k_max=meta["k_max"],
    )
    if master.checksum != meta.get("checksum"):
        raise CorruptMaster(f"{path}: checksum mismatch")
    if records is not None:
        master = master.with_features(records)
    return master
