"""Serving samples from a master sample.

All randomness lives in the master; playout is a deterministic scan of the
master in priority order.  The engine keeps no state between calls: a
``SampleResult`` carries the cursor needed to extend it.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    AlreadyExhausted,
    EmptyMaster,
    MasterMismatch,
    MissingFeature,
    ModeMismatch,
    ParseError,
)
from .model import Const, Predicate, parse_predicate
from .sampler import MasterSample, threshold


class Mode(str, enum.Enum):
    PREDICATE_LIMITED = "predicate"
    COST_LIMITED = "cost"


@dataclass(frozen=True)
class SampleEntry:
    id: str
    weight: float
    priority: float
    features: Mapping[str, float]


@dataclass(frozen=True)
class SampleResult:
    entries: tuple[SampleEntry, ...]
    threshold: float
    mode: Mode
    k_requested: int
    cursor: int
    exhausted: bool
    predicate: Predicate
    master_ref: str
    weight_spec: str

    @property
    def k_returned(self) -> int:
        return len(self.entries)

    @property
    def z(self) -> float:
        return self.threshold

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]


def _match_positions(master: MasterSample, pred: Predicate, start: int = 0) -> np.ndarray:
    n = len(master)
    if isinstance(pred, Const):
        return np.arange(start, n) if pred.value else np.arange(0)
    names = pred.features()
    if master.features is None:
        raise MissingFeature(sorted(names)[0])
    cols = {}
    for name in names:
        if name not in master.features:
            raise MissingFeature(name)
        cols[name] = master.features[name][start:]
    return start + np.flatnonzero(pred._mask(cols, n - start))


def _entry(master: MasterSample, i: int) -> SampleEntry:
    feats = {} if master.features is None else {
        name: float(col[i]) for name, col in master.features.items()
    }
    return SampleEntry(master.ids[i], float(master.weights[i]), float(master.priorities[i]), feats)


def _take(master: MasterSample, pos: np.ndarray, k: int):
    """Pick the first ``k`` of the match positions ``pos``.

    Returns (chosen positions, threshold, cursor, exhausted).
    """
    n = len(master)
    if len(pos) > k:
        return pos[:k], float(master.priorities[pos[k]]), int(pos[k - 1]) + 1, False
    if not master.capped:
        # the master is the whole population: every match is in hand, exact sample
        return pos, 0.0, n, True
    if len(pos) == 0:
        return pos, 0.0, n, True
    # capped master: more matches may lie beyond the cap, hold one back as threshold
    return pos[:-1], float(master.priorities[pos[-1]]), n, True


def sample_by_predicate(master: MasterSample, pred: Predicate, k: int) -> SampleResult:
    """First ``k`` entries of the master matching ``pred``.

    The threshold is the priority of the (k+1)-st match.  When fewer matches
    exist the sample is exhausted: on an uncapped master all matches are
    returned with threshold 0 (exact), on a capped master the last match
    found is held back to serve as the threshold.
    """
    if len(master) == 0:
        raise EmptyMaster("master sample has no entries")
    if k < 1:
        raise ValueError("k must be at least 1")
    pos = _match_positions(master, pred)
    chosen, z, cursor, exhausted = _take(master, pos, k)
    return SampleResult(
        entries=tuple(_entry(master, int(i)) for i in chosen),
        threshold=z,
        mode=Mode.PREDICATE_LIMITED,
        k_requested=k,
        cursor=cursor,
        exhausted=exhausted,
        predicate=pred,
        master_ref=master.checksum,
        weight_spec=str(master.weight_spec),
    )


def extend_sample(
    master: MasterSample, prev: SampleResult, j: int, pred: Predicate | None = None
) -> SampleResult:
    """Adjoin the next ``j`` matches after ``prev``; the old threshold is discarded.

    The result holds the union, equal to ``sample_by_predicate(master, S, k + j)``.
    """
    if prev.master_ref != master.checksum:
        raise MasterMismatch("sample was not drawn from this master")
    if pred is not None and pred != prev.predicate:
        raise MasterMismatch(f"predicate {pred} differs from the sample's {prev.predicate}")
    if prev.mode is not Mode.PREDICATE_LIMITED:
        raise ModeMismatch("only predicate-limited samples can be extended")
    if prev.exhausted:
        raise AlreadyExhausted("no further matches in the master")
    if j < 1:
        raise ValueError("j must be at least 1")
    pos = _match_positions(master, prev.predicate, prev.cursor)
    chosen, z, cursor, exhausted = _take(master, pos, j)
    return SampleResult(
        entries=prev.entries + tuple(_entry(master, int(i)) for i in chosen),
        threshold=z,
        mode=Mode.PREDICATE_LIMITED,
        k_requested=prev.k_returned + j,
        cursor=cursor,
        exhausted=exhausted,
        predicate=prev.predicate,
        master_ref=prev.master_ref,
        weight_spec=prev.weight_spec,
    )


def increment(prev: SampleResult, extended: SampleResult) -> tuple[SampleEntry, ...]:
    """Entries added by an extension."""
    return extended.entries[prev.k_returned:]


def sample_cost_limited(master: MasterSample, pred: Predicate, k: int) -> SampleResult:
    """Matches of ``pred`` among the first ``k`` entries of the master.

    Reports the unconditional threshold ``z(k)``.  On a capped master with
    ``k >= len(master)`` the last entry is held back as the threshold.
    """
    if len(master) == 0:
        raise EmptyMaster("master sample has no entries")
    if k < 1:
        raise ValueError("k must be at least 1")
    n = len(master)
    if master.capped and k >= n:
        scan, z = n - 1, float(master.priorities[n - 1])
    else:
        scan, z = min(k, n), threshold(master, k)
    pos = _match_positions(master, pred)
    pos = pos[pos < scan]
    return SampleResult(
        entries=tuple(_entry(master, int(i)) for i in pos),
        threshold=z,
        mode=Mode.COST_LIMITED,
        k_requested=k,
        cursor=scan,
        exhausted=k >= n,
        predicate=pred,
        master_ref=master.checksum,
        weight_spec=str(master.weight_spec),
    )


# --------------------------------------------------------------------------
# serialisation


def sample_to_dict(sample: SampleResult) -> dict:
    names = sorted({name for e in sample.entries for name in e.features})
    return {
        "master": sample.master_ref,
        "weight_spec": sample.weight_spec,
        "predicate": str(sample.predicate),
        "mode": sample.mode.value,
        "k_requested": sample.k_requested,
        "k_returned": sample.k_returned,
        "z": sample.threshold,
        "cursor": sample.cursor,
        "exhausted": sample.exhausted,
        "columns": ["id", "weight", "priority", *names],
        "entries": [
            [e.id, e.weight, e.priority, *(e.features.get(name) for name in names)]
            for e in sample.entries
        ],
    }


def sample_from_dict(data: dict) -> SampleResult:
    try:
        columns = data["columns"]
        if columns[:3] != ["id", "weight", "priority"]:
            raise ParseError("sample columns must start with id, weight, priority")
        names = columns[3:]
        entries = []
        for row in data["entries"]:
            feats = {n: float(v) for n, v in zip(names, row[3:]) if v is not None}
            entries.append(SampleEntry(row[0], float(row[1]), float(row[2]), feats))
        sample = SampleResult(
            entries=tuple(entries),
            threshold=float(data["z"]),
            mode=Mode(data["mode"]),
            k_requested=int(data["k_requested"]),
            cursor=int(data["cursor"]),
            exhausted=bool(data["exhausted"]),
            predicate=parse_predicate(data["predicate"]),
            master_ref=data["master"],
            weight_spec=data["weight_spec"],
        )
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed sample: {exc}") from None
    if sample.k_returned != data["k_returned"]:
        raise ParseError("k_returned does not match the number of entries")
    return sample


def format_sample(sample: SampleResult) -> str:
    return json.dumps(sample_to_dict(sample), indent=1) + "\n"


def parse_sample(text: str) -> SampleResult:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}: {exc.msg}") from None
    return sample_from_dict(data)


def save_sample(sample: SampleResult, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_sample(sample))


def load_sample(path) -> SampleResult:
    with open(path) as fh:
        return parse_sample(fh.read())
