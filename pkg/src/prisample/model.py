"""Records, populations, sampling weights and selection predicates.

A population is a set of records of a single kind (graph nodes or graph
links), each carrying named non-negative numeric features.  Node records
carry the follower count ``fo``, friend count ``fr`` and activity ``ac``;
link records ``(u1, u2)`` carry ``fo1``, ``fo2`` and the follower fanout
``ffan = fo2 / fo1``.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateId,
    InvalidRecord,
    MissingFeature,
    ParseError,
    ZeroDenominator,
)

NODE_FEATURES = ("fo", "fr", "ac")
LINK_FEATURES = ("fo1", "fo2", "ffan")
LINK_SEP = "->"

# pseudo-feature resolving to an entry's sampling weight in estimators
WEIGHT = "weight"


class Kind(str, enum.Enum):
    NODE = "node"
    LINK = "link"


@dataclass(frozen=True)
class Record:
    id: str
    kind: Kind
    features: Mapping[str, float]

    def __post_init__(self):
        kind = Kind(self.kind)
        feats = {}
        for name, value in self.features.items():
            value = float(value)
            if not math.isfinite(value) or value < 0:
                raise InvalidRecord(
                    f"record {self.id!r}: feature {name}={value!r} is not a finite non-negative number"
                )
            feats[str(name)] = value
        required = NODE_FEATURES if kind is Kind.NODE else LINK_FEATURES
        for name in required:
            if name not in feats:
                raise MissingFeature(name, self.id)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "features", MappingProxyType(feats))

    def __getitem__(self, name: str) -> float:
        try:
            return self.features[name]
        except KeyError:
            raise MissingFeature(name, self.id) from None


def node(id: str, fo: float, fr: float, ac: float, **extra: float) -> Record:
    return Record(id, Kind.NODE, {"fo": fo, "fr": fr, "ac": ac, **extra})


def link(u1: str, u2: str, fo1: float, fo2: float) -> Record:
    fo1, fo2 = float(fo1), float(fo2)
    if fo1 == 0:
        raise ZeroDenominator(f"link {u1}{LINK_SEP}{u2}: fo1 is 0, ffan undefined")
    return Record(f"{u1}{LINK_SEP}{u2}", Kind.LINK, {"fo1": fo1, "fo2": fo2, "ffan": fo2 / fo1})


# --------------------------------------------------------------------------
# weights


class WeightSpec:
    """Rule mapping a record to its sampling weight."""

    def referenced(self) -> tuple[str, ...]:
        raise NotImplementedError

    def weight(self, record: Record) -> float:
        raise NotImplementedError

    def weights(self, population: Population) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(WeightSpec):
    def referenced(self):
        return ()

    def weight(self, record):
        return 1.0

    def weights(self, population):
        return np.ones(len(population))

    def __str__(self):
        return "uniform"


@dataclass(frozen=True)
class Feature(WeightSpec):
    name: str

    def referenced(self):
        return (self.name,)

    def weight(self, record):
        return record[self.name]

    def weights(self, population):
        return population.column(self.name).copy()

    def __str__(self):
        return f"feature:{self.name}"


@dataclass(frozen=True)
class Ratio(WeightSpec):
    numerator: str
    denominator: str

    def referenced(self):
        return (self.numerator, self.denominator)

    def weight(self, record):
        num, den = record[self.numerator], record[self.denominator]
        if den == 0:
            raise ZeroDenominator(f"record {record.id!r}: {self.denominator} is 0")
        return num / den

    def weights(self, population):
        num = population.column(self.numerator)
        den = population.column(self.denominator)
        zero = np.flatnonzero(den == 0)
        if zero.size:
            rid = population.ids[zero[0]]
            raise ZeroDenominator(f"record {rid!r}: {self.denominator} is 0")
        return num / den

    def __str__(self):
        return f"ratio:{self.numerator}/{self.denominator}"


def weight_of(record: Record, spec: WeightSpec) -> float:
    return spec.weight(record)


_NAME = r"[A-Za-z_][A-Za-z0-9_]*"


def parse_weight(text: str) -> WeightSpec:
    """Parse ``uniform``, ``feature:NAME`` or ``ratio:NUM/DEN``."""
    text = text.strip()
    if text == "uniform":
        return Uniform()
    m = re.fullmatch(rf"feature:({_NAME})", text)
    if m:
        return Feature(m.group(1))
    m = re.fullmatch(rf"ratio:({_NAME})/({_NAME})", text)
    if m:
        return Ratio(m.group(1), m.group(2))
    raise ParseError(f"bad weight spec {text!r}; expected uniform|feature:NAME|ratio:NUM/DEN")


# --------------------------------------------------------------------------
# predicates

_COMPARATORS = {
    "<": np.less,
    "<=": np.less_equal,
    "==": np.equal,
    ">=": np.greater_equal,
    ">": np.greater,
}


class Predicate:
    """Boolean expression over numeric feature comparisons."""

    def features(self) -> frozenset[str]:
        raise NotImplementedError

    def _eval(self, feats: Mapping[str, float]) -> bool:
        raise NotImplementedError

    def _mask(self, columns, n: int) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, record: Record) -> bool:
        return eval_predicate(record, self)

    def mask(self, population: Population) -> np.ndarray:
        """Vectorised evaluation over every record of ``population``."""
        cols = {name: population.column(name) for name in self.features()}
        return self._mask(cols, len(population))

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True)
class Const(Predicate):
    value: bool

    def features(self):
        return frozenset()

    def _eval(self, feats):
        return self.value

    def _mask(self, columns, n):
        return np.full(n, self.value)

    def __str__(self):
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Atom(Predicate):
    name: str
    op: str
    value: float

    def __post_init__(self):
        op = "==" if self.op == "=" else self.op
        if op not in _COMPARATORS:
            raise ParseError(f"unknown comparator {self.op!r}")
        value = float(self.value)
        if not math.isfinite(value):
            raise ParseError(f"non-finite constant in {self.name} {op} {value}")
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "value", value)

    def features(self):
        return frozenset((self.name,))

    def _eval(self, feats):
        return bool(_COMPARATORS[self.op](feats[self.name], self.value))

    def _mask(self, columns, n):
        return _COMPARATORS[self.op](columns[self.name], self.value)

    def __str__(self):
        return f"{self.name}{self.op}{_fmt_const(self.value)}"


@dataclass(frozen=True)
class Not(Predicate):
    arg: Predicate

    def features(self):
        return self.arg.features()

    def _eval(self, feats):
        return not self.arg._eval(feats)

    def _mask(self, columns, n):
        return ~self.arg._mask(columns, n)

    def __str__(self):
        inner = str(self.arg)
        if isinstance(self.arg, (And, Or)):
            inner = f"({inner})"
        return f"!{inner}"


@dataclass(frozen=True)
class And(Predicate):
    left: Predicate
    right: Predicate

    def features(self):
        return self.left.features() | self.right.features()

    def _eval(self, feats):
        return self.left._eval(feats) and self.right._eval(feats)

    def _mask(self, columns, n):
        return self.left._mask(columns, n) & self.right._mask(columns, n)

    def __str__(self):
        left = str(self.left)
        if isinstance(self.left, Or):
            left = f"({left})"
        right = str(self.right)
        if isinstance(self.right, (And, Or)):
            right = f"({right})"
        return f"{left} && {right}"


@dataclass(frozen=True)
class Or(Predicate):
    left: Predicate
    right: Predicate

    def features(self):
        return self.left.features() | self.right.features()

    def _eval(self, feats):
        return self.left._eval(feats) or self.right._eval(feats)

    def _mask(self, columns, n):
        return self.left._mask(columns, n) | self.right._mask(columns, n)

    def __str__(self):
        right = str(self.right)
        if isinstance(self.right, Or):
            right = f"({right})"
        return f"{self.left} || {right}"


def _fmt_const(x: float) -> str:
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def eval_predicate(record: Record, pred: Predicate) -> bool:
    feats = record.features
    for name in pred.features():
        if name not in feats:
            raise MissingFeature(name, record.id)
    return pred._eval(feats)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>-?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<op><=|>=|==|&&|\|\||[<>=!()])"
    rf"|(?P<name>{_NAME}))"
)


class _Parser:
    # precedence: ! binds tighter than &&, which binds tighter than ||
    def __init__(self, text):
        self.text = text
        self.tokens = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ParseError(f"predicate {self.text!r}: unexpected input at column {pos + 1}")
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.text))

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            want = repr(value) if value else "a token"
            raise ParseError(f"predicate {self.text!r}: expected {want} at column {tok[2] + 1}")
        self.i += 1
        return tok

    def parse(self):
        if not self.tokens:
            raise ParseError("empty predicate")
        expr = self.disjunction()
        if self.i != len(self.tokens):
            raise ParseError(f"predicate {self.text!r}: trailing input at column {self.peek()[2] + 1}")
        return expr

    def disjunction(self):
        expr = self.conjunction()
        while self.peek()[1] == "||":
            self.take()
            expr = Or(expr, self.conjunction())
        return expr

    def conjunction(self):
        expr = self.unary()
        while self.peek()[1] == "&&":
            self.take()
            expr = And(expr, self.unary())
        return expr

    def unary(self):
        kind, value, col = self.peek()
        if value == "!":
            self.take()
            return Not(self.unary())
        if value == "(":
            self.take()
            expr = self.disjunction()
            self.take(")")
            return expr
        if kind == "name":
            self.take()
            if value in ("true", "false"):
                return Const(value == "true")
            op = self.take()
            if op[1] not in ("<", "<=", "=", "==", ">=", ">"):
                raise ParseError(f"predicate {self.text!r}: expected comparator at column {op[2] + 1}")
            num = self.take()
            if num[0] != "num":
                raise ParseError(f"predicate {self.text!r}: expected number at column {num[2] + 1}")
            return Atom(value, op[1], float(num[1]))
        raise ParseError(f"predicate {self.text!r}: unexpected token at column {col + 1}")


def parse_predicate(text: str) -> Predicate:
    """Parse e.g. ``fo>=100 && ac>8 || !(fr<5)``."""
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# populations


@dataclass(frozen=True, eq=False)
class Population:
    """Column-oriented view of a record collection, in input order."""

    records: tuple[Record, ...]
    ids: tuple[str, ...] = field(init=False)
    kind: Kind | None = field(init=False)
    columns: Mapping[str, np.ndarray] = field(init=False)

    def __post_init__(self):
        records = tuple(self.records)
        ids = tuple(r.id for r in records)
        seen = set()
        for rid in ids:
            if rid in seen:
                raise DuplicateId(rid)
            seen.add(rid)
        kinds = {r.kind for r in records}
        if len(kinds) > 1:
            raise InvalidRecord("population mixes node and link records")
        common = set(records[0].features) if records else set()
        for r in records[1:]:
            common &= r.features.keys()
        columns = {}
        for name in sorted(common):
            col = np.fromiter((r.features[name] for r in records), dtype=float, count=len(records))
            col.flags.writeable = False
            columns[name] = col
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "kind", kinds.pop() if kinds else None)
        object.__setattr__(self, "columns", MappingProxyType(columns))

    @classmethod
    def of(cls, records: Iterable[Record] | Population) -> Population:
        if isinstance(records, Population):
            return records
        return cls(tuple(records))

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise MissingFeature(name) from None


# --------------------------------------------------------------------------
# CSV ingest / emit


def _fmt_value(x: float) -> str:
    return _fmt_const(x)


def _parse_value(text: str, lineno: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"line {lineno}: column {column}: not a number: {text!r}") from None
    if not math.isfinite(value) or value < 0:
        raise ParseError(f"line {lineno}: column {column}: {text!r} is not a finite non-negative number")
    return value


def parse_records_csv(text: str) -> list[Record]:
    """Parse node CSV (``id,fo,fr,ac``) or link CSV (``u1,u2,fo1,fo2``)."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("line 1: empty input, expected a header") from None
    if header[:1] == ["id"]:
        kind, missing = Kind.NODE, set(NODE_FEATURES) - set(header)
    elif header[:2] == ["u1", "u2"]:
        kind, missing = Kind.LINK, {"fo1", "fo2"} - set(header)
    else:
        raise ParseError(f"line 1: unrecognised header {','.join(header)!r}")
    if missing:
        raise ParseError(f"line 1: header lacks {', '.join(sorted(missing))}")
    if len(set(header)) != len(header):
        raise ParseError("line 1: repeated column name")

    records, seen = [], set()
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        row = [c.strip() for c in row]
        try:
            if kind is Kind.NODE:
                feats = {h: _parse_value(v, lineno, h) for h, v in zip(header[1:], row[1:])}
                rec = Record(row[0], Kind.NODE, feats)
            else:
                feats = {h: _parse_value(v, lineno, h) for h, v in zip(header[2:], row[2:])}
                fo1, fo2 = feats.pop("fo1"), feats.pop("fo2")
                if fo1 == 0:
                    raise ParseError(f"line {lineno}: fo1 is 0, ffan undefined")
                feats = {"fo1": fo1, "fo2": fo2, "ffan": fo2 / fo1, **feats}
                rec = Record(f"{row[0]}{LINK_SEP}{row[1]}", Kind.LINK, feats)
        except (InvalidRecord, MissingFeature) as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        if rec.id in seen:
            raise DuplicateId(rec.id)
        seen.add(rec.id)
        records.append(rec)
    return records


def read_records(path) -> list[Record]:
    with open(path, newline="") as fh:
        return parse_records_csv(fh.read())


def format_records_csv(records: Sequence[Record]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if not records:
        writer.writerow(["id", *NODE_FEATURES])
        return out.getvalue()
    kind = records[0].kind
    base = NODE_FEATURES if kind is Kind.NODE else ("fo1", "fo2")
    derived = () if kind is Kind.NODE else ("ffan",)
    extra = sorted(set(records[0].features) - set(base) - set(derived))
    if kind is Kind.NODE:
        writer.writerow(["id", *base, *extra])
    else:
        writer.writerow(["u1", "u2", *base, *extra])
    for r in records:
        values = [_fmt_value(r.features[name]) for name in (*base, *extra)]
        if kind is Kind.NODE:
            writer.writerow([r.id, *values])
        else:
            u1, sep, u2 = r.id.partition(LINK_SEP)
            writer.writerow([u1, u2, *values])
    return out.getvalue()


def write_records(path, records: Sequence[Record]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_records_csv(records))
