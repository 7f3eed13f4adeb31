"""Ground sets, assignments, color tables and the color-averaged objective.

Items carry dense integer ids ``0..n_items-1``; an assignment is a
``frozenset`` of item ids. A color table is a set of ``(item, color)``
pairs with colors in ``1..C``; a color vector picks one color per
partition and :func:`sample_colored` turns a table into an item set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

TOL = 1e-9
ENUMERATION_CAP = 10**6
SUBSET_CAP = 2**20

Assignment = frozenset


class InvalidInputError(ValueError):
    pass


class EnumerationTooLargeError(RuntimeError):
    pass


class GroundSet:
    """K disjoint, non-empty partitions of dense integer item ids.

    ``labels`` optionally names each item (e.g. ``(ad, position)``); it
    plays no role in any algorithm.
    """

    def __init__(self, partitions: Sequence[Sequence[int]], labels: Sequence | None = None):
        if len(partitions) == 0:
            raise InvalidInputError("a ground set needs at least one partition")
        parts = tuple(tuple(int(x) for x in p) for p in partitions)
        if any(len(p) == 0 for p in parts):
            raise InvalidInputError("every partition must be non-empty")
        ids = [x for p in parts for x in p]
        if sorted(ids) != list(range(len(ids))):
            raise InvalidInputError(
                "item ids must be unique and dense 0..n-1 across partitions"
            )
        self.partitions = parts
        self.n_items = len(ids)
        self.partition_of = np.empty(self.n_items, dtype=np.int64)
        for k, p in enumerate(parts):
            self.partition_of[list(p)] = k
        if labels is not None and len(labels) != self.n_items:
            raise InvalidInputError("need one label per item")
        self.labels = None if labels is None else tuple(labels)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "GroundSet":
        parts, start = [], 0
        for s in sizes:
            parts.append(list(range(start, start + s)))
            start += s
        return cls(parts)

    @property
    def K(self) -> int:
        return len(self.partitions)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.partitions)

    def is_feasible(self, items: Iterable[int]) -> bool:
        seen = set()
        for x in items:
            if not 0 <= x < self.n_items:
                return False
            k = int(self.partition_of[x])
            if k in seen:
                return False
            seen.add(k)
        return True

    def slots(self, items: Iterable[int]) -> list[int | None]:
        """Item placed in each partition (``None`` for empty) of a feasible set."""
        out: list[int | None] = [None] * self.K
        for x in items:
            k = int(self.partition_of[x])
            if out[k] is not None:
                raise InvalidInputError(f"partition {k} holds more than one item")
            out[k] = int(x)
        return out

    def to_dict(self) -> dict:
        d = {"partitions": [list(p) for p in self.partitions]}
        if self.labels is not None:
            d["labels"] = [list(l) if isinstance(l, tuple) else l for l in self.labels]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GroundSet":
        labels = d.get("labels")
        if labels is not None:
            labels = [tuple(l) if isinstance(l, list) else l for l in labels]
        return cls(d["partitions"], labels)

    def __eq__(self, other) -> bool:
        return isinstance(other, GroundSet) and self.partitions == other.partitions

    def __repr__(self) -> str:
        return f"GroundSet(K={self.K}, sizes={self.sizes})"


@dataclass(frozen=True)
class ColorTable:
    """A set of ``(item, color)`` pairs over the palette ``1..C``."""

    pairs: frozenset = field(default_factory=frozenset)
    C: int = 1

    def __post_init__(self):
        if self.C < 1:
            raise InvalidInputError("palette size C must be positive")
        object.__setattr__(self, "pairs", frozenset((int(x), int(c)) for x, c in self.pairs))
        for _, c in self.pairs:
            if not 1 <= c <= self.C:
                raise InvalidInputError(f"color {c} outside 1..{self.C}")

    def validate(self, gs: GroundSet) -> None:
        for x, _ in self.pairs:
            if not 0 <= x < gs.n_items:
                raise InvalidInputError(f"item {x} not in the ground set")

    def add(self, item: int, color: int) -> "ColorTable":
        return ColorTable(self.pairs | {(item, color)}, self.C)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(sorted(self.pairs))

    @classmethod
    def from_grid(cls, grid: Sequence[Sequence[int | None]]) -> "ColorTable":
        """Build from ``grid[k][c-1]`` = item chosen for partition k, color c."""
        C = max(len(row) for row in grid)
        pairs = {(x, c + 1) for row in grid for c, x in enumerate(row) if x is not None}
        return cls(frozenset(pairs), C)


def _index_table(table: ColorTable, gs: GroundSet) -> dict[tuple[int, int], list[int]]:
    by_cell: dict[tuple[int, int], list[int]] = {}
    for x, c in table.pairs:
        by_cell.setdefault((int(gs.partition_of[x]), c), []).append(x)
    return by_cell


def _sample_indexed(by_cell, cvec) -> frozenset:
    out = []
    for k, c in enumerate(cvec):
        out.extend(by_cell.get((k, int(c)), ()))
    return frozenset(out)


def sample_colored(table: ColorTable, cvec: Sequence[int], gs: GroundSet) -> frozenset:
    """Items x in P_k whose pair (x, cvec[k]) is in the table, over all k.

    The result can be infeasible when the table labels two items of one
    partition with the same color; callers that need feasibility build
    tables with one pair per (partition, color) cell.
    """
    if len(cvec) != gs.K:
        raise InvalidInputError(f"color vector has length {len(cvec)}, expected K={gs.K}")
    for c in cvec:
        if not 1 <= c <= table.C:
            raise InvalidInputError(f"color {c} outside 1..{table.C}")
    table.validate(gs)
    return _sample_indexed(_index_table(table, gs), cvec)


class ValueOracle:
    """A set function over item ids with a declared upper bound ``bound``.

    Subclasses implement ``__call__``. ``values_with`` may be overridden
    with a vectorized version; greedy loops use it to score candidates.
    """

    bound: float = math.inf

    def __call__(self, items: frozenset) -> float:
        raise NotImplementedError

    def values_with(self, bases: Sequence[frozenset], candidates: Sequence[int]) -> np.ndarray:
        """Matrix of f(base + x) for every base (rows) and candidate x (columns)."""
        return np.array(
            [[self(base | {x}) for x in candidates] for base in bases], dtype=float
        ).reshape(len(bases), len(candidates))


class FunctionOracle(ValueOracle):
    """Wrap a plain callable on frozensets."""

    def __init__(self, fn: Callable[[frozenset], float], bound: float = math.inf):
        self.fn = fn
        self.bound = bound

    def __call__(self, items):
        return float(self.fn(frozenset(items)))


class SumOracle(ValueOracle):
    def __init__(self, *parts: ValueOracle):
        self.parts = parts
        self.bound = sum(p.bound for p in parts)

    def __call__(self, items):
        return sum(p(items) for p in self.parts)


def _check_cap(count: int, cap: int, hint: str) -> None:
    if count > cap:
        raise EnumerationTooLargeError(f"enumeration of {count} cases exceeds cap {cap}; {hint}")


def exact_F(f: ValueOracle, table: ColorTable, gs: GroundSet, cap: int = ENUMERATION_CAP) -> float:
    """Mean of f(sample_colored(table, cvec)) over all C**K color vectors."""
    table.validate(gs)
    C = table.C
    _check_cap(C**gs.K, cap, "use estimate_F for Monte-Carlo estimation")
    if not table.pairs:
        return float(f(frozenset()))
    by_cell = _index_table(table, gs)
    total = math.fsum(
        f(_sample_indexed(by_cell, cvec))
        for cvec in itertools.product(range(1, C + 1), repeat=gs.K)
    )
    return total / C**gs.K


def draw_color_vectors(rng: np.random.Generator, n: int, K: int, C: int) -> np.ndarray:
    return rng.integers(1, C + 1, size=(n, K))


def estimate_F(f: ValueOracle, table: ColorTable, gs: GroundSet, n_samples: int, seed=None) -> float:
    """Monte-Carlo mean of f over ``n_samples`` uniform color vectors."""
    if n_samples < 1:
        raise InvalidInputError("n_samples must be at least 1")
    table.validate(gs)
    rng = np.random.default_rng(seed)
    by_cell = _index_table(table, gs)
    cvecs = draw_color_vectors(rng, n_samples, gs.K, table.C)
    return math.fsum(f(_sample_indexed(by_cell, cv)) for cv in cvecs) / n_samples


@dataclass
class Witness:
    """A violated inequality: ``kind`` is "monotone" or "submodular".

    For submodularity the triple ``(A, A_prime, s)`` violates
    f(A + s) - f(A) >= f(A_prime + s) - f(A_prime); for monotonicity
    ``A_prime = A + s`` has a smaller value than ``A``.
    """

    kind: str
    A: frozenset
    A_prime: frozenset
    s: int
    gap: float


@dataclass
class SubmodularityReport:
    monotone: bool
    submodular: bool
    witness: Witness | None = None
    checks: int = 0
    exhaustive: bool = True


def _mask_items(mask: int) -> frozenset:
    return frozenset(i for i in range(mask.bit_length()) if mask >> i & 1)


def check_monotone_submodular(
    f: ValueOracle | Callable,
    gs: GroundSet | int,
    tol: float = TOL,
    cap: int = SUBSET_CAP,
    spot_checks: int | None = None,
    seed=None,
) -> SubmodularityReport:
    """Verify monotonicity and submodularity of ``f`` over all item subsets.

    Uses the local characterizations, which are equivalent to the
    definitions for set functions: f(A+s) >= f(A), and
    f(A+s) + f(A+t) >= f(A+s+t) + f(A) for all A and distinct s, t not in A.

    ``gs`` may be a ground set or a plain element count. When 2**n exceeds
    ``cap``, pass ``spot_checks`` to test that many random (A, s, t)
    triples instead.
    """
    n = gs if isinstance(gs, int) else gs.n_items
    if spot_checks is not None:
        return _spot_check(f, n, tol, spot_checks, seed)
    _check_cap(2**n, cap, "pass spot_checks=N for randomized spot-checking")
    vals = np.array([f(_mask_items(m)) for m in range(2**n)], dtype=float)
    masks = np.arange(2**n)
    report = SubmodularityReport(True, True)
    for s in range(n):
        bs = 1 << s
        base = masks[(masks & bs) == 0]
        gap = vals[base | bs] - vals[base]
        report.checks += base.size
        bad = np.flatnonzero(gap < -tol)
        if bad.size and report.monotone:
            m = int(base[bad[0]])
            report.monotone = False
            report.witness = Witness("monotone", _mask_items(m), _mask_items(m | bs), s, float(gap[bad[0]]))
    for s in range(n):
        for t in range(s + 1, n):
            bs, bt = 1 << s, 1 << t
            base = masks[(masks & (bs | bt)) == 0]
            gap = (vals[base | bs] - vals[base]) - (vals[base | bs | bt] - vals[base | bt])
            report.checks += base.size
            bad = np.flatnonzero(gap < -tol)
            if bad.size:
                m = int(base[bad[0]])
                report.submodular = False
                if report.witness is None or report.witness.kind == "monotone":
                    report.witness = Witness(
                        "submodular", _mask_items(m), _mask_items(m | bt), s, float(gap[bad[0]])
                    )
                return report
    return report


def _spot_check(f, n, tol, n_checks, seed) -> SubmodularityReport:
    rng = np.random.default_rng(seed)
    report = SubmodularityReport(True, True, exhaustive=False)
    if n < 1:
        return report
    for _ in range(n_checks):
        inside = rng.random(n) < 0.5
        s, t = rng.choice(n, size=2, replace=False) if n > 1 else (0, 0)
        inside[[s, t]] = False
        A = frozenset(np.flatnonzero(inside).tolist())
        fA, fAs = f(A), f(A | {int(s)})
        report.checks += 1
        if fAs - fA < -tol and report.monotone:
            report.monotone = False
            report.witness = Witness("monotone", A, A | {int(s)}, int(s), fAs - fA)
        if s != t:
            At = A | {int(t)}
            gap = (fAs - fA) - (f(At | {int(s)}) - f(At))
            if gap < -tol:
                report.submodular = False
                report.witness = Witness("submodular", A, At, int(s), gap)
                return report
    return report
