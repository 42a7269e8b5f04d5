"""Grid quorum construction, slot/channel mapping and intersection counting.

Slots are zero-based (``0 .. n*n - 1``, row-major); channels are one-based
(``C1 .. CN``) so that values read the same as conventional grid diagrams.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Optional, Tuple

import numpy as np


class Scheme(str, Enum):
    """Row/column selection variant used by a node."""

    ONE_BY_ONE = "1x1"
    TWO_BY_ONE = "2x1"
    TWO_BY_TWO = "2x2"
    ADAPTIVE = "adaptive"
    CUSTOM = "custom"


def scheme_shape(scheme: Scheme, two_cols: bool = False) -> Tuple[int, int]:
    """Return ``(num_rows, num_cols)`` picked by a fixed scheme.

    ``two_cols`` flips the 2x1 variant to one row and two columns.
    """
    scheme = Scheme(scheme)
    if scheme is Scheme.ONE_BY_ONE:
        return 1, 1
    if scheme is Scheme.TWO_BY_ONE:
        return (1, 2) if two_cols else (2, 1)
    if scheme is Scheme.TWO_BY_TWO:
        return 2, 2
    raise ValueError(f"{scheme.value} selections have no fixed shape")


@dataclass(frozen=True)
class GridQuorum:
    num_channels: int
    grid_side: int
    slot_to_channel: Tuple[int, ...]

    @property
    def cycle_length(self) -> int:
        return self.grid_side * self.grid_side

    def channel_of(self, slot: int) -> int:
        """Channel (1-based) hopped to at absolute slot ``slot``."""
        return self.slot_to_channel[slot % self.cycle_length]

    def as_rows(self) -> Tuple[Tuple[int, ...], ...]:
        n = self.grid_side
        return tuple(self.slot_to_channel[r * n:(r + 1) * n] for r in range(n))


def build_grid(num_channels: int) -> GridQuorum:
    """Lay channels ``1..N`` row-major on a ``ceil(sqrt(N))``-sided grid.

    When ``N`` is not a perfect square the fill wraps around to C1 again,
    so every channel occupies at least ``floor(n*n / N)`` slots.
    """
    if int(num_channels) != num_channels or num_channels < 1:
        raise ValueError(f"num_channels must be a positive integer, got {num_channels!r}")
    num_channels = int(num_channels)
    n = math.isqrt(num_channels)
    if n * n < num_channels:
        n += 1
    mapping = tuple((s % num_channels) + 1 for s in range(n * n))
    return GridQuorum(num_channels=num_channels, grid_side=n, slot_to_channel=mapping)


@dataclass(frozen=True)
class QuorumSelection:
    """Rows and columns a node picked from the shared grid."""

    rows: FrozenSet[int]
    cols: FrozenSet[int]
    scheme: Scheme = Scheme.CUSTOM

    def __post_init__(self):
        object.__setattr__(self, "rows", frozenset(int(r) for r in self.rows))
        object.__setattr__(self, "cols", frozenset(int(c) for c in self.cols))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.rows or not self.cols:
            raise ValueError("a selection needs at least one row and one column")
        if min(self.rows) < 0 or min(self.cols) < 0:
            raise ValueError("row/column indices must be non-negative")
        shape = (len(self.rows), len(self.cols))
        if self.scheme is Scheme.ONE_BY_ONE and shape != (1, 1):
            raise ValueError(f"1x1 selection must have one row and one column, got {shape}")
        if self.scheme is Scheme.TWO_BY_ONE and sorted(shape) != [1, 2]:
            raise ValueError(f"2x1 selection must pick {{2,1}} rows/columns, got {shape}")
        if self.scheme is Scheme.TWO_BY_TWO and shape != (2, 2):
            raise ValueError(f"2x2 selection must have two rows and two columns, got {shape}")

    def check_side(self, n: int) -> None:
        if max(self.rows) >= n or max(self.cols) >= n:
            raise ValueError(
                f"selection rows={sorted(self.rows)} cols={sorted(self.cols)} "
                f"does not fit a grid of side {n}"
            )


def quorum_slots(sel: QuorumSelection, n: int) -> FrozenSet[int]:
    """All slots covered by the selected rows and columns."""
    sel.check_side(n)
    slots = {r * n + c for r in sel.rows for c in range(n)}
    slots.update(r * n + c for c in sel.cols for r in range(n))
    return frozenset(slots)


def quorum_size(num_rows: int, num_cols: int, n: int) -> int:
    return num_rows * n + num_cols * n - num_rows * num_cols


def quorum_mask(sel: QuorumSelection, n: int) -> np.ndarray:
    """Boolean vector of length ``n*n``; True on the selection's quorum slots."""
    sel.check_side(n)
    grid = np.zeros((n, n), dtype=bool)
    grid[sorted(sel.rows), :] = True
    grid[:, sorted(sel.cols)] = True
    return grid.reshape(-1)


def intersect(a: Iterable[int], b: Iterable[int]) -> FrozenSet[int]:
    return frozenset(a) & frozenset(b)


@dataclass(frozen=True)
class AnalyticCase:
    """Overlap pattern between two selections.

    Intersection size depends only on these counts, so two selection pairs
    with the same case always share the same number of slots.
    """

    scheme_a: Scheme
    scheme_b: Scheme
    rows_a: int
    cols_a: int
    rows_b: int
    cols_b: int
    row_overlap: int
    col_overlap: int

    def __post_init__(self):
        if not 0 <= self.row_overlap <= min(self.rows_a, self.rows_b):
            raise ValueError("row_overlap exceeds the smaller row set")
        if not 0 <= self.col_overlap <= min(self.cols_a, self.cols_b):
            raise ValueError("col_overlap exceeds the smaller column set")

    @property
    def sort_key(self) -> Tuple[int, ...]:
        return (
            self.rows_a + self.cols_a + self.rows_b + self.cols_b,
            self.rows_a, self.cols_a, self.rows_b, self.cols_b,
            self.row_overlap + self.col_overlap,
            self.row_overlap,
        )

    def __lt__(self, other: "AnalyticCase") -> bool:
        return self.sort_key < other.sort_key

    @property
    def label(self) -> Optional[int]:
        """Case number in the published taxonomy, or None if it has none.

        Only symmetric pairings of the same scheme are numbered. For 1x1 and
        2x2 the taxonomy is invariant under swapping rows with columns;
        2x1 cases are numbered for the two-row orientation only (and by
        transposition for the two-column one).
        """
        if (self.rows_a, self.cols_a) != (self.rows_b, self.cols_b):
            return None
        shape = (self.rows_a, self.cols_a)
        ro, co = self.row_overlap, self.col_overlap
        if shape == (1, 1):
            return {(0, 0): 1, (1, 0): 2, (0, 1): 2, (1, 1): 3}[(ro, co)]
        if shape in ((2, 1), (1, 2)):
            if shape == (1, 2):
                ro, co = co, ro
            return {(0, 0): 1, (1, 0): 2, (2, 0): 3, (2, 1): 4}.get((ro, co))
        if shape == (2, 2):
            ro, co = max(ro, co), min(ro, co)
            return {(0, 0): 1, (1, 0): 2, (2, 0): 3, (1, 1): 4, (2, 1): 5, (2, 2): 6}[(ro, co)]
        return None


def classify_case(sel_a: QuorumSelection, sel_b: QuorumSelection,
                  n: Optional[int] = None) -> AnalyticCase:
    if n is not None:
        try:
            sel_a.check_side(n)
            sel_b.check_side(n)
        except ValueError as exc:
            raise ValueError(f"selections do not share grid side {n}: {exc}") from None
    return AnalyticCase(
        scheme_a=sel_a.scheme,
        scheme_b=sel_b.scheme,
        rows_a=len(sel_a.rows),
        cols_a=len(sel_a.cols),
        rows_b=len(sel_b.rows),
        cols_b=len(sel_b.cols),
        row_overlap=len(sel_a.rows & sel_b.rows),
        col_overlap=len(sel_a.cols & sel_b.cols),
    )


def guaranteed_rdv_count(case: AnalyticCase, n: int) -> int:
    """Number of slots shared by two quorums with the given overlap pattern.

    A slot ``(r, c)`` is shared when ``r`` or ``c`` is selected by A and
    ``r`` or ``c`` is selected by B. Splitting rows by who picked them:

    * rows picked by both contribute all ``n`` columns,
    * rows picked by A only need a column of B,
    * rows picked by B only need a column of A,
    * remaining rows need a column picked by both.
    """
    if n < 1:
        raise ValueError("grid side must be positive")
    ro, co = case.row_overlap, case.col_overlap
    if case.rows_a + case.rows_b - ro > n or case.cols_a + case.cols_b - co > n:
        raise ValueError(f"case {case} cannot be realised on a grid of side {n}")
    free_rows = n - case.rows_a - case.rows_b + ro
    return (
        ro * n
        + (case.rows_a - ro) * case.cols_b
        + (case.rows_b - ro) * case.cols_a
        + free_rows * co
    )


def expected_rdv_per_slot(case: AnalyticCase, n: int, p_idle: float) -> float:
    if not 0.0 <= p_idle <= 1.0:
        raise ValueError(f"p_idle must lie in [0, 1], got {p_idle}")
    return guaranteed_rdv_count(case, n) / (n * n) * p_idle


def permutation_keys(rng: np.random.Generator, n: int) -> np.ndarray:
    """One row-ordering and one column-ordering key block of shape (2, n)."""
    return rng.random((2, n))


def selection_from_keys(keys: np.ndarray, scheme: Scheme,
                        two_cols: bool = False) -> QuorumSelection:
    """Take the first rows/columns of the random orderings encoded in ``keys``.

    Using prefixes of one ordering means the same keys yield nested
    selections across schemes (a 1x1 pick is contained in the 2x1 pick,
    which is contained in the 2x2 pick).
    """
    n_rows, n_cols = scheme_shape(scheme, two_cols)
    n = keys.shape[-1]
    if max(n_rows, n_cols) > n:
        raise ValueError(f"scheme {Scheme(scheme).value} needs a grid side of at least "
                         f"{max(n_rows, n_cols)}, got {n}")
    row_order = np.argsort(keys[0], kind="stable")
    col_order = np.argsort(keys[1], kind="stable")
    return QuorumSelection(
        rows=frozenset(row_order[:n_rows].tolist()),
        cols=frozenset(col_order[:n_cols].tolist()),
        scheme=scheme,
    )


def random_selection(scheme: Scheme, n: int, rng: np.random.Generator,
                     two_cols: bool = False) -> QuorumSelection:
    """Draw rows and columns uniformly without replacement.

    Always consumes ``2*n`` uniforms regardless of scheme.
    """
    n_rows, n_cols = scheme_shape(scheme, two_cols)
    if max(n_rows, n_cols) > n:
        raise ValueError(f"scheme {Scheme(scheme).value} needs a grid side of at least "
                         f"{max(n_rows, n_cols)}, got {n}")
    return selection_from_keys(permutation_keys(rng, n), scheme, two_cols)


def all_selections(n: int, num_rows: int, num_cols: int,
                   scheme: Scheme = Scheme.CUSTOM) -> Iterable[QuorumSelection]:
    for rows in itertools.combinations(range(n), num_rows):
        for cols in itertools.combinations(range(n), num_cols):
            yield QuorumSelection(frozenset(rows), frozenset(cols), scheme)


def _enumerable_shapes(scheme: Scheme) -> Tuple[Tuple[int, int], ...]:
    scheme = Scheme(scheme)
    if scheme is Scheme.TWO_BY_ONE:
        return ((2, 1),)
    return (scheme_shape(scheme),)


def brute_force_intersection_stats(
    n: int, scheme_a: Scheme, scheme_b: Scheme
) -> Dict[AnalyticCase, Dict[str, int]]:
    """Enumerate every selection pair and record min/max shared-slot counts.

    Works on explicit slot sets only; it never calls the closed-form count.
    2x1 is enumerated in its two-row orientation.
    """
    if not 2 <= n <= 6:
        raise ValueError(f"exhaustive enumeration supports 2 <= n <= 6, got {n}")
    stats: Dict[AnalyticCase, Dict[str, int]] = {}
    sels_a = [
        (s, quorum_slots(s, n))
        for shape in _enumerable_shapes(scheme_a)
        for s in all_selections(n, *shape, scheme=scheme_a)
    ]
    sels_b = [
        (s, quorum_slots(s, n))
        for shape in _enumerable_shapes(scheme_b)
        for s in all_selections(n, *shape, scheme=scheme_b)
    ]
    for sel_a, slots_a in sels_a:
        for sel_b, slots_b in sels_b:
            size = len(slots_a & slots_b)
            case = classify_case(sel_a, sel_b)
            entry = stats.get(case)
            if entry is None:
                stats[case] = {"min": size, "max": size, "pairs": 1}
            else:
                entry["min"] = min(entry["min"], size)
                entry["max"] = max(entry["max"], size)
                entry["pairs"] += 1
    return dict(sorted(stats.items()))
