"""One-shot test data with two failure modes."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np


class EmptyCellError(ValueError):
    """Raised when a cell with no tested units is used in a probability estimate."""


@dataclass(frozen=True)
class TestCondition:
    inspection_time: float
    stress: float

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not self.inspection_time > 0:
            raise ValueError(f"inspection_time must be positive, got {self.inspection_time!r}")


@dataclass(frozen=True)
class CellCounts:
    """Outcome counts at one condition: none, mode 1 only, mode 2 only, both."""

    n0: int
    n1: int
    n2: int
    n12: int

    def __post_init__(self):
        for name in ("n0", "n1", "n2", "n12"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def total(self) -> int:
        return self.n0 + self.n1 + self.n2 + self.n12

    @property
    def mode1_failures(self) -> int:
        return self.n1 + self.n12

    @property
    def mode2_failures(self) -> int:
        return self.n2 + self.n12

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.n0, self.n1, self.n2, self.n12)


class EmpiricalMargins(NamedTuple):
    f1_hat: float
    f2_hat: float


def empirical_margins(cell: CellCounts) -> EmpiricalMargins:
    """Observed failure proportions ``N_r / K`` for each mode."""
    k = cell.total
    if k == 0:
        raise EmptyCellError("cell has no tested units")
    return EmpiricalMargins(cell.mode1_failures / k, cell.mode2_failures / k)


def empirical_cell_probs(cell: CellCounts) -> np.ndarray:
    k = cell.total
    if k == 0:
        raise EmptyCellError("cell has no tested units")
    return np.array(cell.as_tuple(), dtype=float) / k


@dataclass(frozen=True)
class OneShotDataset:
    """Test conditions with their outcome counts.

    The grid need not be fully crossed; every objective is a sum over the
    cells that are present.
    """

    cells: tuple[tuple[TestCondition, CellCounts], ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple((c, n) for c, n in self.cells))

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[float, float, int, int, int, int]]) -> "OneShotDataset":
        """Build from ``(inspection_time, stress, n0, n1, n2, n12)`` rows."""
        cells = []
        for it, x, n0, n1, n2, n12 in rows:
            cells.append((TestCondition(float(it), float(x)), CellCounts(n0, n1, n2, n12)))
        return cls(tuple(cells))

    def rows(self) -> list[tuple[float, float, int, int, int, int]]:
        return [(c.inspection_time, c.stress, *n.as_tuple()) for c, n in self.cells]

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def stress_levels(self) -> tuple[float, ...]:
        return tuple(sorted({c.stress for c, _ in self.cells}))

    @property
    def inspection_times(self) -> tuple[float, ...]:
        return tuple(sorted({c.inspection_time for c, _ in self.cells}))

    @property
    def total_units(self) -> int:
        return sum(n.total for _, n in self.cells)

    # Array views used by the vectorised objectives. Safe to cache: the
    # dataset is frozen.
    @cached_property
    def counts(self) -> np.ndarray:
        """``(M, 4)`` integer array of ``(n0, n1, n2, n12)`` per cell."""
        return np.array([n.as_tuple() for _, n in self.cells], dtype=np.int64).reshape(-1, 4)

    @cached_property
    def stresses(self) -> np.ndarray:
        return np.array([c.stress for c, _ in self.cells], dtype=float)

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([c.inspection_time for c, _ in self.cells], dtype=float)

    def cell(self, inspection_time: float, stress: float) -> CellCounts:
        for c, n in self.cells:
            if c.inspection_time == inspection_time and c.stress == stress:
                return n
        raise KeyError(f"no cell at inspection_time={inspection_time}, stress={stress}")

    def replace_cell(self, inspection_time: float, stress: float, counts: CellCounts) -> "OneShotDataset":
        found = False
        cells = []
        for c, n in self.cells:
            if c.inspection_time == inspection_time and c.stress == stress:
                cells.append((c, counts))
                found = True
            else:
                cells.append((c, n))
        if not found:
            raise KeyError(f"no cell at inspection_time={inspection_time}, stress={stress}")
        return OneShotDataset(tuple(cells))


def validate_dataset(ds: OneShotDataset) -> list[str]:
    """Return human-readable violations; an empty list means the data are usable."""
    problems = []
    if len(ds) == 0:
        problems.append("dataset has no cells")
        return problems
    seen = set()
    for cond, counts in ds.cells:
        key = (cond.inspection_time, cond.stress)
        if key in seen:
            problems.append(
                f"duplicate condition inspection_time={cond.inspection_time:g}, stress={cond.stress:g}")
        seen.add(key)
        if counts.total == 0:
            problems.append(
                f"empty cell at inspection_time={cond.inspection_time:g}, stress={cond.stress:g}")
    if len(ds.stress_levels) < 2:
        problems.append("slope unidentified: fewer than 2 distinct stress levels")
    return problems
