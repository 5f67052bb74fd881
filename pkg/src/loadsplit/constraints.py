"""Constraint matrices for the monthly-consumption and unit-sum constraints.

The concentrations are tied to monthly sector consumption through
``B @ C @ A ~ Y`` and the sources to unit row sums through ``F @ S @ D ~ Z``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ._validation import as_float_matrix, check_shape
from .curves import month_labels
from .exceptions import (
    DimensionMismatch,
    EmptyMonth,
    MalformedRow,
    MissingMonth,
    MultiAssignment,
    NotSurjective,
    PeriodMismatch,
    ZeroIndicatorColumn,
)

MSI_HEADER = ("sector", "month", "value")
ASC_HEADER = ("sector", "year", "consumption_mwh")


@dataclass
class ConstraintSet:
    """Matrices of the two linear equality constraints.

    Either constraint may be absent: ``B, A, Y`` all ``None`` disables the
    monthly term and ``F, D, Z`` all ``None`` disables the source term.
    """

    B: np.ndarray | None = None
    A: np.ndarray | None = None
    Y: np.ndarray | None = None
    F: np.ndarray | None = None
    D: np.ndarray | None = None
    Z: np.ndarray | None = None

    @classmethod
    def with_unit_sources(cls, K: int, p: int, B=None, A=None, Y=None) -> "ConstraintSet":
        """Monthly constraint (optional) plus ``S @ 1_p = 1_K``."""
        return cls(B, A, Y, np.eye(K), np.ones((p, 1)), np.ones((K, 1)))

    @property
    def has_monthly(self) -> bool:
        return self.B is not None

    @property
    def has_source(self) -> bool:
        return self.F is not None

    def validate(self, n: int, K: int, p: int) -> "ConstraintSet":
        monthly = (self.B, self.A, self.Y)
        if any(m is None for m in monthly) and not all(m is None for m in monthly):
            raise DimensionMismatch("B, A and Y must be given together")
        source = (self.F, self.D, self.Z)
        if any(m is None for m in source) and not all(m is None for m in source):
            raise DimensionMismatch("F, D and Z must be given together")
        if self.has_monthly:
            B = as_float_matrix(self.B, "B")
            check_shape(B, (None, n), "B")
            A = check_shape(as_float_matrix(self.A, "A"), (K, None), "A")
            check_shape(as_float_matrix(self.Y, "Y"), (B.shape[0], A.shape[1]), "Y")
        if self.has_source:
            F = check_shape(as_float_matrix(self.F, "F"), (None, K), "F")
            D = check_shape(as_float_matrix(self.D, "D"), (p, None), "D")
            check_shape(as_float_matrix(self.Z, "Z"), (F.shape[0], D.shape[1]), "Z")
        return self


def months_between(first: str, last: str) -> list[str]:
    y, m = map(int, first.split("-"))
    ly, lm = map(int, last.split("-"))
    out = []
    while (y, m) <= (ly, lm):
        out.append(f"{y:04d}-{m:02d}")
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    return out


def month_index(dates) -> tuple[list[str], np.ndarray]:
    """Calendar months spanned by ``dates`` and each day's row in that list.

    Raises EmptyMonth when a month inside the span has no days.
    """
    labels = month_labels(dates)
    if not labels:
        return [], np.zeros(0, dtype=int)
    months = months_between(min(labels), max(labels))
    present = set(labels)
    for mo in months:
        if mo not in present:
            raise EmptyMonth(f"no days fall in month {mo}")
    pos = {mo: r for r, mo in enumerate(months)}
    return months, np.array([pos[lab] for lab in labels], dtype=int)


def build_B(E, dates) -> np.ndarray:
    """Block matrix with ``B[r, i] = e_i`` when day ``i`` lies in month ``r``."""
    E = np.asarray(E, dtype=np.float64)
    if len(E) != len(dates):
        raise DimensionMismatch(f"{len(E)} energies for {len(dates)} dates")
    if any(b < a for a, b in zip(dates, dates[1:])):
        raise ValueError("dates must be sorted")
    months, rows = month_index(dates)
    B = np.zeros((len(months), len(E)))
    B[rows, np.arange(len(E))] = E
    return B


def build_A(mapping, K: int, g: int | None = None) -> np.ndarray:
    """Source-to-sector 0/1 matrix.

    ``mapping`` is either a length-``K`` sequence giving each source's sector
    index, or a ``{sector: [source, ...]}`` mapping whose key order defines the
    sector columns.  Indices are 0-based.
    """
    if isinstance(mapping, Mapping):
        groups = [list(v) for v in mapping.values()]
        g = len(groups) if g is None else g
        if len(groups) != g:
            raise DimensionMismatch(f"mapping has {len(groups)} sectors, expected {g}")
    else:
        sector_of = list(mapping)
        if len(sector_of) != K:
            raise MultiAssignment(f"mapping assigns {len(sector_of)} sources, expected {K}")
        g = (max(sector_of) + 1 if sector_of else 0) if g is None else g
        groups = [[k for k, s in enumerate(sector_of) if s == j] for j in range(g)]
        stray = [s for s in sector_of if not 0 <= s < g]
        if stray:
            raise DimensionMismatch(f"sector indices {stray} outside 0..{g - 1}")

    A = np.zeros((K, g))
    for j, sources in enumerate(groups):
        for k in sources:
            if not 0 <= k < K:
                raise DimensionMismatch(f"source index {k} outside 0..{K - 1}")
            if A[k].any():
                raise MultiAssignment(f"source {k} is assigned to more than one sector")
            A[k, j] = 1.0
    empty = [j for j in range(g) if not A[:, j].any()]
    if empty:
        raise NotSurjective(f"sectors {empty} receive no source")
    orphans = [k for k in range(K) if not A[k].any()]
    if orphans:
        raise MultiAssignment(f"sources {orphans} are not assigned to any sector")
    return A


def build_Y(msi, w, monthly_totals, *, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Rescale monthly indicators into monthly sector consumption (MWh).

    Columns are first scaled to the sector totals ``w``, then rows to the
    monthly totals; the two scalings alternate until both margins hold to
    ``tol`` (relative).  For a single month one pass is exact.
    """
    Y = as_float_matrix(msi, "msi").copy()
    w = np.asarray(w, dtype=np.float64)
    totals = np.asarray(monthly_totals, dtype=np.float64)
    m, g = Y.shape
    if w.shape != (g,) or totals.shape != (m,):
        raise DimensionMismatch(f"msi {Y.shape} vs w {w.shape} and totals {totals.shape}")
    if np.isnan(Y).any():
        r = int(np.argwhere(np.isnan(Y))[0, 0])
        raise MissingMonth(f"indicator missing for month row {r}")
    col = Y.sum(axis=0)
    if (col <= 0).any():
        raise ZeroIndicatorColumn(f"indicator columns {np.flatnonzero(col <= 0).tolist()} sum to zero")
    if (Y.sum(axis=1) <= 0).any():
        raise ZeroIndicatorColumn(f"indicator rows {np.flatnonzero(Y.sum(axis=1) <= 0).tolist()} sum to zero")

    for _ in range(max_iter):
        Y *= w / Y.sum(axis=0)
        Y *= (totals / Y.sum(axis=1))[:, None]
        col_err = np.abs(Y.sum(axis=0) - w) <= tol * np.abs(w)
        if col_err.all():
            return Y
    warnings.warn(f"row/column scaling of Y did not reach tol={tol} in {max_iter} passes",
                  RuntimeWarning, stacklevel=2)
    return Y


def read_msi(path, sectors: Sequence[str], months: Sequence[str]) -> np.ndarray:
    """Read the ``sector,month,value`` table into an (m, g) matrix."""
    table = _read_table(path, MSI_HEADER)
    values = {}
    for lineno, (sector, month, value) in table:
        try:
            values[(sector, month)] = float(value)
        except ValueError as exc:
            raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
        if values[(sector, month)] < 0:
            raise MalformedRow(f"{path}:{lineno}: negative indicator {value}")
    out = np.empty((len(months), len(sectors)))
    for r, mo in enumerate(months):
        for j, s in enumerate(sectors):
            if (s, mo) not in values:
                raise MissingMonth(f"{path}: no indicator for sector {s!r} in month {mo}")
            out[r, j] = values[(s, mo)]
    return out


def msi_months(path) -> set[str]:
    return {month for _, (_, month, _) in _read_table(path, MSI_HEADER)}


def read_asc(path, sectors: Sequence[str], years: Sequence[int]) -> np.ndarray:
    """Read the ``sector,year,consumption_mwh`` table into an (n_years, g) matrix."""
    table = _read_table(path, ASC_HEADER)
    values = {}
    for lineno, (sector, year, value) in table:
        try:
            values[(sector, int(year))] = float(value)
        except ValueError as exc:
            raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
    out = np.empty((len(years), len(sectors)))
    for r, y in enumerate(years):
        for j, s in enumerate(sectors):
            if (s, y) not in values:
                raise PeriodMismatch(f"{path}: no ASC value for sector {s!r} in {y}")
            out[r, j] = values[(s, y)]
    return out


def _read_table(path, header):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got is None or tuple(h.strip() for h in got) != header:
            raise MalformedRow(f"{path}:1: expected header {','.join(header)!r}, got {got!r}")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRow(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append((lineno, tuple(c.strip() for c in row)))
    return rows


def write_msi(path, sectors, months, values) -> None:
    values = np.asarray(values)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MSI_HEADER)
        for j, s in enumerate(sectors):
            for r, mo in enumerate(months):
                w.writerow([s, mo, repr(float(values[r, j]))])


def write_asc(path, sectors, years, values) -> None:
    values = np.asarray(values)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ASC_HEADER)
        for j, s in enumerate(sectors):
            for r, y in enumerate(years):
                w.writerow([s, y, repr(float(values[r, j]))])
