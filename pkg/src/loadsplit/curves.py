"""Hourly load ingestion and daily shape curves.

A day's load ``L_i`` is split into its energy ``e_i = sum(L_i)`` (MWh, one
hour per sample) and its shape ``X_i = L_i / e_i``.  Days are calendar days
on the local wall clock carried by the input timestamps.
"""

from __future__ import annotations

import csv
import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import (
    IncompleteDay,
    MalformedRow,
    NegativeLoad,
    NonMonotonicTime,
    PeriodMismatch,
    ZeroEnergyDay,
    ZeroTotal,
)

LOAD_HEADER = ("timestamp", "load_mw")
MAX_INTERPOLATED_GAP = 3


class GapPolicy(str, enum.Enum):
    REJECT = "reject"
    INTERPOLATE = "interpolate"


class DayType(str, enum.Enum):
    MONDAY = "Monday"
    WORKING_DAY = "WorkingDay"
    SATURDAY = "Saturday"
    HOLIDAY = "Holiday"


class Season(str, enum.Enum):
    WINTER = "Winter"
    SPRING = "Spring"
    SUMMER = "Summer"
    FALL = "Fall"


@dataclass(frozen=True)
class LoadRecord:
    """One hourly observation on the local wall clock.

    ``dst`` marks samples belonging to a day whose UTC offset changes;
    ``repaired`` marks values produced by averaging or interpolation.
    """

    timestamp: datetime
    load: float
    dst: bool = False
    repaired: bool = False


@dataclass(frozen=True)
class CalendarConfig:
    holidays: frozenset = field(default_factory=frozenset)

    @classmethod
    def from_dates(cls, dates: Iterable[date]) -> "CalendarConfig":
        return cls(frozenset(dates))


@dataclass(frozen=True)
class DailyCurve:
    date: date
    shape: np.ndarray
    energy: float
    day_type: DayType
    season: Season


@dataclass
class CurveMatrix:
    """Stacked daily curves: ``X`` (n, p), energies ``E`` (n,) and calendar labels."""

    X: np.ndarray
    E: np.ndarray
    dates: list
    day_types: list
    seasons: list

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def curves(self) -> list[DailyCurve]:
        return [
            DailyCurve(d, self.X[i], float(self.E[i]), self.day_types[i], self.seasons[i])
            for i, d in enumerate(self.dates)
        ]

    def months(self) -> list[str]:
        return month_labels(self.dates)

    def select(self, mask) -> "CurveMatrix":
        idx = np.flatnonzero(np.asarray(mask))
        return CurveMatrix(
            self.X[idx],
            self.E[idx],
            [self.dates[i] for i in idx],
            [self.day_types[i] for i in idx],
            [self.seasons[i] for i in idx],
        )

    def years(self) -> list[int]:
        return sorted({d.year for d in self.dates})


# -- calendar -----------------------------------------------------------------


def season_of(d: date) -> Season:
    return (Season.WINTER, Season.SPRING, Season.SUMMER, Season.FALL)[(d.month - 1) // 3]


def day_type_of(d: date, holidays=frozenset()) -> DayType:
    wd = d.weekday()
    if wd == 6 or d in holidays:
        return DayType.HOLIDAY
    if wd == 0:
        return DayType.MONDAY
    if wd == 5:
        return DayType.SATURDAY
    return DayType.WORKING_DAY


def month_labels(dates: Sequence[date]) -> list[str]:
    return [f"{d.year:04d}-{d.month:02d}" for d in dates]


def read_holidays(path) -> CalendarConfig:
    """Read one ISO date per line; blank lines and ``#`` comments are skipped."""
    days = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                days.add(date.fromisoformat(line))
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: bad holiday date {line!r}") from exc
    return CalendarConfig(frozenset(days))


# -- ingestion ----------------------------------------------------------------


def _parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def _read_rows(path) -> list[tuple[datetime, float, int]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != LOAD_HEADER:
            raise MalformedRow(f"{path}:1: expected header {','.join(LOAD_HEADER)!r}, got {header!r}")
        aware = None
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise MalformedRow(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                ts = _parse_timestamp(row[0])
                load = float(row[1])
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
            if not math.isfinite(load):
                raise MalformedRow(f"{path}:{lineno}: non-finite load {row[1]!r}")
            if load < 0:
                raise NegativeLoad(f"{path}:{lineno}: negative load {load}")
            if ts.minute or ts.second or ts.microsecond:
                raise MalformedRow(f"{path}:{lineno}: timestamp {row[0]!r} is not on the hour")
            is_aware = ts.tzinfo is not None
            if aware is None:
                aware = is_aware
            elif aware != is_aware:
                raise MalformedRow(f"{path}:{lineno}: mixes offset-aware and naive timestamps")
            rows.append((ts, load, lineno))
    return rows


def ingest_load(path, policy: GapPolicy | str = GapPolicy.INTERPOLATE,
                max_gap: int = MAX_INTERPOLATED_GAP) -> list[LoadRecord]:
    """Read a ``timestamp,load_mw`` CSV into hourly records on the local wall clock.

    Parameters
    ----------
    path : path-like
        CSV file with ISO-8601 timestamps, optionally carrying UTC offsets.
    policy : {"reject", "interpolate"}
        ``reject`` raises on duplicated instants or repeated wall-clock hours
        and leaves gaps in place.  ``interpolate`` averages duplicates and the
        repeated hour of a fall-back day, and fills runs of at most
        ``max_gap`` missing hours (including the spring-forward hour) by linear
        interpolation between the neighbouring samples.

    Returns
    -------
    list of LoadRecord
        Sorted by local timestamp, one record per local hour.
    """
    policy = GapPolicy(policy)
    rows = _read_rows(path)
    if not rows:
        return []

    # order and de-duplicate on absolute time
    rows.sort(key=lambda r: _instant(r[0]))
    merged: list[list] = []
    for ts, load, lineno in rows:
        if merged and _instant(merged[-1][0]) == _instant(ts):
            if policy is GapPolicy.REJECT:
                raise NonMonotonicTime(f"{path}:{lineno}: duplicated timestamp {ts.isoformat()}")
            merged[-1][1].append(load)
        else:
            merged.append([ts, [load]])

    offsets_by_day: dict[date, set] = defaultdict(set)
    by_hour: dict[datetime, list[float]] = {}
    averaged = set()
    for ts, loads in merged:
        local = ts.replace(tzinfo=None)
        offsets_by_day[local.date()].add(ts.utcoffset())
        value = float(np.mean(loads))
        if len(loads) > 1:
            averaged.add(local)
        if local in by_hour:
            if policy is GapPolicy.REJECT:
                raise NonMonotonicTime(f"{path}: wall-clock hour {local.isoformat()} occurs twice")
            by_hour[local].append(value)
        else:
            by_hour[local] = [value]
    dst_days = {d for d, offs in offsets_by_day.items() if len(offs) > 1}

    hours = sorted(by_hour)
    records = []
    for local in hours:
        vals = by_hour[local]
        records.append(LoadRecord(local, float(np.mean(vals)), local.date() in dst_days,
                                  len(vals) > 1 or local in averaged))
    if policy is GapPolicy.INTERPOLATE:
        records = _fill_gaps(records, max_gap, dst_days)
    return records


def _instant(ts: datetime):
    if ts.tzinfo is None:
        return ts
    return (ts - ts.utcoffset()).replace(tzinfo=None)


def _fill_gaps(records: list[LoadRecord], max_gap: int, dst_days) -> list[LoadRecord]:
    out = [records[0]]
    hour = timedelta(hours=1)
    for rec in records[1:]:
        prev = out[-1]
        steps = int((rec.timestamp - prev.timestamp) / hour)
        if 1 < steps <= max_gap + 1:
            for j in range(1, steps):
                t = prev.timestamp + j * hour
                frac = j / steps
                load = prev.load + frac * (rec.load - prev.load)
                out.append(LoadRecord(t, load, t.date() in dst_days, True))
        out.append(rec)
    return out


# -- daily curves -------------------------------------------------------------


def build_curves(records: Sequence[LoadRecord], calendar: CalendarConfig | None = None,
                 p: int = 24) -> CurveMatrix:
    """Group hourly records into daily shape curves.

    With ``p=25`` the 24:00 sample of a day is the 00:00 value of the
    following day (or the day's own 23:00 value when there is none); the
    energy is always the sum of the 24 hourly values.
    """
    if p not in (24, 25):
        raise ValueError(f"p must be 24 or 25, got {p}")
    calendar = calendar or CalendarConfig()
    days: dict[date, dict[int, float]] = defaultdict(dict)
    for rec in records:
        days[rec.timestamp.date()][rec.timestamp.hour] = rec.load

    dates = sorted(days)
    X, E = [], []
    for k, d in enumerate(dates):
        hours = days[d]
        if len(hours) != 24:
            missing = sorted(set(range(24)) - set(hours))
            raise IncompleteDay(f"{d.isoformat()}: {len(hours)} of 24 hourly samples (missing hours {missing})")
        loads = np.array([hours[h] for h in range(24)], dtype=np.float64)
        energy = float(loads.sum())
        if energy <= 0:
            raise ZeroEnergyDay(f"{d.isoformat()}: total energy is {energy}")
        if p == 25:
            nxt = d + timedelta(days=1)
            tail = days[nxt][0] if nxt in days and 0 in days[nxt] else loads[-1]
            samples = np.append(loads, tail)
        else:
            samples = loads
        X.append(samples / samples.sum())
        E.append(energy)
    X = np.array(X).reshape(len(dates), p)
    return CurveMatrix(
        X,
        np.array(E, dtype=np.float64),
        dates,
        [day_type_of(d, calendar.holidays) for d in dates],
        [season_of(d) for d in dates],
    )


def complete_years(dates: Sequence[date]) -> list[int]:
    """Return the years covered by ``dates``, raising PeriodMismatch on a partial year."""
    years = sorted({d.year for d in dates})
    present = set(dates)
    for y in years:
        n_days = (date(y + 1, 1, 1) - date(y, 1, 1)).days
        have = sum(1 for d in present if d.year == y)
        if have != n_days:
            raise PeriodMismatch(f"year {y} has {have} of {n_days} days; the period must be whole years")
    return years


def adjust_losses(E, asc, mode: str = "scale_asc", *, years=None, asc_years=None) -> np.ndarray:
    """Turn annual sector consumption into sector totals comparable with the load.

    ``asc`` is either a ``(g,)`` vector of totals over the period or a
    ``(n_years, g)`` table.  In ``scale_asc`` mode the network losses are
    spread over sectors proportionally to their consumption so that the
    result sums to ``sum(E)``; ``none`` returns the summed ASC untouched.
    """
    E = np.asarray(E, dtype=np.float64)
    asc = np.asarray(asc, dtype=np.float64)
    if asc.ndim == 2:
        if asc_years is not None and len(asc_years) != asc.shape[0]:
            raise PeriodMismatch(f"{asc.shape[0]} ASC rows but {len(asc_years)} ASC years")
        asc = asc.sum(axis=0)
    if years is not None and asc_years is not None and sorted(years) != sorted(asc_years):
        raise PeriodMismatch(f"load covers years {sorted(years)} but ASC covers {sorted(asc_years)}")
    total = E.sum()
    asc_total = asc.sum()
    if total <= 0 or asc_total <= 0:
        raise ZeroTotal(f"load total {total} and ASC total {asc_total} must both be positive")
    if mode == "scale_asc":
        return asc / asc_total * total
    if mode == "none":
        return asc.copy()
    raise ValueError(f"unknown loss adjustment mode {mode!r}")


def write_load_csv(path, timestamps: Sequence[datetime], loads) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOAD_HEADER)
        for ts, v in zip(timestamps, loads):
            w.writerow([ts.isoformat(timespec="minutes"), repr(float(v))])
