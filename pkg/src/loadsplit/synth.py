"""Synthetic load data with known sources, concentrations and sector totals.

Daily shapes are mixtures ``C_true @ S_true`` of stylised sector profiles;
concentrations follow seasonal and day-type patterns, so monthly sector
shares move enough for the monthly constraint to pin the sources down.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .constraints import build_A, build_B, month_index, write_asc, write_msi
from .curves import CalendarConfig, CurveMatrix, DayType, day_type_of, season_of, write_load_csv
from .exceptions import InvalidSpec, ShapeMismatch

SECTORS = ("household", "industry", "services")

DEFAULT_MAPPINGS = {
    3: {"household": [0], "industry": [1], "services": [2]},
    5: {"household": [0, 1], "industry": [2], "services": [3, 4]},
}

# monthly seasonal multipliers of each sector's share, January first
SEASONALITY = {
    "household": [1.60, 1.40, 1.00, 0.70, 0.60, 0.90, 1.50, 1.60, 0.80, 0.70, 1.00, 1.60],
    "industry": [0.90, 1.10, 1.20, 1.30, 1.20, 1.10, 0.90, 0.30, 1.10, 1.20, 1.10, 0.70],
    "services": [1.10, 1.00, 0.80, 0.70, 0.90, 1.20, 1.50, 1.10, 1.00, 0.80, 1.00, 1.10],
}
BASE_SHARE = {"household": 0.30, "industry": 0.40, "services": 0.30}
DAY_TYPE_EFFECT = {
    "household": {DayType.MONDAY: 1.0, DayType.WORKING_DAY: 1.0, DayType.SATURDAY: 1.2, DayType.HOLIDAY: 1.35},
    "industry": {DayType.MONDAY: 0.95, DayType.WORKING_DAY: 1.0, DayType.SATURDAY: 0.7, DayType.HOLIDAY: 0.45},
    "services": {DayType.MONDAY: 1.0, DayType.WORKING_DAY: 1.0, DayType.SATURDAY: 0.85, DayType.HOLIDAY: 0.6},
}
SPLIT_WEEKEND = {"household": 0.2, "services": 0.5}
ENERGY_DAY_TYPE = {DayType.MONDAY: 0.98, DayType.WORKING_DAY: 1.03, DayType.SATURDAY: 0.9, DayType.HOLIDAY: 0.8}

# fixed-date national holidays (month, day)
FIXED_HOLIDAYS = [(1, 1), (1, 6), (4, 25), (5, 1), (6, 2), (8, 15), (11, 1), (12, 8), (12, 25), (12, 26)]


def _bump(h, centre, width):
    return np.exp(-0.5 * ((h - centre) / width) ** 2)


def _ramp(h, start, steep=1.5):
    return 1.0 / (1.0 + np.exp(-(h - start) * steep))


def stylised_profiles(p: int = 24) -> dict[str, np.ndarray]:
    """Unit-sum daily profiles, keyed by name."""
    h = np.arange(p, dtype=np.float64)
    profiles = {
        # evening-peaked, early steep morning ramp
        "household_cold": 0.08 + 0.35 * _bump(h, 8, 1.5) + 1.2 * _bump(h, 19, 1.8),
        # gradual morning ramp, late evening peak
        "household_warm": 0.10 + 0.35 * _ramp(h, 9, 0.8) * (1 - _ramp(h, 23.5, 2)) + 0.9 * _bump(h, 21.5, 1.5),
        # sharp ramp from 05:00 and peaks at 09:00, 16:00 and 20:00
        "industry": 0.06 + 0.5 * _ramp(h, 5.5, 3) + 0.5 * _bump(h, 9, 1.0) + 0.45 * _bump(h, 16, 1.0) + 0.35 * _bump(h, 20, 1.0),
        # business-hours plateau with a late-afternoon peak
        "services_day": 0.04 + 1.0 * _ramp(h, 7.5, 2) * (1 - _ramp(h, 18.5, 2)) + 0.3 * _bump(h, 17.5, 1.0),
        # flat regime, afternoon trough at 15:00, evening peak at 20:00
        "services_flat": 0.5 - 0.25 * _bump(h, 15, 1.5) + 0.5 * _bump(h, 20, 1.2) + 0.15 * _ramp(h, 6, 1.5),
    }
    return {k: v / v.sum() for k, v in profiles.items()}


SOURCE_NAMES = {
    3: ["household_cold", "industry", "services_day"],
    5: ["household_cold", "household_warm", "industry", "services_day", "services_flat"],
}


def default_holidays(years) -> list[date]:
    return sorted(date(y, m, d) for y in years for m, d in FIXED_HOLIDAYS)


@dataclass
class SynthSpec:
    n_days: int = 730
    start: date = date(2021, 1, 1)
    n_sources: int = 3
    mapping: dict | None = None
    p: int = 24
    noise: float = 0.0
    msi_noise: float = 0.0
    drift: float = 0.0
    seasonality: float = 1.0
    share_jitter: float = 0.1
    split_amplitude: float = 0.8
    mean_daily_energy: float = 8.0e5
    utc_offset_hours: int = 1
    seed: int = 0
    holidays: list | None = None

    def resolved_mapping(self) -> dict:
        mapping = self.mapping if self.mapping is not None else DEFAULT_MAPPINGS.get(self.n_sources)
        if mapping is None:
            raise InvalidSpec(f"no default sector mapping for {self.n_sources} sources; pass mapping")
        return {str(k): list(v) for k, v in mapping.items()}


@dataclass
class GroundTruth:
    S_true: np.ndarray
    C_true: np.ndarray
    E_true: np.ndarray
    A: np.ndarray
    mapping: dict
    sectors: list
    monthly: np.ndarray
    months: list
    asc: np.ndarray
    years: list
    msi: np.ndarray
    noise_level: float

    def sector_hourly(self) -> np.ndarray:
        """True hourly sector load (MW), shape (n, g, p)."""
        return np.einsum("ik,kh,kj->ijh", self.C_true * self.E_true[:, None], self.S_true, self.A)

    def sector_daily(self) -> np.ndarray:
        return (self.C_true * self.E_true[:, None]) @ self.A


@dataclass
class SynthDataset:
    curves: CurveMatrix
    truth: GroundTruth
    holidays: list
    timestamps: list = field(repr=False)
    loads: np.ndarray = field(repr=False)

    @property
    def sectors(self):
        return self.truth.sectors


def _source_profiles(spec: SynthSpec, mapping) -> np.ndarray:
    prof = stylised_profiles(spec.p)
    names = SOURCE_NAMES.get(spec.n_sources)
    if names is None:
        # generic case: cycle through the stylised shapes of each source's sector
        by_sector = {"household": ["household_cold", "household_warm"], "industry": ["industry"],
                     "services": ["services_day", "services_flat"]}
        names = [None] * spec.n_sources
        for sector, sources in mapping.items():
            pool = by_sector.get(sector, list(prof))
            for r, k in enumerate(sources):
                names[k] = pool[r % len(pool)]
    return np.vstack([prof[n] for n in names])


def _seasonal_factors(sectors, years, spec: SynthSpec, rng) -> dict:
    """Monthly multipliers per (sector, year), with year-over-year random-walk drift."""
    out = {}
    for s in sectors:
        f = np.asarray(SEASONALITY.get(s, np.ones(12)), dtype=np.float64)
        f = 1.0 + spec.seasonality * (f - 1.0)
        for y in years:
            out[(s, y)] = f
            f = f * (1.0 + spec.drift * rng.standard_normal(12))
            f = np.maximum(f, 0.05)
    return out


def _smooth_daily(factors: dict, sector, dates) -> np.ndarray:
    """Interpolate monthly factors, placed at mid-month, to daily values."""
    years = sorted({d.year for d in dates})
    years = [years[0] - 1] + years + [years[-1] + 1]
    nodes, values = [], []
    for y in years:
        key = (sector, min(max(y, years[1]), years[-2]))
        for m in range(12):
            nodes.append(date(y, m + 1, 15).toordinal())
            values.append(factors[key][m])
    return np.interp([d.toordinal() for d in dates], nodes, values)


def generate(spec: SynthSpec | None = None) -> SynthDataset:
    """Draw a synthetic dataset; deterministic given ``spec.seed``."""
    spec = spec or SynthSpec()
    if spec.n_days < 2 or spec.n_sources < 1 or spec.p not in (24, 25):
        raise InvalidSpec(f"invalid dimensions: n_days={spec.n_days}, n_sources={spec.n_sources}, p={spec.p}")
    if min(spec.noise, spec.msi_noise, spec.drift, spec.share_jitter) < 0:
        raise InvalidSpec("noise levels must be non-negative")
    mapping = spec.resolved_mapping()
    sectors = list(mapping)
    K = spec.n_sources
    try:
        A = build_A(mapping, K)
    except ValueError as exc:
        raise InvalidSpec(str(exc)) from exc
    rng = np.random.default_rng(spec.seed)

    dates = [spec.start + timedelta(days=i) for i in range(spec.n_days)]
    months, _ = month_index(dates)
    if len(months) < 2:
        raise InvalidSpec("the period must span at least two months")
    years = sorted({d.year for d in dates})
    holidays = list(spec.holidays) if spec.holidays is not None else default_holidays(years)
    cal = CalendarConfig.from_dates(holidays)
    day_types = [day_type_of(d, cal.holidays) for d in dates]
    doy = np.array([d.timetuple().tm_yday for d in dates], dtype=np.float64)

    S_true = _source_profiles(spec, mapping)

    seasonal = _seasonal_factors(sectors, years, spec, rng)
    n = spec.n_days
    C = np.empty((n, K))
    for s in sectors:
        share = BASE_SHARE.get(s, 1.0 / len(sectors)) * _smooth_daily(seasonal, s, dates)
        effect = DAY_TYPE_EFFECT.get(s, {})
        share = share * np.array([effect.get(t, 1.0) for t in day_types])
        sources = mapping[s]
        if len(sources) == 1:
            C[:, sources[0]] = share
            continue
        # sources of one sector trade off along an annual cycle and on weekends
        pos = sectors.index(s)
        weekend = np.array([t in (DayType.SATURDAY, DayType.HOLIDAY) for t in day_types], dtype=float)
        R = len(sources)
        for r, k in enumerate(sources):
            theta = 2 * np.pi * (doy - 15) / 365.25 - 2 * np.pi * r / R - pos * np.pi / 3
            w = 1.0 + spec.split_amplitude * np.cos(theta)
            w = w + SPLIT_WEEKEND.get(s, 0.3) * weekend * (1 if r % 2 else -1)
            C[:, k] = share * np.maximum(w, 0.05) / R
    C *= np.exp(spec.share_jitter * rng.standard_normal(C.shape))
    C_true = C / C.sum(axis=1, keepdims=True)

    annual = 1.0 + 0.12 * np.cos(2 * np.pi * (doy - 20) / 365.25) + 0.06 * np.cos(4 * np.pi * (doy - 200) / 365.25)
    weekly = np.array([ENERGY_DAY_TYPE[t] for t in day_types])
    E = spec.mean_daily_energy * annual * weekly * (1.0 + 0.02 * rng.standard_normal(n))

    X = C_true @ S_true
    if spec.noise > 0:
        X = np.maximum(X * (1.0 + spec.noise * rng.standard_normal(X.shape)), 0.0)
    X = X / X.sum(axis=1, keepdims=True)

    B = build_B(E, dates)
    monthly = B @ C_true @ A
    month_year = [int(mo[:4]) for mo in months]
    asc = np.array([monthly[[y == yy for yy in month_year]].sum(axis=0) for y in years])
    msi = monthly / monthly.mean(axis=0) * 100.0
    if spec.msi_noise > 0:
        msi = msi * (1.0 + spec.msi_noise * rng.standard_normal(msi.shape))

    # hourly load in MW; with 25 samples the 24:00 value is not an hour of the day
    hourly = X[:, :24] * (E / X[:, :24].sum(axis=1))[:, None]
    tz = timezone(timedelta(hours=spec.utc_offset_hours))
    stamps = [datetime(d.year, d.month, d.day, h, tzinfo=tz) for d in dates for h in range(24)]

    curves = CurveMatrix(X, E.copy(), dates, day_types, [season_of(d) for d in dates])
    truth = GroundTruth(S_true, C_true, E.copy(), A, mapping, sectors, monthly, months, asc, years, msi, spec.noise)
    return SynthDataset(curves, truth, holidays, stamps, hourly.reshape(-1))


def italy_like(seed: int = 0, **overrides) -> SynthSpec:
    """Two years of K=5 data with household and services split in two sources.

    The 3% measurement noise sets a floor under the trailing principal
    components, as real load curves have; without it the weakest source
    direction falls below the 0.97 scree threshold.
    """
    kw = dict(n_days=730, n_sources=5, noise=0.03, share_jitter=0.2, seed=seed)
    kw.update(overrides)
    return SynthSpec(**kw)


def split_dataset(ds: SynthDataset, n_train: int) -> tuple:
    """Calendar split of a dataset into the first ``n_train`` days and the rest."""
    mask = np.arange(ds.curves.n) < n_train
    return ds.curves.select(mask), ds.curves.select(~mask)


def write_dataset(ds: SynthDataset, directory, test_days: int = 0) -> dict:
    """Write the dataset in the package's input formats.

    With ``test_days > 0`` the last days go to ``load_test.csv`` and the ASC
    table only covers the training years.  Returns the written paths.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    n = ds.curves.n
    n_train = n - test_days
    paths = {"load": out / "load.csv", "asc": out / "asc.csv", "msi": out / "msi.csv",
             "holidays": out / "holidays.csv"}
    hours = 24
    write_load_csv(paths["load"], ds.timestamps[: n_train * hours], ds.loads[: n_train * hours])
    if test_days:
        paths["load_test"] = out / "load_test.csv"
        write_load_csv(paths["load_test"], ds.timestamps[n_train * hours:], ds.loads[n_train * hours:])
    t = ds.truth
    train_years = sorted({d.year for d in ds.curves.dates[:n_train]})
    rows = [t.years.index(y) for y in train_years]
    write_asc(paths["asc"], t.sectors, train_years, t.asc[rows])
    write_msi(paths["msi"], t.sectors, t.months, t.msi)
    with open(paths["holidays"], "w", encoding="utf-8") as fh:
        fh.writelines(f"{d.isoformat()}\n" for d in ds.holidays)
    truth_dir = out / "truth"
    truth_dir.mkdir(exist_ok=True)
    np.savetxt(truth_dir / "S_true.csv", t.S_true, delimiter=",", fmt="%.17g")
    np.savetxt(truth_dir / "C_true.csv", t.C_true, delimiter=",", fmt="%.17g")
    np.savetxt(truth_dir / "E_true.csv", t.E_true, delimiter=",", fmt="%.17g")
    return paths


@dataclass
class RecoveryMetrics:
    sectors: list
    rmse_mw: np.ndarray
    mape: np.ndarray
    cosine: np.ndarray
    mean_load_mw: float

    def as_rows(self) -> list[dict]:
        return [
            {"sector": s, "rmse_mw": float(r), "mape": float(m), "cosine": float(c)}
            for s, r, m, c in zip(self.sectors, self.rmse_mw, self.mape, self.cosine)
        ]


def evaluate_recovery(estimated, truth: GroundTruth) -> RecoveryMetrics:
    """Compare estimated hourly sector loads with the ground truth.

    ``estimated`` is an (n, g, p) array or a list of ``SectorSeries``.
    Returns per-sector hourly RMSE (MW), mean absolute percentage error of
    daily energies (as a fraction) and cosine similarity of the mean daily
    profiles.
    """
    true = truth.sector_hourly()
    n, g, p = true.shape
    if isinstance(estimated, list):
        est = np.stack([np.asarray(s.hourly_mean) for s in estimated], axis=0)
        hours = est.shape[1] // n if n else 0
        if est.shape[0] != g or hours * n != est.shape[1]:
            raise ShapeMismatch(f"{est.shape[0]} series of {est.shape[1]} values for truth {true.shape}")
        est = est.reshape(g, n, hours).transpose(1, 0, 2)
    else:
        est = np.asarray(estimated, dtype=np.float64)
    true = true[..., : est.shape[-1]]
    if est.shape != true.shape:
        raise ShapeMismatch(f"estimate shape {est.shape} does not match truth {true.shape}")
    rmse = np.sqrt(np.mean((est - true) ** 2, axis=(0, 2)))
    e_est = est.sum(axis=2)
    e_true = true.sum(axis=2)
    mape = np.mean(np.abs(e_est - e_true) / e_true, axis=0)
    pe = est.mean(axis=0)
    pt = true.mean(axis=0)
    cosine = np.sum(pe * pt, axis=1) / (np.linalg.norm(pe, axis=1) * np.linalg.norm(pt, axis=1))
    mean_load = float(true.sum(axis=1).mean())
    return RecoveryMetrics(list(truth.sectors), rmse, mape, cosine, mean_load)
