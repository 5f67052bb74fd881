"""Non-blind decomposition of new days with the sources held fixed."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import nnls

from ._validation import as_float_matrix, check_nonnegative, check_shape
from .constraints import build_B, month_index
from .ensemble import QUANTILES
from .exceptions import Diverged, InsufficientMonths, MissingMonth, RankDeficientSources, ShapeMismatch
from .solver import EPS_FLOOR, DEFAULT_WINDOW

PROJECTION_MAX_ITERS = 2000


@dataclass(frozen=True)
class ProjectionConfig:
    max_iters: int = PROJECTION_MAX_ITERS
    rel_tol: float = 1e-8
    eps_floor: float = EPS_FLOOR
    window: int = DEFAULT_WINDOW
    polish: bool = True


@dataclass
class MonthlyEstimate:
    sector: str
    month: str
    energy: float
    q025: float
    q975: float


def check_sources(S) -> np.ndarray:
    S = as_float_matrix(S, "S")
    check_nonnegative(S, "S")
    if np.linalg.matrix_rank(S) < S.shape[0]:
        raise RankDeficientSources(f"sources of shape {S.shape} are not linearly independent")
    return S


def project(X0, S, config: ProjectionConfig | None = None, init=None, seed=None) -> np.ndarray:
    """Concentrations minimising ``||X0 - C S||_F^2`` over ``C >= 0``.

    Plain multiplicative updates on ``C`` only.  The problem is convex when
    ``S`` has full row rank, so the result does not depend on ``init``
    beyond the stopping tolerance.  ``init`` defaults to rows drawn
    uniformly on the simplex from ``seed``.

    Multiplicative updates approach zero entries only sublinearly, so with
    ``config.polish`` each row is finished by an active-set NNLS solve
    and kept when it does not increase the row residual.
    """
    config = config or ProjectionConfig()
    X0 = check_nonnegative(as_float_matrix(getattr(X0, "X", X0), "X0"), "X0")
    S = check_sources(S)
    K, p = S.shape
    check_shape(X0, (None, p), "X0")
    n = X0.shape[0]
    if init is None:
        rng = np.random.default_rng(seed)
        C = rng.standard_exponential((n, K))
        C /= C.sum(axis=1, keepdims=True)
    else:
        C = check_shape(as_float_matrix(init, "init"), (n, K), "init").copy()
        check_nonnegative(C, "init")

    XSt = X0 @ S.T
    SSt = S @ S.T
    w = config.window
    floor = 1e-16 * max(float(np.sum(X0**2)), 1e-300)
    trace = [float(np.sum((X0 - C @ S) ** 2))]
    for it in range(1, config.max_iters + 1):
        C = C * XSt / (C @ SSt + config.eps_floor)
        total = float(np.sum((X0 - C @ S) ** 2))
        if not np.isfinite(total):
            raise Diverged(f"projection loss became non-finite at iteration {it}")
        trace.append(total)
        if it >= w and trace[-w - 1] - total <= config.rel_tol * max(trace[-w - 1], floor):
            break
    if config.polish:
        C = _polish(X0, S, C)
    return C


def _polish(X0, S, C):
    out = C.copy()
    St = S.T
    for i, x in enumerate(X0):
        c, _ = nnls(St, x)
        if np.sum((x - c @ S) ** 2) <= np.sum((x - C[i] @ S) ** 2):
            out[i] = c
    return out


def residuals(X0, C0, S) -> np.ndarray:
    """Per-day Frobenius residual; large values flag days outside the source cone."""
    X0 = np.asarray(getattr(X0, "X", X0), dtype=np.float64)
    return np.linalg.norm(X0 - C0 @ np.asarray(S), axis=1)


def project_ensemble(X0, S_list, config: ProjectionConfig | None = None, *, seed: int = 0,
                     n_jobs: int | None = 1) -> list[np.ndarray]:
    """Project ``X0`` on every solution's sources, in solution order."""
    X0 = np.asarray(getattr(X0, "X", X0), dtype=np.float64)
    jobs = [(S, seed + l) for l, S in enumerate(S_list)]
    if n_jobs in (None, 1):
        return [project(X0, S, config, seed=s) for S, s in jobs]
    return Parallel(n_jobs=n_jobs)(delayed(project)(X0, S, config, seed=s) for S, s in jobs)


def monthly_matrix(C0s, E0, A, dates) -> tuple[list[str], np.ndarray]:
    """Per-solution monthly sector consumption ``B0 C0 A``, shape (N*, m, g)."""
    B0 = build_B(E0, dates)
    months, _ = month_index(dates)
    A = np.asarray(A, dtype=np.float64)
    return months, np.stack([B0 @ np.asarray(C0) @ A for C0 in C0s])


def monthly_consumption(C0s, E0, A, dates, sectors=None) -> list[MonthlyEstimate]:
    """Ensemble mean and quantiles of monthly sector consumption (MWh)."""
    months, Z = monthly_matrix(C0s, E0, A, dates)
    g = Z.shape[2]
    sectors = list(sectors) if sectors is not None else [f"sector{j}" for j in range(g)]
    mean = Z.mean(axis=0)
    lo, hi = np.quantile(Z, QUANTILES, axis=0)
    lo = np.minimum(lo, mean)
    hi = np.maximum(hi, mean)
    return [
        MonthlyEstimate(sectors[j], mo, float(mean[r, j]), float(lo[r, j]), float(hi[r, j]))
        for j in range(g)
        for r, mo in enumerate(months)
    ]


def estimates_matrix(estimates: list[MonthlyEstimate], sectors=None) -> tuple[list[str], list[str], np.ndarray]:
    """Pivot a list of monthly estimates into (months, sectors, (m, g) matrix)."""
    sectors = list(sectors) if sectors is not None else list(dict.fromkeys(e.sector for e in estimates))
    months = sorted({e.month for e in estimates})
    out = np.full((len(months), len(sectors)), np.nan)
    rpos = {mo: r for r, mo in enumerate(months)}
    cpos = {s: j for j, s in enumerate(sectors)}
    for e in estimates:
        out[rpos[e.month], cpos[e.sector]] = e.energy
    return months, sectors, out


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt(np.sum(a**2) * np.sum(b**2))
    return float(np.sum(a * b) / den) if den > 0 else float("nan")


def one_year_lag(msi_lookup, months, sectors) -> np.ndarray:
    """Indicator values twelve months before each of ``months``.

    ``msi_lookup`` maps ``(sector, "YYYY-MM")`` to a value.
    """
    out = np.empty((len(months), len(sectors)))
    for r, mo in enumerate(months):
        y, m = map(int, mo.split("-"))
        prev = f"{y - 1:04d}-{m:02d}"
        for j, s in enumerate(sectors):
            if (s, prev) not in msi_lookup:
                raise MissingMonth(f"no indicator for sector {s!r} in {prev} (needed for the lag baseline)")
            out[r, j] = msi_lookup[(s, prev)]
    return out


def score(estimates, indicators, lagged, sectors=None) -> list[dict]:
    """Pearson correlation with the indicators, for the estimates and the lag baseline.

    All three inputs are (m, g) matrices over the same months; ``estimates``
    may also be a list of :class:`MonthlyEstimate`.
    """
    if isinstance(estimates, list):
        _, sectors_e, estimates = estimates_matrix(estimates, sectors)
        sectors = sectors or sectors_e
    est = np.asarray(estimates, dtype=np.float64)
    ind = np.asarray(indicators, dtype=np.float64)
    lag = np.asarray(lagged, dtype=np.float64)
    if est.shape != ind.shape or lag.shape != ind.shape or est.ndim != 2:
        raise ShapeMismatch(f"shapes differ: estimates {est.shape}, indicators {ind.shape}, lagged {lag.shape}")
    if est.shape[0] < 3:
        raise InsufficientMonths(f"need at least 3 months to correlate, got {est.shape[0]}")
    g = est.shape[1]
    sectors = list(sectors) if sectors is not None else [f"sector{j}" for j in range(g)]
    return [
        {"sector": sectors[j], "bss_r": pearson(est[:, j], ind[:, j]), "naive_r": pearson(lag[:, j], ind[:, j])}
        for j in range(g)
    ]
