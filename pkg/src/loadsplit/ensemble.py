"""Ensembles of randomly initialised LCNMF runs and their aggregation.

Runs differ only in the seed of the concentration initialisation.  The
cluster of lowest converged losses is retained, sources are aligned within
each sector to the first retained solution, and estimates are reported as
means with 2.5% / 97.5% quantile bands across solutions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime, time, timedelta

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import linear_sum_assignment

from .exceptions import EmptyCluster, NumericalError
from .solver import FactorPair, SolverConfig, SolverResult, fit, init_factors

logger = logging.getLogger(__name__)

QUANTILES = (0.025, 0.975)


@dataclass
class SolutionEnsemble:
    solutions: list
    losses_all: np.ndarray
    retained: np.ndarray
    threshold: float
    alignment: list
    medoid_index: int
    failed: list

    @property
    def medoid_S(self) -> np.ndarray:
        return self.solutions[self.medoid_index].factors.S

    @property
    def factors(self) -> list[FactorPair]:
        return [r.factors for r in self.solutions]


@dataclass
class EnsembleEstimates:
    """Per-day ensemble summaries; arrays are indexed (day, source[, hour])."""

    concentration_mean: np.ndarray
    concentration_q: tuple
    energy_mean: np.ndarray
    energy_q: tuple
    load_mean: np.ndarray
    load_q: tuple


@dataclass
class SectorSeries:
    sector: str
    timestamps: list
    hourly_mean: np.ndarray
    q025: np.ndarray
    q975: np.ndarray
    daily_energy_mean: np.ndarray


def _one_run(X, constraints, config: SolverConfig, K: int, seed: int):
    n, p = X.shape
    cfg = SolverConfig(**{**config.__dict__, "seed": seed})
    try:
        res = fit(X, constraints, cfg, init_factors(n, K, p, seed))
    except NumericalError as exc:
        return seed, None, str(exc)
    # keep only the final value of the trace
    res.loss_trace = res.loss_trace[-1:]
    return seed, res, None


def run_ensemble(X, constraints, config: SolverConfig, N: int, base_seed: int = 0, *,
                 n_components: int, n_jobs: int | None = 1):
    """Fit ``N`` runs with seeds ``base_seed .. base_seed + N - 1``.

    Returns
    -------
    losses : ndarray of shape (N,)
        Converged total losses, NaN for runs that failed numerically.
    results : list
        ``SolverResult`` per run in seed order, ``None`` for failed runs.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    X = np.asarray(X, dtype=np.float64)
    seeds = [base_seed + i for i in range(N)]
    if n_jobs in (None, 1):
        out = [_one_run(X, constraints, config, n_components, s) for s in seeds]
    else:
        out = Parallel(n_jobs=n_jobs)(
            delayed(_one_run)(X, constraints, config, n_components, s) for s in seeds
        )
    losses = np.full(N, np.nan)
    results = []
    for i, (seed, res, err) in enumerate(out):
        if res is None:
            logger.warning("run with seed %d failed: %s", seed, err)
        else:
            losses[i] = res.loss
        results.append(res)
    return losses, results


def cluster_solutions(losses, mode: str = "threshold", threshold: float = 0.01) -> np.ndarray:
    """Indices of the low-loss cluster.

    ``threshold`` keeps losses ``<= threshold``; ``auto_gap`` sorts the losses
    and cuts at the largest gap between consecutive values.  Non-finite
    losses (failed runs) are never retained.
    """
    losses = np.asarray(losses, dtype=np.float64)
    ok = np.flatnonzero(np.isfinite(losses))
    if mode == "threshold":
        keep = ok[losses[ok] <= threshold]
    elif mode == "auto_gap":
        if len(ok) == 0:
            keep = ok
        else:
            order = ok[np.argsort(losses[ok], kind="stable")]
            gaps = np.diff(losses[order])
            if len(gaps) == 0 or gaps.max() <= 0:
                keep = order
            else:
                keep = order[: int(np.argmax(gaps)) + 1]
    else:
        raise ValueError(f"unknown cluster mode {mode!r}")
    if len(keep) == 0:
        raise EmptyCluster(f"no run satisfies cluster mode {mode!r} (threshold={threshold})")
    return np.sort(keep)


def auto_gap_threshold(losses, retained) -> float:
    """Loss value separating the retained cluster from the rest."""
    losses = np.asarray(losses, dtype=np.float64)
    return float(np.max(losses[retained]))


def align_sources(factors, A) -> list[np.ndarray]:
    """Within-sector source permutations aligning every solution to the first.

    For each sector owning several sources, the permutation minimises the
    summed Euclidean distance between the solution's source rows and the
    reference rows.  Returned permutations index the original sources: the
    aligned solution is ``FactorPair(C[:, perm], S[perm])``.
    """
    factors = [getattr(f, "factors", f) for f in factors]
    if not factors:
        raise EmptyCluster("nothing to align")
    A = np.asarray(A)
    ref = factors[0].S
    K = ref.shape[0]
    blocks = [np.flatnonzero(A[:, j]) for j in range(A.shape[1])]
    perms = []
    for f in factors:
        perm = np.arange(K)
        for block in blocks:
            if len(block) < 2:
                continue
            cost = np.linalg.norm(ref[block][:, None, :] - f.S[block][None, :, :], axis=2)
            rows, cols = linear_sum_assignment(cost)
            perm[block[rows]] = block[cols]
        perms.append(perm)
    return perms


def medoid_index(S_list) -> int:
    """Index of the S minimising the summed Frobenius distance to all others."""
    stack = np.stack([np.asarray(S) for S in S_list]).reshape(len(S_list), -1)
    sq = np.sum(stack**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * stack @ stack.T, 0.0)
    return int(np.argmin(np.sqrt(d2).sum(axis=1)))


def build_ensemble(losses, results, A, mode="threshold", threshold=0.01) -> SolutionEnsemble:
    """Cluster, align and pick the medoid of a finished set of runs."""
    retained = cluster_solutions(losses, mode, threshold)
    kept = [results[i] for i in retained]
    perms = align_sources(kept, A)
    aligned = []
    for res, perm in zip(kept, perms):
        aligned.append(SolverResult(
            factors=res.factors.permuted(perm),
            loss_trace=res.loss_trace,
            converged=res.converged,
            iters=res.iters,
            loss_terms=res.loss_terms,
            loss=res.loss,
            seed=res.seed,
            diagnostics=res.diagnostics,
        ))
    med = medoid_index([r.factors.S for r in aligned])
    cut = threshold if mode == "threshold" else auto_gap_threshold(losses, retained)
    failed = [i for i, r in enumerate(results) if r is None]
    return SolutionEnsemble(aligned, np.asarray(losses), retained, cut, perms, med, failed)


def _quantiles(stack, axis=0):
    q = np.quantile(stack, QUANTILES, axis=axis)
    return q[0], q[1]


def ensemble_estimates(factors, E) -> EnsembleEstimates:
    """Ensemble means and quantile bands of concentrations, energies and loads.

    The mean daily source energy is ``mean_l c_ik^(l) e_i`` and the mean
    hourly source load ``mean_l c_ik^(l) e_i S_k^(l)``.
    """
    factors = [getattr(f, "factors", f) for f in factors]
    E = np.asarray(E, dtype=np.float64)
    Cs = np.stack([f.C for f in factors])  # (N*, n, K)
    Ss = np.stack([f.S for f in factors])  # (N*, K, p)
    energy = Cs * E[None, :, None]
    loads = energy[..., None] * Ss[:, None, :, :]  # (N*, n, K, p)
    return EnsembleEstimates(
        concentration_mean=Cs.mean(axis=0),
        concentration_q=_quantiles(Cs),
        energy_mean=energy.mean(axis=0),
        energy_q=_quantiles(energy),
        load_mean=loads.mean(axis=0),
        load_q=_quantiles(loads),
    )


def sector_loads(factors, E, A) -> np.ndarray:
    """Per-solution hourly sector loads, shape (N*, n, g, p)."""
    factors = [getattr(f, "factors", f) for f in factors]
    E = np.asarray(E, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    out = []
    for f in factors:
        # sum_k c_ik e_i S_k[h] A[k, j]
        out.append(np.einsum("ik,kh,kj->ijh", f.C * E[:, None], f.S, A))
    return np.stack(out)


def sector_series(factors, E, A, dates, sectors=None, *, chunk: int = 64) -> list[SectorSeries]:
    """Hourly sector load concatenated over days, with quantile envelopes.

    Each solution's source loads are summed per sector first; means and
    quantiles are then taken across solutions.  With 25 samples per day the
    24:00 sample is dropped so that days concatenate.
    """
    factors = [getattr(f, "factors", f) for f in factors]
    E = np.asarray(E, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    n, g = len(E), A.shape[1]
    sectors = list(sectors) if sectors is not None else [f"sector{j}" for j in range(g)]
    p = factors[0].S.shape[1]
    hours = min(p, 24)
    mean = np.empty((n, g, hours))
    lo = np.empty_like(mean)
    hi = np.empty_like(mean)
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        part = sector_loads([FactorPair(f.C[sl], f.S) for f in factors], E[sl], A)[..., :hours]
        mean[sl] = part.mean(axis=0)
        lo[sl], hi[sl] = _quantiles(part)
    # a quantile of a tiny-spread stack can round past the mean
    lo = np.minimum(lo, mean)
    hi = np.maximum(hi, mean)
    stamps = [datetime.combine(d, time()) + timedelta(hours=h) for d in dates for h in range(hours)]
    daily = np.stack([f.C * E[:, None] for f in factors]).mean(axis=0) @ A
    return [
        SectorSeries(
            sector=sectors[j],
            timestamps=stamps,
            hourly_mean=mean[:, j, :].reshape(-1),
            q025=lo[:, j, :].reshape(-1),
            q975=hi[:, j, :].reshape(-1),
            daily_energy_mean=daily[:, j],
        )
        for j in range(g)
    ]


def sector_profiles(factor: FactorPair, A) -> np.ndarray:
    """Unit-sum daily profile of each sector under one solution, shape (n, g, p)."""
    A = np.asarray(A, dtype=np.float64)
    weighted = np.einsum("ik,kh,kj->ijh", factor.C, factor.S, A)
    total = weighted.sum(axis=2, keepdims=True)
    return np.divide(weighted, total, out=np.zeros_like(weighted), where=total > 0)


def profile_report(factors, labels, A, by=("day_type", "season")) -> dict:
    """Average sector profiles per calendar cell.

    Profiles are first averaged over the days of each cell within every
    solution, and those per-solution averages are then averaged across
    solutions.  ``labels`` maps each name in ``by`` to one label per day
    (a ``CurveMatrix`` works, via its ``day_types``/``seasons``).

    Returns
    -------
    dict
        ``{cell: ndarray (g, p)}`` where ``cell`` is a tuple of labels in the
        order of ``by``.
    """
    factors = [getattr(f, "factors", f) for f in factors]
    columns = []
    for key in by:
        if isinstance(labels, dict):
            col = labels[key]
        else:
            col = getattr(labels, {"day_type": "day_types", "season": "seasons"}[key])
        columns.append([getattr(v, "value", v) for v in col])
    cells = list(zip(*columns))
    uniq = sorted(set(cells))
    idx = {c: np.array([i for i, x in enumerate(cells) if x == c]) for c in uniq}
    per_solution = []
    for f in factors:
        prof = sector_profiles(f, A)
        per_solution.append({c: prof[idx[c]].mean(axis=0) for c in uniq})
    return {c: np.mean([ps[c] for ps in per_solution], axis=0) for c in uniq}
