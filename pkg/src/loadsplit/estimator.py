"""scikit-learn style estimators wrapping the solver, ensemble and projection."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .constraints import ConstraintSet
from .ensemble import build_ensemble, run_ensemble
from .nowcast import ProjectionConfig, project, project_ensemble
from .solver import FactorPair, SolverConfig, balanced_alpha, fit, init_factors


def resolve_alpha(alpha, X, constraints: ConstraintSet | None) -> float:
    """Numeric penalty weight; ``"balanced"`` defers to :func:`balanced_alpha`."""
    if isinstance(alpha, str):
        if alpha != "balanced":
            raise ValueError(f"alpha must be a number or 'balanced', got {alpha!r}")
        if constraints is None or not constraints.has_monthly:
            return 0.0
        return balanced_alpha(X, constraints.B)
    if not isinstance(alpha, numbers.Real) or alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha!r}")
    return float(alpha)


def _check_X(X):
    X = check_array(getattr(X, "X", X), dtype=np.float64)
    if np.any(X < 0):
        raise ValueError("X must be non-negative")
    return X


class _Base(TransformerMixin, BaseEstimator):
    def _solver_config(self, X, constraints, seed):
        return SolverConfig(
            alpha=resolve_alpha(self.alpha, X, constraints),
            beta=float(self.beta),
            max_iters=int(self.max_iter),
            rel_tol=float(self.tol),
            eps_floor=float(self.eps),
            seed=0 if seed is None else int(seed),
        )

    def _projection_config(self):
        return ProjectionConfig(max_iters=int(self.projection_max_iter), rel_tol=float(self.tol),
                                eps_floor=float(self.eps))

    def _check_new(self, X):
        check_is_fitted(self, "components_")
        X = _check_X(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def inverse_transform(self, C):
        """Shape curves ``C @ components_``."""
        check_is_fitted(self, "components_")
        return np.asarray(C, dtype=np.float64) @ self.components_


class LCNMF(_Base):
    """Linearly-constrained NMF of daily shape curves.

    Factorizes ``X ~ C S`` with non-negative concentrations ``C`` and sources
    ``S``, penalizing deviations of the monthly sector consumption ``B C A``
    from ``Y`` and of the source row sums from one.

    Parameters
    ----------
    n_components : int, default=3
        Number of sources K.
    alpha : float or "balanced", default=3e-10
        Weight of the monthly-consumption penalty.  ``"balanced"`` scales
        it to the fit term, see :func:`~loadsplit.solver.balanced_alpha`.
    beta : float, default=1.0
        Weight of the source row-sum penalty.
    max_iter : int, default=5000
    tol : float, default=1e-8
        Relative loss decrease over a 10-iteration window that stops the run.
    eps : float, default=1e-12
        Floor added to update denominators.
    random_state : int or None, default=None
        Seed of the concentration initialization.
    projection_max_iter : int, default=2000
        Iteration cap of :meth:`transform`.

    Attributes
    ----------
    components_ : ndarray of shape (n_components, n_features)
        Sources S.
    concentrations_ : ndarray of shape (n_samples, n_components)
        Concentrations C of the training curves.
    loss_ : float
    loss_terms_ : tuple
        ``(fit, monthly penalty, row-sum penalty)``.
    n_iter_ : int
    converged_ : bool
    loss_trace_ : ndarray
    alpha_ : float
        Penalty weight actually used.
    diagnostics_ : dict
    """

    def __init__(self, n_components=3, *, alpha=3e-10, beta=1.0, max_iter=5000, tol=1e-8, eps=1e-12,
                 random_state=None, projection_max_iter=2000):
        self.n_components = n_components
        self.alpha = alpha
        self.beta = beta
        self.max_iter = max_iter
        self.tol = tol
        self.eps = eps
        self.random_state = random_state
        self.projection_max_iter = projection_max_iter

    def fit(self, X, y=None, *, constraints: ConstraintSet | None = None, init: FactorPair | None = None):
        """Fit on curves ``X`` (array or ``CurveMatrix``).

        Without ``constraints`` the source row-sum constraint alone is used.
        """
        X = _check_X(X)
        n, p = X.shape
        K = int(self.n_components)
        if constraints is None:
            constraints = ConstraintSet.with_unit_sources(K, p)
        cfg = self._solver_config(X, constraints, self.random_state)
        if init is None:
            init = init_factors(n, K, p, self.random_state)
        res = fit(X, constraints, cfg, init)
        self.components_ = res.factors.S
        self.concentrations_ = res.factors.C
        self.loss_ = res.loss
        self.loss_terms_ = res.loss_terms
        self.n_iter_ = res.iters
        self.converged_ = res.converged
        self.loss_trace_ = res.loss_trace
        self.alpha_ = cfg.alpha
        self.diagnostics_ = res.diagnostics
        self.n_features_in_ = p
        return self

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y, **fit_params).concentrations_

    def transform(self, X):
        """Concentrations of new curves with the sources held fixed."""
        X = self._check_new(X)
        return project(X, self.components_, self._projection_config(), seed=self.random_state)


class LCNMFEnsemble(_Base):
    """Ensemble of LCNMF runs from different random initializations.

    Runs use seeds ``random_state .. random_state + n_runs - 1``.  The
    low-loss cluster is retained and its sources are aligned within sectors.

    Parameters
    ----------
    n_components, alpha, beta, max_iter, tol, eps, projection_max_iter
        As for :class:`LCNMF`.
    n_runs : int, default=100
    cluster : {"threshold", "auto_gap"}, default="threshold"
    threshold : float, default=0.01
        Loss cut-off in ``threshold`` mode.
    random_state : int, default=0
        First seed.
    n_jobs : int or None, default=1

    Attributes
    ----------
    losses_ : ndarray of shape (n_runs,)
        Converged losses, NaN for failed runs.
    retained_ : ndarray
        Indices of retained runs.
    solutions_ : list of SolverResult
        Retained, aligned solutions.
    permutations_ : list of ndarray
    medoid_index_ : int
        Position in ``solutions_`` of the medoid.
    components_ : ndarray
        Sources of the medoid solution.
    ensemble_ : SolutionEnsemble
    """

    def __init__(self, n_components=3, *, n_runs=100, alpha=3e-10, beta=1.0, max_iter=5000, tol=1e-8,
                 eps=1e-12, cluster="threshold", threshold=0.01, random_state=0, n_jobs=1,
                 projection_max_iter=2000):
        self.n_components = n_components
        self.n_runs = n_runs
        self.alpha = alpha
        self.beta = beta
        self.max_iter = max_iter
        self.tol = tol
        self.eps = eps
        self.cluster = cluster
        self.threshold = threshold
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.projection_max_iter = projection_max_iter

    def fit(self, X, y=None, *, constraints: ConstraintSet | None = None):
        X = _check_X(X)
        n, p = X.shape
        K = int(self.n_components)
        if constraints is None:
            constraints = ConstraintSet.with_unit_sources(K, p)
        base = 0 if self.random_state is None else int(self.random_state)
        cfg = self._solver_config(X, constraints, base)
        losses, results = run_ensemble(X, constraints, cfg, int(self.n_runs), base,
                                       n_components=K, n_jobs=self.n_jobs)
        A = constraints.A if constraints.A is not None else np.eye(K)
        ens = build_ensemble(losses, results, A, self.cluster, self.threshold)
        self.ensemble_ = ens
        self.losses_ = losses
        self.retained_ = ens.retained
        self.solutions_ = ens.solutions
        self.permutations_ = ens.alignment
        self.medoid_index_ = ens.medoid_index
        self.components_ = ens.medoid_S
        self.alpha_ = cfg.alpha
        self.n_features_in_ = p
        return self

    def transform(self, X):
        """Concentrations of new curves on the medoid sources."""
        X = self._check_new(X)
        return project(X, self.components_, self._projection_config(), seed=self.random_state)

    def project_all(self, X) -> list[np.ndarray]:
        """Concentrations of new curves under every retained solution."""
        X = self._check_new(X)
        S_list = [r.factors.S for r in self.solutions_]
        seed = 0 if self.random_state is None else int(self.random_state)
        return project_ensemble(X, S_list, self._projection_config(), seed=seed, n_jobs=self.n_jobs)
