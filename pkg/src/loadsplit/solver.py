"""Penalized LCNMF: loss, gradients and modified multiplicative updates.

The loss is

    ||X - C S||_F^2 + alpha ||B C A - Y||_F^2 + beta ||F S D - Z||_F^2

and each factor is updated by multiplying it with the ratio of the negative
to the positive part of its gradient.  All the matrices involved are
non-negative, so the updates keep the factors non-negative and entries that
reach zero stay there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_float_matrix, check_factors, check_finite, check_nonnegative
from .constraints import ConstraintSet
from .exceptions import Diverged

EPS_FLOOR = 1e-12
DEFAULT_WINDOW = 10


@dataclass
class FactorPair:
    """Concentrations ``C`` (n, K) and sources ``S`` (K, p)."""

    C: np.ndarray
    S: np.ndarray

    def permuted(self, perm) -> "FactorPair":
        perm = np.asarray(perm)
        return FactorPair(self.C[:, perm], self.S[perm])

    def copy(self) -> "FactorPair":
        return FactorPair(self.C.copy(), self.S.copy())


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 3e-10
    beta: float = 1.0
    max_iters: int = 5000
    rel_tol: float = 1e-8
    eps_floor: float = EPS_FLOOR
    seed: int = 0
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.max_iters < 1 or self.window < 1:
            raise ValueError("max_iters and window must be positive")
        if not self.rel_tol > 0 or not self.eps_floor > 0:
            raise ValueError("rel_tol and eps_floor must be positive")


@dataclass
class SolverResult:
    factors: FactorPair
    loss_trace: np.ndarray
    converged: bool
    iters: int
    loss_terms: tuple
    loss: float
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict)


class _Problem:
    """Precomputes the constant products of one penalized problem."""

    def __init__(self, X, constraints: ConstraintSet | None, alpha: float, beta: float):
        self.X = X
        cons = constraints or ConstraintSet()
        self.alpha = float(alpha) if cons.has_monthly else 0.0
        self.beta = float(beta) if cons.has_source else 0.0
        self.monthly = cons.has_monthly
        self.source = cons.has_source
        if self.monthly:
            self.B = np.asarray(cons.B, dtype=np.float64)
            self.A = np.asarray(cons.A, dtype=np.float64)
            self.Y = np.asarray(cons.Y, dtype=np.float64)
            self.AAt = self.A @ self.A.T
            self.BtYAt = self.B.T @ self.Y @ self.A.T
        if self.source:
            self.F = np.asarray(cons.F, dtype=np.float64)
            self.D = np.asarray(cons.D, dtype=np.float64)
            self.Z = np.asarray(cons.Z, dtype=np.float64)
            self.FtF = self.F.T @ self.F
            self.DDt = self.D @ self.D.T
            self.FtZDt = self.F.T @ self.Z @ self.D.T

    def terms(self, C, S):
        fit = float(np.sum((self.X - C @ S) ** 2))
        pen_c = float(np.sum((self.B @ C @ self.A - self.Y) ** 2)) if self.monthly else 0.0
        pen_s = float(np.sum((self.F @ S @ self.D - self.Z) ** 2)) if self.source else 0.0
        return fit, pen_c, pen_s

    def total(self, terms):
        fit, pen_c, pen_s = terms
        return fit + self.alpha * pen_c + self.beta * pen_s

    def _s_parts(self, C, S):
        num = C.T @ self.X
        den = (C.T @ C) @ S
        if self.beta:
            num = num + self.beta * self.FtZDt
            den = den + self.beta * (self.FtF @ S @ self.DDt)
        return num, den

    def _c_parts(self, C, S):
        num = self.X @ S.T
        den = C @ (S @ S.T)
        if self.alpha:
            num = num + self.alpha * self.BtYAt
            # B' (B C A) A' without forming the n x n matrix B'B
            den = den + self.alpha * (self.B.T @ ((self.B @ C) @ self.AAt))
        return num, den

    def update_S(self, C, S, eps):
        num, den = self._s_parts(C, S)
        return S * num / (den + eps)

    def update_C(self, C, S, eps):
        num, den = self._c_parts(C, S)
        return C * num / (den + eps)

    def gradients(self, C, S):
        num_c, den_c = self._c_parts(C, S)
        num_s, den_s = self._s_parts(C, S)
        return 2.0 * (den_c - num_c), 2.0 * (den_s - num_s)


def _prepare(X, C, S, constraints):
    X, C, S = check_factors(X, C, S)
    for name, arr in (("X", X), ("C", C), ("S", S)):
        check_finite(arr, name)
    if constraints is not None:
        constraints.validate(X.shape[0], C.shape[1], X.shape[1])
    return X, C, S


def loss(X, C, S, constraints: ConstraintSet | None = None, alpha: float = 0.0, beta: float = 0.0):
    """Return ``(total, fit, penalty_C, penalty_S)``."""
    X, C, S = _prepare(X, C, S, constraints)
    prob = _Problem(X, constraints, alpha, beta)
    terms = prob.terms(C, S)
    return (prob.total(terms),) + terms


def update_S(X, C, S, constraints=None, beta: float = 0.0, eps_floor: float = EPS_FLOOR):
    X, C, S = _prepare(X, C, S, constraints)
    return _Problem(X, constraints, 0.0, beta).update_S(C, S, eps_floor)


def update_C(X, C, S, constraints=None, alpha: float = 0.0, eps_floor: float = EPS_FLOOR):
    X, C, S = _prepare(X, C, S, constraints)
    return _Problem(X, constraints, alpha, 0.0).update_C(C, S, eps_floor)


def gradients(X, C, S, constraints=None, alpha: float = 0.0, beta: float = 0.0):
    """Analytic gradients ``(dL/dC, dL/dS)`` of the penalized loss."""
    X, C, S = _prepare(X, C, S, constraints)
    return _Problem(X, constraints, alpha, beta).gradients(C, S)


def init_factors(n: int, K: int, p: int, seed=None) -> FactorPair:
    """Flat sources and concentrations drawn uniformly on the simplex.

    Normalized i.i.d. unit exponentials are uniform on the simplex.
    """
    if min(n, K, p) < 1:
        raise ValueError("n, K and p must be positive")
    rng = np.random.default_rng(seed)
    C = rng.standard_exponential((n, K))
    C /= C.sum(axis=1, keepdims=True)
    return FactorPair(C, np.full((K, p), 1.0 / p))


def balanced_alpha(X, B) -> float:
    """Penalty weight putting the monthly term on the curvature scale of the fit term.

    The fit term's curvature in one concentration is about ``||X_i||^2`` and
    the monthly term's about the squared energy of a month, so the ratio of
    their averages makes both terms comparably stiff.
    """
    X = as_float_matrix(X, "X")
    B = as_float_matrix(B, "B")
    return float(np.mean(np.sum(X**2, axis=1)) / (np.sum(B**2) / B.shape[0]))


def diagnostics(factors: FactorPair, constraints: ConstraintSet | None) -> dict:
    """Constraint-compliance figures of a solution."""
    C, S = factors.C, factors.S
    out = {
        "max_source_rowsum_dev": float(np.max(np.abs(S.sum(axis=1) - 1.0))),
        "max_concentration_rowsum_dev": float(np.max(np.abs(C.sum(axis=1) - 1.0))),
    }
    if constraints is not None and constraints.has_monthly:
        Y = np.asarray(constraints.Y)
        resid = constraints.B @ C @ constraints.A - Y
        out["monthly_rel_error"] = float(np.linalg.norm(resid) / np.linalg.norm(Y))
    return out


def fit(X, constraints: ConstraintSet | None, config: SolverConfig, init: FactorPair) -> SolverResult:
    """Run the modified multiplicative updates from ``init``.

    Each iteration updates S then C and records the total loss.  The run stops
    once the loss has dropped by less than ``rel_tol`` (relative) over the last
    ``window`` iterations, or after ``max_iters`` iterations.

    Raises
    ------
    Diverged
        If the loss becomes non-finite.
    """
    X, C, S = _prepare(X, init.C, init.S, constraints)
    check_nonnegative(X, "X")
    check_nonnegative(C, "C")
    check_nonnegative(S, "S")
    C = C.copy()
    S = S.copy()
    prob = _Problem(X, constraints, config.alpha, config.beta)
    eps = config.eps_floor
    w = config.window
    # overflow surfaces as a non-finite loss and is reported as Diverged
    with np.errstate(over="ignore", invalid="ignore"):
        # losses below this are indistinguishable from rounding noise in ||X - CS||^2
        floor = 1e-16 * max(float(np.sum(X**2)), 1e-300)

        terms = prob.terms(C, S)
        trace = [prob.total(terms)]
        converged = False
        it = 0
        for it in range(1, config.max_iters + 1):
            S = prob.update_S(C, S, eps)
            C = prob.update_C(C, S, eps)
            terms = prob.terms(C, S)
            total = prob.total(terms)
            if not np.isfinite(total):
                raise Diverged(f"loss became non-finite at iteration {it}")
            trace.append(total)
            if it >= w:
                ref = trace[-w - 1]
                if ref - total <= config.rel_tol * max(ref, floor):
                    converged = True
                    break

    factors = FactorPair(C, S)
    return SolverResult(
        factors=factors,
        loss_trace=np.asarray(trace),
        converged=converged,
        iters=it,
        loss_terms=terms,
        loss=trace[-1],
        seed=config.seed,
        diagnostics=diagnostics(factors, constraints),
    )
