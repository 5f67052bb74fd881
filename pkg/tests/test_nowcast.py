from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import nnls

from loadsplit.exceptions import InsufficientMonths, MissingMonth, RankDeficientSources, ShapeMismatch
from loadsplit.nowcast import (MonthlyEstimate, ProjectionConfig, check_sources, estimates_matrix,
                               monthly_consumption, monthly_matrix, one_year_lag, pearson, project,
                               project_ensemble, residuals, score)

TIGHT = ProjectionConfig()
MU_ONLY = ProjectionConfig(max_iters=20_000, rel_tol=1e-12, polish=False)


def sources(seed, K=3, p=24):
    return np.random.default_rng(seed).dirichlet(np.ones(p), K)


def test_pure_source_rows():
    S = sources(0)
    C0 = project(S, S, TIGHT, seed=0)
    np.testing.assert_allclose(C0, np.eye(3), atol=1e-6)


def test_planted_weights():
    S = sources(1)
    W = np.random.default_rng(2).dirichlet(np.ones(3), 20)
    np.testing.assert_allclose(project(W @ S, S, TIGHT, seed=3), W, atol=1e-6)


def test_two_source_grid_oracle():
    S = sources(4, K=2)
    t_true = np.array([0.123456, 0.5, 0.98765])
    X0 = np.outer(t_true, S[0]) + np.outer(1 - t_true, S[1])
    C0 = project(X0, S, TIGHT, seed=0)
    t = np.arange(0, 1 + 1e-12, 1e-4)
    for i in range(3):
        grid = np.outer(t, S[0]) + np.outer(1 - t, S[1])
        losses = np.sum((grid - X0[i]) ** 2, axis=1)
        best = t[np.argmin(losses)]
        assert abs(C0[i, 0] - best) <= 1e-4 and abs(C0[i, 1] - (1 - best)) <= 1e-4
        assert np.sum((X0[i] - C0[i] @ S) ** 2) <= losses.min() + 1e-12


def test_matches_nnls_off_the_simplex():
    rng = np.random.default_rng(5)
    S = sources(5, K=3, p=8)
    X0 = rng.uniform(0, 0.3, (6, 8))
    C0 = project(X0, S, TIGHT, seed=0)
    for i in range(6):
        ref, _ = nnls(S.T, X0[i])
        assert np.sum((X0[i] - C0[i] @ S) ** 2) == pytest.approx(np.sum((X0[i] - ref @ S) ** 2), abs=1e-10)


@pytest.mark.parametrize("cfg", [MU_ONLY, ProjectionConfig()], ids=["mu", "polished"])
def test_initializations_agree(cfg):
    S = sources(6)
    X0 = np.random.default_rng(7).dirichlet(np.ones(24), 15)
    Cs = [project(X0, S, cfg, seed=s) for s in range(10)]
    losses = [np.sum((X0 - C @ S) ** 2) for C in Cs]
    assert max(losses) - min(losses) <= 1e-8
    assert max(np.max(np.abs(C - Cs[0])) for C in Cs) <= 1e-4


def test_mu_only_close_to_polished():
    S = sources(11)
    X0 = np.random.default_rng(12).dirichlet(np.ones(24), 10)
    a = project(X0, S, MU_ONLY, seed=0)
    b = project(X0, S, seed=0)
    assert np.all(a >= 0)
    assert np.sum((X0 - a @ S) ** 2) >= np.sum((X0 - b @ S) ** 2) - 1e-15
    np.testing.assert_allclose(a, b, atol=1e-4)


def test_explicit_init_and_checks():
    S = sources(8)
    init = np.full((2, 3), 1 / 3)
    C0 = project(S[:2], S, TIGHT, init=init)
    np.testing.assert_allclose(C0, np.eye(3)[:2], atol=1e-6)
    with pytest.raises(RankDeficientSources):
        project(S, np.vstack([S[:2], S[0]]))
    with pytest.raises(ValueError):
        project(-S, S)
    with pytest.raises(Exception):
        project(S[:, :5], S)
    np.testing.assert_array_equal(check_sources(S), S)


def test_residuals_flag_out_of_cone():
    S = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])
    X0 = np.array([[0.25, 0.5, 0.25], [1.0, 0.0, 0.0]])
    C0 = project(X0, S, TIGHT, seed=0)
    r = residuals(X0, C0, S)
    assert r[0] < 1e-6 and r[1] > 0.1


def test_project_ensemble_order_and_parallel():
    S_list = [sources(s) for s in range(3)]
    X0 = np.random.default_rng(9).dirichlet(np.ones(24), 5)
    a = project_ensemble(X0, S_list, seed=4)
    b = project_ensemble(X0, S_list, seed=4, n_jobs=2)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    np.testing.assert_array_equal(a[1], project(X0, S_list[1], seed=5))


def test_monthly_single_day():
    C0 = np.array([[1.0, 0.0, 0.0]])
    A = np.array([[1, 0], [0, 1], [0, 1]])
    est = monthly_consumption([C0], [100.0], A, [date(2023, 1, 5)], ["h", "s"])
    assert [(e.sector, e.month, e.energy) for e in est] == [("h", "2023-01", 100.0), ("s", "2023-01", 0.0)]
    assert est[0].q025 == est[0].q975 == 100.0


def test_monthly_hand_product():
    dates = [date(2023, 1, 31), date(2023, 2, 1), date(2023, 2, 2)]
    E = np.array([10.0, 20.0, 30.0])
    C0 = np.array([[0.5, 0.5], [1.0, 0.0], [0.25, 0.75]])
    A = np.eye(2)
    months, Z = monthly_matrix([C0], E, A, dates)
    assert months == ["2023-01", "2023-02"]
    # Jan: 10*(0.5, 0.5); Feb: 20*(1, 0) + 30*(0.25, 0.75)
    np.testing.assert_allclose(Z[0], [[5, 5], [27.5, 22.5]])


def test_monthly_sum_identity():
    rng = np.random.default_rng(10)
    dates = [date(2023, 1, 1) + timedelta(days=i) for i in range(70)]
    E = rng.uniform(1, 2, 70)
    C0s = [rng.uniform(0.1, 1, (70, 3)) for _ in range(4)]
    A = np.array([[1, 0], [1, 0], [0, 1]])
    est = monthly_consumption(C0s, E, A, dates)
    months, _, M = estimates_matrix(est)
    totals = np.array([E[[d.strftime("%Y-%m") == mo for d in dates]] for mo in months], dtype=object)
    rowsum = np.mean([C.sum(axis=1) for C in C0s], axis=0)
    for r, mo in enumerate(months):
        mask = np.array([d.strftime("%Y-%m") == mo for d in dates])
        assert M[r].sum() == pytest.approx(np.sum(E[mask] * rowsum[mask]), rel=1e-12)
    assert len(totals) == 3
    assert all(e.q025 <= e.energy <= e.q975 for e in est)


def test_score_perfect_and_affine():
    x = np.array([[1.0, 5.0], [2.0, 3.0], [4.0, 4.0], [3.0, 1.0]])
    lag = x[::-1].copy()
    rows = score(2 * x, x, lag, ["a", "b"])
    assert rows[0]["bss_r"] == pytest.approx(1.0) and rows[1]["bss_r"] == pytest.approx(1.0)
    again = score(-3 + 0.5 * x, 7 * x + 1, lag, ["a", "b"])
    assert [r["bss_r"] for r in again] == pytest.approx([1.0, 1.0])
    assert rows[0]["naive_r"] == pytest.approx(pearson(lag[:, 0], x[:, 0]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=24),
       st.floats(0.1, 10), st.floats(-100, 100))
def test_score_self_and_affine_property(vals, a, b):
    x = np.array(vals)
    if np.ptp(x) < 1e-3 * max(1.0, np.abs(x).max()):
        return
    X = x[:, None]
    r = score(X, X, X)[0]
    assert r["bss_r"] == pytest.approx(1.0, abs=1e-9)
    assert score(a * X + b, X, X)[0]["bss_r"] == pytest.approx(1.0, abs=1e-9)


def test_score_errors_and_list_input():
    x = np.ones((2, 1))
    with pytest.raises(InsufficientMonths):
        score(x, x, x)
    with pytest.raises(ShapeMismatch):
        score(np.ones((3, 1)), np.ones((3, 2)), np.ones((3, 2)))
    est = [MonthlyEstimate("h", f"2023-0{m}", float(m), 0, 0) for m in (1, 2, 3)]
    rows = score(est, np.array([[1.0], [2.0], [3.0]]), np.array([[3.0], [2.0], [1.0]]))
    assert rows[0]["sector"] == "h" and rows[0]["bss_r"] == pytest.approx(1)
    assert rows[0]["naive_r"] == pytest.approx(-1)


def test_one_year_lag():
    lookup = {("h", "2022-01"): 1.0, ("h", "2022-02"): 2.0}
    np.testing.assert_array_equal(one_year_lag(lookup, ["2023-01", "2023-02"], ["h"]), [[1.0], [2.0]])
    with pytest.raises(MissingMonth, match="2022-03"):
        one_year_lag(lookup, ["2023-03"], ["h"])


def test_pearson_constant_is_nan():
    assert np.isnan(pearson([1, 1, 1], [1, 2, 3]))
