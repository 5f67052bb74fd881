import math
import warnings
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from loadsplit.constraints import (ConstraintSet, build_A, build_B, build_Y, month_index, months_between,
                                   msi_months, read_asc, read_msi, write_asc, write_msi)
from loadsplit.exceptions import (DimensionMismatch, EmptyMonth, MalformedRow, MissingMonth, MultiAssignment,
                                  NotSurjective, PeriodMismatch, ZeroIndicatorColumn)

# 2 x 2 IPF fixed point for indicators ((1,1),(1,3)), columns (60,40), rows (50,50):
# Y = [[a, 50-a], [60-a, a-10]] keeps the odds ratio 3, so a^2 - 160a + 4500 = 0.
IPF_A = 80 - math.sqrt(1900)


def naive_ipf(Y, cols, rows, sweeps=5000):
    Y = [list(map(float, r)) for r in Y]
    for _ in range(sweeps):
        for j in range(len(cols)):
            s = sum(Y[i][j] for i in range(len(rows)))
            for i in range(len(rows)):
                Y[i][j] *= cols[j] / s
        for i in range(len(rows)):
            s = sum(Y[i])
            Y[i] = [v * rows[i] / s for v in Y[i]]
    return np.array(Y)


def test_build_B_two_months():
    dates = [date(2021, 1, 30), date(2021, 1, 31), date(2021, 2, 1), date(2021, 2, 2)]
    np.testing.assert_array_equal(build_B([1, 2, 3, 4], dates), [[1, 2, 0, 0], [0, 0, 3, 4]])


def test_build_B_single_month():
    dates = [date(2021, 3, d) for d in (1, 2, 3)]
    np.testing.assert_array_equal(build_B([5, 6, 7], dates), [[5, 6, 7]])


def test_build_B_row_sums_are_monthly_totals(rng):
    dates = [date(2021, 1, 1) + timedelta(days=i) for i in range(100)]
    E = rng.uniform(1, 10, 100)
    B = build_B(E, dates)
    totals = {}
    for d, e in zip(dates, E):
        totals[(d.year, d.month)] = totals.get((d.year, d.month), 0.0) + e
    np.testing.assert_allclose(B @ np.ones(100), [totals[k] for k in sorted(totals)], rtol=1e-13)
    assert ((B != 0).sum(axis=0) == 1).all()


def test_build_B_errors():
    with pytest.raises(EmptyMonth):
        build_B([1, 1], [date(2021, 1, 1), date(2021, 3, 1)])
    with pytest.raises(DimensionMismatch):
        build_B([1], [date(2021, 1, 1), date(2021, 1, 2)])
    with pytest.raises(ValueError):
        build_B([1, 1], [date(2021, 1, 2), date(2021, 1, 1)])


def test_month_helpers():
    assert months_between("2021-11", "2022-02") == ["2021-11", "2021-12", "2022-01", "2022-02"]
    months, idx = month_index([date(2021, 12, 31), date(2022, 1, 1)])
    assert months == ["2021-12", "2022-01"] and idx.tolist() == [0, 1]


def test_build_A_published_example():
    # sources 1 -> sector 1, 2,3 -> sector 2, 4,5 -> sector 3 (0-based here)
    A = build_A([0, 1, 1, 2, 2], K=5)
    expected = [[1, 0, 0], [0, 1, 0], [0, 1, 0], [0, 0, 1], [0, 0, 1]]
    np.testing.assert_array_equal(A, expected)
    np.testing.assert_array_equal(build_A({"a": [0], "b": [1, 2], "c": [3, 4]}, 5), expected)


def test_build_A_identity_and_count():
    np.testing.assert_array_equal(build_A([0, 1, 2], 3), np.eye(3))
    assert build_A({"h": [0, 1], "i": [2], "s": [3, 4]}, 5).sum() == 5


def test_build_A_errors():
    with pytest.raises(NotSurjective):
        build_A([0, 0, 2], 3, g=3)
    with pytest.raises(NotSurjective):
        build_A({"a": [0, 1], "b": []}, 2)
    with pytest.raises(MultiAssignment):
        build_A({"a": [0, 1], "b": [1]}, 2)
    with pytest.raises(MultiAssignment):
        build_A({"a": [0], "b": [1]}, 3)
    with pytest.raises(DimensionMismatch):
        build_A({"a": [0], "b": [5]}, 2)


def test_build_Y_ipf_oracle():
    Y = build_Y([[1, 1], [1, 3]], [60, 40], [50, 50])
    expected = np.array([[IPF_A, 50 - IPF_A], [60 - IPF_A, IPF_A - 10]])
    np.testing.assert_allclose(Y, expected, atol=1e-9)
    np.testing.assert_allclose(Y, naive_ipf([[1, 1], [1, 3]], [60, 40], [50, 50]), atol=1e-9)


def test_build_Y_single_month():
    np.testing.assert_allclose(build_Y([[3, 1, 2]], [10, 20, 30], [60]), [[10, 20, 30]], rtol=1e-15)


def test_build_Y_fixed_point():
    Y0 = np.array([[10.0, 20.0], [30.0, 40.0]])
    Y = build_Y(Y0 / 7, Y0.sum(axis=0), Y0.sum(axis=1))
    np.testing.assert_allclose(Y, Y0, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(msi=arrays(np.float64, (4, 3), elements=st.floats(0.1, 10)),
       col=arrays(np.float64, (3,), elements=st.floats(1, 100)),
       row_w=arrays(np.float64, (4,), elements=st.floats(0.1, 1)))
def test_build_Y_margins(msi, col, row_w):
    rows = row_w / row_w.sum() * col.sum()
    Y = build_Y(msi, col, rows)
    assert np.all(np.abs(Y.sum(axis=1) - rows) <= 1e-6 * rows)
    assert np.all(np.abs(Y.sum(axis=0) - col) <= 1e-6 * col)


def test_build_Y_errors():
    with pytest.raises(ZeroIndicatorColumn):
        build_Y([[0, 1], [0, 1]], [1, 1], [1, 1])
    with pytest.raises(MissingMonth):
        build_Y([[np.nan, 1], [1, 1]], [1, 1], [1, 1])
    with pytest.raises(DimensionMismatch):
        build_Y([[1, 1]], [1, 1, 1], [1])


def test_build_Y_warns_when_not_converged():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        build_Y([[1, 1], [1, 3]], [60, 40], [50, 50], max_iter=1)
    assert any(issubclass(x.category, RuntimeWarning) for x in w)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_simplex_C_gives_monthly_totals(seed):
    rng = np.random.default_rng(seed)
    dates = [date(2021, 1, 20) + timedelta(days=i) for i in range(40)]
    E = rng.uniform(1, 5, 40)
    C = rng.dirichlet(np.ones(4), 40)
    B = build_B(E, dates)
    A = build_A([0, 1, 1, 0], 4)
    np.testing.assert_allclose((B @ C @ A).sum(axis=1), B.sum(axis=1), rtol=1e-12)


def test_constraint_set_validate():
    cs = ConstraintSet.with_unit_sources(3, 24)
    assert cs.has_source and not cs.has_monthly
    cs.validate(10, 3, 24)
    with pytest.raises(DimensionMismatch):
        cs.validate(10, 4, 24)
    with pytest.raises(DimensionMismatch):
        ConstraintSet(B=np.ones((1, 5))).validate(5, 3, 24)
    good = ConstraintSet(np.ones((2, 5)), np.ones((3, 1)), np.ones((2, 1)))
    good.validate(5, 3, 24)
    with pytest.raises(DimensionMismatch):
        good.validate(6, 3, 24)


def test_msi_asc_roundtrip(tmp_path):
    sectors, months = ["h", "i"], ["2021-01", "2021-02"]
    vals = np.array([[1.5, 2.0], [3.0, 4.25]])
    write_msi(tmp_path / "m.csv", sectors, months, vals)
    np.testing.assert_array_equal(read_msi(tmp_path / "m.csv", sectors, months), vals)
    assert msi_months(tmp_path / "m.csv") == set(months)
    with pytest.raises(MissingMonth, match="2021-03"):
        read_msi(tmp_path / "m.csv", sectors, months + ["2021-03"])
    write_asc(tmp_path / "a.csv", sectors, [2021], np.array([[10.0, 20.0]]))
    np.testing.assert_array_equal(read_asc(tmp_path / "a.csv", sectors, [2021]), [[10, 20]])
    with pytest.raises(PeriodMismatch):
        read_asc(tmp_path / "a.csv", sectors, [2022])


def test_msi_bad_rows(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("sector,month,value\nh,2021-01,-1\n")
    with pytest.raises(MalformedRow):
        read_msi(p, ["h"], ["2021-01"])
    p.write_text("sector,month\n")
    with pytest.raises(MalformedRow):
        read_msi(p, ["h"], ["2021-01"])
