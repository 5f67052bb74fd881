from datetime import date, datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadsplit.curves import (CalendarConfig, DayType, GapPolicy, LoadRecord, Season, adjust_losses,
                              build_curves, complete_years, day_type_of, ingest_load, read_holidays,
                              season_of, write_load_csv)
from loadsplit.exceptions import (IncompleteDay, MalformedRow, NegativeLoad, NonMonotonicTime, PeriodMismatch,
                                  ZeroEnergyDay, ZeroTotal)

from conftest import write_load


def day_records(d, loads):
    return [LoadRecord(datetime(d.year, d.month, d.day, h), float(v)) for h, v in enumerate(loads)]


def test_minimal_parse(tmp_path):
    path = write_load(tmp_path / "l.csv", [("2021-01-01T00:00", 30000), ("2021-01-01T01:00", 29000)])
    recs = ingest_load(path)
    assert [r.load for r in recs] == [30000.0, 29000.0]
    assert recs[0].timestamp == datetime(2021, 1, 1, 0)


def test_duplicate_rejected(tmp_path):
    path = write_load(tmp_path / "l.csv", [("2021-01-01T00:00", 1), ("2021-01-01T00:00", 2)])
    with pytest.raises(NonMonotonicTime):
        ingest_load(path, "reject")


def test_duplicate_averaged(tmp_path):
    path = write_load(tmp_path / "l.csv", [("2021-01-01T00:00", 1), ("2021-01-01T01:00", 5),
                                           ("2021-01-01T00:00", 3)])
    recs = ingest_load(path, GapPolicy.INTERPOLATE)
    assert [r.load for r in recs] == [2.0, 5.0]
    assert recs[0].repaired and not recs[1].repaired


def test_unsorted_input_is_sorted(tmp_path):
    path = write_load(tmp_path / "l.csv", [("2021-01-01T02:00", 3), ("2021-01-01T00:00", 1),
                                           ("2021-01-01T01:00", 2)])
    assert [r.load for r in ingest_load(path, "reject")] == [1.0, 2.0, 3.0]


def test_spring_forward_interpolated(tmp_path):
    # 2021-03-28 in Rome: 02:00 local does not exist
    rows = []
    for h in range(24):
        if h == 2:
            continue
        off = "+01:00" if h < 2 else "+02:00"
        rows.append((f"2021-03-28T{h:02d}:00{off}", 100 + 10 * h))
    recs = ingest_load(write_load(tmp_path / "l.csv", rows), "interpolate")
    assert len(recs) == 24
    assert recs[2].timestamp == datetime(2021, 3, 28, 2)
    assert recs[2].load == pytest.approx((110 + 130) / 2)
    assert recs[2].repaired and recs[2].dst
    cm = build_curves(recs)
    assert cm.n == 1 and cm.E[0] == pytest.approx(sum(100 + 10 * h for h in range(24)))


def test_spring_forward_rejected_leaves_gap(tmp_path):
    rows = [(f"2021-03-28T{h:02d}:00{'+01:00' if h < 2 else '+02:00'}", 1) for h in range(24) if h != 2]
    recs = ingest_load(write_load(tmp_path / "l.csv", rows), "reject")
    with pytest.raises(IncompleteDay):
        build_curves(recs)


def test_fall_back_hour_averaged(tmp_path):
    # 2021-10-31 in Rome: 02:00 local happens twice
    rows = []
    for h in range(24):
        if h == 2:
            rows.append(("2021-10-31T02:00+02:00", 50))
            rows.append(("2021-10-31T02:00+01:00", 70))
        else:
            rows.append((f"2021-10-31T{h:02d}:00{'+02:00' if h < 2 else '+01:00'}", 10))
    path = write_load(tmp_path / "l.csv", rows)
    recs = ingest_load(path, "interpolate")
    assert len(recs) == 24 and recs[2].load == 60.0
    with pytest.raises(NonMonotonicTime):
        ingest_load(path, "reject")


def test_gap_interpolation_three_point_toy(tmp_path):
    # hours 0 and 3 known; 1 and 2 filled on the line through them
    path = write_load(tmp_path / "l.csv", [("2021-01-01T00:00", 30), ("2021-01-01T03:00", 60)])
    recs = ingest_load(path)
    assert [r.load for r in recs] == [30.0, 40.0, 50.0, 60.0]


def test_long_gap_not_filled(tmp_path):
    path = write_load(tmp_path / "l.csv", [("2021-01-01T00:00", 30), ("2021-01-01T05:00", 60)])
    assert len(ingest_load(path)) == 2


@pytest.mark.parametrize("rows, exc", [
    ([("2021-01-01T00:00", -1)], NegativeLoad),
    ([("2021-01-01T00:00", "abc")], MalformedRow),
    ([("not-a-date", 1)], MalformedRow),
    ([("2021-01-01T00:30", 1)], MalformedRow),
    ([("2021-01-01T00:00+01:00", 1), ("2021-01-01T01:00", 1)], MalformedRow),
    ([("2021-01-01T00:00", "nan")], MalformedRow),
])
def test_ingest_errors(tmp_path, rows, exc):
    with pytest.raises(exc):
        ingest_load(write_load(tmp_path / "l.csv", rows))


def test_bad_header(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("time,load\n2021-01-01T00:00,1\n")
    with pytest.raises(MalformedRow, match=":1:"):
        ingest_load(p)


def test_error_names_line(tmp_path):
    p = write_load(tmp_path / "l.csv", [("2021-01-01T00:00", 1), ("2021-01-01T01:00", -5)])
    with pytest.raises(NegativeLoad, match=r"l\.csv:3"):
        ingest_load(p)


def test_z_suffix(tmp_path):
    recs = ingest_load(write_load(tmp_path / "l.csv", [("2021-01-01T00:00Z", 1)]))
    assert recs[0].timestamp == datetime(2021, 1, 1, 0)


def test_constant_day():
    cm = build_curves(day_records(date(2021, 1, 4), [1000] * 24))
    np.testing.assert_allclose(cm.X[0], np.full(24, 1 / 24))
    assert cm.E[0] == 24000


def test_arithmetic_day():
    cm = build_curves(day_records(date(2021, 1, 4), [100 * k for k in range(1, 25)]))
    np.testing.assert_allclose(cm.X[0], np.arange(1, 25) / 300, rtol=0, atol=1e-15)
    assert cm.E[0] == 30000


def test_calendar_labels():
    holiday = date(2021, 6, 1)  # a Tuesday
    assert holiday.weekday() == 1
    recs = day_records(date(2021, 7, 15), [1] * 24) + day_records(holiday, [1] * 24)
    cm = build_curves(recs, CalendarConfig.from_dates([holiday]))
    by_date = dict(zip(cm.dates, zip(cm.day_types, cm.seasons)))
    assert by_date[date(2021, 7, 15)][1] is Season.SUMMER
    assert by_date[holiday][0] is DayType.HOLIDAY


@pytest.mark.parametrize("d, expected", [
    (date(2021, 1, 4), DayType.MONDAY),
    (date(2021, 1, 5), DayType.WORKING_DAY),
    (date(2021, 1, 8), DayType.WORKING_DAY),
    (date(2021, 1, 9), DayType.SATURDAY),
    (date(2021, 1, 10), DayType.HOLIDAY),
])
def test_day_types(d, expected):
    assert day_type_of(d) is expected


@pytest.mark.parametrize("month, season", [(1, Season.WINTER), (3, Season.WINTER), (4, Season.SPRING),
                                           (6, Season.SPRING), (7, Season.SUMMER), (9, Season.SUMMER),
                                           (10, Season.FALL), (12, Season.FALL)])
def test_seasons(month, season):
    assert season_of(date(2022, month, 10)) is season


def test_p25_appends_next_midnight():
    d0, d1 = date(2021, 1, 4), date(2021, 1, 5)
    recs = day_records(d0, [1] * 24) + day_records(d1, [2] + [1] * 23)
    cm = build_curves(recs, p=25)
    assert cm.X.shape == (2, 25)
    np.testing.assert_allclose(cm.X[0], np.r_[np.ones(24), 2] / 26)
    # the last day repeats its own 23:00 value
    np.testing.assert_allclose(cm.X[1], np.r_[2, np.ones(24)] / 26)
    assert cm.E.tolist() == [24.0, 25.0]


def test_incomplete_and_zero_days():
    with pytest.raises(IncompleteDay):
        build_curves(day_records(date(2021, 1, 4), [1] * 23))
    with pytest.raises(ZeroEnergyDay):
        build_curves(day_records(date(2021, 1, 4), [0] * 24))


loads_st = st.lists(st.floats(0.1, 1e5, allow_nan=False), min_size=24, max_size=24)


@settings(max_examples=50, deadline=None)
@given(loads=loads_st, lam=st.floats(1e-3, 1e3))
def test_scaling_leaves_shapes(loads, lam):
    d = date(2021, 5, 5)
    a = build_curves(day_records(d, loads))
    b = build_curves(day_records(d, [lam * v for v in loads]))
    np.testing.assert_allclose(a.X, b.X, rtol=1e-12)
    assert b.E[0] == pytest.approx(lam * a.E[0], rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(loads=loads_st)
def test_shape_invariants(loads):
    cm = build_curves(day_records(date(2021, 5, 5), loads))
    assert abs(cm.X[0].sum() - 1) <= 1e-9
    np.testing.assert_allclose(cm.X[0] * cm.E[0], loads, rtol=1e-6)


def test_calendar_labels_are_pure():
    days = [date(2021, 1, 1) + timedelta(days=i) for i in range(30)]
    hol = frozenset([date(2021, 1, 6)])
    assert [day_type_of(d, hol) for d in days] == [day_type_of(d, hol) for d in days]


def test_adjust_losses_examples():
    np.testing.assert_allclose(adjust_losses(np.full(4, 110.0), [100, 200, 100]), [110, 220, 110])
    np.testing.assert_allclose(adjust_losses([3.0, 1.0], [1.0, 3.0]), [1, 3])
    np.testing.assert_allclose(adjust_losses([10.0], [1, 1, 2]), [2.5, 2.5, 5.0])
    np.testing.assert_allclose(adjust_losses([10.0], [1, 1, 2], "none"), [1, 1, 2])


def test_adjust_losses_table_and_errors():
    w = adjust_losses([50.0, 50.0], [[1, 1], [1, 1]], years=[2021, 2022], asc_years=[2021, 2022])
    np.testing.assert_allclose(w, [50, 50])
    with pytest.raises(PeriodMismatch):
        adjust_losses([1.0], [[1, 1]], years=[2021], asc_years=[2022])
    with pytest.raises(PeriodMismatch):
        adjust_losses([1.0], [[1, 1]], asc_years=[2021, 2022])
    with pytest.raises(ZeroTotal):
        adjust_losses([1.0], [0, 0])
    with pytest.raises(ValueError):
        adjust_losses([1.0], [1, 1], "subtract")


@settings(max_examples=50, deadline=None)
@given(E=st.lists(st.floats(1, 1e6), min_size=1, max_size=20),
       asc=st.lists(st.floats(1e-3, 1e6), min_size=1, max_size=5))
def test_adjust_losses_sums_to_energy(E, asc):
    w = adjust_losses(E, asc)
    assert abs(w.sum() - sum(E)) <= 1e-9 * sum(E)


def test_complete_years():
    days = [date(2021, 1, 1) + timedelta(days=i) for i in range(365)]
    assert complete_years(days) == [2021]
    with pytest.raises(PeriodMismatch):
        complete_years(days[:-1])


def test_read_holidays(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("# bank holidays\n2021-01-06\n\n2021-12-25  # christmas\n")
    assert read_holidays(p).holidays == {date(2021, 1, 6), date(2021, 12, 25)}
    p.write_text("2021-13-01\n")
    with pytest.raises(MalformedRow):
        read_holidays(p)


def test_write_load_roundtrip(tmp_path):
    stamps = [datetime(2021, 1, 1, h) for h in range(24)]
    write_load_csv(tmp_path / "l.csv", stamps, np.arange(24) + 0.5)
    recs = ingest_load(tmp_path / "l.csv", "reject")
    assert [r.load for r in recs] == list(np.arange(24) + 0.5)
