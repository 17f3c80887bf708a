from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import auc_oracle, event_oracle

from resilience.errors import ConfigError, DataError
from resilience.events import (
    TABLE_COLUMNS, EventFeatureTable, OutageEvent, attach_weather_features, auc_customer_hours,
    compute_metrics, extract_events, filter_significant, gap_bins, group_pre_events,
)
from resilience.timegrid import TimeGrid

T0 = datetime(2021, 6, 1, tzinfo=timezone.utc)


def spans(series, magnitude=50):
    return [(e.start_index, e.end_index) for e in extract_events(np.asarray(series, float), T0, magnitude)]


def test_pre_events_group_under_three_hours():
    x = np.zeros(40)
    x[0] = x[10] = 5  # 2.5 h apart
    assert group_pre_events(x) == [(0, 11)]
    x[10], x[16] = 0, 5  # 4 h apart
    assert group_pre_events(x) == [(0, 1), (16, 17)]
    assert group_pre_events(np.zeros(5)) == []


def test_exactly_three_hours_apart_splits():
    x = np.zeros(20)
    x[0] = x[12] = 1
    assert group_pre_events(x) == [(0, 1), (12, 13)]
    assert gap_bins(3) == 12


def test_small_peak_is_not_an_event():
    assert spans([0, 10, 45, 30, 0]) == []


def test_one_excursion():
    events = extract_events(np.array([0, 60, 200, 60, 0.0]), T0)
    (e,) = events
    assert (e.start_index, e.end_index) == (1, 4)
    np.testing.assert_array_equal(e.curve, [60, 200, 60])
    assert e.start == T0 + timedelta(minutes=15) and e.end == T0 + timedelta(hours=1)
    assert not e.censored


def test_equality_with_threshold_counts_as_below():
    assert spans([0, 50, 51, 50, 0]) == [(2, 3)]


def test_censored_at_series_end():
    (e,) = extract_events(np.array([0, 10, 80, 90.0]), T0)
    assert e.censored and e.end_index == 4
    (e,) = extract_events(np.array([90, 10, 0.0]), T0)
    assert e.left_censored


def test_close_excursions_merge_and_far_ones_split():
    x = np.zeros(60)
    x[5:8] = 100
    x[8:12] = 20  # 1 h below threshold, still active
    x[12:14] = 100
    assert spans(x) == [(5, 14)]
    x[12:14] = 20
    x[8:25] = 20  # 17 bins below threshold inside one pre-event
    x[25:27] = 100
    assert spans(x) == [(5, 8), (25, 27)]


def test_auc_examples():
    assert auc_customer_hours([100, 100, 100, 100]) == 100.0
    e = compute_metrics(OutageEvent(0, 1, T0, T0, np.array([0.0])), 10)
    assert e.auc_customer_hours == 0 and e.peak_customers_out == 0


def test_normalised_peak():
    e = compute_metrics(OutageEvent(0, 2, T0, T0, np.array([60.0, 50_000.0])), 2_000_000)
    assert e.norm_customers_out == pytest.approx(0.025, rel=1e-15)


def test_cumulative_counts_positive_increments():
    e = compute_metrics(OutageEvent(0, 5, T0, T0, np.array([60.0, 100, 70, 120, 55])), 1000)
    assert e.cumulative_customers_out == 60 + 40 + 50
    e = compute_metrics(OutageEvent(0, 5, T0, T0, np.array([60.0, 100, 70, 120, 55])), 1000, "cumulative")
    assert e.norm_customers_out == pytest.approx(0.15)


def test_non_positive_county_total_is_config_error():
    with pytest.raises(ConfigError):
        compute_metrics(OutageEvent(0, 1, T0, T0, np.array([60.0])), 0)


def weather_grid(gust, temp, precip):
    n = len(gust)
    series = {"wind_gust": np.asarray(gust, float), "air_temp": np.asarray(temp, float),
              "precip_occ": np.asarray(precip, float)}
    return TimeGrid(T0, n, series)


def test_weather_features():
    g = weather_grid([5, 10, 35, 20, 50], [60, 61, 70, 65, 40], [0, 0, 0, 0, 1])
    e = attach_weather_features(OutageEvent(1, 4, T0, T0, np.ones(3)), g)
    assert (e.peak_wind_gust, e.peak_air_temp, e.precip_flag) == (35, 70, 0)
    e = attach_weather_features(OutageEvent(4, 5, T0, T0, np.ones(1)), g, temperature="min")
    assert (e.peak_wind_gust, e.peak_air_temp, e.precip_flag) == (50, 40, 1)


def test_uncovered_event_is_data_error():
    g = weather_grid([1, 2], [1, 2], [0, 0])
    with pytest.raises(DataError, match="does not cover"):
        attach_weather_features(OutageEvent(1, 4, T0, T0 + timedelta(hours=1), np.ones(3)), g)


def small_table(n=4):
    rng = np.random.default_rng(0)
    return EventFeatureTable(np.arange(n), rng.uniform(10, 40, n), rng.uniform(40, 90, n),
                             rng.integers(0, 2, n), rng.uniform(1, 1e4, n), rng.uniform(0, 0.1, n))


def test_table_csv_has_exact_columns_and_round_trips(tmp_path):
    t = small_table()
    t.to_csv(tmp_path / "t.csv")
    header = (tmp_path / "t.csv").read_text().splitlines()[0].split(",")
    assert tuple(header) == TABLE_COLUMNS
    back = EventFeatureTable.from_csv(tmp_path / "t.csv")
    for c in TABLE_COLUMNS:
        np.testing.assert_array_equal(back[c], t[c])


def test_table_rejects_missing_cells():
    t = small_table()
    with pytest.raises(DataError):
        EventFeatureTable(t.event_id, t.peak_wind_gust, t.peak_air_temp, t.precip_flag,
                          np.r_[np.nan, t.auc_customer_hours[1:]], t.norm_customers_out)


series_strategy = st.lists(st.sampled_from([0, 0, 0, 5, 30, 50, 51, 120, 400]), min_size=1, max_size=120)


@settings(max_examples=200, deadline=None)
@given(series_strategy)
def test_events_match_crossing_oracle(series):
    assert spans(series) == event_oracle(series)


@settings(max_examples=100, deadline=None)
@given(series_strategy)
def test_event_invariants(series):
    x = np.asarray(series, float)
    events = extract_events(x, T0)
    for a, b in zip(events, events[1:]):
        assert a.end_index < b.start_index
    for e in events:
        assert e.start < e.end
        compute_metrics(e, 10_000)
        assert e.peak_customers_out > 50
        assert e.auc_customer_hours == pytest.approx(auc_oracle(e.curve), rel=1e-12)
        if not e.censored:
            assert x[e.end_index] <= 50


@settings(max_examples=100, deadline=None)
@given(series_strategy)
def test_removing_a_minor_pre_event_changes_nothing(series):
    x = np.asarray(series, float)
    before = spans(x)
    # Append a below-threshold pre-event far from everything else.
    padded = np.r_[x, np.zeros(12), [20.0, 30.0], np.zeros(12)]
    assert spans(padded) == before


def test_extract_is_filter_over_grouping():
    x = np.zeros(50)
    x[3:6], x[20:23], x[30] = [10, 90, 70], [5, 200, 5], 30
    direct = extract_events(x, T0)
    staged = filter_significant(group_pre_events(x), x, T0)
    assert [(e.start_index, e.end_index) for e in direct] == [(e.start_index, e.end_index) for e in staged]
    assert len(direct) == 2
