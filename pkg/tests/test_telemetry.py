import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from maglev_conveyor.line import Event
from maglev_conveyor.telemetry import (
    CSV_HEADER,
    RunSummary,
    TelemetryRecord,
    read_trajectory_csv,
    summarize,
    trajectory_csv,
    zscore_anomalies,
)


def rolling_z(x, window):
    """Plain-loop reference for the z-score of each point against its preceding window."""
    out = {}
    for i in range(window, len(x)):
        prev = x[i - window:i]
        mu = sum(prev) / window
        sd = math.sqrt(sum((p - mu) ** 2 for p in prev) / window)
        out[i] = abs(x[i] - mu) / sd if sd > 0 else (math.inf if x[i] != prev[0] else 0.0)
    return out


def test_constant_series_not_flagged():
    assert zscore_anomalies([3.0] * 50, 5, 1.0) == []


def test_infinite_threshold_flags_nothing():
    x = [0.0] * 10 + [100.0] + [0.0] * 10
    assert zscore_anomalies(x, 5, math.inf) == []


def test_injected_spike_is_the_only_flag():
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(400)
    # rescale the noise to mean 0 and population std 1 exactly
    x = (x - x.mean()) / x.std()
    spike = 250
    x[spike] = x[spike - 50:spike].mean() + 10 * x[spike - 50:spike].std()
    flags = zscore_anomalies(x, 50, 5.0)
    assert flags == [spike]
    # the spike lands 10 sigma out by construction
    assert rolling_z(list(x), 50)[spike] == pytest.approx(10.0, rel=1e-9)


def test_zero_spread_window_flags_any_change():
    assert zscore_anomalies([1.0, 1.0, 1.0, 1.0 + 1e-9, 1.0], 3, 1e6) == [3]


def test_window_longer_than_series():
    assert zscore_anomalies([1.0, 2.0], 5, 1.0) == []


def test_bad_arguments():
    with pytest.raises(ValueError):
        zscore_anomalies([1.0, 2.0, 3.0], 1, 1.0)
    with pytest.raises(ValueError):
        zscore_anomalies([1.0, 2.0, 3.0], 2, 0.0)


@settings(max_examples=200)
@given(
    x=st.lists(st.integers(-20, 20), min_size=3, max_size=40),
    window=st.integers(2, 6),
    threshold=st.sampled_from([0.5, 1.5, 2.5, 3.5]),
)
def test_matches_reference_loop(x, window, threshold):
    x = [float(v) for v in x]
    z = rolling_z(x, window)
    assume(all(abs(v - threshold) > 1e-9 for v in z.values()))
    expected = [i for i, v in z.items() if v > threshold]
    assert zscore_anomalies(x, window, threshold) == expected


@settings(max_examples=200)
@given(
    x=st.lists(st.integers(-20, 20), min_size=3, max_size=40),
    window=st.integers(2, 6),
    threshold=st.sampled_from([0.5, 1.5, 2.5]),
    a=st.sampled_from([0.25, 3.0, 17.0]),
    b=st.integers(-1000, 1000),
)
def test_affine_invariance(x, window, threshold, a, b):
    x = [float(v) for v in x]
    z = rolling_z(x, window)
    assume(all(abs(v - threshold) > 1e-6 for v in z.values()))
    y = [a * v + b for v in x]
    assert zscore_anomalies(y, window, threshold) == zscore_anomalies(x, window, threshold)


def records(n, dt, lev=1.0, iq=0.0, mover="m", t0=0.0, x0=0.0, v=0.0):
    return [TelemetryRecord(t0 + k * dt, mover, x0 + v * k * dt, v, 1e-3, lev, iq) for k in range(n)]


def test_empty_summary():
    s = summarize([], [])
    assert s == RunSummary()
    assert s.to_json() == {
        "jobs_completed": 0, "throughput": 0.0, "distance_per_mover": {}, "energy_proxy": 0.0,
        "headway_interventions": 0,
    }


def test_energy_proxy_rectangle_rule():
    # 10 s at 1 ms cadence: 10001 samples, 10000 rectangles of 1 A^2 * 1 ms
    s = summarize(records(10_001, 1e-3), [])
    assert s.energy_proxy == pytest.approx(10.0, rel=1e-9)


def test_throughput():
    events = [Event(t, "completion", "m") for t in (10.0, 20.0, 30.0)] + [Event(5.0, "arrival", "m")]
    s = summarize(records(61, 1.0), events)
    assert s.jobs_completed == 3
    assert s.throughput == pytest.approx(0.05)


def test_headway_count_and_dict_events():
    events = [{"kind": "headway", "t": 1.0}, {"kind": "headway", "t": 2.0}, {"kind": "completion", "t": 3.0}]
    s = summarize(records(5, 1.0), events, duration=10.0)
    assert s.headway_interventions == 2
    assert s.throughput == pytest.approx(0.1)


def test_counters_additive_over_concatenation():
    first = records(101, 0.01, v=1.0)
    second = records(101, 0.01, v=-2.0, t0=1.0, x0=1.0)
    e1 = [Event(0.5, "completion", "m"), Event(0.6, "headway", "m")]
    e2 = [Event(1.5, "completion", "m")]
    a, b = summarize(first, e1), summarize(second, e2)
    whole = summarize(first + second[1:], e1 + e2)
    assert whole.jobs_completed == a.jobs_completed + b.jobs_completed
    assert whole.headway_interventions == a.headway_interventions + b.headway_interventions
    assert whole.distance_per_mover["m"] == pytest.approx(a.distance_per_mover["m"] + b.distance_per_mover["m"])


def test_csv_round_trip_and_format():
    recs = [
        TelemetryRecord(0.0, "m1", 0.0, 0.0, 1e-3, 3.9513, 0.0, ""),
        TelemetryRecord(0.001, "m1", 1e-6, 0.002, 1e-3, 3.9513, 0.04, "arrival;completion"),
    ]
    text = trajectory_csv(recs)
    lines = text.split("\n")
    assert lines[0] == ",".join(CSV_HEADER)
    assert text.endswith("\n")
    assert read_trajectory_csv(text) == recs


def test_csv_rejects_non_finite():
    with pytest.raises(ValueError):
        trajectory_csv([TelemetryRecord(0.0, "m", math.nan, 0.0, 1e-3, 0.0, 0.0)])
