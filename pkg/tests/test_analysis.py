import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floorfield.analysis import (
    OccupancyIntegral, TravelRecord, curve_summary, fit_groups, fit_piecewise,
    steady_state_summary, travel_records,
)
from floorfield.state import ENTRY, EXIT, MOVE, EventLog


def log_of(events):
    """events: (time, kind, agent); group 'g' and dummy cells."""
    recs = sorted(((t, k, a, "g", 17 if k == ENTRY else 0, 0) for t, k, a in events),
                  key=lambda r: r[0])
    return EventLog.from_records(recs)


def rec(n, tt, group="g", t_in=0.0):
    return TravelRecord(0, group, t_in, t_in + tt, tt, n)


def test_mean_occupancy_constant():
    ev = [(0.0, ENTRY, a) for a in range(5)] + [(10.0, EXIT, 0)]
    [r] = travel_records(log_of(ev))
    assert r.tt == 10.0
    assert r.n_mean == pytest.approx(5.0, abs=1e-12)


def test_mean_occupancy_step():
    ev = [(0.0, ENTRY, a) for a in range(4)] + [(5.0, ENTRY, 4), (5.0, ENTRY, 5), (10.0, EXIT, 0)]
    [r] = travel_records(log_of(ev))
    assert r.n_mean == pytest.approx(5.0, abs=1e-12)


def test_occupancy_counts_the_agent_itself():
    [r] = travel_records(log_of([(1.0, ENTRY, 0), (3.0, EXIT, 0)]))
    assert r.n_mean == pytest.approx(1.0)


def test_warmup_keeps_entries_at_or_after_cutoff():
    ev = [(499.9, ENTRY, 0), (500.0, ENTRY, 1), (500.1, ENTRY, 2),
          (505.0, EXIT, 0), (506.0, EXIT, 1), (507.0, EXIT, 2)]
    kept = travel_records(log_of(ev), warmup=500.0)
    assert sorted(r.agent for r in kept) == [1, 2]


def test_agents_still_inside_have_no_record():
    ev = [(0.0, ENTRY, 0), (0.0, ENTRY, 1), (4.0, EXIT, 1)]
    assert [r.agent for r in travel_records(log_of(ev))] == [1]


def test_inconsistent_logs_rejected():
    with pytest.raises(ValueError):
        travel_records(EventLog([(1.0, EXIT, 0, "g", 0, 0)], []))
    with pytest.raises(ValueError):
        travel_records(EventLog([(1.0, ENTRY, 0, "g", 17, 0), (2.0, ENTRY, 0, "g", 17, 0)], []))


def exact_mean(events, t_in, t_out):
    """Independent oracle: exact rational integral of N(t) over [t_in, t_out]."""
    points = sorted({t for t, _, _ in events} | {t_in, t_out})
    total = Fraction(0)
    for a, b in zip(points, points[1:]):
        if a < t_in or b > t_out:
            continue
        n = sum(1 if k == ENTRY else -1 for t, k, _ in events if t <= a)
        total += n * (Fraction(b) - Fraction(a))
    return float(total / (Fraction(t_out) - Fraction(t_in)))


def random_log(rng):
    events, inside, nxt, t = [], [], 0, 0.0
    for _ in range(rng.randint(2, 60)):
        t += rng.choice([0.0, rng.random() * 3])
        if inside and rng.random() < 0.45:
            events.append((t, EXIT, inside.pop(rng.randrange(len(inside)))))
        else:
            events.append((t, ENTRY, nxt))
            inside.append(nxt)
            nxt += 1
    return events


def test_occupancy_mean_matches_exact_integral():
    rng = random.Random(2024)
    checked = 0
    for _ in range(100):
        events = random_log(rng)
        for r in travel_records(log_of(events)):
            if r.tt > 0:
                assert r.n_mean == pytest.approx(exact_mean(events, r.t_in, r.t_out), abs=1e-9)
                checked += 1
    assert checked > 100


def test_integral_of_step_function():
    occ = OccupancyIntegral([(0.0, 1), (2.0, 3), (2.0, 4), (5.0, 0)])
    assert occ.integral(0.0, 5.0) == pytest.approx(2 + 12)
    assert occ.integral(-1.0, 1.0) == pytest.approx(1.0)
    assert occ.mean(1.0, 3.0) == pytest.approx(2.5)


NS = (2.0, 5.0, 10.0, 20.0, 40.0)


def test_fit_recovers_exact_model():
    records = [rec(n, 4.5 + 0.8 * max(n - 7.0, 0.0)) for n in NS]
    fit = fit_piecewise(records, room_length_m=7.2)
    assert fit.intercept == pytest.approx(4.5, abs=1e-9)
    assert fit.slope == pytest.approx(0.8, abs=1e-9)
    assert fit.v0 == pytest.approx(1.6, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.status == "full" and fit.sample_count == 5


def test_fit_without_congested_records_is_partial():
    fit = fit_piecewise([rec(n, t) for n, t in [(1, 4.0), (3, 5.0), (6.9, 6.0), (7.0, 5.0)]])
    assert fit.status == "free-flow-only" and not fit.slope_estimable
    assert math.isnan(fit.slope)
    assert fit.intercept == pytest.approx(5.0)


def test_fit_only_congested_records():
    fit = fit_piecewise([rec(n, 2.0 + n) for n in (10.0, 20.0, 30.0)])
    assert fit.status == "congested-only"
    assert fit.slope == pytest.approx(1.0)
    assert fit.intercept == pytest.approx(9.0)


def test_fit_needs_three_records():
    with pytest.raises(ValueError):
        fit_piecewise([rec(1, 1.0), rec(9, 3.0)])


def noisy_records(scale, seed=3):
    rng = np.random.default_rng(seed)
    n = rng.uniform(0, 40, 200)
    noise = rng.normal(size=200)
    return [rec(float(a), float(4.5 + 0.8 * max(a - 7, 0) + scale * e)) for a, e in zip(n, noise)]


def test_residuals_orthogonal_to_regressors():
    records = noisy_records(2.0)
    fit = fit_piecewise(records)
    x = np.array([max(r.n_mean - 7.0, 0.0) for r in records])
    res = np.array([r.tt for r in records]) - (fit.intercept + fit.slope * x)
    assert abs(res.sum()) < 1e-8
    assert abs((res * x).sum()) < 1e-7


def test_r_squared_falls_with_noise():
    r2 = [fit_piecewise(noisy_records(s)).r_squared for s in (0.0, 0.5, 2.0, 8.0, 32.0)]
    assert r2[0] == pytest.approx(1.0)
    assert all(a > b for a, b in zip(r2, r2[1:]))


def test_fit_groups_skips_small_groups():
    records = [rec(n, 5.0 + n, "a") for n in NS] + [rec(1.0, 3.0, "b")]
    assert set(fit_groups(records)) == {"a"}


def test_curve_summary_hand_example():
    records = [rec(1.0, 4.0, "a"), rec(4.9, 6.0, "a"), rec(3.0, 8.0, "b"),
               rec(12.0, 20.0, "a")]
    s = curve_summary(records, bin_width=5.0)
    assert [(b.lo, b.hi, b.count) for b in s.bins] == [(0.0, 5.0, 3), (5.0, 10.0, 0), (10.0, 15.0, 1)]
    first = s.bins[0]
    assert first.group_mean == {"a": 5.0, "b": 8.0}
    assert first.quantiles[0.5] == 6.0
    assert math.isnan(s.bins[2].group_mean["b"])
    assert s.group_curve("a") == [(0.0, 5.0, 2), (10.0, 20.0, 1)]


def test_curve_summary_rejects_empty_input():
    with pytest.raises(ValueError):
        curve_summary([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 60), st.floats(0.1, 100)), min_size=1, max_size=80))
def test_quantiles_monotone_in_level(pairs):
    s = curve_summary([rec(n, t) for n, t in pairs])
    assert sum(b.count for b in s.bins) == len(pairs)
    for b in s.bins:
        if b.count:
            qs = [b.quantiles[q] for q in s.quantile_levels]
            assert qs == sorted(qs)


def test_steady_state_summary():
    records = [rec(1, t, "a", t_in=600.0) for t in (1.0, 2.0, 3.0, 4.0, 5.0)] + [rec(1, 99.0, "a", t_in=10.0)]
    stats = steady_state_summary(records, warmup=500.0)["a"]
    assert stats["count"] == 5 and stats["median"] == 3.0 and stats["max"] == 5.0
