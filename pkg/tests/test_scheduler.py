import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from floorfield.scheduler import SQRT2, ActivationQueue, MoveKind


def due_step(times, h=0.1, horizon=50):
    """Step at which each agent (id = position in ``times``) first becomes due."""
    q = ActivationQueue(h)
    for i, t in enumerate(times):
        q.add(i, t, 1.0)
    found = {}
    for k in range(horizon):
        for a in q.agents_due(k):
            found[a] = k
            q.remove(a)
    return found


def test_interval_membership():
    assert due_step([0.25]) == {0: 2}


def test_half_open_upper_boundary():
    assert due_step([0.30]) == {0: 3}
    # 0.1 + 0.2 is the float just above 0.3
    assert due_step([0.1 + 0.2]) == {0: 3}


def test_due_order_by_time_then_id():
    q = ActivationQueue(0.1)
    q.add(5, 0.27, 0.25)
    q.add(3, 0.21, 0.25)
    q.add(1, 0.27, 0.4)
    assert q.agents_due(0) == [] and q.agents_due(1) == []
    assert q.agents_due(2) == [3, 1, 5]


@pytest.mark.parametrize("tau,kind,expected", [
    (0.25, MoveKind.STRAIGHT, 1.25),
    (0.25, MoveKind.DIAGONAL, 1.0 + 0.25 * math.sqrt(2)),
    (0.4, MoveKind.NONE, 1.4),
])
def test_reschedule(tau, kind, expected):
    q = ActivationQueue(0.1)
    q.add(0, 1.0, tau)
    assert q.reschedule(0, kind) == pytest.approx(expected, abs=1e-12)


def test_reschedule_unknown_agent():
    with pytest.raises(KeyError):
        ActivationQueue(0.1).reschedule(9, MoveKind.NONE)


def test_each_agent_due_once_per_step():
    q = ActivationQueue(0.1)
    q.add(0, 0.25, 0.25)
    assert q.agents_due(2) == [0]
    q.reschedule(0, MoveKind.STRAIGHT)
    assert q.agents_due(2) == []
    assert q.agents_due(3) == []
    assert q.agents_due(4) == []
    assert q.agents_due(5) == [0]


def test_skipping_a_nonempty_step_is_an_error():
    q = ActivationQueue(0.1)
    q.add(0, 0.25, 0.25)
    with pytest.raises(RuntimeError):
        q.agents_due(3)


def brute_force_coactivation(steps, taus=(Fraction(1, 4), Fraction(2, 5)), h=Fraction(1, 10)):
    """Steps in which agents of every period are due, by exact enumeration of n * tau."""
    due = []
    for tau in taus:
        hit = set()
        n = 1
        while n * tau < steps * h:
            hit.add(math.floor(n * tau / h))
            n += 1
        due.append(hit)
    return set.intersection(*due)


def queue_coactivation(steps):
    q = ActivationQueue(0.1)
    q.add(0, 0.25, 0.25)
    q.add(1, 0.4, 0.4)
    both = set()
    for k in range(steps):
        due = q.agents_due(k)
        if len(due) == 2:
            both.add(k)
        for a in due:
            q.reschedule(a, MoveKind.STRAIGHT)
    return both


def test_coactivation_matches_enumeration():
    expected = brute_force_coactivation(1000)
    assert len(expected) > 0
    assert 20 in expected  # both due at t = 2.0
    assert queue_coactivation(1000) == expected


@given(st.lists(st.sampled_from(list(MoveKind)), min_size=1, max_size=200),
       st.floats(0.1, 1.0), st.floats(0.0, 5.0))
def test_partition_and_exact_times(moves, tau, t0):
    q = ActivationQueue(0.1)
    q.add(0, t0, tau)
    n_straight = n_diag = 0
    k = 0
    seen_steps = []
    for kind in moves:
        while True:
            due = q.agents_due(k)
            k += 1
            if due:
                break
        assert due == [0]
        t = q.time_of(0)
        seen_steps.append(k - 1)
        assert (k - 1) * 0.1 - 1e-9 <= t < k * 0.1 + 1e-9
        q.reschedule(0, kind)
        if kind is MoveKind.DIAGONAL:
            n_diag += 1
        else:
            n_straight += 1
        expected = t0 + n_straight * tau
        if n_diag:
            expected += n_diag * tau * SQRT2
        assert q.time_of(0) == expected
    assert len(seen_steps) == len(set(seen_steps))
