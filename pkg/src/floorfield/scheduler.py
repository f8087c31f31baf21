"""Adaptive time-span activation queue.

The time line is cut into intervals ``[k h, (k + 1) h)``; algorithm step ``k``
activates the agents whose desired activation time falls into interval ``k``.

An agent's desired time is kept as ``t0 + n tau + m tau sqrt(2)`` with integer
counts of straight (or stay) and diagonal periods, so that a straight-moving
agent is activated at exactly ``t0 + n tau`` with no accumulated rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List

SQRT2 = math.sqrt(2.0)

# relative slack when mapping a time to its interval, absorbs representation
# error (0.3 / 0.1 == 2.9999999999999996)
_STEP_EPS = 1e-9


class MoveKind(Enum):
    NONE = "none"
    STRAIGHT = "straight"
    DIAGONAL = "diagonal"


@dataclass
class _Clock:
    t0: float
    tau: float
    n_straight: int = 0
    n_diagonal: int = 0

    @property
    def time(self) -> float:
        t = self.t0 + self.n_straight * self.tau
        if self.n_diagonal:
            t += self.n_diagonal * self.tau * SQRT2
        return t


class ActivationQueue:
    """Bucketed queue of desired activation times, one bucket per step."""

    def __init__(self, h: float):
        if h <= 0:
            raise ValueError("interval length must be positive")
        self.h = h
        self.current_step = 0
        self._clocks: Dict[int, _Clock] = {}
        self._step_of: Dict[int, int] = {}
        self._buckets: Dict[int, List[int]] = {}
        # bucket of current_step already handed out
        self._consumed = False

    def __len__(self) -> int:
        return len(self._clocks)

    def __contains__(self, agent: int) -> bool:
        return agent in self._clocks

    def step_index(self, t: float) -> int:
        return math.floor(t / self.h + _STEP_EPS)

    def time_of(self, agent: int) -> float:
        return self._clocks[agent].time

    def _file(self, agent: int) -> None:
        old = self._step_of.get(agent)
        if old is not None and agent in self._buckets.get(old, ()):
            self._buckets[old].remove(agent)
        k = self.step_index(self._clocks[agent].time)
        # never file into an interval that is already being (or was) processed
        if k < self.current_step or (k == self.current_step and self._consumed):
            k = self.current_step + 1
        self._step_of[agent] = k
        self._buckets.setdefault(k, []).append(agent)

    def add(self, agent: int, first_time: float, tau: float) -> None:
        if agent in self._clocks:
            raise KeyError(f"agent {agent} already scheduled")
        self._clocks[agent] = _Clock(first_time, tau)
        self._file(agent)

    def remove(self, agent: int) -> None:
        if agent not in self._clocks:
            raise KeyError(f"unknown agent {agent}")
        del self._clocks[agent]
        k = self._step_of.pop(agent)
        bucket = self._buckets.get(k)
        if bucket is not None and agent in bucket:
            bucket.remove(agent)

    def agents_due(self, k: int) -> List[int]:
        """Agents with desired time in ``[k h, (k + 1) h)``, by time then id.

        Consumes the bucket; steps must be visited in non-decreasing order.
        """
        if k < self.current_step:
            raise ValueError(f"step {k} already passed (current {self.current_step})")
        if k > self.current_step:
            # skipped steps must hold nobody
            for j in range(self.current_step, k):
                if self._buckets.get(j) and not (j == self.current_step and self._consumed):
                    raise RuntimeError(f"step {j} skipped with pending activations")
            self.current_step = k
            self._consumed = False
        elif self._consumed:
            return []
        due = self._buckets.pop(k, [])
        self._consumed = True
        clocks = self._clocks
        due.sort(key=lambda a: (clocks[a].time, a))
        return due

    def reschedule(self, agent: int, move_kind: MoveKind) -> float:
        """Advance ``agent`` by one period (``tau sqrt 2`` after a diagonal move)."""
        clock = self._clocks.get(agent)
        if clock is None:
            raise KeyError(f"unknown agent {agent}")
        if move_kind is MoveKind.DIAGONAL:
            clock.n_diagonal += 1
        else:
            clock.n_straight += 1
        self._file(agent)
        return clock.time

    def pending(self) -> Dict[int, float]:
        return {a: c.time for a, c in self._clocks.items()}
