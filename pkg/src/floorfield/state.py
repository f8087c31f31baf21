"""Mutable world state of one run and its event log."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .core import AgentParams, Coord, SimConfig, StaticField, build_static_field
from .decision import NeighbourTable, build_neighbour_table
from .scheduler import ActivationQueue

ENTRY, MOVE, CONFLICT, BLOCK, EXIT = "entry", "move", "conflict", "block", "exit"
EVENT_KINDS = (ENTRY, MOVE, CONFLICT, BLOCK, EXIT)

# time, kind, agent, group, x1, x2
Record = Tuple[float, str, int, str, int, int]


@dataclass
class Bond:
    holder: int
    target_cell: int
    created_at: float


@dataclass
class AgentState:
    id: int
    params: AgentParams
    position: int
    t_in: float
    bond: Optional[Bond] = None


@dataclass
class EventLog:
    """Time-ordered records plus the room occupancy step function N(t).

    ``occupancy_series`` holds ``(time, N)`` pairs; N takes the value from
    that time until the next pair.
    """

    records: List[Record] = field(default_factory=list)
    occupancy_series: List[Tuple[float, int]] = field(default_factory=list)

    @classmethod
    def from_records(cls, records: List[Record]) -> "EventLog":
        log = cls(list(records))
        n = 0
        for t, kind, *_ in log.records:
            if kind == ENTRY:
                n += 1
            elif kind == EXIT:
                n -= 1
            else:
                continue
            if n < 0:
                raise ValueError(f"occupancy drops below zero at t={t}")
            log.occupancy_series.append((t, n))
        return log

    def extend(self, records: List[Record]) -> None:
        n = self.occupancy_series[-1][1] if self.occupancy_series else 0
        for rec in records:
            self.records.append(rec)
            kind = rec[1]
            if kind == ENTRY:
                n += 1
                self.occupancy_series.append((rec[0], n))
            elif kind == EXIT:
                n -= 1
                self.occupancy_series.append((rec[0], n))


class WorldState:
    """Lattice occupancy, live agents, activation queue and generator of one run."""

    def __init__(self, config: SimConfig, rng: Optional[random.Random] = None):
        self.config = config
        self.geometry = config.geometry
        self.field: StaticField = build_static_field(self.geometry)
        self.table: NeighbourTable = build_neighbour_table(self.geometry, self.field, config.k_S, config.k_D)
        self.occupancy: List[int] = [-1] * self.geometry.n_cells
        self.agents: Dict[int, AgentState] = {}
        self.queue = ActivationQueue(config.h)
        self.rng = rng if rng is not None else random.Random(config.seed)
        self.step_index = 0
        self.exit_index = self.geometry.index(self.geometry.exit_cell)
        self.entrance_indices = [self.geometry.index(c) for c in self.geometry.entrances()]
        # holders of bonds, keyed by bonded cell index, in creation order
        self.bonds_on: Dict[int, List[int]] = {}
        # group indices of arrivals still waiting for a free entrance cell
        self.pending_arrivals: List[int] = []
        self.n_entered = 0
        self.n_exited = 0
        self.n_bonds_created = 0
        self.next_id = 0
        self.log = EventLog()
        # (id of the agent passing the doorway, time it clears it)
        self.door: Optional[Tuple[int, float]] = None

    @property
    def time(self) -> float:
        return self.step_index * self.config.h

    def coord(self, index: int) -> Coord:
        return self.geometry.coord(index)

    def agent_at(self, cell: Coord) -> Optional[int]:
        a = self.occupancy[self.geometry.index(cell)]
        return None if a < 0 else a

    def place(self, params: AgentParams, cell: Coord, t_in: float, first_activation: Optional[float] = None) -> int:
        """Put a new agent on an empty cell; first activation defaults to ``t_in + tau``."""
        idx = self.geometry.index(cell)
        if not self.geometry.contains(cell) or self.occupancy[idx] >= 0:
            raise ValueError(f"cell {cell} is not an empty lattice cell")
        aid = self.next_id
        self.next_id += 1
        self.agents[aid] = AgentState(aid, params, idx, t_in)
        self.occupancy[idx] = aid
        self.queue.add(aid, t_in + params.tau if first_activation is None else first_activation, params.tau)
        self.n_entered += 1
        return aid

    def block_door(self, agent: int, until: float) -> None:
        self.door = (agent, until)
        self.occupancy[self.exit_index] = agent

    def release_door(self) -> Optional[float]:
        """Free the doorway if its occupant's next activation falls in the current step."""
        if self.door is None:
            return None
        _, until = self.door
        if self.queue.step_index(until) > self.step_index:
            return None
        self.door = None
        self.occupancy[self.exit_index] = -1
        return until

    def set_bond(self, agent: int, cell: int, t: float) -> None:
        self.drop_bond(agent)
        st = self.agents[agent]
        st.bond = Bond(agent, cell, t)
        self.bonds_on.setdefault(cell, []).append(agent)
        self.n_bonds_created += 1

    def drop_bond(self, agent: int) -> None:
        st = self.agents[agent]
        if st.bond is None:
            return
        holders = self.bonds_on.get(st.bond.target_cell)
        if holders is not None:
            holders.remove(agent)
            if not holders:
                del self.bonds_on[st.bond.target_cell]
        st.bond = None

    def check_consistency(self) -> None:
        assert self.n_entered - self.n_exited == len(self.agents), "agent conservation violated"
        seen = 0
        for idx, a in enumerate(self.occupancy):
            if self.door is not None and idx == self.exit_index:
                assert a == self.door[0] and a not in self.agents, "doorway state inconsistent"
                continue
            if a >= 0:
                seen += 1
                assert self.agents[a].position == idx, f"agent {a} not where the lattice says"
        assert seen == len(self.agents), "occupancy and agent registry disagree"
