"""One algorithm step: target choice, bonds, conflicts with friction, commits, inflow.

Random draws are taken from ``world.rng`` in this fixed order within a step:

1. one uniform per due agent (in due order) for its target cell;
2. per contested cell, in ascending cell index and wave by wave: one uniform
   for the friction test and one for the uniform winner, both only when two or
   more contenders share the highest aggressiveness;
3. inflow: uniforms for the Poisson count, then one per arrival for its group,
   then one per placement for its entrance cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .decision import choose_index
from .scheduler import MoveKind
from .state import BLOCK, CONFLICT, ENTRY, EXIT, MOVE, Record, WorldState


@dataclass(frozen=True)
class BoundaryConfig:
    """Open boundary: Poisson arrivals at rate ``inflow_alpha`` onto a uniformly
    chosen free entrance cell; arrivals finding no free cell wait in FIFO order."""

    inflow_alpha: float

    def __post_init__(self):
        if not self.inflow_alpha >= 0:
            raise ValueError("inflow_alpha must be non-negative")


def resolve_conflict(contenders: Sequence[int], gammas: Sequence[float], mu: float, rng) -> Optional[int]:
    """Pick the agent that enters the contested cell, or None when friction blocks.

    The highest aggressiveness always wins. Only when several contenders share
    the top value ``G`` does friction act: nobody moves with probability
    ``mu (1 - G)``, otherwise one of them is chosen uniformly.
    """
    if not contenders:
        raise ValueError("conflict without contenders")
    if len(contenders) == 1:
        return contenders[0]
    top = max(gammas)
    best = [c for c, g in zip(contenders, gammas) if g == top]
    if len(best) == 1:
        return best[0]
    if rng.random() < mu * (1.0 - top):
        return None
    return best[min(int(rng.random() * len(best)), len(best) - 1)]


def poisson_draw(rng, mean: float) -> int:
    """Poisson variate by multiplying uniforms (fine for the small per-step means used here)."""
    if mean <= 0:
        return 0
    limit = math.exp(-mean)
    n = 0
    p = rng.random()
    while p > limit:
        n += 1
        p *= rng.random()
    return n


def _move_kind(world: WorldState, src: int, dst: int) -> MoveKind:
    if src == dst:
        return MoveKind.NONE
    a1, a2 = world.coord(src)
    b1, b2 = world.coord(dst)
    return MoveKind.DIAGONAL if (a1 - b1) * (a2 - b2) != 0 else MoveKind.STRAIGHT


def _follow_bonds(world: WorldState, vacated, origin, wave, free_since) -> None:
    """Queue the holders of bonds to freshly vacated cells as contenders for them."""
    agents = world.agents
    for src, t_move in vacated:
        holders = world.bonds_on.pop(src, None)
        if not holders:
            continue
        contenders = []
        for a in holders:
            # the blocking agent moved: every bond to this cell ends here
            agents[a].bond = None
            if a not in origin:
                contenders.append(a)
        if contenders:
            # one arbitration pool with any same-step movers targeting the cell
            wave.setdefault(src, []).extend(contenders)
            free_since[src] = t_move


def step(world: WorldState, due: Sequence[int]) -> List[Record]:
    """Advance ``world`` by the current step; returns this step's records in time order."""
    cfg = world.config
    rng = world.rng
    occ = world.occupancy
    agents = world.agents
    table = world.table
    queue = world.queue
    exit_idx = world.exit_index
    k_O = cfg.k_O
    records: List[Tuple[float, int, Record]] = []
    # clock sums and entry stamps (k h) may disagree by an ulp at step boundaries
    t_start = world.step_index * cfg.h

    def emit(t: float, kind: str, aid: int, cell: int) -> None:
        t = max(t, t_start)
        x1, x2 = world.coord(cell)
        records.append((t, len(records), (t, kind, aid, agents[aid].params.group_label, x1, x2)))

    # a doorway whose occupant's next activation falls in this step is free
    # for everyone acting in this step
    released = world.release_door()

    # phase A: intents against the start-of-step occupancy
    times: Dict[int, float] = {}
    targets: Dict[int, int] = {}
    for aid in due:
        st = agents[aid]
        t = queue.time_of(aid)
        times[aid] = t
        # a bond lasts at most until the holder's next activation
        world.drop_bond(aid)
        tgt = choose_index(table[st.position], occ, st.position, k_O, rng.random())
        if tgt == st.position:
            continue
        if occ[tgt] >= 0:
            world.set_bond(aid, tgt, t)
        else:
            targets[aid] = tgt

    wave: Dict[int, List[int]] = {}
    for aid, tgt in targets.items():
        wave.setdefault(tgt, []).append(aid)
    # time at which each contested cell becomes enterable
    free_since: Dict[int, float] = {}

    # phase B: resolve per cell, then let bonded agents follow into vacated cells
    origin: Dict[int, int] = {}
    mu = cfg.mu
    if released is not None:
        _follow_bonds(world, [(exit_idx, released)], origin, wave, free_since)
    while wave:
        vacated: List[Tuple[int, float]] = []
        for cell in sorted(wave):
            contenders = wave[cell]
            t_free = free_since.get(cell, -math.inf)
            when = {
                a: times[a] if a in targets else max(times.get(a, t_free), t_free)
                for a in contenders
            }
            winner = resolve_conflict(contenders, [agents[a].params.gamma for a in contenders], mu, rng)
            if len(contenders) > 1:
                if winner is None:
                    for a in contenders:
                        emit(when[a], BLOCK, a, cell)
                else:
                    emit(when[winner], CONFLICT, winner, cell)
            if winner is None:
                continue
            st = agents[winner]
            src = st.position
            origin[winner] = src
            world.drop_bond(winner)
            occ[src] = -1
            t_move = when[winner]
            if cell == exit_idx:
                emit(t_move, EXIT, winner, cell)
                if cfg.exit_dwell:
                    # the doorway stays blocked until the leaver's next activation
                    if winner in times:
                        until = queue.reschedule(winner, _move_kind(world, src, cell))
                    else:
                        until = queue.time_of(winner)
                    world.block_door(winner, until)
                del agents[winner]
                queue.remove(winner)
                world.n_exited += 1
            else:
                occ[cell] = winner
                st.position = cell
                emit(t_move, MOVE, winner, cell)
            vacated.append((src, t_move))

        wave = {}
        _follow_bonds(world, vacated, origin, wave, free_since)

    assert len(set(occ) - {-1}) == sum(1 for a in occ if a >= 0), "two agents on one cell"

    # reschedule every due agent still in the room
    for aid in due:
        if aid not in agents:
            continue
        src = origin.get(aid)
        kind = MoveKind.NONE if src is None else _move_kind(world, src, agents[aid].position)
        queue.reschedule(aid, kind)

    records.sort(key=lambda r: (r[0], r[1]))
    out = [r[2] for r in records]
    out.extend(inject_inflow(world, BoundaryConfig(cfg.inflow_alpha)))
    assert world.n_entered - world.n_exited == len(agents), "agent conservation violated"
    return out


def inject_inflow(world: WorldState, boundary: BoundaryConfig) -> List[Record]:
    """Arrivals during the current interval ``[k h, (k + 1) h)``.

    New agents are placed after the step's moves are committed and enter at
    ``(k + 1) h``; their first activation is one own period later.
    """
    cfg = world.config
    rng = world.rng
    n = poisson_draw(rng, boundary.inflow_alpha * cfg.h)
    if n:
        cumulative = []
        acc = 0.0
        for _, w in cfg.group_mix:
            acc += w
            cumulative.append(acc)
        for _ in range(n):
            u = rng.random() * acc
            g = next((i for i, c in enumerate(cumulative) if u < c), len(cumulative) - 1)
            world.pending_arrivals.append(g)

    out: List[Record] = []
    if not world.pending_arrivals:
        return out
    t_in = (world.step_index + 1) * cfg.h
    occ = world.occupancy
    while world.pending_arrivals:
        free = [i for i in world.entrance_indices if occ[i] < 0]
        if not free:
            break
        cell = free[min(int(rng.random() * len(free)), len(free) - 1)]
        params = cfg.group_mix[world.pending_arrivals.pop(0)][0]
        aid = world.place(params, world.coord(cell), t_in)
        x1, x2 = world.coord(cell)
        out.append((t_in, ENTRY, aid, params.group_label, x1, x2))
    return out
