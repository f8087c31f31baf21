"""Target-cell choice: the floor-field transition kernel over a Moore neighbourhood."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .core import Coord, LatticeGeometry, StaticField


@dataclass(frozen=True)
class NeighborhoodView:
    """What an agent at ``centre`` sees: cells in row-major order, walls omitted."""

    centre: Coord
    cells: Tuple[Coord, ...]
    occupied: Tuple[bool, ...]
    diagonal: Tuple[bool, ...]
    field_value: Tuple[float, ...]

    def __post_init__(self):
        n = len(self.cells)
        if not (len(self.occupied) == len(self.diagonal) == len(self.field_value) == n):
            raise ValueError("per-cell arrays must match the number of cells")
        if self.centre not in self.cells:
            raise ValueError("the agent's own cell must be part of its neighbourhood")
        i = self.cells.index(self.centre)
        if self.occupied[i] or self.diagonal[i]:
            raise ValueError("own cell must have occupied = diagonal = 0")


@dataclass(frozen=True)
class TargetDistribution:
    entries: Tuple[Tuple[Coord, float], ...]

    def probability(self, cell: Coord) -> float:
        for c, p in self.entries:
            if c == cell:
                return p
        return 0.0


def is_diagonal(x: Coord, y: Coord) -> bool:
    return (x[0] - y[0]) * (x[1] - y[1]) != 0


def neighborhood_view(
    geometry: LatticeGeometry, field: StaticField, centre: Coord, occupied_cells
) -> NeighborhoodView:
    """Build the view of ``centre`` given the set of occupied cells (own cell ignored)."""
    cells = tuple(geometry.moore(centre))
    return NeighborhoodView(
        centre=centre,
        cells=cells,
        occupied=tuple(c != centre and c in occupied_cells for c in cells),
        diagonal=tuple(is_diagonal(centre, c) for c in cells),
        field_value=tuple(field[c] for c in cells),
    )


def target_distribution(view: NeighborhoodView, k_S: float, k_O: float, k_D: float) -> TargetDistribution:
    """Normalised transition probabilities P(y | x) over the view, own cell included."""
    # shift by the own-cell field value; cancels in the ratio and avoids tiny weights
    s0 = view.field_value[view.cells.index(view.centre)]
    weights = [
        math.exp(-k_S * (s - s0)) * (1.0 - k_O * occ) * (1.0 - k_D * diag)
        for s, occ, diag in zip(view.field_value, view.occupied, view.diagonal)
    ]
    total = math.fsum(weights)
    assert total > 0, "degenerate neighbourhood: the own cell always carries weight"
    return TargetDistribution(tuple((c, w / total) for c, w in zip(view.cells, weights)))


def sample_target(dist: TargetDistribution, draw: float) -> Coord:
    """Inverse-CDF sampling in the distribution's (row-major) entry order."""
    acc = 0.0
    last = None
    for cell, p in dist.entries:
        if p <= 0.0:
            continue
        acc += p
        last = cell
        if draw < acc:
            return cell
    # draw landed in the rounding slack above the last cumulative value
    assert last is not None
    return last


# --- fast path used by the engine --------------------------------------

# (neighbour index, static factor, diagonal flag) per lattice cell
NeighbourTable = List[Tuple[Tuple[int, float, bool], ...]]


def build_neighbour_table(geometry: LatticeGeometry, field: StaticField, k_S: float, k_D: float) -> NeighbourTable:
    """Precompute the occupancy-independent factors of the kernel for every cell.

    Entry ``w`` for neighbour ``y`` of ``x`` is ``exp(-k_S (S(y) - S(x))) (1 - k_D D_x(y))``.
    """
    table: NeighbourTable = []
    for x in geometry.cells():
        s0 = field[x]
        row = []
        for y in geometry.moore(x):
            diag = is_diagonal(x, y)
            w = math.exp(-k_S * (field[y] - s0)) * (1.0 - k_D * diag)
            row.append((geometry.index(y), w, diag))
        table.append(tuple(row))
    return table


def choose_index(
    neighbours: Sequence[Tuple[int, float, bool]],
    occupancy: Sequence[int],
    own: int,
    k_O: float,
    draw: float,
) -> int:
    """Sample a target cell index; same law as :func:`target_distribution`.

    ``occupancy[i]`` is the agent id on cell ``i`` or -1.
    """
    free = 1.0 - k_O
    weights = []
    total = 0.0
    for idx, w, _ in neighbours:
        if idx != own and occupancy[idx] >= 0:
            w *= free
        weights.append(w)
        total += w
    target = draw * total
    acc = 0.0
    chosen = own
    for (idx, _, _), w in zip(neighbours, weights):
        if w <= 0.0:
            continue
        acc += w
        chosen = idx
        if target < acc:
            break
    return chosen
