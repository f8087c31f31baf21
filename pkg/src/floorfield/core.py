"""Lattice geometry, static floor field, agent groups and the validated run config."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import yaml

Coord = Tuple[int, int]


class ConfigError(ValueError):
    """Raised for an invalid configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class LatticeGeometry:
    """Rectangular room in exit-centred coordinates.

    A cell is ``(x1, x2)``: ``x1`` is the distance along the direction of
    travel (0 on the exit wall, ``length - 1`` on the entrance wall), ``x2``
    the lateral offset, ranging over ``lateral_min .. lateral_min + width - 1``
    with ``lateral_min = -(width // 2)``. For odd widths the exit at ``(0, 0)``
    sits exactly in the middle of the short wall.
    """

    length: int = 18
    width: int = 11
    cell_size: float = 0.4
    exit_cell: Coord = (0, 0)
    # None means the whole wall opposite the exit
    entrance_cells: Optional[Tuple[Coord, ...]] = None

    @property
    def lateral_min(self) -> int:
        return -(self.width // 2)

    @property
    def lateral_max(self) -> int:
        return self.lateral_min + self.width - 1

    @property
    def room_length_m(self) -> float:
        return self.length * self.cell_size

    @property
    def n_cells(self) -> int:
        return self.length * self.width

    def entrances(self) -> Tuple[Coord, ...]:
        if self.entrance_cells is not None:
            return tuple(self.entrance_cells)
        x1 = self.length - 1
        return tuple((x1, x2) for x2 in range(self.lateral_min, self.lateral_max + 1))

    def contains(self, cell: Coord) -> bool:
        x1, x2 = cell
        return 0 <= x1 < self.length and self.lateral_min <= x2 <= self.lateral_max

    def cells(self) -> List[Coord]:
        """All cells in row-major order (by ``x1``, then ``x2``)."""
        return [
            (x1, x2)
            for x1 in range(self.length)
            for x2 in range(self.lateral_min, self.lateral_max + 1)
        ]

    def index(self, cell: Coord) -> int:
        x1, x2 = cell
        return x1 * self.width + (x2 - self.lateral_min)

    def coord(self, index: int) -> Coord:
        x1, j = divmod(index, self.width)
        return (x1, j + self.lateral_min)

    def moore(self, cell: Coord) -> List[Coord]:
        """Moore neighbourhood of ``cell`` (itself included), walls excluded, row-major."""
        x1, x2 = cell
        return [
            (x1 + d1, x2 + d2)
            for d1 in (-1, 0, 1)
            for d2 in (-1, 0, 1)
            if self.contains((x1 + d1, x2 + d2))
        ]


@dataclass(frozen=True)
class StaticField:
    """Euclidean distance (in cell units) from each cell to the exit."""

    values: Mapping[Coord, float]

    def __getitem__(self, cell: Coord) -> float:
        return self.values[cell]


def build_static_field(geometry: LatticeGeometry) -> StaticField:
    e1, e2 = geometry.exit_cell
    return StaticField(
        {(x1, x2): math.hypot(x1 - e1, x2 - e2) for (x1, x2) in geometry.cells()}
    )


@dataclass(frozen=True)
class AgentParams:
    tau: float
    gamma: float
    group_label: str = ""


# four groups (fast/slow x aggressive/calm), equally likely
DEFAULT_GROUPS: Tuple[Tuple[AgentParams, float], ...] = (
    (AgentParams(0.25, 1.0, "fast-aggressive"), 1.0),
    (AgentParams(0.25, 0.0, "fast-calm"), 1.0),
    (AgentParams(0.4, 1.0, "slow-aggressive"), 1.0),
    (AgentParams(0.4, 0.0, "slow-calm"), 1.0),
)


@dataclass(frozen=True)
class SimConfig:
    k_S: float = 3.5
    k_O: float = 1.0
    k_D: float = 0.7
    h: float = 0.1
    mu: float = 0.5
    geometry: LatticeGeometry = field(default_factory=LatticeGeometry)
    inflow_alpha: float = 1.0
    group_mix: Tuple[Tuple[AgentParams, float], ...] = DEFAULT_GROUPS
    duration: float = 1000.0
    seed: int = 1
    warmup: float = 500.0
    # an agent that steps onto the exit has left the room but keeps the doorway
    # blocked until its next activation; False frees it immediately
    exit_dwell: bool = True

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    @property
    def n_steps(self) -> int:
        """Number of algorithm steps ``k = 0 .. n_steps - 1`` covering ``[0, duration)``."""
        return max(0, math.ceil(self.duration / self.h - 1e-9))


def _check_range(key: str, value: Any, lo: float, hi: float = math.inf) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {value!r}") from None
    if not (lo <= v <= hi) or math.isnan(v):
        raise ConfigError(key, f"{v} outside [{lo}, {hi}]")
    return v


def _validate_geometry(g: LatticeGeometry) -> LatticeGeometry:
    if int(g.length) != g.length or g.length < 2:
        raise ConfigError("geometry.length", f"must be an integer >= 2, got {g.length}")
    if int(g.width) != g.width or g.width < 1:
        raise ConfigError("geometry.width", f"must be an integer >= 1, got {g.width}")
    if not g.cell_size > 0:
        raise ConfigError("geometry.cell_size", f"must be positive, got {g.cell_size}")
    exit_cell = tuple(int(v) for v in g.exit_cell)
    if exit_cell[0] != 0 or not g.contains(exit_cell):
        raise ConfigError("geometry.exit_cell", f"{exit_cell} is not on the exit wall (x1 = 0)")
    entrances = None
    if g.entrance_cells is not None:
        entrances = tuple(tuple(int(v) for v in c) for c in g.entrance_cells)
        if not entrances:
            raise ConfigError("geometry.entrance_cells", "must not be empty")
        for c in entrances:
            if c[0] != g.length - 1 or not g.contains(c):
                raise ConfigError(
                    "geometry.entrance_cells", f"{c} is not on the entrance wall (x1 = {g.length - 1})"
                )
        if len(set(entrances)) != len(entrances):
            raise ConfigError("geometry.entrance_cells", "duplicate cells")
    return dataclasses.replace(
        g, length=int(g.length), width=int(g.width), exit_cell=exit_cell, entrance_cells=entrances
    )


def validate_config(raw: SimConfig) -> SimConfig:
    """Check every bound and return a config with group weights normalised to sum 1."""
    k_S = _check_range("k_S", raw.k_S, 0.0)
    k_O = _check_range("k_O", raw.k_O, 0.0, 1.0)
    k_D = _check_range("k_D", raw.k_D, 0.0, 1.0)
    mu = _check_range("mu", raw.mu, 0.0, 1.0)
    h = _check_range("h", raw.h, 0.0)
    if h == 0:
        raise ConfigError("h", "must be positive")
    alpha = _check_range("inflow_alpha", raw.inflow_alpha, 0.0)
    duration = _check_range("duration", raw.duration, 0.0)
    warmup = _check_range("warmup", raw.warmup, 0.0)
    if not isinstance(raw.seed, int) or isinstance(raw.seed, bool) or not 0 <= raw.seed < 2**64:
        raise ConfigError("seed", f"must be an integer in [0, 2**64), got {raw.seed!r}")
    geometry = _validate_geometry(raw.geometry)
    if not isinstance(raw.exit_dwell, bool):
        raise ConfigError("exit_dwell", f"expected true/false, got {raw.exit_dwell!r}")

    if not raw.group_mix:
        raise ConfigError("groups", "group mix is empty")
    groups = []
    for i, (params, weight) in enumerate(raw.group_mix):
        key = f"groups[{i}]"
        tau = _check_range(f"{key}.tau", params.tau, 0.0)
        # an agent must never be due twice within one step
        if tau < h:
            raise ConfigError(f"{key}.tau", f"{tau} is shorter than the step length h={h}")
        gamma = _check_range(f"{key}.gamma", params.gamma, 0.0, 1.0)
        w = _check_range(f"{key}.weight", weight, 0.0)
        if w == 0:
            raise ConfigError(f"{key}.weight", "must be positive")
        groups.append((AgentParams(tau, gamma, str(params.group_label)), w))
    labels = [p.group_label for p, _ in groups]
    if len(set(labels)) != len(labels):
        raise ConfigError("groups", f"duplicate group labels {labels}")
    total = math.fsum(w for _, w in groups)
    # already-normalised weights are kept bit-for-bit so validation is idempotent
    if abs(total - 1.0) > 1e-12:
        groups = [(p, w / total) for p, w in groups]
    group_mix = tuple(groups)

    return SimConfig(
        k_S=k_S, k_O=k_O, k_D=k_D, h=h, mu=mu, geometry=geometry,
        inflow_alpha=alpha, group_mix=group_mix, duration=duration,
        seed=raw.seed, warmup=warmup, exit_dwell=bool(raw.exit_dwell),
    )


# --- structured text (YAML) representation -------------------------------

_SCALAR_KEYS = ("k_S", "k_O", "k_D", "h", "mu", "inflow_alpha", "duration", "seed", "warmup", "exit_dwell")
_GEOMETRY_KEYS = ("length", "width", "cell_size", "exit_cell", "entrance_cells")


def config_to_dict(config: SimConfig) -> Dict[str, Any]:
    g = config.geometry
    return {
        **{k: getattr(config, k) for k in _SCALAR_KEYS},
        "geometry": {
            "length": g.length,
            "width": g.width,
            "cell_size": g.cell_size,
            "exit_cell": list(g.exit_cell),
            "entrance_cells": None if g.entrance_cells is None else [list(c) for c in g.entrance_cells],
        },
        "groups": [
            {"label": p.group_label, "tau": p.tau, "gamma": p.gamma, "weight": w}
            for p, w in config.group_mix
        ],
    }


def config_from_dict(data: Optional[Mapping[str, Any]]) -> SimConfig:
    """Build an (unvalidated) config; missing keys take the defaults."""
    data = dict(data or {})
    known = set(_SCALAR_KEYS) | {"geometry", "groups"}
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown configuration key")
    kwargs: Dict[str, Any] = {k: data[k] for k in _SCALAR_KEYS if k in data}

    geo = data.get("geometry") or {}
    if not isinstance(geo, Mapping):
        raise ConfigError("geometry", "expected a mapping")
    for key in geo:
        if key not in _GEOMETRY_KEYS:
            raise ConfigError(f"geometry.{key}", "unknown configuration key")
    geo_kwargs = {k: geo[k] for k in _GEOMETRY_KEYS if k in geo}
    if "exit_cell" in geo_kwargs:
        geo_kwargs["exit_cell"] = tuple(geo_kwargs["exit_cell"])
    if geo_kwargs.get("entrance_cells") is not None:
        geo_kwargs["entrance_cells"] = tuple(tuple(c) for c in geo_kwargs["entrance_cells"])
    kwargs["geometry"] = LatticeGeometry(**geo_kwargs)

    if "groups" in data:
        groups = data["groups"]
        if not isinstance(groups, Sequence) or isinstance(groups, str):
            raise ConfigError("groups", "expected a list of groups")
        mix = []
        for i, g in enumerate(groups):
            try:
                mix.append((AgentParams(g["tau"], g["gamma"], g.get("label", f"group{i}")),
                            g.get("weight", 1.0)))
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"groups[{i}]", f"needs tau and gamma ({exc})") from None
        kwargs["group_mix"] = tuple(mix)
    return SimConfig(**kwargs)


def load_config(path: Path | str | None) -> SimConfig:
    """Read and validate a YAML config file.

    A run manifest is accepted as well: its ``config`` section is used.
    An empty file yields the default (Table-1) setup.
    """
    if path is None:
        return validate_config(SimConfig())
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"cannot parse {path}: {exc}") from None
    if data is not None and not isinstance(data, Mapping):
        raise ConfigError("<file>", f"{path} does not contain a mapping")
    if data and "config" in data and isinstance(data["config"], Mapping):
        data = data["config"]
    return validate_config(config_from_dict(data))


def group_labels(config: SimConfig) -> List[str]:
    return [p.group_label for p, _ in config.group_mix]
