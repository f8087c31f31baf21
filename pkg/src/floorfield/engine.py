"""Run loop, replication sweeps and the event-log file format.

Random numbers come from Python's ``random.Random`` (MT19937) seeded with the
run's integer seed; one stream per run, consumed in the order documented in
:mod:`floorfield.dynamics`.

Event-log files are CSV with the header ``time,kind,agent,group,x,y``; ``time``
is written with ``repr`` so it round-trips exactly, ``x`` is the distance from
the exit wall and ``y`` the lateral offset of the cell involved.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from .core import SimConfig, validate_config
from .dynamics import step
from .state import EVENT_KINDS, EventLog, Record, WorldState

LOG_COLUMNS = ("time", "kind", "agent", "group", "x", "y")

DEFAULT_ALPHAS = (1.0, 1.5, 1.8, 2.0, 2.3, 2.7, 3.0)
DEFAULT_REPLICATIONS = 20

_SEED_MASK = (1 << 64) - 1


def derive_seed(seed_base: int, alpha_index: int, replication: int) -> int:
    """Seed of run (alpha_index, replication): ``seed_base XOR (alpha_index << 32 | replication)``."""
    if not 0 <= replication < (1 << 32) or alpha_index < 0:
        raise ValueError("indices out of range")
    return (seed_base ^ ((alpha_index << 32) | replication)) & _SEED_MASK


def simulate(config: SimConfig, world: Optional[WorldState] = None, check: bool = False) -> WorldState:
    """Run ``config.n_steps`` steps on ``world`` (a fresh empty room by default)."""
    if world is None:
        world = WorldState(config)
    log = world.log
    queue = world.queue
    for k in range(world.step_index, config.n_steps):
        world.step_index = k
        log.extend(step(world, queue.agents_due(k)))
        if check:
            world.check_consistency()
    world.step_index = config.n_steps
    return world


def run(config: SimConfig) -> EventLog:
    """One replication from an empty room; a pure function of ``config`` (seed included)."""
    return simulate(config).log


def _run_one(config: SimConfig) -> EventLog:
    return run(config)


def sweep_configs(config: SimConfig, alphas: Sequence[float], replications: int,
                  seed_base: int) -> List[Tuple[int, int, SimConfig]]:
    if replications < 1:
        raise ValueError("replications must be >= 1")
    out = []
    for ai, alpha in enumerate(alphas):
        for r in range(replications):
            cfg = validate_config(config.replace(inflow_alpha=float(alpha), seed=derive_seed(seed_base, ai, r)))
            out.append((ai, r, cfg))
    return out


def run_sweep(config: SimConfig, alphas: Sequence[float] = DEFAULT_ALPHAS,
              replications: int = DEFAULT_REPLICATIONS, seed_base: Optional[int] = None,
              workers: int = 1) -> List[EventLog]:
    """One log per (alpha, replication), ordered alpha-major regardless of ``workers``."""
    if seed_base is None:
        seed_base = config.seed
    configs = [c for _, _, c in sweep_configs(config, alphas, replications, seed_base)]
    if workers <= 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, configs))


# --- file format -----------------------------------------------------------

def format_log(log: EventLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for t, kind, agent, group, x, y in log.records:
        w.writerow((repr(float(t)), kind, agent, group, x, y))
    return buf.getvalue()


def write_log(log: EventLog, path: Path | str) -> None:
    Path(path).write_text(format_log(log), encoding="utf-8")


class LogFormatError(ValueError):
    pass


def parse_log(lines: Iterable[str], name: str = "<log>") -> EventLog:
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or tuple(header) != LOG_COLUMNS:
        raise LogFormatError(f"{name}:1: expected header {','.join(LOG_COLUMNS)}")
    records: List[Record] = []
    last_t = float("-inf")
    for lineno, row in enumerate(reader, start=2):
        try:
            if len(row) != len(LOG_COLUMNS):
                raise ValueError(f"expected {len(LOG_COLUMNS)} fields, got {len(row)}")
            t = float(row[0])
            kind = row[1]
            if kind not in EVENT_KINDS:
                raise ValueError(f"unknown event kind {kind!r}")
            if t < last_t:
                raise ValueError("records out of time order")
            last_t = t
            records.append((t, kind, int(row[2]), row[3], int(row[4]), int(row[5])))
        except ValueError as exc:
            raise LogFormatError(f"{name}:{lineno}: {exc}") from None
    try:
        return EventLog.from_records(records)
    except ValueError as exc:
        raise LogFormatError(f"{name}: {exc}") from None


def read_log(path: Path | str) -> EventLog:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_log(fh, str(path))
