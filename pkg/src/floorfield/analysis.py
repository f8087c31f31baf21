"""Travel times, time-averaged occupancy, occupancy-binned curves and piecewise-linear fits."""
from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .state import ENTRY, EXIT, EventLog

DEFAULT_BREAKPOINT = 7.0
DEFAULT_BIN_WIDTH = 5.0
DEFAULT_QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


@dataclass(frozen=True)
class TravelRecord:
    agent: int
    group: str
    t_in: float
    t_out: float
    tt: float
    n_mean: float
    run: str = ""


class OccupancyIntegral:
    """Exact integral of the piecewise-constant N(t) given as ``(time, N)`` change points."""

    def __init__(self, series: Sequence[Tuple[float, int]]):
        # collapse simultaneous changes: the last value at a time wins
        times: List[float] = []
        values: List[int] = []
        for t, n in series:
            if times and t == times[-1]:
                values[-1] = n
            else:
                times.append(t)
                values.append(n)
        self.times = times
        self.values = values
        cum = [0.0]
        for i in range(1, len(times)):
            cum.append(cum[-1] + values[i - 1] * (times[i] - times[i - 1]))
        self._cum = cum

    def _primitive(self, t: float) -> float:
        i = bisect.bisect_right(self.times, t) - 1
        if i < 0:
            return 0.0
        return self._cum[i] + self.values[i] * (t - self.times[i])

    def integral(self, a: float, b: float) -> float:
        return self._primitive(b) - self._primitive(a)

    def mean(self, a: float, b: float) -> float:
        if b == a:
            # degenerate window: the occupancy at that instant
            i = bisect.bisect_right(self.times, a) - 1
            return float(self.values[i]) if i >= 0 else 0.0
        return self.integral(a, b) / (b - a)


def travel_records(log: EventLog, warmup: float = 0.0, run: str = "") -> List[TravelRecord]:
    """One record per agent that both entered (at or after ``warmup``) and exited."""
    occupancy = OccupancyIntegral(log.occupancy_series)
    entries: Dict[int, Tuple[float, str]] = {}
    out: List[TravelRecord] = []
    for t, kind, agent, group, _, _ in log.records:
        if kind == ENTRY:
            if agent in entries:
                raise ValueError(f"agent {agent} enters twice")
            entries[agent] = (t, group)
        elif kind == EXIT:
            if agent not in entries:
                raise ValueError(f"agent {agent} exits without entering")
            t_in, g = entries[agent]
            if t_in >= warmup:
                tt = t - t_in
                out.append(TravelRecord(agent, g, t_in, t, tt, occupancy.mean(t_in, t), run))
    return out


# --- piecewise-linear travel-time model ------------------------------------

@dataclass(frozen=True)
class FitResult:
    """``tt ~ intercept + slope * max(n_mean - breakpoint, 0)``, ``v0 = room_length / intercept``.

    ``status`` is ``"full"`` when records lie on both sides of the breakpoint,
    ``"free-flow-only"`` when none exceed it (slope not estimable, NaN) and
    ``"congested-only"`` when none are at or below it (intercept extrapolated).
    """

    v0: float
    slope: float
    breakpoint: float
    r_squared: float
    sample_count: int
    intercept: float
    status: str = "full"

    @property
    def slope_estimable(self) -> bool:
        return self.status != "free-flow-only"


def fit_piecewise(records: Sequence[TravelRecord], room_length_m: float = 7.2,
                  breakpoint: float = DEFAULT_BREAKPOINT) -> FitResult:
    if len(records) < 3:
        raise ValueError(f"need at least 3 records, got {len(records)}")
    n = np.array([r.n_mean for r in records], dtype=float)
    tt = np.array([r.tt for r in records], dtype=float)
    excess = np.maximum(n - breakpoint, 0.0)

    if not np.any(excess > 0):
        status = "free-flow-only"
        intercept = float(tt.mean())
        slope = math.nan
        fitted = np.full_like(tt, intercept)
    else:
        status = "full" if np.any(excess == 0) else "congested-only"
        design = np.column_stack([np.ones_like(excess), excess])
        coef, *_ = np.linalg.lstsq(design, tt, rcond=None)
        intercept, slope = float(coef[0]), float(coef[1])
        fitted = design @ coef

    ssr = float(np.sum((tt - fitted) ** 2))
    sst = float(np.sum((tt - tt.mean()) ** 2))
    if sst > 0:
        r2 = 1.0 - ssr / sst
    else:
        r2 = 1.0 if ssr == 0 else 0.0
    v0 = room_length_m / intercept if intercept > 0 else math.nan
    return FitResult(v0, slope, breakpoint, r2, len(records), intercept, status)


def fit_groups(records: Iterable[TravelRecord], room_length_m: float = 7.2,
               breakpoint: float = DEFAULT_BREAKPOINT) -> Dict[str, FitResult]:
    """Per-group fits; groups with fewer than 3 records are skipped."""
    by_group = group_records(records)
    return {
        g: fit_piecewise(rs, room_length_m, breakpoint)
        for g, rs in by_group.items()
        if len(rs) >= 3
    }


def group_records(records: Iterable[TravelRecord]) -> Dict[str, List[TravelRecord]]:
    out: Dict[str, List[TravelRecord]] = {}
    for r in records:
        out.setdefault(r.group, []).append(r)
    return dict(sorted(out.items()))


# --- occupancy-binned curves ----------------------------------------------

@dataclass
class BinSummary:
    lo: float
    hi: float
    count: int
    group_count: Dict[str, int]
    group_mean: Dict[str, float]
    quantiles: Dict[float, float]


@dataclass
class CurveSummary:
    bin_width: float
    quantile_levels: Tuple[float, ...]
    groups: List[str]
    bins: List[BinSummary] = field(default_factory=list)

    def group_curve(self, group: str) -> List[Tuple[float, float, int]]:
        """``(bin lo, mean tt, count)`` for the bins where ``group`` has records."""
        return [(b.lo, b.group_mean[group], b.group_count[group])
                for b in self.bins if b.group_count.get(group, 0) > 0]


def curve_summary(records: Sequence[TravelRecord], bin_width: float = DEFAULT_BIN_WIDTH,
                  quantile_levels: Sequence[float] = DEFAULT_QUANTILES) -> CurveSummary:
    """Bin records by ``n_mean`` into ``[j w, (j + 1) w)``; per-group means, pooled quantiles."""
    if not records:
        raise ValueError("no records to summarise")
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    levels = tuple(sorted(float(q) for q in quantile_levels))
    groups = sorted({r.group for r in records})
    idx = [math.floor(r.n_mean / bin_width) for r in records]
    summary = CurveSummary(bin_width, levels, groups)
    for j in range(min(idx), max(idx) + 1):
        members = [r for r, i in zip(records, idx) if i == j]
        counts = {g: 0 for g in groups}
        sums = {g: 0.0 for g in groups}
        for r in members:
            counts[r.group] += 1
            sums[r.group] += r.tt
        means = {g: (sums[g] / counts[g] if counts[g] else math.nan) for g in groups}
        if members:
            qs = np.quantile(np.array([r.tt for r in members]), levels)
            quantiles = {q: float(v) for q, v in zip(levels, qs)}
        else:
            quantiles = {q: math.nan for q in levels}
        summary.bins.append(BinSummary(j * bin_width, (j + 1) * bin_width, len(members), counts, means, quantiles))
    return summary


def steady_state_summary(records: Iterable[TravelRecord], warmup: float) -> Dict[str, Dict[str, float]]:
    """Box-plot statistics of tt per group over records with ``t_in >= warmup``."""
    out: Dict[str, Dict[str, float]] = {}
    for g, rs in group_records(r for r in records if r.t_in >= warmup).items():
        tt = np.array([r.tt for r in rs])
        q1, med, q3 = np.quantile(tt, (0.25, 0.5, 0.75))
        out[g] = {"count": len(rs), "mean": float(tt.mean()), "q1": float(q1),
                  "median": float(med), "q3": float(q3),
                  "min": float(tt.min()), "max": float(tt.max())}
    return out


# --- tables ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _write(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


TRAVEL_COLUMNS = ("run", "agent", "group", "t_in", "t_out", "tt", "n_mean")
FIT_COLUMNS = ("group", "v0", "slope", "intercept", "breakpoint", "r_squared", "sample_count", "status")
SERIES_COLUMNS = ("run", "group", "agent", "t_out", "tt")
STEADY_COLUMNS = ("group", "count", "mean", "q1", "median", "q3", "min", "max")


def curve_columns(levels: Sequence[float]) -> Tuple[str, ...]:
    return ("bin_lo", "bin_hi", "group", "count", "mean_tt") + tuple(f"q{q:g}" for q in levels)


def write_travel_records(records: Sequence[TravelRecord], path: Path) -> None:
    _write(path, TRAVEL_COLUMNS,
           ((r.run, r.agent, r.group, r.t_in, r.t_out, r.tt, r.n_mean) for r in records))


def write_curve_summary(summary: Optional[CurveSummary], path: Path,
                        levels: Sequence[float] = DEFAULT_QUANTILES) -> None:
    """One row per bin and group, plus a pooled ``all`` row carrying the quantiles."""
    if summary is None:
        _write(path, curve_columns(levels), [])
        return
    rows = []
    blank = [""] * len(summary.quantile_levels)
    for b in summary.bins:
        for g in summary.groups:
            rows.append([b.lo, b.hi, g, b.group_count[g], b.group_mean[g], *blank])
        pooled = (math.fsum(b.group_mean[g] * b.group_count[g] for g in summary.groups if b.group_count[g]) / b.count
                  if b.count else math.nan)
        rows.append([b.lo, b.hi, "all", b.count, pooled, *(b.quantiles[q] for q in summary.quantile_levels)])
    _write(path, curve_columns(summary.quantile_levels), rows)


def write_fits(fits: Mapping[str, FitResult], path: Path) -> None:
    _write(path, FIT_COLUMNS,
           ((g, f.v0, f.slope, f.intercept, f.breakpoint, f.r_squared, f.sample_count, f.status)
            for g, f in fits.items()))


def write_exit_series(records: Sequence[TravelRecord], path: Path) -> None:
    rows = sorted(records, key=lambda r: (r.group, r.t_out, r.run, r.agent))
    _write(path, SERIES_COLUMNS, ((r.run, r.group, r.agent, r.t_out, r.tt) for r in rows))


def write_steady_state(stats: Mapping[str, Mapping[str, float]], path: Path) -> None:
    _write(path, STEADY_COLUMNS, ([g] + [s[c] for c in STEADY_COLUMNS[1:]] for g, s in stats.items()))
