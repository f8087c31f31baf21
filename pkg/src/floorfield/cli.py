"""Command-line front end: ``floorfield run | sweep | analyze``.

Settings are resolved as flags > config file > built-in defaults.

Exit status: 0 success, 2 usage error or invalid configuration, 3 missing or
malformed input files.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .analysis import (
    DEFAULT_BIN_WIDTH,
    DEFAULT_BREAKPOINT,
    DEFAULT_QUANTILES,
    curve_summary,
    fit_groups,
    steady_state_summary,
    travel_records,
    write_curve_summary,
    write_exit_series,
    write_fits,
    write_steady_state,
    write_travel_records,
)
from .core import ConfigError, SimConfig, config_to_dict, load_config, validate_config
from .engine import DEFAULT_ALPHAS, DEFAULT_REPLICATIONS, LogFormatError, read_log, run, run_sweep, sweep_configs, write_log

log = logging.getLogger("floorfield")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT = 0, 2, 3
FORMAT_VERSION = "events.v1/tables.v1"

EVENTS_FILE = "events.csv"
MANIFEST_FILE = "manifest.json"


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the stamp so reruns give identical directories
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
            else _dt.datetime.now(_dt.timezone.utc))
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def _manifest(config: SimConfig, outputs: Dict[str, str], **extra) -> dict:
    return {
        "tool": "floorfield",
        "version": __version__,
        "format": FORMAT_VERSION,
        "created": _timestamp(),
        "seed": config.seed,
        "config": config_to_dict(config),
        "outputs": outputs,
        **extra,
    }


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _resolve_config(args) -> SimConfig:
    config = load_config(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "duration", None) is not None:
        changes["duration"] = args.duration
    if getattr(args, "warmup", None) is not None:
        changes["warmup"] = args.warmup
    if args.command == "run" and args.alpha:
        if len(args.alpha) > 1:
            raise ConfigError("alpha", "run takes a single --alpha")
        changes["inflow_alpha"] = args.alpha[0]
    return validate_config(config.replace(**changes)) if changes else config


def cmd_run(args) -> int:
    config = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("run alpha=%g seed=%d duration=%g", config.inflow_alpha, config.seed, config.duration)
    write_log(run(config), out / EVENTS_FILE)
    _write_json(out / MANIFEST_FILE, _manifest(config, {"events": EVENTS_FILE}))
    return EXIT_OK


def run_dir_name(alpha: float, replication: int) -> str:
    return f"alpha{alpha:g}_rep{replication:02d}"


def cmd_sweep(args) -> int:
    config = _resolve_config(args)
    alphas = args.alpha or list(DEFAULT_ALPHAS)
    reps = args.replications if args.replications is not None else DEFAULT_REPLICATIONS
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plan = sweep_configs(config, alphas, reps, config.seed)
    log.info("sweep: %d alphas x %d replications", len(alphas), reps)
    logs = run_sweep(config, alphas, reps, config.seed, workers=args.workers)
    for (ai, r, cfg), ev in zip(plan, logs):
        d = out / run_dir_name(alphas[ai], r)
        d.mkdir(exist_ok=True)
        write_log(ev, d / EVENTS_FILE)
        _write_json(d / MANIFEST_FILE, _manifest(
            cfg, {"events": EVENTS_FILE}, sweep={"seed_base": config.seed, "alpha_index": ai, "replication": r}))
    return EXIT_OK


def _find_logs(root: Path) -> List[Path]:
    if root.is_file():
        return [root]
    return sorted(root.rglob(EVENTS_FILE))


def _room_length(path: Path, default: float) -> float:
    manifest = path.parent / MANIFEST_FILE
    if manifest.exists():
        try:
            geo = json.loads(manifest.read_text(encoding="utf-8"))["config"]["geometry"]
            return geo["length"] * geo["cell_size"]
        except (KeyError, TypeError, ValueError):
            pass
    return default


def cmd_analyze(args) -> int:
    root = Path(args.logs)
    if not root.exists():
        print(f"error: {root} does not exist", file=sys.stderr)
        return EXIT_INPUT
    paths = _find_logs(root)
    if not paths:
        print(f"error: no {EVENTS_FILE} files under {root}", file=sys.stderr)
        return EXIT_INPUT
    defaults = SimConfig()
    warmup = defaults.warmup if args.warmup is None else args.warmup
    bin_width = DEFAULT_BIN_WIDTH if args.bin_width is None else args.bin_width
    room_length = args.room_length

    records = []
    for p in paths:
        try:
            ev = read_log(p)
            name = str(p.parent.relative_to(root)) if p != root else p.stem
            records.extend(travel_records(ev, warmup, run=name))
        except (LogFormatError, ValueError) as exc:
            print(f"error: {exc}" if str(p) in str(exc) else f"error: {p}: {exc}", file=sys.stderr)
            return EXIT_INPUT
        if room_length is None:
            room_length = _room_length(p, defaults.geometry.room_length_m)
    if room_length is None:
        room_length = defaults.geometry.room_length_m

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_travel_records(records, out / "travel_records.csv")
    write_curve_summary(curve_summary(records, bin_width) if records else None, out / "curve_summary.csv")
    write_fits(fit_groups(records, room_length, args.breakpoint), out / "fits.csv")
    write_exit_series(records, out / "tt_vs_tout.csv")
    write_steady_state(steady_state_summary(records, warmup), out / "steady_state.csv")
    log.info("analyzed %d logs, %d travel records", len(paths), len(records))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floorfield", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def sim_flags(p):
        p.add_argument("--config", help="YAML config file or run manifest")
        p.add_argument("--seed", type=int, help="seed (seed base for sweeps)")
        p.add_argument("--alpha", type=float, action="append", help="inflow rate [agents/s]; repeatable for sweep")
        p.add_argument("--duration", type=float, help="simulated seconds")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("run", help="simulate one replication")
    sim_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="simulate replications over several inflow rates")
    sim_flags(p)
    p.add_argument("--replications", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="travel-time tables from a directory of event logs")
    p.add_argument("logs", help="directory searched recursively for events.csv, or one log file")
    p.add_argument("--warmup", type=float, help="drop agents entering before this time [s]")
    p.add_argument("--bin-width", type=float, help="occupancy bin width [agents]")
    p.add_argument("--breakpoint", type=float, default=DEFAULT_BREAKPOINT)
    p.add_argument("--room-length", type=float, help="room length in metres for v0 (default from manifests)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "replications", None) is not None and args.replications < 1:
            raise ConfigError("replications", "must be >= 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
