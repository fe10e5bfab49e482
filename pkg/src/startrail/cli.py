"""Command-line runner: ``startrail run|sweep|dataset|validate``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .sim.metrics import read_summary
from .sim.runner import adoption_sweep, run
from .sim.scenario import bundled_scenarios, load_scenario, parse_overrides
from .types import ConfigError
from .workloads import build_dataset

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3

DEFAULT_FRACTIONS = "0,0.3,0.5,0.8,1.0"

# (summary column, label, unit scale, unit)
SUMMARY_FIELDS = [
    ("p95_request_duration", "p95 duration", 1000.0, "ms"),
    ("p95_used_bytes", "p95 memory", 1 / (1 << 20), "MiB"),
    ("total_bytes_sent", "traffic", 1 / (1 << 20), "MiB"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="startrail", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", required=True, help="scenario file or bundled scenario name")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted override, e.g. node_config.popularity_threshold=5")
        p.add_argument("--seed", type=int, help="override run_seed")

    p = sub.add_parser("run", help="run one scenario and write CSV outputs")
    common(p)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--baseline", help="summary.csv of a paired run to compare against")

    p = sub.add_parser("sweep", help="vary the Startrail fraction and fit a line")
    common(p)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--fractions", default=DEFAULT_FRACTIONS,
                   help="comma-separated Startrail fractions")
    p.add_argument("--jobs", type=int, default=1, help="parallel scenario runs")

    p = sub.add_parser("dataset", help="write the dataset manifest")
    common(p)
    p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("validate", help="check a scenario without running it")
    common(p)

    sub.add_parser("list", help="list bundled scenarios")
    return parser


def _load(args):
    overrides = parse_overrides(args.overrides)
    if args.seed is not None:
        overrides["run_seed"] = str(args.seed)
    return load_scenario(args.scenario, overrides).validate()


def _parse_fractions(text: str) -> list[float]:
    out = []
    for part in text.split(","):
        try:
            out.append(float(part))
        except ValueError:
            raise ConfigError([("fractions", f"not a number: {part!r}")]) from None
    bad = [f for f in out if not 0 <= f <= 1]
    if bad:
        raise ConfigError([("fractions", f"{bad[0]} is outside [0, 1]")])
    return out


def summary_line(name: str, row: dict, baseline: dict | None = None) -> str:
    parts = [name]
    for key, label, scale, unit in SUMMARY_FIELDS:
        value = row.get(key)
        if value in (None, ""):
            parts.append(f"{label} n/a")
            continue
        value = float(value)
        text = f"{label} {value * scale:.3f} {unit}"
        if baseline and baseline.get(key) not in (None, ""):
            ref = float(baseline[key])
            if ref:
                text += f" ({(value - ref) / ref * 100:+.1f}%)"
        parts.append(text)
    return "  ".join(parts)


def cmd_run(args) -> int:
    scenario = _load(args)
    baseline = read_summary(args.baseline) if args.baseline else None
    metrics = run(scenario)
    metrics.write_csvs(args.out)
    print(summary_line(scenario.name, metrics.summary_row(), baseline))
    return EXIT_OK


def cmd_sweep(args) -> int:
    fractions = _parse_fractions(args.fractions)
    scenario = _load(args)
    result = adoption_sweep(scenario, fractions, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fraction", "mean_ms", "p95_ms"])
        for p in result.points:
            w.writerow([p.fraction, _ms(p.mean_request_duration), _ms(p.p95_request_duration)])
    for p in result.points:
        print(f"fraction {p.fraction:.2f}: mean {_ms(p.mean_request_duration)} ms  p95 {_ms(p.p95_request_duration)} ms")
    if result.degenerate:
        print("fit: degenerate (need at least two distinct fractions)")
    else:
        print(f"fit: slope {result.slope * 1000:.3f} ms per unit fraction, intercept {result.intercept * 1000:.3f} ms")
    return EXIT_OK


def cmd_dataset(args) -> int:
    s = _load(args)
    ds = build_dataset(s.dataset.block_count, s.dataset.block_size, s.dataset.group_bytes, s.run_seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "manifest.csv"
    with open(path, "w", newline="") as fh:
        ds.write_manifest(fh)
    print(f"{len(ds)} blocks in {len(ds.file_groups)} groups -> {path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    s = _load(args)
    print(f"{s.name}: ok")
    return EXIT_OK


def cmd_list(args) -> int:
    for name in bundled_scenarios():
        print(name)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "dataset": cmd_dataset,
    "validate": cmd_validate,
    "list": cmd_list,
}


def _ms(seconds: float | None) -> str:
    return "" if seconds is None else f"{seconds * 1000:.3f}"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        for path, msg in e.problems:
            print(f"error: {path}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
