"""Command-line entry points: simulate, analyze, sweep, export-schema.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
invariant failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, ingest
from .ingest import IngestError, load_dataset, write_dataset
from .reports import AnalyzeOptions, analyze, sweep, write_report
from .scenario import ConfigError, ScenarioConfig, default_config, simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expresslane",
        description="Express-lane auction simulator and markout analytics",
    )
    parser.add_argument("--version", action="version", version=f"expresslane {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a seeded scenario and export the dataset")
    p_sim.add_argument("--config", type=Path, help="scenario config JSON (default: built-in scenario)")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.add_argument("--out", type=Path, required=True, help="output directory")
    p_sim.add_argument("--horizon-minutes", type=int, default=None, help="override the horizon")

    p_an = sub.add_parser("analyze", help="run the analytics pipeline over a dataset directory")
    p_an.add_argument("--data", type=Path, required=True,
                      help="directory holding rounds.csv, txs.csv, ticks.csv")
    p_an.add_argument("--out", type=Path, required=True, help="report output directory")
    p_an.add_argument("--filtered", choices=["on", "off", "both"], default="both")
    p_an.add_argument("--markout-ms", type=int, default=5000)
    p_an.add_argument("--strict", action="store_true", help="reject rather than skip bad rows")

    p_sw = sub.add_parser("sweep", help="simulate+analyze over a parameter grid")
    p_sw.add_argument("--config", type=Path, help="scenario config JSON (default: built-in scenario)")
    p_sw.add_argument("--out", type=Path, required=True)
    p_sw.add_argument("--seed", type=int, default=None)
    p_sw.add_argument(
        "--grid", action="append", default=[], metavar="KEY=V1,V2,...",
        help="grid axis; KEY is markout_ms, filtered, or a config path like arb.gas_fee_usd",
    )

    p_sc = sub.add_parser("export-schema", help="print the CSV schemas and a sample config")
    p_sc.add_argument("--out", type=Path, default=None, help="write files instead of stdout")
    return parser


def _load_config(args) -> ScenarioConfig:
    if args.config is not None:
        config = ScenarioConfig.from_json(args.config)
    else:
        config = default_config()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "horizon_minutes", None) is not None:
        config.horizon_minutes = args.horizon_minutes
    config.validate()
    return config


def _parse_grid(items: list[str]) -> dict[str, list]:
    grid: dict[str, list] = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--grid {item!r}: expected KEY=V1,V2,...")
        key, _, raw = item.partition("=")
        values = []
        for tok in raw.split(","):
            tok = tok.strip()
            if not tok:
                continue
            try:
                values.append(json.loads(tok))
            except json.JSONDecodeError:
                values.append(tok)
        if not values:
            raise ConfigError(f"--grid {item!r}: no values")
        grid[key.strip()] = values
    return grid


def cmd_simulate(args) -> int:
    config = _load_config(args)
    dataset, manifest = simulate(config)
    out: Path = args.out
    write_dataset(out, dataset)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"simulated {manifest['n_rounds']} rounds, {manifest['n_txs']} fast-lane txs -> {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    dataset = load_dataset(args.data, strict=args.strict)
    options = AnalyzeOptions(markout_ms=args.markout_ms, filtered=args.filtered)
    bundle = analyze(dataset, options)
    written = write_report(bundle, args.out)
    print(f"wrote {len(written)} report files -> {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load_config(args)
    grid = _parse_grid(args.grid)
    summary, bundles = sweep(config, grid, out_dir=args.out)
    print(f"swept {len(bundles)} grid points -> {args.out}")
    return EXIT_OK


def cmd_export_schema(args) -> int:
    sample = default_config(horizon_minutes=60).to_dict()
    if args.out is None:
        print(ingest.schema_text())
        print("sample scenario config:")
        print(json.dumps(sample, indent=2, sort_keys=True))
    else:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "schemas.md").write_text(ingest.schema_text(), encoding="utf-8")
        (args.out / "sample_config.json").write_text(
            json.dumps(sample, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"wrote schema docs -> {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "analyze": cmd_analyze,
        "sweep": cmd_sweep,
        "export-schema": cmd_export_schema,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
