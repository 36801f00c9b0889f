"""Command-line interface: run / sweep / calibrate / report.

Exit codes: 0 success, 2 configuration error, 3 sweep finished with
failed cells."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import yaml

from .channel import CalibrationError, calibrate_congestion
from .config import ConfigError, ScenarioConfig, SweepPlan
from .metrics import build_comparisons, csv_header, csv_row, parse_csv
from .runner import _key_dict, load_calibration, run_scenario, run_sweep, write_outputs

DEFAULT_ANCHORS = Path(__file__).resolve().parents[2] / "configs" / "anchors.yaml"


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="scenario/plan YAML")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--family", type=str, default=None)
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--class", dest="klass", type=str, default=None,
                   help="impairment (N0..N3) or context (C0..C3) class")
    p.add_argument("--baseline", type=str, default=None,
                   choices=["A", "B1", "B2", "B2_NOAUTH"])
    p.add_argument("--calibration", type=Path, default=None,
                   help="congestion calibration JSON (default configs/calibration.json)")


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.family is not None:
        updates["family"] = args.family
    if args.density is not None:
        updates["density_veh_km2"] = args.density
    if args.baseline is not None:
        updates["baseline"] = args.baseline
    if args.klass is not None:
        if args.klass.startswith("N"):
            updates["impairment_class"] = args.klass
        else:
            updates["context_class"] = args.klass
    cfg = dataclasses.replace(cfg, **updates)
    errors = cfg.validate()
    if errors:
        raise ConfigError("; ".join(errors))
    return cfg


def cmd_run(args) -> int:
    cfg = ScenarioConfig.from_yaml(args.config) if args.config else ScenarioConfig()
    cfg = _apply_overrides(cfg, args)
    congestion = load_calibration(args.calibration)
    metrics = run_scenario(cfg, congestion)
    args.out.mkdir(parents=True, exist_ok=True)
    text = csv_header() + "\n" + csv_row(_key_dict(cfg), metrics) + "\n"
    (args.out / "metrics.csv").write_text(text)
    print(text, end="")
    return 0


def cmd_sweep(args) -> int:
    if not args.config:
        print("sweep requires --config <plan.yaml>", file=sys.stderr)
        return 2
    plan = SweepPlan.from_yaml(args.config)
    if args.seed is not None:
        plan.master_seed = args.seed
    congestion = load_calibration(args.calibration)
    csv_text, rows, failures = run_sweep(plan, congestion, parallel=args.parallel)
    write_outputs(args.out, csv_text, rows, plan.comparison_pairs)
    print(f"{len(rows)} cells -> {args.out / 'metrics.csv'}"
          f" ({failures} failed)")
    return 3 if failures else 0


def cmd_calibrate(args) -> int:
    anchors_path = args.config or DEFAULT_ANCHORS
    with open(anchors_path) as fh:
        anchors = yaml.safe_load(fh)
    model = calibrate_congestion(anchors)
    args.out.mkdir(parents=True, exist_ok=True)
    out_path = args.out / "calibration.json"
    out_path.write_text(model.to_json())
    print(f"calibration written to {out_path}")
    return 0


def cmd_report(args) -> int:
    csv_path = args.csv or (args.out / "metrics.csv")
    rows = parse_csv(Path(csv_path).read_text())
    pairs = [tuple(p.split(":")) for p in (args.pairs or "A:B2,B1:B2").split(",")]
    comparisons = build_comparisons(rows, pairs)
    out_path = args.out / "comparisons.json"
    args.out.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps([c.as_dict() for c in comparisons],
                                   indent=2, sort_keys=True))
    print(f"{len(comparisons)} paired comparisons -> {out_path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tacsim",
        description="Deterministic airspace V2V tactical-coordination simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    _add_common(p_run)
    p_sweep = sub.add_parser("sweep", help="run a sweep plan")
    _add_common(p_sweep)
    p_cal = sub.add_parser("calibrate", help="solve the channel congestion tables")
    _add_common(p_cal)
    p_rep = sub.add_parser("report", help="paired comparisons from metrics.csv")
    _add_common(p_rep)
    p_rep.add_argument("--csv", type=Path, default=None)
    p_rep.add_argument("--pairs", type=str, default=None,
                       help="comma-separated baseline pairs, e.g. A:B2,B1:B2")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "calibrate":
            return cmd_calibrate(args)
        if args.command == "report":
            return cmd_report(args)
    except (ConfigError, CalibrationError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
