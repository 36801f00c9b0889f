"""Seeded scenario execution and sweep orchestration.

Cells of a sweep share nothing, so they can run in any order or in
parallel; output rows are sorted by cell key and floats are serialized
with repr, which makes metrics.csv byte-identical across schedules."""

from __future__ import annotations

import json
import multiprocessing
import traceback
from pathlib import Path

from .channel import CongestionModel
from .config import ScenarioConfig, SweepPlan
from .engine import Engine
from .metrics import (
    RunMetrics,
    build_comparisons,
    csv_header,
    csv_row,
    parse_csv,
)

DEFAULT_CALIBRATION = Path(__file__).resolve().parents[2] / "configs" / "calibration.json"


def load_calibration(path: str | Path | None) -> CongestionModel:
    if path is None:
        path = DEFAULT_CALIBRATION
    path = Path(path)
    if not path.exists():
        return CongestionModel.identity()
    return CongestionModel.from_json(path.read_text())


def run_scenario(config: ScenarioConfig,
                 congestion: CongestionModel | None = None,
                 record_decisions: bool = False) -> RunMetrics:
    engine = Engine(config, congestion, record_decisions=record_decisions)
    return engine.run()


def _key_dict(config: ScenarioConfig) -> dict:
    return {
        "family": config.family,
        "density_veh_km2": float(config.density_veh_km2),
        "footprint_area_km2": float(config.footprint_area_km2),
        "impairment_class": config.impairment_class,
        "context_class": config.context_class,
        "baseline": config.baseline,
        "seed": int(config.seed),
        "duration_s": float(config.duration_s),
        "dt_ms": int(config.dt_ms),
    }


def _run_cell(args) -> tuple[tuple, str]:
    config, congestion_json = args
    congestion = (CongestionModel.from_json(congestion_json)
                  if congestion_json else CongestionModel.identity())
    key = _key_dict(config)
    sort_key = config.cell_key()
    try:
        metrics = run_scenario(config, congestion)
        return sort_key, csv_row(key, metrics, status="ok")
    except Exception as exc:  # crash isolation: one cell never kills the sweep
        err = f"{type(exc).__name__}: {exc}"
        traceback.print_exc()
        return sort_key, csv_row(key, None, status="error", error=err)


def run_sweep(plan: SweepPlan, congestion: CongestionModel | None = None,
              parallel: int = 1) -> tuple[str, list[dict], int]:
    """Run all cells; returns (csv text, parsed rows, failure count)."""
    cells = plan.expand()
    cong_json = congestion.to_json() if congestion else None
    jobs = [(cfg, cong_json) for cfg in cells]
    if parallel > 1:
        with multiprocessing.Pool(parallel) as pool:
            results = pool.map(_run_cell, jobs)
    else:
        results = [_run_cell(job) for job in jobs]
    results.sort(key=lambda kv: kv[0])
    lines = [csv_header()] + [row for _, row in results]
    text = "\n".join(lines) + "\n"
    rows = parse_csv(text)
    failures = sum(1 for r in rows if r.get("status") != "ok")
    return text, rows, failures


def write_outputs(out_dir: str | Path, csv_text: str, rows: list[dict],
                  pairs: list[tuple[str, str]]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(csv_text)
    comparisons = build_comparisons(rows, pairs)
    (out / "comparisons.json").write_text(
        json.dumps([c.as_dict() for c in comparisons], indent=2, sort_keys=True))
