"""Sweep runner and CLI tests: cardinality, byte-identical determinism,
parallelism invariance, crash isolation, exit codes, output files."""

import json
from pathlib import Path

import pytest
import yaml

from tacsim.cli import main as cli_main
from tacsim.config import ConfigError, ScenarioConfig, SweepPlan, derive_seed
from tacsim.runner import load_calibration, run_sweep

CONG = load_calibration("configs/calibration.json")


def small_plan(**kw):
    base = ScenarioConfig(family="comms_impairment", footprint_area_km2=0.05,
                          duration_s=15.0)
    fields = dict(base=base, families=["comms_impairment"],
                  densities=[50.0, 150.0], impairment_classes=["N0", "N3"],
                  baselines=["B2", "B1"], n_seeds=3, master_seed=99,
                  comparison_pairs=[("B1", "B2")])
    fields.update(kw)
    return SweepPlan(**fields)


def test_sweep_cardinality():
    plan = small_plan(densities=[50.0, 150.0], impairment_classes=["N0", "N3"],
                      baselines=["B2", "B1"], n_seeds=3)
    assert len(plan.expand()) == 2 * 2 * 2 * 3


def test_seed_shared_across_baselines():
    cells = small_plan().expand()
    by_key = {}
    for c in cells:
        by_key.setdefault((c.density_veh_km2, c.impairment_class), {}).setdefault(
            c.seed, set()).add(c.baseline)
    for cell in by_key.values():
        for baselines in cell.values():
            assert baselines == {"B1", "B2"}


def test_seed_derivation_stable_under_plan_growth():
    key = ("comms_impairment", 50.0, "N0", "C0", 2)
    assert derive_seed(99, key) == derive_seed(99, key)
    small = small_plan(densities=[50.0])
    big = small_plan(densities=[50.0, 150.0, 250.0])
    seeds_small = {c.cell_key(): c.seed for c in small.expand()}
    seeds_big = {c.cell_key(): c.seed for c in big.expand()}
    for cell_key, seed in seeds_small.items():
        assert seeds_big[cell_key] == seed


def test_sweep_deterministic_and_parallel_invariant():
    plan = small_plan(densities=[50.0], impairment_classes=["N0"], n_seeds=2)
    text1, _, f1 = run_sweep(plan, CONG, parallel=1)
    text2, _, f2 = run_sweep(plan, CONG, parallel=1)
    assert text1 == text2 and f1 == f2 == 0
    text4, _, _ = run_sweep(plan, CONG, parallel=4)
    assert text4 == text1


def test_crash_isolation(monkeypatch):
    plan = small_plan(densities=[50.0], impairment_classes=["N0"],
                      baselines=["B2"], n_seeds=2)
    cells = plan.expand()
    import tacsim.runner as runner_mod
    real = runner_mod.run_scenario
    bad_seed = cells[0].seed

    def flaky(config, congestion=None, record_decisions=False):
        if config.seed == bad_seed:
            raise RuntimeError("boom")
        return real(config, congestion, record_decisions)

    monkeypatch.setattr(runner_mod, "run_scenario", flaky)
    text, rows, failures = run_sweep(plan, CONG, parallel=1)
    assert failures == 1
    ok = [r for r in rows if r["status"] == "ok"]
    assert len(ok) == len(rows) - 1
    assert any("boom" in r["error"] for r in rows if r["status"] == "error")


def test_paired_comparisons_emitted(tmp_path):
    plan = small_plan(densities=[50.0], impairment_classes=["N0"], n_seeds=3)
    text, rows, _ = run_sweep(plan, CONG, parallel=1)
    from tacsim.runner import write_outputs
    write_outputs(tmp_path, text, rows, plan.comparison_pairs)
    comps = json.loads((tmp_path / "comparisons.json").read_text())
    prr_comps = [c for c in comps if c["metric"] == "prr"]
    assert len(prr_comps) == 1
    assert prr_comps[0]["n"] == 3


def test_cli_run_and_exit_codes(tmp_path):
    out = tmp_path / "out"
    rc = cli_main(["run", "--config", "configs/families/comms_impairment.yaml",
                   "--seed", "3", "--out", str(out), "--density", "50",
                   "--class", "N0"])
    assert rc == 0
    assert (out / "metrics.csv").exists()


def test_cli_rejects_bad_config(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("family: not_a_family\n")
    rc = cli_main(["run", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_cli_run_duration_steps():
    cfg = ScenarioConfig(duration_s=60.0, dt_ms=100)
    assert cfg.n_steps() == 600


def test_cli_sweep_report_calibrate(tmp_path):
    plan_path = tmp_path / "plan.yaml"
    plan_path.write_text(yaml.safe_dump({
        "base": {"family": "comms_impairment", "footprint_area_km2": 0.05,
                 "duration_s": 10.0},
        "densities": [50.0], "impairment_classes": ["N0"],
        "baselines": ["B1", "B2"], "n_seeds": 2, "master_seed": 5,
        "comparison_pairs": [["B1", "B2"]]}))
    out = tmp_path / "sweep_out"
    rc = cli_main(["sweep", "--config", str(plan_path), "--out", str(out),
                   "--calibration", "configs/calibration.json"])
    assert rc == 0
    assert (out / "metrics.csv").exists()
    assert (out / "comparisons.json").exists()

    rc = cli_main(["report", "--csv", str(out / "metrics.csv"),
                   "--out", str(out), "--pairs", "B1:B2"])
    assert rc == 0

    rc = cli_main(["calibrate", "--out", str(tmp_path)])
    assert rc == 0
    regenerated = (tmp_path / "calibration.json").read_text()
    assert regenerated == Path("configs/calibration.json").read_text()


def test_scenario_yaml_round_trip(tmp_path):
    for family_file in Path("configs/families").glob("*.yaml"):
        cfg = ScenarioConfig.from_yaml(family_file)
        assert cfg.validate() == []


def test_unknown_param_rejected():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"params": {"not_a_param": 1}})
