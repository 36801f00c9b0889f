"""Scenario and sweep configuration: validated, file-loadable, and the
single source of per-run parameter defaults."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

FAMILIES = (
    "comms_impairment",
    "context_delay",
    "message_integrity",
    "gnss_corruption",
    "degraded_observability",
    "hotspot_pad_jitter",
    "intruder_burst",
    "mixed_equipage",
)

BASELINES = ("A", "B1", "B2", "B2_NOAUTH")

IMPAIRMENT_NAMES = ("N0", "N1", "N2", "N3")
CONTEXT_NAMES = ("C0", "C1", "C2", "C3")


class ConfigError(ValueError):
    """Invalid scenario or sweep configuration."""


# Engine defaults; any key can be overridden per-scenario via `params`.
DEFAULT_PARAMS: dict[str, Any] = {
    # flight
    "cruise_speed_mps": 12.0,
    "accel_max_mps2": 3.0,
    "speed_max_mps": 15.0,
    "altitude_bands_m": [30.0, 60.0, 90.0],
    "arrive_radius_m": 20.0,
    "min_leg_m": 250.0,
    "min_spawn_spacing_m": 20.0,
    # protocol
    "beacon_ttl_ms": 1000,
    "coord_ttl_ms": 1000,
    "coord_budget_per_step": 2,
    "sigma_pos_m": 3.0,
    "yield_timeout_ms": 500,
    "commit_validity_ms": 3000,
    # controller
    "protected_radius_m": 15.0,
    "conflict_horizon_s": 8.0,
    "backstop_sep_m": 10.0,
    "backstop_ttc_s": 3.0,
    "backstop_exit_factor": 1.5,
    "backstop_exit_hold_s": 2.0,
    "mode_hysteresis_s": 2.0,
    "guarded_capacity_scale": 0.5,
    "avoid_speed_mps": 5.0,
    "caution_margin_m": 10.0,
    "guard_radius_m": 130.0,
    # sensing
    "detect_range_m": 400.0,
    "detect_prob": 0.95,
    "sensor_noise_m": 2.0,
    "track_hold_ms": 1000.0,
    "relevant_range_m": 300.0,
    # strategic baseline
    "reauth_min_s": 5.0,
    "reauth_max_s": 15.0,
    "dss_sync_period_s": 10.0,
    "detour_offset_m": 150.0,
    # channel
    "max_range_m": 1000.0,
    "nlos_extra_loss": 0.15,
    "nlos_extra_latency_ms": 10.0,
    # hotspot
    "hotspot_count": 0,
    "pad_count": 2,
    "service_time_s": 15.0,
    "hotspot_mission_fraction": 0.35,
    "request_radius_m": 350.0,
    "loiter_radius_m": 300.0,
    "gate_radius_m": 120.0,
    "queue_radius_m": 250.0,
    "rejoin_backoff_s": [8.0, 20.0],
    "rejoin_radius_m": 150.0,
    "grant_validity_ms": 45000,
    # metrics
    "qual_window_s": 60.0,
    "qual_min_sep_m": 5.0,
    "qual_sustain_s": 1.0,
    "deadlock_window_s": 20.0,
}


@dataclass
class ScenarioConfig:
    """One seeded scenario run."""

    family: str = "comms_impairment"
    density_veh_km2: float = 50.0
    footprint_area_km2: float = 2.0
    impairment_class: str = "N0"
    context_class: str = "C0"
    baseline: str = "B2"
    seed: int = 0
    duration_s: float = 600.0
    dt_ms: int = 100
    disturbance: dict[str, Any] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> list[str]:
        errors = []
        if self.family not in FAMILIES:
            errors.append(f"unknown family {self.family!r}")
        if self.baseline not in BASELINES:
            errors.append(f"unknown baseline {self.baseline!r}")
        if self.impairment_class not in IMPAIRMENT_NAMES:
            errors.append(f"unknown impairment class {self.impairment_class!r}")
        if self.context_class not in CONTEXT_NAMES:
            errors.append(f"unknown context class {self.context_class!r}")
        if not self.density_veh_km2 > 0:
            errors.append("density_veh_km2 must be > 0")
        if not self.footprint_area_km2 > 0:
            errors.append("footprint_area_km2 must be > 0")
        if not self.duration_s > 0:
            errors.append("duration_s must be > 0")
        if not (isinstance(self.dt_ms, int) and self.dt_ms > 0):
            errors.append("dt_ms must be a positive integer")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            errors.append("seed must be a non-negative integer")
        unknown = set(self.params) - set(DEFAULT_PARAMS)
        if unknown:
            errors.append(f"unknown params: {sorted(unknown)}")
        return errors

    def param(self, key: str):
        return self.params.get(key, DEFAULT_PARAMS[key])

    def n_vehicles(self) -> int:
        return int(round(self.density_veh_km2 * self.footprint_area_km2))

    def n_steps(self) -> int:
        return int(round(self.duration_s * 1000.0 / self.dt_ms))

    def cell_key(self) -> tuple:
        return (self.family, float(self.density_veh_km2),
                self.impairment_class, self.context_class,
                self.baseline, int(self.seed))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        cfg = cls(**data)
        errors = cfg.validate()
        if errors:
            raise ConfigError("; ".join(errors))
        return cfg

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ScenarioConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        return cls.from_dict(data)


def derive_seed(master_seed: int, cell_key: tuple) -> int:
    """Stable per-cell seed: hashing the cell key means adding cells to a
    plan never reshuffles the seeds of existing cells."""
    text = repr((int(master_seed), cell_key)).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


@dataclass
class SweepPlan:
    """Cross-product sweep: families x densities x classes x baselines x seeds."""

    base: ScenarioConfig
    families: list[str] = field(default_factory=lambda: ["comms_impairment"])
    densities: list[float] = field(default_factory=lambda: [50.0])
    impairment_classes: list[str] = field(default_factory=lambda: ["N0"])
    context_classes: list[str] = field(default_factory=lambda: ["C0"])
    baselines: list[str] = field(default_factory=lambda: ["B2"])
    n_seeds: int = 1
    master_seed: int = 0
    comparison_pairs: list[tuple[str, str]] = field(default_factory=list)

    def expand(self) -> list[ScenarioConfig]:
        cells = []
        for family in self.families:
            for density in self.densities:
                for nclass in self.impairment_classes:
                    for cclass in self.context_classes:
                        # the seed key excludes the baseline so matched
                        # baselines share seeds (paired comparisons)
                        for idx in range(self.n_seeds):
                            key = (family, float(density), nclass, cclass, idx)
                            seed = derive_seed(self.master_seed, key)
                            for baseline in self.baselines:
                                cells.append(replace(
                                    self.base, family=family,
                                    density_veh_km2=float(density),
                                    impairment_class=nclass,
                                    context_class=cclass, baseline=baseline,
                                    seed=seed))
        keys = [c.cell_key() for c in cells]
        if len(set(keys)) != len(keys):
            raise ConfigError("sweep plan expands to duplicate cells")
        errors = [e for c in cells for e in c.validate()]
        if errors:
            raise ConfigError("; ".join(sorted(set(errors))))
        return cells

    @classmethod
    def from_yaml(cls, path: str | Path) -> "SweepPlan":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        base = ScenarioConfig.from_dict(data.pop("base", {}))
        pairs = [tuple(p) for p in data.pop("comparison_pairs", [])]
        for pair in pairs:
            if len(pair) != 2 or not set(pair) <= set(BASELINES):
                raise ConfigError(f"bad comparison pair {pair!r}")
        known = {"families", "densities", "impairment_classes",
                 "context_classes", "baselines", "n_seeds", "master_seed"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown sweep fields: {sorted(unknown)}")
        return cls(base=base, comparison_pairs=pairs, **data)
