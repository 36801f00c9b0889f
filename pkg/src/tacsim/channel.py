"""Simulated broadcast channel: per-delivery latency/jitter/loss by
impairment class, density-driven congestion calibrated against anchor
targets, LOS/NLOS geometry penalties, the 250 ms tactical deadline, and
delayed context-update propagation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

DEADLINE_MS = 250.0
MIN_LATENCY_MS = 1.0
_Z95 = NormalDist().inv_cdf(0.95)   # 1.6448536...

# (base one-way latency ms, jitter sd ms, packet loss probability)
IMPAIRMENT_CLASSES: dict[str, tuple[float, float, float]] = {
    "N0": (20.0, 5.0, 0.005),
    "N1": (50.0, 15.0, 0.01),
    "N2": (120.0, 30.0, 0.03),
    "N3": (250.0, 50.0, 0.06),
}

# (radius m, propagation delay s, partial delay s, completeness, relay delay s)
CONTEXT_CLASSES: dict[str, tuple[float, float, float, float, float]] = {
    "C0": (140.0, 2.0, 1.0, 1.0, 0.5),
    "C1": (160.0, 6.0, 2.0, 0.9, 0.75),
    "C2": (180.0, 14.0, 5.0, 0.7, 1.0),
    "C3": (200.0, 24.0, 8.0, 0.5, 1.25),
}


class CalibrationError(ValueError):
    """Anchor table cannot be met by the channel model."""


@dataclass(frozen=True)
class ImpairmentProfile:
    klass: str
    base_latency_ms: float
    jitter_sd_ms: float
    loss_prob: float

    @classmethod
    def named(cls, klass: str) -> "ImpairmentProfile":
        if klass not in IMPAIRMENT_CLASSES:
            raise KeyError(f"unknown impairment class {klass!r}")
        return cls(klass, *IMPAIRMENT_CLASSES[klass])


@dataclass(frozen=True)
class ContextProfile:
    klass: str
    radius_m: float
    propagation_delay_s: float
    partial_delay_s: float
    completeness: float
    relay_delay_s: float

    @classmethod
    def named(cls, klass: str) -> "ContextProfile":
        if klass not in CONTEXT_CLASSES:
            raise KeyError(f"unknown context class {klass!r}")
        return cls(klass, *CONTEXT_CLASSES[klass])


@dataclass
class GeometryModel:
    """Axis-aligned obstruction boxes; a link is NLOS iff the tx-rx
    segment intersects any box."""

    boxes: np.ndarray = field(default_factory=lambda: np.zeros((0, 6)))
    nlos_extra_loss: float = 0.15
    nlos_extra_latency_ms: float = 10.0
    max_range_m: float = 1000.0

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 6)

    def is_nlos(self, tx: np.ndarray, rx: np.ndarray) -> bool:
        return bool(segment_intersects_boxes(np.asarray(tx, float),
                                             np.asarray(rx, float), self.boxes))


def segment_intersects_boxes(p0: np.ndarray, p1: np.ndarray,
                             boxes: np.ndarray) -> bool:
    """Slab test of segment p0-p1 against axis-aligned boxes
    (xmin,ymin,zmin,xmax,ymax,zmax rows)."""
    if boxes.shape[0] == 0:
        return False
    d = p1 - p0
    lo, hi = boxes[:, :3], boxes[:, 3:]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(d != 0.0, 1.0 / np.where(d == 0.0, 1.0, d), np.inf)
        t0 = (lo - p0) * inv
        t1 = (hi - p0) * inv
    # Axes where the segment is parallel and outside the slab never hit.
    parallel_out = (d == 0.0) & ((p0 < lo) | (p0 > hi))
    tmin = np.where(d != 0.0, np.minimum(t0, t1), -np.inf)
    tmax = np.where(d != 0.0, np.maximum(t0, t1), np.inf)
    enter = tmin.max(axis=1)
    exit_ = tmax.min(axis=1)
    hit = (enter <= exit_) & (exit_ >= 0.0) & (enter <= 1.0) & ~parallel_out.any(axis=1)
    return bool(hit.any())


@dataclass
class CongestionModel:
    """Density-indexed congestion table per impairment class.

    For each class: densities (veh/km^2) with matching extra loss
    probability, queue delay (ms) and jitter scale arrays. Lookup is
    piecewise-linear in density, clamped at the table ends. Extra loss and
    queue delay must be non-decreasing in density.
    """

    tables: dict[str, dict[str, list[float]]] = field(default_factory=dict)

    def __post_init__(self):
        for klass, tab in self.tables.items():
            d = np.asarray(tab["density"], float)
            if np.any(np.diff(d) <= 0):
                raise CalibrationError(f"{klass}: densities not increasing")
            for key in ("extra_loss", "queue_ms"):
                v = np.asarray(tab[key], float)
                if np.any(np.diff(v) < -1e-12):
                    raise CalibrationError(f"{klass}: {key} not non-decreasing")

    def lookup(self, density: float, klass: str) -> tuple[float, float, float]:
        """(extra_loss, queue_delay_ms, jitter_scale) at a density."""
        tab = self.tables.get(klass)
        if tab is None:
            return 0.0, 0.0, 1.0
        d = np.asarray(tab["density"], float)
        return (
            float(np.interp(density, d, tab["extra_loss"])),
            float(np.interp(density, d, tab["queue_ms"])),
            float(np.interp(density, d, tab["jitter_scale"])),
        )

    def prr(self, density: float, klass: str) -> float:
        tab = self.tables.get(klass)
        base_loss = ImpairmentProfile.named(klass).loss_prob
        if tab is None:
            return 1.0 - base_loss
        d = np.asarray(tab["density"], float)
        return float(np.interp(density, d, tab["prr"]))

    def to_json(self) -> str:
        return json.dumps({"tables": self.tables}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CongestionModel":
        return cls(tables=json.loads(text)["tables"])

    @classmethod
    def identity(cls) -> "CongestionModel":
        return cls(tables={})


def prr_model(density: float, klass: str, model: CongestionModel) -> float:
    """Expected neighborhood packet reception ratio at a density."""
    if density < 0:
        raise ValueError("density must be >= 0")
    return model.prr(density, klass)


def calibrate_congestion(anchors: dict) -> CongestionModel:
    """Solve the congestion table from per-class anchor targets.

    `anchors` maps class name to a list of rows
    {density, prr, p95_ms, deadline_miss (optional)} sorted by density.
    Queue delay and jitter scale are solved so that the Gaussian latency
    model base + queue + N(0, jitter*scale) meets the p95 target and,
    where given, the deadline-miss target:

        p95  = base + queue + z95 * sigma_eff
        miss = P(base + queue + sigma_eff * Z > deadline)

    Extra loss comes straight from the PRR target. Density 0 is pinned to
    zero congestion.
    """
    nd = NormalDist()
    tables: dict[str, dict[str, list[float]]] = {}
    for klass, rows in anchors.items():
        profile = ImpairmentProfile.named(klass)
        base, sigma = profile.base_latency_ms, profile.jitter_sd_ms
        dens = [0.0]
        prr = [1.0 - profile.loss_prob]
        extra = [0.0]
        queue = [0.0]
        jscale = [1.0]
        for row in rows:
            d = float(row["density"])
            if d <= dens[-1]:
                raise CalibrationError(f"{klass}: anchor densities must increase")
            target_prr = float(row["prr"])
            loss = 1.0 - target_prr
            e = loss - profile.loss_prob
            if e < -1e-9:
                raise CalibrationError(
                    f"{klass}@{d}: PRR target above the class loss floor")
            p95 = float(row["p95_ms"])
            dm = row.get("deadline_miss")
            if dm is not None:
                dm = float(dm)
                if not 0.0 < dm < 1.0:
                    raise CalibrationError(f"{klass}@{d}: deadline_miss not in (0,1)")
                z_dm = nd.inv_cdf(1.0 - dm)
                denom = _Z95 - z_dm
                if abs(denom) < 1e-9 or (p95 - DEADLINE_MS) / denom <= 0:
                    raise CalibrationError(
                        f"{klass}@{d}: (p95, deadline_miss) pair infeasible")
                sig_eff = (p95 - DEADLINE_MS) / denom
                q = DEADLINE_MS - base - sig_eff * z_dm
            else:
                sig_eff = sigma
                q = p95 - base - _Z95 * sigma
            if q < -1e-9:
                raise CalibrationError(f"{klass}@{d}: implied queue delay negative")
            if q < queue[-1] - 1e-9 or e < extra[-1] - 1e-9:
                raise CalibrationError(f"{klass}@{d}: anchors not monotone")
            dens.append(d)
            prr.append(target_prr)
            extra.append(max(0.0, e))
            queue.append(max(0.0, q))
            jscale.append(sig_eff / sigma)
        tables[klass] = {
            "density": dens, "prr": prr, "extra_loss": extra,
            "queue_ms": queue, "jitter_scale": jscale,
        }
    return CongestionModel(tables=tables)


@dataclass(frozen=True)
class DeliveryOutcome:
    delivered: bool
    latency_ms: float = 0.0
    deadline_missed: bool = False
    nlos: bool = False


def link_params(density: float, profile: ImpairmentProfile,
                congestion: CongestionModel) -> tuple[float, float, float]:
    """(loss_prob, fixed_delay_ms, jitter_sd_ms) before geometry effects."""
    extra_loss, queue_ms, jscale = congestion.lookup(density, profile.klass)
    return (min(1.0, profile.loss_prob + extra_loss),
            profile.base_latency_ms + queue_ms,
            profile.jitter_sd_ms * jscale)


def deliver(tx_pos, rx_pos, density: float, profile: ImpairmentProfile,
            congestion: CongestionModel, geometry: GeometryModel,
            rng: np.random.Generator) -> DeliveryOutcome:
    """Sample one broadcast delivery.

    Convention (shared with the vectorized kernels): lost iff
    uniform < loss probability; latency = fixed + jitter*normal, floored
    at MIN_LATENCY_MS; deadline missed iff latency > DEADLINE_MS.
    """
    tx = np.asarray(tx_pos, float)
    rx = np.asarray(rx_pos, float)
    if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(rx))) or density < 0:
        raise ValueError("positions must be finite and density >= 0")
    if float(np.linalg.norm(rx - tx)) > geometry.max_range_m:
        return DeliveryOutcome(False)
    nlos = geometry.is_nlos(tx, rx)
    loss, fixed, sigma = link_params(density, profile, congestion)
    if nlos:
        loss = min(1.0, loss + geometry.nlos_extra_loss)
        fixed = fixed + geometry.nlos_extra_latency_ms
    if rng.random() < loss:
        return DeliveryOutcome(False, nlos=nlos)
    latency = max(MIN_LATENCY_MS, fixed + sigma * rng.standard_normal())
    return DeliveryOutcome(True, latency, latency > DEADLINE_MS, nlos)


NEVER = math.inf


@dataclass
class AwarenessRecord:
    """Per-aircraft awareness outcome for one context event (seconds since
    event issue; NEVER = inf). `inside` marks aircraft within the
    notification radius at issue time (the population the update
    concerns)."""

    t_partial_s: np.ndarray
    t_full_s: np.ndarray
    relayed: np.ndarray
    inside: np.ndarray

    def awareness_s(self) -> np.ndarray:
        return np.minimum(self.t_partial_s, self.t_full_s)


def context_propagation(event_pos, positions: np.ndarray, profile: ContextProfile,
                        rng: np.random.Generator, *, v2v_mask: np.ndarray | None = None,
                        relay_enabled: bool = False,
                        relay_range_m: float = 1000.0) -> AwarenessRecord:
    """Delayed/incomplete propagation of a changed-context event.

    Aircraft inside profile.radius_m at issue time are direct receivers
    independently with probability `completeness`; they gain partial
    awareness at +partial_delay_s and full awareness at
    +propagation_delay_s. With relays enabled, aware aircraft flood-fill
    unaware in-range neighbors, each hop adding relay_delay_s (relayed
    awareness is partial-equivalent).
    """
    positions = np.asarray(positions, float)
    n = positions.shape[0]
    dist = np.linalg.norm(positions - np.asarray(event_pos, float), axis=1)
    inside = dist <= profile.radius_m
    selected = inside & (rng.random(n) < profile.completeness)
    t_partial = np.where(selected, profile.partial_delay_s, NEVER)
    t_full = np.where(selected, profile.propagation_delay_s, NEVER)
    relayed = np.zeros(n, dtype=bool)
    if relay_enabled and n:
        can_relay = np.ones(n, dtype=bool) if v2v_mask is None else np.asarray(v2v_mask, bool)
        sep = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=2)
        in_range = (sep <= relay_range_m) & ~np.eye(n, dtype=bool)
        t_aware = t_partial.copy()
        for _ in range(n):
            src = can_relay & np.isfinite(t_aware)
            if not src.any():
                break
            # earliest relay arrival from any aware source
            cand = np.where(in_range[src][:, :], t_aware[src][:, None], NEVER)
            arrival = cand.min(axis=0) + profile.relay_delay_s
            better = can_relay & (arrival < t_aware)
            if not better.any():
                break
            t_aware[better] = arrival[better]
            relayed[better] = True
        t_partial = t_aware
    return AwarenessRecord(t_partial, t_full, relayed, inside)
