"""Vehicle kinematics, traffic generation at target areal density,
shared-resource hotspots, and the scenario families' disturbance
injectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .config import ConfigError, ScenarioConfig


class Mode(IntEnum):
    ENROUTE = 0
    HOLD = 1
    APPROACH = 2
    SERVICING = 3
    REJOINING = 4
    BACKSTOP = 5
    COMPLETED = 6


class Equipage(IntEnum):
    V2V = 0
    NON_V2V = 1
    INTRUDER = 2


@dataclass
class VehicleState:
    """Object view of one vehicle (the engine stores columns as arrays)."""

    id: int
    position: np.ndarray
    velocity: np.ndarray
    mode: Mode = Mode.ENROUTE
    equipage: Equipage = Equipage.V2V
    true_nav_error: np.ndarray = field(default_factory=lambda: np.zeros(3))
    detect_range_m: float = 400.0
    detect_prob: float = 0.95
    dropout: bool = False


@dataclass
class Hotspot:
    """A shared resource (pad cluster) with a service queue."""

    id: int
    position: np.ndarray
    pad_count: int = 2
    service_time_s: float = 15.0
    pads: list[int | None] = field(default_factory=list)         # vehicle per pad
    pad_timer_s: list[float] = field(default_factory=list)
    queue: list[int] = field(default_factory=list)               # granted order
    service_scale: float = 1.0                                   # pad-jitter state
    forced_waveoff_rate: float = 0.0

    def __post_init__(self):
        if not self.pads:
            self.pads = [None] * self.pad_count
            self.pad_timer_s = [0.0] * self.pad_count

    def free_pads(self) -> list[int]:
        return [i for i, v in enumerate(self.pads) if v is None]

    def servicing_count(self) -> int:
        return sum(1 for v in self.pads if v is not None)


@dataclass
class ContextEvent:
    """A changed-airspace-context event (pop-up constraint, temporary
    obstacle or validity change) with an active window."""

    kind: str
    position: np.ndarray
    radius_m: float
    t_issue_ms: int
    t_end_ms: int
    event_id: int = 0

    def __post_init__(self):
        if self.t_end_ms <= self.t_issue_ms:
            raise ConfigError("context event window is not well-ordered")

    def active(self, t_ms: float) -> bool:
        return self.t_issue_ms <= t_ms < self.t_end_ms


class SpawnError(ValueError):
    """Footprint too small for the requested spacing."""


@dataclass
class World:
    """Array-of-columns world state owned by the engine scheduler."""

    side_m: float
    ids: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    dest: np.ndarray
    band: np.ndarray
    mode: np.ndarray
    equipage: np.ndarray
    nav_err: np.ndarray
    spawned: int = 0
    completed_ops: int = 0
    hotspots: list[Hotspot] = field(default_factory=list)
    events: list[ContextEvent] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.ids)

    def active(self) -> np.ndarray:
        return self.mode != Mode.COMPLETED

    def v2v_capable(self) -> np.ndarray:
        return (self.equipage == Equipage.V2V) & self.active()


def random_point(side: float, rng: np.random.Generator, margin: float = 30.0):
    return margin + rng.random(2) * (side - 2 * margin)


def spawn_traffic(config: ScenarioConfig, rng: np.random.Generator) -> World:
    """Seeded initial world at n = round(density x area) vehicles.

    Origins are rejection-sampled to honor the minimum spacing seed
    distance; altitude bands are assigned round-robin; destinations are at
    least min_leg away. The mixed-equipage family marks a configured
    fraction NON_V2V/INTRUDER-like from the start.
    """
    n = config.n_vehicles()
    side = math.sqrt(config.footprint_area_km2) * 1000.0
    spacing = float(config.param("min_spawn_spacing_m"))
    bands = np.asarray(config.param("altitude_bands_m"), float)
    min_leg = float(config.param("min_leg_m"))
    if side < 4 * spacing:
        raise SpawnError("footprint too small for spawn spacing")

    pts = np.zeros((n, 2))
    placed = 0
    attempts = 0
    while placed < n:
        attempts += 1
        if attempts > 200 * n + 1000:
            raise SpawnError("could not honor minimum spawn spacing")
        cand = random_point(side, rng)
        if placed:
            d2 = np.sum((pts[:placed] - cand) ** 2, axis=1)
            if d2.min() < spacing * spacing:
                continue
        pts[placed] = cand
        placed += 1

    band = np.arange(n) % len(bands)
    pos = np.column_stack([pts, bands[band]])
    dest = np.zeros_like(pos)
    for i in range(n):
        for _ in range(1000):
            cand = random_point(side, rng)
            if np.hypot(*(cand - pts[i])) >= min_leg:
                break
        dest[i, :2] = cand
        dest[i, 2] = bands[band[i]]

    equip = np.full(n, Equipage.V2V, dtype=np.int8)
    if config.family == "mixed_equipage":
        frac = float(config.disturbance.get("non_v2v_fraction", 0.2))
        k = int(round(frac * n))
        order = rng.permutation(n)
        equip[order[:k]] = Equipage.NON_V2V

    world = World(
        side_m=side,
        ids=np.arange(n, dtype=np.int64),
        pos=pos,
        vel=np.zeros((n, 3)),
        dest=dest,
        band=band.astype(np.int64),
        mode=np.full(n, Mode.ENROUTE, dtype=np.int8),
        equipage=equip,
        nav_err=np.zeros((n, 3)),
        spawned=n,
    )

    for h in range(int(config.param("hotspot_count"))):
        hpos = np.array([side / 2.0 + 250.0 * h, side / 2.0, bands[0]])
        world.hotspots.append(Hotspot(
            id=h, position=hpos,
            pad_count=int(config.param("pad_count")),
            service_time_s=float(config.param("service_time_s"))))
    return world


def step_kinematics(pos: np.ndarray, vel: np.ndarray, accel: np.ndarray,
                    dt_s: float, accel_max: float = 3.0,
                    speed_max: float = 15.0) -> tuple[np.ndarray, np.ndarray]:
    """Point-mass integration: per-axis accel clamp, speed-norm clamp,
    trapezoidal position update. Works on single vehicles (shape (3,)) and
    stacked arrays (shape (n,3)) identically."""
    a = np.clip(accel, -accel_max, accel_max)
    v_new = vel + a * dt_s
    speed = np.sqrt(np.sum(v_new * v_new, axis=-1, keepdims=True))
    scale = np.where(speed > speed_max, speed_max / np.where(speed > 0, speed, 1.0), 1.0)
    v_new = v_new * scale
    p_new = pos + (vel + v_new) * (0.5 * dt_s)
    return p_new, v_new


@dataclass
class DisturbanceState:
    """Per-run mutable disturbance bookkeeping filled by inject_disturbance."""

    spoof_senders: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    replay_senders: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    corrupt_senders: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    corrupt_dir: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    dropout_until_ms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dropout_next_ms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    intruders_spawned: int = 0
    epicenter: np.ndarray | None = None


def select_fraction(n: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Deterministic selection of round(fraction*n) ids by seeded shuffle."""
    k = int(round(fraction * n))
    return np.sort(rng.permutation(n)[:k]).astype(np.int64)


def init_disturbance(config: ScenarioConfig, world: World,
                     rng: np.random.Generator) -> DisturbanceState:
    """One-time family-specific setup (sender marking, burst schedules)."""
    n = world.n
    d = config.disturbance
    state = DisturbanceState()
    family = config.family
    if family == "message_integrity":
        fault = d.get("fault", "spoof")
        frac = float(d.get("fraction", 0.2))
        if fault in ("spoof", "mixed"):
            state.spoof_senders = select_fraction(n, frac, rng)
        if fault in ("replay", "mixed"):
            pool = np.setdiff1d(np.arange(n), state.spoof_senders)
            k = int(round(frac * n))
            state.replay_senders = np.sort(rng.permutation(pool)[:min(k, len(pool))])
    elif family == "gnss_corruption":
        frac = float(d.get("fraction", 0.15))
        state.corrupt_senders = select_fraction(n, frac, rng)
        dirs = rng.standard_normal((len(state.corrupt_senders), 3))
        dirs[:, 2] *= 0.2
        norm = np.linalg.norm(dirs, axis=1, keepdims=True)
        state.corrupt_dir = dirs / np.where(norm > 0, norm, 1.0)
    elif family == "degraded_observability":
        state.dropout_next_ms = rng.uniform(
            0.0, float(d.get("dropout_interval_s", 12.0)) * 1000.0, n)
        state.dropout_until_ms = np.zeros(n)
    if world.hotspots:
        state.epicenter = world.hotspots[0].position.copy()
    return state


def gnss_error_m(config: ScenarioConfig, t_ms: float) -> float:
    """Magnitude of the navigation error ramp at time t."""
    d = config.disturbance
    t0 = float(d.get("start_s", 30.0)) * 1000.0
    ramp = float(d.get("ramp_s", 60.0)) * 1000.0
    emax = float(d.get("error_max_m", 60.0))
    if t_ms <= t0:
        return 0.0
    return emax * min(1.0, (t_ms - t0) / ramp)


def update_dropouts(config: ScenarioConfig, state: DisturbanceState,
                    t_ms: float, rng: np.random.Generator) -> np.ndarray:
    """Advance per-vehicle sensor dropout bursts; returns the active mask."""
    if state.dropout_next_ms.size == 0:
        return np.zeros(0, dtype=bool)
    d = config.disturbance
    burst_s = float(d.get("dropout_burst_s", 3.0))
    interval_s = float(d.get("dropout_interval_s", 12.0))
    due = t_ms >= state.dropout_next_ms
    for i in np.nonzero(due)[0]:
        state.dropout_until_ms[i] = t_ms + rng.uniform(0.5, 2.0) * burst_s * 1000.0
        state.dropout_next_ms[i] = state.dropout_until_ms[i] + \
            rng.uniform(0.5, 1.5) * interval_s * 1000.0
    return t_ms < state.dropout_until_ms


# (service-time jitter sd as a fraction, forced wave-off rate per approach-second)
DISRUPTION_LEVELS = {
    "low": (0.2, 0.005),
    "medium": (0.5, 0.015),
    "high": (1.0, 0.03),
}


def disruption_params(config: ScenarioConfig) -> tuple[float, float]:
    level = str(config.disturbance.get("disruption", "medium"))
    if level not in DISRUPTION_LEVELS:
        raise ConfigError(f"unknown disruption level {level!r}")
    return DISRUPTION_LEVELS[level]


def inject_disturbance(config: ScenarioConfig, world: World,
                       state: DisturbanceState, t_ms: float,
                       rng: np.random.Generator) -> list[ContextEvent]:
    """Per-step family-specific disturbance injection.

    Spawns intruder bursts, emits context events, and refreshes hotspot
    jitter parameters; returns context events issued this step. GNSS ramps
    and sensor dropouts are queried separately since they are continuous.
    """
    events: list[ContextEvent] = []
    d = config.disturbance
    if config.family == "context_delay":
        first = float(d.get("start_s", 30.0)) * 1000.0
        every = float(d.get("every_s", 90.0)) * 1000.0
        window = float(d.get("window_s", 60.0)) * 1000.0
        k = (t_ms - first) / every
        if t_ms >= first and abs(k - round(k)) < 1e-9:
            center = random_point(world.side_m, rng, margin=world.side_m * 0.25)
            event = ContextEvent(
                kind=str(d.get("kind", "POPUP_CONSTRAINT")),
                position=np.array([center[0], center[1], 60.0]),
                radius_m=float(d.get("constraint_radius_m", 80.0)),
                t_issue_ms=int(t_ms), t_end_ms=int(t_ms + window),
                event_id=len(world.events))
            world.events.append(event)
            events.append(event)
    if config.family in ("hotspot_pad_jitter", "intruder_burst"):
        jitter_sd, waveoff_rate = disruption_params(config)
        for hs in world.hotspots:
            hs.forced_waveoff_rate = waveoff_rate
            hs.service_scale = max(0.3, 1.0 + jitter_sd * rng.standard_normal()) \
                if config.family == "hotspot_pad_jitter" else 1.0
    return events
