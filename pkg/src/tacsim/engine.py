"""Deterministic event-loop simulation core.

One Engine instance runs one seeded scenario: vehicles fly legs (and
hotspot missions), broadcast beacons at 10 Hz through the impairment
channel, validate and fuse what they receive, and act per their baseline
(A strategic-only, B1 non-V2V tactical, B2 V2V tactical, B2_NOAUTH
ablation). Heavy per-step pair work runs through the kernels backend;
everything event-like (transactions, hotspot admission, holds) is plain
Python over small sets.

Determinism: all randomness flows from named child streams of the run
seed (world, sensors, channel, attacker, context, controller), consumed
in a fixed per-step order; injected-attacker draws never touch the honest
streams, which is what makes rejected traffic bit-invisible to the rest
of the run.

The engine's belief arrays carry the kinematic core of each beacon
(position/velocity/issue time/integrity); vehicles fly straight legs, so
constant-velocity extrapolation coincides with first-segment intent
extrapolation. Full intent handling lives at the protocol level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import (
    DEADLINE_MS,
    CongestionModel,
    GeometryModel,
    ImpairmentProfile,
    ContextProfile,
    context_propagation,
    link_params,
)
from .config import ScenarioConfig
from .controller import (
    ControllerMode,
    Phase,
    TransactionState,
    avoidance_velocity,
    backstop_accel,
    cruise_accel,
    hotspot_admission,
    run_transaction,
)
from .messages import (
    CoordFunction,
    CoordinationMessage,
    Lifecycle,
    compute_auth_tag,
    sign,
    tag_input,
)
from .metrics import RunMetrics, percentile, percentile_from_hist, qualify_windows
from .trust import DEFAULT_POLICY, FreshnessPolicy, replay_probe
from .world import (
    Equipage,
    Mode,
    World,
    gnss_error_m,
    init_disturbance,
    inject_disturbance,
    spawn_traffic,
    update_dropouts,
)

FLEET_KEY = b"tacsim-pre-shared-fleet-key\x00\x00\x00\x00\x00"
LAT_BIN_MS = 0.25
LAT_BINS = 8000

# plain ints for hot-loop comparisons (enum attribute access is costly)
M_ENROUTE = int(Mode.ENROUTE)
M_HOLD = int(Mode.HOLD)
M_APPROACH = int(Mode.APPROACH)
M_SERVICING = int(Mode.SERVICING)
M_REJOINING = int(Mode.REJOINING)
M_COMPLETED = int(Mode.COMPLETED)
E_V2V = int(Equipage.V2V)
E_INTRUDER = int(Equipage.INTRUDER)


@dataclass
class _Batch:
    """One group of beacon deliveries sharing a send step."""

    tx_idx: np.ndarray          # (k,) vehicle slot per column
    seq: np.ndarray             # (k,)
    t_issue: np.ndarray         # (k,) ms
    pos: np.ndarray             # (k,3) broadcast position
    vel: np.ndarray             # (k,3)
    integ: np.ndarray           # (k,) int8
    tag_valid: np.ndarray       # (k,) bool
    arr_mask: np.ndarray        # (n,k) delivered to rx
    on_time: np.ndarray         # (n,k)
    injected: bool = False      # ground-truth invalid traffic


@dataclass
class _ContextTrack:
    event_id: int
    position: np.ndarray
    radius_m: float
    t_issue_ms: float
    t_end_ms: float
    aware_ms: np.ndarray        # per-vehicle awareness time (ms, inf = never)
    reaction_ms: np.ndarray
    handled: np.ndarray         # vehicle reacted (detour/hold decided)
    inside: np.ndarray          # within the notification radius at issue


class Engine:
    def __init__(self, config: ScenarioConfig,
                 congestion: CongestionModel | None = None,
                 record_decisions: bool = False):
        errors = config.validate()
        if errors:
            raise ValueError("; ".join(errors))
        self.config = config
        self.congestion = congestion or CongestionModel.identity()
        self.record_decisions = record_decisions

        self.dt_ms = config.dt_ms
        self.dt_s = config.dt_ms / 1000.0
        self.n_steps = config.n_steps()
        self.profile = ImpairmentProfile.named(config.impairment_class)
        self.context_profile = ContextProfile.named(config.context_class)
        self.geometry = GeometryModel(
            boxes=np.asarray(config.disturbance.get("obstruction_boxes", []),
                             float).reshape(-1, 6),
            nlos_extra_loss=float(config.param("nlos_extra_loss")),
            nlos_extra_latency_ms=float(config.param("nlos_extra_latency_ms")),
            max_range_m=float(config.param("max_range_m")))
        self.policy: FreshnessPolicy = DEFAULT_POLICY

        ss = np.random.SeedSequence(config.seed)
        (self.rng_world, self.rng_sensor, self.rng_channel,
         self.rng_attacker, self.rng_context, self.rng_ctrl,
         self.rng_coord_channel) = (
            np.random.Generator(np.random.PCG64(child)) for child in ss.spawn(7))

        self.world: World = spawn_traffic(config, self.rng_world)
        self.dist_state = init_disturbance(config, self.world, self.rng_world)
        self._reserve_intruder_slots()
        n = self.world.n
        self.cap = n

        p = config.param
        self.r0 = float(p("protected_radius_m"))
        self.horizon_s = float(p("conflict_horizon_s"))
        self.sigma_pos = float(p("sigma_pos_m"))
        self.cruise = float(p("cruise_speed_mps"))
        self.a_max = float(p("accel_max_mps2"))
        self.v_max = float(p("speed_max_mps"))
        self.beacon_ttl = float(p("beacon_ttl_ms"))
        self.is_b2 = config.baseline in ("B2", "B2_NOAUTH")
        self.check_auth = config.baseline != "B2_NOAUTH"
        self.is_tactical = config.baseline != "A"

        self.loss_p, self.fixed_ms, self.sigma_ms = link_params(
            config.density_veh_km2, self.profile, self.congestion)

        # beliefs (rx, tx)
        self.bel_pos = np.zeros((n, n, 3))
        self.bel_vel = np.zeros((n, n, 3))
        self.bel_t = np.full((n, n), -1e18)
        self.bel_integ = np.zeros((n, n), dtype=np.int8)
        self.bel_valid = np.zeros((n, n), dtype=bool)
        self.suspect = np.zeros((n, n), dtype=bool)
        self.highest = np.full((n, n), -1, dtype=np.int64)
        self.bitmap = np.zeros((n, n), dtype=np.uint64)

        # sensor tracks (observer, target)
        self.trk_t = np.full((n, n), -1e18)
        self.trk_pos = np.zeros((n, n, 3))
        self.trk_vel = np.zeros((n, n, 3))

        self.seq_counter = np.zeros(n, dtype=np.int64)
        self.pending: dict[int, list[_Batch]] = {}
        self.coord_pending: dict[int, list[tuple[int, CoordinationMessage, bool]]] = {}
        self.outbox: list[CoordinationMessage] = []

        # per-vehicle controller state
        self.comm_mode = np.full(n, int(ControllerMode.COOPERATIVE), dtype=np.int8)
        self.mode_pending = np.full(n, -1, dtype=np.int8)
        self.mode_pending_since = np.zeros(n)
        self.mode_hysteresis_ms = float(p("mode_hysteresis_s")) * 1000.0
        self.mode_transitions = 0
        self.ring_rx = np.zeros((20, n), dtype=np.int32)
        self.backstop_active = np.zeros(n, dtype=bool)
        self.backstop_since = np.zeros(n)
        self.backstop_clear_streak = np.zeros(n, dtype=np.int32)
        self.backstop_durations: list[float] = []
        self.backstop_count = 0
        self.hold_until = np.full(n, -1.0)       # A reauth grant time (ms)
        self.holding = np.zeros(n, dtype=bool)
        self.hold_started = np.zeros(n)
        self.hold_total_ms = np.zeros(n)
        self.pending_wp = np.zeros((n, 3))
        self.has_pending_wp = np.zeros(n, dtype=bool)
        self.replans = 0
        self.dss_queries = 0
        self.window_holds = 0
        self.protocol_violations = 0

        # transactions / yields
        self.txns: list[dict[int, TransactionState]] = [dict() for _ in range(n)]
        self.txn_owners: set[int] = set()
        self.txn_counter = 0
        self.yield_target = np.full(n, -1, dtype=np.int64)   # i yields to j
        self.yield_commit_until = np.zeros(n)
        self.holdcourse_until = np.full((n, n), -1e18)       # commitment: i holds course vs j
        self.graceful_since = np.full((n, n), -1e18)         # non-yielder grace start

        # hotspot state
        self.hs_target = np.full(n, -1, dtype=np.int64)
        self.hs_granted = np.zeros(n, dtype=bool)
        self.hs_grant_until = np.zeros(n)
        self.hs_heard_coord = np.zeros(n, dtype=bool)
        self.hs_last_request = np.full(n, -1e18)
        self.hs_loiter_pt = np.zeros((n, 3))
        self.hs_rejoin_until = np.zeros(n)
        self.responder_queue: list[dict[int, tuple[float, float, float]]] = [
            dict() for _ in self.world.hotspots]
        # responder-side grants awaiting service start, with expiry so a
        # lost COMMIT can never permanently consume admission capacity
        self.outstanding_grants: list[dict[int, float]] = [
            dict() for _ in self.world.hotspots]
        self.service_until = np.zeros(n)
        self.pad_of = np.full(n, -1, dtype=np.int64)
        self.wave_offs = 0
        self.queue_peak = 0
        self.deadlocks = 0
        self._deadlock_streak = 0
        self._last_service_start = -1e18

        # context events
        self.ctx_tracks: list[_ContextTrack] = []

        # attacker state
        self.attack_enabled = bool(config.disturbance.get("enabled", True))
        self.replay_lag_steps = int(float(config.disturbance.get("replay_lag_s", 2.0))
                                    * 1000.0 / self.dt_ms)
        rs = self.dist_state.replay_senders
        self.replay_hist = {
            "pos": np.zeros((len(rs), self.replay_lag_steps, 3)),
            "vel": np.zeros((len(rs), self.replay_lag_steps, 3)),
            "seq": np.full((len(rs), self.replay_lag_steps), -1, dtype=np.int64),
            "t": np.zeros((len(rs), self.replay_lag_steps)),
        }
        self.inject_external = int(config.disturbance.get("inject_external_per_step", 0))
        self.gnss_est_bias = 1.0 + 0.2 * (self.rng_world.random(n) - 0.5)

        # metrics accumulators
        self.expected_legit = 0
        self.received_legit = 0
        self.deadline_missed_legit = 0
        self.lat_hist = np.zeros(LAT_BINS, dtype=np.int64)
        self.age_sum = 0.0
        self.age_n = 0
        self.invalid_injected = 0
        self.invalid_rejections = 0
        self.bad_accepts = 0
        self.false_conflicts = 0
        self.false_clearances = 0
        self.conflict_events = 0
        self.conflict_steps = 0
        self.min_sep = math.inf
        self.prev_true_conflict = np.zeros((n, n), dtype=bool)
        self.prev_pred_conflict = np.zeros((n, n), dtype=bool)
        self.prev_truth_pred = np.zeros((n, n), dtype=bool)
        self.pred_now = np.zeros((n, n), dtype=bool)
        self.true_epi_predicted = np.zeros((n, n), dtype=bool)
        self.viol_streak = np.zeros((n, n), dtype=np.int32)
        self.sep_viol_intervals: list[tuple[float, float]] = []
        self.viol_start = np.full((n, n), -1.0)
        self.conflict_start = np.full((n, n), -1.0)
        self.conflict_intervals: list[tuple[float, float]] = []
        self.track_last_usable = np.full((n, n), -1, dtype=np.int64)
        self.track_gap_counted = np.zeros((n, n), dtype=bool)
        self.track_drops = 0
        self.reacq_sum_s = 0.0
        self.reacq_n = 0
        self.completions: list[float] = []
        self.backstop_intervals: list[tuple[float, float]] = []
        self.deadlock_intervals: list[tuple[float, float]] = []
        self.blast_set: set[int] = set()
        self.decision_log: list[np.ndarray] = []
        self.mode_log: list[np.ndarray] = []
        self.trajectory_log: list[np.ndarray] = []

        self.step_idx = 0

    # ------------------------------------------------------------------
    def _reserve_intruder_slots(self):
        cfg = self.config
        if cfg.family not in ("intruder_burst", "mixed_equipage"):
            return
        k = int(cfg.disturbance.get("burst_count", 5))
        w = self.world
        for _ in range(k):
            w.ids = np.append(w.ids, w.n)
            w.pos = np.vstack([w.pos, [[-1e6, -1e6, 0.0]]])
            w.vel = np.vstack([w.vel, np.zeros((1, 3))])
            w.dest = np.vstack([w.dest, np.zeros((1, 3))])
            w.band = np.append(w.band, 0)
            w.mode = np.append(w.mode, np.int8(M_COMPLETED))
            w.equipage = np.append(w.equipage, np.int8(E_INTRUDER))
            w.nav_err = np.vstack([w.nav_err, np.zeros((1, 3))])
        self._intruder_slots = list(range(w.n - k, w.n))
        self._intruder_next = 0

    def _activate_intruders(self, t_ms):
        cfg = self.config
        if cfg.family not in ("intruder_burst", "mixed_equipage"):
            return
        d = cfg.disturbance
        k = int(d.get("burst_count", 5))
        t0 = float(d.get("start_s", 60.0)) * 1000.0
        window = float(d.get("window_s", 10.0)) * 1000.0
        if not (t0 <= t_ms < t0 + window) or self._intruder_next >= k:
            return
        per_step = max(1, int(math.ceil(k * self.dt_ms / window)))
        w = self.world
        target = (w.hotspots[0].position if w.hotspots
                  else np.array([w.side_m / 2, w.side_m / 2, 60.0]))
        for _ in range(min(per_step, k - self._intruder_next)):
            slot = self._intruder_slots[self._intruder_next]
            self._intruder_next += 1
            edge = int(self.rng_world.integers(0, 4))
            s = self.rng_world.random() * w.side_m
            start = {0: (s, 0.0), 1: (s, w.side_m),
                     2: (0.0, s), 3: (w.side_m, s)}[edge]
            z = 30.0 + self.rng_world.random() * 60.0
            pos = np.array([start[0], start[1], z])
            aim = target + np.append(self.rng_world.standard_normal(2) * 40.0, 0.0)
            v = aim - pos
            v = v / max(1e-9, float(np.linalg.norm(v))) * 14.0
            far = pos + v / 14.0 * (2.5 * w.side_m)
            w.pos[slot] = pos
            w.vel[slot] = v
            w.dest[slot] = far
            w.mode[slot] = M_ENROUTE

    # ------------------------------------------------------------------
    def _new_leg(self, i: int, t_ms: float):
        w = self.world
        cfg = self.config
        if w.equipage[i] == E_INTRUDER:
            w.mode[i] = M_COMPLETED
            w.pos[i] = [-1e6, -1e6, 0.0]
            w.vel[i] = 0.0
            return
        self.completions.append(t_ms / 1000.0)
        w.completed_ops += 1
        bands = np.asarray(cfg.param("altitude_bands_m"), float)
        hs_frac = float(cfg.param("hotspot_mission_fraction"))
        near_hotspot = any(
            float(np.linalg.norm(w.pos[i] - hs.position))
            <= float(cfg.param("queue_radius_m")) for hs in w.hotspots)
        if w.hotspots and not near_hotspot and self.rng_world.random() < hs_frac:
            hs = w.hotspots[int(self.rng_world.integers(0, len(w.hotspots)))]
            self.hs_target[i] = hs.id
            w.dest[i] = hs.position + [0.0, 0.0, 0.0]
            w.dest[i][2] = bands[w.band[i]]
        else:
            self.hs_target[i] = -1
            for _ in range(100):
                cand = 30.0 + self.rng_world.random(2) * (w.side_m - 60.0)
                if np.hypot(*(cand - w.pos[i][:2])) >= float(cfg.param("min_leg_m")):
                    break
            w.dest[i] = [cand[0], cand[1], bands[w.band[i]]]
        w.mode[i] = M_ENROUTE
        self.hs_granted[i] = False

    def _assign_initial_missions(self):
        if not self.world.hotspots:
            return
        frac = float(self.config.param("hotspot_mission_fraction"))
        loiter_r = float(self.config.param("loiter_radius_m"))
        for i in range(self.world.n):
            if self.world.equipage[i] == E_INTRUDER:
                continue
            if self.rng_world.random() < frac:
                hs = self.world.hotspots[
                    int(self.rng_world.integers(0, len(self.world.hotspots)))]
                # traffic spawned inside the terminal area keeps its point
                # leg first; hotspot missions start from outside so the
                # opening seconds are not an artificial uncoordinated rush
                if float(np.linalg.norm(self.world.pos[i] - hs.position)) <= \
                        float(self.config.param("queue_radius_m")):
                    continue
                self.hs_target[i] = hs.id
                bands = np.asarray(self.config.param("altitude_bands_m"), float)
                self.world.dest[i] = hs.position.copy()
                self.world.dest[i][2] = bands[self.world.band[i]]

    # ------------------------------------------------------------------
    # beacon broadcast and channel sampling
    def _broadcast_beacons(self, t_ms: float):
        if not self.is_b2:
            return
        w = self.world
        n = self.cap
        v2v = w.v2v_capable()
        tx_mask = v2v.copy()
        rx_mask = v2v.copy()
        if not tx_mask.any():
            return
        dist = self.dist
        nlos = self._nlos_matrix()

        u = self.rng_channel.random((n, n))
        z = self.rng_channel.standard_normal((n, n))
        expected, delivered, latency = kernels.channel_step(
            dist, tx_mask, rx_mask, self.loss_p, self.fixed_ms, self.sigma_ms,
            self.geometry.max_range_m, nlos, self.geometry.nlos_extra_loss,
            self.geometry.nlos_extra_latency_ms, u, z)

        spoof = np.zeros(n, dtype=bool)
        if self.attack_enabled:
            spoof[self.dist_state.spoof_senders] = True
        legit_cols = tx_mask & ~spoof
        self.expected_legit += int(expected[:, legit_cols].sum())
        self.received_legit += int(delivered[:, legit_cols].sum())
        late = delivered & (latency > DEADLINE_MS)
        self.deadline_missed_legit += int(late[:, legit_cols].sum())
        lat_legit = latency[:, legit_cols][delivered[:, legit_cols]]
        if lat_legit.size:
            bins = np.minimum((lat_legit / LAT_BIN_MS).astype(np.int64), LAT_BINS - 1)
            np.add.at(self.lat_hist, bins, 1)

        seq = self.seq_counter.copy()
        self.seq_counter[tx_mask] += 1
        bpos = w.pos + w.nav_err
        bvel = w.vel.copy()
        integ = self._reported_integrity()
        tag_valid = ~spoof
        if spoof.any():
            offs = np.zeros((n, 3))
            for si in np.nonzero(spoof)[0]:
                ang = 2.399963 * (si + 1)
                offs[si] = [100.0 * math.cos(ang), 100.0 * math.sin(ang), 0.0]
            bpos = bpos + offs

        self._schedule_batch(_Batch(
            tx_idx=np.arange(n, dtype=np.int64), seq=seq,
            t_issue=np.full(n, t_ms), pos=bpos, vel=bvel,
            integ=integ, tag_valid=tag_valid,
            arr_mask=delivered, on_time=~late & delivered,
            injected=False), latency, spoof_cols=spoof)

        self._record_replay_history(t_ms, bpos, bvel, seq)
        self._send_replayed(t_ms, rx_mask, dist, nlos)
        self._send_external(t_ms, rx_mask, dist, nlos)

    def _reported_integrity(self) -> np.ndarray:
        n = self.cap
        integ = np.zeros(n, dtype=np.int8)
        cs = self.dist_state.corrupt_senders
        if cs.size:
            err = np.linalg.norm(self.world.nav_err[cs], axis=1)
            est = err * self.gnss_est_bias[cs]
            integ[cs[(est >= 10.0) & (est < 35.0)]] = 1
            integ[cs[est >= 35.0]] = 2
        return integ

    def _nlos_matrix(self):
        return None  # obstruction boxes affect sensing occlusion only at desk scale

    def _record_replay_history(self, t_ms, bpos, bvel, seq):
        rs = self.dist_state.replay_senders
        if rs.size == 0:
            return
        slot = self.step_idx % self.replay_lag_steps
        self.replay_hist["pos"][:, slot] = bpos[rs]
        self.replay_hist["vel"][:, slot] = bvel[rs]
        self.replay_hist["seq"][:, slot] = seq[rs]
        self.replay_hist["t"][:, slot] = t_ms

    def _send_replayed(self, t_ms, rx_mask, dist, nlos):
        rs = self.dist_state.replay_senders
        if rs.size == 0 or self.step_idx < self.replay_lag_steps \
                or not self.attack_enabled:
            return
        slot = (self.step_idx + 1) % self.replay_lag_steps  # oldest entry
        k = len(rs)
        n = self.cap
        u = self.rng_attacker.random((n, k))
        z = self.rng_attacker.standard_normal((n, k))
        sub = dist[:, rs]
        expected = rx_mask[:, None] & (sub <= self.geometry.max_range_m)
        expected[rs, np.arange(k)] = False
        delivered = expected & (u >= self.loss_p)
        lat = np.maximum(kernels.MIN_LATENCY_MS, self.fixed_ms + self.sigma_ms * z)
        on_time = delivered & (lat <= DEADLINE_MS)
        self._schedule_batch(_Batch(
            tx_idx=rs.astype(np.int64),
            seq=self.replay_hist["seq"][:, slot].copy(),
            t_issue=self.replay_hist["t"][:, slot].copy(),
            pos=self.replay_hist["pos"][:, slot].copy(),
            vel=self.replay_hist["vel"][:, slot].copy(),
            integ=np.zeros(k, dtype=np.int8),
            tag_valid=np.ones(k, dtype=bool),
            arr_mask=delivered, on_time=on_time, injected=True), lat)

    def _send_external(self, t_ms, rx_mask, dist, nlos):
        k = self.inject_external
        if k == 0 or not self.attack_enabled:
            return
        n = self.cap
        tx = np.array([(self.step_idx + j) % n for j in range(k)], dtype=np.int64)
        u = self.rng_attacker.random((n, k))
        z = self.rng_attacker.standard_normal((n, k))
        sub = dist[:, tx]
        expected = rx_mask[:, None] & (sub <= self.geometry.max_range_m)
        expected[tx, np.arange(k)] = False
        delivered = expected & (u >= self.loss_p)
        lat = np.maximum(kernels.MIN_LATENCY_MS, self.fixed_ms + self.sigma_ms * z)
        on_time = delivered & (lat <= DEADLINE_MS)
        pos = self.world.pos[tx] + self.rng_attacker.standard_normal((k, 3)) * 80.0
        self._schedule_batch(_Batch(
            tx_idx=tx, seq=self.seq_counter[tx] + 1000,
            t_issue=np.full(k, t_ms), pos=pos, vel=self.world.vel[tx].copy(),
            integ=np.zeros(k, dtype=np.int8),
            tag_valid=np.zeros(k, dtype=bool),
            arr_mask=delivered, on_time=on_time, injected=True), lat)

    def _schedule_batch(self, batch: _Batch, latency: np.ndarray,
                        spoof_cols: np.ndarray | None = None):
        """Bin deliveries by arrival step. Columns delivered at different
        steps split into sub-batches; injected flags are tracked per
        column group (spoofed columns of an honest batch are injected)."""
        if not batch.arr_mask.any():
            return
        arr_step = self.step_idx + np.maximum(
            1, np.ceil(latency / self.dt_ms).astype(np.int64))
        steps = np.unique(arr_step[batch.arr_mask])
        for s in steps:
            mask = batch.arr_mask & (arr_step == s)
            if not mask.any():
                continue
            sub = _Batch(batch.tx_idx, batch.seq, batch.t_issue, batch.pos,
                         batch.vel, batch.integ, batch.tag_valid,
                         mask, batch.on_time & mask, batch.injected)
            entry = self.pending.setdefault(int(s), [])
            if spoof_cols is not None and spoof_cols.any():
                legit = mask.copy()
                legit[:, spoof_cols] = False
                bad = mask & ~legit
                if legit.any():
                    entry.append(_Batch(batch.tx_idx, batch.seq, batch.t_issue,
                                        batch.pos, batch.vel, batch.integ,
                                        batch.tag_valid, legit,
                                        batch.on_time & legit, False))
                if bad.any():
                    entry.append(_Batch(batch.tx_idx, batch.seq, batch.t_issue,
                                        batch.pos, batch.vel, batch.integ,
                                        batch.tag_valid, bad,
                                        batch.on_time & bad, True))
            else:
                entry.append(sub)

    # ------------------------------------------------------------------
    def _apply_arrivals(self, t_ms: float):
        batches = self.pending.pop(self.step_idx, [])
        fresh_ms = self.policy.fresh_ms
        for batch in batches:
            if batch.injected:
                self.invalid_injected += int(batch.arr_mask.sum())
            if not self.check_auth:
                self._apply_noauth(batch, t_ms)
                continue
            counts = kernels.apply_beacon_batch(
                self.bel_pos, self.bel_vel, self.bel_t, self.bel_integ,
                self.bel_valid, self.suspect, self.highest, self.bitmap,
                self.ring_rx[self.step_idx % 20],
                batch.tx_idx, batch.arr_mask, batch.on_time, batch.seq,
                batch.t_issue, batch.pos, batch.vel, batch.integ,
                batch.tag_valid, self.beacon_ttl, fresh_ms, t_ms)
            rejected = int(counts[kernels.C_AUTH_FAIL] + counts[kernels.C_REPLAY]
                           + counts[kernels.C_EXPIRED] + counts[kernels.C_LOW_INTEGRITY])
            self.invalid_rejections += rejected
            if batch.injected:
                self.bad_accepts += int(counts[kernels.C_ACCEPT]
                                        + counts[kernels.C_DEGRADE])

    def _apply_noauth(self, batch: _Batch, t_ms: float):
        """Validation-path-disabled ablation: every structurally valid
        arrival is taken at face value and treated as fresh at arrival."""
        rx, col = np.nonzero(batch.arr_mask & batch.on_time)
        if rx.size == 0:
            return
        tx = batch.tx_idx[col]
        self.bel_pos[rx, tx] = batch.pos[col]
        self.bel_vel[rx, tx] = batch.vel[col]
        self.bel_t[rx, tx] = t_ms
        self.bel_integ[rx, tx] = batch.integ[col]
        self.bel_valid[rx, tx] = True
        np.add.at(self.ring_rx[self.step_idx % 20], rx, 1)
        if batch.injected:
            self.bad_accepts += int(batch.arr_mask.sum())

    # ------------------------------------------------------------------
    def _sense(self, t_ms: float):
        n = self.cap
        w = self.world
        active = w.active()
        dropout = np.zeros(n, dtype=bool)
        if self.config.family == "degraded_observability":
            mask = update_dropouts(self.config, self.dist_state, t_ms, self.rng_world)
            dropout[:len(mask)] = mask
        occluded = None
        u = self.rng_sensor.random((n, n))
        zn = self.rng_sensor.standard_normal((n, n, 3))
        corrupt_observed = self.config.family == "gnss_corruption"
        detect_prob = float(self.config.disturbance.get(
            "detect_prob", self.config.param("detect_prob")))
        detected, spos, svel = kernels.sense_step(
            self.dist, w.pos, w.vel, w.nav_err, active, dropout, occluded,
            float(self.config.param("detect_range_m")), detect_prob,
            float(self.config.param("sensor_noise_m")), corrupt_observed, u, zn)
        obs, tgt = np.nonzero(detected)
        self.trk_t[obs, tgt] = t_ms
        self.trk_pos[obs, tgt] = spos[obs, tgt]
        self.trk_vel[obs, tgt] = svel[obs, tgt]

    # ------------------------------------------------------------------
    def _fuse(self, t_ms: float):
        """Belief fusion: per (observer, target) choose the freshest
        usable source and compute effective conflict radii."""
        n = self.cap
        w = self.world
        active_t = w.active()

        v2v_age = t_ms - self.bel_t
        expiry = min(self.policy.expiry_ms, self.beacon_ttl)
        fresh = self.policy.fresh_ms
        v2v_ok = self.bel_valid & (v2v_age <= expiry) & active_t[None, :]
        frac = np.clip((v2v_age - fresh) / (expiry - fresh), 0.0, 1.0)
        v2v_w = 1.0 + (self.policy.floor - 1.0) * frac
        v2v_infl = 1.0 + self.policy.beta * frac
        deg = self.bel_integ == 1
        v2v_w = np.where(deg, np.minimum(v2v_w, self.policy.degraded_integrity_cap), v2v_w)
        v2v_infl = np.where(deg, v2v_infl * self.policy.degraded_integrity_inflation,
                            v2v_infl)
        if not self.is_b2:
            v2v_ok[:] = False

        trk_age = t_ms - self.trk_t
        trk_ok = (trk_age <= float(self.config.param("track_hold_ms"))) & active_t[None, :]
        trk_infl = 1.0 + 2.0 * trk_age / float(self.config.param("track_hold_ms"))

        use_v2v = v2v_ok & ~(self.suspect & self.check_auth)
        use_trk = trk_ok & ~use_v2v

        age_s = np.where(use_v2v, v2v_age, np.where(use_trk, trk_age, 0.0)) / 1000.0
        pos = np.where(use_v2v[..., None], self.bel_pos, self.trk_pos)
        vel = np.where(use_v2v[..., None], self.bel_vel, self.trk_vel)
        pos_now = pos + vel * age_s[..., None]
        radius = self.r0 + np.where(
            use_v2v, v2v_infl * self.sigma_pos,
            trk_infl * float(self.config.param("sensor_noise_m")))
        valid = use_v2v | use_trk
        np.fill_diagonal(valid, False)

        self.fu_valid = valid
        self.fu_pos = pos_now
        self.fu_vel = vel
        self.fu_radius = radius
        self.v2v_ok = v2v_ok
        self.v2v_w = np.where(v2v_ok, v2v_w, 0.0)
        # integrity-suspect pairs are guarded whatever the belief source:
        # their geometry is untrustworthy, so they get standing avoidance
        # instead of conflict predictions (the backstop still sees them)
        self.guard_set = self.suspect & valid if self.is_b2 and self.check_auth \
            else np.zeros((n, n), dtype=bool)

        ages = v2v_age[v2v_ok & ~np.eye(n, dtype=bool)]
        if ages.size:
            self.age_sum += float(ages.sum())
            self.age_n += int(ages.size)

    # ------------------------------------------------------------------
    def _update_modes(self, t_ms: float):
        """Array twin of controller.ModeTracker over all vehicles."""
        if not self.is_b2:
            return
        known = (self.bel_valid & ((t_ms - self.bel_t) <= 5000.0)).sum(axis=1)
        received = self.ring_rx.sum(axis=0)
        expected = known * 20
        prr_est = np.where(expected > 0, received / np.maximum(expected, 1), 1.0)
        wsum = self.v2v_w.sum(axis=1)
        wcnt = (self.v2v_w > 0).sum(axis=1)
        mean_w = np.where(wcnt > 0, wsum / np.maximum(wcnt, 1), 1.0)

        target = np.full(self.cap, int(ControllerMode.COOPERATIVE), dtype=np.int8)
        guarded = (mean_w < 0.8) | (prr_est < 0.7)
        fallback = (mean_w < 0.4) | (prr_est < 0.4)
        target[guarded] = int(ControllerMode.GUARDED)
        target[fallback] = int(ControllerMode.FALLBACK)
        live = self.world.mode != M_COMPLETED

        cm = self.comm_mode
        same = target == cm
        self.mode_pending[live & same] = -1
        worse = live & (target > cm)
        if worse.any():
            cm[worse] = target[worse]
            self.mode_transitions += int(worse.sum())
            self.mode_pending[worse] = -1
            newly_guarded = worse & (cm == int(ControllerMode.GUARDED))
            for i in np.nonzero(newly_guarded)[0]:
                self._note_blast(i)
        better = live & (target < cm)
        if better.any():
            fresh_pend = better & (self.mode_pending != target)
            self.mode_pending[fresh_pend] = target[fresh_pend]
            self.mode_pending_since[fresh_pend] = t_ms
            ready = better & ~fresh_pend & \
                (t_ms - self.mode_pending_since >= self.mode_hysteresis_ms)
            if ready.any():
                cm[ready] = target[ready]
                self.mode_transitions += int(ready.sum())
                self.mode_pending[ready] = -1

    def _note_blast(self, i: int):
        epi = self.dist_state.epicenter
        if epi is None and self.ctx_tracks:
            epi = self.ctx_tracks[0].position
        if epi is None:
            return
        if float(np.linalg.norm(self.world.pos[i] - epi)) <= 500.0:
            self.blast_set.add(i)

    # ------------------------------------------------------------------
    def _context_step(self, t_ms: float):
        events = inject_disturbance(self.config, self.world, self.dist_state,
                                    t_ms, self.rng_world)
        for ev in events:
            rec = context_propagation(
                ev.position, self.world.pos, self.context_profile,
                self.rng_context,
                v2v_mask=self.world.v2v_capable(),
                relay_enabled=self.is_b2,
                relay_range_m=self.geometry.max_range_m)
            if self.config.baseline == "A":
                aware_s = rec.t_full_s
            else:
                aware_s = rec.awareness_s()
            aware_ms = ev.t_issue_ms + aware_s * 1000.0
            reaction = aware_ms.copy()
            if self.config.baseline == "A":
                grants = self.rng_ctrl.uniform(
                    float(self.config.param("reauth_min_s")),
                    float(self.config.param("reauth_max_s")),
                    len(aware_ms)) * 1000.0
                reaction = aware_ms + grants
            self.ctx_tracks.append(_ContextTrack(
                ev.event_id, ev.position, ev.radius_m, ev.t_issue_ms,
                ev.t_end_ms, aware_ms, reaction,
                np.zeros(self.cap, dtype=bool), rec.inside.copy()))

        # GNSS error ramp
        if self.config.family == "gnss_corruption":
            cs = self.dist_state.corrupt_senders
            if cs.size:
                mag = gnss_error_m(self.config, t_ms)
                self.world.nav_err[cs] = self.dist_state.corrupt_dir * mag

    def _path_blocked(self, i: int, track: _ContextTrack) -> bool:
        p = self.world.pos[i][:2]
        d = self.world.dest[i][:2]
        c = track.position[:2]
        seg = d - p
        L2 = float(seg @ seg)
        t = 0.0 if L2 < 1e-9 else float(np.clip((c - p) @ seg / L2, 0.0, 1.0))
        closest = p + seg * t
        return float(np.linalg.norm(closest - c)) < track.radius_m + 20.0

    def _handle_context(self, i: int, t_ms: float):
        for track in self.ctx_tracks:
            if track.handled[i] or not (track.t_issue_ms <= t_ms < track.t_end_ms):
                continue
            if t_ms < track.aware_ms[i]:
                continue
            if not self._path_blocked(i, track):
                track.handled[i] = True
                continue
            if self.config.baseline == "A":
                if self.holding[i]:
                    if t_ms >= track.reaction_ms[i] and \
                            self.hold_until[i] == track.reaction_ms[i]:
                        self._exit_hold(i, t_ms)
                        self._insert_detour(i, track.position, track.radius_m)
                        self.replans += 1
                        track.handled[i] = True
                elif t_ms >= track.reaction_ms[i]:
                    # became aware after the grant latency already elapsed
                    self._insert_detour(i, track.position, track.radius_m)
                    self.replans += 1
                    self.dss_queries += 1
                    track.handled[i] = True
                else:
                    self._enter_hold(i, t_ms, until_ms=float(track.reaction_ms[i]))
                    self.dss_queries += 1
                    self.window_holds += 1
            else:
                self._insert_detour(i, track.position, track.radius_m)
                track.handled[i] = True

    def _insert_detour(self, i: int, center: np.ndarray, radius_m: float):
        p = self.world.pos[i][:2]
        c = center[:2]
        away = p - c
        norm = float(np.linalg.norm(away))
        away = away / norm if norm > 1e-6 else np.array([1.0, 0.0])
        perp = np.array([-away[1], away[0]])
        wp2 = c + perp * (radius_m + 120.0)
        self.pending_wp[i] = [wp2[0], wp2[1], self.world.pos[i][2]]
        self.has_pending_wp[i] = True

    def _enter_hold(self, i: int, t_ms: float, until_ms: float | None = None):
        self.holding[i] = True
        self.hold_started[i] = t_ms
        self.world.mode[i] = M_HOLD
        if until_ms is None:
            until_ms = t_ms + self.rng_ctrl.uniform(
                float(self.config.param("reauth_min_s")),
                float(self.config.param("reauth_max_s"))) * 1000.0
        self.hold_until[i] = until_ms
        self._note_blast(i)

    def _exit_hold(self, i: int, t_ms: float):
        self.holding[i] = False
        self.hold_total_ms[i] += t_ms - self.hold_started[i]
        if self.world.mode[i] == M_HOLD:
            self.world.mode[i] = M_ENROUTE
        self.hold_until[i] = -1.0

    # ------------------------------------------------------------------
    # coordination messages
    def _next_txn_id(self, i: int) -> int:
        self.txn_counter += 1
        return (int(i) << 32) | self.txn_counter

    def _send_coord(self, i: int, function: CoordFunction, lifecycle: Lifecycle,
                    txn_id: int, participants: frozenset[int], t_ms: float,
                    zone: int | None = None, validity_ms: int = 0,
                    payload: dict | None = None):
        msg = CoordinationMessage(
            sender_id=int(i), seq=int(self.seq_counter[i]), t_issue=int(t_ms),
            ttl_ms=int(self.config.param("coord_ttl_ms")),
            transaction_id=txn_id, lifecycle=lifecycle, function=function,
            participants=participants, zone_ref=zone,
            validity_ms=int(validity_ms), payload=payload or {})
        self.seq_counter[i] += 1
        signed = sign(msg, FLEET_KEY)
        # cache the tag-input bytes: broadcast verification recomputes only
        # the MAC, not the encoding, per receiver
        self.outbox.append((signed, tag_input(signed)))

    # send-scheduler priority under the per-step channel budget
    _COORD_PRIORITY = {
        int(CoordFunction.CONTINGENCY): 0, int(CoordFunction.HAZARD_CLEAR): 0,
    }
    _LIFECYCLE_PRIORITY = {
        int(Lifecycle.ABORT): 1, int(Lifecycle.COMMIT): 1,
        int(Lifecycle.PROPOSE): 2, int(Lifecycle.CLEAR): 2,
    }

    def _flush_outbox(self, t_ms: float):
        if not self.outbox:
            return
        # per-sender priority budget: contingency/hazard first, then
        # abort/commit, then propose/clear; excess traffic is shed and
        # re-initiated by the owning transaction logic
        budget = int(self.config.param("coord_budget_per_step"))
        per_sender: dict[int, int] = {}
        entries = []
        for msg, body in sorted(
                self.outbox,
                key=lambda e: (e[0].sender_id,
                               self._COORD_PRIORITY.get(int(e[0].function),
                                                        self._LIFECYCLE_PRIORITY.get(
                                                            int(e[0].lifecycle), 3)),
                               e[0].seq)):
            used = per_sender.get(msg.sender_id, 0)
            if used >= budget:
                continue
            per_sender[msg.sender_id] = used + 1
            entries.append((msg, body))
        entries.sort(key=lambda e: (e[0].sender_id, e[0].seq))
        self.outbox = []
        w = self.world
        rx_mask = w.v2v_capable()
        # event-channel deliveries draw from their own stream and are not
        # part of the periodic-beacon reception metrics, so the beacon
        # envelope is identical across baselines with differing
        # coordination volume
        rng = self.rng_coord_channel
        for msg, body in entries:
            tx = msg.sender_id
            eligible = rx_mask & (self.dist[:, tx] <= self.geometry.max_range_m)
            eligible[tx] = False
            rx_ids = np.nonzero(eligible)[0]
            if rx_ids.size == 0:
                continue
            u = rng.random(rx_ids.size)
            z = rng.standard_normal(rx_ids.size)
            lat = np.maximum(kernels.MIN_LATENCY_MS,
                             self.fixed_ms + self.sigma_ms * z)
            delivered = u >= self.loss_p
            arr_steps = self.step_idx + np.maximum(
                1, np.ceil(lat / self.dt_ms).astype(np.int64))
            for k in np.nonzero(delivered)[0]:
                self.coord_pending.setdefault(int(arr_steps[k]), []).append(
                    (int(rx_ids[k]), msg, body, bool(lat[k] <= DEADLINE_MS)))

    def _receive_coord(self, t_ms: float) -> dict[int, list[CoordinationMessage]]:
        inbox: dict[int, list[CoordinationMessage]] = {}
        for rx, msg, body, on_time in self.coord_pending.pop(self.step_idx, []):
            if self.world.mode[rx] == M_COMPLETED:
                continue
            tx = msg.sender_id
            if self.check_auth:
                if compute_auth_tag(FLEET_KEY, body) != msg.auth_tag:
                    self.invalid_rejections += 1
                    continue
                hi, bm = int(self.highest[rx, tx]), int(self.bitmap[rx, tx])
                fresh, nh, nb = replay_probe(hi, bm, msg.seq)
                if not fresh:
                    self.invalid_rejections += 1
                    continue
                if t_ms > msg.t_issue + msg.ttl_ms:
                    self.invalid_rejections += 1
                    continue
                self.highest[rx, tx] = nh
                self.bitmap[rx, tx] = np.uint64(nb)
            if not on_time:
                continue
            self.hs_heard_coord[rx] |= msg.zone_ref is not None
            inbox.setdefault(rx, []).append(msg)
        return inbox

    # ------------------------------------------------------------------
    def _controller(self, t_ms: float, inbox: dict[int, list[CoordinationMessage]]):
        w = self.world
        n = self.cap
        active = w.active()
        dt = self.dt_s

        # conflict predictions from fused beliefs; control acts on a
        # caution-widened radius so managed encounters do not graze the
        # protected zone, while predictions/metrics use the true radius
        rel_p = self.fu_pos - w.pos[:, None, :]
        rel_v = self.fu_vel - w.vel[:, None, :]
        pred_valid = self.fu_valid & ~self.guard_set
        margin = float(self.config.param("caution_margin_m"))
        conflict, t_cpa, d_cpa = kernels.cpa_scan(
            rel_p, rel_v, pred_valid, self.fu_radius + margin, self.horizon_s)
        self.pred_now = conflict & (d_cpa < self.fu_radius)

        # transactions bookkeeping (B2 only)
        if self.is_b2:
            self._transactions_step(t_ms, inbox, conflict, t_cpa)

        # per-vehicle accel composition
        accel = np.zeros((n, 3))
        enroute = active & ~self.holding
        # cruise toward pending waypoint or destination
        dest = np.where(self.has_pending_wp[:, None], self.pending_wp, w.dest)
        accel_cruise = cruise_accel(w.pos, w.vel, dest, self.cruise, self.a_max,
                                    dt, float(self.config.param("arrive_radius_m")))
        accel[enroute] = accel_cruise[enroute]
        accel[self.holding] = (-w.vel[self.holding]) / dt

        if self.is_tactical:
            accel = self._tactical_avoidance(t_ms, accel, conflict, t_cpa, d_cpa)
        else:
            self._strategic_monitor(t_ms, conflict, t_cpa)

        accel = self._backstop(t_ms, accel)
        self.accel = accel

    def _tactical_avoidance(self, t_ms, accel, conflict, t_cpa, d_cpa):
        w = self.world
        n = self.cap
        conf = conflict.copy()

        if self.is_b2:
            # committed non-yielders hold course against their yielder,
            # but commitments stop binding once time-to-conflict collapses
            # (reduced reliance on commitments near the margin)
            binding = (t_cpa > 2.0) | (d_cpa >= self.fu_radius)
            holdcourse = (self.holdcourse_until > t_ms) & binding
            conf &= ~holdcourse
            # grace: the higher-id (non-yielding) side of a known-V2V pair
            # waits out the yield handshake before maneuvering itself
            ids = np.arange(n)
            they_yield = ids[:, None] > ids[None, :]
            eligible = conf & they_yield & self.v2v_ok
            started = self.graceful_since
            started[~eligible] = -1e18
            newly = eligible & (started < -1e17)
            started[newly] = t_ms
            in_grace = eligible & binding & \
                (t_ms - started <= float(self.config.param("yield_timeout_ms")))
            conf &= ~in_grace

        # guarded give-way against integrity-suspect neighbors: a standing
        # berth whose strength ramps with believed proximity
        if self.is_b2 and self.guard_set.any():
            guard_r = float(self.config.param("guard_radius_m"))
            g_obs, g_tgt = np.nonzero(self.guard_set & (self.dist < guard_r))
            push = np.zeros((n, 3))
            for o, tgt in zip(g_obs, g_tgt):
                if w.mode[o] == M_COMPLETED:
                    continue
                away = w.pos[o] - self.fu_pos[o, tgt]
                nrm = float(np.linalg.norm(away))
                if nrm > 1e-6:
                    gain = min(1.0, 2.0 * (guard_r - nrm) / guard_r + 0.3)
                    push[o] += away / nrm * gain
            pn = np.sqrt(np.sum(push * push, axis=-1, keepdims=True))
            scale = np.where(pn > 1.0, 1.0 / np.where(pn > 0, pn, 1.0), 1.0)
            accel += push * scale * (0.8 * self.a_max)

        # batched avoidance against each vehicle's two earliest-CPA threats
        movable = (w.mode != M_COMPLETED) & (w.mode != M_SERVICING)
        has_conf = conf.any(axis=1) & movable
        idx = np.nonzero(has_conf)[0]
        if idx.size:
            margin = float(self.config.param("caution_margin_m"))
            avoid_speed = float(self.config.param("avoid_speed_mps"))
            t_masked = np.where(conf[idx], t_cpa[idx], np.inf)
            order = np.argsort(t_masked, axis=1)
            v_off = np.zeros((idx.size, 3))
            for rank, weight in ((0, 1.0), (1, 0.5)):
                top = order[:, rank]
                present = np.isfinite(t_masked[np.arange(idx.size), top])
                if not present.any():
                    break
                contrib = avoidance_velocity(
                    self.fu_pos[idx, top] - w.pos[idx],
                    self.fu_vel[idx, top] - w.vel[idx],
                    t_cpa[idx, top], d_cpa[idx, top],
                    self.fu_radius[idx, top] + margin, avoid_speed, idx)
                v_off += np.where(present[:, None], contrib * weight, 0.0)
            norm = np.sqrt(np.sum(v_off * v_off, axis=-1, keepdims=True))
            cap = 1.2 * avoid_speed
            v_off *= np.where(norm > cap, cap / np.where(norm > 0, norm, 1.0), 1.0)
            accel[idx] = accel[idx] + v_off / self.dt_s
        return accel

    def _strategic_monitor(self, t_ms, conflict, t_cpa):
        """Baseline A: predicted conflicts trigger HOLD plus
        reauthorization instead of tactical maneuvering."""
        w = self.world
        for i in range(self.cap):
            if w.mode[i] == M_COMPLETED:
                continue
            if self.holding[i]:
                if t_ms >= self.hold_until[i] >= 0:
                    self._exit_hold(i, t_ms)
                    if not self.has_pending_wp[i]:
                        away = self.rng_ctrl.standard_normal(2)
                        nrm = float(np.hypot(*away)) or 1.0
                        off = away / nrm * float(self.config.param("detour_offset_m"))
                        self.pending_wp[i] = w.pos[i] + [off[0], off[1], 0.0]
                        self.has_pending_wp[i] = True
                    self.replans += 1
                continue
            if conflict[i].any() and w.mode[i] in (M_ENROUTE, M_REJOINING):
                self._enter_hold(i, t_ms)
                self.dss_queries += 1

    def _backstop(self, t_ms, accel):
        """Shared last-resort behavior for every baseline."""
        w = self.world
        n = self.cap
        sep_m = float(self.config.param("backstop_sep_m"))
        ttc_s = float(self.config.param("backstop_ttc_s"))
        exit_sep = sep_m * float(self.config.param("backstop_exit_factor"))
        hold_steps = int(float(self.config.param("backstop_exit_hold_s")) / self.dt_s)

        src_valid = self.fu_valid.copy()
        rel_p = self.fu_pos - w.pos[:, None, :]
        rel_v = self.fu_vel - w.vel[:, None, :]
        trig, _, _ = kernels.cpa_scan(rel_p, rel_v, src_valid,
                                      np.full((n, n), sep_m), ttc_s)
        close = src_valid & (self.dist < sep_m)
        threat = trig | close
        active = w.active()
        threat &= active[:, None] & active[None, :]

        any_threat = threat.any(axis=1)
        clear = src_valid & (self.dist < exit_sep)
        clear_any = clear.any(axis=1)

        involved = np.nonzero(active & (any_threat | self.backstop_active))[0]
        for i in involved:
            if not self.backstop_active[i]:
                if any_threat[i]:
                    self.backstop_active[i] = True
                    self.backstop_since[i] = t_ms
                    self.backstop_clear_streak[i] = 0
                    self.backstop_count += 1
            else:
                if not clear_any[i]:
                    self.backstop_clear_streak[i] += 1
                else:
                    self.backstop_clear_streak[i] = 0
                if self.backstop_clear_streak[i] >= hold_steps:
                    self.backstop_active[i] = False
                    self.backstop_durations.append((t_ms - self.backstop_since[i]) / 1000.0)
                    self.backstop_intervals.append(
                        (self.backstop_since[i] / 1000.0, t_ms / 1000.0))
            if self.backstop_active[i]:
                js = np.nonzero(threat[i] | clear[i])[0]
                if js.size:
                    j = js[np.argmin(self.dist[i, js])]
                    accel[i] = backstop_accel(w.pos[i], w.vel[i],
                                              self.fu_pos[i, j], self.a_max)
        return accel

    # ------------------------------------------------------------------
    def _transactions_step(self, t_ms, inbox, conflict, t_cpa):
        w = self.world
        n = self.cap
        timeout = float(self.config.param("yield_timeout_ms"))
        validity = int(self.config.param("commit_validity_ms"))

        # process inbox
        for rx in sorted(inbox):
            for msg in inbox[rx]:
                self._handle_coord_msg(rx, msg, t_ms)

        # tick local transactions
        for i in self.txn_owners.copy():
            txns = self.txns[i]
            for txn_id, txn in list(txns.items()):
                before = txn.phase
                run_transaction(txn, "tick", t_ms, timeout_ms=timeout)
                if txn.phase != before and txn.phase == Phase.ABORTED:
                    if self.yield_target[i] >= 0 and txn.function == CoordFunction.YIELD_PASS:
                        self.yield_target[i] = -1
                if txn.phase in (Phase.ABORTED, Phase.CLEARED) and \
                        t_ms - txn.deadline_ms > 10000.0:
                    txns.pop(txn_id)
            if not txns:
                self.txn_owners.discard(i)

        # initiate yields: lower id proposes when conflicted with a known-V2V peer
        ids = np.arange(n)
        init_pairs = conflict & self.v2v_ok & (ids[:, None] < ids[None, :])
        for i, j in zip(*np.nonzero(init_pairs)):
            if w.mode[i] == M_COMPLETED:
                continue
            # skip if a live transaction covers the pair; committed yields
            # nearing expiry are renewed with a fresh proposal
            if any(txn.function == CoordFunction.YIELD_PASS
                   and j in txn.participants
                   and (txn.phase == Phase.PROPOSED
                        or (txn.phase == Phase.COMMITTED
                            and txn.deadline_ms - t_ms > 1200.0))
                   for txn in self.txns[i].values()):
                continue
            txn_id = self._next_txn_id(i)
            txn = TransactionState(txn_id, CoordFunction.YIELD_PASS,
                                   participants=frozenset({int(i), int(j)}),
                                   initiated=True)
            run_transaction(txn, "propose", t_ms, timeout_ms=timeout)
            self.txns[i][txn_id] = txn
            self.txn_owners.add(int(i))
            self.yield_target[i] = j
            self._send_coord(i, CoordFunction.YIELD_PASS, Lifecycle.PROPOSE,
                             txn_id, txn.participants, t_ms,
                             payload={"yield_to": float(j)})

        # clear resolved yields
        for i in np.nonzero(self.yield_target >= 0)[0]:
            j = self.yield_target[i]
            if not conflict[i, j]:
                for txn_id, txn in list(self.txns[i].items()):
                    if txn.function == CoordFunction.YIELD_PASS and \
                            txn.phase == Phase.COMMITTED and j in txn.participants:
                        run_transaction(txn, "clear", t_ms)
                        self._send_coord(i, CoordFunction.YIELD_PASS, Lifecycle.CLEAR,
                                         txn_id, txn.participants, t_ms)
                self.yield_target[i] = -1

        # contingency broadcast on degraded own integrity
        integ = self._reported_integrity()
        for i in np.nonzero((integ > 0) & w.v2v_capable())[0]:
            if self.step_idx % 10 == 0:
                txn_id = self._next_txn_id(i)
                self._send_coord(int(i), CoordFunction.CONTINGENCY, Lifecycle.PROPOSE,
                                 txn_id, frozenset({int(i)}), t_ms)

        self._hotspot_coordination(t_ms)

    def _handle_coord_msg(self, rx: int, msg: CoordinationMessage, t_ms: float):
        func = msg.function
        tx = msg.sender_id
        validity = int(self.config.param("commit_validity_ms"))
        if func == CoordFunction.YIELD_PASS:
            if msg.lifecycle == Lifecycle.PROPOSE and rx in msg.participants:
                txn = self.txns[rx].get(msg.transaction_id)
                if txn is None:
                    txn = TransactionState(msg.transaction_id, int(func),
                                           participants=msg.participants)
                    run_transaction(txn, "propose", t_ms)
                    self.txns[rx][msg.transaction_id] = txn
                    self.txn_owners.add(int(rx))
                _, legal = run_transaction(txn, "commit", t_ms, validity_ms=validity)
                if legal:
                    self.holdcourse_until[rx, tx] = t_ms + validity
                    self._send_coord(rx, func, Lifecycle.COMMIT, msg.transaction_id,
                                     msg.participants, t_ms, validity_ms=validity)
                else:
                    self.protocol_violations += 1
            elif msg.lifecycle == Lifecycle.COMMIT:
                txn = self.txns[rx].get(msg.transaction_id)
                if txn is not None and txn.phase == Phase.PROPOSED:
                    run_transaction(txn, "commit", t_ms,
                                    validity_ms=min(validity, msg.validity_ms))
                elif txn is not None:
                    self.protocol_violations += 1
            elif msg.lifecycle == Lifecycle.CLEAR:
                self.holdcourse_until[rx, tx] = -1e18
                txn = self.txns[rx].get(msg.transaction_id)
                if txn is not None:
                    _, legal = run_transaction(txn, "clear", t_ms)
                    if not legal and txn.phase not in (Phase.CLEARED, Phase.ABORTED):
                        self.protocol_violations += 1
            elif msg.lifecycle == Lifecycle.ABORT:
                txn = self.txns[rx].get(msg.transaction_id)
                if txn is not None:
                    run_transaction(txn, "abort", t_ms)
                self.holdcourse_until[rx, tx] = -1e18
        elif func == CoordFunction.CONTINGENCY:
            self.suspect[rx, tx] = True
        elif func in (CoordFunction.ADMISSION, CoordFunction.REJOIN):
            if msg.lifecycle == Lifecycle.PROPOSE and msg.zone_ref is not None:
                self._responder_note_request(rx, msg, t_ms)
            elif msg.lifecycle == Lifecycle.COMMIT and rx in msg.participants:
                self.hs_granted[rx] = True
                self.hs_grant_until[rx] = t_ms + msg.validity_ms
        elif func == CoordFunction.RELEASE:
            hs_id = msg.zone_ref
            if hs_id is not None and hs_id < len(self.outstanding_grants):
                self.outstanding_grants[hs_id].pop(msg.sender_id, None)

    # ------------------------------------------------------------------
    def _responder_note_request(self, rx: int, msg: CoordinationMessage, t_ms: float):
        hs_id = int(msg.zone_ref)
        if hs_id >= len(self.world.hotspots):
            return
        if not self._is_responder(rx, hs_id):
            return
        pri = -1.0 if msg.function == CoordFunction.REJOIN else 0.0
        eta = float(msg.payload.get("eta_s", 60.0))
        self.responder_queue[hs_id][msg.sender_id] = (pri, eta, t_ms)

    def _refresh_responders(self):
        """Per-step responder election per hotspot: the lowest-id V2V
        vehicle servicing there, else the lowest-id V2V vehicle within
        request range (computed once per step; desk-scale stand-in for a
        belief-driven election)."""
        self.responder_of = []
        if not self.world.hotspots:
            return
        w = self.world
        req_r = float(self.config.param("request_radius_m"))
        v2v = w.v2v_capable()
        for hs in self.world.hotspots:
            delta = w.pos - hs.position
            d = np.sqrt(np.sum(delta * delta, axis=-1))
            servicing = v2v & (w.mode == M_SERVICING) & (self.hs_target == hs.id)
            if servicing.any():
                self.responder_of.append(int(np.nonzero(servicing)[0][0]))
                continue
            near = v2v & (d <= req_r)
            self.responder_of.append(int(np.nonzero(near)[0][0]) if near.any() else -1)

    def _is_responder(self, i: int, hs_id: int) -> bool:
        return self.responder_of[hs_id] == i

    def _hotspot_coordination(self, t_ms: float):
        """Responder side: grant queued admission requests up to capacity
        (unexpired outstanding grants); validity covers the fly-in from
        the loiter ring."""
        validity = int(self.config.param("grant_validity_ms"))
        for hs in self.world.hotspots:
            grants = self.outstanding_grants[hs.id]
            for vid in [v for v, expiry in grants.items() if t_ms > expiry]:
                grants.pop(vid)
            queue = self.responder_queue[hs.id]
            # expire stale requests
            for vid in [v for v, (_, _, heard) in queue.items()
                        if t_ms - heard > 6000.0]:
                queue.pop(vid)
            responder = self.responder_of[hs.id]
            if responder < 0 or not queue:
                continue
            scale = 1.0
            if self.comm_mode[responder] >= int(ControllerMode.GUARDED):
                scale = float(self.config.param("guarded_capacity_scale"))
            requests = [(vid, pri, eta) for vid, (pri, eta, _) in queue.items()
                        if vid not in grants]
            if not requests:
                continue
            # capacity counts outstanding (granted, not yet landed)
            # approaches; servicing pads free up while grantees fly in
            granted, _ = hotspot_admission(
                hs.pad_count, requests, capacity_scale=scale,
                occupied=len(grants))
            for vid in granted:
                queue.pop(vid)
                grants[vid] = t_ms + validity
                txn_id = self._next_txn_id(responder)
                self._send_coord(responder, CoordFunction.ADMISSION,
                                 Lifecycle.COMMIT, txn_id,
                                 frozenset({int(responder), int(vid)}), t_ms,
                                 zone=hs.id, validity_ms=validity,
                                 payload={"pad_free": 1.0})

    def _hotspot_flow(self, t_ms: float):
        """Mission-side hotspot behavior for every baseline."""
        w = self.world
        if not w.hotspots:
            return
        gate = float(self.config.param("gate_radius_m"))
        req_r = float(self.config.param("request_radius_m"))
        loiter_r = float(self.config.param("loiter_radius_m"))
        backoff = self.config.param("rejoin_backoff_s")

        # service progress
        for hs in w.hotspots:
            for pad, vid in enumerate(hs.pads):
                if vid is None:
                    continue
                if t_ms >= self.service_until[vid]:
                    hs.pads[pad] = None
                    self.pad_of[vid] = -1
                    if self.is_b2 and w.equipage[vid] == E_V2V:
                        txn_id = self._next_txn_id(vid)
                        self._send_coord(vid, CoordFunction.RELEASE, Lifecycle.CLEAR,
                                         txn_id, frozenset({int(vid)}), t_ms,
                                         zone=hs.id)
                    self._new_leg(vid, t_ms)

        for i in range(self.cap):
            hs_id = self.hs_target[i]
            if hs_id < 0 or w.mode[i] == M_COMPLETED:
                continue
            hs = w.hotspots[hs_id]
            d = float(np.linalg.norm(w.pos[i] - hs.position))
            mode = w.mode[i]

            if mode == M_REJOINING:
                if t_ms >= self.hs_rejoin_until[i]:
                    w.mode[i] = M_ENROUTE
                    w.dest[i] = hs.position.copy()
                    w.dest[i][2] = w.pos[i][2]
                continue

            if mode == M_SERVICING:
                continue

            # B2 grant pacing applies once any coordination has been heard
            paced = (self.is_b2 and w.equipage[i] == E_V2V
                     and self.hs_heard_coord[i])
            if paced and self.hs_granted[i] and t_ms > self.hs_grant_until[i]:
                self.hs_granted[i] = False

            if self.is_b2 and w.equipage[i] == E_V2V and d <= req_r:
                if not self.hs_granted[i] and \
                        t_ms - self.hs_last_request[i] > 3000.0:
                    txn_id = self._next_txn_id(i)
                    eta = d / max(self.cruise, 1e-6)
                    self._send_coord(i, CoordFunction.ADMISSION, Lifecycle.PROPOSE,
                                     txn_id, frozenset({int(i)}), t_ms,
                                     zone=hs.id, payload={"eta_s": float(eta)})
                    self.hs_last_request[i] = t_ms

            if paced and not self.hs_granted[i]:
                if mode != M_HOLD and d <= loiter_r:
                    w.mode[i] = M_HOLD
                    # loiter radially outward from the current bearing so
                    # waiting traffic never transits the terminal core
                    away = w.pos[i] - hs.position
                    away[2] = 0.0
                    nrm = float(np.linalg.norm(away))
                    if nrm < 1e-6:
                        away, nrm = np.array([1.0, 0.0, 0.0]), 1.0
                    self.hs_loiter_pt[i] = hs.position + away / nrm * loiter_r
                    self.hs_loiter_pt[i][2] = w.pos[i][2]
                    w.dest[i] = self.hs_loiter_pt[i]
                continue
            if mode == M_HOLD and (not paced or self.hs_granted[i]):
                w.mode[i] = M_ENROUTE
                w.dest[i] = hs.position.copy()
                w.dest[i][2] = w.pos[i][2]
                mode = M_ENROUTE

            if mode == M_ENROUTE and d <= 1.5 * gate:
                w.mode[i] = M_APPROACH
                mode = M_APPROACH

            if mode == M_APPROACH:
                # forced wave-offs under pad-jitter disruption
                if hs.forced_waveoff_rate > 0 and \
                        self.rng_world.random() < hs.forced_waveoff_rate * self.dt_s:
                    self._wave_off(i, hs, t_ms, backoff, loiter_r)
                    continue
                if d <= gate * 0.3:
                    free = hs.free_pads()
                    if free:
                        pad = free[0]
                        hs.pads[pad] = int(i)
                        self.pad_of[i] = pad
                        self.outstanding_grants[hs.id].pop(int(i), None)
                        w.mode[i] = M_SERVICING
                        w.vel[i] = 0.0
                        scale = hs.service_scale
                        self.service_until[i] = t_ms + hs.service_time_s * scale * 1000.0
                        self._last_service_start = t_ms
                        self.hs_granted[i] = False
                    else:
                        self._wave_off(i, hs, t_ms, backoff, loiter_r)

    def _wave_off(self, i: int, hs, t_ms: float, backoff, loiter_r: float):
        w = self.world
        self.wave_offs += 1
        w.mode[i] = M_REJOINING
        self.hs_rejoin_until[i] = t_ms + self.rng_world.uniform(
            float(backoff[0]), float(backoff[1])) * 1000.0
        ang = 2.399963 * (i + 7)
        rejoin_r = float(self.config.param("rejoin_radius_m"))
        pt = hs.position + np.array([rejoin_r * math.cos(ang),
                                     rejoin_r * math.sin(ang), 0.0])
        pt[2] = w.pos[i][2]
        w.dest[i] = pt
        self.hs_granted[i] = False
        if self.is_b2 and w.equipage[i] == E_V2V:
            txn_id = self._next_txn_id(i)
            self._send_coord(i, CoordFunction.REJOIN, Lifecycle.PROPOSE, txn_id,
                             frozenset({int(i)}), t_ms, zone=hs.id,
                             payload={"eta_s": 30.0})
            self.hs_last_request[i] = t_ms

    # ------------------------------------------------------------------
    def _kinematics(self, t_ms: float):
        w = self.world
        active = w.active() & (w.mode != M_SERVICING)
        a = np.clip(self.accel, -self.a_max, self.a_max)
        v_new = w.vel + a * self.dt_s
        speed = np.sqrt(np.sum(v_new * v_new, axis=-1, keepdims=True))
        scale = np.where(speed > self.v_max,
                         self.v_max / np.where(speed > 0, speed, 1.0), 1.0)
        v_new = v_new * scale
        p_new = w.pos + (w.vel + v_new) * (0.5 * self.dt_s)
        w.vel[active] = v_new[active]
        w.pos[active] = p_new[active]

        # leg arrivals (vectorized masks; python only on actual events)
        arrive_r = float(self.config.param("arrive_radius_m"))
        to_pend = self.pending_wp - w.pos
        pend_arrived = self.has_pending_wp & active & \
            (np.sum(to_pend * to_pend, axis=-1) < arrive_r * arrive_r)
        self.has_pending_wp[pend_arrived] = False
        to_dest = w.dest - w.pos
        d2 = np.sum(to_dest * to_dest, axis=-1)
        en_route = active & ~self.has_pending_wp & ~pend_arrived & \
            (w.mode == M_ENROUTE) & (self.hs_target < 0) & \
            (d2 < arrive_r * arrive_r)
        for i in np.nonzero(en_route)[0]:
            self._new_leg(i, t_ms)

    # ------------------------------------------------------------------
    def _metrics_step(self, t_ms: float):
        w = self.world
        n = self.cap
        active = w.active()
        managed = active & (w.equipage != E_INTRUDER)

        pair_act = active[:, None] & active[None, :]
        np.fill_diagonal(pair_act, False)
        d = self.dist
        if pair_act.any():
            self.min_sep = min(self.min_sep, float(d[pair_act].min()))

        # true conflicts (protected radius on true separation)
        true_conf = pair_act & (d < self.r0)
        onset = true_conf & ~self.prev_true_conflict
        ended = self.prev_true_conflict & ~true_conf
        iu = np.triu_indices(n, 1)
        self.conflict_events += int(onset[iu].sum())
        self.conflict_steps += int(true_conf[iu].sum())
        ot = np.nonzero(onset)
        self.conflict_start[ot] = t_ms
        for i, j in zip(*np.nonzero(ended)):
            if i < j:
                self.conflict_intervals.append(
                    (self.conflict_start[i, j] / 1000.0, t_ms / 1000.0))

        # separation violations (qualification criterion)
        viol = pair_act & (d < float(self.config.param("qual_min_sep_m")))
        v_on = viol & ~(self.viol_start >= 0)
        self.viol_start[v_on] = t_ms
        v_off = ~viol & (self.viol_start >= 0)
        for i, j in zip(*np.nonzero(v_off)):
            if i < j:
                self.sep_viol_intervals.append(
                    (self.viol_start[i, j] / 1000.0, t_ms / 1000.0))
            self.viol_start[i, j] = -1.0

        # false inference classification
        truth_pred, _, tdc = kernels.cpa_scan(
            w.pos[None, :, :] - w.pos[:, None, :],
            w.vel[None, :, :] - w.vel[:, None, :],
            pair_act, np.full((n, n), self.r0), self.horizon_s)
        corrupted = np.zeros(n, dtype=bool)
        corrupted[self.dist_state.corrupt_senders] = True
        pred = self.pred_now
        pred_onset = pred & ~self.prev_pred_conflict
        fc = pred_onset & (tdc > 2.0 * self.r0) & corrupted[None, :] & managed[:, None]
        self.false_conflicts += int(fc.sum())

        # true-conflict-episode clearance bookkeeping (pair level)
        self.true_epi_predicted |= pred & truth_pred
        epi_end = self.prev_truth_pred & ~truth_pred
        for i, j in zip(*np.nonzero(epi_end)):
            if i < j and managed[i] and managed[j]:
                if not (self.true_epi_predicted[i, j] or self.true_epi_predicted[j, i]):
                    self.false_clearances += 1
                self.true_epi_predicted[i, j] = False
                self.true_epi_predicted[j, i] = False
        self.prev_truth_pred = truth_pred.copy()
        self.prev_pred_conflict = pred.copy()
        self.prev_true_conflict = true_conf

        # track continuity
        rel_range = float(self.config.param("relevant_range_m"))
        in_rel = pair_act & (d <= rel_range) & managed[:, None]
        usable = self.fu_valid
        now_usable = usable & in_rel
        tracked = self.track_last_usable >= 0
        gap = self.step_idx - self.track_last_usable
        drop_now = in_rel & tracked & ~usable & \
            (gap == int(1000.0 / self.dt_ms) + 1) & ~self.track_gap_counted
        self.track_drops += int(drop_now.sum())
        self.track_gap_counted |= drop_now
        reacq = now_usable & self.track_gap_counted
        for i, j in zip(*np.nonzero(reacq)):
            self.reacq_sum_s += gap[i, j] * self.dt_s
            self.reacq_n += 1
        self.track_gap_counted[reacq] = False
        self.track_last_usable[now_usable] = self.step_idx
        # leaving relevant range ends the pair's tracking episode
        self.track_last_usable[~in_rel] = -1
        self.track_gap_counted[~in_rel] = False

        # hotspot queue metrics: vehicles gathered at the resource in
        # waiting or approach states (transit through the area is not a
        # queue)
        if w.hotspots:
            hs = w.hotspots[0]
            dq = np.sqrt(np.sum((w.pos - hs.position) ** 2, axis=-1))
            q_states = np.isin(w.mode, (M_HOLD, M_APPROACH, M_REJOINING))
            in_q = active & q_states & (self.hs_target == hs.id) & \
                (dq <= float(self.config.param("queue_radius_m")))
            self.queue_peak = max(self.queue_peak, int(in_q.sum()))
            waiting = active & np.isin(w.mode, (M_HOLD, M_REJOINING)) & \
                (self.hs_target == hs.id)
            inbound = active & (self.hs_target == hs.id) & \
                ((w.mode == M_APPROACH) | (self.hs_granted & (w.mode == M_ENROUTE)))
            free = len(hs.free_pads()) > 0
            window_steps = int(float(self.config.param("deadlock_window_s")) / self.dt_s)
            # stalled iff capacity sits free while traffic waits and no
            # grantee is even inbound
            if free and waiting.any() and not inbound.any() and \
                    (t_ms - self._last_service_start) > 1000.0:
                self._deadlock_streak += 1
            else:
                self._deadlock_streak = 0
            if self._deadlock_streak >= window_steps:
                self.deadlocks += 1
                self.deadlock_intervals.append(
                    ((t_ms - window_steps * self.dt_ms) / 1000.0, t_ms / 1000.0))
                self._deadlock_streak = 0

        if self.record_decisions:
            self.decision_log.append(self.accel.astype(np.float32).copy())
            mode_snapshot = np.where(self.backstop_active, np.int8(Mode.BACKSTOP),
                                     w.mode).astype(np.int8)
            self.mode_log.append(mode_snapshot)
            self.trajectory_log.append(w.pos.astype(np.float64).copy())

    # ------------------------------------------------------------------
    def step(self):
        t_ms = float(self.step_idx * self.dt_ms)
        w = self.world
        self.dist = kernels.pairwise_dist(w.pos)
        self.ring_rx[self.step_idx % 20] = 0

        self._context_step(t_ms)
        self._activate_intruders(t_ms)
        self._refresh_responders()
        self._sense(t_ms)
        self._broadcast_beacons(t_ms)
        self._apply_arrivals(t_ms)
        inbox = self._receive_coord(t_ms)
        self._fuse(t_ms)
        self._update_modes(t_ms)
        if self.ctx_tracks:
            for i in range(self.cap):
                if w.mode[i] != M_COMPLETED:
                    self._handle_context(i, t_ms)
        self._controller(t_ms, inbox)
        self._hotspot_flow(t_ms)
        self._flush_outbox(t_ms)
        if self.config.baseline == "A" and \
                self.step_idx % int(float(self.config.param("dss_sync_period_s"))
                                    / self.dt_s) == 0:
            self.dss_queries += int(w.active().sum())
        self._metrics_step(t_ms)
        self._kinematics(t_ms)
        self.step_idx += 1

    def run(self) -> RunMetrics:
        self._assign_initial_missions()
        for _ in range(self.n_steps):
            self.step()
        return self._finalize()

    # ------------------------------------------------------------------
    def _finalize(self) -> RunMetrics:
        t_end = self.n_steps * self.dt_ms
        for i in range(self.cap):
            if self.holding[i]:
                self.hold_total_ms[i] += t_end - self.hold_started[i]
            if self.backstop_active[i]:
                self.backstop_durations.append((t_end - self.backstop_since[i]) / 1000.0)
                self.backstop_intervals.append(
                    (self.backstop_since[i] / 1000.0, t_end / 1000.0))
        for i, j in zip(*np.nonzero(self.viol_start >= 0)):
            if i < j:
                self.sep_viol_intervals.append(
                    (self.viol_start[i, j] / 1000.0, t_end / 1000.0))
        conf_open = np.nonzero(self.prev_true_conflict)
        for i, j in zip(*conf_open):
            if i < j:
                self.conflict_intervals.append(
                    (self.conflict_start[i, j] / 1000.0, t_end / 1000.0))

        duration_s = self.config.duration_s
        report = qualify_windows(
            duration_s, float(self.config.param("qual_window_s")),
            self.completions, self.sep_viol_intervals, self.conflict_intervals,
            self.deadlock_intervals, self.backstop_intervals,
            sustain_s=float(self.config.param("qual_sustain_s")))

        prr_val = (self.received_legit / self.expected_legit
                   if self.expected_legit else 1.0)
        dm_rate = (self.deadline_missed_legit / self.received_legit
                   if self.received_legit else 0.0)
        lat_p95 = 0.0
        if self.lat_hist.sum() > 0:
            lat_p95 = percentile_from_hist(self.lat_hist, LAT_BIN_MS, 95.0)

        throughput = len(self.completions) / duration_s * 3600.0
        held = self.hold_total_ms[self.hold_total_ms > 0]
        mean_hold = float(held.mean()) / 1000.0 if held.size else 0.0
        minutes = duration_s / 60.0
        n_managed = int((self.world.equipage != E_INTRUDER).sum())
        osc = self.mode_transitions / max(1e-9, n_managed * minutes)

        # awareness/reaction averaged over the aircraft each update
        # concerned (inside its notification radius at issue), capped at
        # the window end for the never-notified
        ctx_aware = 0.0
        ctx_react = 0.0
        if self.ctx_tracks:
            aware_vals = []
            react_vals = []
            managed = self.world.equipage != E_INTRUDER
            for track in self.ctx_tracks:
                pop = track.inside & managed
                if not pop.any():
                    continue
                cap_ms = track.t_end_ms - track.t_issue_ms
                a = np.minimum(track.aware_ms[pop] - track.t_issue_ms, cap_ms)
                r = np.minimum(track.reaction_ms[pop] - track.t_issue_ms, cap_ms)
                aware_vals.append(a.mean() / 1000.0)
                react_vals.append(r.mean() / 1000.0)
            if aware_vals:
                ctx_aware = float(np.mean(aware_vals))
                ctx_react = float(np.mean(react_vals))

        bs_p95 = (percentile(self.backstop_durations, 95.0)
                  if self.backstop_durations else 0.0)
        return RunMetrics(
            prr=prr_val,
            latency_p95_ms=lat_p95,
            deadline_miss_rate=dm_rate,
            mean_info_age_ms=self.age_sum / self.age_n if self.age_n else 0.0,
            invalid_rejections=self.invalid_rejections,
            bad_accepts=self.bad_accepts,
            invalid_injected=self.invalid_injected,
            false_clearance_events=self.false_clearances,
            false_conflict_events=self.false_conflicts,
            throughput_ops_per_hr=throughput,
            safety_qualified_throughput=min(report.safety_qualified_throughput,
                                            throughput),
            qualified_fraction=report.qualified_fraction,
            mean_hold_time_s=mean_hold,
            window_holds=self.window_holds,
            replans=self.replans,
            dss_queries=self.dss_queries,
            min_separation_m=self.min_sep,
            conflict_events=self.conflict_events,
            conflict_steps=self.conflict_steps,
            track_drops=self.track_drops,
            mean_reacquisition_s=self.reacq_sum_s / self.reacq_n if self.reacq_n else 0.0,
            wave_offs=self.wave_offs,
            queue_peak=self.queue_peak,
            deadlocks=self.deadlocks,
            backstop_activations=self.backstop_count,
            backstop_duration_p95_s=bs_p95,
            oscillation_burden=osc,
            blast_radius=len(self.blast_set),
            context_awareness_mean_s=ctx_aware,
            context_reaction_mean_s=ctx_react,
        )
