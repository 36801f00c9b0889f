"""Pure-numpy reference implementations of the per-step hot kernels.

Semantics here are the contract: the compiled backend must produce
bit-identical outputs (all randomness is drawn outside and passed in, and
floating-point expressions are written in the same evaluation order).

Matrix orientation is (receiver/observer, transmitter/target) throughout.
"""

from __future__ import annotations

import numpy as np

MIN_LATENCY_MS = 1.0
REPLAY_WINDOW = 64

# count indices returned by apply_beacon_batch
C_AUTH_FAIL = 0
C_REPLAY = 1
C_EXPIRED = 2
C_LOW_INTEGRITY = 3
C_DEGRADE = 4
C_ACCEPT = 5
C_APPLIED = 6
N_COUNTS = 7


def pairwise_dist(pos: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix of (n,3) positions."""
    dx = pos[:, 0][:, None] - pos[:, 0][None, :]
    dy = pos[:, 1][:, None] - pos[:, 1][None, :]
    dz = pos[:, 2][:, None] - pos[:, 2][None, :]
    return np.sqrt((dx * dx + dy * dy) + dz * dz)


def channel_step(dist, tx_mask, rx_mask, loss_prob, fixed_ms, sigma_ms,
                 max_range_m, nlos, nlos_extra_loss, nlos_extra_latency_ms,
                 u, z):
    """Sample one broadcast step for every (rx, tx) pair.

    Lost iff u < loss probability; latency = fixed + jitter, floored at
    MIN_LATENCY_MS. Returns (expected, delivered, latency) where expected
    marks in-range eligible pairs.
    """
    n = dist.shape[0]
    eye = np.eye(n, dtype=bool)
    expected = rx_mask[:, None] & tx_mask[None, :] & ~eye & (dist <= max_range_m)
    if nlos is None:
        p = np.float64(loss_prob)
        extra_lat = 0.0
    else:
        p = np.minimum(1.0, loss_prob + np.where(nlos, nlos_extra_loss, 0.0))
        extra_lat = np.where(nlos, nlos_extra_latency_ms, 0.0)
    delivered = expected & (u >= p)
    lat = (fixed_ms + extra_lat) + sigma_ms * z
    lat = np.maximum(MIN_LATENCY_MS, lat)
    latency = np.where(delivered, lat, 0.0)
    return expected, delivered, latency


def sense_step(dist, pos, vel, nav_err, active, dropout, occluded,
               detect_range_m, detect_prob, noise_sigma_m, corrupt_observed,
               u, zn):
    """Per-observer sensor detections with Gaussian position noise.

    Detected iff in range, both active, observer not in a dropout burst,
    not occluded, and u < detect_prob. When `corrupt_observed`, the
    target's navigation error offsets its observed position.
    """
    n = dist.shape[0]
    eye = np.eye(n, dtype=bool)
    in_range = (dist <= detect_range_m) & active[:, None] & active[None, :] & ~eye
    in_range &= ~dropout[:, None]
    if occluded is not None:
        in_range &= ~occluded
    detected = in_range & (u < detect_prob)
    spos = pos[None, :, :] + noise_sigma_m * zn
    if corrupt_observed:
        spos = spos + nav_err[None, :, :]
    svel = np.broadcast_to(vel[None, :, :], (n, n, 3)).copy()
    return detected, spos, svel


def cpa_scan(rel_pos, rel_vel, valid, radius, horizon_s):
    """Constant-velocity closest-point-of-approach over (rx, tx) pairs.

    t_cpa is clamped to [0, horizon]; a pair is in conflict iff valid and
    the clamped miss distance is below its effective radius.
    """
    px, py, pz = rel_pos[..., 0], rel_pos[..., 1], rel_pos[..., 2]
    vx, vy, vz = rel_vel[..., 0], rel_vel[..., 1], rel_vel[..., 2]
    pv = (px * vx + py * vy) + pz * vz
    vv = (vx * vx + vy * vy) + vz * vz
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(vv > 1e-12, -pv / np.where(vv > 1e-12, vv, 1.0), 0.0)
    t = np.clip(t, 0.0, horizon_s)
    cx = px + vx * t
    cy = py + vy * t
    cz = pz + vz * t
    d = np.sqrt((cx * cx + cy * cy) + cz * cz)
    conflict = valid & (d < radius)
    return conflict, t, d


def _replay_shift(bitmap, shift):
    # numpy uint64 << 64 is architecture-defined; handle wide jumps explicitly
    wide = shift >= REPLAY_WINDOW
    s = np.minimum(shift, REPLAY_WINDOW - 1).astype(np.uint64)
    out = np.where(wide, np.uint64(0), bitmap << s)
    return out


def apply_beacon_batch(bel_pos, bel_vel, bel_t, bel_integ, bel_valid, suspect,
                       highest, bitmap, rx_ontime_count,
                       tx_idx, arr_mask, on_time, seq, t_issue, pos, vel,
                       integ, tag_valid, ttl_ms, fresh_ms, now_ms):
    """Validate and apply one batch of beacon arrivals.

    One batch = beacons that share a send step (columns are batch members,
    `tx_idx` maps them to vehicle slots). Validation order: auth tag,
    replay window, hard expiry, invalid integrity, staleness. Replay state
    is committed only for usable (accept/degrade) messages; beliefs are
    updated only for on-time arrivals that do not regress t_issue.
    Returns the count vector (see C_* indices).
    """
    counts = np.zeros(N_COUNTS, dtype=np.int64)
    if arr_mask.size == 0 or not arr_mask.any():
        return counts
    rx_all, col = np.nonzero(arr_mask)
    tx_all = tx_idx[col]

    ok_auth = tag_valid[col]
    counts[C_AUTH_FAIL] = int((~ok_auth).sum())

    hi = highest[rx_all, tx_all]
    bm = bitmap[rx_all, tx_all]
    sq = seq[col]
    never = hi < 0
    ahead = sq > hi
    offset = np.where(ahead | never, 0, hi - sq)
    in_window = offset < REPLAY_WINDOW
    bit = np.uint64(1) << np.minimum(offset, REPLAY_WINDOW - 1).astype(np.uint64)
    seen = (bm & bit) != 0
    fresh_seq = never | ahead | (in_window & ~seen)
    counts[C_REPLAY] = int((ok_auth & ~fresh_seq).sum())

    age = now_ms - t_issue[col]
    not_expired = age <= ttl_ms
    counts[C_EXPIRED] = int((ok_auth & fresh_seq & ~not_expired).sum())

    integ_col = integ[col]
    integ_ok = integ_col != 2
    counts[C_LOW_INTEGRITY] = int(
        (ok_auth & fresh_seq & not_expired & ~integ_ok).sum())

    usable = ok_auth & fresh_seq & not_expired & integ_ok
    stale = age > fresh_ms
    degraded = usable & (stale | (integ_col == 1))
    counts[C_DEGRADE] = int(degraded.sum())
    counts[C_ACCEPT] = int((usable & ~degraded).sum())

    # commit replay state for usable messages
    if usable.any():
        u_rx, u_tx = rx_all[usable], tx_all[usable]
        u_sq, u_hi, u_bm = sq[usable], hi[usable], bm[usable]
        u_never, u_ahead = never[usable], ahead[usable]
        shift = np.where(u_ahead & ~u_never, u_sq - u_hi, 0)
        adv_bm = _replay_shift(u_bm, shift) | np.uint64(1)
        off = np.where(u_ahead | u_never, 0, u_hi - u_sq)
        mark_bm = u_bm | (np.uint64(1) << off.astype(np.uint64))
        new_hi = np.where(u_never | u_ahead, u_sq, u_hi)
        new_bm = np.where(u_never, np.uint64(1),
                          np.where(u_ahead, adv_bm, mark_bm))
        highest[u_rx, u_tx] = new_hi
        bitmap[u_rx, u_tx] = new_bm

        # integrity-suspect bookkeeping
        suspect[u_rx, u_tx] = integ_col[usable] == 1
    bad_rx, bad_tx = rx_all[ok_auth & fresh_seq & not_expired & ~integ_ok], \
        tx_all[ok_auth & fresh_seq & not_expired & ~integ_ok]
    suspect[bad_rx, bad_tx] = True

    # apply to beliefs: usable, on-time, non-regressing
    ot = on_time[rx_all, col]
    apply = usable & ot
    if apply.any():
        a_rx, a_tx, a_col = rx_all[apply], tx_all[apply], col[apply]
        newer = t_issue[a_col] >= bel_t[a_rx, a_tx]
        a_rx, a_tx, a_col = a_rx[newer], a_tx[newer], a_col[newer]
        bel_pos[a_rx, a_tx] = pos[a_col]
        bel_vel[a_rx, a_tx] = vel[a_col]
        bel_t[a_rx, a_tx] = t_issue[a_col]
        bel_integ[a_rx, a_tx] = integ[a_col]
        bel_valid[a_rx, a_tx] = True
        counts[C_APPLIED] = int(newer.sum())
        np.add.at(rx_ontime_count, a_rx, 1)
    return counts
