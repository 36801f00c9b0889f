# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-step kernels.

Bit-identical mirror of kernels._ref: identical floating-point evaluation
order, randomness passed in, outputs meaningful on the same masks.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, ceil

cnp.import_array()

MIN_LATENCY_MS = 1.0
DEF _MIN_LATENCY = 1.0
DEF _WINDOW = 64

C_AUTH_FAIL = 0
C_REPLAY = 1
C_EXPIRED = 2
C_LOW_INTEGRITY = 3
C_DEGRADE = 4
C_ACCEPT = 5
C_APPLIED = 6
N_COUNTS = 7


def pairwise_dist(double[:, ::1] pos not None):
    cdef Py_ssize_t n = pos.shape[0]
    out_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double dx, dy, dz
    for i in range(n):
        for j in range(n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            out[i, j] = sqrt((dx * dx + dy * dy) + dz * dz)
    return out_arr


def channel_step(double[:, ::1] dist not None, tx_mask, rx_mask,
                 double loss_prob, double fixed_ms, double sigma_ms,
                 double max_range_m, nlos, double nlos_extra_loss,
                 double nlos_extra_latency_ms,
                 double[:, ::1] u not None, double[:, ::1] z not None):
    cdef Py_ssize_t n = dist.shape[0]
    cdef unsigned char[::1] txm = np.ascontiguousarray(tx_mask, dtype=np.uint8)
    cdef unsigned char[::1] rxm = np.ascontiguousarray(rx_mask, dtype=np.uint8)
    cdef bint has_nlos = nlos is not None
    cdef unsigned char[:, ::1] nl
    if has_nlos:
        nl = np.ascontiguousarray(nlos, dtype=np.uint8)
    expected_arr = np.zeros((n, n), dtype=bool)
    delivered_arr = np.zeros((n, n), dtype=bool)
    latency_arr = np.zeros((n, n), dtype=np.float64)
    cdef unsigned char[:, ::1] expected = expected_arr.view(np.uint8)
    cdef unsigned char[:, ::1] delivered = delivered_arr.view(np.uint8)
    cdef double[:, ::1] latency = latency_arr
    cdef Py_ssize_t rx, tx
    cdef double p, extra_lat, lat
    for rx in range(n):
        if not rxm[rx]:
            continue
        for tx in range(n):
            if tx == rx or not txm[tx] or dist[rx, tx] > max_range_m:
                continue
            expected[rx, tx] = 1
            p = loss_prob
            extra_lat = 0.0
            if has_nlos and nl[rx, tx]:
                p = loss_prob + nlos_extra_loss
                if p > 1.0:
                    p = 1.0
                extra_lat = nlos_extra_latency_ms
            if u[rx, tx] >= p:
                delivered[rx, tx] = 1
                lat = (fixed_ms + extra_lat) + sigma_ms * z[rx, tx]
                if lat < _MIN_LATENCY:
                    lat = _MIN_LATENCY
                latency[rx, tx] = lat
    return expected_arr, delivered_arr, latency_arr


def sense_step(double[:, ::1] dist not None, double[:, ::1] pos not None,
               double[:, ::1] vel not None, double[:, ::1] nav_err not None,
               active, dropout, occluded, double detect_range_m,
               double detect_prob, double noise_sigma_m, bint corrupt_observed,
               double[:, ::1] u not None, double[:, :, ::1] zn not None):
    cdef Py_ssize_t n = dist.shape[0]
    cdef unsigned char[::1] act = np.ascontiguousarray(active, dtype=np.uint8)
    cdef unsigned char[::1] drop = np.ascontiguousarray(dropout, dtype=np.uint8)
    cdef bint has_occ = occluded is not None
    cdef unsigned char[:, ::1] occ
    if has_occ:
        occ = np.ascontiguousarray(occluded, dtype=np.uint8)
    detected_arr = np.zeros((n, n), dtype=bool)
    spos_arr = np.empty((n, n, 3), dtype=np.float64)
    svel_arr = np.empty((n, n, 3), dtype=np.float64)
    cdef unsigned char[:, ::1] detected = detected_arr.view(np.uint8)
    cdef double[:, :, ::1] spos = spos_arr
    cdef double[:, :, ::1] svel = svel_arr
    cdef Py_ssize_t o, t, k
    cdef double v
    for o in range(n):
        for t in range(n):
            for k in range(3):
                v = pos[t, k] + noise_sigma_m * zn[o, t, k]
                if corrupt_observed:
                    v = v + nav_err[t, k]
                spos[o, t, k] = v
                svel[o, t, k] = vel[t, k]
            if o == t or not act[o] or not act[t] or drop[o]:
                continue
            if dist[o, t] > detect_range_m:
                continue
            if has_occ and occ[o, t]:
                continue
            if u[o, t] < detect_prob:
                detected[o, t] = 1
    return detected_arr, spos_arr, svel_arr


def cpa_scan(double[:, :, ::1] rel_pos not None,
             double[:, :, ::1] rel_vel not None, valid, radius,
             double horizon_s):
    cdef Py_ssize_t n = rel_pos.shape[0]
    cdef Py_ssize_t m = rel_pos.shape[1]
    cdef unsigned char[:, ::1] vld = np.ascontiguousarray(valid, dtype=np.uint8)
    cdef double[:, ::1] rad = np.ascontiguousarray(radius, dtype=np.float64)
    conflict_arr = np.zeros((n, m), dtype=bool)
    t_arr = np.empty((n, m), dtype=np.float64)
    d_arr = np.empty((n, m), dtype=np.float64)
    cdef unsigned char[:, ::1] conflict = conflict_arr.view(np.uint8)
    cdef double[:, ::1] t_out = t_arr
    cdef double[:, ::1] d_out = d_arr
    cdef Py_ssize_t i, j
    cdef double px, py, pz, vx, vy, vz, pv, vv, t, cx, cy, cz, d
    for i in range(n):
        for j in range(m):
            px = rel_pos[i, j, 0]; py = rel_pos[i, j, 1]; pz = rel_pos[i, j, 2]
            vx = rel_vel[i, j, 0]; vy = rel_vel[i, j, 1]; vz = rel_vel[i, j, 2]
            pv = (px * vx + py * vy) + pz * vz
            vv = (vx * vx + vy * vy) + vz * vz
            if vv > 1e-12:
                t = -pv / vv
            else:
                t = 0.0
            if t < 0.0:
                t = 0.0
            elif t > horizon_s:
                t = horizon_s
            cx = px + vx * t
            cy = py + vy * t
            cz = pz + vz * t
            d = sqrt((cx * cx + cy * cy) + cz * cz)
            t_out[i, j] = t
            d_out[i, j] = d
            if vld[i, j] and d < rad[i, j]:
                conflict[i, j] = 1
    return conflict_arr, t_arr, d_arr


def apply_beacon_batch(double[:, :, ::1] bel_pos not None,
                       double[:, :, ::1] bel_vel not None,
                       double[:, ::1] bel_t not None,
                       bel_integ, bel_valid, suspect,
                       long long[:, ::1] highest not None,
                       unsigned long long[:, ::1] bitmap not None,
                       rx_ontime_count,
                       tx_idx, arr_mask, on_time,
                       seq, t_issue, double[:, ::1] pos not None,
                       double[:, ::1] vel not None, integ, tag_valid,
                       double ttl_ms, double fresh_ms, double now_ms):
    cdef signed char[:, ::1] b_integ = bel_integ
    cdef unsigned char[:, ::1] b_valid = bel_valid.view(np.uint8)
    cdef unsigned char[:, ::1] susp = suspect.view(np.uint8)
    cdef int[::1] rx_cnt = rx_ontime_count
    cdef long long[::1] txi = np.ascontiguousarray(tx_idx, dtype=np.int64)
    cdef unsigned char[:, ::1] arrm = arr_mask.view(np.uint8)
    cdef unsigned char[:, ::1] ontm = on_time.view(np.uint8)
    cdef long long[::1] sq = np.ascontiguousarray(seq, dtype=np.int64)
    cdef double[::1] tis = np.ascontiguousarray(t_issue, dtype=np.float64)
    cdef signed char[::1] ig = np.ascontiguousarray(integ, dtype=np.int8)
    cdef unsigned char[::1] tag = np.ascontiguousarray(tag_valid, dtype=np.uint8)
    counts_arr = np.zeros(7, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    cdef Py_ssize_t n_rx = arrm.shape[0]
    cdef Py_ssize_t n_col = arrm.shape[1]
    cdef Py_ssize_t rx, col, k
    cdef long long tx, s, hi, shift, offset
    cdef unsigned long long bm, bit
    cdef double age
    cdef bint never, ahead, fresh_seq, stale
    cdef signed char ic
    for rx in range(n_rx):
        for col in range(n_col):
            if not arrm[rx, col]:
                continue
            tx = txi[col]
            if not tag[col]:
                counts[0] += 1
                continue
            s = sq[col]
            hi = highest[rx, tx]
            bm = bitmap[rx, tx]
            never = hi < 0
            ahead = s > hi
            if never or ahead:
                fresh_seq = True
            else:
                offset = hi - s
                if offset >= _WINDOW:
                    fresh_seq = False
                else:
                    bit = (<unsigned long long>1) << offset
                    fresh_seq = (bm & bit) == 0
            if not fresh_seq:
                counts[1] += 1
                continue
            age = now_ms - tis[col]
            if age > ttl_ms:
                counts[2] += 1
                continue
            ic = ig[col]
            if ic == 2:
                counts[3] += 1
                susp[rx, tx] = 1
                continue
            stale = age > fresh_ms
            if stale or ic == 1:
                counts[4] += 1
            else:
                counts[5] += 1
            # commit replay state
            if never:
                highest[rx, tx] = s
                bitmap[rx, tx] = 1
            elif ahead:
                shift = s - hi
                if shift >= _WINDOW:
                    bm = 0
                else:
                    bm = bm << shift
                highest[rx, tx] = s
                bitmap[rx, tx] = bm | 1
            else:
                offset = hi - s
                bitmap[rx, tx] = bm | ((<unsigned long long>1) << offset)
            susp[rx, tx] = 1 if ic == 1 else 0
            # apply to belief
            if ontm[rx, col] and tis[col] >= bel_t[rx, tx]:
                for k in range(3):
                    bel_pos[rx, tx, k] = pos[col, k]
                    bel_vel[rx, tx, k] = vel[col, k]
                bel_t[rx, tx] = tis[col]
                b_integ[rx, tx] = ic
                b_valid[rx, tx] = 1
                counts[6] += 1
                rx_cnt[rx] += 1
    return counts_arr
