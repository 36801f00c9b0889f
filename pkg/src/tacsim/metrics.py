"""Run-level metric records, aggregation primitives (nearest-rank
percentile, PRR, paired Student-t confidence intervals), safety-window
qualification, and the stable CSV schema."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Iterable

import numpy as np
from scipy import stats


class MetricUndefined(ValueError):
    """Metric has no defined value for the given input."""


@dataclass
class RunMetrics:
    """Full metric record of one scenario run (one CSV row)."""

    # communication
    prr: float = 1.0
    latency_p95_ms: float = 0.0
    deadline_miss_rate: float = 0.0
    mean_info_age_ms: float = 0.0
    # integrity / trust
    invalid_rejections: int = 0
    bad_accepts: int = 0
    invalid_injected: int = 0
    false_clearance_events: int = 0
    false_conflict_events: int = 0
    # operational
    throughput_ops_per_hr: float = 0.0
    safety_qualified_throughput: float = 0.0
    qualified_fraction: float = 1.0
    mean_hold_time_s: float = 0.0
    window_holds: int = 0
    replans: int = 0
    dss_queries: int = 0
    # safety
    min_separation_m: float = math.inf
    conflict_events: int = 0
    conflict_steps: int = 0
    # perception / observability
    track_drops: int = 0
    mean_reacquisition_s: float = 0.0
    # shared resource
    wave_offs: int = 0
    queue_peak: int = 0
    deadlocks: int = 0
    # backstop
    backstop_activations: int = 0
    backstop_duration_p95_s: float = 0.0
    # stability
    oscillation_burden: float = 0.0
    blast_radius: int = 0
    # context propagation
    context_awareness_mean_s: float = 0.0
    context_reaction_mean_s: float = 0.0

    def __post_init__(self):
        assert self.safety_qualified_throughput <= self.throughput_ops_per_hr + 1e-9

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


METRIC_NAMES = [f.name for f in fields(RunMetrics)]

KEY_COLUMNS = ["family", "density_veh_km2", "footprint_area_km2",
               "impairment_class", "context_class", "baseline", "seed",
               "duration_s", "dt_ms", "status", "error"]

CSV_COLUMNS = KEY_COLUMNS + METRIC_NAMES


def format_value(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    return str(value)


def csv_header() -> str:
    return ",".join(CSV_COLUMNS)


def csv_row(key: dict, metrics: RunMetrics | None, status: str = "ok",
            error: str = "") -> str:
    values = dict(key)
    values["status"] = status
    values["error"] = error.replace(",", ";").replace("\n", " ")
    md = metrics.as_dict() if metrics is not None else {}
    cells = []
    for col in CSV_COLUMNS:
        if col in values:
            cells.append(format_value(values[col]))
        else:
            cells.append(format_value(md.get(col, "")))
    return ",".join(cells)


def parse_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    out = []
    for line in lines[1:]:
        cells = line.split(",")
        row: dict = dict(zip(header, cells))
        for col in header:
            if col in ("family", "impairment_class", "context_class",
                       "baseline", "status", "error"):
                continue
            try:
                row[col] = int(row[col])
            except ValueError:
                try:
                    row[col] = float(row[col])
                except ValueError:
                    pass
        out.append(row)
    return out


def prr(received: int, expected: int) -> float:
    """Packet reception ratio over (message, in-range receiver) pairs."""
    if expected < received or received < 0:
        raise ValueError("expected >= received >= 0 required")
    if expected == 0:
        return 1.0
    return received / expected


def percentile(samples, p: float) -> float:
    """Nearest-rank percentile: the value at index ceil(p/100 * n) of the
    sorted samples."""
    arr = np.sort(np.asarray(samples, float).ravel())
    if arr.size == 0:
        raise MetricUndefined("percentile of empty sample set")
    if not 0.0 < p <= 100.0:
        raise ValueError("p must be in (0, 100]")
    rank = math.ceil(p / 100.0 * arr.size)
    return float(arr[max(0, rank - 1)])


def percentile_from_hist(counts: np.ndarray, bin_width: float, p: float) -> float:
    """Nearest-rank percentile from a fixed-width histogram (bin centers);
    resolution error is bounded by bin_width."""
    total = int(counts.sum())
    if total == 0:
        raise MetricUndefined("percentile of empty histogram")
    rank = math.ceil(p / 100.0 * total)
    cum = np.cumsum(counts)
    idx = int(np.searchsorted(cum, rank))
    return (idx + 0.5) * bin_width


def paired_ci(diffs) -> tuple[float, float, float]:
    """Mean and Student-t 95% interval of paired differences."""
    arr = np.asarray(diffs, float).ravel()
    if arr.size < 2:
        raise MetricUndefined("paired CI needs n >= 2")
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    half = float(stats.t.ppf(0.975, arr.size - 1)) * sd / math.sqrt(arr.size)
    return mean, mean - half, mean + half


@dataclass
class PairedComparison:
    metric: str
    baseline_a: str
    baseline_b: str
    group: dict
    n: int
    mean_diff: float
    lo95: float
    hi95: float

    def as_dict(self) -> dict:
        return {"metric": self.metric, "baseline_a": self.baseline_a,
                "baseline_b": self.baseline_b, "group": self.group,
                "n": self.n, "mean_diff": self.mean_diff,
                "lo95": self.lo95, "hi95": self.hi95}


def build_comparisons(rows: list[dict], pairs: Iterable[tuple[str, str]],
                      metric_names: Iterable[str] = METRIC_NAMES,
                      ) -> list[PairedComparison]:
    """Paired comparisons matched by (family, density, impairment class,
    context class, seed); a pair's runs share the seed by construction of
    the sweep plan."""
    def group_key(row):
        return (row["family"], row["density_veh_km2"],
                row["impairment_class"], row["context_class"])

    out = []
    for a, b in pairs:
        groups: dict[tuple, dict[int, dict[str, dict]]] = {}
        for row in rows:
            if row.get("status") != "ok" or row["baseline"] not in (a, b):
                continue
            cell = groups.setdefault(group_key(row), {})
            cell.setdefault(row["seed"], {})[row["baseline"]] = row
        for gkey in sorted(groups):
            matched = [v for v in groups[gkey].values() if a in v and b in v]
            if len(matched) < 2:
                continue
            matched.sort(key=lambda v: v[a]["seed"])
            for metric in metric_names:
                try:
                    diffs = [float(v[a][metric]) - float(v[b][metric])
                             for v in matched]
                except (KeyError, TypeError, ValueError):
                    continue
                if any(math.isnan(x) or math.isinf(x) for x in diffs):
                    continue
                mean, lo, hi = paired_ci(diffs)
                out.append(PairedComparison(
                    metric, a, b,
                    {"family": gkey[0], "density_veh_km2": gkey[1],
                     "impairment_class": gkey[2], "context_class": gkey[3]},
                    len(diffs), mean, lo, hi))
    return out


@dataclass
class WindowReport:
    qualified: list[bool]
    qualified_fraction: float
    safety_qualified_throughput: float


def qualify_windows(duration_s: float, window_s: float,
                    completions_t_s: Iterable[float],
                    sep_violations: Iterable[tuple[float, float]] = (),
                    conflict_intervals: Iterable[tuple[float, float]] = (),
                    deadlock_intervals: Iterable[tuple[float, float]] = (),
                    backstop_intervals: Iterable[tuple[float, float]] = (),
                    sustain_s: float = 1.0) -> WindowReport:
    """Mark fixed-length windows qualified and count only their completions.

    A window is disqualified by: a separation violation sustained longer
    than `sustain_s` overlapping it, a conflict still active at its end,
    a deadlock overlapping it, or a backstop not recovered by its end.
    """
    n_windows = max(1, int(math.ceil(duration_s / window_s)))
    qualified = [True] * n_windows

    def overlapping(t0: float, t1: float) -> range:
        first = max(0, int(t0 // window_s))
        last = min(n_windows - 1, int(max(t0, t1 - 1e-9) // window_s))
        return range(first, last + 1)

    for t0, t1 in sep_violations:
        if t1 - t0 > sustain_s:
            for w in overlapping(t0, t1):
                qualified[w] = False
    for t0, t1 in conflict_intervals:
        for w in overlapping(t0, t1):
            end = (w + 1) * window_s
            if t0 < end <= t1 + 1e-9 and end <= duration_s + 1e-9:
                qualified[w] = False
    for t0, t1 in deadlock_intervals:
        for w in overlapping(t0, t1):
            qualified[w] = False
    for t0, t1 in backstop_intervals:
        for w in overlapping(t0, t1):
            end = (w + 1) * window_s
            if t0 < end <= t1 + 1e-9 and end <= duration_s + 1e-9:
                qualified[w] = False

    per_window = [0] * n_windows
    total = 0
    for t in completions_t_s:
        w = min(n_windows - 1, int(t // window_s))
        per_window[w] += 1
        total += 1
    # completions in qualified windows only, scaled over the full run so
    # safety-qualified throughput can never exceed raw throughput
    q_ops = sum(c for w, c in enumerate(per_window) if qualified[w])
    sq = q_ops / duration_s * 3600.0
    return WindowReport(qualified, sum(qualified) / n_windows, sq)
