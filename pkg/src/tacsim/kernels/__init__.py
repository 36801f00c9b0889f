"""Hot per-step kernels with a compiled core and a pure-numpy fallback.

The compiled backend (`tacsim.kernels._core`, Cython) is selected at
import when available; set TACSIM_FORCE_FALLBACK=1 to force the numpy
reference. Both backends are bit-identical: randomness is generated by
callers and passed in, and floating-point evaluation order matches.
"""

from __future__ import annotations

import os

from . import _ref
from ._ref import (  # noqa: F401  (shared constants)
    C_ACCEPT,
    C_APPLIED,
    C_AUTH_FAIL,
    C_DEGRADE,
    C_EXPIRED,
    C_LOW_INTEGRITY,
    C_REPLAY,
    MIN_LATENCY_MS,
    N_COUNTS,
    REPLAY_WINDOW,
)

BACKEND = "fallback"

if not os.environ.get("TACSIM_FORCE_FALLBACK"):
    try:
        from . import _core  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _core = None
else:
    _core = None

if BACKEND == "compiled":
    pairwise_dist = _core.pairwise_dist
    channel_step = _core.channel_step
    sense_step = _core.sense_step
    cpa_scan = _core.cpa_scan
    apply_beacon_batch = _core.apply_beacon_batch
else:
    pairwise_dist = _ref.pairwise_dist
    channel_step = _ref.channel_step
    sense_step = _ref.sense_step
    cpa_scan = _ref.cpa_scan
    apply_beacon_batch = _ref.apply_beacon_batch
