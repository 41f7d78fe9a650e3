"""Kernel dispatch: compiled extension when available, NumPy otherwise.

The compiled backend is skipped when the extension failed to build or when
the environment variable ``DDSPECTRO_FORCE_FALLBACK=1`` is set (useful for
benchmarking and debugging).
"""

import os

from . import _fallback

if os.environ.get("DDSPECTRO_FORCE_FALLBACK") == "1":
    _impl = _fallback
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _fallback

BACKEND = _impl.BACKEND
segment_phasor_sq = _impl.segment_phasor_sq
cycle_phase_signal = _impl.cycle_phase_signal

__all__ = ["BACKEND", "segment_phasor_sq", "cycle_phase_signal"]
