"""Dynamical-decoupling pulse sequences and the ±1 modulation they induce.

A sequence is a set of instantaneous π-pulse instants inside one repeating
cycle. Each pulse flips the sign of the probe-environment coupling, so the
coupling seen by the probe is the piecewise-constant modulation function
``f(t)`` starting at +1 and flipping at every pulse, with the flip parity
carried across cycle boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError


@dataclass(frozen=True)
class PulseSequence:
    """Pulse instants within one cycle of a decoupling sequence.

    Parameters
    ----------
    pulse_times:
        Strictly increasing pulse instants, each inside ``(0, cycle_length)``.
    cycle_length:
        Duration of one cycle in seconds.
    label:
        Free-text tag, e.g. ``"CPMG"``.
    """

    pulse_times: tuple[float, ...]
    cycle_length: float
    label: str = ""

    def __post_init__(self):
        times = tuple(float(t) for t in self.pulse_times)
        object.__setattr__(self, "pulse_times", times)
        object.__setattr__(self, "cycle_length", float(self.cycle_length))
        if not self.cycle_length > 0:
            raise ValueError(f"cycle_length must be positive, got {self.cycle_length}")
        if len(times) < 1:
            raise ValueError("at least one pulse is required")
        arr = np.asarray(times)
        if not (np.all(arr > 0) and np.all(arr < self.cycle_length)):
            raise ValueError("pulse times must lie strictly inside (0, cycle_length)")
        if not np.all(np.diff(arr) > 0):
            raise ValueError("pulse times must be strictly increasing (no coincident pulses)")

    @property
    def n_pulses(self) -> int:
        return len(self.pulse_times)

    @property
    def segment_bounds(self) -> np.ndarray:
        """Boundaries of the constant-sign segments of one cycle."""
        return np.concatenate(([0.0], self.pulse_times, [self.cycle_length]))

    @property
    def segment_signs(self) -> np.ndarray:
        """Sign of f(t) on each segment of the first cycle (+1, -1, ...)."""
        return (-1.0) ** np.arange(self.n_pulses + 1)

    @property
    def min_segment(self) -> float:
        """Shortest inter-pulse interval, pulse-to-edge intervals included."""
        return float(np.diff(self.segment_bounds).min())

    @property
    def modulation_integral(self) -> float:
        """Signed area of f(t) over one cycle, in seconds."""
        return float(np.dot(self.segment_signs, np.diff(self.segment_bounds)))

    @property
    def is_balanced(self) -> bool:
        """True when one cycle refocuses a static coupling exactly."""
        return abs(self.modulation_integral) <= 1e-12 * self.cycle_length

    @property
    def modulation_period(self) -> float:
        """Period of f(t): the cycle for even pulse counts, twice it for odd."""
        if self.n_pulses % 2 == 0:
            return self.cycle_length
        return 2.0 * self.cycle_length

    @property
    def mean_pulse_spacing(self) -> float:
        """cycle_length / n_pulses; equals the CPMG pulse spacing for CPMG."""
        return self.cycle_length / self.n_pulses

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "tau_c": self.cycle_length,
            "pulse_times": list(self.pulse_times),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSequence":
        return cls(
            pulse_times=tuple(data["pulse_times"]),
            cycle_length=data["tau_c"],
            label=data.get("label", ""),
        )


def make_cpmg(tau: float, label: str = "CPMG") -> PulseSequence:
    """Equidistant two-pulse cycle with delays tau/2, tau, tau/2.

    ``tau`` is the pulse spacing in seconds; the cycle is ``2 tau`` long with
    pulses at ``tau/2`` and ``3 tau/2``, so one cycle integrates f(t) to zero
    exactly.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return PulseSequence(pulse_times=(tau / 2.0, 1.5 * tau), cycle_length=2.0 * tau, label=label)


def modulation(seq: PulseSequence, t, cycles: int = 1):
    """Evaluate the ±1 modulation function at time ``t`` over ``cycles`` cycles.

    ``f(0) = +1`` and the sign flips at each pulse instant, right-continuous
    at the flip (intervals are half-open ``[t_i, t_{i+1})``). The flip parity
    is cumulative across cycle boundaries. Scalar in, scalar out.

    Raises
    ------
    DomainError
        If any ``t`` lies outside ``[0, cycles * cycle_length)``.
    """
    if cycles < 1:
        raise ValueError(f"cycles must be >= 1, got {cycles}")
    t_arr = np.asarray(t, dtype=np.float64)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    total = cycles * seq.cycle_length
    if np.any(t_arr < 0) or np.any(t_arr >= total):
        raise DomainError(
            f"time outside [0, {total}): the modulation is defined on the pulsed window only"
        )
    n_done = np.floor(t_arr / seq.cycle_length).astype(np.int64)
    residual = t_arr - n_done * seq.cycle_length
    pulses = np.asarray(seq.pulse_times)
    flips = n_done * seq.n_pulses + np.searchsorted(pulses, residual, side="right")
    out = np.where(flips % 2 == 0, 1, -1)
    return int(out[0]) if scalar else out
