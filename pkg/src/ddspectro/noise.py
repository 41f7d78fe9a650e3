"""Spectral-density models and stationary Gaussian trajectory synthesis.

All spectra are one-sided-symmetric functions of angular frequency: real,
even, and nonnegative, in units of rad^2/s per (rad/s). The autocorrelation
pairs with them through the pinned unitary Fourier convention,

    ``g(tau) = (1/sqrt(2 pi)) ∫ S(w) exp(i w tau) dw``,

so ``g(0)`` is the total noise power (rad^2/s^2). Coupling strength is folded
into S.

Trajectories are synthesized in the frequency domain: white Gaussian samples
are filtered by ``sqrt(sqrt(2 pi) S(w)/dt)`` per FFT bin, which is exact for
stationary Gaussian targets; circular-correlation artifacts are suppressed by
generating at least twice the requested duration and keeping the first half.
Every trajectory draws from its own counter-based stream keyed by
``(seed, stream)``, so parallel generation is reproducible regardless of
scheduling or batching.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft, rfftfreq
from scipy.integrate import quad
from scipy.special import erfc

from .exceptions import AliasingError, DomainError

SQRT_TWO_PI = np.sqrt(2.0 * np.pi)

#: Fraction of total power allowed beyond Nyquist before synthesis refuses.
ALIAS_POWER_LIMIT = 0.01


class SpectralModel(ABC):
    """A one-variable spectral density S(w), even and nonnegative."""

    kind: ClassVar[str]

    @abstractmethod
    def psd(self, omega):
        """S(|w|); scalar in, scalar out."""

    @abstractmethod
    def autocorrelation(self, lag):
        """g(lag) in rad^2/s^2, the inverse transform of the PSD."""

    @abstractmethod
    def total_power(self) -> float:
        """g(0) = (1/sqrt(2 pi)) ∫ S dw; may be inf."""

    @abstractmethod
    def tail_power(self, omega: float) -> float:
        """Power carried by |w| > omega; used for aliasing checks."""

    def min_feature_scale(self) -> float | None:
        """Width (rad/s) of the narrowest spectral feature, None if flat."""
        return None

    @abstractmethod
    def to_dict(self) -> dict: ...

    @staticmethod
    def from_dict(data: dict) -> "SpectralModel":
        kind = data.get("kind")
        if kind not in MODEL_KINDS:
            raise ValueError(f"unknown spectral model kind {kind!r}")
        return MODEL_KINDS[kind]._from_dict(data)


def _as_even(omega):
    return np.abs(np.asarray(omega, dtype=np.float64))


@dataclass(frozen=True)
class WhiteNoise(SpectralModel):
    """Flat spectrum S(w) = level.

    The continuous-time autocorrelation is a delta function, so the pointwise
    ``autocorrelation`` is inf at zero lag and 0 elsewhere. Sampled at
    interval dt the process is defined as flat up to Nyquist, giving sample
    variance ``sqrt(2 pi) level / dt``; folding a flat spectrum is exact, so
    the aliasing check never rejects this kind.
    """

    level: float
    kind: ClassVar[str] = "white"

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("white-noise level must be nonnegative")

    def psd(self, omega):
        w = _as_even(omega)
        out = np.full_like(w, float(self.level))
        return float(out) if np.ndim(omega) == 0 else out

    def autocorrelation(self, lag):
        lag = np.asarray(lag, dtype=np.float64)
        out = np.where(lag == 0.0, np.inf if self.level > 0 else 0.0, 0.0)
        return float(out) if np.ndim(lag) == 0 else out

    def total_power(self) -> float:
        return np.inf if self.level > 0 else 0.0

    def tail_power(self, omega: float) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "level": self.level}

    @classmethod
    def _from_dict(cls, data):
        return cls(level=data["level"])


@dataclass(frozen=True)
class Lorentzian(SpectralModel):
    """Exponentially correlated noise: g(tau) = b^2 exp(-|tau|/tau_b).

    ``coupling_sq`` is b^2 (rad^2/s^2) and ``correlation_time`` is tau_b (s);
    S(w) = b^2 sqrt(2/pi) tau_b / (1 + (w tau_b)^2).
    """

    coupling_sq: float
    correlation_time: float
    kind: ClassVar[str] = "lorentzian"

    def __post_init__(self):
        if self.coupling_sq < 0:
            raise ValueError("coupling_sq must be nonnegative")
        if not self.correlation_time > 0:
            raise ValueError("correlation_time must be positive")

    def psd(self, omega):
        w = _as_even(omega)
        tb = self.correlation_time
        return self.coupling_sq * np.sqrt(2.0 / np.pi) * tb / (1.0 + (w * tb) ** 2)

    def autocorrelation(self, lag):
        lag = np.asarray(lag, dtype=np.float64)
        out = self.coupling_sq * np.exp(-np.abs(lag) / self.correlation_time)
        return float(out) if np.ndim(lag) == 0 else out

    def total_power(self) -> float:
        return self.coupling_sq

    def tail_power(self, omega: float) -> float:
        x = omega * self.correlation_time
        return self.coupling_sq * (1.0 - (2.0 / np.pi) * np.arctan(x))

    def min_feature_scale(self) -> float | None:
        return 1.0 / self.correlation_time

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "coupling_sq": self.coupling_sq,
            "correlation_time": self.correlation_time,
        }

    @classmethod
    def _from_dict(cls, data):
        return cls(
            coupling_sq=data["coupling_sq"], correlation_time=data["correlation_time"]
        )


@dataclass(frozen=True)
class PowerLaw(SpectralModel):
    """S(w) = amplitude (|w|/cutoff)^-exponent above the low-frequency cutoff.

    Below ``cutoff`` the spectrum continues flat at ``amplitude``, so the
    model is finite at w = 0. With ``cutoff`` equal to the probing grid
    spacing, the probed values are exactly ``amplitude / j^exponent``.
    """

    amplitude: float
    exponent: float
    cutoff: float
    kind: ClassVar[str] = "power_law"

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if not self.cutoff > 0:
            raise ValueError("cutoff must be positive")

    def psd(self, omega):
        w = _as_even(omega)
        scaled = np.maximum(w / self.cutoff, 1.0)
        return self.amplitude * scaled ** (-self.exponent)

    def autocorrelation(self, lag):
        return _numeric_autocorrelation(self, lag)

    def total_power(self) -> float:
        if self.exponent <= 1.0:
            return np.inf
        head = self.amplitude * self.cutoff
        tail = self.amplitude * self.cutoff / (self.exponent - 1.0)
        return 2.0 * (head + tail) / SQRT_TWO_PI

    def tail_power(self, omega: float) -> float:
        if self.exponent <= 1.0:
            return np.inf
        w = max(omega, self.cutoff)
        tail = (
            self.amplitude
            * self.cutoff
            / (self.exponent - 1.0)
            * (w / self.cutoff) ** (1.0 - self.exponent)
        )
        if omega < self.cutoff:
            tail += self.amplitude * (self.cutoff - omega)
        return 2.0 * tail / SQRT_TWO_PI

    def min_feature_scale(self) -> float | None:
        return self.cutoff

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "amplitude": self.amplitude,
            "exponent": self.exponent,
            "cutoff": self.cutoff,
        }

    @classmethod
    def _from_dict(cls, data):
        return cls(
            amplitude=data["amplitude"], exponent=data["exponent"], cutoff=data["cutoff"]
        )


def _peak_tail_fraction(distance, width, lineshape):
    """One-sided mass of a unit-power peak beyond ``distance`` from center."""
    if lineshape == "lorentzian":
        return (0.5 - np.arctan(distance / width) / np.pi)
    return 0.5 * erfc(distance / (width * np.sqrt(2.0)))


@dataclass(frozen=True)
class Modulated(SpectralModel):
    """A base spectrum plus a symmetric peak pair at ±peak_frequency.

    Models an environment whose coupling is periodically inverted at
    ``peak_frequency``. Each half-peak carries power ``peak_power/2``; the
    default lineshape is a translated Lorentzian of width ``peak_width``
    (rad/s), with a Gaussian alternative (``peak_width`` is sigma).
    """

    base: SpectralModel
    peak_power: float
    peak_frequency: float
    peak_width: float
    lineshape: str = "lorentzian"
    kind: ClassVar[str] = "modulated"

    def __post_init__(self):
        if self.peak_power < 0:
            raise ValueError("peak_power must be nonnegative")
        if not self.peak_width > 0:
            raise ValueError("peak_width must be positive")
        if self.lineshape not in ("lorentzian", "gaussian"):
            raise ValueError(f"unknown lineshape {self.lineshape!r}")

    def _line(self, x):
        if self.lineshape == "lorentzian":
            return np.sqrt(2.0 / np.pi) / self.peak_width / (1.0 + (x / self.peak_width) ** 2)
        return np.exp(-0.5 * (x / self.peak_width) ** 2) / self.peak_width

    def psd(self, omega):
        w = _as_even(omega)
        peak = 0.5 * self.peak_power * (
            self._line(w - self.peak_frequency) + self._line(w + self.peak_frequency)
        )
        return self.base.psd(omega) + peak

    def autocorrelation(self, lag):
        lag = np.asarray(lag, dtype=np.float64)
        if self.lineshape == "lorentzian":
            envelope = np.exp(-np.abs(lag) * self.peak_width)
        else:
            envelope = np.exp(-0.5 * (self.peak_width * lag) ** 2)
        out = self.base.autocorrelation(lag) + self.peak_power * np.cos(
            self.peak_frequency * lag
        ) * envelope
        return float(out) if np.ndim(lag) == 0 else out

    def total_power(self) -> float:
        return self.base.total_power() + self.peak_power

    def tail_power(self, omega: float) -> float:
        peak = self.peak_power * (
            _peak_tail_fraction(omega - self.peak_frequency, self.peak_width, self.lineshape)
            + _peak_tail_fraction(omega + self.peak_frequency, self.peak_width, self.lineshape)
        )
        return self.base.tail_power(omega) + peak

    def min_feature_scale(self) -> float | None:
        base = self.base.min_feature_scale()
        return self.peak_width if base is None else min(base, self.peak_width)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "base": self.base.to_dict(),
            "peak_power": self.peak_power,
            "peak_frequency": self.peak_frequency,
            "peak_width": self.peak_width,
            "lineshape": self.lineshape,
        }

    @classmethod
    def _from_dict(cls, data):
        return cls(
            base=SpectralModel.from_dict(data["base"]),
            peak_power=data["peak_power"],
            peak_frequency=data["peak_frequency"],
            peak_width=data["peak_width"],
            lineshape=data.get("lineshape", "lorentzian"),
        )


class Tabulated(SpectralModel):
    """Spectrum interpolated log-linearly through (omega, S) samples.

    The grid must be strictly increasing with omega > 0 and S > 0. Queries
    below the grid continue flat at the first sample; queries above follow
    ``tail_rule``: ``"error"`` (refuse), ``"constant"``, ``"power_law"``
    (extend the slope of the last grid interval), or ``"zero"``.
    """

    kind: ClassVar[str] = "tabulated"

    def __init__(self, omega, values, tail_rule: str = "error"):
        omega = np.asarray(omega, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if omega.ndim != 1 or omega.shape != values.shape or omega.size < 2:
            raise ValueError("need matching 1-d omega and S arrays with >= 2 points")
        if not np.all(np.diff(omega) > 0):
            raise ValueError("omega grid must be strictly increasing")
        if not np.all(omega > 0):
            raise ValueError("omega grid must be positive (the spectrum is even)")
        if not np.all(values > 0):
            raise ValueError("tabulated S values must be positive for log interpolation")
        if tail_rule not in ("error", "constant", "power_law", "zero"):
            raise ValueError(f"unknown tail_rule {tail_rule!r}")
        self.omega = omega
        self.values = values
        self.tail_rule = tail_rule
        self._log_w = np.log(omega)
        self._log_s = np.log(values)
        self._last_slope = (self._log_s[-1] - self._log_s[-2]) / (
            self._log_w[-1] - self._log_w[-2]
        )

    def psd(self, omega):
        w = _as_even(omega)
        scalar = w.ndim == 0
        w = np.atleast_1d(w)
        out = np.empty_like(w)
        below = w <= self.omega[0]
        above = w > self.omega[-1]
        inside = ~(below | above)
        out[below] = self.values[0]
        out[inside] = np.exp(np.interp(np.log(w[inside]), self._log_w, self._log_s))
        if np.any(above):
            if self.tail_rule == "error":
                raise DomainError(
                    f"tabulated spectrum queried at {w[above].max():g} rad/s, beyond the "
                    f"grid end {self.omega[-1]:g} rad/s, and no tail rule was declared"
                )
            if self.tail_rule == "constant":
                out[above] = self.values[-1]
            elif self.tail_rule == "zero":
                out[above] = 0.0
            else:
                out[above] = self.values[-1] * (w[above] / self.omega[-1]) ** self._last_slope
        return float(out[0]) if scalar else out

    def _interval_integrals(self):
        """Exact ∫ S dw on each grid interval of the log-linear interpolant."""
        w0, w1 = self.omega[:-1], self.omega[1:]
        s0 = self.values[:-1]
        p = np.diff(self._log_s) / np.diff(self._log_w)
        ratio = w1 / w0
        with np.errstate(divide="ignore", invalid="ignore"):
            integ = np.where(
                np.isclose(p, -1.0),
                s0 * w0 * np.log(ratio),
                s0 * w0 * (ratio ** (p + 1.0) - 1.0) / (p + 1.0),
            )
        return integ

    def autocorrelation(self, lag):
        return _numeric_autocorrelation(self, lag, omega_max=self.omega[-1])

    def total_power(self) -> float:
        head = self.values[0] * self.omega[0]
        body = self._interval_integrals().sum()
        return 2.0 * (head + body + self._tail_integral(self.omega[-1])) / SQRT_TWO_PI

    def _tail_integral(self, omega: float) -> float:
        if self.tail_rule in ("error", "zero"):
            return 0.0
        if self.tail_rule == "constant":
            return np.inf
        p = self._last_slope
        if p >= -1.0:
            return np.inf
        s_end = self.values[-1] * (omega / self.omega[-1]) ** p
        return -s_end * omega / (p + 1.0)

    def tail_power(self, omega: float) -> float:
        if omega >= self.omega[-1]:
            return 2.0 * self._tail_integral(omega) / SQRT_TWO_PI
        start = max(omega, float(self.omega[0]))
        head = self.values[0] * max(self.omega[0] - omega, 0.0)
        sel = self.omega > start
        w = np.concatenate([[start], self.omega[sel]])
        s = np.concatenate([[self.psd(start)], self.values[sel]])
        body = Tabulated(w, s, "zero")._interval_integrals().sum() if w.size >= 2 else 0.0
        return 2.0 * (head + body + self._tail_integral(self.omega[-1])) / SQRT_TWO_PI

    def min_feature_scale(self) -> float | None:
        return float(np.diff(self.omega).min())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "omega": self.omega.tolist(),
            "values": self.values.tolist(),
            "tail_rule": self.tail_rule,
        }

    @classmethod
    def _from_dict(cls, data):
        return cls(
            omega=data["omega"], values=data["values"], tail_rule=data.get("tail_rule", "error")
        )


MODEL_KINDS = {
    cls.kind: cls for cls in (WhiteNoise, Lorentzian, PowerLaw, Modulated, Tabulated)
}


def _numeric_autocorrelation(model: SpectralModel, lag, omega_max: float | None = None):
    """g(lag) by numeric cosine transform, for kinds without a closed form."""
    if omega_max is None:
        total = model.total_power()
        if not np.isfinite(total) or total == 0.0:
            raise ValueError("numeric autocorrelation needs a finite-power model")
        omega_max = 1.0
        while model.tail_power(omega_max) > 1e-9 * total and omega_max < 1e18:
            omega_max *= 2.0
    feature = model.min_feature_scale()
    knee = min(feature, omega_max / 2.0) if feature else omega_max / 2.0

    def one(tau):
        if tau == 0.0:
            head, _ = quad(model.psd, 0.0, knee, limit=500)
            body, _ = quad(model.psd, knee, omega_max, limit=500)
        else:
            head, _ = quad(model.psd, 0.0, knee, weight="cos", wvar=float(tau))
            body, _ = quad(model.psd, knee, omega_max, weight="cos", wvar=float(tau))
        return 2.0 * (head + body) / SQRT_TWO_PI

    lag_arr = np.asarray(lag, dtype=np.float64)
    if lag_arr.ndim == 0:
        return one(float(lag_arr))
    return np.array([one(t) for t in lag_arr.ravel()]).reshape(lag_arr.shape)


@dataclass(frozen=True)
class NoiseTrajectory:
    """Evenly sampled realization of a spectral model."""

    dt: float
    samples: np.ndarray
    seed: int
    stream: int
    model: SpectralModel

    @property
    def duration(self) -> float:
        return (len(self.samples) - 1) * self.dt


def _stream_rng(seed: int, stream: int) -> np.random.Generator:
    # counter-based Philox keyed by (seed, stream): reproducible regardless
    # of how trajectories are batched or scheduled
    key = np.array([seed % (1 << 64), stream % (1 << 64)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def check_resolution(model: SpectralModel, dt: float) -> None:
    """Refuse sample intervals that would alias the model's spectrum.

    Raises :class:`AliasingError` when more than ``ALIAS_POWER_LIMIT`` of the
    total power lies beyond the Nyquist frequency pi/dt.
    """
    nyquist = np.pi / dt
    tail = model.tail_power(nyquist)
    if tail == 0.0:
        return
    total = model.total_power()
    fraction = 1.0 if not np.isfinite(total) else tail / total
    if fraction > ALIAS_POWER_LIMIT:
        raise AliasingError(
            f"dt = {dt:g} s leaves {fraction:.1%} of the noise power beyond the "
            f"Nyquist frequency {nyquist:g} rad/s; decrease dt (aliasing would "
            "silently distort the synthesized spectrum)"
        )


def _transfer_amplitudes(model: SpectralModel, dt: float, n_fft: int) -> np.ndarray:
    omega = 2.0 * np.pi * rfftfreq(n_fft, d=dt)
    return np.sqrt(SQRT_TWO_PI * model.psd(omega) / dt)


def _trajectory_rows(
    model: SpectralModel, dt: float, n_samples: int, seed: int, streams
) -> np.ndarray:
    """Synthesize one trajectory row per stream index (internal, batched)."""
    n_fft = next_fast_len(2 * n_samples)
    transfer = _transfer_amplitudes(model, dt, n_fft)
    white = np.empty((len(streams), n_fft))
    for i, stream in enumerate(streams):
        white[i] = _stream_rng(seed, stream).standard_normal(n_fft)
    rows = irfft(rfft(white, axis=1) * transfer, n_fft, axis=1)
    return np.ascontiguousarray(rows[:, :n_samples])


def synthesize(
    model: SpectralModel, dt: float, duration: float, seed: int, stream: int = 0
) -> NoiseTrajectory:
    """Draw one stationary Gaussian trajectory consistent with the model.

    Samples are returned at ``t = 0, dt, ..., round(duration/dt) * dt``. The
    draw is deterministic in ``(seed, stream)``.

    Raises
    ------
    AliasingError
        If the model carries more than 1% of its power beyond pi/dt.
    ValueError
        If ``duration < 100 dt`` (too short to be meaningfully stationary).
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if duration < 100 * dt:
        raise ValueError(f"duration must be at least 100 dt, got {duration / dt:g} dt")
    check_resolution(model, dt)
    n_samples = int(round(duration / dt)) + 1
    samples = _trajectory_rows(model, dt, n_samples, seed, [stream])[0]
    return NoiseTrajectory(dt=dt, samples=samples, seed=seed, stream=stream, model=model)


def average_periodogram(trajectories, window: str = "hann") -> tuple[np.ndarray, np.ndarray]:
    """Estimate S(w) by averaging tapered trajectory periodograms.

    All trajectories must share dt and length. Returns ``(omega, S_est)`` on
    the rfft grid; the estimate inverts the synthesis normalization, so for
    a faithful model the average converges to ``psd(omega)``. The default
    Hann taper suppresses leakage from strong low-frequency components (a
    boxcar leaves a percent-level broadband floor under spectra with sharp
    peaks); pass ``window="boxcar"`` for the raw periodogram.
    """
    first = trajectories[0]
    n = len(first.samples)
    dt = first.dt
    for traj in trajectories:
        if len(traj.samples) != n or traj.dt != dt:
            raise ValueError("trajectories must share dt and length")
    if window == "hann":
        taper = np.hanning(n)
    elif window == "boxcar":
        taper = np.ones(n)
    else:
        raise ValueError(f"unknown window {window!r}")
    stack = np.stack([t.samples for t in trajectories]) * taper
    power = np.abs(np.fft.rfft(stack, axis=1)) ** 2
    s_est = dt * power.mean(axis=0) / (np.sum(taper**2) * SQRT_TWO_PI)
    omega = 2.0 * np.pi * rfftfreq(n, d=dt)
    return omega, s_est
