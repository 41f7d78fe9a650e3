"""Probe decay curves: analytic overlap integral and Monte-Carlo averaging.

The analytic engine evaluates the Gaussian-phase decay exponent

    ``chi(M tau_c) = sqrt(pi/2) ∫ S(w) |F(w, M tau_c)|^2 dw``

by harmonic-aware quadrature: the integration grid subdivides at every
side-lobe boundary of the repeated-cycle gain (width 2 pi / (M tau_c) around
each comb line), since uniform grids miss the narrow peaks at large M. The
harmonic series is truncated with a geometric octave-sum extrapolation of the
remaining tail.

The Monte-Carlo engine synthesizes noise trajectories, accumulates the probe
phase by trapezoidal integration of the sign-modulated noise, and averages
``cos(phase)`` over trials.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import QuadratureError
from .filters import coherent_cycle_gain, harmonic_weights
from .noise import SpectralModel, _trajectory_rows, check_resolution
from .sequence import PulseSequence, make_cpmg

ENGINES = ("analytic", "monte_carlo")

_GAUSS_ORDER = 16
_HEAD_BLOCKS = 64
_OCTAVE_TRUST = 100.0
_OCTAVE_RATIO_MAX = 0.9


@dataclass(frozen=True)
class DecayCurve:
    """Normalized probe signal sampled at whole-cycle times.

    ``times`` are multiples of the cycle length (the t = 0 point is included
    with signal exactly 1), ``sigma`` is the per-point standard error (zero
    for the analytic engine), and ``tau`` is the mean pulse spacing of the
    sequence that produced the curve.
    """

    times: np.ndarray
    signal: np.ndarray
    sigma: np.ndarray
    tau: float
    engine: str
    cycle_length: float
    cycles: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=np.float64))
        object.__setattr__(self, "signal", np.asarray(self.signal, dtype=np.float64))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=np.float64))
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")


def _sanitize_cycles(cycles) -> np.ndarray:
    arr = np.unique(np.asarray(cycles, dtype=np.int64))
    arr = arr[arr > 0]
    if arr.size == 0:
        raise ValueError("need at least one positive cycle count")
    return arr


def _panel_edges(seq: PulseSequence, cycles: int, feature: float | None) -> np.ndarray:
    """Relative panel edges within one harmonic block, in x = w tau_c units."""
    divisions = max(cycles, 16)
    edges = 2.0 * np.pi * np.arange(-(divisions // 2), divisions // 2 + 1) / divisions
    edges = np.unique(np.clip(np.concatenate([[-np.pi], edges, [np.pi]]), -np.pi, np.pi))
    if feature is not None and feature > 0:
        max_width = max(feature * seq.cycle_length / 4.0, 2.0 * np.pi / 4096.0)
        pieces = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            n_sub = max(1, int(np.ceil((hi - lo) / max_width)))
            pieces.append(np.linspace(lo, hi, n_sub + 1)[:-1])
        edges = np.append(np.concatenate(pieces), edges[-1])
    return edges


class _BlockIntegrator:
    """Per-harmonic-block Gauss-Legendre sums of S(w) |F|^2 in x space."""

    def __init__(self, model, seq, cycles, feature):
        self.model = model
        self.seq = seq
        self.cycles = cycles
        self.tau_c = seq.cycle_length
        self.peak0 = 0.0 if seq.n_pulses % 2 == 0 else np.pi
        self.d_edges = _panel_edges(seq, cycles, feature)
        nodes, weights = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
        self.nodes = nodes
        self.gauss_weights = weights
        lengths = np.diff(seq.segment_bounds)
        self.seg_len = lengths
        self.seg_mid = 0.5 * (seq.segment_bounds[:-1] + seq.segment_bounds[1:])
        self.seg_sign = seq.segment_signs

    def _integrand(self, x: np.ndarray) -> np.ndarray:
        w = x / self.tau_c
        fsq = _kernels.segment_phasor_sq(
            np.ascontiguousarray(w), self.seg_len, self.seg_mid, self.seg_sign
        ) / (2.0 * np.pi)
        return self.model.psd(w) * fsq * coherent_cycle_gain(self.seq, x, self.cycles)

    def block_sums(self, k_lo: int, k_hi: int) -> np.ndarray:
        """Integrals over blocks k = k_lo .. k_hi - 1, vectorized per chunk."""
        sums = np.empty(k_hi - k_lo)
        panels = len(self.d_edges) - 1
        chunk = max(1, 32768 // (panels * _GAUSS_ORDER))
        for start in range(k_lo, k_hi, chunk):
            ks = np.arange(start, min(start + chunk, k_hi))
            edges = self.peak0 + 2.0 * np.pi * ks[:, None] + self.d_edges[None, :]
            if ks[0] == 0:
                edges[0] = np.maximum(edges[0], 0.0)
            lo, hi = edges[:, :-1], edges[:, 1:]
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            x = (mid[..., None] + half[..., None] * self.nodes).ravel()
            vals = self._integrand(x).reshape(len(ks), panels, _GAUSS_ORDER)
            sums[ks - k_lo] = ((vals @ self.gauss_weights) * half).sum(axis=1)
        return sums


def decay_exponent(
    model: SpectralModel,
    seq: PulseSequence,
    cycles: int,
    rtol: float = 1e-6,
    max_harmonic: int = 1 << 18,
) -> float:
    """Decay exponent ``-ln <signal>`` after ``cycles`` cycles (dimensionless).

    Nonnegative for any nonnegative spectrum. Converges the harmonic series
    until the extrapolated tail is below ``rtol`` of the running integral.

    Raises
    ------
    QuadratureError
        If the harmonic series has not converged by ``max_harmonic`` blocks;
        the exception carries diagnostics (partial value, octave ratio).
    """
    if cycles < 1:
        raise ValueError(f"cycles must be >= 1, got {cycles}")
    integrator = _BlockIntegrator(model, seq, cycles, model.min_feature_scale())
    head = integrator.block_sums(0, _HEAD_BLOCKS)
    total = float(head.sum())
    k_hi = _HEAD_BLOCKS
    octave_prev = float(head[_HEAD_BLOCKS // 4 : _HEAD_BLOCKS // 2].sum())
    octave_last = float(head[_HEAD_BLOCKS // 2 :].sum())
    scale = np.sqrt(np.pi / 2.0) * 2.0 / seq.cycle_length
    while True:
        if octave_last <= 0.0:
            return scale * total
        if octave_prev > 0.0:
            ratio = octave_last / octave_prev
            if 0.0 < ratio <= _OCTAVE_RATIO_MAX:
                tail = octave_last * ratio / (1.0 - ratio)
                if tail <= _OCTAVE_TRUST * rtol * max(total, np.finfo(float).tiny):
                    return scale * (total + tail)
        if 2 * k_hi > max_harmonic:
            raise QuadratureError(
                f"decay integral not converged after {k_hi} harmonic blocks "
                f"(octave ratio {octave_last / max(octave_prev, 1e-300):.3g}); "
                "the spectrum may fall too slowly or the tolerance is too tight",
                diagnostics={
                    "harmonics": k_hi,
                    "partial_exponent": scale * total,
                    "octave_last": octave_last,
                    "octave_prev": octave_prev,
                    "rtol": rtol,
                },
            )
        octave = integrator.block_sums(k_hi, 2 * k_hi)
        octave_prev = octave_last
        octave_last = float(octave.sum())
        total += octave_last
        k_hi *= 2


def analytic_curve(
    model: SpectralModel, seq: PulseSequence, cycles, rtol: float = 1e-6
) -> DecayCurve:
    """Noise-averaged decay curve from the analytic overlap integral."""
    counts = _sanitize_cycles(cycles)
    exponents = np.array([decay_exponent(model, seq, int(m), rtol=rtol) for m in counts])
    counts_out = np.concatenate([[0], counts])
    signal = np.concatenate([[1.0], np.exp(-exponents)])
    return DecayCurve(
        times=counts_out * seq.cycle_length,
        signal=signal,
        sigma=np.zeros_like(signal),
        tau=seq.mean_pulse_spacing,
        engine="analytic",
        cycle_length=seq.cycle_length,
        cycles=counts_out,
    )


def _cycle_weights(seq: PulseSequence, n_cyc: int) -> np.ndarray:
    """Trapezoid weights of ∫ f(t) E(t) dt over one cycle on a uniform grid.

    Returns ``n_cyc + 1`` weights; the last one multiplies the sample shared
    with the next cycle. Cells containing a pulse are split at the exact
    pulse instant with the noise interpolated linearly, so off-grid pulse
    times integrate without systematic bias.
    """
    dt = seq.cycle_length / n_cyc
    pulses = np.asarray(seq.pulse_times)
    weights = np.zeros(n_cyc + 1)
    centers = (np.arange(n_cyc) + 0.5) * dt
    cell_sign = (-1.0) ** np.searchsorted(pulses, centers, side="right")
    flip_cells = np.unique(
        np.clip(np.floor(pulses / dt).astype(np.int64), 0, n_cyc - 1)
    )
    interior = np.zeros(n_cyc, dtype=bool)
    for j in flip_cells:
        lo, hi = j * dt, (j + 1) * dt
        if np.any((pulses > lo) & (pulses < hi)):
            interior[j] = True
    bulk = np.where(interior, 0.0, cell_sign) * (dt / 2.0)
    weights[:-1] += bulk
    weights[1:] += bulk
    for j in np.nonzero(interior)[0]:
        lo, hi = j * dt, (j + 1) * dt
        cuts = np.concatenate([[lo], pulses[(pulses > lo) & (pulses < hi)], [hi]])
        sign = (-1.0) ** np.searchsorted(pulses, lo, side="right")
        for u, v in zip(cuts[:-1], cuts[1:]):
            theta_u = (u - lo) / dt
            theta_v = (v - lo) / dt
            span = 0.5 * (v - u)
            weights[j] += sign * span * (2.0 - theta_u - theta_v)
            weights[j + 1] += sign * span * (theta_u + theta_v)
            sign = -sign
    return weights


def _auto_subdivision(model: SpectralModel, seq: PulseSequence, dt: float | None) -> int:
    """Samples per cycle: at least 20 per shortest segment, alias-safe."""
    tau_c = seq.cycle_length
    if dt is not None:
        if dt > seq.min_segment / 20.0 * (1.0 + 1e-12):
            raise ValueError(
                f"dt = {dt:g} s is coarser than min_segment/20 = {seq.min_segment / 20:g} s"
            )
        n_cyc = int(round(tau_c / dt))
        if not np.isclose(n_cyc * dt, tau_c, rtol=1e-9, atol=0.0):
            raise ValueError("dt must divide cycle_length evenly")
        check_resolution(model, tau_c / n_cyc)
        return n_cyc
    n_cyc = int(np.ceil(tau_c / (seq.min_segment / 20.0)))
    last_error = None
    for _ in range(24):
        try:
            check_resolution(model, tau_c / n_cyc)
            return n_cyc
        except Exception as exc:  # refine and retry
            last_error = exc
            n_cyc *= 2
    raise last_error


def monte_carlo_curve(
    model: SpectralModel,
    seq: PulseSequence,
    cycles,
    trials: int,
    seed: int,
    dt: float | None = None,
    stream_base: int = 0,
) -> DecayCurve:
    """Decay curve from averaging cos(phase) over noise realizations.

    The per-trial phase is the trapezoidal integral of the sign-modulated
    trajectory, sampled on a grid that subdivides each cycle at least 20
    times per shortest segment (finer if the model bandwidth demands it).
    ``stream_base`` offsets the per-trial noise streams so that independent
    curves drawn from the same seed stay uncorrelated. Deterministic in
    ``(seed, stream_base)``.
    """
    if trials < 100:
        raise ValueError(f"need at least 100 trials for meaningful averages, got {trials}")
    counts = _sanitize_cycles(cycles)
    n_cyc = _auto_subdivision(model, seq, dt)
    step = seq.cycle_length / n_cyc
    weights = _cycle_weights(seq, n_cyc)
    alternate = seq.n_pulses % 2 == 1
    n_samples = int(counts[-1]) * n_cyc + 1
    sum_cos = np.zeros(len(counts))
    sum_sq = np.zeros(len(counts))
    chunk = max(1, int((1 << 22) // n_samples))
    for start in range(0, trials, chunk):
        streams = [stream_base + t for t in range(start, min(start + chunk, trials))]
        rows = _trajectory_rows(model, step, n_samples, seed, streams)
        part_cos, part_sq = _kernels.cycle_phase_signal(
            rows, weights, n_cyc, counts, alternate
        )
        sum_cos += part_cos
        sum_sq += part_sq
    mean = sum_cos / trials
    var = np.maximum(sum_sq - trials * mean**2, 0.0) / (trials - 1)
    sem = np.sqrt(var / trials)
    counts_out = np.concatenate([[0], counts])
    return DecayCurve(
        times=counts_out * seq.cycle_length,
        signal=np.concatenate([[1.0], mean]),
        sigma=np.concatenate([[0.0], sem]),
        tau=seq.mean_pulse_spacing,
        engine="monte_carlo",
        cycle_length=seq.cycle_length,
        cycles=counts_out,
    )


def _estimate_rate(model: SpectralModel, seq: PulseSequence, k_max: int = 1001) -> float:
    """Quick comb-limit rate estimate used to scale suite sampling depths."""
    weights = harmonic_weights(seq, k_max)
    ks = np.arange(1, k_max + 1)
    return float(np.sum(weights.values * model.psd(ks * weights.base_frequency)))


def run_suite(
    model: SpectralModel,
    tau_max: float,
    m: int,
    engine: str = "analytic",
    trials: int = 400,
    seed: int = 0,
    *,
    points: int = 16,
    depth: float = 3.0,
    tau_b_hint: float | None = None,
    max_cycles: int = 200_000,
    rtol: float = 1e-6,
) -> list[DecayCurve]:
    """One decay curve per divisor n = 1..m, with pulse spacing tau_max/n.

    Cycle counts per curve are spread geometrically from one cycle out to a
    depth where the estimated signal falls to ``exp(-depth)`` (capped at
    ``max_cycles``), and at least past ``5 tau_b_hint`` when a correlation
    time hint is given, so the short-time onset and the exponential regime
    are both sampled.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not tau_max > 0:
        raise ValueError(f"tau_max must be positive, got {tau_max}")
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}, got {engine!r}")
    curves = []
    for n in range(1, m + 1):
        seq = make_cpmg(tau_max / n)
        rate = _estimate_rate(model, seq)
        if rate > 0:
            deepest = int(np.ceil(depth / rate / seq.cycle_length))
        else:
            deepest = points
        if tau_b_hint is not None:
            deepest = max(deepest, int(np.ceil(5.0 * tau_b_hint / seq.cycle_length)))
        deepest = int(np.clip(deepest, 1, max_cycles))
        counts = np.unique(np.round(np.geomspace(1, deepest, points)).astype(np.int64))
        if engine == "analytic":
            curves.append(analytic_curve(model, seq, counts, rtol=rtol))
        else:
            curves.append(
                monte_carlo_curve(
                    model, seq, counts, trials=trials, seed=seed, stream_base=n << 32
                )
            )
    return curves
