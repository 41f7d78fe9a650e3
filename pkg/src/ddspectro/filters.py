"""Filter functions, harmonic weights, and the sensitivity matrix.

The Fourier convention is pinned package-wide to the unitary transform
``F(w) = (1/sqrt(2 pi)) ∫ f(t) exp(-i w t) dt``. Under this convention the
decay exponent of the probe is ``sqrt(pi/2) ∫ S(w) |F(w)|^2 dw`` and, in the
many-cycle limit, the decay rate of a periodic sequence collapses onto the
harmonic comb ``R = sum_k A_k^2 S(k w0)``. The absolute normalization of the
harmonic weights used here,

    ``A_k^2 = (2 pi)^{3/2} / P^2 * |F(k w0, one period)|^2``,

is the unique choice consistent with that pinned convention; it is enforced
by the white-noise and comb-limit tests rather than trusted algebra. For
CPMG it gives ``A_k^2 = 4 sqrt(2 pi) / (pi k)^2`` for odd k and 0 otherwise,
and ``sum_k A_k^2 = sqrt(pi/2)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .sequence import PulseSequence

TWO_PI = 2.0 * np.pi

PARSEVAL_INTERNAL = "parseval-internal"
A1_NORMALIZED = "A1-normalized"

#: Relative bound below which the harmonic tail of sum A_k^2 / k^alpha is cut.
TAIL_SUM_RTOL = 1e-9


def _cycle_segments(seq: PulseSequence):
    bounds = seq.segment_bounds
    lengths = np.diff(bounds)
    mids = 0.5 * (bounds[:-1] + bounds[1:])
    return lengths, mids, seq.segment_signs


def coherent_cycle_gain(seq: PulseSequence, x, cycles: int):
    """|sum_{r<M} (s e^{-ix})^r|^2 with s the sign carried over one cycle.

    ``x = w * cycle_length``. For even pulse counts (s = +1) this is the
    squared Dirichlet kernel peaking at x = 2 pi k; odd counts shift the
    peaks to x = (2k+1) pi. Evaluated through a sinc ratio that is exact and
    stable at the peaks.
    """
    x = np.asarray(x, dtype=np.float64)
    peak = 0.0 if seq.n_pulses % 2 == 0 else np.pi
    delta = np.mod(x - peak + np.pi, TWO_PI) - np.pi
    ratio = cycles * np.sinc(cycles * delta / TWO_PI) / np.sinc(delta / TWO_PI)
    return ratio * ratio


def filter_function_sq(seq: PulseSequence, omega, cycles: int = 1):
    """Squared filter function |F(w, M tau_c)|^2 in seconds squared.

    The one-cycle transform is summed segment by segment (each constant-sign
    segment contributes ``s L sinc(w L / 2) e^{-i w mid}``, finite at w = 0),
    then repeated coherently over ``cycles`` cycles. Scalar in, scalar out.
    """
    if cycles < 1:
        raise ValueError(f"cycles must be >= 1, got {cycles}")
    w = np.asarray(omega, dtype=np.float64)
    scalar = w.ndim == 0
    w_flat = np.ascontiguousarray(np.atleast_1d(w).ravel())
    lengths, mids, signs = _cycle_segments(seq)
    fsq = _kernels.segment_phasor_sq(w_flat, lengths, mids, signs) / TWO_PI
    fsq = fsq * coherent_cycle_gain(seq, w_flat * seq.cycle_length, cycles)
    fsq = fsq.reshape(np.atleast_1d(w).shape)
    return float(fsq[0]) if scalar else fsq


@dataclass(frozen=True)
class HarmonicWeights:
    """Comb weights A_k^2 of a periodic sequence, k = 1..K.

    ``base_frequency`` is ``w0 = 2 pi / P`` with P the modulation period.
    Under the default ``parseval-internal`` normalization the values carry
    the absolute rate-per-spectral-density scale; ``A1-normalized`` divides
    by A_1^2 (ratios only).
    """

    base_frequency: float
    values: np.ndarray
    normalization: str = PARSEVAL_INTERNAL
    sequence: PulseSequence | None = None

    @property
    def k_max(self) -> int:
        return len(self.values)

    @property
    def a1_sq(self) -> float:
        return float(self.values[0])

    def ratios(self) -> np.ndarray:
        """A_k^2 / A_1^2 regardless of normalization."""
        return self.values / self.values[0]

    def a1_normalized(self) -> "HarmonicWeights":
        return replace(
            self, values=self.values / self.values[0], normalization=A1_NORMALIZED
        )

    def fold_weights(self) -> np.ndarray:
        """Per-harmonic Parseval mass 2 |c_k|^2 of the modulation function.

        Sums to ``mean(f^2) = 1`` over all harmonics (k = 1 alone carries
        8/pi^2 for CPMG). Only defined for the absolute normalization.
        """
        if self.normalization != PARSEVAL_INTERNAL:
            raise ValueError("fold weights require the parseval-internal normalization")
        return 2.0 * self.values / np.sqrt(TWO_PI)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# ddspectro harmonic-weights v1\n")
            writer = csv.writer(fh)
            writer.writerow(["k", "A_k_sq"])
            for k, val in enumerate(self.values, start=1):
                writer.writerow([k, repr(float(val))])


def harmonic_weights(seq: PulseSequence, k_max: int) -> HarmonicWeights:
    """Absolute comb weights of a periodic sequence up to harmonic ``k_max``.

    For odd pulse counts the weights are taken over the doubled period, where
    the modulation is truly periodic.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    period = seq.modulation_period
    cycles = int(round(period / seq.cycle_length))
    w0 = TWO_PI / period
    ks = np.arange(1, k_max + 1)
    fsq = filter_function_sq(seq, ks * w0, cycles=cycles)
    values = (TWO_PI**1.5 / period**2) * fsq
    return HarmonicWeights(w0, values, PARSEVAL_INTERNAL, seq)


def _extend(weights: HarmonicWeights, k_max: int) -> HarmonicWeights:
    if weights.k_max >= k_max:
        return weights
    if weights.sequence is None:
        raise ValueError(
            f"need harmonic weights up to k = {k_max} but only {weights.k_max} are "
            "available and the generating sequence is unknown"
        )
    extended = harmonic_weights(weights.sequence, k_max)
    if weights.normalization == A1_NORMALIZED:
        extended = extended.a1_normalized()
    return extended


def harmonic_tail_sum(weights: HarmonicWeights, alpha: float) -> float:
    """A1-normalized harmonic sum ``sum_k (A_k^2 / A_1^2) / k^alpha``.

    Converges for ``alpha > 1`` because the weights fall at least as 1/k^2.
    The series is extended (doubling k) until the integral-test bound on the
    remainder drops below ``TAIL_SUM_RTOL`` of the partial sum; weights built
    by :func:`harmonic_weights` carry their sequence and extend transparently.
    """
    if not alpha > 1.0:
        raise ValueError(
            f"harmonic tail sum diverges for alpha <= 1 (got alpha = {alpha})"
        )
    alpha = float(alpha)
    while True:
        ratios = weights.ratios()
        ks = np.arange(1, weights.k_max + 1, dtype=np.float64)
        partial = float(np.sum(ratios / ks**alpha))
        # ratios are bounded by envelope/k^2; estimate the envelope from the
        # upper half of the computed range so early transients cannot bias it
        half = ratios[weights.k_max // 2 :]
        k_half = ks[weights.k_max // 2 :]
        envelope = float(np.max(half * k_half**2)) if half.size else 1.0
        bound = envelope * weights.k_max ** (-1.0 - alpha) / (1.0 + alpha)
        if bound <= TAIL_SUM_RTOL * partial:
            return partial
        weights = _extend(weights, 2 * weights.k_max)


@dataclass(frozen=True)
class SensitivityMatrix:
    """Upper-triangular map from probed spectral values to decay rates.

    ``matrix[n-1, j-1] = A_{j/n}^2`` when n divides j (zero weights prune the
    even harmonics for CPMG), so the diagonal is A_1^2 and the system solves
    by back substitution.
    """

    matrix: np.ndarray
    m: int
    omega_min: float | None = None
    family: str = ""
    sequence: PulseSequence | None = None

    @property
    def a1_sq(self) -> float:
        return float(self.matrix[0, 0])

    def solve(self, rates: np.ndarray) -> np.ndarray:
        return solve_triangular(self.matrix, rates, lower=False)

    def inverse(self) -> np.ndarray:
        return solve_triangular(self.matrix, np.eye(self.m), lower=False)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# ddspectro sensitivity-matrix v1\n")
            writer = csv.writer(fh)
            writer.writerow(["n"] + [f"j{j}" for j in range(1, self.m + 1)])
            for n in range(1, self.m + 1):
                writer.writerow([n] + [repr(float(v)) for v in self.matrix[n - 1]])


def sensitivity_matrix(
    weights: HarmonicWeights, m: int, omega_min: float | None = None
) -> SensitivityMatrix:
    """Build the m x m sensitivity matrix from absolute harmonic weights."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if weights.normalization != PARSEVAL_INTERNAL:
        raise ValueError("the sensitivity matrix needs absolute (parseval-internal) weights")
    weights = _extend(weights, m)
    mat = np.zeros((m, m))
    for n in range(1, m + 1):
        ks = np.arange(1, m // n + 1)
        mat[n - 1, n * ks - 1] = weights.values[ks - 1]
    label = weights.sequence.label if weights.sequence is not None else ""
    return SensitivityMatrix(
        matrix=mat, m=m, omega_min=omega_min, family=label, sequence=weights.sequence
    )
