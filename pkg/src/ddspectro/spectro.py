"""Rate extraction and spectral-density reconstruction.

The reconstruction inverts the linear system ``R_n = sum_j U_nj S_j`` built
from a suite of measurements with pulse spacings ``tau_max / n``: every
harmonic of every measurement falls on the common grid ``j * omega_min`` with
``omega_min = pi / tau_max``, so the sensitivity matrix is upper triangular
and solvable by back substitution. Three estimators are provided:

* ``first_harmonic`` ignores all harmonics beyond the first (fast, biased,
  produces satellite artifacts for peaked spectra);
* ``invert_naive`` solves the truncated system, neglecting the spectrum
  beyond ``m * omega_min``;
* ``invert_corrected`` additionally removes the tail contribution using a
  fitted power law ``S = C / j^alpha`` beyond the probed window.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import curve_fit

from .exceptions import (
    GridMismatchError,
    InsufficientDataError,
    TailModelRejectedError,
)
from .filters import (
    PARSEVAL_INTERNAL,
    HarmonicWeights,
    SensitivityMatrix,
    harmonic_tail_sum,
    harmonic_weights,
)
from .sequence import make_cpmg
from .simulate import DecayCurve

#: Minimum log-log goodness of fit before the power-law tail model is accepted.
TAIL_R2_THRESHOLD = 0.98

METHOD_NAIVE = "naive"
METHOD_FIRST_HARMONIC = "first_harmonic"
METHOD_CORRECTED = "corrected"


@dataclass(frozen=True)
class RateFit:
    """Weighted log-linear fit of one decay curve."""

    rate: float
    sigma: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    warning: str | None = None


def _weighted_line(x, y, sigmas):
    """WLS slope/intercept with standard errors; sigmas may be None (OLS)."""
    if sigmas is None:
        w = np.ones_like(x)
    else:
        w = 1.0 / sigmas**2
    sw = w.sum()
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (x - xbar) ** 2).sum()
    slope = (w * (x - xbar) * (y - ybar)).sum() / sxx
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    ss_res = (w * resid**2).sum()
    ss_tot = (w * (y - ybar) ** 2).sum()
    r_sq = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if sigmas is None:
        # residual-based errors
        dof = max(len(x) - 2, 1)
        var = ss_res / dof
        slope_err = np.sqrt(var / sxx)
        intercept_err = np.sqrt(var * (1.0 / sw + xbar**2 / sxx))
    else:
        # known measurement variances
        slope_err = np.sqrt(1.0 / sxx)
        intercept_err = np.sqrt(1.0 / sw + xbar**2 / sxx)
    return slope, intercept, slope_err, intercept_err, r_sq


def fit_rate(
    curve: DecayCurve,
    tau_b_hint: float,
    signal_floor: float = 0.05,
    min_points: int = 4,
) -> RateFit:
    """Long-time exponential rate of a decay curve.

    Fits ``log(signal)`` against time by weighted least squares on the
    admissible window ``t > 3 tau_b_hint`` (where the decay has turned
    exponential) with ``signal > signal_floor`` (above the noise floor).
    Returns the slope magnitude with its standard error; quality issues
    (non-monotonic signal beyond noise, growing signal) are attached as a
    warning, not raised.
    """
    t = curve.times
    s = curve.signal
    keep = (t > 3.0 * tau_b_hint) & (s > signal_floor)
    if keep.sum() < min_points:
        raise InsufficientDataError(
            f"only {int(keep.sum())} admissible points (need >= {min_points}) with "
            f"t > {3.0 * tau_b_hint:g} s and signal > {signal_floor:g}"
        )
    t_fit = t[keep]
    y = np.log(s[keep])
    sig = curve.sigma[keep]
    log_sigmas = None
    if np.any(sig > 0):
        log_sigmas = np.where(sig > 0, sig / s[keep], np.min(sig[sig > 0]) / s[keep])
    slope, _, slope_err, _, r_sq = _weighted_line(t_fit, y, log_sigmas)
    warning = None
    if slope >= 0:
        warning = "signal does not decay on the fit window"
    else:
        tol = 3.0 * np.where(sig > 0, sig, 0.0)
        rises = np.diff(s[keep]) > tol[1:] + tol[:-1]
        if np.any(rises):
            warning = "signal rises beyond 3 sigma inside the fit window"
    if warning is not None:
        warnings.warn(f"rate fit quality: {warning}", stacklevel=2)
    return RateFit(
        rate=-slope,
        sigma=slope_err,
        r_squared=r_sq,
        window=(float(t_fit.min()), float(t_fit.max())),
        n_points=int(keep.sum()),
        warning=warning,
    )


@dataclass(frozen=True)
class RateSet:
    """Decay rates R_n indexed by divisor n = 1..m over a common suite.

    Arrays run over n = 1..m; missing measurements are explicit NaN holes
    (rows are dropped consistently by the inversions). ``omega_min`` is the
    frequency resolution pi/tau_max of the suite.
    """

    rates: np.ndarray
    sigmas: np.ndarray
    tau_max: float
    fits: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "rates", np.asarray(self.rates, dtype=np.float64))
        object.__setattr__(self, "sigmas", np.asarray(self.sigmas, dtype=np.float64))
        if self.rates.shape != self.sigmas.shape or self.rates.ndim != 1:
            raise ValueError("rates and sigmas must be matching 1-d arrays")
        if not self.tau_max > 0:
            raise ValueError("tau_max must be positive")

    @property
    def m(self) -> int:
        return len(self.rates)

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.m + 1)

    @property
    def omega_min(self) -> float:
        return np.pi / self.tau_max

    @property
    def taus(self) -> np.ndarray:
        return self.tau_max / self.n

    @property
    def holes(self) -> np.ndarray:
        return np.isnan(self.rates)

    @classmethod
    def from_curves(
        cls,
        curves,
        tau_b_hint: float,
        signal_floor: float = 0.05,
        min_points: int = 4,
    ) -> "RateSet":
        """Fit every curve of a suite and index the rates by divisor.

        Curves must share the suite geometry tau_n = tau_max / n (tau_max is
        the largest spacing present); fit failures become holes.
        """
        taus = np.array([c.tau for c in curves])
        tau_max = float(taus.max())
        ns = tau_max / taus
        n_int = np.round(ns).astype(int)
        if not np.allclose(ns, n_int, rtol=1e-6, atol=0.0) or len(set(n_int)) != len(n_int):
            raise GridMismatchError(
                "curve spacings do not form a tau_max/n suite with distinct divisors"
            )
        m = int(n_int.max())
        rates = np.full(m, np.nan)
        sigmas = np.full(m, np.nan)
        fits: list = [None] * m
        for curve, n in zip(curves, n_int):
            try:
                fit = fit_rate(curve, tau_b_hint, signal_floor, min_points)
            except InsufficientDataError as exc:
                warnings.warn(f"n = {n}: {exc}; leaving a hole", stacklevel=2)
                continue
            rates[n - 1] = fit.rate
            sigmas[n - 1] = fit.sigma
            fits[n - 1] = fit
        return cls(rates=rates, sigmas=sigmas, tau_max=tau_max, fits=tuple(fits))


@dataclass(frozen=True)
class TailFit:
    """Power-law tail of the rates: R_n = C a1_sq tail_sum / n^alpha."""

    amplitude: float
    exponent: float
    tail_sum: float
    window: tuple[int, int] = (0, 0)
    r_squared: float = np.nan
    exponent_sigma: float = np.nan
    onset: int = 0


@dataclass(frozen=True)
class SpectrumEstimate:
    """Reconstructed spectral values S(j omega_min), j = 1..m."""

    values: np.ndarray
    sigmas: np.ndarray
    omega_min: float
    method: str
    tail: TailFit | None = None
    notes: tuple[str, ...] = ()

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def j(self) -> np.ndarray:
        return np.arange(1, self.m + 1)

    @property
    def omega(self) -> np.ndarray:
        return self.j * self.omega_min


def _check_dimensions(rates: RateSet, matrix: SensitivityMatrix):
    if rates.m != matrix.m:
        raise ValueError(
            f"rate set has m = {rates.m} but the sensitivity matrix has m = {matrix.m}"
        )


def _solve_with_holes(rates: RateSet, matrix: SensitivityMatrix, rhs: np.ndarray):
    """Triangular solve with hole rows/columns dropped consistently.

    Dropping column n removes S_n from the unknowns; rows that coupled to it
    lose that (small, higher-harmonic) contribution, which is reported in the
    notes rather than silently absorbed.
    """
    holes = rates.holes
    m = rates.m
    notes: list[str] = []
    if not holes.any():
        inv = matrix.inverse()
        values = matrix.solve(rhs)
        sigmas = np.sqrt((inv**2) @ rates.sigmas**2)
        return values, sigmas, notes
    keep = ~holes
    idx = np.nonzero(keep)[0]
    dropped = np.nonzero(holes)[0] + 1
    sub = matrix.matrix[np.ix_(idx, idx)]
    coupled = [
        (int(d), int(n))
        for d in dropped
        for n in rates.n[keep]
        if d % n == 0 and d != n and matrix.matrix[n - 1, d - 1] != 0.0
    ]
    notes.append(f"dropped holes n = {list(map(int, dropped))}")
    if coupled:
        notes.append(
            "neglected couplings of dropped frequencies into rows (j, n): "
            f"{coupled}"
        )
    sub_inv = np.linalg.pinv(sub)
    values = np.full(m, np.nan)
    sigmas = np.full(m, np.nan)
    values[idx] = sub_inv @ rhs[idx]
    sigmas[idx] = np.sqrt((sub_inv**2) @ rates.sigmas[idx] ** 2)
    return values, sigmas, notes


def invert_naive(rates: RateSet, matrix: SensitivityMatrix) -> SpectrumEstimate:
    """Back-substitution solve of U S = R, tail beyond m omega_min neglected."""
    _check_dimensions(rates, matrix)
    rhs = np.where(rates.holes, 0.0, rates.rates)
    values, sigmas, notes = _solve_with_holes(rates, matrix, rhs)
    return SpectrumEstimate(
        values=values,
        sigmas=sigmas,
        omega_min=rates.omega_min,
        method=METHOD_NAIVE,
        notes=tuple(notes),
    )


def first_harmonic(rates: RateSet, matrix: SensitivityMatrix) -> SpectrumEstimate:
    """S(n omega_min) = R_n / A_1^2: every rate read as its first harmonic."""
    _check_dimensions(rates, matrix)
    a1 = matrix.a1_sq
    return SpectrumEstimate(
        values=rates.rates / a1,
        sigmas=rates.sigmas / a1,
        omega_min=rates.omega_min,
        method=METHOD_FIRST_HARMONIC,
    )


def fit_tail(rates: RateSet, window: tuple[int, int], matrix: SensitivityMatrix) -> TailFit:
    """Fit R_n = C a1_sq tail_sum / n^alpha on the divisor window.

    A log-log regression gives the exponent and the combined amplitude; the
    harmonic sum at that exponent then closes for the spectral amplitude C
    (the sum depends only weakly on alpha, so no further iteration is
    needed). Windows showing non-power-law residuals are rejected.
    """
    lo, hi = int(window[0]), int(window[1])
    if not (1 <= lo < hi <= rates.m):
        raise ValueError(f"window {window} must satisfy 1 <= lo < hi <= m = {rates.m}")
    sel = (rates.n >= lo) & (rates.n <= hi) & ~rates.holes
    if sel.sum() < 4:
        raise InsufficientDataError(
            f"tail window [{lo}, {hi}] holds {int(sel.sum())} usable rates, need >= 4"
        )
    r = rates.rates[sel]
    if np.any(r <= 0):
        raise ValueError("tail fit requires positive rates")
    x = np.log(rates.n[sel].astype(np.float64))
    y = np.log(r)
    sig = rates.sigmas[sel]
    log_sigmas = sig / r if np.all(sig > 0) else None
    slope, intercept, slope_err, _, r_sq = _weighted_line(x, y, log_sigmas)
    if r_sq < TAIL_R2_THRESHOLD:
        raise TailModelRejectedError(
            f"log-log fit R^2 = {r_sq:.4f} < {TAIL_R2_THRESHOLD}: the rate tail "
            "does not follow a power law on this window"
        )
    alpha = -slope
    weights = _matrix_weights(matrix)
    tail_sum = harmonic_tail_sum(weights, alpha)
    amplitude = float(np.exp(intercept) / (matrix.a1_sq * tail_sum))
    return TailFit(
        amplitude=amplitude,
        exponent=float(alpha),
        tail_sum=float(tail_sum),
        window=(lo, hi),
        r_squared=float(r_sq),
        exponent_sigma=float(slope_err),
        onset=lo,
    )


def _matrix_weights(matrix: SensitivityMatrix) -> HarmonicWeights:
    """First-row weights of the sensitivity matrix as a HarmonicWeights view."""
    omega_min = matrix.omega_min if matrix.omega_min is not None else 1.0
    return HarmonicWeights(
        base_frequency=omega_min,
        values=matrix.matrix[0].copy(),
        normalization=PARSEVAL_INTERNAL,
        sequence=matrix.sequence,
    )


def tail_residuals(matrix: SensitivityMatrix, tail: TailFit) -> np.ndarray:
    """Rate contribution of the spectrum beyond m omega_min, per divisor n.

    Sums the harmonics with n k > m assuming S = C / j^alpha out there:
    ``res_n = C (a1_sq tail_sum / n^alpha - sum_{j<=m} U_nj / j^alpha)``.
    """
    n = np.arange(1, matrix.m + 1, dtype=np.float64)
    j = np.arange(1, matrix.m + 1, dtype=np.float64)
    full = matrix.a1_sq * tail.tail_sum / n**tail.exponent
    inside = matrix.matrix @ (1.0 / j**tail.exponent)
    return tail.amplitude * (full - inside)


def _as_tail(matrix: SensitivityMatrix, tail) -> TailFit:
    if isinstance(tail, TailFit):
        return tail
    amplitude, exponent = tail
    tail_sum = harmonic_tail_sum(_matrix_weights(matrix), exponent) if amplitude else 1.0
    return TailFit(amplitude=float(amplitude), exponent=float(exponent), tail_sum=tail_sum)


def invert_corrected(
    rates: RateSet, matrix: SensitivityMatrix, tail
) -> SpectrumEstimate:
    """Tail-corrected inversion: subtract the out-of-window harmonic load.

    ``tail`` is a :class:`TailFit` or a plain ``(C, alpha)`` pair. Exact
    whenever the true spectrum follows ``C / j^alpha`` beyond the probed
    window, whatever its shape inside. With ``C = 0`` this reduces to the
    naive inversion.
    """
    _check_dimensions(rates, matrix)
    tail = _as_tail(matrix, tail)
    rhs = np.where(rates.holes, 0.0, rates.rates) - tail_residuals(matrix, tail)
    values, sigmas, notes = _solve_with_holes(rates, matrix, rhs)
    return SpectrumEstimate(
        values=values,
        sigmas=sigmas,
        omega_min=rates.omega_min,
        method=METHOD_CORRECTED,
        tail=tail,
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class BaselineFit:
    """Divisor-independent rate offset fitted alongside a power-law tail."""

    rate: float
    sigma: float
    amplitude: float
    exponent: float
    warning: str | None = None


def subtract_baseline(
    rates: RateSet, window: tuple[int, int]
) -> tuple[RateSet, BaselineFit]:
    """Fit and remove a constant background rate.

    Models the windowed rates as ``R_n = R_base + B / n^alpha`` (a constant
    relaxation channel on top of the pulsed-noise power law; in pulse-spacing
    terms this is the relaxation-time form ``1 / (R_base + C' tau^alpha)``)
    and subtracts the fitted ``R_base`` from every rate. A degenerate fit
    (baseline consistent with zero, or no convergence) warns and returns the
    rates unchanged with ``R_base = 0``.
    """
    lo, hi = int(window[0]), int(window[1])
    sel = (rates.n >= lo) & (rates.n <= hi) & ~rates.holes
    if sel.sum() < 4:
        raise InsufficientDataError(
            f"baseline window [{lo}, {hi}] holds {int(sel.sum())} usable rates, need >= 4"
        )
    n_sel = rates.n[sel].astype(np.float64)
    r_sel = rates.rates[sel]
    sig_sel = rates.sigmas[sel]
    use_sigma = np.all(sig_sel > 0)

    def model(n, base, amp, alpha):
        return base + amp * n ** (-alpha)

    base0 = max(0.9 * r_sel.min(), 1e-12 * r_sel.max())
    resid0 = np.maximum(r_sel - base0, 1e-12 * r_sel.max())
    slope0, intercept0, *_ = _weighted_line(np.log(n_sel), np.log(resid0), None)
    p0 = [base0, float(np.exp(intercept0)), float(-slope0)]
    try:
        popt, pcov = curve_fit(
            model,
            n_sel,
            r_sel,
            p0=p0,
            sigma=sig_sel if use_sigma else None,
            absolute_sigma=use_sigma,
            maxfev=20000,
        )
        base, amp, alpha = popt
        base_sigma = float(np.sqrt(pcov[0, 0]))
    except (RuntimeError, ValueError) as exc:
        warnings.warn(f"baseline fit did not converge ({exc}); assuming zero baseline")
        return rates, BaselineFit(0.0, 0.0, 0.0, 0.0, warning="fit did not converge")
    if base <= 0 or not np.isfinite(base_sigma) or base_sigma >= abs(base):
        warnings.warn(
            "baseline consistent with zero; rates returned unchanged", stacklevel=2
        )
        return rates, BaselineFit(
            0.0, base_sigma, float(amp), float(alpha), warning="baseline consistent with zero"
        )
    new_sigmas = np.sqrt(rates.sigmas**2 + base_sigma**2)
    subtracted = replace(rates, rates=rates.rates - base, sigmas=new_sigmas)
    return subtracted, BaselineFit(
        float(base), base_sigma, float(amp), float(alpha)
    )


def suite_weights(rates: RateSet, k_max: int | None = None) -> HarmonicWeights:
    """CPMG harmonic weights matched to a rate set's frequency grid."""
    k_max = k_max if k_max is not None else rates.m
    return harmonic_weights(make_cpmg(rates.tau_max), k_max)
