"""NumPy reference implementations of the compiled kernels.

These are the semantics of record: the Cython versions in ``_ckernels.pyx``
must agree bit-for-bit up to floating-point reassociation, and the parity
tests compare the two directly.
"""

import numpy as np

BACKEND = "numpy"


def segment_phasor_sq(omega, seg_len, seg_mid, seg_sign):
    """Squared magnitude of a signed piecewise-constant Fourier sum.

    Evaluates ``|sum_i s_i L_i sinc(w L_i / 2) exp(-i w m_i)|^2`` for every
    ``w`` in ``omega`` where ``sinc(x) = sin(x)/x``. Each term is the exact
    transform of a constant segment of length ``L_i`` centred at ``m_i`` with
    sign ``s_i``; the form is finite and smooth at ``w = 0``.
    """
    w = np.asarray(omega, dtype=np.float64)[:, None]
    amp = seg_sign * seg_len * np.sinc(w * seg_len / (2.0 * np.pi))
    phase = w * seg_mid
    re = (amp * np.cos(phase)).sum(axis=1)
    im = (amp * np.sin(phase)).sum(axis=1)
    return re * re + im * im


def cycle_phase_signal(samples, weights, n_cyc, cycle_counts, alternate=False):
    """Accumulate cos(accumulated phase) statistics over trials.

    samples : (trials, L) noise sample matrix, L >= cycle_counts[-1]*n_cyc + 1
    weights : (n_cyc + 1,) per-cycle quadrature weights; the last entry acts
        on the sample shared with the next cycle
    cycle_counts : ascending positive ints, the cycle counts to sample at
    alternate : negate every other cycle integral (odd pulse count per cycle)

    Returns ``(sum_cos, sum_cos_sq)``, each of shape ``(len(cycle_counts),)``,
    summed over trials.
    """
    samples = np.asarray(samples, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    counts = np.asarray(cycle_counts, dtype=np.int64)
    trials = samples.shape[0]
    m_max = int(counts[-1])
    body = samples[:, : m_max * n_cyc].reshape(trials, m_max, n_cyc)
    integrals = body @ weights[:n_cyc]
    integrals += weights[n_cyc] * samples[:, n_cyc :: n_cyc][:, :m_max]
    if alternate:
        integrals *= np.where(np.arange(m_max) % 2 == 0, 1.0, -1.0)
    phases = np.cumsum(integrals, axis=1)[:, counts - 1]
    cosines = np.cos(phases)
    return cosines.sum(axis=0), (cosines * cosines).sum(axis=0)
