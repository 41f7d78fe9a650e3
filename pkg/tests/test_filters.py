import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddspectro import (
    PulseSequence,
    filter_function_sq,
    harmonic_tail_sum,
    harmonic_weights,
    make_cpmg,
    sensitivity_matrix,
)
from ddspectro.filters import A1_NORMALIZED, TWO_PI

from _oracles import filter_sq_trapezoid

A1_SQ_CPMG = 4.0 * np.sqrt(TWO_PI) / np.pi**2


class TestFilterFunction:
    def test_balanced_sequence_blocks_dc(self):
        seq = make_cpmg(1e-4)
        for cycles in (1, 3, 10):
            assert filter_function_sq(seq, 0.0, cycles) == pytest.approx(0.0, abs=1e-30)

    def test_matches_trapezoid_oracle_at_first_harmonic(self):
        seq = make_cpmg(1.0)
        w0 = np.pi  # pi / tau
        ours = filter_function_sq(seq, w0, cycles=1)
        oracle = filter_sq_trapezoid(seq, w0, cycles=1)
        assert ours == pytest.approx(oracle, rel=1e-10)

    @pytest.mark.parametrize("omega_frac", [0.37, 1.0, 2.0, 3.0, 5.41])
    @pytest.mark.parametrize("cycles", [1, 4])
    def test_matches_trapezoid_oracle_generic(self, omega_frac, cycles):
        seq = PulseSequence(pulse_times=(0.21, 0.55, 0.83), cycle_length=1.0)
        omega = omega_frac * np.pi
        ours = filter_function_sq(seq, omega, cycles=cycles)
        oracle = filter_sq_trapezoid(seq, omega, cycles=cycles, points_per_segment=50_000)
        assert ours == pytest.approx(oracle, rel=1e-7, abs=1e-18)

    def test_concentrates_on_odd_harmonics(self):
        """Many cycles push the filter mass onto w0 = pi/tau and odd multiples."""
        tau = 1.0
        seq = make_cpmg(tau)
        w0 = np.pi / tau
        grid = np.linspace(0.02 * w0, 6.0 * w0, 4001)
        fsq = filter_function_sq(seq, grid, cycles=200)
        near = np.zeros_like(grid, dtype=bool)
        for k in (1, 3, 5):
            near |= np.abs(grid - k * w0) < 0.05 * w0
        assert fsq[near].sum() / fsq.sum() > 0.95

    def test_comb_limit_scalings(self):
        """Off harmonics |F|^2/(M tau_c) -> 0; on harmonics |F|^2/(M tau_c)^2 -> const."""
        seq = make_cpmg(1.0)
        tau_c = seq.cycle_length
        w0 = np.pi  # first harmonic
        off = (1.0 + 1.0 / np.sqrt(2.0)) * w0  # irrational multiple: no kernel zeros
        ms = np.array([1, 10, 100, 1000])
        off_vals = np.array(
            [filter_function_sq(seq, off, int(m)) / (m * tau_c) for m in ms]
        )
        assert off_vals[-1] < 1e-2 * off_vals[0]
        on_vals = np.array(
            [filter_function_sq(seq, w0, int(m)) / (m * tau_c) ** 2 for m in ms]
        )
        expected = A1_SQ_CPMG / TWO_PI**1.5
        assert np.allclose(on_vals, expected, rtol=1e-12)

    def test_rejects_bad_cycles(self):
        with pytest.raises(ValueError):
            filter_function_sq(make_cpmg(1.0), 1.0, cycles=0)


@settings(max_examples=40, deadline=None)
@given(
    pulses=st.lists(
        st.floats(min_value=0.02, max_value=0.98), min_size=1, max_size=5, unique=True
    ),
    omega=st.floats(min_value=0.0, max_value=200.0),
)
def test_filter_nonnegative(pulses, omega):
    seq = PulseSequence(pulse_times=tuple(sorted(pulses)), cycle_length=1.0)
    assert filter_function_sq(seq, omega, cycles=3) >= 0.0


class TestHarmonicWeights:
    def test_even_harmonics_vanish(self):
        w = harmonic_weights(make_cpmg(1e-4), 20)
        assert np.all(w.values[1::2] <= 1e-12 * w.a1_sq)

    def test_odd_ratios(self):
        w = harmonic_weights(make_cpmg(2.3e-4), 9)
        ratios = w.ratios()
        assert ratios[2] == pytest.approx(1.0 / 9.0, rel=1e-12)
        assert ratios[4] == pytest.approx(1.0 / 25.0, rel=1e-12)

    def test_absolute_scale_and_base_frequency(self):
        tau = 1e-4
        w = harmonic_weights(make_cpmg(tau), 3)
        assert w.a1_sq == pytest.approx(A1_SQ_CPMG, rel=1e-12)
        assert w.base_frequency == pytest.approx(np.pi / tau, rel=1e-12)

    def test_parseval_fold(self):
        """Fold weights are the square-wave Fourier masses: 8/pi^2 at k=1, sum 1."""
        k_max = 4001
        w = harmonic_weights(make_cpmg(1.0), k_max)
        folds = w.fold_weights()
        assert folds[0] == pytest.approx(8.0 / np.pi**2, rel=1e-12)
        assert folds.sum() == pytest.approx(1.0, abs=1.5 / k_max)

    def test_white_noise_calibration(self):
        """sum A_k^2 = sqrt(pi/2): flat spectra decay at the same rate for any tau."""
        k_max = 4001
        w = harmonic_weights(make_cpmg(1.0), k_max)
        assert w.values.sum() == pytest.approx(np.sqrt(np.pi / 2.0), rel=1.0 / k_max)

    def test_scale_covariance(self):
        w1 = harmonic_weights(make_cpmg(1e-4), 7)
        w2 = harmonic_weights(make_cpmg(3e-4), 7)
        assert w2.base_frequency == pytest.approx(w1.base_frequency / 3.0, rel=1e-12)
        assert np.allclose(w2.ratios(), w1.ratios(), rtol=1e-10, atol=1e-15)
        assert np.allclose(w2.values, w1.values, rtol=1e-10, atol=1e-15)

    def test_rejects_bad_k_max(self):
        with pytest.raises(ValueError):
            harmonic_weights(make_cpmg(1.0), 0)

    def test_odd_pulse_count_uses_doubled_period(self):
        seq = PulseSequence(pulse_times=(0.5,), cycle_length=1.0)  # spin-echo cycle
        w = harmonic_weights(seq, 8)
        assert w.base_frequency == pytest.approx(np.pi, rel=1e-12)
        assert np.all(w.values[1::2] <= 1e-12 * w.a1_sq)

    def test_a1_normalized_view(self):
        w = harmonic_weights(make_cpmg(1.0), 5).a1_normalized()
        assert w.normalization == A1_NORMALIZED
        assert w.values[0] == 1.0
        with pytest.raises(ValueError):
            w.fold_weights()


class TestHarmonicTailSum:
    def test_reference_exponent_359(self):
        w = harmonic_weights(make_cpmg(1.0), 99)
        lam = harmonic_tail_sum(w, 3.59)
        # independent check: 1 + 3^-5.59 + 5^-5.59 + 7^-5.59 + ...
        ks = np.arange(1, 100001, 2, dtype=np.float64)
        direct = np.sum(ks ** (-2.0 - 3.59))
        assert lam == pytest.approx(direct, rel=1e-9)
        assert 1.0015 <= lam <= 1.0030

    def test_large_alpha_limit(self):
        w = harmonic_weights(make_cpmg(1.0), 9)
        assert harmonic_tail_sum(w, 200.0) == pytest.approx(1.0, abs=1e-12)

    def test_tail_mass_matches_report(self):
        w = harmonic_weights(make_cpmg(1.0), 99)
        tail = harmonic_tail_sum(w, 3.59) - 1.0
        assert tail == pytest.approx(2e-3, rel=0.2)

    @pytest.mark.parametrize("alpha", [1.0, 0.3, -2.0])
    def test_divergent_exponent_rejected(self, alpha):
        w = harmonic_weights(make_cpmg(1.0), 9)
        with pytest.raises(ValueError):
            harmonic_tail_sum(w, alpha)

    def test_small_alpha_converges_by_extension(self):
        w = harmonic_weights(make_cpmg(1.0), 9)
        lam = harmonic_tail_sum(w, 1.5)
        ks = np.arange(1, 4_000_001, 2, dtype=np.float64)
        direct = np.sum(ks ** (-3.5))
        assert lam == pytest.approx(direct, rel=1e-7)


class TestSensitivityMatrix:
    def test_single_measurement(self):
        w = harmonic_weights(make_cpmg(1.0), 1)
        u = sensitivity_matrix(w, 1)
        assert u.matrix.shape == (1, 1)
        assert u.matrix[0, 0] == pytest.approx(A1_SQ_CPMG, rel=1e-12)

    def test_m4_pattern_matches_enumeration(self):
        """Nonzeros exactly where j = n k with odd k, by brute delta counting."""
        m = 4
        w = harmonic_weights(make_cpmg(1.0), m)
        u = sensitivity_matrix(w, m).matrix
        expected = np.zeros((m, m))
        for n in range(1, m + 1):
            for k in range(1, m // n + 1):
                for j in range(1, m + 1):
                    if j == n * k:
                        expected[n - 1, j - 1] += w.values[k - 1]
        assert np.allclose(u, expected, rtol=1e-14)
        live = {(1, 1), (1, 3), (2, 2), (3, 3), (4, 4)}
        nz = {(n + 1, j + 1) for n, j in zip(*np.nonzero(u > 1e-12 * u[0, 0]))}
        assert nz == live
        assert u[0, 2] == pytest.approx(u[0, 0] / 9.0, rel=1e-12)

    def test_upper_triangular_positive_diagonal(self):
        w = harmonic_weights(make_cpmg(1.0), 12)
        u = sensitivity_matrix(w, 12).matrix
        assert np.allclose(u, np.triu(u))
        assert np.all(np.diag(u) > 0)

    def test_solver_round_trip(self):
        m = 17
        w = harmonic_weights(make_cpmg(1.0), m)
        u = sensitivity_matrix(w, m)
        rng = np.random.default_rng(3)
        s_true = rng.uniform(0.1, 2.0, m)
        rates = u.matrix @ s_true
        recovered = u.solve(rates)
        assert np.allclose(recovered, s_true, rtol=1e-12)
        assert np.allclose(u.matrix @ recovered, rates, rtol=1e-12)

    def test_rejects_normalized_weights(self):
        w = harmonic_weights(make_cpmg(1.0), 4).a1_normalized()
        with pytest.raises(ValueError):
            sensitivity_matrix(w, 4)

    def test_weights_csv(self, tmp_path):
        w = harmonic_weights(make_cpmg(1.0), 5)
        path = tmp_path / "w.csv"
        w.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# ddspectro harmonic-weights v1")
        assert lines[1] == "k,A_k_sq"
        assert len(lines) == 7

    def test_matrix_csv(self, tmp_path):
        w = harmonic_weights(make_cpmg(1.0), 4)
        u = sensitivity_matrix(w, 4)
        path = tmp_path / "u.csv"
        u.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# ddspectro sensitivity-matrix v1")
        assert lines[1] == "n,j1,j2,j3,j4"
        row1 = lines[2].split(",")
        assert float(row1[3]) == pytest.approx(u.a1_sq / 9.0, rel=1e-12)
