import numpy as np
import pytest

from ddspectro import (
    Lorentzian,
    Modulated,
    PowerLaw,
    PulseSequence,
    Tabulated,
    WhiteNoise,
    analytic_curve,
    decay_exponent,
    harmonic_weights,
    make_cpmg,
    monte_carlo_curve,
    run_suite,
)
from ddspectro.simulate import _cycle_weights

from _oracles import chi_exponential_correlation, comb_rate

LOR = Lorentzian(coupling_sq=1e7, correlation_time=100e-6)


class TestDecayExponent:
    def test_quasi_static_noise_refocused(self):
        """A near-static coupling is refocused: exponent stays tiny.

        Unrefocused dephasing would give roughly b^2 t^2 / 2 for t well
        inside the correlation time.
        """
        seq = make_cpmg(1e-4)
        static = Lorentzian(coupling_sq=1e6, correlation_time=10.0)
        t = 4 * seq.cycle_length
        chi = decay_exponent(static, seq, 4)
        unrefocused = 0.5 * 1e6 * t**2
        assert chi < 1e-6 * unrefocused

    def test_white_rate_independent_of_tau(self):
        rates = []
        for tau in (50e-6, 100e-6, 200e-6):
            seq = make_cpmg(tau)
            rates.append(decay_exponent(WhiteNoise(5.0), seq, 32) / (32 * seq.cycle_length))
        rates = np.array(rates)
        assert rates.max() / rates.min() - 1.0 < 0.01
        assert np.allclose(rates, np.sqrt(np.pi / 2) * 5.0, rtol=0.01)

    def test_comb_limit_at_thousand_cycles(self):
        seq = make_cpmg(1e-4)
        rate = decay_exponent(LOR, seq, 1000) / (1000 * seq.cycle_length)
        comb = comb_rate(LOR, 1e-4, k_max=10_000)
        assert abs(rate - comb) / comb < 0.01

    @pytest.mark.parametrize("cycles", [1, 3, 17])
    def test_matches_time_domain_oracle(self, cycles):
        """Closed-form double integral of the correlation function."""
        seq = make_cpmg(1e-4)
        ours = decay_exponent(LOR, seq, cycles)
        oracle = chi_exponential_correlation(seq, cycles, 1e7, 100e-6)
        assert ours == pytest.approx(oracle, rel=2e-7)

    def test_time_domain_oracle_generic_sequence(self):
        seq = PulseSequence(pulse_times=(0.3e-4, 0.9e-4, 1.7e-4), cycle_length=2.1e-4)
        ours = decay_exponent(LOR, seq, 5)
        oracle = chi_exponential_correlation(seq, 5, 1e7, 100e-6)
        assert ours == pytest.approx(oracle, rel=2e-7)

    def test_monotone_in_time(self):
        seq = make_cpmg(1e-4)
        chis = [decay_exponent(LOR, seq, m) for m in (1, 2, 4, 8, 16, 32)]
        assert np.all(np.diff(chis) > 0)

    def test_rejects_bad_cycles(self):
        with pytest.raises(ValueError):
            decay_exponent(LOR, make_cpmg(1e-4), 0)


class TestAnalyticCurve:
    def test_long_time_exponential(self):
        """log(signal) vs t is linear (R^2 > 0.999) once t >> tau_b."""
        seq = make_cpmg(1e-4)
        cycles = np.unique(np.geomspace(8, 600, 12).astype(int))
        curve = analytic_curve(LOR, seq, cycles)
        keep = curve.times > 5 * 100e-6
        t, y = curve.times[keep], np.log(curve.signal[keep])
        slope, intercept = np.polyfit(t, y, 1)
        resid = y - (slope * t + intercept)
        r_sq = 1 - np.sum(resid**2) / np.sum((y - y.mean()) ** 2)
        assert r_sq > 0.999

    def test_signal_non_increasing_and_bounded(self):
        curve = analytic_curve(LOR, make_cpmg(1e-4), [1, 2, 4, 8, 16])
        assert curve.signal[0] == 1.0
        assert np.all(np.diff(curve.signal) <= 0)
        assert np.all(curve.signal > 0)

    def test_times_are_cycle_multiples(self):
        seq = make_cpmg(1e-4)
        curve = analytic_curve(LOR, seq, [1, 5, 9])
        assert np.allclose(curve.times, np.array([0, 1, 5, 9]) * seq.cycle_length)


class TestCycleWeights:
    def test_weights_integrate_constant_to_cycle_area(self):
        """sum of weights equals the signed modulation area per cycle."""
        seq = make_cpmg(1e-4)
        w = _cycle_weights(seq, 80)
        assert abs(w.sum() - seq.modulation_integral) < 1e-18
        uneven = PulseSequence(pulse_times=(0.31e-4, 0.77e-4), cycle_length=2e-4)
        w2 = _cycle_weights(uneven, 80)
        assert w2.sum() == pytest.approx(uneven.modulation_integral, abs=1e-18)

    def test_weights_reproduce_linear_integral_with_offgrid_pulses(self):
        """Exact for piecewise-linear integrands even with off-grid flips."""
        seq = PulseSequence(pulse_times=(0.333e-4, 1.111e-4), cycle_length=2e-4)
        n_cyc = 64
        w = _cycle_weights(seq, n_cyc)
        ts = np.arange(n_cyc + 1) * (seq.cycle_length / n_cyc)
        samples = 3.0 * ts + 0.7  # linear test function
        ours = float(w @ samples)
        bounds = seq.segment_bounds
        exact = sum(
            s * (1.5 * (b**2 - a**2) + 0.7 * (b - a))
            for a, b, s in zip(bounds[:-1], bounds[1:], seq.segment_signs)
        )
        assert ours == pytest.approx(exact, rel=1e-12)


class TestMonteCarlo:
    def test_zero_amplitude_noise_keeps_signal_at_one(self):
        model = Lorentzian(coupling_sq=0.0, correlation_time=1e-4)
        curve = monte_carlo_curve(model, make_cpmg(1e-4), [1, 4, 16], trials=100, seed=1)
        assert np.allclose(curve.signal, 1.0)
        assert np.allclose(curve.sigma, 0.0)

    def test_gaussian_phase_identity(self):
        """mean cos(phase) tracks exp(-var(phase)/2) within sampling error."""
        seq = make_cpmg(1e-4)
        curve = monte_carlo_curve(LOR, seq, [16], trials=3000, seed=4)
        chi = decay_exponent(LOR, seq, 16)
        assert abs(curve.signal[-1] - np.exp(-chi)) < 3.5 * curve.sigma[-1]

    def test_agrees_with_analytic_engine(self):
        seq = make_cpmg(1e-4)
        cycles = [1, 2, 4, 8, 16, 32, 64]
        mc = monte_carlo_curve(LOR, seq, cycles, trials=800, seed=12)
        an = analytic_curve(LOR, seq, cycles)
        z = (mc.signal[1:] - an.signal[1:]) / mc.sigma[1:]
        assert np.all(np.abs(z) < 3.0)

    def test_deterministic_same_seed(self):
        a = monte_carlo_curve(LOR, make_cpmg(1e-4), [1, 8], trials=120, seed=9)
        b = monte_carlo_curve(LOR, make_cpmg(1e-4), [1, 8], trials=120, seed=9)
        assert np.array_equal(a.signal, b.signal)
        assert np.array_equal(a.sigma, b.sigma)

    def test_stream_base_decorrelates(self):
        a = monte_carlo_curve(LOR, make_cpmg(1e-4), [8], trials=120, seed=9)
        b = monte_carlo_curve(LOR, make_cpmg(1e-4), [8], trials=120, seed=9, stream_base=1 << 32)
        assert a.signal[-1] != b.signal[-1]

    def test_rejects_too_few_trials(self):
        with pytest.raises(ValueError):
            monte_carlo_curve(LOR, make_cpmg(1e-4), [1], trials=50, seed=0)

    def test_rejects_coarse_dt(self):
        seq = make_cpmg(1e-4)
        with pytest.raises(ValueError):
            monte_carlo_curve(LOR, seq, [1], trials=100, seed=0, dt=seq.min_segment / 5)

    def test_rejects_non_dividing_dt(self):
        seq = make_cpmg(1e-4)
        with pytest.raises(ValueError):
            monte_carlo_curve(LOR, seq, [1], trials=100, seed=0, dt=seq.cycle_length / 81.5)

    def test_odd_pulse_count_sequence(self):
        """Sign continuation across cycles: one-pulse cycle against analytic."""
        seq = PulseSequence(pulse_times=(1e-4,), cycle_length=2e-4)
        cycles = [2, 4, 8, 16]
        mc = monte_carlo_curve(LOR, seq, cycles, trials=800, seed=3)
        an = analytic_curve(LOR, seq, cycles)
        z = (mc.signal[1:] - an.signal[1:]) / mc.sigma[1:]
        assert np.all(np.abs(z) < 3.0)


class TestRunSuite:
    def test_suite_geometry(self):
        curves = run_suite(LOR, tau_max=2e-3, m=4, engine="analytic", points=5)
        assert len(curves) == 4
        taus = np.array([c.tau for c in curves])
        assert np.allclose(taus, 2e-3 / np.arange(1, 5), rtol=1e-12)

    def test_resolution_frequency(self):
        assert np.pi / 2e-3 == pytest.approx(1570.8, rel=1e-4)

    def test_single_measurement_suite_matches_direct_call(self):
        suite = run_suite(LOR, tau_max=1e-3, m=1, engine="analytic", points=6)
        seq = make_cpmg(1e-3)
        direct = analytic_curve(LOR, seq, suite[0].cycles[1:])
        assert np.allclose(suite[0].signal, direct.signal, rtol=1e-12)

    def test_monte_carlo_suite_deterministic(self):
        kw = dict(engine="monte_carlo", trials=100, seed=5, points=4)
        a = run_suite(LOR, 4e-4, 2, **kw)
        b = run_suite(LOR, 4e-4, 2, **kw)
        for ca, cb in zip(a, b):
            assert np.array_equal(ca.signal, cb.signal)

    def test_curves_reach_depth(self):
        curves = run_suite(LOR, tau_max=2e-3, m=3, engine="analytic", points=10)
        for curve in curves:
            assert curve.signal[-1] < np.exp(-1.0)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            run_suite(LOR, -1.0, 3)
        with pytest.raises(ValueError):
            run_suite(LOR, 1e-3, 0)
        with pytest.raises(ValueError):
            run_suite(LOR, 1e-3, 2, engine="exact")


class TestEngineAgreementAcrossKinds:
    @pytest.mark.parametrize(
        "model",
        [
            WhiteNoise(level=3.0),
            Modulated(
                base=Lorentzian(coupling_sq=5e6, correlation_time=1e-4),
                peak_power=5e6,
                peak_frequency=np.pi / 65e-6,
                peak_width=3000.0,
            ),
            PowerLaw(amplitude=400.0, exponent=3.0, cutoff=np.pi / 2e-3),
            Tabulated(
                omega=np.geomspace(1e2, 3e6, 80),
                values=1e3 / (1.0 + (np.geomspace(1e2, 3e6, 80) * 1e-4) ** 2),
                tail_rule="power_law",
            ),
        ],
        ids=["white", "modulated", "power_law", "tabulated"],
    )
    def test_engines_agree(self, model):
        seq = make_cpmg(65e-6)
        cycles = [1, 4, 16, 48]
        mc = monte_carlo_curve(model, seq, cycles, trials=600, seed=8)
        an = analytic_curve(model, seq, cycles)
        z = (mc.signal[1:] - an.signal[1:]) / mc.sigma[1:]
        assert np.all(np.abs(z) < 3.0)
