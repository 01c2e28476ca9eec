import math
from dataclasses import replace

import numpy as np
import pytest

from pairdecay import (
    DetectorModel,
    FitError,
    Histogram,
    ParameterError,
    RateParameters,
    apparent_lifetime,
    coincidence_histogram,
    estimate_rates,
    fit_cumulative_curves,
    fit_histogram_rate,
    formation_time_bias,
    full_pipeline,
    mle_exponential_rate,
    pipeline_summary,
    simulate,
    solve_lifetime,
    tau_standard_error,
)


def synthetic_histogram(rate=2.0, amplitude=1e6, n_bins=100, t_max=5.0):
    """Noise-free exponential bins; exactly log-linear in the centers."""
    edges = np.linspace(0.0, t_max, n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    counts = amplitude * np.exp(-rate * centers)
    return Histogram(
        bin_edges=edges, counts=counts, overflow=0, total=float(np.sum(counts))
    )


class TestMle:
    def test_unit_samples(self):
        fit = mle_exponential_rate([1.0, 1.0, 1.0])
        assert fit.rate == 1.0
        assert fit.rate_stderr == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-12)
        assert fit.method == "mle"
        assert fit.n_used == 3

    def test_recovers_rate_from_independent_generator(self):
        # Draws come from numpy's own exponential sampler, not ours.
        rng = np.random.default_rng(1234)
        samples = rng.exponential(scale=0.5, size=100_000)
        fit = mle_exponential_rate(samples)
        assert abs(fit.rate - 2.0) <= 4.0 * 2.0 / math.sqrt(samples.size)

    def test_singleton_rejected(self):
        with pytest.raises(FitError):
            mle_exponential_rate([2.0])

    def test_negative_sample_rejected(self):
        with pytest.raises(FitError):
            mle_exponential_rate([0.5, -0.1, 1.0])

    def test_all_zero_rejected(self):
        with pytest.raises(FitError):
            mle_exponential_rate([0.0, 0.0])

    def test_loglikelihood_goodness(self):
        fit = mle_exponential_rate([0.25, 0.75])
        assert fit.goodness == pytest.approx(2.0 * (math.log(2.0) - 1.0), rel=1e-12)


class TestHistogramFit:
    def test_exact_log_linear_bins(self):
        fit = fit_histogram_rate(synthetic_histogram(rate=2.0))
        assert fit.rate == pytest.approx(2.0, abs=1e-10)
        assert fit.method == "weighted_least_squares_log"
        assert fit.n_used == 100
        assert fit.goodness == pytest.approx(0.0, abs=1e-18)

    def test_simulated_coincidences(self, golden_events):
        h = coincidence_histogram(golden_events, 0.05, 5.0)
        fit = fit_histogram_rate(h)
        assert abs(fit.rate - 2.0) <= 0.02
        assert fit.rate_stderr < 0.01

    def test_too_few_usable_bins(self):
        edges = np.linspace(0.0, 3.0, 4)
        h = Histogram(bin_edges=edges, counts=np.array([50, 30, 0]), overflow=0, total=80)
        with pytest.raises(FitError):
            fit_histogram_rate(h)

    def test_low_count_bins_excluded(self):
        h = synthetic_histogram(rate=2.0, amplitude=1e3, n_bins=60, t_max=5.0)
        fit = fit_histogram_rate(h)
        # amplitude e^{-2t} < 5 beyond t ~ 2.65: those bins must not enter
        assert fit.n_used < 60
        assert fit.rate == pytest.approx(2.0, abs=1e-10)

    def test_rising_histogram_rejected(self):
        edges = np.linspace(0.0, 1.0, 6)
        h = Histogram(
            bin_edges=edges,
            counts=np.array([10, 20, 40, 80, 160]),
            overflow=0,
            total=310,
        )
        with pytest.raises(FitError):
            fit_histogram_rate(h)

    def test_nonuniform_bins_rejected_by_container(self):
        with pytest.raises(ParameterError):
            Histogram(
                bin_edges=np.array([0.0, 1.0, 3.0, 4.0]),
                counts=np.array([1, 1, 1]),
                overflow=0,
                total=3,
            )


class TestEstimateRates:
    def test_ideal_recovery(self, golden_events):
        fit_f, fit_s = estimate_rates(golden_events)
        n = len(golden_events)
        assert abs(fit_f.rate - 1.0) <= 4.0 / math.sqrt(n)
        assert abs(fit_s.rate - 2.0) <= 4.0 * 2.0 / math.sqrt(n)
        assert fit_f.n_used == n and fit_s.n_used == n

    def test_smearing_leaves_separations_unbiased(self, smeared_events):
        true_f, true_s = estimate_rates(smeared_events, use_observed=False)
        obs_f, obs_s = estimate_rates(smeared_events, use_observed=True)
        # offsets cancel in separations: same estimate to round-off
        assert obs_s.rate == pytest.approx(true_s.rate, rel=1e-12)
        assert abs(obs_s.rate - 2.0) <= 3.0 * obs_s.rate_stderr
        # first-photon rate picks up a real bias, far beyond noise
        assert abs(obs_f.rate - true_f.rate) > 3.0 * obs_f.rate_stderr

    def test_bias_report_contents(self, smeared_events):
        report = formation_time_bias(smeared_events)
        assert report["gamma_f_bias"] != 0.0
        assert abs(report["gamma_f_bias"]) > 3.0 * report["gamma_f_stderr"]
        assert abs(report["gamma_s_bias"]) <= 1e-12 * report["gamma_s_true_fit"]

    def test_efficiency_reduces_sample_not_rate(self, p12):
        ev = simulate(p12, 200_000, seed=17, detector=DetectorModel(efficiency=0.5))
        fit_f, fit_s = estimate_rates(ev, use_observed=True)
        assert fit_s.n_used < len(ev)
        assert abs(fit_s.n_used / len(ev) - 0.25) <= 4.0 * math.sqrt(0.25 * 0.75 / len(ev))
        assert abs(fit_f.rate - 1.0) <= 4.0 * fit_f.rate_stderr
        assert abs(fit_s.rate - 2.0) <= 4.0 * fit_s.rate_stderr
        assert fit_s.rate_stderr == pytest.approx(
            fit_s.rate / math.sqrt(fit_s.n_used), rel=1e-12
        )

    def test_shift_invariance_of_separation_estimate(self, golden_events):
        shifted = replace(
            golden_events,
            t_f_obs=golden_events.t_f_obs + 0.125,
            t_s_obs=golden_events.t_s_obs + 0.125,
        )
        _, base = estimate_rates(golden_events, use_observed=True)
        _, moved = estimate_rates(shifted, use_observed=True)
        assert moved.rate == pytest.approx(base.rate, rel=1e-12)

    def test_no_usable_events(self, p12):
        ev = simulate(p12, 100, seed=1, detector=DetectorModel(efficiency=0.0))
        with pytest.raises(FitError):
            estimate_rates(ev, use_observed=True)


class TestApparentLifetime:
    def test_noise_free(self):
        assert apparent_lifetime(synthetic_histogram(rate=2.0)) == pytest.approx(
            0.5, abs=1e-10
        )

    def test_entangled_pair_spectrum_half_lifetime(self, golden_events):
        h = coincidence_histogram(golden_events, 0.05, 5.0)
        assert apparent_lifetime(h) == pytest.approx(0.5, rel=0.01)

    def test_product_state_control(self):
        # gamma_s equal to the free-atom rate: apparent lifetime ~ tau_0.
        p = RateParameters(gamma_f=2.0, gamma_s=1.0, n0=1.0, gamma_0=1.0)
        ev = simulate(p, 300_000, seed=19)
        h = coincidence_histogram(ev, 0.1, 8.0)
        assert apparent_lifetime(h) == pytest.approx(1.0, rel=0.01)


class TestConsistencyAndAgreement:
    def test_mle_error_scales_like_inverse_sqrt_n(self):
        rng = np.random.default_rng(7)
        sizes = np.array([1_000, 10_000, 100_000])
        rms = []
        for n in sizes:
            errs = [
                mle_exponential_rate(rng.exponential(0.5, n)).rate - 2.0
                for _ in range(200)
            ]
            rms.append(math.sqrt(np.mean(np.square(errs))))
        slope = np.polyfit(np.log(sizes), np.log(rms), 1)[0]
        assert 0.4 <= -slope <= 0.6

    def test_mle_and_histogram_fit_agree(self, golden_events):
        _, mle = estimate_rates(golden_events)
        wls = fit_histogram_rate(coincidence_histogram(golden_events, 0.05, 5.0))
        combined = math.hypot(mle.rate_stderr, wls.rate_stderr)
        assert abs(mle.rate - wls.rate) <= 3.0 * combined

    def test_cumulative_curve_cross_check(self, golden_events):
        fit_f, fit_s = fit_cumulative_curves(golden_events)
        assert fit_f.method == "cumulative_lsq"
        assert fit_f.rate == pytest.approx(1.0, abs=0.02)
        assert fit_s.rate == pytest.approx(2.0, abs=0.04)


class TestPipeline:
    def test_golden_set_recovers_quoted_lifetime(self, golden_events):
        fit_f, fit_s, solution = full_pipeline(golden_events)
        p_hat = RateParameters(fit_f.rate, fit_s.rate)
        sigma = tau_standard_error(p_hat, fit_f.rate_stderr, fit_s.rate_stderr)
        assert abs(solution.tau - 1.31) <= 0.01
        truth = solve_lifetime(RateParameters(1.0, 2.0)).tau
        assert abs(solution.tau - truth) <= 3.0 * sigma

    def test_round_trip_random_parameters(self):
        rng = np.random.default_rng(55)
        for _ in range(10):
            p = RateParameters(gamma_f=float(rng.uniform(1.0, 8.0)), gamma_s=2.0)
            ev = simulate(p, 100_000, seed=int(rng.integers(1 << 31)))
            fit_f, fit_s, solution = full_pipeline(ev)
            sigma = tau_standard_error(
                RateParameters(fit_f.rate, fit_s.rate),
                fit_f.rate_stderr,
                fit_s.rate_stderr,
            )
            assert abs(solution.tau - solve_lifetime(p).tau) <= 3.0 * sigma

    def test_tau_stderr_positive_and_small(self, golden_events):
        fit_f, fit_s, _ = full_pipeline(golden_events)
        sigma = tau_standard_error(
            RateParameters(fit_f.rate, fit_s.rate), fit_f.rate_stderr, fit_s.rate_stderr
        )
        assert 0.0 < sigma < 0.01

    def test_summary_schema(self, golden_events):
        payload = pipeline_summary(golden_events)
        assert set(payload) == {
            "gamma_f",
            "gamma_f_stderr",
            "gamma_s",
            "gamma_s_stderr",
            "tau_over_tau0",
            "tau_stderr",
            "tau_app_over_tau0",
            "method",
            "n_used",
            "goodness",
        }
        assert payload["method"] == "mle"
        assert payload["tau_over_tau0"] == pytest.approx(1.31, abs=0.01)
        assert payload["tau_app_over_tau0"] == pytest.approx(0.5, rel=0.01)
        assert payload["n_used"] == len(golden_events)
