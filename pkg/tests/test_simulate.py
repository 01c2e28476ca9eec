import math

import numpy as np
import pytest
from scipy import stats

from pairdecay import (
    DetectorModel,
    ParameterError,
    RateParameters,
    coincidence_histogram,
    empirical_populations,
    entangled_population,
    product_unstable_population,
    simulate,
)
from conftest import binomial_4sigma

# Asymptotic Kolmogorov-Smirnov critical value at the 0.1% level.
KS_COEFF_01_PERCENT = math.sqrt(-math.log(0.0005) / 2.0)


def empty_event_set(p12):
    return simulate(p12, 1, seed=0).__class__(
        params=p12,
        detector=DetectorModel(),
        seed=0,
        pair_id=np.empty(0, dtype=np.int64),
        t_f=np.empty(0),
        t_s=np.empty(0),
        first_emitter=np.empty(0, dtype=np.uint8),
        detected_f=np.empty(0, dtype=bool),
        detected_s=np.empty(0, dtype=bool),
        t_f_obs=np.empty(0),
        t_s_obs=np.empty(0),
    )


class TestDraws:
    def test_first_emission_mean(self, golden_events):
        n = len(golden_events)
        assert abs(np.mean(golden_events.t_f) - 1.0) <= 4.0 / math.sqrt(n)

    def test_separation_mean(self, golden_events):
        n = len(golden_events)
        seps = golden_events.t_s - golden_events.t_f
        assert abs(np.mean(seps) - 0.5) <= 4.0 * 0.5 / math.sqrt(n)

    def test_survivor_fraction_matches_closed_form(self, p12, golden_events):
        n = len(golden_events)
        frac = np.count_nonzero(golden_events.t_f > 1.0) / n
        expected = entangled_population(p12, 1.0) / p12.n0
        assert abs(frac - expected) <= binomial_4sigma(expected, n)

    def test_emitter_balance(self, golden_events):
        n = len(golden_events)
        frac_a = np.count_nonzero(golden_events.first_emitter == 0) / n
        assert abs(frac_a - 0.5) <= binomial_4sigma(0.5, n)

    def test_time_ordering(self, golden_events):
        assert np.all(golden_events.t_f >= 0.0)
        assert np.all(golden_events.t_s >= golden_events.t_f)

    def test_kolmogorov_smirnov_both_stages(self, golden_events):
        n = 100_000
        crit = KS_COEFF_01_PERCENT / math.sqrt(n)
        ks_f = stats.kstest(golden_events.t_f[:n], "expon", args=(0.0, 1.0))
        ks_s = stats.kstest(
            (golden_events.t_s - golden_events.t_f)[:n], "expon", args=(0.0, 0.5)
        )
        assert ks_f.statistic < crit
        assert ks_s.statistic < crit

    def test_stage_independence(self, golden_events):
        n = len(golden_events)
        corr = np.corrcoef(golden_events.t_f, golden_events.t_s - golden_events.t_f)[0, 1]
        assert abs(corr) <= 4.0 / math.sqrt(n)

    def test_ideal_detector_observes_truth(self, golden_events):
        assert np.all(golden_events.detected_f)
        assert np.all(golden_events.detected_s)
        assert np.array_equal(golden_events.t_f_obs, golden_events.t_f)
        assert np.array_equal(golden_events.t_s_obs, golden_events.t_s)


class TestReproducibility:
    def test_same_seed_bit_identical(self, p12):
        a = simulate(p12, 20_000, seed=123)
        b = simulate(p12, 20_000, seed=123)
        for col in ("t_f", "t_s", "first_emitter", "detected_f", "t_f_obs", "t_s_obs"):
            assert np.array_equal(getattr(a, col), getattr(b, col))

    def test_thread_and_chunk_invariance(self, p12):
        a = simulate(p12, 30_000, seed=5, n_threads=1)
        b = simulate(p12, 30_000, seed=5, n_threads=4, chunk_size=701)
        c = simulate(p12, 30_000, seed=5, n_threads=2, chunk_size=9999)
        for col in ("t_f", "t_s", "first_emitter", "detected_f", "t_f_obs", "t_s_obs"):
            assert np.array_equal(getattr(a, col), getattr(b, col))
            assert np.array_equal(getattr(a, col), getattr(c, col))

    def test_different_seed_differs(self, p12):
        a = simulate(p12, 1000, seed=1)
        b = simulate(p12, 1000, seed=2)
        assert not np.array_equal(a.t_f, b.t_f)

    def test_prefix_stability(self, p12):
        # Draws are a pure function of (seed, pair_id): a shorter run is a
        # prefix of a longer one.
        a = simulate(p12, 1000, seed=77)
        b = simulate(p12, 3000, seed=77)
        assert np.array_equal(a.t_f, b.t_f[:1000])


class TestDetectorEffects:
    def test_thinning(self, p12):
        ev = simulate(p12, 100_000, seed=3, detector=DetectorModel(efficiency=0.5))
        both = np.mean(ev.detected_f & ev.detected_s)
        assert abs(both - 0.25) <= binomial_4sigma(0.25, len(ev))
        each = np.mean(ev.detected_f)
        assert abs(each - 0.5) <= binomial_4sigma(0.5, len(ev))

    def test_detection_independent_of_times(self, p12):
        # Fixed draw slots: detector settings must not change the times.
        a = simulate(p12, 5000, seed=9)
        b = simulate(p12, 5000, seed=9, detector=DetectorModel(efficiency=0.3))
        assert np.array_equal(a.t_f, b.t_f)
        assert np.array_equal(a.t_s, b.t_s)

    def test_smearing_is_shift_only_without_jitter(self, smeared_events):
        ev = smeared_events
        d_true = ev.t_s - ev.t_f
        d_obs = ev.t_s_obs - ev.t_f_obs
        scale = max(np.max(np.abs(ev.t_s_obs)), np.max(ev.t_s))
        assert np.max(np.abs(d_obs - d_true)) <= 4.0 * np.finfo(float).eps * scale

    def test_gaussian_offset_moments(self, smeared_events):
        ev = smeared_events
        offsets = ev.t_f_obs - ev.t_f
        n = len(ev)
        assert abs(np.mean(offsets)) <= 4.0 * 0.1 / math.sqrt(n)
        assert np.std(offsets) == pytest.approx(0.1, rel=0.02)

    def test_uniform_offset_bounds(self, p12):
        det = DetectorModel(formation_profile="uniform", formation_width=0.4)
        ev = simulate(p12, 50_000, seed=11, detector=det)
        offsets = ev.t_f_obs - ev.t_f
        assert np.all(offsets > -0.2) and np.all(offsets <= 0.2)
        assert np.std(offsets) == pytest.approx(0.4 / math.sqrt(12.0), rel=0.03)

    def test_jitter_widens_separations(self, p12):
        det = DetectorModel(jitter_sigma=0.02)
        ev = simulate(p12, 200_000, seed=13, detector=det)
        extra = (ev.t_s_obs - ev.t_f_obs) - (ev.t_s - ev.t_f)
        assert np.std(extra) == pytest.approx(0.02 * math.sqrt(2.0), rel=0.02)

    def test_detector_validation(self):
        with pytest.raises(ParameterError):
            DetectorModel(efficiency=1.5)
        with pytest.raises(ParameterError):
            DetectorModel(jitter_sigma=-0.1)
        with pytest.raises(ParameterError):
            DetectorModel(formation_profile="boxcar")
        with pytest.raises(ParameterError):
            DetectorModel(formation_profile="delta", formation_width=0.1)


class TestEventAccess:
    def test_record_view(self, p12):
        ev = simulate(p12, 100, seed=21)
        first = ev[0]
        assert first.pair_id == 0
        assert first.t_f == ev.t_f[0]
        assert first.first_emitter in ("A", "B")
        assert len(ev.events) == 100
        assert ev.events[5].pair_id == 5
        assert [e.pair_id for e in ev.events[2:5]] == [2, 3, 4]
        assert ev[-1].pair_id == 99
        with pytest.raises(IndexError):
            ev[100]

    def test_simulate_validation(self, p12):
        with pytest.raises(ParameterError):
            simulate(p12, 0, seed=1)
        with pytest.raises(ParameterError):
            simulate(p12, 10, seed=1, n_threads=0)

    def test_pair_count_overrides_analytic_n0(self):
        p = RateParameters(gamma_f=1.0, gamma_s=2.0, n0=123456.0)
        ev = simulate(p, 50, seed=1)
        assert len(ev) == 50


class TestEmpiricalPopulations:
    def test_initial_state(self, p12, golden_events):
        state = empirical_populations(golden_events, [0.0])[0]
        assert state.n_e == len(golden_events)
        assert state.n_i == 0.0
        assert state.n_i_g == 0.0

    def test_matches_closed_form_at_unit_time(self, p12, golden_events):
        n = len(golden_events)
        state = empirical_populations(golden_events, [1.0])[0]
        expected = product_unstable_population(p12, 1.0) / p12.n0
        assert abs(state.n_i / n - expected) <= binomial_4sigma(expected, n)
        expected_e = entangled_population(p12, 1.0) / p12.n0
        assert abs(state.n_e / n - expected_e) <= binomial_4sigma(expected_e, n)

    def test_everything_decayed(self, golden_events):
        t_end = float(np.max(golden_events.t_s)) + 1.0
        state = empirical_populations(golden_events, [t_end])[0]
        assert state.n_e == 0.0 and state.n_i == 0.0
        assert state.n_i_g == len(golden_events)

    def test_conservation_along_grid(self, golden_events):
        n = len(golden_events)
        for s in empirical_populations(golden_events, np.linspace(0.0, 8.0, 30)):
            assert s.n_e + s.n_i + s.n_i_g == n

    def test_unsorted_grid_rejected(self, golden_events):
        with pytest.raises(ParameterError):
            empirical_populations(golden_events, [1.0, 0.5])


class TestCoincidenceHistogram:
    def test_mass_conservation(self, golden_events):
        h = coincidence_histogram(golden_events, 0.05, 5.0)
        assert int(np.sum(h.counts)) + h.overflow == h.total == len(golden_events)
        assert h.counts.size == 100
        assert h.bin_width == pytest.approx(0.05)

    def test_thinning_reduces_mass(self, p12):
        ev = simulate(p12, 100_000, seed=31, detector=DetectorModel(efficiency=0.5))
        h = coincidence_histogram(ev, 0.05, 5.0, use_observed=True)
        assert abs(h.total / len(ev) - 0.25) <= binomial_4sigma(0.25, len(ev))

    def test_true_times_ignore_detection(self, p12):
        ev = simulate(p12, 10_000, seed=31, detector=DetectorModel(efficiency=0.1))
        h = coincidence_histogram(ev, 0.05, 5.0, use_observed=False)
        assert h.total == len(ev)

    def test_zero_events_all_bins_zero(self, p12):
        h = coincidence_histogram(empty_event_set(p12), 0.05, 5.0)
        assert np.all(h.counts == 0) and h.overflow == 0 and h.total == 0

    def test_validation(self, golden_events):
        with pytest.raises(ParameterError):
            coincidence_histogram(golden_events, 0.0, 5.0)
        with pytest.raises(ParameterError):
            coincidence_histogram(golden_events, 0.05, 0.04)
