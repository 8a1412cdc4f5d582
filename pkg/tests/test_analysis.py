"""Tests for fixed-point analysis, period detection, sweeps and Lyapunov estimates."""

import math
import random

import pytest

from greenberg_dynamics.analysis import (
    CENTER,
    DEGENERATE,
    SINK,
    SOURCE,
    bifurcation_scan,
    classify_fixed_point,
    detect_period,
    exponential_stability_check,
    fixed_point,
    lyapunov_curve,
    lyapunov_exponent,
    period_doubling_threshold,
)
from greenberg_dynamics.dynamics import map_derivative
from greenberg_dynamics.errors import ArgumentError, DomainError, EscapeError
from greenberg_dynamics.model import TrafficParams, flow_of_density

INV_E = math.exp(-1.0)


def brute_force_limit(v0: float, k0: float = 0.3, steps: int = 3000) -> float:
    """Independent oracle: follow the raw recurrence to its limit."""
    p = TrafficParams(v0=v0)
    k = k0
    for _ in range(steps):
        k = flow_of_density(k, p)
    return k


class TestFixedPoint:
    def test_free_flow_value(self):
        assert fixed_point(TrafficParams(v0=0.25)) == pytest.approx(
            0.01831563888873418, abs=1e-15
        )

    def test_congested_value(self):
        assert fixed_point(TrafficParams(v0=1.25)) == pytest.approx(
            0.44932896411722156, abs=1e-15
        )

    def test_unit_parameter(self):
        assert fixed_point(TrafficParams(v0=1.0)) == INV_E

    def test_rejects_zero_v0(self):
        with pytest.raises(DomainError):
            fixed_point(TrafficParams(v0=0.0))

    def test_residual_below_1e14_across_parameter_range(self):
        rng = random.Random(20260808)
        p_values = [rng.uniform(0.05, math.e) for _ in range(1000)]
        for v0 in p_values:
            p = TrafficParams(v0=v0)
            k_star = fixed_point(p)
            assert abs(flow_of_density(k_star, p) - k_star) < 1e-14

    def test_scales_with_jam_density(self):
        p = TrafficParams(v0=1.0, kj=2.0)
        k_star = fixed_point(p)
        assert k_star == pytest.approx(2.0 * INV_E, abs=1e-15)
        assert abs(flow_of_density(k_star, p) - k_star) < 1e-14

    def test_multiplier_identity(self):
        for v0 in (0.1, 0.5, 1.0, 1.9, 2.0, 2.4, math.e):
            p = TrafficParams(v0=v0)
            assert map_derivative(fixed_point(p), p) == pytest.approx(
                1.0 - v0, abs=1e-12
            )

    def test_sink_limit_matches_closed_form(self):
        for v0 in (0.15, 0.4, 0.9, 1.3, 1.6, 1.85):
            assert abs(brute_force_limit(v0) - math.exp(-1.0 / v0)) < 1e-9

    def test_velocity_is_one_at_any_attracting_fixed_point(self):
        from greenberg_dynamics.model import velocity_of_density

        for v0 in (0.2, 0.7, 1.2, 1.9):
            p = TrafficParams(v0=v0)
            assert abs(velocity_of_density(fixed_point(p), p) - 1.0) < 1e-9


class TestClassifyFixedPoint:
    def test_congested_sink(self):
        report = classify_fixed_point(TrafficParams(v0=1.25))
        assert report.multiplier == -0.25
        assert report.classification == SINK
        assert report.exponentially_stable is False

    def test_source_beyond_the_threshold(self):
        report = classify_fixed_point(TrafficParams(v0=2.25))
        assert report.multiplier == -1.25
        assert report.classification == SOURCE

    def test_center_at_the_threshold(self):
        report = classify_fixed_point(TrafficParams(v0=2.0))
        assert report.multiplier == -1.0
        assert report.classification == CENTER

    def test_degenerate_at_zero(self):
        report = classify_fixed_point(TrafficParams(v0=0.0))
        assert report.classification == DEGENERATE
        assert report.k_star == 0.0
        assert report.exponentially_stable is True

    def test_slow_road_is_exponentially_stable_sink(self):
        report = classify_fixed_point(TrafficParams(v0=0.5))
        assert report.classification == SINK
        assert report.exponentially_stable is True


class TestPeriodDoublingThreshold:
    def test_value(self):
        assert period_doubling_threshold() == 2.0

    def test_consistent_with_the_multiplier(self):
        v0 = period_doubling_threshold()
        assert classify_fixed_point(TrafficParams(v0=v0)).multiplier == -1.0

    def test_period_transitions_around_the_threshold(self):
        below = bifurcation_scan(1.95, 1.95, 1, n_total=2000, n_keep=200)
        above = bifurcation_scan(2.05, 2.05, 1, n_total=2000, n_keep=200)
        assert below.detected_periods == (1,)
        assert above.detected_periods == (2,)


class TestDetectPeriod:
    def test_constant_samples(self):
        assert detect_period([0.4] * 40, 1e-6, 8) == 1

    def test_alternating_samples(self):
        samples = [0.3, 0.8] * 20
        assert detect_period(samples, 1e-6, 8) == 2

    def test_prefers_the_smallest_period(self):
        # a 2-periodic signal also repeats with period 4
        samples = [0.3, 0.8] * 20
        assert detect_period(samples, 1e-6, 16) == 2

    def test_aperiodic_samples(self):
        scan = bifurcation_scan(2.585, 2.585, 1, k0=0.1, n_total=2000, n_keep=200)
        assert scan.detected_periods == (None,)

    def test_rejects_short_samples(self):
        with pytest.raises(ArgumentError):
            detect_period([0.1, 0.2, 0.3], 1e-6, 8)

    def test_rejects_bad_tolerance_and_period(self):
        with pytest.raises(ArgumentError):
            detect_period([0.1] * 20, 0.0, 4)
        with pytest.raises(ArgumentError):
            detect_period([0.1] * 20, 1e-6, 0)


class TestBifurcationScan:
    def test_single_point_stable_branch(self):
        scan = bifurcation_scan(1.25, 1.25, 1)
        assert scan.detected_periods == (1,)
        assert all(
            abs(s.k - 0.44932896411722156) < 1e-6 for s in scan.samples[0]
        )

    def test_two_cycle_branches(self):
        scan = bifurcation_scan(2.25, 2.25, 1, k0=0.35, n_total=2000, n_keep=200)
        assert scan.detected_periods == (2,)
        low, high = sorted(s.k for s in scan.samples[0][-2:])
        assert low == pytest.approx(0.3533197607617423, abs=1e-9)
        assert high == pytest.approx(0.82707175492835, abs=1e-9)

    def test_four_cycle_window(self):
        scan = bifurcation_scan(2.400, 2.440, 5, n_total=20000, n_keep=200)
        assert scan.detected_periods == (4, 4, 4, 4, 4)

    def test_cycle_closure(self):
        scan = bifurcation_scan(2.405, 2.405, 1, k0=0.275, n_total=2000, n_keep=200)
        (period,) = scan.detected_periods
        assert period == 4
        p = TrafficParams(v0=2.405)
        for s in scan.samples[0][-period:]:
            k = s.k
            for _ in range(period):
                k = flow_of_density(k, p)
            assert abs(k - s.k) < 10 * scan.settings.tolerance

    def test_grid_is_ascending_with_samples_per_point(self):
        scan = bifurcation_scan(0.5, 1.5, 6, n_total=120, n_keep=20)
        assert list(scan.v0_grid) == sorted(scan.v0_grid)
        assert len(scan.v0_grid) == 6
        assert all(len(states) == 20 for states in scan.samples)
        assert scan.escaped == (False,) * 6

    def test_per_point_initial_density_override(self):
        scan = bifurcation_scan(
            1.0, 2.0, 3, k0=lambda v0: 0.2 + 0.1 * v0, n_total=200, n_keep=20
        )
        assert scan.k0_values == pytest.approx((0.3, 0.35, 0.4))
        assert scan.settings.k0 is None

    def test_escape_recorded_not_raised(self):
        # v0 = e sends the optimum density exactly to kj and then to 0
        scan = bifurcation_scan(math.e, math.e, 1, k0=INV_E, n_total=10, n_keep=4)
        assert scan.escaped == (True,)
        assert scan.detected_periods == (None,)
        assert scan.samples[0] == ()

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(v0_min=0.0, v0_max=1.0, steps=3),
            dict(v0_min=1.0, v0_max=0.5, steps=3),
            dict(v0_min=0.5, v0_max=2.75, steps=3),
            dict(v0_min=0.5, v0_max=1.0, steps=0),
            dict(v0_min=0.5, v0_max=1.0, steps=1),
            dict(v0_min=0.5, v0_max=0.5, steps=4),
        ],
    )
    def test_rejects_bad_grids(self, kwargs):
        with pytest.raises(ArgumentError):
            bifurcation_scan(**kwargs)

    def test_rejects_bad_keep(self):
        with pytest.raises(ArgumentError):
            bifurcation_scan(1.0, 1.5, 3, n_total=100, n_keep=100)


class TestLyapunovExponent:
    def test_sink_collapses_to_the_log_multiplier(self):
        lam = lyapunov_exponent(TrafficParams(v0=1.25), 0.1, n=2000, n_transient=500)
        assert abs(lam - math.log(0.25)) < 1e-2

    def test_superstable_parameter_diverges(self):
        # at v0 = 1 the fixed point sits exactly on the map maximum
        lam = lyapunov_exponent(TrafficParams(v0=1.0), 0.25, n=1000, n_transient=500)
        assert math.isinf(lam) and lam < 0

    def test_escape_raises(self):
        with pytest.raises(EscapeError):
            lyapunov_exponent(TrafficParams(v0=3.5), 0.3, n=1000, n_transient=100)

    def test_rejects_small_term_counts(self):
        with pytest.raises(ArgumentError):
            lyapunov_exponent(TrafficParams(v0=1.25), 0.1, n=999)

    def test_rejects_bad_initial_density(self):
        with pytest.raises(DomainError):
            lyapunov_exponent(TrafficParams(v0=1.25), 0.0, n=1000)

    def test_near_threshold_estimates_stay_close_to_zero(self):
        for v0 in (1.995, 2.0, 2.005):
            lam = lyapunov_exponent(TrafficParams(v0=v0), 0.25)
            assert -0.02 <= lam < 0.02

    def test_negative_on_attracting_cycles(self):
        # detected periodic attractors must come with a negative exponent
        for v0, k0 in ((2.25, 0.35), (2.405, 0.275)):
            scan = bifurcation_scan(v0, v0, 1, k0=k0, n_total=2000, n_keep=200)
            assert scan.detected_periods[0] is not None
            assert lyapunov_exponent(TrafficParams(v0=v0), k0) < 0.0


class TestLyapunovCurve:
    def test_signs_and_missing_points(self):
        curve = lyapunov_curve(0.5, 1.5, 5, n=1000, n_transient=300)
        assert curve.v0_grid == pytest.approx((0.5, 0.75, 1.0, 1.25, 1.5))
        # the superstable grid point carries no finite estimate
        assert curve.lambdas[2] is None
        assert curve.skipped_terms[2] == 1000
        for i in (0, 1, 3, 4):
            assert curve.lambdas[i] is not None and curve.lambdas[i] < 0.0

    def test_term_accounting(self):
        curve = lyapunov_curve(0.5, 1.5, 5, n=1000, n_transient=300)
        for used, skipped in zip(curve.n_terms, curve.skipped_terms):
            assert used == 1000 - skipped

    def test_deterministic_and_thread_invariant(self, monkeypatch):
        baseline = lyapunov_curve(0.6, 1.4, 4, n=1000, n_transient=200)
        monkeypatch.setenv("GREENBERG_DYN_THREADS", "3")
        threaded = lyapunov_curve(0.6, 1.4, 4, n=1000, n_transient=200)
        assert baseline.lambdas == threaded.lambdas
        assert baseline.v0_grid == threaded.v0_grid

    def test_rejects_bad_thread_cap(self, monkeypatch):
        monkeypatch.setenv("GREENBERG_DYN_THREADS", "many")
        with pytest.raises(ArgumentError):
            lyapunov_curve(0.6, 1.4, 3, n=1000, n_transient=200)

    def test_rejects_grid_beyond_the_invariance_bound(self):
        with pytest.raises(ArgumentError):
            lyapunov_curve(2.0, 3.0, 5, n=1000)


class TestExponentialStabilityCheck:
    def test_certificate_below_one(self):
        cert = exponential_stability_check(TrafficParams(v0=0.5))
        assert cert.stable is True
        assert cert.m == 1.0
        assert cert.beta == 0.5

    def test_no_certificate_from_one_upward(self):
        for v0 in (1.0, 1.25, 2.5):
            cert = exponential_stability_check(TrafficParams(v0=v0))
            assert cert.stable is False
            assert cert.m is None and cert.beta is None

    def test_slow_road_drains_monotonically(self):
        from greenberg_dynamics.dynamics import iterate

        orbit = iterate(0.25, TrafficParams(v0=0.25), 100)
        ks = orbit.densities
        assert all(b <= a for a, b in zip(ks, ks[1:]))
        assert abs(ks[-1] - math.exp(-4.0)) < 1e-9
