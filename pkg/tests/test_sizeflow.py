import math

import numpy as np
import pytest

from scrambler.core import CouplingMenu, SimplifiedModel, mu_from_filling
from scrambler.errors import DomainError, MenuError
from scrambler.sizeflow import (Phase, closed_form_P, closed_form_P_model,
                                closed_form_Z, closed_form_Z_model,
                                closed_form_distribution,
                                critical_coupling_bisect, generating_series,
                                integrate_generating_function,
                                lyapunov_exponent, mean_size,
                                mean_size_from_ode,
                                size_distribution_from_series,
                                transition_boundary, transition_boundary_bisect)

HALF = mu_from_filling(0.5)


def random_valid_menu(rng):
    intra = {int(2 * rng.integers(1, 4)): float(rng.uniform(0.1, 1.5))}
    cross = {(1, 0, 0, 1): float(rng.uniform(0.0, 0.5)),
             (2, 1, 0, 1): float(rng.uniform(0.1, 1.5))}
    return CouplingMenu(intra=intra, cross=cross)


class TestLyapunovExponent:
    def test_pure_interaction_half_filling(self):
        model = SimplifiedModel(u1=0.0, u3=1.0, filling=HALF)
        growth = lyapunov_exponent(model.menu(), HALF)
        assert growth.kappa == pytest.approx(0.25, rel=1e-14)
        assert growth.classification is Phase.SCRAMBLING

    def test_critical_ratio(self):
        for n in (0.2, 0.5, 0.8):
            filling = mu_from_filling(n)
            model = SimplifiedModel.from_ratio(1.0, 1.0, filling)
            growth = lyapunov_exponent(model.menu(), filling)
            assert abs(growth.kappa) <= 1e-12
            assert growth.classification is Phase.CRITICAL

    def test_q2_contributes_nothing(self):
        growth = lyapunov_exponent(CouplingMenu(intra={2: 7.3}), HALF)
        assert growth.kappa == 0.0
        assert growth.breakdown[2] == 0.0
        assert growth.classification is Phase.CRITICAL

    def test_mixed_model_at_thirty_percent(self):
        filling = mu_from_filling(0.3)
        model = SimplifiedModel(u1=0.1, u3=1.0, filling=filling)
        growth = lyapunov_exponent(model.menu(), filling)
        assert growth.kappa == pytest.approx(0.11, rel=1e-12)
        assert growth.classification is Phase.SCRAMBLING

    def test_dissipative_classification(self):
        model = SimplifiedModel.from_ratio(1.5, 1.0, HALF)
        growth = lyapunov_exponent(model.menu(), HALF)
        assert growth.kappa == pytest.approx(-0.125, rel=1e-12)
        assert growth.classification is Phase.DISSIPATIVE

    def test_breakdown_sign_structure(self):
        menu = CouplingMenu(intra={2: 1.0, 4: 1.0},
                            cross={(1, 0, 0, 1): 0.5, (1, 1, 1, 1): 0.3,
                                   (2, 1, 0, 1): 1.0})
        growth = lyapunov_exponent(menu, HALF)
        assert growth.breakdown[2] == 0.0
        assert growth.breakdown[(1, 1, 1, 1)] == 0.0   # p1+p2 = 2
        assert growth.breakdown[(1, 0, 0, 1)] < 0.0    # hopping dissipates
        assert growth.breakdown[4] > 0.0
        assert growth.breakdown[(2, 1, 0, 1)] > 0.0
        assert sum(growth.breakdown.values()) == pytest.approx(growth.kappa)

    def test_particle_hole_symmetry(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            menu = random_valid_menu(rng)
            f = mu_from_filling(float(rng.uniform(0.05, 0.95)))
            k1 = lyapunov_exponent(menu, f).kappa
            k2 = lyapunov_exponent(menu, f.mirrored()).kappa
            assert k1 == pytest.approx(k2, rel=1e-12, abs=1e-15)


class TestTransitionBoundary:
    def test_maximum_at_half_filling(self):
        rows = transition_boundary(1.0, [0.5])
        assert rows[0, 1] == pytest.approx(0.25, rel=1e-14)

    def test_pauli_blockade_limit(self):
        rows = transition_boundary(1.0, [1e-6, 1e-4])
        assert rows[0, 1] < rows[1, 1] < 1e-4

    def test_scaled_interaction(self):
        rows = transition_boundary(2.0, [0.1])
        assert rows[0, 1] == pytest.approx(0.18, rel=1e-12)

    def test_bisection_recovers_algebraic_curve(self):
        grid = np.linspace(0.05, 0.95, 19)
        algebraic = transition_boundary(1.0, grid)
        numeric = transition_boundary_bisect(1.0, grid)
        assert np.allclose(numeric[:, 1], algebraic[:, 1], rtol=1e-9, atol=1e-12)

    def test_bisection_requires_sign_change(self):
        menu = CouplingMenu(intra={2: 1.0})  # kappa identically zero... then
        # add a term so kappa > 0 for every hopping strength in the bracket
        menu = CouplingMenu(intra={4: 1.0})
        with pytest.raises(DomainError):
            critical_coupling_bisect(menu, HALF, (1, 0, 0, 1), upper=0.1)

    def test_invalid_inputs(self):
        with pytest.raises(DomainError):
            transition_boundary(0.0, [0.5])
        with pytest.raises(DomainError):
            transition_boundary(1.0, [0.0])


class TestClosedFormZ:
    def test_initial_condition(self):
        for r, kappa in [(0.5, 0.125), (1.5, -0.125), (0.0, 0.25)]:
            for x in (0.0, 0.3, 1.0):
                assert closed_form_Z(r, kappa, x, 0.0) == pytest.approx(x, abs=1e-14)

    def test_reference_point_one_third(self):
        # r = 1/2, e^{kappa t} = 2, x = 0
        kappa = 0.125
        t = math.log(2.0) / kappa
        assert closed_form_Z(0.5, kappa, 0.0, t) == pytest.approx(1.0 / 3.0, rel=1e-12)
        # consistency with the distribution: P(0) at the same point
        assert closed_form_P(0.5, kappa, 0, t) == pytest.approx(1.0 / 3.0, rel=1e-12)

    def test_normalization_point(self):
        assert closed_form_Z(0.5, 0.125, 1.0, 7.7) == pytest.approx(1.0, abs=1e-14)

    def test_critical_limit_formula(self):
        # r = 1: Z = 1 - (1-x)/(1 + g t (1-x))
        g = 0.25
        for x, t in [(0.0, 4.0), (0.5, 10.0), (0.9, 100.0)]:
            expected = 1.0 - (1.0 - x) / (1.0 + g * t * (1.0 - x))
            assert closed_form_Z(1.0, 0.0, x, t, rate_scale=g) == pytest.approx(
                expected, rel=1e-14)

    def test_critical_needs_rate_scale(self):
        with pytest.raises(DomainError):
            closed_form_Z(1.0, 0.0, 0.5, 1.0)

    def test_inconsistent_pair_rejected(self):
        with pytest.raises(DomainError):
            closed_form_Z(0.5, -0.125, 0.5, 1.0)   # r < 1 needs kappa > 0
        with pytest.raises(DomainError):
            closed_form_Z(1.5, 0.125, 0.5, 1.0)

    def test_model_wrapper_handles_all_phases(self):
        for r in (0.5, 1.0, 1.5):
            model = SimplifiedModel.from_ratio(r, 1.0, HALF)
            val = closed_form_Z_model(model, 0.3, 2.0)
            assert 0.0 <= val <= 1.0


class TestClosedFormP:
    def test_delta_at_one_at_time_zero(self):
        for r, kappa in [(0.5, 0.125), (1.5, -0.125)]:
            assert closed_form_P(r, kappa, 0, 0.0) == pytest.approx(0.0, abs=1e-14)
            assert closed_form_P(r, kappa, 1, 0.0) == pytest.approx(1.0, rel=1e-14)
            assert closed_form_P(r, kappa, 2, 0.0) == 0.0

    def test_scrambling_saturation_to_r(self):
        kappa = 0.125
        t = 200.0 / kappa
        assert closed_form_P(0.5, kappa, 0, t) == pytest.approx(0.5, abs=1e-9)

    def test_dissipative_collapse_to_identity(self):
        kappa = -0.125
        t = 400.0
        assert closed_form_P(1.5, kappa, 0, t) == pytest.approx(1.0, abs=1e-9)
        assert closed_form_P(1.5, kappa, 3, t) < 1e-12

    def test_reference_value_two_ninths(self):
        kappa = 0.125
        t = math.log(2.0) / kappa
        assert closed_form_P(0.5, kappa, 1, t) == pytest.approx(2.0 / 9.0, rel=1e-12)

    @pytest.mark.parametrize("r,scale", [(0.5, 1.0), (1.5, 1.0), (0.25, 0.21)])
    def test_normalization_partial_sums(self, r, scale):
        # The geometric ratio is (E-1)/(E-r) with E = e^{kappa t}, so the
        # mass beyond a cap S is ~ exp(-S (1-r)/E): a cap of 1e5 makes the
        # truncated tail < 1e-18 everywhere on e^{kappa t} <= 1e3, and the
        # partial sums must then reach 1 within 1e-10.
        kappa = scale * (1.0 - r)
        for target in (2.0, 100.0, 1000.0):
            if r < 1.0:
                t = math.log(target) / kappa
                cap = 100_000
            else:
                t = 10.0 / abs(kappa)
                cap = 10_000
            total = math.fsum(closed_form_P(r, kappa, s, t)
                              for s in range(cap + 1))
            assert total == pytest.approx(1.0, abs=1e-10)

    def test_critical_distribution(self):
        g = 0.25
        t = 8.0
        a = g * t
        assert closed_form_P(1.0, 0.0, 0, t, rate_scale=g) == pytest.approx(
            a / (1.0 + a), rel=1e-14)
        # mean size stays exactly 1 at criticality
        mean = sum(s * closed_form_P(1.0, 0.0, s, t, rate_scale=g)
                   for s in range(4000))
        assert mean == pytest.approx(1.0, abs=1e-10)

    def test_distribution_container(self):
        dist = closed_form_distribution(0.5, 0.125, t=5.0, s_max=200)
        assert dist.probs[0] == pytest.approx(
            closed_form_P(0.5, 0.125, 0, 5.0), rel=1e-14)
        assert dist.tail_mass >= -1e-12
        assert dist.probs.sum() + dist.tail_mass == pytest.approx(1.0, abs=1e-12)


class TestGeneratingFunctionOde:
    def test_unit_initial_condition_is_fixed_point(self):
        menu = CouplingMenu(intra={4: 1.0}, cross={(1, 0, 0, 1): 0.3})
        z = integrate_generating_function(menu, HALF, [1.0],
                                          np.linspace(0.0, 20.0, 11), 1e-9)
        assert np.all(z == 1.0)

    def test_empty_menu_is_static(self):
        z = integrate_generating_function(CouplingMenu(), HALF, [0.3, 0.8],
                                          np.linspace(0.0, 5.0, 6), 1e-9)
        assert np.allclose(z[0], 0.3, atol=1e-14)
        assert np.allclose(z[1], 0.8, atol=1e-14)

    @pytest.mark.parametrize("n", [0.1, 0.3, 0.5])
    @pytest.mark.parametrize("r", [0.5, 1.0, 1.5])
    def test_matches_closed_form(self, n, r):
        filling = mu_from_filling(n)
        model = SimplifiedModel.from_ratio(r, 1.0, filling)
        t_max = 10.0 / max(abs(model.kappa), model.growth_scale)
        t_grid = np.linspace(0.0, t_max, 41)
        x_points = [0.0, 0.25, 0.5, 0.75, 0.99]
        z = integrate_generating_function(model.menu(), filling, x_points,
                                          t_grid, 1e-9)
        reference = np.array([[closed_form_Z_model(model, x, t) for t in t_grid]
                              for x in x_points])
        assert np.abs(z - reference).max() < 1e-6

    def test_monotone_ordering_in_x(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            menu = random_valid_menu(rng)
            f = mu_from_filling(float(rng.uniform(0.2, 0.8)))
            x = np.sort(rng.uniform(0.0, 1.0, size=4))
            z = integrate_generating_function(menu, f, x, np.linspace(0, 8, 9),
                                              1e-10)
            assert np.all(np.diff(z, axis=0) > -1e-9)

    def test_range_stays_in_unit_interval(self):
        rng = np.random.default_rng(12)
        for _ in range(5):
            menu = random_valid_menu(rng)
            f = mu_from_filling(float(rng.uniform(0.2, 0.8)))
            z = integrate_generating_function(menu, f, [0.0, 0.5, 1.0],
                                              np.linspace(0, 30, 16), 1e-9)
            assert z.min() >= 0.0 and z.max() <= 1.0

    def test_domain_checks(self):
        menu = CouplingMenu(intra={4: 1.0})
        with pytest.raises(DomainError):
            integrate_generating_function(menu, HALF, [1.2], [0.0, 1.0], 1e-9)
        with pytest.raises(DomainError):
            integrate_generating_function(menu, HALF, [0.5], [0.0, 1.0], 1e-2)
        with pytest.raises(DomainError):
            integrate_generating_function(menu, HALF, [0.5], [1.0, 0.5], 1e-9)
        with pytest.raises(MenuError):
            integrate_generating_function(CouplingMenu(intra={3: 1.0}), HALF,
                                          [0.5], [0.0, 1.0], 1e-9)


class TestMeanSize:
    def test_time_zero(self):
        model = SimplifiedModel(u1=0.1, u3=1.0, filling=HALF)
        assert mean_size(model.menu(), HALF, 0.0) == 1.0

    def test_critical_stays_one(self):
        model = SimplifiedModel.from_ratio(1.0, 1.0, HALF)
        for t in (0.0, 5.0, 50.0):
            assert mean_size(model.menu(), HALF, t) == pytest.approx(1.0, abs=1e-12)

    def test_exponential_growth_value(self):
        filling = mu_from_filling(0.3)
        model = SimplifiedModel(u1=0.1, u3=1.0, filling=filling)
        assert mean_size(model.menu(), filling, 10.0) == pytest.approx(
            math.exp(1.1), rel=1e-12)

    def test_ode_consistency(self):
        # -dZ/dnu at nu = 0 from the integrated ODE tracks e^{kappa t}
        filling = mu_from_filling(0.3)
        model = SimplifiedModel(u1=0.1, u3=1.0, filling=filling)
        t_grid = np.linspace(0.0, 12.0, 7)
        numeric = mean_size_from_ode(model.menu(), filling, t_grid)
        target = np.exp(model.kappa * t_grid)
        assert np.abs(numeric / target - 1.0).max() < 1e-4


class TestSeriesExtraction:
    def test_initial_delta(self):
        model = SimplifiedModel(u1=0.2, u3=1.0, filling=HALF)
        dists = size_distribution_from_series(model.menu(), HALF, [0.0], s_max=16)
        assert dists[0].probs[1] == pytest.approx(1.0, abs=1e-14)
        assert dists[0].probs.sum() == pytest.approx(1.0, abs=1e-14)
        assert dists[0].tail_mass == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("r", [0.5, 1.5])
    def test_matches_closed_form(self, r):
        model = SimplifiedModel.from_ratio(r, 1.0, HALF)
        if r < 1.0:
            t_grid = [math.log(4.0) / model.kappa, math.log(16.0) / model.kappa]
        else:
            t_grid = [4.0 / abs(model.kappa), 10.0 / abs(model.kappa)]
        dists = size_distribution_from_series(model.menu(), HALF, t_grid,
                                              s_max=640, tail_budget=1e-8)
        for dist in dists:
            assert dist.tail_mass <= 1e-8
            assert not dist.truncation_warning
            for s in range(33):
                assert dist.probs[s] == pytest.approx(
                    closed_form_P_model(model, s, dist.t), abs=1e-8)

    def test_pure_hopping_analytic(self):
        u1 = 0.7
        menu = CouplingMenu(cross={(1, 0, 0, 1): u1})
        t_grid = [0.0, 0.5, 1.0, 2.5]
        dists = size_distribution_from_series(menu, HALF, t_grid, s_max=8)
        for dist in dists:
            assert dist.probs[1] == pytest.approx(math.exp(-u1 * dist.t), rel=1e-9)
            assert dist.probs[0] == pytest.approx(-math.expm1(-u1 * dist.t),
                                                  abs=1e-9)
            assert float(dist.probs[2:].sum()) == pytest.approx(0.0, abs=1e-12)

    def test_series_scalar_consistency(self):
        rng = np.random.default_rng(13)
        menu = random_valid_menu(rng)
        f = mu_from_filling(0.4)
        t_grid = np.linspace(0.0, 4.0, 5)
        series = generating_series(menu, f, t_grid, s_max=96)
        for x in (0.2, 0.6, 0.9):
            scalar = integrate_generating_function(menu, f, [x], t_grid, 1e-10)[0]
            for zs, zref in zip(series, scalar):
                tol = max(1e-8, abs(zs.tail_mass))
                assert abs(zs.evaluate(x) - zref) <= tol

    def test_particle_hole_symmetric_distribution(self):
        f = mu_from_filling(0.3)
        model = SimplifiedModel(u1=0.05, u3=1.0, filling=f)
        mirror = SimplifiedModel(u1=0.05, u3=1.0, filling=f.mirrored())
        a = size_distribution_from_series(model.menu(), f, [3.0], s_max=64)[0]
        b = size_distribution_from_series(mirror.menu(), f.mirrored(), [3.0],
                                          s_max=64)[0]
        assert np.allclose(a.probs, b.probs, atol=1e-12)

    def test_truncation_warning_carried(self):
        model = SimplifiedModel.from_ratio(0.25, 1.0, HALF)
        t = math.log(50.0) / model.kappa
        dists = size_distribution_from_series(model.menu(), HALF, [t], s_max=8,
                                              tail_budget=1e-6)
        assert dists[0].truncation_warning
        assert dists[0].tail_mass > 1e-6
