import math

import numpy as np
import pytest

from contrastlab.errors import DegenerateWeights, InfeasibleFloor, NonPositiveDensity
from contrastlab.functionals import (
    Grid,
    cap_mass,
    cap_mass_particles,
    circle_grid,
    concavity_probe,
    convexity_probe,
    coordinate_lower_bound,
    default_floor,
    effective_potential,
    floor_constraint,
    free_energy,
    gibbs_density,
    gibbs_importance_sampler,
    mm_consistency_identity,
    mm_free_energy,
    normalize_density,
    random_density,
    random_floor_density,
    sigma_spike_density,
    spike_gap_bound,
    sphere_fibonacci_grid,
    sym_kl_half,
    unimodal_consistency_identity,
    weighted_cap_mass,
)
from contrastlab.particles import default_two_well, two_well_u
from contrastlab.rng import rng_from_key

TWO_BIN = Grid("circle", np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([1.0, 1.0]))


def grid_theta(grid):
    return np.arctan2(grid.points[:, 1], grid.points[:, 0])


class TestGrids:
    def test_circle_weights_sum_to_circumference(self):
        g = circle_grid(360)
        assert g.mu_total == pytest.approx(2.0 * math.pi, abs=1e-12)

    def test_fibonacci_weights_sum_to_area(self):
        g = sphere_fibonacci_grid(4096)
        assert g.mu_total == pytest.approx(4.0 * math.pi, abs=1e-9)
        np.testing.assert_allclose(np.linalg.norm(g.points, axis=1), 1.0, atol=1e-12)

    def test_fibonacci_is_nearly_uniform(self):
        # Every octant of S^2 should carry ~1/8 of the nodes.
        g = sphere_fibonacci_grid(4096)
        signs = (g.points > 0).astype(int)
        octants = signs[:, 0] * 4 + signs[:, 1] * 2 + signs[:, 2]
        counts = np.bincount(octants, minlength=8)
        assert np.all(np.abs(counts - 512) < 60)


class TestFreeEnergy:
    def test_zero_potential_uniform_gives_negative_log_circumference(self):
        g = circle_grid(360)
        rho = np.full(g.n, 1.0 / g.mu_total)
        assert free_energy(rho, np.zeros(g.n), 1.0, g) == pytest.approx(
            -math.log(2.0 * math.pi), abs=1e-12
        )

    def test_constant_potential_is_additive(self):
        g = circle_grid(90)
        rng = rng_from_key(110)
        rho = random_density(g, rng)
        c, tau = 1.7, 0.4
        with_c = free_energy(rho, np.full(g.n, c), tau, g)
        without = free_energy(rho, np.zeros(g.n), tau, g)
        assert with_c - without == pytest.approx(c / tau, abs=1e-10)

    def test_gibbs_plugin_value_small_grid(self):
        g = circle_grid(16)
        u = np.sin(grid_theta(g))
        rho, logz = gibbs_density(u, 0.5, g)
        assert free_energy(rho, u, 0.5, g) == pytest.approx(-logz, abs=1e-9)


class TestGibbsDensity:
    def test_zero_potential_is_uniform(self):
        g = circle_grid(64)
        rho, logz = gibbs_density(np.zeros(g.n), 1.0, g)
        np.testing.assert_allclose(rho, 1.0 / g.mu_total, atol=1e-14)
        assert logz == pytest.approx(math.log(g.mu_total), abs=1e-12)

    def test_two_bin_hand_normalization(self):
        tau = 0.7
        rho, _ = gibbs_density(np.array([0.0, tau * math.log(3.0)]), tau, TWO_BIN)
        np.testing.assert_allclose(rho, [0.75, 0.25], atol=1e-12)

    def test_minimizes_over_random_densities(self):
        g = circle_grid(64)
        u = np.cos(2.0 * grid_theta(g))
        rho_star, _ = gibbs_density(u, 0.7, g)
        f_star = free_energy(rho_star, u, 0.7, g)
        rng = rng_from_key(111)
        for _ in range(100):
            other = random_density(g, rng)
            assert free_energy(other, u, 0.7, g) - f_star > 1e-10

    def test_cold_temperature_is_stable(self):
        g = circle_grid(64)
        u = 2.0 * np.cos(grid_theta(g))
        rho, logz = gibbs_density(u, 0.01, g)
        assert np.all(np.isfinite(rho)) and math.isfinite(logz)


class TestCapMass:
    def test_full_cover(self):
        g = sphere_fibonacci_grid(512)
        rho = np.full(g.n, 1.0 / g.mu_total)
        assert cap_mass(rho, g, np.array([[0.0, 0.0, 1.0]]), math.pi + 0.1) == pytest.approx(1.0)

    def test_shrinking_cap_vanishes(self):
        g = sphere_fibonacci_grid(4096)
        rho = np.full(g.n, 1.0 / g.mu_total)
        small = cap_mass(rho, g, np.array([[0.0, 0.0, 1.0]]), 0.05)
        assert small < 0.01

    def test_gibbs_concentrates_as_tau_drops(self):
        # Grid route and importance-sampling route agree and both show
        # the low-temperature increase.
        g = sphere_fibonacci_grid(4096)
        pot = default_two_well()
        centers = np.stack([pot.m1, pot.m2])
        u = two_well_u(pot, g.points)
        caps = {}
        for tau in (10.0, 0.1):
            rho, _ = gibbs_density(u, tau, g)
            caps[tau] = cap_mass(rho, g, centers, 0.5)
            sample = gibbs_importance_sampler(
                lambda p: two_well_u(pot, p), tau, 60_000, 1, rng_from_key(112)
            )
            assert weighted_cap_mass(sample, centers, 0.5) == pytest.approx(
                caps[tau], abs=0.02
            )
        assert caps[0.1] > caps[10.0]

    def test_particle_overload(self):
        pts = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
        centers = np.array([[0.0, 0.0, 1.0]])
        assert cap_mass_particles(pts, centers, 0.3) == pytest.approx(1.0 / 3.0)

    def test_gibbs_cap_monotone_over_full_sweep(self):
        g = sphere_fibonacci_grid(4096)
        pot = default_two_well()
        centers = np.stack([pot.m1, pot.m2])
        u = two_well_u(pot, g.points)
        caps = []
        for tau in (10.0, 5.0, 2.5, 1.0, 0.5, 0.2, 0.1):
            rho, _ = gibbs_density(u, tau, g)
            caps.append(cap_mass(rho, g, centers, 0.5))
        assert all(a <= b + 1e-12 for a, b in zip(caps, caps[1:]))


class TestSymKl:
    def test_identical_is_zero(self):
        g = circle_grid(32)
        rho = random_density(g, rng_from_key(113))
        assert sym_kl_half(rho, rho, g) == 0.0

    def test_two_bin_hand_sum(self):
        assert sym_kl_half(
            np.array([0.8, 0.2]), np.array([0.2, 0.8]), TWO_BIN
        ) == pytest.approx(0.6 * math.log(4.0), abs=1e-12)

    def test_symmetry_bit_exact(self):
        g = circle_grid(50)
        rng = rng_from_key(114)
        p = random_density(g, rng)
        q = random_density(g, rng)
        assert sym_kl_half(p, q, g) == sym_kl_half(q, p, g)

    def test_nonnegative(self):
        g = circle_grid(50)
        rng = rng_from_key(115)
        for _ in range(20):
            assert sym_kl_half(random_density(g, rng), random_density(g, rng), g) >= 0.0

    def test_rejects_zeros(self):
        with pytest.raises(NonPositiveDensity):
            sym_kl_half(np.array([1.0, 0.0]), np.array([0.5, 0.5]), TWO_BIN)


class TestMmFreeEnergy:
    def test_equal_densities_average_the_directional_energies(self):
        g = circle_grid(64)
        rng = rng_from_key(116)
        rho = random_density(g, rng)
        u12 = np.sin(grid_theta(g))
        u21 = np.cos(grid_theta(g))
        got = mm_free_energy(rho, rho, u12, u21, 0.5, g)
        expected = 0.5 * (
            free_energy(rho, u12, 0.5, g) + free_energy(rho, u21, 0.5, g)
        )
        assert got == pytest.approx(expected, abs=1e-12)

    def test_two_bin_hand_sum(self):
        rho1 = np.array([0.5, 0.5])
        rho2 = np.array([0.75, 0.25])
        zero = np.zeros(2)
        # Hand evaluation: F(rho1)= sum rho1 log rho1; F(rho2) likewise;
        # D_S = (KL(1||2)+KL(2||1))/2, all four terms written out.
        f1 = 0.5 * math.log(0.5) * 2
        f2 = 0.75 * math.log(0.75) + 0.25 * math.log(0.25)
        d12 = 0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25)
        d21 = 0.75 * math.log(0.75 / 0.5) + 0.25 * math.log(0.25 / 0.5)
        expected = 0.5 * (f1 + f2) - 0.5 * (d12 + d21)
        assert mm_free_energy(rho1, rho2, zero, zero, 1.0, TWO_BIN) == pytest.approx(
            expected, abs=1e-12
        )

    def test_separating_bumps_lowers_the_total(self):
        g = circle_grid(64)
        th = grid_theta(g)
        zero = np.zeros(g.n)
        values = []
        for shift in (0.0, 0.8, 1.6, 2.4):
            rho1 = normalize_density(np.exp(2.0 * np.cos(th)), g)
            rho2 = normalize_density(np.exp(2.0 * np.cos(th - shift)), g)
            values.append(mm_free_energy(rho1, rho2, zero, zero, 1.0, g))
        assert all(a > b for a, b in zip(values, values[1:]))


class TestEffectivePotential:
    def test_uniform_peer_shifts_by_constant(self):
        g = circle_grid(64)
        u12 = np.sin(grid_theta(g))
        rho2 = np.full(g.n, 1.0 / g.mu_total)
        v = effective_potential(u12, rho2, 0.5)
        assert np.argmin(v) == np.argmin(u12)
        np.testing.assert_allclose(v - u12 / 0.5, math.log(1.0 / g.mu_total), atol=1e-12)

    def test_zero_potential_tracks_peer_density(self):
        # V = log rho2 when u = 0: the coordinate minimizer is pushed toward
        # regions the peer density leaves empty (the divergence reward).
        g = circle_grid(64)
        rho2 = random_density(g, rng_from_key(117))
        v = effective_potential(np.zeros(g.n), rho2, 1.0)
        assert np.argmin(v) == np.argmin(rho2)
        np.testing.assert_allclose(v, np.log(rho2), atol=1e-12)


class TestSpikeDensity:
    def setup_method(self):
        self.g = circle_grid(128)
        self.fc = default_floor(self.g)
        self.v = np.cos(2.0 * grid_theta(self.g)) + 0.2 * np.sin(5.0 * grid_theta(self.g))

    def test_wide_sigma_gives_uniform(self):
        spread = float(np.max(self.v) - np.min(self.v))
        rho = sigma_spike_density(self.v, spread + 1.0, self.fc, self.g)
        np.testing.assert_allclose(rho, 1.0 / self.g.mu_total, atol=1e-12)

    def test_tiny_sigma_single_cell(self):
        rho = sigma_spike_density(self.v, 1e-9, self.fc, self.g)
        spiked = rho > self.fc.floor + 1e-12
        assert spiked.sum() == 1
        cell = int(np.flatnonzero(spiked)[0])
        assert cell == int(np.argmin(self.v))
        assert rho[cell] == pytest.approx(
            self.fc.floor + self.fc.excess / self.g.weights[cell], abs=1e-12
        )

    def test_floor_and_normalization_invariants(self):
        rng = rng_from_key(118)
        for sigma in (0.01, 0.1, 0.5, 1.0, 3.0):
            rho = sigma_spike_density(self.v, sigma, self.fc, self.g)
            assert np.all(rho >= self.fc.floor - 1e-15)
            assert float(np.sum(rho * self.g.weights)) == pytest.approx(1.0, abs=1e-12)
        del rng

    def test_infeasible_floor_raises(self):
        with pytest.raises(InfeasibleFloor):
            floor_constraint(1.0, self.g)


class TestCoordinateLowerBound:
    def setup_method(self):
        self.g = circle_grid(128)
        self.fc = default_floor(self.g)
        th = grid_theta(self.g)
        self.u12 = np.cos(2.0 * th) + 0.2 * np.sin(5.0 * th)
        self.u21 = np.sin(th)
        self.rho2 = random_floor_density(self.fc, self.g, rng_from_key(119))
        self.tau = 0.5
        self.v = effective_potential(self.u12, self.rho2, self.tau)
        self.fstar = coordinate_lower_bound(
            self.v, self.rho2, self.u12, self.u21, self.fc, self.tau, self.g
        )

    def test_lower_bounds_random_feasible_densities(self):
        rng = rng_from_key(120)
        for _ in range(100):
            rho1 = random_floor_density(self.fc, self.g, rng)
            val = mm_free_energy(rho1, self.rho2, self.u12, self.u21, self.tau, self.g)
            assert val >= self.fstar - 1e-12

    def test_uniform_is_strictly_above_for_nonconstant_v(self):
        uniform = np.full(self.g.n, 1.0 / self.g.mu_total)
        val = mm_free_energy(uniform, self.rho2, self.u12, self.u21, self.tau, self.g)
        assert val > self.fstar + 1e-6

    def test_spike_sequence_descends_within_gap_bound(self):
        values = []
        for sigma in (2.0, 1.0, 0.5, 0.2, 0.1, 0.05):
            rho = sigma_spike_density(self.v, sigma, self.fc, self.g)
            val = mm_free_energy(rho, self.rho2, self.u12, self.u21, self.tau, self.g)
            bound = spike_gap_bound(self.v, sigma, self.rho2, self.fc, self.g)
            assert val - self.fstar <= bound + 1e-9
            assert val - self.fstar >= -1e-12
            values.append(val)
        assert all(a >= b - 1e-9 for a, b in zip(values, values[1:]))
        assert values[-1] < values[0]

    def test_constant_v_flat_case_gap_is_pure_log_term(self):
        # u12 = -tau * log(rho2) makes the effective potential constant; the
        # linear term then contributes nothing and the remaining gap of the
        # uniform density is exactly (log(1/mu(Z)) - log(floor)) / 2.
        u12 = -self.tau * np.log(self.rho2)
        v = effective_potential(u12, self.rho2, self.tau)
        np.testing.assert_allclose(v, v[0], atol=1e-12)
        fstar = coordinate_lower_bound(
            v, self.rho2, u12, self.u21, self.fc, self.tau, self.g
        )
        uniform = np.full(self.g.n, 1.0 / self.g.mu_total)
        val = mm_free_energy(uniform, self.rho2, u12, self.u21, self.tau, self.g)
        expected_gap = 0.5 * (math.log(1.0 / self.g.mu_total) - math.log(self.fc.floor))
        assert val - fstar == pytest.approx(expected_gap, abs=1e-10)
        assert val >= fstar


class TestCurvatureProbes:
    def test_convexity_on_circle(self):
        g = circle_grid(64)
        u = np.cos(3.0 * grid_theta(g))
        rep = convexity_probe(u, 0.7, g, 200, rng_from_key(121))
        assert rep.ok and rep.trials == 200

    def test_concavity_of_coordinate_map(self):
        g = circle_grid(64)
        u12 = np.cos(2.0 * grid_theta(g))
        fc = default_floor(g)
        rho2 = random_density(g, rng_from_key(122))
        rep = concavity_probe(u12, rho2, fc, 0.7, g, 200, rng_from_key(123))
        assert rep.ok

    def test_equal_densities_give_equality(self):
        g = circle_grid(64)
        rho = random_density(g, rng_from_key(124))
        u = np.sin(grid_theta(g))
        mix = 0.3 * rho + 0.7 * rho
        assert free_energy(mix, u, 0.7, g) == pytest.approx(
            free_energy(rho, u, 0.7, g), abs=1e-12
        )

    def test_linear_binding_term_alone_is_exactly_linear(self):
        # Harness sanity: without entropy the combination is an equality.
        g = circle_grid(64)
        rng = rng_from_key(125)
        u = np.sin(grid_theta(g))
        a, b = random_density(g, rng), random_density(g, rng)
        lam = 0.37
        bind = lambda r: float(np.sum(u * r * g.weights))
        assert bind(lam * a + (1 - lam) * b) == pytest.approx(
            lam * bind(a) + (1 - lam) * bind(b), abs=1e-12
        )


class TestConsistencyIdentities:
    def test_equal_densities_vanish(self):
        g = circle_grid(64)
        q = random_density(g, rng_from_key(126))
        u = np.sin(grid_theta(g))
        lhs, rhs = unimodal_consistency_identity(q, q, u, 0.5, g)
        assert lhs == pytest.approx(0.0, abs=1e-12)
        assert rhs == 0.0

    def test_four_bin_hand_kl(self):
        g = Grid("circle", np.zeros((4, 2)), np.full(4, 0.5))
        q = np.full(4, 0.5)  # uniform: 4 cells of measure 1/2
        qs = np.array([0.6, 0.4, 0.55, 0.45])
        u = np.array([0.3, -0.2, 0.1, 0.0])
        lhs, rhs = unimodal_consistency_identity(q, qs, u, 0.7, g)
        hand = sum(0.5 * 0.5 * math.log(0.5 / qs_i) for qs_i in qs)
        assert rhs == pytest.approx(hand, abs=1e-12)
        assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_identity_on_random_densities(self):
        g = circle_grid(360)
        rng = rng_from_key(127)
        u = np.cos(grid_theta(g))
        for _ in range(10):
            q = random_density(g, rng)
            qs = random_density(g, rng)
            lhs, rhs = unimodal_consistency_identity(q, qs, u, 0.3, g)
            assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_mm_identity_on_random_densities(self):
        g = circle_grid(360)
        rng = rng_from_key(128)
        th = grid_theta(g)
        u12, u21 = np.sin(th), np.cos(2.0 * th)
        for _ in range(10):
            q1, q2 = random_density(g, rng), random_density(g, rng)
            q1s, q2s = random_density(g, rng), random_density(g, rng)
            lhs, rhs = mm_consistency_identity(q1, q2, q1s, q2s, u12, u21, 0.3, g)
            assert lhs == pytest.approx(rhs, abs=1e-9)


class TestImportanceSampler:
    def test_flat_potential_gives_uniform_weights(self):
        sample = gibbs_importance_sampler(
            lambda p: np.zeros(len(p)), 1.0, 5000, 100, rng_from_key(129)
        )
        np.testing.assert_allclose(sample.weights, 1.0 / 5000, atol=1e-15)
        values = sample.pool[:, 2]
        assert sample.expect(values) == pytest.approx(float(np.mean(values)), abs=1e-12)

    def test_whole_pool_draw(self):
        sample = gibbs_importance_sampler(
            lambda p: p[:, 2], 0.5, 64, 64, rng_from_key(130)
        )
        np.testing.assert_array_equal(sample.draws, sample.pool)

    def test_draws_are_unique_and_from_pool(self):
        sample = gibbs_importance_sampler(
            lambda p: p[:, 2], 0.5, 500, 100, rng_from_key(131)
        )
        assert len(np.unique(sample.draws, axis=0)) == 100

    def test_degenerate_weights_raise(self):
        with pytest.raises(DegenerateWeights):
            gibbs_importance_sampler(
                lambda p: np.full(len(p), np.inf), 1.0, 200, 10, rng_from_key(132)
            )

    def test_draw_count_cannot_exceed_pool(self):
        with pytest.raises(ValueError):
            gibbs_importance_sampler(lambda p: p[:, 2], 1.0, 10, 11, rng_from_key(133))
