import math

import numpy as np
import pytest

from contrastlab.functionals import cap_mass_particles
from contrastlab.manifold import geodesic_distance_sphere, normalize
from contrastlab.particles import (
    ParticleCloud,
    ParticleConfig,
    TwoWellPotential,
    default_two_well,
    kde_all,
    kde_hat,
    make_cloud,
    particle_objective,
    particle_objective_grad,
    train_particles,
    two_well_grad,
    two_well_u,
)
from contrastlab.rng import rng_from_key


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q *= np.sign(np.diagonal(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def fd_particle_grad(ambient, potential, tau, h, step=1e-6):
    flat = ambient.ravel()
    out = np.zeros_like(flat)
    for i in range(flat.size):
        plus, minus = flat.copy(), flat.copy()
        plus[i] += step
        minus[i] -= step
        out[i] = (
            particle_objective(make_cloud(plus.reshape(ambient.shape)), potential, tau, h)
            - particle_objective(make_cloud(minus.reshape(ambient.shape)), potential, tau, h)
        ) / (2.0 * step)
    return out.reshape(ambient.shape)


class TestTwoWell:
    def test_single_mode_collapse(self):
        p = TwoWellPotential(
            gamma=12.0, kappa=12.0, w=1.0,
            m1=np.array([0.0, 0.0, 1.0]), m2=np.array([1.0, 0.0, 0.0]),
        )
        rng = rng_from_key(140)
        from contrastlab.manifold import sample_uniform_sphere

        z = sample_uniform_sphere(rng, 3, 50)
        np.testing.assert_allclose(
            two_well_u(p, z), -(z @ p.m1), atol=1e-12
        )
        assert two_well_u(p, p.m1) == pytest.approx(-1.0, abs=1e-12)

    def test_well_beats_midpoint(self):
        p = default_two_well()
        mid = normalize(p.m1 + p.m2)
        assert two_well_u(p, p.m1) < two_well_u(p, mid)

    def test_rotation_invariance(self):
        p = default_two_well()
        rng = rng_from_key(141)
        R = random_rotation(rng)
        from contrastlab.manifold import sample_uniform_sphere

        z = sample_uniform_sphere(rng, 3, 40)
        rotated = TwoWellPotential(
            gamma=p.gamma, kappa=p.kappa, w=p.w, m1=R @ p.m1, m2=R @ p.m2
        )
        np.testing.assert_allclose(
            two_well_u(rotated, z @ R.T), two_well_u(p, z), atol=1e-12
        )

    def test_gradient_matches_fd(self):
        p = default_two_well()
        rng = rng_from_key(142)
        from contrastlab.manifold import sample_uniform_sphere

        Z = sample_uniform_sphere(rng, 3, 5)
        g = two_well_grad(p, Z)
        h = 1e-6
        for i in range(5):
            for k in range(3):
                zp, zm = Z[i].copy(), Z[i].copy()
                zp[k] += h
                zm[k] -= h
                fd = (two_well_u(p, zp[None, :])[0] - two_well_u(p, zm[None, :])[0]) / (2 * h)
                assert g[i, k] == pytest.approx(fd, abs=1e-6)


class TestKde:
    def test_coincident_cloud_density_one(self):
        cloud = make_cloud(np.stack([[0.0, 0.0, 1.0]] * 5))
        np.testing.assert_allclose(kde_all(cloud, 0.35), 1.0, atol=1e-5)

    def test_two_antipodal_particles(self):
        cloud = make_cloud(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]))
        expected = 0.5 * (1.0 + math.exp(-math.pi**2 / (2.0 * 0.35**2)))
        assert kde_hat(cloud, 0, 0.35) == pytest.approx(expected, abs=1e-4)

    def test_duplication_leaves_density_unchanged(self):
        rng = rng_from_key(143)
        pts = normalize(rng.standard_normal((6, 3)))
        a = kde_all(make_cloud(pts), 0.35)
        b = kde_all(make_cloud(np.vstack([pts, pts])), 0.35)
        np.testing.assert_allclose(b[:6], a, atol=1e-6)

    def test_bounds(self):
        rng = rng_from_key(144)
        for _ in range(10):
            cloud = make_cloud(normalize(rng.standard_normal((8, 3))))
            rho = kde_all(cloud, 0.35)
            assert np.all(rho >= 1.0 / 8 - 1e-12)
            assert np.all(rho <= 1.0 + 1e-12)


class TestParticleObjective:
    def test_all_particles_in_single_well(self):
        p = TwoWellPotential(
            gamma=12.0, kappa=12.0, w=1.0,
            m1=np.array([0.0, 0.0, 1.0]), m2=np.array([1.0, 0.0, 0.0]),
        )
        cloud = make_cloud(np.stack([p.m1] * 8))
        tau = 0.5
        assert particle_objective(cloud, p, tau, 0.35) == pytest.approx(
            -1.0 / tau, abs=1e-4
        )

    def test_permutation_invariance(self):
        rng = rng_from_key(145)
        pts = normalize(rng.standard_normal((10, 3)))
        p = default_two_well()
        a = particle_objective(make_cloud(pts), p, 0.7, 0.35)
        b = particle_objective(make_cloud(pts[::-1].copy()), p, 0.7, 0.35)
        assert a == pytest.approx(b, abs=1e-12)

    def test_rotation_invariance_and_covariance(self):
        rng = rng_from_key(146)
        pts = normalize(rng.standard_normal((12, 3)))
        p = default_two_well()
        R = random_rotation(rng)
        rotated_p = TwoWellPotential(
            gamma=p.gamma, kappa=p.kappa, w=p.w, m1=R @ p.m1, m2=R @ p.m2
        )
        v1, g1 = particle_objective_grad(make_cloud(pts), p, 0.7, 0.35)
        v2, g2 = particle_objective_grad(make_cloud(pts @ R.T), rotated_p, 0.7, 0.35)
        assert v2 == pytest.approx(v1, abs=1e-9)
        np.testing.assert_allclose(g2, g1 @ R.T, atol=1e-9)

    def test_entropy_only_limit_prefers_spread(self):
        # Nearly flat potential: spread particles score below clustered ones.
        p = TwoWellPotential(
            gamma=12.0, kappa=1e-8, w=0.5,
            m1=np.array([0.0, 0.0, 1.0]), m2=np.array([1.0, 0.0, 0.0]),
        )
        spread = make_cloud(np.array([[0, 0, 1.0], [0, 0, -1.0], [1.0, 0, 0], [-1.0, 0, 0]]))
        clustered = make_cloud(normalize(np.array(
            [[0.1, 0, 1.0], [0, 0.1, 1.0], [-0.1, 0, 1.0], [0, -0.1, 1.0]]
        )))
        assert particle_objective(spread, p, 1.0, 0.35) < particle_objective(
            clustered, p, 1.0, 0.35
        )


class TestParticleGradient:
    def test_matches_fd_on_random_clouds(self):
        rng = rng_from_key(147)
        p = default_two_well()
        worst = 0.0
        for _ in range(20):
            ambient = np.asarray(normalize(rng.standard_normal((6, 3))))
            tau = float(rng.uniform(0.2, 5.0))
            h = float(rng.uniform(0.25, 0.6))
            _, grad = particle_objective_grad(make_cloud(ambient), p, tau, h)
            fd = fd_particle_grad(ambient, p, tau, h)
            worst = max(worst, np.linalg.norm(grad - fd) / np.linalg.norm(fd))
        assert worst <= 1e-3

    def test_single_particle_pulled_toward_well(self):
        p = TwoWellPotential(
            gamma=12.0, kappa=12.0, w=1.0,
            m1=np.array([0.0, 0.0, 1.0]), m2=np.array([1.0, 0.0, 0.0]),
        )
        z = normalize(np.array([1.0, 0.2, 0.3]))
        cloud = make_cloud(np.stack([z, -z]))  # partner keeps the KDE finite
        _, grad = particle_objective_grad(cloud, p, 0.3, 0.35)
        step_dir = -grad[0]
        tangent_target = p.m1 - (z @ p.m1) * z
        assert step_dir @ tangent_target > 0

    def test_coincident_particles_finite(self):
        cloud = make_cloud(np.stack([[0.0, 0.0, 1.0]] * 4))
        value, grad = particle_objective_grad(cloud, default_two_well(), 0.5, 0.35)
        assert math.isfinite(value)
        assert np.all(np.isfinite(grad))

    def test_pure_repulsion_increases_separation(self):
        p = TwoWellPotential(
            gamma=12.0, kappa=1e-8, w=0.5,
            m1=np.array([0.0, 0.0, 1.0]), m2=np.array([1.0, 0.0, 0.0]),
        )
        a = normalize(np.array([0.6, 0.0, 0.8]))
        b = normalize(np.array([-0.6, 0.0, 0.8]))
        cloud = make_cloud(np.stack([a, b]))
        before = geodesic_distance_sphere(a, b)
        _, grad = particle_objective_grad(cloud, p, 1.0, 0.6)
        moved = normalize(cloud.ambient - 0.05 * grad)
        after = geodesic_distance_sphere(moved[0], moved[1])
        assert after > before


class TestTraining:
    def test_descent_with_tiny_lr_no_noise(self):
        res = train_particles(
            ParticleConfig(
                n_particles=16, tau=0.5, h=0.35, steps=1, lr=1e-4,
                noise_sigma=0.0, seed=7, trace_every=1,
            ),
            default_two_well(),
        )
        assert res.trace_values[-1] <= res.trace_values[0] + 1e-12

    def test_bit_reproducible(self):
        cfg = ParticleConfig(
            n_particles=12, tau=0.5, h=0.35, steps=25, lr=0.05,
            noise_sigma=0.06, seed=123,
        )
        a = train_particles(cfg, default_two_well())
        b = train_particles(cfg, default_two_well())
        np.testing.assert_array_equal(a.cloud.projected, b.cloud.projected)
        np.testing.assert_array_equal(a.trace_values, b.trace_values)

    def test_objective_drops_during_short_cold_run(self):
        res = train_particles(
            ParticleConfig(
                n_particles=32, tau=0.1, h=0.35, steps=300, lr=0.05,
                noise_sigma=0.06, seed=11,
            ),
            default_two_well(),
        )
        assert res.trace_values[-1] < res.trace_values[0]

    def test_projected_rows_stay_unit(self):
        res = train_particles(
            ParticleConfig(
                n_particles=8, tau=1.0, h=0.35, steps=10, lr=0.05,
                noise_sigma=0.06, seed=3,
            ),
            default_two_well(),
        )
        np.testing.assert_allclose(
            np.linalg.norm(res.cloud.projected, axis=1), 1.0, atol=1e-12
        )

    def test_cold_run_concentrates_more_than_hot(self):
        pot = default_two_well()
        centers = np.stack([pot.m1, pot.m2])
        caps = {}
        for tau in (10.0, 0.1):
            res = train_particles(
                ParticleConfig(
                    n_particles=64, tau=tau, h=0.35, steps=800, lr=0.05,
                    noise_sigma=0.06, seed=5,
                ),
                pot,
            )
            caps[tau] = cap_mass_particles(res.cloud.projected, centers, 0.5)
        assert caps[0.1] > caps[10.0]
