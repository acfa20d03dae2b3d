"""Particle surrogate of the free energy on S^2.

A cloud of M unit vectors stands in for the density; the objective is the
mean potential over particles (scaled by 1/tau) plus the mean log of a
wrapped-Gaussian KDE evaluated at the particles themselves. The KDE keeps
its self term (an exact 1/M floor, so the log never diverges) but that
term is constant, so it carries no gradient; inner products entering
arccos are clamped to +-(1 - 1e-7) and the clamp kills the gradient of
any saturated pair, which keeps coincident particles finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteLoss
from .manifold import normalize
from .optim import adam_init, adam_step, langevin_perturb
from .rng import rng_from_key

GRAD_ACOS_CLAMP = 1e-7


@dataclass(frozen=True)
class TwoWellPotential:
    """Soft minimum of two spherical-cap wells at m1 and m2."""

    gamma: float
    kappa: float
    w: float
    m1: np.ndarray
    m2: np.ndarray

    def __post_init__(self):
        if not (self.gamma > 0 and self.kappa > 0):
            raise ValueError("gamma and kappa must be positive")
        if not (0.0 <= self.w <= 1.0):
            raise ValueError("mixture weight must lie in [0, 1]")
        object.__setattr__(self, "m1", normalize(np.asarray(self.m1, dtype=float)))
        object.__setattr__(self, "m2", normalize(np.asarray(self.m2, dtype=float)))


def default_two_well() -> TwoWellPotential:
    """The reference configuration: gamma=kappa=12, equal wells at
    (0,0,1) and the normalized direction (0.85, 0.15, -0.50)."""
    return TwoWellPotential(
        gamma=12.0, kappa=12.0, w=0.5,
        m1=np.array([0.0, 0.0, 1.0]),
        m2=np.array([0.85, 0.15, -0.50]),
    )


def _mode_logits(p: TwoWellPotential, Z: np.ndarray):
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    a = p.kappa * (Z @ p.m1)
    b = p.kappa * (Z @ p.m2)
    return a, b


def two_well_u(p: TwoWellPotential, z):
    """U(z) = -(1/gamma) log(w e^{kappa<z,m1>} + (1-w) e^{kappa<z,m2>})."""
    single = np.asarray(z).ndim == 1
    a, b = _mode_logits(p, z)
    m = np.maximum(a, b)
    lse = m + np.log(p.w * np.exp(a - m) + (1.0 - p.w) * np.exp(b - m))
    u = -lse / p.gamma
    return float(u[0]) if single else u


def two_well_grad(p: TwoWellPotential, Z: np.ndarray) -> np.ndarray:
    """Ambient gradient rows: -(kappa/gamma) * (p1 m1 + p2 m2) (softmax weights)."""
    a, b = _mode_logits(p, Z)
    m = np.maximum(a, b)
    ea = p.w * np.exp(a - m)
    eb = (1.0 - p.w) * np.exp(b - m)
    denom = ea + eb
    p1 = (ea / denom)[:, None]
    p2 = (eb / denom)[:, None]
    return -(p.kappa / p.gamma) * (p1 * p.m1[None, :] + p2 * p.m2[None, :])


@dataclass(frozen=True)
class ParticleCloud:
    """Unconstrained ambient rows and their unit-norm projections."""

    ambient: np.ndarray
    projected: np.ndarray


def make_cloud(ambient: np.ndarray) -> ParticleCloud:
    ambient = np.atleast_2d(np.asarray(ambient, dtype=float))
    if len(ambient) < 2:
        raise ValueError("a particle cloud needs M >= 2 particles")
    return ParticleCloud(ambient=ambient, projected=normalize(ambient))


def _kde_matrix(Z: np.ndarray, h: float):
    """Kernel matrix, its clamp-masked dk/dc factor, and densities rho."""
    M = len(Z)
    c_raw = Z @ Z.T
    lo, hi = -1.0 + GRAD_ACOS_CLAMP, 1.0 - GRAD_ACOS_CLAMP
    c = np.clip(c_raw, lo, hi)
    d = np.arccos(c)
    k = np.exp(-(d * d) / (2.0 * h * h))
    np.fill_diagonal(k, 1.0)  # exact self term exp(0)
    rho = k.mean(axis=1)
    g = k * d / (h * h * np.sqrt(1.0 - c * c))
    g[(c_raw <= lo) | (c_raw >= hi)] = 0.0  # clamp has zero slope outside
    np.fill_diagonal(g, 0.0)  # self term is constant by definition
    return k, g, rho


def kde_all(cloud: ParticleCloud, h: float) -> np.ndarray:
    """KDE value at every particle; lies in [1/M, 1]."""
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    _, _, rho = _kde_matrix(cloud.projected, h)
    return rho


def kde_hat(cloud: ParticleCloud, i: int, h: float) -> float:
    """KDE value at particle i (self term included)."""
    return float(kde_all(cloud, h)[i])


def particle_objective(
    cloud: ParticleCloud, p: TwoWellPotential, tau: float, h: float
) -> float:
    """(1/tau) mean U(z_i) + mean log KDE(z_i); finite by the self-term floor."""
    if not (tau > 0 and h > 0):
        raise ValueError("tau and h must be positive")
    rho = kde_all(cloud, h)
    u = two_well_u(p, cloud.projected)
    return float(np.mean(u) / tau + np.mean(np.log(rho)))


def particle_objective_grad(
    cloud: ParticleCloud, p: TwoWellPotential, tau: float, h: float
):
    """(value, gradient over ambient rows), chain rule through z = v/||v||."""
    if not (tau > 0 and h > 0):
        raise ValueError("tau and h must be positive")
    Z = cloud.projected
    M = len(Z)
    _, g, rho = _kde_matrix(Z, h)
    u = two_well_u(p, Z)
    value = float(np.mean(u) / tau + np.mean(np.log(rho)))
    if not np.isfinite(value):
        raise NonFiniteLoss("particle objective is non-finite")
    r = 1.0 / rho
    coeff = g * (r[:, None] + r[None, :])
    grad_z = coeff @ Z / (M * M) + two_well_grad(p, Z) / (tau * M)
    norms = np.linalg.norm(cloud.ambient, axis=1, keepdims=True)
    grad_v = (grad_z - Z * np.sum(grad_z * Z, axis=1, keepdims=True)) / norms
    if not np.all(np.isfinite(grad_v)):
        raise NonFiniteLoss("particle gradient is non-finite")
    return value, grad_v


@dataclass(frozen=True)
class ParticleConfig:
    n_particles: int
    tau: float
    h: float
    steps: int
    lr: float
    noise_sigma: float
    seed: int
    trace_every: int = 100


@dataclass(frozen=True)
class TrainResult:
    cloud: ParticleCloud
    trace_steps: np.ndarray
    trace_values: np.ndarray


def train_particles(config: ParticleConfig, p: TwoWellPotential) -> TrainResult:
    """Per step: gradient, Adam on ambient rows, Gaussian kick, re-project."""
    if config.steps < 1:
        raise ValueError("need at least one step")
    rng = rng_from_key(config.seed)
    ambient = np.asarray(
        normalize(rng.standard_normal((config.n_particles, 3))), dtype=float
    )
    state = adam_init(ambient.size, lr=config.lr)
    steps, values = [], []
    cloud = make_cloud(ambient)
    for step in range(config.steps):
        value, grad = particle_objective_grad(cloud, p, config.tau, config.h)
        if step % config.trace_every == 0:
            steps.append(step)
            values.append(value)
        state, flat = adam_step(state, grad.ravel(), cloud.ambient.ravel())
        flat = langevin_perturb(flat, config.noise_sigma, rng)
        ambient = normalize(flat.reshape(config.n_particles, 3))
        cloud = make_cloud(ambient)
    steps.append(config.steps)
    values.append(particle_objective(cloud, p, config.tau, config.h))
    return TrainResult(
        cloud=cloud,
        trace_steps=np.asarray(steps),
        trace_values=np.asarray(values),
    )
