"""Synthetic data for the desk-scale experiments.

Gaussian-mixture pairs in R^m (anchor plus additive-noise positive,
negatives from the marginal) and circle-valued observations of a bimodal
von Mises latent angle whose second view is misaligned by wrapped
Gaussian noise. Everything is a pure function of (config, rng).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .manifold import embed_angle, sample_uniform_sphere, wrap_angle


@dataclass(frozen=True)
class GmmConfig:
    dim: int
    n_components: int
    separation: float
    sigma: float
    sigma_aug: float

    def __post_init__(self):
        if self.n_components < 1 or self.dim < 1:
            raise ValueError("dim and n_components must be >= 1")
        if not (self.separation > 0 and self.sigma > 0 and self.sigma_aug >= 0):
            raise ValueError("scales must be positive (sigma_aug may be zero)")


@dataclass(frozen=True)
class GmmModel:
    means: np.ndarray
    weights: np.ndarray


def gmm_build(cfg: GmmConfig, rng: np.random.Generator) -> GmmModel:
    """Component means: uniform random directions scaled by the separation."""
    if cfg.dim >= 2:
        directions = sample_uniform_sphere(rng, cfg.dim, cfg.n_components)
    else:
        directions = np.sign(rng.standard_normal((cfg.n_components, 1)))
    means = cfg.separation * directions
    weights = np.full(cfg.n_components, 1.0 / cfg.n_components)
    return GmmModel(means=means, weights=weights)


def gmm_sample(model: GmmModel, cfg: GmmConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws from the mixture marginal."""
    comps = rng.choice(len(model.weights), size=n, p=model.weights)
    return model.means[comps] + cfg.sigma * rng.standard_normal((n, cfg.dim))


def gmm_sample_pairs(model: GmmModel, cfg: GmmConfig, n: int, rng: np.random.Generator):
    """(x, x + aug-noise) positive pairs."""
    x = gmm_sample(model, cfg, n, rng)
    x_pos = x + cfg.sigma_aug * rng.standard_normal((n, cfg.dim))
    return x, x_pos


def von_mises_sample(mu: float, k: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n von Mises(mu, k) angles via the Best-Fisher wrapped-Cauchy rejection."""
    if not k > 0:
        raise ValueError("concentration must be positive")
    tau_ = 1.0 + math.sqrt(1.0 + 4.0 * k * k)
    rho = (tau_ - math.sqrt(2.0 * tau_)) / (2.0 * k)
    r = (1.0 + rho * rho) / (2.0 * rho)
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(16, int(1.2 * (n - filled) / 0.65))
        u1 = rng.uniform(size=m)
        u2 = rng.uniform(size=m)
        u3 = rng.uniform(size=m)
        z = np.cos(math.pi * u1)
        f = (1.0 + r * z) / (r + z)
        c = k * (r - f)
        accept = (c * (2.0 - c) - u2 > 0.0) | (np.log(c / u2) + 1.0 - c >= 0.0)
        vals = np.sign(u3[accept] - 0.5) * np.arccos(np.clip(f[accept], -1.0, 1.0))
        take = min(len(vals), n - filled)
        out[filled : filled + take] = vals[:take]
        filled += take
    return wrap_angle(mu + out)


@dataclass(frozen=True)
class VmMixtureConfig:
    w: float
    mu1: float
    mu2: float
    concentration: float
    sigma_mis: float
    sigma_obs: float

    def __post_init__(self):
        if not (0.0 < self.w < 1.0):
            raise ValueError("mixture weight must lie in (0, 1)")
        if not self.concentration > 0:
            raise ValueError("concentration must be positive")
        if self.sigma_mis < 0 or self.sigma_obs < 0:
            raise ValueError("noise scales must be >= 0")


def sample_latent_pairs(cfg: VmMixtureConfig, n: int, rng: np.random.Generator):
    """(theta, wrap(theta + misalignment noise)) from the bimodal latent law."""
    pick_first = rng.uniform(size=n) < cfg.w
    base = von_mises_sample(0.0, cfg.concentration, n, rng)
    mu = np.where(pick_first, cfg.mu1, cfg.mu2)
    theta = wrap_angle(mu + base)
    eta = cfg.sigma_mis * rng.standard_normal(n)
    return theta, wrap_angle(theta + eta)


def observe_on_circle(alpha, sigma_obs: float, rng: np.random.Generator) -> np.ndarray:
    """Noisy circle embedding [cos a, sin a] + Gaussian(sigma_obs)."""
    if sigma_obs < 0:
        raise ValueError("sigma_obs must be >= 0")
    pts = np.atleast_2d(embed_angle(alpha))
    if sigma_obs > 0:
        pts = pts + sigma_obs * rng.standard_normal(pts.shape)
    return pts


def mm_gap_batch(cfg: VmMixtureConfig, n: int, rng: np.random.Generator):
    """Full paired-observation pipeline: (x1, x2) rows on the noisy circle."""
    theta, theta2 = sample_latent_pairs(cfg, n, rng)
    x1 = observe_on_circle(theta, cfg.sigma_obs, rng)
    x2 = observe_on_circle(theta2, cfg.sigma_obs, rng)
    return x1, x2


def dump_pairs_csv(path, x1: np.ndarray, x2: np.ndarray) -> None:
    """Plain-CSV dump of paired observations, one row per sample."""
    from .diagnostics import write_csv

    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    if len(x1) != len(x2):
        raise ValueError("paired dumps need equally many rows")
    header = [f"x1_{i}" for i in range(x1.shape[1])] + [
        f"x2_{i}" for i in range(x2.shape[1])
    ]
    write_csv(path, header, np.hstack([x1, x2]))


def circular_mean(angles: np.ndarray) -> float:
    a = np.asarray(angles, dtype=float)
    return float(np.arctan2(np.mean(np.sin(a)), np.mean(np.cos(a))))


def circular_resultant_length(angles: np.ndarray) -> float:
    a = np.asarray(angles, dtype=float)
    return float(np.hypot(np.mean(np.sin(a)), np.mean(np.cos(a))))


def circular_correlation(a1: np.ndarray, a2: np.ndarray) -> float:
    """Fisher-Lee T-linear association between two angle samples."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    s1 = np.sin(a1 - circular_mean(a1))
    s2 = np.sin(a2 - circular_mean(a2))
    denom = math.sqrt(float(np.sum(s1 * s1)) * float(np.sum(s2 * s2)))
    return float(np.sum(s1 * s2)) / denom
