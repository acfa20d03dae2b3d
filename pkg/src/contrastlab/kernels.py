"""Similarity critics, the exponential kernel, and kernel-volume estimation.

The two canonical critics are the cosine inner product (spherical regime)
and the dimension-scaled negative squared distance (compact box regime).
The exponential kernel exp(s/tau) induces partition fields and smoothed
densities; on S^2 with the cosine critic its volume has the closed form
4*pi*tau*sinh(1/tau) under the surface-measure convention mu(S^2) = 4*pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyPool, UnsupportedManifold
from .manifold import ManifoldKind, geodesic_distance_sphere, sample_uniform_sphere, sphere_area


@dataclass(frozen=True)
class Critic:
    """kind is "cosine" or "rbf"; rbf scales -||z-w||^2 by dim_scale (> 0)."""

    kind: str
    dim_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("cosine", "rbf"):
            raise ValueError(f"unknown critic kind {self.kind!r}")
        if self.kind == "rbf" and not self.dim_scale > 0:
            raise ValueError("rbf dim_scale must be positive")


def cosine_critic() -> Critic:
    return Critic("cosine")


def rbf_critic(dim_scale: float) -> Critic:
    return Critic("rbf", dim_scale)


@dataclass(frozen=True)
class KernelVolumeEstimate:
    value: float
    std_error: float
    method: str  # "analytic" | "monte_carlo"
    n: int = 0

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("kernel volume must be positive")
        if self.method == "analytic" and self.std_error != 0.0:
            raise ValueError("analytic volume has zero std_error")


def critic_value(c: Critic, z, w) -> float:
    """s(z, w) for single points; symmetric in (z, w)."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    if z.shape != w.shape:
        raise DimensionMismatch(f"critic operands differ: {z.shape} vs {w.shape}")
    if c.kind == "cosine":
        return float(z @ w)
    d = z - w
    return float(-c.dim_scale * (d @ d))


def critic_matrix(c: Critic, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise critic values s(A_i, B_j) as an (n, m) matrix."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[-1] != B.shape[-1]:
        raise DimensionMismatch("critic operands live in different dimensions")
    if c.kind == "cosine":
        return A @ B.T
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    return -c.dim_scale * np.maximum(sq, 0.0)


def kernel_value(c: Critic, tau: float, z, w) -> float:
    """kappa_tau(z, w) = exp(s(z, w) / tau) > 0."""
    if not tau > 0:
        raise ValueError("temperature must be positive")
    return math.exp(critic_value(c, z, w) / tau)


def kernel_volume_s2_cosine(tau: float) -> KernelVolumeEstimate:
    """Closed form of the cosine-kernel volume on S^2: 4*pi*tau*sinh(1/tau)."""
    if not tau > 0:
        raise ValueError("temperature must be positive")
    value = 4.0 * math.pi * tau * math.sinh(1.0 / tau)
    return KernelVolumeEstimate(value=value, std_error=0.0, method="analytic")


def kernel_volume_mc(
    m: ManifoldKind,
    c: Critic,
    tau: float,
    anchor,
    n: int,
    rng: np.random.Generator,
) -> KernelVolumeEstimate:
    """Monte Carlo kernel volume at an anchor: area * mean kappa over n uniform points."""
    if m.kind != "sphere":
        raise UnsupportedManifold("MC kernel volume is only needed on spheres here")
    if n < 100:
        raise ValueError("need n >= 100 samples")
    anchor = np.asarray(anchor, dtype=float)
    pts = sample_uniform_sphere(rng, m.dim, n)
    scores = critic_matrix(c, anchor[None, :], pts)[0]
    k = np.exp(scores / tau)
    area = sphere_area(m.dim)
    mean = float(np.mean(k))
    std = float(np.std(k, ddof=1))
    return KernelVolumeEstimate(
        value=area * mean,
        std_error=area * std / math.sqrt(n),
        method="monte_carlo",
        n=n,
    )


def partition_field(c: Critic, tau: float, z, pool: np.ndarray) -> float:
    """Empirical partition value at z: mean of kappa_tau(z, .) over the pool."""
    pool = np.asarray(pool, dtype=float)
    if pool.size == 0:
        raise EmptyPool("partition_field needs a nonempty pool")
    z = np.asarray(z, dtype=float)
    scores = critic_matrix(c, z[None, :], pool)[0]
    return float(np.mean(np.exp(scores / tau)))


def partition_field_many(c: Critic, tau: float, Z: np.ndarray, pool: np.ndarray) -> np.ndarray:
    """partition_field for a batch of anchors (rows of Z), vectorized."""
    pool = np.asarray(pool, dtype=float)
    if pool.size == 0:
        raise EmptyPool("partition_field needs a nonempty pool")
    scores = critic_matrix(c, np.asarray(Z, dtype=float), pool)
    return np.mean(np.exp(scores / tau), axis=1)


def smoothed_density(
    c: Critic, tau: float, z, pool: np.ndarray, vkappa: KernelVolumeEstimate
) -> float:
    """Kernel-smoothed density estimate: partition_field / kernel volume."""
    return partition_field(c, tau, z, pool) / vkappa.value


@dataclass(frozen=True)
class SharpPeakReport:
    ok: bool
    worst_violation: float
    n_checked: int


def sharp_peak_check(
    c: Critic,
    m: ManifoldKind,
    r: float,
    m1: float,
    m2: float,
    n_probe: int,
    rng: np.random.Generator,
) -> SharpPeakReport:
    """Probe the quadratic sandwich -m2*d^2 <= s(z,w) - s(z,z) <= -m1*d^2.

    Pairs are sampled with d(z, w) < r: on the sphere by walking a uniform
    arc length along a random tangent (d is then the arc length), in the box
    by rejection on the Euclidean distance. Positive worst_violation means
    the sandwich failed somewhere.
    """
    if not (0 < m1 <= m2):
        raise ValueError("need 0 < m1 <= m2")
    if not r > 0:
        raise ValueError("need r > 0")
    tol = 1e-9
    worst = -math.inf
    if m.kind == "sphere":
        Z = sample_uniform_sphere(rng, m.dim, n_probe)
        T = rng.standard_normal((n_probe, m.dim))
        T -= np.sum(T * Z, axis=1, keepdims=True) * Z
        T /= np.linalg.norm(T, axis=1, keepdims=True)
        u = rng.uniform(0.0, r, size=n_probe)
        W = np.cos(u)[:, None] * Z + np.sin(u)[:, None] * T
        d = geodesic_distance_sphere(Z, W)
    else:
        Z = rng.uniform(-1.0, 1.0, size=(n_probe, m.dim))
        W = rng.uniform(-1.0, 1.0, size=(n_probe, m.dim))
        d = np.linalg.norm(Z - W, axis=1)
        keep = d < r
        Z, W, d = Z[keep], W[keep], d[keep]
    if len(Z) == 0:
        return SharpPeakReport(ok=True, worst_violation=-math.inf, n_checked=0)
    s_zw = np.einsum("ij,ij->i", Z, W) if c.kind == "cosine" else -c.dim_scale * np.sum(
        (Z - W) ** 2, axis=1
    )
    s_zz = np.ones(len(Z)) if c.kind == "cosine" else np.zeros(len(Z))
    delta = s_zw - s_zz
    viol_low = (-m2 * d * d) - delta  # positive when lower bound fails
    viol_high = delta - (-m1 * d * d)  # positive when upper bound fails
    worst = float(np.max(np.maximum(viol_low, viol_high)))
    return SharpPeakReport(ok=worst <= tol, worst_violation=worst, n_checked=len(Z))
