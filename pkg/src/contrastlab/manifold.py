"""Geometry of the compact representation containers.

Two container kinds appear throughout: the unit hypersphere S^{d-1}
(reached by row normalization) and the box [-1,1]^d (reached by a tanh
head). Points are plain float64 arrays; angles are floats in (-pi, pi].
All functions are pure; randomness always comes from a caller-owned
Generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFinite, UnsupportedManifold, ZeroVector

NORM_EPS = 1e-12
# Inner products of normalized vectors can exceed 1 by machine epsilon;
# clamp before arccos.
ACOS_CLAMP = 1e-12


@dataclass(frozen=True)
class ManifoldKind:
    """Container descriptor: kind is "sphere" (S^{d-1}) or "box" ([-1,1]^d)."""

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("sphere", "box"):
            raise UnsupportedManifold(f"unknown manifold kind {self.kind!r}")
        if self.dim < 2:
            raise ValueError("manifold ambient dimension must be >= 2")


def sphere(d: int) -> ManifoldKind:
    return ManifoldKind("sphere", d)


def box(d: int) -> ManifoldKind:
    return ManifoldKind("box", d)


def sphere_area(d: int) -> float:
    """Surface area of S^{d-1} in R^d (4*pi for d=3)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def normalize(v) -> np.ndarray:
    """Project v (or each row of v) onto the unit sphere.

    Raises ZeroVector when any norm is <= 1e-12. Idempotent on unit vectors.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        n = float(np.linalg.norm(v))
        if n <= NORM_EPS:
            raise ZeroVector(f"cannot normalize vector with norm {n:.3e}")
        return v / n
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n <= NORM_EPS):
        raise ZeroVector("cannot normalize row with near-zero norm")
    return v / n


def geodesic_distance_sphere(z, w):
    """Great-circle distance(s): arccos of the clamped inner product.

    Accepts single vectors or row-stacked arrays (broadcast on rows).
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    if z.shape[-1] != w.shape[-1]:
        raise DimensionMismatch(f"sphere dims differ: {z.shape[-1]} vs {w.shape[-1]}")
    dot = np.sum(z * w, axis=-1)
    dot = np.clip(dot, -1.0 + ACOS_CLAMP, 1.0 - ACOS_CLAMP)
    out = np.arccos(dot)
    return float(out) if out.ndim == 0 else out


def wrap_angle(x):
    """Wrap to (-pi, pi], mapping the -pi boundary to +pi. Scalar or array."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NonFinite("wrap_angle requires finite input")
    r = np.mod(x + np.pi, 2.0 * np.pi) - np.pi
    r = np.where(r <= -np.pi, r + 2.0 * np.pi, r)
    return float(r) if r.ndim == 0 else r


def sample_uniform_sphere(rng: np.random.Generator, d: int, n: int) -> np.ndarray:
    """n i.i.d. uniform points on S^{d-1}: isotropic Gaussian, normalized."""
    if d < 2:
        raise ValueError("d must be >= 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    g = rng.standard_normal((n, d))
    return normalize(g)


def sample_uniform_box(rng: np.random.Generator, d: int, n: int) -> np.ndarray:
    """n i.i.d. uniform points in [-1,1]^d."""
    return rng.uniform(-1.0, 1.0, size=(n, d))


def angle_of(p) -> float:
    """Angle of a point on S^1 (d must be 2)."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2:
        raise DimensionMismatch("angle_of is defined on S^1 (d=2)")
    out = np.arctan2(p[..., 1], p[..., 0])
    return float(out) if out.ndim == 0 else out


def embed_angle(a) -> np.ndarray:
    """Inverse of angle_of: a -> (cos a, sin a)."""
    a = np.asarray(a, dtype=float)
    return np.stack([np.cos(a), np.sin(a)], axis=-1)
