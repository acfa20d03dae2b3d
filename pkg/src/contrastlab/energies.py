"""Monte Carlo estimators of the deterministic large-batch energies.

The parametric energy of an encoder splits into a binding term (mean
negative similarity over positive pairs, divided by tau) and a cross-
entropy term against the kernel-smoothed density of a large pool. The
value-consistency residual measures how far the finite-N batch loss sits
from energy + log(N * V_kappa); it decays like the Monte Carlo error of
the denominator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoders import LinearEncoder, encode_batch
from .errors import EmptyInput, ZeroReference
from .kernels import Critic, KernelVolumeEstimate, critic_matrix, partition_field_many
from .losses import infonce_batch_mean_loss


@dataclass(frozen=True)
class EnergyEstimate:
    """binding = U(q)/tau, cross_entropy = H_x(q, q_smoothed)."""

    binding: float
    cross_entropy: float

    @property
    def total(self) -> float:
        return self.binding - self.cross_entropy


@dataclass(frozen=True)
class MmEnergyEstimate:
    forward: EnergyEstimate   # anchor side encoded by f, field from g's pool
    backward: EnergyEstimate  # anchor side encoded by g, field from f's pool

    @property
    def total(self) -> float:
        return 0.5 * (self.forward.total + self.backward.total)


@dataclass(frozen=True)
class GradReport:
    alignment: float
    rel_error: float


def mean_negative_similarity(Za: np.ndarray, Zb: np.ndarray, c: Critic) -> float:
    """Mean of -s over row-aligned encoded pairs."""
    Za = np.atleast_2d(np.asarray(Za, dtype=float))
    Zb = np.atleast_2d(np.asarray(Zb, dtype=float))
    if len(Za) == 0:
        raise EmptyInput("need at least one positive pair")
    if c.kind == "cosine":
        s = np.einsum("ij,ij->i", Za, Zb)
    else:
        s = -c.dim_scale * np.sum((Za - Zb) ** 2, axis=1)
    return float(-np.mean(s))


def alignment_potential_estimate(
    enc_a: LinearEncoder,
    enc_b: LinearEncoder,
    xs: np.ndarray,
    ys: np.ndarray,
    c: Critic,
    direction: str = "uni",
) -> float:
    """Pair-averaged estimate of the expected binding potential U(q).

    direction in {"uni", "theta_to_phi", "phi_to_theta"} selects which side
    anchors; the scalar value is the same joint expectation either way.
    """
    if direction not in ("uni", "theta_to_phi", "phi_to_theta"):
        raise ValueError(f"unknown direction {direction!r}")
    if direction == "phi_to_theta":
        enc_a, enc_b = enc_b, enc_a
        xs, ys = ys, xs
    return mean_negative_similarity(
        encode_batch(enc_a, xs), encode_batch(enc_b, ys), c
    )


def _cross_entropy_vs_pool(
    Z_anchors: np.ndarray, Z_pool: np.ndarray, c: Critic, tau: float,
    vkappa: KernelVolumeEstimate,
) -> float:
    """H_x estimate: -mean_i log( mean_pool kappa(z_i, .) / V_kappa )."""
    gam = partition_field_many(c, tau, Z_anchors, Z_pool)
    return float(-np.mean(np.log(gam / vkappa.value)))


def parametric_energy_unimodal(
    enc: LinearEncoder,
    anchors_x: np.ndarray,
    positives_x: np.ndarray,
    pool_x: np.ndarray,
    c: Critic,
    tau: float,
    vkappa: KernelVolumeEstimate,
) -> EnergyEstimate:
    """Binding from the evaluation pairs; cross-entropy against the pool field."""
    if len(np.atleast_2d(pool_x)) < 100:
        raise ValueError("pool must hold at least 100 points")
    Za = encode_batch(enc, anchors_x)
    Zp = encode_batch(enc, positives_x)
    Zpool = encode_batch(enc, pool_x)
    binding = mean_negative_similarity(Za, Zp, c) / tau
    h_cross = _cross_entropy_vs_pool(Za, Zpool, c, tau, vkappa)
    return EnergyEstimate(binding=binding, cross_entropy=h_cross)


def value_consistency_residual(
    enc: LinearEncoder,
    anchors_x: np.ndarray,
    positives_x: np.ndarray,
    neg_pool_x: np.ndarray,
    n_negatives: int,
    eval_pool_x: np.ndarray,
    c: Critic,
    tau: float,
    vkappa: KernelVolumeEstimate,
) -> float:
    """|batch-mean loss - energy total - log(N * V_kappa)| on shared pairs."""
    loss = infonce_batch_mean_loss(
        enc, anchors_x, positives_x, neg_pool_x, n_negatives, c, tau
    )
    energy = parametric_energy_unimodal(
        enc, anchors_x, positives_x, eval_pool_x, c, tau, vkappa
    )
    return abs(loss - energy.total - np.log(n_negatives * vkappa.value))


def parametric_energy_multimodal(
    f: LinearEncoder,
    g: LinearEncoder,
    xs: np.ndarray,
    ys: np.ndarray,
    pool_x: np.ndarray,
    pool_y: np.ndarray,
    c: Critic,
    tau: float,
    vkappa: KernelVolumeEstimate,
) -> MmEnergyEstimate:
    """Each directional energy reads the opposite modality's smoothed field."""
    for pool in (pool_x, pool_y):
        if len(np.atleast_2d(pool)) < 100:
            raise ValueError("pools must hold at least 100 points")
    Zx = encode_batch(f, xs)
    Zy = encode_batch(g, ys)
    Zpool_x = encode_batch(f, pool_x)
    Zpool_y = encode_batch(g, pool_y)
    binding = mean_negative_similarity(Zx, Zy, c) / tau
    fwd = EnergyEstimate(
        binding=binding,
        cross_entropy=_cross_entropy_vs_pool(Zx, Zpool_y, c, tau, vkappa),
    )
    bwd = EnergyEstimate(
        binding=binding,
        cross_entropy=_cross_entropy_vs_pool(Zy, Zpool_x, c, tau, vkappa),
    )
    return MmEnergyEstimate(forward=fwd, backward=bwd)


def grad_alignment(g1: np.ndarray, g2: np.ndarray) -> GradReport:
    """Cosine alignment and relative L2 error of g1 against reference g2."""
    g1 = np.ravel(np.asarray(g1, dtype=float))
    g2 = np.ravel(np.asarray(g2, dtype=float))
    if g1.shape != g2.shape:
        raise ValueError("gradients must have equal length")
    n2 = float(np.linalg.norm(g2))
    if n2 == 0.0:
        raise ZeroReference("reference gradient has zero norm")
    n1 = float(np.linalg.norm(g1))
    align = float(g1 @ g2) / (n1 * n2) if n1 > 0 else 0.0
    return GradReport(alignment=align, rel_error=float(np.linalg.norm(g1 - g2)) / n2)
