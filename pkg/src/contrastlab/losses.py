"""Empirical contrastive objectives.

Three families: directional InfoNCE with an explicit positive and negative
set (the positive appears in the denominator), its batch mean over anchors
sharing one negative-pool prefix, and the symmetric in-batch form that
cross-classifies a paired batch in both directions. Every objective is
built on the reverse-mode tape, so values and parameter gradients come
from the same code path; log-sum-exp is always max-shifted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .encoders import LinearEncoder, encode_rows_var
from .errors import PoolTooSmall
from .kernels import Critic


@dataclass(frozen=True)
class UniBatch:
    """One anchor, its positive, and N >= 1 negatives (raw inputs)."""

    anchor: np.ndarray
    positive: np.ndarray
    negatives: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.anchor, dtype=float)
        p = np.asarray(self.positive, dtype=float)
        n = np.atleast_2d(np.asarray(self.negatives, dtype=float))
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "positive", p)
        object.__setattr__(self, "negatives", n)
        if n.shape[0] < 1:
            raise ValueError("need at least one negative")
        for arr in (a, p, n):
            if not np.all(np.isfinite(arr)):
                raise ValueError("batch entries must be finite")


@dataclass(frozen=True)
class PairBatch:
    """B >= 2 cross-modal positive pairs, row-aligned."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if xs.shape[0] != ys.shape[0]:
            raise ValueError("paired batch sides must have equal length")
        if xs.shape[0] < 2:
            raise ValueError("in-batch loss needs B >= 2")


def _pair_scores(critic: Critic, a: ag.Var, b: ag.Var) -> ag.Var:
    """Row-aligned critic values s(a_i, b_i)."""
    if critic.kind == "cosine":
        return ag.rowwise_dot(a, b)
    return ag.scale(ag.rowwise_sqdist(a, b), -critic.dim_scale)


def _cross_scores(critic: Critic, a: ag.Var, b: ag.Var) -> ag.Var:
    """Pairwise critic matrix s(a_i, b_j)."""
    if critic.kind == "cosine":
        return ag.matmul(a, ag.transpose(b))
    return ag.scale(ag.pairwise_sqdist(a, b), -critic.dim_scale)


def _nce_mean_var(
    W: ag.Var,
    head: str,
    anchors: np.ndarray,
    positives: np.ndarray,
    negatives: np.ndarray,
    critic: Critic,
    tau: float,
) -> ag.Var:
    """Mean over anchors of -log(kappa+ / (kappa+ + sum_j kappa-_j))."""
    Z = encode_rows_var(W, anchors, head)
    Zp = encode_rows_var(W, positives, head)
    Zn = encode_rows_var(W, negatives, head)
    pos = _pair_scores(critic, Z, Zp)
    neg = _cross_scores(critic, Z, Zn)
    b = len(np.atleast_2d(anchors))
    scores = ag.concat_cols([ag.reshape(pos, (b, 1)), neg])
    lse = ag.logsumexp_rows(ag.scale(scores, 1.0 / tau))
    return ag.mean_(ag.add(ag.scale(pos, -1.0 / tau), lse))


def _as_rows(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


def nce_from_scores(pos: np.ndarray, neg: np.ndarray, tau: float) -> float:
    """Reference value of the mean InfoNCE on raw critic scores.

    pos: (B,) positive scores; neg: (B, N) negative scores. Used as the
    brute-force oracle the encoder paths are pinned against.
    """
    pos = np.asarray(pos, dtype=float)
    neg = np.atleast_2d(np.asarray(neg, dtype=float))
    scores = np.concatenate([pos[:, None], neg], axis=1) / tau
    m = scores.max(axis=1, keepdims=True)
    lse = (m + np.log(np.exp(scores - m).sum(axis=1, keepdims=True)))[:, 0]
    return float(np.mean(-pos / tau + lse))


def infonce_loss(enc: LinearEncoder, b: UniBatch, c: Critic, tau: float) -> float:
    """Directional InfoNCE for one anchor; strictly positive."""
    out = _nce_mean_var(
        ag.Var(enc.W), enc.head, _as_rows(b.anchor), _as_rows(b.positive),
        b.negatives, c, tau,
    )
    return float(out.value)


def infonce_loss_grad(enc: LinearEncoder, b: UniBatch, c: Critic, tau: float):
    """(value, dloss/dW) via the tape."""
    shape = enc.W.shape

    def fn(flat: ag.Var) -> ag.Var:
        return _nce_mean_var(
            ag.reshape(flat, shape), enc.head, _as_rows(b.anchor),
            _as_rows(b.positive), b.negatives, c, tau,
        )

    value, grad = ag.loss_and_grad(fn, enc.W.ravel())
    return value, grad.reshape(shape)


def infonce_batch_mean_loss(
    enc: LinearEncoder,
    anchors: np.ndarray,
    positives: np.ndarray,
    pool: np.ndarray,
    n_negatives: int,
    c: Critic,
    tau: float,
) -> float:
    """Mean InfoNCE over B anchors sharing the first n_negatives of the pool."""
    pool = np.asarray(pool, dtype=float)
    if n_negatives > len(pool):
        raise PoolTooSmall(f"asked for {n_negatives} negatives, pool has {len(pool)}")
    out = _nce_mean_var(
        ag.Var(enc.W), enc.head, _as_rows(anchors), _as_rows(positives),
        pool[:n_negatives], c, tau,
    )
    return float(out.value)


def infonce_batch_mean_grad(
    enc: LinearEncoder,
    anchors: np.ndarray,
    positives: np.ndarray,
    pool: np.ndarray,
    n_negatives: int,
    c: Critic,
    tau: float,
):
    """(value, dloss/dW) of the batch-mean loss."""
    pool = np.asarray(pool, dtype=float)
    if n_negatives > len(pool):
        raise PoolTooSmall(f"asked for {n_negatives} negatives, pool has {len(pool)}")
    shape = enc.W.shape
    neg = pool[:n_negatives]

    def fn(flat: ag.Var) -> ag.Var:
        return _nce_mean_var(
            ag.reshape(flat, shape), enc.head, _as_rows(anchors),
            _as_rows(positives), neg, c, tau,
        )

    value, grad = ag.loss_and_grad(fn, enc.W.ravel())
    return value, grad.reshape(shape)


def pack_params(Wf: np.ndarray, Wg: np.ndarray) -> np.ndarray:
    """Row-major flattening of the two weight blocks into one vector."""
    return np.concatenate([np.ravel(Wf), np.ravel(Wg)])


def _unpack_two(flat: ag.Var, shape_f, shape_g):
    nf = int(np.prod(shape_f))
    ng = int(np.prod(shape_g))
    Wf = ag.reshape(ag.take_slice(flat, 0, nf), shape_f)
    Wg = ag.reshape(ag.take_slice(flat, nf, nf + ng), shape_g)
    return Wf, Wg


def _directional_mm_var(
    flat: ag.Var, f: LinearEncoder, g: LinearEncoder,
    x, y, neg_ys, c: Critic, tau: float,
) -> ag.Var:
    Wf, Wg = _unpack_two(flat, f.W.shape, g.W.shape)
    Z = encode_rows_var(Wf, _as_rows(x), f.head)
    Zy = encode_rows_var(Wg, _as_rows(y), g.head)
    Zn = encode_rows_var(Wg, _as_rows(neg_ys), g.head)
    pos = _pair_scores(c, Z, Zy)
    neg = _cross_scores(c, Z, Zn)
    b = len(_as_rows(x))
    scores = ag.concat_cols([ag.reshape(pos, (b, 1)), neg])
    lse = ag.logsumexp_rows(ag.scale(scores, 1.0 / tau))
    return ag.mean_(ag.add(ag.scale(pos, -1.0 / tau), lse))


def directional_mm_loss(
    f: LinearEncoder, g: LinearEncoder, x, y, neg_ys, c: Critic, tau: float
) -> float:
    """Directional cross-modal InfoNCE: anchor through f, candidates through g."""
    out = _directional_mm_var(
        ag.Var(pack_params(f.W, g.W)), f, g, x, y, neg_ys, c, tau
    )
    return float(out.value)


def directional_mm_grad(
    f: LinearEncoder, g: LinearEncoder, x, y, neg_ys, c: Critic, tau: float
):
    """(value, dloss/dWf, dloss/dWg)."""

    def fn(flat: ag.Var) -> ag.Var:
        return _directional_mm_var(flat, f, g, x, y, neg_ys, c, tau)

    value, grad = ag.loss_and_grad(fn, pack_params(f.W, g.W))
    nf = f.W.size
    return value, grad[:nf].reshape(f.W.shape), grad[nf:].reshape(g.W.shape)


def _clip_inbatch_var(
    flat: ag.Var, f: LinearEncoder, g: LinearEncoder, pb: PairBatch,
    c: Critic, tau: float,
) -> ag.Var:
    Wf, Wg = _unpack_two(flat, f.W.shape, g.W.shape)
    Z1 = encode_rows_var(Wf, pb.xs, f.head)
    Z2 = encode_rows_var(Wg, pb.ys, g.head)
    S = ag.scale(_cross_scores(c, Z1, Z2), 1.0 / tau)
    diag = ag.diag_of(S)
    rows = ag.mean_(ag.add(ag.scale(diag, -1.0), ag.logsumexp_rows(S)))
    cols = ag.mean_(ag.add(ag.scale(diag, -1.0), ag.logsumexp_rows(ag.transpose(S))))
    return ag.scale(ag.add(rows, cols), 0.5)


def symmetric_clip_inbatch_loss(
    f: LinearEncoder, g: LinearEncoder, pb: PairBatch, c: Critic, tau: float
) -> float:
    """Half of (row-wise + column-wise) cross-entropy against the diagonal."""
    out = _clip_inbatch_var(ag.Var(pack_params(f.W, g.W)), f, g, pb, c, tau)
    return float(out.value)


def symmetric_clip_inbatch_grad(
    f: LinearEncoder, g: LinearEncoder, pb: PairBatch, c: Critic, tau: float
):
    """(value, dloss/dWf, dloss/dWg) via the tape."""

    def fn(flat: ag.Var) -> ag.Var:
        return _clip_inbatch_var(flat, f, g, pb, c, tau)

    value, grad = ag.loss_and_grad(fn, pack_params(f.W, g.W))
    nf = f.W.size
    return value, grad[:nf].reshape(f.W.shape), grad[nf:].reshape(g.W.shape)


def clip_inbatch_value_and_grad_fast(
    Wf: np.ndarray, Wg: np.ndarray, xs: np.ndarray, ys: np.ndarray, tau: float
):
    """Hand-vectorized gradient of the symmetric in-batch loss.

    Cosine critic and normalize heads only (the training configuration);
    pinned against the tape version in the test suite. Returns
    (value, dWf, dWg).
    """
    B = xs.shape[0]
    V1 = xs @ Wf.T
    V2 = ys @ Wg.T
    n1 = np.linalg.norm(V1, axis=1, keepdims=True)
    n2 = np.linalg.norm(V2, axis=1, keepdims=True)
    Z1 = V1 / n1
    Z2 = V2 / n2
    S = (Z1 @ Z2.T) / tau
    m_r = S.max(axis=1, keepdims=True)
    e_r = np.exp(S - m_r)
    lse_r = (m_r + np.log(e_r.sum(axis=1, keepdims=True)))[:, 0]
    m_c = S.max(axis=0, keepdims=True)
    e_c = np.exp(S - m_c)
    lse_c = (m_c + np.log(e_c.sum(axis=0, keepdims=True)))[0, :]
    d = np.diagonal(S)
    value = 0.5 * float(np.mean(lse_r - d) + np.mean(lse_c - d))
    P = e_r / e_r.sum(axis=1, keepdims=True)
    Q = e_c / e_c.sum(axis=0, keepdims=True)
    dS = (P + Q - 2.0 * np.eye(B)) / (2.0 * B * tau)
    dZ1 = dS @ Z2
    dZ2 = dS.T @ Z1
    dV1 = (dZ1 - Z1 * np.sum(dZ1 * Z1, axis=1, keepdims=True)) / n1
    dV2 = (dZ2 - Z2 * np.sum(dZ2 * Z2, axis=1, keepdims=True)) / n2
    return value, dV1.T @ xs, dV2.T @ ys
