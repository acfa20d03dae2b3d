"""Linear encoders with normalize or tanh heads.

f_W(x) = normalize(W x) lands on S^{d-1}; f_W(x) = tanh(W x) lands in
[-1,1]^d. Both plain-array and tape-node paths are provided; the tape path
is what the loss gradients differentiate through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .errors import ZeroVector
from .manifold import normalize

HEADS = ("normalize", "tanh")


@dataclass(frozen=True)
class LinearEncoder:
    """Weight matrix W of shape (d, m) plus the head nonlinearity."""

    W: np.ndarray
    head: str

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        object.__setattr__(self, "W", W)
        if W.ndim != 2:
            raise ValueError("encoder weight must be a (d, m) matrix")
        if not np.all(np.isfinite(W)):
            raise ValueError("encoder weight must be finite")
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]


def init_encoder(rng: np.random.Generator, d: int, m: int, head: str) -> LinearEncoder:
    """Gaussian init with std 1/sqrt(m) keeps pre-head activations O(1)."""
    return LinearEncoder(W=rng.standard_normal((d, m)) / np.sqrt(m), head=head)


def encode(enc: LinearEncoder, x) -> np.ndarray:
    """Encode one m-vector to a point on the container."""
    x = np.asarray(x, dtype=float)
    v = enc.W @ x
    if enc.head == "tanh":
        return np.tanh(v)
    if np.linalg.norm(v) <= 1e-12:
        raise ZeroVector("input is in the kernel of W; normalize head undefined")
    return normalize(v)


def encode_batch(enc: LinearEncoder, X) -> np.ndarray:
    """Encode rows of X (n, m) to (n, d)."""
    X = np.asarray(X, dtype=float)
    V = X @ enc.W.T
    if enc.head == "tanh":
        return np.tanh(V)
    return normalize(V)


def encode_rows_var(W_var: ag.Var, X: np.ndarray, head: str) -> ag.Var:
    """Tape-path batch encoding: rows of X through W_var and the head."""
    V = ag.transpose(ag.matmul(W_var, np.asarray(X, dtype=float).T))
    if head == "tanh":
        return ag.tanh_(V)
    return ag.normalize_rows(V)
