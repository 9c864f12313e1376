"""Projection matrices mapping the low-dimensional search increment into
embedding space, and the composition e = e0 + W_p Q.

Construction kinds: PCA over the vocabulary, prior-normalized random
entries whose scale matches the word-embedding distribution, and the two
plain random-normal baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .numerics import RngStream, eig_sym, stream_id
from .objectives import VocabularyTable

KINDS = ("pca", "prior-norm", "random-n01", "random-n01-over-d", "identity")


@dataclass
class Projection:
    W: np.ndarray               # (D, d)
    kind: str
    provenance: str = ""
    d: int = field(init=False)
    D: int = field(init=False)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if not np.all(np.isfinite(W)):
            raise ValueError("Projection: entries must be finite")
        if W.shape[1] > W.shape[0]:
            raise ValueError("Projection: need d <= D")
        if self.kind not in KINDS:
            raise ConfigError(f"Projection: unknown kind {self.kind!r}")
        if self.kind in ("pca", "identity"):
            gram = W.T @ W
            if np.max(np.abs(gram - np.eye(W.shape[1]))) > 1e-9:
                raise ValueError(f"Projection: {self.kind} columns must be orthonormal")
        self.W = W
        self.D, self.d = W.shape

    def to_json(self) -> dict:
        return {"W": self.W.tolist(), "kind": self.kind,
                "provenance": self.provenance}

    @classmethod
    def from_json(cls, obj: dict) -> "Projection":
        return cls(W=np.asarray(obj["W"], dtype=float), kind=obj["kind"],
                   provenance=obj.get("provenance", ""))


@dataclass
class PriorNormSpec:
    """Inputs of the prior-normalization scale: sigma_p = lam * sigma_e / (sqrt(d) * sigma_q)."""

    lam: float
    sigma_e: float
    sigma_q: float
    d: int

    def __post_init__(self):
        if self.lam <= 0 or self.sigma_e <= 0 or self.sigma_q <= 0 or self.d < 1:
            raise ValueError("PriorNormSpec: all inputs must be positive")


def sigma_p(spec: PriorNormSpec) -> float:
    value = spec.lam * spec.sigma_e / (math.sqrt(spec.d) * spec.sigma_q)
    if not math.isfinite(value) or value <= 0:
        raise ValueError("sigma_p: result must be positive and finite")
    return value


def build_prior_norm_projection(spec: PriorNormSpec, D: int, seed: int) -> Projection:
    """Entries i.i.d. N(0, sigma_p^2): projected increments with Q-entry std
    sigma_q then match the word-embedding entry std lam * sigma_e."""
    rng = RngStream(seed, stream_id("prior-norm-proj"))
    W = rng.normal(D, spec.d) * sigma_p(spec)
    return Projection(W=W, kind="prior-norm",
                      provenance=f"seed={seed} lam={spec.lam} sigma_e={spec.sigma_e} "
                                 f"sigma_q={spec.sigma_q}")


def build_pca_projection(vocab: VocabularyTable, d: int) -> Projection:
    """Top-d eigenvectors of the mean-centered vocabulary covariance."""
    max_rank = min(vocab.size - 1, vocab.dim)
    if d > max_rank:
        raise ConfigError(f"build_pca_projection: d={d} exceeds rank bound {max_rank}")
    centered = vocab.embeddings - vocab.mean
    cov = centered.T @ centered / (vocab.size - 1)
    eig = eig_sym(cov)
    W = eig.eigenvectors[:, :d]
    return Projection(W=W, kind="pca", provenance=f"vocab V={vocab.size} D={vocab.dim}")


def build_random_projection(D: int, d: int, variant: str, seed: int) -> Projection:
    """Plain random-normal baselines N(0,1) and N(0, 1/d)."""
    rng = RngStream(seed, stream_id("random-proj"))
    if variant == "n01":
        W = rng.normal(D, d)
        kind = "random-n01"
    elif variant == "n01-over-d":
        W = rng.normal(D, d) / math.sqrt(d)
        kind = "random-n01-over-d"
    else:
        raise ConfigError(f"build_random_projection: unknown variant {variant!r}")
    return Projection(W=W, kind=kind, provenance=f"seed={seed}")


def identity_projection(D: int) -> Projection:
    """Direct search in the ambient space (no dimensionality reduction)."""
    return Projection(W=np.eye(D), kind="identity", provenance="identity")


def compose(e0: np.ndarray, proj: Projection, Q: np.ndarray) -> np.ndarray:
    """Full embedding e = e0 + W_p Q; multi-token inputs of shape (k, D) and
    (k, d) concatenate token embeddings in order. Inputs are never mutated."""
    e0 = np.asarray(e0, dtype=float)
    Q = np.asarray(Q, dtype=float)
    single = e0.ndim == 1
    e0m = np.atleast_2d(e0)
    Qm = np.atleast_2d(Q)
    if e0m.shape[0] != Qm.shape[0]:
        raise ValueError("compose: token counts of e0 and Q differ")
    if e0m.shape[1] != proj.D or Qm.shape[1] != proj.d:
        raise ValueError("compose: dimension mismatch with projection")
    e = e0m + Qm @ proj.W.T
    return e[0] if single else e.reshape(-1)
