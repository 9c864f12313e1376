"""Deterministic numeric primitives: seeded RNG streams, softmax, cosine
similarity, symmetric eigendecomposition.

Everything here is pure given its inputs; RNG state lives in explicit
``RngStream`` values so every stochastic component of the package can be
replayed exactly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


def stream_id(label: str) -> int:
    """Map a human-readable label to a 64-bit stream identifier."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """Counter-based (Philox) random stream keyed by (seed, stream).

    Identical (seed, stream) pairs replay identical draw sequences on any
    platform with IEEE-754 doubles; distinct stream ids are statistically
    independent.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(stream) & 0xFFFFFFFFFFFFFFFF
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def substream(self, label: str) -> "RngStream":
        """Fresh independent stream derived from this one by label."""
        mixed = hashlib.blake2b(
            f"{self.stream}/{label}".encode("utf-8"), digest_size=8
        ).digest()
        return RngStream(self.seed, int.from_bytes(mixed, "little"))

    def normal(self, *shape: int) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size)

    def dirichlet(self, alpha) -> np.ndarray:
        return self._gen.dirichlet(alpha)

    def raw64(self) -> int:
        """One raw 64-bit word, e.g. for deriving noise-key seeds."""
        return int(self._gen.integers(0, 2**63))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def normal_sample(rng: RngStream, n: int) -> np.ndarray:
    """n i.i.d. standard-normal draws, advancing rng deterministically."""
    if n < 1:
        raise ValueError("normal_sample: need n >= 1")
    return rng.normal(n)


def softmax(scores: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Numerically stable softmax along the last axis."""
    scores = np.asarray(scores, dtype=float)
    if temperature <= 0:
        raise ValueError("softmax: temperature must be positive")
    if not np.all(np.isfinite(scores)):
        raise ValueError("softmax: scores must be finite")
    z = scores / temperature
    z = z - np.max(z, axis=-1, keepdims=True)
    w = np.exp(z)
    return w / np.sum(w, axis=-1, keepdims=True)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine_similarity: zero-norm input")
    return float(np.dot(a, b) / (na * nb))


@dataclass
class SymEigResult:
    eigenvalues: np.ndarray  # sorted descending
    eigenvectors: np.ndarray  # columns, orthonormal


def eig_sym(M: np.ndarray) -> SymEigResult:
    """Full spectrum of a symmetric matrix, eigenvalues descending.

    Sign convention: the largest-magnitude component of each eigenvector is
    made positive, so repeated runs give identical output.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("eig_sym: matrix must be square")
    if not np.all(np.isfinite(M)):
        raise ValueError("eig_sym: matrix must be finite")
    scale = max(np.max(np.abs(M)), 1.0)
    if np.max(np.abs(M - M.T)) > 1e-10 * scale:
        raise ValueError("eig_sym: matrix is not symmetric")
    vals, vecs = np.linalg.eigh((M + M.T) / 2.0)
    order = np.argsort(vals, kind="stable")[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    # deterministic sign: largest-|component| of each column positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    return SymEigResult(eigenvalues=vals, eigenvectors=vecs)
