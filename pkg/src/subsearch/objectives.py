"""Black-box fitness contract plus the concrete objectives used by the
pipeline: a desk-scale surrogate of the denoising reconstruction loss with a
known hidden concept, standard benchmark functions, and the toy feature
encoder backing conditioned initialization.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EvaluationError
from .numerics import RngStream, stream_id

T_RANGE = (0.1, 0.9)  # diffusion timestep drawn uniformly in this range


# ---------------------------------------------------------------------------
# vocabulary


@dataclass
class VocabularyTable:
    """V x D token-embedding table with summary statistics.

    ``sigma_e`` is the standard deviation over all V*D entries after
    subtracting the per-dimension mean (population normalization).
    """

    tokens: list
    embeddings: np.ndarray
    mean: np.ndarray = field(init=False)
    sigma_e: float = field(init=False)

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=float)
        if emb.ndim != 2 or emb.shape[0] < 2 or emb.shape[1] < 2:
            raise ValueError("VocabularyTable: need V >= 2 and D >= 2")
        if not np.all(np.isfinite(emb)):
            raise ValueError("VocabularyTable: embeddings must be finite")
        self.embeddings = emb
        self.mean = emb.mean(axis=0)
        self.sigma_e = float(np.std(emb - self.mean))
        if self.sigma_e <= 0:
            raise ValueError("VocabularyTable: degenerate constant table")

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def to_json(self) -> dict:
        return {"tokens": list(self.tokens),
                "embeddings": self.embeddings.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "VocabularyTable":
        return cls(tokens=list(obj["tokens"]),
                   embeddings=np.asarray(obj["embeddings"], dtype=float))


def build_vocabulary(seed: int, V: int, D: int, structure: str = "random-gaussian",
                     entry_std: float = 0.05, clusters: int = 8,
                     center_std: float = 1.0, jitter: float = 0.02) -> VocabularyTable:
    """Synthetic token table standing in for a text encoder's embedding matrix.

    ``clustered`` places tokens around ``clusters`` random centers (round
    robin) so PCA has nontrivial principal directions and nearby tokens are
    semantically related in the toy sense.
    """
    if V < 2 or D < 2:
        raise ValueError("build_vocabulary: need V >= 2 and D >= 2")
    rng = RngStream(seed, stream_id("vocab"))
    if structure == "random-gaussian":
        emb = rng.normal(V, D) * entry_std
    elif structure == "clustered":
        centers = rng.normal(clusters, D) * center_std
        assignment = np.arange(V) % clusters
        emb = centers[assignment] + rng.normal(V, D) * jitter
    else:
        raise ConfigError(f"build_vocabulary: unknown structure {structure!r}")
    tokens = [f"tok{i:04d}" for i in range(V)]
    return VocabularyTable(tokens=tokens, embeddings=emb)


def cluster_of(vocab: VocabularyTable, index: int, clusters: int) -> int:
    """Cluster id of a token under the round-robin assignment used above."""
    return index % clusters


# ---------------------------------------------------------------------------
# surrogate scene


@dataclass(frozen=True)
class NoiseKey:
    """Seed pair that fully determines (t, noise draws) of one evaluation."""

    t_seed: int
    eps_seed: int


@dataclass
class SurrogateScene:
    """Hidden concept plus its rendered observations.

    ``decoder`` is a fixed linear renderer with orthonormal columns mapping
    the (possibly multi-token) embedding of length ``tokens * dim`` to image
    space; ``images[i] = decoder @ e_star + noise``.
    """

    e_star: np.ndarray          # flat, length tokens * dim
    decoder: np.ndarray         # (img_dim, tokens * dim), orthonormal columns
    images: np.ndarray          # (N, img_dim)
    eta: float
    tokens: int = 1
    mixture_indices: list = field(default_factory=list)  # per-token source rows

    @property
    def dim(self) -> int:
        return self.e_star.size // self.tokens

    @property
    def img_dim(self) -> int:
        return self.decoder.shape[0]

    @staticmethod
    def alpha_bar(t: float) -> float:
        """Linear schedule, strictly inside (0, 1) for t in (0, 1)."""
        return 1.0 - t

    def to_json(self) -> dict:
        return {
            "e_star": self.e_star.tolist(),
            "decoder": self.decoder.tolist(),
            "images": self.images.tolist(),
            "eta": self.eta,
            "tokens": self.tokens,
            "mixture_indices": [list(m) for m in self.mixture_indices],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SurrogateScene":
        return cls(
            e_star=np.asarray(obj["e_star"], dtype=float),
            decoder=np.asarray(obj["decoder"], dtype=float),
            images=np.asarray(obj["images"], dtype=float),
            eta=float(obj["eta"]),
            tokens=int(obj["tokens"]),
            mixture_indices=[list(m) for m in obj["mixture_indices"]],
        )


def _orthonormal(rng: RngStream, rows: int, cols: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(rows, cols))
    return q * np.sign(np.diag(r))  # deterministic sign fix


def generate_scene(seed: int, vocab: VocabularyTable, N: int, eta: float,
                   concept: str = "token-mixture", tokens: int = 1,
                   mixture_size: int = 3) -> SurrogateScene:
    """Draw a hidden concept and render N noisy observations of it.

    ``token-mixture`` picks, per token slot, an anchor row and its nearest
    vocabulary neighbours and blends them with Dirichlet weights, so the
    concept sits inside a semantically tight region of the table and the
    conditioned-initialization advantage is measurable.
    """
    if N < 1:
        raise ValueError("generate_scene: need N >= 1")
    if eta < 0:
        raise ValueError("generate_scene: eta must be >= 0")
    rng = RngStream(seed, stream_id("scene"))
    D = vocab.dim
    parts = []
    mixture_indices = []
    for _ in range(tokens):
        if concept == "random":
            parts.append(vocab.mean + rng.normal(D) * vocab.sigma_e)
            mixture_indices.append([])
        elif concept == "token-mixture":
            anchor = int(rng.integers(0, vocab.size))
            dist = np.linalg.norm(vocab.embeddings - vocab.embeddings[anchor], axis=1)
            near = np.argsort(dist, kind="stable")[:mixture_size]
            w = rng.dirichlet(np.ones(mixture_size))
            parts.append(w @ vocab.embeddings[near])
            mixture_indices.append([int(i) for i in near])
        else:
            raise ConfigError(f"generate_scene: unknown concept {concept!r}")
    e_star = np.concatenate(parts)
    full = tokens * D
    decoder = _orthonormal(rng.substream("decoder"), full, full)
    clean = decoder @ e_star
    noise = rng.substream("image-noise").normal(N, full) * eta
    return SurrogateScene(e_star=e_star, decoder=decoder, images=clean + noise,
                          eta=eta, tokens=tokens, mixture_indices=mixture_indices)


def _draw_t(key: NoiseKey) -> float:
    u = RngStream(key.t_seed, stream_id("t")).uniform()
    return T_RANGE[0] + (T_RANGE[1] - T_RANGE[0]) * float(u)


def surrogate_loss(e: np.ndarray, scene: SurrogateScene, key: NoiseKey) -> float:
    """Denoiser-residual loss under one (t, noise) draw, averaged over images.

    The toy denoiser is eps_hat(z, t, e) = (z - sqrt(ab) * M e) / sqrt(1 - ab),
    which makes the loss algebraically equal to
    (ab / (1 - ab)) * mean_i ||Y_i - M e||^2.
    """
    e = np.asarray(e, dtype=float)
    if e.size != scene.e_star.size:
        raise ValueError("surrogate_loss: embedding dimension mismatch")
    t = _draw_t(key)
    ab = scene.alpha_bar(t)
    eps = RngStream(key.eps_seed, stream_id("eps")).normal(scene.img_dim)
    z = np.sqrt(ab) * scene.images + np.sqrt(1.0 - ab) * eps
    pred = scene.decoder @ e
    eps_hat = (z - np.sqrt(ab) * pred) / np.sqrt(1.0 - ab)
    return float(np.mean(np.sum((eps_hat - eps) ** 2, axis=1)))


# ---------------------------------------------------------------------------
# objective contract


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("SUBSEARCH_THREADS", "1")))
    except ValueError:
        return 1


class Objective:
    """Black-box fitness: (embedding, noise key) -> scalar loss.

    Deterministic given inputs; ``batch_evaluate`` equals element-wise
    ``evaluate`` exactly.
    """

    dim: int

    def evaluate(self, e: np.ndarray, key: NoiseKey) -> float:
        raise NotImplementedError

    def batch_evaluate(self, embeddings, key: NoiseKey):
        cap = _thread_cap()
        if cap > 1 and len(embeddings) > 1:
            with ThreadPoolExecutor(max_workers=cap) as pool:
                return list(pool.map(lambda e: self.evaluate(e, key), embeddings))
        return [self.evaluate(e, key) for e in embeddings]

    def known_optimum(self):
        """Optimum embedding when the objective exposes one, else None."""
        return None

    def close(self):
        pass


class SurrogateObjective(Objective):
    """Batched surrogate reconstruction loss on a scene.

    Each evaluation averages ``eval_batch`` (image, noise-draw) pairs under
    the single timestep t fixed by the noise key, mirroring the evaluation
    batch the optimizer uses per candidate.
    """

    def __init__(self, scene: SurrogateScene, eval_batch: int = 20):
        if eval_batch < 1:
            raise ValueError("SurrogateObjective: eval_batch must be >= 1")
        self.scene = scene
        self.eval_batch = eval_batch
        self.dim = scene.e_star.size
        self._cache_key = None
        self._cache = None

    def _key_data(self, key: NoiseKey):
        if self._cache_key != key:
            t = _draw_t(key)
            rng = RngStream(key.eps_seed, stream_id("eps"))
            idx = rng.integers(0, self.scene.images.shape[0], self.eval_batch)
            eps = rng.normal(self.eval_batch, self.scene.img_dim)
            self._cache = (t, np.asarray(idx), eps)
            self._cache_key = key
        return self._cache

    def evaluate(self, e: np.ndarray, key: NoiseKey) -> float:
        e = np.asarray(e, dtype=float)
        if e.size != self.dim:
            raise ValueError("SurrogateObjective: embedding dimension mismatch")
        t, idx, eps = self._key_data(key)
        ab = self.scene.alpha_bar(t)
        y = self.scene.images[idx]
        z = np.sqrt(ab) * y + np.sqrt(1.0 - ab) * eps
        pred = self.scene.decoder @ e
        eps_hat = (z - np.sqrt(ab) * pred) / np.sqrt(1.0 - ab)
        return float(np.mean(np.sum((eps_hat - eps) ** 2, axis=1)))

    def closed_form(self, e: np.ndarray, key: NoiseKey) -> float:
        """Simplified algebraic form; must agree with evaluate()."""
        t, idx, _ = self._key_data(key)
        ab = self.scene.alpha_bar(t)
        resid = self.scene.images[idx] - self.scene.decoder @ np.asarray(e, dtype=float)
        return float(ab / (1.0 - ab) * np.mean(np.sum(resid ** 2, axis=1)))

    def known_optimum(self):
        return self.scene.e_star


class BenchmarkObjective(Objective):
    """Standard test function on the first d* coordinates after a fixed
    random orthonormal rotation of the ambient space; noise keys are ignored.
    """

    NAMES = ("sphere", "rosenbrock", "rastrigin")

    def __init__(self, name: str, intrinsic_dim: int, ambient_dim: int, seed: int):
        if name not in self.NAMES:
            raise ConfigError(f"benchmark_objective: unknown name {name!r}")
        if not 1 <= intrinsic_dim <= ambient_dim:
            raise ValueError("benchmark_objective: need 1 <= d* <= D")
        self.name = name
        self.intrinsic_dim = intrinsic_dim
        self.dim = ambient_dim
        self.rotation = _orthonormal(RngStream(seed, stream_id("bench-rot")),
                                     ambient_dim, ambient_dim).T
        target = np.zeros(ambient_dim)
        if name == "rosenbrock":
            target[:intrinsic_dim] = 1.0
        self._x_opt = self.rotation.T @ target

    def evaluate(self, e: np.ndarray, key: NoiseKey) -> float:
        e = np.asarray(e, dtype=float)
        if e.size != self.dim:
            raise ValueError("BenchmarkObjective: dimension mismatch")
        v = (self.rotation @ e)[: self.intrinsic_dim]
        if self.name == "sphere":
            return float(np.sum(v ** 2))
        if self.name == "rosenbrock":
            return float(np.sum(100.0 * (v[1:] - v[:-1] ** 2) ** 2
                                + (1.0 - v[:-1]) ** 2))
        return float(10.0 * v.size
                     + np.sum(v ** 2 - 10.0 * np.cos(2.0 * np.pi * v)))

    def known_optimum(self):
        return self._x_opt


def benchmark_objective(name: str, intrinsic_dim: int, ambient_dim: int,
                        seed: int) -> BenchmarkObjective:
    return BenchmarkObjective(name, intrinsic_dim, ambient_dim, seed)


# ---------------------------------------------------------------------------
# toy feature encoder (stand-in for a pretrained image/text encoder)

TEMPLATES = ("photo-of", "style-of")


class ToyEncoder:
    """Shared linear map into a small latent space, plus per-template offsets.

    The image path goes through the scene decoder's pseudo-inverse, so an
    image rendered from a token's embedding scores highest against that
    token's prompt.
    """

    def __init__(self, decoder: np.ndarray, token_dim: int, seed: int,
                 latent_dim: int = 32, template_scale: float = 0.2):
        rng = RngStream(seed, stream_id("encoder"))
        self.decoder = np.asarray(decoder, dtype=float)
        self.token_dim = token_dim
        self.latent_dim = latent_dim
        self.template_scale = template_scale
        self.A = rng.normal(latent_dim, token_dim)
        self.offsets = {}
        for name in TEMPLATES:
            u = rng.substream(f"template-{name}").normal(latent_dim)
            self.offsets[name] = u / np.linalg.norm(u)

    def prompt_features(self, embeddings: np.ndarray, template: str) -> np.ndarray:
        if template not in self.offsets:
            raise ConfigError(f"ToyEncoder: unknown template {template!r}")
        emb = np.atleast_2d(np.asarray(embeddings, dtype=float))
        if emb.shape[1] != self.token_dim:
            raise ValueError("ToyEncoder: prompt dimension mismatch")
        f = emb @ self.A.T
        f = f / np.linalg.norm(f, axis=1, keepdims=True)
        f = f + self.template_scale * self.offsets[template]
        return f / np.linalg.norm(f, axis=1, keepdims=True)

    def image_features(self, y: np.ndarray) -> np.ndarray:
        """Per-token-slot unit features of one rendered image, shape (k, L)."""
        y = np.asarray(y, dtype=float)
        if y.size != self.decoder.shape[0]:
            raise ValueError("ToyEncoder: image dimension mismatch")
        e_hat = (self.decoder.T @ y).reshape(-1, self.token_dim)
        f = e_hat @ self.A.T
        return f / np.linalg.norm(f, axis=1, keepdims=True)


def encode_prompt(vocab: VocabularyTable, token: int, template: str,
                  encoder_seed: int, decoder: np.ndarray | None = None) -> np.ndarray:
    """Unit feature vector of "template + token" under the toy encoder."""
    if decoder is None:
        decoder = np.eye(vocab.dim)
    enc = ToyEncoder(decoder, vocab.dim, encoder_seed)
    return enc.prompt_features(vocab.embeddings[token], template)[0]


def encode_image(scene: SurrogateScene, y: np.ndarray, encoder_seed: int) -> np.ndarray:
    """Unit feature vector(s) of one scene image; (L,) for single-token scenes."""
    enc = ToyEncoder(scene.decoder, scene.dim, encoder_seed)
    feats = enc.image_features(y)
    return feats[0] if scene.tokens == 1 else feats


def dump_fixture(obj, path: str):
    """Write a vocabulary/scene/projection fixture as plain-number JSON."""
    with open(path, "w") as fh:
        json.dump(obj.to_json(), fh)


def check_finite(values, context: str):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr))[0][0])
        raise EvaluationError(f"{context}: non-finite fitness at index {bad}")
