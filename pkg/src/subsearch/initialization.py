"""Conditioned initialization of the pseudo-token embedding, and the
random-token baseline.

The conditioned form softmax-weights every vocabulary row by the similarity
between image features and that token's prompt features, then averages over
the image set, so e0 is always a mean of convex combinations of vocabulary
rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import RngStream, softmax, stream_id
from .objectives import SurrogateScene, ToyEncoder, VocabularyTable


@dataclass
class InitConfig:
    template: str = "photo-of"
    temperature: float = 1.0
    mode: str = "conditioned"  # conditioned | random-token | given-vector

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("InitConfig: temperature must be positive")


def conditioned_init(scene: SurrogateScene, vocab: VocabularyTable,
                     cfg: InitConfig, encoder_seed: int) -> np.ndarray:
    """Similarity-weighted vocabulary average, one row per token slot.

    Returns shape (D,) for single-token scenes, (k, D) otherwise.
    """
    if cfg.mode != "conditioned":
        raise ValueError("conditioned_init: cfg.mode must be 'conditioned'")
    if scene.images.shape[0] == 0:
        raise ValueError("conditioned_init: empty image set")
    enc = ToyEncoder(scene.decoder, vocab.dim, encoder_seed)
    prompts = enc.prompt_features(vocab.embeddings, cfg.template)  # (V, L)
    e0 = np.zeros((scene.tokens, vocab.dim))
    for y in scene.images:
        feats = enc.image_features(y)                 # (k, L)
        sims = feats @ prompts.T                      # (k, V)
        weights = softmax(sims, cfg.temperature)      # rows sum to 1
        e0 += weights @ vocab.embeddings
    e0 /= scene.images.shape[0]
    return e0[0] if scene.tokens == 1 else e0


def random_token_init(vocab: VocabularyTable, seed: int,
                      tokens: int = 1) -> np.ndarray:
    """Uniformly chosen vocabulary row(s); the "w/o init" baseline."""
    rng = RngStream(seed, stream_id("random-token-init"))
    idx = rng.integers(0, vocab.size, tokens)
    rows = vocab.embeddings[np.asarray(idx)]
    return rows[0].copy() if tokens == 1 else rows.copy()
