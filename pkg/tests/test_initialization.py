import numpy as np
import pytest

from subsearch import (InitConfig, RngStream, build_vocabulary,
                       conditioned_init, cosine_similarity, generate_scene,
                       random_token_init)
from subsearch.objectives import SurrogateScene, ToyEncoder


@pytest.fixture(scope="module")
def vocab():
    return build_vocabulary(21, 300, 64, "random-gaussian", entry_std=0.05)


def test_uniform_limit_gives_vocab_mean(vocab):
    # enormous temperature flattens the softmax to uniform weights
    scene = generate_scene(1, vocab, 2, 0.0)
    e0 = conditioned_init(scene, vocab, InitConfig(temperature=1e15), 7)
    assert np.allclose(e0, vocab.mean, atol=1e-12)


def test_argmax_limit(vocab):
    scene = generate_scene(1, vocab, 3, 0.05)
    enc = ToyEncoder(scene.decoder, vocab.dim, 7)
    prompts = enc.prompt_features(vocab.embeddings, "photo-of")
    expected = np.mean([vocab.embeddings[int(np.argmax(prompts @ enc.image_features(y)[0]))]
                        for y in scene.images], axis=0)
    e0 = conditioned_init(scene, vocab, InitConfig(temperature=1e-12), 7)
    assert np.allclose(e0, expected, atol=1e-9)


def test_token_recovery(vocab):
    # scene rendered noiselessly from a single token's embedding
    for seed in range(5):
        scene = generate_scene(seed, vocab, 3, 0.0, "token-mixture", mixture_size=1)
        token = scene.mixture_indices[0][0]
        e0 = conditioned_init(scene, vocab, InitConfig(temperature=0.05), 7)
        assert cosine_similarity(e0, vocab.embeddings[token]) >= 0.9


def test_coordinates_stay_in_column_range(vocab):
    scene = generate_scene(4, vocab, 4, 0.1)
    e0 = conditioned_init(scene, vocab, InitConfig(temperature=0.5), 7)
    lo = vocab.embeddings.min(axis=0)
    hi = vocab.embeddings.max(axis=0)
    assert np.all(e0 >= lo - 1e-12) and np.all(e0 <= hi + 1e-12)


def test_permutation_invariant_over_images(vocab):
    scene = generate_scene(4, vocab, 5, 0.1)
    shuffled = SurrogateScene(e_star=scene.e_star, decoder=scene.decoder,
                              images=scene.images[::-1].copy(), eta=scene.eta,
                              tokens=scene.tokens,
                              mixture_indices=scene.mixture_indices)
    cfg = InitConfig(temperature=0.2)
    a = conditioned_init(scene, vocab, cfg, 7)
    b = conditioned_init(shuffled, vocab, cfg, 7)
    assert np.allclose(a, b, atol=1e-12)


def test_empty_image_set_rejected(vocab):
    scene = generate_scene(4, vocab, 1, 0.0)
    scene.images = scene.images[:0]
    with pytest.raises(ValueError):
        conditioned_init(scene, vocab, InitConfig(), 7)


def test_wrong_mode_rejected(vocab):
    scene = generate_scene(4, vocab, 1, 0.0)
    with pytest.raises(ValueError):
        conditioned_init(scene, vocab, InitConfig(mode="random-token"), 7)


class TestRandomToken:
    def test_single_row_table(self):
        vocab = build_vocabulary(0, 2, 4, "random-gaussian")
        e0 = random_token_init(vocab, 3)
        assert any(np.array_equal(e0, row) for row in vocab.embeddings)

    def test_deterministic(self, vocab):
        assert np.array_equal(random_token_init(vocab, 5),
                              random_token_init(vocab, 5))

    def test_uniform_frequencies(self):
        vocab = build_vocabulary(1, 10, 4, "random-gaussian")
        counts = np.zeros(10)
        for seed in range(10**4):
            row = random_token_init(vocab, seed)
            idx = int(np.argmax(np.all(vocab.embeddings == row, axis=1)))
            counts[idx] += 1
        freq = counts / 10**4
        sigma = np.sqrt(0.1 * 0.9 / 10**4)
        assert np.all(np.abs(freq - 0.1) <= 3 * sigma + 1e-9)

    def test_multi_token_rows(self, vocab):
        rows = random_token_init(vocab, 9, tokens=3)
        assert rows.shape == (3, vocab.dim)
