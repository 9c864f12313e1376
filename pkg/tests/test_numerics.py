import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subsearch import (RngStream, cosine_similarity, eig_sym, normal_sample,
                       softmax)


class TestRngStream:
    def test_reproducible(self):
        a = normal_sample(RngStream(1, 0), 1000)
        b = normal_sample(RngStream(1, 0), 1000)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = normal_sample(RngStream(1, 0), 1000)
        b = normal_sample(RngStream(1, 1), 1000)
        assert not np.array_equal(a, b)

    def test_monte_carlo_moments(self):
        x = normal_sample(RngStream(1, 0), 10**6)
        assert abs(x.mean()) < 0.004
        assert abs(x.std() - 1.0) < 0.005

    def test_empty_request_rejected(self):
        with pytest.raises(ValueError):
            normal_sample(RngStream(1, 0), 0)

    def test_substream_independent(self):
        rng = RngStream(3, 5)
        a = rng.substream("noise").normal(100)
        b = rng.substream("scene").normal(100)
        assert not np.array_equal(a, b)
        # substream derivation itself is deterministic
        c = RngStream(3, 5).substream("noise").normal(100)
        assert np.array_equal(a, c)


class TestSoftmax:
    def test_symmetry(self):
        assert np.allclose(softmax(np.array([0.0, 0.0])), [0.5, 0.5])

    def test_analytic(self):
        out = softmax(np.array([np.log(2.0), 0.0]))
        assert np.allclose(out, [2 / 3, 1 / 3], atol=1e-14)

    def test_no_overflow(self):
        out = softmax(np.array([1000.0, 0.0]))
        assert np.all(np.isfinite(out))
        assert out[0] > 1 - 1e-12

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            softmax(np.array([np.inf, 0.0]))

    def test_rejects_bad_temperature(self):
        with pytest.raises(ValueError):
            softmax(np.array([1.0, 2.0]), temperature=0.0)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=50),
           st.floats(0.01, 100))
    def test_sums_to_one(self, scores, temperature):
        out = softmax(np.array(scores), temperature)
        assert np.all(out >= 0)
        assert abs(out.sum() - 1.0) <= 1e-12


class TestCosineSimilarity:
    def test_identity(self):
        v = np.array([1.0, 2.0, -3.0])
        assert cosine_similarity(v, v) == pytest.approx(1.0)

    def test_antipodal(self):
        v = np.array([1.0, 2.0, -3.0])
        assert cosine_similarity(v, -v) == pytest.approx(-1.0)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])


class TestEigSym:
    def test_identity_spectrum(self):
        res = eig_sym(np.eye(3))
        assert np.allclose(res.eigenvalues, [1, 1, 1])

    def test_diagonal(self):
        res = eig_sym(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(res.eigenvalues, [3, 2, 1])
        # axis-aligned eigenvectors, sign fixed positive
        assert np.allclose(np.abs(res.eigenvectors),
                           np.eye(3)[:, [0, 2, 1]])
        assert np.all(res.eigenvectors.max(axis=0) > 0)

    def test_round_trip_8x8(self):
        rng = RngStream(4)
        A = rng.normal(8, 8)
        M = (A + A.T) / 2
        res = eig_sym(M)
        rebuilt = res.eigenvectors @ np.diag(res.eigenvalues) @ res.eigenvectors.T
        assert np.max(np.abs(rebuilt - M)) <= 1e-9 * np.max(np.abs(M))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 64), st.integers(0, 10**6))
    def test_round_trip_property(self, n, seed):
        A = RngStream(seed).normal(n, n)
        M = (A + A.T) / 2
        res = eig_sym(M)
        B = res.eigenvectors
        assert np.max(np.abs(B.T @ B - np.eye(n))) <= 1e-10
        rebuilt = B @ np.diag(res.eigenvalues) @ B.T
        scale = max(np.max(np.abs(M)), 1.0)
        assert np.max(np.abs(rebuilt - M)) <= 1e-9 * scale
        assert np.all(np.diff(res.eigenvalues) <= 1e-12)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            eig_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            eig_sym(np.array([[np.nan, 0.0], [0.0, 1.0]]))
