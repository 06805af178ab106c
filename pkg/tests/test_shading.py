"""Cosine term and shading composition."""

import numpy as np
import pytest

from dskit import DirectionalLight, compose_direct_shading, ndotl


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


class TestNdotL:
    def test_aligned(self):
        n = np.broadcast_to(unit([0.3, -0.4, -0.6]), (4, 4, 3))
        c = ndotl(n, DirectionalLight(unit([0.3, -0.4, -0.6])))
        np.testing.assert_allclose(c, 1.0, atol=1e-12)

    def test_perpendicular(self):
        n = np.broadcast_to([0.0, 0.0, -1.0], (4, 4, 3))
        c = ndotl(n, DirectionalLight([1.0, 0.0, 0.0]))
        np.testing.assert_allclose(c, 0.0, atol=1e-12)

    def test_45_degrees(self):
        n = np.broadcast_to([0.0, 0.0, -1.0], (2, 2, 3))
        c = ndotl(n, DirectionalLight(unit([1.0, 0.0, -1.0])))
        np.testing.assert_allclose(c, np.sqrt(2) / 2, atol=1e-12)

    def test_backfacing_clamped_to_zero(self):
        n = np.broadcast_to([0.0, 0.0, -1.0], (2, 2, 3))
        c = ndotl(n, DirectionalLight([0.0, 0.0, 1.0]))
        np.testing.assert_array_equal(c, np.zeros((2, 2)))

    def test_range(self):
        rng = np.random.default_rng(0)
        n = rng.normal(size=(32, 32, 3))
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        c = ndotl(n, DirectionalLight(unit(rng.normal(size=3))))
        assert c.min() >= 0.0 and c.max() <= 1.0 + 1e-12


class TestCompose:
    def test_unit_transmittance_is_identity(self):
        c = np.random.default_rng(1).uniform(0, 1, (8, 8))
        np.testing.assert_array_equal(compose_direct_shading(c, np.ones_like(c)), c)

    def test_zero_cosine_annihilates(self):
        t = np.random.default_rng(2).uniform(0, 1, (8, 8))
        np.testing.assert_array_equal(compose_direct_shading(np.zeros_like(t), t),
                                      np.zeros_like(t))

    def test_product(self):
        s = compose_direct_shading(np.array([[0.8]]), np.array([[0.5]]))
        np.testing.assert_allclose(s, [[0.4]], atol=1e-15)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            compose_direct_shading(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_bounds_on_many_random_pairs(self):
        rng = np.random.default_rng(3)
        c = rng.uniform(0, 1, 10**6)
        t = rng.uniform(0, 1, 10**6)
        s = compose_direct_shading(c, t)
        assert s.min() >= 0.0 and s.max() <= 1.0
        assert np.all(s <= np.minimum(c, t) + 1e-15)
        np.testing.assert_array_equal(s, c * t)

    def test_monotone_in_both_inputs(self):
        rng = np.random.default_rng(4)
        c = rng.uniform(0, 1, (16, 16))
        t = rng.uniform(0, 1, (16, 16))
        s = compose_direct_shading(c, t)
        s_up_c = compose_direct_shading(np.minimum(c + 0.1, 1.0), t)
        s_up_t = compose_direct_shading(c, np.minimum(t + 0.1, 1.0))
        assert np.all(s_up_c >= s)
        assert np.all(s_up_t >= s)
