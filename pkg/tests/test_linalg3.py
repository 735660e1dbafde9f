import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from biparity.linalg3 import (
    DegenerateInputError,
    cross,
    jacobi_eigh3,
    orthonormal_complement,
    plane_projector,
    svd3,
)
from biparity.scan import fibonacci_sphere

from conftest import random_unit


def test_svd_diagonal():
    s = svd3(np.diag([0.8560254, -0.8560254, 0.75]))
    np.testing.assert_allclose(s.sigma, [0.8560254, 0.8560254, 0.75], atol=1e-15)
    # tie between the first two: stable ordering keeps x ahead of y
    np.testing.assert_allclose(s.v1, [1, 0, 0], atol=1e-15)


def test_svd_rank_one_correlation():
    c = np.zeros((3, 3))
    c[2, 0] = c[2, 2] = 1 / math.sqrt(5)
    s = svd3(c)
    np.testing.assert_allclose(s.sigma, [math.sqrt(2 / 5), 0, 0], atol=1e-15)
    np.testing.assert_allclose(s.v1, [1 / math.sqrt(2), 0, 1 / math.sqrt(2)], atol=1e-15)


def test_svd_zero_matrix():
    s = svd3(np.zeros((3, 3)))
    np.testing.assert_array_equal(s.sigma, 0)
    np.testing.assert_allclose(s.v @ s.v.T, np.eye(3), atol=1e-15)


def test_svd_reconstruction_random(rng):
    m = rng.uniform(-1, 1, size=(1000, 3, 3))
    s = svd3(m)
    np.testing.assert_allclose(s.reconstruct(), m, atol=1e-12, rtol=0)
    np.testing.assert_allclose(s.v @ np.swapaxes(s.v, -1, -2), np.broadcast_to(np.eye(3), m.shape), atol=1e-12)
    np.testing.assert_allclose(s.u @ np.swapaxes(s.u, -1, -2), np.broadcast_to(np.eye(3), m.shape), atol=1e-12)
    assert np.all(np.diff(s.sigma, axis=-1) <= 0)
    assert np.all(s.sigma >= 0)


def test_svd_matches_lapack(rng):
    m = rng.uniform(-1, 1, size=(500, 3, 3))
    mine = svd3(m)
    _, ref_sigma, ref_vt = np.linalg.svd(m)
    np.testing.assert_allclose(mine.sigma, ref_sigma, atol=1e-12)
    gap = np.minimum(ref_sigma[:, 0] - ref_sigma[:, 1], 1.0)
    overlap = np.abs(np.einsum("bi,bi->b", mine.v1, ref_vt[:, 0]))
    # leading vector agrees up to sign wherever the top singular value is isolated
    ok = gap > 1e-6
    np.testing.assert_allclose(overlap[ok], 1.0, atol=1e-10)


def test_svd_sign_convention(rng):
    s = svd3(rng.uniform(-1, 1, size=(200, 3, 3)))
    first = s.v[..., 0]
    assert np.all(first > 0) or np.all(np.abs(first[first <= 0]) <= 1e-12)


def test_sigma1_is_max_over_sphere(rng):
    pts = fibonacci_sphere(1_000_000)
    for _ in range(20):
        m = rng.uniform(-1, 1, size=(3, 3))
        grid_max = np.sqrt(np.max(np.sum((pts @ m.T) ** 2, axis=1)))
        s1 = svd3(m).sigma[0]
        assert grid_max <= s1 + 1e-12
        assert (s1 - grid_max) / s1 < 1e-5


def test_batch_independence(rng):
    m = rng.uniform(-1, 1, size=(64, 3, 3))
    whole = svd3(m)
    for i in (0, 17, 63):
        single = svd3(m[i])
        np.testing.assert_array_equal(single.sigma, whole.sigma[i])
        np.testing.assert_array_equal(single.v, whole.v[i])


def test_jacobi_eigh(rng):
    a = rng.normal(size=(100, 3, 3))
    a = a + np.swapaxes(a, -1, -2)
    w, v = jacobi_eigh3(a)
    np.testing.assert_allclose(np.sort(w, axis=-1), np.linalg.eigvalsh(a), atol=1e-12)
    np.testing.assert_allclose(a @ v, v * w[..., None, :], atol=1e-12)


def test_complement_examples():
    p1, p2 = orthonormal_complement([0, 0, 1])
    np.testing.assert_allclose(p1, [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(p2, [0, 1, 0], atol=1e-15)
    p1, p2 = orthonormal_complement([1, 0, 0])
    assert abs(p1 @ [1, 0, 0]) < 1e-15 and abs(p2 @ [1, 0, 0]) < 1e-15
    with pytest.raises(DegenerateInputError):
        orthonormal_complement([1e-14, 0, 0])


def test_complement_random(rng):
    for v in rng.normal(size=(1000, 3)):
        p1, p2 = orthonormal_complement(v)
        basis = np.array([p1, p2, v / np.linalg.norm(v)])
        np.testing.assert_allclose(basis @ basis.T, np.eye(3), atol=1e-12)
        # right-handed: p1 x p2 points along v
        assert np.dot(np.cross(p1, p2), v) > 0


def test_complement_is_deterministic():
    v = np.array([0.3, -0.4, 0.5])
    a = orthonormal_complement(v)
    b = orthonormal_complement(v.copy())
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_plane_projector():
    p = plane_projector([1, 0, 0], [0, 1, 0])
    np.testing.assert_allclose(p, np.diag([1, 1, 0]))
    with pytest.raises(ValueError):
        plane_projector([1, 0, 0], [1, 0, 0])
    with pytest.raises(ValueError):
        plane_projector([1, 0, 0], [0, 2, 0])


def test_plane_projector_properties(rng):
    for v in random_unit(rng, 100):
        p = plane_projector(*orthonormal_complement(v))
        np.testing.assert_allclose(p @ p, p, atol=1e-12)
        np.testing.assert_allclose(p, p.T, atol=1e-15)
        np.testing.assert_allclose(p @ v, 0, atol=1e-12)
        assert np.trace(p) == pytest.approx(2.0)


def test_cross_examples():
    np.testing.assert_array_equal(cross([1, 0, 0], [0, 1, 0]), [0, 0, 1])
    np.testing.assert_array_equal(cross([1, 2, 3], [1, 2, 3]), [0, 0, 0])


vec = arrays(np.float64, 3, elements=st.floats(-10, 10))


@settings(max_examples=300, deadline=None)
@given(vec, vec)
def test_cross_matches_numpy(a, b):
    np.testing.assert_allclose(cross(a, b), np.cross(a, b), atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(-1, 1)))
def test_svd_property(m):
    s = svd3(m)
    np.testing.assert_allclose(s.reconstruct(), m, atol=1e-12)
    np.testing.assert_allclose(s.sigma, np.linalg.svd(m, compute_uv=False), atol=1e-12)
