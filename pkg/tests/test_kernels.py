"""The compiled and pure-numpy kernel flavours must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from fredproj import _kernels as K

pytestmark = pytest.mark.skipif(K.numba is None, reason="numba not installed")


def contraction(rng, d, q):
    M = rng.standard_normal((d, d))
    return M * (q / np.linalg.norm(M, 2))


def test_every_kernel_has_both_flavours():
    for name in K.KERNELS:
        assert callable(getattr(K, "py_" + name))
        assert callable(getattr(K, "nb_" + name))
        assert getattr(K, name) is getattr(K, ("nb_" if K.USE_NUMBA else "py_") + name)


def test_sigma_batch():
    idx = np.concatenate([np.arange(5000), 10**12 + np.arange(50)])
    a1, b1 = K.py_sigma_batch(idx)
    a2, b2 = K.nb_sigma_batch(idx)
    assert np.array_equal(a1, a2) and np.array_equal(b1, b2)


@pytest.mark.parametrize("d", [1, 5, 40])
def test_neumann_vector(d):
    rng = np.random.default_rng(d)
    M = contraction(rng, d, 0.7)
    w = np.ones(d)
    phi = rng.standard_normal(d)
    x1, n1, t1, ok1 = K.py_neumann_vector(M, w, phi, 0.7, 1e-12, 10_000)
    x2, n2, t2, ok2 = K.nb_neumann_vector(M, w, phi, 0.7, 1e-12, 10_000)
    assert ok1 and ok2 and n1 == n2
    assert np.allclose(x1, x2, rtol=0, atol=1e-13)
    assert np.allclose(x1, np.linalg.solve(np.eye(d) - M, phi), atol=1e-10)


def test_neumann_vector_cap():
    rng = np.random.default_rng(0)
    M = contraction(rng, 6, 0.5)
    for fn in (K.py_neumann_vector, K.nb_neumann_vector):
        _, n, tail, ok = fn(M, np.ones(6), np.ones(6), 0.5, 1e-12, 1)
        assert n == 1 and not ok and tail > 1e-12


def test_neumann_matrix():
    rng = np.random.default_rng(4)
    w = rng.uniform(0.5, 2.0, 7)
    M = contraction(rng, 7, 0.3)
    S1, n1, _, ok1 = K.py_neumann_matrix(M, w, 0.9, 1e-13, 5000)
    S2, n2, _, ok2 = K.nb_neumann_matrix(M, w, 0.9, 1e-13, 5000)
    assert ok1 and ok2 and n1 == n2
    assert np.allclose(S1, S2, atol=1e-13)


def test_sum_in_order():
    rng = np.random.default_rng(2)
    terms = rng.standard_normal((6, 6, 3, 3))
    ia, ib = (v.ravel() for v in np.meshgrid(np.arange(6), np.arange(6), indexing="ij"))
    assert np.allclose(K.py_sum_in_order(terms, ia, ib), K.nb_sum_in_order(terms, ia, ib),
                       atol=1e-13)


def test_cauchy_diagonal():
    rng = np.random.default_rng(3)
    Xs, Ys = rng.standard_normal((2, 12, 4, 4))
    assert np.allclose(K.py_cauchy_diagonal(Xs, Ys, 12), K.nb_cauchy_diagonal(Xs, Ys, 12),
                       atol=1e-12)


def test_assembly():
    x, w = np.polynomial.legendre.leggauss(30)
    p = np.array([1.0, -2.0, 0.5])
    q = np.array([0.0, 1.0])
    assert np.allclose(K.py_assemble_separable(x, w, p, q, 1.5),
                       K.nb_assemble_separable(x, w, p, q, 1.5), atol=1e-14)
    assert np.allclose(K.py_assemble_sine(x, w, 0.7), K.nb_assemble_sine(x, w, 0.7), atol=1e-14)


def test_env_flag_selects_numpy():
    env = dict(os.environ, FREDPROJ_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", "from fredproj import _kernels; print(_kernels.backend())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"
