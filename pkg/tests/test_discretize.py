import math

import numpy as np
import pytest

from fredproj.discretize import (
    CORPUS_NAMES,
    KernelSpec,
    corpus,
    default_k,
    gauss_legendre,
    interpolate,
    nystrom,
    quadrature,
    trapezoid,
)
from fredproj.errors import ConfigError, KernelEvalError
from fredproj.hilbert import operator_norm
from fredproj.projection import ConstraintSet, build_k
from fredproj.solver import Problem, solve_constrained


def test_gauss_legendre_small_rules():
    q = gauss_legendre(-1.0, 1.0, 1)
    assert np.allclose(q.nodes, [0.0]) and np.allclose(q.weights, [2.0])
    q = gauss_legendre(-1.0, 1.0, 2)
    assert np.allclose(q.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)])
    assert np.allclose(q.weights, [1.0, 1.0])
    assert q.integrate(lambda x: x**2) == pytest.approx(2.0 / 3.0, abs=1e-15)


def test_gauss_legendre_exponential():
    q = gauss_legendre(0.0, 1.0, 64)
    assert abs(q.integrate(np.exp) - (math.e - 1.0)) <= 1e-14


def test_quadrature_errors():
    with pytest.raises(ConfigError):
        gauss_legendre(0.0, 1.0, 0)
    with pytest.raises(ConfigError):
        gauss_legendre(1.0, 1.0, 4)
    with pytest.raises(ConfigError):
        quadrature("simpson", 0.0, 1.0, 5)
    q = trapezoid(0.0, 2.0, 201)
    assert q.integrate(lambda x: x) == pytest.approx(2.0)


def test_rank_one_kernel_norm():
    kernel = KernelSpec("separable-poly", p=(0.0, 1.0), q=(0.0, 1.0))
    for n in (32, 64):
        A = nystrom(kernel, gauss_legendre(0.0, 1.0, n))
        assert abs(operator_norm(A).value - 1.0 / 3.0) <= 1e-6


def test_zero_kernel():
    A = nystrom(KernelSpec("separable-poly", p=(0.0,), q=(1.0,)), gauss_legendre(0.0, 1.0, 8))
    assert not A.matrix.any()


def test_matrix_kernel():
    quad = gauss_legendre(0.0, 1.0, 3)
    F = np.arange(9.0).reshape(3, 3)
    A = nystrom(KernelSpec("matrix", matrix=F, scale=2.0), quad)
    assert np.allclose(A.matrix, 2.0 * F * quad.weights[None, :])
    with pytest.raises(ConfigError):
        nystrom(KernelSpec("matrix", matrix=np.eye(2)), quad)
    with pytest.raises(KernelEvalError):
        nystrom(KernelSpec("matrix", matrix=np.full((3, 3), np.nan)), quad)
    with pytest.raises(ConfigError):
        KernelSpec("bessel")


def test_sine_kernel_self_reciprocal():
    quad = gauss_legendre(0.0, 12.0, 200)
    A = nystrom(KernelSpec("sine"), quad)
    sp = A.space
    v = quad.nodes * np.exp(-0.5 * quad.nodes**2)
    assert sp.norm(A.apply(v) - v) / sp.norm(v) <= 1e-3


def test_sine_kernel_against_fine_quadrature():
    # the coarse operator applied to the reference must match a fine-grid oracle
    coarse = gauss_legendre(0.0, 12.0, 200)
    fine = gauss_legendre(0.0, 12.0, 800)
    kernel = KernelSpec("sine")
    f = lambda s: s * np.exp(-0.5 * s * s)  # noqa: E731
    Ac = nystrom(kernel, coarse).apply(f(coarse.nodes))
    Af = kernel(coarse.nodes[:, None], fine.nodes[None, :]) @ (fine.weights * f(fine.nodes))
    assert np.max(np.abs(Ac - Af)) <= 1e-10


def test_separable_basic_reference():
    cp = corpus("separable-basic")
    assert cp.reference_fn(1.0) == pytest.approx(1.75)
    rep = solve_constrained(cp.problem, default_k(cp))
    assert rep.solved
    assert np.max(np.abs(rep.x - cp.reference)) <= 1e-6


def test_nystrom_refinement_at_endpoint():
    values = []
    for n in (64, 128):
        quad = gauss_legendre(0.0, 1.0, n)
        kernel = KernelSpec("separable-poly", p=(0.0, 1.0), q=(0.0, 1.0))
        A = nystrom(kernel, quad)
        p = Problem(A, np.ones(n), ConstraintSet.empty(A.space))
        rep = solve_constrained(p, build_k(p.constraints))
        values.append(interpolate(kernel, quad, rep.x, np.ones_like, 1.0)[0])
    assert abs(values[0] - values[1]) <= 1e-10
    assert values[0] == pytest.approx(1.75, abs=1e-12)


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_corpus_references_meet_their_tolerance(name):
    cp = corpus(name)
    assert cp.reference_defect() <= cp.tolerance
    assert cp.reference_constraint_residual() <= 1e-8


def test_sine_singular_reference_normalisation():
    cp = corpus("sine-singular")
    assert cp.problem.space.norm(cp.reference) == pytest.approx(1.0)
    assert cp.reference[0] > 0
    nodes = cp.problem.space.nodes
    assert np.allclose(cp.reference_fn(nodes), cp.reference, atol=1e-6)


def test_sine_singular_has_no_contractive_k():
    cp = corpus("sine-singular")
    rep = solve_constrained(cp.problem, default_k(cp))
    assert rep.status == "norm-ge-one"


def test_tensor_demo_solves_to_planted_solution():
    cp = corpus("tensor-demo")
    rep = solve_constrained(cp.problem, default_k(cp))
    assert rep.solved
    assert np.max(np.abs(rep.x - cp.reference)) <= cp.tolerance


def test_unknown_corpus_name():
    with pytest.raises(ConfigError):
        corpus("nope")
