"""Problem generators shared by the unit and acceptance tests."""
import numpy as np

from fredproj.hilbert import LinearOperator, Space, operator_norm
from fredproj.projection import ConstraintSet, build_k, build_projections
from fredproj.solver import Problem


def random_space(rng, dim, weighted=True):
    if not weighted:
        return Space.euclidean(dim)
    return Space(rng.uniform(0.5, 2.0, dim))


def scaled_operator(rng, space, target):
    M = rng.standard_normal((space.dim, space.dim))
    return LinearOperator(space, M * (target / operator_norm(LinearOperator(space, M)).value))


def planted_problem(rng, dim=None, m=None, a_norm=None, k_scale=1.0):
    """Constrained-solvable problem: phi = x* - A x* with x* orthogonal to every y.

    Returns ``(problem, k0, x_star)``; k0 has random free coefficients, so it
    need not give a contraction.
    """
    dim = int(rng.integers(2, 13)) if dim is None else dim
    m = int(rng.integers(1, min(3, dim - 1) + 1)) if m is None else m
    sp = random_space(rng, dim, weighted=bool(rng.integers(0, 2)))
    cs = ConstraintSet.from_vectors(sp, list(rng.standard_normal((m, dim))))
    a_norm = float(rng.uniform(0.05, 0.8)) if a_norm is None else a_norm
    A = scaled_operator(rng, sp, a_norm)
    x_star = cs.complement @ rng.standard_normal(dim - m)
    phi = x_star - A.apply(x_star)
    k0 = build_k(cs, k_scale * rng.standard_normal((dim - m, m)))
    return Problem(A, phi, cs), k0, x_star


def contractive_instance(rng, dim=None, target=None):
    """(A, P, phi) with ||A P|| = target <= 0.9 for a random admissible k."""
    dim = int(rng.integers(2, 33)) if dim is None else dim
    m = int(rng.integers(1, min(3, dim - 1) + 1))
    sp = random_space(rng, dim)
    cs = ConstraintSet.from_vectors(sp, list(rng.standard_normal((m, dim))))
    P = build_projections(build_k(cs, rng.normal(0.0, 0.5, (dim - m, m)))).P
    M = LinearOperator(sp, rng.standard_normal((dim, dim)))
    target = float(rng.uniform(0.05, 0.9)) if target is None else target
    A = M * (target / operator_norm(M.compose(P)).value)
    return A, P, rng.standard_normal(dim)


def rank_deficient_problem(rng, dim=6, angle=0.3, noise=0.02):
    """I - A is singular (A has eigenvalue 1 along v) and v sits at ``angle`` from y.

    x = v + x_p solves the unconstrained equation for every multiple of v,
    and one choice of that multiple meets the constraint.
    """
    sp = Space.euclidean(dim)
    y = np.zeros(dim)
    y[0] = 1.0
    u = np.zeros(dim)
    u[1] = 1.0
    v = np.cos(angle) * u + np.sin(angle) * y
    Q = np.eye(dim) - np.outer(v, v)
    B = rng.standard_normal((dim, dim))
    B = Q @ B @ Q
    B *= noise / np.linalg.norm(B, 2)
    A = LinearOperator(sp, np.outer(v, v) + B)
    x_star = Q @ rng.standard_normal(dim)
    x_star -= (x_star @ y) / (v @ y) * v
    phi = x_star - A.apply(x_star)
    cs = ConstraintSet.from_vectors(sp, [y])
    return Problem(A, phi, cs), x_star


def two_by_two():
    sp = Space.euclidean(2)
    A = LinearOperator(sp, np.array([[1.0, 0.3], [0.0, 0.2]]))
    cs = ConstraintSet.from_vectors(sp, [np.array([1.0, 0.0])])
    return Problem(A, np.array([-0.3, 0.8]), cs)


def nilpotent_three():
    sp = Space.euclidean(3)
    A = LinearOperator(sp, np.array([[0.0, 0.4, 0.0], [0.0, 0.0, 0.4], [0.0, 0.0, 0.0]]))
    cs = ConstraintSet.from_vectors(sp, [np.array([1.0, 0.0, 0.0])])
    return Problem(A, np.ones(3), cs)
