"""Nystrom discretisation of integral equations x(s) = scale * int f(s, t) x(t) dt + phi(s).

The discrete operator acts on the weighted space built from the quadrature,
``(A x)_i = scale * sum_j w_j f(s_i, t_j) x_j``, so that operator norms are
those of the continuous L2 problem up to quadrature error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, KernelEvalError
from .hilbert import LinearOperator, Space
from .projection import ConstraintSet, build_k
from .solver import Problem
from .tensor import ProductSpace, lift_constraints, lift_k

RULES = ("gauss-legendre", "trapezoid")
KERNEL_KINDS = ("separable-poly", "sine", "matrix")


@dataclass(frozen=True, eq=False)
class Quadrature:
    rule: str
    a: float
    b: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self):
        return self.nodes.size

    def space(self):
        return Space(self.weights, self.nodes)

    def integrate(self, f):
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_legendre(a, b, n):
    if n <= 0:
        raise ConfigError(f"Gauss-Legendre needs n >= 1, got {n}")
    if not a < b:
        raise ConfigError(f"empty interval [{a}, {b}]")
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return Quadrature("gauss-legendre", a, b, half * x + 0.5 * (a + b), half * w)


def trapezoid(a, b, n):
    if n < 2:
        raise ConfigError(f"trapezoid rule needs n >= 2, got {n}")
    if not a < b:
        raise ConfigError(f"empty interval [{a}, {b}]")
    x = np.linspace(a, b, n)
    w = np.full(n, (b - a) / (n - 1))
    w[[0, -1]] *= 0.5
    return Quadrature("trapezoid", a, b, x, w)


def quadrature(rule, a, b, n):
    if rule == "gauss-legendre":
        return gauss_legendre(a, b, n)
    if rule == "trapezoid":
        return trapezoid(a, b, n)
    raise ConfigError(f"unknown quadrature rule {rule!r}")


@dataclass(frozen=True, eq=False)
class KernelSpec:
    kind: str
    p: tuple = ()
    q: tuple = ()
    matrix: np.ndarray | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "separable-poly" and (len(self.p) == 0 or len(self.q) == 0):
            raise ConfigError("separable kernel needs non-empty coefficient lists p and q")
        if self.kind == "matrix":
            M = np.asarray(self.matrix, dtype=np.float64)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ConfigError("matrix kernel must be square")

    def __call__(self, s, t):
        """Pointwise kernel value f(s, t), without the scale factor."""
        if self.kind == "separable-poly":
            P = np.polynomial.polynomial
            return P.polyval(s, self.p) * P.polyval(t, self.q)
        if self.kind == "sine":
            return math.sqrt(2.0 / math.pi) * np.sin(np.multiply(s, t))
        raise ConfigError("matrix kernels have no pointwise form")


def nystrom(kernel, quad):
    x, w = quad.nodes, quad.weights
    if kernel.kind == "separable-poly":
        M = _kernels.assemble_separable(x, w, np.asarray(kernel.p, float),
                                        np.asarray(kernel.q, float), kernel.scale)
    elif kernel.kind == "sine":
        M = _kernels.assemble_sine(x, w, kernel.scale)
    else:
        F = np.asarray(kernel.matrix, dtype=np.float64)
        if F.shape != (quad.n, quad.n):
            raise ConfigError(f"kernel matrix {F.shape} does not match {quad.n} nodes")
        M = kernel.scale * F * w[None, :]
    bad = np.argwhere(~np.isfinite(M))
    if bad.size:
        i, j = (int(v) for v in bad[0])
        raise KernelEvalError(i, j, float(x[i]), float(x[j]))
    return LinearOperator(quad.space(), M)


def interpolate(kernel, quad, x, phi, s):
    """Nystrom interpolant phi(s) + scale * sum_j w_j f(s, t_j) x_j at points s."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    F = kernel(s[:, None], quad.nodes[None, :])
    return phi(s) + kernel.scale * F @ (quad.weights * x)


# -- corpus -------------------------------------------------------------------

@dataclass(eq=False)
class CorpusProblem:
    name: str
    problem: Problem
    description: str
    k0: object = None
    reference: np.ndarray | None = None
    reference_fn: object = None
    tolerance: float = 0.0
    extra: dict = field(default_factory=dict)

    def reference_defect(self):
        """Relative defect ||A r + phi - r|| / ||r|| of the shipped reference."""
        sp = self.problem.space
        r = self.reference
        return sp.norm(self.problem.A.apply(r) + self.problem.phi - r) / sp.norm(r)

    def reference_constraint_residual(self):
        vals = self.problem.constraints.values(self.reference)
        return float(np.max(np.abs(vals), initial=0.0))


def _separable_basic(n=64):
    quad = gauss_legendre(0.0, 1.0, n)
    kernel = KernelSpec("separable-poly", p=(0.0, 1.0), q=(0.0, 1.0))
    A = nystrom(kernel, quad)
    sp = A.space
    problem = Problem(A, np.ones(n), ConstraintSet.empty(sp))

    def exact(s):
        return 1.0 + 0.75 * np.asarray(s)

    return CorpusProblem(
        "separable-basic", problem,
        "x(s) = int_0^1 s t x(t) dt + 1 on Gauss-Legendre nodes; exact x(s) = 1 + 0.75 s",
        reference=exact(quad.nodes), reference_fn=exact, tolerance=1e-6,
        extra={"kernel": kernel, "quadrature": quad, "phi": lambda s: np.ones_like(s)},
    )


def _hermite_odd(s, degree):
    s = np.asarray(s, dtype=np.float64)
    g = np.exp(-0.5 * s * s)
    if degree == 1:
        return s * g
    if degree == 3:
        return (2.0 * s**3 - 3.0 * s) * g
    raise ValueError(degree)


def _sine_singular(n=200, R=12.0):
    quad = gauss_legendre(0.0, R, n)
    kernel = KernelSpec("sine")
    A = nystrom(kernel, quad)
    sp = A.space
    # s e^{-s^2/2} is a +1 eigenfunction of the sine transform and the third
    # Hermite function a -1 eigenfunction; they are orthogonal on [0, inf)
    y = _hermite_odd(quad.nodes, 3)
    constraints = ConstraintSet.from_vectors(sp, [y])
    ref = _hermite_odd(quad.nodes, 1)
    ref = ref / sp.norm(ref)
    if ref[0] < 0:
        ref = -ref
    norm_const = 1.0 / math.sqrt(math.sqrt(math.pi) / 4.0)

    def exact(s):
        return norm_const * _hermite_odd(s, 1)

    problem = Problem(A, np.zeros(n), constraints)
    return CorpusProblem(
        "sine-singular", problem,
        "x(s) = sqrt(2/pi) int_0^R sin(s t) x(t) dt with one constraint against the "
        "third Hermite function; reference is the self-reciprocal s exp(-s^2/2), "
        "scaled to unit weighted norm and positive at the first node",
        reference=ref, reference_fn=exact, tolerance=1e-3,
        extra={"kernel": kernel, "quadrature": quad, "phi": lambda s: np.zeros_like(s)},
    )


def _tensor_demo(seed=20240601):
    rng = np.random.default_rng(seed)
    h1 = Space.euclidean(4)
    h2 = Space.euclidean(4)
    ps = ProductSpace(h1, h2)
    sp = ps.space
    y = np.full(4, 0.5)
    lifted = lift_constraints(ps, y)
    M = rng.standard_normal((16, 16))
    A = LinearOperator(sp, M * (0.6 / np.linalg.norm(M, 2)))
    R = rng.standard_normal((4, 4))
    X_star = R - np.outer(R @ y, y)
    x_star = ps.flatten(X_star)
    phi = x_star - A.apply(x_star)
    eta = np.array([1.0, -1.0, 0.0, 0.0]) / math.sqrt(2.0)
    k0 = lift_k(ps, lifted, y + 0.5 * eta)
    problem = Problem(A, phi, lifted)
    return CorpusProblem(
        "tensor-demo", problem,
        "4x4 product space; x must satisfy <x, y>_2' = 0 for y = (1,1,1,1)/2, lifted to "
        "4 constraints psi_j (x) y; planted solution",
        k0=k0, reference=x_star, tolerance=1e-8, extra={"product_space": ps},
    )


_CORPUS = {
    "separable-basic": _separable_basic,
    "sine-singular": _sine_singular,
    "tensor-demo": _tensor_demo,
}
CORPUS_NAMES = tuple(_CORPUS)


def corpus(name, **kwargs):
    try:
        build = _CORPUS[name]
    except KeyError:
        raise ConfigError(f"unknown corpus problem {name!r}; choose from {CORPUS_NAMES}") from None
    return build(**kwargs)


def default_k(cp):
    return cp.k0 if cp.k0 is not None else build_k(cp.problem.constraints)

