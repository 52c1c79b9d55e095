"""Weighted inner-product spaces and dense operators acting on them.

A :class:`Space` is R^n with inner product ``<u, v> = sum_i w_i u_i v_i``.
Plain coordinate spaces use unit weights; discretised integral equations
use quadrature weights, so that vectors of nodal values carry the L2 inner
product of the underlying functions.

Vectors are ordinary 1-D numpy arrays.  Operators wrap a square matrix and
remember the space they act on.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DependentConstraintError, DimensionError, NormNotConverged

logger = logging.getLogger(__name__)


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Space:
    weights: np.ndarray
    nodes: np.ndarray | None = None

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1 or w.size < 1:
            raise DimensionError("weights must be a non-empty 1-D array")
        if not np.all(w > 0):
            raise ValueError("all weights must be positive")
        object.__setattr__(self, "weights", w)
        if self.nodes is not None:
            x = _frozen(self.nodes)
            if x.shape != w.shape:
                raise DimensionError(f"{x.size} nodes for {w.size} weights")
            if np.any(np.diff(x) <= 0):
                raise ValueError("nodes must be strictly increasing")
            object.__setattr__(self, "nodes", x)

    @classmethod
    def euclidean(cls, dim):
        return cls(np.ones(dim))

    @property
    def dim(self):
        return self.weights.size

    def compatible(self, other):
        return self is other or (
            self.dim == other.dim and np.array_equal(self.weights, other.weights)
        )

    def check(self, v, name="vector"):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise DimensionError(f"{name} has shape {v.shape}, space has dim {self.dim}")
        return v

    def inner(self, u, v):
        u = self.check(u)
        v = self.check(v)
        return float(np.dot(self.weights * u, v))

    def norm(self, u):
        return float(np.sqrt(max(self.inner(u, u), 0.0)))

    def gram(self, vs):
        """Gram matrix of the columns of ``vs`` (shape dim x m)."""
        vs = np.asarray(vs, dtype=np.float64)
        return vs.T @ (self.weights[:, None] * vs)

    def to_euclidean(self, v):
        """Isometry onto plain R^n: multiply by sqrt(weights)."""
        return np.sqrt(self.weights) * np.asarray(v)

    def from_euclidean(self, v):
        return np.asarray(v) / np.sqrt(self.weights)


def inner(space, u, v):
    return space.inner(u, v)


def gram_schmidt(space, vs, tol=1e-10):
    """Orthonormalise ``vs`` under the space's inner product.

    Modified Gram-Schmidt with a second orthogonalisation pass.  Raises
    DependentConstraintError naming the first vector whose component outside
    the span of its predecessors has norm below ``tol``.
    """
    if len(vs) == 0:
        raise ValueError("need at least one vector")
    if tol <= 0:
        raise ValueError("tol must be positive")
    out = []
    for idx, v in enumerate(vs):
        q = space.check(v, f"vector {idx}").copy()
        for _ in range(2):
            for e in out:
                q -= space.inner(q, e) * e
        nrm = space.norm(q)
        if nrm < tol:
            raise DependentConstraintError(idx, nrm)
        out.append(q / nrm)
    return out


@dataclass(frozen=True)
class NormConfig:
    svd_cutoff: int = 512
    tol: float = 1e-12
    max_iters: int = 10_000
    seed: int = 0


@dataclass(frozen=True)
class NormEstimate:
    value: float
    method: str  # "exact-svd" | "power-iteration"
    iterations: int = 0
    tolerance: float = 0.0
    converged: bool = True

    def __float__(self):
        return self.value

    def to_dict(self):
        return {
            "value": self.value,
            "method": self.method,
            "iterations": self.iterations,
            "tolerance": self.tolerance,
        }


@dataclass(frozen=True, eq=False)
class LinearOperator:
    space: Space
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        d = self.space.dim
        if m.shape != (d, d):
            raise DimensionError(f"matrix shape {m.shape} does not match space dim {d}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, space):
        return cls(space, np.eye(space.dim))

    @classmethod
    def zeros(cls, space):
        return cls(space, np.zeros((space.dim, space.dim)))

    def _same_space(self, other):
        if not self.space.compatible(other.space):
            raise DimensionError("operators act on different spaces")

    def apply(self, x):
        return self.matrix @ self.space.check(x)

    def compose(self, other):
        """``self`` after ``other``."""
        self._same_space(other)
        return LinearOperator(self.space, self.matrix @ other.matrix)

    def __matmul__(self, other):
        if isinstance(other, LinearOperator):
            return self.compose(other)
        return self.apply(other)

    def __add__(self, other):
        self._same_space(other)
        return LinearOperator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        self._same_space(other)
        return LinearOperator(self.space, self.matrix - other.matrix)

    def __mul__(self, s):
        return LinearOperator(self.space, float(s) * self.matrix)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def similar(self):
        """Matrix of the operator in orthonormal coordinates, D^1/2 A D^-1/2.

        Its spectral norm is the induced norm under the weighted inner product.
        """
        s = np.sqrt(self.space.weights)
        return s[:, None] * self.matrix / s[None, :]

    def adjoint(self):
        w = self.space.weights
        return LinearOperator(self.space, self.matrix.T * w[None, :] / w[:, None])

    def norm(self, cfg=None):
        return operator_norm(self, cfg)


def apply(A, x):
    return A.apply(x)


def compose(A, B):
    return A.compose(B)


def operator_norm(A, cfg=None):
    """Induced operator norm of ``A`` under its space's inner product."""
    cfg = cfg or NormConfig()
    B = A.similar()
    if A.space.dim <= cfg.svd_cutoff:
        value = float(np.linalg.norm(B, 2)) if B.any() else 0.0
        return NormEstimate(value, "exact-svd")
    return _power_norm(B, cfg)


def _power_norm(B, cfg):
    rng = np.random.default_rng(cfg.seed)
    x = rng.standard_normal(B.shape[1])
    x /= np.linalg.norm(x)
    sigma = 0.0
    for it in range(1, cfg.max_iters + 1):
        y = B @ x
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return NormEstimate(0.0, "power-iteration", it, cfg.tol)
        z = B.T @ y
        x = z / np.linalg.norm(z)
        if abs(new - sigma) <= cfg.tol * new:
            return NormEstimate(new, "power-iteration", it, cfg.tol)
        sigma = new
    est = NormEstimate(sigma, "power-iteration", cfg.max_iters, cfg.tol, converged=False)
    logger.warning("power iteration stopped at %d iterations", cfg.max_iters)
    raise NormNotConverged(est)
