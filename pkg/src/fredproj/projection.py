"""Projection-like operators P_k x = x - sum_i k_i <x, y_i> and their complements.

Constraint vectors ``y_i`` are kept orthonormal.  Admissible ``k_i`` satisfy
``<k_i, y_j> = delta_ij``; every such family can be written as

    k_i = y_i + sum_a c[a, i] * e_a

where ``e_a`` is an orthonormal basis of the complement of span{y}.  The
free coefficients ``c`` are what the solver searches over.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, DependentKError, DimensionError
from .hilbert import LinearOperator, Space, gram_schmidt

BIORTH_TOL = 1e-10
GRAM_DET_MIN = 1e-12


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _complement_basis(space, Y):
    sw = np.sqrt(space.weights)
    m = Y.shape[1]
    if m == 0:
        return np.diag(1.0 / sw)
    Q, _ = np.linalg.qr(sw[:, None] * Y, mode="complete")
    return Q[:, m:] / sw[:, None]


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Orthonormal constraint vectors (columns of ``ys``) and a basis of
    their orthogonal complement (columns of ``complement``)."""

    space: Space
    ys: np.ndarray = field(repr=False)
    complement: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = self.space.dim
        Y = _readonly(self.ys).reshape(d, -1)
        C = _readonly(self.complement).reshape(d, -1)
        if Y.shape[1] + C.shape[1] != d:
            raise DimensionError("constraints and complement must together span the space")
        G = self.space.gram(np.hstack([Y, C]))
        if np.max(np.abs(G - np.eye(d)), initial=0.0) > BIORTH_TOL:
            raise AdmissibilityError("constraint/complement basis is not orthonormal")
        object.__setattr__(self, "ys", Y)
        object.__setattr__(self, "complement", C)

    @classmethod
    def from_vectors(cls, space, vectors, tol=1e-10):
        """Orthonormalise ``vectors`` (a sequence of 1-D arrays) and build the set."""
        vectors = list(vectors)
        if not vectors:
            return cls.empty(space)
        Y = np.column_stack(gram_schmidt(space, vectors, tol))
        return cls(space, Y, _complement_basis(space, Y))

    @classmethod
    def empty(cls, space):
        """No constraints: P_k is the identity."""
        Y = np.zeros((space.dim, 0))
        return cls(space, Y, _complement_basis(space, Y))

    @property
    def m(self):
        return self.ys.shape[1]

    @property
    def dim(self):
        return self.space.dim

    def values(self, x):
        """The m numbers <x, y_i>."""
        x = self.space.check(x)
        return self.ys.T @ (self.space.weights * x)

    def orthogonal_projector(self):
        """Orthogonal projector onto the complement of span{y}."""
        P = np.eye(self.dim) - self.ys @ (self.ys.T * self.space.weights[None, :])
        return LinearOperator(self.space, P)


def rank_m_operator(space, left, right):
    """The operator x -> sum_i left[:, i] <x, right[:, i]>."""
    left = np.asarray(left, dtype=np.float64).reshape(space.dim, -1)
    right = np.asarray(right, dtype=np.float64).reshape(space.dim, -1)
    return LinearOperator(space, left @ (right.T * space.weights[None, :]))


def _check_admissible(constraints, ks):
    space = constraints.space
    m = constraints.m
    if ks.shape != (space.dim, m):
        raise DimensionError(f"k matrix has shape {ks.shape}, expected {(space.dim, m)}")
    if m == 0:
        return
    det = float(np.linalg.det(space.gram(ks)))
    if det <= GRAM_DET_MIN:
        raise DependentKError(det)
    B = ks.T @ (space.weights[:, None] * constraints.ys)
    err = float(np.max(np.abs(B - np.eye(m))))
    if err > BIORTH_TOL:
        raise AdmissibilityError(f"<k_i, y_j> deviates from delta_ij by {err:.3e}")


@dataclass(frozen=True, eq=False)
class KVectors:
    constraints: ConstraintSet
    coeffs: np.ndarray
    ks: np.ndarray = field(repr=False)

    @property
    def m(self):
        return self.constraints.m

    @property
    def space(self):
        return self.constraints.space

    def flat(self):
        return self.coeffs.ravel().copy()


def build_k(constraints, coeffs=None):
    """Admissible k from free coefficients, shape ``(dim - m, m)``; ``None`` means k = y."""
    d, m = constraints.dim, constraints.m
    if coeffs is None:
        coeffs = np.zeros((d - m, m))
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.size == (d - m) * m:
        coeffs = coeffs.reshape(d - m, m)
    if coeffs.shape != (d - m, m):
        raise DimensionError(f"coeffs shape {coeffs.shape}, expected {(d - m, m)}")
    ks = constraints.ys + constraints.complement @ coeffs
    _check_admissible(constraints, ks)
    return KVectors(constraints, _readonly(coeffs), _readonly(ks))


def kvectors_from_ks(constraints, ks):
    """Wrap explicit k vectors (columns), checking independence then biorthogonality."""
    space = constraints.space
    if isinstance(ks, (list, tuple)):
        ks = np.column_stack([np.asarray(k, dtype=np.float64) for k in ks])
    ks = np.asarray(ks, dtype=np.float64).reshape(space.dim, -1)
    _check_admissible(constraints, ks)
    coeffs = constraints.complement.T @ (space.weights[:, None] * ks)
    return KVectors(constraints, _readonly(coeffs), _readonly(ks))


@dataclass(frozen=True, eq=False)
class ProjectionPair:
    k: KVectors
    P: LinearOperator
    Pt: LinearOperator


def build_projections(k):
    space = k.space
    Pt = rank_m_operator(space, k.ks, k.constraints.ys)
    P = LinearOperator(space, np.eye(space.dim) - Pt.matrix)
    return ProjectionPair(k, P, Pt)


def check_projected_constraints(pair, x):
    """Return <P x, y_j> for every constraint; these vanish for any x."""
    return pair.k.constraints.values(pair.P.apply(x))
