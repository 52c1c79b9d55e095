"""Tensor-product spaces H1 (x) H2 and constraints that act on the H2 factor.

An element of the product is stored as an ``(n1, n2)`` array ``X`` and
flattened row-major, ``(i, j) -> i * n2 + j``.  Product weights are the
outer product of the factor weights, so flattening is an isometry.

The basis psi_j of H1 is the normalised coordinate basis
``e_j / sqrt(w1_j)``.  Requiring ``<x, y>_2' = 0`` for an H2 vector ``y`` is
the same as requiring ``<x, psi_j (x) y> = 0`` for every j.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, DimensionError
from .hilbert import Space
from .projection import BIORTH_TOL, ConstraintSet, _complement_basis, kvectors_from_ks


@dataclass(frozen=True, eq=False)
class ProductSpace:
    h1: Space
    h2: Space

    def __post_init__(self):
        w = np.outer(self.h1.weights, self.h2.weights).ravel()
        object.__setattr__(self, "space", Space(w))

    @property
    def shape(self):
        return (self.h1.dim, self.h2.dim)

    def check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape != self.shape:
            raise DimensionError(f"product vector shape {X.shape}, expected {self.shape}")
        return X

    def flatten(self, X):
        return self.check(X).ravel().copy()

    def unflatten(self, v):
        return self.space.check(v).reshape(self.shape)

    def psi(self, j):
        """j-th orthonormal coordinate vector of H1."""
        e = np.zeros(self.h1.dim)
        e[j] = 1.0 / np.sqrt(self.h1.weights[j])
        return e

    def inner(self, X, Y):
        return self.space.inner(self.flatten(X), self.flatten(Y))


def tensor(a, b):
    return np.outer(a, b)


def partial_inner(ps, X, y):
    """Contract the H2 factor of X against y, giving an H1 vector.

    Defined by <<X, y>_2', z>_1 = <X, z (x) y> for every z in H1.
    """
    X = ps.check(X)
    y = ps.h2.check(y, "y")
    return X @ (ps.h2.weights * y)


def _columns(space, vs):
    """Lists/tuples hold one vector per entry; 2-D arrays hold vectors as columns."""
    if isinstance(vs, (list, tuple)):
        vs = np.column_stack([np.asarray(v, dtype=np.float64) for v in vs])
    vs = np.asarray(vs, dtype=np.float64)
    if vs.ndim == 1:
        vs = vs[:, None]
    if vs.shape[0] != space.dim:
        raise DimensionError(f"vectors of length {vs.shape[0]} in a space of dim {space.dim}")
    return vs


def _lift(ps, vs, J):
    n1 = ps.h1.dim
    J = n1 if J is None else int(J)
    if not 1 <= J <= n1:
        raise DimensionError(f"truncation J={J} outside 1..{n1}")
    cols = [tensor(ps.psi(j), vs[:, i]).ravel() for j in range(J) for i in range(vs.shape[1])]
    return np.column_stack(cols)


def lift_constraints(ps, ys, J=None):
    """ConstraintSet on the product made of psi_j (x) y_i for j < J (default J = n1).

    Column order is j-major: index ``j * m + i``.
    """
    Y2 = _columns(ps.h2, ys)
    m = Y2.shape[1]
    G = ps.h2.gram(Y2)
    if np.max(np.abs(G - np.eye(m))) > BIORTH_TOL:
        raise AdmissibilityError("H2 constraint vectors are not orthonormal")
    J = ps.h1.dim if J is None else J
    if J * m > ps.space.dim:
        raise DimensionError(f"{J * m} lifted constraints exceed dimension {ps.space.dim}")
    Y = _lift(ps, Y2, J)
    return ConstraintSet(ps.space, Y, _complement_basis(ps.space, Y))


def lift_k(ps, lifted, ks, J=None):
    """KVectors on the lifted constraints made of psi_j (x) k_i."""
    K2 = _columns(ps.h2, ks)
    return kvectors_from_ks(lifted, _lift(ps, K2, J))


def lifted_gram_det(ps, ks, J=None):
    K2 = _columns(ps.h2, ks)
    return float(np.linalg.det(ps.space.gram(_lift(ps, K2, J))))


def expanded_projection(ps, X, ys, ks):
    """x - sum_i <x, y_i>_2' (x) k_i, the factorwise form of P_k on the product."""
    X = ps.check(X)
    Y2 = _columns(ps.h2, ys)
    K2 = _columns(ps.h2, ks)
    if Y2.shape != K2.shape:
        raise DimensionError("need one k vector per constraint")
    B = K2.T @ (ps.h2.weights[:, None] * Y2)
    err = float(np.max(np.abs(B - np.eye(Y2.shape[1]))))
    if err > BIORTH_TOL:
        raise AdmissibilityError(f"<k_i, y_j>_2 deviates from delta_ij by {err:.3e}")
    out = X.copy()
    for i in range(Y2.shape[1]):
        out -= tensor(partial_inner(ps, X, Y2[:, i]), K2[:, i])
    return out
