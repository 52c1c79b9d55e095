"""Hot inner loops, each in a numba-compiled and a pure-numpy flavour.

The active flavour is picked once at import time.  Set ``FREDPROJ_NUMBA=0``
to force the numpy path (also used automatically when numba is missing).
Both flavours stay importable as ``py_<name>`` and ``nb_<name>`` so the
test-suite and the benchmark can compare them directly.
"""
import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

_flag = os.environ.get("FREDPROJ_NUMBA", "1").strip().lower()
USE_NUMBA = numba is not None and _flag not in ("0", "false", "no", "off")


def backend():
    return "numba" if USE_NUMBA else "numpy"


def _jit(fn):
    if numba is None:
        return None
    return numba.njit(cache=True)(fn)


# -- pairing function ---------------------------------------------------------

def py_sigma_batch(idx):
    idx = np.asarray(idx, dtype=np.int64)
    t = np.floor((np.sqrt(8.0 * idx + 1.0) - 1.0) / 2.0).astype(np.int64)
    # float sqrt can be off by one for large indices
    t = np.where(t * (t + 1) // 2 > idx, t - 1, t)
    t = np.where((t + 1) * (t + 2) // 2 <= idx, t + 1, t)
    a = idx - t * (t + 1) // 2
    return a, t - a


def _sigma_batch_loop(idx):
    n = idx.shape[0]
    a = np.empty(n, dtype=np.int64)
    b = np.empty(n, dtype=np.int64)
    for k in range(n):
        i = idx[k]
        t = np.int64(math.floor((math.sqrt(8.0 * i + 1.0) - 1.0) / 2.0))
        while t * (t + 1) // 2 > i:
            t -= 1
        while (t + 1) * (t + 2) // 2 <= i:
            t += 1
        a[k] = i - t * (t + 1) // 2
        b[k] = t - a[k]
    return a, b


_nb_sigma = _jit(_sigma_batch_loop)


def nb_sigma_batch(idx):
    return _nb_sigma(np.ascontiguousarray(idx, dtype=np.int64))


# -- Neumann series on a vector -----------------------------------------------

def py_neumann_vector(M, w, phi, q, tol, max_terms):
    """Accumulate sum_i M^i phi with a geometric tail stop.

    Returns ``(x, terms, tail, converged)`` where ``tail`` bounds the weighted
    norm of the omitted part of the series.
    """
    x = phi.copy()
    term = phi.copy()
    n = 1
    ratio = q / (1.0 - q)
    while True:
        tail = math.sqrt(float(np.dot(w, term * term))) * ratio
        if tail <= tol:
            return x, n, tail, True
        if n >= max_terms:
            return x, n, tail, False
        term = M @ term
        x += term
        n += 1


def _neumann_vector_loop(M, w, phi, q, tol, max_terms):
    d = phi.shape[0]
    x = phi.copy()
    term = phi.copy()
    n = 1
    ratio = q / (1.0 - q)
    while True:
        s = 0.0
        for i in range(d):
            s += w[i] * term[i] * term[i]
        tail = math.sqrt(s) * ratio
        if tail <= tol:
            return x, n, tail, True
        if n >= max_terms:
            return x, n, tail, False
        nxt = np.dot(M, term)
        for i in range(d):
            term[i] = nxt[i]
            x[i] += nxt[i]
        n += 1


_nb_neumann_vector = _jit(_neumann_vector_loop)


def nb_neumann_vector(M, w, phi, q, tol, max_terms):
    return _nb_neumann_vector(
        np.ascontiguousarray(M, dtype=np.float64),
        np.ascontiguousarray(w, dtype=np.float64),
        np.ascontiguousarray(phi, dtype=np.float64),
        float(q), float(tol), int(max_terms),
    )


# -- Neumann series on an operator --------------------------------------------

def py_neumann_matrix(M, w, q, tol, max_terms):
    """Accumulate sum_i M^i.  The stop rule uses the weighted Frobenius norm,
    which dominates the induced weighted operator norm."""
    d = M.shape[0]
    scale = np.sqrt(w)[:, None] / np.sqrt(w)[None, :]
    S = np.eye(d)
    T = np.eye(d)
    n = 1
    ratio = q / (1.0 - q)
    while True:
        tail = float(np.linalg.norm(T * scale)) * ratio
        if tail <= tol:
            return S, n, tail, True
        if n >= max_terms:
            return S, n, tail, False
        T = T @ M
        S += T
        n += 1


def _neumann_matrix_loop(M, w, q, tol, max_terms):
    d = M.shape[0]
    S = np.eye(d)
    T = np.eye(d)
    sw = np.sqrt(w)
    n = 1
    ratio = q / (1.0 - q)
    while True:
        s = 0.0
        for i in range(d):
            for j in range(d):
                v = T[i, j] * sw[i] / sw[j]
                s += v * v
        tail = math.sqrt(s) * ratio
        if tail <= tol:
            return S, n, tail, True
        if n >= max_terms:
            return S, n, tail, False
        T = T @ M
        S += T
        n += 1


_nb_neumann_matrix = _jit(_neumann_matrix_loop)


def nb_neumann_matrix(M, w, q, tol, max_terms):
    return _nb_neumann_matrix(
        np.ascontiguousarray(M, dtype=np.float64),
        np.ascontiguousarray(w, dtype=np.float64),
        float(q), float(tol), int(max_terms),
    )


# -- ordered double sums ------------------------------------------------------

def py_sum_in_order(terms, ia, ib):
    """Sum ``terms[ia[k], ib[k]]`` sequentially in the given order."""
    out = np.zeros(terms.shape[2:])
    for a, b in zip(ia.tolist(), ib.tolist()):
        out += terms[a, b]
    return out


def _sum_in_order_loop(terms, ia, ib):
    d1 = terms.shape[2]
    d2 = terms.shape[3]
    out = np.zeros((d1, d2))
    for k in range(ia.shape[0]):
        a = ia[k]
        b = ib[k]
        for r in range(d1):
            for c in range(d2):
                out[r, c] += terms[a, b, r, c]
    return out


_nb_sum_in_order = _jit(_sum_in_order_loop)


def nb_sum_in_order(terms, ia, ib):
    return _nb_sum_in_order(
        np.ascontiguousarray(terms, dtype=np.float64),
        np.ascontiguousarray(ia, dtype=np.int64),
        np.ascontiguousarray(ib, dtype=np.int64),
    )


def py_cauchy_diagonal(Xs, Ys, n_diag):
    """sum_{t < n_diag} sum_{j <= t} Xs[j] @ Ys[t - j]."""
    out = np.zeros((Xs.shape[1], Ys.shape[2]))
    for t in range(n_diag):
        for j in range(t + 1):
            out += Xs[j] @ Ys[t - j]
    return out


def _cauchy_diagonal_loop(Xs, Ys, n_diag):
    out = np.zeros((Xs.shape[1], Ys.shape[2]))
    for t in range(n_diag):
        for j in range(t + 1):
            out += Xs[j] @ Ys[t - j]
    return out


_nb_cauchy_diagonal = _jit(_cauchy_diagonal_loop)


def nb_cauchy_diagonal(Xs, Ys, n_diag):
    return _nb_cauchy_diagonal(
        np.ascontiguousarray(Xs, dtype=np.float64),
        np.ascontiguousarray(Ys, dtype=np.float64),
        int(n_diag),
    )


# -- Nystrom assembly ---------------------------------------------------------

def py_assemble_separable(nodes, weights, p, q, scale):
    px = np.polynomial.polynomial.polyval(nodes, p)
    qy = np.polynomial.polynomial.polyval(nodes, q)
    return scale * np.outer(px, qy * weights)


def _assemble_separable_loop(nodes, weights, p, q, scale):
    n = nodes.shape[0]
    px = np.empty(n)
    qy = np.empty(n)
    for i in range(n):
        a = 0.0
        for c in range(p.shape[0] - 1, -1, -1):
            a = a * nodes[i] + p[c]
        px[i] = a
        b = 0.0
        for c in range(q.shape[0] - 1, -1, -1):
            b = b * nodes[i] + q[c]
        qy[i] = b
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = scale * px[i] * qy[j] * weights[j]
    return out


_nb_assemble_separable = _jit(_assemble_separable_loop)


def nb_assemble_separable(nodes, weights, p, q, scale):
    return _nb_assemble_separable(
        np.ascontiguousarray(nodes, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(p, dtype=np.float64),
        np.ascontiguousarray(q, dtype=np.float64),
        float(scale),
    )


_SINE_NORM = math.sqrt(2.0 / math.pi)


def py_assemble_sine(nodes, weights, scale):
    return scale * _SINE_NORM * np.sin(np.outer(nodes, nodes)) * weights[None, :]


def _assemble_sine_loop(nodes, weights, scale):
    n = nodes.shape[0]
    c = scale * math.sqrt(2.0 / math.pi)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = c * math.sin(nodes[i] * nodes[j]) * weights[j]
    return out


_nb_assemble_sine = _jit(_assemble_sine_loop)


def nb_assemble_sine(nodes, weights, scale):
    return _nb_assemble_sine(
        np.ascontiguousarray(nodes, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
        float(scale),
    )


KERNELS = (
    "sigma_batch",
    "neumann_vector",
    "neumann_matrix",
    "sum_in_order",
    "cauchy_diagonal",
    "assemble_separable",
    "assemble_sine",
)

if USE_NUMBA:
    sigma_batch = nb_sigma_batch
    neumann_vector = nb_neumann_vector
    neumann_matrix = nb_neumann_matrix
    sum_in_order = nb_sum_in_order
    cauchy_diagonal = nb_cauchy_diagonal
    assemble_separable = nb_assemble_separable
    assemble_sine = nb_assemble_sine
else:
    sigma_batch = py_sigma_batch
    neumann_vector = py_neumann_vector
    neumann_matrix = py_neumann_matrix
    sum_in_order = py_sum_in_order
    cauchy_diagonal = py_cauchy_diagonal
    assemble_separable = py_assemble_separable
    assemble_sine = py_assemble_sine
