"""Constrained solution of x = A x + phi subject to <x, y_i> = 0.

For admissible k the modified equation x = A P_k x + phi is summed as a
Neumann series B_k phi = sum_i (A P_k)^i phi.  If the m numbers
<B_k phi, y_i> vanish, B_k phi solves the original equation and meets every
constraint.  The search runs over the free coefficients of k: a contractive
k is located first (minimising ||A P_k|| when the start point is not
contractive), then the residual is driven to zero by damped Newton with a
Nelder-Mead fallback.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .errors import ContractionError, DimensionError, SeriesNotConverged, SingularSystemError
from .hilbert import LinearOperator, NormConfig, NormEstimate, operator_norm
from .projection import ConstraintSet, KVectors, build_k, build_projections, kvectors_from_ks

logger = logging.getLogger(__name__)

STATUSES = ("solved", "residual-nonzero", "norm-ge-one", "search-failed")
SEARCH_MODES = ("newton", "nelder-mead", "none")
NORM_TARGET = 0.9
NORM_MAX_EVALS = 4000


@dataclass(frozen=True)
class SolverSettings:
    neumann_tol: float = 1e-12
    neumann_max_terms: int = 10_000
    residual_tol: float = 1e-10
    search: str = "newton"
    search_max_iters: int = 200
    # forward-difference step is fd_step * (1 + ||c||)
    fd_step: float = 1e-6
    direct_solve: bool = False
    max_halvings: int = 30
    norm: NormConfig = field(default_factory=NormConfig)

    def __post_init__(self):
        for name in ("neumann_tol", "residual_tol", "fd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.search not in SEARCH_MODES:
            raise ValueError(f"search must be one of {SEARCH_MODES}, got {self.search!r}")
        if self.neumann_max_terms < 1 or self.search_max_iters < 0:
            raise ValueError("iteration limits must be positive")


@dataclass(frozen=True, eq=False)
class Problem:
    A: LinearOperator
    phi: np.ndarray
    constraints: ConstraintSet
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if not self.A.space.compatible(self.constraints.space):
            raise DimensionError("operator and constraints live on different spaces")
        phi = np.array(self.A.space.check(self.phi, "phi"))
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def space(self):
        return self.A.space

    def with_settings(self, **changes):
        from dataclasses import replace

        return replace(self, settings=replace(self.settings, **changes))


@dataclass(frozen=True)
class RegionEstimate:
    norm_APk: float
    sup_APt_eta: float
    epsilon: float
    exact: bool

    @property
    def unbounded(self):
        return math.isinf(self.epsilon)

    def to_dict(self):
        return {
            "norm_APk": self.norm_APk,
            "sup_APt_eta": self.sup_APt_eta,
            "epsilon": None if self.unbounded else self.epsilon,
            "unbounded": self.unbounded,
            "exact": self.exact,
        }


@dataclass(eq=False)
class SolveReport:
    status: str
    x: np.ndarray | None
    k: KVectors
    norm_APk: NormEstimate | None
    residual: np.ndarray
    equation_residual: float
    constraint_residual: float
    neumann_terms: int
    region_radius: float
    search_iters: int = 0
    history: list = field(default_factory=list)
    message: str = ""

    @property
    def solved(self):
        return self.status == "solved"


# -- series and oracle --------------------------------------------------------

def direct_solve_oracle(A, P, phi):
    """Dense LU solve of (I - A P) x = phi."""
    M = A.compose(P)
    d = A.space.dim
    S = np.eye(d) - M.similar()
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond >= 1e12:
        raise SingularSystemError(f"I - A P is singular to working precision (cond {cond:.3e})")
    return np.linalg.solve(np.eye(d) - M.matrix, A.space.check(phi, "phi"))


def _sum_series(M, phi, q, s):
    if q >= 1.0:
        raise ContractionError(q)
    if s.direct_solve:
        I = LinearOperator.identity(M.space)
        return direct_solve_oracle(M, I, phi), 0
    x, terms, tail, ok = _kernels.neumann_vector(
        M.matrix, M.space.weights, np.asarray(phi, dtype=np.float64), q, s.neumann_tol,
        s.neumann_max_terms,
    )
    if not ok:
        raise SeriesNotConverged(terms, tail)
    return x, terms


def neumann_solve(A, P, phi, s=None):
    """Sum the Neumann series of A P applied to phi.  Returns ``(x, terms)``."""
    s = s or SolverSettings()
    M = A.compose(P)
    q = operator_norm(M, s.norm).value
    return _sum_series(M, A.space.check(phi, "phi"), q, s)


@dataclass
class _Eval:
    k: KVectors
    norm: NormEstimate
    x: np.ndarray
    terms: int
    g: np.ndarray

    @property
    def gnorm(self):
        return float(np.linalg.norm(self.g)) if self.g.size else 0.0


def _evaluate(problem, k):
    pair = build_projections(k)
    M = problem.A.compose(pair.P)
    nrm = operator_norm(M, problem.settings.norm)
    x, terms = _sum_series(M, problem.phi, nrm.value, problem.settings)
    return _Eval(k, nrm, x, terms, problem.constraints.values(x))


def residual(problem, k):
    """The m numbers <B_k phi, y_i>; all zero means B_k phi is a constrained solution."""
    return _evaluate(problem, k).g


# -- region estimate ----------------------------------------------------------

def region_radius(problem, k):
    """Radius of the k-neighbourhood in which solutions persist.

    For a single constraint the supremum of ||A Pt_eta|| over unit eta
    orthogonal to y is exactly the norm of A restricted to the complement of
    y.  With m > 1 constraints that value times m is only an upper bound.
    """
    cs = problem.constraints
    q = operator_norm(problem.A.compose(build_projections(k).P), problem.settings.norm).value
    if q >= 1.0:
        raise ContractionError(q)
    sup = operator_norm(problem.A.compose(cs.orthogonal_projector()), problem.settings.norm).value
    exact = cs.m <= 1
    if cs.m > 1:
        sup *= cs.m
    eps = (1.0 - q) / sup if sup > 0 else math.inf
    return RegionEstimate(q, sup, eps, exact)


def random_eta(constraints, rng):
    """m unit vectors (columns), each orthogonal to every constraint vector."""
    C = constraints.complement
    if C.shape[1] == 0:
        raise DimensionError("constraints span the whole space; no admissible eta")
    raw = C @ rng.standard_normal((C.shape[1], constraints.m))
    norms = np.sqrt(np.sum(constraints.space.weights[:, None] * raw * raw, axis=0))
    return raw / norms[None, :]


def perturb_k(k, eta, eps):
    return kvectors_from_ks(k.constraints, k.ks + eps * np.asarray(eta))


def probe_region(problem, k, count, rng, fraction=0.9):
    """Re-solve at ``count`` random k' = k + fraction*eps*eta.

    Returns ``(region, persisted, max_residual)``.
    """
    region = region_radius(problem, k)
    tol = 10 * problem.settings.residual_tol
    step = fraction * region.epsilon if not region.unbounded else 1.0
    persisted = 0
    worst = 0.0
    for _ in range(count):
        kp = perturb_k(k, random_eta(problem.constraints, rng), step)
        try:
            g = residual(problem, kp)
        except (ContractionError, SeriesNotConverged):
            worst = math.inf
            continue
        r = float(np.max(np.abs(g), initial=0.0))
        worst = max(worst, r)
        persisted += r <= tol
    return region, persisted, worst


# -- search -------------------------------------------------------------------

class _Reached(Exception):
    pass


class _Search:
    def __init__(self, problem):
        self.problem = problem
        self.cs = problem.constraints
        self.s = problem.settings
        self.cache = {}

    def k_of(self, c):
        return build_k(self.cs, c)

    def eval(self, c):
        """Evaluate at coefficients c, or None where the series is unusable."""
        key = np.asarray(c, dtype=np.float64).tobytes()
        if key not in self.cache:
            try:
                self.cache[key] = _evaluate(self.problem, self.k_of(c))
            except (ContractionError, SeriesNotConverged):
                self.cache[key] = None
        return self.cache[key]

    def norm_at(self, c):
        P = build_projections(self.k_of(c)).P
        return operator_norm(self.problem.A.compose(P), self.s.norm).value

    def minimise_norm(self, c0, target=NORM_TARGET):
        """Nelder-Mead on ||A P_k||, stopping early once it drops below ``target``."""
        best = {"c": c0, "v": math.inf}

        def objective(c):
            v = self.norm_at(c)
            if v < best["v"]:
                best["c"], best["v"] = np.array(c), v
            if v < target:
                raise _Reached
            return v

        try:
            minimize(
                objective, c0, method="Nelder-Mead",
                options={"maxfev": min(NORM_MAX_EVALS, 100 * (c0.size + 1)), "xatol": 1e-8,
                         "fatol": 1e-10, "adaptive": c0.size > 4},
            )
        except _Reached:
            pass
        return best["c"], best["v"]

    def jacobian(self, c, g):
        h = self.s.fd_step * (1.0 + np.linalg.norm(c))
        J = np.zeros((g.size, c.size))
        for j in range(c.size):
            e = np.zeros_like(c)
            e[j] = h
            fwd = self.eval(c + e)
            if fwd is not None:
                J[:, j] = (fwd.g - g) / h
                continue
            bwd = self.eval(c - e)
            if bwd is not None:
                J[:, j] = (g - bwd.g) / h
        return J

    def newton(self, c, cur):
        """Damped Newton.  Returns (c, eval, iterations, history, outcome)
        where outcome is 'converged', 'stalled' or 'exhausted'."""
        tol = self.s.residual_tol
        history = [cur.gnorm]
        for it in range(1, self.s.search_max_iters + 1):
            if np.max(np.abs(cur.g)) <= tol:
                return c, cur, it - 1, history, "converged"
            J = self.jacobian(c, cur.g)
            step = np.linalg.lstsq(J, -cur.g, rcond=None)[0]
            if not np.all(np.isfinite(step)) or not step.any():
                return c, cur, it - 1, history, "stalled"
            lam = 1.0
            accepted = None
            for _ in range(self.s.max_halvings + 1):
                trial = self.eval(c + lam * step)
                if trial is not None and trial.gnorm < cur.gnorm:
                    accepted = trial
                    break
                lam *= 0.5
            if accepted is None:
                return c, cur, it, history, "stalled"
            gain = (cur.gnorm - accepted.gnorm) / cur.gnorm
            c, cur = c + lam * step, accepted
            history.append(cur.gnorm)
            if gain < 1e-10:
                return c, cur, it, history, "stalled"
        if np.max(np.abs(cur.g)) <= tol:
            return c, cur, self.s.search_max_iters, history, "converged"
        return c, cur, self.s.search_max_iters, history, "exhausted"

    def nelder_mead(self, c):
        def objective(v):
            e = self.eval(v)
            return math.inf if e is None else float(e.g @ e.g)

        tol = self.s.residual_tol
        # spread tolerance relative to the start, so a search that settles on a
        # nonzero minimum counts as converged rather than exhausted
        f0 = objective(c)
        fatol = max(tol * tol, 1e-12 * f0) if math.isfinite(f0) else tol * tol
        res = minimize(
            objective, c, method="Nelder-Mead",
            options={"maxiter": max(self.s.search_max_iters, 1) * 50, "xatol": 1e-8,
                     "fatol": fatol, "adaptive": c.size > 4},
        )
        return np.asarray(res.x), self.eval(res.x), int(res.nit), bool(res.success)


def complement_norm(problem):
    """k-independent lower bound on ||A P_k||: the norm of A restricted to span(y)^perp."""
    Q = problem.constraints.orthogonal_projector()
    return operator_norm(problem.A.compose(Q), problem.settings.norm).value


def _verified_report(problem, ev, iters, history, default_status="residual-nonzero"):
    tol = problem.settings.residual_tol
    A, phi, x = problem.A, problem.phi, ev.x
    eq_res = problem.space.norm(A.apply(x) + phi - x)
    con_res = float(np.max(np.abs(ev.g), initial=0.0))
    status = "solved" if eq_res <= 10 * tol and con_res <= 10 * tol else default_status
    try:
        eps = region_radius(problem, ev.k).epsilon
    except ContractionError:
        eps = 0.0
    return SolveReport(
        status=status, x=x, k=ev.k, norm_APk=ev.norm, residual=ev.g,
        equation_residual=eq_res, constraint_residual=con_res, neumann_terms=ev.terms,
        region_radius=eps, search_iters=iters, history=history,
    )


def _failure(problem, k, status, iters=0, history=None, message="", ev=None):
    if ev is not None:
        rep = _verified_report(problem, ev, iters, history or [], default_status=status)
        rep.status = status
        rep.message = message
        return rep
    m = problem.constraints.m
    return SolveReport(
        status=status, x=None, k=k, norm_APk=None, residual=np.full(m, np.nan),
        equation_residual=math.nan, constraint_residual=math.nan, neumann_terms=0,
        region_radius=0.0, search_iters=iters, history=history or [], message=message,
    )


def solve_constrained(problem, k0=None):
    """Search admissible k for a constrained solution; failures are statuses."""
    s = problem.settings
    k0 = k0 if k0 is not None else build_k(problem.constraints)
    search = _Search(problem)
    c = k0.flat()

    try:
        start = _evaluate(problem, k0)
    except SeriesNotConverged as exc:
        return _failure(problem, k0, "search-failed", message=str(exc))
    except ContractionError as exc:
        start = None
        msg = str(exc)
    if start is None:
        if s.search == "none" or c.size == 0:
            return _failure(problem, k0, "norm-ge-one", message=msg)
        # P_k is the identity on the complement of span{y} for every admissible k
        floor = complement_norm(problem)
        if floor >= 1.0:
            return _failure(problem, k0, "norm-ge-one",
                            message=f"||A|| on the complement of span(y) is {floor:.6g}; "
                                    "no admissible k gives a contraction")
        c, best = search.minimise_norm(c)
        logger.info("norm minimisation reached ||A P_k|| = %.6g", best)
        start = search.eval(c) if best < 1.0 else None
        if start is None:
            return _failure(problem, search.k_of(c), "norm-ge-one",
                            message=f"smallest ||A P_k|| found: {best:.6g}")

    tol = s.residual_tol
    if np.max(np.abs(start.g), initial=0.0) <= tol:
        return _verified_report(problem, start, 0, [start.gnorm])
    if s.search == "none" or c.size == 0:
        return _verified_report(problem, start, 0, [start.gnorm])

    iters = 0
    history = [start.gnorm]
    cur = start
    if s.search == "newton":
        c, cur, iters, history, outcome = search.newton(c, start)
        if outcome == "converged":
            return _verified_report(problem, cur, iters, history)
        if outcome == "exhausted":
            return _failure(problem, cur.k, "search-failed", iters, history,
                            "Newton iterations exhausted", ev=cur)
        logger.info("Newton stalled at |g| = %.3e, falling back to Nelder-Mead", cur.gnorm)

    c2, ev2, nit, ok = search.nelder_mead(c)
    iters += nit
    if ev2 is not None and ev2.gnorm < cur.gnorm:
        cur = ev2
        history.append(cur.gnorm)
    if np.max(np.abs(cur.g)) <= tol:
        return _verified_report(problem, cur, iters, history)
    if not ok:
        return _failure(problem, cur.k, "search-failed", iters, history,
                        "Nelder-Mead iterations exhausted", ev=cur)
    return _verified_report(problem, cur, iters, history)
