"""CSV matrices, deterministic JSON and the problem config format.

CSV files carry no header, one row per line, ',' separators and '.'
decimals.  A vector is stored as a single column.

A problem config is one JSON object::

    {
      "space": {"dim": 2}  or  {"weights": [...], "nodes": [...]},
      "operator": [[...], ...]  or  "A.csv",
      "phi": [...]  or  "phi.csv",
      "constraints": [[...], ...]  or  "ys.csv"     (one vector per row),
      "k_init": [[...], ...] or "k.csv" or null       (free coefficients, (dim - m) x m),
      "solver": {"residual_tol": 1e-10, ...}
    }

CSV paths are resolved relative to the config file.
"""
from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, FredprojError
from .hilbert import LinearOperator, Space
from .projection import ConstraintSet, build_k
from .solver import Problem, SolverSettings

CONFIG_KEYS = ("space", "operator", "phi", "constraints", "k_init", "solver")


# -- CSV ----------------------------------------------------------------------

def write_csv(path, array):
    a = np.asarray(array, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    np.savetxt(path, a, fmt="%.17g", delimiter=",")


def read_matrix(path):
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"malformed CSV {path}: {exc}") from None


def read_vector(path):
    a = read_matrix(path)
    if 1 not in a.shape:
        raise ConfigError(f"{path} holds a {a.shape} matrix, expected a vector")
    return a.ravel()


def write_solution_csv(path, space, x):
    """Rows ``index, node-or-blank, weight, value``."""
    lines = []
    for i, v in enumerate(np.asarray(x, dtype=np.float64)):
        node = "" if space.nodes is None else format(float(space.nodes[i]), ".17g")
        lines.append(f"{i},{node},{float(space.weights[i]):.17g},{float(v):.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


# -- JSON ---------------------------------------------------------------------

def _encode(obj, indent, level):
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = ", " if indent is None else ","
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[" + sep.join(items) + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent=None):
    """JSON text with insertion key order and 17 significant digits for floats."""
    return _encode(obj, indent, 0)


def report_dict(report, x_csv_path=None):
    eps = report.region_radius
    return {
        "status": report.status,
        "x_csv_path": None if x_csv_path is None else str(x_csv_path),
        "residual": [float(v) for v in report.residual],
        "equation_residual": report.equation_residual,
        "constraint_residual": report.constraint_residual,
        "norm_APk": None if report.norm_APk is None else report.norm_APk.value,
        "epsilon": eps,
        "epsilon_unbounded": math.isinf(eps),
        "neumann_terms": report.neumann_terms,
        "search_iters": report.search_iters,
        "message": report.message,
    }


# -- problem configs ----------------------------------------------------------

def _line_of(text, key):
    if text is None:
        return None
    pos = text.find(f'"{key}"')
    return None if pos < 0 else text.count("\n", 0, pos) + 1


class _Reader:
    def __init__(self, text, base):
        self.text = text
        self.base = Path(base)

    def fail(self, key, message):
        raise ConfigError(f"{key}: {message}", _line_of(self.text, key))

    def path(self, value):
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def matrix(self, key, value):
        if isinstance(value, str):
            return read_matrix(self.path(value))
        try:
            a = np.asarray(value, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            self.fail(key, f"not a numeric matrix ({exc})")
        if a.ndim == 1:
            a = a[None, :] if key == "constraints" else a[:, None]
        if a.ndim != 2:
            self.fail(key, "expected a 2-D array")
        return a

    def vector(self, key, value):
        if isinstance(value, str):
            return read_vector(self.path(value))
        try:
            a = np.asarray(value, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            self.fail(key, f"not a numeric vector ({exc})")
        if a.ndim != 1:
            self.fail(key, "expected a flat list of numbers")
        return a


def settings_from_dict(raw, base=None, text=None):
    raw = dict(raw or {})
    names = {f.name for f in dataclasses.fields(SolverSettings)} - {"norm"}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown solver setting(s) {unknown}", _line_of(text, unknown[0]))
    base = base or SolverSettings()
    try:
        return dataclasses.replace(base, **raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}", _line_of(text, "solver")) from None


def problem_from_dict(cfg, base_dir=".", text=None):
    """Build ``(problem, k0)`` from a parsed config; ``k0`` may be None."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", 1)
    rd = _Reader(text, base_dir)
    unknown = sorted(set(cfg) - set(CONFIG_KEYS))
    if unknown:
        rd.fail(unknown[0], "unknown top-level key")
    for key in ("space", "operator", "phi"):
        if key not in cfg:
            raise ConfigError(f"missing required key {key!r}", 1)

    sp_cfg = cfg["space"]
    if not isinstance(sp_cfg, dict):
        rd.fail("space", "expected an object with 'dim' or 'weights'")
    try:
        if "weights" in sp_cfg:
            space = Space(np.asarray(sp_cfg["weights"], dtype=np.float64), sp_cfg.get("nodes"))
        elif "dim" in sp_cfg:
            dim = sp_cfg["dim"]
            if not isinstance(dim, int) or dim < 1:
                rd.fail("dim", "must be a positive integer")
            space = Space.euclidean(dim)
        else:
            rd.fail("space", "needs 'dim' or 'weights'")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        rd.fail("space", str(exc))
    if "dim" in sp_cfg and sp_cfg["dim"] != space.dim:
        rd.fail("dim", f"dim {sp_cfg['dim']} disagrees with {space.dim} weights")

    try:
        A = LinearOperator(space, rd.matrix("operator", cfg["operator"]))
    except ConfigError:
        raise
    except FredprojError as exc:
        rd.fail("operator", str(exc))
    phi = rd.vector("phi", cfg["phi"])
    if phi.shape != (space.dim,):
        rd.fail("phi", f"length {phi.size}, expected {space.dim}")

    raw_cons = cfg.get("constraints") or []
    try:
        if isinstance(raw_cons, list) and not raw_cons:
            cs = ConstraintSet.empty(space)
        else:
            Yrows = rd.matrix("constraints", raw_cons)
            cs = ConstraintSet.from_vectors(space, list(Yrows))
    except ConfigError:
        raise
    except FredprojError as exc:
        rd.fail("constraints", str(exc))

    settings = settings_from_dict(cfg.get("solver"), text=text)
    problem = Problem(A, phi, cs, settings)

    k0 = None
    if cfg.get("k_init") is not None:
        coeffs = rd.matrix("k_init", cfg["k_init"])
        try:
            k0 = build_k(cs, coeffs)
        except FredprojError as exc:
            rd.fail("k_init", str(exc))
    return problem, k0


def load_problem(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None
    return problem_from_dict(cfg, path.parent, text)


def problem_to_dict(problem, k0=None, operator="A.csv"):
    """Config dict for ``problem``; ``operator`` is a CSV path or None to inline."""
    sp = problem.space
    space = {"dim": sp.dim, "weights": sp.weights.tolist()}
    if sp.nodes is not None:
        space["nodes"] = sp.nodes.tolist()
    s = problem.settings
    solver = {f.name: getattr(s, f.name) for f in dataclasses.fields(s) if f.name != "norm"}
    return {
        "space": space,
        "operator": operator if operator is not None else problem.A.matrix.tolist(),
        "phi": problem.phi.tolist(),
        "constraints": problem.constraints.ys.T.tolist(),
        "k_init": None if k0 is None else k0.coeffs.tolist(),
        "solver": solver,
    }


def dump_problem(directory, problem, k0=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_csv(directory / "A.csv", problem.A.matrix)
    cfg = problem_to_dict(problem, k0, "A.csv")
    (directory / "problem.json").write_text(dumps(cfg, indent=1) + "\n")
    return directory / "problem.json"
