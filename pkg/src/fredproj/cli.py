"""Command-line entry point.

    fredproj solve  (--corpus NAME | --config FILE) [--override KEY=VALUE ...] [--out DIR]
    fredproj lemmas [--seed N] [--trials N] [--which pairing,reorder,cauchy,perturb,split]
    fredproj region (--corpus NAME | --config FILE) [--probe N] [--seed N]
    fredproj corpus list | dump NAME --out DIR

Exit codes of ``solve``: 0 solved, 2 residual-nonzero, 3 norm-ge-one,
4 search-failed, 1 configuration or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _kernels
from .discretize import CORPUS_NAMES, corpus, default_k
from .errors import ConfigError, ContractionError, FredprojError
from .formats import dump_problem, dumps, load_problem, report_dict, settings_from_dict, write_solution_csv
from .projection import build_k
from .series import CHECKS, run_check
from .solver import probe_region, region_radius, solve_constrained

logger = logging.getLogger("fredproj")

EXIT_CODES = {"solved": 0, "residual-nonzero": 2, "norm-ge-one": 3, "search-failed": 4}
EXIT_CONFIG = 1


def exit_code(status):
    return EXIT_CODES[status]


def _setup_logging():
    level = os.environ.get("FREDPROJ_LOG", "error").strip().upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _parse_overrides(items):
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        try:
            out[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            out[key.strip()] = value
    return out


def _load(args):
    """(problem, k0, label) from --corpus or --config plus overrides."""
    if args.corpus:
        cp = corpus(args.corpus)
        problem, k0, label = cp.problem, default_k(cp), args.corpus
    else:
        problem, k0 = load_problem(args.config)
        label = str(args.config)
        if k0 is None:
            k0 = build_k(problem.constraints)
    overrides = _parse_overrides(args.override)
    coeffs = overrides.pop("k_init", None)
    if overrides:
        problem = replace(problem, settings=settings_from_dict(overrides, problem.settings))
    if coeffs is not None:
        try:
            k0 = build_k(problem.constraints, coeffs)
        except (FredprojError, TypeError, ValueError) as exc:
            raise ConfigError(f"override k_init: {exc}") from None
    return problem, k0, label


def _reverify(problem, report):
    """Independent re-check before anything is written out as solved."""
    if not report.solved:
        return report
    tol = 10 * problem.settings.residual_tol
    x = report.x
    eq = problem.space.norm(problem.A.apply(x) + problem.phi - x)
    con = float(np.max(np.abs(problem.constraints.values(x)), initial=0.0))
    if eq > tol or con > tol:
        logger.error("re-verification failed: equation %.3e, constraints %.3e", eq, con)
        report.status = "residual-nonzero"
        report.message = "solution failed re-verification"
    return report


def cmd_solve(args):
    problem, k0, label = _load(args)
    report = _reverify(problem, solve_constrained(problem, k0))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x_path = None
    if report.x is not None:
        x_path = out / "solution.csv"
        write_solution_csv(x_path, problem.space, report.x)
    doc = report_dict(report, x_path)
    (out / "report.json").write_text(dumps(doc, indent=1) + "\n")
    print(f"{label}: {report.status} (equation residual {report.equation_residual:.3e}, "
          f"constraint residual {report.constraint_residual:.3e})")
    return exit_code(report.status)


def _lemma_line(job):
    name, seed, trial = job
    rep = run_check(name, seed, trial)
    doc = {"check": name, "trial": trial}
    doc.update((k, v) for k, v in rep.to_dict().items() if k != "name")
    return dumps(doc), rep.passed or rep.skipped


def _parse_which(values):
    names = []
    for v in values or [",".join(CHECKS)]:
        names.extend(p.strip() for p in v.split(",") if p.strip())
    bad = [n for n in names if n not in CHECKS]
    if bad:
        raise ConfigError(f"unknown check(s) {bad}; choose from {list(CHECKS)}")
    return names


def cmd_lemmas(args):
    names = _parse_which(args.which)
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    jobs = [(n, args.seed + t, t) for n in names for t in range(args.trials)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_lemma_line, jobs, chunksize=8))
    else:
        results = [_lemma_line(j) for j in jobs]
    lines = [line for line, _ in results]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    failed = sum(not ok for _, ok in results)
    if failed:
        logger.error("%d of %d checks failed", failed, len(results))
    return 0 if failed == 0 else 2


def cmd_region(args):
    problem, k0, label = _load(args)
    report = solve_constrained(problem, k0)
    if report.status == "norm-ge-one":
        print(dumps({"status": report.status, "message": report.message}))
        return EXIT_CODES["norm-ge-one"]
    k = report.k if report.solved else k0
    try:
        if args.probe:
            region, persisted, worst = probe_region(problem, k, args.probe,
                                                    np.random.default_rng(args.seed))
        else:
            region = region_radius(problem, k)
    except ContractionError as exc:
        print(dumps({"status": "norm-ge-one", "message": str(exc)}))
        return EXIT_CODES["norm-ge-one"]
    doc = {"problem": label, "solve_status": report.status}
    doc.update(region.to_dict())
    if args.probe:
        doc.update({"probes": args.probe, "persisted": persisted,
                    "persistence_rate": persisted / args.probe, "max_residual": worst})
    print(dumps(doc, indent=1))
    return 0


def cmd_corpus(args):
    if args.action == "list":
        for name in CORPUS_NAMES:
            print(f"{name}: {corpus(name).description}")
        return 0
    if not args.name:
        raise ConfigError("corpus dump needs a problem name")
    cp = corpus(args.name)
    path = dump_problem(Path(args.out) / cp.name, cp.problem, cp.k0)
    print(path)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fredproj",
        description="Constrained solutions of x = A x + phi by projection-like operators",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s 0.1.0 ({_kernels.backend()} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    def problem_source(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--corpus", choices=CORPUS_NAMES)
        src.add_argument("--config", type=Path, help="problem JSON config")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="solver setting override (repeatable)")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("solve", help="solve one constrained problem")
    problem_source(p)
    p.add_argument("--out", default=".", help="directory for solution.csv and report.json")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("lemmas", help="run the seeded series-identity checks")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--which", action="append", help="comma-separated subset of " + ",".join(CHECKS))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="also write the JSON lines here")
    p.set_defaults(func=cmd_lemmas)

    p = sub.add_parser("region", help="estimate the radius of the solution region in k")
    problem_source(p)
    p.add_argument("--probe", type=int, default=0, help="random perturbation solves at 0.9*eps")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("corpus", help="list or dump the reference problems")
    p.add_argument("action", choices=("list", "dump"))
    p.add_argument("name", nargs="?", choices=CORPUS_NAMES)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FredprojError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
