import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fredproj.cli import EXIT_CODES, main
from fredproj.formats import dumps

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_solution(path):
    rows = [line.split(",") for line in Path(path).read_text().splitlines()]
    nodes = np.array([float(r[1]) if r[1] else np.nan for r in rows])
    return nodes, np.array([float(r[3]) for r in rows])


def test_solve_separable_basic(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", "--corpus", "separable-basic", "--out", tmp_path)
    assert code == 0
    nodes, x = read_solution(tmp_path / "solution.csv")
    assert np.max(np.abs(x - (1 + 0.75 * nodes))) <= 1e-6
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["status"] == "solved"
    assert list(report)[:9] == ["status", "x_csv_path", "residual", "equation_residual",
                                "constraint_residual", "norm_APk", "epsilon",
                                "epsilon_unbounded", "neumann_terms"]


def test_starved_series_never_claims_solved(tmp_path, capsys):
    code, _, _ = run(capsys, "solve", "--corpus", "separable-basic", "--override",
                     "neumann_max_terms=1", "--out", tmp_path)
    assert code in (2, 4)
    assert json.loads((tmp_path / "report.json").read_text())["status"] != "solved"


def test_solve_nilpotent_csv_problem(tmp_path, capsys):
    code, _, _ = run(capsys, "solve", "--config", CONFIGS / "nilpotent3" / "problem.json",
                     "--out", tmp_path)
    assert code == 2


def test_solve_two_by_two_with_k_override(tmp_path, capsys):
    code, _, _ = run(capsys, "solve", "--config", CONFIGS / "two_by_two.json",
                     "--override", "k_init=[[1]]", "--out", tmp_path)
    assert code == 0
    _, x = read_solution(tmp_path / "solution.csv")
    assert np.allclose(x, [0, 1], atol=1e-12)


def test_malformed_config_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n "space": {"dim": 2},\n "operator": [[1, 2]],\n "phi": [1, 2]\n}\n')
    code, _, err = run(capsys, "solve", "--config", bad, "--out", tmp_path)
    assert code == 1 and "line 3" in err
    code, _, err = run(capsys, "solve", "--config", tmp_path / "missing.json")
    assert code == 1
    code, _, err = run(capsys, "solve", "--corpus", "separable-basic", "--override", "x")
    assert code == 1


def test_report_json_is_deterministic(tmp_path, capsys, monkeypatch):
    texts = []
    for sub in ("a", "b"):
        d = tmp_path / sub
        d.mkdir()
        monkeypatch.chdir(d)
        assert run(capsys, "solve", "--corpus", "tensor-demo", "--out", "out", "--seed", 3)[0] == 0
        texts.append((d / "out" / "report.json").read_bytes())
    assert texts[0] == texts[1]


def test_lemmas_small_run(tmp_path, capsys):
    code, out, _ = run(capsys, "lemmas", "--seed", 42, "--trials", 3, "--out", tmp_path / "l.txt")
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 15
    assert [json.loads(line)["check"] for line in lines[::3]] == [
        "pairing", "reorder", "cauchy", "perturb", "split"]
    assert (tmp_path / "l.txt").read_text() == out


def test_lemmas_pairing_head(capsys):
    code, out, _ = run(capsys, "lemmas", "--which", "pairing", "--trials", 1)
    assert code == 0
    assert json.loads(out)["detail"]["head"][0] == [0, 0]


def test_lemmas_deterministic_and_parallel(capsys):
    a = run(capsys, "lemmas", "--seed", 7, "--trials", 4, "--which", "reorder,perturb")[1]
    b = run(capsys, "lemmas", "--seed", 7, "--trials", 4, "--which", "reorder,perturb")[1]
    c = run(capsys, "lemmas", "--seed", 7, "--trials", 4, "--which", "reorder,perturb",
            "--jobs", 2)[1]
    assert a == b == c


def test_lemmas_unknown_check(capsys):
    assert run(capsys, "lemmas", "--which", "pairing,nonsense")[0] == 1
    assert run(capsys, "lemmas", "--trials", 0)[0] == 1


def test_region_two_by_two(capsys):
    code, out, _ = run(capsys, "region", "--config", CONFIGS / "two_by_two.json", "--probe", 20)
    assert code == 0
    doc = json.loads(out)
    assert doc["epsilon"] == pytest.approx(1.7735, abs=1e-3)
    assert doc["exact"] is True
    assert doc["persisted"] == 20


def test_region_zero_operator(capsys):
    code, out, _ = run(capsys, "region", "--config", CONFIGS / "zero_operator.json")
    doc = json.loads(out)
    assert code == 0 and doc["unbounded"] is True and doc["epsilon"] is None


def test_region_without_contraction(tmp_path, capsys):
    cfg = tmp_path / "big.json"
    cfg.write_text(json.dumps({"space": {"dim": 3}, "operator": (1.5 * np.eye(3)).tolist(),
                               "phi": [1, 1, 1], "constraints": [[1, 0, 0]]}))
    assert run(capsys, "region", "--config", cfg)[0] == 3
    assert run(capsys, "solve", "--config", cfg, "--out", tmp_path)[0] == 3


def test_corpus_commands(tmp_path, capsys):
    code, out, _ = run(capsys, "corpus", "list")
    assert code == 0 and len(out.splitlines()) == 3
    code, out, _ = run(capsys, "corpus", "dump", "separable-basic", "--out", tmp_path)
    assert code == 0
    code, _, _ = run(capsys, "solve", "--config", out.strip(), "--out", tmp_path / "s")
    assert code == 0


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_exit_code_is_a_function_of_status(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 6))
    A = rng.standard_normal((d, d)) * rng.uniform(0.1, 1.5) / np.sqrt(d)
    cfg = {
        "space": {"weights": rng.uniform(0.5, 2.0, d).tolist()},
        "operator": A.tolist(),
        "phi": rng.standard_normal(d).tolist(),
        "constraints": rng.standard_normal((1, d)).tolist(),
        "solver": {"search": ["newton", "nelder-mead", "none"][int(rng.integers(0, 3))],
                   "search_max_iters": 20},
    }
    out = tmp_path_factory.mktemp("fuzz")
    (out / "p.json").write_text(dumps(cfg))
    code = main(["solve", "--config", str(out / "p.json"), "--out", str(out)])
    report = json.loads((out / "report.json").read_text())
    assert code == EXIT_CODES[report["status"]]
    if report["status"] == "solved":
        _, x = read_solution(out / "solution.csv")
        w = np.array(cfg["space"]["weights"])
        r = A @ x + np.array(cfg["phi"]) - x
        assert np.sqrt(np.sum(w * r * r)) <= 1e-8
