import io
import json
import math

import pytest

from biconnect import EXIT_DISAGREE, EXIT_FAIL, EXIT_INPUT, EXIT_PASS, main
from utils.fixtures import resolve_path


@pytest.fixture
def run(tmp_path):
    """Run the CLI quietly and return (exit code, parsed report)"""
    def _run(*args, out="report.json"):
        path = tmp_path / out
        code = main(["--quiet", "--out", str(path), *args])
        report = json.loads(path.read_text(encoding="utf-8")) if path.exists() else None
        return code, report
    return _run


def test_fourier_is_biunitary(run):
    code, report = run("check-biunitary", "fourier3.json")
    assert code == EXIT_PASS
    assert report["connection"]["passed"]
    assert report["tensor"]["passed"]
    assert report["tol"] == 1e-9


def test_identity_is_not_biunitary(run):
    code, report = run("check-biunitary", "identity3.json")
    assert code == EXIT_FAIL
    assert not report["connection"]["passed"]


def test_builtin_connection_reference(run):
    assert run("check-biunitary", "example:fourier(4)")[0] == EXIT_PASS
    assert run("check-biunitary", "example:parallel(3)")[0] == EXIT_PASS


def test_bad_cell_is_an_input_error(run):
    code, report = run("check-biunitary", "bad_cell.json")
    assert code == EXIT_INPUT
    assert report is None


@pytest.mark.parametrize("args", [
    ("check-biunitary", "missing.json"),
    ("check-biunitary", "example:fourier"),
    ("no-such-command",),
    ("example", "--id", "example7"),
])
def test_input_errors(run, args):
    assert run(*args)[0] == EXIT_INPUT


def test_stdin_connection(run, monkeypatch):
    with open(resolve_path("fourier2.json"), encoding="utf-8") as f:
        monkeypatch.setattr("sys.stdin", io.StringIO(f.read()))
    assert run("check-biunitary", "-")[0] == EXIT_PASS


def test_malformed_stdin(run, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO("{not json"))
    assert run("check-biunitary", "-")[0] == EXIT_INPUT


def test_example_weights(run):
    code, report = run("example", "--id", "example2")
    assert code == EXIT_PASS
    assert report["beta0"] == pytest.approx(2 * math.cos(math.pi / 12), abs=1e-9)
    assert set(report["mu"]) == {"V0", "V1", "V2", "V3"}


def test_pf_command(run):
    code, report = run("pf", "example:example1")
    assert code == EXIT_PASS
    assert report["beta0"] ** 2 == pytest.approx(3.0)
    assert max(report["residuals"].values()) < 1e-10


def test_validate(run):
    assert run("validate", "example1.json")[0] == EXIT_PASS
    code, report = run("validate", "disconnected.json")
    assert code == EXIT_FAIL
    assert not report["passed"]


def test_irreducible(run):
    code, report = run("irreducible", "fourier3.json")
    assert code == EXIT_PASS
    assert report["dimension"] == 1
    assert run("irreducible", "identity3.json")[0] == EXIT_FAIL


def test_flat_fields(run):
    code, report = run("flat-fields", "fourier2.json")
    assert code == EXIT_PASS
    assert report["dimension"] == 1
    assert max(report["defects"]) < 1e-9


def test_theorem_on_fixed_fields(run):
    code, report = run("theorem-verify", "fourier3.json", "--field", "random_field_fourier3.json")
    assert code == EXIT_FAIL
    assert report["agreement"]
    assert not any(report["verdicts"].values())
    assert run("theorem-verify", "fourier3.json", "--field", "nonflat_field_fourier3.json")[0] == EXIT_FAIL


def test_theorem_suite(run):
    code, report = run("--seed", "11", "theorem-verify", "fourier3.json", "--samples", "5")
    assert code == EXIT_PASS
    assert code != EXIT_DISAGREE
    assert report["flat_dimension"] == 1
    assert len(report["reports"]) == 7
    assert report["seed"] == 11


def test_suite_reports_are_deterministic(run, tmp_path):
    args = ("--seed", "2", "theorem-verify", "fourier2.json", "--samples", "4")
    run(*args, out="first.json")
    main(["--quiet", "--parallel", "3", "--out", str(tmp_path / "second.json"), *args])
    first = (tmp_path / "first.json").read_text(encoding="utf-8")
    assert first == (tmp_path / "second.json").read_text(encoding="utf-8")


def test_action_check(run):
    assert run("action-check", "fourier3.json", "--levels", "2")[0] == EXIT_PASS
    code, report = run("action-check", "fourier3.json", "--field", "nonflat_field_fourier3.json")
    assert code == EXIT_FAIL
    assert report["defects"]["0"] >= 1e-4


def test_renormalize_then_multiply(run, tmp_path):
    assert run("renorm", "fourier3.json", "--mode", "bar", out="bar.json")[0] == EXIT_PASS
    code, _ = run("product", "fourier3.json", str(tmp_path / "bar.json"), out="product.json")
    assert code == EXIT_PASS
    assert run("check-biunitary", str(tmp_path / "product.json"))[0] == EXIT_PASS


def test_direct_sum_is_reducible(run, tmp_path):
    assert run("dsum", "fourier3.json", "fourier3.json", out="sum.json")[0] == EXIT_PASS
    code, report = run("irreducible", str(tmp_path / "sum.json"))
    assert code == EXIT_FAIL
    assert report["dimension"] == 4


def test_tolerance_from_environment(run, monkeypatch):
    monkeypatch.setenv("BICONNECT_TOL", "1e-6")
    _, report = run("check-biunitary", "fourier2.json")
    assert report["tol"] == 1e-6


@pytest.mark.parametrize("command, text", [
    ("validate", "[1, 2]"),
    ("pf", "5"),
    ("check-biunitary", '{"config": "example:hadamard(2)", "values": 7}'),
    ("check-biunitary", '{"config": "example:hadamard(2)", "values": [3]}'),
    ("check-biunitary", '"fourier2.json"'),
])
def test_wrongly_shaped_stdin(run, monkeypatch, command, text):
    monkeypatch.setattr("sys.stdin", io.StringIO(text))
    code, report = run(command, "-")
    assert code == EXIT_INPUT
    assert report is None


def test_unbalanced_stored_weights(run, monkeypatch):
    with open(resolve_path("fourier2.json"), encoding="utf-8") as f:
        data = json.load(f)
    data["config"] = {
        "layers": {"V0": ["0"], "V1": ["0", "1"], "V2": ["0"], "V3": ["0", "1"]},
        "graphs": {
            "G0": [{"id": k, "src": "0", "dst": str(k)} for k in range(2)],
            "G1": [{"id": k, "src": "0", "dst": str(k)} for k in range(2)],
            "G2": [{"id": k, "src": str(k), "dst": "0"} for k in range(2)],
            "G3": [{"id": k, "src": str(k), "dst": "0"} for k in range(2)],
        },
        "mu": {"V0": [1.0], "V1": [1.0, 1.0], "V2": [1.0], "V3": [1.0, 1.0]},
        "beta0": 1.0,
        "beta1": 1.0,
    }
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(data)))
    assert run("check-biunitary", "-")[0] == EXIT_INPUT


def test_renormalization_reports_kappa(run):
    code, report = run("renorm", "fourier3.json")
    assert code == EXIT_PASS
    assert report["kind"] == "connection"
    assert len(report["kappa"]) == 3
    assert all(k == pytest.approx(math.sqrt(3)) for row in report["kappa"] for k in row)
