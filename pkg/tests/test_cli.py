import io
import json

import pytest

from graphelliptic.api.commands import SWEEP_HEADER, parse_grid
from graphelliptic.config import settings
from graphelliptic.errors import ParseError
from graphelliptic.main import main
from tests.conftest import path_document

CUBIC_PROBLEM = {
    "lambda": 1.0,
    "f": {
        "terms": [{"kind": "pow", "c": 1.0, "k": 0}, {"kind": "pow", "c": 1.0, "k": 3}],
        "ar": {"beta": 3.0, "r0": 2.0},
    },
}


@pytest.fixture
def p3_files(write_json):
    return write_json("p3.json", path_document(3)), write_json("cubic.json", CUBIC_PROBLEM)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_info(capsys, p3_files):
    code, out, _ = run(capsys, ["info", p3_files[0]])
    assert code == 0
    report = json.loads(out)
    assert report["schema"] == 1
    assert (report["vertices"], report["edges"], report["interior_size"]) == (3, 2, 1)
    assert report["explicit_boundary"] is True


def test_lambda1(capsys, p3_files):
    code, out, _ = run(capsys, ["lambda1", p3_files[0]])
    assert code == 0
    report = json.loads(out)
    assert report["lambda1"] == pytest.approx(2.0)
    assert set(report["eigenfunction"]) == {"x1", "x2", "x3"}


def test_lambda_mp(capsys, p3_files):
    code, out, _ = run(capsys, ["lambda-mp", p3_files[0], "--m", "1", "--p", "2"])
    assert code == 0
    report = json.loads(out)
    assert report["value"] == pytest.approx(2.0)
    assert (report["converged"], report["heuristic"]) == (True, False)


def test_solve_is_reproducible(capsys, p3_files):
    argv = ["solve", *p3_files, "--seed", "5", "--budget", "32"]
    code, first, _ = run(capsys, argv)
    assert code == 0
    _, second, _ = run(capsys, argv)
    assert first == second
    report = json.loads(first)
    assert len(report["solutions"]) == 3
    assert report["seed"] == 5
    assert report["solver_trace"]["restarts"] == 32
    assert report["lambda_star"] == pytest.approx((2.0 / 3.0) * 2.0 ** (1.0 / 3.0), rel=1e-8)


def test_solve_reads_graph_from_stdin(capsys, monkeypatch, p3_files):
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(path_document(3))))
    code, out, _ = run(capsys, ["solve", "-", p3_files[1], "--budget", "8"])
    assert code == 0
    assert json.loads(out)["solutions"]


def test_solve_threads_override(capsys, monkeypatch, p3_files):
    monkeypatch.setattr(settings, "threads", settings.threads)
    code, _, _ = run(capsys, ["--threads", "1", "solve", *p3_files, "--budget", "8"])
    assert code == 0
    assert settings.threads == 1


def test_yamabe(capsys, p3_files):
    code, out, _ = run(capsys, ["solve", p3_files[0], "--yamabe", "0", "3"])
    assert code == 0
    report = json.loads(out)
    assert [s["values"]["x2"] for s in report["solutions"]] == pytest.approx([2.0], abs=1e-8)
    assert report["solutions"][0]["sign_profile"] == "positive"
    assert report["positive"] is True


def test_order_section_routes_to_mp_solver(capsys, write_json, p3_files):
    problem = write_json("mp.json", CUBIC_PROBLEM | {"order": {"m": 1, "p": 2.0}})
    code, out, _ = run(capsys, ["solve", p3_files[0], problem, "--budget", "16"])
    assert code == 0
    assert json.loads(out)["solver_trace"]["mode"] == "mp(1,2)"


def test_sweep_csv(capsys, p3_files):
    code, out, _ = run(capsys, ["sweep", *p3_files, "--lambda-grid", "0.5:1.0:2", "--budget", "32"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER)
    assert len(lines) == 3
    assert lines[1].startswith("0.5,3,")
    assert lines[1].endswith(",true")
    assert lines[2].endswith(",false")


def test_verify(capsys, p3_files):
    code, out, _ = run(capsys, ["verify", *p3_files, "--rho", "1.0"])
    assert code == 0
    report = json.loads(out)
    assert report["regime"] == "NonPositive"
    assert report["ar_two_sided"]["passed"] is True
    assert report["lambda_admissible"] is False


def test_parse_error_exit_code(capsys, write_json):
    bad = write_json("bad.json", {"vertices": [{"id": "a", "mu": -1.0}]})
    code, out, err = run(capsys, ["info", bad])
    assert code == 2
    assert out == ""
    assert "NonPositiveMeasure" in err


def test_dangling_edge_is_a_parse_error(capsys, write_json):
    doc = {"vertices": [{"id": "a", "mu": 1.0}], "edges": [{"a": "a", "b": "z", "w": 1.0}]}
    code, _, err = run(capsys, ["info", write_json("dangling.json", doc)])
    assert code == 2
    assert "DanglingEdge" in err


def test_missing_file_is_a_parse_error(capsys, tmp_path):
    code, _, _ = run(capsys, ["info", str(tmp_path / "missing.json")])
    assert code == 2


def test_domain_error_exit_code(capsys, write_json):
    doc = path_document(5, boundary=False)
    doc["domain"] = {"vertices": ["x1", "x2", "x4", "x5"]}
    code, _, err = run(capsys, ["info", write_json("split.json", doc)])
    assert code == 3
    assert "DisconnectedDomain" in err


def test_trivial_class_exit_code(capsys, p3_files):
    code, _, err = run(capsys, ["lambda-mp", p3_files[0], "--m", "2"])
    assert code == 4
    assert "TrivialConstraintClass" in err


def test_solve_without_problem(capsys, p3_files):
    code, _, _ = run(capsys, ["solve", p3_files[0]])
    assert code == 2


def test_mountain_pass_needs_rho(p3_files):
    with pytest.raises(SystemExit) as excinfo:
        main(["solve", *p3_files, "--mode", "mountain-pass"])
    assert excinfo.value.code == 2


@pytest.mark.parametrize("text", ["1:2", "a:b:3", "0:1:3", "2:1:3", "1:1:3", "1:2:0"])
def test_parse_grid_rejects(text):
    with pytest.raises(ParseError):
        parse_grid(text)


def test_parse_grid():
    assert parse_grid("0.5:1.0:3") == pytest.approx([0.5, 0.75, 1.0])
    assert parse_grid("2:2:1") == [2.0]


def test_sweep_is_independent_of_thread_count(capsys, monkeypatch, p3_files):
    monkeypatch.setattr(settings, "threads", settings.threads)
    argv = ["sweep", *p3_files, "--lambda-grid", "0.2:1.2:4", "--budget", "16"]
    _, single, _ = run(capsys, ["--threads", "1", *argv])
    _, parallel, _ = run(capsys, ["--threads", "8", *argv])
    assert single == parallel
