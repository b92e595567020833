import json

import numpy as np
import pytest

from orthoplab.cli import main
from orthoplab.grid import from_csv


def run(tmp_path, command, config, *extra, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config) if not isinstance(config, str) else config)
    out = tmp_path / "runs"
    code = main([command, "--config", str(path), "--out", str(out), *extra])
    dirs = sorted(out.iterdir()) if out.exists() else []
    return code, dirs


def solve_cfg(**problem):
    return {"schema": "orthoplab.solve/1", "problem": {"p": 4.0, "n": 17, **problem}}


def test_solve_affine(tmp_path):
    code, [d] = run(tmp_path, "solve", solve_cfg(boundary="affine", a=1.0, b=-2.0))
    assert code == 0
    u = from_csv((d / "solution.csv").read_text())
    x1, x2 = u.domain.coords()
    np.testing.assert_allclose(u.values, x1 - 2 * x2, atol=1e-13)
    assert json.loads((d / "report.json").read_text())["iters"] == 0


def test_solve_model(tmp_path):
    code, [d] = run(tmp_path, "solve", solve_cfg(n=33))
    report = json.loads((d / "report.json").read_text())
    assert code == 0 and report["converged"] and report["final_grad_norm"] <= 1e-9


def test_solve_nonconvergence(tmp_path):
    cfg = solve_cfg()
    cfg["solver"] = {"max_newton_iters": 0}
    code, [d] = run(tmp_path, "solve", cfg)
    assert code == 2
    assert (d / "best.csv").exists() and not (d / "solution.csv").exists()


@pytest.mark.parametrize(
    "text",
    [
        "{not json",
        json.dumps({"schema": "orthoplab.solve/2", "problem": {"p": 4.0}}),
        json.dumps({"schema": "orthoplab.solve/1", "problem": {"p": 4.0, "colour": "red"}}),
        json.dumps({"schema": "orthoplab.solve/1", "problem": {"p": 0.5}}),
        json.dumps({"schema": "orthoplab.solve/1", "problem": {"p": 4.0}, "solver": {"eps_schedule": [1e-3, 1e-2]}}),
        json.dumps({"schema": "orthoplab.solve/1", "problem": {"p": 4.0}, "solver": {"armijo_c": 0.7}}),
    ],
)
def test_config_errors_leave_no_output(tmp_path, text, capsys):
    code, dirs = run(tmp_path, "solve", text)
    assert code == 1 and dirs == []
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1


def test_verify_empty(tmp_path):
    code, [d] = run(tmp_path, "verify", {"schema": "orthoplab.verify/1", "problems": []})
    assert code == 0
    assert json.loads((d / "verify.json").read_text()) == {"problems": []}


def test_verify_negative_control(tmp_path):
    cfg = {
        "schema": "orthoplab.verify/1",
        "problems": [{"p": 4.0, "n": 33, "boundary": "dip", "source": "sample"}],
        "batteries": ["min_principle"],
    }
    code, [d] = run(tmp_path, "verify", cfg)
    assert code == 3
    assert json.loads((d / "verify.json").read_text())["dump"] == "violations.json"
    assert json.loads((d / "violations.json").read_text())


def test_verify_standard_battery_is_deterministic(tmp_path):
    cfg = {
        "schema": "orthoplab.verify/1",
        "problems": [{"p": 4.0, "n": 33}, {"p": 1.5, "n": 33}, {"p": 4.0, "n": 33, "boundary": "saddle"}],
        "balls": 10,
        "min_principle_balls": 5,
        "negative_control": True,
    }
    code, [d] = run(tmp_path, "verify", cfg, "--seed", "5")
    first = (d / "verify.json").read_bytes()
    assert code == 0
    code, [d2] = run(tmp_path, "verify", cfg, "--seed", "5", "--threads", "3")
    assert code == 0 and d2 == d
    assert (d / "verify.json").read_bytes() == first
    report = json.loads(first)
    assert report["negative_control"] == {"detected": True}
    assert all(p["alternatives"]["violations"] == [] for p in report["problems"])


def test_seed_changes_run_directory(tmp_path):
    cfg = {"schema": "orthoplab.inequalities/1", "samples": 200}
    _, [a] = run(tmp_path, "inequalities", cfg, "--seed", "1")
    _, dirs = run(tmp_path, "inequalities", cfg, "--seed", "2")
    assert len(dirs) == 2 and a in dirs


def test_inequalities(tmp_path):
    code, [d] = run(tmp_path, "inequalities", {"schema": "orthoplab.inequalities/1", "samples": 2000})
    assert code == 0
    assert (d / "batteries.csv").read_text().startswith("id,samples,worst_ratio,argmax\n")
    assert json.loads((d / "witnesses.json").read_text())


def trace_cfg(**problem):
    return {"schema": "orthoplab.trace/1", "problem": {"p": 4.0, "n": 33, **problem}}


def test_trace_constant(tmp_path):
    code, [d] = run(tmp_path, "trace", trace_cfg(boundary="constant", c=1.0))
    rows = (d / "trace.csv").read_text().splitlines()
    assert code == 0 and len(rows) == 2
    assert rows[1].split(",")[2] == "0"


def test_trace_affine(tmp_path):
    code, [d] = run(tmp_path, "trace", trace_cfg(boundary="affine", a=1.0, b=0.5))
    rows = [r.split(",") for r in (d / "trace.csv").read_text().splitlines()[1:]]
    assert code == 0
    assert all(r[4] in ("B1", "stopped") for r in rows)


def test_trace_model(tmp_path):
    cfg = trace_cfg(n=65)
    cfg["delta_min"] = 0.4
    code, [d] = run(tmp_path, "trace", cfg)
    rows = [r.split(",") for r in (d / "trace.csv").read_text().splitlines()[1:]]
    M = [float(r[2]) for r in rows]
    assert code == 0 and len(rows) >= 3
    assert all(b <= a for a, b in zip(M, M[1:]))


def test_trace_ball_too_small(tmp_path):
    cfg = trace_cfg()
    cfg["radius"] = 0.05
    code, dirs = run(tmp_path, "trace", cfg)
    assert code == 4 and dirs == []


def test_stream(tmp_path):
    # The final eps = 1e-6 leaves a curl defect of order eps * |Laplacian u|.
    cfg = {"schema": "orthoplab.stream/1", "problem": {"p": 4.0, "n": 17}, "threshold": 1e-4}
    code, [d] = run(tmp_path, "stream", cfg)
    report = json.loads((d / "report.json").read_text())
    assert code == 0 and report["curl_defect"] <= 1e-4
    assert from_csv((d / "stream.csv").read_text()).values.shape == (16, 16)


def test_stream_curl_too_large(tmp_path):
    cfg = {"schema": "orthoplab.stream/1", "problem": {"p": 4.0, "n": 17, "boundary": "dip", "source": "sample"},
           "threshold": 1e-6}
    code, _ = run(tmp_path, "stream", cfg)
    assert code == 3


def test_threads_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ORTHO_P_LAB_THREADS", "2")
    code, _ = run(tmp_path, "verify", {"schema": "orthoplab.verify/1", "problems": [{"p": 4.0, "n": 17}], "balls": 3,
                                         "min_principle_balls": 2})
    assert code == 0
