import json

import numpy as np
import pytest
from click.testing import CliRunner

from hydrogep.cli import fingerprint, main, resolve_config
from hydrogep.decomp import SolveOptions, solve
from hydrogep.decomp.io import ArtifactError, read_solution, read_trace, solution_document, write_trace
from hydrogep.scenario import load_csv


@pytest.fixture(scope="module")
def scen_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("scen") / "two.csv"
    r = CliRunner().invoke(main, ["generate", "--system", "d1", "--spec", "d1", "-n", "2", "--seed", "5", "-o", str(p)])
    assert r.exit_code == 0, r.output
    return p


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_generate_is_deterministic(tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    for p, seed in ((a, 3), (b, 3), (c, 4)):
        r = invoke("generate", "--system", "d1", "--spec", "d1", "-n", 50, "--seed", seed, "-o", p)
        assert r.exit_code == 0, r.output
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()
    assert load_csv(a).count == 50


def test_trace_round_trip(tmp_path, d1_compact):
    rep = solve(d1_compact, "bdmm", SolveOptions(record_time=False))
    write_trace(tmp_path / "t.csv", rep, {"seed": 1})
    header, rows = read_trace(tmp_path / "t.csv")
    assert header["schema"] == "gep-trace/1" and header["seed"] == "1"
    assert [r["lb"] for r in rows] == [r.lb for r in rep.records]
    assert [r["best_ub"] for r in rows] == [r.best_ub for r in rep.records]
    doc = solution_document(d1_compact, rep)
    lay = d1_compact.layout
    for entry in doc["decision_rule"]:
        t, h = entry["stage"] - 1, lay.hydro_names.index(entry["hydro"])
        assert entry["intercept"] == rep.x[lay.ldr0_index(h, t)]
        for j, name in enumerate(lay.hydro_names):
            assert entry["slopes"][name] == rep.x[lay.ldr_index(h, t, j)]


def test_read_trace_rejects_other_files(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ArtifactError):
        read_trace(p)


def test_solve_writes_artifacts_and_is_worker_independent(tmp_path, scen_file):
    outs = []
    for workers in (1, 4):
        out = tmp_path / f"w{workers}"
        r = invoke("solve", "--scenarios", scen_file, "--method", "bdmm", "--workers", workers,
                   "--no-time", "-o", out)
        assert r.exit_code == 0, r.output
        outs.append(out)
    assert (outs[0] / "trace.csv").read_bytes() == (outs[1] / "trace.csv").read_bytes()
    assert (outs[0] / "solution.json").read_bytes() == (outs[1] / "solution.json").read_bytes()
    doc = json.loads((outs[0] / "solution.json").read_text())
    assert doc["schema"] == "gep-solution/1" and doc["termination"] == "converged"
    assert set(doc["investments"]) <= {0, 1}
    assert "upper bound" in (outs[0] / "summary.txt").read_text()


def test_evaluate_writes_metrics(tmp_path, scen_file):
    out = tmp_path / "run"
    assert invoke("solve", "--scenarios", scen_file, "--method", "tbd", "-o", out).exit_code == 0
    oos = tmp_path / "oos.csv"
    assert invoke("generate", "--system", "d1", "--spec", "d1", "-n", 12, "--seed", 8, "-o", oos).exit_code == 0
    r = invoke("evaluate", "--scenarios", scen_file, "--solution", out / "solution.json", "--oos", oos, "-o", out)
    assert r.exit_code == 0, r.output
    m = json.loads((out / "metrics.json").read_text())
    assert m["schema"] == "gep-metrics/1" and m["oos_count"] == 12
    assert (out / "price_quantiles.csv").read_text().startswith("# schema=gep-price-quantiles/1")


def test_exit_codes(tmp_path, scen_file):
    assert invoke("solve", "--method", "simplex").exit_code == 2
    assert invoke("solve", "--method", "tbd", "--rho", 1.0).exit_code == 2
    assert invoke("solve", "--eps", 0).exit_code == 2
    assert invoke("evaluate", "--solution", tmp_path / "missing.json").exit_code == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"methd": "tbd"}')
    assert invoke("solve", "--config", bad).exit_code == 2
    capped = ["solve", "--scenarios", scen_file, "--method", "tbd", "--max-iter", 1, "-o", tmp_path / "c"]
    assert invoke(*capped).exit_code == 4
    assert invoke(*capped, "--warn-nonconvergence").exit_code == 0


def test_config_file_and_fingerprint(tmp_path, scen_file):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"method": "bdmm", "scenarios": {"file": str(scen_file)}, "workers": 2}))
    a = resolve_config(cfg)
    assert a["method"] == "bdmm" and a["workers"] == 2
    b = resolve_config(cfg, workers=7, output="elsewhere")
    assert fingerprint(a) == fingerprint(b)
    assert fingerprint(a) != fingerprint(resolve_config(cfg, eps=1e-4))


def test_compare_table(tmp_path, scen_file):
    r = invoke("compare", "--scenarios", scen_file, "--methods", "de,tbd", "-o", tmp_path)
    assert r.exit_code == 0, r.output
    lines = (tmp_path / "compare.csv").read_text().splitlines()
    assert lines[1].startswith("method,iterations")
    objs = [float(l.split(",")[3]) for l in lines[2:]]
    assert abs(objs[0] - objs[1]) <= 1e-3 * abs(objs[0])
    assert invoke("compare", "--methods", "de,nope").exit_code == 2


def test_solution_checks_model(tmp_path, d1_compact, scen_file):
    out = tmp_path / "s"
    assert invoke("solve", "--scenarios", scen_file, "--method", "de", "-o", out).exit_code == 0
    doc = read_solution(out / "solution.json", d1_compact)
    assert isinstance(doc["x"], np.ndarray) and doc["x"].shape == (d1_compact.n1,)
    broken = json.loads((out / "solution.json").read_text())
    broken["x"] = broken["x"][:-1]
    (tmp_path / "broken.json").write_text(json.dumps(broken))
    with pytest.raises(ArtifactError):
        read_solution(tmp_path / "broken.json", d1_compact)
