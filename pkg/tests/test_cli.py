import json
import math
import subprocess
import sys

import numpy as np
import pytest

from derham import cli
from derham import io
from derham import metric_core as mc
from derham import normed_space as ns
from derham.generate import KINDS


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def grid6(tmp_path):
    g = mc.grid([0, 1], [0, 1.5, 4])
    return write_json(tmp_path / "grid6.json", io.metric_to_dict(g))


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip().startswith("{") else out)


def test_factor_grid(grid6, capsys):
    code, rep = run(["factor", "--input", grid6], capsys)
    assert code == 0
    assert rep["schema"] == "derham/1" and rep["exit_code"] == 0
    assert rep["result"]["factor_count"] == 2 and rep["result"]["unique"] is True
    assert rep["config"]["command"] == "factor" and rep["config"]["input"] == grid6


def test_defect_square(tmp_path, capsys):
    path = write_json(tmp_path / "linf2.json", ns.p_norm("inf", 2).to_dict())
    code, rep = run(["defect", "--norm", path], capsys)
    assert code == 0
    assert rep["result"]["m_value"] == pytest.approx(math.sqrt(2), abs=1e-9)


def test_validate_triangle_violation(tmp_path, capsys):
    path = write_json(tmp_path / "bad.json", {"labels": ["x", "y", "z"], "dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]})
    code, rep = run(["validate", "--input", path], capsys)
    assert code == 2
    tri = [v for v in rep["result"]["violations"] if v["kind"] == "triangle"]
    assert set(tri[0]["points"]) == {"x", "y", "z"}


def test_missing_file_and_bad_json(tmp_path, capsys):
    code, rep = run(["factor", "--input", str(tmp_path / "nope.json")], capsys)
    assert code == 1 and "cannot read" in rep["result"]["error"]
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, rep = run(["factor", "--input", str(bad)], capsys)
    assert code == 1 and "invalid JSON" in rep["result"]["error"]
    path = write_json(tmp_path / "nodist.json", {"labels": ["a"]})
    code, rep = run(["factor", "--input", path], capsys)
    assert code == 1 and "'dist'" in rep["result"]["error"]


def test_unknown_command_exit_code():
    assert cli.main(["frobnicate"]) == 1
    code, text = cli.run(cli.RunConfig(command="frobnicate"))
    assert code == 1 and "unknown command" in text


def test_csv_input_and_output(tmp_path, capsys):
    csv_in = tmp_path / "sq.csv"
    csv_in.write_text("a,b,c,d\n0,1,2,2.23606797749979\n1,0,2.23606797749979,2\n2,2.23606797749979,0,1\n"
                      "2.23606797749979,2,1,0\n")
    code, out = run(["witnesses", "--input", str(csv_in), "--format", "csv"], capsys)
    assert code == 0
    assert out.startswith("key,value\n") and "result.count,1" in out


@pytest.mark.parametrize("kind", KINDS)
def test_generate_round_trip(kind, tmp_path):
    out = tmp_path / f"{kind}.json"
    assert cli.main(["generate", kind, "--seed", "7", "--output", str(out)]) == 0
    data = io.read_json(out)
    assert data["schema"] == "derham/1" and data["kind"] == kind
    if "space" in data:
        assert mc.validate(io.metric_from_dict(data)).ok
    else:
        assert ns.from_dict(data["norm"]).dim > 0


def test_generate_product_metric_example(tmp_path):
    out = tmp_path / "g.json"
    cli.main(["generate", "random-product-metric", "--params", '{"sizes": [2, 3]}', "--seed", "7",
              "--output", str(out)])
    data = io.read_json(out)
    assert len(data["space"]["labels"]) == 6 and data["truth"]["witness"] is not None
    assert cli.main(["factor", "--input", str(out), "--output", str(tmp_path / "r.json")]) == 0
    assert io.read_json(tmp_path / "r.json")["result"]["factor_count"] == 2


def test_generate_norm_examples(tmp_path):
    out = tmp_path / "n.json"
    cli.main(["generate", "product-norm", "--params", '{"components": ["linf2", "l12"]}', "--output", str(out)])
    assert ns.from_dict(io.read_json(out)["norm"]).dim == 4
    cli.main(["generate", "rotated-euclidean-pair", "--params", '{"dim": 4}', "--output", str(out)])
    data = io.read_json(out)
    assert len(data["A"]) == 2 and len(data["Bbar"]) == 2


def test_strike_and_eigen_on_generated_pair(tmp_path):
    pair = tmp_path / "pair.json"
    cli.main(["generate", "rotated-euclidean-pair", "--seed", "3", "--output", str(pair)])
    rep = tmp_path / "strike.json"
    assert cli.main(["strike", "--input", str(pair), "--output", str(rep)]) == 0
    assert io.read_json(rep)["result"]["verdict"] == "euclidean_confirmed"
    assert cli.main(["eigen", "--input", str(pair), "--output", str(rep)]) == 0
    assert 0 < io.read_json(rep)["result"]["lambda"] < 1


def test_strike_refusal_exit_code(tmp_path):
    e = np.eye(4)
    pair = write_json(tmp_path / "p.json", {"norm": ns.product([ns.p_norm("inf", 1)] * 4).to_dict(),
                                            "A": e[:2].tolist(), "Abar": e[2:].tolist(),
                                            "B": e[[0, 2]].tolist(), "Bbar": e[[1, 3]].tolist()})
    out = tmp_path / "r.json"
    assert cli.main(["strike", "--input", pair, "--output", str(out)]) == 2
    assert io.read_json(out)["result"]["refused"] is True


def test_other_commands(tmp_path, grid6):
    out = tmp_path / "r.json"
    assert cli.main(["isometries", "--input", grid6, "--output", str(out)]) == 0
    # K2 times the scalene line {0, 1.5, 4}
    assert io.read_json(out)["result"]["order"] == 2
    assert cli.main(["exact-sequence", "--input", grid6, "--output", str(out)]) == 0
    assert io.read_json(out)["result"]["exact"] is True
    assert cli.main(["witnesses", "--input", grid6, "--method", "brute", "--output", str(out)]) == 0
    norm = write_json(tmp_path / "n.json", ns.product([ns.p_norm("inf", 2), ns.euclidean(1)]).to_dict())
    assert cli.main(["norm-decompose", "--norm", norm, "--output", str(out)]) == 0
    assert cli.main(["loewner", "--norm", norm, "--output", str(out)]) == 0
    assert len(io.read_json(out)["result"]["shape"]) == 3
    body = write_json(tmp_path / "b.json", {"vertices": [[1, 1], [1, -1], [-1, 1], [-1, -1]]})
    assert cli.main(["gruber", "--input", body, "--output", str(out)]) == 0
    assert len(io.read_json(out)["result"]["parts"]) == 2


def test_budget_flag(tmp_path, grid6):
    out = tmp_path / "r.json"
    assert cli.main(["factor", "--input", grid6, "--budget", "4", "--output", str(out)]) == 1
    assert "budget" in io.read_json(out)["result"]["error"]


def test_determinism(tmp_path):
    norm = write_json(tmp_path / "l3.json", ns.p_norm(3, 2).to_dict())
    out = tmp_path / "r.json"
    reports = []
    for _ in range(2):
        cli.main(["defect", "--norm", norm, "--seed", "11", "--output", str(out)])
        reports.append(out.read_bytes())
    assert reports[0] == reports[1]


def test_figures(tmp_path, grid6):
    figs = tmp_path / "figs"
    out = tmp_path / "r.json"
    assert cli.main(["factor", "--input", grid6, "--figures", str(figs), "--output", str(out)]) == 0
    norm = write_json(tmp_path / "l1.json", ns.p_norm(1, 2).to_dict())
    cli.main(["loewner", "--norm", norm, "--figures", str(figs), "--output", str(out)])
    cli.main(["defect", "--norm", norm, "--figures", str(figs), "--output", str(out)])
    pngs = sorted(p.name for p in figs.iterdir())
    assert pngs == ["defect_ratios.png", "factor_distances.png", "loewner_ball.png"]
    assert all((figs / p).read_bytes()[:4] == b"\x89PNG" for p in pngs)


def test_module_entry_point(grid6):
    proc = subprocess.run([sys.executable, "-m", "derham", "factor", "--input", grid6],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["factor_count"] == 2
