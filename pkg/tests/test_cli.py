import json
import subprocess

import pytest

from cubecat.cli import main
from cubecat.complexes import grid_complex, save_complex
from cubecat.spectral import cycle_graph, save_graph


@pytest.fixture
def square_file(tmp_path):
    path = tmp_path / "square.json"
    save_complex(grid_complex(1, 1), str(path))
    return str(path)


@pytest.fixture
def c4_file(tmp_path):
    path = tmp_path / "c4.txt"
    save_graph(cycle_graph(4), str(path))
    return str(path)


@pytest.fixture
def vertex_measure(tmp_path):
    path = tmp_path / "measure.json"
    path.write_text(json.dumps({"atoms": [
        {"point": {"vertex": 0}, "weight": 0.5},
        {"point": {"vertex": 3}, "weight": 0.5},
    ]}))
    return str(path)


def test_validate_ok(square_file, capsys):
    assert main(["validate", square_file]) == 0
    assert capsys.readouterr().out.startswith("ok:")


def test_validate_reports_violations(square_file, tmp_path, capsys):
    raw = json.loads(open(square_file).read())
    raw["edges"] = raw["edges"][:-1]
    bad = tmp_path / "broken.json"
    bad.write_text(json.dumps(raw))
    assert main(["validate", str(bad)]) == 1
    out = capsys.readouterr().out
    assert "missing-cube-edge" in out
    assert len(out.strip().splitlines()) == 1


def test_validate_missing_file(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nope.json")]) == 2
    assert "error:" in capsys.readouterr().err


def test_geodesic_between_vertices(square_file, capsys):
    assert main(["geodesic", square_file, "--from", "0", "--to", "3"]) == 0
    out = capsys.readouterr().out
    assert "distance 1.41421356237" in out
    mid = next(l for l in out.splitlines() if l.startswith("t=0.5"))
    point = json.loads(mid.split(": ", 1)[1])
    assert point["coords"] == [0.5, 0.5]


def test_geodesic_in_tangent_cone(square_file, capsys):
    rc = main([
        "geodesic", square_file,
        "--from", "0:0.5", "--to", "1:1.0", "--cone", "0",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("distance 1.11803398875")


def test_barycenter_of_vertex_pair(square_file, vertex_measure, capsys):
    rc = main(["barycenter", square_file, "--measure", vertex_measure])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    point = json.loads(lines[0])
    assert point["coords"] == [0.5, 0.5]
    assert lines[1] == "mean squared distance 0.5"


def test_distortion_csv(square_file, tmp_path, capsys):
    out_csv = tmp_path / "dist.csv"
    rc = main([
        "distortion", square_file,
        "--vertex", "0", "--samples", "40", "--seed", "2", "--csv", str(out_csv),
    ])
    assert rc == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "pair,d_cone,d_embedded,ratio"
    assert len(lines) == 41
    for line in lines[1:]:
        ratio = float(line.split(",")[3])
        assert 1 / 2**0.5 - 1e-9 <= ratio <= 1 + 1e-9
    assert "0 outside the sqrt(2) window" in capsys.readouterr().out


def test_delta_single_measure(square_file, vertex_measure, capsys):
    rc = main([
        "delta", square_file,
        "--measure", vertex_measure, "--iters", "400", "--seed", "3",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    value = float(out.splitlines()[0].split()[1])
    assert value <= 1e-8
    assert "feasible 1" in out


def test_delta_survey_csv(square_file, tmp_path, capsys):
    out_csv = tmp_path / "survey.csv"
    rc = main([
        "delta-survey", square_file,
        "--trials", "4", "--seed", "5", "--iters", "300", "--csv", str(out_csv),
    ])
    assert rc == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "space_name,space_kind,n_atoms,value,feasible,max_violation"
    assert len(lines) == 5
    assert "max delta" in capsys.readouterr().out


def test_lambda1(c4_file, capsys):
    assert main(["lambda1", c4_file]) == 0
    assert capsys.readouterr().out.strip() == "1"


def test_wang_lambda1_with_witness(c4_file, tmp_path, capsys):
    wit = tmp_path / "wit.json"
    rc = main([
        "wang-lambda1", c4_file,
        "--space", "builtin:segment", "--restarts", "3", "--seed", "0",
        "--witness", str(wit),
    ])
    assert rc == 0
    assert float(capsys.readouterr().out.strip()) == pytest.approx(1.0, abs=1e-3)
    assert len(json.loads(wit.read_text())) == 4


def test_wang_lambda1_complex_file(c4_file, square_file, capsys):
    rc = main([
        "wang-lambda1", c4_file,
        "--space", square_file, "--restarts", "2", "--seed", "0",
    ])
    assert rc == 0
    assert float(capsys.readouterr().out.strip()) <= 1.0 + 1e-3


def test_sandwich_csv_row(c4_file, capsys):
    rc = main([
        "sandwich", c4_file,
        "--space", "builtin:tripod", "--restarts", "3", "--seed", "0",
    ])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "lambda1,delta_upper,lambda_wang,lower,upper,upper_ok,lower_ok"
    assert len(lines) == 2
    assert lines[1].endswith(",1,1")


def test_sandwich_failing_window_exit_code(c4_file, capsys):
    # a negative spreading bound pushes the lower window edge above the gap
    rc = main([
        "sandwich", c4_file,
        "--space", "builtin:segment", "--restarts", "2", "--seed", "0",
        "--delta", "-0.5",
    ])
    assert rc == 1
    assert capsys.readouterr().out.splitlines()[1].endswith(",0")


def test_run_subcommand(tmp_path, capsys):
    cfg = tmp_path / "mini.cfg"
    cfg.write_text(f"""
[pipeline]
stages = spectral
seed = 1

[graphs]
kind = cycle
sizes = 4,5

[outputs]
dir = {tmp_path / "runs"}
""")
    assert main(["run", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("wrote ")
    table_line = next(l for l in out.splitlines() if l.strip().startswith("graphs:"))
    path = table_line.split(": ", 1)[1]
    assert open(path).read().count("\n") == 3


def test_bad_config_is_an_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[pipeline]\nstages = spectral\nbogus = 1\n")
    assert main(["run", str(cfg)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_console_script_help():
    result = subprocess.run(
        ["cubecat", "--help"], capture_output=True, text=True
    )
    assert result.returncode == 0
    for name in ("validate", "geodesic", "barycenter", "distortion", "delta",
                  "delta-survey", "lambda1", "wang-lambda1", "sandwich", "run"):
        assert name in result.stdout
