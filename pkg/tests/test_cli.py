import json

import pytest

from epiframes.cli import main
from epiframes.errors import ConfigError, DesignError

SMALL = """\
grid_rows=2
grid_cols=2
cell_pop_min=150
cell_pop_max=200
phase1_days=20
phase2_days=30
meetings_rate_1=4
meetings_rate_2=2
infections_per_meeting_1=2
infections_per_meeting_2=1
initial_exposed=5
days=15,20
R=5
n_v=10
n_C=100
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return str(p)


def dir_bytes(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_simulate_and_truth(tmp_path, cfg, capsys):
    assert main(["simulate", "--config", cfg, "--seed", "4", "--out", str(tmp_path / "tr")]) == 0
    assert main(["truth", "--config", cfg, "--seed", "4", "--day", "20", "--trace", str(tmp_path / "tr")]) == 0
    from_trace = capsys.readouterr().out
    assert main(["truth", "--config", cfg, "--seed", "4", "--day", "20"]) == 0
    assert capsys.readouterr().out == from_trace
    header, row = from_trace.splitlines()
    assert header == "day,Y,Y_A,Y_B,Y_AB"
    day, Y, Y_A, Y_B, Y_AB = map(int, row.split(","))
    assert Y == Y_A + Y_B - Y_AB
    assert main(["truth", "--config", cfg, "--seed", "4", "--day", "20", "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["Y"] == Y


def test_estimate_json(cfg, capsys, tmp_path):
    assert main(["estimate", "--config", cfg, "--seed", "4", "--day", "20", "--scheme", "A2B3"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["scheme"] == "A2B3" and d["day"] == 20
    assert "Z_v" not in d and 0 <= d["alpha"] <= 1
    assert d["units_with_contacts"] >= d["units_without_contacts"]
    out = tmp_path / "est"
    assert main(["estimate", "--config", cfg, "--seed", "4", "--day", "20", "--out", str(out), "--write-sample",
                 "--format", "csv"]) == 0
    assert {p.name for p in out.iterdir()} == {"estimate_day20_A1B2.csv", "sample_day20_A1B2.csv"}


def test_montecarlo_outputs_are_byte_identical(tmp_path, cfg):
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["montecarlo", "--config", cfg, "--seed", "4", "--out", str(out), "--plotdata"]) == 0
        assert main(["montecarlo", "--config", cfg, "--seed", "4", "--out", str(out), "--format", "json"]) == 0
        runs.append(dir_bytes(out))
    assert runs[0] == runs[1]
    assert set(runs[0]) == {"table1.csv", "table2.csv", "table3.csv", "plotdata.csv", "result.json"}


def test_waves_and_av(tmp_path, cfg, capsys):
    assert main(["waves", "--config", cfg, "--seed", "4", "--times", "10,15,20", "--panel-size", "census"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,Y_hat,dD_hat,dH_hat,dY_hat,Y_true"
    for line in lines[1:]:
        f = line.split(",")
        assert float(f[1]) == pytest.approx(int(f[5]), abs=1e-9)
    args = ["av", "--N", "20000", "--f", "0.05", "--mu", "0.04", "--theta", "0.25", "--L", "10", "--P_v", "0.5"]
    assert main(args + ["--format", "json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["AV_strategy"] == pytest.approx(31875.0)
    assert main(args) == 0
    assert "efficiency" in capsys.readouterr().out


def test_exit_codes(tmp_path, cfg, capsys):
    assert main(["truth", "--config", str(tmp_path / "missing.cfg"), "--day", "3"]) == ConfigError.exit_code
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour=red\n")
    assert main(["truth", "--config", str(bad), "--day", "3"]) == ConfigError.exit_code
    assert main(["estimate", "--config", cfg, "--day", "1"]) == DesignError.exit_code
    assert main(["truth", "--config", cfg, "--day", "500"]) == ConfigError.exit_code
    assert main(["simulate", "--config", cfg]) == ConfigError.exit_code
    assert main(["av", "--N", "100", "--f", "0.1", "--mu", "2", "--theta", ".5", "--L", "3", "--P_v", ".5"]) == 2
    err = capsys.readouterr().err
    assert err.count("epiframes:") >= 6
    with pytest.raises(SystemExit):
        main(["estimate", "--day", "3", "--scheme", "Z9"])
