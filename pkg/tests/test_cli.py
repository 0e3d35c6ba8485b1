import json
from pathlib import Path

import numpy as np
import pytest

from firephase.cli import main


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = main(["--out", str(out), *argv])
    return code, out


def test_example_subcommand(capsys, tmp_path):
    code, _ = run(tmp_path, "example", "3")
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["expected"]["stable_phases"] == [0.3527, 0.7593]


def test_analyze_map_preset_roundtrip(tmp_path, capsys):
    code, out = run(tmp_path, "--example", "1", "analyze-map", "--grid", "64")
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    stable = [o for o in report["orbits"] if o["stable"]]
    assert abs(stable[0]["phases"][0] - 0.5622) < 1e-3
    assert abs(stable[0]["multiplier"] - 0.6142) < 1e-3
    header = (out / "map.csv").read_text().splitlines()[0]
    assert header == "theta,f,f_1,fprime"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "analyze-map"
    assert "map.csv" in manifest["outputs"]


def test_predict_preset_values(tmp_path):
    code, out = run(tmp_path, "--example", "5", "predict", "--rmin", "0.3")
    assert code == 0
    rows = (out / "predicted.csv").read_text().splitlines()[1:]
    mods = sorted(float(r.split(",")[2]) for r in rows)
    assert len(rows) == 6
    assert mods[:3] == pytest.approx([0.4449] * 3, abs=1e-3)
    assert mods[3:] == pytest.approx([1.0] * 3, abs=1e-12)


def test_fptd_outputs_and_mass(tmp_path):
    code, out = run(tmp_path, "--example", "1", "--eps", "0.05",
                    "fptd", "--theta0", "0.25")
    assert code == 0
    side = json.loads((out / "fptd.json").read_text())
    assert abs(side["massDeficit"]) < 1e-6
    lines = (out / "fptd.csv").read_text().splitlines()
    assert lines[0] == "t,density,cumulative,gaussian_density"
    last = lines[-1].split(",")
    assert float(last[2]) == pytest.approx(1.0, abs=1e-5)


def test_fptd_reproducible_byte_identical(tmp_path):
    _, out1 = run(tmp_path / "a", "--example", "2", "--eps", "0.05",
                  "fptd", "--theta0", "0.4")
    _, out2 = run(tmp_path / "b", "--example", "2", "--eps", "0.05",
                  "fptd", "--theta0", "0.4")
    assert (out1 / "fptd.csv").read_bytes() == (out2 / "fptd.csv").read_bytes()


def test_mc_reproducible_and_summary(tmp_path):
    args = ("--example", "1", "--eps", "0.1", "--seed", "42",
            "mc", "--theta0", "0.25", "--trials", "400", "--dt", "1e-3",
            "--samples-csv")
    _, out1 = run(tmp_path / "a", *args)
    _, out2 = run(tmp_path / "b", *args)
    assert (out1 / "samples.csv").read_bytes() == (out2 / "samples.csv").read_bytes()
    doc = json.loads((out1 / "mc.json").read_text())
    assert set(doc) == {"mean", "stdev", "skewness", "ks_vs_volterra"}


def test_spectrum_and_eig_binary_round_trip(tmp_path, capsys):
    code, out = run(tmp_path, "--example", "1", "--eps", "0.1", "--threads", "2",
                    "spectrum", "--grid", "24", "--dump-matrix")
    assert code == 0
    rows = (out / "eigenvalues.csv").read_text().splitlines()
    head = rows[1].split(",")
    assert float(head[0]) == pytest.approx(1.0, abs=1e-8)
    assert float(head[5]) < 1e-8  # residual of the leading pair

    code2 = main(["--out", str(tmp_path / "eig"), "eig",
                  "--matrix", str(out / "matrix.bin"),
                  "--out-csv", str(tmp_path / "eig.csv")])
    assert code2 == 0
    eig_rows = Path(tmp_path / "eig.csv").read_text().splitlines()
    assert float(eig_rows[1].split(",")[0]) == pytest.approx(1.0, abs=1e-8)


def test_sweep_outputs(tmp_path):
    code, out = run(tmp_path, "sweep", "--i-range", "1:2:2",
                    "--k-range", "0:0.2:2", "--max-period", "4")
    assert code == 0
    rows = (out / "sweep.csv").read_text().splitlines()[1:]
    table = {tuple(r.split(",")[:2]): r.split(",")[2:] for r in rows}
    assert table[("1", "0.20000000000000001")][0] == "1"
    assert table[("2", "0.20000000000000001")][0] == "2"
    for key in (("1", "0"), ("2", "0")):
        assert table[key][0] in ("unlocked", "1")


def test_exit_codes(tmp_path, capsys):
    assert main(["--out", str(tmp_path / "x"), "predict"]) == 2
    assert main(["--config", "/no/such/file.json",
                 "--out", str(tmp_path / "y"), "predict"]) == 2
    # condition failure: zero mean input never fires
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({
        "gamma": 0.0, "eps": 0.05,
        "input": {"type": "constant", "value": 0.0},
        "threshold": {"type": "constant", "value": 1.0},
        "reset": {"type": "constant", "value": 0.0},
    }))
    assert main(["--config", str(cfg), "--out", str(tmp_path / "z"),
                 "analyze-map"]) == 4
    # numerical failure: driftless motion cannot deliver the passage density
    cfg2 = tmp_path / "m2.json"
    cfg2.write_text(json.dumps({
        "gamma": 1.0, "eps": 1e-5,
        "input": {"type": "constant", "value": 0.5},
        "threshold": {"type": "constant", "value": 1.0},
        "reset": {"type": "constant", "value": 0.0},
    }))
    assert main(["--config", str(cfg2), "--out", str(tmp_path / "w"),
                 "fptd", "--theta0", "0.0"]) == 3


def test_csv_uses_full_precision(tmp_path):
    _, out = run(tmp_path, "--example", "1", "--eps", "0.1",
                 "fptd", "--theta0", "0.3")
    line = (out / "fptd.csv").read_text().splitlines()[500]
    mantissa = line.split(",")[1].split("e")[0].replace("-", "").replace(".", "")
    assert len(mantissa) >= 15  # 17 significant digits requested
