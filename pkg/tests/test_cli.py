import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from qosc import cli, oracle


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {h: data[:, i] for i, h in enumerate(header)}


def test_fig2(tmp_path):
    assert cli.main(["--mode", "fig2", "--output", str(tmp_path)]) == 0
    cols = read_csv(tmp_path / "fig2.csv")
    w, st, sq, ss = cols["omega"], cols["S_ST"], cols["S_squeezed_modes"], cols["S_spin_squeezed"]
    assert w[0] <= 1e-4 * (1 + 1e-12) and w[-1] >= 1e-1 * (1 - 1e-12)
    assert ss[0] < 1e-2 * st[0]
    np.testing.assert_allclose(sq, 0.5 * st, rtol=1e-12)
    manifest = json.loads((tmp_path / "fig2.manifest.json").read_text())
    assert manifest["summary"]["s_abs_C_minus_2"] == pytest.approx(0.002)
    # spin-squeezed curve drops to half the ST curve near the corner
    ratio = ss / st
    w_half = np.exp(np.interp(0.0, np.log(ratio / 0.5), np.log(w)))
    assert 0.5 < w_half / manifest["summary"]["corner"] < 2


def test_csv_format_and_stability(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["--mode", "loop-spectrum", "--output", str(out)]) == 0
    raw = (a / "loop-spectrum.csv").read_bytes()
    assert raw == (b / "loop-spectrum.csv").read_bytes()
    assert (a / "loop-spectrum.manifest.json").read_bytes() == (b / "loop-spectrum.manifest.json").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "omega,Sqq,Spp,sql_bound"
    assert all(len(f.split("e")[0].split(".")[1]) == 12 for f in lines[1].split(","))


def test_manifest_contents(tmp_path):
    assert cli.main(["--mode", "sr-spectrum", "--output", str(tmp_path), "--seed", "42"]) == 0
    m = json.loads((tmp_path / "sr-spectrum.manifest.json").read_text())
    assert m["seed"] == 42
    assert m["config"]["superradiant"]["C"] == 2.5
    assert m["calibration"]["beta_line"] == pytest.approx(2 * math.pi)
    assert {"qosc", "numpy", "scipy", "python"} <= set(m["versions"])
    assert "timestamp" not in json.dumps(m)


def test_manifest_reproduces_run(tmp_path):
    cfg = write(tmp_path, 'mode = "linewidth"\n[superradiant]\ns = 1e-3\n[linewidth]\nmethod = "beta-line"\n')
    assert cli.main(["--config", str(cfg), "--output", str(tmp_path / "a")]) == 0
    m = json.loads((tmp_path / "a" / "linewidth.manifest.json").read_text())
    assert cli.execute(m["config"])[1] == cli.execute(cli.resolve({"mode": "linewidth", **{
        k: v for k, v in m["config"].items() if k not in ("mode", "seed")}}))[1]


def test_json_output(tmp_path):
    assert cli.main(["--mode", "kk-phase", "--format", "json", "--output", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "kk-phase.json").read_text())
    assert data["summary"]["tau_G"] == pytest.approx(1.0, rel=1e-3)
    assert len(data["columns"]["phase"]) == 4001


def test_invalid_eta(tmp_path):
    cfg = write(tmp_path, 'mode = "loop-spectrum"\n[loop]\neta = 1.5\n')
    out = tmp_path / "out"
    assert cli.main(["--config", str(cfg), "--output", str(out)]) == 3
    assert not out.exists()


@pytest.mark.parametrize(
    "text",
    [
        'mode = "fig2"\n[loop\n',
        'mode = "nope"\n',
        'mode = "fig2"\n[fig2]\nbogus = 1\n',
        'mode = "fig2"\n[fig2]\nC = "high"\n',
        "[fig2]\nC = 1.5\n",
    ],
)
def test_parse_errors(tmp_path, text):
    assert cli.main(["--config", str(write(tmp_path, text)), "--output", str(tmp_path / "o")]) == 2


def test_bad_flag():
    assert cli.main(["--format", "xml"]) == 2


def test_numerical_failure(tmp_path):
    cfg = write(
        tmp_path,
        'mode = "linewidth"\n[superradiant]\ns = 1e-3\n[linewidth]\nmethod = "beta-line"\ncutoff = "self"\n',
    )
    out = tmp_path / "o"
    assert cli.main(["--config", str(cfg), "--output", str(out)]) == 4
    assert not out.exists()


def test_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["--mode", "fig2", "--output", str(blocker)]) == 5
    assert cli.main(["--config", str(tmp_path / "missing.toml"), "--output", str(tmp_path)]) == 5


def test_sweep_serial_equals_parallel(tmp_path, monkeypatch):
    cfg = write(
        tmp_path,
        'mode = "sweep"\n[sweep]\ntarget = "linewidth"\n[sweep.params]\ns = [1e-4, 1e-2, 4, "log"]\nC = [2.2, 3.0, 2, "lin"]\n',
    )
    outs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("QOSC_THREADS", threads)
        out = tmp_path / threads
        assert cli.main(["--config", str(cfg), "--output", str(out)]) == 0
        outs.append((out / "sweep.csv").read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert len(lines) == 1 + 8
    assert lines[0].startswith("s,C,")


def test_sweep_loop_target(tmp_path):
    cfg = write(tmp_path, 'mode = "sweep"\n[sweep]\ntarget = "loop"\n[sweep.params]\nkappa_G = [1.0, 1e4, 3, "log"]\n')
    assert cli.main(["--config", str(cfg), "--output", str(tmp_path)]) == 0
    cols = read_csv(tmp_path / "sweep.csv")
    assert np.all(np.diff(cols["gamma_gst"]) > 0)


def test_bad_sweep_spec(tmp_path):
    cfg = write(tmp_path, 'mode = "sweep"\n[sweep.params]\ns = [1, 2]\n')
    assert cli.main(["--config", str(cfg), "--output", str(tmp_path)]) == 2


def test_oracle_check(tmp_path):
    text = (
        'mode = "oracle-check"\nseed = 5\n'
        '[oracle]\nsegments = 16\nband_lo = 0.05\nband_hi = 0.5\ndump = "series.bin"\n'
    )
    cfg = write(tmp_path, text)
    for out in ("a", "b"):
        assert cli.main(["--config", str(cfg), "--output", str(tmp_path / out)]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "oracle-check.csv").read_bytes() == (b / "oracle-check.csv").read_bytes()
    assert (a / "series.bin").read_bytes() == (b / "series.bin").read_bytes()
    m = json.loads((a / "oracle-check.manifest.json").read_text())
    assert abs(m["summary"]["band_rel_dev"]) < 0.1
    ts = oracle.TimeSeries.from_binary(a / "series.bin")
    assert ts.dt == 0.045 and len(ts) == m["summary"]["samples"]


def test_kk_phase_from_file(tmp_path):
    from qosc.causal_gain import lorentzian_gain_model

    lorentzian_gain_model(0.9, 2.0, 200.0, 4001).to_csv(tmp_path / "g.csv")
    cfg = write(tmp_path, f'mode = "kk-phase"\n[gain]\nmodel = "file"\npath = "{tmp_path / "g.csv"}"\neta = 0.9\n')
    assert cli.main(["--config", str(cfg), "--output", str(tmp_path), "--format", "json"]) == 0
    data = json.loads((tmp_path / "kk-phase.json").read_text())
    assert data["summary"]["tau_G"] == pytest.approx(0.5, rel=1e-3)


@pytest.mark.skipif(shutil.which("qosc") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["qosc", "--mode", "fig2", "--output", str(tmp_path)], capture_output=True)
    assert res.returncode == 0
    assert (tmp_path / "fig2.csv").exists()
