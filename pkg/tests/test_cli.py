import json
import shutil
import subprocess

import numpy as np
import pytest

from conftest import CONFIG_DIR
from photosic.cli import _axis, main
from photosic.signals import read_sig

FIG2 = str(CONFIG_DIR / "fig2.cfg")


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "fig2"
    assert main(["run-scenario", "--config", FIG2, "--out", str(out)]) == 0
    return out


def test_axis_parsing():
    assert _axis("a.b=1,2.5,true,LFM") == ("a.b", [1, 2.5, True, "LFM"])
    assert _axis('si_waveform.kind="QPSK"') == ("si_waveform.kind", ["QPSK"])
    with pytest.raises(Exception):
        _axis("nokey")


def test_synth_from_flags(tmp_path, capsys):
    out = tmp_path / "w.sig"
    assert main(["synth", "--kind", "QPSK", "--center-freq", "2e9", "--bandwidth", "1e9",
                 "--duration", "1e-6", "--out", str(out)]) == 0
    sig = read_sig(out)
    assert sig.sample_rate == 10e9 and len(sig) == 10_000
    assert "10000 samples" in capsys.readouterr().out


def test_synth_soi_from_config(tmp_path):
    out = tmp_path / "soi.sig"
    assert main(["synth", "--config", FIG2, "--which", "soi", "--out", str(out)]) == 0
    x = read_sig(out).samples
    f = np.fft.rfftfreq(len(x), 1e-10)
    p = np.abs(np.fft.rfft(x)) ** 2
    inside = (f >= 2.15e9) & (f <= 2.65e9)
    assert p[inside].sum() / p.sum() > 0.95


def test_prematch(capsys):
    assert main(["prematch", "--config", FIG2]) == 0
    out = capsys.readouterr().out
    fields = dict(line.split(None, 1) for line in out.strip().splitlines())
    assert int(fields["fine_delay_points"]) == 482
    assert float(fields["gain_factor"]) == pytest.approx(0.79, abs=0.05)


def test_run_and_report(run_dir, capsys):
    assert (run_dir / "report.json").is_file()
    capsys.readouterr()
    assert main(["report", "--in", str(run_dir)]) == 0
    out = capsys.readouterr().out
    assert "analog_depth_db" in out and "total_depth_db" in out
    for name in ("psd.png", "spectrograms.png", "learning_curve.png"):
        assert (run_dir / name).stat().st_size > 0
        assert f"figure: {run_dir / name}" in out


def test_report_json_without_figures(run_dir, tmp_path, capsys):
    d = tmp_path / "copy"
    shutil.copytree(run_dir, d, ignore=shutil.ignore_patterns("*.png"))
    capsys.readouterr()
    assert main(["report", "--in", str(d), "--json", "--no-figures"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert "cancellation" in rep and "config" not in rep
    assert not list(d.glob("*.png"))


def test_sweep_and_report(tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", FIG2, "--axis", "seeds.noise=0,1", "--out", str(out),
                 "--workers", "2"]) == 0
    assert "2 cells, 0 failed" in capsys.readouterr().out
    assert main(["report", "--in", str(out)]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0].startswith("cell | seeds.noise | analog_depth_db")
    assert (out / "sweep.png").stat().st_size > 0


def test_sweep_with_failed_cell_exits_nonzero(tmp_path, capsys):
    assert main(["sweep", "--config", FIG2, "--axis", "si_waveform.center_freq=4.9e9",
                 "--out", str(tmp_path)]) == 1
    assert "cell 0:" in capsys.readouterr().err


def test_configuration_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[si_waveform]\nbandwidth = 1e9\n")
    assert main(["run-scenario", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "si_waveform.bandwidth" in capsys.readouterr().err


def test_stage_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text((CONFIG_DIR / "fig2.cfg").read_text() + "\n[prematch]\nxcorr_threshold = 1e6\n")
    assert main(["run-scenario", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "prematch" in capsys.readouterr().err
    assert (tmp_path / "o" / "failure.json").is_file()


def test_missing_report(tmp_path, capsys):
    assert main(["report", "--in", str(tmp_path)]) == 1
    assert "no report.json" in capsys.readouterr().err


def test_reference_config(capsys):
    assert main(["reference-config"]) == 0
    assert capsys.readouterr().out == (CONFIG_DIR / "reference.cfg").read_text()


@pytest.mark.skipif(shutil.which("photosic") is None, reason="console script not installed")
def test_console_script():
    r = subprocess.run(["photosic", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "run-scenario" in r.stdout
