"""
PNG figures rendered from a run or sweep directory's CSV artifacts.

Only the files on disk are used, so figures can be regenerated for any past
run without re-simulating.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STAGE_LABELS = {"before": "without SIC", "analog": "analog SIC", "total": "analog + digital SIC"}


def _load(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def plot_psd(run_dir: Path, report: dict) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    for stage, label in STAGE_LABELS.items():
        f = run_dir / f"psd_{stage}.csv"
        if f.is_file():
            d = _load(f)
            ax.plot(d[:, 0] / 1e9, d[:, 1], lw=0.8, label=label)
    band = report["cancellation"]["band"]
    ax.axvspan(band["f_lo"] / 1e9, band["f_hi"] / 1e9, color="0.9", zorder=0)
    ax.set_xlabel("frequency (GHz)")
    ax.set_ylabel("PSD (dB/Hz, relative)")
    c = report["cancellation"]
    ax.set_title(f"{report['name']}: analog {c['analog_depth_db']:.1f} dB, "
                 f"total {c['total_depth_db']:.1f} dB")
    ax.legend(loc="lower left", fontsize=8)
    out = run_dir / "psd.png"
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_spectrograms(run_dir: Path) -> Path | None:
    files = [(s, run_dir / f"spectrogram_{s}.csv") for s in STAGE_LABELS]
    files = [(s, f) for s, f in files if f.is_file()]
    if not files:
        return None
    fig, axes = plt.subplots(1, len(files), figsize=(4 * len(files), 3.5), sharey=True)
    axes = np.atleast_1d(axes)
    for ax, (stage, f) in zip(axes, files):
        d = _load(f)
        times, freqs = np.unique(d[:, 0]), np.unique(d[:, 1])
        # written freq-major: rows sweep time fastest
        mag = d[:, 2].reshape(len(freqs), len(times))
        top = mag.max()
        ax.pcolormesh(times * 1e6, freqs / 1e9, mag, vmin=top - 60, vmax=top, shading="auto")
        ax.set_title(STAGE_LABELS[stage], fontsize=9)
        ax.set_xlabel("time (us)")
    axes[0].set_ylabel("frequency (GHz)")
    out = run_dir / "spectrograms.png"
    fig.tight_layout()
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def plot_learning_curve(run_dir: Path, smooth: int = 500) -> Path | None:
    f = run_dir / "learning_curve.csv"
    if not f.is_file():
        return None
    d = _load(f)
    k = min(smooth, len(d))
    mse = np.convolve(d[:, 1], np.ones(k) / k, mode="valid")
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(d[k - 1:, 0], 10 * np.log10(mse + 1e-300), lw=0.8)
    ax.set_xlabel("sample")
    ax.set_ylabel(f"squared error, {k}-sample mean (dB)")
    out = run_dir / "learning_curve.png"
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_run(run_dir, report: dict) -> list[Path]:
    run_dir = Path(run_dir)
    outs = [plot_psd(run_dir, report), plot_spectrograms(run_dir), plot_learning_curve(run_dir)]
    return [p for p in outs if p is not None]


def plot_sweep(sweep_dir) -> Path | None:
    """Total depth against the first axis, one line per value of the second."""
    sweep_dir = Path(sweep_dir)
    with open(sweep_dir / "summary.csv", newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r["status"] == "ok"]
    if not rows:
        return None
    axes = [k for k in rows[0] if k not in ("cell", "analog_depth_db", "digital_depth_db",
                                             "total_depth_db", "soi_power_delta_db",
                                             "fine_delay_points", "status", "error")]
    x_key = axes[0]
    group_key = axes[1] if len(axes) > 1 else None
    groups: dict[str, list] = {}
    for r in rows:
        groups.setdefault(r[group_key] if group_key else "", []).append(r)
    fig, ax = plt.subplots(figsize=(6, 4))
    for g, rs in groups.items():
        rs = sorted(rs, key=lambda r: float(r[x_key]))
        x = [float(r[x_key]) for r in rs]
        ax.plot(x, [float(r["total_depth_db"]) for r in rs], "o-",
                label=f"{group_key}={g}" if group_key else "total")
        ax.plot(x, [float(r["analog_depth_db"]) for r in rs], "x--", color=ax.lines[-1].get_color())
    ax.set_xlabel(x_key)
    ax.set_ylabel("depth (dB): total solid, analog dashed")
    ax.legend(fontsize=7)
    out = sweep_dir / "sweep.png"
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
