"""
End-to-end scenario runs and parameter sweeps.

A run goes synth -> channel -> captures -> prematch -> analog -> digital ->
metrics and writes a fixed set of files into its output directory:

    report.json            scalars, prematch solution, config echo
    psd_{before,analog,total}.csv
    spectrogram_{before,analog,total}.csv
    learning_curve.csv     squared error of the configured canceller

Artifacts are written as soon as they exist, so a failed run leaves what it
produced plus ``failure.json`` naming the stage.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .adaptive import AdaptiveConfig, cancel
from .config import ScenarioConfig, config_from_dict, config_to_dict
from .errors import SicError, StageError
from .metrics import (CancellationReport, band_power, cancellation_report, spectrogram,
                      welch_psd, write_learning_curve)
from .prematch import PrematchSolution, coarse_delay_xcorr, estimate_gain, prematch
from .signals import SampledSignal
from .testbed import Testbed

log = logging.getLogger(__name__)

STAGES = ("synth", "channel", "capture", "prematch", "analog", "digital", "metrics")


def build_testbed(cfg: ScenarioConfig) -> Testbed:
    soi = cfg.soi_spec if cfg.channel.soi_rel_power_db is not None else None
    m = cfg.metrics
    return Testbed(cfg.si_spec, soi, cfg.channel, cfg.frontend,
                   processing_rate=cfg.processing_rate, generation_rate=cfg.generation_rate,
                   lo_freq=cfg.lo_freq, lo_phase=cfg.lo_phase, if_cutoff=cfg.if_cutoff,
                   noise_seed=cfg.seeds.noise, impairments=cfg.impairments.to_impairments(),
                   soi_guard=m.soi_guard, settle_fraction=m.settle_fraction,
                   welch_segment=m.welch_segment, welch_overlap=m.welch_overlap)


@dataclass
class RunResult:
    report: dict
    out_dir: Path | None
    cancellation: CancellationReport | None = None
    prematch: PrematchSolution | None = None
    signals: dict[str, SampledSignal] = field(default_factory=dict)

    @property
    def scalars(self) -> dict:
        """Report fields that must be identical across repeated runs."""
        return {k: v for k, v in self.report.items() if k not in ("artifacts", "config")}


class _Stage:
    """Context manager that tags any exception with the stage it came from."""

    def __init__(self, run: "_Run", name: str):
        self.run, self.name = run, name

    def __enter__(self):
        self.run.stage = self.name
        log.debug("stage %s", self.name)

    def __exit__(self, typ, exc, tb):
        if exc is None:
            return False
        if isinstance(exc, StageError):
            # a sub-step already named itself; qualify it with the pipeline stage
            raise StageError(f"{self.name}.{exc.stage}", exc.cause) from exc.cause
        raise StageError(self.name, exc) from exc


class _Run:
    def __init__(self, out_dir: Path | None):
        self.out_dir = out_dir
        self.stage = "setup"
        self.artifacts: dict[str, str] = {}
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, writer):
        if self.out_dir is None:
            return
        path = self.out_dir / name
        writer(path)
        self.artifacts[path.stem] = name

    def __call__(self, name: str) -> _Stage:
        return _Stage(self, name)


def _dump_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def steady_state_residual_db(tb: Testbed, out: SampledSignal, fraction: float,
                             segment: int = 4096) -> float:
    """In-band, SOI-excluded power of the trailing ``fraction`` of a canceller output."""
    n = len(out)
    tail = out.replace(out.samples[n - max(segment, int(n * fraction)):])
    psd = welch_psd(tail, segment, 0.5)
    return band_power(psd, *tb.si_band, exclude=tb.exclusions)


def _soi_band_db(tb: Testbed, sig: SampledSignal) -> float:
    psd = welch_psd(tb.settled(sig), tb.welch_segment, tb.welch_overlap)
    return band_power(psd, *tb.soi_band)


def _ridge_fraction(spec, band) -> float:
    ridge = spec.ridge()
    return float(np.mean((ridge >= band[0]) & (ridge <= band[1])))


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> RunResult:
    """Run one scenario; ``out_dir=None`` keeps everything in memory."""
    run = _Run(Path(out_dir) if out_dir is not None else None)
    try:
        return _run(cfg, run)
    except StageError as exc:
        if run.out_dir is not None:
            _dump_json(run.out_dir / "failure.json",
                       {"stage": exc.stage, "error": str(exc.cause),
                        "artifacts": run.artifacts})
        raise


def _run(cfg: ScenarioConfig, run: _Run) -> RunResult:
    m = cfg.metrics
    with run("synth"):
        tb = build_testbed(cfg)
        tb.si_gen, tb.soi_gen
    with run("channel"):
        tb.received, tb.received_without_soi
    with run("capture"):
        tb.rx_only, tb.ref_only, tb.tx_digital
    with run("prematch"):
        pm = cfg.prematch
        if pm.forced_fine_delay is None:
            ctx = tb.prematch_context(half_window=pm.half_window, search=pm.search,
                                      max_lag=pm.max_lag, threshold=pm.xcorr_threshold)
            sol = prematch(ctx)
            evaluations = ctx.evaluations
        else:
            gain = estimate_gain(tb.rx_only, tb.ref_only)
            coarse = coarse_delay_xcorr(tb.tx_digital, tb.rx_only, max_lag=pm.max_lag,
                                        threshold=pm.xcorr_threshold)
            k = pm.forced_fine_delay
            sol = PrematchSolution(gain, coarse, k, tb.residual_db(gain, k))
            evaluations = {k: sol.residual_power_db}
    with run("analog"):
        analog = tb.analog(sol.gain_factor, sol.fine_delay_points)
        analog_no_soi = tb.analog(sol.gain_factor, sol.fine_delay_points, with_soi=False)
        study = [{"fine_delay_points": int(k),
                  "analog_depth_db": -tb.residual_db(sol.gain_factor, int(k))}
                 for k in pm.delay_study]
    with run("digital"):
        ref = tb.digital_reference(sol.fine_delay_points, cfg.digital_lead_taps)
        result = cancel(analog, ref, cfg.adaptive)
        run.write("learning_curve.csv", lambda p: write_learning_curve(p, result.learning_curve))
        no_soi = cancel(analog_no_soi, ref, cfg.adaptive)
        residuals, mse = {}, {}
        for alg in ("NLMS", "RLS"):
            r = result if alg == cfg.adaptive.algorithm else cancel(
                analog, ref, cfg.adaptive.model_copy(update={"algorithm": alg}))
            residuals[alg] = steady_state_residual_db(tb, r.output, m.steady_state_fraction)
            mse[alg] = r.steady_state_db(m.steady_state_fraction)
    with run("metrics"):
        before, total = tb.rx_only, result.output
        deltas = {}
        if tb.soi_band is not None:
            p0 = _soi_band_db(tb, tb.soi_only)
            p1 = _soi_band_db(tb, analog - analog_no_soi)
            p2 = _soi_band_db(tb, total - no_soi.output)
            deltas = {"analog": p1 - p0, "digital": p2 - p1, "total": p2 - p0}
        rep = cancellation_report(tb.settled(before), tb.settled(analog), tb.settled(total),
                                  tb.si_band, tb.exclusions, soi_stage_deltas_db=deltas,
                                  segment_len=m.welch_segment, overlap=m.welch_overlap)
        for stage, psd in (("before", rep.psd_before), ("analog", rep.psd_analog),
                           ("total", rep.psd_total)):
            run.write(f"psd_{stage}.csv", psd.to_csv)
        ridge = {}
        if m.spectrograms:
            hop = max(1, int(round(m.spectrogram_window * (1 - m.spectrogram_overlap))))
            for stage, sig in (("before", before), ("analog", analog), ("total", total)):
                spec = spectrogram(tb.settled(sig), m.spectrogram_window, hop)
                run.write(f"spectrogram_{stage}.csv", spec.to_csv)
                if tb.soi_band is not None:
                    ridge[stage] = _ridge_fraction(spec, tb.soi_band)

    report = {
        "name": cfg.name,
        "version": __version__,
        "seeds": {"noise": cfg.seeds.noise, "symbols": cfg.seeds.symbols},
        "prematch": {**sol.to_dict(), "forced": pm.forced_fine_delay is not None,
                     "evaluations": {str(k): v for k, v in sorted(evaluations.items())}},
        "cancellation": rep.scalars(),
        "adaptive": {"algorithm": cfg.adaptive.algorithm,
                     "steady_state_residual_db": residuals,
                     "steady_state_mse_db": mse},
        "delay_study": study,
        "soi_ridge_fraction": ridge,
        "config": config_to_dict(cfg),
    }
    run.artifacts["report"] = "report.json"
    report["artifacts"] = dict(sorted(run.artifacts.items()))
    if run.out_dir is not None:
        _dump_json(run.out_dir / "report.json", report)
    return RunResult(report, run.out_dir, rep, sol,
                     {"received": tb.received, "rx_only": before, "analog": analog,
                      "total": total, "reference": ref})


def load_report(run_dir) -> dict:
    path = Path(run_dir) / "report.json"
    if not path.is_file():
        raise FileNotFoundError(f"no report.json in {run_dir}")
    return json.loads(path.read_text())


# -- sweeps --------------------------------------------------------------------

def expand_axes(axes: dict[str, list]) -> list[dict]:
    """Cartesian product of the axis grids, first axis varying slowest."""
    keys = list(axes)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]


def cell_config(base: ScenarioConfig, values: dict) -> ScenarioConfig:
    from .config import set_dotted
    data = config_to_dict(base)
    for key, v in values.items():
        data = set_dotted(data, key, v)
    return config_from_dict(data)


SUMMARY_FIELDS = ("analog_depth_db", "digital_depth_db", "total_depth_db", "soi_power_delta_db")


def _run_cell(args) -> dict:
    idx, base, values, out_dir = args
    row = {"cell": idx, **values}
    try:
        cfg = cell_config(base, values)
        res = run_scenario(cfg.model_copy(update={"name": f"{base.name}[{idx}]"}),
                           Path(out_dir) / f"cell_{idx:03d}")
        c = res.report["cancellation"]
        row.update({k: c[k] for k in SUMMARY_FIELDS})
        row["fine_delay_points"] = res.report["prematch"]["fine_delay_points"]
        row["status"] = "ok"
        row["error"] = ""
    except (SicError, ValueError) as exc:
        row.update({k: "" for k in SUMMARY_FIELDS})
        row.update(fine_delay_points="", status="failed", error=str(exc))
    return row


def run_sweep(base: ScenarioConfig, axes: dict[str, list], out_dir, workers: int = 1) -> list[dict]:
    """Run every cell of the grid and write ``summary.csv``.

    Cells share nothing and write to their own ``cell_NNN`` directories, so
    they can run in separate processes; rows come back in grid order either way.
    Failed cells are recorded in the summary and the sweep carries on.
    """
    if not axes:
        raise ValueError("a sweep needs at least one axis")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(i, base, values, str(out_dir)) for i, values in enumerate(expand_axes(axes))]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(j) for j in jobs]
    fields = ["cell", *axes, *SUMMARY_FIELDS, "fine_delay_points", "status", "error"]
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
    return rows
