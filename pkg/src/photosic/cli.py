"""Command-line entry point: ``photosic <subcommand>``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError, SicError, StageError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _axis(text: str) -> tuple[str, list]:
    """``key=v1,v2,...``; each value is read as a TOML scalar, else kept as a string."""
    key, sep, values = text.partition("=")
    if not sep or not key or not values:
        raise argparse.ArgumentTypeError(f"axis must look like key=v1,v2,...; got {text!r}")
    out = []
    for v in values.split(","):
        try:
            out.append(tomllib.loads(f"v = {v.strip()}")["v"])
        except tomllib.TOMLDecodeError:
            out.append(v.strip())
    return key.strip(), out


def cmd_synth(args) -> int:
    from .config import parse_config
    from .signals import PROCESSING_RATE, WaveformSpec, generate, write_sig
    if args.config:
        cfg = parse_config(args.config)
        spec = cfg.si_spec if args.which == "si" else cfg.soi_spec
    else:
        spec = WaveformSpec(kind=args.kind, center_freq=args.center_freq,
                            bandwidth_or_baud=args.bandwidth, duration=args.duration,
                            symbol_seed=args.seed)
    sig = generate(spec, args.rate or PROCESSING_RATE)
    write_sig(args.out, sig)
    print(f"wrote {len(sig)} samples at {sig.sample_rate:.6g} Sa/s to {args.out}")
    return 0


def cmd_prematch(args) -> int:
    from .config import parse_config
    from .prematch import prematch
    from .scenario import build_testbed
    cfg = parse_config(args.config)
    tb = build_testbed(cfg)
    pm = cfg.prematch
    sol = prematch(tb.prematch_context(half_window=pm.half_window, search=pm.search,
                                       max_lag=pm.max_lag, threshold=pm.xcorr_threshold))
    print(f"gain_factor          {sol.gain_factor:.4f}")
    print(f"coarse_delay_samples {sol.coarse_delay_samples:d}")
    print(f"fine_delay_points    {sol.fine_delay_points:d}")
    print(f"residual_power_db    {sol.residual_power_db:.2f}")
    return 0


def _print_report(report: dict):
    c = report["cancellation"]
    p = report["prematch"]
    print(f"scenario             {report['name']}  (photosic {report['version']})")
    print(f"gain_factor          {p['gain_factor']:.4f}")
    print(f"fine_delay_points    {p['fine_delay_points']}"
          f"{'  (forced)' if p.get('forced') else ''}")
    print(f"analog_depth_db      {c['analog_depth_db']:.2f}")
    print(f"digital_depth_db     {c['digital_depth_db']:.2f}  ({report['adaptive']['algorithm']})")
    print(f"total_depth_db       {c['total_depth_db']:.2f}")
    print(f"soi_power_delta_db   {c['soi_power_delta_db']:+.2f}")
    for alg, v in report["adaptive"]["steady_state_residual_db"].items():
        print(f"steady_state {alg:<7s} {v:.2f} dB")
    for row in report.get("delay_study", []):
        print(f"delay {row['fine_delay_points']:>5d} points  analog {row['analog_depth_db']:.2f} dB")


def cmd_run(args) -> int:
    from .config import parse_config
    from .scenario import run_scenario
    res = run_scenario(parse_config(args.config), args.out)
    _print_report(res.report)
    print(f"artifacts in {args.out}")
    return 0


def cmd_sweep(args) -> int:
    from .config import parse_config
    from .scenario import run_sweep
    axes = dict(args.axis)
    rows = run_sweep(parse_config(args.config), axes, args.out, workers=args.workers)
    failed = [r for r in rows if r["status"] != "ok"]
    print(f"{len(rows)} cells, {len(failed)} failed; summary in {Path(args.out) / 'summary.csv'}")
    for r in failed:
        print(f"cell {r['cell']}: {r['error']}", file=sys.stderr)
    return 1 if failed else 0


def cmd_report(args) -> int:
    from .scenario import load_report
    run_dir = Path(args.input)
    summary = run_dir / "summary.csv"
    if summary.is_file() and not (run_dir / "report.json").is_file():
        with open(summary, newline="") as fh:
            for row in csv.reader(fh):
                print(" | ".join(row))
        if args.figures:
            from .plotting import plot_sweep
            out = plot_sweep(run_dir)
            if out:
                print(f"figure: {out}")
        return 0
    report = load_report(run_dir)
    if args.json:
        print(json.dumps({k: v for k, v in report.items() if k != "config"}, indent=2))
    else:
        _print_report(report)
    if args.figures:
        from .plotting import plot_run
        for out in plot_run(run_dir, report):
            print(f"figure: {out}")
    return 0


def cmd_reference_config(args) -> int:
    from .config import reference_config
    sys.stdout.write(reference_config())
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="photosic", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write an SI or SOI waveform in SIG1 format")
    p.add_argument("--config", help="take the waveform from a scenario config")
    p.add_argument("--which", choices=("si", "soi"), default="si")
    p.add_argument("--kind", choices=("LFM", "QPSK"), default="LFM")
    p.add_argument("--center-freq", type=float, default=2.4e9)
    p.add_argument("--bandwidth", type=float, default=2e9, help="Hz (LFM) or baud (QPSK)")
    p.add_argument("--duration", type=float, default=10e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=float, help="sample rate (default 10 GSa/s)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prematch", help="estimate reference gain and delay for a scenario")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_prematch)

    p = sub.add_parser("run-scenario", help="run one scenario and write its artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a Cartesian grid over config keys")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", type=_axis, action="append", required=True,
                   help="dotted.key=v1,v2,... (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="print a run (or sweep) and render its figures")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--json", action="store_true", help="print the report JSON")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("reference-config", help="print every config key at its default")
    p.set_defaults(func=cmd_reference_config)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigurationError as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return 2
    except (SicError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
