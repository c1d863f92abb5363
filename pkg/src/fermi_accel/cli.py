"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 verification mismatch.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, FermiAccelError, MissingInputError, VerificationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VERIFY = 4


def _err(msg: str):
    print(f"error: {msg}", file=sys.stderr)


def cmd_windows(args) -> int:
    from .model import windows_up_to
    ws = windows_up_to(args.lambda_max)
    print(f"{'s':>5} {'lo':>14} {'hi':>14} {'center':>14}")
    for w in ws:
        print(f"{w.s:>5g} {w.lo:>14.10f} {w.hi:>14.10f} {w.center:>14.10f}")
    return EXIT_OK


def _run(args, require_sweep: bool) -> int:
    from .config import parse_config
    from .runner import run
    cfg = parse_config(args.config)
    if args.output_dir:
        from dataclasses import replace
        cfg = replace(cfg, output_dir=str(Path(args.output_dir).resolve()))
    if args.workers:
        from dataclasses import replace
        cfg = replace(cfg, workers=args.workers)
    if require_sweep and len(cfg.lambdas) < 2:
        raise ConfigError("sweep needs at least two lambda values", key="lambda")
    res = run(cfg, log=(None if args.quiet else lambda m: print(m, file=sys.stderr)))
    failed = [p for p in res.points if p.status != "ok"]
    print(f"wrote {len(res.manifest['files'])} files to {res.output_dir}")
    for p in failed:
        _err(f"lambda={p.label}: {p.error}")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_run(args) -> int:
    return _run(args, require_sweep=False)


def cmd_sweep(args) -> int:
    return _run(args, require_sweep=True)


def cmd_analyze(args) -> int:
    from .runner import load_manifest
    m = load_manifest(args.dir)
    report = m.get("analysis", {})
    for p in m["points"]:
        s = p["summary"]
        print(f"lambda={p['label']:>8} status={p['status']:<7} dp={s['dp']} alpha={s['alpha']} "
              f"comb_contrast={s['comb_contrast']}")
        if p["details"].get("breathing_r") is not None:
            print(f"{'':>16} breathing_r={p['details']['breathing_r']}")
    for w in report.get("windows", []):
        print(f"window s={w['s']:g}: dip_ratio={w['dip_ratio']} has_dip={w['has_dip']} "
              f"peak_lambda={w['peak_lambda']} center={w['center']:.5f}")
    if "windows_error" in report:
        print(f"windows: {report['windows_error']}")
    if args.json:
        print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_plot(args) -> int:
    from .figures import emit_figure
    from .runner import atomic_write
    svg = emit_figure(args.kind, args.dir)
    path = Path(args.output) if args.output else Path(args.dir) / f"{args.kind}.svg"
    atomic_write(path, svg.encode("utf-8"))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .runner import verify
    problems = verify(args.dir)
    for p in problems:
        print(f"MISMATCH {p}")
    if problems:
        return EXIT_VERIFY
    print("all files match the manifest")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .classical import standard_map_diffusion
    from .model import diffusion_coefficient
    lam = args.k / 4.0
    pred, d0 = diffusion_coefficient(lam)
    meas = standard_map_diffusion(args.k, args.particles, args.steps, args.seed, args.workers)
    print(f"K={args.k:g} D_measured={meas:.6g} D_predicted={pred:.6g} D0={d0:.6g} "
          f"rel_err={(meas - pred) / pred:+.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fermi-accel",
                                 description="Atom-mirror accelerator simulations")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("windows", help="print the acceleration-window table")
    p.add_argument("--lambda-max", type=float, required=True)
    p.set_defaults(func=cmd_windows)

    for name, func, helptext in (("run", cmd_run, "execute a config"),
                                 ("sweep", cmd_sweep, "execute a multi-lambda config")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("-c", "--config", required=True)
        p.add_argument("-o", "--output-dir", default=None, help="override output_dir")
        p.add_argument("-j", "--workers", type=int, default=None, help="override workers")
        p.add_argument("-q", "--quiet", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("analyze", help="summarize a run directory")
    p.add_argument("dir")
    p.add_argument("--json", action="store_true", help="also dump the analysis report")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plot", help="draw a figure from a run directory")
    p.add_argument("--kind", required=True, choices=("fig1", "fig2", "fig3", "fig4"))
    p.add_argument("-o", "--output", default=None)
    p.add_argument("dir")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("verify", help="re-hash outputs against the manifest")
    p.add_argument("dir")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle-diffusion", help="standard map against the Bessel law")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--particles", type=int, default=100_000)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except VerificationError as exc:
        _err(str(exc))
        return EXIT_VERIFY
    except MissingInputError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (FermiAccelError, ValueError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
