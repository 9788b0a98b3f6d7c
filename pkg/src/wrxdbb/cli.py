"""Command-line interface: beacon dumps, detection runs, ROC sweeps, power
arithmetic, parameter search, and a quick selftest.

Exit codes: 0 success, 1 golden-vector or selftest mismatch, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .analysis import (
    ANALYTIC_ASSUMPTIONS,
    CostModel,
    PowerPoint,
    optimize_params,
    power,
    roc_sweep,
    roc_to_csv,
    surface_to_csv,
)
from .config import ConfigError, RunConfig, load_config
from .dbb_core import DetectorConfig, detect_wb
from .frontend import load_stream
from .wbcodec import bits_to_str, build_beacon


def _load(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.scenario.seed = args.seed
    if getattr(args, "trials", None) is not None:
        cfg.trials = args.trials
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg.workers = args.workers
    if getattr(args, "format", None) is not None:
        cfg.output_format = args.format
    if getattr(args, "output", None) is not None:
        cfg.output_path = args.output
    if getattr(args, "no_figure", False):
        cfg.figure = False
    return cfg


def _write_output(cfg: RunConfig, text: str) -> None:
    if cfg.output_path is None:
        sys.stdout.write(text)
    else:
        with open(cfg.output_path, "w", newline="") as f:
            f.write(text)


def _figure_path(csv_path: str) -> str:
    root, _ = os.path.splitext(csv_path)
    return root + ".png"


def cmd_beacon(args) -> int:
    cfg = _load(args)
    spec = cfg.spec
    dest = cfg.require("dest")
    src = cfg.require("src")
    beacon = build_beacon(spec, dest, src)
    c = spec.chips_per_bit
    pre_end = c * spec.M
    dest_end = pre_end + c * spec.K * spec.L
    info = {
        "chips": bits_to_str(beacon.chips),
        "total_chips": beacon.chips.size,
        "preamble": [0, pre_end],
        "dest": [pre_end, dest_end],
        "src": [dest_end, beacon.chips.size],
        "samples_at_kappa": spec.beacon_samples,
    }
    if cfg.output_format == "json":
        text = json.dumps(info, indent=2) + "\n"
    else:
        text = (
            f"chips: {info['chips']}\n"
            f"total chips: {info['total_chips']}\n"
            f"preamble: chips [0, {pre_end})\n"
            f"dest: chips [{pre_end}, {dest_end})\n"
            f"src: chips [{dest_end}, {beacon.chips.size})\n"
            f"samples at kappa={spec.kappa}: {spec.beacon_samples}\n"
        )
    _write_output(cfg, text)
    return 0


def cmd_detect(args) -> int:
    cfg = _load(args)
    node = cfg.require("node_address")
    gamma = cfg.require("gamma")
    det = DetectorConfig.from_beacon(cfg.spec, node, gamma)
    try:
        stream = load_stream(args.stream)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot parse stream file: {exc}", file=sys.stderr)
        return 2
    result = detect_wb(stream, det, gamma)
    out = result.to_dict()
    print(json.dumps(out, indent=2))
    if args.golden is not None:
        try:
            with open(args.golden, "r") as f:
                expected = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot parse golden file: {exc}", file=sys.stderr)
            return 2
        mismatches = {
            key: (expected[key], out.get(key))
            for key in expected
            if out.get(key) != expected[key]
        }
        if mismatches:
            for key, (want, got) in sorted(mismatches.items()):
                print(
                    f"golden mismatch: {key}: expected {want!r}, got {got!r}",
                    file=sys.stderr,
                )
            return 1
        print("golden: match", file=sys.stderr)
    return 0


def cmd_roc(args) -> int:
    cfg = _load(args)
    node = cfg.require("node_address")
    if cfg.trials < 1:
        raise ConfigError("analysis.trials must be >= 1")
    gammas = cfg.gammas if cfg.gammas else [cfg.require("gamma")]
    det = DetectorConfig.from_beacon(cfg.spec, node, gammas[0])
    points = roc_sweep(
        det,
        cfg.scenario,
        gammas,
        trials=cfg.trials,
        seed=cfg.scenario.seed,
        workers=cfg.workers,
        method=cfg.method,
        aligned_only=cfg.aligned_only,
    )
    if cfg.output_format == "json":
        payload = {
            "points": [
                {
                    "gamma": pt.gamma,
                    "p_d": pt.p_d,
                    "p_d_lo": pt.p_d_lo,
                    "p_d_hi": pt.p_d_hi,
                    "p_fa": pt.p_fa,
                    "p_fa_lo": pt.p_fa_lo,
                    "p_fa_hi": pt.p_fa_hi,
                    "trials": pt.trials,
                    "method": pt.method,
                }
                for pt in points
            ],
            "metadata": {
                "gammas": gammas,
                "trials": cfg.trials,
                "seed": cfg.scenario.seed,
                "hypothesis": cfg.scenario.hypothesis.value,
                "analytic_assumptions": list(ANALYTIC_ASSUMPTIONS),
            },
        }
        _write_output(cfg, json.dumps(payload, indent=2) + "\n")
    else:
        _write_output(cfg, roc_to_csv(points))
    if cfg.output_path is not None and cfg.figure:
        from .figures import plot_roc

        plot_roc(points, _figure_path(cfg.output_path))
    return 0


def cmd_power(args) -> int:
    pt = PowerPoint(
        e_dyn=args.e_dyn,
        f_clk=args.f_clk,
        p_leak=args.p_leak,
        p_sleep=args.p_sleep,
    )
    print(f"{power(pt):.12g}")
    return 0


def cmd_optimize(args) -> int:
    cfg = _load(args)
    if cfg.optimize is None:
        raise ConfigError("missing required config field: optimize")
    opt = cfg.optimize
    for key in ("M_range", "K_range", "gamma_grid"):
        if key not in opt:
            raise ConfigError(f"missing required config field: optimize.{key}")
    cost = CostModel(**opt.get("cost", {}))
    result = optimize_params(
        L=opt.get("L", cfg.spec.L),
        ber=opt.get("ber", cfg.scenario.ber),
        kappa=opt.get("kappa", cfg.spec.kappa),
        cost=cost,
        M_range=opt["M_range"],
        K_range=opt["K_range"],
        gamma_grid=opt["gamma_grid"],
    )
    best = {
        "M": result.best_m,
        "K": result.best_k,
        "gamma": result.best_gamma,
        "cost": result.best_cost,
    }
    print(json.dumps(best, indent=2))
    _write_output(cfg, surface_to_csv(result.surface))
    if cfg.output_path is not None and cfg.figure:
        from .figures import plot_cost_surface

        plot_cost_surface(result.surface, _figure_path(cfg.output_path))
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest() else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wrxdbb",
        description=(
            "Wake-up receiver digital base-band model: beacon codec, "
            "bit-exact detector, ROC estimation, power arithmetic, and "
            "beacon parameter search."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, output=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override scenario seed")
        p.add_argument("--trials", type=int, help="override trial count")
        p.add_argument("--workers", type=int, help="parallel trial workers")
        p.add_argument(
            "--format", choices=("csv", "json"), help="override output format"
        )
        if output:
            p.add_argument("--output", help="write output to this file")
            p.add_argument(
                "--no-figure",
                action="store_true",
                help="skip PNG rendering next to the output file",
            )

    p = sub.add_parser("beacon", help="dump an encoded beacon with boundaries")
    add_common(p)
    p.set_defaults(fn=cmd_beacon)

    p = sub.add_parser("detect", help="run the detector over a stream file")
    add_common(p, output=False)
    p.add_argument("stream", help="sample stream file (JSON header + bit lines)")
    p.add_argument(
        "--golden", help="expected DetectionResult JSON; mismatch exits 1"
    )
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("roc", help="threshold sweep (Monte Carlo / analytic)")
    add_common(p)
    p.set_defaults(fn=cmd_roc)

    p = sub.add_parser("power", help="active power from energy/clock/leakage")
    p.add_argument("e_dyn", type=float, help="switching energy per cycle, J")
    p.add_argument("f_clk", type=float, help="clock frequency, Hz")
    p.add_argument("p_leak", type=float, nargs="?", default=0.0, help="leakage, W")
    p.add_argument("p_sleep", type=float, nargs="?", default=0.0, help="sleep power, W")
    p.set_defaults(fn=cmd_power)

    p = sub.add_parser("optimize", help="grid search over (M, K, gamma)")
    add_common(p)
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("selftest", help="run the built-in sanity battery")
    p.set_defaults(fn=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
