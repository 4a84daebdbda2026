"""Command-line front end.

Exit codes: 0 success, 1 failed check, 2 usage or configuration error,
3 I/O error.  Settings are resolved as flags > config file > preset.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .kernels import BoxcarKernel, ExponentialKernel, TabulatedKernel, kernel_from_config, parse_kernel
from .montecarlo import (
    FIGURES,
    ExperimentConfig,
    figure_config,
    limit_csv,
    run_experiment,
)
from .pointproc import SimSpec, read_events, simulate_hawkes, simulate_pair, write_events
from .statistics import (
    delta_dep,
    delta_nonparam,
    delta_param,
    lemma1_covariance,
    lemma1_monte_carlo,
    log_likelihood_ratio,
)

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("lamp")


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _kernel_arg(text: str):
    try:
        return parse_kernel(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return data


# simulate

def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    kernel = args.kernel
    if kernel is None and "kernel" in cfg:
        kernel = kernel_from_config(cfg["kernel"])

    def pick(flag, key, default):
        return flag if flag is not None else cfg.get(key, default)

    horizon = float(pick(args.T, "horizon", 100.0))
    s_star = float(pick(args.s_star, "s_star", 1.0))
    amplitude = float(pick(args.amplitude, "amplitude", 1.0 if kernel is not None else 0.0))
    seed = int(pick(args.seed, "seed", 0))
    if args.pair:
        s_y = float(pick(args.s_y, "s_y", 1.0))
        x, y = simulate_pair(s_star, s_y, kernel, amplitude, horizon, seed)
        write_events(x, args.out)
        write_events(y, args.out_y)
        print(f"wrote {len(x)} X events to {args.out} and {len(y)} Y events to {args.out_y}", file=sys.stderr)
        return EXIT_OK
    spec = SimSpec(
        s_star=s_star, horizon=horizon, kernel=kernel, amplitude=amplitude, seed=seed,
        method=pick(args.method, "method", "thinning"),
    )
    seq = simulate_hawkes(spec)
    write_events(seq, args.out)
    print(f"wrote {len(seq)} events to {args.out}", file=sys.stderr)
    return EXIT_OK


# stat

def cmd_stat(args) -> int:
    seq = read_events(args.events)
    kernel = args.kernel or ExponentialKernel(0.5, 0.5)
    family = args.family
    if family == "param":
        value = delta_param(seq, kernel, args.s_star).value
    elif family == "dep":
        if args.y is None:
            raise UsageError("--y EVENTS is required for the dep family")
        value = delta_dep(seq, read_events(args.y), kernel, args.s_y, args.s_star).value
    elif family == "nonparam":
        value = delta_nonparam(seq, args.s_star).value
    else:
        value = log_likelihood_ratio(seq, args.s_star, kernel, args.amplitude)
    print(f"{value:.12g}")
    record = {
        "family": family,
        "value": value,
        "T": seq.horizon,
        "s_star": args.s_star,
        "kernel": None if family == "nonparam" else kernel.to_config(),
    }
    print(json.dumps(record))
    return EXIT_OK


# size / power / threshold / figure

def _experiment_config(args, preset: ExperimentConfig | None = None) -> ExperimentConfig:
    base = (preset or ExperimentConfig()).to_dict()
    base.update(_load_config(args.config))
    flags = {
        "family": args.family,
        "s_star": args.s_star,
        "s_y": args.s_y,
        "horizons": args.T,
        "replicates": args.M,
        "master_seed": args.seed,
        "eps": args.eps,
        "N": args.N,
        "grid": getattr(args, "grid", None),
        "eps_grid": getattr(args, "eps_grid", None),
        "kernel": args.kernel.to_config() if args.kernel is not None else None,
        "method": args.method,
        "threshold": getattr(args, "threshold", None),
    }
    base.update({k: v for k, v in flags.items() if v is not None})
    if args.exact_threshold:
        base["exact_threshold"] = True
    return ExperimentConfig.from_dict(base)


def _out_dir(args) -> Path:
    return Path(args.out)


def _report(path):
    print(f"wrote {path}", file=sys.stderr)


def cmd_size(args) -> int:
    _, path = run_experiment(_experiment_config(args), "size", _out_dir(args))
    _report(path)
    return EXIT_OK


def cmd_power(args) -> int:
    config = _experiment_config(args)
    if args.limit:
        text = limit_csv(config)
        if args.out == "-":
            sys.stdout.write(text)
        else:
            out = Path(args.out)
            target = out / "power_limit.csv" if out.is_dir() else out
            target.write_text(text)
            _report(target)
        return EXIT_OK
    _, path = run_experiment(config, "power", _out_dir(args))
    _report(path)
    return EXIT_OK


def cmd_threshold(args) -> int:
    _, path = run_experiment(_experiment_config(args), "threshold", _out_dir(args))
    _report(path)
    return EXIT_OK


def cmd_figure(args) -> int:
    if args.name not in FIGURES:
        raise UsageError(f"unknown figure {args.name!r}; valid names: {', '.join(FIGURES)}")
    kind, preset = figure_config(args.name, args.scale)
    if args.scale == "paper":
        log.warning("full scale runs %d replicates per point and can take hours", preset.replicates)
    config = _experiment_config(args, preset)
    _, path = run_experiment(config, kind, _out_dir(args))
    _report(path)
    return EXIT_OK


# lemma1-check

def lemma1_cases(count: int, seed: int = 0) -> list[tuple[str, object, object, float, tuple[float, float]]]:
    """Anchor cases first, then randomized (f, g, S, window) draws."""
    one = BoxcarKernel(1.0, 1.0)
    cases = [
        ("anchor f=g=1 [0,1] S=1", one, one, 1.0, (0.0, 1.0)),
        ("g=0", ExponentialKernel(1.0, 0.5), BoxcarKernel(0.0, 1.0), 1.5, (0.0, 2.0)),
        ("anchor f=g=1 [0,1] S=2", one, one, 2.0, (0.0, 1.0)),
    ]
    gen = np.random.default_rng(seed)

    def random_kernel():
        kind = gen.integers(3)
        if kind == 0:
            return ExponentialKernel(float(gen.uniform(0.2, 2.0)), float(gen.uniform(0.2, 2.0)))
        if kind == 1:
            return BoxcarKernel(float(gen.uniform(0.5, 2.0)), float(gen.uniform(0.5, 3.0)))
        knots = np.cumsum(gen.uniform(0.2, 1.0, size=4))
        return TabulatedKernel(tuple(np.round(knots - knots[0], 6)), tuple(np.round(gen.uniform(0.0, 1.5, 3), 6)))

    k = 0
    while len(cases) < count:
        k += 1
        start = float(gen.uniform(0.0, 1.0))
        window = (round(start, 6), round(start + float(gen.uniform(0.5, 3.0)), 6))
        cases.append((f"random {k}", random_kernel(), random_kernel(), round(float(gen.uniform(0.5, 3.0)), 6), window))
    return cases[:count]


def cmd_lemma1_check(args) -> int:
    if args.cases < 1:
        raise UsageError("--cases must be >= 1")
    if args.M < 2:
        raise UsageError("--M must be >= 2")
    failed = 0
    print(f"{'case':<26} {'analytic':>12} {'monte_carlo':>12} {'se':>10} {'z':>7}  result")
    for i, (name, f, g, s, window) in enumerate(lemma1_cases(args.cases, args.seed)):
        exact = lemma1_covariance(f, g, s, window)
        est, se = lemma1_monte_carlo(f, g, s, window, args.M, seed=args.seed + i)
        z = abs(est - exact) / se if se > 0 else (0.0 if est == exact else math.inf)
        ok = abs(est - exact) <= 4 * se
        failed += not ok
        print(f"{name:<26} {exact:12.6g} {est:12.6g} {se:10.3g} {z:7.2f}  {'PASS' if ok else 'FAIL'}")
    return EXIT_CHECK if failed else EXIT_OK


# parser

def _add_experiment_flags(p, grid=False, eps_grid=False):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--family", choices=["param", "dep", "nonparam"])
    p.add_argument("--kernel", type=_kernel_arg, help="e.g. exponential:0.5,0.5 or boxcar:1,5")
    p.add_argument("--s-star", type=float, help="null intensity (S_X for the dep family)")
    p.add_argument("--s-y", type=float, help="null intensity of Y (dep family)")
    p.add_argument("--T", type=_floats, help="comma-separated horizons")
    p.add_argument("--M", type=int, help="replicates per point")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--eps", type=float, help="nominal size")
    p.add_argument("--N", type=float, help="boxcar width for the nonparam family")
    p.add_argument("--method", choices=["thinning", "exact"], help="exponential-kernel simulator")
    p.add_argument("--exact-threshold", action="store_true", help="exact Poisson threshold (nonparam)")
    if grid:
        p.add_argument("--grid", type=_floats, help="comma-separated u (or r) values")
        p.add_argument("--threshold", type=float, help="fixed rejection threshold instead of z_eps")
    if eps_grid:
        p.add_argument("--eps-grid", type=_floats, help="comma-separated eps values")
    p.add_argument("--out", default=".", help="output directory (must exist)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lamp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lamp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one event sequence to CSV")
    p.add_argument("--config", help="JSON with s_star, horizon, kernel, amplitude, seed")
    p.add_argument("--s-star", type=float, help="baseline intensity (S_X with --pair)")
    p.add_argument("--T", type=float, help="horizon")
    p.add_argument("--seed", type=int)
    p.add_argument("--kernel", type=_kernel_arg, help="e.g. exponential:0.5,0.5; omit for Poisson")
    p.add_argument("--amplitude", type=float, help="multiplier of the kernel")
    p.add_argument("--method", choices=["thinning", "exact"])
    p.add_argument("--pair", action="store_true", help="simulate X and a Y driven by X")
    p.add_argument("--s-y", type=float, help="baseline intensity of Y (with --pair)")
    p.add_argument("--out", default="events.csv", help="output CSV (X with --pair)")
    p.add_argument("--out-y", default="events_y.csv", help="Y output CSV with --pair")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stat", help="evaluate a test statistic on an event CSV")
    p.add_argument("events", help="event CSV (X for the dep family)")
    p.add_argument("--family", choices=["param", "dep", "nonparam", "loglr"], default="param")
    p.add_argument("--s-star", type=float, default=1.0)
    p.add_argument("--kernel", type=_kernel_arg, help="default exponential:0.5,0.5")
    p.add_argument("--y", help="Y event CSV (dep family)")
    p.add_argument("--s-y", type=float, default=1.0)
    p.add_argument("--amplitude", type=float, default=1.0, help="alternative amplitude (loglr)")
    p.set_defaults(func=cmd_stat)

    p = sub.add_parser("size", help="Monte-Carlo test size over horizons -> size.csv")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_size)

    p = sub.add_parser("power", help="Monte-Carlo power curves -> power.csv")
    _add_experiment_flags(p, grid=True)
    p.add_argument("--limit", action="store_true", help="only the closed-form limiting curve (u_or_r,beta_limit)")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("threshold", help="empirical finite-T thresholds -> threshold.csv")
    _add_experiment_flags(p, eps_grid=True)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("figure", help="run one of the figure presets fig1..fig6")
    p.add_argument("name", help=f"one of {', '.join(FIGURES)}")
    p.add_argument("--scale", choices=["desk", "paper"], default="desk")
    _add_experiment_flags(p, grid=True, eps_grid=True)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("lemma1-check", help="check the squared-integral covariance formula by Monte Carlo")
    p.add_argument("--cases", type=int, default=8)
    p.add_argument("--M", type=int, default=1_000_000, help="Poisson paths per case")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_lemma1_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"lamp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"lamp {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
