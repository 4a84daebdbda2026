"""Replicated simulations: test size, power curves and finite-horizon thresholds.

Replicate ``i`` always draws from ``rng.split(master_seed, i)``, whatever the
horizon, grid point or thread count.  Power at ``u = 0`` therefore reproduces
the size estimate exactly, and neighbouring grid points share random numbers.
Values are gathered by replicate index before any reduction, so the output
does not depend on ``LAMP_THREADS``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, rng
from .kernels import (
    BoxcarKernel,
    ExponentialKernel,
    Kernel,
    check_stability,
    fisher_info_dep,
    fisher_info_star,
    kernel_from_config,
)
from .pointproc import _hawkes_times, _pair_times
from .statistics import _dep_value, _nonparam_value, _param_value
from .testing import (
    exact_nonparam_threshold,
    gaussian_quantile,
    limiting_power_dep,
    limiting_power_nonparam,
    limiting_power_param,
)

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "CurveRow",
    "CurveResult",
    "ThresholdTable",
    "replicate_values",
    "estimate_size",
    "estimate_power",
    "calibrate_threshold",
    "limit_curve",
    "run_experiment",
    "figure_config",
    "FIGURES",
]

FAMILIES = ("param", "dep", "nonparam")
DEFAULT_SIZE_HORIZONS = (25.0, 50.0, 100.0, 200.0, 300.0, 500.0, 750.0, 1000.0)
DEFAULT_EPS_GRID = tuple(round(0.01 * k, 2) for k in range(1, 26))


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte-Carlo study.

    ``s_star`` is the Poisson intensity under the null (``S_X`` for the
    dependence family). For the nonparametric family the alternative is the
    boxcar ``(r/N) 1{0<=t<=N}`` and ``grid`` holds ``r``; otherwise the
    alternative is ``(u/sqrt(T)) h`` and ``grid`` holds ``u``.
    """

    family: str = "param"
    s_star: float = 1.0
    horizons: tuple[float, ...] = (100.0, 300.0, 1000.0)
    replicates: int = 10_000
    master_seed: int = 2007
    kernel: Kernel = ExponentialKernel(0.5, 0.5)
    grid: tuple[float, ...] = tuple(0.5 * k for k in range(11))
    eps: float = 0.05
    eps_grid: tuple[float, ...] = DEFAULT_EPS_GRID
    N: float = 50.0
    s_y: float = 1.0
    exact_threshold: bool = False
    threshold: float | None = None
    method: str = "thinning"

    def __post_init__(self):
        for name in ("horizons", "grid", "eps_grid"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not (isinstance(self.replicates, int) and self.replicates >= 1):
            raise ValueError(f"replicates must be an integer >= 1, got {self.replicates!r}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        for name in ("horizons", "grid", "eps_grid"):
            values = getattr(self, name)
            if not values:
                raise ValueError(f"{name} must be nonempty")
            if list(values) != sorted(values):
                raise ValueError(f"{name} must be sorted")
        if min(self.horizons) <= 0:
            raise ValueError("horizons must be positive")
        if min(self.grid) < 0:
            raise ValueError("grid values must be >= 0")
        if not 0 < self.eps < 1 or not all(0 < e < 1 for e in self.eps_grid):
            raise ValueError("eps values must lie in (0, 1)")
        if not (self.s_star > 0 and self.s_y > 0 and self.N > 0):
            raise ValueError("s_star, s_y and N must be positive")
        if self.method not in ("thinning", "exact"):
            raise ValueError(f"method must be 'thinning' or 'exact', got {self.method!r}")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["kernel"] = self.kernel.to_config()
        for name in ("horizons", "grid", "eps_grid"):
            out[name] = list(out[name])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        data = dict(data)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if isinstance(data.get("kernel"), dict):
            data["kernel"] = kernel_from_config(data["kernel"])
        return cls(**data)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class CurveRow:
    grid_value: float
    frequency: float
    se: float
    m_effective: int
    valid: bool = True
    limit: float | None = None


@dataclass
class CurveResult:
    kind: str
    rows: list[CurveRow]
    horizon: float | None = None
    metadata: dict = field(default_factory=dict)


@dataclass
class ThresholdTable:
    eps: tuple[float, ...]
    horizons: tuple[float, ...]
    z_emp: dict[float, list[float]]
    z_gauss: list[float]
    low_m: list[bool]
    metadata: dict = field(default_factory=dict)


def worker_count() -> int:
    env = os.environ.get("LAMP_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"LAMP_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return os.cpu_count() or 1


def replicate_values(
    fn: Callable[[np.random.BitGenerator], float],
    replicates: int,
    master_seed: int,
    threads: int | None = None,
) -> np.ndarray:
    """``fn(split(master_seed, i))`` for ``i < replicates``, ordered by ``i``."""
    out = np.empty(replicates)
    threads = worker_count() if threads is None else max(1, threads)

    def work(lo, hi):
        for i in range(lo, hi):
            out[i] = fn(rng.split(master_seed, i))

    if threads == 1 or replicates < 2 * threads:
        work(0, replicates)
        return out
    bounds = np.linspace(0, replicates, 4 * threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(work, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
        for fut in futures:
            fut.result()
    return out


def _amplitude(value, horizon):
    return value / math.sqrt(horizon)


def _alt_kernel(config) -> Kernel:
    return BoxcarKernel(1.0, config.N) if config.family == "nonparam" else config.kernel


def _statistic_fn(config: ExperimentConfig, horizon: float, amplitude: float):
    s = config.s_star
    kernel = _alt_kernel(config)
    if config.family == "param":
        info = fisher_info_star(kernel, s)

        def fn(bitgen):
            times = _hawkes_times(bitgen, s, kernel, amplitude, horizon, config.method)
            return _param_value(times, horizon, kernel, s, info)

    elif config.family == "dep":
        s_y = config.s_y
        info = fisher_info_dep(kernel, s, s_y)

        def fn(bitgen):
            x, y = _pair_times(bitgen, s, s_y, kernel, amplitude, horizon)
            return _dep_value(x, y, horizon, kernel, s, s_y, info)

    else:

        def fn(bitgen):
            times = _hawkes_times(bitgen, s, kernel, amplitude, horizon)
            return _nonparam_value(times.size, horizon, s)

    return fn


def _threshold(config: ExperimentConfig, horizon: float) -> float:
    if config.family == "nonparam" and config.exact_threshold:
        k = exact_nonparam_threshold(config.s_star, horizon, config.eps)
        # X_T > k  <=>  delta_T > delta(k): same floating-point expression
        return _nonparam_value(k, horizon, config.s_star)
    if config.threshold is not None:
        return config.threshold
    return gaussian_quantile(config.eps)


def _row(value, stats, threshold, limit=None) -> CurveRow:
    m = stats.size
    p = float(np.mean(stats > threshold))
    return CurveRow(value, p, math.sqrt(p * (1.0 - p) / m), m, True, limit)


def limit_curve(config: ExperimentConfig) -> list[float]:
    """Closed-form limiting power on ``config.grid``."""
    if config.family == "param":
        info = fisher_info_star(config.kernel, config.s_star)
        return [limiting_power_param(u, info, config.eps) for u in config.grid]
    if config.family == "dep":
        info = fisher_info_dep(config.kernel, config.s_star, config.s_y)
        return [limiting_power_dep(u, info, config.eps) for u in config.grid]
    return [limiting_power_nonparam(r, config.s_star, config.eps) for r in config.grid]


def _meta(config, kind, started):
    return {
        "kind": kind,
        "config_digest": config.digest(),
        "seed": config.master_seed,
        "M": config.replicates,
        "wall_time": time.perf_counter() - started,
    }


def estimate_size(config: ExperimentConfig) -> CurveResult:
    """Rejection frequency under the Poisson null at every horizon."""
    started = time.perf_counter()
    rows = []
    for horizon in config.horizons:
        stats = replicate_values(
            _statistic_fn(config, horizon, 0.0), config.replicates, config.master_seed
        )
        rows.append(_row(horizon, stats, _threshold(config, horizon)))
        log.info("size T=%g alpha=%.4f", horizon, rows[-1].frequency)
    return CurveResult("size", rows, None, _meta(config, "size", started))


def estimate_power(config: ExperimentConfig) -> list[CurveResult]:
    """Power curve over ``config.grid``, one ``CurveResult`` per horizon.

    Grid points whose effective kernel violates the stability condition are
    kept as rows with ``valid=False`` and a NaN frequency.
    """
    started = time.perf_counter()
    limits = limit_curve(config)
    kernel = _alt_kernel(config)
    results = []
    for horizon in config.horizons:
        threshold = _threshold(config, horizon)
        rows = []
        for value, limit in zip(config.grid, limits):
            amplitude = _amplitude(value, horizon)
            if not check_stability(kernel, amplitude).stable:
                rows.append(CurveRow(value, math.nan, math.nan, 0, False, limit))
                continue
            stats = replicate_values(
                _statistic_fn(config, horizon, amplitude), config.replicates, config.master_seed
            )
            rows.append(_row(value, stats, threshold, limit))
            log.info("power T=%g param=%g beta=%.4f", horizon, value, rows[-1].frequency)
        results.append(CurveResult("power", rows, horizon, _meta(config, "power", started)))
    return results


def order_statistic_index(eps: float, m: int) -> int:
    """0-based index of the ``ceil((1 - eps) m)``-th order statistic."""
    k = math.ceil(round((1.0 - eps) * m, 9))
    return min(max(k, 1), m) - 1


def null_statistics(config: ExperimentConfig, horizon: float) -> np.ndarray:
    return replicate_values(_statistic_fn(config, horizon, 0.0), config.replicates, config.master_seed)


def calibrate_threshold(config: ExperimentConfig, eps_grid=None) -> ThresholdTable:
    """Empirical ``1 - eps`` quantiles of the statistic under the null."""
    started = time.perf_counter()
    eps_grid = tuple(config.eps_grid if eps_grid is None else eps_grid)
    m = config.replicates
    z_emp = {}
    for horizon in config.horizons:
        stats = np.sort(null_statistics(config, horizon))
        z_emp[horizon] = [float(stats[order_statistic_index(e, m)]) for e in eps_grid]
    low_m = [m * e < 10 for e in eps_grid]
    if any(low_m):
        log.warning("M=%d is too small for some eps (M*eps < 10); flagged in output", m)
    return ThresholdTable(
        eps=eps_grid,
        horizons=config.horizons,
        z_emp=z_emp,
        z_gauss=[gaussian_quantile(e) for e in eps_grid],
        low_m=low_m,
        metadata=_meta(config, "threshold", started),
    )


# CSV output

def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _tlabel(horizon: float) -> str:
    return str(int(horizon)) if float(horizon).is_integer() else repr(horizon)


def _header(config: ExperimentConfig, kind: str) -> str:
    meta = {
        "kind": kind,
        "config_digest": config.digest(),
        "seed": config.master_seed,
        "M": config.replicates,
        "version": f"lamp {__version__}",
    }
    return "# " + json.dumps(meta, sort_keys=True)


def size_csv(config: ExperimentConfig, result: CurveResult) -> str:
    lines = [_header(config, "size"), "T,alpha,se"]
    lines += [f"{_fmt(r.grid_value)},{_fmt(r.frequency)},{_fmt(r.se)}" for r in result.rows]
    return "\n".join(lines) + "\n"


def power_csv(config: ExperimentConfig, results: list[CurveResult]) -> str:
    name = "r" if config.family == "nonparam" else "u"
    labels = [_tlabel(res.horizon) for res in results]
    cols = [name] + [f"beta_T{t}" for t in labels] + ["beta_limit", "valid"] + [f"se_T{t}" for t in labels]
    lines = [_header(config, "power"), ",".join(cols)]
    for i, value in enumerate(config.grid):
        rows = [res.rows[i] for res in results]
        cells = [_fmt(value)] + [_fmt(r.frequency) for r in rows]
        cells += [_fmt(rows[0].limit), _fmt(all(r.valid for r in rows))]
        cells += [_fmt(r.se) for r in rows]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def threshold_csv(config: ExperimentConfig, table: ThresholdTable) -> str:
    labels = [_tlabel(t) for t in table.horizons]
    cols = ["eps"] + [f"z_emp_T{t}" for t in labels] + ["z_gauss", "low_m"]
    lines = [_header(config, "threshold"), ",".join(cols)]
    for i, e in enumerate(table.eps):
        cells = [_fmt(e)] + [_fmt(table.z_emp[t][i]) for t in table.horizons]
        cells += [_fmt(table.z_gauss[i]), _fmt(table.low_m[i])]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def limit_csv(config: ExperimentConfig) -> str:
    lines = ["u_or_r,beta_limit"]
    lines += [f"{_fmt(v)},{_fmt(b)}" for v, b in zip(config.grid, limit_curve(config))]
    return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, kind: str, out_dir) -> tuple[object, Path]:
    """Run ``kind`` ("size", "power" or "threshold") and write ``<kind>.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    if not out_dir.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {out_dir}")
    if kind == "size":
        result = estimate_size(config)
        text = size_csv(config, result)
    elif kind == "power":
        result = estimate_power(config)
        text = power_csv(config, result)
    elif kind == "threshold":
        result = calibrate_threshold(config)
        text = threshold_csv(config, result)
    else:
        raise ValueError(f"unknown experiment kind {kind!r}")
    path = out_dir / f"{kind}.csv"
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return result, path


# Figure presets

_PAPER_KERNEL = ExponentialKernel(0.5, 0.5)
_FIG_GRID = tuple(0.5 * k for k in range(11))

FIGURES = {
    "fig1": ("size", dict(family="param", horizons=DEFAULT_SIZE_HORIZONS)),
    "fig2": ("power", dict(family="param", grid=_FIG_GRID)),
    "fig3": ("threshold", dict(family="param", eps_grid=DEFAULT_EPS_GRID)),
    "fig4": ("threshold", dict(family="param", eps_grid=tuple(round(0.02 + 0.005 * k, 3) for k in range(13)))),
    "fig5": ("power", dict(family="nonparam", N=5.0, grid=_FIG_GRID)),
    "fig6": ("power", dict(family="nonparam", N=50.0, grid=_FIG_GRID)),
}

_SCALE_M = {
    "desk": {"size": 100_000, "threshold": 100_000, "power": 10_000},
    "paper": {"size": 10_000_000, "threshold": 10_000_000, "power": 1_000_000},
}


def figure_config(name: str, scale: str = "desk") -> tuple[str, ExperimentConfig]:
    """Experiment kind and configuration of the figure preset ``name``."""
    if name not in FIGURES:
        raise ValueError(f"unknown figure {name!r}; valid names: {', '.join(FIGURES)}")
    if scale not in _SCALE_M:
        raise ValueError(f"scale must be 'desk' or 'paper', got {scale!r}")
    kind, overrides = FIGURES[name]
    config = ExperimentConfig(
        s_star=1.0, kernel=_PAPER_KERNEL, replicates=_SCALE_M[scale][kind], **overrides
    )
    return kind, config
