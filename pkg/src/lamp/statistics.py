"""Test statistics, log-likelihood ratios and the Poisson covariance identity.

Conventions: all stochastic integrals are taken from the left, so an event
never excites itself (``sum over t_i < t_j``). Compensators are integrated
in closed form per kernel.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .kernels import Kernel, fisher_info_dep, fisher_info_star
from .pointproc import EventSequence, excitation

__all__ = [
    "Family",
    "StatisticValue",
    "LanDecomposition",
    "delta_param",
    "delta_dep",
    "delta_nonparam",
    "log_likelihood_ratio",
    "lan_decompose",
    "excitation_energy",
    "pair_scan_excitation",
    "lemma1_covariance",
    "lemma1_monte_carlo",
]


class Family(str, enum.Enum):
    PARAM = "param"
    DEP = "dep"
    NONPARAM = "nonparam"
    LOGLR = "loglr"


@dataclass(frozen=True)
class StatisticValue:
    value: float
    family: Family
    inputs_digest: str

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class LanDecomposition:
    """``log_lr == u * sqrt(info) * delta - u**2 * info / 2 + remainder``."""

    delta: float
    info: float
    log_lr: float
    remainder: float


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            h.update(np.ascontiguousarray(part, dtype=float).tobytes())
        else:
            h.update(json.dumps(part, sort_keys=True, default=str).encode())
        h.update(b"|")
    return h.hexdigest()[:16]


def pair_scan_excitation(kernel: Kernel, source, query) -> np.ndarray:
    """Direct O(n m) evaluation of ``sum_{s_i < q} h(q - s_i)``.

    Independent of the recursive/windowed core; used as a cross-check.
    """
    source = np.asarray(source, dtype=float)
    out = np.empty(len(query))
    for k, q in enumerate(np.asarray(query, dtype=float)):
        earlier = source[source < q]
        out[k] = float(np.sum(kernel(q - earlier))) if earlier.size else 0.0
    return out


def _excite(kernel, source, query, method):
    if method == "recursive":
        return excitation(kernel, source, query)
    if method == "pairscan":
        return pair_scan_excitation(kernel, source, query)
    raise ValueError(f"method must be 'recursive' or 'pairscan', got {method!r}")


def _param_value(times, horizon, kernel, s_star, info, method="recursive"):
    scale = math.sqrt(horizon * info)
    if times.size == 0:
        return 0.0
    pairs = float(np.sum(_excite(kernel, times, times, method)))
    tails = float(np.sum(kernel.cumulative(horizon - times)))
    return pairs / (s_star * scale) - tails / scale


def delta_param(
    seq: EventSequence, kernel: Kernel, s_star: float, method: str = "recursive"
) -> StatisticValue:
    """Score statistic of the parametric test against ``S_* + (u/sqrt(T)) int h dX``.

    ``(1/(S_* sqrt(T I))) sum_j sum_{t_i<t_j} h(t_j - t_i)
    - (1/sqrt(T I)) sum_j int_0^{T - t_j} h``, with ``I = fisher_info_star``.
    """
    info = fisher_info_star(kernel, s_star)
    if info <= 0:
        raise ValueError("zero Fisher information (zero kernel): statistic undefined")
    value = _param_value(seq.times, seq.horizon, kernel, s_star, info, method)
    return StatisticValue(
        value, Family.PARAM, _digest(seq.times, seq.horizon, kernel.to_config(), s_star)
    )


def _dep_value(x, y, horizon, kernel, s_x, s_y, info):
    scale = math.sqrt(horizon * info)
    if x.size == 0:
        return 0.0
    cross = float(np.sum(excitation(kernel, x, y))) if y.size else 0.0
    tails = float(np.sum(kernel.cumulative(horizon - x)))
    return cross / (s_y * scale) - tails / scale


def delta_dep(
    x: EventSequence, y: EventSequence, kernel: Kernel, s_y: float, s_x: float
) -> StatisticValue:
    """Statistic of the dependence test: does ``X`` excite ``Y``?"""
    if x.horizon != y.horizon:
        raise ValueError(f"horizons differ: {x.horizon} vs {y.horizon}")
    info = fisher_info_dep(kernel, s_x, s_y)
    if info <= 0:
        raise ValueError("zero Fisher information (zero kernel): statistic undefined")
    value = _dep_value(x.times, y.times, x.horizon, kernel, s_x, s_y, info)
    return StatisticValue(
        value, Family.DEP, _digest(x.times, y.times, x.horizon, kernel.to_config(), s_x, s_y)
    )


def _nonparam_value(count, horizon, s_star):
    mean = s_star * horizon
    return (count - mean) / math.sqrt(mean)


def delta_nonparam(seq: EventSequence, s_star: float) -> StatisticValue:
    """``(X_T - S_* T) / sqrt(S_* T)``."""
    if not (s_star > 0 and math.isfinite(s_star)):
        raise ValueError(f"s_star must be positive, got {s_star}")
    value = _nonparam_value(len(seq), seq.horizon, s_star)
    return StatisticValue(value, Family.NONPARAM, _digest(len(seq), seq.horizon, s_star))


def _llr_value(times, horizon, s_star, kernel, amplitude):
    if amplitude == 0 or times.size == 0:
        return 0.0
    lam = amplitude * excitation(kernel, times, times) / s_star
    if np.any(lam <= -1):
        raise ValueError("nonpositive intensity at an event")
    compensator = amplitude * float(np.sum(kernel.cumulative(horizon - times)))
    return float(np.sum(np.log1p(lam))) - compensator


def log_likelihood_ratio(
    seq: EventSequence, s_star: float, kernel: Kernel, amplitude: float
) -> float:
    """Log-likelihood of ``S_* + amplitude * sum h(t - t_i)`` against Poisson ``S_*``."""
    if not (s_star > 0 and math.isfinite(s_star)):
        raise ValueError(f"s_star must be positive, got {s_star}")
    return _llr_value(seq.times, seq.horizon, s_star, kernel, amplitude)


def _lan(times, horizon, u, kernel, s_star, info):
    delta = _param_value(times, horizon, kernel, s_star, info)
    log_lr = _llr_value(times, horizon, s_star, kernel, u / math.sqrt(horizon))
    remainder = log_lr - u * math.sqrt(info) * delta + 0.5 * u * u * info
    return LanDecomposition(delta=delta, info=info, log_lr=log_lr, remainder=remainder)


def lan_decompose(seq: EventSequence, u: float, kernel: Kernel, s_star: float) -> LanDecomposition:
    """Split the log-likelihood ratio at ``amplitude = u / sqrt(T)`` into its LAN terms."""
    if u < 0:
        raise ValueError(f"u must be >= 0, got {u}")
    info = fisher_info_star(kernel, s_star)
    if info <= 0:
        raise ValueError("zero Fisher information (zero kernel): statistic undefined")
    return _lan(seq.times, seq.horizon, u, kernel, s_star, info)


def excitation_energy(seq: EventSequence, kernel: Kernel, s_star: float) -> float:
    """Time average ``(1/(S_* T)) int_0^T H_t^2 dt`` with ``H_t = sum_{t_i<t} h(t - t_i)``.

    Tends to ``fisher_info_star`` in probability under the Poisson hypothesis.
    Exact for exponential kernels; for step kernels ``H`` is piecewise
    constant and is integrated between its breakpoints.
    """
    times, horizon = seq.times, seq.horizon
    if times.size == 0:
        return 0.0
    if kernel.is_step:
        knots, _ = kernel.steps()
        edges = np.unique(np.concatenate(([0.0, horizon], (times[:, None] + knots[None, :]).ravel())))
        edges = edges[(edges >= 0) & (edges <= horizon)]
        mids = 0.5 * (edges[:-1] + edges[1:])
        h = excitation(kernel, times, mids)
        total = float(np.sum(h**2 * np.diff(edges)))
    else:
        # after t_k the excitation is H_k^+ exp(-gamma (t - t_k))
        gamma = kernel.gamma
        after = excitation(kernel, times, times) + kernel.alpha
        gaps = np.diff(np.append(times, horizon))
        total = float(np.sum(after**2 * -np.expm1(-2 * gamma * gaps) / (2 * gamma)))
    return total / (s_star * horizon)


# Covariance of squared Poisson integrals

def _restricted_segments(kernel, lo, hi):
    out = []
    for left, right, coef, rate in kernel.segments():
        a, b = max(left, lo), min(right, hi)
        if b > a and coef != 0.0:
            out.append((a, b, coef, rate))
    return out


def _product_integral(parts, lo, hi) -> float:
    """``int_lo^hi prod_k f_k(v) dv`` for piecewise ``coef * exp(-rate * v)`` factors."""
    bounds = {lo, hi}
    for segs in parts:
        for a, b, _, _ in segs:
            bounds.update((a, b))
    grid = sorted(x for x in bounds if lo <= x <= hi)
    total = 0.0
    for a, b in zip(grid, grid[1:]):
        mid = 0.5 * (a + b)
        coef, rate = 1.0, 0.0
        for segs in parts:
            piece = next((s for s in segs if s[0] <= mid < s[1]), None)
            if piece is None:
                coef = 0.0
                break
            coef *= piece[2]
            rate += piece[3]
        if coef == 0.0:
            continue
        if rate == 0.0:
            total += coef * (b - a)
        else:
            total += coef * math.exp(-rate * a) * -math.expm1(-rate * (b - a)) / rate
    return total


def lemma1_covariance(f: Kernel, g: Kernel, s: float, window: tuple[float, float]) -> float:
    """``Cov((int_A f dX)^2, (int_A g dX)^2)`` for a Poisson process of intensity ``s``.

    Sum of the five closed-form integral terms, all exact.
    """
    lo, hi = (float(w) for w in window)
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise ValueError(f"window must be a bounded interval, got {window}")
    if not (s > 0 and math.isfinite(s)):
        raise ValueError(f"intensity must be positive, got {s}")
    fs = _restricted_segments(f, lo, hi)
    gs = _restricted_segments(g, lo, hi)

    def integral(nf, ng):
        return s * _product_integral([fs] * nf + [gs] * ng, lo, hi)

    i_f, i_g, i_fg = integral(1, 0), integral(0, 1), integral(1, 1)
    return (
        4 * i_f * i_g * i_fg
        + 2 * i_fg**2
        + integral(2, 2)
        + 2 * i_f * integral(1, 2)
        + 2 * i_g * integral(2, 1)
    )


def lemma1_monte_carlo(
    f: Kernel, g: Kernel, s: float, window: tuple[float, float], n_paths: int, seed: int = 0,
    chunk: int = 250_000,
) -> tuple[float, float]:
    """Monte-Carlo estimate and standard error of the same covariance."""
    from . import rng

    lo, hi = (float(w) for w in window)
    gen = np.random.Generator(rng.split(seed, 0))
    a2 = np.empty(n_paths)
    b2 = np.empty(n_paths)
    for start in range(0, n_paths, chunk):
        m = min(chunk, n_paths - start)
        counts = gen.poisson(s * (hi - lo), size=m)
        pos = gen.uniform(lo, hi, size=int(counts.sum()))
        owner = np.repeat(np.arange(m), counts)
        a2[start:start + m] = np.bincount(owner, weights=f(pos), minlength=m) ** 2
        b2[start:start + m] = np.bincount(owner, weights=g(pos), minlength=m) ** 2
    prod = (a2 - a2.mean()) * (b2 - b2.mean())
    est = float(prod.sum() / (n_paths - 1))
    se = float(prod.std(ddof=1) / math.sqrt(n_paths))
    return est, se
