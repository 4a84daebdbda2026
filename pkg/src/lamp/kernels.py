"""Excitation kernels and the scalar functionals the tests are built on.

Three kernel families are supported:

``ExponentialKernel``
    ``h(t) = alpha * exp(-gamma * t)``, unbounded support.
``BoxcarKernel``
    ``h(t) = (r / N) * 1{0 <= t <= N}``, the least favourable alternative of
    the nonparametric problem.
``TabulatedKernel``
    right-constant step function ``h(t) = values[k]`` on
    ``[knots[k], knots[k+1])``, zero outside ``[knots[0], knots[-1])``.

Boxcar and tabulated kernels share a step representation (``steps()``) which
is what the compiled core consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

__all__ = [
    "ExponentialKernel",
    "BoxcarKernel",
    "TabulatedKernel",
    "Kernel",
    "StabilityCheck",
    "UnstableKernelError",
    "check_stability",
    "fisher_info_star",
    "fisher_info_dep",
    "stationary_rate",
    "spectral_density",
    "kernel_from_config",
    "parse_kernel",
]


class UnstableKernelError(ValueError):
    """Raised when ``integral of g >= 1`` and a stationary regime is required."""


def _as_time(t):
    arr = np.asarray(t, dtype=float)
    return arr, arr.ndim == 0


@dataclass(frozen=True)
class ExponentialKernel:
    alpha: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be finite and > 0, got {self.gamma}")

    support = math.inf
    is_step = False

    def __call__(self, t):
        arr, scalar = _as_time(t)
        with np.errstate(over="ignore"):
            out = np.where(arr >= 0, self.alpha * np.exp(-self.gamma * np.maximum(arr, 0.0)), 0.0)
        return float(out) if scalar else out

    def l1_norm(self) -> float:
        return self.alpha / self.gamma

    def l2_norm_sq(self) -> float:
        return self.alpha**2 / (2.0 * self.gamma)

    def cumulative(self, x):
        """``integral_0^x h(v) dv`` (zero for ``x <= 0``)."""
        arr, scalar = _as_time(x)
        out = -(self.alpha / self.gamma) * np.expm1(-self.gamma * np.maximum(arr, 0.0))
        return float(out) if scalar else out

    def scaled(self, c: float) -> ExponentialKernel:
        return ExponentialKernel(c * self.alpha, self.gamma)

    def segments(self):
        """Pieces ``(left, right, coef, rate)`` with ``h(t) = coef * exp(-rate * t)``."""
        return [(0.0, math.inf, self.alpha, self.gamma)]

    def to_config(self) -> dict:
        return {"type": "exponential", "alpha": self.alpha, "gamma": self.gamma}


class _StepKernel:
    """Shared behaviour of kernels that are right-constant step functions."""

    is_step = True

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def support(self) -> float:
        return float(self.steps()[0][-1])

    def __call__(self, t):
        knots, values = self.steps()
        arr, scalar = _as_time(t)
        idx = np.searchsorted(knots, arr, side="right") - 1
        inside = (idx >= 0) & (idx < len(values))
        out = np.where(inside, values[np.clip(idx, 0, len(values) - 1)], 0.0)
        return float(out) if scalar else out

    def l1_norm(self) -> float:
        knots, values = self.steps()
        return float(np.sum(values * np.diff(knots)))

    def l2_norm_sq(self) -> float:
        knots, values = self.steps()
        return float(np.sum(values**2 * np.diff(knots)))

    def cumulative(self, x):
        knots, values = self.steps()
        cum = np.concatenate(([0.0], np.cumsum(values * np.diff(knots))))
        arr, scalar = _as_time(x)
        # piecewise linear; flat before the first knot and after the last
        out = np.interp(arr, knots, cum, left=0.0, right=cum[-1])
        return float(out) if scalar else out

    def segments(self):
        knots, values = self.steps()
        return [(float(a), float(b), float(v), 0.0) for a, b, v in zip(knots[:-1], knots[1:], values)]


@dataclass(frozen=True)
class BoxcarKernel(_StepKernel):
    """``(r / N)`` on ``[0, N)``: total mass ``r``, width ``N``.

    Like every step kernel the right end is open, so a lag of exactly ``N``
    contributes nothing. This is a null set and never changes a functional.
    """

    r: float
    N: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r >= 0):
            raise ValueError(f"r must be finite and >= 0, got {self.r}")
        if not (math.isfinite(self.N) and self.N > 0):
            raise ValueError(f"N must be finite and > 0, got {self.N}")

    def steps(self):
        return np.array([0.0, float(self.N)]), np.array([self.r / self.N])

    def l1_norm(self) -> float:
        return float(self.r)

    def l2_norm_sq(self) -> float:
        return self.r**2 / self.N

    def scaled(self, c: float) -> BoxcarKernel:
        return BoxcarKernel(c * self.r, self.N)

    def to_config(self) -> dict:
        return {"type": "boxcar", "r": self.r, "N": self.N}


@dataclass(frozen=True)
class TabulatedKernel(_StepKernel):
    knots: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        knots = tuple(float(k) for k in self.knots)
        values = tuple(float(v) for v in self.values)
        # a trailing value for the region beyond the support is allowed if it is 0
        if len(values) == len(knots) and values and values[-1] == 0.0:
            values = values[:-1]
        if len(knots) != len(values) + 1 or not values:
            raise ValueError("tabulated kernel needs len(knots) == len(values) + 1 >= 2")
        if knots[0] < 0:
            raise ValueError("tabulated knots must start at t >= 0")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise ValueError("tabulated knots must be strictly increasing")
        if not all(math.isfinite(k) for k in knots):
            raise ValueError("tabulated knots must be finite")
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise ValueError("tabulated values must be finite and >= 0")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    def steps(self):
        return np.array(self.knots), np.array(self.values)

    def scaled(self, c: float) -> TabulatedKernel:
        return TabulatedKernel(self.knots, tuple(c * v for v in self.values))

    def to_config(self) -> dict:
        return {"type": "tabulated", "knots": list(self.knots), "values": list(self.values)}


Kernel = Union[ExponentialKernel, BoxcarKernel, TabulatedKernel]


@dataclass(frozen=True)
class StabilityCheck:
    rho: float
    stable: bool


def check_stability(kernel: Kernel, amplitude: float = 1.0) -> StabilityCheck:
    rho = amplitude * kernel.l1_norm()
    return StabilityCheck(rho=rho, stable=rho < 1.0)


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be a positive finite number, got {value}")


def fisher_info_star(kernel: Kernel, s_star: float) -> float:
    """``int h^2 + s_star * (int h)^2``."""
    _positive("s_star", s_star)
    return kernel.l2_norm_sq() + s_star * kernel.l1_norm() ** 2


def fisher_info_dep(kernel: Kernel, s_x: float, s_y: float) -> float:
    """Information of the dependence test, ``(s_x / s_y) * (int h^2 + s_x (int h)^2)``."""
    _positive("s_x", s_x)
    _positive("s_y", s_y)
    return (s_x / s_y) * (kernel.l2_norm_sq() + s_x * kernel.l1_norm() ** 2)


def stationary_rate(s_star: float, kernel: Kernel) -> float:
    _positive("s_star", s_star)
    check = check_stability(kernel)
    if not check.stable:
        raise UnstableKernelError(f"kernel mass rho={check.rho} >= 1: no stationary regime")
    return s_star / (1.0 - check.rho)


def _fourier_step(kernel, lam: float) -> complex:
    # composite Simpson of exp(i lam t) over every constant piece; lam * dx <= 0.02
    total = 0j
    for left, right, value, _ in kernel.segments():
        if value == 0.0:
            continue
        width = right - left
        n = max(64, 2 * math.ceil(25.0 * max(abs(lam), 1.0) * width))
        x = np.linspace(left, right, n + 1)
        y = np.exp(1j * lam * x)
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        total += value * (width / n / 3.0) * np.dot(w, y)
    return complex(total)


def fourier_transform(kernel: Kernel, lam: float) -> complex:
    """``G(lam) = int_0^inf exp(i lam t) h(t) dt``."""
    if isinstance(kernel, ExponentialKernel):
        return kernel.alpha / complex(kernel.gamma, -lam)
    return _fourier_step(kernel, lam)


def spectral_density(kernel: Kernel, s_star: float, lam: float) -> float:
    """Spectral density ``mu / (2 pi |1 - G(lam)|^2)`` of the stationary process."""
    mu = stationary_rate(s_star, kernel)
    if math.isinf(lam):
        return mu / (2.0 * math.pi)
    g = fourier_transform(kernel, lam)
    return mu / (2.0 * math.pi * abs(1.0 - g) ** 2)


def kernel_from_config(cfg: dict[str, Any]) -> Kernel:
    """Build a kernel from ``{"type": ..., <fields>}``."""
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ValueError(f"kernel config must be a mapping with a 'type' key, got {cfg!r}")
    kind = str(cfg["type"]).lower()
    try:
        if kind == "exponential":
            return ExponentialKernel(float(cfg["alpha"]), float(cfg["gamma"]))
        if kind == "boxcar":
            return BoxcarKernel(float(cfg["r"]), float(cfg["N"]))
        if kind == "tabulated":
            return TabulatedKernel(tuple(cfg["knots"]), tuple(cfg["values"]))
    except KeyError as exc:
        raise ValueError(f"{kind} kernel config is missing field {exc}") from None
    raise ValueError(f"unknown kernel type {cfg['type']!r} (expected exponential, boxcar or tabulated)")


def parse_kernel(text: str) -> Kernel:
    """Parse the compact command-line form.

    ``exponential:ALPHA,GAMMA``, ``boxcar:R,N`` or
    ``tabulated:K0,K1,...;V0,V1,...``.
    """
    kind, _, body = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "tabulated":
            knots, _, values = body.partition(";")
            return TabulatedKernel(
                tuple(float(v) for v in knots.split(",")),
                tuple(float(v) for v in values.split(",")),
            )
        nums = [float(v) for v in body.split(",")]
    except ValueError:
        raise ValueError(f"cannot parse kernel spec {text!r}") from None
    if kind in ("exponential", "boxcar"):
        if len(nums) != 2:
            raise ValueError(f"{kind} kernel takes two numbers, got {text!r}")
        return ExponentialKernel(*nums) if kind == "exponential" else BoxcarKernel(*nums)
    raise ValueError(f"unknown kernel type in {text!r}")


def kernel_eval(kernel: Kernel, t):
    """Module-level alias of ``kernel(t)``."""
    return kernel(t)
