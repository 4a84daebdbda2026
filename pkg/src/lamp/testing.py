"""Decision rules, Gaussian quantiles, limiting power functions and exact Poisson thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import pdtrc

from .statistics import StatisticValue

__all__ = [
    "TestOutcome",
    "normal_cdf",
    "normal_sf",
    "gaussian_quantile",
    "decide",
    "limiting_power_param",
    "limiting_power_nonparam",
    "limiting_power_dep",
    "least_favorable_power_bound",
    "exact_nonparam_threshold",
    "poisson_upper_tail",
]

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False  # not a pytest class

    statistic: StatisticValue | float
    threshold: float
    reject: bool
    nominal_size: float | None = None


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_sf(x: float) -> float:
    """``1 - Phi(x)`` without cancellation in the upper tail."""
    return 0.5 * math.erfc(x / _SQRT2)


# Acklam's rational approximation of the lower-tail quantile (rel. error 1.15e-9)
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    )


def gaussian_quantile(eps: float) -> float:
    """``z`` with ``P(N(0,1) > z) = eps``.

    Acklam's approximation on the lower tail followed by one Halley step
    against the erfc-based survival function.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if eps == 0.5:
        return 0.0
    z = -_acklam(eps)
    err = normal_sf(z) - eps
    pdf = math.exp(-0.5 * z * z) / _SQRT2PI
    step = err / pdf
    # Halley step for sf(z) - eps, using sf' = -pdf and sf'' = z * pdf
    return z + step / (1.0 - 0.5 * z * step)


def decide(stat: StatisticValue | float, threshold: float, nominal_size: float | None = None) -> TestOutcome:
    """Reject when the statistic is strictly above the threshold."""
    value = float(stat)
    return TestOutcome(statistic=stat, threshold=threshold, reject=value > threshold, nominal_size=nominal_size)


def limiting_power_param(u: float, info: float, eps: float) -> float:
    """``P(zeta > z_eps - u sqrt(I))`` for ``zeta ~ N(0, 1)``."""
    if u < 0 or info < 0:
        raise ValueError("u and info must be >= 0")
    return normal_sf(gaussian_quantile(eps) - u * math.sqrt(info))


def limiting_power_dep(u: float, info_dep: float, eps: float) -> float:
    return limiting_power_param(u, info_dep, eps)


def limiting_power_nonparam(r: float, s_star: float, eps: float) -> float:
    """``P(zeta > z_eps - r sqrt(S_*))``."""
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    if not s_star > 0:
        raise ValueError(f"s_star must be positive, got {s_star}")
    return normal_sf(gaussian_quantile(eps) - r * math.sqrt(s_star))


def least_favorable_power_bound(r: float, N: float, s_star: float, eps: float) -> float:
    """Neyman-Pearson power at the boxcar alternative, ``P(zeta > z_eps - r sqrt(S_* + 1/N))``."""
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    if not N > 0:
        raise ValueError(f"N must be positive, got {N}")
    if not s_star > 0:
        raise ValueError(f"s_star must be positive, got {s_star}")
    return normal_sf(gaussian_quantile(eps) - r * math.sqrt(s_star + 1.0 / N))


def poisson_upper_tail(k: int, mean: float) -> float:
    """``P(Poisson(mean) > k)``."""
    if k < 0:
        return 1.0
    return float(pdtrc(k, mean))


def exact_nonparam_threshold(s_star: float, horizon: float, eps: float) -> int:
    """Smallest ``k >= 0`` with ``P(Poisson(s_star * horizon) > k) <= eps``.

    Rejecting when ``X_T > k`` gives exact size at most ``eps``.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    mean = s_star * horizon
    if not (mean > 0 and math.isfinite(mean)):
        raise ValueError(f"s_star * horizon must be positive and finite, got {mean}")
    if mean > 1e7:
        raise ValueError(f"mean {mean:g} exceeds the supported range (1e7)")
    # bracket: tail(lo) > eps >= tail(hi)
    hi = int(mean + 10.0 * math.sqrt(mean) * (1.0 + math.sqrt(-math.log(eps))) + 20)
    while poisson_upper_tail(hi, mean) > eps:
        hi *= 2
    if poisson_upper_tail(0, mean) <= eps:
        return 0
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if poisson_upper_tail(mid, mean) > eps:
            lo = mid
        else:
            hi = mid
    return hi
