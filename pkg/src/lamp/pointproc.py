"""Sample paths of Poisson, self-exciting and driven point processes.

All simulators start from an empty history at ``t = 0`` and are pure
functions of their arguments: the same seed gives the same event times,
whichever backend or thread runs them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from ._backend import core
from .kernels import ExponentialKernel, Kernel, UnstableKernelError, check_stability

__all__ = [
    "EventSequence",
    "SimSpec",
    "simulate_poisson",
    "simulate_hawkes",
    "simulate_pair",
    "intensity_at",
    "excitation",
    "write_events",
    "read_events",
]


class EventSequence:
    """Strictly increasing event times in ``(0, horizon]``."""

    __slots__ = ("times", "horizon")

    def __init__(self, times, horizon: float):
        horizon = float(horizon)
        if not (horizon > 0 and math.isfinite(horizon)):
            raise ValueError(f"horizon must be positive and finite, got {horizon}")
        arr = np.array(times, dtype=float).reshape(-1)
        if arr.size:
            if not np.all(np.isfinite(arr)):
                raise ValueError("event times must be finite")
            if arr[0] <= 0 or arr[-1] > horizon:
                raise ValueError(f"event times must lie in (0, {horizon}]")
            if np.any(np.diff(arr) <= 0):
                raise ValueError("event times must be strictly increasing")
        arr.setflags(write=False)
        self.times = arr
        self.horizon = horizon

    def __len__(self):
        return self.times.size

    def __repr__(self):
        return f"EventSequence(n={len(self)}, horizon={self.horizon})"

    def __eq__(self, other):
        if not isinstance(other, EventSequence):
            return NotImplemented
        return self.horizon == other.horizon and np.array_equal(self.times, other.times)

    def count(self, t: float) -> int:
        """Counting process ``X_t = #{i : t_i < t}``."""
        return int(np.searchsorted(self.times, t, side="left"))


@dataclass(frozen=True)
class SimSpec:
    """Intensity ``s_star + amplitude * sum_{t_i < t} h(t - t_i)`` on ``[0, horizon]``."""

    s_star: float
    horizon: float
    kernel: Kernel | None = None
    amplitude: float = 1.0
    seed: int = 0
    method: str = "thinning"

    def __post_init__(self):
        if not (self.s_star > 0 and math.isfinite(self.s_star)):
            raise ValueError(f"s_star must be positive, got {self.s_star}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not (self.amplitude >= 0 and math.isfinite(self.amplitude)):
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.method not in ("thinning", "exact"):
            raise ValueError(f"method must be 'thinning' or 'exact', got {self.method!r}")


def _check_rate_horizon(rate, horizon):
    if not (rate > 0 and math.isfinite(rate)):
        raise ValueError(f"intensity must be positive and finite, got {rate}")
    if not (horizon > 0 and math.isfinite(horizon)):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")


def _is_null(kernel, amplitude):
    return kernel is None or amplitude == 0 or kernel.l1_norm() == 0


def _poisson_times(bitgen, rate, horizon):
    return core.simulate_poisson(bitgen, rate, horizon)


def _hawkes_times(bitgen, s_star, kernel, amplitude, horizon, method="thinning"):
    """Event times of the self-exciting process (no validation)."""
    if _is_null(kernel, amplitude):
        return core.simulate_poisson(bitgen, s_star, horizon)
    if isinstance(kernel, ExponentialKernel):
        sim = core.simulate_exp_exact if method == "exact" else core.simulate_exp
        return sim(bitgen, s_star, amplitude * kernel.alpha, kernel.gamma, horizon)
    if method == "exact":
        raise ValueError("exact simulation is only available for exponential kernels")
    knots, values = kernel.steps()
    return core.simulate_step(bitgen, s_star, knots, amplitude * values, horizon)


def _pair_times(bitgen, s_x, s_y, kernel, amplitude, horizon):
    x = core.simulate_poisson(bitgen, s_x, horizon)
    if _is_null(kernel, amplitude):
        return x, core.simulate_poisson(bitgen, s_y, horizon)
    if isinstance(kernel, ExponentialKernel):
        y = core.simulate_driven_exp(bitgen, s_y, amplitude * kernel.alpha, kernel.gamma, x, horizon)
    else:
        knots, values = kernel.steps()
        y = core.simulate_driven_step(bitgen, s_y, knots, amplitude * values, x, horizon)
    return x, y


def simulate_poisson(rate: float, horizon: float, seed: int = 0) -> EventSequence:
    """Homogeneous Poisson process of intensity ``rate`` on ``[0, horizon]``."""
    _check_rate_horizon(rate, horizon)
    return EventSequence(_poisson_times(rng.split(seed, 0), rate, horizon), horizon)


def simulate_hawkes(spec: SimSpec) -> EventSequence:
    """Self-exciting process by Ogata thinning (or exact sampling for exponential kernels).

    With ``amplitude == 0`` (or no kernel) this is the Poisson simulator and
    consumes the random stream identically.
    """
    if spec.kernel is not None and spec.amplitude > 0:
        stab = check_stability(spec.kernel, spec.amplitude)
        if not stab.stable:
            raise UnstableKernelError(
                f"effective kernel mass {stab.rho:.6g} >= 1; the process is explosive"
            )
    times = _hawkes_times(
        rng.split(spec.seed, 0), spec.s_star, spec.kernel, spec.amplitude, spec.horizon, spec.method
    )
    return EventSequence(times, spec.horizon)


def simulate_pair(
    s_x: float, s_y: float, kernel: Kernel | None, amplitude: float, horizon: float, seed: int = 0
) -> tuple[EventSequence, EventSequence]:
    """Poisson ``X`` and a process ``Y`` excited by the events of ``X``.

    ``Y`` has intensity ``s_y + amplitude * sum_{t_i < t} h(t - t_i)`` over
    the events ``t_i`` of ``X``; ``Y`` does not excite itself.
    """
    _check_rate_horizon(s_x, horizon)
    _check_rate_horizon(s_y, horizon)
    if not (amplitude >= 0 and math.isfinite(amplitude)):
        raise ValueError(f"amplitude must be >= 0, got {amplitude}")
    x, y = _pair_times(rng.split(seed, 0), s_x, s_y, kernel, amplitude, horizon)
    return EventSequence(x, horizon), EventSequence(y, horizon)


def excitation(kernel: Kernel, source, query) -> np.ndarray:
    """``sum_{s_i < q} h(q - s_i)`` for every ``q`` in sorted ``query``."""
    source = np.asarray(source, dtype=float)
    query = np.asarray(query, dtype=float)
    if query.size > 1 and np.any(np.diff(query) < 0):
        raise ValueError("query times must be sorted")
    if isinstance(kernel, ExponentialKernel):
        return core.excite_exp(source, query, kernel.alpha, kernel.gamma)
    knots, values = kernel.steps()
    return core.excite_step(source, query, knots, values)


def intensity_at(seq: EventSequence, s_star: float, kernel: Kernel, amplitude: float, t: float) -> float:
    """Left-continuous intensity: events at exactly ``t`` are excluded."""
    if not 0 <= t <= seq.horizon:
        raise ValueError(f"t={t} outside [0, {seq.horizon}]")
    if _is_null(kernel, amplitude):
        return float(s_star)
    return float(s_star + amplitude * excitation(kernel, seq.times, [t])[0])


def write_events(seq: EventSequence, path) -> None:
    """CSV with a ``# horizon=<T>`` line, a ``t`` header and one time per row.

    Times are written with ``repr`` so reading them back is bit-exact.
    """
    lines = [f"# horizon={seq.horizon!r}", "t"]
    lines.extend(repr(float(t)) for t in seq.times)
    Path(path).write_text("\n".join(lines) + "\n")


def read_events(path) -> EventSequence:
    horizon = None
    times = []
    header_seen = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "horizon":
                    horizon = float(value)
                continue
            if not header_seen:
                if line != "t":
                    raise ValueError(f"{path}:{lineno}: expected header 't', got {line!r}")
                header_seen = True
                continue
            try:
                times.append(float(line))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from None
    if horizon is None:
        raise ValueError(f"{path}: missing '# horizon=<T>' metadata line")
    return EventSequence(times, horizon)
