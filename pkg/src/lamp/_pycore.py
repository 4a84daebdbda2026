"""Pure-Python implementation of the hot kernels.

Mirrors ``_core.pyx`` operation for operation: same uniform draws in the same
order, same floating-point expressions, libm ``log1p``/``exp`` through
``math``.  Given the same bit generator both backends return identical event
times.

Simulators take a numpy ``BitGenerator`` and consume ``next_double`` draws.
Step kernels are passed as ``(knots, values)`` with ``len(knots) ==
len(values) + 1``, already multiplied by the amplitude.
"""

from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

BACKEND = "python"

_INF = math.inf


class _Uniforms:
    """Sequential ``next_double`` draws, fetched from numpy in blocks."""

    __slots__ = ("_gen", "_buf", "_pos")

    def __init__(self, bitgen):
        self._gen = np.random.Generator(bitgen)
        self._buf = []
        self._pos = 0

    def __call__(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._gen.random(256).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def _push(out, t):
    # keep the sequence strictly increasing under floating-point collisions
    if out and t <= out[-1]:
        t = math.nextafter(out[-1], _INF)
    elif not out and t <= 0.0:
        t = math.nextafter(0.0, _INF)
    out.append(t)
    return t


def _step_tables(knots, values):
    knots = [float(k) for k in knots]
    values = [float(v) for v in values]
    hmax = values[:]
    for k in range(len(hmax) - 2, -1, -1):
        hmax[k] = max(hmax[k], hmax[k + 1])
    return knots, values, hmax


def _step_h(knots, values, tau):
    k = bisect_right(knots, tau) - 1
    if k < 0 or k >= len(values):
        return 0.0
    return values[k]


def _step_hmax(knots, hmax, tau):
    # max of h over [tau, inf): nonincreasing in tau
    k = bisect_right(knots, tau) - 1
    if k >= len(hmax):
        return 0.0
    if k < 0:
        return hmax[0]
    return hmax[k]


def simulate_poisson(bitgen, rate, horizon):
    draw = _Uniforms(bitgen)
    out = []
    t = 0.0
    while True:
        t += -math.log1p(-draw()) / rate
        if t > horizon:
            break
        t = _push(out, t)
    return np.array(out, dtype=float)


def simulate_exp(bitgen, s, alpha, gamma, horizon):
    """Ogata thinning with the O(1) recursive update of the excitation."""
    draw = _Uniforms(bitgen)
    out = []
    t = 0.0
    excess = 0.0
    while True:
        bound = s + excess
        w = -math.log1p(-draw()) / bound
        t += w
        if t > horizon:
            break
        excess *= math.exp(-gamma * w)
        if draw() * bound <= s + excess:
            t = _push(out, t)
            excess += alpha
    return np.array(out, dtype=float)


def simulate_exp_exact(bitgen, s, alpha, gamma, horizon):
    """Exact inter-arrival sampling (baseline and decaying excitation race)."""
    draw = _Uniforms(bitgen)
    out = []
    t = 0.0
    excess = 0.0
    while True:
        w = -math.log1p(-draw()) / s
        u = draw()
        if excess > 0.0:
            d = 1.0 + gamma * math.log1p(-u) / excess
            if d > 0.0:
                w = min(w, -math.log(d) / gamma)
        t += w
        if t > horizon:
            break
        t = _push(out, t)
        excess = excess * math.exp(-gamma * w) + alpha
    return np.array(out, dtype=float)


def simulate_step(bitgen, s, knots, values, horizon):
    """Thinning for step kernels; the bound uses the suffix maximum of h."""
    knots, values, hmax = _step_tables(knots, values)
    reach = knots[-1]
    draw = _Uniforms(bitgen)
    out = []
    lo = 0
    t = 0.0
    while True:
        while lo < len(out) and t - out[lo] >= reach:
            lo += 1
        bound = s
        for i in range(lo, len(out)):
            bound += _step_hmax(knots, hmax, t - out[i])
        t += -math.log1p(-draw()) / bound
        if t > horizon:
            break
        while lo < len(out) and t - out[lo] >= reach:
            lo += 1
        lam = s
        for i in range(lo, len(out)):
            lam += _step_h(knots, values, t - out[i])
        if draw() * bound <= lam:
            t = _push(out, t)
    return np.array(out, dtype=float)


def simulate_driven_exp(bitgen, s, alpha, gamma, source, horizon):
    """Events with intensity ``s + sum_{x_k < t} alpha exp(-gamma (t - x_k))``."""
    draw = _Uniforms(bitgen)
    src = [float(x) for x in source]
    out = []
    j = 0
    t = 0.0
    excess = 0.0
    while True:
        nxt = src[j] if j < len(src) else _INF
        bound = s + excess
        cand = t + -math.log1p(-draw()) / bound
        if cand >= nxt:
            excess = excess * math.exp(-gamma * (nxt - t)) + alpha
            t = nxt
            j += 1
            continue
        if cand > horizon:
            break
        excess *= math.exp(-gamma * (cand - t))
        t = cand
        if draw() * bound <= s + excess:
            t = _push(out, t)
    return np.array(out, dtype=float)


def simulate_driven_step(bitgen, s, knots, values, source, horizon):
    knots, values, hmax = _step_tables(knots, values)
    reach = knots[-1]
    draw = _Uniforms(bitgen)
    src = [float(x) for x in source]
    out = []
    lo = 0
    j = 0
    t = 0.0
    while True:
        nxt = src[j] if j < len(src) else _INF
        while lo < j and t - src[lo] >= reach:
            lo += 1
        bound = s
        for i in range(lo, j):
            bound += _step_hmax(knots, hmax, t - src[i])
        cand = t + -math.log1p(-draw()) / bound
        if cand >= nxt:
            t = nxt
            j += 1
            continue
        if cand > horizon:
            break
        t = cand
        while lo < j and t - src[lo] >= reach:
            lo += 1
        lam = s
        for i in range(lo, j):
            lam += _step_h(knots, values, t - src[i])
        if draw() * bound <= lam:
            t = _push(out, t)
    return np.array(out, dtype=float)


def excite_exp(source, query, alpha, gamma):
    """``sum_{x_i < q} alpha exp(-gamma (q - x_i))`` for every sorted ``q``.

    Recursive accumulator, O(len(source) + len(query)).
    """
    src = [float(x) for x in source]
    out = np.empty(len(query))
    acc = 0.0
    t_acc = 0.0
    i = 0
    for k, q in enumerate(query.tolist()):
        while i < len(src) and src[i] < q:
            acc = acc * math.exp(-gamma * (src[i] - t_acc)) + alpha
            t_acc = src[i]
            i += 1
        out[k] = acc * math.exp(-gamma * (q - t_acc))
    return out


def excite_step(source, query, knots, values):
    """``sum_{x_i < q} h(q - x_i)`` for a step kernel, sorted ``q``."""
    knots, values, _ = _step_tables(knots, values)
    reach = knots[-1]
    src = [float(x) for x in source]
    out = np.empty(len(query))
    lo = 0
    hi = 0
    for k, q in enumerate(query.tolist()):
        while hi < len(src) and src[hi] < q:
            hi += 1
        while lo < hi and q - src[lo] >= reach:
            lo += 1
        acc = 0.0
        for i in range(lo, hi):
            acc += _step_h(knots, values, q - src[i])
        out[k] = acc
    return out
