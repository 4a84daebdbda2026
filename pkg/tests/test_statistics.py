import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import poisson

from lamp.kernels import BoxcarKernel, ExponentialKernel, TabulatedKernel, fisher_info_star
from lamp.pointproc import EventSequence, simulate_poisson
from lamp.statistics import (
    Family,
    delta_dep,
    delta_nonparam,
    delta_param,
    excitation_energy,
    lan_decompose,
    lemma1_covariance,
    lemma1_monte_carlo,
    log_likelihood_ratio,
)

H = ExponentialKernel(0.5, 0.5)
E1, EH = math.exp(-1.0), math.exp(-0.5)


def test_delta_param_hand_value():
    seq = EventSequence([1.0, 2.0], 3.0)
    expected = (EH - 2 * (2 - E1 - EH)) / math.sqrt(15)
    got = delta_param(seq, H, 1.0)
    assert got.value == pytest.approx(expected, rel=1e-13)
    assert got.value == pytest.approx(-0.3730, abs=1e-4)
    assert got.family is Family.PARAM
    assert float(got) == got.value


def test_delta_param_structural_cases():
    assert delta_param(EventSequence([], 10.0), H, 1.0).value == 0.0
    k = BoxcarKernel(1.0, 5.0)
    info = fisher_info_star(k, 2.0)
    one = delta_param(EventSequence([7.0], 10.0), k, 2.0).value
    assert one == pytest.approx(-(3.0 / 5.0) / math.sqrt(10.0 * info), rel=1e-14)
    with pytest.raises(ValueError):
        delta_param(EventSequence([1.0], 2.0), BoxcarKernel(0.0, 1.0), 1.0)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32), s=st.floats(0.2, 3.0), alpha=st.floats(0.05, 2.0), gamma=st.floats(0.05, 3.0),
)
def test_recursive_and_pair_scan_agree(seed, s, alpha, gamma):
    seq = simulate_poisson(s, 60.0, seed=seed)
    k = ExponentialKernel(alpha, gamma)
    a = delta_param(seq, k, s, method="recursive").value
    b = delta_param(seq, k, s, method="pairscan").value
    assert a == pytest.approx(b, rel=1e-10, abs=1e-13)


def test_recursive_and_pair_scan_agree_step_kernels():
    seq = simulate_poisson(1.5, 80.0, seed=3)
    for k in (BoxcarKernel(0.8, 3.0), TabulatedKernel((0.0, 0.4, 2.0, 5.0), (1.0, 0.2, 0.05))):
        a = delta_param(seq, k, 1.5).value
        b = delta_param(seq, k, 1.5, method="pairscan").value
        assert a == pytest.approx(b, rel=1e-10)
    with pytest.raises(ValueError):
        delta_param(seq, H, 1.0, method="fft")


def test_delta_dep_hand_value():
    x, y = EventSequence([1.0], 3.0), EventSequence([2.0], 3.0)
    expected = (0.5 * EH - (1 - E1)) / math.sqrt(3.75)
    got = delta_dep(x, y, H, s_y=1.0, s_x=1.0).value
    assert got == pytest.approx(expected, rel=1e-13)
    assert got == pytest.approx(-0.1698, abs=1e-4)


def test_delta_dep_structural_cases():
    x = EventSequence([1.0, 4.0], 6.0)
    empty = EventSequence([], 6.0)
    info = 1.25
    tails = (1 - math.exp(-2.5)) + (1 - math.exp(-1.0))
    assert delta_dep(x, empty, H, 1.0, 1.0).value == pytest.approx(-tails / math.sqrt(6 * info), rel=1e-14)
    assert delta_dep(empty, x, H, 1.0, 1.0).value == 0.0
    with pytest.raises(ValueError):
        delta_dep(x, EventSequence([], 7.0), H, 1.0, 1.0)


def test_delta_dep_matches_direct_sum():
    x = simulate_poisson(1.0, 50.0, seed=1)
    y = simulate_poisson(2.0, 50.0, seed=2)
    k = BoxcarKernel(1.0, 4.0)
    s_x, s_y = 1.0, 2.0
    info = (s_x / s_y) * (k.l2_norm_sq() + s_x * k.l1_norm() ** 2)
    cross = sum(k(tj - ti) for tj in y.times for ti in x.times if ti < tj)
    tails = sum(min(50.0 - ti, 4.0) / 4.0 for ti in x.times)
    expected = cross / (s_y * math.sqrt(50 * info)) - tails / math.sqrt(50 * info)
    assert delta_dep(x, y, k, s_y, s_x).value == pytest.approx(expected, rel=1e-10)


def test_delta_nonparam_examples():
    def seq(n):
        return EventSequence(np.linspace(0.5, 99.5, n) if n else [], 100.0)

    assert delta_nonparam(seq(100), 1.0).value == 0.0
    assert delta_nonparam(seq(120), 1.0).value == pytest.approx(2.0, abs=1e-14)
    assert delta_nonparam(seq(90), 1.0).value == pytest.approx(-1.0, abs=1e-14)
    # depends on the count only
    other = EventSequence(np.linspace(10, 20, 120), 100.0)
    assert delta_nonparam(other, 1.0).value == delta_nonparam(seq(120), 1.0).value


def _breakpoints(times, horizon, kernel):
    """Event times and, for step kernels, every jump of the excitation."""
    jumps = kernel.steps()[0] if kernel.is_step else []
    return sorted({0.0, horizon, *times, *(t + k for t in times for k in jumps if t + k < horizon)})


def _llr_by_quadrature(times, horizon, s_star, kernel, amp):
    def intensity(t):
        return s_star + amp * sum(kernel(t - ti) for ti in times if ti < t)

    pts = _breakpoints(times, horizon, kernel)
    comp = sum(integrate.quad(lambda t: intensity(t) - s_star, a, b, epsabs=1e-14)[0] for a, b in zip(pts, pts[1:]))
    return sum(math.log(intensity(t) / s_star) for t in times) - comp


def test_log_likelihood_ratio_hand_value():
    seq = EventSequence([1.0, 2.0], 3.0)
    expected = math.log(1 + 0.5 * EH) - ((1 - E1) + (1 - EH))
    got = log_likelihood_ratio(seq, 1.0, H, 1.0)
    assert got == pytest.approx(expected, rel=1e-13)
    assert got == pytest.approx(-0.7608, abs=1e-4)
    assert got == pytest.approx(_llr_by_quadrature([1.0, 2.0], 3.0, 1.0, H, 1.0), abs=1e-10)


def test_log_likelihood_ratio_quadrature_oracle_step_kernel():
    seq = simulate_poisson(1.0, 30.0, seed=9)
    k = TabulatedKernel((0.0, 1.0, 2.5), (0.6, 0.2))
    got = log_likelihood_ratio(seq, 1.0, k, 0.7)
    assert got == pytest.approx(_llr_by_quadrature(list(seq.times), 30.0, 1.0, k, 0.7), abs=1e-9)


def test_log_likelihood_ratio_trivial_cases():
    seq = simulate_poisson(1.0, 20.0, seed=4)
    assert log_likelihood_ratio(seq, 1.0, H, 0.0) == 0.0
    assert log_likelihood_ratio(EventSequence([], 5.0), 1.0, H, 0.8) == 0.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), u=st.floats(0.0, 5.0), horizon=st.floats(5.0, 300.0))
def test_lan_identity(seed, u, horizon):
    seq = simulate_poisson(1.0, horizon, seed=seed)
    d = lan_decompose(seq, u, H, 1.0)
    resid = d.log_lr - u * math.sqrt(d.info) * d.delta + 0.5 * u * u * d.info - d.remainder
    assert abs(resid) <= 1e-12 * (1 + abs(d.log_lr) + abs(d.delta))


def test_lan_at_zero():
    d = lan_decompose(simulate_poisson(1.0, 100.0, seed=1), 0.0, H, 1.0)
    assert d.log_lr == 0.0 and d.remainder == 0.0 and math.isfinite(d.delta)
    assert d.info == 1.25


def _energy_by_quadrature(seq, kernel, s_star):
    def h2(t):
        return sum(kernel(t - ti) for ti in seq.times if ti < t) ** 2

    edges = _breakpoints(list(seq.times), seq.horizon, kernel)
    total = sum(integrate.quad(h2, a, b, epsabs=1e-13, limit=200)[0] for a, b in zip(edges, edges[1:]))
    return total / (s_star * seq.horizon)


@pytest.mark.parametrize("kernel", [H, BoxcarKernel(1.0, 2.0), TabulatedKernel((0.0, 0.5, 3.0), (0.9, 0.1))], ids=repr)
def test_excitation_energy_matches_quadrature(kernel):
    seq = simulate_poisson(1.0, 25.0, seed=17)
    assert excitation_energy(seq, kernel, 1.0) == pytest.approx(_energy_by_quadrature(seq, kernel, 1.0), rel=1e-9)


def test_excitation_energy_tends_to_information():
    vals = [excitation_energy(simulate_poisson(1.0, 2000.0, seed=s), H, 1.0) for s in range(100)]
    assert np.mean(vals) == pytest.approx(1.25, abs=0.03)


def _poisson_var_of_square(mean):
    d = poisson(mean)
    return d.moment(4) - d.moment(2) ** 2


def test_lemma1_anchors():
    one = BoxcarKernel(1.0, 1.0)
    assert _poisson_var_of_square(1.0) == pytest.approx(11.0, rel=1e-12)
    assert _poisson_var_of_square(2.0) == pytest.approx(58.0, rel=1e-12)
    assert lemma1_covariance(one, one, 1.0, (0.0, 1.0)) == pytest.approx(11.0, rel=1e-14)
    assert lemma1_covariance(one, one, 2.0, (0.0, 1.0)) == pytest.approx(58.0, rel=1e-14)
    assert lemma1_covariance(H, BoxcarKernel(0.0, 3.0), 1.3, (0.0, 2.0)) == 0.0


@pytest.mark.parametrize("a,b,s,length", [(2.0, 0.5, 1.5, 0.7), (1.0, 3.0, 0.4, 2.5)])
def test_lemma1_constant_functions(a, b, s, length):
    # constants c on a window: Cov((aX)^2, (bX)^2) = a^2 b^2 Var(X^2) with X ~ Poisson(s |A|)
    f = BoxcarKernel(a * 10.0, 10.0)
    g = BoxcarKernel(b * 10.0, 10.0)
    expected = a * a * b * b * _poisson_var_of_square(s * length)
    assert lemma1_covariance(f, g, s, (1.0, 1.0 + length)) == pytest.approx(expected, rel=1e-12)


def test_lemma1_symmetric():
    f = ExponentialKernel(1.3, 0.7)
    g = TabulatedKernel((0.0, 0.3, 1.1, 2.0), (0.5, 2.0, 1.0))
    assert lemma1_covariance(f, g, 1.7, (0.2, 1.9)) == pytest.approx(lemma1_covariance(g, f, 1.7, (0.2, 1.9)), rel=1e-13)


@pytest.mark.parametrize(
    "f,g,s,window",
    [
        (ExponentialKernel(1.0, 0.8), BoxcarKernel(1.0, 1.5), 1.2, (0.0, 2.0)),
        (TabulatedKernel((0.0, 0.5, 1.0, 2.0), (1.0, 0.2, 0.7)), ExponentialKernel(0.5, 2.0), 2.5, (0.3, 1.8)),
        (ExponentialKernel(2.0, 1.0), ExponentialKernel(0.3, 0.1), 0.7, (0.5, 3.0)),
    ],
)
def test_lemma1_monte_carlo(f, g, s, window):
    exact = lemma1_covariance(f, g, s, window)
    est, se = lemma1_monte_carlo(f, g, s, window, 200_000, seed=5)
    assert abs(est - exact) <= 4 * se


def test_lemma1_validation():
    with pytest.raises(ValueError):
        lemma1_covariance(H, H, 1.0, (1.0, 1.0))
    with pytest.raises(ValueError):
        lemma1_covariance(H, H, 0.0, (0.0, 1.0))
    with pytest.raises(ValueError):
        lemma1_covariance(H, H, 1.0, (0.0, math.inf))


def test_digest_is_stable():
    seq = simulate_poisson(1.0, 50.0, seed=3)
    a, b = delta_param(seq, H, 1.0), delta_param(seq, H, 1.0)
    assert a.inputs_digest == b.inputs_digest
    assert a.inputs_digest != delta_param(seq, H, 2.0).inputs_digest


def _abs_remainders(horizon, m, seed=2007):
    from lamp.montecarlo import replicate_values
    from lamp.pointproc import _poisson_times
    from lamp.statistics import _lan

    def one(bg):
        return abs(_lan(_poisson_times(bg, 1.0, horizon), horizon, 1.0, H, 1.0, 1.25).remainder)

    return replicate_values(one, m, seed)


@pytest.mark.xfail(
    strict=True,
    reason="mean |r_T| at T=1000 is about 0.05 itself (cubic log1p term u^3/(3 sqrt(T)) mean H^3 "
    "plus the fluctuation of the quadratic term); the seeded estimate is 0.0506",
)
def test_lan_remainder_mean_small_at_t1000():
    assert _abs_remainders(1000.0, 1000).mean() < 0.05


def test_lan_remainder_shrinks_like_inverse_sqrt_t():
    small, large = np.median(_abs_remainders(100.0, 1000)), np.median(_abs_remainders(1000.0, 1000))
    assert large < small
    assert 2.0 < small / large < 5.0
