import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coagfrag.coefficients import (
    CoagulationParams,
    DaughterSpec,
    _B_unchecked,
    FragmentationParams,
    Truncation,
    estimate_m_star,
    eval_a_trunc,
    eval_B,
    eval_K,
    eval_K_trunc,
    frak_b,
    frak_b_quadrature,
    frak_Bp,
    kernel_bound,
    m_star,
    predicted_tau,
)
from coagfrag.errors import DomainError

SPECS = [
    DaughterSpec.power_law(0.0),
    DaughterSpec.power_law(1.0),
    DaughterSpec.power_law(-0.5),
    DaughterSpec.power_law(2.5),
    DaughterSpec.parabolic(1.0),
    DaughterSpec.parabolic(0.5),
    DaughterSpec.parabolic(3.0),
]

sizes = st.floats(1e-8, 1e6)
exponent_pairs = st.tuples(st.floats(0, 0.49), st.floats(0, 1)).filter(
    lambda ab: ab[0] <= ab[1] and ab[0] + ab[1] < 1
)


def test_constant_kernel_equals_two():
    p = CoagulationParams(0.0, 0.0, 1.0)
    assert eval_K(p, 0.3, 17.0) == 2.0


def test_sum_kernel_value():
    assert eval_K(CoagulationParams(0.0, 1.0 - 1e-12), 2.0, 3.0) == pytest.approx(5.0)


def test_kernel_rejects_nonpositive_sizes():
    with pytest.raises(DomainError):
        eval_K(CoagulationParams(0.0, 0.5), 0.0, 1.0)


@pytest.mark.parametrize("alpha,beta", [(0.6, 0.6), (0.5, 0.2), (-0.1, 0.3), (0.0, 1.0)])
def test_coagulation_param_constraints(alpha, beta):
    with pytest.raises(DomainError):
        CoagulationParams(alpha, beta)


def test_truncated_kernel_examples():
    const = CoagulationParams(0.0, 0.0)
    assert eval_K_trunc(const, Truncation(2, 0.1), 5, 1) == pytest.approx(2.2)
    additive = CoagulationParams(0.0, 0.999999999)
    assert eval_K_trunc(additive, Truncation(2, 0.0), 5, 1) == pytest.approx(3.0, rel=1e-8)


def test_truncated_rate_examples():
    f = FragmentationParams(1.0, 1.0)
    assert eval_a_trunc(f, Truncation(2, 0.0), 5.0) == 2.0
    assert eval_a_trunc(f, Truncation(math.inf, 0.1), 5.0) == pytest.approx(5.01)
    assert eval_a_trunc(FragmentationParams(0.5, 2.0), Truncation(), 4.0) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        eval_a_trunc(f, Truncation(), -1.0)


def test_fragmentation_params_reject_zero_gamma():
    with pytest.raises(DomainError):
        FragmentationParams(0.0)
    with pytest.raises(DomainError):
        FragmentationParams(1.0, a0=0.0)


def test_daughter_values():
    assert eval_B(DaughterSpec.power_law(0.0), 0.37) == 2.0
    assert eval_B(DaughterSpec.power_law(1.0), 0.5) == pytest.approx(1.5)
    assert eval_B(DaughterSpec.parabolic(1.0), 0.5) == pytest.approx(3.0)
    with pytest.raises(DomainError):
        eval_B(DaughterSpec.power_law(0.0), 1.0)


def test_daughter_parameter_ranges():
    with pytest.raises(DomainError):
        DaughterSpec.power_law(-1.0)
    with pytest.raises(DomainError):
        DaughterSpec.parabolic(0.0)
    # B = (nu+2) z^nu with nu = -0.5 lies in L^p only for p < 2
    with pytest.raises(DomainError):
        DaughterSpec.power_law(-0.5, p0=2.5)


def test_frak_b_examples():
    d = DaughterSpec.power_law(0.0)
    assert frak_b(d, 0.0) == pytest.approx(2.0)
    for spec in SPECS:
        assert frak_b(spec, 1.0) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(DomainError):
        frak_b(d, -1.0)


@pytest.mark.parametrize("spec", SPECS, ids=lambda d: f"{d.kind}-{d.nu}")
def test_frak_b_closed_form_matches_quadrature(spec):
    ms = m_star(spec)
    for m in (ms + 0.1, 0.0, 0.5, 1.0, 2.0):
        if m <= ms:
            continue
        assert frak_b(spec, m) == pytest.approx(frak_b_quadrature(spec, m), rel=1e-10)


def test_frak_b_below_one_iff_m_above_one():
    d = DaughterSpec.power_law(0.0)
    for m in (0.5, 0.99, 1.01, 2.0, -0.5, 5.0):
        assert (frak_b(d, m) < 1) == (m > 1)


def test_frak_Bp_examples():
    assert frak_Bp(DaughterSpec.power_law(0.0), 2.0) == pytest.approx(2.0)
    assert frak_Bp(DaughterSpec.power_law(0.0), 1.0) == pytest.approx(2.0)
    assert frak_Bp(DaughterSpec.parabolic(1.0), 1.0) == pytest.approx(3.0)
    with pytest.raises(DomainError):
        frak_Bp(DaughterSpec.power_law(0.0), 3.0)


@pytest.mark.parametrize("spec", SPECS, ids=lambda d: f"{d.kind}-{d.nu}")
def test_frak_Bp_against_quadrature(spec):
    from scipy import integrate

    for p in (1.0, 0.5 * (1.0 + spec.p0), spec.p0):
        val, _ = integrate.quad(
            lambda u: 0.0 if u < -700 else math.exp(u) * _B_unchecked(spec, math.exp(u)) ** p,
            -np.inf, 0.0, epsrel=1e-12, limit=400,
        )
        assert frak_Bp(spec, p) == pytest.approx(val ** (1 / p), rel=1e-8)


def test_m_star_values():
    assert m_star(DaughterSpec.power_law(0.0)) == -1.0
    assert m_star(DaughterSpec.parabolic(1.0)) == -1.0
    d = DaughterSpec.power_law(0.0, p0=2.0)
    assert m_star(d) <= (1 - d.p0) / d.p0


@pytest.mark.parametrize("spec", SPECS, ids=lambda d: f"{d.kind}-{d.nu}")
def test_m_star_below_integrability_bound(spec):
    assert m_star(spec) <= (1 - spec.p0) / spec.p0


def test_tabulated_power_law():
    z = np.logspace(-6, 0, 200)
    nu = 0.5
    d = DaughterSpec.tabulated(z, (nu + 2) * z**nu, normalize=True)
    est = estimate_m_star(d)
    assert not est.exact
    assert est.value == pytest.approx(-(nu + 1), abs=1e-8)
    assert frak_b(d, 1.0) == pytest.approx(1.0, rel=1e-10)
    assert frak_b(d, 0.0) == pytest.approx(frak_b_quadrature(d, 0.0), rel=1e-8)
    # interpolation error of the table stays small
    assert frak_b(d, 0.0) == pytest.approx((nu + 2) / (nu + 1), rel=1e-3)


def test_tabulated_rejects_unnormalised():
    z = np.linspace(0.01, 1, 50)
    with pytest.raises(DomainError):
        DaughterSpec.tabulated(z, np.ones_like(z))


def test_predicted_tau_branches():
    B0 = DaughterSpec.power_law(0.0)
    f = lambda g, d=B0: FragmentationParams(g, 1.0, d)  # noqa: E731
    assert predicted_tau(CoagulationParams(0.25, 0.25), f(0.25)) == pytest.approx(0.25 + 2 / 3)
    assert predicted_tau(CoagulationParams(0.0, 0.5), f(1.0)) == pytest.approx(0.0)
    assert predicted_tau(CoagulationParams(0.4, 0.5), f(0.2)) == pytest.approx(1.7)
    assert predicted_tau(CoagulationParams(0.2, 0.5), f(0.2)) == pytest.approx(1.2)
    assert predicted_tau(CoagulationParams(0.3, 0.3), f(0.3, DaughterSpec.parabolic(1.0))) is None


@settings(max_examples=200, deadline=None)
@given(ab=exponent_pairs, x=sizes, y=sizes, K0=st.floats(0.1, 10))
def test_kernel_symmetry_and_bound(ab, x, y, K0):
    p = CoagulationParams(ab[0], ab[1], K0)
    k = eval_K(p, x, y)
    assert k == pytest.approx(eval_K(p, y, x), rel=1e-14)
    assert k <= kernel_bound(p, x, y) * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(
    ab=exponent_pairs, x=sizes, y=sizes,
    e1=st.floats(0, 0.99), e2=st.floats(0, 0.99),
    j1=st.floats(2, 1e4), j2=st.floats(2, 1e4),
)
def test_truncated_kernel_monotone(ab, x, y, e1, e2, j1, j2):
    p = CoagulationParams(*ab)
    e_lo, e_hi = sorted((e1, e2))
    j_lo, j_hi = sorted((j1, j2))
    assert eval_K_trunc(p, Truncation(j_lo, e_lo), x, y) <= eval_K_trunc(
        p, Truncation(j_lo, e_hi), x, y) * (1 + 1e-14)
    assert eval_K_trunc(p, Truncation(j_lo, e_lo), x, y) <= eval_K_trunc(
        p, Truncation(j_hi, e_lo), x, y) * (1 + 1e-14)


@settings(max_examples=100, deadline=None)
@given(ab=exponent_pairs, x=sizes, y=sizes)
def test_untruncated_reduction(ab, x, y):
    p = CoagulationParams(*ab)
    assert eval_K_trunc(p, Truncation(), x, y) == eval_K(p, x, y)
