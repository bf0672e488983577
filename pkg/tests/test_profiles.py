import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
import mpmath
from scipy import integrate, special

from pflab.errors import ContractViolation, DomainViolation
from pflab.profiles import (Profile, bessel, bessel_j, bessel_j_integral, dominance_ratio,
                            eval_dphi, eval_phi, eval_Phi, gaussian_even, indicator_smoothed,
                            profile_from_dict, reflection_coefficient, reflection_derivative,
                            sech, shifted_sech, spectral_constants, symbol_s)


def test_eval_phi_examples():
    assert eval_phi(sech(0.1, 3), 0.0) == pytest.approx(0.1, abs=1e-16)
    assert eval_phi(gaussian_even(0.5), 0.0) == 0.5
    assert eval_phi(sech(0.1, 3), 10.0) <= math.exp(-20)


def test_validation():
    with pytest.raises(ContractViolation):
        Profile("sech", 0.1, 2.0)          # needs a > 2
    with pytest.raises(ContractViolation):
        gaussian_even(1.0)                 # needs sup|phi| < 1
    with pytest.raises(ContractViolation):
        bessel(1.0)                        # needs alpha > 1
    with pytest.raises(ContractViolation):
        Profile("cosine", 0.1, 3.0)
    with pytest.raises(ContractViolation):
        eval_Phi(gaussian_even(0.5), 0.0)


def test_profile_from_dict_roundtrip():
    p = shifted_sech(0.03, 3.0, 0.5)
    assert profile_from_dict(p.as_dict()) == p
    assert profile_from_dict({"kind": "bessel", "alpha": "2.5"}).alpha == 2.5


def test_Phi_examples():
    p = sech(0.1, 3)
    assert abs(eval_Phi(p, -20.0) - 0.1 * math.pi / 3) < 1e-10
    assert abs(eval_Phi(p, 15.0)) < 1e-10
    assert np.all(eval_Phi(sech(0.0, 3), np.linspace(-2, 2, 5)) == 0)
    # against an independent adaptive quadrature
    for x in (-1.3, 0.0, 0.4, 2.2):
        ref = integrate.quad(lambda z: float(eval_phi(p, z)), x, 40, epsabs=1e-15, limit=200)[0]
        assert abs(eval_Phi(p, x) - ref) < 1e-13


def test_dphi_against_finite_difference():
    for p in (sech(), shifted_sech(), gaussian_even(), indicator_smoothed()):
        x = np.linspace(-2, 2, 9)
        h = 1e-5
        fd = (eval_phi(p, x + h) - eval_phi(p, x - h)) / (2 * h)
        assert np.max(np.abs(fd - eval_dphi(p, x))) < 1e-8


def test_bessel_Phi():
    p = bessel(1.5)
    for x in (0.3, 1.0, 4.0):
        ref = integrate.quad(lambda z: special.jv(2.5, math.sqrt(z)) / (2 * math.sqrt(z)), 0, x,
                             epsabs=1e-15)[0]
        assert abs(eval_Phi(p, x) - ref) < 1e-13


def test_reflection_examples():
    assert reflection_coefficient(sech(0.0, 3), 1.0) == 0
    r0 = reflection_coefficient(sech(0.1, 3), 0.0)
    assert abs(r0 - (-1j * 0.1 * math.pi / 3)) < 1e-13
    # closed form: int c sech(a y) e^{-i l y} dy = (c pi / a) sech(pi l / (2a))
    lam = np.linspace(-4, 4, 9)
    exact = -1j * 0.1 * math.pi / 3 / np.cosh(math.pi * lam / 6)
    assert np.max(np.abs(reflection_coefficient(sech(0.1, 3), lam) - exact)) < 1e-13
    # modulation theorem for the shifted profile
    r_sh = reflection_coefficient(shifted_sech(0.1, 3, 0.5), 1.0)
    r_un = reflection_coefficient(sech(0.1, 3), 1.0)
    assert abs(r_sh - np.exp(-0.5j) * r_un) < 1e-10


def test_reflection_derivative_against_finite_difference():
    p = shifted_sech()
    lam = np.array([-1.0, 0.3, 2.0])
    h = 1e-5
    fd = (reflection_coefficient(p, lam + h) - reflection_coefficient(p, lam - h)) / (2 * h)
    assert np.max(np.abs(fd - reflection_derivative(p, lam))) < 1e-10


def test_even_profile_has_imaginary_r():
    r = reflection_coefficient(sech(0.1, 3), np.linspace(-5, 5, 21))
    assert np.max(np.abs(r.real)) < 1e-12


def test_symbol_examples():
    assert np.all(symbol_s(sech(0.0, 3), np.array([0.0, 1.0])) == 0)
    p = gaussian_even(0.5)
    assert abs(symbol_s(p, 0.7) - symbol_s(p, -0.7)) < 1e-10
    # trapezoid oracle on a wide, fine window
    lam = np.linspace(-12, 12, 240001)
    f = np.log(1 - 0.5 * np.exp(-lam ** 2))
    oracle = -np.trapezoid(f, lam) / np.pi if hasattr(np, "trapezoid") else -np.trapz(f, lam) / np.pi
    assert abs(symbol_s(p, 0.0) - oracle) < 1e-8


def test_symbol_domain_violation():
    # |r(0)| = c pi / a >= 1 makes the Hankel log argument negative
    with pytest.raises(DomainViolation) as info:
        symbol_s(sech(1.0, 3.0), 0.0)
    assert info.value.where is not None


def test_spectral_constants_zero():
    sd = spectral_constants(sech(0.0, 3))
    assert sd.s0 == sd.kappa == sd.winding == 0


def test_spectral_constants_against_quad_oracle():
    # WH gaussian: s and kappa by nested adaptive quadrature
    c = 0.5

    def s(x):
        return -2 / math.pi * integrate.quad(lambda l: math.log(1 - c * math.exp(-l * l)) * math.cos(x * l),
                                             0, 12, epsabs=1e-14, limit=200)[0]
    sd = spectral_constants(gaussian_even(c))
    assert abs(sd.s0 - s(0.0)) < 1e-12
    kappa = integrate.quad(lambda x: x * s(x) ** 2, 0, 30, epsabs=1e-14, limit=200)[0]
    assert abs(sd.kappa - kappa) < 1e-10
    assert sd.s0 == pytest.approx(0.35252653856160787, abs=1e-12)
    assert sd.kappa == pytest.approx(0.14663371131640324, abs=1e-10)


def test_winding_even_and_shifted():
    assert abs(spectral_constants(sech(0.1, 3)).winding) < 1e-10
    sd = spectral_constants(shifted_sech(0.03, 3, 0.5))
    assert abs(sd.winding - 0.5 * sd.s0) < 1e-8
    assert abs(sd.winding) > 1e-5


def test_dominance_of_shipped_hankel_profiles():
    for p in (sech(), shifted_sech()):
        assert dominance_ratio(p) <= 1.0
        xs = np.arange(-5.0, 6.0)
        env = np.exp(-p.a * np.abs(xs))
        assert np.all(np.abs(eval_phi(p, xs)) <= env)
        assert np.all(np.abs(eval_dphi(p, xs)) <= env)


def test_wh_evenness_exact():
    x = np.linspace(-5, 5, 101)
    for p in (gaussian_even(0.5), indicator_smoothed()):
        assert np.array_equal(eval_phi(p, x), eval_phi(p, -x))


# ---------------------------------------------------------------- Bessel

def _series_oracle(alpha, x, terms=50):
    """J_alpha(x) with the Gamma values generated by exact rational recursion."""
    h = Fraction(x) / 2
    a = Fraction(alpha)
    total = Fraction(0)
    gam_ratio = Fraction(1)        # Gamma(k + alpha + 1) / Gamma(alpha + 1)
    fact = 1
    for k in range(terms):
        if k:
            gam_ratio *= (k + a)
            fact *= k
        total += Fraction((-1) ** k) * h ** (2 * k) / (fact * gam_ratio)
    return float(total) * (x / 2) ** alpha / math.gamma(alpha + 1)


def test_bessel_examples():
    assert bessel_j(1.5, 0.0) == 0.0
    assert bessel_j(0.0, 0.0) == 1.0
    assert abs(bessel_j(1.5, 1.0) - _series_oracle(1.5, 1.0)) < 1e-12
    for x in (0.5, 3.0, 9.0):
        assert abs(bessel_j(1.5, x) - _series_oracle(1.5, x)) < 1e-12


def test_bessel_coefficient_recursion():
    # c_k(alpha) = 1 / (k! Gamma(k + alpha + 1)); c_k(alpha + 1) (k + alpha + 1) = c_k(alpha)
    a = 1.5
    for k in range(6):
        ck = 1 / (math.factorial(k) * math.gamma(k + a + 1))
        ck1 = 1 / (math.factorial(k) * math.gamma(k + a + 2))
        assert ck1 * (k + a + 1) == pytest.approx(ck, rel=1e-15)


def test_bessel_refusals():
    with pytest.raises(DomainViolation):
        bessel_j(1.5, 41.0)
    with pytest.raises(DomainViolation):
        bessel_j(1.5, 30.0)    # more than six digits of cancellation
    with pytest.raises(ContractViolation):
        bessel_j(1.5, -1.0)


def test_bessel_against_scipy():
    x = np.linspace(0, 12, 61)
    for a in (0.5, 1.5, 2.5, 3.0):
        assert np.max(np.abs(bessel_j(a, x) - special.jv(a, x))) < 1e-12


def test_bessel_integral():
    for up in (0.5, 2.0, 6.0):
        mpmath.mp.dps = 30
        ref = float(mpmath.quad(lambda s: mpmath.besselj(2.5, s), [0, up]))
        assert abs(bessel_j_integral(2.5, up) - ref) < 1e-14


@given(st.floats(0.6, 4.0), st.floats(0.05, 12.0))
def test_bessel_three_term_recurrence(alpha, x):
    lhs = bessel_j(alpha - 1, x) + bessel_j(alpha + 1, x)
    rhs = 2 * alpha / x * bessel_j(alpha, x)
    assert abs(lhs - rhs) < 1e-11 * max(1.0, abs(rhs))


@settings(max_examples=6)
@given(st.floats(0.5, 4.0), st.floats(0.0, 10.0))
def test_symbol_is_even_for_even_profiles(c, x):
    p = sech(c * 0.1, 3.0)
    assert abs(symbol_s(p, x) - symbol_s(p, -x)) < 1e-12
