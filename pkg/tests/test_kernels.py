import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from pflab.errors import ContractViolation
from pflab.kernels import (bessel_G, bessel_H, bessel_Q, bessel_S, epsilon_kernel, hankel_G,
                           hankel_H, hankel_H_literal, hankel_Q, hankel_S_orthogonal,
                           hankel_S_symplectic, main_kernels, sine_V, wh_G, wh_H, wh_Q,
                           wh_S_orthogonal, wh_S_symplectic)
from pflab.profiles import (bessel, eval_phi, gaussian_even, indicator_smoothed, sech,
                            shifted_sech)

LATTICE = np.linspace(-1.5, 2.0, 10)
HANKEL = [sech(0.1, 3.0), shifted_sech(0.03, 3.0, 0.5)]
WH = [gaussian_even(0.5), indicator_smoothed()]


def _skew_err(k, xs):
    M = k.matrix(xs)
    return np.max(np.abs(M + M.T))


@pytest.mark.parametrize("p", HANKEL + WH, ids=lambda p: p.kind)
@pytest.mark.parametrize("cls", ["symplectic", "orthogonal"])
def test_G_and_H_are_skew(p, cls):
    S, G, H = main_kernels(p, cls)
    xs = LATTICE if p.family == "hankel" else np.linspace(-1.0, 1.0, 10)
    assert _skew_err(G, xs) < 1e-14
    assert _skew_err(H, xs) < 1e-13


def test_bessel_G_H_skew():
    xs = np.linspace(0.1, 3.0, 10)
    assert _skew_err(bessel_G(1.5), xs) < 1e-13
    assert _skew_err(bessel_H(1.5), xs) < 1e-9


@pytest.mark.parametrize("p", HANKEL + WH, ids=lambda p: p.kind)
@pytest.mark.parametrize("cls", ["symplectic", "orthogonal"])
def test_derivative_relations(p, cls):
    S, G, H = main_kernels(p, cls)
    x = np.array([-0.4, 0.3, 1.1]) if p.family == "hankel" else np.array([-0.6, 0.1, 0.7])
    y = np.array([0.2, -0.5, 0.9])
    h = 1e-5
    dyS = (S(x, y + h) - S(x, y - h)) / (2 * h)
    dxH = (H(x + h, y) - H(x - h, y)) / (2 * h)
    assert np.max(np.abs(G(x, y) + dyS)) < 1e-8
    assert np.max(np.abs(dxH - S(x, y))) < 1e-8


def test_hankel_Q_value():
    assert abs(float(hankel_Q(sech(0.1, 3.0))(0.0, 0.0)) - 0.01 / 3) < 1e-12


def test_hankel_Q_against_quad():
    p = shifted_sech(0.03, 3.0, 0.5)
    Q = hankel_Q(p)
    for x, y in [(0.0, 0.3), (-1.0, 0.7), (1.2, -0.4)]:
        ref = integrate.quad(lambda u: float(eval_phi(p, x + u) * eval_phi(p, u + y)), 0, 40,
                             epsabs=1e-16, limit=400)[0]
        assert abs(float(Q(x, y)) - ref) < 1e-13


def test_symplectic_S_formula():
    # S = (1/2)(Q - (1/2) phi(x) Phi(y)) checked against direct quadrature of both parts
    p = sech(0.1, 3.0)
    x, y = 0.2, -0.3
    q = integrate.quad(lambda u: float(eval_phi(p, x + u) * eval_phi(p, u + y)), 0, 40, epsabs=1e-16)[0]
    Phy = integrate.quad(lambda z: float(eval_phi(p, z)), y, 40, epsabs=1e-16)[0]
    ref = 0.5 * (q - 0.5 * float(eval_phi(p, x)) * Phy)
    assert abs(float(hankel_S_symplectic(p)(x, y)) - ref) < 1e-13


def test_orthogonal_S_formula():
    p = sech(0.1, 3.0)
    x, y = -0.2, 0.4
    q = integrate.quad(lambda u: float(eval_phi(p, x + u) * eval_phi(p, u + y)), 0, 40, epsabs=1e-16)[0]
    Phy = integrate.quad(lambda z: float(eval_phi(p, z)), y, 40, epsabs=1e-16)[0]
    ref = q + 0.5 * float(eval_phi(p, x)) * (1 - Phy)
    assert abs(float(hankel_S_orthogonal(p)(x, y)) - ref) < 1e-13


def test_Phi_form_matches_literal_H():
    for p in HANKEL:
        xs = np.array([-0.8, -0.1, 0.5, 1.3])
        A = hankel_H(p, "orthogonal").matrix(xs)
        B = hankel_H_literal(p).matrix(xs)
        assert np.max(np.abs(A - B)) < 1e-12


def test_wh_Q_closed_form():
    # phi = c exp(-u^2): W(z) = c / (2 sqrt(pi)) exp(-z^2 / 4)
    c = 0.5
    z = np.linspace(-4, 4, 33)
    exact = c / (2 * math.sqrt(math.pi)) * np.exp(-z ** 2 / 4)
    assert np.max(np.abs(wh_Q(gaussian_even(c))(z, 0.0) - exact)) < 1e-14


def test_wh_class_scaling():
    p = gaussian_even(0.5)
    x, y = np.array([0.3, -0.2]), np.array([0.1, 0.6])
    assert np.allclose(wh_S_symplectic(p)(x, y), 0.5 * wh_Q(p)(x, y), rtol=0, atol=1e-16)
    assert np.allclose(wh_S_orthogonal(p)(x, y), wh_Q(p)(x, y), rtol=0, atol=1e-16)
    # H(x, y) = int_y^x S(z, y) dz
    ref = integrate.quad(lambda z: float(wh_S_symplectic(p)(z, 0.2)), 0.2, 0.9, epsabs=1e-15)[0]
    assert abs(float(wh_H(p)(0.9, 0.2)) - ref) < 1e-14


def test_wh_translation_invariance():
    p = indicator_smoothed()
    G = wh_G(p)
    assert abs(float(G(0.7, 0.2)) - float(G(1.2, 0.7))) < 1e-15


def test_sine_V_diagonal_and_symmetry():
    p = gaussian_even(0.5)
    t = 2.0
    x = np.linspace(-1, 1, 7)
    V = sine_V(p, t)
    assert np.max(np.abs(V(x, x) - eval_phi(p, x) * t / math.pi)) < 1e-15
    M = V.matrix(x)
    assert np.max(np.abs(M - M.T)) < 1e-16
    xo, yo = 0.3, -0.4
    ref = math.sqrt(eval_phi(p, xo) * eval_phi(p, yo)) * math.sin(t * (xo - yo)) / (math.pi * (xo - yo))
    assert abs(float(V(xo, yo)) - ref) < 1e-15
    with pytest.raises(ContractViolation):
        sine_V(p, 0.0)


def test_epsilon_values():
    e = epsilon_kernel()
    assert float(e(1.0, 0.0)) == 0.5
    assert float(e(0.0, 1.0)) == -0.5
    assert float(e(0.3, 0.3)) == 0.0


def test_bessel_Q_against_quad():
    Q = bessel_Q(1.5)
    for x, y in [(0.5, 0.5), (1.0, 3.0), (4.0, 2.0)]:
        mpmath.mp.dps = 30
        ref = float(mpmath.quad(lambda u: mpmath.besselj(1.5, mpmath.sqrt(x * u))
                                * mpmath.besselj(1.5, mpmath.sqrt(u * y)), [0, 1])) / 4
        assert abs(float(Q(x, y)) - ref) < 1e-15


def test_bessel_Q_diagonal_closed_form():
    # Q(x, x) = (1/4)(J_a(s)^2 - J_{a+1}(s) J_{a-1}(s)), s = sqrt(x)
    a = 2.5
    for x in (0.3, 2.0, 5.0):
        s = math.sqrt(x)
        ref = 0.25 * (special.jv(a, s) ** 2 - special.jv(a + 1, s) * special.jv(a - 1, s))
        assert abs(float(bessel_Q(a)(x, x)) - ref) < 1e-14


def test_bessel_S_relations():
    S, G, H = bessel_S(1.5), bessel_G(1.5), bessel_H(1.5)
    x, y, h = 1.3, 0.8, 1e-5
    assert abs(float(G(x, y)) + (float(S(x, y + h)) - float(S(x, y - h))) / (2 * h)) < 1e-9
    assert abs((float(H(x + h, y)) - float(H(x - h, y))) / (2 * h) - float(S(x, y))) < 1e-8
    with pytest.raises(ContractViolation):
        bessel_S(1.0)


def test_family_checks():
    with pytest.raises(ContractViolation):
        hankel_Q(gaussian_even(0.5))
    with pytest.raises(ContractViolation):
        wh_Q(sech())
    with pytest.raises(ContractViolation):
        hankel_G(sech(), "unitary")
    with pytest.raises(ContractViolation):
        main_kernels(bessel(1.5), "orthogonal")


def test_zero_profile_gives_zero_kernels():
    S, G, H = main_kernels(sech(0.0, 3.0))
    xs = LATTICE
    for k in (S, G, H):
        assert not np.any(k.matrix(xs))


@settings(max_examples=15)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_hankel_Q_symmetric(x, y):
    Q = hankel_Q(shifted_sech(0.03, 3.0, 0.5))
    assert abs(float(Q(x, y)) - float(Q(y, x))) < 1e-16
