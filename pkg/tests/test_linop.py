import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pflab.errors import ContractViolation, SingularOperatorError
from pflab.kernels import wh_Q
from pflab.linop import (BlockOperator, DiscreteOperator, block_det, det2_regularized, discretize,
                         epsilon_operator, fredholm_det, fredholm_slogdet, from_matrix,
                         nonzero_spectrum, nystrom_extend, operator_norm, resolve, trace)
from pflab.profiles import gaussian_even
from pflab.quadrature import gauss_legendre, multi_interval_grid


def zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def test_rank_one_determinant():
    g = gauss_legendre(12, 0, 1)
    op = discretize(lambda x, y: x * np.ones_like(y), g)
    # det(I - f g^T) = 1 - int f g = 1 - 1/2
    assert abs(fredholm_det(op) - 0.5) < 1e-14
    const = discretize(lambda x, y: 0.25 + 0 * x * y, g)
    assert abs(fredholm_det(const) - 0.75) < 1e-14
    assert abs(operator_norm(const) - 0.25) < 1e-12


def test_rank_two_determinant():
    # K = x y + 1: det(I - K) = det(I2 - [[1/3, 1/2], [1/2, 1]]) on [0, 1]
    g = gauss_legendre(10, 0, 1)
    op = discretize(lambda x, y: x * y + 1.0, g)
    ref = (1 - 1 / 3) * (1 - 1) - 0.25
    assert abs(fredholm_det(op) - ref) < 1e-14


def test_block_diagonal_determinant_factorises():
    g = gauss_legendre(10, 0, 1)
    a = discretize(lambda x, y: 0.3 * np.cos(x - y), g)
    b = discretize(lambda x, y: 0.2 * x * y, g)
    z = discretize(zero, g)
    m = BlockOperator(a, z, z, b)
    assert abs(block_det(m) - fredholm_det(a) * fredholm_det(b)) < 1e-14
    assert abs(det2_regularized(m) - block_det(m)) < 1e-15


def test_slogdet_and_singular():
    g = gauss_legendre(4, 0, 1)
    s, la = fredholm_slogdet(discretize(lambda x, y: 0.5 + 0 * x, g))
    assert s == 1.0 and abs(la - math.log(0.5)) < 1e-14
    singular = DiscreteOperator(g, np.diag(1 / g.weights), np.eye(4))    # A = I exactly
    with pytest.raises(SingularOperatorError):
        fredholm_det(singular)
    with pytest.raises(SingularOperatorError):
        resolve(singular, np.ones(4))


def test_resolve_solves_equation_and_matches_neumann():
    g = gauss_legendre(16, 0, 1)
    k = lambda x, y: 0.4 * np.exp(-(x - y) ** 2)
    op = discretize(k, g)
    f = lambda x: np.sin(3 * x) + 1
    u = resolve(op, f)
    assert np.max(np.abs(u - op.K @ (g.weights * u) - f(g.nodes))) < 1e-14
    # Neumann series oracle
    v = f(g.nodes)
    acc = v.copy()
    for _ in range(200):
        v = op.K @ (g.weights * v)
        acc += v
    assert np.max(np.abs(u - acc)) < 1e-13
    # several right-hand sides at once
    U = resolve(op, np.stack([f(g.nodes), g.nodes], axis=1))
    assert np.max(np.abs(U[:, 0] - u)) < 1e-15


def test_nystrom_extension_interpolates_nodes():
    g = gauss_legendre(16, 0, 1)
    k = lambda x, y: 0.4 * np.exp(-(x - y) ** 2)
    op = discretize(k, g)
    f = lambda x: np.cos(x)
    u = resolve(op, f)
    assert np.max(np.abs(nystrom_extend(op, u, f, g.nodes) - u)) < 1e-14
    # the extension satisfies the integral equation off the grid too (fine-grid check)
    fine = gauss_legendre(40, 0, 1)
    uf = resolve(discretize(k, fine), f)
    x = np.array([0.0, 0.37, 1.0])
    assert np.max(np.abs(nystrom_extend(op, u, f, x)
                         - nystrom_extend(discretize(k, fine), uf, f, x))) < 1e-13
    with pytest.raises(ContractViolation):
        nystrom_extend(from_matrix(g, op.K), u, f, x)


def test_wh_trace_and_fredholm_convergence():
    p = gaussian_even(0.5)
    t = 2.0
    Q = wh_Q(p)
    W0 = 0.5 / (2 * math.sqrt(math.pi))
    op = discretize(Q, gauss_legendre(32, -t, t))
    assert abs(trace(op) - 2 * t * W0) < 1e-14
    d1 = fredholm_det(op)
    d2 = fredholm_det(discretize(Q, gauss_legendre(48, -t, t)))
    assert abs(d1 - d2) < 1e-14


def test_nonzero_spectrum_rank_two():
    g = gauss_legendre(12, 0, 1)
    op = discretize(lambda x, y: x * y + 1.0, g)
    ev = nonzero_spectrum(op)
    assert len(ev) == 2
    # eigenvalues of [[1/3, 1/2], [1/2, 1]]
    ref = np.sort(np.linalg.eigvalsh(np.array([[1 / 3, 1 / 2], [1 / 2, 1.0]])))[::-1]
    assert np.allclose([e.real for e in ev], ref, atol=1e-13)
    assert nonzero_spectrum(np.zeros((0, 0))) == []


def test_epsilon_operator_exact_on_polynomials():
    g = multi_interval_grid([0.0, 1.0, 1.5, 2.5], 8)
    E = epsilon_operator(g)
    x = g.nodes
    # (eps 1)(x) = (1/2)(measure left of x - measure right of x) within Delta
    left = np.minimum(x, 1.0) + np.clip(x - 1.5, 0, None)
    total = 2.0
    assert np.max(np.abs(E.A @ g.sqrt_weights / g.sqrt_weights - (left - 0.5 * total))) < 1e-14
    # antisymmetry in the weighted inner product
    assert np.max(np.abs(E.A + E.A.T)) < 1e-14


def test_operator_algebra_and_grid_checks():
    g = gauss_legendre(6, 0, 1)
    a = discretize(lambda x, y: x + 2 * y, g)
    assert np.allclose(a.T.K, a.K.T)
    assert np.allclose((a - a).A, 0)
    assert np.allclose(a.scaled(2.0).A, 2 * a.A)
    other = discretize(lambda x, y: x + 2 * y, gauss_legendre(6, 0, 1))
    with pytest.raises(ContractViolation):
        a + other
    with pytest.raises(ContractViolation):
        BlockOperator(a, a, a, other)
    with pytest.raises(ContractViolation):
        BlockOperator(a, a, a, a, "unitary")


def test_operator_norm_matches_svd():
    g = gauss_legendre(20, -1, 1)
    op = discretize(lambda x, y: 0.3 * np.sin(x + 2 * y) + 0.1 * x, g)
    assert abs(operator_norm(op) - np.linalg.svd(op.A, compute_uv=False)[0]) < 1e-9
    assert operator_norm(discretize(zero, g)) == 0.0


@settings(max_examples=25)
@given(st.floats(0.05, 0.6), st.floats(0.05, 0.6), st.floats(-2.0, 2.0))
def test_det_commutation(a, b, shift):
    # det(I - A B) = det(I - B A) for the compositions on a common grid
    g = gauss_legendre(14, 0, 1)
    A = discretize(lambda x, y: a * np.exp(-(x - y - 0.1 * shift) ** 2), g)
    B = discretize(lambda x, y: b * np.cos(x * y + shift), g)
    AB = from_matrix(g, A.K @ (g.weights[:, None] * B.K))
    BA = from_matrix(g, B.K @ (g.weights[:, None] * A.K))
    assert abs(fredholm_det(AB) - fredholm_det(BA)) < 1e-13
