"""Pfaffians, the Fredholm Pfaffian series and the square-root route.

Block conventions: a 2x2 kernel K = [[K11, K12], [K21, K22]] with K11, K22
skew and K12(x,y) = -K21(y,x); J = [[0, 1], [-1, 0]] (times the delta
kernel); M = -JK = [[-K21, -K22], [K11, K12]], and pf(J - K)^2 = det(I - M).
"""
from dataclasses import dataclass
import itertools
import math
import warnings

import numpy as np

from .errors import ContractViolation, PfaffianBranchError, SeriesTruncationError
from .linop import BlockOperator, det2_regularized

__all__ = [
    "SkewMatrix", "SkewBlockKernel", "pfaffian", "pfaffian_batch",
    "fredholm_pfaffian_series", "pf_via_sqrt_det", "discrete_fredholm_pfaffian", "assemble_minus_JK",
    "symplectic_K", "orthogonal_K", "symplectic_block_kernel",
]


class SkewMatrix:
    """Even-dimensional skew-symmetric matrix, checked on construction."""

    def __init__(self, a, tol=1e-12):
        a = np.array(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ContractViolation("skew matrix must be square")
        if a.shape[0] % 2:
            raise ContractViolation("skew matrix must have even dimension")
        scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
        if a.size and np.max(np.abs(a + a.T)) >= tol * scale:
            raise ContractViolation("matrix is not skew-symmetric")
        a.setflags(write=False)
        self.a = a

    @property
    def shape(self):
        return self.a.shape

    def __array__(self, dtype=None, copy=None):
        return self.a if dtype is None else self.a.astype(dtype)


def pfaffian_batch(A):
    """Pfaffians of a stack (B, 2l, 2l) of skew matrices.

    Parlett-Reid elimination: at step k pivot the largest entry of column k
    below the diagonal into row k+1 (one sign flip per swap), take
    A[k, k+1] as the next factor and update the trailing block with a
    skew rank-2 correction.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 3 or A.shape[1] != A.shape[2] or A.shape[1] % 2:
        raise ContractViolation("need a stack of even-dimensional square matrices")
    B, n, _ = A.shape
    pf = np.ones(B)
    if n == 0:
        return pf
    bidx = np.arange(B)
    for k in range(0, n - 1, 2):
        kp = k + 1 + np.argmax(np.abs(A[:, k + 1:, k]), axis=1)
        swap = kp != k + 1
        if np.any(swap):
            b, r = bidx[swap], kp[swap]
            tmp = A[b, k + 1, :].copy()
            A[b, k + 1, :] = A[b, r, :]
            A[b, r, :] = tmp
            tmp = A[b, :, k + 1].copy()
            A[b, :, k + 1] = A[b, :, r]
            A[b, :, r] = tmp
            pf[swap] *= -1.0
        piv = A[:, k, k + 1].copy()
        pf *= piv
        if k + 2 < n:
            safe = np.where(piv == 0, 1.0, piv)
            tau = A[:, k, k + 2:] / safe[:, None]
            col = A[:, k + 2:, k + 1]
            A[:, k + 2:, k + 2:] += tau[:, :, None] * col[:, None, :] - col[:, :, None] * tau[:, None, :]
    return pf


def pfaffian(a):
    """Signed Pfaffian of a SkewMatrix (arrays are validated first)."""
    if not isinstance(a, SkewMatrix):
        a = SkewMatrix(a)
    if a.shape[0] == 0:
        return 1.0
    return float(pfaffian_batch(a.a[None])[0])


@dataclass(frozen=True)
class SkewBlockKernel:
    """Four kernel evaluators k(x, y) forming K = [[k11, k12], [k21, k22]]."""
    k11: object
    k12: object
    k21: object
    k22: object


def _sample(k, x):
    if hasattr(k, "matrix"):
        return np.asarray(k.matrix(x), dtype=float)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return np.asarray(k(X, Y), dtype=float) * np.ones(X.shape)


def fredholm_pfaffian_series(k, grid, ell_max, tol=1e-8, strict=True):
    """1 + sum_l (-1)^l / l! int_{Delta^l} Pf[K(x_j, x_k)] dx.

    Every l-fold integral is the full tensor-product Gauss sum over the
    grid (tuples with repeated nodes contribute zero Pfaffians).  If the
    last term is not below `tol` relative to the total, a
    SeriesTruncationError carries the measured tail; with strict=False a
    warning is issued instead and the truncated value returned.
    """
    ell_max = int(ell_max)
    if ell_max < 1:
        raise ContractViolation("ell_max must be positive")
    n = grid.size
    if ell_max > 4 or n ** ell_max > 14 ** 4:
        raise ContractViolation("series route is capped at ell_max <= 4 and n^ell <= 14^4")
    x = grid.nodes
    sw = grid.sqrt_weights
    blocks = np.empty((2, 2, n, n))
    for (a, b), kk in zip(itertools.product((0, 1), (0, 1)), (k.k11, k.k12, k.k21, k.k22)):
        blocks[a, b] = sw[:, None] * _sample(kk, x) * sw[None, :]
    scale = max(1e-300, float(np.max(np.abs(blocks))))
    if (np.max(np.abs(blocks[0, 0] + blocks[0, 0].T)) > 1e-10 * scale
            or np.max(np.abs(blocks[1, 1] + blocks[1, 1].T)) > 1e-10 * scale
            or np.max(np.abs(blocks[0, 1] + blocks[1, 0].T)) > 1e-10 * scale):
        raise ContractViolation("block kernel is not skew: need K11, K22 skew and K12 = -K21^T")
    # node-major layout: K4[i, a, j, b] = blocks[a, b, i, j]
    K4 = blocks.transpose(2, 0, 3, 1)
    total = 1.0
    term = 0.0
    for ell in range(1, ell_max + 1):
        idx = np.array(list(itertools.product(range(n), repeat=ell)), dtype=np.int64)
        vals = np.empty(idx.shape[0])
        for s in range(0, idx.shape[0], 8192):
            I = idx[s:s + 8192]
            sub = K4[I[:, :, None], :, I[:, None, :], :]       # (B, l, l, 2, 2)
            sub = sub.transpose(0, 1, 3, 2, 4).reshape(-1, 2 * ell, 2 * ell)
            vals[s:s + 8192] = pfaffian_batch(sub)
        term = (-1) ** ell * float(np.sum(vals)) / math.factorial(ell)
        total += term
    tail = abs(term) / max(abs(total), 1e-300)
    if tail >= tol:
        msg = f"series truncated at l={ell_max}: last term relative size {tail:.3g}"
        if strict:
            raise SeriesTruncationError(msg, tail)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return total


def _logdet_scaled(F, gamma):
    sign, la = np.linalg.slogdet(np.eye(F.shape[0]) - gamma * F)
    return sign * math.exp(la) if sign != 0 else 0.0


def pf_via_sqrt_det(m, steps=11, min_step=1e-3):
    """sqrt(det2(M)) with the sign fixed by continuity in gamma K, gamma in [0,1].

    At gamma = 0 the Pfaffian is 1.  The determinant is sampled on `steps`
    equally spaced gammas; an interval on which it is not positive at both
    ends is subdivided tenfold until the step is below `min_step`, and a
    zero crossing that survives that resolution raises PfaffianBranchError.
    """
    d1 = det2_regularized(m)
    F = m.full_matrix()

    def check(g0, g1, h):
        d0, dd1 = _logdet_scaled(F, g0), _logdet_scaled(F, g1)
        if d0 > 0 and dd1 > 0:
            return
        if h <= min_step * (1 + 1e-9):
            raise PfaffianBranchError(
                f"determinant reaches zero between gamma={g0:.6g} and {g1:.6g}")
        sub = np.linspace(g0, g1, 11)
        for a, b in zip(sub[:-1], sub[1:]):
            check(a, b, h / 10)

    gam = np.linspace(0.0, 1.0, steps)
    h = gam[1] - gam[0] if steps > 1 else 1.0
    for a, b in zip(gam[:-1], gam[1:]):
        check(a, b, h)
    if not d1 > 0:
        raise PfaffianBranchError("det2(M) is not positive at gamma = 1")
    return math.sqrt(d1)


def discrete_fredholm_pfaffian(k11, k12, k21, k22):
    """pf(J - K) for discretised blocks, by elimination (no square root).

    Rows are interleaved node by node, (x_1, 1), (x_1, 2), (x_2, 1), ...,
    so J is block diagonal with Pf(J) = 1 and the value equals the finite
    Fredholm Pfaffian series summed over all node subsets.
    """
    N = k11.size
    Z = np.empty((N, 2, N, 2))
    for a, b, op in ((0, 0, k11), (0, 1, k12), (1, 0, k21), (1, 1, k22)):
        Z[:, a, :, b] = -op.A
    Z[np.arange(N), 0, np.arange(N), 1] += 1.0
    Z[np.arange(N), 1, np.arange(N), 0] -= 1.0
    Z = Z.reshape(2 * N, 2 * N)
    return pfaffian(SkewMatrix(Z, tol=1e-10))


def assemble_minus_JK(k11, k12, k21, k22, cls="symplectic"):
    """M = -JK = [[-K21, -K22], [K11, K12]]."""
    return BlockOperator(-k21, -k22, k11, k12, cls)


def symplectic_K(S, G, H):
    """K = [[H, S*], [-S, -G]] built from discretised S, G, H (K22 = d/dy S = -G)."""
    return H, S.T, -S, -G


def orthogonal_K(S, G, H, eps):
    """Same as symplectic_K with K11 = H - eps."""
    return H - eps, S.T, -S, -G


def symplectic_block_kernel(S, G, H, eps=None):
    """SkewBlockKernel of kernel evaluators for the series route."""
    if eps is None:
        k11 = H
    else:
        k11 = lambda x, y: np.asarray(H(x, y)) - np.asarray(eps(x, y))
    return SkewBlockKernel(k11, lambda x, y: S(y, x),
                           lambda x, y: -np.asarray(S(x, y)), lambda x, y: -np.asarray(G(x, y)))
