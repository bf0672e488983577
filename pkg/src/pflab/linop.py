"""Nystrom discretisation and the dense linear algebra on top of it.

A DiscreteOperator keeps the raw matrix K_ij = K(x_i, x_j) and the
weight-symmetrised A_ij = sqrt(w_i) K_ij sqrt(w_j).  det(I - A) is the
Nystrom approximation of the Fredholm determinant det(I - K).
"""
from dataclasses import dataclass, field
import threading
import warnings

import numpy as np
import scipy.linalg as sla

from .errors import ContractViolation, SingularOperatorError
from .quadrature import Grid, cumulative_matrix

__all__ = [
    "DiscreteOperator", "BlockOperator", "discretize", "from_matrix", "epsilon_operator",
    "fredholm_det", "fredholm_slogdet", "block_det", "block_slogdet", "det2_regularized",
    "resolve", "nystrom_extend", "operator_norm", "trace", "nonzero_spectrum",
]


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: Grid
    K: np.ndarray
    A: np.ndarray
    kernel: object = None
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: object = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        N = self.grid.size
        if self.K.shape != (N, N) or self.A.shape != (N, N):
            raise ContractViolation("operator matrices must be N x N with N = node count")
        self.K.setflags(write=False)
        self.A.setflags(write=False)

    @property
    def size(self):
        return self.grid.size

    def scaled(self, c, name=None):
        kern = None
        if self.kernel is not None:
            base = self.kernel
            kern = lambda x, y: c * np.asarray(base(x, y))
        return DiscreteOperator(self.grid, c * self.K, c * self.A, kern, name or self.name)

    @property
    def T(self):
        """Operator with the transposed kernel K*(x,y) = K(y,x)."""
        kern = None
        if self.kernel is not None:
            base = self.kernel
            kern = lambda x, y: base(y, x)
        return DiscreteOperator(self.grid, self.K.T.copy(), self.A.T.copy(), kern,
                                self.name + "*")

    def __add__(self, other):
        _same_grid(self, other)
        kern = None
        if self.kernel is not None and other.kernel is not None:
            k1, k2 = self.kernel, other.kernel
            kern = lambda x, y: np.asarray(k1(x, y)) + np.asarray(k2(x, y))
        return DiscreteOperator(self.grid, self.K + other.K, self.A + other.A, kern)

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def lu(self):
        """LU factors of I - A, computed once."""
        with self._lock:
            if "lu" not in self._cache:
                M = np.eye(self.size) - self.A
                with warnings.catch_warnings():
                    # an exactly zero pivot is reported below as SingularOperatorError
                    warnings.simplefilter("ignore", sla.LinAlgWarning)
                    lu, piv = sla.lu_factor(M, check_finite=True)
                if np.any(np.diag(lu) == 0):
                    raise SingularOperatorError("I - A is exactly singular")
                self._cache["lu"] = (lu, piv)
            return self._cache["lu"]


def _same_grid(*ops):
    g = ops[0].grid
    for op in ops[1:]:
        if op.grid is not g:
            raise ContractViolation("operators live on different grids")


def _sample(kernel, xs):
    if hasattr(kernel, "matrix"):
        return np.asarray(kernel.matrix(xs), dtype=float)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    return np.asarray(kernel(X, Y), dtype=float)


def discretize(kernel, grid, name=""):
    """Sample a kernel at all node pairs."""
    K = _sample(kernel, grid.nodes)
    sw = grid.sqrt_weights
    A = sw[:, None] * K * sw[None, :]
    return DiscreteOperator(grid, K, A, kernel, name)


def from_matrix(grid, K, kernel=None, name=""):
    K = np.array(K, dtype=float)
    sw = grid.sqrt_weights
    return DiscreteOperator(grid, K, sw[:, None] * K * sw[None, :], kernel, name)


def epsilon_operator(grid):
    """The jump kernel (1/2) sgn(x - y) by product integration.

    (eps f)(x_i) = int_{Delta, y < x_i} f - (1/2) int_Delta f, with the first
    integral done exactly on each Gauss panel via its spectral integration
    matrix.  The raw matrix is the effective kernel E_ij / w_j.
    """
    w = grid.weights
    E = cumulative_matrix(grid) - 0.5 * w[None, :]
    K = E / w[None, :]
    sw = grid.sqrt_weights
    A = sw[:, None] * E / sw[None, :]
    kern = lambda x, y: 0.5 * np.sign(np.asarray(x) - np.asarray(y))
    return DiscreteOperator(grid, K, A, kern, "epsilon")


def fredholm_slogdet(op):
    """(sign, log|det(I - A)|); singular systems raise SingularOperatorError."""
    A = op.A if isinstance(op, DiscreteOperator) else np.asarray(op)
    sign, logabs = np.linalg.slogdet(np.eye(A.shape[0]) - A)
    if sign == 0 or not np.isfinite(logabs):
        raise SingularOperatorError("I - A is exactly singular")
    return float(sign), float(logabs)


def fredholm_det(op):
    """det(I - A) by LU with partial pivoting."""
    s, la = fredholm_slogdet(op)
    return s * float(np.exp(la))


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """[[b11, b12], [b21, b22]] on one shared grid."""
    b11: DiscreteOperator
    b12: DiscreteOperator
    b21: DiscreteOperator
    b22: DiscreteOperator
    cls: str = "symplectic"

    def __post_init__(self):
        _same_grid(self.b11, self.b12, self.b21, self.b22)
        if self.cls not in ("symplectic", "orthogonal", ""):
            raise ContractViolation(f"unknown class tag {self.cls!r}")

    @property
    def grid(self):
        return self.b11.grid

    def full_matrix(self):
        return np.block([[self.b11.A, self.b12.A], [self.b21.A, self.b22.A]])

    def scaled(self, c):
        return BlockOperator(self.b11.scaled(c), self.b12.scaled(c), self.b21.scaled(c),
                             self.b22.scaled(c), self.cls)


def block_slogdet(m):
    return fredholm_slogdet(m.full_matrix())


def block_det(m):
    """det(I - M) for the 2N x 2N symmetrised block matrix."""
    s, la = block_slogdet(m)
    return s * float(np.exp(la))


def det2_regularized(m):
    """det((I - M) e^M) e^{-tr M11 - tr M22}.

    In finite dimensions tr M = tr M11 + tr M22, so this equals det(I - M);
    the trace identity is asserted explicitly before returning block_det.
    """
    full = m.full_matrix()
    t_full = float(np.trace(full))
    t_blocks = float(np.trace(m.b11.A) + np.trace(m.b22.A))
    scale = max(1.0, float(np.sum(np.abs(np.diag(full)))))
    if abs(t_full - t_blocks) > 1e-12 * scale:
        raise AssertionError("trace identity tr M = tr M11 + tr M22 violated")
    return block_det(m)


def _rhs_values(op, rhs):
    if callable(rhs):
        return np.asarray(rhs(op.grid.nodes), dtype=float)
    v = np.asarray(rhs, dtype=float)
    if v.shape[0] != op.size:
        raise ContractViolation("rhs vector length must equal node count")
    return v


def resolve(op, rhs):
    """u = (I - K)^{-1} rhs on the grid, solved in symmetrised coordinates."""
    b = _rhs_values(op, rhs)
    sw = op.grid.sqrt_weights
    scale = sw if b.ndim == 1 else sw[:, None]
    lu = op.lu()
    ut = sla.lu_solve(lu, scale * b)
    return ut / scale


def nystrom_extend(op, u, rhs, x, kernel=None):
    """u(x) = rhs(x) + sum_j w_j K(x, x_j) u_j at off-grid points x.

    `rhs` is a callable or the values at x; `kernel` overrides op.kernel.
    """
    kern = kernel if kernel is not None else op.kernel
    if kern is None:
        raise ContractViolation("operator carries no kernel evaluator for off-grid rows")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = op.grid
    if hasattr(kern, "matrix"):
        rows = np.asarray(kern.matrix(x, g.nodes), dtype=float)
    else:
        X, Y = np.meshgrid(x, g.nodes, indexing="ij")
        rows = np.asarray(kern(X, Y), dtype=float)
    base = np.asarray(rhs(x), dtype=float) if callable(rhs) else np.asarray(rhs, dtype=float)
    u = np.asarray(u, dtype=float)
    return base + rows @ (g.weights[:, None] * u if u.ndim == 2 else g.weights * u)


def operator_norm(op, tol=1e-10, maxiter=20000):
    """Largest singular value of A by power iteration on A^T A."""
    A = op.A if isinstance(op, DiscreteOperator) else np.asarray(op, dtype=float)
    n = A.shape[1]
    if not np.any(A):
        return 0.0
    v = 1.0 + 0.01 * np.arange(n) / max(n, 1)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(maxiter):
        w = A.T @ (A @ v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            # start vector in the null space; restart from an alternating one
            v = np.cos(np.arange(n) * 2.399963)
            v /= np.linalg.norm(v)
            continue
        v = w / new
        if abs(new - lam) <= tol * new:
            lam = new
            break
        lam = new
    return float(np.sqrt(lam))


def trace(op):
    """sum_i w_i K(x_i, x_i)."""
    return float(np.sum(op.grid.weights * np.diag(op.K)))


def nonzero_spectrum(matrix, cutoff=1e-10):
    """Eigenvalues with |lambda| > cutoff, sorted by modulus descending."""
    M = matrix.A if isinstance(matrix, DiscreteOperator) else np.asarray(matrix)
    if M.size == 0:
        return []
    ev = np.linalg.eigvals(M)
    ev = ev[np.abs(ev) > cutoff]
    order = sorted(range(ev.size), key=lambda i: (-abs(ev[i]), ev[i].real, ev[i].imag))
    return [complex(ev[i]) for i in order]
