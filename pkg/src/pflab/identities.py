"""Determinant and Pfaffian identities as numerical residual checks.

Every identity compares two independently assembled numbers (a left-hand
side such as a 2N x 2N block determinant and a right-hand side built from
D_Q and a finite-rank correction).  check() runs the comparison on the
default grid and once more on a refined grid; the report carries both.

Endpoint values of resolvents are always obtained by Nystrom extension of
the grid solution, never by reading off the nearest node.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import enum
import hashlib
import json
import math
import os

import numpy as np

from . import kernels as kn
from .errors import (ContractViolation, DomainViolation, HypothesisViolation,
                     SingularOperatorError)
from .linop import (discretize, epsilon_operator, fredholm_det, block_det,
                    det2_regularized, resolve, nystrom_extend, operator_norm)
from .pfaffian import (assemble_minus_JK, discrete_fredholm_pfaffian, symplectic_K,
                       orthogonal_K, pf_via_sqrt_det)
from .profiles import (Profile, eval_phi, eval_Phi, dominance_ratio, sech,
                       gaussian_even, bessel)
from .quadrature import (gauss_legendre, multi_interval_grid, semi_infinite_grid,
                         power_graded_grid, graded_breaks, legendre_rule)

__all__ = [
    "IdentityId", "GridSpec", "ResidualReport", "check", "run_suite", "sigma_sign",
    "sigma_row", "epsilon_composition_residual", "default_tolerance", "default_params",
    "hankel_grid", "wh_grid", "bessel_grid", "lhs_value", "log_DQ",
    "STATUS_PASS", "STATUS_FAIL", "STATUS_HYP", "NOISE_FLOOR",
]

STATUS_PASS = "PASS"
STATUS_FAIL = "FAIL"
STATUS_HYP = "HYPOTHESIS-VIOLATED"

# residuals below this are at working-precision noise; refinement cannot
# be expected to shrink them further
NOISE_FLOOR = 1e-12


class IdentityId(str, enum.Enum):
    C3 = "C3"
    C7 = "C7"
    C11 = "C11"
    C16 = "C16"
    C23 = "C23"
    C26 = "C26"
    C30 = "C30"
    C31 = "C31"
    C17AUX = "C17AUX"
    C28 = "C28"
    E17 = "E17"
    Z7 = "Z7"
    Z12 = "Z12"
    Z26 = "Z26"
    Z47 = "Z47"
    Z48 = "Z48"
    A6 = "A6"

    @classmethod
    def parse(cls, s):
        if isinstance(s, cls):
            return s
        try:
            return cls(str(s).strip().upper())
        except ValueError:
            raise ContractViolation(f"unknown identity id {s!r}") from None


_TOL = {
    "C11": 1e-7, "C23": 1e-7, "C26": 1e-7, "E17": 1e-11, "A6": 1e-10,
    "Z26": 1e-7, "Z47": 1e-7,
}


def default_tolerance(ident):
    return _TOL.get(IdentityId.parse(ident).value, 1e-6)


@dataclass(frozen=True)
class GridSpec:
    """n: Gauss nodes per panel; tail: truncation length beyond the profile
    centre for half-line problems; refine: factor applied to n for the
    convergence re-run; inner_n: nodes per panel in composition integrals."""
    n: int = 64
    tail: float = 12.0
    refine: float = 1.5
    inner_n: int = 20

    def __post_init__(self):
        if self.n < 2 or self.inner_n < 2:
            raise ContractViolation("grid sizes must be at least 2")
        if not self.tail > 0 or not self.refine >= 1:
            raise ContractViolation("tail must be positive and refine >= 1")

    def refined(self):
        return replace(self, n=int(math.ceil(self.n * self.refine)))

    @property
    def inner(self):
        return kn.InnerRule(self.inner_n)

    def as_dict(self):
        return {"n": self.n, "tail": self.tail, "refine": self.refine, "inner_n": self.inner_n}


@dataclass
class ResidualReport:
    identity: IdentityId
    params: dict
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    metric: str = "rel"
    tolerance: float = 1e-6
    hypothesis_checks: dict = field(default_factory=dict)
    converged: bool = True
    status: str = STATUS_PASS
    details: dict = field(default_factory=dict)

    @property
    def residual(self):
        """The residual the status is judged on (abs or rel per metric)."""
        return self.abs_residual if self.metric == "abs" else self.rel_residual

    @property
    def passed(self):
        return self.status == STATUS_PASS

    def to_dict(self):
        return {
            "identity": self.identity.value,
            "params": _jsonable(self.params),
            "lhs": self.lhs, "rhs": self.rhs,
            "abs_residual": self.abs_residual, "rel_residual": self.rel_residual,
            "metric": self.metric, "tolerance": self.tolerance,
            "hypothesis_checks": _jsonable(self.hypothesis_checks),
            "converged": bool(self.converged), "status": self.status,
            "details": _jsonable(self.details),
        }


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, enum.Enum):
        return v.value
    return v


def _rel(l, r):
    return abs(l - r) / max(abs(l), abs(r), 1e-300)


# ------------------------------------------------------------------ grids

def hankel_grid(p, t, gs):
    """(t, max(t, x0) + tail), panels graded toward the profile centre."""
    hi = max(t, p.centre) + gs.tail
    return semi_infinite_grid(t, hi - t, gs.n, centre=p.centre, scale=min(0.5, p.strip))


def hankel_truncated_grid(p, t, a2, gs):
    return semi_infinite_grid(t, a2 - t, gs.n, centre=p.centre, scale=min(0.5, p.strip))


def wh_grid(t, gs):
    return gauss_legendre(gs.n, -t, t)


def bessel_grid(t, gs):
    return power_graded_grid(0.0, t, gs.n, 4)


# ------------------------------------------------------------------ sigma

def sigma_sign(j, k, m):
    """Sign coefficient sigma_j(k) for 2m endpoints (1-based j, k).

    Row k alternates (-1)^j up to and including entry 2l+1 where k = 2l or
    2l+1 sits, then flips; the flip is the single transposition in each
    row.  Equivalently sigma_j(k) = (-1)^k s (+1 for odd j, -1 for even j)
    with s = +1 when k <= 2 ceil(j/2) - 1 and s = -1 otherwise.
    """
    j, k, m = int(j), int(k), int(m)
    if m < 1:
        raise ContractViolation("need at least one interval")
    if not (1 <= j <= 2 * m and 1 <= k <= 2 * m):
        raise ContractViolation(f"sign indices must lie in 1..{2 * m}")
    p = (j + 1) // 2
    s = 1 if k <= 2 * p - 1 else -1
    return (-1) ** k * s * (1 if j % 2 else -1)


def sigma_row(k, m):
    return [sigma_sign(j, k, m) for j in range(1, 2 * m + 1)]


# ------------------------------------------------------------------ helpers

def _hyp(checks, name, value, ok):
    checks[name] = {"value": float(value), "ok": bool(ok)}


def _norm_check(checks, Qop, name="norm_Q"):
    nq = operator_norm(Qop)
    _hyp(checks, name, nq, nq < 1.0)
    return nq


def _inv_margin(checks, op, name, scale=1.0):
    """Smallest singular value of I - scale*A: the invertibility margin."""
    sv = np.linalg.svd(np.eye(op.size) - scale * op.A, compute_uv=False)
    m = float(sv[-1])
    _hyp(checks, name, m, m > 1e-8)
    return m


def _family(p, *fams):
    if p.family not in fams:
        raise ContractViolation(f"this identity needs a profile of family {fams}, got {p.family}")


def _dominance(checks, p):
    if p.family == "hankel" and not p.is_zero:
        d = dominance_ratio(p)
        _hyp(checks, "dominance_ratio", d, d <= 1.0)


def _symplectic_M(S, G, H):
    return assemble_minus_JK(*symplectic_K(S, G, H), cls="symplectic")


def _orthogonal_M(S, G, H, E):
    return assemble_minus_JK(*orthogonal_K(S, G, H, E), cls="orthogonal")


def _ops(p, cls, grid, gs):
    S, G, H = kn.main_kernels(p, cls, gs.inner)
    return discretize(S, grid, "S"), discretize(G, grid, "G"), discretize(H, grid, "H")


def _Q_kernel(p, gs):
    if p.family == "hankel":
        return kn.hankel_Q(p, gs.inner)
    if p.family == "wiener-hopf":
        return kn.wh_Q(p, gs.inner)
    return kn.bessel_Q(p.alpha)


# ------------------------------------------------------- public left-hand sides

def lhs_value(p, cls, t, gs=GridSpec()):
    """det(I - M) (symplectic) or det2(I - M) (orthogonal) on the canonical domain.

    Hankel: (t, inf) truncated; Wiener-Hopf: (-t, t); Bessel: (0, t).
    """
    grid = _canonical_grid(p, t, gs)
    S, G, H = _ops(p, cls, grid, gs)
    if cls == "symplectic":
        return block_det(_symplectic_M(S, G, H))
    return det2_regularized(_orthogonal_M(S, G, H, epsilon_operator(grid)))


def log_DQ(p, t, gs=GridSpec()):
    """ln det(I - Q) on the canonical domain."""
    grid = _canonical_grid(p, t, gs)
    return math.log(fredholm_det(discretize(_Q_kernel(p, gs), grid)))


def _canonical_grid(p, t, gs):
    if p.family == "hankel":
        return hankel_grid(p, t, gs)
    if p.family == "wiener-hopf":
        if not t > 0:
            raise ContractViolation("wiener-hopf domains (-t, t) need t > 0")
        return wh_grid(t, gs)
    if not t > 0:
        raise ContractViolation("bessel domains (0, t) need t > 0")
    return bessel_grid(t, gs)


# ------------------------------------------------------------- checkers
# Each returns (lhs, rhs, hypothesis_checks, details).

def _c3(p, prm, gs):
    _family(p, "hankel", "wiener-hopf")
    ends = np.asarray(prm["endpoints"], dtype=float)
    grid = multi_interval_grid(ends, gs.n)
    S, G, H = kn.main_kernels(p, "symplectic", gs.inner)
    Sop, Gop, Hop = (discretize(k, grid) for k in (S, G, H))
    checks = {}
    _dominance(checks, p)
    two_St = Sop.T.scaled(2.0)
    _inv_margin(checks, two_St, "sigma_min_I_minus_2S")
    lhs = block_det(_symplectic_M(Sop, Gop, Hop))
    X2 = _endpoint_resolvent(two_St, H, ends)
    m2 = ends.size
    sgn = np.array([(-1) ** k for k in range(1, m2 + 1)], dtype=float)
    F = X2 * sgn[None, :]
    rhs = fredholm_det(two_St) * float(np.linalg.det(np.eye(m2) - F))
    return lhs, rhs, checks, {"F": F, "D_2S": fredholm_det(two_St)}


def _endpoint_resolvent(op, H, ends):
    """X[j, k] = ((I - op)^{-1} H)(a_j, a_k) by solve + Nystrom extension."""
    g = op.grid
    cols = H.matrix(g.nodes, ends)                 # H(x_m, a_k)
    U = resolve(op, cols)
    base = H.matrix(ends, ends)                    # H(a_j, a_k)
    return nystrom_extend(op, U, base, ends)


def _c7(p, prm, gs):
    _family(p, "hankel", "wiener-hopf")
    ends = np.asarray(prm["endpoints"], dtype=float)
    m = ends.size // 2
    grid = multi_interval_grid(ends, gs.n)
    S, G, H = kn.main_kernels(p, "orthogonal", gs.inner)
    Sop, Gop, Hop = (discretize(k, grid) for k in (S, G, H))
    E = epsilon_operator(grid)
    checks = {}
    _dominance(checks, p)
    St = Sop.T
    _inv_margin(checks, St, "sigma_min_I_minus_S")
    lhs = det2_regularized(_orthogonal_M(Sop, Gop, Hop, E))
    X1 = _endpoint_resolvent(St, H, ends)
    sig = np.array([[sigma_sign(l, k, m) for k in range(1, 2 * m + 1)]
                    for l in range(1, 2 * m + 1)], dtype=float)    # sig[l-1, k-1]
    sgn = np.array([(-1) ** k for k in range(1, 2 * m + 1)], dtype=float)
    Gm = X1 * sgn[None, :] - 0.5 * X1 @ sig
    rhs = fredholm_det(St) * float(np.linalg.det(np.eye(2 * m) - Gm))
    return lhs, rhs, checks, {"G": Gm, "D_S": fredholm_det(St)}


def _hankel_bracket_data(p, t, gs, grid=None):
    grid = grid or hankel_grid(p, t, gs)
    Qop = discretize(kn.hankel_Q(p, gs.inner), grid, "Q")
    DQ = fredholm_det(Qop)
    u = resolve(Qop, lambda x: eval_phi(p, x))
    Phi = eval_Phi(p, grid.nodes)
    w = grid.weights
    return grid, Qop, DQ, float(np.sum(w * u * Phi)), float(np.sum(w * u * (1.0 - Phi)))


def _c11(p, prm, gs):
    _family(p, "hankel")
    t = float(prm["t"])
    checks = {}
    _dominance(checks, p)
    grid, Qop, DQ, uPhi, _ = _hankel_bracket_data(p, t, gs)
    _norm_check(checks, Qop)
    Sop, Gop, Hop = _ops(p, "symplectic", grid, gs)
    _inv_margin(checks, Sop, "sigma_min_I_minus_2S", 2.0)
    lhs = block_det(_symplectic_M(Sop, Gop, Hop))
    bracket = 1.0 + 0.5 * uPhi
    return lhs, DQ * bracket, checks, {"D_Q": DQ, "bracket": bracket, "N": grid.size}


def _c16(p, prm, gs):
    _family(p, "hankel")
    t = float(prm["t"])
    offs = [float(o) for o in prm.get("a2_offsets", (8.0, 12.0, 16.0))]
    checks = {}
    _dominance(checks, p)
    grid, Qop, DQ, _, u1 = _hankel_bracket_data(p, t, gs)
    _norm_check(checks, Qop)
    bracket = 1.0 - u1
    rhs = DQ * bracket
    vals = []
    for off in offs:
        g2 = hankel_truncated_grid(p, t, t + off, gs)
        Sop, Gop, Hop = _ops(p, "orthogonal", g2, gs)
        if off == offs[-1]:
            _inv_margin(checks, Sop, "sigma_min_I_minus_S")
        vals.append(det2_regularized(_orthogonal_M(Sop, Gop, Hop, epsilon_operator(g2))))
    errs = [_rel(v, rhs) for v in vals]
    diffs = [abs(b - a) for a, b in zip(vals[:-1], vals[1:])]
    return vals[-1], rhs, checks, {"a2": [t + o for o in offs], "det2_truncated": vals,
                                   "rel_errors": errs, "successive_differences": diffs,
                                   "D_Q": DQ, "bracket": bracket}


def _wh_bracket_data(p, t, gs):
    """D_Q and the three brackets b1, b2, b3 on (-t, t)."""
    grid = wh_grid(t, gs)
    Wk = kn.wh_W(p, gs.inner)
    Qop = discretize(Wk, grid, "Q")
    DQ = fredholm_det(Qop)
    x, w = grid.nodes, grid.weights
    R = resolve(Qop, Wk.diff(x - t))                     # ((I-Q)^{-1} Q)(x, t)
    intQ = float(np.sum(w * Wk.diff(x - t)))
    inner = Wk.diff(x - t, "IW") - Wk.diff(-x - t, "IW")    # int_{-x}^{x} Q(z, t) dz
    b1 = 1.0 + 0.5 * float(np.sum(w * R))
    b2 = 1.0 - 0.5 * intQ - 0.5 * float(np.sum(w * inner * R))
    b3 = 1.0 - intQ - float(np.sum(w * inner * R))
    return grid, Qop, DQ, b1, b2, b3


def _c23(p, prm, gs):
    _family(p, "wiener-hopf")
    t = float(prm["t"])
    checks = {}
    grid, Qop, DQ, b1, b2, _ = _wh_bracket_data(p, t, gs)
    _norm_check(checks, Qop)
    Sop, Gop, Hop = _ops(p, "symplectic", grid, gs)
    _inv_margin(checks, Sop, "sigma_min_I_minus_2S", 2.0)
    lhs = block_det(_symplectic_M(Sop, Gop, Hop))
    return lhs, DQ * b1 * b2, checks, {"D_Q": DQ, "b1": b1, "b2": b2}


def _c26(p, prm, gs):
    _family(p, "wiener-hopf")
    t = float(prm["t"])
    checks = {}
    grid, Qop, DQ, _, _, b3 = _wh_bracket_data(p, t, gs)
    _norm_check(checks, Qop)
    Sop, Gop, Hop = _ops(p, "orthogonal", grid, gs)
    lhs = det2_regularized(_orthogonal_M(Sop, Gop, Hop, epsilon_operator(grid)))
    return lhs, DQ * b3, checks, {"D_Q": DQ, "b3": b3}


def wh_q(p, s, gs=GridSpec()):
    """q(s) = 2 ((I - Q)^{-1} Q)(-s, s) on (-s, s)."""
    Wk = kn.wh_W(p, gs.inner)
    grid = wh_grid(s, gs)
    Qop = discretize(Wk, grid)
    u = resolve(Qop, Wk.diff(grid.nodes - s))
    return 2.0 * float(nystrom_extend(Qop, u, Wk.diff(np.array([-2.0 * s])), [-s])[0])


def wh_omega(p, t, gs=GridSpec(), n_s=40):
    """omega(t) = int_0^t q(s) ds by an n_s-point Gauss rule."""
    g, w = legendre_rule(n_s)
    s = 0.5 * t * (g + 1.0)
    return float(sum(0.5 * t * wi * wh_q(p, si, gs) for si, wi in zip(s, w)))


def _c30(p, prm, gs):
    _family(p, "wiener-hopf")
    t = float(prm["t"])
    checks = {}
    _, Qop, _, b1, b2, _ = _wh_bracket_data(p, t, gs)
    _norm_check(checks, Qop)
    om = wh_omega(p, t, gs)
    return b1 * b2, math.cosh(0.5 * om) ** 2, checks, {"omega": om, "b1": b1, "b2": b2}


def _c31(p, prm, gs):
    _family(p, "wiener-hopf")
    t = float(prm["t"])
    checks = {}
    _, Qop, _, _, _, b3 = _wh_bracket_data(p, t, gs)
    _norm_check(checks, Qop)
    om = wh_omega(p, t, gs)
    return b3, math.exp(-om), checks, {"omega": om, "b3": b3}


def hankel_q(p, s, gs=GridSpec()):
    """q(s) = ((I - Q)^{-1} phi)(s) on (s, inf), extended to the endpoint."""
    grid = hankel_grid(p, s, gs)
    Qop = discretize(kn.hankel_Q(p, gs.inner), grid)
    u = resolve(Qop, lambda x: eval_phi(p, x))
    return float(nystrom_extend(Qop, u, lambda x: eval_phi(p, x), [s])[0])


def hankel_omega(p, t, gs=GridSpec(), n_s=12):
    """omega(t) = int_t^inf q(s) ds on s-panels graded toward the profile centre."""
    hi = max(t, p.centre) + gs.tail
    bps = graded_breaks(t, hi, p.centre, min(0.5, p.strip))
    g, w = legendre_rule(n_s)
    total = 0.0
    for lo, up in zip(bps[:-1], bps[1:]):
        h = 0.5 * (up - lo)
        for gi, wi in zip(g, w):
            total += h * wi * hankel_q(p, h * gi + 0.5 * (up + lo), gs)
    return total


def _c17aux(p, prm, gs):
    _family(p, "hankel")
    t = float(prm["t"])
    checks = {}
    _dominance(checks, p)
    _, Qop, _, uPhi, u1 = _hankel_bracket_data(p, t, gs)
    _norm_check(checks, Qop)
    om = hankel_omega(p, t, gs)
    pairs = {"cosh": (1.0 + 0.5 * uPhi, math.cosh(0.5 * om) ** 2),
             "exp": (1.0 - u1, math.exp(-om))}
    worst = max(pairs, key=lambda k: _rel(*pairs[k]))
    l, r = pairs[worst]
    return l, r, checks, {"omega": om, "worst_form": worst,
                          "forms": {k: {"lhs": a, "rhs": b, "rel": _rel(a, b)}
                                    for k, (a, b) in pairs.items()}}


def _c28(p, prm, gs):
    _family(p, "wiener-hopf")
    t = float(prm["t"])
    L = float(prm.get("window", 8.0))
    checks = {}
    grid = wh_grid(t, gs)
    Qop = discretize(kn.wh_W(p, gs.inner), grid)
    _norm_check(checks, Qop)
    line = gauss_legendre(gs.n, -L, L)
    edge = float(eval_phi(p, L))
    _hyp(checks, "phi_at_window_edge", edge, abs(edge) < 1e-12)
    lhs = fredholm_det(Qop)
    rhs = fredholm_det(discretize(kn.sine_V(p, t), line))
    return lhs, rhs, checks, {"window": L}


def _e17(p, prm, gs):
    rng = np.random.default_rng(int(prm.get("seed", 0)))
    d = int(prm.get("dim", 6))
    K = rng.standard_normal((d, d))
    K *= float(prm.get("norm", 0.4)) / np.linalg.norm(K, 2)
    alpha = rng.standard_normal(d)
    beta = rng.standard_normal(d)
    if prm.get("degenerate", False):
        # beta chosen so that <beta, (I-K)^{-1} alpha> = -1 exactly (up to rounding)
        v = np.linalg.solve(np.eye(d) - K, alpha)
        beta = -v / float(v @ v)
    f = rng.standard_normal(d)
    g = rng.standard_normal(d)
    I = np.eye(d)
    checks = {}
    _hyp(checks, "norm_K", np.linalg.norm(K, 2), np.linalg.norm(K, 2) < 1.0)
    v = np.linalg.solve(I - K, alpha)
    denom = 1.0 + float(beta @ v)
    scale = 1.0 + abs(float(beta @ v))
    _hyp(checks, "rank_one_denominator", denom, abs(denom) > 1e-10 * scale)
    if abs(denom) <= 1e-10 * scale:
        return math.nan, math.nan, checks, {"degenerate": True}
    # dense oracle: explicit inverse of the perturbed matrix
    lhs = float(g @ np.linalg.inv(I - K + np.outer(alpha, beta)) @ f)
    # formula: (I-K)^{-1} - (I-K)^{-1}(alpha x beta)(I-K)^{-1} / (1 + <beta, (I-K)^{-1} alpha>)
    Rf = np.linalg.solve(I - K, f)
    Rtg = np.linalg.solve((I - K).T, g)
    rhs = float(g @ Rf - (Rtg @ alpha) * (beta @ Rf) / denom)
    return lhs, rhs, checks, {"degenerate": False, "denominator": denom}


def _probe_points(ends, per=3):
    pts = []
    for lo, hi in zip(ends[0::2], ends[1::2]):
        pts.extend(lo + (hi - lo) * np.array([0.13, 0.5, 0.87][:per]))
    return np.array(pts)


def _z7(p, prm, gs):
    _family(p, "hankel", "wiener-hopf")
    ends = np.asarray(prm["endpoints"], dtype=float)
    grid = multi_interval_grid(ends, gs.n)
    S, G, H = kn.main_kernels(p, "symplectic", gs.inner)
    xs = _probe_points(ends)
    z, w = grid.nodes, grid.weights
    Szx, Hzy = S.matrix(z, xs), H.matrix(z, xs)           # S(z, x), H(z, y)
    Hxz, Szy = H.matrix(xs, z), S.matrix(z, xs)
    Gzy = G.matrix(z, xs)
    sgn = np.array([(-1) ** k for k in range(1, ends.size + 1)], dtype=float)
    Hxa = H.matrix(xs, ends)
    Hay = H.matrix(ends, xs)
    Sya = S.matrix(xs, ends)                             # S(y, a_k) = S*(a_k, y)
    # S*H = HS - sum (-1)^k H(x,a_k) H(a_k,y)
    l1 = Szx.T @ (w[:, None] * Hzy)
    r1 = Hxz @ (w[:, None] * Szy) - (Hxa * sgn) @ Hay
    # HG = (S*)^2 + sum (-1)^k H(x,a_k) S*(a_k,y);  (S*)^2(x,y) = int S(z,x) S(y,z) dz
    l2 = Hxz @ (w[:, None] * Gzy)
    r2 = Szx.T @ (w[:, None] * S.matrix(xs, z).T) + (Hxa * sgn) @ Sya.T
    return _worst_probe([("S*H", l1, r1), ("HG", l2, r2)], xs)


def _worst_probe(cases, xs, ys=None):
    ys = xs if ys is None else ys
    best = None
    per = {}
    scale = max(max(np.max(np.abs(l)), np.max(np.abs(r))) for _, l, r in cases)
    for name, l, r in cases:
        # entries that are tiny compared with the kernel scale carry no relative information
        mask = np.maximum(np.abs(l), np.abs(r)) > 1e-3 * scale
        rel = np.where(mask, np.abs(l - r) / np.maximum(np.maximum(np.abs(l), np.abs(r)), 1e-300), 0.0)
        idx = np.unravel_index(int(np.argmax(rel)), rel.shape)
        per[name] = {"max_rel": float(rel[idx]), "max_abs": float(np.max(np.abs(l - r)))}
        if best is None or rel[idx] > best[0]:
            best = (rel[idx], float(l[idx]), float(r[idx]), name, idx)
    _, lv, rv, name, idx = best
    where = [float(xs[idx[0]])] + ([float(ys[idx[1]])] if len(idx) > 1 else [])
    return lv, rv, {}, {"worst_identity": name, "worst_probe": where, "per_identity": per,
                        "kernel_scale": scale}


def _probe_functions():
    """(f, f') pairs: y^i exp(-(y-1)^2), i = 0..4."""
    out = []
    for i in range(5):
        def f(y, i=i):
            return y ** i * np.exp(-(y - 1.0) ** 2)

        def df(y, i=i):
            e = np.exp(-(y - 1.0) ** 2)
            lead = i * y ** (i - 1) if i else 0.0 * y
            return (lead - 2.0 * (y - 1.0) * y ** i) * e
        out.append((f, df))
    return out


def _z12(p, prm, gs):
    _family(p, "hankel", "wiener-hopf")
    ends = np.asarray(prm["endpoints"], dtype=float)
    grid = multi_interval_grid(ends, gs.n)
    S, G, H = kn.main_kernels(p, "symplectic", gs.inner)
    xs = _probe_points(ends)
    z, w = grid.nodes, grid.weights
    sgn = np.array([(-1) ** k for k in range(1, ends.size + 1)], dtype=float)
    Hxz, Szx, Sxz, Gxz = H.matrix(xs, z), S.matrix(z, xs).T, S.matrix(xs, z), G.matrix(xs, z)
    Hxa, Sxa = H.matrix(xs, ends), S.matrix(xs, ends)
    fz = np.array([f(z) for f, _ in _probe_functions()]).T      # (nodes, probes)
    dfz = np.array([df(z) for _, df in _probe_functions()]).T
    fa = np.array([f(ends) for f, _ in _probe_functions()]).T    # (2m, probes)
    # HD = S* + sum (-1)^k H (delta_a x delta_a)
    l1 = Hxz @ (w[:, None] * dfz)
    r1 = Szx @ (w[:, None] * fz) + (Hxa * sgn) @ fa
    # SD = DS* + sum (-1)^k DH (delta_a x delta_a), with DS* = G and DH = S
    l2 = Sxz @ (w[:, None] * dfz)
    r2 = Gxz @ (w[:, None] * fz) + (Sxa * sgn) @ fa
    return _worst_probe([("HD", l1, r1), ("SD", l2, r2)], xs, np.arange(fz.shape[1]))


def epsilon_composition_residual(p, endpoints, n=48, gs=GridSpec()):
    """Max relative gap between S* eps D f and S* f + (1/2) sum sigma_l(k) H(x, a_l) f(a_k).

    The left side is assembled by brute force: eps D f from the product
    integration matrix of the jump kernel applied to f' at the nodes, then
    one more quadrature with S(y, x).  Returns (residual, per-probe list).
    """
    ends = np.asarray(endpoints, dtype=float)
    m = ends.size // 2
    grid = multi_interval_grid(ends, n)
    S, _, H = kn.main_kernels(p, "orthogonal", gs.inner)
    xs = _probe_points(ends)
    z, w = grid.nodes, grid.weights
    E = epsilon_operator(grid)
    Szx = S.matrix(z, xs)                       # S(z, x)
    Hxa = H.matrix(xs, ends)
    sig = np.array([[sigma_sign(l, k, m) for k in range(1, 2 * m + 1)]
                    for l in range(1, 2 * m + 1)], dtype=float)
    out = []
    for f, df in _probe_functions():
        epsDf = E.K @ (w * df(z))
        lhs = Szx.T @ (w * epsDf)
        rhs = Szx.T @ (w * f(z)) + 0.5 * Hxa @ (sig @ f(ends))
        scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-300)
        out.append(float(np.max(np.abs(lhs - rhs)) / scale))
    return max(out), out


def _tau(Sk, Hk, grid, t, checks):
    St2 = discretize(Sk, grid).T.scaled(2.0)
    _inv_margin(checks, St2, "sigma_min_I_minus_2S")
    tt = np.array([t])
    u = resolve(St2, Hk.matrix(grid.nodes, tt)[:, 0])
    return float(nystrom_extend(St2, u, Hk.matrix(tt, tt)[:, 0], tt)[0])


def _z26(p, prm, gs):
    _family(p, "hankel")
    t = float(prm["t"])
    checks = {}
    _dominance(checks, p)
    S, _, H = kn.main_kernels(p, "symplectic", gs.inner)
    tau = _tau(S, H, hankel_grid(p, t, gs), t, checks)
    return tau, 0.0, checks, {"tau": tau, "quadratic": tau * (1.0 + tau),
                              "zero_branch": abs(tau) < 0.5}


def _z47(p, prm, gs):
    _family(p, "bessel-mult")
    t = float(prm["t"])
    checks = {}
    tau = _tau(kn.bessel_S(p.alpha), kn.bessel_H(p.alpha), bessel_grid(t, gs), t, checks)
    return tau, 0.0, checks, {"tau": tau, "quadratic": tau * (1.0 - tau),
                              "zero_branch": abs(tau) < 0.5}


def _z48(p, prm, gs):
    _family(p, "bessel-mult")
    t = float(prm["t"])
    checks = {}
    grid = bessel_grid(t, gs)
    Qop = discretize(kn.bessel_Q(p.alpha), grid)
    _norm_check(checks, Qop)
    Sop = discretize(kn.bessel_S(p.alpha), grid)
    Gop = discretize(kn.bessel_G(p.alpha), grid)
    Hop = discretize(kn.bessel_H(p.alpha), grid)
    _inv_margin(checks, Sop, "sigma_min_I_minus_2S", 2.0)
    lhs = block_det(_symplectic_M(Sop, Gop, Hop))
    DQ = fredholm_det(Qop)
    u = resolve(Qop, lambda x: eval_phi(p, x))
    bracket = 1.0 + 0.5 * float(np.sum(grid.weights * u * eval_Phi(p, grid.nodes)))
    return lhs, DQ * bracket, checks, {"D_Q": DQ, "bracket": bracket}


def _a6(p, prm, gs):
    """Signed Pfaffian by elimination vs sqrt(det2) with the homotopy sign."""
    cls = prm.get("cls", "orthogonal")
    t = float(prm["t"])
    grid = _canonical_grid(p, t, gs)
    Sop, Gop, Hop = _ops(p, cls, grid, gs)
    checks = {}
    if cls == "orthogonal":
        blocks = orthogonal_K(Sop, Gop, Hop, epsilon_operator(grid))
    else:
        blocks = symplectic_K(Sop, Gop, Hop)
    direct = discrete_fredholm_pfaffian(*blocks)
    M = assemble_minus_JK(*blocks, cls=cls)
    pf = pf_via_sqrt_det(M)
    return direct, pf, checks, {"pf_elimination": direct, "pf_sqrt_det": pf,
                                "det2": det2_regularized(M), "cls": cls}


_CHECKERS = {
    IdentityId.C3: _c3, IdentityId.C7: _c7, IdentityId.C11: _c11, IdentityId.C16: _c16,
    IdentityId.C23: _c23, IdentityId.C26: _c26, IdentityId.C30: _c30, IdentityId.C31: _c31,
    IdentityId.C17AUX: _c17aux, IdentityId.C28: _c28, IdentityId.E17: _e17,
    IdentityId.Z7: _z7, IdentityId.Z12: _z12, IdentityId.Z26: _z26, IdentityId.Z47: _z47,
    IdentityId.Z48: _z48, IdentityId.A6: _a6,
}

_ABS_METRIC = {IdentityId.Z26, IdentityId.Z47}
_GRIDLESS = {IdentityId.E17}

_DEFAULT_PROFILE = {
    "C3": sech, "C7": sech, "C11": sech, "C16": sech, "C17AUX": sech, "Z7": sech,
    "Z12": sech, "Z26": sech, "A6": sech,
    "C23": gaussian_even, "C26": gaussian_even, "C30": gaussian_even, "C31": gaussian_even,
    "C28": gaussian_even, "E17": sech, "Z47": bessel, "Z48": bessel,
}


def default_profile(ident):
    return _DEFAULT_PROFILE[IdentityId.parse(ident).value]()


def default_params(ident):
    ident = IdentityId.parse(ident)
    if ident in (IdentityId.C3, IdentityId.C7, IdentityId.Z7, IdentityId.Z12):
        return {"endpoints": (0.0, 1.0, 1.5, 2.5)}
    if ident is IdentityId.E17:
        return {"seed": 0, "dim": 6}
    if ident in (IdentityId.C23, IdentityId.C26, IdentityId.C30, IdentityId.C31,
                 IdentityId.C28, IdentityId.Z47, IdentityId.Z48):
        return {"t": 1.0}
    return {"t": 0.0}


def _params_for_report(p, prm, gs, ident):
    d = {"profile": p.as_dict() if p is not None else None}
    d.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in prm.items()})
    if ident not in _GRIDLESS:
        d["grid"] = gs.as_dict()
    return d


def check(ident, profile=None, params=None, grid=None, tol=None):
    """Run one identity check; see the module docstring for the scheme."""
    ident = IdentityId.parse(ident)
    p = profile if profile is not None else default_profile(ident)
    if not isinstance(p, Profile):
        raise ContractViolation("profile must be a Profile")
    prm = dict(default_params(ident))
    prm.update(params or {})
    gs = grid if grid is not None else GridSpec()
    tol = default_tolerance(ident) if tol is None else float(tol)
    if not tol > 0:
        raise ContractViolation("tolerance must be positive")
    metric = "abs" if ident in _ABS_METRIC else "rel"
    fn = _CHECKERS[ident]
    rep_params = _params_for_report(p, prm, gs, ident)
    try:
        lhs, rhs, checks, details = fn(p, prm, gs)
    except (HypothesisViolation, SingularOperatorError, DomainViolation) as exc:
        return ResidualReport(ident, rep_params, math.nan, math.nan, math.nan, math.nan,
                              metric, tol, {"error": {"value": math.nan, "ok": False,
                                                      "message": str(exc)}},
                              False, STATUS_HYP, {"exception": type(exc).__name__})
    hyp_ok = all(v.get("ok", True) for v in checks.values())
    if not hyp_ok:
        return ResidualReport(ident, rep_params, lhs, rhs, math.nan, math.nan, metric, tol,
                              checks, False, STATUS_HYP, details)
    absr = abs(lhs - rhs)
    relr = _rel(lhs, rhs)
    res = absr if metric == "abs" else relr
    converged = True
    if ident not in _GRIDLESS:
        gr = gs.refined()
        l2, r2, _, d2 = fn(p, prm, gr)
        res2 = abs(l2 - r2) if metric == "abs" else _rel(l2, r2)
        drift = abs(l2 - lhs) if metric == "abs" else _rel(l2, lhs)
        details["refined"] = {"n": gr.n, "lhs": l2, "rhs": r2, "residual": res2,
                              "lhs_drift": drift}
        converged = bool(res2 < tol and drift < tol)
    ok = res < tol and converged
    return ResidualReport(ident, rep_params, float(lhs), float(rhs), float(absr), float(relr),
                          metric, tol, checks, converged, STATUS_PASS if ok else STATUS_FAIL,
                          details)


def _task_key(task):
    ident, p, prm, gs, tol = task
    blob = json.dumps([p.as_dict() if p is not None else None, _jsonable(prm or {})],
                      sort_keys=True, default=str)
    return (IdentityId.parse(ident).value, hashlib.sha1(blob.encode()).hexdigest())


def max_workers():
    env = os.environ.get("PFLAB_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ContractViolation("PFLAB_THREADS must be an integer") from None
    return cap


def run_suite(tasks, workers=None, sort=True):
    """Run (id, profile, params, grid, tol) tasks concurrently.

    With sort=True reports are ordered by (id, parameter hash); otherwise
    they follow the task order.  Completion order never matters.
    """
    tasks = [tuple(t) + (None,) * (5 - len(t)) for t in tasks]
    workers = min(workers or max_workers(), max(1, len(tasks)))
    if workers == 1:
        reports = [check(*t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            reports = list(ex.map(lambda t: check(*t), tasks))
    if sort:
        order = sorted(range(len(tasks)), key=lambda i: _task_key(tasks[i]))
        reports = [reports[i] for i in order]
    return reports
