"""Scalar profiles phi, their antiderivatives, Fourier data and symbols.

Every operator in the package is built from one Profile.  The Hankel
kinds (sech, shifted-sech) live on half-lines, the Wiener-Hopf kinds
(gaussian-even, indicator-smoothed) are even and bounded by 1 in
absolute value, and the bessel kind carries only the order alpha.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np

from .errors import ContractViolation, DomainViolation
from .quadrature import antiderivative, legendre_rule, uniform_panels

__all__ = [
    "Profile", "SpectralData", "KINDS", "sech", "shifted_sech",
    "gaussian_even", "indicator_smoothed", "bessel", "eval_phi", "eval_dphi",
    "eval_Phi", "reflection_coefficient", "reflection_derivative", "symbol_s",
    "bessel_j", "bessel_j_integral", "spectral_constants", "dominance_ratio",
    "profile_from_dict",
]

KINDS = {
    "sech": "hankel",
    "shifted-sech": "hankel",
    "gaussian-even": "wiener-hopf",
    "indicator-smoothed": "wiener-hopf",
    "bessel": "bessel-mult",
}

# exp(-41.5) ~ 1e-18: beyond this many decay lengths a profile is zero
_TAIL = 41.5


@dataclass(frozen=True)
class Profile:
    """phi and its parameters.

    sech:               c sech(a (x - x0))
    shifted-sech:       same formula, x0 expected nonzero
    gaussian-even:      c exp(-x^2)
    indicator-smoothed: (c/2) (tanh(a(x + x0)) - tanh(a(x - x0))),
                        a smoothed c * 1_{|x| < x0}
    bessel:             J_{alpha-1}(sqrt x) / (2 sqrt x)
    """
    kind: str
    c: float = 0.0
    a: float = 1.0
    x0: float = 0.0
    alpha: float = 0.0
    family: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown profile kind {self.kind!r}")
        fam = KINDS[self.kind]
        object.__setattr__(self, "family", fam)
        for name in ("c", "a", "x0", "alpha"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ContractViolation(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if fam == "hankel" and not self.a > 2.0:
            raise ContractViolation("hankel profiles need decay rate a > 2")
        if fam == "wiener-hopf":
            if self.kind == "indicator-smoothed" and not (self.a > 0 and self.x0 > 0):
                raise ContractViolation("indicator-smoothed needs a > 0 and half-width x0 > 0")
            if not abs(self.c) < 1.0:
                raise ContractViolation("wiener-hopf profiles need sup|phi| < 1")
        if fam == "bessel-mult" and not self.alpha > 1.0:
            raise ContractViolation("bessel profiles need alpha > 1")

    @property
    def is_zero(self):
        return self.family != "bessel-mult" and self.c == 0.0

    @property
    def is_even(self):
        return self.kind in ("gaussian-even", "indicator-smoothed") or (
            self.kind == "sech" and self.x0 == 0.0)

    @property
    def centre(self):
        return self.x0 if self.family == "hankel" else 0.0

    @property
    def strip(self):
        """Distance from the real axis to the nearest complex singularity of phi."""
        if self.family == "hankel":
            return math.pi / (2 * self.a)
        if self.kind == "indicator-smoothed":
            return math.pi / (2 * self.a)
        return 1.0

    @property
    def support_radius(self):
        """phi is below ~1e-18 (relative to c) outside centre +- this radius."""
        if self.kind in ("sech", "shifted-sech"):
            return (_TAIL + math.log(2.0)) / self.a
        if self.kind == "gaussian-even":
            return math.sqrt(_TAIL)
        if self.kind == "indicator-smoothed":
            return self.x0 + (_TAIL + math.log(2.0)) / (2 * self.a)
        raise ContractViolation("bessel profiles have no decaying tail")

    def scaled(self, gamma):
        return Profile(self.kind, self.c * gamma, self.a, self.x0, self.alpha)

    def as_dict(self):
        return {"kind": self.kind, "c": self.c, "a": self.a, "x0": self.x0,
                "alpha": self.alpha, "family": self.family}


def sech(c=0.1, a=3.0):
    return Profile("sech", c, a)


def shifted_sech(c=0.03, a=3.0, x0=0.5):
    return Profile("shifted-sech", c, a, x0)


def gaussian_even(c=0.5):
    return Profile("gaussian-even", c)


def indicator_smoothed(c=0.5, a=4.0, x0=1.0):
    return Profile("indicator-smoothed", c, a, x0)


def bessel(alpha=1.5):
    return Profile("bessel", 0.0, 1.0, 0.0, alpha)


def profile_from_dict(d):
    kind = d["kind"]
    defaults = {"sech": sech(), "shifted-sech": shifted_sech(),
                "gaussian-even": gaussian_even(), "indicator-smoothed": indicator_smoothed(),
                "bessel": bessel()}
    if kind not in defaults:
        raise ContractViolation(f"unknown profile kind {kind!r}")
    base = defaults[kind]
    return Profile(kind, float(d.get("c", base.c)), float(d.get("a", base.a)),
                   float(d.get("x0", base.x0)), float(d.get("alpha", base.alpha)))


def _sech(u):
    e = np.exp(-np.abs(u))
    return 2.0 * e / (1.0 + e * e)


def eval_phi(p, x):
    x = np.asarray(x, dtype=float)
    if p.kind in ("sech", "shifted-sech"):
        return p.c * _sech(p.a * (x - p.x0))
    if p.kind == "gaussian-even":
        return p.c * np.exp(-x * x)
    if p.kind == "indicator-smoothed":
        return 0.5 * p.c * (np.tanh(p.a * (x + p.x0)) - np.tanh(p.a * (x - p.x0)))
    # bessel
    r = np.sqrt(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        return bessel_j(p.alpha - 1.0, r) / (2.0 * r)


def eval_dphi(p, x):
    x = np.asarray(x, dtype=float)
    if p.kind in ("sech", "shifted-sech"):
        u = p.a * (x - p.x0)
        return -p.c * p.a * np.tanh(u) * _sech(u)
    if p.kind == "gaussian-even":
        return -2.0 * x * p.c * np.exp(-x * x)
    if p.kind == "indicator-smoothed":
        s1, s2 = _sech(p.a * (x + p.x0)), _sech(p.a * (x - p.x0))
        return 0.5 * p.c * p.a * (s1 * s1 - s2 * s2)
    raise ContractViolation("derivative not provided for bessel profiles")


def _hankel_top(p):
    return p.x0 + p.support_radius


def _phi_step(p):
    return min(0.5, p.strip)


def eval_Phi(p, x):
    """Hankel: int_x^inf phi.  Bessel: int_0^x J_{alpha+1}(sqrt z)/(2 sqrt z) dz."""
    x = np.asarray(x, dtype=float)
    if p.family == "wiener-hopf":
        raise ContractViolation("Phi is not defined for wiener-hopf profiles")
    if p.family == "bessel-mult":
        if np.any(x < 0):
            raise ContractViolation("bessel Phi needs x >= 0")
        return bessel_j_integral(p.alpha + 1.0, np.sqrt(x))
    if p.c == 0.0:
        return np.zeros_like(x)
    top = _hankel_top(p)
    return -antiderivative(lambda s: eval_phi(p, s), x, top, step=_phi_step(p), n=20)


def eval_phi_integral(p, x):
    """Bessel only: int_0^x phi = int_0^{sqrt x} J_{alpha-1}(s) ds."""
    if p.family != "bessel-mult":
        raise ContractViolation("only defined for bessel profiles")
    x = np.asarray(x, dtype=float)
    return bessel_j_integral(p.alpha - 1.0, np.sqrt(x))


# ---------------------------------------------------------------- Bessel J

def bessel_j(alpha, x):
    """J_alpha(x) from its power series.

    Terms are accumulated until they fall below 1e-17 of the partial sum.
    Arguments above 40, or where the largest term exceeds 1e6 (so more
    than six digits would cancel), are refused.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ContractViolation("bessel_j needs x >= 0")
    if np.any(x > 40.0):
        raise DomainViolation("bessel_j series refused for x > 40", float(np.max(x)))
    h = 0.5 * x
    with np.errstate(divide="ignore", invalid="ignore"):
        lead = np.where(h > 0, np.exp(alpha * np.log(np.where(h > 0, h, 1.0)) - math.lgamma(alpha + 1.0)), 0.0)
    if alpha == 0:
        lead = np.where(h > 0, lead, 1.0)
    if alpha + 1.0 <= 0 and alpha == int(alpha):
        raise ContractViolation("negative integer orders are not supported")
    if math.gamma(alpha + 1.0) < 0:
        lead = -lead
    term = lead.copy()
    total = lead.copy()
    peak = np.abs(lead)
    q = -h * h
    k = 0
    while True:
        k += 1
        term = term * q / (k * (k + alpha))
        total = total + term
        peak = np.maximum(peak, np.abs(term))
        if k > 2 and np.all(np.abs(term) <= 1e-17 * np.abs(total) + 1e-320):
            break
        if k > 400:
            break
    if np.any(peak > 1e6):
        raise DomainViolation("bessel_j series would lose more than 6 digits", float(np.max(x)))
    return total


def bessel_j_integral(order, upper, n=48):
    """int_0^upper J_order(s) ds by Gauss-Legendre in s = upper * v^4.

    The quartic map absorbs the algebraic s^order behaviour at 0.
    """
    upper = np.asarray(upper, dtype=float)
    g, w = legendre_rule(n)
    v = 0.5 * (g + 1.0)
    wv = 0.5 * w
    u = upper.reshape(-1, 1)
    s = u * v[None, :] ** 4
    jac = u * 4.0 * v[None, :] ** 3
    vals = bessel_j(order, s) * jac
    return (vals @ wv).reshape(upper.shape)


# ---------------------------------------------------------------- Fourier data

def _y_rule(p):
    """Composite rule on the symmetric window around the profile centre."""
    R = p.support_radius
    bps = uniform_panels(p.centre - R, p.centre + R, 0.25)
    g, w = legendre_rule(24)
    lo = np.array(bps[:-1])
    hi = np.array(bps[1:])
    h = 0.5 * (hi - lo)
    y = (h[:, None] * g[None, :] + 0.5 * (hi + lo)[:, None]).ravel()
    wy = (h[:, None] * w[None, :]).ravel()
    return y, wy


def _fourier(p, lam, moment=0):
    lam = np.asarray(lam, dtype=float)
    if p.is_zero:
        return np.zeros(lam.shape, dtype=complex)
    y, wy = _y_rule(p)
    f = wy * eval_phi(p, y) * (y ** moment if moment else 1.0)
    flat = lam.ravel()
    out = np.empty(flat.size, dtype=complex)
    for s in range(0, flat.size, 512):
        L = flat[s:s + 512]
        out[s:s + 512] = np.exp(-1j * np.outer(L, y)) @ f
    return out.reshape(lam.shape)


def reflection_coefficient(p, lam):
    """r(lambda) = -i int phi(y) exp(-i lambda y) dy."""
    if p.family != "hankel":
        raise ContractViolation("reflection coefficient is a hankel-class object")
    return -1j * _fourier(p, lam)


def reflection_derivative(p, lam):
    """r'(lambda) from the differentiated integral -int y phi(y) exp(-i lambda y) dy."""
    if p.family != "hankel":
        raise ContractViolation("reflection coefficient is a hankel-class object")
    return -_fourier(p, lam, moment=1)


def _log_symbol(p, lam):
    """ln(1 - |r|^2) (hankel) or ln(1 - phi) (wiener-hopf); domain-checked."""
    lam = np.asarray(lam, dtype=float)
    if p.family == "hankel":
        r = reflection_coefficient(p, lam)
        arg = 1.0 - np.abs(r) ** 2
    elif p.family == "wiener-hopf":
        arg = 1.0 - eval_phi(p, lam)
    else:
        raise ContractViolation("symbol defined only for hankel and wiener-hopf classes")
    bad = np.flatnonzero(~(arg > 0))
    if bad.size:
        raise DomainViolation("symbol logarithm argument not positive",
                              float(np.ravel(lam)[bad[0]]))
    return np.log(arg)


@dataclass(frozen=True)
class _LambdaRule:
    nodes: np.ndarray
    weights: np.ndarray
    logs: np.ndarray
    window: float


@lru_cache(maxsize=32)
def _lambda_rule(p):
    lam_edge = 1.0
    while True:
        edge = _log_symbol(p, np.array([-lam_edge, lam_edge]))
        if np.all(np.abs(edge) < 1e-14):
            break
        lam_edge *= 1.25
        if lam_edge > 1e4:
            raise DomainViolation("symbol does not decay on any desk-scale window", lam_edge)
    bps = uniform_panels(-lam_edge, lam_edge, 0.125)
    g, w = legendre_rule(24)
    lo, hi = np.array(bps[:-1]), np.array(bps[1:])
    h = 0.5 * (hi - lo)
    lam = (h[:, None] * g[None, :] + 0.5 * (hi + lo)[:, None]).ravel()
    wl = (h[:, None] * w[None, :]).ravel()
    L = _log_symbol(p, lam)
    for arr in (lam, wl, L):
        arr.setflags(write=False)
    return _LambdaRule(lam, wl, L, lam_edge)


def _symbol_prefactor(p):
    return -1.0 / (2 * np.pi) if p.family == "hankel" else -1.0 / np.pi


def symbol_s(p, x):
    """s(x) by quadrature over a lambda-window where the log-symbol is < 1e-14."""
    x = np.asarray(x, dtype=float)
    if p.family not in ("hankel", "wiener-hopf"):
        raise ContractViolation("symbol defined only for hankel and wiener-hopf classes")
    if p.is_zero:
        return np.zeros_like(x)
    rule = _lambda_rule(p)
    if np.any(np.abs(x) > 64):
        raise ContractViolation("symbol_s evaluated only for |x| <= 64")
    fl = rule.weights * rule.logs
    flat = x.ravel()
    out = np.empty(flat.size, dtype=complex)
    for s in range(0, flat.size, 256):
        out[s:s + 256] = np.exp(1j * np.outer(flat[s:s + 256], rule.nodes)) @ fl
    out *= _symbol_prefactor(p)
    if out.size and np.max(np.abs(out.imag)) >= 1e-10:
        raise DomainViolation("symbol s(x) has a non-negligible imaginary part",
                              float(np.max(np.abs(out.imag))))
    return out.real.reshape(x.shape)


@dataclass(frozen=True)
class SpectralData:
    lambda_grid: np.ndarray
    r_values: np.ndarray        # hankel: r(lambda); wiener-hopf: None
    phi_hat_values: np.ndarray  # wiener-hopf: phi(lambda); hankel: None
    x_grid: np.ndarray
    s_values: np.ndarray        # s on x_grid
    s_values_neg: np.ndarray    # s on -x_grid
    s0: float
    kappa: float
    winding: float
    boundary_value: complex

    def as_dict(self):
        return {"s0": self.s0, "kappa": self.kappa, "winding": self.winding,
                "boundary_value": [float(np.real(self.boundary_value)),
                                   float(np.imag(self.boundary_value))]}


@lru_cache(maxsize=32)
def spectral_constants(p):
    if p.family not in ("hankel", "wiener-hopf"):
        raise ContractViolation("spectral constants exist for hankel and wiener-hopf classes")
    if p.is_zero:
        z = np.zeros(1)
        return SpectralData(z, z.astype(complex) if p.family == "hankel" else None,
                            z if p.family != "hankel" else None, z, z, z, 0.0, 0.0, 0.0,
                            0j if p.family == "hankel" else 0.0)
    rule = _lambda_rule(p)
    s0 = float(symbol_s(p, 0.0))

    # kappa: extend the x-range in blocks of 8 until the integrand is negligible
    g, w = legendre_rule(20)
    xs, ws, sp, sm = [], [], [], []
    top = 0.0
    scale = max(s0 * s0, 1e-300)
    while True:
        bps = uniform_panels(top, top + 8.0, 0.5)
        lo, hi = np.array(bps[:-1]), np.array(bps[1:])
        h = 0.5 * (hi - lo)
        x = (h[:, None] * g[None, :] + 0.5 * (hi + lo)[:, None]).ravel()
        wx = (h[:, None] * w[None, :]).ravel()
        a, b = symbol_s(p, x), symbol_s(p, -x)
        xs.append(x), ws.append(wx), sp.append(a), sm.append(b)
        top += 8.0
        tail = np.max(np.abs(x * a * b))
        if tail < 1e-12 * scale * 1e-4 or top >= 64.0:
            break
    x = np.concatenate(xs)
    wx = np.concatenate(ws)
    splus, sminus = np.concatenate(sp), np.concatenate(sm)
    kappa = float(np.sum(wx * x * splus * sminus))

    if p.family == "hankel":
        lam = rule.nodes
        r = reflection_coefficient(p, lam)
        if np.any(r == 0):
            raise DomainViolation("r vanishes on the lambda grid; winding undefined",
                                  float(lam[np.flatnonzero(r == 0)[0]]))
        rp = reflection_derivative(p, lam)
        winding = float(np.sum(rule.weights * np.imag(rp / r) * rule.logs) / (2 * np.pi))
        r0 = complex(reflection_coefficient(p, 0.0))
        return SpectralData(lam, r, None, x, splus, sminus, s0, kappa, winding, r0)
    lam = rule.nodes
    return SpectralData(lam, None, eval_phi(p, lam), x, splus, sminus, s0, kappa, 0.0,
                        float(eval_phi(p, 0.0)))


def dominance_ratio(p, xs=None):
    """max over samples of |phi|/e^{-a|x|} and |phi'|/e^{-a|x|}; <= 1 means dominated."""
    if p.family != "hankel":
        raise ContractViolation("dominance is a hankel-class hypothesis")
    xs = np.arange(-5.0, 6.0) if xs is None else np.asarray(xs, dtype=float)
    env = np.exp(-p.a * np.abs(xs))
    return float(max(np.max(np.abs(eval_phi(p, xs)) / env),
                     np.max(np.abs(eval_dphi(p, xs)) / env)))
