"""Kernel evaluators for the Hankel, Wiener-Hopf and Bessel families.

A Kernel is called pointwise, k(x, y) with broadcasting, or sampled on a
tensor grid with k.matrix(xs, ys).  Composition integrals over u are done
with an inner rule that is independent of any outer Nystrom grid.

For the Hankel family the three building blocks are the feature maps
    F(x)_k = phi(x + u_k) sqrt(w_k),  D(x)_k = phi'(x + u_k) sqrt(w_k),
    P(x)_k = Phi(x + u_k) sqrt(w_k),
so that int_0^inf phi(x+u) phi(u+y) du ~ F(x) . F(y), and so on.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .profiles import (Profile, bessel_j, eval_dphi, eval_phi, eval_Phi,
                       eval_phi_integral, bessel as bessel_profile)
from .quadrature import legendre_rule, uniform_panels

__all__ = [
    "Kernel", "InnerRule", "hankel_Q", "hankel_S_symplectic", "hankel_S_orthogonal",
    "hankel_G", "hankel_H", "hankel_H_literal", "wh_Q", "wh_W", "wh_S_symplectic",
    "wh_S_orthogonal", "wh_G", "wh_H", "sine_V", "epsilon_kernel", "bessel_Q",
    "bessel_S", "bessel_G", "bessel_H", "main_kernels", "zero_kernel",
]

CLASSES = ("symplectic", "orthogonal")


@dataclass(frozen=True)
class InnerRule:
    """Composite Gauss-Legendre rule for composition integrals.

    n nodes per panel; panel width defaults to min(0.5, strip of phi).
    """
    n: int = 20
    width: float = 0.0


def _dot(A, B, outer):
    return A @ B.T if outer else np.sum(A * B, axis=1)


def _prod(a, b, outer):
    return np.multiply.outer(a, b) if outer else a * b


def _ones_like_pair(a, b, outer):
    return np.ones((a.size, b.size)) if outer else np.ones(a.size)


class Kernel:
    """Base evaluator.  Subclasses implement _eval(x, y, outer)."""

    family = ""
    cls = ""
    role = ""
    profile = None

    def __call__(self, x, y):
        X, Y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = self._eval(X.ravel(), Y.ravel(), False)
        return np.asarray(out, dtype=float).reshape(X.shape)

    def matrix(self, xs, ys=None):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ys = xs if ys is None else np.atleast_1d(np.asarray(ys, dtype=float))
        return np.asarray(self._eval(xs, ys, True), dtype=float)

    def _eval(self, x, y, outer):
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.family}/{self.cls}/{self.role}>"


class _FuncKernel(Kernel):
    def __init__(self, fn, family="", cls="", role="", profile=None):
        self._fn = fn
        self.family, self.cls, self.role, self.profile = family, cls, role, profile

    def _eval(self, x, y, outer):
        if outer:
            X, Y = np.meshgrid(x, y, indexing="ij")
            return self._fn(X, Y)
        return self._fn(x, y)


def zero_kernel():
    return _FuncKernel(lambda x, y: np.zeros(np.broadcast(x, y).shape), role="zero")


def _check_cls(cls):
    if cls not in CLASSES:
        raise ContractViolation(f"class must be one of {CLASSES}, got {cls!r}")


# ------------------------------------------------------------------ Hankel

class _HankelKernel(Kernel):
    family = "hankel"

    def __init__(self, p, cls, role, inner=None):
        if not isinstance(p, Profile) or p.family != "hankel":
            raise ContractViolation("hankel kernels need a hankel-class profile")
        self.profile, self.cls, self.role = p, cls, role
        self.inner = inner or InnerRule()
        self._top = p.x0 + p.support_radius

    def _u_rule(self, lo):
        width = self.inner.width or min(0.5, self.profile.strip)
        U = max(self._top - lo, width)
        bps = np.array(uniform_panels(0.0, U, width))
        g, w = legendre_rule(self.inner.n)
        h = 0.5 * np.diff(bps)
        u = (h[:, None] * g[None, :] + 0.5 * (bps[1:] + bps[:-1])[:, None]).ravel()
        wu = (h[:, None] * w[None, :]).ravel()
        return u, np.sqrt(wu)

    def _features(self, z, u, sw, which):
        pts = z[:, None] + u[None, :]
        p = self.profile
        if which == "F":
            return eval_phi(p, pts) * sw
        if which == "D":
            return eval_dphi(p, pts) * sw
        return eval_Phi(p, pts) * sw

    def _pieces(self, x, y, outer, need):
        lo = min(x.min(), y.min())
        u, sw = self._u_rule(lo)
        feats = {}
        for side, z in (("x", x), ("y", y)):
            for which in need[side]:
                feats[side + which] = self._features(z, u, sw, which)
        return feats

    def _eval(self, x, y, outer):
        p = self.profile
        if p.is_zero:
            return np.zeros((x.size, y.size)) if outer else np.zeros(x.size)
        role, cls = self.role, self.cls
        half = 0.5 if cls == "symplectic" else 1.0
        if role in ("Q", "S"):
            f = self._pieces(x, y, outer, {"x": "F", "y": "F"})
            Q = _dot(f["xF"], f["yF"], outer)
            if role == "Q":
                return Q
            phx, Phy = eval_phi(p, x), eval_Phi(p, y)
            if cls == "symplectic":
                return 0.5 * (Q - 0.5 * _prod(phx, Phy, outer))
            return Q + 0.5 * _prod(phx, 1.0 - Phy, outer)
        if role == "G":
            f = self._pieces(x, y, outer, {"x": "F", "y": "D"})
            return -half * _dot(f["xF"], f["yD"], outer) - 0.5 * half * _prod(
                eval_phi(p, x), eval_phi(p, y), outer)
        if role == "H":
            f = self._pieces(x, y, outer, {"x": "P", "y": "F"})
            Phx, Phy = eval_Phi(p, x), eval_Phi(p, y)
            core = -half * _dot(f["xP"], f["yF"], outer)
            if cls == "symplectic":
                return core + 0.25 * _prod(Phx, Phy, outer)
            ones = _ones_like_pair(x, y, outer)
            if outer:
                lin = -0.5 * Phx[:, None] * ones + 0.5 * Phy[None, :] * ones
            else:
                lin = -0.5 * Phx + 0.5 * Phy
            return core + lin + 0.5 * _prod(Phx, Phy, outer)
        raise ContractViolation(f"unknown hankel role {role!r}")


def hankel_Q(p, inner=None):
    """Q(x,y) = int_0^inf phi(x+u) phi(u+y) du."""
    return _HankelKernel(p, "", "Q", inner)


def hankel_S_symplectic(p, inner=None):
    return _HankelKernel(p, "symplectic", "S", inner)


def hankel_S_orthogonal(p, inner=None):
    return _HankelKernel(p, "orthogonal", "S", inner)


def hankel_G(p, cls="symplectic", inner=None):
    """-d/dy S, skew-symmetric."""
    _check_cls(cls)
    return _HankelKernel(p, cls, "G", inner)


def hankel_H(p, cls="symplectic", inner=None):
    """x-antiderivative of S vanishing on the diagonal.

    The orthogonal class uses the Phi form
    -int_0^inf Phi(x+u) phi(u+y) du - Phi(x)/2 + Phi(y)/2 + Phi(x) Phi(y)/2.
    """
    _check_cls(cls)
    return _HankelKernel(p, cls, "H", inner)


class _HankelHLiteral(Kernel):
    """Orthogonal H written with the nested z-integral of Q, for cross-checks."""
    family, cls, role = "hankel", "orthogonal", "H"

    def __init__(self, p, inner=None, n_outer=24):
        self.profile = p
        self._Q = hankel_Q(p, inner)
        self._n = n_outer

    def _eval(self, x, y, outer):
        if outer:
            X, Y = np.meshgrid(x, y, indexing="ij")
            return self._eval(X.ravel(), Y.ravel(), False).reshape(X.shape)
        p = self.profile
        top = p.x0 + p.support_radius
        g, w = legendre_rule(self._n)
        width = min(0.5, p.strip)
        out = np.empty(x.size)
        for i, (xi, yi) in enumerate(zip(x, y)):
            bps = np.array(uniform_panels(xi, max(top, xi + width), width))
            h = 0.5 * np.diff(bps)
            z = (h[:, None] * g[None, :] + 0.5 * (bps[1:] + bps[:-1])[:, None]).ravel()
            wz = (h[:, None] * w[None, :]).ravel()
            tail = np.sum(wz * self._Q(z, np.full_like(z, yi)))
            # (1/2) int_y^x phi by direct quadrature on (y, x)
            a, b = min(xi, yi), max(xi, yi)
            if b > a:
                bq = np.array(uniform_panels(a, b, width))
                hq = 0.5 * np.diff(bq)
                zq = (hq[:, None] * g[None, :] + 0.5 * (bq[1:] + bq[:-1])[:, None]).ravel()
                wq = (hq[:, None] * w[None, :]).ravel()
                mid = np.sum(wq * eval_phi(p, zq)) * (1.0 if xi >= yi else -1.0)
            else:
                mid = 0.0
            out[i] = -tail + 0.5 * mid + 0.5 * float(eval_Phi(p, xi)) * float(eval_Phi(p, yi))
        return out


def hankel_H_literal(p, inner=None):
    return _HankelHLiteral(p, inner)


# ------------------------------------------------------------ Wiener-Hopf

class _WHKernel(Kernel):
    """Translation-invariant kernels f * K(x - y) with K from W(z)."""
    family = "wiener-hopf"

    def __init__(self, p, cls, role, inner=None):
        if not isinstance(p, Profile) or p.family != "wiener-hopf":
            raise ContractViolation("wiener-hopf kernels need a wiener-hopf-class profile")
        self.profile, self.cls, self.role = p, cls, role
        self.inner = inner or InnerRule()
        R = p.support_radius
        bps = np.array(uniform_panels(0.0, R, 0.25))
        g, w = legendre_rule(self.inner.n)
        h = 0.5 * np.diff(bps)
        self._u = (h[:, None] * g[None, :] + 0.5 * (bps[1:] + bps[:-1])[:, None]).ravel()
        self._wphi = (h[:, None] * w[None, :]).ravel() * eval_phi(p, self._u) / np.pi

    def diff(self, z, which="W"):
        """W(z) = (1/2 pi) int phi(u) e^{iuz} du, W'(z), or int_0^z W."""
        z = np.asarray(z, dtype=float)
        zf = z.ravel()
        out = np.empty(zf.size)
        u, wp = self._u, self._wphi
        for s in range(0, zf.size, 4096):
            zz = zf[s:s + 4096, None]
            if which == "W":
                out[s:s + 4096] = np.cos(zz * u) @ wp
            elif which == "dW":
                out[s:s + 4096] = -(np.sin(zz * u) * u) @ wp
            else:
                out[s:s + 4096] = (zz * np.sinc(zz * u / np.pi)) @ wp
        return out.reshape(z.shape)

    def _eval(self, x, y, outer):
        d = np.subtract.outer(x, y) if outer else x - y
        f = 1.0 if self.cls in ("", "orthogonal") else 0.5
        which = {"Q": "W", "S": "W", "G": "dW", "H": "IW"}[self.role]
        return f * self.diff(d, which)


def wh_W(p, inner=None):
    return _WHKernel(p, "", "Q", inner)


def wh_Q(p, inner=None):
    """Q(x,y) = (1/2 pi) int phi(u) e^{iu(x-y)} du."""
    return _WHKernel(p, "", "Q", inner)


def wh_S_symplectic(p, inner=None):
    return _WHKernel(p, "symplectic", "S", inner)


def wh_S_orthogonal(p, inner=None):
    return _WHKernel(p, "orthogonal", "S", inner)


def wh_G(p, cls="symplectic", inner=None):
    _check_cls(cls)
    return _WHKernel(p, cls, "G", inner)


def wh_H(p, cls="symplectic", inner=None):
    """H(x,y) = int_y^x S(z,y) dz = f int_0^{x-y} W."""
    _check_cls(cls)
    return _WHKernel(p, cls, "H", inner)


class _SineV(Kernel):
    family, cls, role = "wiener-hopf", "", "V"

    def __init__(self, p, t):
        if p.family != "wiener-hopf":
            raise ContractViolation("sine_V needs a wiener-hopf-class profile")
        if not t > 0:
            raise ContractViolation("sine_V needs t > 0")
        self.profile, self.t = p, float(t)

    def _root(self, x):
        ph = eval_phi(self.profile, x)
        if np.any(ph < 0):
            raise ContractViolation("sine_V needs phi >= 0 on the evaluation window")
        return np.sqrt(ph)

    def _eval(self, x, y, outer):
        t = self.t
        d = np.subtract.outer(x, y) if outer else x - y
        # sin(t d) / (pi d) = (t/pi) sinc(t d / pi); sinc(0) = 1 gives the diagonal limit
        core = (t / np.pi) * np.sinc(t * d / np.pi)
        return _prod(self._root(x), self._root(y), outer) * core


def sine_V(p, t):
    """sqrt(phi(x)) sin(t(x-y)) / (pi (x-y)) sqrt(phi(y))."""
    return _SineV(p, t)


def epsilon_kernel():
    """(1/2) sgn(x - y), zero on the diagonal."""
    return _FuncKernel(lambda x, y: 0.5 * np.sign(x - y), role="epsilon")


# ------------------------------------------------------------------ Bessel

class _BesselKernel(Kernel):
    family = "bessel-mult"

    def __init__(self, alpha, role, inner_n=64, outer_n=48):
        self.alpha = float(alpha)
        if role in ("S", "G", "H") and not self.alpha > 1:
            raise ContractViolation("bessel S, G, H need alpha > 1")
        if role == "Q" and not self.alpha > 0:
            raise ContractViolation("bessel Q needs alpha > 0")
        self.role = role
        self.cls = "" if role == "Q" else "symplectic"
        self.profile = bessel_profile(self.alpha) if self.alpha > 1 else None
        # u = v^2 on (0,1) takes the u^(alpha/2) endpoint behaviour to a power of v
        g, w = legendre_rule(inner_n)
        v = 0.5 * (g + 1.0)
        self._u = v * v
        self._wu = 0.25 * (0.5 * w) * 2.0 * v  # 1/4 * du
        self._outer_n = outer_n

    def _J(self, z, order):
        return bessel_j(order, np.sqrt(z))

    def _Q(self, x, y, outer):
        u, wu = self._u, self._wu
        A = self._J(x[:, None] * u[None, :], self.alpha) * np.sqrt(wu)
        B = self._J(y[:, None] * u[None, :], self.alpha) * np.sqrt(wu)
        return _dot(A, B, outer)

    def _dyQ(self, x, y, outer):
        u, wu, a = self._u, self._wu, self.alpha
        A = self._J(x[:, None] * u[None, :], a) * np.sqrt(wu)
        yu = y[:, None] * u[None, :]
        dJ = 0.5 * (self._J(yu, a - 1.0) - self._J(yu, a + 1.0))
        B = dJ * np.sqrt(u)[None, :] / (2.0 * np.sqrt(y))[:, None] * np.sqrt(wu)
        return _dot(A, B, outer)

    def _S(self, x, y, outer):
        p = self.profile
        return 0.5 * (self._Q(x, y, outer) - 0.5 * _prod(eval_phi(p, x), eval_Phi(p, y), outer))

    def _eval(self, x, y, outer):
        if self.role == "Q":
            return self._Q(x, y, outer)
        if self.role == "S":
            return self._S(x, y, outer)
        if self.role == "G":
            p = self.profile
            dPhi = bessel_j(self.alpha + 1.0, np.sqrt(y)) / (2.0 * np.sqrt(y))
            return -0.5 * (self._dyQ(x, y, outer) - 0.5 * _prod(eval_phi(p, x), dPhi, outer))
        if self.role == "H":
            # int_0^x S(z, y) dz with z = x v^4
            g, w = legendre_rule(self._outer_n)
            v = 0.5 * (g + 1.0)
            wv = 0.5 * w
            m = v.size
            Z = (x[:, None] * v[None, :] ** 4).ravel()
            jac = (x[:, None] * 4.0 * v[None, :] ** 3 * wv[None, :])
            if outer:
                Smat = self._S(Z, y, True).reshape(x.size, m, y.size)
                return np.einsum("ik,ikj->ij", jac, Smat)
            Y = np.repeat(y, m)
            Svals = self._S(Z, Y, False).reshape(x.size, m)
            return np.sum(jac * Svals, axis=1)
        raise ContractViolation(f"unknown bessel role {self.role!r}")


def bessel_Q(alpha, inner_n=64):
    """Q(x,y) = (1/4) int_0^1 J_a(sqrt(xu)) J_a(sqrt(uy)) du."""
    return _BesselKernel(alpha, "Q", inner_n)


def bessel_S(alpha, inner_n=64):
    return _BesselKernel(alpha, "S", inner_n)


def bessel_G(alpha, inner_n=64):
    return _BesselKernel(alpha, "G", inner_n)


def bessel_H(alpha, inner_n=64, outer_n=48):
    return _BesselKernel(alpha, "H", inner_n, outer_n)


def bessel_phi_integral(alpha, x):
    return eval_phi_integral(bessel_profile(alpha), x)


# ------------------------------------------------------------------ helpers

def main_kernels(p, cls="symplectic", inner=None):
    """(S, G, H) for the profile's family and the requested class."""
    _check_cls(cls)
    if p.family == "hankel":
        S = hankel_S_symplectic(p, inner) if cls == "symplectic" else hankel_S_orthogonal(p, inner)
        return S, hankel_G(p, cls, inner), hankel_H(p, cls, inner)
    if p.family == "wiener-hopf":
        S = wh_S_symplectic(p, inner) if cls == "symplectic" else wh_S_orthogonal(p, inner)
        return S, wh_G(p, cls, inner), wh_H(p, cls, inner)
    if cls != "symplectic":
        raise ContractViolation("the bessel family is implemented in the symplectic class only")
    n = inner.n if inner is not None else 64
    return bessel_S(p.alpha, n), bessel_G(p.alpha, n), bessel_H(p.alpha, n)
