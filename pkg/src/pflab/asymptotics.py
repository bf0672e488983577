"""Large-|t| predictions for the log-determinants and t-sweeps against them.

Hankel class (t -> -inf):
    ln D(t) ~ s(0) t + kappa - winding + boundary
Wiener-Hopf class (t -> +inf):
    ln D(t) ~ -s(0) t + kappa/4 + boundary
with kappa = int_0^inf x s(x) s(-x) dx and the boundary term depending on
the class (symplectic or orthogonal) through r(0) or phi(0).
"""
from concurrent.futures import ThreadPoolExecutor
import cmath
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ContractViolation, HypothesisViolation, SingularOperatorError
from .identities import (GridSpec, lhs_value, log_DQ, max_workers, hankel_omega, wh_omega,
                         _canonical_grid, _Q_kernel)
from .linop import discretize, operator_norm
from .profiles import Profile, dominance_ratio, eval_phi, spectral_constants

__all__ = [
    "VARIANTS", "AsymptoticPrediction", "SweepResult", "build_prediction", "sweep",
    "omega_limit", "omega_at", "log_DQ_slope", "hankel_ir0",
]

VARIANTS = ("hankel-symplectic", "hankel-orthogonal", "wh-symplectic", "wh-orthogonal")


@dataclass(frozen=True)
class AsymptoticPrediction:
    variant: str
    linear: float
    kappa_term: float
    winding_term: float
    boundary_term: float

    @property
    def constant(self):
        return self.kappa_term + self.winding_term + self.boundary_term

    def predict(self, t):
        return self.linear * np.asarray(t, dtype=float) + self.constant

    def as_dict(self):
        return {"variant": self.variant, "linear": self.linear, "kappa_term": self.kappa_term,
                "winding_term": self.winding_term, "boundary_term": self.boundary_term}


def _split(variant):
    if variant not in VARIANTS:
        raise ContractViolation(f"variant must be one of {VARIANTS}, got {variant!r}")
    fam, cls = variant.split("-")
    return ("hankel" if fam == "hankel" else "wiener-hopf"), cls


def _real(z, what):
    if abs(z.imag) >= 1e-10:
        raise HypothesisViolation(f"{what} has imaginary part {z.imag:.3g}")
    return float(z.real)


def hankel_ir0(p):
    """i r(0) as a complex number (real for the shipped profiles)."""
    return 1j * complex(spectral_constants(p).boundary_value)


def _hankel_boundary(p, cls):
    ir0 = hankel_ir0(p)
    if not abs(ir0) < 1:
        raise HypothesisViolation(f"|r(0)| = {abs(ir0):.6g} is not below 1")
    w = (1 + ir0) / (1 - ir0)
    if not w.real > 0:
        raise HypothesisViolation("boundary argument left the right half-plane")
    if cls == "symplectic":
        q = w ** 0.25
        return _real(2 * cmath.log(0.5 * q + 0.5 / q), "hankel symplectic boundary term")
    return _real(0.5 * cmath.log(1 / w), "hankel orthogonal boundary term")


def _wh_boundary(p, cls):
    phi0 = float(eval_phi(p, 0.0))
    if not 1 - phi0 > 0:
        raise HypothesisViolation(f"1 - phi(0) = {1 - phi0:.6g} is not positive")
    if cls == "symplectic":
        q = (1 - phi0) ** 0.25
        return 2 * math.log(0.5 * q + 0.5 / q)
    return 0.5 * math.log(1 - phi0)


def build_prediction(p, variant):
    fam, cls = _split(variant)
    if not isinstance(p, Profile) or p.family != fam:
        raise ContractViolation(f"variant {variant} needs a {fam} profile")
    if p.is_zero:
        return AsymptoticPrediction(variant, 0.0, 0.0, 0.0, 0.0)
    sd = spectral_constants(p)
    if fam == "hankel":
        return AsymptoticPrediction(variant, sd.s0, sd.kappa, -sd.winding,
                                    _hankel_boundary(p, cls))
    return AsymptoticPrediction(variant, -sd.s0, 0.25 * sd.kappa, 0.0, _wh_boundary(p, cls))


def omega_limit(p):
    """Limit of omega(t): Hankel (t -> -inf) 1/2 ln((1+ir0)/(1-ir0)); WH (t -> inf) -1/2 ln(1-phi0)."""
    if p.family == "hankel":
        ir0 = hankel_ir0(p)
        return _real(0.5 * cmath.log((1 + ir0) / (1 - ir0)), "omega limit")
    if p.family == "wiener-hopf":
        return -0.5 * math.log(1 - float(eval_phi(p, 0.0)))
    raise ContractViolation("omega is defined for hankel and wiener-hopf profiles")


def omega_at(p, t, gs=GridSpec()):
    if p.family == "hankel":
        return hankel_omega(p, t, gs)
    if p.family == "wiener-hopf":
        return wh_omega(p, t, gs)
    raise ContractViolation("omega is defined for hankel and wiener-hopf profiles")


def log_DQ_slope(p, t, gs=GridSpec(), h=1e-3):
    """Central difference of ln D_Q at t."""
    return (log_DQ(p, t + h, gs) - log_DQ(p, t - h, gs)) / (2 * h)


@dataclass
class SweepResult:
    variant: str
    t: list
    numeric: list
    predicted: list
    residuals: list
    decay_rate: float
    grid: dict
    flagged: list = field(default_factory=list)
    prediction: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.t) == len(self.numeric) == len(self.predicted) == len(self.residuals)):
            raise ContractViolation("sweep lists must have equal length")

    def rows(self):
        return list(zip(self.t, self.numeric, self.predicted, self.residuals))

    def to_dict(self):
        return {"variant": self.variant, "t": self.t, "lnD_numeric": self.numeric,
                "lnD_predicted": self.predicted, "residual": self.residuals,
                "decay_rate": self.decay_rate, "grid": self.grid, "flagged": self.flagged,
                "prediction": self.prediction}


def _hypotheses(p, t, gs):
    """Norm bound on Q at this t (and dominance for Hankel); raises on failure."""
    if p.family == "hankel":
        d = dominance_ratio(p)
        if d > 1:
            raise HypothesisViolation(f"dominance ratio {d:.4g} exceeds 1")
    nq = operator_norm(discretize(_Q_kernel(p, gs), _canonical_grid(p, t, gs)))
    if not nq < 1:
        raise HypothesisViolation(f"norm of Q is {nq:.6g}")


def _point(p, cls, t, gs):
    _hypotheses(p, t, gs)
    v = lhs_value(p, cls, t, gs)
    if not v > 0:
        raise HypothesisViolation(f"determinant {v:.6g} is not positive")
    return math.log(v)


def fit_decay_rate(t, residuals, last=4):
    """-slope of ln|residual| against |t| over the last `last` usable points."""
    pts = [(abs(a), math.log(abs(r))) for a, r in zip(t, residuals)
           if r is not None and np.isfinite(r) and r != 0]
    pts = pts[-last:]
    if len(pts) < 2:
        return math.nan
    x, y = np.array(pts).T
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def sweep(p, variant, t_values, grid=None, workers=None):
    """Numeric ln D vs prediction over t; points failing hypotheses are flagged."""
    fam, cls = _split(variant)
    pred = build_prediction(p, variant)
    gs = grid or GridSpec()
    ts = [float(t) for t in t_values]
    if fam == "wiener-hopf" and any(not t > 0 for t in ts):
        raise ContractViolation("wiener-hopf sweeps need t > 0")

    def one(t):
        if p.is_zero:
            return 0.0, None
        try:
            return _point(p, cls, t, gs), None
        except (HypothesisViolation, SingularOperatorError) as exc:
            return math.nan, str(exc)

    workers = min(workers or max_workers(), max(1, len(ts)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(one, ts))
    else:
        out = [one(t) for t in ts]
    numeric = [o[0] for o in out]
    flagged = [{"t": t, "reason": o[1]} for t, o in zip(ts, out) if o[1] is not None]
    predicted = [float(pred.predict(t)) for t in ts]
    residuals = [n - q for n, q in zip(numeric, predicted)]
    usable = [(t, r) for t, r in zip(ts, residuals) if np.isfinite(r)]
    rate = fit_decay_rate([u[0] for u in usable], [u[1] for u in usable])
    return SweepResult(variant, ts, numeric, predicted, residuals, rate, gs.as_dict(),
                       flagged, pred.as_dict())
