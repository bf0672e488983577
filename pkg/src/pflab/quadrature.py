"""Gauss-Legendre grids for Nystrom discretisation.

Every grid is a concatenation of Gauss-Legendre panels.  A panel never
straddles an interval boundary, so the per-panel spectral integration
matrix can be used for kernels with a jump on the diagonal (the epsilon
kernel).
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "Interval", "Grid", "legendre_rule", "gauss_legendre", "composite_grid",
    "multi_interval_grid", "semi_infinite_grid", "power_graded_grid",
    "graded_breaks", "panel_cumulative_matrix", "cumulative_matrix",
    "antiderivative", "uniform_panels",
]

ROLES = ("plain", "truncated-tail")


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    role: str = "plain"

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"degenerate interval ({self.lo}, {self.hi})")
        if self.role not in ROLES:
            raise ValueError(f"unknown interval role {self.role!r}")

    @property
    def length(self):
        return self.hi - self.lo


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes and weights on a union of intervals.

    `panels` holds (lo, hi, start, stop) for each Gauss-Legendre panel,
    where nodes[start:stop] are the panel's nodes.  Panels with lo=hi=nan
    mark nodes that do not come from an affine Gauss-Legendre map (the
    power-graded grid); such grids have no spectral integration matrix.
    Grids compare by identity.
    """
    intervals: tuple
    nodes: np.ndarray
    weights: np.ndarray
    counts: tuple
    panels: tuple

    def __post_init__(self):
        x, w = self.nodes, self.weights
        if x.shape != w.shape or x.ndim != 1:
            raise ValueError("node/weight shape mismatch")
        if sum(self.counts) != x.size or len(self.counts) != len(self.intervals):
            raise ValueError("per-interval counts inconsistent with nodes")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        start = 0
        for iv, cnt in zip(self.intervals, self.counts):
            seg = x[start:start + cnt]
            if cnt and (np.any(seg <= iv.lo) or np.any(seg >= iv.hi)):
                raise ValueError("node outside the open interval")
            if np.any(np.diff(seg) <= 0):
                raise ValueError("nodes must increase within an interval")
            start += cnt
        x.setflags(write=False)
        w.setflags(write=False)

    @property
    def size(self):
        return self.nodes.size

    @property
    def endpoints(self):
        """a_1 < a_2 < ... < a_2m, the boundary points of the domain."""
        return tuple(v for iv in self.intervals for v in (iv.lo, iv.hi))

    @property
    def total_length(self):
        return float(sum(iv.length for iv in self.intervals))

    @property
    def sqrt_weights(self):
        return np.sqrt(self.weights)

    def interval_index(self):
        return np.repeat(np.arange(len(self.intervals)), self.counts)

    def integrate(self, f):
        return float(np.sum(self.weights * f(self.nodes)))


@lru_cache(maxsize=64)
def _legendre_rule(n):
    if n < 1:
        raise ValueError("need n >= 1")
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_p_dp(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) <= 1e-15:
            break
    p, dp = _legendre_p_dp(n, x)
    x = x - p / dp
    _, dp = _legendre_p_dp(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    # enforce exact symmetry; the initial guess runs from +1 down to -1
    x = 0.5 * (x[::-1] - x)
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _legendre_p_dp(n, x):
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    if n == 1:
        return p1, np.ones_like(x)
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def legendre_rule(n):
    """Gauss-Legendre nodes and weights on (-1, 1), ascending.

    Newton iteration on the three-term recurrence, stopped once the
    correction drops below 1e-15.  Returned arrays are read-only and cached.
    """
    return _legendre_rule(int(n))


def _map(n, lo, hi):
    g, w = legendre_rule(n)
    h = 0.5 * (hi - lo)
    return h * g + 0.5 * (hi + lo), h * w


def composite_grid(intervals, breaks, n):
    """Grid built from panels between consecutive breakpoints.

    `breaks` is a list (one per interval) of increasing breakpoints that
    start at the interval's lo and end at its hi.
    """
    xs, ws, counts, panels = [], [], [], []
    start = 0
    for iv, bps in zip(intervals, breaks):
        bps = np.asarray(bps, dtype=float)
        if bps[0] != iv.lo or bps[-1] != iv.hi or np.any(np.diff(bps) <= 0):
            raise ValueError("panel breakpoints must increase from lo to hi")
        cnt = 0
        for lo, hi in zip(bps[:-1], bps[1:]):
            x, w = _map(n, lo, hi)
            xs.append(x)
            ws.append(w)
            panels.append((float(lo), float(hi), start, start + n))
            start += n
            cnt += n
        counts.append(cnt)
    return Grid(tuple(intervals), np.concatenate(xs), np.concatenate(ws),
                tuple(counts), tuple(panels))


def gauss_legendre(n, lo, hi):
    """n-point Gauss-Legendre rule on (lo, hi)."""
    if n < 1:
        raise ValueError("need n >= 1")
    iv = Interval(float(lo), float(hi))
    return composite_grid([iv], [[iv.lo, iv.hi]], int(n))


def multi_interval_grid(endpoints, n_per_interval, breaks=None):
    """Gauss-Legendre grid on the union of (a_1,a_2), (a_3,a_4), ...

    One panel per interval unless `breaks` supplies interior panel
    breakpoints for each interval.
    """
    e = np.asarray(endpoints, dtype=float)
    if e.ndim != 1 or e.size == 0 or e.size % 2:
        raise ValueError("need an even, nonzero number of endpoints")
    if np.any(np.diff(e) <= 0):
        raise ValueError("endpoints must be strictly increasing")
    if n_per_interval < 1:
        raise ValueError("need n >= 1")
    ivs = [Interval(float(e[2 * j]), float(e[2 * j + 1])) for j in range(e.size // 2)]
    if breaks is None:
        breaks = [[iv.lo, iv.hi] for iv in ivs]
    return composite_grid(ivs, breaks, int(n_per_interval))


def graded_breaks(lo, hi, centre, h):
    """Breakpoints on [lo, hi] that double in width away from `centre`.

    Used where the integrand has complex singularities at distance ~h from
    the real point `centre`: panels adjacent to the centre have width h.
    """
    pts = {lo, hi}
    if lo < centre < hi:
        pts.add(centre)
    step = h
    while step < 2 * (hi - lo):
        for p in (centre - step, centre + step):
            if lo < p < hi:
                pts.add(p)
        step *= 2
    pts = sorted(pts)
    # drop slivers next to the ends; a sliver panel wastes n nodes
    tol = 0.05 * h
    keep = [pts[0]]
    for p in pts[1:-1]:
        if p - keep[-1] > tol and hi - p > tol:
            keep.append(p)
    keep.append(pts[-1])
    return [float(p) for p in keep]


def uniform_panels(lo, hi, width):
    m = max(1, int(np.ceil((hi - lo) / width - 1e-12)))
    return [float(v) for v in np.linspace(lo, hi, m + 1)]


def semi_infinite_grid(t, tail_length, n, centre=None, scale=0.5):
    """Grid on (t, t + tail_length) standing in for (t, inf).

    Without `centre` this is a single Gauss-Legendre panel.  With a centre,
    panels are graded toward it (see `graded_breaks`) and `n` counts nodes
    per panel.  Callers check truncation by repeating with a longer tail.
    """
    if not tail_length > 0:
        raise ValueError("tail_length must be positive")
    if n < 1:
        raise ValueError("need n >= 1")
    iv = Interval(float(t), float(t + tail_length), "truncated-tail")
    if centre is None:
        bps = [iv.lo, iv.hi]
    else:
        bps = graded_breaks(iv.lo, iv.hi, float(centre), float(scale))
    return composite_grid([iv], [bps], int(n))


def power_graded_grid(lo, hi, n, power=4):
    """Nodes lo + (hi-lo) v^p with v Gauss-Legendre on (0,1).

    Clusters nodes at `lo`, where the Bessel-type kernels have algebraic
    branch points (powers of sqrt(x)).
    """
    if not lo < hi:
        raise ValueError("degenerate interval")
    g, w = legendre_rule(n)
    v = 0.5 * (g + 1.0)
    wv = 0.5 * w
    L = hi - lo
    x = lo + L * v ** power
    ww = L * power * v ** (power - 1) * wv
    iv = Interval(float(lo), float(hi))
    return Grid((iv,), x, ww, (int(n),), ((np.nan, np.nan, 0, int(n)),))


@lru_cache(maxsize=32)
def panel_cumulative_matrix(n):
    """C with (C f)_i = int_{-1}^{x_i} f for polynomials of degree < n.

    Built from the Legendre expansion of f at the Gauss nodes and the
    antiderivative (P_{k+1} - P_{k-1}) / (2k+1).
    """
    g, w = legendre_rule(n)
    P = np.empty((n + 1, n))
    P[0] = 1.0
    if n >= 1:
        P[1] = g
    for k in range(1, n):
        P[k + 1] = ((2 * k + 1) * g * P[k] - k * P[k - 1]) / (k + 1)
    # f = sum_k c_k P_k with c_k = (2k+1)/2 sum_j w_j P_k(x_j) f_j
    C = np.outer(g + 1.0, np.full(n, 0.5))
    for k in range(1, n):
        C += 0.5 * np.outer(P[k + 1] - P[k - 1], P[k])
    C *= w[None, :]
    C.setflags(write=False)
    return C


def cumulative_matrix(grid):
    """Matrix C with (C f)_i ~ integral of f over the part of the domain left of x_i."""
    N = grid.size
    C = np.zeros((N, N))
    w = grid.weights
    for lo, hi, s, e in grid.panels:
        if not np.isfinite(lo):
            raise ValueError("grid has no panel structure (power-graded)")
        C[s:e, s:e] = 0.5 * (hi - lo) * panel_cumulative_matrix(e - s)
        C[e:, s:e] = w[None, s:e]
    return C


def antiderivative(f, z, anchor, step=0.5, n=20):
    """int_anchor^z f(s) ds for an array of z, f vectorised.

    Composite Gauss-Legendre on the lattice anchor + k*step, with cumulative
    sums over whole lattice panels plus a partial panel for each z.
    """
    z = np.asarray(z, dtype=float)
    zf = z.ravel()
    if zf.size == 0:
        return np.zeros_like(z)
    if zf.size > 65536:
        parts = [antiderivative(f, zf[s:s + 65536], anchor, step, n)
                 for s in range(0, zf.size, 65536)]
        return np.concatenate(parts).reshape(z.shape)
    g, w = legendre_rule(n)
    k = np.floor((zf - anchor) / step).astype(np.int64)
    kmin, kmax = min(int(k.min()), 0), max(int(k.max()), 0)
    j = np.arange(kmin, kmax)
    lo = anchor + j * step
    nodes = lo[:, None] + 0.5 * step * (g[None, :] + 1.0)
    P = 0.5 * step * (f(nodes) @ w) if j.size else np.zeros(0)
    # cumulative integral from anchor to lattice point k
    cum = np.zeros(kmax - kmin + 1)
    cum[1:] = np.cumsum(P)
    cum -= cum[-kmin]
    base = cum[k - kmin]
    a = anchor + k * step
    h = 0.5 * (zf - a)
    nodes = a[:, None] + h[:, None] * (g[None, :] + 1.0)
    part = h * (f(nodes) @ w)
    return (base + part).reshape(z.shape)
