"""Hölder graph domains, translated chart domains and boundary distances.

Points live in C (one complex variable) and are plain Python/numpy complex
numbers.  A chart maps an ambient point ``z`` to chart coordinates
``zeta = u * (z - center)`` with ``|u| = 1``; in chart coordinates the domain
is ``{|zeta| < 10 r, Im zeta < g(Re zeta)}`` and its upward translate by
``t`` is ``{|zeta| < 10 r, Im zeta < g(Re zeta) + t}``.

Distances are computed in two phases: a chord-bounded polyline of the
graph is searched for the nearest vertices, then each candidate is refined
by golden-section search on the graph parameter.  The graph is only Hölder,
so no derivatives are used anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateShift,
    InvalidGeometry,
    NoValidExponent,
    OutsideDomain,
    ResolutionExhausted,
)

GRAPH_KINDS = ("flat", "lipschitz_wedge", "holder_cusp", "sphere_cap", "table")

DEFAULT_QUALITY = 0.02  # coarse chord length, in units of the chart radius
GOLDEN_ITERS = 110
N_CANDIDATES = 4
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# graphs and charts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Graph:
    """Height function ``g`` over the real parameter ``x = Re zeta``.

    ``table`` graphs use nearest-neighbour interpolation of the sampled
    heights; their boundary is a staircase and distances to it are computed
    from its segments exactly.
    """

    kind: str
    L: float = 0.0
    beta: float = 0.5
    R: float = 1.0
    table_x: tuple = ()
    table_y: tuple = ()

    def __post_init__(self):
        if self.kind not in GRAPH_KINDS:
            raise InvalidGeometry(f"unknown graph kind {self.kind!r}")
        if self.kind == "table":
            if len(self.table_x) < 2 or len(self.table_x) != len(self.table_y):
                raise InvalidGeometry("table graph needs matching x/y samples (>= 2)")
            if np.any(np.diff(self.table_x) <= 0):
                raise InvalidGeometry("table x samples must be strictly increasing")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "flat":
            return np.zeros_like(x)
        if self.kind == "lipschitz_wedge":
            return self.L * np.abs(x)
        if self.kind == "holder_cusp":
            return -self.L * np.abs(x) ** self.beta
        if self.kind == "sphere_cap":
            return np.sqrt(np.maximum(self.R**2 - x**2, 0.0)) - self.R
        xs = np.asarray(self.table_x)
        ys = np.asarray(self.table_y)
        return ys[self._nearest(x)]

    def _nearest(self, x):
        xs = np.asarray(self.table_x)
        mids = 0.5 * (xs[1:] + xs[:-1])
        return np.searchsorted(mids, x, side="left")

    @property
    def breakpoints(self) -> tuple:
        if self.kind in ("lipschitz_wedge", "holder_cusp"):
            return (0.0,)
        return ()

    def exact_separation(self, t: float) -> Optional[float]:
        """Closed-form distance between the graph and its translate, if known."""
        if self.kind == "flat":
            return t
        if self.kind == "lipschitz_wedge":
            return t / math.sqrt(1.0 + self.L**2)
        return None


@dataclass(frozen=True)
class Chart:
    index: int
    center: complex
    radius: float
    rotation: complex
    graph: Graph
    holder_exponent: float
    holder_constant: float
    inner_radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidGeometry("chart radius must be positive")
        if abs(abs(self.rotation) - 1.0) > 1e-12:
            raise InvalidGeometry("chart frame must be unitary")
        if not 0.0 < self.holder_exponent <= 1.0:
            raise InvalidGeometry("Hölder exponent must lie in (0, 1]")
        if not 0.0 < self.inner_radius < 2.0 * self.radius:
            raise InvalidGeometry(
                f"inner radius {self.inner_radius} must lie in (0, 2r) for chart {self.index}"
            )
        if abs(float(self.graph(0.0))) > 1e-12:
            raise InvalidGeometry("graph must vanish at the chart origin")

    @property
    def outer(self) -> float:
        """Radius of U_j."""
        return 10.0 * self.radius

    @property
    def middle(self) -> float:
        """Radius of U'_j."""
        return 2.0 * self.radius

    def to_chart(self, z):
        return self.rotation * (np.asarray(z, dtype=complex) - self.center)

    def to_ambient(self, zeta):
        return np.asarray(zeta, dtype=complex) / self.rotation + self.center


def chart_membership(chart: Chart, t: float, z):
    """True iff ``z`` (chart coordinates) lies in the translated chart domain."""
    z = np.asarray(z, dtype=complex)
    inside = np.abs(z) < chart.outer
    x = np.clip(z.real, -chart.outer, chart.outer)
    out = inside & (z.imag < chart.graph(x) + t)
    return bool(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TranslatedDomain:
    chart: Chart
    t: float = 0.0

    def __post_init__(self):
        if self.t < 0:
            raise DegenerateShift("translation must be nonnegative")

    def contains(self, z):
        return chart_membership(self.chart, self.t, z)

    def distance(self, z, quality=DEFAULT_QUALITY):
        return local_distance(self.chart, self.t, z, quality)


def sampled_holder_check(chart: Chart, rng: np.random.Generator, n_pairs=2000):
    """Largest observed ``|g(u)-g(v)| / |u-v|**beta`` over random pairs, and pass flag."""
    R = chart.outer
    u = rng.uniform(-R, R, n_pairs)
    v = rng.uniform(-R, R, n_pairs)
    g = chart.graph
    num = np.abs(g(u) - g(v))
    den = np.abs(u - v) ** chart.holder_exponent
    ok = den > 0
    ratio = float(np.max(num[ok] / den[ok])) if ok.any() else 0.0
    return ratio, ratio <= chart.holder_constant * (1 + 1e-9) + 1e-12


# ---------------------------------------------------------------------------
# boundary polylines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Polyline:
    xs: np.ndarray  # sorted graph parameters
    pts: np.ndarray  # complex boundary points x + i (g(x) + t)
    feasible: np.ndarray  # |pt| <= rmax


def _curve(graph: Graph, t: float, x):
    return np.asarray(x) + 1j * (graph(x) + t)


@lru_cache(maxsize=256)
def _polyline(graph: Graph, t: float, span: float, rmax: float, h: float) -> _Polyline:
    """Chord-bounded samples of the graph over ``[-span, span]`` clipped to ``|p| <= rmax``."""
    lim = span * (1.0 - 1e-12)
    x = np.linspace(-lim, lim, 257)
    bp = [b for b in graph.breakpoints if -lim < b < lim]
    x = np.union1d(x, bp)
    for _ in range(60):
        p = _curve(graph, t, x)
        chord = np.abs(np.diff(p))
        bad = chord > h
        if not bad.any():
            break
        mids = 0.5 * (x[:-1][bad] + x[1:][bad])
        x = np.union1d(x, mids)
    else:
        raise ResolutionExhausted(
            f"graph of kind {graph.kind!r} cannot be sampled at chord length {h:g}"
        )
    p = _curve(graph, t, x)
    inside = np.abs(p) <= rmax
    # exact crossing points with the sphere |p| = rmax
    flips = np.nonzero(inside[:-1] != inside[1:])[0]
    if flips.size:
        a = np.where(inside[flips], x[flips], x[flips + 1])  # inside end
        b = np.where(inside[flips], x[flips + 1], x[flips])
        for _ in range(80):
            m = 0.5 * (a + b)
            ok = np.abs(_curve(graph, t, m)) <= rmax
            a = np.where(ok, m, a)
            b = np.where(ok, b, m)
        x = np.union1d(x, a)
        p = _curve(graph, t, x)
        inside = np.abs(p) <= rmax
    return _Polyline(x, p, inside)


def _golden_min(f, a, b, iters=GOLDEN_ITERS):
    """Vectorised golden-section minimisation of ``f`` on brackets ``[a, b]``."""
    a = a.astype(float).copy()
    b = b.astype(float).copy()
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = f(c)
    fd = f(d)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _INVPHI * (b - a)
        new_d = a + _INVPHI * (b - a)
        xn = np.where(left, new_c, new_d)
        fn = f(xn)
        d, fd, c, fc = (
            np.where(left, c, new_d),
            np.where(left, fc, fn),
            np.where(left, new_c, d),
            np.where(left, fn, fd),
        )
    xm = np.where(fc < fd, c, d)
    return xm, np.minimum(fc, fd)


def _graph_distance(chart: Chart, t: float, zeta, rmax: float, quality: float):
    """Distance from chart points to the graph piece ``{|p| <= rmax}``; returns (dist, x)."""
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
    graph = chart.graph
    if graph.kind == "table":
        return _table_distance(chart, t, zeta, rmax)
    h = quality * chart.radius
    poly = _polyline(graph, float(t), chart.outer, float(rmax), float(h))
    fidx = np.nonzero(poly.feasible)[0]
    if fidx.size == 0:
        return np.full(zeta.shape, np.inf), np.full(zeta.shape, np.nan)
    fpts = poly.pts[fidx]
    k = min(N_CANDIDATES, fidx.size)
    n_all = poly.xs.size
    out_d = np.empty(zeta.shape)
    out_x = np.empty(zeta.shape)
    chunk = max(1, 2_000_000 // fidx.size)
    for s in range(0, zeta.size, chunk):
        zq = zeta[s : s + chunk]
        d2 = np.abs(zq[:, None] - fpts[None, :]) ** 2
        cand = np.argpartition(d2, k - 1, axis=1)[:, :k] if k < fidx.size else np.tile(
            np.arange(fidx.size), (zq.size, 1)
        )
        vert_d2 = np.take_along_axis(d2, cand, axis=1)
        full = fidx[cand]
        lo = poly.xs[np.maximum(full - 1, 0)]
        hi = poly.xs[np.minimum(full + 1, n_all - 1)]
        zz = np.repeat(zq, cand.shape[1])

        def f(x, zz=zz):
            p = _curve(graph, t, x)
            val = np.abs(zz - p) ** 2
            return np.where(np.abs(p) <= rmax, val, np.inf)

        xm, fm = _golden_min(f, lo.ravel(), hi.ravel())
        fm = fm.reshape(cand.shape)
        xm = xm.reshape(cand.shape)
        use_vert = vert_d2 <= fm
        best_val = np.where(use_vert, vert_d2, fm)
        best_x = np.where(use_vert, poly.xs[full], xm)
        j = np.argmin(best_val, axis=1)
        rows = np.arange(zq.size)
        out_d[s : s + chunk] = np.sqrt(best_val[rows, j])
        out_x[s : s + chunk] = best_x[rows, j]
    return out_d, out_x


def _table_segments(graph: Graph, t: float, span: float):
    xs = np.asarray(graph.table_x, dtype=float)
    ys = np.asarray(graph.table_y, dtype=float) + t
    mids = 0.5 * (xs[1:] + xs[:-1])
    left = np.concatenate([[-span], mids])
    right = np.concatenate([mids, [span]])
    keep = right > left
    # horizontal treads and vertical risers of the staircase
    p0 = np.concatenate([left + 1j * ys, mids + 1j * ys[:-1]])
    p1 = np.concatenate([right + 1j * ys, mids + 1j * ys[1:]])
    ok = np.concatenate([keep, np.ones(mids.size, bool)])
    return p0[ok], p1[ok]


def _clip_segments(p0, p1, rmax):
    """Clip segments to the closed disc of radius rmax; returns clipped ends and mask."""
    d = p1 - p0
    a = np.abs(d) ** 2
    b = 2 * (p0.real * d.real + p0.imag * d.imag)
    c = np.abs(p0) ** 2 - rmax**2
    disc = b * b - 4 * a * c
    ok = (disc >= 0) & (a > 0)
    sq = np.sqrt(np.maximum(disc, 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s0 = np.clip((-b - sq) / (2 * a), 0, 1)
        s1 = np.clip((-b + sq) / (2 * a), 0, 1)
    ok &= s1 > s0
    return p0 + s0 * d, p0 + s1 * d, ok


def _table_distance(chart, t, zeta, rmax):
    p0, p1, ok = _clip_segments(*_table_segments(chart.graph, t, chart.outer), rmax)
    p0, p1 = p0[ok], p1[ok]
    d = p1 - p0
    L2 = np.abs(d) ** 2
    out = np.empty(zeta.shape)
    outx = np.empty(zeta.shape)
    for s in range(0, zeta.size, 512):
        zq = zeta[s : s + 512, None]
        w = zq - p0[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.clip((w.real * d.real + w.imag * d.imag) / L2, 0, 1)
        u = np.where(L2 > 0, u, 0)
        foot = p0[None, :] + u * d[None, :]
        dist = np.abs(zq - foot)
        j = np.argmin(dist, axis=1)
        rows = np.arange(zq.shape[0])
        out[s : s + 512] = dist[rows, j]
        outx[s : s + 512] = foot[rows, j].real
    return out, outx


def _sphere_distance(chart: Chart, t: float, zeta):
    """Distance to the spherical part of the boundary of the chart domain."""
    R = chart.outer
    r = np.abs(zeta)
    dirn = np.where(r > 0, zeta / np.where(r > 0, r, 1), -1j)
    q = R * dirn
    on_arc = q.imag <= chart.graph(np.clip(q.real, -R, R)) + t
    return np.where(on_arc, R - r, np.inf)


# ---------------------------------------------------------------------------
# distance operations
# ---------------------------------------------------------------------------


def local_distance(chart: Chart, t: float, z, quality=DEFAULT_QUALITY, return_witness=False):
    """Distance from ``z`` (chart coordinates) to the boundary of the translated domain.

    The returned value is realised by a boundary point (graph or sphere part),
    so it never undershoots the true distance; refinement error is far below
    the coarse chord length.
    """
    scalar = np.ndim(z) == 0
    zeta = np.atleast_1d(np.asarray(z, dtype=complex))
    inside = np.atleast_1d(chart_membership(chart, t, zeta))
    if not inside.all():
        bad = zeta[~inside][0]
        raise OutsideDomain(f"point {bad} not in the chart domain at shift t={t}")
    dg, xw = _graph_distance(chart, t, zeta, chart.outer, quality)
    ds = _sphere_distance(chart, t, zeta)
    d = np.minimum(dg, ds)
    xw = np.where(dg <= ds, xw, np.nan)
    if scalar:
        d, xw = float(d[0]), float(xw[0])
    return (d, xw) if return_witness else d


def separation(chart: Chart, t: float, quality=DEFAULT_QUALITY) -> float:
    """Distance between the graph piece in B(0, 8r) and its t-translate in B(0, 9r)."""
    if not t > 0:
        raise DegenerateShift(f"separation needs t > 0, got {t}")
    # depends on the graph and radius only, not on the chart placement
    probe = Chart(0, 0j, chart.radius, 1 + 0j, chart.graph, chart.holder_exponent,
                  chart.holder_constant, chart.inner_radius)
    return _separation(probe, float(t), float(quality))


@lru_cache(maxsize=1024)
def _separation(chart: Chart, t: float, quality: float) -> float:
    graph = chart.graph
    r = chart.radius
    if graph.kind == "table":
        p0, p1, ok = _clip_segments(*_table_segments(graph, 0.0, chart.outer), 8 * r)
        ends = np.concatenate([p0[ok], p1[ok]])
        # staircase: the minimum over pairs of segments is attained at an endpoint
        d_a, _ = _table_distance(chart, t, ends, 9 * r)
        q0, q1, ok2 = _clip_segments(*_table_segments(graph, t, chart.outer), 9 * r)
        ends_b = np.concatenate([q0[ok2], q1[ok2]])
        d_b, _ = _table_distance(chart, 0.0, ends_b, 8 * r)
        return float(min(d_a.min(), d_b.min(), t))
    h = quality * r
    poly = _polyline(graph, 0.0, chart.outer, 8 * r, h)
    fidx = np.nonzero(poly.feasible)[0]
    dv, _ = _graph_distance(chart, t, poly.pts[fidx], 9 * r, quality)
    k = min(N_CANDIDATES, fidx.size)
    cand = np.argsort(dv)[:k]
    full = fidx[cand]
    lo = poly.xs[np.maximum(full - 1, 0)]
    hi = poly.xs[np.minimum(full + 1, poly.xs.size - 1)]

    def f(x):
        p = _curve(graph, 0.0, x)
        d, _ = _graph_distance(chart, t, p, 9 * r, quality)
        return np.where(np.abs(p) <= 8 * r, d, np.inf)

    _, fm = _golden_min(f, lo, hi, iters=90)
    best = min(float(dv.min()), float(fm.min()))
    # the vertical translate of the chart origin is always a witness
    return min(best, t)


@dataclass
class GammaEstimate:
    gamma: float
    seed: float
    seed_valid: bool
    t_values: np.ndarray
    separations: np.ndarray
    ratios: np.ndarray  # log C_t / log t


def estimate_gamma(
    chart: Chart,
    t_values: Sequence[float],
    delta: float = 0.05,
    step: float = 0.01,
    gamma_max: float = 50.0,
    quality=DEFAULT_QUALITY,
) -> GammaEstimate:
    """Smallest grid exponent with ``t**gamma <= C_t <= t`` on the sweep (floor 1 + delta)."""
    t_values = np.asarray(t_values, dtype=float)
    if t_values.size == 0 or np.any(np.diff(t_values) >= 0) or np.any(t_values <= 0):
        raise ValueError("t_values must be positive and strictly decreasing")
    if np.any(t_values >= 1):
        raise ValueError("t_values must be < 1")
    seps = np.array([separation(chart, float(t), quality) for t in t_values])
    if np.any(seps <= 0) or np.any(seps > t_values * (1 + 1e-9)):
        raise NoValidExponent("separation outside (0, t]; geometry is inconsistent")
    ratios = np.log(seps) / np.log(t_values)
    floor = 1.0 + delta
    need = max(floor, float(ratios.max()))
    n_steps = math.ceil(round((need - floor) / step, 9))
    gamma = floor + n_steps * step
    while np.any(t_values**gamma > seps):
        gamma += step
    if gamma > gamma_max:
        raise NoValidExponent(f"no exponent up to {gamma_max} brackets the separations")
    beta = chart.holder_exponent
    seed = max(1.0 / beta if beta < 1 else floor, floor)
    seed_valid = bool(np.all(t_values**seed <= seps))
    return GammaEstimate(round(gamma, 10), seed, seed_valid, t_values, seps, ratios)


@dataclass
class DistanceAudit:
    t: float
    gamma: float
    n_samples: int
    separation: float
    tol: float
    margin_lower: np.ndarray  # d_t - d_0 - C_t
    margin_upper: np.ndarray  # d_0 + t - d_t
    margin_gamma: np.ndarray  # d_t - d_0 - t**gamma

    @property
    def violations_lower(self) -> int:
        return int(np.sum(self.margin_lower < -self.tol))

    @property
    def violations_upper(self) -> int:
        return int(np.sum(self.margin_upper < -self.tol))

    @property
    def violations_gamma(self) -> int:
        return int(np.sum(self.margin_gamma < -self.tol))

    @property
    def passed(self) -> bool:
        return self.violations_lower == self.violations_upper == self.violations_gamma == 0


def audit_distance_inequalities(
    chart: Chart, t: float, samples, gamma: float, quality=DEFAULT_QUALITY, tol=1e-9
) -> DistanceAudit:
    """Check d_0 + C_t <= d_t <= d_0 + t and d_0 + t**gamma <= d_t on samples."""
    samples = np.asarray(samples, dtype=complex)
    d0 = local_distance(chart, 0.0, samples, quality)
    if t == 0:
        dt = d0
        c = 0.0
    else:
        dt = local_distance(chart, t, samples, quality)
        c = separation(chart, t, quality)
    tg = t**gamma if t > 0 else 0.0
    scale_tol = tol * (1.0 + np.abs(dt))
    return DistanceAudit(
        t=t,
        gamma=gamma,
        n_samples=samples.size,
        separation=c,
        tol=float(np.max(scale_tol)) if samples.size else tol,
        margin_lower=dt - d0 - c,
        margin_upper=d0 + t - dt,
        margin_gamma=dt - d0 - tg,
    )


# ---------------------------------------------------------------------------
# global domain model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainModel:
    name: str
    charts: tuple
    bbox: tuple  # (xmin, xmax, ymin, ymax)
    boundary_window: Optional[float] = None

    @property
    def diameter(self) -> float:
        x0, x1, y0, y1 = self.bbox
        return math.hypot(x1 - x0, y1 - y0)

    def chart(self, j: int) -> Chart:
        return self.charts[j]


def _graph_piece_distance(domain: DomainModel, z, quality=DEFAULT_QUALITY):
    """Per-chart distance from ambient points to each chart's graph piece."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    D = np.full((len(domain.charts), z.size), np.inf)
    X = np.full((len(domain.charts), z.size), np.nan)
    best = np.full(z.size, np.inf)
    centers = np.array([c.center for c in domain.charts])
    # visit charts nearest first so the running minimum prunes the rest
    order = np.argsort(np.min(np.abs(z[None, :] - centers[:, None]), axis=1))
    for j in order:
        c = domain.charts[j]
        lower = np.abs(z - c.center) - c.outer
        need = lower < best
        if not need.any():
            continue
        d, x = _graph_distance(c, 0.0, c.to_chart(z[need]), c.outer, quality)
        D[j, need] = d
        X[j, need] = x
        best[need] = np.minimum(best[need], d)
    return D, X


def global_distance(domain: DomainModel, z, quality=DEFAULT_QUALITY, check=True):
    """Euclidean distance to the boundary: minimum over charts of graph-piece distances."""
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if check:
        inside = domain_contains(domain, z, quality)
        if not np.all(inside):
            raise OutsideDomain(f"point {z[~inside][0]} is not in the domain {domain.name}")
    D, _ = _graph_piece_distance(domain, z, quality)
    d = D.min(axis=0)
    return float(d[0]) if scalar else d


def domain_contains(domain: DomainModel, z, quality=DEFAULT_QUALITY):
    """Membership in the global domain.

    Points inside some U_j use that chart's half-graph test.  Others are
    classified at a point close to their nearest boundary point, reached along
    the segment to it (which meets no boundary point).
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.zeros(z.size, bool)
    done = np.zeros(z.size, bool)
    for c in domain.charts:
        zeta = c.to_chart(z)
        here = (~done) & (np.abs(zeta) < c.outer)
        if here.any():
            out[here] = chart_membership(c, 0.0, zeta[here])
            done[here] = True
    x0, x1, y0, y1 = domain.bbox
    outside_box = (z.real < x0) | (z.real > x1) | (z.imag < y0) | (z.imag > y1)
    out[outside_box & ~done] = False
    done |= outside_box
    rest = np.nonzero(~done)[0]
    if rest.size:
        D, X = _graph_piece_distance(domain, z[rest], quality)
        for col, i in enumerate(rest):
            j = int(np.argmin(D[:, col]))
            c = domain.charts[j]
            w = X[j, col] + 1j * float(c.graph(X[j, col]))
            zeta = c.to_chart(z[i])
            step = min(D[j, col], 0.25 * c.radius) * 0.5
            probe = w + step * (zeta - w) / abs(zeta - w)
            out[i] = chart_membership(c, 0.0, probe)
    return bool(out[0]) if scalar else out


def boundary_samples(domain: DomainModel, per_chart=400):
    """Ambient boundary points sampled from every chart's graph piece."""
    pts = []
    for c in domain.charts:
        poly = _polyline(c.graph, 0.0, c.outer, c.outer, DEFAULT_QUALITY * c.radius)
        p = poly.pts[poly.feasible]
        if c.graph.kind == "table":
            p0, p1, ok = _clip_segments(*_table_segments(c.graph, 0.0, c.outer), c.outer)
            p = np.concatenate([p0[ok], p1[ok]])
        idx = np.linspace(0, p.size - 1, min(per_chart, p.size)).astype(int)
        pts.append(c.to_ambient(p[idx]))
    pts = np.concatenate(pts)
    if domain.boundary_window is not None:
        centers = np.array([c.center for c in domain.charts])
        near = np.min(np.abs(pts[:, None] - centers[None, :]), axis=1) <= domain.boundary_window
        pts = pts[near]
    return pts


@dataclass
class CheckResult:
    name: str
    n_samples: int
    n_violations: int
    worst: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.n_violations == 0


def covering_check(domain: DomainModel, per_chart=400) -> CheckResult:
    """Every sampled boundary point must lie in some inner neighbourhood U''_j."""
    pts = boundary_samples(domain, per_chart)
    slack = np.full(pts.size, -np.inf)
    for c in domain.charts:
        slack = np.maximum(slack, c.inner_radius - np.abs(pts - c.center))
    bad = slack <= 0
    worst = pts[np.argmin(slack)] if pts.size else None
    return CheckResult(
        "covering", int(pts.size), int(bad.sum()), float(slack.min()) if pts.size else 0.0,
        {"worst_point": worst},
    )


def chart_agreement_check(domain: DomainModel, rng: np.random.Generator, n=400) -> CheckResult:
    """Chart-local half-graph tests agree wherever two neighbourhoods U_j overlap."""
    bad = 0
    total = 0
    for c in domain.charts:
        r = c.outer * np.sqrt(rng.uniform(0, 1, n))
        th = rng.uniform(0, 2 * np.pi, n)
        z = c.to_ambient(r * np.exp(1j * th))
        mine = chart_membership(c, 0.0, c.to_chart(z))
        for o in domain.charts:
            if o is c:
                continue
            zo = o.to_chart(z)
            both = np.abs(zo) < o.outer
            if both.any():
                theirs = chart_membership(o, 0.0, zo[both])
                bad += int(np.sum(theirs != mine[both]))
                total += int(both.sum())
    return CheckResult("chart_agreement", total, bad)


def points_at_depth(chart: Chart, t: float, xs, depth, quality=DEFAULT_QUALITY):
    """Chart points below the graph at ``Re = x`` whose distance to the t-boundary equals ``depth``.

    Solved by bisection along the downward vertical ray, on which the
    distance is nondecreasing.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    top = chart.graph(xs) + t
    lo = np.zeros_like(xs)
    hi = np.full_like(xs, 2.0 * depth)
    for _ in range(60):
        z = xs + 1j * (top - hi)
        if np.any(np.abs(z) >= chart.outer):
            raise OutsideDomain(f"depth {np.max(depth):g} is not reached inside chart {chart.index}")
        d = local_distance(chart, t, z, quality)
        grow = d < depth
        if not grow.any():
            break
        hi = np.where(grow, 2 * hi, hi)
    for _ in range(70):
        mid = 0.5 * (lo + hi)
        z = xs + 1j * (top - mid)
        ok = mid > 0
        d = np.where(ok, 0.0, 0.0)
        if ok.any():
            d[ok] = local_distance(chart, t, z[ok], quality)
        small = d < depth
        lo = np.where(small, mid, lo)
        hi = np.where(small, hi, mid)
    return xs + 1j * (top - hi)
