"""Independent oracles and property checks.

Plurisubharmonicity is tested through circle means: for a psh f,
``mean_{|w|=rho} f(z + w zeta) - f(z) >= 0``.  The functions built here are
maxima of non-smooth pieces, so no derivatives are taken.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DiscOutsideDomain, EmptySample
from .geometry import Chart, DomainModel, chart_membership, global_distance

MIN_QUADRATURE = 16


# ---------------------------------------------------------------------------
# sub-mean-value probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubmeanProbe:
    center: complex
    radius: float
    direction: complex = 1 + 0j
    q: int = MIN_QUADRATURE

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("probe radius must be positive")
        if self.q < MIN_QUADRATURE:
            raise ValueError(f"quadrature order must be at least {MIN_QUADRATURE}")
        if not math.isclose(abs(self.direction), 1.0, rel_tol=1e-12):
            raise ValueError("direction must be a unit vector")

    def nodes(self, q: Optional[int] = None) -> np.ndarray:
        q = self.q if q is None else q
        return self.center + self.radius * self.direction * np.exp(2j * np.pi * np.arange(q) / q)


@dataclass
class SubmeanResult:
    margin: float
    tol: float
    quadrature_error: float

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tol


def _check_disc(probe: SubmeanProbe, d_center: Optional[float]):
    if d_center is not None and probe.radius > d_center / 4 * (1 + 1e-12):
        raise DiscOutsideDomain(
            f"probe radius {probe.radius:g} exceeds d(z)/4 = {d_center / 4:g} at {probe.center}"
        )


def submean_check(f: Callable, probe: SubmeanProbe, d_center: Optional[float] = None,
                  eval_err: float = 0.0) -> SubmeanResult:
    """Circle mean minus centre value, with tolerance from a q vs 2q comparison."""
    return submean_batch(f, [probe], None if d_center is None else [d_center], eval_err)[0]


def submean_batch(f: Callable, probes, d_centers=None, eval_err: float = 0.0) -> list:
    """Vectorised :func:`submean_check`; ``f`` is called once on all nodes."""
    probes = list(probes)
    if not probes:
        return []
    if d_centers is not None:
        for p, d in zip(probes, d_centers):
            _check_disc(p, d)
    pts = []
    for p in probes:
        pts.extend([np.array([p.center]), p.nodes(), p.nodes(2 * p.q)])
    vals = np.asarray(f(np.concatenate(pts)), dtype=float)
    out = []
    pos = 0
    for p in probes:
        c = vals[pos]
        ring = vals[pos + 1 : pos + 1 + 3 * p.q]
        m1 = ring[: p.q].mean()
        m2 = ring[p.q :].mean()
        pos += 1 + 3 * p.q
        quad = abs(m2 - m1)
        # summation rounding follows the node magnitudes, not the mean
        scale = max(abs(c), float(np.max(np.abs(ring))), 1e-300)
        tol = 10.0 * (quad + eval_err + 8 * np.finfo(float).eps * scale)
        out.append(SubmeanResult(float(m2 - c), float(tol), float(quad)))
    return out


def random_probes(rng: np.random.Generator, centers, d_centers, q: int = MIN_QUADRATURE,
                  frac_range=(0.05, 0.25)) -> list:
    """One probe per centre with radius ``u * d(z)``, u uniform in ``frac_range``."""
    centers = np.asarray(centers, dtype=complex)
    d_centers = np.asarray(d_centers, dtype=float)
    u = rng.uniform(*frac_range, centers.size)
    phase = np.exp(2j * np.pi * rng.uniform(0, 1, centers.size))
    return [SubmeanProbe(complex(c), float(uu * d), complex(ph), q)
            for c, d, uu, ph in zip(centers, d_centers, u, phase)]


# ---------------------------------------------------------------------------
# brute-force distance oracle
# ---------------------------------------------------------------------------


def _oracle_grid(chart: Chart, resolution: float) -> np.ndarray:
    R = chart.outer
    x = np.arange(-math.floor(R / resolution), math.floor(R / resolution) + 1) * resolution
    # geometric refinement towards breakpoints, where the graph may be steep
    ref = resolution * 2.0 ** -np.arange(1, 60)
    extra = [b + s * ref for b in chart.graph.breakpoints for s in (-1.0, 1.0)]
    x = np.union1d(x, np.concatenate([np.asarray(chart.graph.breakpoints, float)] + extra)) if extra else x
    return x[np.abs(x) <= R]


def oracle_error(chart: Chart, resolution: float) -> float:
    """Error bound of the vertex minimum from the graph's Hoelder modulus."""
    return resolution / 2 + chart.holder_constant * (resolution / 2) ** chart.holder_exponent


def brute_distance_oracle(chart: Chart, t: float, z, resolution: float = 1e-4) -> np.ndarray:
    """Minimum distance to graph vertices on a uniform grid of step ``resolution``.

    The best vertices are re-sampled on a 1000x finer uniform grid.  All
    vertices lie on the boundary, so the result bounds the true distance from
    above.  The spherical part of the chart boundary is handled exactly.
    """
    scalar = np.ndim(z) == 0
    zeta = np.atleast_1d(np.asarray(z, dtype=complex))
    R = chart.outer
    xs = _oracle_grid(chart, resolution)
    ys = chart.graph(xs) + t
    verts = xs + 1j * ys
    keep = np.abs(verts) <= R
    xs, verts = xs[keep], verts[keep]
    out = np.empty(zeta.size)
    for i, q in enumerate(zeta):
        # the vertical drop to the graph bounds the search window
        D0 = abs(q.imag - (float(chart.graph(np.array([q.real]))[0]) + t)) + resolution
        lo, hi = np.searchsorted(xs, [q.real - D0, q.real + D0])
        dv = np.inf
        if hi > lo:
            dist = np.abs(verts[lo:hi] - q)
            dv = dist.min()
            # second, finer uniform pass around the best vertices
            for k in np.argsort(dist)[:3]:
                fine = xs[lo + k] + np.linspace(-resolution, resolution, 2001)
                fine = fine[np.abs(fine) <= R]
                pts = fine + 1j * (chart.graph(fine) + t)
                pts = pts[np.abs(pts) <= R]
                if pts.size:
                    dv = min(dv, np.abs(pts - q).min())
        r = abs(q)
        arc = q / r * R if r > 0 else -1j * R
        ds = R - r if arc.imag <= float(chart.graph(np.array([np.clip(arc.real, -R, R)]))[0]) + t else np.inf
        out[i] = min(dv, ds)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class VerificationReport:
    name: str
    n_samples: int
    n_violations: int
    worst_margin: float
    constants: dict = field(default_factory=dict)
    runtime: float = 0.0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_violations > self.n_samples:
            raise ValueError("violation count exceeds sample count")

    @property
    def passed(self) -> bool:
        return self.n_violations == 0 and not self.details.get("failed", False)

    def row(self) -> dict:
        return {
            "check": self.name,
            "samples": self.n_samples,
            "violations": self.n_violations,
            "worst_margin": self.worst_margin,
            "passed": self.passed,
            "constants": ";".join(f"{k}={v}" for k, v in sorted(self.constants.items())),
        }


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def probe_report(name: str, results: list, probes: list) -> VerificationReport:
    margins = np.array([r.margin + r.tol for r in results])
    bad = [p.center for p, r in zip(probes, results) if not r.passed]
    return VerificationReport(
        name, len(results), len(bad), float(margins.min()) if results else 0.0,
        details={"worst_point": bad[0] if bad else None,
                 "max_tol": max((r.tol for r in results), default=0.0)},
    )


def oracle_report(chart: Chart, t: float, zeta, local_values, resolution=1e-4, rel_tol=1e-3,
                  min_fraction=0.99) -> VerificationReport:
    """Relative agreement of ``local_values`` with the brute-force oracle."""
    ref = brute_distance_oracle(chart, t, zeta, resolution)
    rel = np.abs(np.asarray(local_values) - ref) / ref
    above = np.asarray(local_values) - ref
    bad = rel > rel_tol
    frac = 1.0 - bad.mean()
    rep = VerificationReport(
        "distance_oracle", int(rel.size), int(bad.sum()), float(rel_tol - rel.max()),
        constants={"resolution": resolution, "oracle_err": oracle_error(chart, resolution)},
        details={"fraction_within": float(frac), "max_rel": float(rel.max()),
                 "max_above_oracle": float(above.max())},
    )
    rep.details["failed"] = bool(frac < min_fraction)
    # fraction criterion, not a zero-violation one
    rep.n_violations = 0 if frac >= min_fraction else int(bad.sum())
    return rep


# ---------------------------------------------------------------------------
# index witness and baseline
# ---------------------------------------------------------------------------


@dataclass
class IndexWitness:
    tau: float
    C: float
    n_samples: int
    passed: bool


def index_witness(w, d, tau: float, M1: Optional[float] = None) -> IndexWitness:
    """Check ``-w <= C (-log d)**(-tau)`` on samples, with C = M1 when given.

    With ``tau = 0`` the bound reduces to ``C = sup(-w)``.
    """
    w = np.asarray(w, dtype=float)
    d = np.asarray(d, dtype=float)
    if w.size == 0:
        raise EmptySample("no samples for the index witness")
    prod = -w * (-np.log(d)) ** tau
    C = float(prod.max()) if M1 is None else float(M1)
    return IndexWitness(tau, C, int(w.size), bool(np.all(prod <= C * (1 + 1e-12))))


def baseline_demailly(domain: DomainModel, z, quality=None) -> np.ndarray:
    """Comparison curve ``-1/(-log d)`` growing like the classical log exhaustion."""
    kw = {} if quality is None else {"quality": quality}
    d = global_distance(domain, z, **kw)
    if np.any(np.asarray(d) >= 1):
        raise ValueError("baseline needs d(z) < 1")
    return -1.0 / (-np.log(d))


def in_chart_domain(chart: Chart, t: float, z) -> np.ndarray:
    return np.atleast_1d(chart_membership(chart, t, np.asarray(z, dtype=complex)))
