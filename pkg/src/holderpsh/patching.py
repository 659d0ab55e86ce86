"""Second-stage patching: cutoffs, the glued family w_t and the exhaustion w.

``w_t`` takes, at each point, the max over charts j whose U'_j contains it of

    -log(-w_{t,j}) + eta_j + M |z|**2,

minus a normalising constant K.  The final function is the shell-wise max of

    w_n = (w_{t_n} - tau0 L_n - eps1) / (tau0 L_n b_n),   L_n = log(-log t_n**gamma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptySample, HolderPshError, InvalidGeometry, OutsideCollar
from .geometry import DEFAULT_QUALITY, Chart, DomainModel, domain_contains, global_distance, points_at_depth
from .local import RenormalizedLocal
from .logscale import LogScale
from .schedule import GlobalSchedule, build_global_schedule

SMOOTHSTEP_D1_MAX = 15.0 / 8.0
SMOOTHSTEP_D2_MAX = 10.0 / math.sqrt(3.0)
HESSIAN_SAFETY = 1.1


def smoothstep(u):
    """Quintic step: 0 below 0, 1 above 1, C^2 in between."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


@dataclass(frozen=True)
class Cutoff:
    """Bump ``height * (1 - S((q - q0)/(q1 - q0)))`` in ``q = |zeta|**2 / (2r)**2``."""

    chart: Chart
    height: float
    q0: float
    q1: float

    def __call__(self, z) -> np.ndarray:
        zeta = self.chart.to_chart(np.asarray(z, dtype=complex))
        q = np.abs(zeta) ** 2 / self.chart.middle**2
        return self.height * (1.0 - smoothstep((q - self.q0) / (self.q1 - self.q0)))

    @property
    def laplacian_bound(self) -> float:
        """Upper bound for ``-d d-bar eta``, the amount M|z|^2 has to absorb."""
        dq = self.q1 - self.q0
        return self.height / self.chart.middle**2 * (self.q1 * SMOOTHSTEP_D2_MAX / dq**2 + SMOOTHSTEP_D1_MAX / dq)


@dataclass
class CutoffFamily:
    cutoffs: tuple
    M: float

    def heights(self) -> np.ndarray:
        return np.array([c.height for c in self.cutoffs])


def build_cutoffs(domain: DomainModel, ren: RenormalizedLocal, C3: float, margin: float = 1.0) -> CutoffFamily:
    """Plateau heights from C3 and the comparability constant, M from the bump Hessians."""
    if not margin > 0:
        raise InvalidGeometry("plateau margin must be positive")
    logC = math.log(ren.C)
    out = []
    for j, c in enumerate(domain.charts):
        if not c.inner_radius < c.middle:
            raise InvalidGeometry(f"chart {j}: inner radius {c.inner_radius} is not inside U'_j")
        h = ren.tau0 * C3 + ren.exponent(j) * logC + margin
        q0 = (c.inner_radius / c.middle) ** 2
        q1 = 1.0 - (1.0 - q0) / 10.0
        out.append(Cutoff(c, h, q0, q1))
    M = HESSIAN_SAFETY * max(c.laplacian_bound for c in out)
    return CutoffFamily(tuple(out), M)


def sample_collar(domain: DomainModel, n: int, rng: np.random.Generator, d_min: float, d_max: float,
                  quality=DEFAULT_QUALITY, max_rounds: int = 50) -> np.ndarray:
    """Ambient points with global distance in ``[d_min, d_max)`` inside some plateau U''_j.

    Depths are log-uniform.  Points are drawn below the graph of a random
    chart and kept when they sit in that chart's plateau.
    """
    if n <= 0:
        return np.zeros(0, complex)
    got = []
    total = 0
    for _ in range(max_rounds):
        m = max(2 * (n - total), 8)
        js = rng.integers(0, len(domain.charts), m)
        depth = np.exp(rng.uniform(math.log(d_min), math.log(d_max), m))
        batch = []
        for j in np.unique(js):
            c = domain.charts[j]
            sel = js == j
            rho = c.inner_radius
            # the graph passes through the chart origin, so plateau points have depth < rho
            dep = depth[sel][depth[sel] < rho]
            if dep.size == 0:
                continue
            xs = rng.uniform(-rho, rho, dep.size)
            zeta = points_at_depth(c, 0.0, xs, dep, quality)
            keep = np.abs(zeta) < rho
            batch.append(c.to_ambient(zeta[keep]))
        z = np.concatenate(batch) if batch else np.zeros(0, complex)
        if z.size:
            z = z[domain_contains(domain, z, quality)]
            d = global_distance(domain, z, quality, check=False)
            z = z[(d >= d_min * (1 - 1e-9)) & (d < d_max)]
        got.append(z)
        total += z.size
        if total >= n:
            break
    z = np.concatenate(got)
    if z.size < n:
        raise EmptySample(f"only {z.size} of {n} collar samples found")
    return z[:n]


# ---------------------------------------------------------------------------
# the glued family w_t
# ---------------------------------------------------------------------------


@dataclass
class PatchedFamily:
    domain: DomainModel
    ren: RenormalizedLocal
    cutoffs: CutoffFamily
    K: float = 0.0
    quality: float = DEFAULT_QUALITY
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def M(self) -> float:
        return self.cutoffs.M

    @property
    def collar_width(self) -> float:
        return min(self.ren.exhaustion(j).collar_width for j in range(len(self.domain.charts)))

    def branches(self, t: float, z) -> np.ndarray:
        """Branch values, one row per chart; ``-inf`` where z is not in U'_j."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.full((len(self.domain.charts), z.size), -np.inf)
        quad = self.M * np.abs(z) ** 2
        for j, c in enumerate(self.domain.charts):
            zeta = c.to_chart(z)
            inside = np.abs(zeta) < c.middle
            if not inside.any():
                continue
            val = -self.ren.log_neg_w(j, t, zeta[inside])
            out[j, inside] = val + self.cutoffs.cutoffs[j](z[inside]) + quad[inside]
        return out

    def eval_w_t(self, t: float, z, normalized: bool = True) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        b = self.branches(t, z)
        w = b.max(axis=0)
        if not np.all(np.isfinite(w)):
            bad = z[~np.isfinite(w)][0]
            raise OutsideCollar(f"point {bad} lies in no U'_j")
        return w - self.K if normalized else w

    def covered(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.zeros(z.size, bool)
        for c in self.domain.charts:
            out |= np.abs(c.to_chart(z)) < c.middle
        return out


def normalizing_constant(domain: DomainModel, cutoffs: CutoffFamily, margin: float = 0.05) -> float:
    """K making ``w_t <= tau0 log(-log(d + t**gamma))`` on the plateau collar.

    Each branch is at most that bound plus ``eta_j + M|z|^2``, so K is the
    largest plateau height plus M times the largest ``|z|^2`` over the plateaus.
    """
    rz = max(abs(c.center) + c.inner_radius for c in domain.charts)
    return float(cutoffs.heights().max() + cutoffs.M * rz**2 + margin)


def lower_constant(domain: DomainModel, ren: RenormalizedLocal, cutoffs: CutoffFamily, K: float,
                   margin: float = 0.05) -> float:
    """C4 with ``w_t >= tau0 log(-log(d + t)) - C4`` on the plateau collar.

    On the plateau of the chart carrying the nearest boundary point the
    branch is at least ``tau0 log(-log(d+t)) - (tau0/tau_j) log C + h_j + M|z|^2``.
    """
    logC = math.log(ren.C)
    worst = -np.inf
    for j, c in enumerate(domain.charts):
        rmin = max(abs(c.center) - c.inner_radius, 0.0)
        gain = cutoffs.cutoffs[j].height + cutoffs.M * rmin**2 - ren.exponent(j) * logC
        worst = max(worst, K - gain)
    return float(max(worst, 0.0) + margin)


@dataclass
class RichbergCheck:
    t: float
    n_samples: int
    upper_violations: int
    lower_violations: int
    upper_margin: float
    lower_margin: float

    @property
    def failures(self) -> int:
        return self.upper_violations + self.lower_violations


def check_richberg(family: PatchedFamily, C4: float, gamma: float, t: float, z, tol=1e-9) -> RichbergCheck:
    """Both sides of ``-C4 + tau0 L(d+t) <= w_t <= tau0 L(d+t**gamma)`` with ``L(x) = log(-log x)``."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    tau0 = family.ren.tau0
    d = global_distance(family.domain, z, family.quality, check=False)
    w = family.eval_w_t(t, z)
    up = tau0 * np.log(-np.log(d + t**gamma)) - w
    lo = w - (tau0 * np.log(-np.log(d + t)) - C4)
    return RichbergCheck(t, int(z.size), int(np.sum(up < -tol)), int(np.sum(lo < -tol)),
                         float(up.min()), float(lo.min()))


# ---------------------------------------------------------------------------
# the final exhaustion
# ---------------------------------------------------------------------------


@dataclass
class GlobalExhaustion:
    family: PatchedFamily
    schedule: GlobalSchedule
    C4: float

    @property
    def tau0(self) -> float:
        return self.family.ren.tau0

    @property
    def tau(self) -> float:
        return self.schedule.tau

    @property
    def floor(self) -> float:
        """Constant below every ``w_{n_big}`` value on the collar."""
        sch = self.schedule
        nb = sch.n_big
        L = float(sch.L(nb))
        return -math.exp(-float(sch.log_b(nb))) * (1.0 + 2.0 * (sch.eps1 + self.C4) / (self.tau0 * L))

    def _t(self, n) -> float:
        return math.exp(-float(self.schedule.s(n)))

    def w_n(self, n: int, z, w_t_cache: Optional[dict] = None) -> np.ndarray:
        sch = self.schedule
        t = self._t(n)
        cache = {} if w_t_cache is None else w_t_cache
        if t not in cache:
            cache[t] = self.family.eval_w_t(t, z)
        L = float(sch.L(n))
        return (cache[t] - self.tau0 * L - sch.eps1) / (self.tau0 * L) * math.exp(-float(sch.log_b(n)))

    def eval_w(self, z, return_parts: bool = False):
        """w at domain points; shells below n_big use ``max(w_{n_big}, floor)``."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        sch = self.schedule
        d = global_distance(self.family.domain, z, self.family.quality, check=False)
        n = sch.shell_index(-np.log(d))
        out = np.full(z.size, self.floor)
        cov = self.family.covered(z)
        if cov.any():
            zc, nc = z[cov], n[cov]
            cache: dict = {}
            val = self.w_n(sch.n_big, zc, cache)
            top = int(min(max(nc.max(), sch.n_big), sch.n_max))
            for m in range(sch.n_big + 1, top + 1):
                use = nc >= m
                if use.any():
                    val[use] = np.maximum(val[use], self.w_n(m, zc, cache)[use])
            out[cov] = np.maximum(val, self.floor)
        if return_parts:
            return out, d, n
        return out


def final_bound_product(w, d, tau):
    """``(-w) (-log d)**tau log(-log d)``, constant up to M1, M2 under the final sandwich."""
    D = -np.log(d)
    return -np.asarray(w) * D**tau * np.log(D)


@dataclass
class FinalFit:
    M1: float
    M2: float
    tau: float
    n_samples: int
    violations: int


def fit_final_bounds(w, d, tau, tol=1e-12) -> FinalFit:
    """M1 = max and M2 = min of the product, so both sides hold on the fitting sample."""
    d = np.asarray(d, dtype=float)
    keep = d < math.exp(-1.0)  # log(-log d) > 0
    if not keep.any():
        raise EmptySample("no sample with d < 1/e")
    prod = final_bound_product(np.asarray(w)[keep], d[keep], tau)
    M1, M2 = float(prod.max()), float(prod.min())
    viol = int(np.sum((prod > M1 * (1 + tol)) | (prod < M2 * (1 - tol))))
    return FinalFit(M1, M2, tau, int(keep.sum()), viol)


@dataclass
class ResidualComparison:
    loglog_residual: float
    power_residual: float

    @property
    def loglog_better(self) -> bool:
        return self.loglog_residual < self.power_residual


def residual_comparison(w, d, tau) -> ResidualComparison:
    """Least-squares fit of ``log(-w)`` with and without the ``-log log(-log d)`` term.

    Both models share the exponent ``tau``; only the additive constant is fitted.
    """
    d = np.asarray(d, dtype=float)
    keep = d < math.exp(-1.0)
    y = np.log(-np.asarray(w, dtype=float)[keep])
    D = -np.log(d[keep])
    base = y + tau * np.log(D)
    with_ll = base + np.log(np.log(D))

    def resid(r):
        return float(np.linalg.norm(r - r.mean()))

    return ResidualComparison(resid(with_ll), resid(base))


def constant_C5(ex: GlobalExhaustion, z) -> float:
    """Smallest C5 with ``w_n >= -C5 / (b_n tau0 L_n)`` over the sample, at n = n_big."""
    sch = ex.schedule
    nb = sch.n_big
    w = ex.w_n(nb, z)
    scale = math.exp(-float(sch.log_b(nb))) / (ex.tau0 * float(sch.L(nb)))
    return float(np.max(-w / scale))


# ---------------------------------------------------------------------------
# build pipeline
# ---------------------------------------------------------------------------


@dataclass
class GlobalBuild:
    family: PatchedFamily
    K: float
    C4: float
    C4_fit: float
    calibration: list
    schedule: Optional[GlobalSchedule] = None
    exhaustion: Optional[GlobalExhaustion] = None
    error: Optional[str] = None


def build_global(domain: DomainModel, ren: RenormalizedLocal, C3: float, gamma: float, rng: np.random.Generator,
                 eps1: float = 0.1, t1: Optional[LogScale] = None, n_max: int = 50, n_big_limit: Optional[int] = None,
                 plateau_margin: float = 1.0, calibration_samples: int = 200,
                 calibration_ts=(0.0, 1e-3, 1e-2)) -> GlobalBuild:
    """Cutoffs, K and C4, then the global schedule.

    A schedule failure is recorded in ``error`` rather than raised, so the
    first-stage results stay available.
    """
    t1 = LogScale.from_t(0.1) if t1 is None else t1
    cut = build_cutoffs(domain, ren, C3, plateau_margin)
    K = normalizing_constant(domain, cut)
    C4 = lower_constant(domain, ren, cut, K)
    fam = PatchedFamily(domain, ren, cut, K, ren.quality)
    width = fam.collar_width
    z = sample_collar(domain, calibration_samples, rng, 1e-8, width / 2, ren.quality)
    d = global_distance(domain, z, ren.quality, check=False)
    checks = []
    fit = -np.inf
    for t in calibration_ts:
        w = fam.eval_w_t(t, z)
        fit = max(fit, float(np.max(ren.tau0 * np.log(-np.log(d + t)) - w)))
        if t > 0:
            checks.append(check_richberg(fam, C4, gamma, t, z))
    gb = GlobalBuild(fam, K, C4, fit, checks)
    if n_big_limit is None:
        n_big_limit = n_max - 1
    try:
        sch = build_global_schedule(gamma, ren.tau0, C4, eps1, t1, n_max, n_big_limit=n_big_limit)
    except HolderPshError as exc:  # NoFeasibleLambda, InvalidSchedule, OverflowHorizon
        gb.error = f"{type(exc).__name__}: {exc}"
        return gb
    gb.schedule = sch
    gb.exhaustion = GlobalExhaustion(fam, sch, C4)
    return gb
