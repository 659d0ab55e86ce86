"""Local patched function v on one chart and its renormalised family w_{t,j}.

For a chart with translated domains ``Omega_t`` the building blocks are

    v_n(z) = (-log d_{t_n}(z) - (1 + eps0) S_n) / (lambda**n S_n),

with ``S_n = -log C_{t_n}``.  On the shell ``t'_{n+1} <= d_0(z) < t'_n`` the
patched function is the max of ``v_{n_start}, ..., v_n``.  Shells below
``n_start`` are not patched: there the crossing bound is not available, so
the collar is ``d_0 < t'_{n_start}`` and points further in use the interior
extension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BracketTooWide, EmptySample, OutsideCollar
from .geometry import DEFAULT_QUALITY, Chart, DomainModel, global_distance, local_distance, separation
from .schedule import LocalSchedule

SEPARATION_FLOOR_T = 1e-6  # numeric separation below this shift is not attempted


def log_separation(chart: Chart, s: float, gamma: float, quality=DEFAULT_QUALITY, floor_t=SEPARATION_FLOOR_T):
    """``-log C_t`` for ``t = exp(-s)`` and where it came from.

    Closed forms are used when the graph has one; otherwise the separation
    is measured while ``t >= floor_t`` and replaced by the certified lower
    end ``t**gamma`` of its bracket below that.
    """
    kind = chart.graph.kind
    if kind == "flat":
        return s, "exact"
    if kind == "lipschitz_wedge":
        return s + 0.5 * math.log1p(chart.graph.L**2), "exact"
    t = math.exp(-s)
    if t >= floor_t:
        return -math.log(separation(chart, t, quality)), "numeric"
    return gamma * s, "floor"


@dataclass
class VnValue:
    value: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    underflow: bool


@dataclass
class LocalExhaustion:
    chart: Chart
    schedule: LocalSchedule
    t_base: float = 0.0
    quality: float = DEFAULT_QUALITY
    kappa: float = 1.0
    floor_t: float = SEPARATION_FLOOR_T
    S: dict = field(init=False, repr=False)
    S_source: dict = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        self.S = {}
        self.S_source = {}
        sch = self.schedule
        for n in range(1, sch.n_max + 2):
            self.S[n], self.S_source[n] = log_separation(
                self.chart, float(sch.s(n)), sch.gamma, self.quality, self.floor_t
            )

    # -- constants -------------------------------------------------------
    @property
    def tau_prime(self) -> float:
        return self.schedule.tau_prime

    @property
    def C1(self) -> float:
        """Shell-arithmetic lower constant of the growth sandwich."""
        sch = self.schedule
        return sch.eps0 * sch.t1.s**self.tau_prime / sch.lam**2

    @property
    def C2(self) -> float:
        sch = self.schedule
        return (1 + sch.eps0) * sch.t1.s**self.tau_prime / sch.lam

    @property
    def collar_width(self) -> float:
        """Points with d < collar_width lie in a patched shell."""
        return math.exp(-float(self.schedule.s_prime(self.schedule.n_start)))

    # -- evaluation ------------------------------------------------------
    def base_distance(self, z):
        return local_distance(self.chart, self.t_base, z, self.quality)

    def _shift_distance(self, n, z, d_base):
        t = self.t_base + math.exp(-float(self.schedule.s(n)))
        if t == self.t_base:
            return d_base
        return local_distance(self.chart, t, z, self.quality)

    def _vn_from(self, n, d_shift):
        sch = self.schedule
        S = self.S[n]
        return (-np.log(d_shift) / S - 1.0 - sch.eps0) * math.exp(-n * math.log(sch.lam))

    def eval_v_n(self, n: int, z, d_base=None) -> VnValue:
        """v_n at chart points, with its certified bracket when t_n underflows."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if d_base is None:
            d_base = self.base_distance(z)
        sch = self.schedule
        s_n = float(sch.s(n))
        value = self._vn_from(n, self._shift_distance(n, z, d_base))
        underflow = math.exp(-s_n) == 0.0
        if not underflow:
            return VnValue(value, value, value, False)
        logd = np.log(d_base)
        D_min = -np.logaddexp(logd, -s_n)
        D_max = -np.logaddexp(logd, -sch.gamma * s_n)
        if self.S_source[n] == "exact":
            S_lo = S_hi = self.S[n]
        else:
            S_lo, S_hi = s_n, sch.gamma * s_n
        w = math.exp(-n * math.log(sch.lam))
        lo = (D_min / S_hi - 1 - sch.eps0) * w
        hi = (D_max / S_lo - 1 - sch.eps0) * w
        return VnValue(value, lo, hi, True)

    def shells(self, d_base):
        return self.schedule.shell_index(-np.log(d_base))

    def eval_v(self, z, extend=False, return_parts=False):
        """Patched v at chart points; ``extend`` allows the interior extension."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        sch = self.schedule
        d = self.base_distance(z)
        n = self.shells(d)
        ns = sch.n_start
        collar = n >= ns
        if not extend and not collar.all():
            raise OutsideCollar(
                f"{int((~collar).sum())} point(s) have d >= t'_(n_start) = {self.collar_width:.4g}"
            )
        top = int(min(max(n.max(), ns), sch.n_max))
        v = np.full(z.shape, -np.inf)
        for m in range(ns, top + 1):
            use = (n >= m) | ((m == ns) & ~collar)
            if not use.any():
                continue
            dm = self._shift_distance(m, z[use], d[use])
            v[use] = np.maximum(v[use], self._vn_from(m, dm))
        if (~collar).any():
            w = math.exp(-ns * math.log(sch.lam))
            inner = ~collar
            v[inner] = np.minimum(np.maximum(v[inner], -(1 + sch.eps0) * w), -self.kappa * sch.eps0 * w)
        if return_parts:
            return v, d, n
        return v

    def crossing_at(self, n: int, z) -> np.ndarray:
        """v_n - v_(n+1) at chart points; brackets decide once t_n underflows."""
        a = self.eval_v_n(n, z)
        b = self.eval_v_n(n + 1, z)
        if a.underflow or b.underflow:
            margin = a.lo - b.hi
            undecided = (margin <= 0) & (a.value - b.value > 0)
            if undecided.any():
                raise BracketTooWide(
                    f"bracket cannot decide v_{n} > v_{n+1} at {int(undecided.sum())} point(s)"
                )
            return margin
        return a.value - b.value


@dataclass
class PowerFit:
    C1: float
    C2: float
    tau: float
    n_samples: int
    ratio_bound: Optional[float] = None

    @property
    def ratio(self) -> float:
        return self.C2 / self.C1

    @property
    def passed(self) -> bool:
        return self.ratio_bound is None or self.ratio <= self.ratio_bound * (1 + 1e-12)


def power_fit(neg_v, neg_log_d, tau) -> PowerFit:
    """C1 = min and C2 = max of ``(-v) * (-log d)**tau``."""
    neg_v = np.asarray(neg_v, dtype=float)
    if neg_v.size == 0:
        raise EmptySample("no samples to fit")
    prod = neg_v * np.asarray(neg_log_d, dtype=float) ** tau
    return PowerFit(float(prod.min()), float(prod.max()), tau, int(neg_v.size))


def fit_local_bounds(ex: LocalExhaustion, samples) -> PowerFit:
    """Fit the growth sandwich of v over collar samples (chart coordinates)."""
    samples = np.atleast_1d(np.asarray(samples, dtype=complex))
    if samples.size == 0:
        raise EmptySample("no samples to fit")
    v, d, n = ex.eval_v(samples, extend=True, return_parts=True)
    keep = n >= ex.schedule.n_start
    if not keep.any():
        raise EmptySample("no sample lies in the collar")
    fit = power_fit(-v[keep], -np.log(d[keep]), ex.tau_prime)
    sch = ex.schedule
    fit.ratio_bound = sch.lam * (2 * sch.gamma) ** ex.tau_prime * (1 + sch.eps0) / sch.eps0
    return fit


# ---------------------------------------------------------------------------
# renormalised family
# ---------------------------------------------------------------------------


@dataclass
class RenormalizedLocal:
    domain: DomainModel
    schedules: dict  # chart index -> LocalSchedule
    quality: float = DEFAULT_QUALITY
    kappa: float = 1.0
    C3: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    def exhaustion(self, j: int, t: float = 0.0) -> LocalExhaustion:
        key = (j, float(t))
        if key not in self._cache:
            self._cache[key] = LocalExhaustion(
                self.domain.charts[j], self.schedules[j], float(t), self.quality, self.kappa
            )
        return self._cache[key]

    @property
    def taus(self) -> dict:
        return {j: s.tau_prime for j, s in self.schedules.items()}

    @property
    def tau0(self) -> float:
        return min(self.taus.values())

    @property
    def C(self) -> float:
        """Common comparability constant after normalising the upper constant to 1."""
        return max(self.exhaustion(j).C2 / self.exhaustion(j).C1 for j in self.schedules)

    def exponent(self, j: int) -> float:
        return self.tau0 / self.taus[j]

    def log_neg_w(self, j: int, t: float, zeta) -> np.ndarray:
        """``-log(-w_{t,j})`` is minus this; ``w = -(-v/C1)**(tau0/tau_j)``."""
        ex = self.exhaustion(j, t)
        v = ex.eval_v(zeta, extend=True)
        return self.exponent(j) * (np.log(-v) - math.log(ex.C1))

    def eval_w_tj(self, j: int, t: float, zeta) -> np.ndarray:
        return -np.exp(self.log_neg_w(j, t, zeta))


def compose_power(v, exponent):
    """``x -> -(-x)**exponent`` on negative reals."""
    return -((-np.asarray(v, dtype=float)) ** exponent)


@dataclass
class C3Result:
    C3: float
    min_diff: float
    max_diff: float
    bound_violations: int
    n_samples: int


def derive_C3(domain: DomainModel, ren: RenormalizedLocal, t_sweep, samples, gamma: float,
              quality=DEFAULT_QUALITY, tol=1e-9) -> C3Result:
    """Largest ``log(-log d_{t,j}) - log(-log(d + t))`` over samples in U'_j."""
    samples = np.atleast_1d(np.asarray(samples, dtype=complex))
    d = global_distance(domain, samples, quality, check=False)
    diffs = []
    viol = 0
    for j, c in enumerate(domain.charts):
        zeta = c.to_chart(samples)
        inside = np.abs(zeta) < c.middle
        if not inside.any():
            continue
        for t in t_sweep:
            dt = local_distance(c, t, zeta[inside], quality)
            dd = d[inside]
            ok = (dt < 1) & (dd + t < 1)
            diff = np.log(-np.log(dt[ok])) - np.log(-np.log(dd[ok] + t))
            bound = np.log(-np.log(dd[ok] + t**gamma)) - np.log(-np.log(dd[ok] + t))
            viol += int(np.sum((diff < -tol) | (diff > bound + tol)))
            diffs.append(diff)
    diffs = np.concatenate(diffs) if diffs else np.zeros(0)
    if diffs.size == 0:
        raise EmptySample("no samples inside any U'_j")
    return C3Result(max(0.0, float(diffs.max())), float(diffs.min()), float(diffs.max()), viol, int(diffs.size))
