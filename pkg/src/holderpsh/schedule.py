"""Local and global parameter schedules, built and checked in log space.

Local schedule: ``s_n = (2 gamma)**(n-1) s_1`` with ``t_n = exp(-s_n)``,
``t'_{n+1} = t_n`` and weights ``a_n = lambda**n``.

Global schedule: ``s_n = k**(n-1) s_1``.  Here even ``s_n`` overflows for
moderate ``n`` once ``k`` is large, so the sequence is stored through
``sigma_n = log s_n = (n-1) log k + log s_1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np

from .errors import InvalidSchedule, NoFeasibleLambda, OverflowHorizon
from .logscale import LOG2, LogScale, log1mexp

_S_MAX = 1e300  # beyond this s_n is only kept through sigma_n


# ---------------------------------------------------------------------------
# local schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalSchedule:
    gamma: float
    t1: LogScale
    eps0: float
    lam: float
    n_start: int
    n_max: int

    @property
    def ratio(self) -> float:
        return 2.0 * self.gamma

    def s(self, n) -> np.ndarray:
        """``-log t_n`` (n >= 1; n = 0 gives the virtual ``t_0 = t'_1``)."""
        n = np.asarray(n, dtype=float)
        return self.ratio ** (n - 1.0) * self.t1.s

    def s_prime(self, n):
        """``-log t'_n``; ``t'_{n+1} = t_n`` and ``t'_1 = t_1**(1/(2 gamma))``."""
        return self.s(np.asarray(n) - 1)

    def log_a(self, n):
        return np.asarray(n, dtype=float) * math.log(self.lam)

    @property
    def tau_prime(self) -> float:
        return math.log(self.lam) / math.log(self.ratio)

    def shell_index(self, neg_log_d):
        """n with ``t'_{n+1} <= d < t'_n``, i.e. ``s'_n < -log d <= s'_{n+1}``."""
        D = np.asarray(neg_log_d, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            n = np.ceil(np.log(np.maximum(D, 1e-300) / self.t1.s) / math.log(self.ratio)) + 1.0
        n = np.where(D <= self.s_prime(1), 0, np.maximum(n, 1))
        # snap against rounding at the shell edges
        n = np.where((n >= 1) & (D <= self.s_prime(n)), n - 1, n)
        n = np.where((n >= 0) & (D > self.s_prime(n + 1)), n + 1, n)
        return n.astype(int)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "s1": self.t1.s,
            "eps0": self.eps0,
            "lambda": self.lam,
            "n_start": self.n_start,
            "n_max": self.n_max,
            "tau_prime": self.tau_prime,
        }


def slack_inequality(gamma: float, eps0: float, s1: float, n) -> np.ndarray:
    """Left minus right side of the n-threshold inequality; positive when it holds."""
    n = np.asarray(n, dtype=float)
    corr = LOG2 / ((2 * gamma) ** (n - 1) * gamma * (-s1))
    return (1 - 1 / (2 * gamma)) - (1 + eps0 - 1 / gamma - corr)


def _local_bounds(gamma, eps0, lam, s1, n):
    """Rigorous upper bound on v_{n+1} and lower bound on v_n at d_0 = t'_{n+1}."""
    n = np.asarray(n, dtype=float)
    s_n = (2 * gamma) ** (n - 1) * s1
    s_n1 = 2 * gamma * s_n
    # log(t'_{n+1} + t_{n+1}) / log t_{n+1} with t'_{n+1} = t_n
    r1 = (s_n - np.log1p(np.exp(-(s_n1 - s_n)))) / s_n1
    # log(t'_{n+1} + t_n) / log(t_n**gamma) = log(2 t_n) / log(t_n**gamma)
    r2 = (s_n - LOG2) / (gamma * s_n)
    log_lam = math.log(lam)
    upper = (-1.0 + r1) * np.exp(-(n + 1) * log_lam)
    lower = (-(1.0 + eps0) + r2) * np.exp(-n * log_lam)
    return upper, lower, r1, r2


def _local_margins(gamma, eps0, lam, s1, ns):
    upper, lower, _, _ = _local_bounds(gamma, eps0, lam, s1, ns)
    return lower - upper


def build_local_schedule(
    gamma: float,
    t1: LogScale,
    n_max: int = 50,
    lam_grid: Optional[np.ndarray] = None,
) -> LocalSchedule:
    """Pick eps0 = 1/(4 gamma), the least admissible n_start and the largest feasible lambda."""
    if not gamma > 1:
        raise InvalidSchedule(f"gamma must exceed 1, got {gamma}")
    eps0 = 1.0 / (4.0 * gamma)
    ns_all = np.arange(1, n_max + 1)
    ok = slack_inequality(gamma, eps0, t1.s, ns_all) > 0
    if not ok.any():
        raise NoFeasibleLambda(f"threshold inequality fails for every n <= {n_max}")
    n_start = int(ns_all[np.argmax(ok)])
    ns = np.arange(n_start, n_max + 1)
    if lam_grid is None:
        lam_grid = np.linspace(1.0, 2.0 * gamma, 4001)[1:]
    lam_grid = np.asarray(lam_grid, dtype=float)
    # lower > upper  <=>  lambda < (1 - r1) / (1 + eps0 - r2), shell by shell
    _, _, r1, r2 = _local_bounds(gamma, eps0, 1.0, t1.s, ns)
    den = 1.0 + eps0 - r2
    with np.errstate(divide="ignore"):
        cap = np.where(den > 0, (1.0 - r1) / den, np.inf).min()
    feasible = [
        lam for lam in lam_grid[(lam_grid > 1) & (lam_grid < cap)][::-1][:8]
        if np.all(_local_margins(gamma, eps0, lam, t1.s, ns) > 0)
    ]
    if not feasible:
        m = _local_margins(gamma, eps0, float(lam_grid.min()), t1.s, ns)
        worst = int(ns[np.argmin(m)])
        raise NoFeasibleLambda(
            f"crossing v_n > v_(n+1) fails at n={worst} for every lambda in the grid "
            f"(gamma={gamma}, t1={t1.t:g})"
        )
    return LocalSchedule(gamma, t1, eps0, float(max(feasible)), n_start, n_max)


@dataclass
class CrossingReport:
    name: str
    ns: np.ndarray
    margins: np.ndarray
    extra: dict = field(default_factory=dict)
    n_first: Optional[int] = None  # n_big for the global check

    @property
    def failing(self) -> list:
        return [int(n) for n, m in zip(self.ns, self.margins) if not m > 0]

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margins)) if self.margins.size else float("nan")

    @property
    def passed(self) -> bool:
        return not self.failing and all(self.extra.get("checks", {}).values())


def verify_crossing_local(sched: LocalSchedule, n_range=None, lam: Optional[float] = None) -> CrossingReport:
    """Evaluate the bound pair at every shell interface of ``n_range``."""
    lo, hi = n_range if n_range is not None else (sched.n_start, sched.n_max)
    ns = np.arange(lo, hi + 1)
    lam = sched.lam if lam is None else lam
    upper, lower, r1, r2 = _local_bounds(sched.gamma, sched.eps0, lam, sched.t1.s, ns)
    g = sched.gamma
    bound_216 = LOG2 / ((2 * g) ** (ns - 1.0) * g * (-sched.t1.s)) + 1 / g
    checks = {
        "ratio_upper_le_1_over_2gamma": bool(np.all(r1 <= 1 / (2 * g) + 1e-15)),
        "ratio_lower_ge_bound": bool(np.all(r2 >= bound_216 - 1e-14)),
    }
    return CrossingReport(
        "crossing_local",
        ns,
        lower - upper,
        {"upper": upper, "lower": lower, "r1": r1, "r2": r2, "checks": checks},
    )


# ---------------------------------------------------------------------------
# global schedule
# ---------------------------------------------------------------------------


def int_text(k: int) -> str:
    """Decimal text for k, or hex once decimal conversion would be refused."""
    return str(k) if k.bit_length() < 12000 else hex(k)


def parse_int_text(s: str) -> int:
    return int(s, 16) if s.startswith("0x") else int(s)


def smallest_k(threshold: float) -> int:
    """Smallest integer k >= 2 with log k > threshold."""
    if threshold > 1e7:
        raise OverflowHorizon(f"log k > {threshold:.4g} needs a k with more than 4e6 digits")
    # enough digits to pin down the integer part of exp(threshold)
    dps = 30 + int(max(threshold, 0.0) / math.log(10))
    with mpmath.workdps(dps):
        k = int(mpmath.floor(mpmath.exp(threshold))) + 1
        while not mpmath.log(k) > threshold:
            k += 1
    return max(k, 2)


@dataclass(frozen=True)
class GlobalSchedule:
    gamma: float
    t1: LogScale
    k: int
    eps1: float
    lam_prime: float
    tau0: float
    C4: float
    n_big: int
    n_max: int
    k_min: int = 0

    @property
    def log_k(self) -> float:
        return float(mpmath.log(self.k))

    def sigma(self, n):
        """``log s_n``."""
        return (np.asarray(n, dtype=float) - 1.0) * self.log_k + math.log(self.t1.s)

    def s(self, n):
        with np.errstate(over="ignore"):
            return np.exp(self.sigma(n))

    def L(self, n):
        """``log(-log t_n**gamma) = log gamma + sigma_n``."""
        return math.log(self.gamma) + self.sigma(n)

    def log_b(self, n):
        return np.asarray(n, dtype=float) * math.log(self.lam_prime)

    def neg_log_t2(self, n):
        """``-log t''_n`` with ``t''_n = t_n**(1/k) - t_n**gamma``.

        Stored as the dominant term ``s_n / k`` minus the correction
        ``log(1 - exp(-(gamma - 1/k) s_n))``.
        """
        n = np.asarray(n, dtype=float)
        with np.errstate(over="ignore"):
            dom = np.exp(self.sigma(n) - self.log_k)
            corr = log1mexp((self.gamma - 1.0 / self.k) * np.exp(self.sigma(n)))
        return dom - corr

    @property
    def tau(self) -> float:
        return math.log(self.lam_prime) / self.log_k

    @property
    def s_horizon(self) -> int:
        """Largest n whose s_n is still a finite double."""
        lim = math.log(_S_MAX)
        return int(max(1, math.floor((lim - math.log(self.t1.s)) / self.log_k) + 1))

    def shell_index(self, neg_log_d):
        """n with ``t''_{n+1} <= d < t''_n``; 0 for points beyond ``t''_1``."""
        D = np.atleast_1d(np.asarray(neg_log_d, dtype=float))
        out = np.zeros(D.shape, int)
        edges = self.neg_log_t2(np.arange(1, self.n_max + 2))
        # edges increasing in n; D in (edge_n, edge_{n+1}] -> shell n
        idx = np.searchsorted(edges, D, side="left")
        out = np.where(D <= edges[0], 0, idx)
        return out

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "s1": self.t1.s,
            "k": int_text(self.k),
            "k_min": int_text(self.k_min),
            "log_k": self.log_k,
            "eps1": self.eps1,
            "lambda_prime": self.lam_prime,
            "tau0": self.tau0,
            "C4": self.C4,
            "n_big": self.n_big,
            "n_max": self.n_max,
            "tau": self.tau,
            "s_horizon": self.s_horizon,
        }


def _global_terms(gamma, log_k, eps1, C4, tau0, s1, ns):
    """Right side of the n-shell lower comparison and the (n+1)-shell value."""
    ns = np.asarray(ns, dtype=float)
    sigma = (ns - 1.0) * log_k + math.log(s1)
    L = math.log(gamma) + sigma
    with np.errstate(over="ignore"):
        s = np.exp(sigma)
    # log( log t^gamma / log 2t ) = log(gamma s / (s - log 2)) = log gamma - log1p(-log2 / s)
    first = (math.log(gamma) - np.log1p(-LOG2 / s)) / L
    A = first + (eps1 + C4) / (tau0 * L)
    B = (math.log(gamma) + log_k) / (L + log_k)
    return A, B


def _global_margin(A, B, lam_prime, ns):
    ns = np.asarray(ns, dtype=float)
    lb = math.log(lam_prime)
    return B * np.exp(-(ns + 1) * lb) - A * np.exp(-ns * lb)


def _first_good(margins, ns):
    """Least n such that margins are positive from n through the end."""
    bad = np.nonzero(~(margins > 0))[0]
    if bad.size == 0:
        return int(ns[0])
    last_bad = bad[-1]
    if last_bad == len(ns) - 1:
        return None
    return int(ns[last_bad + 1])


def build_global_schedule(
    gamma: float,
    tau0: float,
    C4: float,
    eps1: float,
    t1: LogScale,
    n_max: int = 50,
    lam_grid: Optional[np.ndarray] = None,
    n_big_limit: Optional[int] = None,
    k: Optional[int] = None,
) -> GlobalSchedule:
    """Choose k from the log k threshold (doubled once) and the largest feasible lambda'."""
    if not tau0 > 0:
        raise InvalidSchedule("tau_j0 must be positive")
    if not C4 >= 0:
        raise InvalidSchedule("C4 must be nonnegative")
    if not eps1 > 0:
        raise InvalidSchedule("eps1 must be positive")
    threshold = (eps1 + C4) / tau0
    if k is None:
        k_min = smallest_k(threshold)
        k = 2 * k_min
    else:
        k_min = k
        if not math.log(k) > threshold:
            raise InvalidSchedule(
                f"k={int_text(k)} violates log k > (eps1 + C4)/tau_j0 = {threshold:.6g}"
            )
    log_k = float(mpmath.log(k))
    if not math.isfinite((n_max - 1) * log_k + math.log(t1.s)):
        raise OverflowHorizon("log-log representation of s_n overflows")
    n_big_limit = n_max // 2 if n_big_limit is None else n_big_limit
    ns = np.arange(1, n_max + 1)
    A, B = _global_terms(gamma, log_k, eps1, C4, tau0, t1.s, ns)
    if lam_grid is None:
        lam_grid = 1.0 + np.logspace(-9, math.log10(3.0), 3000)
    best = None
    for lp in sorted(np.asarray(lam_grid, dtype=float)):
        nb = _first_good(_global_margin(A, B, lp, ns), ns)
        if nb is not None and nb <= n_big_limit:
            best = (lp, nb)
    if best is None:
        m = _global_margin(A, B, float(min(lam_grid)), ns)
        nb = _first_good(m, ns)
        raise NoFeasibleLambda(
            f"no lambda' in the grid gives w_n > w_(n+1) from n <= {n_big_limit} "
            f"(log k={log_k:.6g}, threshold={threshold:.4g}, first good n at smallest lambda' = {nb})"
        )
    lp, nb = best
    return GlobalSchedule(gamma, t1, int(k), eps1, float(lp), tau0, C4, nb, n_max, k_min)


def verify_crossing_global(sched: GlobalSchedule, n_range=None, lam_prime: Optional[float] = None) -> CrossingReport:
    """b-weighted comparison of the two shell bounds at ``d = t''_{n+1}``."""
    lo, hi = n_range if n_range is not None else (1, sched.n_max)
    ns = np.arange(lo, hi + 1)
    lp = sched.lam_prime if lam_prime is None else lam_prime
    A, B = _global_terms(sched.gamma, sched.log_k, sched.eps1, sched.C4, sched.tau0, sched.t1.s, ns)
    margins = _global_margin(A, B, lp, ns)
    nb = _first_good(margins, ns)
    rep = CrossingReport("crossing_global", ns, margins, {"A": A, "B": B}, n_first=nb)
    ok = nb is not None and nb <= sched.n_big
    rep.extra["checks"] = {"n_big_within_build": bool(ok)}
    # only margins from n_big on are part of the contract
    if nb is not None:
        keep = ns >= nb
        rep.ns, rep.margins = ns[keep], margins[keep]
    return rep
