"""End-to-end build, bundle serialisation and the verification suite.

Everything random is drawn from generators seeded by the run seed, so the
same configuration always gives the same bundle and the same reports.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .errors import BracketTooWide, HolderPshError
from .geometry import (
    Chart,
    DomainModel,
    audit_distance_inequalities,
    chart_agreement_check,
    chart_membership,
    covering_check,
    domain_contains,
    estimate_gamma,
    global_distance,
    local_distance,
    points_at_depth,
    sampled_holder_check,
    separation,
)
from .local import C3Result, RenormalizedLocal, derive_C3, fit_local_bounds
from .logscale import LogScale
from .patching import (
    GlobalBuild,
    GlobalExhaustion,
    PatchedFamily,
    build_cutoffs,
    build_global,
    check_richberg,
    fit_final_bounds,
    residual_comparison,
    sample_collar,
)
from .schedule import (
    GlobalSchedule,
    LocalSchedule,
    build_local_schedule,
    parse_int_text,
    verify_crossing_global,
    verify_crossing_local,
)
from .specfile import RunConfig, domain_to_dict, parse_domain_spec
from .verify import (
    VerificationReport,
    baseline_demailly,
    index_witness,
    oracle_report,
    probe_report,
    random_probes,
    submean_batch,
)
REPRESENTABLE_DEPTH = 1e-12  # shells thinner than this are not sampled pointwise
RICHBERG_TS = (1e-2, 1e-3)
C3_TS = (1e-2, 1e-3)


def rng_for(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream)])


def parallel_eval(f, z, workers: int = 1, chunk: int = 256) -> np.ndarray:
    """``f`` on ``z`` in ordered chunks; the result does not depend on ``workers``."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if workers <= 1 or z.size <= chunk:
        return np.asarray(f(z), dtype=float)
    parts = [z[i : i + chunk] for i in range(0, z.size, chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.concatenate(list(pool.map(f, parts)))


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------


@dataclass
class Build:
    config: RunConfig
    domain: DomainModel
    gammas: dict  # chart index -> gamma_j
    gamma: float
    ren: RenormalizedLocal
    C3: float
    glob: GlobalBuild
    gamma_estimates: Optional[dict] = None  # chart index -> sweep record
    C3_result: Optional[C3Result] = None

    @property
    def family(self) -> PatchedFamily:
        return self.glob.family

    @property
    def exhaustion(self) -> Optional[GlobalExhaustion]:
        return self.glob.exhaustion


def estimate_gammas(domain: DomainModel, cfg: RunConfig) -> dict:
    return {
        j: estimate_gamma(c, cfg.gamma_t, delta=cfg.delta_gamma, quality=cfg.quality)
        for j, c in enumerate(domain.charts)
    }


def build_pipeline(domain: DomainModel, cfg: RunConfig) -> Build:
    """Schedules, local exhaustions, cutoffs and the global exhaustion."""
    est = None
    if cfg.gamma is not None:
        gammas = {j: float(cfg.gamma) for j in range(len(domain.charts))}
    else:
        raw = estimate_gammas(domain, cfg)
        gammas = {j: e.gamma for j, e in raw.items()}
        est = {
            j: {"t": e.t_values.tolist(), "separation": e.separations.tolist(),
                "seed": e.seed, "seed_valid": e.seed_valid}
            for j, e in raw.items()
        }
    gamma = max(gammas.values())
    t1 = LogScale.from_t(cfg.t1)
    schedules = {j: build_local_schedule(g, t1, cfg.n_max) for j, g in gammas.items()}
    ren = RenormalizedLocal(domain, schedules, cfg.quality)
    width = min(ren.exhaustion(j).collar_width for j in schedules)
    z = sample_collar(domain, cfg.samples, rng_for(cfg.seed, 1), 1e-8, width / 2, cfg.quality)
    c3 = derive_C3(domain, ren, C3_TS, z, gamma, cfg.quality)
    ren.C3 = c3.C3
    glob = build_global(
        domain, ren, c3.C3, gamma, rng_for(cfg.seed, 2), eps1=cfg.eps1, t1=t1, n_max=cfg.n_max,
        plateau_margin=cfg.plateau_margin, calibration_samples=cfg.samples,
    )
    return Build(cfg, domain, gammas, gamma, ren, c3.C3, glob, est, c3)


# ---------------------------------------------------------------------------
# bundle
# ---------------------------------------------------------------------------


def bundle_dict(b: Build) -> dict:
    """All constants of a build, each with a note on how it was obtained."""
    ren = b.ren
    cut = b.family.cutoffs
    charts = []
    for j in range(len(b.domain.charts)):
        ex = ren.exhaustion(j)
        entry = {
            "gamma": b.gammas[j],
            "schedule": ex.schedule.to_dict(),
            "tau_j": ren.taus[j],
            "C1": ex.C1,
            "C2": ex.C2,
            "collar_width": ex.collar_width,
            "cutoff": {"height": cut.cutoffs[j].height, "q0": cut.cutoffs[j].q0, "q1": cut.cutoffs[j].q1},
        }
        if b.gamma_estimates is not None:
            entry["gamma_estimate"] = b.gamma_estimates[j]
        charts.append(entry)
    glob = b.glob
    out = {
        "format": "holderpsh-bundle/1",
        "version": __version__,
        "config": b.config.to_dict(),
        "domain": domain_to_dict(b.domain),
        "gamma": b.gamma,
        "charts": charts,
        "constants": {
            "tau0": ren.tau0,
            "C": ren.C,
            "C3": b.C3,
            "M": cut.M,
            "K": glob.K,
            "C4": glob.C4,
            "C4_sampled": glob.C4_fit,
            "eps1": b.config.eps1,
            "plateau_margin": b.config.plateau_margin,
        },
        "global_schedule": glob.schedule.to_dict() if glob.schedule else None,
        "global_error": glob.error,
        "provenance": {
            "gamma": "max over charts of the smallest grid exponent with t**gamma <= C_t <= t on the t sweep",
            "schedule": "eps0 = 1/(4 gamma); least n_start with the threshold inequality; largest grid lambda",
            "eps0": "1/(4 gamma) per chart",
            "lambda": "largest grid value below the closed-form crossing cap, per chart",
            "tau_j": "log lambda / log(2 gamma)",
            "tau0": "smallest tau_j over charts",
            "eps1": "run setting",
            "plateau_margin": "run setting: added to every plateau height",
            "C1": "eps0 s1**tau' / lambda**2 (shell arithmetic)",
            "C2": "(1 + eps0) s1**tau' / lambda (shell arithmetic)",
            "C": "max over charts of C2/C1",
            "C3": "max over collar samples of log(-log d_t,j) - log(-log(d + t)), t in {1e-2, 1e-3}",
            "M": "1.1 x largest Laplacian bound of the quintic plateau bumps",
            "K": "largest plateau height + M x largest |z|^2 over the plateaus + 0.05",
            "C4": "K - smallest (height + M min|z|^2 - (tau0/tau_j) log C) over charts + 0.05",
            "C4_sampled": "largest tau0 log(-log(d + t)) - w_t over calibration samples",
            "k": "twice the smallest integer with log k > (eps1 + C4)/tau0",
            "lambda_prime": "largest grid value with global crossing from n_big <= n_max - 1",
            "n_big": "first shell from which the global crossing margins stay positive",
            "tau": "log lambda' / log k",
        },
    }
    return out


def dumps_bundle(b: Build) -> str:
    return json.dumps(bundle_dict(b), sort_keys=True, indent=1) + "\n"


def _schedule_from(d: dict) -> LocalSchedule:
    return LocalSchedule(d["gamma"], LogScale(d["s1"]), d["eps0"], d["lambda"], d["n_start"], d["n_max"])


def _global_from(d: dict) -> GlobalSchedule:
    return GlobalSchedule(
        d["gamma"], LogScale(d["s1"]), parse_int_text(d["k"]), d["eps1"], d["lambda_prime"], d["tau0"],
        d["C4"], d["n_big"], d["n_max"], parse_int_text(d["k_min"]),
    )


def load_bundle(data, cfg: Optional[RunConfig] = None) -> Build:
    """Rebuild every evaluable object from a bundle without resampling."""
    if isinstance(data, str):
        data = json.loads(data)
    if data.get("format") != "holderpsh-bundle/1":
        raise HolderPshError("not a holderpsh bundle")
    domain = parse_domain_spec(yaml.safe_dump(data["domain"]))
    if cfg is None:
        cfg = RunConfig(**data["config"])
    schedules = {j: _schedule_from(c["schedule"]) for j, c in enumerate(data["charts"])}
    gammas = {j: c["gamma"] for j, c in enumerate(data["charts"])}
    k = data["constants"]
    ren = RenormalizedLocal(domain, schedules, cfg.quality, C3=k["C3"])
    cut = build_cutoffs(domain, ren, k["C3"], k["plateau_margin"])
    fam = PatchedFamily(domain, ren, cut, k["K"], cfg.quality)
    glob = GlobalBuild(fam, k["K"], k["C4"], k["C4_sampled"], [], error=data.get("global_error"))
    if data.get("global_schedule"):
        glob.schedule = _global_from(data["global_schedule"])
        glob.exhaustion = GlobalExhaustion(fam, glob.schedule, k["C4"])
    est = None
    if all("gamma_estimate" in c for c in data["charts"]):
        est = {j: c["gamma_estimate"] for j, c in enumerate(data["charts"])}
    return Build(cfg, domain, gammas, data["gamma"], ren, k["C3"], glob, est)


# ---------------------------------------------------------------------------
# sampling helpers
# ---------------------------------------------------------------------------


def chart_queries(chart: Chart, rng: np.random.Generator, n: int, t: float = 0.0, radius=None) -> np.ndarray:
    """Uniform chart points in ``B(0, radius)`` (default U'_j) inside the chart domain."""
    radius = chart.middle if radius is None else radius
    out = []
    while sum(len(o) for o in out) < n:
        m = 4 * n
        r = radius * np.sqrt(rng.uniform(0, 1, m))
        z = r * np.exp(2j * np.pi * rng.uniform(0, 1, m))
        out.append(z[chart_membership(chart, t, z)])
    return np.concatenate(out)[:n]


def sweep_points(domain: DomainModel, n: int, d_max=1e-1, d_min=1e-8, quality=None) -> np.ndarray:
    """Points above one boundary point of chart 0 at log-spaced depths."""
    c = domain.charts[0]
    depths = np.logspace(math.log10(d_max), math.log10(d_min), n)
    x = np.full(n, 0.25 * c.inner_radius)
    zeta = points_at_depth(c, 0.0, x, depths, quality or 0.02)
    return c.to_ambient(zeta)


# ---------------------------------------------------------------------------
# the verification suite
# ---------------------------------------------------------------------------


def _rep(name, n, viol, worst, **kw) -> VerificationReport:
    return VerificationReport(name, int(n), int(min(viol, n)), float(worst), **kw)


def audit_geometry(domain: DomainModel, cfg: RunConfig, gamma: Optional[float] = None) -> list:
    """Covering, chart agreement, Hoelder sampling, gamma estimation and distance audits."""
    reps = []
    rng = rng_for(cfg.seed, 10)
    cov = covering_check(domain)
    reps.append(_rep("covering", cov.n_samples, cov.n_violations, cov.worst,
                     details={"worst_point": cov.details.get("worst_point")}))
    agr = chart_agreement_check(domain, rng)
    reps.append(_rep("chart_agreement", max(agr.n_samples, 1), agr.n_violations, 0.0))
    for j, c in enumerate(domain.charts):
        ratio, ok = sampled_holder_check(c, rng)
        reps.append(_rep(f"holder_sample[{j}]", 1, 0 if ok else 1, c.holder_constant - ratio,
                         constants={"observed": ratio, "declared": c.holder_constant}))
    est = estimate_gammas(domain, cfg)
    g = max(e.gamma for e in est.values()) if gamma is None else gamma
    for j, e in est.items():
        lo = e.separations - e.t_values ** e.gamma
        hi = e.t_values - e.separations
        viol = int(np.sum(lo < -1e-15) + np.sum(hi < -1e-12 * e.t_values))
        reps.append(_rep(f"gamma_bracket[{j}]", e.t_values.size, viol, float(min(lo.min(), hi.min())),
                         constants={"gamma": e.gamma, "seed": e.seed, "seed_valid": e.seed_valid}))
    for j, c in enumerate(domain.charts):
        z = chart_queries(c, rng, cfg.samples)
        for t in cfg.audit_t:
            a = audit_distance_inequalities(c, t, z, g, cfg.quality)
            worst = float(min(a.margin_lower.min(), a.margin_upper.min(), a.margin_gamma.min()))
            reps.append(_rep(f"distance_audit[{j}][t={t:g}]", a.n_samples,
                             a.violations_lower + a.violations_upper + a.violations_gamma, worst,
                             constants={"C_t": a.separation, "gamma": g}))
    return reps


def _shell_samples(ex, rng, n_pts, lo_depth, hi_depth):
    c = ex.chart
    xs = rng.uniform(-c.inner_radius, c.inner_radius, n_pts)
    depth = np.exp(rng.uniform(math.log(lo_depth), math.log(hi_depth), n_pts))
    return points_at_depth(c, 0.0, xs, depth, ex.quality)


def local_checks(b: Build, rng: np.random.Generator, n_points: int = 50, n_shell: int = 500) -> list:
    reps = []
    seen = set()
    for j, c in enumerate(b.domain.charts):
        ex = b.ren.exhaustion(j)
        sch = ex.schedule
        key = (c.graph, c.radius, sch)
        if key in seen:
            continue
        seen.add(key)
        cr = verify_crossing_local(sch)
        reps.append(_rep(f"crossing_local[{j}]", cr.ns.size, len(cr.failing), cr.min_margin,
                         constants={"lambda": sch.lam, "n_start": sch.n_start}))
        for n in range(sch.n_start, sch.n_max):
            depth = math.exp(-float(sch.s(n)))  # d = t'_{n+1} = t_n
            if depth < REPRESENTABLE_DEPTH:
                break
            xs = rng.uniform(-c.inner_radius, c.inner_radius, n_points)
            z = points_at_depth(c, 0.0, xs, np.full(n_points, depth), ex.quality)
            try:
                m = ex.crossing_at(n, z)
                reps.append(_rep(f"crossing_local_pointwise[{j}][n={n}]", m.size, int(np.sum(m <= 0)), m.min()))
            except BracketTooWide as exc:
                reps.append(_rep(f"crossing_local_pointwise[{j}][n={n}]", n_points, n_points, -np.inf,
                                 details={"error": str(exc)}))
        for n in range(sch.n_start, sch.n_max):
            hi = math.exp(-float(sch.s_prime(n)))
            lo = math.exp(-float(sch.s_prime(n + 1)))
            if lo < REPRESENTABLE_DEPTH:
                break
            z = _shell_samples(ex, rng, n_shell, lo, hi)
            v, d, shell = ex.eval_v(z, extend=True, return_parts=True)
            w = math.exp(-n * math.log(sch.lam))
            inside = shell == n
            up = -sch.eps0 * w - v[inside]
            down = v[inside] + (1 + sch.eps0) * w
            tol = 1e-12 * w
            viol = int(np.sum(up < -tol) + np.sum(down < -tol))
            reps.append(_rep(f"shell_sandwich[{j}][n={n}]", int(inside.sum()), viol,
                             float(min(up.min(), down.min())) if inside.any() else 0.0))
        zs = _shell_samples(ex, rng, n_shell, 1e-8, min(1e-2, ex.collar_width * 0.999))
        fit = fit_local_bounds(ex, zs)
        reps.append(_rep(f"local_growth[{j}]", fit.n_samples, 0 if fit.passed else 1, fit.ratio_bound - fit.ratio,
                         constants={"C1": fit.C1, "C2": fit.C2, "ratio": fit.ratio, "bound": fit.ratio_bound,
                                    "tau_prime": fit.tau}))
    return reps


def _psh_check(name, f, domain, rng, centers, workers, eval_err=0.0):
    d = global_distance(domain, centers, check=False)
    probes = random_probes(rng, centers, d)
    res = submean_batch(lambda p: parallel_eval(f, p, workers), probes, d, eval_err)
    return probe_report(name, res, probes)


def counterexample_check(rng, centers, d) -> VerificationReport:
    """-|z|^2 must be flagged wherever rho^2 exceeds the tolerance, with margin -rho^2."""
    probes = random_probes(rng, centers, d)
    res = submean_batch(lambda p: -np.abs(p) ** 2, probes)
    rho2 = np.array([p.radius**2 for p in probes])
    margins = np.array([r.margin for r in res])
    tol = np.array([r.tol for r in res])
    flagged = np.array([not r.passed for r in res])
    resolvable = rho2 > 2 * tol
    err = np.abs(margins + rho2) - tol
    bad = int(np.sum(resolvable & (~flagged | (err > 0))))
    worst = -float(np.max(err[resolvable])) if resolvable.any() else 0.0
    return _rep("psh_counterexample", int(resolvable.sum()), bad, worst,
                details={"flagged": int(flagged.sum()), "probes": len(probes)})


def global_checks(b: Build, rng: np.random.Generator, cfg: RunConfig) -> list:
    reps = []
    dom = b.domain
    fam = b.family
    width = fam.collar_width
    z = sample_collar(dom, max(cfg.samples // 2, 20), rng, 1e-8, width / 2, cfg.quality)
    for t in RICHBERG_TS:
        r = check_richberg(fam, b.glob.C4, b.gamma, t, z)
        reps.append(_rep(f"richberg[t={t:g}]", r.n_samples, r.failures, min(r.upper_margin, r.lower_margin),
                         constants={"C4": b.glob.C4, "K": b.glob.K}))
    ex = b.exhaustion
    if ex is None:
        reps.append(_rep("global_schedule", 1, 1, -np.inf, details={"error": b.glob.error}))
        return reps
    sch = ex.schedule
    cr = verify_crossing_global(sch)
    ok = cr.n_first is not None and cr.n_first <= sch.n_big
    reps.append(_rep("crossing_global", max(cr.ns.size, 1), len(cr.failing) + (0 if ok else 1), cr.min_margin,
                     constants={"k": sch.to_dict()["k"], "lambda_prime": sch.lam_prime, "n_big": sch.n_big,
                                "tau": sch.tau, "s_horizon": sch.s_horizon}))
    # pointwise w_n > w_{n+1} on d = t''_{n+1}, only where that depth is a double
    depths = np.exp(-sch.neg_log_t2(np.arange(sch.n_big + 1, sch.n_max + 1)))
    rep_n = [n for n, dd in zip(range(sch.n_big, sch.n_max), depths) if dd >= REPRESENTABLE_DEPTH]
    if not rep_n:
        reps.append(_rep("crossing_global_pointwise", 0, 0, 0.0,
                         details={"skipped": f"t''_(n+1) underflows for every n >= n_big = {sch.n_big}"}))
    for n in rep_n:
        dd = float(np.exp(-sch.neg_log_t2(n + 1)))
        c = dom.charts[0]
        zeta = points_at_depth(c, 0.0, rng.uniform(-c.inner_radius, c.inner_radius, 50), np.full(50, dd))
        zz = c.to_ambient(zeta)
        m = ex.w_n(n, zz) - ex.w_n(n + 1, zz)
        reps.append(_rep(f"crossing_global_pointwise[n={n}]", m.size, int(np.sum(m <= 0)), m.min()))
    zs = sweep_points(dom, cfg.sweep_points, quality=cfg.quality)
    w, d, _ = ex.eval_w(zs, return_parts=True)
    fit = fit_final_bounds(w, d, sch.tau)
    reps.append(_rep("final_sandwich", fit.n_samples, fit.violations, 0.0,
                     constants={"M1": fit.M1, "M2": fit.M2, "tau": fit.tau}))
    rc = residual_comparison(w, d, sch.tau)
    reps.append(_rep("loglog_factor_fit", 1, 0 if rc.loglog_better else 1, rc.power_residual - rc.loglog_residual,
                     constants={"loglog_residual": rc.loglog_residual, "power_residual": rc.power_residual}))
    keep = d < math.exp(-1)
    iw = index_witness(w[keep], d[keep], sch.tau, fit.M1)
    reps.append(_rep("index_witness", iw.n_samples, 0 if iw.passed else 1, 0.0,
                     constants={"tau": iw.tau, "C": iw.C}))
    return reps


def _psh_v_check(b: Build, rng, centers, workers) -> VerificationReport:
    """Local v_j probed at the centres whose first containing plateau is chart j."""
    dom = b.domain
    owner = np.full(centers.size, -1)
    for j, c in enumerate(dom.charts):
        free = owner < 0
        owner[free & (np.abs(c.to_chart(centers)) < c.inner_radius)] = j
    parts = []
    for j, c in enumerate(dom.charts):
        sel = owner == j
        if sel.any():
            ex = b.ren.exhaustion(j)
            f = lambda p, c=c, ex=ex: ex.eval_v(c.to_chart(p), extend=True)  # noqa: E731
            parts.append(_psh_check("psh_v", f, dom, rng, centers[sel], workers))
    bad = [p.details["worst_point"] for p in parts if p.details["worst_point"] is not None]
    return _rep("psh_v", sum(p.n_samples for p in parts), sum(p.n_violations for p in parts),
                min((p.worst_margin for p in parts), default=0.0),
                details={"worst_point": bad[0] if bad else None, "charts": len(parts)})


def psh_checks(b: Build, rng: np.random.Generator, cfg: RunConfig) -> list:
    dom = b.domain
    fam = b.family
    centers = sample_collar(dom, cfg.probes, rng, 1e-8, fam.collar_width / 2, cfg.quality)
    reps = [_psh_v_check(b, rng, centers, cfg.workers)]
    reps.append(_psh_check("psh_w_t", lambda p: fam.eval_w_t(1e-3, p), dom, rng, centers, cfg.workers))
    if b.exhaustion is not None:
        reps.append(_psh_check("psh_w", b.exhaustion.eval_w, dom, rng, centers, cfg.workers))
    d = global_distance(dom, centers, check=False)
    reps.append(counterexample_check(rng, centers, d))
    return reps


def oracle_checks(domain: DomainModel, cfg: RunConfig, rng: np.random.Generator, n: int = 200) -> list:
    reps = []
    per = max(n // len(domain.charts), 10) if len(domain.charts) > 1 else n
    for j, c in enumerate(domain.charts):
        z = chart_queries(c, rng, per)
        loc = local_distance(c, 0.0, z, cfg.quality)
        r = oracle_report(c, 0.0, z, loc, cfg.oracle_resolution)
        r.name = f"distance_oracle[{j}]"
        reps.append(r)
    return reps


def run_suite(b: Build, cfg: Optional[RunConfig] = None) -> list:
    """The full property suite on a build; every check returns one report."""
    cfg = b.config if cfg is None else cfg
    reps = []
    reps += oracle_checks(b.domain, cfg, rng_for(cfg.seed, 20))
    reps += audit_geometry(b.domain, cfg, b.gamma)
    reps += local_checks(b, rng_for(cfg.seed, 21))
    reps += global_checks(b, rng_for(cfg.seed, 22), cfg)
    reps += psh_checks(b, rng_for(cfg.seed, 23), cfg)
    return reps


# ---------------------------------------------------------------------------
# evaluation tables
# ---------------------------------------------------------------------------


def sweep_fit(b: Build):
    """Sandwich constants fitted on the default depth sweep, or None without a global schedule."""
    if b.exhaustion is None:
        return None
    zs = sweep_points(b.domain, b.config.sweep_points, quality=b.config.quality)
    w, d, _ = b.exhaustion.eval_w(zs, return_parts=True)
    return fit_final_bounds(w, d, b.exhaustion.schedule.tau)


EVAL_COLUMNS = ("re", "im", "d", "shell", "v", "w_t0", "w", "lower", "upper", "baseline", "flag")


def evaluate_points(b: Build, z, fit=None, workers: int = 1) -> list:
    """One row per point; points outside the domain are flagged, not fatal."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    rows = []
    inside = domain_contains(b.domain, z, b.config.quality)
    for zi, ok in zip(z, inside):
        row = dict.fromkeys(EVAL_COLUMNS, "")
        row["re"], row["im"] = zi.real, zi.imag
        if not ok:
            row["flag"] = "outside_domain"
            rows.append(row)
            continue
        d = float(global_distance(b.domain, zi, b.config.quality, check=False))
        row["d"] = d
        c0 = b.domain.charts[0]
        if abs(c0.to_chart(zi)) < c0.outer:
            row["v"] = float(b.ren.exhaustion(0).eval_v(c0.to_chart(zi), extend=True)[0])
        if b.family.covered(zi)[0]:
            row["w_t0"] = float(b.family.eval_w_t(0.0, zi)[0])
        else:
            row["flag"] = "no_chart"
        if b.exhaustion is not None:
            w, _, n = b.exhaustion.eval_w(np.array([zi]), return_parts=True)
            row["w"], row["shell"] = float(w[0]), int(n[0])
            if fit is not None and d < math.exp(-1):
                D = -math.log(d)
                base = D ** (-fit.tau) / math.log(D)
                row["lower"], row["upper"] = -fit.M1 * base, -fit.M2 * base
        if d < 1:
            row["baseline"] = float(baseline_demailly(b.domain, zi, b.config.quality))
        rows.append(row)
    return rows
