"""Command line: audit-geometry, build, eval, verify, report.

Exit status is 0 when every check passes, 1 on a check failure or a
construction error, and 2 on usage or spec errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import HolderPshError, SpecParseError
from .schedule import verify_crossing_global, verify_crossing_local
from .specfile import RunConfig, load_domain, load_run_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def fmt(v) -> str:
    """Stable text for CSV cells: shortest round-trip floats, lower-case booleans."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        v = complex(v)
        return f"{v.real!r}{'+' if v.imag >= 0 or math.isnan(v.imag) else '-'}{abs(v.imag)!r}j"
    if isinstance(v, dict):
        return ";".join(f"{k}={fmt(x)}" for k, x in sorted(v.items()))
    return str(v)


def write_csv(path: Path, columns, rows, seed: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("seed",) + tuple(columns))
        for r in rows:
            w.writerow([seed] + [fmt(r.get(c)) for c in columns])


REPORT_COLUMNS = ("check", "passed", "samples", "violations", "worst_margin", "worst_point", "constants")


def report_rows(reports) -> list:
    rows = []
    for r in reports:
        row = r.row()
        row["worst_point"] = r.details.get("worst_point")
        rows.append(row)
    return rows


def write_report_text(path: Path, title: str, cfg: RunConfig, reports):
    lines = [f"# {title}", f"holderpsh {__version__}", f"seed: {cfg.seed}", f"spec: {cfg.spec}",
             "parameters: " + fmt({k: v for k, v in cfg.to_dict().items() if k not in ("spec", "seed")}), ""]
    for r in reports:
        lines.append(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}")
        lines.append(f"  samples={r.n_samples} violations={r.n_violations} worst_margin={fmt(r.worst_margin)}")
        if r.constants:
            lines.append(f"  constants: {fmt(r.constants)}")
        extra = {k: v for k, v in r.details.items() if k != "failed" and v is not None}
        if extra:
            lines.append(f"  details: {fmt(extra)}")
    n_fail = sum(not r.passed for r in reports)
    lines += ["", f"{len(reports) - n_fail} passed, {n_fail} failed"]
    path.write_text("\n".join(lines) + "\n")


def local_schedule_rows(b) -> list:
    rows = []
    for j in range(len(b.domain.charts)):
        sch = b.ren.exhaustion(j).schedule
        cr = verify_crossing_local(sch)
        for n, m in zip(cr.ns, cr.margins):
            s = float(sch.s(n))
            rows.append({"chart": j, "n": int(n), "s_n": s, "sigma_n": math.log(s),
                         "log_a_n": float(sch.log_a(n)), "margin": float(m)})
    return rows


def global_schedule_rows(b) -> list:
    if b.exhaustion is None:
        return []
    sch = b.exhaustion.schedule
    cr = verify_crossing_global(sch, n_range=(1, sch.n_max))
    rows = []
    for n, m in zip(cr.ns, cr.margins):
        rows.append({"n": int(n), "s_n": float(sch.s(n)), "sigma_n": float(sch.sigma(n)),
                     "log_b_n": float(sch.log_b(n)), "neg_log_t2": float(sch.neg_log_t2(n)),
                     "margin": float(m), "in_contract": bool(n >= sch.n_big)})
    return rows


LOCAL_SCHEDULE_COLUMNS = ("chart", "n", "s_n", "sigma_n", "log_a_n", "margin")
GLOBAL_SCHEDULE_COLUMNS = ("n", "s_n", "sigma_n", "log_b_n", "neg_log_t2", "margin", "in_contract")


def parse_points(text: str) -> np.ndarray:
    pts = []
    for item in text.split(";"):
        if not item.strip():
            continue
        parts = item.split(",")
        if len(parts) != 2:
            raise UsageError(f"point {item!r} is not of the form x,y")
        try:
            pts.append(complex(float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise UsageError(f"point {item!r} is not numeric") from exc
    if not pts:
        raise UsageError("no points given")
    return np.array(pts)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_build(args, cfg: RunConfig):
    from .pipeline import load_bundle

    path = Path(args.bundle) if args.bundle else Path(cfg.out) / "bundle.json"
    if not path.is_file():
        raise UsageError(f"bundle {str(path)!r} not found; run build first or pass --bundle")
    data = json.loads(path.read_text())
    if not cfg.spec:
        cfg.spec = data["config"].get("spec", "")
    # run settings recorded in the bundle, unless overridden on this invocation
    base = RunConfig(**data["config"])
    for k, v in vars(args).items():
        if k in base.__dataclass_fields__ and v is not None and k != "spec":
            setattr(base, k, v)
    base.out, base.workers = cfg.out, cfg.workers
    return load_bundle(data, base.validate())


def cmd_audit_geometry(args, cfg: RunConfig) -> int:
    from .pipeline import audit_geometry

    domain = load_domain(cfg.spec)
    reps = audit_geometry(domain, cfg, cfg.gamma)
    out = _out(cfg)
    write_csv(out / "audit.csv", REPORT_COLUMNS, report_rows(reps), cfg.seed)
    write_report_text(out / "audit_report.txt", f"geometry audit: {domain.name}", cfg, reps)
    return _summarise(reps)


def cmd_build(args, cfg: RunConfig) -> int:
    from .pipeline import audit_geometry, build_pipeline, dumps_bundle

    domain = load_domain(cfg.spec)
    out = _out(cfg)
    if not cfg.force:
        reps = audit_geometry(domain, cfg, cfg.gamma)
        failed = [r.name for r in reps if not r.passed]
        if failed:
            print(f"geometry audit failed: {', '.join(failed)}; use --force to build anyway", file=sys.stderr)
            write_csv(out / "audit.csv", REPORT_COLUMNS, report_rows(reps), cfg.seed)
            return EXIT_FAIL
    b = build_pipeline(domain, cfg)
    (out / "bundle.json").write_text(dumps_bundle(b))
    write_csv(out / "schedule_local.csv", LOCAL_SCHEDULE_COLUMNS, local_schedule_rows(b), cfg.seed)
    write_csv(out / "schedule_global.csv", GLOBAL_SCHEDULE_COLUMNS, global_schedule_rows(b), cfg.seed)
    if b.glob.error:
        print(f"global construction failed: {b.glob.error}", file=sys.stderr)
        return EXIT_FAIL
    sch = b.exhaustion.schedule
    print(f"built {domain.name}: gamma={b.gamma:g} tau0={b.ren.tau0:.6g} C4={b.glob.C4:.6g} "
          f"lambda'={sch.lam_prime:g} tau={sch.tau:.6g} n_big={sch.n_big}")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    from .pipeline import EVAL_COLUMNS, evaluate_points, sweep_fit, sweep_points

    if bool(args.points) == bool(args.sweep):
        raise UsageError("eval needs exactly one of --points or --sweep")
    b = _load_build(args, cfg)
    if args.points:
        z = parse_points(args.points)
    else:
        z = sweep_points(b.domain, b.config.sweep_points, quality=b.config.quality)
    rows = evaluate_points(b, z, sweep_fit(b), cfg.workers)
    out = _out(cfg)
    write_csv(out / "eval.csv", EVAL_COLUMNS, rows, b.config.seed)
    n_flag = sum(1 for r in rows if r["flag"])
    print(f"evaluated {len(rows)} points ({n_flag} flagged)")
    return EXIT_OK


def cmd_verify(args, cfg: RunConfig) -> int:
    from .pipeline import run_suite

    b = _load_build(args, cfg)
    reps = run_suite(b, b.config)
    out = _out(cfg)
    write_csv(out / "verify.csv", REPORT_COLUMNS, report_rows(reps), b.config.seed)
    write_report_text(out / "verify_report.txt", f"verification: {b.domain.name}", b.config, reps)
    return _summarise(reps)


def cmd_report(args, cfg: RunConfig) -> int:
    from .pipeline import EVAL_COLUMNS, evaluate_points, sweep_fit, sweep_points
    from .plotting import plot_margins, plot_sweep

    b = _load_build(args, cfg)
    out = _out(cfg)
    seed = b.config.seed
    loc = local_schedule_rows(b)
    glo = global_schedule_rows(b)
    write_csv(out / "schedule_local.csv", LOCAL_SCHEDULE_COLUMNS, loc, seed)
    write_csv(out / "schedule_global.csv", GLOBAL_SCHEDULE_COLUMNS, glo, seed)
    z = sweep_points(b.domain, b.config.sweep_points, quality=b.config.quality)
    rows = evaluate_points(b, z, sweep_fit(b), cfg.workers)
    write_csv(out / "sweep.csv", EVAL_COLUMNS, rows, seed)
    plot_sweep(rows, out / "sweep.png", title=b.domain.name)
    plot_margins([r for r in loc if r["chart"] == 0], [r for r in glo if r["in_contract"]], out / "margins.png")
    print(f"report written to {out}")
    return EXIT_OK


def _summarise(reps) -> int:
    failed = [r.name for r in reps if not r.passed]
    print(f"{len(reps) - len(failed)} passed, {len(failed)} failed")
    for name in failed:
        print(f"  FAIL {name}")
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "audit-geometry": cmd_audit_geometry,
    "build": cmd_build,
    "eval": cmd_eval,
    "verify": cmd_verify,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="domain YAML file or fixture:NAME")
    common.add_argument("--out", help="output directory")
    common.add_argument("--config", help="YAML run configuration (flags override it)")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--quality", type=float)
    common.add_argument("--t1", type=float)
    common.add_argument("--gamma", type=float)
    common.add_argument("--eps1", type=float)
    common.add_argument("--workers", type=int)
    common.add_argument("--force", action="store_true", default=None)
    common.add_argument("--bundle", help="bundle file (default OUT/bundle.json)")

    p = argparse.ArgumentParser(prog="holderpsh", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"holderpsh {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "eval":
            sp.add_argument("--points", help='explicit points "x,y;x,y"')
            sp.add_argument("--sweep", action="store_true", help="log-spaced depth sweep")
    return p


RUN_FIELDS = ("spec", "out", "seed", "samples", "quality", "t1", "gamma", "eps1", "workers", "force")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config, {k: getattr(args, k) for k in RUN_FIELDS})
        if args.command in ("audit-geometry", "build") and not cfg.spec:
            raise UsageError(f"{args.command} needs --spec")
        return COMMANDS[args.command](args, cfg)
    except (UsageError, SpecParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HolderPshError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
