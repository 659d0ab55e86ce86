"""Domain specification files (YAML) and run configuration.

A domain file lists charts::

    name: half_space
    boundary_window: 0.2        # optional: only boundary within this of a centre counts
    charts:
      - center: [0.0, 0.0]
        radius: 1.0
        frame: [1.0, 0.0, 0.0, 1.0]   # row-major real matrix of zeta = u (z - c)
        graph: {kind: holder_cusp, L: 1.0, beta: 0.5}
        holder: {beta: 0.5, constant: 1.0}   # optional, defaults by kind
        inner_radius: 0.2

The frame must be the real form ``[[a, -b], [b, a]]`` of a unit complex
number: charts are holomorphic, so reflections are rejected.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .errors import HolderPshError, SpecParseError
from .geometry import GRAPH_KINDS, Chart, DomainModel, Graph
from .fixtures import FIXTURES


def _line(node) -> int:
    return node.start_mark.line + 1


def _mapping(node, where: str) -> dict:
    if not isinstance(node, yaml.MappingNode):
        raise SpecParseError(f"{where} must be a mapping", line=_line(node), field=where)
    out = {}
    for k, v in node.value:
        out[k.value] = v
    return out


def _scalar(node, where: str, kind=float):
    if not isinstance(node, yaml.ScalarNode):
        raise SpecParseError(f"{where} must be a scalar", line=_line(node), field=where)
    try:
        val = yaml.safe_load(node.value) if kind is not str else node.value
        return kind(val)
    except (TypeError, ValueError) as exc:
        raise SpecParseError(f"{where}: cannot read {node.value!r} as {kind.__name__}",
                             line=_line(node), field=where) from exc


def _floats(node, where: str, n: Optional[int] = None) -> list:
    if not isinstance(node, yaml.SequenceNode):
        raise SpecParseError(f"{where} must be a list", line=_line(node), field=where)
    vals = [_scalar(v, where) for v in node.value]
    if n is not None and len(vals) != n:
        raise SpecParseError(f"{where} needs {n} numbers, got {len(vals)}", line=_line(node), field=where)
    return vals


def _frame_to_unit(vals, node, where) -> complex:
    a, m01, b, m11 = vals
    if not (math.isclose(a, m11, abs_tol=1e-9) and math.isclose(m01, -b, abs_tol=1e-9)):
        raise SpecParseError(f"{where} is not the matrix of a complex rotation", line=_line(node), field=where)
    if not math.isclose(a * a + b * b, 1.0, abs_tol=1e-9):
        raise SpecParseError(f"{where} is not orthonormal", line=_line(node), field=where)
    u = complex(a, b)
    return u if abs(abs(u) - 1.0) < 1e-13 else u / abs(u)


def _default_holder(graph: Graph):
    if graph.kind == "flat":
        return 1.0, 0.0
    if graph.kind == "lipschitz_wedge":
        return 1.0, graph.L
    if graph.kind == "holder_cusp":
        return graph.beta, graph.L
    if graph.kind == "sphere_cap":
        return 0.5, math.sqrt(2 * graph.R)
    dy = np.abs(np.diff(graph.table_y))
    dx = np.diff(graph.table_x)
    return 1.0, float(np.max(dy / dx)) if dy.size else 0.0


def _graph(node, where: str) -> Graph:
    m = _mapping(node, where)
    if "kind" not in m:
        raise SpecParseError(f"{where} has no kind", line=_line(node), field=f"{where}.kind")
    kind = _scalar(m["kind"], f"{where}.kind", str)
    if kind not in GRAPH_KINDS:
        raise SpecParseError(f"unknown graph kind {kind!r}; expected one of {GRAPH_KINDS}",
                             line=_line(m["kind"]), field=f"{where}.kind")
    kw = {}
    for key in ("L", "beta", "R"):
        if key in m:
            kw[key] = _scalar(m[key], f"{where}.{key}")
    if kind == "table":
        for key in ("x", "y"):
            if key not in m:
                raise SpecParseError(f"table graph needs {key}", line=_line(node), field=f"{where}.{key}")
        kw["table_x"] = tuple(_floats(m["x"], f"{where}.x"))
        kw["table_y"] = tuple(_floats(m["y"], f"{where}.y"))
        interp = _scalar(m["interpolation"], f"{where}.interpolation", str) if "interpolation" in m else "nearest"
        if interp != "nearest":
            raise SpecParseError("table graphs support only nearest interpolation",
                                 line=_line(m["interpolation"]), field=f"{where}.interpolation")
    try:
        return Graph(kind, **kw)
    except HolderPshError as exc:
        raise SpecParseError(str(exc), line=_line(node), field=where) from exc


def _chart(j: int, node) -> Chart:
    where = f"charts[{j}]"
    m = _mapping(node, where)
    for key in ("center", "radius", "graph", "inner_radius"):
        if key not in m:
            raise SpecParseError(f"{where} is missing {key}", line=_line(node), field=f"{where}.{key}")
    cx, cy = _floats(m["center"], f"{where}.center", 2)
    radius = _scalar(m["radius"], f"{where}.radius")
    u = 1 + 0j
    if "frame" in m:
        u = _frame_to_unit(_floats(m["frame"], f"{where}.frame", 4), m["frame"], f"{where}.frame")
    graph = _graph(m["graph"], f"{where}.graph")
    beta, const = _default_holder(graph)
    if "holder" in m:
        h = _mapping(m["holder"], f"{where}.holder")
        if "beta" in h:
            beta = _scalar(h["beta"], f"{where}.holder.beta")
        if "constant" in h:
            const = _scalar(h["constant"], f"{where}.holder.constant")
    rho = _scalar(m["inner_radius"], f"{where}.inner_radius")
    try:
        return Chart(j, complex(cx, cy), radius, u, graph, beta, const, rho)
    except HolderPshError as exc:
        raise SpecParseError(str(exc), line=_line(node), field=where) from exc


def parse_domain_spec(text: str) -> DomainModel:
    """Domain model from YAML text; errors carry the offending line and field."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SpecParseError(f"malformed YAML: {exc}", line=mark.line + 1 if mark else None) from exc
    if root is None:
        raise SpecParseError("empty domain specification")
    m = _mapping(root, "document")
    if "charts" not in m:
        raise SpecParseError("no charts given", line=_line(root), field="charts")
    cnode = m["charts"]
    if not isinstance(cnode, yaml.SequenceNode) or not cnode.value:
        raise SpecParseError("charts must be a non-empty list", line=_line(cnode), field="charts")
    charts = tuple(_chart(j, n) for j, n in enumerate(cnode.value))
    name = _scalar(m["name"], "name", str) if "name" in m else "domain"
    window = _scalar(m["boundary_window"], "boundary_window") if "boundary_window" in m else None
    xs = [c.center.real for c in charts]
    ys = [c.center.imag for c in charts]
    pad = max(c.outer for c in charts)
    bbox = (min(xs) - pad, max(xs) + pad, min(ys) - pad, max(ys) + pad)
    if "bbox" in m:
        bbox = tuple(_floats(m["bbox"], "bbox", 4))
    return DomainModel(name, charts, bbox, boundary_window=window)


def load_domain(spec: str) -> DomainModel:
    """A YAML path, or ``fixture:NAME`` for a built-in reference domain."""
    if spec.startswith("fixture:"):
        name = spec.split(":", 1)[1]
        if name not in FIXTURES:
            raise SpecParseError(f"unknown fixture {name!r}; known: {sorted(FIXTURES)}")
        return FIXTURES[name]()
    path = Path(spec)
    if not path.is_file():
        raise SpecParseError(f"domain specification {spec!r} not found")
    return parse_domain_spec(path.read_text())


def domain_to_dict(domain: DomainModel) -> dict:
    """Plain form of a domain, readable back by :func:`parse_domain_spec`."""
    charts = []
    for c in domain.charts:
        g = {"kind": c.graph.kind}
        if c.graph.kind in ("lipschitz_wedge", "holder_cusp"):
            g["L"] = c.graph.L
        if c.graph.kind == "holder_cusp":
            g["beta"] = c.graph.beta
        if c.graph.kind == "sphere_cap":
            g["R"] = c.graph.R
        if c.graph.kind == "table":
            g["x"] = list(c.graph.table_x)
            g["y"] = list(c.graph.table_y)
        u = c.rotation
        charts.append({
            "center": [c.center.real, c.center.imag],
            "radius": c.radius,
            "frame": [u.real, -u.imag, u.imag, u.real],
            "graph": g,
            "holder": {"beta": c.holder_exponent, "constant": c.holder_constant},
            "inner_radius": c.inner_radius,
        })
    out = {"name": domain.name, "bbox": list(domain.bbox), "charts": charts}
    if domain.boundary_window is not None:
        out["boundary_window"] = domain.boundary_window
    return out


def dump_domain_spec(domain: DomainModel) -> str:
    return yaml.safe_dump(domain_to_dict(domain), sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    spec: str = ""
    out: str = "out"
    seed: int = 0
    samples: int = 200
    quality: float = 0.02
    t1: float = 0.1
    gamma: Optional[float] = None
    eps1: float = 0.1
    workers: int = 1
    force: bool = False
    n_max: int = 50
    delta_gamma: float = 0.05
    gamma_t: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])
    audit_t: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    probes: int = 200
    oracle_resolution: float = 1e-4
    plateau_margin: float = 1.0
    sweep_points: int = 60

    def validate(self):
        for name in ("samples", "probes", "workers", "n_max", "sweep_points"):
            if getattr(self, name) <= 0:
                raise SpecParseError(f"{name} must be positive, got {getattr(self, name)}", field=name)
        if not 0 < self.t1 < 1:
            raise SpecParseError("t1 must lie in (0, 1)", field="t1")
        if self.gamma is not None and not self.gamma > 1:
            raise SpecParseError("gamma override must exceed 1", field="gamma")
        if not self.eps1 > 0:
            raise SpecParseError("eps1 must be positive", field="eps1")
        if not self.quality > 0:
            raise SpecParseError("quality must be positive", field="quality")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("workers")  # never changes results
        d.pop("force")
        return d


def load_run_config(path: Optional[str], overrides: dict) -> RunConfig:
    """Defaults, then the YAML file, then explicit overrides."""
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    if path:
        p = Path(path)
        if not p.is_file():
            raise SpecParseError(f"config file {path!r} not found")
        try:
            data = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise SpecParseError(f"malformed config: {exc}") from exc
        if not isinstance(data, dict):
            raise SpecParseError("config file must hold a mapping")
        for k, v in data.items():
            if k not in known:
                raise SpecParseError(f"unknown config field {k!r}", field=k)
            setattr(cfg, k, v)
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg.validate()
