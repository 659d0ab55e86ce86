"""Reference domains, each making a different distance inequality tight."""

from __future__ import annotations

import math

import numpy as np

from .geometry import Chart, DomainModel, Graph


def _single(name, graph, beta, holder_constant, r=1.0, inner=0.2):
    chart = Chart(0, 0j, r, 1 + 0j, graph, beta, holder_constant, inner * r)
    R = chart.outer
    return DomainModel(name, (chart,), (-R, R, -R, R), boundary_window=chart.inner_radius)


def half_space(r=1.0, inner=0.2) -> DomainModel:
    """Flat graph g = 0; separation equals the shift."""
    return _single("half_space", Graph("flat"), 0.5, 0.0, r, inner)


def lipschitz_wedge(L=0.5, r=1.0, inner=0.2) -> DomainModel:
    """g(x) = L |x|; separation t / sqrt(1 + L^2)."""
    beta = 0.99
    return _single(
        "lipschitz_wedge", Graph("lipschitz_wedge", L=L), beta, L * (20 * r) ** (1 - beta), r, inner
    )


def holder_cusp(L=1.0, beta=0.5, r=1.0, inner=0.2) -> DomainModel:
    """g(x) = -L |x|**beta; separation of order t**(1/beta)."""
    return _single("holder_cusp", Graph("holder_cusp", L=L, beta=beta), beta, L, r, inner)


def ball(radius=1.0, n_charts=24, inner=1.8) -> DomainModel:
    """Disc of the given radius covered by ``n_charts`` circular-cap charts.

    The chart radius is radius/10 so each cap graph is defined on all of
    U_j; ``inner`` is the U''_j radius in units of the chart radius.
    """
    r = radius / 10.0
    charts = []
    for j in range(n_charts):
        p = radius * np.exp(2j * np.pi * j / n_charts)
        u = 1j * np.conj(p) / radius  # outward normal -> +i
        charts.append(
            Chart(j, complex(p), r, complex(u), Graph("sphere_cap", R=radius), 0.5,
                  math.sqrt(2 * radius), inner * r)
        )
    R = radius * 1.05
    return DomainModel("ball", tuple(charts), (-R, R, -R, R))


FIXTURES = {
    "half_space": half_space,
    "lipschitz_wedge": lipschitz_wedge,
    "holder_cusp": holder_cusp,
    "ball": ball,
}
