"""Extended-range arithmetic for the doubly exponential shift sequences.

A shift ``t`` in (0, 1) is carried as ``s = -log t``.  Sequences such as
``t_{n+1} = t_n ** (2 gamma)`` leave double range after a handful of steps,
while ``s`` (and, for the global schedule, ``sigma = log s``) stays finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class LogScale:
    """A length ``t = exp(-s)`` stored through ``s``."""

    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"LogScale needs s > 0 (t in (0,1)), got s={self.s}")

    @classmethod
    def from_t(cls, t: float) -> "LogScale":
        if not 0.0 < t < 1.0:
            raise ValueError(f"t must lie in (0, 1), got {t}")
        return cls(-math.log(t))

    @classmethod
    def from_sigma(cls, sigma: float) -> "LogScale":
        return cls(math.exp(sigma))

    @property
    def t(self) -> float:
        """Plain float value; 0.0 once it underflows."""
        return math.exp(-self.s)

    @property
    def sigma(self) -> float:
        if self.s <= 1.0:
            raise ValueError("sigma = log s is only used for s > 1")
        return math.log(self.s)

    def power(self, p: float) -> "LogScale":
        """``t ** p``."""
        return LogScale(self.s * p)

    @property
    def underflows(self) -> bool:
        return self.t == 0.0


def log1mexp(x):
    """``log(1 - exp(-x))`` for x > 0, accurate at both ends."""
    x = np.asarray(x, dtype=float)
    out = np.where(
        x < LOG2,
        np.log(-np.expm1(-np.minimum(x, LOG2))),
        np.log1p(-np.exp(-np.maximum(x, LOG2))),
    )
    return out if out.ndim else float(out)


def neg_log_sum(log_a, log_b):
    """``-log(exp(log_a) + exp(log_b))``."""
    return -np.logaddexp(log_a, log_b)


def log_neg_log(d):
    """``log(-log d)`` for 0 < d < 1."""
    return np.log(-np.log(d))
