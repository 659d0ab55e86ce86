"""Figures for the ``report`` command, written next to the CSV tables."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.2),
    "savefig.dpi": 150,
    "svg.hashsalt": "holderpsh",  # stable ids in svg output
}


def _numeric(rows, key):
    return np.array([float(r[key]) if r[key] != "" else np.nan for r in rows])


def plot_sweep(rows, path, title=""):
    """-w and the comparison curve against d on log axes."""
    d = _numeric(rows, "d")
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for key, label, style in (("w", "-w", "-"), ("baseline", "1/(-log d)", "--"),
                                  ("lower", "-lower bound", ":"), ("upper", "-upper bound", ":")):
            y = -_numeric(rows, key)
            ok = np.isfinite(y) & (y > 0)
            if ok.any():
                ax.loglog(d[ok], y[ok], style, label=label)
        ax.set_xlabel("d(z)")
        ax.set_ylabel("magnitude")
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
        plt.close(fig)


def plot_margins(local_rows, global_rows, path):
    """Crossing margins per shell for both schedules (symlog scale)."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for rows, label in ((local_rows, "local"), (global_rows, "global")):
            if not rows:
                continue
            n = _numeric(rows, "n")
            m = _numeric(rows, "margin")
            ax.plot(n, m, "o-", ms=3, label=label)
        ax.set_yscale("symlog", linthresh=1e-12)
        ax.axhline(0.0, color="k", lw=0.6)
        ax.set_xlabel("shell n")
        ax.set_ylabel("crossing margin")
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
        plt.close(fig)
