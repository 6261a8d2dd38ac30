"""Figure rendering for the report commands.

Each report command writes a PNG next to its delimited output; the figures
mirror the table columns (probability curves, stationary populations vs the
thermal line, entropy production with error bars, amplitude magnitude maps).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["figure_path", "render_figure"]

_STYLE = {
    "figure.figsize": (7.0, 4.6),
    "figure.dpi": 140,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "legend.frameon": False,
}

_SERIES_COLORS = {
    "exact": "#1b6b3a",
    "wvo": "#7fc97f",
    "rit": "#e66101",
    "gibbs": "#999999",
}


def figure_path(out_path) -> str:
    from pathlib import Path

    p = Path(out_path)
    return str(p.with_suffix(".png"))


def _col(columns, rows, name):
    idx = columns.index(name)
    return np.array([row[idx] for row in rows], dtype=float)


def render_figure(command: str, columns, rows, path, metadata=None) -> None:
    with plt.rc_context(_STYLE):
        if command == "transition-prob":
            _transition_prob(columns, rows)
        elif command == "thermalize":
            _thermalize(columns, rows)
        elif command == "entropy":
            _entropy(columns, rows)
        elif command == "amplitudes":
            _amplitudes(columns, rows)
        else:
            raise ValueError(f"no figure renderer for command {command!r}")
        if metadata:
            plt.gcf().text(
                0.995, 0.005,
                f"config {metadata.get('config_hash', '?')} seed {metadata.get('seed', '?')}",
                ha="right", va="bottom", fontsize=6, color="#888888",
            )
        plt.tight_layout()
        plt.savefig(path)
        plt.close()


def _transition_prob(columns, rows):
    x = _col(columns, rows, "kinetic_energy")
    fig, ax = plt.subplots()
    for name, label in (("P_exact", "exact"), ("P_wvo", "WVO"), ("P_rit", "RIT")):
        ax.plot(x, _col(columns, rows, name), label=label,
                color=_SERIES_COLORS[name.split("_")[1]])
    ax.set_xlabel("kinetic energy")
    ax.set_ylabel("transition probability")
    ax.legend()


def _thermalize(columns, rows):
    x = _col(columns, rows, "T")
    fig, ax = plt.subplots()
    for name, label in (("pop_exact", "exact"), ("pop_wvo", "WVO"), ("pop_rit", "RIT")):
        y = _col(columns, rows, name)
        err = _col(columns, rows, name.replace("pop", "err"))
        ax.errorbar(x, y, yerr=err, label=label, marker="o", ms=3,
                    color=_SERIES_COLORS[name.split("_")[1]], lw=1)
    for name in columns:
        if name.startswith("pop_rit_packet"):
            y = _col(columns, rows, name)
            err = _col(columns, rows, name.replace("pop_", "err_"))
            ax.errorbar(x, y, yerr=err, label=name[4:], marker="v", ms=3,
                        color="#2c4a8c", lw=1, alpha=0.8)
    ax.plot(x, _col(columns, rows, "pop_gibbs"), "--", color=_SERIES_COLORS["gibbs"],
            label="thermal")
    ax.set_xlabel("temperature")
    ax.set_ylabel("stationary ground-state population")
    ax.legend(fontsize=8)


def _entropy(columns, rows):
    x = _col(columns, rows, "T_kin")
    fig, ax = plt.subplots()
    for name, label in (("dS_exact", "exact"), ("dS_wvo", "WVO"), ("dS_rit", "RIT")):
        y = _col(columns, rows, name)
        err = _col(columns, rows, name.replace("dS", "err"))
        ax.errorbar(x, y, yerr=err, label=label, marker="o", ms=3,
                    color=_SERIES_COLORS[name.split("_")[1]], lw=1)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("kinetic temperature")
    ax.set_ylabel("entropy production per collision")
    ax.legend()


def _amplitudes(columns, rows):
    i_out = columns.index("out")
    i_in = columns.index("in")
    labels_out = sorted({row[i_out] for row in rows})
    labels_in = sorted({row[i_in] for row in rows})
    n_out, n_in = len(labels_out), len(labels_in)
    t_mag = np.zeros((n_out, n_in))
    r_mag = np.zeros((n_out, n_in))
    for row in rows:
        i = labels_out.index(row[i_out])
        j = labels_in.index(row[i_in])
        t_mag[i, j] = np.hypot(row[columns.index("t_re")], row[columns.index("t_im")])
        r_mag[i, j] = np.hypot(row[columns.index("r_re")], row[columns.index("r_im")])
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.6))
    for ax, mat, title in ((axes[0], t_mag, "|t|"), (axes[1], r_mag, "|r|")):
        im = ax.imshow(mat, vmin=0.0, cmap="viridis")
        ax.set_title(title)
        ax.set_xticks(range(n_in), labels_in)
        ax.set_yticks(range(n_out), labels_out)
        ax.set_xlabel("incident")
        ax.set_ylabel("outgoing")
        ax.grid(False)
        fig.colorbar(im, ax=ax, shrink=0.85)
