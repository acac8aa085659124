"""Figures for experiment tables.

Every CSV gets a standalone gnuplot script next to it (the portable form)
and, when matplotlib is importable, a rendered PNG of the same plot.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

_GP_HEAD = """set datafile separator ','
set key outside right
set grid
set terminal pngcairo size 900,560
set output '{png}'
"""


def _gp_grid(csv, png, keys):
    lines = ", \\\n     ".join(
        f"'{csv}' using 3:((strcol(1) eq \"{p}\" && $2 == {n}) ? $4 : 1/0) every ::1 "
        f"with linespoints title '{p} |D|={n}'" for p, n in keys)
    return _GP_HEAD.format(png=png) + f"""set xlabel 'epsilon'
set ylabel 'NND (mean over seeds)'
plot {lines}
"""


def _gp_probe(csv, png):
    return _GP_HEAD.format(png=png) + f"""set logscale x
set xlabel 'generated set size'
set ylabel 'metric value'
plot '{csv}' using (strcol(3) eq "" ? 1/0 : $2):4:(0) every ::1 with points title 'per seed'
"""


def _gp_comp(csv, png):
    return _GP_HEAD.format(png=png) + f"""set style data histograms
set style fill solid 0.6
set ylabel 'COMP (mean max speed)'
set xtics rotate by -30
plot '{csv}' every ::1 using 4:xtic(1) title 'comp'
"""


def _gp_log(csv, png):
    return _GP_HEAD.format(png=png) + f"""set xlabel 'epoch'
set ylabel 'loss'
plot '{csv}' every ::2 using 3:4 with lines title 'generator', \\
     '{csv}' every ::2 using 3:5 with lines title 'discriminator'
"""


def _gp_values(csv, png, label_col, value_col):
    return _GP_HEAD.format(png=png) + f"""set style data histograms
set style fill solid 0.6
set xtics rotate by -30
plot '{csv}' every ::1 using {value_col}:xtic({label_col}) title 'value'
"""


def gnuplot_script(table, csv_name: str, png_name: str) -> str:
    table_name = table.name
    if table_name == "nnd_grid_summary":
        keys = sorted({(r[0], r[1]) for r in table.rows})
        return _gp_grid(csv_name, png_name, keys)
    if table_name == "probe":
        return _gp_probe(csv_name, png_name)
    if table_name == "comp":
        return _gp_comp(csv_name, png_name)
    if table_name == "training_log":
        return _gp_log(csv_name, png_name)
    if table_name in ("adversarial", "checkpoint_metrics"):
        return _gp_values(csv_name, png_name, 4, 5)
    return _gp_values(csv_name, png_name, 1, 2)


# --- matplotlib rendering ---------------------------------------------------------

def _is_number(v):
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def render_png(table, path: Path) -> bool:
    """Draw ``table`` to ``path``; returns False when matplotlib is unavailable."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    rows, name = table.rows, table.name
    if name == "nnd_grid_summary":
        for protocol in sorted({r[0] for r in rows}):
            for size in sorted({r[1] for r in rows if r[0] == protocol}):
                sel = [r for r in rows if r[0] == protocol and r[1] == size]
                ax.errorbar([r[2] for r in sel], [r[3] for r in sel], yerr=[r[4] for r in sel],
                            marker="o", capsize=3, ls="-" if protocol == "streaming" else "--",
                            label=f"{protocol} |D|={size}")
        ax.set_xlabel("epsilon")
        ax.set_ylabel("NND")
    elif name == "probe":
        for metric in sorted({r[0] for r in rows}):
            sel = [r for r in rows if r[0] == metric and _is_number(r[1])]
            ax.plot([r[1] for r in sel], [r[3] for r in sel], "o", alpha=0.6, label=metric)
        ax.set_xscale("log")
        ax.set_xlabel("generated set size")
        ax.set_ylabel("metric value")
    elif name == "training_log":
        for variant, seed in sorted({(r[0], r[1]) for r in rows}):
            sel = [r for r in rows if r[0] == variant and r[1] == seed and r[2] > 0]
            ax.plot([r[2] for r in sel], [r[3] for r in sel], label=f"{variant} s{seed} G")
        ax.set_xlabel("epoch")
        ax.set_ylabel("generator loss")
    elif name == "comp":
        labels = [f"{r[0]} s{r[6]}" for r in rows]
        ax.bar(range(len(rows)), [r[3] for r in rows], yerr=[r[4] for r in rows])
        ax.set_xticks(range(len(rows)), labels, rotation=30, ha="right")
        ax.set_ylabel("COMP")
    else:
        label_col, value_col = (3, 4) if name == "adversarial" else (0, 1)
        if name == "checkpoint_metrics":
            label_col, value_col = 3, 4
        sel = [r for r in rows if _is_number(r[value_col])]
        ax.bar(range(len(sel)), [float(r[value_col]) for r in sel])
        ax.set_xticks(range(len(sel)), [str(r[label_col]) for r in sel], rotation=30, ha="right")
    ax.set_title(name.replace("_", " "))
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return True
