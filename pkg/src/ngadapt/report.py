"""Figure rendering for finished runs, from the delimited artifacts only.

Reads steps.csv, the snapshot profiles, and efficiency.csv when present;
never touches in-memory state, so a report can be rendered long after the
run on any machine. Figures land next to the data they were drawn from.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError


def _load_columns(path: Path):
    """Columns of a small csv with optional comment header, by name."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    names = None
    rows = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        if names is None:
            names = line.split(",")
            continue
        rows.append([float(v) if v else np.nan for v in line.split(",")])
    if names is None:
        raise ConfigError(f"{path}: no header row")
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(names)))
    return {name: data[:, j] for j, name in enumerate(names)}


def _render_run(run_dir: Path, fig_dir: Path, plt) -> list:
    made = []
    cols = _load_columns(run_dir / "steps.csv")
    t = cols["t_n"]

    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    ax = axes[0, 0]
    ax.semilogy(t, cols["k_n"], lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("step size k")
    ax.set_title("accepted step sizes")

    ax = axes[0, 1]
    for name, style in (("eta", "-"), ("theta", "--"), ("upsilon", ":")):
        positive = cols[name] > 0
        if positive.any():
            ax.semilogy(t[positive], cols[name][positive], style, lw=0.8,
                        label=name)
    ax.semilogy(t, cols["E_sqrt"], lw=1.4, label="sqrt(E)")
    ax.set_xlabel("t")
    ax.set_title("indicators and cumulative bound")
    ax.legend(fontsize=8)

    ax = axes[1, 0]
    ax.plot(t, cols["elements"], lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("elements")
    ax.set_title("mesh size")

    ax = axes[1, 1]
    snap_dir = run_dir / "snapshots"
    if snap_dir.is_dir():
        for snap in sorted(snap_dir.glob("*.csv")):
            prof = _load_columns(snap)
            ax.plot(prof["x"], prof["u"], lw=0.9, label=snap.stem)
        ax.legend(fontsize=8)
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.set_title("solution profiles")

    fig.tight_layout()
    out = fig_dir / "run.png"
    fig.savefig(out, dpi=130)
    plt.close(fig)
    made.append(out)

    eff_path = run_dir / "efficiency.csv"
    if eff_path.exists():
        eff = _load_columns(eff_path)
        fig, ax = plt.subplots(figsize=(6, 4))
        good = ~np.isnan(eff["index"])
        ax.semilogy(eff["t_n"][good], eff["index"][good], lw=0.9)
        ax.set_xlabel("t")
        ax.set_ylabel("estimated / true (squared)")
        ax.set_title("efficiency index")
        fig.tight_layout()
        out = fig_dir / "efficiency.png"
        fig.savefig(out, dpi=130)
        plt.close(fig)
        made.append(out)
    return made


def _render_sweep(base: Path, fig_dir: Path, plt) -> list:
    eff = _load_columns(base / "efficiency.csv")
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for eps in sorted(set(eff["eps"]), reverse=True):
        rows = eff["eps"] == eps
        good = rows & ~np.isnan(eff["index"])
        ax.semilogy(eff["t_n"][good], eff["index"][good], lw=0.9,
                    label=f"eps={eps:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("estimated / true (squared)")
    ax.set_title("efficiency indices across eps")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = fig_dir / "efficiency_sweep.png"
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return [out]


def render(path: Path, out_dir: Optional[Path] = None) -> list:
    """Render figures for a run directory or a sweep directory."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not path.is_dir():
        raise ConfigError(f"{path} is not a directory")
    fig_dir = out_dir if out_dir is not None else path / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)

    made = []
    if (path / "steps.csv").exists():
        made.extend(_render_run(path, fig_dir, plt))
    else:
        run_dirs = sorted(p for p in path.iterdir()
                          if p.is_dir() and (p / "steps.csv").exists())
        if not run_dirs and not (path / "efficiency.csv").exists():
            raise ConfigError(f"{path}: neither a run nor a sweep directory")
        if (path / "efficiency.csv").exists():
            made.extend(_render_sweep(path, fig_dir, plt))
        for sub in run_dirs:
            sub_fig = fig_dir / sub.name
            sub_fig.mkdir(exist_ok=True)
            made.extend(_render_run(sub, sub_fig, plt))
    return made
