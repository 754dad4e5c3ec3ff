"""SVG plots from ledger CSVs: energy balance curves and reaction forces."""

from __future__ import annotations

import os

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .output import ensure_dir, read_ledger_csv  # noqa: E402
from .sim import rupture_step  # noqa: E402


def emit_plots(ledger_paths, out_dir, labels=None) -> dict:
    """Overlay stored+dissipated energy against external work for every
    ledger, and the reaction-force histories, as two SVG files.

    Returns the SVG paths, the terminal balance residual and the rupture
    step (first >50% drop of the running reaction-force peak) per ledger.
    """
    paths = list(ledger_paths)
    if not paths:
        raise ValueError("need at least one ledger")
    if labels is None:
        labels = [os.path.splitext(os.path.basename(p))[0] for p in paths]
    ensure_dir(out_dir)

    terminal = {}
    ruptures = {}
    fig_e, ax_e = plt.subplots(figsize=(7, 4.5))
    fig_r, ax_r = plt.subplots(figsize=(7, 4.5))
    for path, label in zip(paths, labels):
        rows = read_ledger_csv(path)
        if not rows:
            raise ValueError(f"empty ledger: {path}")
        t = np.array([r.time_s for r in rows])
        e = np.array([r.stored_energy_J for r in rows])
        diss = np.array([r.plastic_diss_cum_J + r.damage_diss_cum_J
                         for r in rows])
        work = np.array([r.external_work_cum_J for r in rows])
        res = np.array([r.balance_residual_J for r in rows])
        e0 = e[0] + diss[0] - work[0] - res[0]
        ax_e.plot(t, e - e0 + diss, label=f"{label}: stored + dissipated")
        ax_e.plot(t, work, "--", label=f"{label}: work of external load")
        terminal[label] = float(res[-1])

        rf = np.array([r.reaction_force_Pa for r in rows])
        ax_r.plot(t, rf, label=label)
        ruptures[label] = rupture_step(rf)

    order = ", ".join(f"{lab}: {terminal[lab]:.3e} J" for lab in labels)
    ax_e.set_xlabel("time [s]")
    ax_e.set_ylabel("energy [J]")
    ax_e.set_title(f"energy balance (terminal residual {order})",
                   fontsize=9)
    ax_e.legend(fontsize=8)
    energy_svg = os.path.join(out_dir, "energy_balance.svg")
    fig_e.tight_layout()
    fig_e.savefig(energy_svg)
    plt.close(fig_e)

    ax_r.set_xlabel("time [s]")
    ax_r.set_ylabel("reaction force [Pa]")
    ax_r.set_title("stripe-averaged von Mises stress")
    ax_r.legend(fontsize=8)
    reaction_svg = os.path.join(out_dir, "reaction_force.svg")
    fig_r.tight_layout()
    fig_r.savefig(reaction_svg)
    plt.close(fig_r)

    return {"energy_svg": energy_svg, "reaction_svg": reaction_svg,
            "terminal_residuals": terminal, "rupture_steps": ruptures}
