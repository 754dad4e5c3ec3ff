"""Command-line front end: run, convergence, sweep and plot subcommands.

Exit code 0 on success; solver aborts and bad configs print a diagnostic
and return 1 (a partial ledger is flushed on abort).  The FAULTSLIP_WORKERS
environment variable sets the worker count for element-chunked kernels
(default 1, fully deterministic).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import ConfigError, parse_config, with_a2, with_tau
from .fem import workers_from_env
from .output import ensure_dir, write_ledger_csv, write_vtk_snapshot
from .plots import emit_plots
from .sim import SimulationError, run, rupture_step


def _parse_time(text: str) -> float:
    text = text.strip()
    if text.endswith("ks"):
        return 1.0e3 * float(text[:-2])
    if text.endswith("s"):
        return float(text[:-1])
    return float(text)


def _comma_list(text: str) -> list[str]:
    return [t for t in (s.strip() for s in text.split(",")) if t]


def _load_config(args):
    cfg = parse_config(args.config)
    if getattr(args, "out", None):
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    return dataclasses.replace(cfg, workers=workers_from_env())


def _write_result(result, out_dir, name="ledger.csv"):
    ensure_dir(out_dir)
    ledger_path = os.path.join(out_dir, name)
    write_ledger_csv(ledger_path, result.rows)
    if result.snapshots:
        snap_dir = os.path.join(out_dir, "snapshots")
        ensure_dir(snap_dir)
        for k, (state, sigma) in sorted(result.snapshots.items()):
            write_vtk_snapshot(os.path.join(snap_dir, f"step_{k:06d}.vtk"),
                               result.mesh, state, sigma)
    if result.final_state is not None:
        write_vtk_snapshot(os.path.join(out_dir, "final.vtk"), result.mesh,
                           result.final_state, result.final_sigma)
    return ledger_path


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    try:
        result = run(cfg)
    except SimulationError as exc:
        if exc.partial is not None and exc.partial.rows:
            ensure_dir(cfg.output_dir)
            path = os.path.join(cfg.output_dir, "ledger_partial.csv")
            write_ledger_csv(path, exc.partial.rows)
            print(f"partial ledger written to {path}", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    path = _write_result(result, cfg.output_dir)
    last = result.rows[-1]
    print(f"{last.step} steps, stored energy {last.stored_energy_J:.6e} J, "
          f"balance residual {last.balance_residual_J:.3e} J")
    print(f"ledger written to {path}")
    return 0


def _cmd_convergence(args) -> int:
    cfg = _load_config(args)
    taus = [_parse_time(t) for t in _comma_list(args.taus)]
    if not taus:
        print("error: no time steps given", file=sys.stderr)
        return 1
    residuals = []
    for tau in taus:
        try:
            result = run(with_tau(cfg, tau))
        except SimulationError as exc:
            print(f"error: tau = {tau:g} s: {exc}", file=sys.stderr)
            return 1
        name = f"ledger_tau_{tau:g}s.csv"
        _write_result(result, cfg.output_dir, name)
        res = result.rows[-1].balance_residual_J
        residuals.append(res)
        print(f"tau = {tau:10g} s: terminal balance residual {res:.6e} J")
    gaps = [abs(r) for r in residuals]
    ordered = all(a > b for a, b in zip(gaps, gaps[1:]))
    print("balance gap strictly decreasing with tau: "
          + ("yes" if ordered else "no"))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    values = [float(v) for v in _comma_list(args.a2)]
    if not values:
        print("error: no a2 values given", file=sys.stderr)
        return 1
    for a2 in values:
        try:
            result = run(with_a2(cfg, a2))
        except SimulationError as exc:
            print(f"error: a2 = {a2:g} Pa s: {exc}", file=sys.stderr)
            return 1
        name = f"ledger_a2_{a2:g}.csv"
        _write_result(result, cfg.output_dir, name)
        rupture = rupture_step(result.column("reaction_force_Pa"))
        when = (f"step {rupture} (t = {result.rows[rupture - 1].time_s:g} s)"
                if rupture else "none within the run")
        print(f"a2 = {a2:10g} Pa s: first rupture {when}")
    return 0


def _cmd_plot(args) -> int:
    paths = _comma_list(args.ledgers[0]) if len(args.ledgers) == 1 \
        else list(args.ledgers)
    info = emit_plots(paths, args.out)
    print(f"wrote {info['energy_svg']} and {info['reaction_svg']}")
    for label, step in info["rupture_steps"].items():
        print(f"{label}: rupture step "
              + (str(step) if step else "not reached"))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="faultslip",
        description="Quasistatic plasticity-damage fault simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", help="output directory override")
    p_run.set_defaults(func=_cmd_run)

    p_conv = sub.add_parser("convergence",
                            help="time-step convergence of the energy gap")
    p_conv.add_argument("--config", required=True)
    p_conv.add_argument("--taus", required=True,
                        help="comma list, e.g. 10ks,5ks,1ks")
    p_conv.add_argument("--out", help="output directory override")
    p_conv.set_defaults(func=_cmd_convergence)

    p_sweep = sub.add_parser("sweep", help="damage-viscosity sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--a2", required=True,
                         help="comma list of a2 values in Pa s")
    p_sweep.add_argument("--out", help="output directory override")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_plot = sub.add_parser("plot", help="SVG plots from ledgers")
    p_plot.add_argument("--ledgers", required=True, nargs="+",
                        help="ledger CSV paths (space or comma separated)")
    p_plot.add_argument("--out", required=True)
    p_plot.set_defaults(func=_cmd_plot)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
