"""Result serialization: deterministic CSV ledgers and legacy-VTK snapshots.

CSV uses a fixed column order, '.' decimal separator and 17 significant
digits so float64 values round-trip exactly.  Snapshots are legacy ASCII
unstructured grids (triangle cell type 5) carrying the damage complement
and displacement per node and the plastic-strain norm and von Mises stress
per element.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

import numpy as np

from . import tensors
from .mesh import Mesh

LEDGER_COLUMNS = ("step", "time_s", "stored_energy_J", "plastic_diss_cum_J",
                  "damage_diss_cum_J", "external_work_cum_J",
                  "balance_residual_J", "reaction_force_Pa", "min_zeta",
                  "max_plastic_norm", "newton_iters", "qp_iters")

_INT_COLUMNS = {"step", "newton_iters", "qp_iters"}


@dataclass
class LedgerRow:
    step: int
    time_s: float
    stored_energy_J: float
    plastic_diss_cum_J: float
    damage_diss_cum_J: float
    external_work_cum_J: float
    balance_residual_J: float
    reaction_force_Pa: float
    min_zeta: float
    max_plastic_norm: float
    newton_iters: int
    qp_iters: int


def write_ledger_csv(path, rows) -> None:
    lines = [",".join(LEDGER_COLUMNS)]
    for row in rows:
        cells = []
        for f in fields(LedgerRow):
            v = getattr(row, f.name)
            cells.append(str(int(v)) if f.name in _INT_COLUMNS
                         else format(float(v), ".16e"))
        lines.append(",".join(cells))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_ledger_csv(path) -> list[LedgerRow]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != LEDGER_COLUMNS:
            raise ValueError(f"unexpected ledger header in {path}: {header}")
        rows = []
        for line in fh:
            if not line.strip():
                continue
            cells = line.strip().split(",")
            vals = [int(c) if name in _INT_COLUMNS else float(c)
                    for name, c in zip(LEDGER_COLUMNS, cells)]
            rows.append(LedgerRow(*vals))
    return rows


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_vtk_snapshot(path, mesh: Mesh, state, sigma: np.ndarray) -> None:
    """Write a legacy ASCII VTK unstructured grid with the mesh, the nodal
    fields one_minus_zeta and displacement, and the elementwise fields
    plastic_norm and von_mises."""
    n, m = mesh.n_nodes, mesh.n_elements
    if len(state.zeta) != n or len(state.u) != n or len(sigma) != m:
        raise ValueError("field sizes do not match the mesh")
    pi_norm = tensors.devnorm(state.pi)
    vm = tensors.devnorm(tensors.dev(sigma))

    out = []
    out.append("# vtk DataFile Version 3.0")
    out.append("faultslip snapshot")
    out.append("ASCII")
    out.append("DATASET UNSTRUCTURED_GRID")
    out.append(f"POINTS {n} double")
    for x, y in mesh.nodes:
        out.append(f"{_fmt(x)} {_fmt(y)} 0")
    out.append(f"CELLS {m} {4 * m}")
    for a, b, c in mesh.triangles:
        out.append(f"3 {a} {b} {c}")
    out.append(f"CELL_TYPES {m}")
    out.extend(["5"] * m)
    out.append(f"POINT_DATA {n}")
    out.append("SCALARS one_minus_zeta double 1")
    out.append("LOOKUP_TABLE default")
    out.extend(_fmt(1.0 - z) for z in state.zeta)
    out.append("VECTORS displacement double")
    for ux, uy in state.u:
        out.append(f"{_fmt(ux)} {_fmt(uy)} 0")
    out.append(f"CELL_DATA {m}")
    out.append("SCALARS plastic_norm double 1")
    out.append("LOOKUP_TABLE default")
    out.extend(_fmt(v) for v in pi_norm)
    out.append("SCALARS von_mises double 1")
    out.append("LOOKUP_TABLE default")
    out.extend(_fmt(v) for v in vm)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def read_vtk_snapshot(path) -> dict:
    """Read back a snapshot written by :func:`write_vtk_snapshot`.

    Returns a dict with 'points' (n, 2), 'cells' (m, 3), 'point_data' and
    'cell_data' name -> array mappings.
    """
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith("# vtk DataFile"):
        raise ValueError(f"{path} is not a legacy VTK file")
    i = lines.index("DATASET UNSTRUCTURED_GRID") + 1
    result = {"point_data": {}, "cell_data": {}}
    section = None
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        key = parts[0]
        if key == "POINTS":
            n = int(parts[1])
            pts = np.array([lines[i + 1 + j].split() for j in range(n)],
                           dtype=float)
            result["points"] = pts[:, :2]
            i += 1 + n
        elif key == "CELLS":
            m = int(parts[1])
            cells = np.array([lines[i + 1 + j].split()[1:] for j in range(m)],
                             dtype=np.int64)
            result["cells"] = cells
            i += 1 + m
        elif key == "CELL_TYPES":
            i += 1 + int(parts[1])
        elif key == "POINT_DATA":
            section = ("point_data", int(parts[1]))
            i += 1
        elif key == "CELL_DATA":
            section = ("cell_data", int(parts[1]))
            i += 1
        elif key == "SCALARS":
            name = parts[1]
            _, count = section
            vals = np.array(lines[i + 2:i + 2 + count], dtype=float)
            result[section[0]][name] = vals
            i += 2 + count
        elif key == "VECTORS":
            name = parts[1]
            _, count = section
            vals = np.array([lines[i + 1 + j].split() for j in range(count)],
                            dtype=float)
            result[section[0]][name] = vals[:, :2]
            i += 1 + count
        else:
            i += 1
    return result


def ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)
