"""faultslip: quasistatic 2-D plasticity-damage fault rupture simulator.

Couples rate-independent perfect plasticity (damage-dependent yield stress)
with viscous gradient damage and healing through a fractional-step scheme:
an elastoplastic minimization condensed by elementwise return mapping, then
a damage update solved as a bound-constrained quadratic program, with a
per-step energy ledger certifying the discrete dissipation inequalities.
"""

from .config import (ConfigError, SimulationConfig, default_config,
                     parse_config, with_a2, with_tau)
from .damage import (DamageQP, DamageStepResult, QPError, assemble_damage_qp,
                     damage_step, solve_qp)
from .fem import (LoadProgram, State, damage_stiffness, external_work_rate,
                  lumped_mass, set_workers, total_strain)
from .material import MaterialModel
from .mesh import (Geometry, Mesh, element_geometry, generate_mesh,
                   initial_damage, make_grid)
from .output import (LedgerRow, read_ledger_csv, read_vtk_snapshot,
                     write_ledger_csv, write_vtk_snapshot)
from .plasticity import (NewtonError, PlasticStepResult, local_plastic_update,
                         reduced_energy, solve_elastoplastic_step)
from .plots import emit_plots
from .sim import (RunResult, SimulationError, reaction_force, run,
                  run_convergence, run_sweep, rupture_step, step,
                  stored_energy, von_mises)

__version__ = "0.1.0"
