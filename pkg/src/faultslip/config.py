"""Flat key-value configuration with typed, unit-suffixed keys.

An empty file yields the full default benchmark setup (400 m x 100 m domain,
level-2 mesh, 1 ks steps over 400 ks, plate velocity 1e-8 m/s and the
default material).  Unknown keys are rejected; every constraint violation
reports the offending key.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

from .fem import LoadProgram
from .material import MaterialModel
from .mesh import Geometry


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    geometry: Geometry
    level: int
    material: MaterialModel
    loads: LoadProgram
    tau_s: float
    t_end_s: float
    newton_tol: float
    newton_max_iter: int
    qp_tol: float
    snapshot_stride_s: float
    output_dir: str
    workers: int = 1
    adaptive: bool = False
    adaptive_gap_max_J: float = 1.0
    adaptive_tau_min_s: float = 1.0
    adaptive_tau_max_s: float = 0.0    # 0 = clamp at the initial tau

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end_s / self.tau_s))


# key -> (type tag, default)
_KEYS = {
    "width_m": ("float", 400.0),
    "height_m": ("float", 100.0),
    "damaged_stripe_height_m": ("float", 8.0),
    "fault_stripe_height_m": ("float", 20.0),
    "level": ("int", 2),
    "tau_s": ("float", 1.0e3),
    "t_end_s": ("float", 400.0e3),
    "plate_velocity_m_s": ("float", 1.0e-8),
    "lambda1_Pa": ("float", 7.5e9),
    "mu1_Pa": ("float", 11.25e9),
    "lambda0_Pa": ("float", 0.75e9),
    "mu0_Pa": ("float", 1.125e9),
    "sigma_y1_Pa": ("float", 2.0e6),
    "sigma_y0_Pa": ("float", 2.0e6 * 1.0e-12),
    "a1_Pa_s": ("float", 100.0e9),
    "a2_Pa_s": ("float", 10.0e6),
    "a3_Pa": ("float", 10.0),
    "b1_J_m3": ("float", 1.0e-3),
    "kappa_J_m": ("float", 1.0e-3),
    "body_force_x_N_m3": ("float", 0.0),
    "body_force_y_N_m3": ("float", 0.0),
    "traction_x_N_m2": ("float", 0.0),
    "traction_y_N_m2": ("float", 0.0),
    "newton_tol": ("float", 1.0e-9),
    "newton_max_iter": ("int", 200),
    "qp_tol": ("float", 1.0e-10),
    "snapshot_stride_s": ("float", 20.0e3),
    "output_dir": ("str", "out"),
    "adaptive": ("bool", False),
    "adaptive_gap_max_J": ("float", 1.0),
    "adaptive_tau_min_s": ("float", 1.0),
    "adaptive_tau_max_s": ("float", 0.0),
}


def _parse_value(key: str, raw: str):
    kind = _KEYS[key][0]
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        return raw
    except ValueError:
        raise ConfigError(f"invalid value for '{key}': {raw!r} "
                          f"(expected {kind})") from None


def _build(values: dict) -> SimulationConfig:
    v = values
    if v["tau_s"] <= 0.0:
        raise ConfigError("'tau_s' must be positive")
    if v["t_end_s"] < v["tau_s"]:
        raise ConfigError("'t_end_s' must be at least one time step")
    if not v["adaptive"]:
        ratio = v["t_end_s"] / v["tau_s"]
        if abs(ratio - round(ratio)) > 1.0e-9 * max(1.0, ratio):
            raise ConfigError("'t_end_s' must be an integer multiple of "
                              "'tau_s' (partial final steps are rejected)")
    if v["level"] < 0:
        raise ConfigError("'level' must be non-negative")
    if v["newton_tol"] <= 0.0 or v["qp_tol"] <= 0.0:
        raise ConfigError("'newton_tol' and 'qp_tol' must be positive")
    if v["newton_max_iter"] < 1:
        raise ConfigError("'newton_max_iter' must be at least 1")
    if v["snapshot_stride_s"] < 0.0:
        raise ConfigError("'snapshot_stride_s' must be nonnegative")
    try:
        geometry = Geometry(width=v["width_m"], height=v["height_m"],
                            damaged_stripe_height=v["damaged_stripe_height_m"],
                            fault_stripe_height=v["fault_stripe_height_m"])
    except ValueError as exc:
        raise ConfigError(f"geometry keys: {exc}") from None
    try:
        material = MaterialModel(
            lambda1=v["lambda1_Pa"], mu1=v["mu1_Pa"],
            lambda0=v["lambda0_Pa"], mu0=v["mu0_Pa"],
            sigma_y1=v["sigma_y1_Pa"], sigma_y0=v["sigma_y0_Pa"],
            a1=v["a1_Pa_s"], a2=v["a2_Pa_s"], a3=v["a3_Pa"],
            b1=v["b1_J_m3"], kappa=v["kappa_J_m"])
    except ValueError as exc:
        raise ConfigError(f"material keys: {exc}") from None
    loads = LoadProgram(
        plate_velocity=v["plate_velocity_m_s"],
        body_force=(v["body_force_x_N_m3"], v["body_force_y_N_m3"]),
        traction=(v["traction_x_N_m2"], v["traction_y_N_m2"]))
    return SimulationConfig(
        geometry=geometry, level=v["level"], material=material, loads=loads,
        tau_s=v["tau_s"], t_end_s=v["t_end_s"], newton_tol=v["newton_tol"],
        newton_max_iter=v["newton_max_iter"], qp_tol=v["qp_tol"],
        snapshot_stride_s=v["snapshot_stride_s"], output_dir=v["output_dir"],
        adaptive=v["adaptive"], adaptive_gap_max_J=v["adaptive_gap_max_J"],
        adaptive_tau_min_s=v["adaptive_tau_min_s"],
        adaptive_tau_max_s=v["adaptive_tau_max_s"])


def default_config() -> SimulationConfig:
    return _build({k: d for k, (_, d) in _KEYS.items()})


def parse_config(path) -> SimulationConfig:
    """Parse a config file; unspecified keys take their defaults."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    values = {k: d for k, (_, d) in _KEYS.items()}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected 'key = value', "
                                  f"got {line!r}")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if key not in _KEYS:
                raise ConfigError(f"{path}:{ln}: unknown config key '{key}'")
            values[key] = _parse_value(key, raw)
    return _build(values)


def with_tau(cfg: SimulationConfig, tau_s: float) -> SimulationConfig:
    """Copy of cfg with a new time step (divisibility re-checked)."""
    if tau_s <= 0.0:
        raise ConfigError("'tau_s' must be positive")
    if not cfg.adaptive:
        ratio = cfg.t_end_s / tau_s
        if abs(ratio - round(ratio)) > 1.0e-9 * max(1.0, ratio):
            raise ConfigError(f"t_end_s = {cfg.t_end_s} is not an integer "
                              f"multiple of tau_s = {tau_s}")
    return dataclasses.replace(cfg, tau_s=tau_s)


def with_a2(cfg: SimulationConfig, a2: float) -> SimulationConfig:
    """Copy of cfg with a new damage viscosity."""
    material = dataclasses.replace(cfg.material, a2=a2)
    return dataclasses.replace(cfg, material=material)
