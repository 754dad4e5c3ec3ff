"""Damage-dependent constitutive laws.

Isotropic elasticity with Lame parameters interpolated linearly between a
fully damaged and an intact state, a yield stress interpolated the same way,
a piecewise-quadratic dissipation potential for the damage rate (viscous
healing, viscous damage, rate-independent damage activation) and a linear
stored energy of the microcracks driving healing.

Defaults are the geophysical benchmark values: a 27 GPa / 0.2 Poisson
intact rock, ten-times softer when damaged, 2 MPa yield stress collapsing
essentially to zero with damage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensors


@dataclass(frozen=True)
class MaterialModel:
    """Material parameters (SI units).

    lambda1/mu1 and lambda0/mu0 are the Lame pairs at damage 1 (intact) and
    0 (fully damaged); sigma_y1/sigma_y0 the corresponding yield stresses.
    a1 [Pa s] penalizes the healing rate, a2 [Pa s] the damaging rate,
    a3 [Pa] is the rate-independent damage activation threshold.  b1 [J/m3]
    is the energy stored in microcracks (the healing driving force) and
    kappa [J/m] the damage gradient coefficient.
    """

    lambda1: float = 7.5e9
    mu1: float = 11.25e9
    lambda0: float = 0.75e9
    mu0: float = 1.125e9
    sigma_y1: float = 2.0e6
    sigma_y0: float = 2.0e6 * 1.0e-12
    a1: float = 100.0e9
    a2: float = 10.0e6
    a3: float = 10.0
    b1: float = 1.0e-3
    kappa: float = 1.0e-3

    def __post_init__(self):
        if not self.lambda1 >= self.lambda0 >= 0.0:
            raise ValueError("need lambda1 >= lambda0 >= 0")
        if not self.mu1 >= self.mu0 > 0.0:
            raise ValueError("need mu1 >= mu0 > 0")
        if not self.sigma_y1 >= self.sigma_y0 > 0.0:
            raise ValueError("need sigma_y1 >= sigma_y0 > 0")
        if min(self.a1, self.a2, self.a3, self.b1) < 0.0:
            raise ValueError("dissipation and stored-damage coefficients "
                             "must be nonnegative")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")

    def lame(self, zeta):
        """Lame pair (lambda, mu) at damage state zeta in [0, 1]."""
        z = np.asarray(zeta, dtype=float)
        if np.any(z < 0.0) or np.any(z > 1.0):
            raise ValueError("zeta outside [0, 1]")
        lam = (self.lambda1 - self.lambda0) * z + self.lambda0
        mu = (self.mu1 - self.mu0) * z + self.mu0
        return lam, mu

    def yield_stress(self, zeta):
        """Deviatoric stress radius at damage state zeta."""
        return (self.sigma_y1 - self.sigma_y0) * np.asarray(zeta) + self.sigma_y0

    def elastic_energy_density(self, e, zeta):
        """0.5 C(zeta) e : e for packed symmetric strains e (..., 3)."""
        e = np.asarray(e, dtype=float)
        lam, mu = self.lame(zeta)
        return 0.5 * lam * tensors.tr(e) ** 2 + mu * tensors.norm_sq(e)

    def stress(self, e, zeta):
        """sigma = lambda tr(e) I + 2 mu e, packed (..., 3)."""
        e = np.asarray(e, dtype=float)
        lam, mu = self.lame(zeta)
        lam = np.asarray(lam)
        mu = np.asarray(mu)
        t = tensors.tr(e)
        return np.stack([lam * t + 2.0 * mu * e[..., 0],
                         lam * t + 2.0 * mu * e[..., 1],
                         2.0 * mu * e[..., 2]], axis=-1)

    def energy_derivative_zeta(self, e):
        """d/dzeta of the elastic energy density (independent of zeta)."""
        e = np.asarray(e, dtype=float)
        return (0.5 * (self.lambda1 - self.lambda0) * tensors.tr(e) ** 2
                + (self.mu1 - self.mu0) * tensors.norm_sq(e))

    def damage_dissipation(self, rate):
        """Dissipation potential of the damage rate [W/m3]."""
        r = np.asarray(rate, dtype=float)
        up = np.maximum(r, 0.0)
        down = np.maximum(-r, 0.0)
        return 0.5 * self.a1 * up ** 2 + 0.5 * self.a2 * down ** 2 + self.a3 * down

    def dissipation_rate_hat(self, rate):
        """Dissipation rate rate * d(potential), single-valued [W/m3]."""
        r = np.asarray(rate, dtype=float)
        up = np.maximum(r, 0.0)
        down = np.maximum(-r, 0.0)
        return self.a1 * up ** 2 + self.a2 * down ** 2 + self.a3 * down
