"""State containers shared by the energy and dynamics modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Field2D, GridSpec, SPECTRAL, l2_norm_sq


@dataclass(frozen=True)
class WaveState:
    """``(u, n_+, n_-)`` at time ``t``; ``n_pm = n -/+ ...`` with ``n_- = conj(n_+)`` for real data."""

    t: float
    u: Field2D
    n_plus: Field2D
    n_minus: Field2D

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @classmethod
    def from_coefficients(cls, grid: GridSpec, t: float, u_hat, np_hat, nm_hat) -> "WaveState":
        return cls(float(t), Field2D(grid, u_hat, SPECTRAL), Field2D(grid, np_hat, SPECTRAL),
                   Field2D(grid, nm_hat, SPECTRAL))

    def coefficients(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.u.spectral_data(), self.n_plus.spectral_data(), self.n_minus.spectral_data()

    def compatibility_defect(self) -> float:
        """``||n_- - conj(n_+)||_{L^2} / ||n_+||_{L^2}`` (0 when n_+ vanishes)."""
        denom = l2_norm_sq(self.n_plus)
        diff = l2_norm_sq(self.n_minus - self.n_plus.conj())
        return float(np.sqrt(diff / denom)) if denom > 0 else float(np.sqrt(diff))


@dataclass(frozen=True)
class PhysicalState:
    """``(u, n, v)`` of the Hamiltonian formulation at time ``t``."""

    t: float
    u: Field2D
    n: Field2D
    v: tuple[Field2D, Field2D]

    @property
    def grid(self) -> GridSpec:
        return self.u.grid
