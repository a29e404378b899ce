"""Initial-data library.

Every preset returns :class:`InitialData` holding ``(u0, n0, n1)`` and its
mass as a fraction of the ground-state mass ``||Q||^2``.  Masses are set
through a ``mass_fraction`` parameter wherever the profile allows it, so the
same preset can be placed below or above the global-existence threshold.
Lengths default to fractions of the box so presets scale with ``L``.

=============== ============================================================
name            data
=============== ============================================================
constant        ``u0 = a`` on the whole torus, ``n0 = -a^2``; an exact
                stationary-modulus solution (``u = a e^{i a^2 t}``)
plane_wave      ``u0 = a e^{i k.x}``, ``n = 0``; exact travelling solution
gaussian        centred Gaussian, ``n0 = -coupling |u0|^2``
gaussian_pair   two displaced Gaussians, one carrying a momentum kick
townes_scaled   ``sqrt(fraction) Q`` with ``n0 = -|u0|^2``
random_smooth   random phases on a power-law spectrum centred at a drift
                mode, ``n0`` a single cosine mode
=============== ============================================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import to_pm
from .energy import mass
from .groundstate import discretize, ground_state, ground_state_mass
from .spectral import Field2D, GridSpec
from .state import WaveState


class UnknownPreset(KeyError):
    pass


@dataclass(frozen=True)
class InitialData:
    name: str
    u0: Field2D
    n0: Field2D
    n1: Field2D

    @property
    def mass(self) -> float:
        return mass(self.u0)

    @property
    def mass_fraction(self) -> float:
        return self.mass / ground_state_mass()

    def scaled(self, lam: float) -> "InitialData":
        """Multiply every component by ``lam``."""
        return InitialData(self.name, lam * self.u0, lam * self.n0, lam * self.n1)

    def wave_state(self) -> WaveState:
        return to_pm(self.u0, self.n0, self.n1)


def _amplitude_for(profile: np.ndarray, grid: GridSpec, fraction: float) -> float:
    # measured with the same (Nyquist-free) mass functional the diagnostics use
    base = mass(Field2D.physical(grid, np.asarray(profile, dtype=complex)))
    if fraction < 0:
        raise ValueError("mass_fraction must be non-negative")
    return float(np.sqrt(fraction * ground_state_mass() / base)) if base > 0 else 0.0


def _real(grid: GridSpec, values) -> Field2D:
    return Field2D.physical(grid, np.asarray(values, dtype=float), real_valued=True)


def _finish(name, grid, u, n0, n1=None) -> InitialData:
    n1 = np.zeros(grid.mesh[0].shape) if n1 is None else n1
    return InitialData(name, Field2D.physical(grid, np.asarray(u, dtype=complex)), _real(grid, n0), _real(grid, n1))


def constant(grid: GridSpec, seed: int = 0, mass_fraction: float = 0.5) -> InitialData:
    X, _ = grid.mesh
    a = _amplitude_for(np.ones_like(X), grid, mass_fraction)
    return _finish("constant", grid, np.full(X.shape, a), np.full(X.shape, -a * a))


def plane_wave(grid: GridSpec, seed: int = 0, mass_fraction: float = 0.5, kx: int = 1,
               ky: int = 0) -> InitialData:
    """``kx``, ``ky`` are integer lattice indices (wavevector ``2 pi (kx, ky) / L``)."""
    X, Y = grid.mesh
    phase = np.exp(1j * 2 * np.pi * (kx * X + ky * Y) / grid.L)
    a = _amplitude_for(phase, grid, mass_fraction)
    return _finish("plane_wave", grid, a * phase, np.zeros(X.shape))


def _gauss(grid: GridSpec, cx: float, cy: float, width: float) -> np.ndarray:
    X, Y = grid.mesh
    return np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * width**2))


def gaussian(grid: GridSpec, seed: int = 0, mass_fraction: float = 0.5, width: float | None = None,
             coupling: float = 1.0) -> InitialData:
    w = grid.L / 16 if width is None else width
    c = grid.L / 2
    g = _gauss(grid, c, c, w)
    u = _amplitude_for(g, grid, mass_fraction) * g
    return _finish("gaussian", grid, u, -coupling * np.abs(u) ** 2)


def gaussian_pair(grid: GridSpec, seed: int = 0, mass_fraction: float = 0.5, width: float | None = None,
                  kick: int = 3, coupling: float = 0.5) -> InitialData:
    """Bumps at ``(L/2 +/- L/8, ...)``; the first moves with lattice momentum index ``kick``."""
    L = grid.L
    w = L / 16 if width is None else width
    X, _ = grid.mesh
    c = L / 2
    prof = (_gauss(grid, c + L / 8, c, w) * np.exp(2j * np.pi * kick * X / L)
            + 0.8 * _gauss(grid, c - L / 8, c + L / 10, w))
    u = _amplitude_for(prof, grid, mass_fraction) * prof
    return _finish("gaussian_pair", grid, u, -coupling * np.abs(u) ** 2)


def townes_scaled(grid: GridSpec, seed: int = 0, mass_fraction: float = 0.5) -> InitialData:
    """``Q`` rescaled in amplitude so that its grid mass is ``mass_fraction * ||Q||^2``."""
    q = discretize(ground_state(), grid).physical_data().real
    u = _amplitude_for(q, grid, mass_fraction) * q
    return _finish("townes_scaled", grid, u, -np.abs(u) ** 2)


def random_smooth(grid: GridSpec, seed: int = 0, mass_fraction: float = 0.1, decay: float = 2.0,
                  drift: int = 2, n_amplitude: float = 0.5) -> InitialData:
    """Gaussian random coefficients with ``|uhat| ~ (1 + |k - k_d|^2)^(-decay/2)`` inside the 2/3 band.

    The spectrum is centred at the lattice mode ``(drift, 0)``, so the
    high-frequency content carries net momentum along ``x``;
    ``n0 = n_amplitude cos(2 pi x / L)``.  Deterministic in ``seed``.
    """
    rng = np.random.default_rng(seed)
    kx, ky = grid.wavevectors
    kd = 2 * np.pi * drift / grid.L
    amp = (1 + (kx - kd) ** 2 + ky**2) ** (-decay / 2) * grid.dealias_mask
    coeffs = amp * (rng.standard_normal(kx.shape) + 1j * rng.standard_normal(kx.shape))
    prof = np.fft.ifft2(coeffs, norm="forward")
    u = _amplitude_for(prof, grid, mass_fraction) * prof
    X, _ = grid.mesh
    return _finish("random_smooth", grid, u, n_amplitude * np.cos(2 * np.pi * X / grid.L))


PRESETS: dict[str, Callable[..., InitialData]] = {
    "constant": constant,
    "plane_wave": plane_wave,
    "gaussian": gaussian,
    "gaussian_pair": gaussian_pair,
    "townes_scaled": townes_scaled,
    "random_smooth": random_smooth,
}


def make_preset(name: str, grid: GridSpec, seed: int = 0, **params) -> InitialData:
    try:
        fn = PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None
    return fn(grid, seed=seed, **params)
