"""Time stepping for the Zakharov system.

Two formulations are integrated:

* the first-order wave form ``i u_t + Lap u = n u``, ``i n_pm,t -/+ Lam n_pm = +/- Lam |u|^2``
  with ``n = (n_+ + n_-)/2`` (:func:`step`, :func:`evolve`, :func:`reference_evolve`);
* the Hamiltonian form ``n_t = -div v``, ``v_t = -grad(n + |u|^2)``
  (:func:`step_physical`, :func:`evolve_physical`).

Both use Strang splitting: half a step of the exact linear flow, a full step
of the exactly solvable coupling flow, half a linear step.  In the coupling
flow ``|u|`` is frozen (the potential only rotates the phase), hence ``n`` is
frozen too and both substeps are explicit.  Quadratic products are dealiased
with the 2/3 rule, and states are projected onto the 2/3 band on entry.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .energy import EnergyLedger, ledger_row, write_ledger
from .imethod import IMethodParams
from .spectral import (
    Field2D,
    GridSpec,
    SPECTRAL,
    drop_nyquist,
    hermitian_defect,
    inverse_symbol,
    write_snapshot,
)
from .state import PhysicalState, WaveState

log = logging.getLogger(__name__)

BLOWUP_SUP = 1e6
MODES = ("full", "free_schrodinger", "free")


class BlowUpError(RuntimeError):
    """Integration aborted: non-finite values or ``||u||_inf`` above the detector threshold."""

    def __init__(self, t: float, last_row: Optional[EnergyLedger] = None, reason: str = ""):
        super().__init__(f"blow-up detected at t={t:.6g}{': ' + reason if reason else ''}")
        self.t = t
        self.last_row = last_row


# -- data preparation --------------------------------------------------------

def _require_real(f: Field2D, name: str, tol: float = 1e-10) -> np.ndarray:
    c = f.spectral_data()
    if hermitian_defect(drop_nyquist(c, f.grid)) > tol:
        raise ValueError(f"{name} must be real-valued")
    return c


def _require_zero_mean(c: np.ndarray, name: str) -> None:
    if abs(c[0, 0]) > 1e-12 * max(1.0, float(np.max(np.abs(c)))):
        raise ValueError(f"{name} has nonzero mean {c[0, 0]:.3e}; no periodic solution")


def make_hamiltonian_data(n0: Field2D, n1: Field2D) -> tuple[Field2D, Field2D, tuple[Field2D, Field2D]]:
    """Return ``(n0, n1, v0)`` with ``v0 = grad Lam^{-2} n1`` irrotational and ``div v0 = -n1``."""
    grid = n1.grid
    c1 = _require_real(n1, "n1")
    _require_zero_mean(c1, "n1")
    kx, ky = grid.wavevectors
    pot = inverse_symbol(grid.k_squared) * c1
    v0 = (Field2D(grid, 1j * kx * pot, SPECTRAL, True), Field2D(grid, 1j * ky * pot, SPECTRAL, True))
    div = 1j * kx * v0[0].data + 1j * ky * v0[1].data
    residual = np.sqrt(grid.L**2 * np.sum(np.abs(drop_nyquist(div + c1, grid)) ** 2))
    if residual > 1e-10 * max(1.0, np.sqrt(grid.L**2 * np.sum(np.abs(c1) ** 2))):
        raise AssertionError(f"div v0 + n1 residual {residual:.3e}")
    return n0, n1, v0


def to_pm(u0: Field2D, n0: Field2D, n1: Field2D, t: float = 0.0) -> WaveState:
    """``n_pm = n0 +/- i Lam^{-1} n1``."""
    grid = u0.grid
    c0 = _require_real(n0, "n0")
    c1 = _require_real(n1, "n1")
    _require_zero_mean(c1, "n1")
    w = 1j * inverse_symbol(grid.k_abs) * c1
    return WaveState.from_coefficients(grid, t, u0.spectral_data(), c0 + w, c0 - w)


def from_pm(state: WaveState) -> tuple[Field2D, Field2D, Field2D]:
    """``(u, n, n_t)`` with ``n = (n_+ + n_-)/2`` and ``n_t = Lam (n_+ - n_-)/(2i)``."""
    grid = state.grid
    npc, nmc = state.n_plus.spectral_data(), state.n_minus.spectral_data()
    n = Field2D(grid, 0.5 * (npc + nmc), SPECTRAL, True)
    nt = Field2D(grid, grid.k_abs * (npc - nmc) / 2j, SPECTRAL, True)
    return state.u, n, nt


def physical_to_pm(state: PhysicalState) -> WaveState:
    """Convert ``(u, n, v)`` to ``(u, n_+, n_-)`` using ``n_t = -div v``."""
    grid = state.grid
    kx, ky = grid.wavevectors
    nt = -(1j * kx * state.v[0].spectral_data() + 1j * ky * state.v[1].spectral_data())
    w = 1j * inverse_symbol(grid.k_abs) * nt
    nc = state.n.spectral_data()
    return WaveState.from_coefficients(grid, state.t, state.u.spectral_data(), nc + w, nc - w)


def project_state(state: WaveState) -> WaveState:
    """Project all components onto the 2/3-rule band."""
    grid = state.grid
    mask = grid.dealias_mask
    u, npl, nmi = state.coefficients()
    return WaveState.from_coefficients(grid, state.t, u * mask, npl * mask, nmi * mask)


def boundary_mass_fraction(u: Field2D, frame: float = 0.1) -> float:
    """Fraction of ``||u||^2`` within ``frame * L`` of the box edges (box centred at ``L/2``)."""
    grid = u.grid
    X, Y = grid.mesh
    half = grid.L / 2
    outer = np.maximum(np.abs(X - half), np.abs(Y - half)) > (0.5 - frame) * grid.L
    dens = np.abs(u.physical_data()) ** 2
    total = dens.sum()
    return float(dens[outer].sum() / total) if total > 0 else 0.0


# -- the split-step scheme ---------------------------------------------------

def _linear_half(grid: GridSpec, u, npl, nmi, h: float, mode: str):
    u = u * np.exp(-1j * grid.k_squared * h)
    if mode == "free_schrodinger":
        return u, npl * 0, nmi * 0
    w = grid.k_abs * h
    return u, npl * np.exp(-1j * w), nmi * np.exp(1j * w)


def _coupling(grid: GridSpec, u, npl, nmi, dt: float):
    mask = grid.dealias_mask
    up = np.fft.ifft2(u, norm="forward")
    n = np.fft.ifft2(0.5 * (npl + nmi), norm="forward").real
    up = up * np.exp(-1j * n * dt)
    dens = np.fft.fft2(np.abs(up) ** 2, norm="forward") * mask
    forcing = 1j * dt * grid.k_abs * dens
    return np.fft.fft2(up, norm="forward") * mask, npl - forcing, nmi + forcing


def strang_coefficients(grid: GridSpec, u, npl, nmi, dt: float, mode: str = "full"):
    """One Strang step on coefficient arrays (FFT layout)."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    u, npl, nmi = _linear_half(grid, u, npl, nmi, dt / 2, mode)
    if mode == "full":
        u, npl, nmi = _coupling(grid, u, npl, nmi, dt)
    return _linear_half(grid, u, npl, nmi, dt / 2, mode)


def step(state: WaveState, dt: float, mode: str = "full") -> WaveState:
    """Advance ``state`` by one Strang step of size ``dt``.

    ``mode="free_schrodinger"`` forces ``n_pm = 0`` (free Schrodinger flow of
    ``u``); ``mode="free"`` drops the coupling but keeps the free half-wave
    flow of ``n_pm``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    u, npl, nmi = strang_coefficients(grid, *state.coefficients(), dt, mode)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(npl)) and np.all(np.isfinite(nmi))):
        raise BlowUpError(state.t + dt, reason="non-finite values")
    return WaveState.from_coefficients(grid, state.t + dt, u, npl, nmi)


@dataclass
class Trajectory:
    final: WaveState
    ledger: list[EnergyLedger] = field(default_factory=list)
    states: list[WaveState] = field(default_factory=list)


def _sup(u: np.ndarray) -> float:
    return float(np.max(np.abs(np.fft.ifft2(u, norm="forward"))))


def evolve(state: WaveState, T: float, dt: float, ledger_every: int = 0, *,
           params: IMethodParams | None = None, refined: bool = False, sobolev_s: float | None = None,
           mode: str = "full", keep_states: bool = False, project: bool = True,
           snapshot_path: str | Path | None = None, snapshot_every: int = 0,
           ledger_path: str | Path | None = None) -> Trajectory:
    """Integrate from ``state.t`` to ``state.t + T``; the last step is shortened to land on ``T``.

    A ledger row is recorded at the start, every ``ledger_every`` steps
    (0 disables intermediate rows) and at the end.  Raises
    :class:`BlowUpError` carrying the last good ledger row when a value turns
    non-finite or ``||u||_inf > 1e6``.
    """
    if not (T > 0 and dt > 0):
        raise ValueError("T and dt must be positive")
    if project:
        state = project_state(state)
    grid = state.grid
    t0 = state.t
    u, npl, nmi = state.coefficients()
    nsteps = int(np.ceil(T / dt - 1e-9))

    def row(t, u, npl, nmi):
        return ledger_row(WaveState.from_coefficients(grid, t, u, npl, nmi), params, sobolev_s, refined)

    traj_rows: list[EnergyLedger] = []
    states: list[WaveState] = []
    want_rows = bool(ledger_every or ledger_path)
    if want_rows:
        traj_rows.append(row(t0, u, npl, nmi))
    if keep_states:
        states.append(state)
    snap = open(snapshot_path, "wb") if snapshot_path else None
    try:
        if snap:
            write_snapshot(snap, [state.u, state.n_plus, state.n_minus], t0)
        t = t0
        for k in range(1, nsteps + 1):
            h = min(dt, t0 + T - t) if k == nsteps else dt
            u, npl, nmi = strang_coefficients(grid, u, npl, nmi, h, mode)
            t = t0 + T if k == nsteps else t + h
            finite = np.all(np.isfinite(u)) and np.all(np.isfinite(npl)) and np.all(np.isfinite(nmi))
            if not finite or _sup(u) > BLOWUP_SUP:
                last = traj_rows[-1] if traj_rows else None
                raise BlowUpError(t, last, "non-finite values" if not finite else "||u||_inf > 1e6")
            if (ledger_every and k % ledger_every == 0) or (k == nsteps and want_rows):
                traj_rows.append(row(t, u, npl, nmi))
                if keep_states:
                    states.append(WaveState.from_coefficients(grid, t, u, npl, nmi))
            if snap and snapshot_every and (k % snapshot_every == 0 or k == nsteps):
                cur = WaveState.from_coefficients(grid, t, u, npl, nmi)
                write_snapshot(snap, [cur.u, cur.n_plus, cur.n_minus], t)
    finally:
        if snap:
            snap.close()
    final = WaveState.from_coefficients(grid, t0 + T, u, npl, nmi)
    if keep_states and (not states or states[-1].t != final.t):
        states.append(final)
    if ledger_path:
        write_ledger(ledger_path, traj_rows)
    return Trajectory(final, traj_rows, states)


# -- reference integrator ----------------------------------------------------

def reference_evolve(state: WaveState, T: float, tol: float = 1e-10, mode: str = "full",
                     project: bool = True, method: str = "DOP853") -> WaveState:
    """High-order adaptive integration of the same dealiased semi-discrete system.

    The stiff linear parts are removed with an integrating factor
    ``w = exp(i Omega t) y``, and the remaining coupling is integrated with an
    adaptive Runge-Kutta method at relative tolerance ``tol``.  ``T`` may be
    negative (backward integration).  Test oracle only.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if project:
        state = project_state(state)
    grid = state.grid
    M = grid.M
    mask = grid.dealias_mask
    u0, np0, nm0 = state.coefficients()
    if T == 0:
        return state
    omega = np.stack([grid.k_squared, grid.k_abs, -grid.k_abs])
    if mode == "free_schrodinger":
        np0 = np0 * 0
        nm0 = nm0 * 0

    def rhs(tau, w):
        w = w.reshape(3, M, M)
        phase = np.exp(-1j * omega * tau)
        y = phase * w
        out = np.zeros_like(y)
        if mode == "full":
            up = np.fft.ifft2(y[0], norm="forward")
            n = np.fft.ifft2(0.5 * (y[1] + y[2]), norm="forward").real
            out[0] = -1j * np.fft.fft2(n * up, norm="forward") * mask
            dens = np.fft.fft2(np.abs(up) ** 2, norm="forward") * mask
            out[1] = -1j * grid.k_abs * dens
            out[2] = 1j * grid.k_abs * dens
        return (out / phase).ravel()

    w0 = np.stack([u0, np0, nm0]).ravel()
    scale = max(float(np.max(np.abs(w0))), 1e-300)
    sol = solve_ivp(rhs, (0.0, T), w0, method=method, rtol=tol, atol=tol * scale)
    if not sol.success:
        raise RuntimeError(f"reference integration failed: {sol.message}")
    y = np.exp(-1j * omega * T) * sol.y[:, -1].reshape(3, M, M)
    return WaveState.from_coefficients(grid, state.t + T, y[0], y[1], y[2])


# -- Hamiltonian (u, n, v) formulation ---------------------------------------

def _wave_half(grid: GridSpec, nc, vx, vy, h: float):
    kx, ky = grid.wavevectors
    kabs = grid.k_abs
    khx = np.divide(kx, kabs, out=np.zeros_like(kx), where=kabs > 0)
    khy = np.divide(ky, kabs, out=np.zeros_like(ky), where=kabs > 0)
    vl = khx * vx + khy * vy
    c, s = np.cos(kabs * h), np.sin(kabs * h)
    n_new = nc * c - 1j * vl * s
    vl_new = vl * c - 1j * nc * s
    dvl = vl_new - vl
    return n_new, vx + khx * dvl, vy + khy * dvl


def step_physical(state: PhysicalState, dt: float) -> PhysicalState:
    """One Strang step of ``i u_t + Lap u = n u``, ``n_t = -div v``, ``v_t = -grad(n + |u|^2)``."""
    grid = state.grid
    mask = grid.dealias_mask
    kx, ky = grid.wavevectors
    u = state.u.spectral_data()
    nc = state.n.spectral_data()
    vx, vy = (c.spectral_data() for c in state.v)
    half = np.exp(-1j * grid.k_squared * dt / 2)

    u = u * half
    nc, vx, vy = _wave_half(grid, nc, vx, vy, dt / 2)
    up = np.fft.ifft2(u, norm="forward") * np.exp(-1j * np.fft.ifft2(nc, norm="forward").real * dt)
    dens = np.fft.fft2(np.abs(up) ** 2, norm="forward") * mask
    vx = vx - dt * 1j * kx * dens
    vy = vy - dt * 1j * ky * dens
    u = np.fft.fft2(up, norm="forward") * mask
    u = u * half
    nc, vx, vy = _wave_half(grid, nc, vx, vy, dt / 2)
    return PhysicalState(state.t + dt, Field2D(grid, u, SPECTRAL), Field2D(grid, nc, SPECTRAL, True),
                         (Field2D(grid, vx, SPECTRAL, True), Field2D(grid, vy, SPECTRAL, True)))


def evolve_physical(state: PhysicalState, T: float, dt: float, project: bool = True) -> PhysicalState:
    if project:
        mask = state.grid.dealias_mask
        g = state.grid
        state = PhysicalState(state.t, Field2D(g, state.u.spectral_data() * mask, SPECTRAL),
                              Field2D(g, state.n.spectral_data() * mask, SPECTRAL, True),
                              tuple(Field2D(g, c.spectral_data() * mask, SPECTRAL, True) for c in state.v))
    t_end = state.t + T
    nsteps = int(np.ceil(T / dt - 1e-9))
    for k in range(nsteps):
        h = min(dt, t_end - state.t)
        state = step_physical(state, h)
    return PhysicalState(t_end, state.u, state.n, state.v)
