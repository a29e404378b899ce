"""Ground state ``Q`` of ``Lap Q - Q + Q^3 = 0`` in 2D and the sharp Gagliardo-Nirenberg check.

Two independent routes compute ``||Q||_{L^2}^2``:

* :func:`solve_ground_state` shoots on the radial ODE
  ``Q'' + Q'/r - Q + Q^3 = 0``, ``Q'(0) = 0``, bisecting on ``Q(0)``;
* :func:`variational_ground_state` runs a renormalised imaginary-time
  (gradient) flow on the periodic grid.

No literature value is used anywhere; the two routes are compared instead.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.special import k0e, k1e

from .spectral import Field2D, GridSpec, PHYSICAL

SERIES_RADIUS = 1e-3


class BracketError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RadialProfile:
    radii: np.ndarray
    values: np.ndarray
    l2_norm_sq: float
    q0: float
    match_radius: float

    def __call__(self, r):
        """Interpolate ``Q(r)``; beyond the last radius the K0 tail is continued."""
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.radii, self.values)
        far = r > self.radii[-1]
        if np.any(far):
            c = self.values[-1] / _k0(self.radii[-1])
            out = np.where(far, c * _k0(np.where(far, r, 1.0)), out)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "Q"])
            for r, q in zip(self.radii, self.values):
                w.writerow([repr(float(r)), repr(float(q))])

    @classmethod
    def from_csv(cls, path) -> "RadialProfile":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        r, q = data[:, 0], data[:, 1]
        return cls(r, q, float(2 * np.pi * simpson(q**2 * r, x=r)), float(q[0]), float("nan"))


def _k0(r):
    return k0e(r) * np.exp(-r)


def _k1(r):
    return k1e(r) * np.exp(-r)


def _rhs(r, y):
    q, dq = y
    return [dq, -dq / r + q - q**3]


def _series_start(q0: float, r: float = SERIES_RADIUS):
    # Q = q0 (1 - a r^2 / 4 + ...) with a = q0^2 - 1
    a = q0**2 - 1
    return [q0 * (1 - a * r**2 / 4), -q0 * a * r / 2]


def _shoot(q0: float, r_max: float = 30.0):
    """Classify a shot: +1 if Q crosses zero (q0 too large), -1 if Q turns upward (too small)."""

    def crossing(r, y):
        return y[0]
    crossing.terminal = True
    crossing.direction = -1

    def turning(r, y):
        return y[1]
    turning.terminal = True
    turning.direction = 1

    sol = solve_ivp(_rhs, (SERIES_RADIUS, r_max), _series_start(q0), method="DOP853",
                    rtol=1e-12, atol=1e-14, events=(crossing, turning))
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return 0, sol


def _bracket(lo: float = 1.0, hi: float = 4.0):
    s_lo, _ = _shoot(lo)
    s_hi, _ = _shoot(hi)
    if not (s_lo == -1 and s_hi == 1):
        raise BracketError(f"shooting bracket [{lo}, {hi}] does not straddle the ground state "
                           f"(outcomes {s_lo}, {s_hi})")
    return lo, hi


def solve_ground_state(tol: float = 1e-10, r_max: float = 40.0, dr: float = 2e-3) -> RadialProfile:
    """Shooting solution of the radial ground-state ODE.

    ``Q(0)`` is bisected until the bracket width is ``<= tol``.  The shot is
    trusted up to the radius where ``Q`` falls to ``1e-3 Q(0)``; beyond that
    the profile is continued by the decaying solution ``c K0(r)`` of the
    linearised equation, matched in value at that radius.
    """
    if not (1e-12 <= tol <= 1e-4):
        raise ValueError("tol must lie in [1e-12, 1e-4]")
    lo, hi = _bracket()
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        outcome, _ = _shoot(mid)
        if outcome == 1:
            hi = mid
        elif outcome == -1:
            lo = mid
        else:
            lo = hi = mid
    q0 = 0.5 * (lo + hi)

    def low(r, y):
        return y[0] - 1e-3 * q0
    low.terminal = True
    low.direction = -1
    sol = solve_ivp(_rhs, (SERIES_RADIUS, r_max), _series_start(q0), method="DOP853", rtol=1e-12,
                    atol=1e-14, dense_output=True, events=low)
    if not sol.t_events[0].size:
        raise BracketError("shot never decayed to the matching level")
    r_match = float(sol.t_events[0][0])

    radii = np.arange(0.0, r_max + dr / 2, dr)
    inner = radii <= r_match
    values = np.empty_like(radii)
    values[0] = q0
    ri = radii[inner][1:]
    series = ri < SERIES_RADIUS
    values[1:1 + ri.size] = np.where(series, q0 * (1 - (q0**2 - 1) * ri**2 / 4),
                                     sol.sol(np.maximum(ri, SERIES_RADIUS))[0])
    c = sol.sol(r_match)[0] / _k0(r_match)
    values[~inner] = c * _k0(radii[~inner])
    l2 = 2 * np.pi * simpson(values**2 * radii, x=radii)
    return RadialProfile(radii, values, float(l2), float(q0), r_match)


@lru_cache(maxsize=4)
def ground_state(tol: float = 1e-10) -> RadialProfile:
    """Cached :func:`solve_ground_state`."""
    return solve_ground_state(tol)


def ground_state_mass(tol: float = 1e-10) -> float:
    """``||Q||_{L^2}^2``, the global-existence mass threshold."""
    return ground_state(tol).l2_norm_sq


def ode_residual(profile: RadialProfile, r_lo: float = 0.05) -> float:
    """Sup of ``|Q'' + Q'/r - Q + Q^3|`` on the shooting mesh, via fourth-order central differences.

    Only stencils inside ``[r_lo, match_radius]`` are used; the tail beyond is
    the asymptotic continuation, not an ODE solution.
    """
    r, q = profile.radii, profile.values
    h = r[1] - r[0]
    d1 = (-q[4:] + 8 * q[3:-1] - 8 * q[1:-3] + q[:-4]) / (12 * h)
    d2 = (-q[4:] + 16 * q[3:-1] - 30 * q[2:-2] + 16 * q[1:-3] - q[:-4]) / (12 * h**2)
    rc, qc = r[2:-2], q[2:-2]
    res = d2 + d1 / rc - qc + qc**3
    h2 = 2 * h
    keep = (rc >= r_lo) & (rc + h2 <= profile.match_radius)
    return float(np.max(np.abs(res[keep])))


def discretize(profile: RadialProfile, grid: GridSpec, center=None) -> Field2D:
    """Sample ``Q(|x - center|)`` on ``grid`` (default centre: middle of the box)."""
    X, Y = grid.mesh
    cx, cy = (grid.L / 2, grid.L / 2) if center is None else center
    return Field2D(grid, profile(np.hypot(X - cx, Y - cy)), PHYSICAL, True)


# -- variational oracle -------------------------------------------------------

@dataclass(frozen=True)
class VariationalResult:
    field: Field2D
    l2_norm_sq: float
    mu: float
    residual: float
    iterations: int


def variational_ground_state(grid: GridSpec, dt: float = 0.5, max_iter: int = 20000,
                             tol: float = 1e-11) -> VariationalResult:
    """Renormalised imaginary-time flow for ``Lap Q - Q + Q^3 = 0`` on the periodic grid.

    Each iteration takes a semi-implicit gradient step of the action
    ``(||grad q||^2 + ||q||^2)/2 - ||q||_4^4/4`` and then rescales ``q`` onto
    the Nehari set ``||grad q||^2 + ||q||^2 = ||q||_4^4``, where the ground
    state is the minimiser.  A centred Gaussian start fixes translations.
    """
    X, Y = grid.mesh
    q = 2.0 * np.exp(-((X - grid.L / 2) ** 2 + (Y - grid.L / 2) ** 2) / 2)
    denom = 1.0 + dt * (1.0 + grid.k_squared)
    area = grid.cell_area
    k2 = grid.k_squared

    def nehari_scale(q):
        qh = np.fft.fft2(q, norm="forward")
        quad = grid.L**2 * np.sum((1 + k2) * np.abs(qh) ** 2)
        quart = np.sum(q**4) * area
        return np.sqrt(quad / quart)

    q = q * nehari_scale(q)
    for it in range(1, max_iter + 1):
        qh = np.fft.fft2(q, norm="forward")
        qh = (qh + dt * np.fft.fft2(q**3, norm="forward")) / denom
        new = np.fft.ifft2(qh, norm="forward").real
        new = new * nehari_scale(new)
        change = np.max(np.abs(new - q)) / np.max(np.abs(new))
        q = new
        if change < tol:
            break
    else:
        raise ConvergenceError(f"variational flow did not converge in {max_iter} iterations")

    qh = np.fft.fft2(q, norm="forward")
    lap = np.fft.ifft2(-k2 * qh, norm="forward").real
    mu = float(np.sum(q * (lap + q**3)) / np.sum(q**2))
    residual = float(np.max(np.abs(lap - mu * q + q**3)) / np.max(np.abs(q)))
    mass_q = float(np.sum(q**2) * area)
    return VariationalResult(Field2D(grid, q, PHYSICAL, True), mass_q, mu, residual, it)


def radial_asymmetry(f: Field2D, center=None, nbins: int = 200) -> float:
    """Max spread of ``f`` within thin radial shells, relative to ``max |f|``."""
    grid = f.grid
    X, Y = grid.mesh
    cx, cy = (grid.L / 2, grid.L / 2) if center is None else center
    r = np.hypot(X - cx, Y - cy).ravel()
    v = np.real(f.physical_data()).ravel()
    rmax = grid.L / 2
    keep = r < rmax
    r, v = r[keep], v[keep]
    # compare against a smooth radial fit rather than raw bins (lattice radii are scattered)
    order = np.argsort(r)
    r, v = r[order], v[order]
    shells = np.unique(np.round(r**2 / grid.dx**2).astype(np.int64), return_inverse=True)[1]
    spread = 0.0
    for cls in np.unique(shells):
        vals = v[shells == cls]
        if vals.size > 1:
            spread = max(spread, float(vals.max() - vals.min()))
    return spread / float(np.max(np.abs(v)))


# -- Gagliardo-Nirenberg -------------------------------------------------------

@dataclass(frozen=True)
class GNCheck:
    lhs: float
    rhs: float
    ratio: float


def gn_check(u: Field2D, ground_mass: float | None = None) -> GNCheck:
    """Both sides of ``||u||_4^4 / 2 <= (||u||_2^2 / ||Q||_2^2) ||grad u||_2^2`` and their ratio."""
    grid = u.grid
    Q2 = ground_state_mass() if ground_mass is None else ground_mass
    values = u.physical_data()
    coeffs = u.spectral_data()
    lhs = 0.5 * float(np.sum(np.abs(values) ** 4) * grid.cell_area)
    mass_u = float(grid.L**2 * np.sum(np.abs(coeffs) ** 2))
    grad = float(grid.L**2 * np.sum(grid.k_squared * np.abs(coeffs) ** 2))
    rhs = mass_u / Q2 * grad
    ratio = lhs / rhs if rhs > 0 else 0.0
    return GNCheck(lhs, rhs, ratio)


def gn_ratios(batch: np.ndarray, grid: GridSpec, ground_mass: float) -> np.ndarray:
    """Vectorised GN ratios for a stack of physical fields of shape ``(B, M, M)``."""
    coeffs = np.fft.fft2(batch, norm="forward", axes=(-2, -1))
    lhs = 0.5 * np.sum(np.abs(batch) ** 4, axis=(-2, -1)) * grid.cell_area
    mass_u = grid.L**2 * np.sum(np.abs(coeffs) ** 2, axis=(-2, -1))
    grad = grid.L**2 * np.sum(grid.k_squared * np.abs(coeffs) ** 2, axis=(-2, -1))
    rhs = mass_u / ground_mass * grad
    return np.divide(lhs, rhs, out=np.zeros_like(lhs), where=rhs > 0)


@dataclass(frozen=True)
class ThresholdCheck:
    status: str
    margin: float
    mass: float
    threshold: float

    @property
    def below(self) -> bool:
        return self.status == "below"


def mass_threshold_check(u0: Field2D, threshold: float | None = None, rtol: float = 1e-6) -> ThresholdCheck:
    """Classify ``mass(u0)`` against ``||Q||^2``; ``margin = 1 - mass/||Q||^2``.

    Masses within ``rtol`` of the threshold count as ``"above"`` (the
    inequality is strict).
    """
    Q2 = ground_state_mass() if threshold is None else threshold
    coeffs = u0.spectral_data()
    mass_u = float(u0.grid.L**2 * np.sum(np.abs(coeffs) ** 2))
    margin = 1.0 - mass_u / Q2
    return ThresholdCheck("below" if margin > rtol else "above", margin, mass_u, Q2)
