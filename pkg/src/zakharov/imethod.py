"""Smoothing multiplier ``m_N``, the operator ``I`` and the correction symbol ``sigma``.

``m_N(r)`` is 1 for ``r <= N`` and ``(N/r)^(1-s)`` for ``r >= 2N``.  On
``(N, 2N)`` we use a cubic Hermite blend of ``log m`` against ``log r``:
with ``t = log2(r/N)``

    log m = -(1-s) log(2) (2 t^2 - t^3),

which matches values and first derivatives of both outer branches and is
strictly decreasing because ``d(2t^2 - t^3)/dt = t (4 - 3t) > 0`` on (0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Field2D, GridSpec, SPECTRAL, to_spectral

SIGMA_SWITCH = 1e-8
_LOG2 = np.log(2.0)


@dataclass(frozen=True)
class IMethodParams:
    """Cutoff ``N`` (frequency units) and regularity ``s`` of the multiplier."""

    cutoff: float
    regularity: float

    def __post_init__(self):
        if not (self.cutoff > 0 and np.isfinite(self.cutoff)):
            raise ValueError(f"cutoff N must be positive, got {self.cutoff!r}")
        # s = 1/2 is admitted so the closed-form worked examples stay expressible;
        # the boundedness results need s > 1/2 and studies enforce that.
        if not (0.5 <= self.regularity < 1.0):
            raise ValueError(f"regularity s must lie in [1/2, 1), got {self.regularity!r}")

    @property
    def N(self) -> float:
        return self.cutoff

    @property
    def s(self) -> float:
        return self.regularity


def _log_slope_and_logm(r: np.ndarray, params: IMethodParams) -> tuple[np.ndarray, np.ndarray]:
    """Return ``log m(r)`` and ``d log m / d log r`` elementwise."""
    N, s = params.cutoff, params.regularity
    r = np.asarray(r, dtype=float)
    logm = np.zeros_like(r)
    slope = np.zeros_like(r)
    with np.errstate(divide="ignore"):
        t = np.log(np.where(r > 0, r, 1.0) / N) / _LOG2
    mid = (r > N) & (r < 2 * N)
    outer = r >= 2 * N
    tm = t[mid]
    logm[mid] = -(1 - s) * _LOG2 * (2 * tm**2 - tm**3)
    slope[mid] = -(1 - s) * (4 * tm - 3 * tm**2)
    logm[outer] = (1 - s) * np.log(N / r[outer])
    slope[outer] = -(1 - s)
    return logm, slope


def m(r, params: IMethodParams):
    """Multiplier value ``m_N(r)`` for ``r >= 0`` (array-friendly)."""
    logm, _ = _log_slope_and_logm(r, params)
    out = np.exp(logm)
    return float(out) if np.ndim(out) == 0 else out


def m_derivative(r, params: IMethodParams):
    """``dm/dr``; zero on ``[0, N]``."""
    r = np.asarray(r, dtype=float)
    logm, slope = _log_slope_and_logm(r, params)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(r > 0, np.exp(logm) * slope / np.where(r > 0, r, 1.0), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def f_weight(r, params: IMethodParams):
    """``f(r) = r^2 m_N(r)^2``."""
    r = np.asarray(r, dtype=float)
    out = r**2 * np.asarray(m(r, params)) ** 2
    return float(out) if np.ndim(out) == 0 else out


def f_weight_derivative(r, params: IMethodParams):
    r = np.asarray(r, dtype=float)
    logm, slope = _log_slope_and_logm(r, params)
    out = 2 * r * np.exp(2 * logm) * (1 + slope)
    return float(out) if np.ndim(out) == 0 else out


def apply_I(u: Field2D, params: IMethodParams) -> Field2D:
    """``(Iu)^(xi) = m_N(|xi|) uhat(xi)``; returns a spectral field."""
    us = u if u.is_spectral else to_spectral(u)
    return Field2D(u.grid, multiplier_on_grid(u.grid, params) * us.data, SPECTRAL, u.real_valued)


def multiplier_on_grid(grid: GridSpec, params: IMethodParams) -> np.ndarray:
    return m(grid.k_abs, params)


def sigma_radial(r1, r2, params: IMethodParams, eps: float = SIGMA_SWITCH):
    """``(f(r1) - f(r2)) / (r1^2 - r2^2)`` with the removable singularity filled in.

    Near ``r1 = r2`` (relative gap below ``eps``) the limit ``f'(rbar)/(2 rbar)``
    at the midpoint is used; it equals ``m^2 (1 + dlog m/dlog r)`` and is 1
    at ``rbar = 0``.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    r1, r2 = np.broadcast_arrays(r1, r2)
    gap = r1**2 - r2**2
    scale = np.maximum(1.0, np.maximum(r1**2, r2**2))
    near = np.abs(gap) < eps * scale

    out = np.empty(r1.shape, dtype=float)
    far = ~near
    if np.any(far):
        out[far] = (f_weight(r1[far], params) - f_weight(r2[far], params)) / gap[far]
    if np.any(near):
        rbar = 0.5 * (r1[near] + r2[near])
        logm, slope = _log_slope_and_logm(rbar, params)
        out[near] = np.exp(2 * logm) * (1 + slope)
    return float(out) if out.ndim == 0 else out


def sigma(xi1, xi2, params: IMethodParams, eps: float = SIGMA_SWITCH):
    """Correction symbol for wavevectors ``xi1``, ``xi2`` (last axis of length 2)."""
    r1 = np.linalg.norm(np.asarray(xi1, dtype=float), axis=-1)
    r2 = np.linalg.norm(np.asarray(xi2, dtype=float), axis=-1)
    return sigma_radial(r1, r2, params, eps)


def quartic_weight_radial(a, b, params: IMethodParams, eps: float = SIGMA_SWITCH):
    """``b^2 (m(a)^2 - m(b)^2) / (a^2 - b^2)``, i.e. ``sigma(a, b) - m(a)^2``.

    ``a`` plays the role of ``|xi_2 + xi_3|`` and ``b`` of ``|xi_2|``.  The
    degenerate set ``a = b`` uses the limit of the ``g = m^2`` difference
    quotient, ``b^2 g'(rbar) / (2 rbar)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    gap = a**2 - b**2
    scale = np.maximum(1.0, np.maximum(a**2, b**2))
    near = np.abs(gap) < eps * scale
    out = np.empty(a.shape, dtype=float)
    far = ~near
    if np.any(far):
        ga = np.asarray(m(a[far], params)) ** 2
        gb = np.asarray(m(b[far], params)) ** 2
        out[far] = b[far] ** 2 * (ga - gb) / gap[far]
    if np.any(near):
        rbar = 0.5 * (a[near] + b[near])
        logm, slope = _log_slope_and_logm(rbar, params)
        safe = np.where(rbar > 0, rbar, 1.0)
        # g'(r) / (2r) = m^2 * slope / r^2
        out[near] = np.where(rbar > 0, b[near] ** 2 * np.exp(2 * logm) * slope / safe**2, 0.0)
    return float(out) if out.ndim == 0 else out


def radial_table(grid: GridSpec, fn, params: IMethodParams) -> np.ndarray:
    """Tabulate ``fn(r_a, r_b, params)`` over the lattice radius classes."""
    values, _ = grid.radius_classes
    radii = np.sqrt(values.astype(float)) * grid.dk
    return fn(radii[:, None], radii[None, :], params)
