"""Naive reference implementations for small grids.

These loop over frequency tuples directly and test hyperplane membership
explicitly.  They share no code with the fast sums in :mod:`zakharov.energy`
beyond the multiplier formulas themselves, and are meant for ``M <= 16``.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import imethod
from .imethod import IMethodParams
from .spectral import Field2D, GridSpec

ORACLE_MAX_M = 16


def _lattice(grid: GridSpec):
    """Integer frequency labels strictly inside the Nyquist band, with their array slots."""
    M = grid.M
    half = M // 2
    labels = [(a, b) for a in range(-half + 1, half) for b in range(-half + 1, half)]
    return labels, {lab: (lab[0] % M, lab[1] % M) for lab in labels}


def _guard(grid: GridSpec) -> None:
    if grid.M > ORACLE_MAX_M:
        raise ValueError(f"brute-force oracles are limited to M <= {ORACLE_MAX_M}")


def trilinear_bruteforce(grid: GridSpec, u: np.ndarray, third: np.ndarray, weight) -> complex:
    """``L^2 sum weight(|k1|, |j|) uhat(k1) conj(uhat(j)) third(j - k1)``, searching for ``xi_3``."""
    _guard(grid)
    labels, slot = _lattice(grid)
    dk = grid.dk
    total = 0j
    for k1 in labels:
        a = u[slot[k1]]
        if a == 0:
            continue
        r1 = dk * np.hypot(*k1)
        for j in labels:
            xi3 = (j[0] - k1[0], j[1] - k1[1])
            if xi3 not in slot:
                continue
            r2 = dk * np.hypot(*j)
            total += weight(r1, r2) * a * np.conj(u[slot[j]]) * third[slot[xi3]]
    return grid.L**2 * total


def reflect_conj(grid: GridSpec, c: np.ndarray) -> np.ndarray:
    """Coefficients of the complex conjugate field: ``conj(c(-k))``."""
    M = grid.M
    out = np.zeros_like(c)
    for i, j in itertools.product(range(M), range(M)):
        out[i, j] = np.conj(c[(-i) % M, (-j) % M])
    return out


def refined_energy_bruteforce(u: Field2D, n_plus: Field2D, params: IMethodParams) -> float:
    """``||grad Iu||^2 + ||n_+||^2/2 + (1/2) sum sigma uhat ubarhat ntildehat`` by direct loops."""
    grid = u.grid
    _guard(grid)
    labels, slot = _lattice(grid)
    uc = u.spectral_data()
    npc = n_plus.spectral_data()
    L2 = grid.L**2
    quad = 0.0
    for lab in labels:
        r = grid.dk * np.hypot(*lab)
        quad += L2 * r**2 * imethod.m(r, params) ** 2 * abs(uc[slot[lab]]) ** 2
        quad += 0.5 * L2 * abs(npc[slot[lab]]) ** 2
    ntilde = npc + reflect_conj(grid, npc)
    tri = trilinear_bruteforce(grid, uc, ntilde, lambda a, b: imethod.sigma_radial(a, b, params))
    return float(quad + 0.5 * tri.real)


def quartic_bruteforce(grid: GridSpec, u: np.ndarray, n: np.ndarray, params: IMethodParams,
                       band: bool = True) -> complex:
    """``L^2 sum_{xi_1+...+xi_4=0} W(|xi_2+xi_3|, |xi_2|) uhat(xi_1) conj(uhat(-xi_2)) nhat(xi_3) nhat(xi_4)``.

    The loop runs over ``xi_1``, ``xi_2``, ``xi_3`` and looks ``xi_4`` up
    explicitly.  With ``band``, ``xi_2 + xi_3`` must satisfy the 2/3 rule.
    """
    _guard(grid)
    labels, slot = _lattice(grid)
    M = grid.M
    dk = grid.dk
    ubar = reflect_conj(grid, u)
    lab = np.array(labels)
    total = 0j
    for x1 in labels:
        a = u[slot[x1]]
        if a == 0:
            continue
        for x2 in labels:
            b = ubar[slot[x2]]
            if b == 0:
                continue
            x3 = lab
            x4 = -(np.array(x1) + np.array(x2) + x3)
            ok = np.all(np.abs(x4) < M // 2, axis=1)
            x23 = np.array(x2) + x3
            if band:
                ok &= np.all(3 * np.abs(x23) < M, axis=1)
            if not ok.any():
                continue
            x3k, x4k, x23k = x3[ok], x4[ok], x23[ok]
            w = imethod.quartic_weight_radial(dk * np.hypot(x23k[:, 0], x23k[:, 1]),
                                              np.full(x3k.shape[0], dk * np.hypot(*x2)), params)
            total += a * b * np.sum(w * n[x3k[:, 0] % M, x3k[:, 1] % M] * n[x4k[:, 0] % M, x4k[:, 1] % M])
    return grid.L**2 * total


def hamiltonian_unv_quadrature(u: Field2D, n: Field2D, v) -> float:
    """``||grad u||^2 + ||n||^2/2 + ||v||^2/2 + int n|u|^2`` on a 4x refined physical grid."""
    grid = u.grid
    fine = 4 * grid.M
    L = grid.L

    def upsample(c):
        M = grid.M
        big = np.zeros((fine, fine), dtype=complex)
        idx = np.arange(M)
        k = np.where(idx < M // 2, idx, idx - M)
        keep = np.abs(k) < M // 2
        rows = k[keep] % fine
        big[np.ix_(rows, rows)] = c[np.ix_(idx[keep], idx[keep])]
        return np.fft.ifft2(big, norm="forward")

    uc = u.spectral_data()
    area = (L / fine) ** 2
    kx, ky = grid.wavevectors
    ux, uy = upsample(1j * kx * uc), upsample(1j * ky * uc)
    uu = upsample(uc)
    nn = upsample(n.spectral_data()).real
    vx, vy = upsample(v[0].spectral_data()).real, upsample(v[1].spectral_data()).real
    dens = np.abs(ux) ** 2 + np.abs(uy) ** 2 + 0.5 * nn**2 + 0.5 * (vx**2 + vy**2) + nn * np.abs(uu) ** 2
    return float(np.sum(dens) * area)
