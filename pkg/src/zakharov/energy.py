"""Mass, Hamiltonians, modified and refined energies, and ``dH~/dt``.

All functionals act on the lattice trigonometric polynomials represented by
the fields, with the Nyquist row/column projected out (it carries no
``xi <-> -xi`` partner).  Products of fields are integrated exactly by
zero-padded quadrature, so "physical-space" integrals and the frequency
sums below agree to rounding error.

Frequency sums use the same normalisation as the transforms:
``int f g h dx = L^2 sum_{k1+k2+k3=0} fhat(k1) ghat(k2) hhat(k3)``.  In the
pair form used throughout, the conjugate factor is written as
``conj(uhat(j))`` with ``j = -xi_2``, so that ``xi_3 = j - k1``.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import imethod
from .imethod import IMethodParams
from .spectral import (
    Field2D,
    GridSpec,
    drop_nyquist,
    exact_integral,
    hermitian_defect,
    inverse_symbol,
    pad_coefficients,
    reflect,
    truncate_coefficients,
)
from .state import WaveState

PAIR_BUDGET_M = 128
REALNESS_TOL = 1e-10
CONSISTENCY_TOL = 1e-9


class BudgetExceeded(ValueError):
    """Grid too large for an exact multilinear sum."""


class SymbolMismatch(AssertionError):
    """Two routes to the same functional disagree; indicates a symbol bug."""


def _coeffs(f) -> np.ndarray:
    if isinstance(f, Field2D):
        return drop_nyquist(f.spectral_data(), f.grid)
    raise TypeError(f"expected Field2D, got {type(f).__name__}")


def _real(value: complex, scale: float, what: str) -> float:
    scale = max(abs(scale), abs(value.real), 1e-300)
    if abs(value.imag) > REALNESS_TOL * scale:
        raise AssertionError(f"{what}: imaginary residue {value.imag:.3e} (scale {scale:.3e})")
    return float(value.real)


def _check_real_field(c: np.ndarray, name: str, tol: float = 1e-10) -> None:
    if hermitian_defect(c) > tol:
        raise ValueError(f"{name} must be real-valued (hermitian defect {hermitian_defect(c):.2e})")


def conj_field_coeffs(c: np.ndarray) -> np.ndarray:
    """Coefficients of the complex conjugate of the field with coefficients ``c``."""
    return np.conj(reflect(c))


# -- quadratic and cubic building blocks -------------------------------------

def mass(u: Field2D) -> float:
    """``||u||_{L^2}^2``."""
    c = _coeffs(u)
    return float(u.grid.L**2 * np.sum(np.abs(c) ** 2))


def _weighted_sq(c: np.ndarray, grid: GridSpec, weight: np.ndarray) -> float:
    return float(grid.L**2 * np.sum(weight * np.abs(c) ** 2))


def gradient_sq(u: Field2D) -> float:
    """``||grad u||_{L^2}^2``."""
    return _weighted_sq(_coeffs(u), u.grid, u.grid.k_squared)


def hamiltonian_unv(u: Field2D, n: Field2D, v: Sequence[Field2D]) -> float:
    """``||grad u||^2 + (||n||^2 + ||v||^2)/2 + int n |u|^2``."""
    grid = u.grid
    uc, nc = _coeffs(u), _coeffs(n)
    vc = [_coeffs(component) for component in v]
    _check_real_field(nc, "n")
    for i, c in enumerate(vc):
        _check_real_field(c, f"v[{i}]")
    quad = gradient_sq(u) + 0.5 * (
        _weighted_sq(nc, grid, 1.0) + sum(_weighted_sq(c, grid, 1.0) for c in vc)
    )
    cubic = exact_integral(grid, nc, uc, conj_field_coeffs(uc))
    return quad + _real(cubic, quad, "int n|u|^2")


def hamiltonian_pm(u: Field2D, n_plus: Field2D) -> float:
    """``||grad u||^2 + ||n_+||^2/2 + (1/2) int (n_+ + conj n_+) |u|^2``."""
    grid = u.grid
    uc, npc = _coeffs(u), _coeffs(n_plus)
    ntilde = npc + conj_field_coeffs(npc)
    quad = gradient_sq(u) + 0.5 * _weighted_sq(npc, grid, 1.0)
    cubic = 0.5 * exact_integral(grid, ntilde, uc, conj_field_coeffs(uc))
    return quad + _real(cubic, quad, "cubic term of H(u, n_+)")


def modified_energy(u: Field2D, n_plus: Field2D, params: IMethodParams) -> float:
    """``H(Iu, n_+)``."""
    return hamiltonian_pm(imethod.apply_I(u, params), n_plus)


# -- lattice pair sums --------------------------------------------------------

def _check_budget(grid: GridSpec, limit: int | None = None) -> None:
    limit = PAIR_BUDGET_M if limit is None else limit
    if grid.M > limit:
        raise BudgetExceeded(f"grid M={grid.M} exceeds the exact-sum budget M <= {limit}")


def _centered(a: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(a)


def pair_sum(grid: GridSpec, outer: np.ndarray, inner: np.ndarray, shifted: np.ndarray,
             table: np.ndarray) -> complex:
    """``sum_p outer(p) sum_q T[|p|, |q|] inner(q) shifted(q - p)``.

    ``outer``, ``inner`` and ``shifted`` are coefficient arrays in FFT layout;
    ``shifted`` is read as zero outside the lattice.  ``T`` is a radial table
    from :func:`imethod.radial_table`.  Cost is ``O(M^4)``; rows ``p`` with
    ``outer(p) = 0`` are skipped.
    """
    M = grid.M
    _, classes = grid.radius_classes
    cls_c = _centered(classes)
    inner_c = _centered(inner)
    # shifted(d) for d in [-3M/2, 3M/2) stored at offset 3M/2
    big = np.zeros((3 * M, 3 * M), dtype=complex)
    big[M:2 * M, M:2 * M] = _centered(shifted)
    off = 3 * M // 2
    idx = grid.index
    total = 0j
    rows, cols = np.nonzero(outer)
    for i, j in zip(rows, cols):
        sx, sy = off - M // 2 - idx[i], off - M // 2 - idx[j]
        window = big[sx:sx + M, sy:sy + M]
        weights = table[classes[i, j]][cls_c]
        total += outer[i, j] * np.vdot(weights, inner_c * window)
    return total


def lattice_convolution(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``c(p) = sum_k a(k) b(p - k)`` over lattice ``k``, ``p - k`` (no wrap-around), restricted to the lattice."""
    M = a.shape[0]
    pa = np.fft.ifft2(pad_coefficients(a, 2), norm="forward")
    pb = np.fft.ifft2(pad_coefficients(b, 2), norm="forward")
    return truncate_coefficients(np.fft.fft2(pa * pb, norm="forward"), M)


def trilinear_sum(u: Field2D, weight_table: np.ndarray, third: np.ndarray) -> complex:
    """``L^2 sum_{k1, j} T[|k1|, |j|] uhat(k1) conj(uhat(j)) third(j - k1)``."""
    grid = u.grid
    _check_budget(grid)
    uc = _coeffs(u)
    return grid.L**2 * pair_sum(grid, uc, np.conj(uc), drop_nyquist(third, grid), weight_table)


def _ntilde(n_plus: Field2D) -> np.ndarray:
    npc = _coeffs(n_plus)
    return npc + conj_field_coeffs(npc)


def refined_energy(u: Field2D, n_plus: Field2D, params: IMethodParams, check: bool = True) -> float:
    """Refined energy ``H~(u, n_+)``: the modified energy with ``m1 m2`` replaced by ``sigma``.

    With ``check`` set, the trilinear sum is recomputed with symbol ``m1 m2``
    and compared against the padded physical-space integral of
    ``(1/2) (n_+ + conj n_+) |Iu|^2``; this pins the convolution
    normalisation.
    """
    grid = u.grid
    _check_budget(grid)
    uc = _coeffs(u)
    mgrid = imethod.multiplier_on_grid(grid, params)
    quad = _weighted_sq(uc, grid, grid.k_squared * mgrid**2) + 0.5 * _weighted_sq(_coeffs(n_plus), grid, 1.0)
    ntilde = _ntilde(n_plus)
    sig = imethod.radial_table(grid, imethod.sigma_radial, params)
    tri = 0.5 * trilinear_sum(u, sig, ntilde)
    if check:
        mm = imethod.radial_table(grid, lambda a, b, p: imethod.m(a, p) * imethod.m(b, p), params)
        via_pairs = 0.5 * trilinear_sum(u, mm, ntilde)
        Iu = mgrid * uc
        via_quadrature = 0.5 * exact_integral(grid, ntilde, Iu, conj_field_coeffs(Iu))
        scale = max(abs(via_quadrature), quad, 1e-300)
        if abs(via_pairs - via_quadrature) > 1e-10 * scale:
            raise SymbolMismatch(
                f"pair-sum normalisation off: {via_pairs} vs {via_quadrature}")
    return quad + _real(tri, quad, "refined trilinear term")


@dataclass(frozen=True)
class FixedTimeDifference:
    value: float
    direct: float


def fixed_time_difference(u: Field2D, n_plus: Field2D, params: IMethodParams,
                          return_both: bool = False):
    """``H(Iu, n_+) - H~(u, n_+)``, cross-checked against the direct ``(m1 m2 - sigma)`` sum."""
    grid = u.grid
    diff = modified_energy(u, n_plus, params) - refined_energy(u, n_plus, params, check=False)
    table = imethod.radial_table(
        grid, lambda a, b, p: imethod.m(a, p) * imethod.m(b, p) - imethod.sigma_radial(a, b, p), params)
    direct_c = 0.5 * trilinear_sum(u, table, _ntilde(n_plus))
    scale = max(abs(modified_energy(u, n_plus, params)), 1e-300)
    direct = _real(direct_c, scale, "fixed-time difference")
    if abs(diff - direct) > CONSISTENCY_TOL * max(abs(direct), scale * 1e-6):
        raise SymbolMismatch(f"fixed-time difference routes disagree: {diff!r} vs {direct!r}")
    if return_both:
        return FixedTimeDifference(diff, direct)
    return diff


# -- time derivative of the refined energy -----------------------------------

@dataclass(frozen=True)
class RefinedDerivative:
    """Right-hand side of the ``dH~/dt`` identity, split into its terms."""

    trilinear: float
    quartic: float
    quartic_n_plus: float
    method: str
    quartic_stderr: float = 0.0

    @property
    def total(self) -> float:
        return self.trilinear + self.quartic


def _wave_n(state: WaveState, variant: str) -> np.ndarray:
    npc = _coeffs(state.n_plus)
    if variant == "n_plus":
        return npc
    if variant == "n":
        return 0.5 * (npc + _coeffs(state.n_minus))
    raise ValueError(f"unknown quartic variant {variant!r}")


def trilinear_derivative_term(state: WaveState, params: IMethodParams) -> float:
    """``(i/2) sum_{Sigma_3} (1 - sigma) |xi_3| uhat ubarhat (nhat_+ - nbarhat_+)(xi_3)``."""
    grid = state.grid
    npc = _coeffs(state.n_plus)
    third = grid.k_abs * (npc - conj_field_coeffs(npc))
    table = 1.0 - imethod.radial_table(grid, imethod.sigma_radial, params)
    value = 0.5j * trilinear_sum(state.u, table, third)
    scale = abs(value) + grid.L**2 * np.sum(np.abs(_coeffs(state.u)) ** 2) * np.max(np.abs(third) + 1e-300)
    return _real(value, scale, "trilinear part of dH~/dt")


def quartic_sum_factored(u: Field2D, n_coeffs: np.ndarray, params: IMethodParams) -> complex:
    """``L^2 sum_{Sigma_4} W(|xi_23|, |xi_2|) uhat(xi_1) ubarhat(xi_2) nhat(xi_3) nhat(xi_4)``.

    ``W(a, b) = b^2 (m(a)^2 - m(b)^2) / (a^2 - b^2)``.  The ``xi_1, xi_4``
    pair is contracted first as an exact lattice convolution, so the cost is
    ``O(M^4)``.  ``xi_2 + xi_3`` is restricted to the 2/3-rule band, which is
    the set the dealiased flow actually couples; the band also keeps
    ``xi_2 + xi_3`` inside the grid, so the ``O(M)`` outer array is alias-free.
    """
    grid = u.grid
    _check_budget(grid)
    uc = drop_nyquist(_coeffs(u), grid)
    nc = drop_nyquist(n_coeffs, grid)
    conv = lattice_convolution(uc, nc)          # C(p) = (u n)^(p)
    outer = reflect(conv) * grid.dealias_mask   # C(-q), q in the band
    outer = drop_nyquist(outer, grid)
    table = imethod.radial_table(grid, imethod.quartic_weight_radial, params)
    return grid.L**2 * pair_sum(grid, outer, conj_field_coeffs(uc), reflect(nc), table)


def quartic_sum_monte_carlo(u: Field2D, n_coeffs: np.ndarray, params: IMethodParams,
                            samples: int = 10**7, seed: int = 0, band: bool = True,
                            chunk: int = 10**6) -> tuple[complex, float]:
    """Uniform Monte Carlo estimate of the quartic sum and its standard error.

    Triples ``(xi_1, xi_2, xi_3)`` are drawn uniformly from the lattice; the
    summand is zero unless ``xi_4 = -xi_1-xi_2-xi_3`` is on the lattice (and,
    with ``band``, ``xi_2 + xi_3`` lies in the 2/3 band).
    """
    grid = u.grid
    M = grid.M
    uc = drop_nyquist(_coeffs(u), grid)
    ubar = conj_field_coeffs(uc)
    nc = drop_nyquist(n_coeffs, grid)
    rng = np.random.default_rng(seed)
    half = M // 2
    total = 0j
    total_sq = 0.0
    drawn = 0
    while drawn < samples:
        size = min(chunk, samples - drawn)
        j = rng.integers(-half + 1, half, size=(size, 3, 2))
        j4 = -j.sum(axis=1)
        ok = np.all(np.abs(j4) < half, axis=1)
        j23 = j[:, 1] + j[:, 2]
        if band:
            ok &= np.all(3 * np.abs(j23) < M, axis=1)
        a = np.sqrt((j23**2).sum(axis=1)) * grid.dk
        b = np.sqrt((j[:, 1] ** 2).sum(axis=1)) * grid.dk
        w = imethod.quartic_weight_radial(a, b, params)
        term = (w * uc[j[:, 0, 0] % M, j[:, 0, 1] % M] * ubar[j[:, 1, 0] % M, j[:, 1, 1] % M]
                * nc[j[:, 2, 0] % M, j[:, 2, 1] % M] * nc[j4[:, 0] % M, j4[:, 1] % M])
        term = np.where(ok, term, 0.0)
        total += term.sum()
        total_sq += float(np.sum(np.abs(term) ** 2))
        drawn += size
    volume = float((M - 1) ** 6)
    mean = total / drawn
    var = max(total_sq / drawn - abs(mean) ** 2, 0.0)
    stderr = volume * np.sqrt(var / drawn)
    return grid.L**2 * volume * mean, float(grid.L**2 * stderr)


def refined_energy_time_derivative(state: WaveState, params: IMethodParams, method: str = "exact",
                                   quartic_variant: str = "n", samples: int = 10**7,
                                   seed: int = 0) -> RefinedDerivative:
    """``dH~/dt`` from the trilinear and quartic frequency sums (no time stepping).

    ``quartic_variant`` selects which density enters the quartic sum in
    ``total``: ``"n"`` uses ``n = (n_+ + n_-)/2`` and ``"n_plus"`` uses
    ``n_+``.  Both quartic values are always reported.
    """
    if quartic_variant not in ("n", "n_plus"):
        raise ValueError(f"unknown quartic variant {quartic_variant!r}")
    grid = state.grid
    tri = trilinear_derivative_term(state, params)
    if method == "exact":
        _check_budget(grid)
        q_n = quartic_sum_factored(state.u, _wave_n(state, "n"), params)
        q_p = quartic_sum_factored(state.u, _wave_n(state, "n_plus"), params)
        err = 0.0
    elif method == "monte_carlo":
        q_n, err = quartic_sum_monte_carlo(state.u, _wave_n(state, "n"), params, samples, seed)
        q_p, _ = quartic_sum_monte_carlo(state.u, _wave_n(state, "n_plus"), params, samples, seed)
    else:
        raise ValueError(f"unknown method {method!r}")
    quartic = {"n": 2 * q_n.imag, "n_plus": 2 * q_p.imag}
    chosen = quartic[quartic_variant]
    other = quartic["n_plus"]
    return RefinedDerivative(trilinear=tri, quartic=chosen, quartic_n_plus=other, method=method,
                             quartic_stderr=2 * err)


# -- ledger -----------------------------------------------------------------

LEDGER_COLUMNS = ("t", "mass", "h_unv", "h_pm", "h_modified", "h_refined", "fixed_time_diff",
                  "sobolev_u", "l2_n", "l2_lam_inv_nt")


@dataclass(frozen=True)
class EnergyLedger:
    """One diagnostic row; ``h_modified - h_refined == fixed_time_diff``."""

    t: float
    mass: float
    h_unv: float
    h_pm: float
    h_modified: float
    h_refined: float
    fixed_time_diff: float
    sobolev_u: float
    l2_n: float
    l2_lam_inv_nt: float

    def as_row(self) -> list[str]:
        return [repr(float(getattr(self, name))) for name in LEDGER_COLUMNS]

    def norm_triple(self) -> float:
        return self.sobolev_u + self.l2_n + self.l2_lam_inv_nt


def ledger_row(state: WaveState, params: IMethodParams | None = None, sobolev_s: float | None = None,
               refined: bool = True) -> EnergyLedger:
    """Evaluate every diagnostic for ``state``.

    Without ``params`` (or with ``refined=False``) the refined energy is not
    summed; ``h_modified``/``h_refined`` then take the ``I = identity`` resp.
    unrefined value so the row stays finite and ``fixed_time_diff`` is the
    exact difference of the two columns.
    """
    grid = state.grid
    uc, npc, nmc = (_coeffs(f) for f in (state.u, state.n_plus, state.n_minus))
    n = 0.5 * (npc + nmc)
    lam_inv_nt = (npc - nmc) / 2j
    u_field = state.u
    n_field = Field2D.spectral(grid, n)
    # irrotational velocity with -div v = n_t
    nt = grid.k_abs * lam_inv_nt
    kx, ky = grid.wavevectors
    pot = inverse_symbol(grid.k_squared) * nt
    v = (Field2D.spectral(grid, 1j * kx * pot), Field2D.spectral(grid, 1j * ky * pot))
    h_unv = hamiltonian_unv(u_field, n_field, v)
    h_pm = hamiltonian_pm(u_field, state.n_plus)
    if params is None:
        h_mod = h_pm
        h_ref = h_pm
    else:
        h_mod = modified_energy(u_field, state.n_plus, params)
        h_ref = refined_energy(u_field, state.n_plus, params, check=False) if refined else h_mod
    s = sobolev_s if sobolev_s is not None else (params.regularity if params else 1.0)
    sob = float(np.sqrt(grid.L**2 * np.sum((1 + grid.k_squared) ** s * np.abs(uc) ** 2)))
    return EnergyLedger(
        t=float(state.t),
        mass=mass(u_field),
        h_unv=h_unv,
        h_pm=h_pm,
        h_modified=h_mod,
        h_refined=h_ref,
        fixed_time_diff=h_mod - h_ref,
        sobolev_u=sob,
        l2_n=float(np.sqrt(_weighted_sq(n, grid, 1.0))),
        l2_lam_inv_nt=float(np.sqrt(_weighted_sq(lam_inv_nt, grid, 1.0))),
    )


def write_ledger(path, rows: Iterable[EnergyLedger], append: bool = False) -> None:
    path = Path(path)
    exists = append and path.exists() and path.stat().st_size > 0
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.writer(fh)
        if not exists:
            writer.writerow(LEDGER_COLUMNS)
        for row in rows:
            writer.writerow(row.as_row())


def read_ledger(path) -> list[EnergyLedger]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != LEDGER_COLUMNS:
            raise ValueError(f"{path}: unexpected ledger header {reader.fieldnames}")
        return [EnergyLedger(**{k: float(v) for k, v in rec.items()}) for rec in reader]


def coercivity_constant(mass_u: float, ground_state_mass: float, eps: float | None = None) -> float:
    """``c_0`` with ``||grad u||^2 + ||n_+||^2 <= c_0 H(u, n_+)`` below the mass threshold.

    From the Gagliardo-Nirenberg step: for ``q = mass/||Q||^2 < eps < 1``,
    ``H >= (1-eps)/2 ||n||^2 + ||v||^2/2 + (1 - q/eps) ||grad u||^2``.  Default
    ``eps = sqrt(q)`` balances the two losses.
    """
    q = mass_u / ground_state_mass
    if not q < 1:
        raise ValueError("coercivity needs mass below the ground-state mass")
    if eps is None:
        eps = np.sqrt(q) if q > 0 else 0.5
    if not (q < eps < 1):
        raise ValueError("need mass ratio < eps < 1")
    return 1.0 / min((1 - eps) / 2, 1 - q / eps)
