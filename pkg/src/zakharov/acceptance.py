"""Acceptance checks, shared by ``zakharov verify`` and ``tests/test_acceptance.py``.

Each check builds its own scenario, runs it at the stated tolerance and
returns a :class:`CriterionResult`; nothing here is relaxed for speed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import energy, oracles
from .config import ExperimentConfig
from .dynamics import (
    BlowUpError,
    evolve,
    evolve_physical,
    make_hamiltonian_data,
    project_state,
    reference_evolve,
    to_pm,
)
from .groundstate import (
    discretize,
    gn_check,
    gn_ratios,
    ground_state,
    variational_ground_state,
)
from .imethod import IMethodParams, sigma_radial
from .presets import make_preset
from .spectral import Field2D, GridSpec, inverse_symbol
from .state import PhysicalState
from .studies import (
    StudyAssertionError,
    fit_loglog,
    run_almost_conservation_study,
    run_fixed_time_difference_study,
    run_growth_study,
)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.title}: {self.detail} ({self.seconds:.1f}s)"


def _rel(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# 1 -------------------------------------------------------------------------

def check_conservation(out_dir=None) -> tuple[bool, str]:
    grid = GridSpec(64, 16 * np.pi)
    data = make_preset("gaussian", grid, mass_fraction=0.5)
    t0 = time.perf_counter()
    traj = evolve(data.wave_state(), 1.0, 1e-3, ledger_every=100)
    elapsed = time.perf_counter() - t0
    m = np.array([r.mass for r in traj.ledger])
    h = np.array([r.h_unv for r in traj.ledger])
    dm = float(np.max(np.abs(m / m[0] - 1)))
    dh = float(np.max(np.abs(h / h[0] - 1)))
    ok = dm <= 1e-8 and dh <= 1e-5 and elapsed <= 120
    return ok, f"mass drift {dm:.2e} (<= 1e-8), H drift {dh:.2e} (<= 1e-5), run {elapsed:.1f}s (<= 120s)"


# 2 -------------------------------------------------------------------------

def check_formulations(out_dir=None) -> tuple[bool, str]:
    grid = GridSpec(64, 16 * np.pi)
    data = make_preset("gaussian_pair", grid, mass_fraction=0.4)
    X, Y = grid.mesh
    c = grid.L / 2
    n1 = 0.05 * np.sin(2 * np.pi * X / grid.L) * np.exp(-((Y - c) ** 2) / 20)
    n1 = Field2D.physical(grid, n1 - n1.mean(), real_valued=True)
    n0, n1, v0 = make_hamiltonian_data(data.n0, n1)
    T, dt = 0.5, 1e-3
    wave = evolve(to_pm(data.u0, n0, n1), T, dt).final
    phys = evolve_physical(PhysicalState(0.0, data.u0, n0, v0), T, dt)
    npl, nmi = wave.n_plus.spectral_data(), wave.n_minus.spectral_data()
    n_w = 0.5 * (npl + nmi)
    li_w = (npl - nmi) / 2j
    kx, ky = grid.wavevectors
    nt = -(1j * kx * phys.v[0].spectral_data() + 1j * ky * phys.v[1].spectral_data())
    li_p = inverse_symbol(grid.k_abs) * nt
    errs = (_rel(wave.u.spectral_data(), phys.u.spectral_data()), _rel(n_w, phys.n.spectral_data()),
            _rel(li_w, li_p))
    ok = max(errs) <= 1e-6
    return ok, "relative gaps u {:.1e}, n {:.1e}, Lam^-1 n_t {:.1e} (<= 1e-6)".format(*errs)


# 3 -------------------------------------------------------------------------

def check_sigma(out_dir=None) -> tuple[bool, str]:
    rng = np.random.default_rng(0)
    worst, sub_ok = 0.0, True
    for N in (4, 8, 16, 32):
        for s in (0.6, 0.75, 0.9):
            p = IMethodParams(N, s)
            low = rng.uniform(0, N, size=(2, 20000))
            sub_ok &= bool(np.all(sigma_radial(low[0], low[1], p) == 1.0))
            r1 = np.concatenate([rng.uniform(0, 64 * N, 40000), np.exp(rng.uniform(-3, np.log(64 * N), 40000))])
            r2 = np.concatenate([rng.uniform(0, 64 * N, 40000), r1[40000:] * (1 + rng.normal(0, 1e-3, 40000))])
            diag = np.linspace(0, 8 * N, 4001)
            vals = np.concatenate([sigma_radial(r1, np.abs(r2), p), sigma_radial(diag, diag, p)])
            worst = max(worst, float(np.max(np.abs(vals))))
    ok = sub_ok and worst <= 4
    return ok, f"sigma == 1 below N: {sub_ok}; sampled sup|sigma| = {worst:.4f} (<= 4)"


# 4 -------------------------------------------------------------------------

FIXED_DIFF_CONFIG = ExperimentConfig(M=32, L=2 * np.pi, N_list=(1.0, 2.0, 4.0, 8.0), s=0.75,
                                     preset="gaussian_pair")


def check_fixed_difference(out_dir=None) -> tuple[bool, str]:
    t0 = time.perf_counter()
    try:
        res = run_fixed_time_difference_study(FIXED_DIFF_CONFIG, out_dir=out_dir)
    except StudyAssertionError as exc:
        res = exc.result
    elapsed = time.perf_counter() - t0
    fit = res.fits["abs_diff"]
    ok = res.passed and fit.admissible and fit.slope <= -0.8 and elapsed <= 300
    return ok, f"{fit.describe()} (<= -0.8), run {elapsed:.1f}s (<= 300s)"


# 5 -------------------------------------------------------------------------

ALMOST_CONS_CONFIG = ExperimentConfig(M=128, L=2 * np.pi, dt=1e-3, delta=0.1, N_list=(2.0, 4.0, 8.0, 16.0),
                                      s=0.75, preset="random_smooth", seed=0, ensemble=2)


def check_almost_conservation(out_dir=None) -> tuple[bool, str]:
    try:
        res = run_almost_conservation_study(ALMOST_CONS_CONFIG, out_dir=out_dir)
    except StudyAssertionError as exc:
        res = exc.result
    fr, fm = res.fits["dH_refined"], res.fits["dH_modified"]
    ok = (res.passed and fr.admissible and fm.admissible and fr.slope <= -0.4
          and fr.slope <= fm.slope - 0.3)
    return ok, (f"slope(H~) {fr.slope:+.3f} (<= -0.4), slope(H(Iu)) {fm.slope:+.3f}, "
                f"gap {fm.slope - fr.slope:.3f} (>= 0.3)")


# 6 -------------------------------------------------------------------------

def check_time_derivative(out_dir=None, samples: int = 20, h: float = 1e-5) -> tuple[bool, str]:
    grid = GridSpec(16, 2 * np.pi)
    X, Y = grid.mesh
    c = np.pi
    u = 0.8 * np.exp(-((X - c) ** 2 + (Y - c) ** 2)) * np.exp(1j * X)
    n0 = -0.5 * np.exp(-((X - c - 1) ** 2 + (Y - c) ** 2) / 1.5)
    n1 = 0.3 * np.sin(X)
    state = project_state(to_pm(Field2D.physical(grid, u), Field2D.physical(grid, n0, True),
                                Field2D.physical(grid, n1, True)))
    p = IMethodParams(1.0, 0.6)
    worst = 0.0
    for _ in range(samples):
        a = reference_evolve(state, -h, tol=1e-13)
        b = reference_evolve(state, h, tol=1e-13)
        fd = (energy.refined_energy(b.u, b.n_plus, p) - energy.refined_energy(a.u, a.n_plus, p)) / (2 * h)
        rhs = energy.refined_energy_time_derivative(state, p).total
        worst = max(worst, abs(fd - rhs) / abs(rhs))
        state = reference_evolve(state, 0.05, tol=1e-12)
    return worst <= 1e-3, f"worst relative gap over {samples} times {worst:.2e} (<= 1e-3)"


# 7 -------------------------------------------------------------------------

def _random_batch(rng, grid: GridSpec, size: int) -> np.ndarray:
    """Half random-phase smooth spectra, half sums of one to three random complex Gaussian bumps."""
    half = size // 2
    decay = rng.uniform(0.5, 3.0, half)[:, None, None]
    scale = rng.uniform(0.2, 1.0, half)[:, None, None] * grid.k_abs.max()
    env = np.exp(-(grid.k_squared[None] / scale**2) ** decay)
    noise = rng.standard_normal((half, grid.M, grid.M)) + 1j * rng.standard_normal((half, grid.M, grid.M))
    spectral = np.fft.ifft2(env * noise * grid.dealias_mask, norm="forward", axes=(-2, -1))
    X, Y = grid.mesh
    bumps = np.zeros((size - half, grid.M, grid.M), dtype=complex)
    for b in bumps:
        for _ in range(rng.integers(1, 4)):
            cx, cy = rng.uniform(0.3, 0.7, 2) * grid.L
            w = rng.uniform(1.5, 4.0) * grid.dx
            amp = rng.standard_normal() + 1j * rng.standard_normal()
            b += amp * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * w * w))
    return np.concatenate([spectral, bumps])


def check_ground_state(out_dir=None, fields: int = 10**4) -> tuple[bool, str]:
    prof = ground_state()
    var = variational_ground_state(GridSpec(256, 40.0))
    agree = abs(var.l2_norm_sq - prof.l2_norm_sq) / prof.l2_norm_sq
    rng = np.random.default_rng(7)
    worst = 0.0
    per = [fields // 3 + (1 if i < fields % 3 else 0) for i in range(3)]
    for M, count in zip((32, 64, 128), per):
        grid = GridSpec(M, 16 * np.pi)
        done = 0
        while done < count:
            k = min(250, count - done)
            worst = max(worst, float(np.max(gn_ratios(_random_batch(rng, grid, k), grid, prof.l2_norm_sq))))
            done += k
    qgrid = GridSpec(256, 40.0)
    sharp = gn_check(discretize(prof, qgrid), prof.l2_norm_sq).ratio
    ok = agree <= 1e-3 and worst <= 1 + 1e-6 and sharp >= 0.999
    return ok, (f"||Q||^2 shooting {prof.l2_norm_sq:.10f} vs variational {var.l2_norm_sq:.10f} "
                f"(rel {agree:.1e}); max GN ratio over {fields} fields {worst:.4f}; at Q {sharp:.6f}")


# 8 -------------------------------------------------------------------------

GROWTH_CONFIG = ExperimentConfig(M=64, L=16 * np.pi, dt=1e-2, T=50.0, ledger_every=100, s=0.8,
                                 preset="gaussian", init_params={"mass_fraction": 0.5})


def check_growth(out_dir=None) -> tuple[bool, str]:
    try:
        res = run_growth_study(GROWTH_CONFIG, out_dir=out_dir)
    except BlowUpError as exc:
        return False, f"blow-up at t = {exc.t:g}"
    except StudyAssertionError as exc:
        res = exc.result
    fit = res.fits["envelope"]
    ok = res.passed and fit.admissible and fit.slope <= 2.5
    note = f"; {res.flags[0]}" if res.flags else ""
    return ok, f"no blow-up to T = 50, alpha {fit.slope:+.3f} (<= 2.5){note}"


# 9 -------------------------------------------------------------------------

def check_strang_order(out_dir=None) -> tuple[bool, str]:
    grid = GridSpec(64, 16 * np.pi)
    state = project_state(make_preset("gaussian", grid, mass_fraction=0.5).wave_state())
    T = 1.0
    dts = [0.1 / 2**k for k in range(4)]
    ref = evolve(state, T, dts[0] / 64).final.coefficients()
    errs = []
    for dt in dts:
        fin = evolve(state, T, dt).final.coefficients()
        errs.append(np.sqrt(sum(np.sum(np.abs(a - b) ** 2) for a, b in zip(fin, ref))))
    order = fit_loglog(dts, errs).slope
    return 1.9 <= order <= 2.1, f"observed order {order:.3f} in [1.9, 2.1]"


# 10 ------------------------------------------------------------------------

def check_bruteforce(out_dir=None) -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    worst_e, worst_q = 0.0, 0.0
    for M in (8, 16):
        grid = GridSpec(M, 2 * np.pi)

        def field(real):
            coeffs = (rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))) * np.exp(-grid.k_squared / 8)
            v = np.fft.ifft2(coeffs, norm="forward")
            return v.real if real else v

        n1 = field(True)
        state = project_state(to_pm(Field2D.physical(grid, field(False)), Field2D.physical(grid, field(True), True),
                                    Field2D.physical(grid, n1 - n1.mean(), True)))
        p = IMethodParams(1.5, 0.7)
        fast = energy.refined_energy(state.u, state.n_plus, p)
        slow = oracles.refined_energy_bruteforce(state.u, state.n_plus, p)
        worst_e = max(worst_e, abs(fast - slow) / abs(slow))
        ncoef = 0.5 * (state.n_plus.spectral_data() + state.n_minus.spectral_data())
        qf = energy.quartic_sum_factored(state.u, ncoef, p)
        qs = oracles.quartic_bruteforce(grid, state.u.spectral_data(), energy.drop_nyquist(ncoef, grid), p)
        worst_q = max(worst_q, abs(qf - qs) / abs(qs))
    ok = worst_e <= 1e-9 and worst_q <= 1e-9
    return ok, f"refined energy rel gap {worst_e:.1e}, quartic sum rel gap {worst_q:.1e} (<= 1e-9)"


CRITERIA: dict[int, tuple[str, Callable]] = {
    1: ("conservation", check_conservation),
    2: ("formulation equivalence", check_formulations),
    3: ("sigma certification", check_sigma),
    4: ("fixed-time difference scaling", check_fixed_difference),
    5: ("almost-conservation scaling", check_almost_conservation),
    6: ("dH~/dt identity", check_time_derivative),
    7: ("ground state and GN", check_ground_state),
    8: ("polynomial growth", check_growth),
    9: ("Strang order", check_strang_order),
    10: ("brute-force equivalence", check_bruteforce),
}


def run_criterion(number: int, out_dir=None) -> CriterionResult:
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    try:
        ok, detail = fn(out_dir=out_dir)
    except Exception as exc:  # a crash is a failure, reported with its cause
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CriterionResult(number, title, bool(ok), detail, time.perf_counter() - t0)


def run_all(only=None, out_dir=None) -> list[CriterionResult]:
    numbers = sorted(CRITERIA) if only is None else sorted(only)
    return [run_criterion(n, out_dir) for n in numbers]
