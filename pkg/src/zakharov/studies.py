"""The four numerical studies, slope fitting and CSV / gnuplot emission."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .config import ConfigError, ExperimentConfig
from .dynamics import boundary_mass_fraction, evolve, project_state, reference_evolve, step
from .energy import fixed_time_difference, modified_energy, refined_energy, write_ledger
from .groundstate import mass_threshold_check
from .imethod import IMethodParams, apply_I
from .presets import InitialData, make_preset
from .spectral import GridSpec, l2_norm_sq, read_snapshot, sobolev_norm
from .state import WaveState

log = logging.getLogger(__name__)

BOUNDARY_MASS_LIMIT = 1e-6
MIN_FIT_POINTS = 4
MIN_FIT_OCTAVES = 3.0


class StudyAssertionError(AssertionError):
    def __init__(self, result: "StudyResult"):
        failed = [a for a in result.assertions if not a.passed]
        super().__init__("; ".join(f"{a.label}: {a.detail}" for a in failed))
        self.result = result


class ThresholdViolation(ValueError):
    pass


# -- fitting -----------------------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    slope: float | None
    intercept: float | None
    residual: float | None
    points: int
    octaves: float

    @property
    def admissible(self) -> bool:
        """Enough points over a wide enough range to assert on the slope."""
        return self.slope is not None and self.points >= MIN_FIT_POINTS and self.octaves >= MIN_FIT_OCTAVES

    def describe(self) -> str:
        if self.slope is None:
            return "slope undefined (fewer than two nonzero points)"
        return f"slope {self.slope:+.3f} (rms residual {self.residual:.2e}, {self.points} pts, {self.octaves:.1f} octaves)"


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> SlopeFit:
    """Ordinary least squares of ``log y`` on ``log x``; non-positive ``y`` are dropped."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if x.size < 2 or np.ptp(x) == 0:
        return SlopeFit(None, None, None, int(x.size), 0.0)
    A = np.column_stack([np.log(x), np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    resid = np.log(y) - A @ coef
    octaves = float(np.log2(x.max() / x.min()))
    return SlopeFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2))), int(x.size), octaves)


# -- results and output -------------------------------------------------------

@dataclass(frozen=True)
class Assertion:
    label: str
    passed: bool
    detail: str


@dataclass
class StudyResult:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple]
    fits: dict[str, SlopeFit] = field(default_factory=dict)
    assertions: list[Assertion] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    outputs: list[Path] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def summary(self) -> str:
        lines = [f"[{self.name}]"]
        lines += [f"  {k}: {fit.describe()}" for k, fit in self.fits.items()]
        lines += [f"  {'PASS' if a.passed else 'FAIL'} {a.label}: {a.detail}" for a in self.assertions]
        lines += [f"  flag: {f}" for f in self.flags]
        return "\n".join(lines)


def _fmt(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_table(path) -> tuple[tuple[str, ...], list[tuple[float, ...]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        return header, [tuple(float(v) for v in row) for row in reader]


def write_gnuplot(path, data_file: str, columns: Sequence[str], x: str, ys: Sequence[str],
                  title: str, logx: bool = True, logy: bool = True) -> Path:
    """A self-contained gnuplot script rendering ``ys`` against ``x`` to a PNG next to it."""
    path = Path(path)
    xi = columns.index(x) + 1
    logs = " ".join(a for a, on in (("x", logx), ("y", logy)) if on)
    plots = ", \\\n     ".join(
        f"'{data_file}' using {xi}:{columns.index(y) + 1} with linespoints title '{y}'" for y in ys)
    script = "\n".join([
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 800,600",
        f"set output '{path.stem}.png'",
        f"set title '{title}'",
        f"set xlabel '{x}'",
        f"set logscale {logs}" if logs else "unset logscale",
        "set grid",
        f"plot {plots}",
        "",
    ])
    path.write_text(script)
    return path


def _emit(result: StudyResult, out_dir, stem: str, x: str, ys: Sequence[str], title: str,
          logx: bool = True, logy: bool = True) -> None:
    if out_dir is None:
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = write_table(out / f"{stem}.csv", result.columns, result.rows)
    gp = write_gnuplot(out / f"{stem}.gp", csv_path.name, result.columns, x, ys, title, logx, logy)
    result.outputs += [csv_path, gp]


def _finalize(result: StudyResult, enforce: bool) -> StudyResult:
    log.info("%s", result.summary())
    if enforce and not result.passed:
        raise StudyAssertionError(result)
    return result


# -- helpers -----------------------------------------------------------------

def grid_of(cfg: ExperimentConfig) -> GridSpec:
    return GridSpec(cfg.M, cfg.L)


def initial_data(cfg: ExperimentConfig, seed: int | None = None) -> InitialData:
    params = {k: v for k, v in cfg.init_params.items() if k != "snapshot"}
    return make_preset(cfg.preset, grid_of(cfg), cfg.seed if seed is None else seed, **params)


def initial_state(cfg: ExperimentConfig, seed: int | None = None) -> WaveState:
    """Preset data, or the first three fields of ``init.snapshot`` as ``(u, n_+, n_-)``."""
    snap = cfg.init_params.get("snapshot")
    if snap:
        t, f = read_snapshot(snap)
        if len(f) < 3:
            raise ConfigError(f"snapshot {snap} holds {len(f)} fields, need (u, n_+, n_-)")
        u, npl, nmi = (g if g.is_spectral else g.to_spectral() for g in f[:3])
        return WaveState(t, u, npl, nmi)
    return initial_data(cfg, seed).wave_state()


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _warn_vacuous(cfg: ExperimentConfig, result: StudyResult) -> None:
    vac = cfg.vacuous_N()
    if vac:
        result.flags.append(f"N above Nyquist {cfg.nyquist:.4g} (I is the identity): {vac}")


# -- studies -----------------------------------------------------------------

def run_fixed_time_difference_study(cfg: ExperimentConfig, state: WaveState | None = None,
                                    out_dir=None) -> StudyResult:
    """``|H(Iu, n_+) - H~(u, n_+)|`` over the dyadic ``N`` list, with a log-log slope."""
    state = project_state(initial_state(cfg) if state is None else state)
    Ns = sorted(float(N) for N in cfg.N_list)

    def one(N):
        return abs(fixed_time_difference(state.u, state.n_plus, IMethodParams(N, cfg.s)))

    diffs = _map(one, Ns, cfg.workers)
    fit = fit_loglog(Ns, diffs)
    result = StudyResult("fixed_time_difference", ("N", "abs_diff", "fit_slope"),
                         [(N, d, fit.slope) for N, d in zip(Ns, diffs)], {"abs_diff": fit})
    _warn_vacuous(cfg, result)
    if fit.slope is None:
        result.flags.append("slope undefined: differences vanish")
    elif fit.admissible:
        result.assertions.append(Assertion("slope <= -0.8", fit.slope <= -0.8, f"slope {fit.slope:+.3f}"))
    else:
        result.flags.append("fit not asserted: needs >= 4 points over >= 3 octaves")
    _emit(result, out_dir, "fixed_time_difference", "N", ["abs_diff"], "fixed-time difference vs N")
    return _finalize(result, cfg.check("fixed_diff"))


def _energy_increments(start: WaveState, end: WaveState, Ns: Sequence[float], s: float, workers: int):
    def one(N):
        p = IMethodParams(N, s)
        dr = refined_energy(end.u, end.n_plus, p, check=False) - refined_energy(start.u, start.n_plus, p, check=False)
        dm = modified_energy(end.u, end.n_plus, p) - modified_energy(start.u, start.n_plus, p)
        return abs(dr), abs(dm)

    return np.array(_map(one, Ns, workers))


def run_almost_conservation_study(cfg: ExperimentConfig, out_dir=None) -> StudyResult:
    """Increments of ``H~`` and ``H(Iu, n_+)`` over ``[0, delta]`` against ``N``.

    With ``init.ensemble = k`` the increments are averaged over ``k``
    trajectories (seeds ``seed .. seed+k-1``) before fitting; each trajectory
    does not depend on ``N``, so it is integrated once.
    """
    Ns = sorted(float(N) for N in cfg.N_list)
    acc = np.zeros((len(Ns), 2))
    for member in range(cfg.ensemble):
        start = project_state(initial_state(cfg, cfg.seed + member))
        end = evolve(start, cfg.delta, cfg.dt, mode=cfg.mode).final
        acc += _energy_increments(start, end, Ns, cfg.s, cfg.workers)
    acc /= cfg.ensemble
    fit_r = fit_loglog(Ns, acc[:, 0])
    fit_m = fit_loglog(Ns, acc[:, 1])
    rows = [(N, a, b, fit_r.slope, fit_m.slope) for N, (a, b) in zip(Ns, acc)]
    result = StudyResult("almost_conservation",
                         ("N", "dH_refined", "dH_modified", "slope_refined", "slope_modified"),
                         rows, {"dH_refined": fit_r, "dH_modified": fit_m})
    _warn_vacuous(cfg, result)
    if fit_r.admissible and fit_m.admissible:
        result.assertions.append(Assertion("refined slope <= -0.4", fit_r.slope <= -0.4,
                                           f"slope {fit_r.slope:+.3f}"))
        result.assertions.append(Assertion(
            "refined slope <= modified slope - 0.3", fit_r.slope <= fit_m.slope - 0.3,
            f"{fit_r.slope:+.3f} vs {fit_m.slope:+.3f}"))
    elif fit_r.slope is None:
        result.flags.append("slope undefined: increments vanish")
    else:
        result.flags.append("fit not asserted: needs >= 4 points over >= 3 octaves")
    _emit(result, out_dir, "almost_conservation", "N", ["dH_refined", "dH_modified"],
          "energy increments over [0, delta] vs N")
    return _finalize(result, cfg.check("almost_cons"))


def almost_conservation_delta_sweep(cfg: ExperimentConfig, N: float, deltas: Sequence[float],
                                    out_dir=None) -> StudyResult:
    """Fixed ``N``, varying interval length: ``|H~(delta) - H~(0)|`` for each ``delta``."""
    start = project_state(initial_state(cfg))
    p = IMethodParams(N, cfg.s)
    h0 = refined_energy(start.u, start.n_plus, p, check=False)
    rows = []
    for d in sorted(float(x) for x in deltas):
        end = evolve(start, d, min(cfg.dt, d), mode=cfg.mode).final
        rows.append((d, abs(refined_energy(end.u, end.n_plus, p, check=False) - h0)))
    result = StudyResult("almost_conservation_delta", ("delta", "dH_refined"), rows,
                         {"dH_refined": fit_loglog(*zip(*rows))})
    _emit(result, out_dir, "almost_conservation_delta", "delta", ["dH_refined"], f"H~ increment vs delta, N = {N:g}")
    return result


def growth_exponent_bound(s: float, slack: float = 0.5) -> float:
    """``(1 - s)/(2s - 3/2) + slack``; only meaningful for ``s > 3/4``."""
    if not s > 0.75:
        raise ConfigError("the polynomial growth bound needs s > 3/4")
    return (1 - s) / (2 * s - 1.5) + slack


def run_growth_study(cfg: ExperimentConfig, out_dir=None) -> StudyResult:
    """Track ``||u||_{H^s} + ||n||_{L^2} + ||Lam^{-1} n_t||_{L^2}`` to ``T`` and fit ``c (1+t)^alpha``.

    The fit uses the running maximum of the triple (its envelope).  Refuses
    to start above the ground-state mass.
    """
    bound = growth_exponent_bound(cfg.s)
    data = initial_data(cfg)
    verdict = mass_threshold_check(data.u0)
    if not verdict.below:
        raise ThresholdViolation(
            f"mass {verdict.mass:.6g} is not below the ground-state mass {verdict.threshold:.6g}")
    every = max(1, cfg.ledger_every)
    ledger_path = Path(out_dir) / "growth_ledger.csv" if out_dir is not None else None
    if ledger_path is not None:
        ledger_path.parent.mkdir(parents=True, exist_ok=True)
    traj = evolve(data.wave_state(), cfg.T, cfg.dt, every, sobolev_s=cfg.s, mode=cfg.mode,
                  ledger_path=ledger_path)
    t = np.array([r.t for r in traj.ledger])
    triple = np.array([r.norm_triple() for r in traj.ledger])
    envelope = np.maximum.accumulate(triple)
    fit = fit_loglog(1 + t, envelope)
    rows = [(ti, yi, ei) for ti, yi, ei in zip(t, triple, envelope)]
    result = StudyResult("growth", ("t", "norm_triple", "envelope"), rows, {"envelope": fit},
                         extra={"bound": bound, "mass_fraction": 1 - verdict.margin})
    if ledger_path is not None:
        result.outputs.append(ledger_path)
    bmf = boundary_mass_fraction(traj.final.u)
    result.extra["boundary_mass_fraction"] = bmf
    if bmf > BOUNDARY_MASS_LIMIT:
        result.flags.append(f"boundary mass fraction {bmf:.2e} > {BOUNDARY_MASS_LIMIT:g}: "
                            "the periodic box no longer mimics the plane")
    if fit.admissible:
        result.assertions.append(Assertion(f"alpha <= {bound:g}", fit.slope <= bound, f"alpha {fit.slope:+.3f}"))
    else:
        result.flags.append("fit not asserted: needs >= 4 points over >= 3 octaves")
    _emit(result, out_dir, "growth", "t", ["norm_triple", "envelope"], "norm triple vs time", logx=False)
    return _finalize(result, cfg.check("growth"))


def _state_distance(a: WaveState, b: WaveState) -> float:
    num = sum(np.sum(np.abs(x - y) ** 2) for x, y in zip(a.coefficients(), b.coefficients()))
    den = sum(np.sum(np.abs(y) ** 2) for y in b.coefficients())
    return float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))


def local_time_norm(state: WaveState, params: IMethodParams) -> float:
    """``||Iu||_{H^1} + ||n_+||_{L^2} + ||n_-||_{L^2}``."""
    return (sobolev_norm(apply_I(state.u, params), 1.0) + np.sqrt(l2_norm_sq(state.n_plus))
            + np.sqrt(l2_norm_sq(state.n_minus)))


def run_local_time_heuristic(cfg: ExperimentConfig, out_dir=None, tolerance: float = 0.1,
                             levels: int = 16) -> StudyResult:
    """Largest one-step splitting interval that stays within ``tolerance`` of the reference.

    For each ``lambda`` the data are scaled by ``lambda``; ``delta`` runs down
    the ladder ``cap, cap/2, ...`` and the first interval whose single Strang
    step is within ``tolerance`` (relative, all components) of the adaptive
    reference is reported together with ``delta * norm^2``.  Exploratory:
    nothing is asserted.
    """
    base = initial_data(cfg)
    params = IMethodParams(min(cfg.N_list), cfg.s)
    rows = []
    for lam in sorted(cfg.local_lambdas):
        state = project_state(base.scaled(lam).wave_state())
        norm = local_time_norm(state, params)
        delta = cfg.local_cap
        if norm > 0:
            for k in range(levels):
                d = cfg.local_cap * 2.0**-k
                ref = reference_evolve(state, d, tol=1e-9)
                if _state_distance(step(state, d, cfg.mode), ref) <= tolerance:
                    delta = d
                    break
            else:
                delta = cfg.local_cap * 2.0 ** -levels
        rows.append((lam, delta, norm, delta * norm**2))
    result = StudyResult("local_time", ("lambda", "delta", "norm", "delta_norm_sq"), rows)
    deltas = [r[1] for r in rows]
    result.extra["monotone"] = all(a >= b for a, b in zip(deltas, deltas[1:]))
    positive = [r[3] for r in rows if r[3] > 0]
    result.extra["constancy_spread"] = (max(positive) / min(positive)) if positive else float("nan")
    _emit(result, out_dir, "local_time", "lambda", ["delta", "delta_norm_sq"], "local time heuristic")
    return result


def run_simulation(cfg: ExperimentConfig, out_dir=None):
    """Plain evolution of the configured preset with a ledger (and optional snapshots)."""
    state = initial_state(cfg)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    params = IMethodParams(min(cfg.N_list), cfg.s)
    return evolve(state, cfg.T, cfg.dt, max(1, cfg.ledger_every), params=params, sobolev_s=cfg.s,
                  mode=cfg.mode, ledger_path=(out / "ledger.csv") if out else None,
                  snapshot_path=(out / "snapshots.zkf") if (out and cfg.snapshot_every) else None,
                  snapshot_every=cfg.snapshot_every)


__all__ = [
    "Assertion", "SlopeFit", "StudyAssertionError", "StudyResult", "ThresholdViolation",
    "almost_conservation_delta_sweep", "fit_loglog", "growth_exponent_bound", "initial_data",
    "initial_state", "read_table", "run_almost_conservation_study", "run_fixed_time_difference_study",
    "run_growth_study", "run_local_time_heuristic", "run_simulation", "write_gnuplot", "write_table",
    "write_ledger",
]
