import csv
import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zakharov import cli
from zakharov.config import ConfigError, ExperimentConfig, parse_scalar, parse_text
from zakharov.energy import read_ledger
from zakharov.groundstate import ground_state_mass
from zakharov.presets import PRESETS, UnknownPreset, make_preset
from zakharov.spectral import GridSpec, write_snapshot
from zakharov.studies import (
    StudyAssertionError,
    ThresholdViolation,
    almost_conservation_delta_sweep,
    fit_loglog,
    growth_exponent_bound,
    initial_state,
    read_table,
    run_almost_conservation_study,
    run_fixed_time_difference_study,
    run_growth_study,
    run_local_time_heuristic,
    run_simulation,
)

SMALL = ExperimentConfig(M=16, L=2 * np.pi, N_list=(1.0, 2.0, 4.0), s=0.75, preset="gaussian_pair",
                         dt=1e-2, T=0.1, delta=0.05)


class TestParsing:
    @pytest.mark.parametrize("text,value", [
        ("3", 3), ("2.5", 2.5), ("1e-3", 1e-3), ("true", True), ("off", False),
        ("pi", np.pi), ("16*pi", 16 * np.pi), ("2pi/3", 2 * np.pi / 3), ("-pi", -np.pi), ("gaussian", "gaussian"),
    ])
    def test_scalars(self, text, value):
        assert parse_scalar(text) == value

    def test_text(self):
        flat = parse_text("# header\ngrid.M = 32  # inline\n\nimethod.N_list = 1, 2, 4\n")
        assert flat == {"grid.M": 32, "imethod.N_list": [1, 2, 4]}

    @pytest.mark.parametrize("bad", ["grid.M 32", "M = 32"])
    def test_malformed(self, bad):
        with pytest.raises(ConfigError):
            parse_text(bad)


class TestConfig:
    def test_from_text(self):
        cfg = ExperimentConfig.from_text(
            "grid.M = 32\ngrid.L = 2*pi\nimethod.N_list = 1, 2\ninit.preset = plane_wave\n"
            "init.kx = 2\nchecks.growth = false\n")
        assert cfg.M == 32 and cfg.L == pytest.approx(2 * np.pi)
        assert cfg.N_list == (1.0, 2.0)
        assert cfg.init_params == {"kx": 2}
        assert cfg.check("fixed_diff") and not cfg.check("growth")

    def test_master_switch(self):
        cfg = ExperimentConfig.from_text("checks.assert = false\n")
        assert not cfg.check("fixed_diff")

    def test_round_trip(self):
        cfg = ExperimentConfig(M=32, L=2 * np.pi, N_list=(3.0,), s=0.8, preset="random_smooth", seed=7,
                               init_params={"mass_fraction": 0.2, "drift": 3}, checks={"assert": True, "growth": False})
        assert ExperimentConfig.from_text(cfg.to_text()) == cfg

    @given(st.integers(4, 64).map(lambda k: 2 * k), st.floats(0.51, 0.99), st.integers(0, 2**31))
    def test_round_trip_property(self, M, s, seed):
        cfg = ExperimentConfig(M=M, s=s, seed=seed)
        assert ExperimentConfig.from_text(cfg.to_text()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_text("grid.Q = 3\n")

    @pytest.mark.parametrize("s", [0.5, 1.0, 0.2])
    def test_regularity_range(self, s):
        with pytest.raises(ConfigError):
            ExperimentConfig(s=s)

    @pytest.mark.parametrize("changes", [{"M": 7}, {"M": 4}, {"dt": 0}, {"N_list": ()}, {"ensemble": 0}])
    def test_invalid(self, changes):
        with pytest.raises(ConfigError):
            ExperimentConfig(**changes)

    def test_vacuous_N_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            cfg = ExperimentConfig(M=16, L=2 * np.pi, N_list=(4.0, 16.0))
        assert cfg.vacuous_N() == [16.0]
        assert "Nyquist" in caplog.text

    def test_integer_fields(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_text("grid.M = 32.5\n")


class TestPresets:
    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_mass_fraction(self, name):
        grid = GridSpec(64)
        data = make_preset(name, grid, seed=3, mass_fraction=0.3)
        assert data.mass_fraction == pytest.approx(0.3, rel=1e-10)
        assert data.n0.real_valued and data.n1.real_valued
        assert abs(data.n1.spectral_data()[0, 0]) < 1e-14

    def test_unknown(self):
        with pytest.raises(UnknownPreset):
            make_preset("soliton_gas", GridSpec(16))

    def test_random_is_seeded(self):
        g = GridSpec(32)
        a, b = (make_preset("random_smooth", g, seed=5) for _ in range(2))
        np.testing.assert_array_equal(a.u0.data, b.u0.data)
        c = make_preset("random_smooth", g, seed=6)
        assert not np.array_equal(a.u0.data, c.u0.data)

    def test_random_respects_band(self):
        g = GridSpec(32)
        c = make_preset("random_smooth", g).u0.spectral_data()
        assert np.max(np.abs(c[~g.dealias_mask])) < 1e-14

    def test_scaled(self):
        data = make_preset("gaussian", GridSpec(32), mass_fraction=0.2)
        assert data.scaled(2.0).mass_fraction == pytest.approx(0.8, rel=1e-12)


class TestFit:
    def test_exact_power(self):
        x = 2.0 ** np.arange(5)
        fit = fit_loglog(x, 3 * x**-1.5)
        assert fit.slope == pytest.approx(-1.5)
        assert fit.residual < 1e-12 and fit.admissible

    def test_admissibility(self):
        assert not fit_loglog([1, 2, 4], [1, 2, 3]).admissible
        assert not fit_loglog([1, 1.5, 2, 3], [1, 2, 3, 4]).admissible
        assert fit_loglog([1, 2, 4, 8], [1, 2, 3, 4]).admissible

    def test_zeros_dropped(self):
        assert fit_loglog([1, 2, 4], [0, 0, 0]).slope is None
        assert fit_loglog([1, 2, 4, 8], [0, 1, 2, 4]).points == 3


class TestFixedDifferenceStudy:
    def test_vanishing_differences(self):
        cfg = SMALL.with_updates(preset="constant", N_list=(1.0, 2.0, 4.0, 8.0))
        res = run_fixed_time_difference_study(cfg)
        assert np.all(res.column("abs_diff") == 0)
        assert res.fits["abs_diff"].slope is None
        assert any("undefined" in f for f in res.flags)
        assert res.passed

    def test_linear_in_density(self):
        st0 = initial_state(SMALL)
        doubled = type(st0)(st0.t, st0.u, 2 * st0.n_plus, 2 * st0.n_minus)
        a = run_fixed_time_difference_study(SMALL, state=st0).column("abs_diff")
        b = run_fixed_time_difference_study(SMALL, state=doubled).column("abs_diff")
        np.testing.assert_allclose(b, 2 * a, rtol=1e-10)

    def test_outputs_parse_back(self, tmp_path):
        res = run_fixed_time_difference_study(SMALL, out_dir=tmp_path)
        cols, rows = read_table(tmp_path / "fixed_time_difference.csv")
        assert cols == res.columns
        np.testing.assert_array_equal([r[1] for r in rows], res.column("abs_diff"))
        assert "set terminal pngcairo" in (tmp_path / "fixed_time_difference.gp").read_text()

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        cfg = SMALL.with_updates(preset="random_smooth", seed=11)
        run_fixed_time_difference_study(cfg, out_dir=a)
        run_fixed_time_difference_study(cfg, out_dir=b)
        name = "fixed_time_difference.csv"
        assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_snapshot_input(self, tmp_path):
        st0 = initial_state(SMALL)
        path = tmp_path / "in.zkf"
        write_snapshot(path, [st0.u, st0.n_plus, st0.n_minus], 0.0)
        from_snap = run_fixed_time_difference_study(SMALL.with_updates(init_params={"snapshot": str(path)}))
        direct = run_fixed_time_difference_study(SMALL, state=st0)
        np.testing.assert_array_equal(from_snap.column("abs_diff"), direct.column("abs_diff"))


class TestAlmostConservationStudy:
    def test_zero_data(self):
        cfg = SMALL.with_updates(preset="gaussian", init_params={"mass_fraction": 0.0})
        res = run_almost_conservation_study(cfg)
        assert np.all(res.column("dH_refined") == 0) and np.all(res.column("dH_modified") == 0)
        assert any("undefined" in f for f in res.flags)

    def test_delta_halving_reduces_increment(self):
        res = almost_conservation_delta_sweep(SMALL, 1.0, [0.025, 0.05, 0.1])
        inc = res.column("dH_refined")
        assert inc[0] < inc[1] < inc[2]

    def test_ensemble_average(self):
        cfg = SMALL.with_updates(preset="random_smooth", N_list=(1.0, 2.0))
        one = [run_almost_conservation_study(cfg.with_updates(seed=s)).column("dH_refined") for s in (0, 1)]
        both = run_almost_conservation_study(cfg.with_updates(ensemble=2)).column("dH_refined")
        np.testing.assert_allclose(both, 0.5 * (one[0] + one[1]), rtol=1e-12)


class TestGrowthStudy:
    def test_exponent_arithmetic(self):
        assert growth_exponent_bound(0.8) == pytest.approx(2.5)
        with pytest.raises(ConfigError):
            growth_exponent_bound(0.75)

    def test_refuses_low_regularity(self):
        with pytest.raises(ConfigError):
            run_growth_study(SMALL.with_updates(s=0.7))

    def test_refuses_above_threshold(self):
        cfg = SMALL.with_updates(s=0.8, preset="gaussian", init_params={"mass_fraction": 1.2})
        with pytest.raises(ThresholdViolation):
            run_growth_study(cfg)

    def test_free_schrodinger_is_flat(self, tmp_path):
        cfg = ExperimentConfig(M=32, L=4 * np.pi, s=0.8, preset="gaussian", mode="free_schrodinger",
                               T=8.0, dt=0.05, ledger_every=4)
        res = run_growth_study(cfg, out_dir=tmp_path)
        assert abs(res.fits["envelope"].slope) < 1e-8
        assert res.passed
        rows = read_ledger(tmp_path / "growth_ledger.csv")
        assert rows[-1].t == pytest.approx(8.0)

    def test_assertion_raised_when_enforced(self, monkeypatch):
        import zakharov.studies as studies

        monkeypatch.setattr(studies, "growth_exponent_bound", lambda s: -1.0)
        cfg = ExperimentConfig(M=16, L=4 * np.pi, s=0.8, preset="gaussian", T=8.0, dt=0.05, ledger_every=4)
        with pytest.raises(StudyAssertionError):
            run_growth_study(cfg)
        res = run_growth_study(cfg.with_updates(checks={"assert": False}))
        assert not res.passed


class TestLocalTime:
    def test_zero_data_hits_cap(self):
        cfg = SMALL.with_updates(preset="gaussian", init_params={"mass_fraction": 0.0}, local_cap=0.5)
        res = run_local_time_heuristic(cfg)
        assert np.all(res.column("delta") == 0.5)

    def test_sweep(self, tmp_path):
        cfg = ExperimentConfig(M=16, L=2 * np.pi, preset="gaussian", N_list=(1.0,),
                               init_params={"mass_fraction": 0.5})
        res = run_local_time_heuristic(cfg, out_dir=tmp_path)
        assert res.column("lambda").tolist() == [1.0, 2.0, 4.0, 8.0]
        assert res.extra["monotone"]
        assert np.all(res.column("delta") > 0)
        assert (tmp_path / "local_time.csv").exists()


class TestSimulation:
    def test_constant_preset(self, tmp_path):
        cfg = ExperimentConfig(M=16, L=2 * np.pi, preset="constant", T=0.1, dt=1e-2, ledger_every=2,
                               N_list=(1.0,), snapshot_every=5)
        run_simulation(cfg, tmp_path)
        rows = read_ledger(tmp_path / "ledger.csv")
        masses = [r.mass for r in rows]
        assert max(masses) - min(masses) <= 1e-12 * masses[0]
        assert (tmp_path / "snapshots.zkf").stat().st_size > 0


class TestCLI:
    def _config(self, tmp_path, **extra):
        lines = {"grid.M": 16, "grid.L": "2*pi", "time.T": 0.05, "time.dt": 0.01, "imethod.N_list": "1, 2",
                 "time.ledger_every": 1}
        lines.update(extra)
        path = tmp_path / "run.cfg"
        path.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))
        return path

    def test_simulate_constant(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = cli.main(["simulate", "--config", str(self._config(tmp_path)), "--preset", "constant",
                         "--out", str(out)])
        assert code == 0
        with open(out / "ledger.csv") as fh:
            masses = [float(r["mass"]) for r in csv.DictReader(fh)]
        assert max(masses) - min(masses) <= 1e-12 * masses[0]
        assert "mass" in capsys.readouterr().out

    def test_unknown_preset(self, tmp_path, capsys):
        assert cli.main(["simulate", "--preset", "nope", "--out", str(tmp_path)]) == 1
        assert "usage" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [["simulate", "--bogus"], ["launch"], []])
    def test_usage_errors(self, argv, capsys):
        assert cli.main(argv) == 1
        assert "usage" in capsys.readouterr().err

    def test_bad_config(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("grid.Q = 1\n")
        assert cli.main(["simulate", "--config", str(path)]) == 1

    def test_assertion_exit(self, tmp_path, monkeypatch):
        import zakharov.studies as studies

        monkeypatch.setattr(studies, "growth_exponent_bound", lambda s: -1.0)
        cfg = self._config(tmp_path, **{"imethod.s": 0.8, "time.T": 8.0, "time.dt": 0.05, "grid.L": "4*pi",
                                        "time.ledger_every": 4})
        assert cli.main(["study-growth", "--config", str(cfg), "--out", str(tmp_path / "g"), "--quiet"]) == 2

    def test_threshold_refusal_exit(self, tmp_path):
        cfg = self._config(tmp_path, **{"imethod.s": 0.8, "init.mass_fraction": 1.5})
        assert cli.main(["study-growth", "--config", str(cfg), "--out", str(tmp_path / "g")]) == 2

    def test_blowup_exit(self, tmp_path, monkeypatch):
        import zakharov.dynamics as dynamics

        monkeypatch.setattr(dynamics, "BLOWUP_SUP", 1e-3)
        assert cli.main(["simulate", "--config", str(self._config(tmp_path)), "--out", str(tmp_path)]) == 3

    def test_fixed_diff(self, tmp_path, capsys):
        cfg = self._config(tmp_path, **{"init.preset": "gaussian_pair"})
        assert cli.main(["study-fixed-diff", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert "fixed_time_difference" in capsys.readouterr().out
        assert (tmp_path / "fixed_time_difference.csv").exists()

    def test_ground_state(self, tmp_path, capsys):
        assert cli.main(["ground-state", "--out", str(tmp_path)]) == 0
        assert "Q(0)" in capsys.readouterr().out
        assert (tmp_path / "ground_state.csv").exists()

    def test_verify_subset(self, capsys):
        assert cli.main(["verify", "--only", "3"]) == 0
        assert "[PASS]" in capsys.readouterr().out

    def test_ground_mass_used_for_fraction(self):
        assert ground_state_mass() == pytest.approx(11.7009, rel=1e-4)
