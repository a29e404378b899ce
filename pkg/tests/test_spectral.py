import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zakharov.spectral import (
    Field2D,
    GridSpec,
    PHYSICAL,
    SPECTRAL,
    apply_multiplier,
    curl,
    dealias,
    divergence,
    exact_integral,
    gradient,
    hermitian_defect,
    l2_norm_sq,
    lam,
    lam_inv,
    laplacian,
    lp_norm,
    pad_coefficients,
    read_snapshot,
    reflect,
    sobolev_norm,
    to_physical,
    to_spectral,
    truncate_coefficients,
    write_snapshot,
)

from conftest import random_field


def plane_wave(grid, j, amp=1.0):
    X, Y = grid.mesh
    return Field2D.physical(grid, amp * np.exp(1j * grid.dk * (j[0] * X + j[1] * Y)))


class TestGridSpec:
    @pytest.mark.parametrize("M", [7, 6, 0, -8, 9.5])
    def test_rejects_bad_resolution(self, M):
        with pytest.raises(ValueError):
            GridSpec(M)

    @pytest.mark.parametrize("L", [0.0, -1.0, np.inf])
    def test_rejects_bad_length(self, L):
        with pytest.raises(ValueError):
            GridSpec(16, L)

    def test_default_box(self):
        g = GridSpec(64)
        assert g.L == pytest.approx(16 * np.pi)
        assert g.nyquist == pytest.approx(4.0)

    def test_lattice_layout(self):
        g = GridSpec(8, 2 * np.pi)
        assert list(g.index) == [0, 1, 2, 3, -4, -3, -2, -1]
        assert g.nyquist_mask.sum() == 49
        # keep |j| < 8/3
        assert g.dealias_mask[:, 0].tolist() == [True, True, True, False, False, False, True, True]

    def test_frozen(self):
        g = GridSpec(16)
        with pytest.raises(Exception):
            g.modes_per_axis = 32


class TestTransforms:
    def test_constant_has_only_zero_mode(self, grid16):
        f = to_spectral(Field2D.physical(grid16, np.full((16, 16), 2.5)))
        expect = np.zeros((16, 16))
        expect[0, 0] = 2.5
        np.testing.assert_allclose(f.data, expect, atol=1e-14)

    @pytest.mark.parametrize("j", [(1, 0), (3, -2), (-7, 5)])
    def test_plane_wave_single_coefficient(self, grid16, j):
        c = plane_wave(grid16, j).spectral_data()
        assert abs(c[j[0] % 16, j[1] % 16] - 1) < 1e-13
        c[j[0] % 16, j[1] % 16] = 0
        assert np.max(np.abs(c)) < 1e-13

    def test_round_trip(self, rng, grid32):
        f = random_field(rng, grid32, decay=1e9)
        back = to_physical(to_spectral(f))
        assert np.linalg.norm(back.data - f.data) <= 1e-12 * np.linalg.norm(f.data)

    def test_wrong_tag_rejected(self, grid16):
        f = Field2D.physical(grid16, np.zeros((16, 16)))
        with pytest.raises(ValueError):
            to_physical(f)
        with pytest.raises(ValueError):
            to_spectral(to_spectral(f))

    def test_bad_representation_and_shape(self, grid16):
        with pytest.raises(ValueError):
            Field2D(grid16, np.zeros((16, 16)), "fourier")
        with pytest.raises(ValueError):
            Field2D(grid16, np.zeros((8, 8)), PHYSICAL)

    def test_data_is_immutable(self, grid16):
        f = Field2D.physical(grid16, np.zeros((16, 16)))
        with pytest.raises(ValueError):
            f.data[0, 0] = 1

    def test_parseval_over_many_fields(self, rng, grid32):
        for _ in range(100):
            f = random_field(rng, grid32, decay=rng.uniform(1, 1e3))
            quad = lp_norm(f, 2) ** 2
            spec = l2_norm_sq(f)
            assert abs(quad - spec) <= 1e-12 * spec

    def test_real_fields_are_hermitian(self, rng, grid32):
        f = random_field(rng, grid32, real=True)
        assert hermitian_defect(f.spectral_data()) <= 1e-12

    def test_addition_keeps_realness_only_if_both_real(self, rng, grid16):
        a = random_field(rng, grid16, real=True)
        b = random_field(rng, grid16)
        assert (a + a).real_valued
        assert not (a + b).real_valued
        assert not (a - b).real_valued


class TestMultipliers:
    def test_identity_symbol(self, rng, grid16):
        f = to_spectral(random_field(rng, grid16))
        np.testing.assert_array_equal(apply_multiplier(f, lambda kx, ky: np.ones_like(kx)).data, f.data)

    def test_minus_laplacian_on_plane_wave(self, grid16):
        j = (2, -3)
        f = to_spectral(plane_wave(grid16, j))
        g = apply_multiplier(f, lambda kx, ky: kx**2 + ky**2)
        k2 = grid16.dk**2 * (j[0] ** 2 + j[1] ** 2)
        np.testing.assert_allclose(g.data, k2 * f.data, atol=1e-12)

    def test_sobolev_norm_matches_lattice_sum(self, rng, grid32):
        f = random_field(rng, grid32)
        s = 0.7
        c = f.spectral_data()
        direct = 0.0
        for a in range(32):
            for b in range(32):
                k2 = grid32.dk**2 * (grid32.index[a] ** 2 + grid32.index[b] ** 2)
                direct += (1 + k2) ** s * abs(c[a, b]) ** 2
        direct *= grid32.L**2
        weighted = apply_multiplier(to_spectral(f), lambda kx, ky: (1 + kx**2 + ky**2) ** (s / 2))
        assert l2_norm_sq(weighted) == pytest.approx(direct, rel=1e-12)
        assert sobolev_norm(f, s) ** 2 == pytest.approx(direct, rel=1e-12)

    def test_non_finite_symbol_rejected(self, grid16):
        f = to_spectral(plane_wave(grid16, (1, 1)))
        with pytest.raises(ValueError), np.errstate(divide="ignore"):
            apply_multiplier(f, lambda kx, ky: 1.0 / (kx**2 + ky**2))

    def test_requires_spectral(self, grid16):
        with pytest.raises(ValueError):
            apply_multiplier(plane_wave(grid16, (1, 0)), 1.0)


class TestLambda:
    def test_constant_goes_to_zero(self, grid16):
        f = Field2D.physical(grid16, np.full((16, 16), 3.0), real_valued=True)
        assert np.max(np.abs(lam(f).data)) == 0

    def test_inverse_projects_mean(self, rng, grid16):
        f = random_field(rng, grid16, real=True)
        back = lam_inv(lam(f)).physical_data()
        v = f.physical_data()
        np.testing.assert_allclose(back, v - v.mean(), atol=1e-12)

    def test_plane_wave_eigenfunction(self, grid16):
        j = (3, 4)
        f = to_spectral(plane_wave(grid16, j))
        np.testing.assert_allclose(lam(f).data, 5 * grid16.dk * f.data, atol=1e-12)

    def test_lambda_squared_is_minus_laplacian(self, rng, grid32):
        f = random_field(rng, grid32)
        np.testing.assert_allclose(lam(lam(f)).data, -laplacian(f).data, atol=1e-12)

    def test_laplacian_of_mode(self, grid16):
        j = (-2, 5)
        f = to_spectral(plane_wave(grid16, j))
        np.testing.assert_array_equal(laplacian(f).data, -grid16.k_squared * f.data)

    def test_gradient_divergence_curl(self, rng, grid16):
        f = random_field(rng, grid16, real=True)
        gx, gy = gradient(f)
        assert np.max(np.abs(curl(gx, gy).data)) < 1e-12
        np.testing.assert_allclose(divergence(gx, gy).data, laplacian(f).data, atol=1e-12)


class TestNorms:
    def test_plane_wave_mass(self, grid16):
        assert lp_norm(plane_wave(grid16, (1, 2)), 2) ** 2 == pytest.approx(grid16.L**2, rel=1e-13)

    def test_single_mode_sobolev(self, grid16):
        j, A, s = (2, 1), 1.5 - 0.5j, 0.6
        f = plane_wave(grid16, j, A)
        expect = abs(A) ** 2 * grid16.L**2 * (1 + grid16.dk**2 * 5) ** s
        assert sobolev_norm(f, s) ** 2 == pytest.approx(expect, rel=1e-12)

    def test_gaussian_matches_analytic(self):
        g = GridSpec(128, 40.0)
        X, Y = g.mesh
        w = 1.3
        f = Field2D.physical(g, np.exp(-((X - 20) ** 2 + (Y - 20) ** 2) / (2 * w * w)))
        # int exp(-r^2/w^2) = pi w^2
        assert lp_norm(f, 2) ** 2 == pytest.approx(np.pi * w * w, rel=1e-8)

    def test_inf_and_four(self, grid16):
        f = plane_wave(grid16, (1, 1), 2.0)
        assert lp_norm(f, np.inf) == pytest.approx(2.0)
        assert lp_norm(f, 4) == pytest.approx(2.0 * np.sqrt(grid16.L))

    @pytest.mark.parametrize("p", [0.5, -1, np.nan])
    def test_unsupported_p(self, grid16, p):
        with pytest.raises(ValueError):
            lp_norm(plane_wave(grid16, (0, 1)), p)


class TestPaddingAndIntegrals:
    @given(st.integers(0, 10**6))
    def test_pad_truncate_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        c = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        c *= GridSpec(8).nyquist_mask
        np.testing.assert_array_equal(truncate_coefficients(pad_coefficients(c, 3), 8), c)

    def test_exact_cubic_integral(self, rng, grid16):
        a, b, c = (random_field(rng, grid16, decay=1e9).spectral_data() * grid16.nyquist_mask for _ in range(3))
        direct = 0j
        M = 16
        idx = grid16.index
        for i1 in range(M):
            for j1 in range(M):
                for i2 in range(M):
                    for j2 in range(M):
                        k = (-(idx[i1] + idx[i2]), -(idx[j1] + idx[j2]))
                        if abs(k[0]) < M // 2 and abs(k[1]) < M // 2:
                            direct += a[i1, j1] * b[i2, j2] * c[k[0] % M, k[1] % M]
        assert exact_integral(grid16, a, b, c) == pytest.approx(grid16.L**2 * direct, rel=1e-12)

    def test_reflect_is_involution(self, rng):
        c = rng.standard_normal((8, 8))
        np.testing.assert_array_equal(reflect(reflect(c)), c)
        assert reflect(c)[1, 2] == c[-1, -2]

    def test_dealias_zeroes_upper_third(self, rng, grid16):
        c = dealias(np.ones((16, 16)), grid16)
        assert c[5, 0] == 1 and c[6, 0] == 0 and c[-5, -5] == 1 and c[-6, 0] == 0


class TestSnapshots:
    def test_round_trip_file(self, tmp_path, rng, grid16):
        u = to_spectral(random_field(rng, grid16))
        n = random_field(rng, grid16, real=True)
        path = tmp_path / "s.zkf"
        write_snapshot(path, [u, n], t=1.25)
        t, fields = read_snapshot(path)
        assert t == 1.25
        np.testing.assert_array_equal(fields[0].data, u.data)
        assert fields[0].representation == SPECTRAL and fields[1].representation == PHYSICAL
        np.testing.assert_array_equal(fields[1].data, n.data)

    def test_layout(self, grid16):
        u = Field2D.spectral(grid16, np.arange(256).reshape(16, 16) * (1 + 2j))
        buf = io.BytesIO()
        write_snapshot(buf, u, 0.5)
        raw = buf.getvalue()
        assert raw[:4] == b"ZKF1"
        assert int.from_bytes(raw[4:8], "little") == 16
        assert np.frombuffer(raw[8:16], "<f8")[0] == grid16.L
        assert np.frombuffer(raw[16:24], "<f8")[0] == 0.5
        assert raw[24] == 1
        body = np.frombuffer(raw[25:], "<f8")
        assert body[2] == 1.0 and body[3] == 2.0  # element (0, 1), re then im

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.zkf"
        p.write_bytes(b"NOPE" + bytes(40))
        with pytest.raises(ValueError, match="magic"):
            read_snapshot(p)

    def test_truncated(self, tmp_path, grid16):
        p = tmp_path / "t.zkf"
        write_snapshot(p, Field2D.physical(grid16, np.zeros((16, 16))))
        p.write_bytes(p.read_bytes()[:-5])
        with pytest.raises(ValueError, match="truncated"):
            read_snapshot(p)
