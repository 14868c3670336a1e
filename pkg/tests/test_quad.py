import math

import numpy as np
import pytest

from lpkdv.errors import DomainError, SingularCornerError
from lpkdv.fieldio import (
    load_field_binary,
    load_field_csv,
    save_field_binary,
    save_field_csv,
)
from lpkdv.quad import (
    CarrierWave,
    LatticeField,
    LpkdvParams,
    corner_solve,
    dispersion,
    evolve_ivp,
    linear_residual_max,
    max_residual,
    plane_wave_field,
    quad_residual,
    residual_field,
)

P15 = LpkdvParams(1.5, 0.5)  # mu = 1, zeta = 2


class TestParams:
    def test_derived(self):
        assert P15.mu == 1.0 and P15.zeta == 2.0

    def test_rejects_p_equal_q(self):
        with pytest.raises(DomainError):
            LpkdvParams(1.0, 1.0)

    def test_rejects_p_equal_minus_q(self):
        with pytest.raises(DomainError):
            LpkdvParams(1.0, -1.0)


class TestQuadResidual:
    def test_constant_field(self):
        f = LatticeField(np.full((4, 4), 2.7))
        assert quad_residual(f, P15, 1, 2) == 0.0

    def test_exact_corner(self):
        # mu*4 + zeta*2 - 2*4 = 4 + 4 - 8 = 0
        f = LatticeField(np.array([[0.0, 1.0], [3.0, 4.0]]))
        assert quad_residual(f, P15, 0, 0) == 0.0

    def test_nonzero_residual(self):
        # u11 = 0: mu*0 + zeta*2 - 2*0 = 4
        f = LatticeField(np.array([[0.0, 1.0], [3.0, 0.0]]))
        assert quad_residual(f, P15, 0, 0) == 4.0

    def test_out_of_window(self):
        f = LatticeField(np.zeros((3, 3)))
        with pytest.raises(IndexError):
            quad_residual(f, P15, 2, 0)
        with pytest.raises(IndexError):
            quad_residual(f, P15, -1, 0)


class TestCornerSolve:
    def test_example(self):
        assert np.isclose(corner_solve(P15, 0.0, 3.0, 1.0), 4.0)

    def test_zero_forcing(self):
        assert corner_solve(P15, 5.0, 2.0, 2.0) == 5.0

    def test_translation_covariance(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            u00, u10, u01 = rng.standard_normal(3) * 0.3
            c = complex(*rng.standard_normal(2))
            base = corner_solve(P15, u00, u10, u01)
            shifted = corner_solve(P15, u00 + c, u10 + c, u01 + c)
            assert abs(shifted - (base + c)) < 1e-12

    def test_translated_example(self):
        assert np.isclose(corner_solve(P15, 5.0, 3.0 + 5.0, 1.0 + 5.0), 9.0)

    def test_singular_corner(self):
        with pytest.raises(SingularCornerError):
            corner_solve(P15, 0.0, P15.mu, 0.0)

    def test_d4_round_trip(self):
        # solve for u00 given the rest, then re-solve for u11
        u00, u10, u01 = 0.2, 0.7, -0.4
        u11 = corner_solve(P15, u00, u10, u01)
        w = u10 - u01
        u00_back = u11 - P15.zeta * w / (w - P15.mu)
        assert abs(corner_solve(P15, u00_back, u10, u01) - u11) < 1e-12 * (1 + abs(u11))


class TestEvolveIvp:
    def test_zero_boundary(self):
        f = evolve_ivp(np.zeros(8), np.zeros(6), P15)
        assert np.all(f.values == 0.0)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        row = 0.05 * rng.standard_normal(20)
        col = 0.05 * rng.standard_normal(20)
        col[0] = row[0]
        f1 = evolve_ivp(row, col, P15)
        f2 = evolve_ivp(row.copy(), col.copy(), P15)
        assert np.array_equal(f1.values, f2.values)

    def test_round_trip_from_own_boundary(self, bump_solution):
        field, params = bump_solution
        again = evolve_ivp(field.values[:, 0], field.values[0, :], params)
        assert np.array_equal(field.values, again.values)

    def test_solution_residual_bound(self, bump_solution):
        field, params = bump_solution
        bound = 1e-10 * (1.0 + float(np.max(np.abs(field.values))))
        assert max_residual(field, params) <= bound

    def test_corner_mismatch_rejected(self):
        with pytest.raises(DomainError, match="corner"):
            evolve_ivp(np.array([1.0, 0.0]), np.array([0.0, 0.0]), P15)

    def test_small_plane_wave_residual_quadratic(self):
        # the sampled linear wave solves the equation up to its quadratic term
        a = 1e-8
        kappa = 1.1
        f = plane_wave_field(kappa, dispersion(P15, kappa), 12, 12, amplitude=a)
        r = residual_field(f, P15)
        assert np.max(np.abs(r)) <= 10 * a ** 2


class TestDispersion:
    def test_small_kappa(self):
        assert abs(dispersion(P15, 1e-8)) < 1e-6

    def test_reference_value(self):
        # (zeta+mu)/(zeta-mu) = p/q = 2 at p=2, q=1
        got = dispersion(LpkdvParams(2.0, 1.0), math.pi / 2)
        assert np.isclose(got, -2.0 * math.atan(2.0), atol=1e-14)

    def test_kappa_near_pi_rejected(self):
        with pytest.raises(DomainError):
            dispersion(P15, math.pi - 1e-12)
        with pytest.raises(DomainError):
            dispersion(P15, 3.5)

    def test_linear_part_vanishes(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            p = rng.uniform(0.5, 3.0)
            q = rng.uniform(0.05, p - 0.2)
            kappa = rng.uniform(0.1, math.pi - 0.2)
            assert linear_residual_max(LpkdvParams(p, q), kappa) <= 1e-12

    def test_carrier_wave_pins_omega(self):
        cw = CarrierWave.for_params(P15, 1.0)
        assert cw.omega == dispersion(P15, 1.0)


class TestLatticeField:
    def test_real_kind_has_no_imaginary_part(self):
        f = LatticeField(np.ones((3, 3)))
        assert f.kind == "real"
        assert not np.iscomplexobj(f.values)

    def test_complex_kind(self):
        f = LatticeField(np.ones((3, 3), dtype=complex) * (1 + 2j))
        assert f.kind == "complex"

    def test_requires_2d(self):
        with pytest.raises(DomainError):
            LatticeField(np.ones(5))


class TestFieldIO:
    @pytest.fixture
    def complex_field(self):
        rng = np.random.default_rng(2)
        return LatticeField(rng.standard_normal((6, 5))
                            + 1j * rng.standard_normal((6, 5)))

    def test_csv_round_trip(self, tmp_path, complex_field):
        path = tmp_path / "f.csv"
        save_field_csv(complex_field, path)
        assert load_field_csv(path) == complex_field

    def test_csv_round_trip_real(self, tmp_path):
        f = LatticeField(np.random.default_rng(0).standard_normal((4, 7)))
        path = tmp_path / "f.csv"
        save_field_csv(f, path)
        back = load_field_csv(path)
        assert back.kind == "real" and back == f

    def test_binary_round_trip(self, tmp_path, complex_field):
        path = tmp_path / "f.bin"
        save_field_binary(complex_field, path)
        assert load_field_binary(path) == complex_field

    def test_binary_round_trip_real(self, tmp_path, bump_solution):
        field, _ = bump_solution
        path = tmp_path / "sol.bin"
        save_field_binary(field, path)
        back = load_field_binary(path)
        assert back.kind == "real" and back == field

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(DomainError):
            load_field_csv(path)
