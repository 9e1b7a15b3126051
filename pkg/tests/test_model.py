import numpy as np
import pytest

import csrg
from csrg import (ControllerModel, DimensionMismatch, NotSchur, PlantModel,
                  assemble, discretize_zoh, output_cov_sequence,
                  output_mean_sequence, steady_state)


def random_stable_loop(rng, n_xp=3, n_xu=2, n_v=1, n_w=1, n_y=2):
    while True:
        A = rng.normal(size=(n_xp, n_xp)) * 0.4
        B_u = rng.normal(size=(n_xp, 2))
        B_w = rng.normal(size=(n_xp, n_w))
        C = rng.normal(size=(n_y, n_xp))
        D_u = rng.normal(size=(n_y, 2)) * 0.1
        D_w = rng.normal(size=(n_y, n_w)) * 0.1
        K_p = rng.normal(size=(2, n_xp)) * 0.1
        K_u = rng.normal(size=(2, n_xu)) * 0.1
        B_v = rng.normal(size=(2, n_v)) * 0.5
        A_p = rng.normal(size=(n_xu, n_xp)) * 0.1
        A_u = rng.normal(size=(n_xu, n_xu)) * 0.3
        D_v = rng.normal(size=(n_xu, n_v))
        try:
            return assemble(PlantModel(A, B_u, B_w, C, D_u, D_w),
                            ControllerModel(K_p, K_u, B_v, A_p, A_u, D_v),
                            np.eye(n_w) * 0.01)
        except NotSchur:
            continue


class TestAssemble:
    def test_zero_gain_block_structure(self):
        A = np.diag([0.5, 0.3])
        plant = PlantModel(A, np.ones((2, 1)), np.ones((2, 1)),
                           np.eye(2), np.zeros((2, 1)), np.zeros((2, 1)))
        ctrl = ControllerModel(np.zeros((1, 2)), np.zeros((1, 1)), np.zeros((1, 1)),
                               np.zeros((1, 2)), np.array([[0.4]]), np.ones((1, 1)))
        m = assemble(plant, ctrl, np.eye(1))
        expect = np.zeros((3, 3))
        expect[:2, :2] = A
        expect[2, 2] = 0.4
        assert np.allclose(m.Abar, expect)

    def test_du_zero_structure(self):
        rng = np.random.default_rng(0)
        m = random_stable_loop(rng)
        if m.plant.D_u.any():
            plant = PlantModel(m.plant.A, m.plant.B_u, m.plant.B_w, m.plant.C,
                               np.zeros_like(m.plant.D_u), m.plant.D_w)
            m2 = assemble(plant, m.ctrl, m.W)
            assert np.allclose(m2.Cbar[:, :plant.n_xp], plant.C)
            assert np.allclose(m2.Cbar[:, plant.n_xp:], 0.0)
            assert np.allclose(m2.Dv_bar, 0.0)

    def test_longitudinal_schur(self, lon_loop):
        assert csrg.is_schur(lon_loop.Abar)

    def test_dimension_mismatch(self):
        plant = PlantModel(np.eye(2) * 0.5, np.ones((2, 1)), np.ones((2, 1)),
                           np.eye(2), np.zeros((2, 1)), np.zeros((2, 1)))
        ctrl = ControllerModel(np.zeros((1, 3)), np.zeros((1, 1)), np.zeros((1, 1)),
                               np.zeros((1, 3)), np.array([[0.4]]), np.ones((1, 1)))
        with pytest.raises(DimensionMismatch):
            assemble(plant, ctrl, np.eye(1))

    def test_not_schur_rejected(self):
        plant = PlantModel(np.eye(2) * 1.1, np.ones((2, 1)), np.ones((2, 1)),
                           np.eye(2), np.zeros((2, 1)), np.zeros((2, 1)))
        ctrl = ControllerModel(np.zeros((1, 2)), np.zeros((1, 1)), np.zeros((1, 1)),
                               np.zeros((1, 2)), np.array([[0.4]]), np.ones((1, 1)))
        with pytest.raises(NotSchur):
            assemble(plant, ctrl, np.eye(1))

    def test_not_psd_w(self):
        plant = PlantModel(np.eye(2) * 0.5, np.ones((2, 1)), np.ones((2, 1)),
                           np.eye(2), np.zeros((2, 1)), np.zeros((2, 1)))
        ctrl = ControllerModel(np.zeros((1, 2)), np.zeros((1, 1)), np.zeros((1, 1)),
                               np.zeros((1, 2)), np.array([[0.4]]), np.ones((1, 1)))
        with pytest.raises(csrg.NotPSD):
            assemble(plant, ctrl, np.array([[-1.0]]))


class TestSteadyState:
    def test_zero_reference(self, desk_loop):
        x, y = steady_state(desk_loop, [0.0])
        assert np.allclose(x, 0.0) and np.allclose(y, 0.0)

    def test_scalar_closed_form(self, desk_loop):
        # abar = 0.5, bbar = 1 -> x* = r / (1 - 0.5)
        x, y = steady_state(desk_loop, [2.0])
        assert abs(x[0] - 4.0) <= 1e-12

    def test_lateral_fixed_point(self, lat_loop):
        r = np.array([np.pi / 6])
        x, _ = steady_state(lat_loop, r)
        resid = np.max(np.abs(lat_loop.Abar @ x + lat_loop.Bv_bar @ r - x))
        assert resid <= 1e-9


class TestMeanSequence:
    def test_t0_empty_sum(self, lon_loop):
        x0 = np.ones(5) * 0.01
        v = np.array([0.05])
        seq = output_mean_sequence(lon_loop, x0, v, 0)
        expect = lon_loop.Cbar @ x0 + lon_loop.Dv_bar @ v
        assert np.allclose(seq[0], expect)

    def test_equilibrium_constant(self, lon_loop):
        v = np.array([0.05])
        xs, ys = steady_state(lon_loop, v)
        seq = output_mean_sequence(lon_loop, xs, v, 20)
        assert np.max(np.abs(seq - ys)) <= 1e-9

    def test_converges_to_steady_state(self, lon_loop):
        # horizon chosen so the slowest mode (|lambda| ~ 0.968) has contracted
        # below the tolerance against the steady-state magnitude
        v = np.array([0.1])
        xs, ys = steady_state(lon_loop, v)
        rate = np.max(np.abs(np.linalg.eigvals(lon_loop.Abar)))
        T = int(np.ceil(np.log(1e-7 / (np.max(np.abs(xs)) + 1.0)) / np.log(rate)))
        seq = output_mean_sequence(lon_loop, np.zeros(5), v, T)
        assert np.max(np.abs(seq[-1] - ys)) <= 1e-6

    def test_matches_explicit_formula(self):
        rng = np.random.default_rng(5)
        loop = random_stable_loop(rng)
        x0 = rng.normal(size=loop.n_x)
        v = rng.normal(size=loop.n_v)
        seq = output_mean_sequence(loop, x0, v, 50)
        Ak = np.eye(loop.n_x)
        acc = np.zeros((loop.n_x, loop.n_v))
        for t in range(51):
            expect = loop.Cbar @ (Ak @ x0) + (loop.Cbar @ acc + loop.Dv_bar) @ v
            assert np.max(np.abs(seq[t] - expect)) <= 1e-9
            acc = acc + Ak @ loop.Bv_bar
            Ak = Ak @ loop.Abar


class TestCovSequence:
    def test_zero_noise(self, desk_spec):
        from conftest import make_desk_loop
        m = make_desk_loop(0.0)
        seq, Sinf = output_cov_sequence(m, 10)
        assert np.allclose(seq, 0.0) and np.allclose(Sinf, 0.0)

    def test_t0_is_measurement_term(self, lon_loop):
        seq, _ = output_cov_sequence(lon_loop, 0)
        expect = lon_loop.Dw_bar @ lon_loop.W @ lon_loop.Dw_bar.T
        assert np.allclose(seq[0], expect)

    def test_lateral_converges(self, lat_loop):
        seq, Sinf = output_cov_sequence(lat_loop, 500)
        assert np.max(np.abs(seq[-1] - Sinf)) <= 1e-8

    def test_monotone_psd(self, lon_loop):
        seq, _ = output_cov_sequence(lon_loop, 60)
        for t in range(60):
            diff = seq[t + 1] - seq[t]
            assert np.min(np.linalg.eigvalsh(0.5 * (diff + diff.T))) >= -1e-10


class TestDiscretizeZoh:
    def test_integrator(self):
        A_d, (B_d,) = discretize_zoh(np.zeros((2, 2)), [np.eye(2)], 0.1)
        assert np.allclose(A_d, np.eye(2))
        assert np.allclose(B_d, 0.1 * np.eye(2))

    def test_scalar_closed_form(self):
        A_d, (B_d,) = discretize_zoh(np.array([[-1.0]]), [np.array([[1.0]])], 0.1)
        assert abs(A_d[0, 0] - np.exp(-0.1)) <= 1e-14
        assert abs(B_d[0, 0] - (1.0 - np.exp(-0.1))) <= 1e-14

    def test_longitudinal_vs_series(self, lon_bundle):
        from test_linalg import taylor_expm
        A = lon_bundle.plant_c.A
        Bs = [lon_bundle.plant_c.B_u, lon_bundle.plant_c.B_w]
        A_d, (Bu_d, Bw_d) = discretize_zoh(A, Bs, 0.1)
        M = np.zeros((8, 8))
        M[:4, :4] = A
        M[:4, 4:6] = Bs[0]
        M[:4, 6:8] = Bs[1]
        E = taylor_expm(0.1 * M)
        assert np.max(np.abs(A_d - E[:4, :4])) <= 1e-10
        assert np.max(np.abs(Bu_d - E[:4, 4:6])) <= 1e-10
        assert np.max(np.abs(Bw_d - E[:4, 6:8])) <= 1e-10
