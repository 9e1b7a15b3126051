import json
import os

import numpy as np
import pytest

import csrg
from csrg import io as cio
from csrg.cli import main as cli_main
from conftest import make_desk_loop


@pytest.fixture()
def desk_model_file(tmp_path):
    """Desk example as a discrete-time JSON model for fast CLI runs."""
    plant = csrg.PlantModel(A=[[0.5]], B_u=[[1.0]], B_w=[[1.0]],
                            C=[[1.0]], D_u=[[0.0]], D_w=[[0.0]])
    ctrl = csrg.ControllerModel(K_p=[[0.0]], K_u=np.zeros((1, 0)), B_v=[[1.0]],
                                A_p=np.zeros((0, 1)), A_u=np.zeros((0, 0)),
                                D_v=np.zeros((0, 1)))
    bundle = csrg.ExampleBundle(
        name="desk", plant_c=plant, ctrl=ctrl, dt=1.0, W=np.array([[0.01]]),
        spec=csrg.ChanceSpec.individual([[1.0]], [1.0], 0.9),
        Q=np.eye(1), R=np.array([[100.0]]), delta=1e-6,
        v_box=np.array([[-1.0, 1.0]]),
        profile=csrg.ReferenceProfile([(0, [0.0]), (3, [0.3]), (30, [0.0])]),
        x0=(np.zeros(1), np.zeros(0)), continuous=False)
    path = tmp_path / "desk.json"
    cio.save_model(str(path), bundle)
    return str(path)


class TestRoundTrips:
    def test_set_file(self, desk_oinf, tmp_path):
        p = str(tmp_path / "set.txt")
        cio.write_set(p, desk_oinf, "h")
        back = cio.read_set(p)
        assert back.t_star == desk_oinf.t_star
        assert np.array_equal(back.set.A, desk_oinf.set.A)
        assert np.array_equal(back.set.b, desk_oinf.set.b)
        assert np.array_equal(back.set.stages, desk_oinf.set.stages)
        assert np.array_equal(back.tilde_omega.A, desk_oinf.tilde_omega.A)
        assert np.array_equal(back.tightening_table, desk_oinf.tightening_table)
        assert back.mode == desk_oinf.mode
        assert np.array_equal(back.v_box, desk_oinf.v_box)

    def test_trace_file(self, desk_loop, desk_spec, tmp_path):
        prof = csrg.ReferenceProfile([(0, [0.0]), (4, [0.2])])
        tr = csrg.run_closed_loop(desk_loop, None, desk_spec, prof,
                                  (np.zeros(1), np.zeros(0)), 25,
                                  csrg.RngStream(4), dt=0.5)
        p = str(tmp_path / "trace.csv")
        cio.write_trace(p, tr, "h")
        back = cio.read_trace(p)
        assert np.array_equal(back.x_p, tr.x_p)
        assert np.array_equal(back.x_u, tr.x_u)
        assert np.array_equal(back.v, tr.v)
        assert np.array_equal(back.u, tr.u)
        assert np.array_equal(back.y, tr.y)
        assert np.array_equal(back.viol, tr.viol)
        assert back.branch == tr.branch
        assert back.dt == tr.dt and back.seed == tr.seed

    def test_mcreport_file(self, desk_loop, desk_spec, desk_oinf, tmp_path):
        P = csrg.solve_discrete_lyapunov(desk_loop.Abar, np.eye(1))
        cfg = csrg.GovernorConfig(P, np.eye(1), np.array([[100.0]]), 1e-6,
                                  csrg.Algorithm.ALG1, desk_oinf)
        prof = csrg.ReferenceProfile([(0, [0.0]), (3, [0.2])])
        rep = csrg.monte_carlo(desk_loop, cfg, desk_spec, prof,
                               (np.zeros(1), np.zeros(0)), 20, 5,
                               base_seed=3, workers=1)
        rep.mu_alpha = (0.5, 0.25)
        p = str(tmp_path / "mc.txt")
        cio.write_mcreport(p, rep, "h")
        back = cio.read_mcreport(p)
        assert back.n_runs == rep.n_runs and back.T == rep.T
        assert np.array_equal(back.viol_counts, rep.viol_counts)
        assert np.array_equal(back.t_f, rep.t_f)
        assert np.array_equal(back.post_mean, rep.post_mean, equal_nan=True)
        assert back.mu_alpha == rep.mu_alpha

    def test_points_and_gamma(self, tmp_path):
        pts = np.array([[1.0 / 3.0, -2.0 / 7.0], [0.1, 0.2]])
        p = str(tmp_path / "pts.csv")
        cio.write_points(p, pts, ["a", "b"], "h")
        names, back = cio.read_points(p)
        assert names == ["a", "b"]
        assert np.array_equal(back, pts)
        gt = [(1, 2, -0.123456789012345, "ra")]
        g = str(tmp_path / "g.csv")
        cio.write_gamma_table(g, gt, 0.98, "h")
        assert cio.read_gamma_table(g) == gt

    def test_model_json(self, lat_bundle, tmp_path):
        p = str(tmp_path / "m.json")
        cio.save_model(p, lat_bundle)
        back = cio.load_model(p)
        assert np.array_equal(back.plant_c.A, lat_bundle.plant_c.A)
        assert np.array_equal(back.spec.G, lat_bundle.spec.G)
        assert back.spec.mode == lat_bundle.spec.mode
        assert back.delta == lat_bundle.delta
        m1 = back.closed_loop()
        m2 = lat_bundle.closed_loop()
        assert np.array_equal(m1.Abar, m2.Abar)

    def test_unknown_keys_rejected(self, tmp_path):
        bundle = csrg.gtm_lateral()
        d = cio.bundle_to_dict(bundle)
        d["extra_field"] = 1
        with pytest.raises(csrg.CsrgError, match="extra_field"):
            cio.bundle_from_dict(d)
        d.pop("extra_field")
        d["governor"]["unknown"] = 2
        with pytest.raises(csrg.CsrgError, match="unknown"):
            cio.bundle_from_dict(d)


class TestHeaders:
    def test_header_check(self, tmp_path, desk_oinf):
        p = str(tmp_path / "set.txt")
        cio.write_set(p, desk_oinf, "h")
        meta = cio.read_header(p, "set")
        assert meta["tool_version"] == csrg.__version__
        with pytest.raises(csrg.CsrgError):
            cio.read_header(p, "trace")

    def test_atomic_write(self, tmp_path):
        p = str(tmp_path / "f.txt")
        cio.atomic_write(p, "hello")
        assert open(p).read() == "hello"
        cio.atomic_write(p, "world")
        assert open(p).read() == "world"
        assert len(os.listdir(tmp_path)) == 1  # no temp leftovers


class TestCli:
    def test_build_set_ok(self, desk_model_file, tmp_path):
        out = str(tmp_path / "o")
        rc = cli_main(["build-set", "--model", desk_model_file, "--out", out,
                       "--tmax", "200"])
        assert rc == 0
        assert os.path.exists(os.path.join(out, "set.txt"))
        assert os.path.exists(os.path.join(out, "report.txt"))
        back = cio.read_set(os.path.join(out, "set.txt"))
        assert back.t_star >= 0

    def test_build_set_infeasible_box(self, desk_model_file, tmp_path):
        rc = cli_main(["build-set", "--model", desk_model_file,
                       "--out", str(tmp_path), "--vbox", "1,-1"])
        assert rc == 1

    def test_build_set_tmax_cap(self, tmp_path):
        rc = cli_main(["build-set", "--model", "gtm-lateral",
                       "--out", str(tmp_path), "--tmax", "1"])
        assert rc == 2

    def test_simulate_and_trace(self, desk_model_file, tmp_path):
        out = str(tmp_path / "sim")
        rc = cli_main(["simulate", "--model", desk_model_file, "--out", out,
                       "--governor", "alg1", "--steps", "40", "--seed", "7",
                       "--tmax", "200"])
        assert rc == 0
        tr = cio.read_trace(os.path.join(out, "trace.csv"))
        assert tr.T == 40
        assert set(tr.branch) <= {"optimized", "fallback", "jump"}

    def test_montecarlo(self, desk_model_file, tmp_path):
        out = str(tmp_path / "mc")
        rc = cli_main(["montecarlo", "--model", desk_model_file, "--out", out,
                       "--governor", "alg2", "--steps", "30", "--runs", "4",
                       "--seed", "1", "--tmax", "200"])
        assert rc == 0
        rep = cio.read_mcreport(os.path.join(out, "mcreport.txt"))
        assert rep.n_runs == 4 and rep.T == 30

    def test_project(self, tmp_path):
        out = str(tmp_path / "proj")
        rc = cli_main(["project", "--model", "gtm-lateral", "--out", out,
                       "--coords", "beta,phi", "--dirs", "12"])
        assert rc == 0
        names, pts = cio.read_points(os.path.join(out, "points_full.csv"))
        assert names == ["beta", "phi"]
        assert pts.shape[1] == 2 and pts.shape[0] >= 3
        rc = cli_main(["project", "--model", "gtm-lateral", "--out", out,
                       "--coords", "beta,phi", "--dirs", "12", "--fix-xu0"])
        assert rc == 0
        _, pts0 = cio.read_points(os.path.join(out, "points_xu0.csv"))
        assert pts0.shape[0] >= 3

    def test_compare_joint(self, tmp_path):
        out = str(tmp_path / "g")
        rc = cli_main(["compare-joint", "--beta", "0.98", "--ny", "1..3",
                       "--ng", "1..5", "--out", out])
        assert rc == 0
        table = cio.read_gamma_table(os.path.join(out, "gamma.csv"))
        assert len(table) == 15

    def test_export_model_roundtrip(self, tmp_path):
        out = str(tmp_path / "exp")
        rc = cli_main(["export-model", "--model", "gtm-longitudinal",
                       "--out", out])
        assert rc == 0
        b = cio.load_model(os.path.join(out, "gtm-longitudinal.json"))
        assert b.name == "gtm-longitudinal"

    def test_unknown_model(self, tmp_path):
        rc = cli_main(["build-set", "--model", "nope", "--out", str(tmp_path)])
        assert rc == 3
