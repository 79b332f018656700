"""Manufactured conformation solution: derivative oracle and consistency."""

import numpy as np
import pytest

from peterlinfem import manufactured as mms
from peterlinfem.assembly import ElementQuadrature
from peterlinfem.mesh import build_mesh
from peterlinfem.solver import ConformationStepper, SolverConfig, run


class TestDerivativeOracle:
    """Symbolic derivatives cross-checked by central finite differences."""

    def test_time_derivative(self):
        rng = np.random.default_rng(0)
        pts = rng.random((200, 2))
        t, eps = 0.3, 1e-6
        _, gt, _, _ = mms.profile(pts, t)
        fd = (mms.profile(pts, t + eps)[0] - mms.profile(pts, t - eps)[0]) / (2 * eps)
        assert np.abs(gt - fd).max() < 1e-9

    def test_space_derivatives(self):
        rng = np.random.default_rng(1)
        pts = 0.1 + 0.8 * rng.random((200, 2))
        t, eps = 0.45, 1e-6
        _, _, gx, gy = mms.profile(pts, t)
        for axis, deriv in ((0, gx), (1, gy)):
            plus = pts.copy()
            plus[:, axis] += eps
            minus = pts.copy()
            minus[:, axis] -= eps
            fd = (mms.profile(plus, t)[0] - mms.profile(minus, t)[0]) / (2 * eps)
            assert np.abs(deriv - fd).max() < 1e-9


class TestExactField:
    def test_isotropic_structure(self):
        pts = np.array([[0.5, 0.5], [0.1, 0.9]])
        c = mms.exact_conformation(pts, 0.0)
        assert c.shape == (2, 3)
        np.testing.assert_allclose(c[:, 0], c[:, 1])
        np.testing.assert_allclose(c[:, 2], 0.0)
        # at the center, g = 1 + 1/4
        assert c[0, 0] == pytest.approx(1.25 / np.sqrt(3.0), rel=1e-12)

    def test_l2_error_of_exact_nodal_field_is_interpolation_error(self):
        mesh = build_mesh(2, 8)
        quad = ElementQuadrature(mesh, 4)
        nodal = mms.exact_conformation(mesh.vertices, 0.2)
        err = mms.l2_error(mesh, quad, nodal, 0.2)
        assert 0 < err < 5e-3


class TestForcing:
    def test_difference_quotient_forcing_removes_time_error(self):
        # the error at fixed M is purely spatial: halving dt barely moves it
        mesh = build_mesh(2, 16)
        quad = ElementQuadrature(mesh, 4)
        errs = {}
        for dt in (0.05, 0.025):
            cfg = SolverConfig(a=0.0, T_final=0.2, dt=dt, fp_tol=1e-12)

            def forcing(t, _dt=dt):
                return mms.forcing_load(mesh, quad, t, cfg.epsilon, cfg.a,
                                        dt=_dt)

            def c0(points):
                return mms.exact_conformation(points, 0.0)

            _, final = run(cfg, mesh, None, c0,
                           stepper_cls=ConformationStepper, forcing=forcing)
            errs[dt] = mms.l2_error(mesh, quad, final.C, final.t)
        assert errs[0.05] == pytest.approx(errs[0.025], rel=0.05)

        # the analytic-derivative forcing leaves a visible O(dt) component
        cfg = SolverConfig(a=0.0, T_final=0.2, dt=0.05, fp_tol=1e-12)

        def forcing_cont(t):
            return mms.forcing_load(mesh, quad, t, cfg.epsilon, cfg.a)

        _, final = run(cfg, mesh, None,
                       lambda p: mms.exact_conformation(p, 0.0),
                       stepper_cls=ConformationStepper, forcing=forcing_cont)
        err_cont = mms.l2_error(mesh, quad, final.C, final.t)
        assert abs(err_cont - errs[0.05]) / errs[0.05] > 0.02

    def test_convergence_order_at_reduced_scale(self):
        errs = []
        for M in (8, 16):
            mesh = build_mesh(2, M)
            cfg = SolverConfig(a=0.0, T_final=0.25, dt=None, cfl_like=0.5)
            quad = ElementQuadrature(mesh, 4)
            dt = cfg.timestep(mesh.h)

            def forcing(t, _q=quad, _m=mesh, _dt=dt):
                return mms.forcing_load(_m, _q, t, cfg.epsilon, cfg.a, dt=_dt)

            def c0(points):
                return mms.exact_conformation(points, 0.0)

            _, final = run(cfg, mesh, None, c0,
                           stepper_cls=ConformationStepper, forcing=forcing)
            errs.append(mms.l2_error(mesh, quad, final.C, final.t))
        assert np.log2(errs[0] / errs[1]) > 1.7
