"""Acceptance suite: one test per criterion, at the stated tolerances.

The hierarchy study (levels 2/4/8 against reference 16, eta=2, eps=1, a=0,
T=1, dt=0.5h) runs once as a module fixture and backs the convergence, SPD
and energy-residual criteria.  Each test prints one [PASS] line on success;
pytest -v adds the per-criterion pass/fail verdict.
"""

import csv
import math
import time

import numpy as np
import pytest

from peterlinfem import assembly as asm
from peterlinfem import manufactured as mms
from peterlinfem import tensor_ops as tops
from peterlinfem.cli import (build_manifest, equilibrium_conformation,
                             paper_initial_velocity, run_experiment)
from peterlinfem.diagnostics import (energy_inequality_residual,
                                     relative_energy)
from peterlinfem.mesh import build_mesh, integrate, simplex_rule
from peterlinfem.solver import (ConformationStepper, SimulationState,
                                SolverConfig, Stepper, equilibrium_state, run)
from peterlinfem.tensor_ops import (SymTensor, check_log_identities, inverse,
                                    jacobi_residual, matrix_log,
                                    trace_norm_check)


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    """The desk-scale hierarchy study; backs three criteria."""
    out = tmp_path_factory.mktemp("study")
    man = build_manifest({"experiment": "paper3d", "out": str(out)})
    t0 = time.monotonic()
    assert run_experiment(man) == 0
    return {"out": out, "runtime": time.monotonic() - t0, "manifest": man}


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_criterion_equilibrium_preservation():
    """u0 = 0, C0 = I/sqrt(3), a in {0,1}, M=4, T=1: rest state kept."""
    t0 = time.monotonic()
    mesh = build_mesh(3, 4)
    eq = equilibrium_state(mesh)
    for a in (0.0, 1.0):
        worst = {"u": 0.0, "C": 0.0}

        def watch(prev, new):
            worst["u"] = max(worst["u"], float(np.abs(new.u).max()))
            worst["C"] = max(worst["C"], float(np.abs(new.C - eq.C).max()))

        run(SolverConfig(a=a, T_final=1.0), mesh, None,
            equilibrium_conformation(3), observer=watch)
        assert worst["u"] <= 1e-10, f"a={a}: |u|_inf = {worst['u']:.3e}"
        assert worst["C"] <= 1e-8, f"a={a}: |C - eq|_inf = {worst['C']:.3e}"
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0
    print(f"[PASS] equilibrium preservation (a=0,1; {elapsed:.1f}s)")


def test_criterion_convergence_study(study):
    """EOC(4,8 vs reference) at t=1 in [1.5, 2.5], non-decreasing late."""
    rows = read_csv(study["out"] / "eoc.csv")
    pair = [(float(r["t"]), float(r["EOC"])) for r in rows
            if r["M_coarse"] == "4" and r["M_fine"] == "8"]
    assert pair, "no (4,8) EOC rows"
    times = [t for t, _ in pair]
    values = [v for _, v in pair]
    final = values[-1]
    assert times[-1] == pytest.approx(1.0)
    assert 1.5 <= final <= 2.5, f"EOC(4,8) at t=1 is {final:.3f}"
    tail = [v for t, v in pair if t >= 0.75 - 1e-12]
    assert all(b - a >= -1e-9 for a, b in zip(tail, tail[1:])), \
        f"EOC not non-decreasing on the last quarter: {tail}"
    print(f"[PASS] convergence study: EOC(4,8)@t=1 = {final:.3f}, "
          f"tail {['%.3f' % v for v in tail]}, runtime {study['runtime']:.0f}s")


def test_criterion_spd_monitor(study):
    """min over time/vertices of the smallest eigenvalue of C >= -1e-8."""
    worst = math.inf
    for M in (2, 4, 8, 16):
        rows = read_csv(study["out"] / f"diagnostics_M{M}.csv")
        worst = min(worst, min(float(r["min_eig"]) for r in rows))
    assert worst >= -1e-8, f"SPD monitor min = {worst:.3e}"
    print(f"[PASS] SPD monitor over the full study: min eig = {worst:.4f}")


def test_criterion_free_energy_decay():
    """a = 1 run with the experiment velocity data, M = 8: decay within 1e-8."""
    mesh = build_mesh(3, 8)
    records, _ = run(SolverConfig(a=1.0, T_final=1.0), mesh,
                     paper_initial_velocity(3), equilibrium_conformation(3))
    fe = np.array([r.free_energy for r in records])
    assert np.isfinite(fe).all(), "free energy undefined (non-SPD C)"
    increases = np.diff(fe)
    assert increases.max() <= 1e-8, f"max increase {increases.max():.3e}"
    print(f"[PASS] free-energy decay (a=1, M=8): "
          f"{fe[0]:.4f} -> {fe[-1]:.4f}, max step increase "
          f"{increases.max():.2e}")


def test_criterion_energy_inequality_residual(study):
    """Residual <= 1e-6 (1+t) on the M=8 run; validated on the ODE reduction."""
    # validation: spatially constant reduction, factor-2 dt refinement
    mesh = build_mesh(3, 2)
    c_const = np.array([0.9, 0.5, 0.7, 0.1, -0.05, 0.02]) / np.sqrt(3.0)

    def c0(points):
        return np.tile(c_const, (points.shape[0], 1))

    finals = {}
    for dt in (0.05, 0.025):
        cfg = SolverConfig(a=0.0, T_final=1.0, dt=dt, fp_tol=1e-13)
        records, _ = run(cfg, mesh, None, c0)
        res = energy_inequality_residual(records, 3, dt)
        finals[dt] = abs(res[-1])
    shrink = finals[0.05] / finals[0.025]
    assert shrink >= 1.8, f"dt refinement shrinks residual only {shrink:.2f}x"

    rows = read_csv(study["out"] / "diagnostics_M8.csv")
    dt = 0.5 / 8

    class Row:
        def __init__(self, r):
            self.energy = float(r["kinetic"]) + float(r["elastic_trace"])
            self.dissipation = (float(r["visc_diss"])
                                + float(r["trace_grad_diss"])
                                + float(r["relax_diss"]))
            self.source = float(r["source"])

    records = [Row(r) for r in rows]
    res = energy_inequality_residual(records, 3, dt)
    ts = np.array([float(r["t"]) for r in rows])
    bound = 1e-6 * (1.0 + ts)
    assert (res <= bound).all(), f"residual max {res.max():.3e}"
    print(f"[PASS] energy-inequality residual: ODE shrink {shrink:.2f}x, "
          f"study residual in [{res.min():.2e}, {res.max():.2e}]")


def test_criterion_matrix_lemma_suite():
    """1000 SPD draws pass all matrix-lemma checks in under 10 seconds."""
    t0 = time.monotonic()
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        dim = int(rng.integers(2, 4))
        lam = rng.uniform(0.1, 10.0, dim)
        q = np.linalg.qr(rng.standard_normal((dim, dim)))[0]
        a = SymTensor.from_matrix(
            (lambda m: 0.5 * (m + m.T))(q @ np.diag(lam) @ q.T))
        r1, r2, r3 = check_log_identities(a)
        assert abs(r1) <= 1e-10 and r2 >= -1e-10 and r3 >= -1e-10
        assert np.abs(matrix_log(inverse(a)).components
                      + matrix_log(a).components).max() <= 1e-10
        for p in (2, 3, 4):
            lhs, mid, rhs = trace_norm_check(a, p)
            assert lhs <= mid * (1 + 1e-12) + 1e-12 <= rhs * (1 + 1e-12) + 1e-12

    for make in (
        lambda dt: [SymTensor(3, np.array([np.exp(k * dt)] * 3 + [0] * 3))
                    for k in range(21)],
        lambda dt: [SymTensor(3, np.array([1 + k * dt, 1, 1, 0, 0, 0]))
                    for k in range(21)],
    ):
        coarse = jacobi_residual(make(1e-3), 1e-3)
        fine = jacobi_residual(make(5e-4), 5e-4)
        assert coarse <= 1e-5 and 3.2 < coarse / fine < 4.8

    # gradient inequality for the inverse of an analytic SPD field
    mesh = build_mesh(3, 8)
    rule = simplex_rule(3, 4)

    def g(p):
        return 1.0 + 0.5 * np.sin(2 * np.pi * p[:, 0])

    def dg(p):
        return np.pi * np.cos(2 * np.pi * p[:, 0])

    left = integrate(mesh, rule, lambda p: 3.0 * dg(p) ** 2 / g(p) ** 2)
    right = integrate(mesh, rule, lambda p: (3.0 * dg(p) / g(p)) ** 2) / 3.0
    assert left >= right - 1e-6

    elapsed = time.monotonic() - t0
    assert elapsed < 10.0
    print(f"[PASS] matrix-lemma property suite ({elapsed:.1f}s)")


def test_criterion_relative_energy_contract():
    """100 random pairs: E(x,x)=0, lower bounds, total = sum of components."""
    mesh = build_mesh(2, 3)
    rng = np.random.default_rng(7)
    nv, ncomp = mesh.n_vertices, tops.n_components(2)
    for _ in range(100):
        a = SimulationState(0.0, rng.standard_normal((nv, 2)), np.zeros(nv),
                            rng.standard_normal((nv, ncomp)))
        b = SimulationState(0.0, rng.standard_normal((nv, 2)), np.zeros(nv),
                            rng.standard_normal((nv, ncomp)))
        same = relative_energy(a, a, mesh)
        assert same.total == 0.0
        rec = relative_energy(a, b, mesh)
        assert rec.total >= rec.e_kin >= 0
        assert rec.total >= rec.e_el >= 0
        assert rec.total >= rec.e_frob >= 0
        assert abs(rec.total - (rec.e_kin + rec.e_el + rec.e_frob)) <= 1e-13
    print("[PASS] relative-energy contract on 100 random pairs")


def test_criterion_manufactured_solution():
    """Conformation-only 2D study: L2 order >= 1.8 across M in {8,16,32}."""
    errors = []
    for M in (8, 16, 32):
        mesh = build_mesh(2, M)
        cfg = SolverConfig(a=0.0, T_final=0.5, cfl_like=0.5)
        quad = asm.ElementQuadrature(mesh, 4)
        dt = cfg.timestep(mesh.h)

        def forcing(t, _m=mesh, _q=quad, _dt=dt):
            return mms.forcing_load(_m, _q, t, cfg.epsilon, cfg.a, dt=_dt)

        _, final = run(cfg, mesh, None,
                       lambda p: mms.exact_conformation(p, 0.0),
                       stepper_cls=ConformationStepper, forcing=forcing)
        errors.append(mms.l2_error(mesh, quad, final.C, final.t))
    rates = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert all(r >= 1.8 for r in rates), f"orders {rates}"
    print(f"[PASS] manufactured solution: errors {errors}, orders "
          f"{['%.2f' % r for r in rates]}")


def test_criterion_oracle_equivalence():
    """Saddle solve vs dense LU (10 lin_tol); transported rhs vs mass (1e-13)."""
    mesh = build_mesh(3, 2)
    cfg = SolverConfig()
    stepper = Stepper(mesh, cfg)
    rng = np.random.default_rng(11)
    rhs = np.concatenate([
        rng.standard_normal(stepper.n_free + mesh.n_vertices), [0.0]])
    x_sparse = stepper._saddle_lu.solve(rhs)
    x_dense = np.linalg.solve(stepper.saddle.toarray(), rhs)
    err = np.abs(x_sparse - x_dense).max() / np.abs(x_dense).max()
    assert err <= 10 * cfg.lin_tol, f"saddle oracle mismatch {err:.3e}"

    mesh4 = build_mesh(3, 4)
    quad = asm.ElementQuadrature(mesh4, 2)
    feet = asm.characteristic_feet(mesh4, quad,
                                   np.zeros((mesh4.n_vertices, 3)), 0.0625)
    mass = asm.mass_matrix(mesh4)
    f = rng.standard_normal((mesh4.n_vertices, 6))
    rhs_t = asm.transported_rhs(mesh4, quad, feet, f)
    gap = np.abs(rhs_t - mass @ f).max()
    assert gap <= 1e-13, f"transported rhs vs mass action {gap:.3e}"
    print(f"[PASS] oracle equivalence: saddle {err:.2e}, transport {gap:.2e}")
