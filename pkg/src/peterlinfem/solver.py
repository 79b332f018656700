"""Semi-implicit Lagrange-Galerkin time stepper for the coupled system.

Each step advances (u, p, C) by dt with a Gauss-Seidel fixed-point loop:

  1. backtrack characteristic feet from the current velocity iterate,
  2. solve the stabilized Stokes-like system for (u, p) with the transported
     momentum and the (lagged) elastic stress load tr(C)C : grad v,
  3. solve the conformation system with the transported tensor, the lagged
     relaxation coefficients Phi/chi, and the stretching source built from
     the fresh velocity,

until the combined discrete-L2 increment of (u, C) drops below `fp_tol`.
Mass, viscosity, divergence coupling and the pressure-gradient stabilization
are constant in time, so the saddle-point matrix is factorized once per run;
the conformation operator changes with chi and is refactorized per sweep.

Linear systems are solved by sparse LU with an explicit relative-residual
check against `lin_tol`; the solve contract is the residual, not the method.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly as asm
from . import tensor_ops as tops
from .exceptions import (FixedPointDivergedError, LinearSolveFailedError,
                         NonSPDError)


@dataclass
class SolverConfig:
    """Physical and numerical parameters of a run."""

    eta: float = 2.0            # solvent viscosity
    epsilon: float = 1.0        # conformation diffusivity
    a: float = 0.0              # relaxation offset
    dt: float | None = None     # explicit step; None -> cfl_like * h
    T_final: float = 1.0
    cfl_like: float = 0.5
    fp_tol: float = 1e-8
    fp_max_iters: int = 50
    lin_tol: float = 1e-10
    lin_max_iters: int = 1000
    delta_bp: float = 0.05      # Brezzi-Pitkaranta constant
    quad_assembly: int = 2
    quad_diagnostics: int = 4
    spd_floor: float = 1e-12

    def __post_init__(self):
        if self.eta <= 0 or self.epsilon <= 0:
            raise ValueError("eta and epsilon must be > 0")
        if self.a < 0:
            raise ValueError("a must be >= 0")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.T_final < 0:
            raise ValueError("T_final must be >= 0")
        if self.cfl_like <= 0 or self.fp_tol <= 0 or self.lin_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.delta_bp <= 0:
            raise ValueError("delta_bp must be > 0")

    def timestep(self, h):
        """Raw step size for a mesh of size h (before end-time rounding)."""
        return self.dt if self.dt is not None else self.cfl_like * h


@dataclass
class SimulationState:
    """Nodal solution at one time: velocity, pressure, packed conformation."""

    t: float
    u: np.ndarray   # (nv, d)
    p: np.ndarray   # (nv,)
    C: np.ndarray   # (nv, d(d+1)/2)

    def copy(self):
        return SimulationState(self.t, self.u.copy(), self.p.copy(),
                               self.C.copy())


@dataclass
class StepReport:
    """Fixed-point convergence data for one time step."""

    iterations: int
    increment: float
    increments: list = field(default_factory=list)
    linear_residuals: list = field(default_factory=list)


def initial_state(mesh, u0=None, c0=None, a=0.0) -> SimulationState:
    """Nodal interpolation of the initial data with Dirichlet rows zeroed.

    `u0` maps points (n, d) to velocities (n, d); `c0` maps points to packed
    components (n, ncomp) or full matrices (n, d, d).  For a > 0 the initial
    conformation must be SPD at every vertex.
    """
    nv, d = mesh.n_vertices, mesh.dim
    ncomp = tops.n_components(d)
    u = np.zeros((nv, d)) if u0 is None else np.asarray(u0(mesh.vertices), dtype=float)
    u = u.reshape(nv, d).copy()
    u[mesh.boundary_vertices] = 0.0
    if c0 is None:
        C = np.zeros((nv, ncomp))
    else:
        C = np.asarray(c0(mesh.vertices), dtype=float)
        if C.shape == (nv, d, d):
            C = tops.full_to_sym(C, d)
        C = C.reshape(nv, ncomp).copy()
    if a > 0:
        lam_min = tops.field_min_eigenvalues(C, d)
        if lam_min.min() <= 0:
            raise NonSPDError(lam_min.min(), vertex=int(np.argmin(lam_min)))
    return SimulationState(0.0, u, np.zeros(nv), C)


def equilibrium_state(mesh) -> SimulationState:
    """The rest state u = 0, C = I/sqrt(d), an exact fixed point of the scheme."""
    ncomp = tops.n_components(mesh.dim)
    C = np.zeros((mesh.n_vertices, ncomp))
    C[:, : mesh.dim] = 1.0 / np.sqrt(mesh.dim)
    return SimulationState(0.0, np.zeros((mesh.n_vertices, mesh.dim)),
                           np.zeros(mesh.n_vertices), C)


def _relative_residual(mat, x, rhs):
    scale = np.linalg.norm(rhs)
    if scale == 0.0:
        return np.linalg.norm(mat @ x)
    return np.linalg.norm(mat @ x - rhs) / scale


def solve_linear(matrix, rhs, tol=1e-10):
    """Direct sparse solve with a relative-residual guarantee."""
    mat = sp.csc_matrix(matrix)
    rhs = np.asarray(rhs, dtype=float)
    x = spla.splu(mat).solve(rhs)
    res = _relative_residual(mat, x, rhs)
    if not np.isfinite(res) or res > tol:
        raise LinearSolveFailedError(res, tol)
    return x


class Stepper:
    """One-step advance operator; owns the assembled and factorized systems."""

    def __init__(self, mesh, config: SolverConfig, dt=None):
        self.mesh = mesh
        self.config = config
        self.dt = config.timestep(mesh.h) if dt is None else dt
        d = mesh.dim
        self.quad = asm.ElementQuadrature(mesh, config.quad_assembly)
        self.mass = asm.mass_matrix(mesh)
        self.lumped = np.asarray(self.mass.sum(axis=1)).ravel()

        # velocity-pressure saddle system, constant along the run
        self.free = asm.interior_velocity_dofs(mesh)
        a_uu = (asm.vector_mass_matrix(mesh) / self.dt
                + asm.symmetric_gradient_stiffness(mesh, config.eta))
        a_uu = a_uu[self.free][:, self.free]
        b_div = asm.divergence_matrix(mesh)[:, self.free]
        stab = asm.pressure_stabilization(mesh, config.delta_bp)
        mean = sp.csr_matrix(self.lumped[:, None])
        self.saddle = sp.bmat(
            [[a_uu, -b_div.T, None],
             [-b_div, -stab, mean],
             [None, mean.T, None]], format="csr")
        self._saddle_lu = spla.splu(self.saddle.tocsc())
        self.n_free = len(self.free)

        # conformation operator without the chi reaction
        self.conf_base = self.mass / self.dt \
            + asm.stiffness_matrix(mesh, config.epsilon)

    # -- norms ------------------------------------------------------------

    def _l2_vector(self, vals):
        return float(np.sqrt(max(0.0, np.sum(vals * (self.mass @ vals)))))

    def _l2_tensor(self, comps):
        w = tops.component_weights(self.mesh.dim)
        return float(np.sqrt(max(0.0, np.sum(w * (comps * (self.mass @ comps)).sum(axis=0)))))

    # -- solves -----------------------------------------------------------

    def _solve_saddle(self, rhs, report):
        x = self._saddle_lu.solve(rhs)
        res = _relative_residual(self.saddle, x, rhs)
        if not np.isfinite(res) or res > self.config.lin_tol:
            raise LinearSolveFailedError(res, self.config.lin_tol)
        report.linear_residuals.append(("saddle", res))
        return x

    def _solve_conformation(self, mat, rhs, report):
        x = spla.splu(mat.tocsc()).solve(rhs)
        res = max(_relative_residual(mat, x[:, c], rhs[:, c])
                  for c in range(rhs.shape[1]))
        if not np.isfinite(res) or res > self.config.lin_tol:
            raise LinearSolveFailedError(res, self.config.lin_tol)
        report.linear_residuals.append(("conformation", res))
        return x

    # -- stepping ---------------------------------------------------------

    def step(self, state: SimulationState):
        """Advance by dt; returns the new state and the fixed-point report."""
        mesh, cfg, dt = self.mesh, self.config, self.dt
        nv, d = mesh.n_vertices, mesh.dim
        report = StepReport(0, np.inf)
        u_k = state.u
        c_k = state.C
        p_k = state.p
        converged = False
        for sweep in range(cfg.fp_max_iters):
            feet = asm.characteristic_feet(mesh, self.quad, u_k, dt)

            # velocity-pressure sweep
            rhs_u = asm.transported_rhs(mesh, self.quad, feet, state.u) / dt
            load = asm.elastic_stress_load(mesh, self.quad, c_k)
            rhs = np.concatenate([
                rhs_u.ravel()[self.free] - load[self.free],
                np.zeros(nv), [0.0],
            ])
            sol = self._solve_saddle(rhs, report)
            u_next = np.zeros((nv, d))
            u_next.ravel()[self.free] = sol[:self.n_free]
            p_next = sol[self.n_free:self.n_free + nv]

            # conformation sweep
            tr_q = tops.field_traces(self.quad.at_quad(c_k), d)
            mat = self.conf_base + asm.reaction_matrix(
                mesh, self.quad, asm.chi_coefficient(tr_q, cfg.a))
            grad_u = asm.velocity_gradients(mesh, u_next)
            src = asm.upper_convected_at_quad(self.quad.at_quad(c_k), grad_u, d)
            src[..., :d] += asm.phi_coefficient(tr_q, cfg.a)[..., None]
            rhs_c = asm.transported_rhs(mesh, self.quad, feet, state.C) / dt \
                + asm.scalar_load(mesh, self.quad, src)
            c_next = self._solve_conformation(mat, rhs_c, report)

            incr = self._l2_vector(u_next - u_k) + self._l2_tensor(c_next - c_k)
            report.increments.append(incr)
            u_k, p_k, c_k = u_next, p_next, c_next
            if incr <= cfg.fp_tol:
                converged = True
                break
        report.iterations = len(report.increments)
        report.increment = report.increments[-1]
        if not converged:
            raise FixedPointDivergedError(report.iterations, report.increment,
                                          t=state.t + dt)
        return SimulationState(state.t + dt, u_k, p_k, c_k), report


def step(state, config, mesh):
    """Single-step convenience wrapper (builds a fresh Stepper)."""
    return Stepper(mesh, config).step(state)


class ConformationStepper:
    """Conformation equation alone (u = 0) with an optional forcing load.

    Used by the manufactured-solution study; `forcing(t)` must return the
    assembled load vector (nv, ncomp) of the extra source at time t.
    """

    def __init__(self, mesh, config: SolverConfig, forcing=None, dt=None):
        self.mesh = mesh
        self.config = config
        self.dt = config.timestep(mesh.h) if dt is None else dt
        self.quad = asm.ElementQuadrature(mesh, config.quad_assembly)
        self.mass = asm.mass_matrix(mesh)
        self.base = self.mass / self.dt \
            + asm.stiffness_matrix(mesh, config.epsilon)
        self.forcing = forcing

    def step(self, state: SimulationState):
        mesh, cfg, dt = self.mesh, self.config, self.dt
        d = mesh.dim
        t_next = state.t + dt
        rhs_base = (self.mass @ state.C) / dt
        if self.forcing is not None:
            rhs_base = rhs_base + self.forcing(t_next)
        report = StepReport(0, np.inf)
        c_k = state.C
        converged = False
        for sweep in range(cfg.fp_max_iters):
            tr_q = tops.field_traces(self.quad.at_quad(c_k), d)
            mat = self.base + asm.reaction_matrix(
                mesh, self.quad, asm.chi_coefficient(tr_q, cfg.a))
            phi_q = asm.phi_coefficient(tr_q, cfg.a)
            src = np.zeros(tr_q.shape + (tops.n_components(d),))
            src[..., :d] = phi_q[..., None]
            rhs = rhs_base + asm.scalar_load(mesh, self.quad, src)
            c_next = spla.splu(mat.tocsc()).solve(rhs)
            res = max(_relative_residual(mat, c_next[:, c], rhs[:, c])
                      for c in range(rhs.shape[1]))
            if res > cfg.lin_tol:
                raise LinearSolveFailedError(res, cfg.lin_tol)
            w = tops.component_weights(d)
            diff = c_next - c_k
            incr = float(np.sqrt(np.sum(w * (diff * (self.mass @ diff)).sum(axis=0))))
            report.increments.append(incr)
            c_k = c_next
            if incr <= cfg.fp_tol:
                converged = True
                break
        report.iterations = len(report.increments)
        report.increment = report.increments[-1]
        if not converged:
            raise FixedPointDivergedError(report.iterations, report.increment,
                                          t=t_next)
        return SimulationState(t_next, state.u, state.p, c_k), report


def n_steps_for(config: SolverConfig, h):
    """Number of steps and effective dt covering [0, T_final]."""
    if config.T_final <= 0:
        return 0, config.timestep(h)
    raw = config.timestep(h)
    n = max(1, round(config.T_final / raw))
    return n, config.T_final / n


def run(config: SolverConfig, mesh, u0=None, c0=None, observer=None,
        diagnostics_fn=None, stepper_cls=Stepper, forcing=None,
        final_dump=None):
    """Advance the initial data to T_final, collecting one record per step.

    `diagnostics_fn(state, fp_iters)` builds the per-step record (defaults to
    the standard DiagnosticsRecord); `observer(prev, new)` is called after
    every accepted step, e.g. to sample the trajectory at output times.
    `final_dump` names a text file for the final (u | p | C) state.
    """
    from .diagnostics import StateDiagnostics

    state = initial_state(mesh, u0, c0, a=config.a)
    n, dt = n_steps_for(config, mesh.h)
    if diagnostics_fn is None:
        diag = StateDiagnostics(mesh, config)
        diagnostics_fn = diag.record
    if stepper_cls is ConformationStepper:
        stepper = stepper_cls(mesh, config, forcing=forcing, dt=dt)
    else:
        stepper = stepper_cls(mesh, config, dt=dt)
    records = [diagnostics_fn(state, 0)]
    if observer is not None:
        observer(None, state)
    for _ in range(n):
        prev = state
        state, report = stepper.step(state)
        records.append(diagnostics_fn(state, report.iterations))
        if observer is not None:
            observer(prev, state)
    if final_dump is not None:
        from .mesh import NodalField, dump_field
        stacked = np.column_stack([state.u, state.p, state.C])
        dump_field(NodalField(mesh, stacked), final_dump)
    return records, state
