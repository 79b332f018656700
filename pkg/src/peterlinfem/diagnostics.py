"""Energy, free-energy, relative-energy and convergence diagnostics.

Per-step records carry every functional of the continuous analysis evaluated
on the discrete solution:

  kinetic        1/2 int |u|^2
  elastic_trace  1/4 int |tr C|^2
  frobenius      1/2 int |C|^2
  log_term       -1/2 int tr(log C)        (only while C is vertexwise SPD)
  visc_diss      eta int |Du|^2
  trace_grad     eps/2 int |grad tr C|^2
  relax_diss     1/2 int (|tr C|^4 + a |tr C|^3)
  source         1/2 int (|tr C|^2 + a tr C)

together with the SPD margin of C, the element-wise divergence norm, and the
fixed-point iteration count.  The relative energy between two states is

  E = 1/2 ||u - U||^2 + 1/4 ||tr(C - H)||^2 + 1/2 ||C - H||^2,

the metric of the convergence study, with its dissipation counterpart.

All integrals use the degree-4 diagnostics rule on nodal-interpolated
integrands; tr(log C) is interpolated from its nodal values so the SPD check
stays vertexwise.

Note on the energy-balance residual: testing the relaxation source Phi I
with tr(C) I / 2 yields (d/2) int (|tr C|^2 + a tr C), i.e. d times the
`source` record entry.  The residual series therefore weights `source` by
the spatial dimension; with that bookkeeping the rest state balances exactly
and the residual of the spatially constant reduction is O(dt).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import tensor_ops as tops
from .assembly import ElementQuadrature, chi_coefficient, velocity_gradients
from .exceptions import MeshMismatchError, NonSPDError


@dataclass
class DiagnosticsRecord:
    """Every monitored functional at one time level."""

    t: float
    kinetic: float
    elastic_trace: float
    frobenius: float
    log_term: float          # nan once C loses vertexwise SPD
    visc_diss: float
    trace_grad_diss: float
    relax_diss: float
    source: float
    free_energy: float       # kinetic + elastic_trace + log_term
    min_eig: float
    div_norm: float
    fp_iters: int

    @property
    def energy(self):
        return self.kinetic + self.elastic_trace

    @property
    def dissipation(self):
        return self.visc_diss + self.trace_grad_diss + self.relax_diss

    CSV_HEADER = ("t,kinetic,elastic_trace,frobenius,log_term,visc_diss,"
                  "trace_grad_diss,relax_diss,source,free_energy,min_eig,"
                  "div_norm,fp_iters")

    def csv_row(self):
        vals = [self.t, self.kinetic, self.elastic_trace, self.frobenius,
                self.log_term, self.visc_diss, self.trace_grad_diss,
                self.relax_diss, self.source, self.free_energy, self.min_eig,
                self.div_norm]
        return ",".join(f"{v:.17g}" for v in vals) + f",{self.fp_iters}"


@dataclass
class RelativeEnergyRecord:
    """Squared-distance components between two states (and its dissipation)."""

    t: float
    e_kin: float
    e_el: float
    e_frob: float
    d_visc: float = math.nan         # eta ||Du - DU||^2
    d_trace_grad: float = math.nan   # eps/2 ||grad tr(C-H)||^2
    d_chi_trace: float = math.nan    # 1/2 ||sqrt(chi) tr(C-H)||^2
    d_chi_frob: float = math.nan     # ||sqrt(chi) (C-H)||^2
    d_grad_frob: float = math.nan    # eps ||grad(C-H)||^2

    @property
    def total(self):
        return self.e_kin + self.e_el + self.e_frob


@dataclass
class EOCTable:
    """Experimental orders of convergence on a strictly halving hierarchy."""

    h: list
    errors: list
    eoc: list  # len(h) - 1 entries, adjacent pairs


class StateDiagnostics:
    """Record builder bound to one mesh and one parameter set."""

    def __init__(self, mesh, config):
        self.mesh = mesh
        self.config = config
        self.quad = ElementQuadrature(mesh, config.quad_diagnostics)

    def record(self, state, fp_iters=0) -> DiagnosticsRecord:
        mesh, cfg, quad = self.mesh, self.config, self.quad
        d = mesh.dim
        uq = quad.at_quad(state.u)
        kinetic = 0.5 * float(np.einsum("eq,eqk,eqk->", quad.weights, uq, uq))
        tr_nodal = tops.field_traces(state.C, d)
        trq = quad.at_quad(tr_nodal)
        elastic = 0.25 * float(np.einsum("eq,eq->", quad.weights, trq ** 2))
        cw = tops.component_weights(d)
        cq = quad.at_quad(state.C)
        frob = 0.5 * float(np.einsum("eq,eqc,eqc,c->", quad.weights, cq, cq, cw))

        du = velocity_gradients(mesh, state.u)
        du = 0.5 * (du + np.swapaxes(du, 1, 2))
        visc = cfg.eta * float(np.einsum("e,eab,eab->", mesh.volumes, du, du))
        grad_tr = np.einsum("eik,ei->ek", mesh.grads, tr_nodal[mesh.elements])
        trace_grad = 0.5 * cfg.epsilon * float(
            np.einsum("e,ek,ek->", mesh.volumes, grad_tr, grad_tr))
        relax = 0.5 * float(np.einsum(
            "eq,eq->", quad.weights,
            np.abs(trq) ** 4 + cfg.a * np.abs(trq) ** 3))
        source = 0.5 * float(np.einsum(
            "eq,eq->", quad.weights, trq ** 2 + cfg.a * trq))

        lam_min = tops.field_min_eigenvalues(state.C, d)
        min_eig = float(lam_min.min())
        if min_eig > cfg.spd_floor:
            tr_log = np.log(np.linalg.eigvalsh(
                tops.sym_to_full(state.C, d))).sum(axis=-1)
            log_term = -0.5 * quad.integrate_nodal(tr_log)
        else:
            log_term = math.nan

        return DiagnosticsRecord(
            t=state.t, kinetic=kinetic, elastic_trace=elastic, frobenius=frob,
            log_term=log_term, visc_diss=visc, trace_grad_diss=trace_grad,
            relax_diss=relax, source=source,
            free_energy=kinetic + elastic + log_term,
            min_eig=min_eig, div_norm=divergence_norm(state.u, mesh),
            fp_iters=fp_iters,
        )


def energy(state, mesh, quad_degree=4):
    """(kinetic, elastic trace energy, total) of one state."""
    quad = ElementQuadrature(mesh, quad_degree)
    uq = quad.at_quad(state.u)
    kinetic = 0.5 * float(np.einsum("eq,eqk,eqk->", quad.weights, uq, uq))
    trq = quad.at_quad(tops.field_traces(state.C, mesh.dim))
    elastic = 0.25 * float(np.einsum("eq,eq->", quad.weights, trq ** 2))
    return kinetic, elastic, kinetic + elastic


def free_energy(state, mesh, floor=1e-12, quad_degree=4):
    """Total energy plus -1/2 int tr(log C); NonSPDError if C is not SPD."""
    lam_min = tops.field_min_eigenvalues(state.C, mesh.dim)
    if lam_min.min() <= floor:
        raise NonSPDError(lam_min.min(), vertex=int(np.argmin(lam_min)))
    quad = ElementQuadrature(mesh, quad_degree)
    tr_log = np.log(np.linalg.eigvalsh(
        tops.sym_to_full(state.C, mesh.dim))).sum(axis=-1)
    _, _, total = energy(state, mesh, quad_degree)
    return total - 0.5 * quad.integrate_nodal(tr_log)


def energy_inequality_residual(records, dim, dt):
    """Discrete energy-balance residual per record.

    residual(t_n) = E(t_n) - E(0) + sum_{m<=n} dt (dissipation_m - d source_m)
    with end-of-step functionals; <= tolerance means the trajectory is
    consistent with the energy inequality.  The source carries the factor
    `dim` from testing the relaxation source with tr(C) I / 2.
    """
    e0 = records[0].energy
    out = np.zeros(len(records))
    acc = 0.0
    for n, rec in enumerate(records[1:], start=1):
        acc += dt * (rec.dissipation - dim * rec.source)
        out[n] = rec.energy - e0 + acc
    return out


def _check_same_mesh(mesh, *states):
    nv = mesh.n_vertices
    for s in states:
        if s.u.shape[0] != nv or s.C.shape[0] != nv:
            raise MeshMismatchError(
                "states live on different meshes; prolongate first")


def relative_energy(state_a, state_b, mesh, quad_degree=4) -> RelativeEnergyRecord:
    """Squared relative energy E(a | b) between two states on one mesh."""
    _check_same_mesh(mesh, state_a, state_b)
    quad = ElementQuadrature(mesh, quad_degree)
    d = mesh.dim
    du = quad.at_quad(state_a.u - state_b.u)
    e_kin = 0.5 * float(np.einsum("eq,eqk,eqk->", quad.weights, du, du))
    dc = state_a.C - state_b.C
    trq = quad.at_quad(tops.field_traces(dc, d))
    e_el = 0.25 * float(np.einsum("eq,eq->", quad.weights, trq ** 2))
    cw = tops.component_weights(d)
    dcq = quad.at_quad(dc)
    e_frob = 0.5 * float(np.einsum("eq,eqc,eqc,c->", quad.weights, dcq, dcq, cw))
    return RelativeEnergyRecord(state_a.t, e_kin, e_el, e_frob)


def relative_dissipation(state_a, state_b, mesh, eta, epsilon, a=0.0,
                         quad_degree=4):
    """The five dissipation components of the relative-energy inequality.

    chi is evaluated from state_a's tr(C).  Returns a RelativeEnergyRecord
    with both the energy and dissipation parts filled.
    """
    rec = relative_energy(state_a, state_b, mesh, quad_degree)
    quad = ElementQuadrature(mesh, quad_degree)
    d = mesh.dim
    du = velocity_gradients(mesh, state_a.u - state_b.u)
    du = 0.5 * (du + np.swapaxes(du, 1, 2))
    rec.d_visc = eta * float(np.einsum("e,eab,eab->", mesh.volumes, du, du))

    dc = state_a.C - state_b.C
    tr_diff = tops.field_traces(dc, d)
    grad_tr = np.einsum("eik,ei->ek", mesh.grads, tr_diff[mesh.elements])
    rec.d_trace_grad = 0.5 * epsilon * float(
        np.einsum("e,ek,ek->", mesh.volumes, grad_tr, grad_tr))

    chi_q = chi_coefficient(quad.at_quad(tops.field_traces(state_a.C, d)), a)
    trq = quad.at_quad(tr_diff)
    rec.d_chi_trace = 0.5 * float(
        np.einsum("eq,eq,eq->", quad.weights, chi_q, trq ** 2))
    cw = tops.component_weights(d)
    dcq = quad.at_quad(dc)
    rec.d_chi_frob = float(
        np.einsum("eq,eq,eqc,eqc,c->", quad.weights, chi_q, dcq, dcq, cw))

    grad_c = np.einsum("eik,eic->ekc", mesh.grads, dc[mesh.elements])
    rec.d_grad_frob = epsilon * float(
        np.einsum("e,ekc,ekc,c->", mesh.volumes, grad_c, grad_c, cw))
    return rec


def eoc(errors) -> EOCTable:
    """EOC = log2(E_h / E_{h/2}) per adjacent pair of a halving hierarchy."""
    if len(errors) < 2:
        raise ValueError("need at least two levels")
    hs = [float(h) for h, _ in errors]
    es = [float(e) for _, e in errors]
    for h_c, h_f in zip(hs, hs[1:]):
        if not math.isclose(h_c, 2.0 * h_f, rel_tol=1e-9):
            raise ValueError(f"levels do not halve: h={h_c} then {h_f}")
    if min(es) <= 0.0:
        raise ValueError("non-positive error entry; reference coincides "
                         "with a level?")
    rates = [math.log2(e_c / e_f) for e_c, e_f in zip(es, es[1:])]
    return EOCTable(hs, es, rates)


def spd_monitor(conf_values, dim):
    """(global minimum eigenvalue, vertex index attaining it) of a field."""
    lam_min = tops.field_min_eigenvalues(np.asarray(conf_values), dim)
    k = int(np.argmin(lam_min))
    return float(lam_min[k]), k


def divergence_norm(u, mesh):
    """L2 norm of the elementwise-constant divergence of a P1 velocity."""
    div = np.einsum("eik,eik->e", mesh.grads, u[mesh.elements])
    return float(np.sqrt(np.sum(mesh.volumes * div ** 2)))
