"""P1 operator assembly for the coupled velocity/pressure/conformation scheme.

All bilinear forms are assembled into scipy CSR matrices.  Velocity degrees
of freedom are interleaved (vertex-major, component-minor), so a nodal array
of shape (nv, d) flattens to the matching dof vector with ``.ravel()``.
Conformation components are solved per packed entry: with the symmetric
matrix test basis, every term of the matrix-valued weak form picks up the
same off-diagonal multiplicity, so the component systems share one scalar
operator and plain component loads.

The material derivative is discretized along backward characteristics: feet
X(x_q) = x_q - dt u(x_q) at the assembly quadrature points, clamped into the
closed domain, then located and evaluated by P1 interpolation.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import tensor_ops as tops
from .mesh import locate_many, simplex_rule
from .tensor_ops import SymTensor


class ElementQuadrature:
    """Cached per-element quadrature data for one mesh and rule degree."""

    def __init__(self, mesh, degree):
        self.mesh = mesh
        self.rule = simplex_rule(mesh.dim, degree)
        self.phi = self.rule.points                          # (nq, d+1)
        self.weights = (mesh.volumes / mesh.reference_volume)[:, None] \
            * self.rule.weights[None, :]                     # (ne, nq)
        verts = mesh.vertices[mesh.elements]
        self.points = np.einsum("qi,eid->eqd", self.phi, verts)  # (ne, nq, d)

    @property
    def n_points(self):
        return self.phi.shape[0]

    def at_quad(self, nodal):
        """Nodal values (nv, ...) -> values at quadrature points (ne, nq, ...)."""
        gathered = nodal[self.mesh.elements]                 # (ne, d+1, ...)
        if gathered.ndim == 2:
            return np.einsum("qi,ei->eq", self.phi, gathered)
        return np.einsum("qi,ei...->eq...", self.phi, gathered)

    def integrate_nodal(self, nodal_scalar):
        """Quadrature integral of a P1-interpolated nodal scalar."""
        return float(np.einsum("eq,eq->", self.weights, self.at_quad(nodal_scalar)))


def _scatter_matrix(mesh, local, ndof_row=None, ndof_col=None, row_map=None,
                    col_map=None):
    conn = mesh.elements
    nloc = conn.shape[1]
    rows = np.repeat(conn, nloc, axis=1).ravel() if row_map is None else row_map
    cols = np.tile(conn, (1, nloc)).ravel() if col_map is None else col_map
    n = mesh.n_vertices
    mat = sp.coo_matrix(
        (local.ravel(), (rows, cols)),
        shape=(ndof_row or n, ndof_col or n),
    )
    return mat.tocsr()


def mass_matrix(mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix (exact integration)."""
    d = mesh.dim
    nloc = d + 1
    ref = (np.ones((nloc, nloc)) + np.eye(nloc)) / ((nloc) * (nloc + 1))
    local = mesh.volumes[:, None, None] * ref[None, :, :]
    return _scatter_matrix(mesh, local)


def stiffness_matrix(mesh, coefficient=1.0) -> sp.csr_matrix:
    """Scalar Laplacian form: coefficient * int grad(phi_i).grad(phi_j)."""
    if coefficient < 0:
        raise ValueError("coefficient must be >= 0")
    local = coefficient * mesh.volumes[:, None, None] \
        * np.einsum("eik,ejk->eij", mesh.grads, mesh.grads)
    return _scatter_matrix(mesh, local)


def pressure_stabilization(mesh, delta_bp) -> sp.csr_matrix:
    """Pressure-gradient penalty delta_bp * h^2 * (grad p, grad q)."""
    if delta_bp <= 0:
        raise ValueError("delta_bp must be > 0")
    return stiffness_matrix(mesh, delta_bp * mesh.h ** 2)


def vector_mass_matrix(mesh) -> sp.csr_matrix:
    """Mass matrix on the d-component velocity space (interleaved dofs)."""
    return sp.kron(mass_matrix(mesh), sp.eye(mesh.dim), format="csr")


def symmetric_gradient_stiffness(mesh, coefficient=1.0) -> sp.csr_matrix:
    """Vector form: coefficient * int D(u):D(v) with D the symmetric gradient."""
    d = mesh.dim
    g = mesh.grads
    gg = np.einsum("eia,eja->eij", g, g)
    eye = np.eye(d)
    # int D(phi_i e_k):D(phi_j e_l) = V/2 (delta_kl grad_i.grad_j + g_il g_jk)
    local = 0.5 * mesh.volumes[:, None, None, None, None] * (
        eye[None, None, :, None, :] * gg[:, :, None, :, None]
        + np.einsum("eil,ejk->eikjl", g, g)
    )
    local *= coefficient
    conn = mesh.elements
    nloc = d + 1
    dof = (conn[:, :, None] * d + np.arange(d)[None, None, :]).reshape(-1, nloc * d)
    rows = np.repeat(dof, nloc * d, axis=1).ravel()
    cols = np.tile(dof, (1, nloc * d)).ravel()
    n = mesh.n_vertices * d
    return sp.coo_matrix(
        (local.reshape(len(conn), nloc * d, nloc * d).ravel(), (rows, cols)),
        shape=(n, n),
    ).tocsr()


def divergence_matrix(mesh) -> sp.csr_matrix:
    """Coupling B[q, (i,k)] = int phi_q d_k phi_i (pressure rows, velocity cols)."""
    d = mesh.dim
    nloc = d + 1
    conn = mesh.elements
    # int_K phi_q d_k phi_i = V_K grad[i,k] / (d+1), independent of q
    local = np.broadcast_to(
        mesh.volumes[:, None, None, None] * mesh.grads[:, None, :, :] / nloc,
        (len(conn), nloc, nloc, d),
    )
    rows = np.repeat(conn, nloc * d, axis=1).ravel()
    cols = np.tile(
        (conn[:, :, None] * d + np.arange(d)[None, None, :]).reshape(-1, nloc * d),
        (1, nloc),
    ).ravel()
    return sp.coo_matrix(
        (local.ravel(), (rows, cols)),
        shape=(mesh.n_vertices, mesh.n_vertices * d),
    ).tocsr()


def reaction_matrix(mesh, quad: ElementQuadrature, coeff_at_quad) -> sp.csr_matrix:
    """Weighted scalar mass matrix: int c(x) phi_i phi_j with quadrature."""
    local = np.einsum("eq,qi,qj->eij", quad.weights * coeff_at_quad,
                      quad.phi, quad.phi)
    return _scatter_matrix(mesh, local)


def scalar_load(mesh, quad: ElementQuadrature, values_at_quad):
    """Load vector int f phi_i for f given at quadrature points (ne, nq, ...)."""
    vals = np.asarray(values_at_quad)
    if vals.ndim == 2:
        local = np.einsum("eq,qi->ei", quad.weights * vals, quad.phi)
        out = np.zeros(mesh.n_vertices)
    else:
        local = np.einsum("eq,qi,eqc->eic", quad.weights, quad.phi, vals)
        out = np.zeros((mesh.n_vertices,) + vals.shape[2:])
    np.add.at(out, mesh.elements.ravel(), local.reshape(-1, *out.shape[1:]))
    return out


def elastic_stress_load(mesh, quad: ElementQuadrature, conf_comps):
    """Entries int tr(C) C : grad(phi_i e_k) of the elastic stress form.

    `conf_comps` are packed nodal components (nv, ncomp); the return value is
    an interleaved velocity-space vector (nv * d,).
    """
    d = mesh.dim
    cq = quad.at_quad(conf_comps)                    # (ne, nq, ncomp)
    trq = tops.field_traces(cq, d)
    full = tops.sym_to_full(cq, d) * trq[..., None, None]
    # S : grad(phi_i e_k) = sum_a S[a, k] grads[i, a]
    local = np.einsum("eq,eqak,eia->eik", quad.weights, full, mesh.grads)
    out = np.zeros(mesh.n_vertices * d)
    dof = (mesh.elements[:, :, None] * d + np.arange(d)[None, None, :])
    np.add.at(out, dof.ravel(), local.ravel())
    return out


def phi_coefficient(tr_c, a):
    """Relaxation source coefficient tr(C) + a."""
    return tr_c + a


def chi_coefficient(tr_c, a):
    """Relaxation decay coefficient tr(C)^2 + a |tr(C)|."""
    return tr_c ** 2 + a * np.abs(tr_c)


def relaxation_terms(conf: SymTensor, a) -> SymTensor:
    """Pointwise relaxation Phi(tr C) I - chi(tr C) C; zero at C = I/sqrt(d)."""
    tr = tops.trace(conf)
    comps = -chi_coefficient(tr, a) * conf.components.copy()
    comps[: conf.dim] += phi_coefficient(tr, a)
    return SymTensor(conf.dim, comps)


def upper_convected_source(conf: SymTensor, grad_u) -> SymTensor:
    """Stretching term (grad u) C + C (grad u)^T; symmetric by construction."""
    grad_u = np.asarray(grad_u, dtype=float)
    prod = grad_u @ conf.to_matrix()
    return SymTensor.from_matrix(prod + prod.T)


def upper_convected_at_quad(conf_at_quad, grad_u_elems, dim):
    """Batched stretching term at quadrature points.

    conf_at_quad: packed (ne, nq, ncomp); grad_u_elems: (ne, d, d) with
    grad_u[a, b] = d u_a / d x_b (constant per element for P1 velocity).
    """
    c = tops.sym_to_full(conf_at_quad, dim)                  # (ne, nq, d, d)
    gc = np.einsum("eab,eqbc->eqac", grad_u_elems, c)
    return tops.full_to_sym(gc + np.swapaxes(gc, -1, -2), dim)


def velocity_gradients(mesh, u):
    """Per-element velocity gradient, grad_u[e, a, b] = d u_a / d x_b."""
    return np.einsum("eib,eia->eab", mesh.grads, u[mesh.elements])


@dataclass
class CharacteristicFeet:
    """Backtracked quadrature points with their host elements and weights."""

    positions: np.ndarray  # (ne, nq, d), clamped into [0, 1]^d
    elements: np.ndarray   # (ne, nq) host element of each foot
    bary: np.ndarray       # (ne, nq, d+1) interpolation weights


def characteristic_feet(mesh, quad: ElementQuadrature, u, dt) -> CharacteristicFeet:
    """Feet X(x_q) = x_q - dt u(x_q), clamped componentwise into [0,1]^d."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    uq = quad.at_quad(u)                                     # (ne, nq, d)
    feet = np.clip(quad.points - dt * uq, 0.0, 1.0)
    elems, bary = locate_many(mesh, feet.reshape(-1, mesh.dim))
    nq = quad.n_points
    return CharacteristicFeet(
        feet,
        elems.reshape(-1, nq),
        bary.reshape(-1, nq, mesh.dim + 1),
    )


def transported_rhs(mesh, quad: ElementQuadrature, feet: CharacteristicFeet,
                    nodal):
    """Load vector int f(X(x)) phi_i(x) dx with f interpolated at the feet."""
    gathered = nodal[mesh.elements[feet.elements.ravel()]]   # (n, d+1, ...)
    if gathered.ndim == 2:
        vals = np.einsum("ni,ni->n", feet.bary.reshape(-1, mesh.dim + 1), gathered)
        vals = vals.reshape(feet.elements.shape)
    else:
        vals = np.einsum("ni,ni...->n...", feet.bary.reshape(-1, mesh.dim + 1),
                         gathered)
        vals = vals.reshape(feet.elements.shape + gathered.shape[2:])
    return scalar_load(mesh, quad, vals)


def interior_velocity_dofs(mesh):
    """Interleaved velocity dof indices away from the Dirichlet boundary."""
    free_verts = np.flatnonzero(~mesh.boundary_vertices)
    return (free_verts[:, None] * mesh.dim + np.arange(mesh.dim)).ravel()
