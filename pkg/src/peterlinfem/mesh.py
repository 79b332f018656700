"""Structured simplicial meshes of the unit square/cube with nested refinement.

A mesh with M cells per side (h = 1/M) carries (M+1)^d lexicographically
indexed vertices.  Each square cell splits into 2 triangles along the
lower-left/upper-right diagonal; each cube splits into the 6 Kuhn simplices
sharing the main diagonal.  Both splits are self-similar under dyadic
refinement, so every vertex (in fact every element) of the M mesh re-appears
exactly in the 2M mesh and fields can be prolongated between hierarchy
levels by plain P1 interpolation.

Point location is integer cell arithmetic plus the ordering test that
identifies the Kuhn simplex; a brute-force scan backs up the scalar entry
point.  Quadrature rules on the reference simplex are hardcoded for degree
<= 2 and generated by the collapsed-coordinate (conical product) Gauss
construction for higher degrees, which keeps all weights positive.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi

from .exceptions import MeshMismatchError

# Kuhn simplex vertex chains: permutation pi gives the tet 0 -> e_pi0 ->
# e_pi0 + e_pi1 -> (1,1,1); odd permutations store the last two vertices
# swapped so all stored simplices are positively oriented.
_KUHN_PERMS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))
_PERM_PARITY = (1, -1, -1, 1, 1, -1)


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points and weights on the reference simplex."""

    dim: int
    degree: int
    points: np.ndarray   # (nq, dim+1) barycentric coordinates
    weights: np.ndarray  # (nq,), summing to the reference simplex volume


def _conical_rule(dim, degree):
    n = (degree + 2) // 2  # n-point Gauss exactness: 2n-1 >= degree
    axes = []
    for alpha in range(dim - 1, -1, -1):
        t, w = roots_jacobi(n, alpha, 0.0)
        x = 0.5 * (t + 1.0)
        w = w / 2.0 ** (alpha + 1)
        axes.append((x, w))
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    coords = []
    remaining = 1.0
    for g in grids:
        coords.append(g * remaining)
        remaining = remaining * (1.0 - g)
    pts = np.stack([c.ravel() for c in coords], axis=1)
    wts = np.ones(pts.shape[0])
    for wg in wgrids:
        wts = wts * wg.ravel()
    bary = np.column_stack([1.0 - pts.sum(axis=1), pts])
    return bary, wts


def simplex_rule(dim, degree):
    """Quadrature rule exact for polynomials of (at least) the given degree."""
    ref_vol = 0.5 if dim == 2 else 1.0 / 6.0
    if degree <= 1:
        pts = np.full((1, dim + 1), 1.0 / (dim + 1))
        return QuadratureRule(dim, 1, pts, np.array([ref_vol]))
    if degree == 2:
        if dim == 2:
            a, b = 2.0 / 3.0, 1.0 / 6.0
            pts = np.array([[a, b, b], [b, a, b], [b, b, a]])
            return QuadratureRule(dim, 2, pts, np.full(3, ref_vol / 3.0))
        a = 0.5854101966249685
        b = 0.1381966011250105
        pts = np.full((4, 4), b)
        np.fill_diagonal(pts, a)
        return QuadratureRule(dim, 2, pts, np.full(4, ref_vol / 4.0))
    bary, wts = _conical_rule(dim, degree)
    return QuadratureRule(dim, degree, bary, wts)


@dataclass(frozen=True)
class StructuredSimplicialMesh:
    """Uniform simplicial mesh of (0,1)^d, M cells per side."""

    dim: int
    M: int
    vertices: np.ndarray        # ((M+1)^d, d)
    elements: np.ndarray        # (ne, d+1) vertex indices, positive volume
    boundary_vertices: np.ndarray  # ((M+1)^d,) bool
    h: float
    volumes: np.ndarray = field(repr=False, default=None)
    grads: np.ndarray = field(repr=False, default=None)  # (ne, d+1, d) P1 basis gradients

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def simplices_per_cell(self):
        return 2 if self.dim == 2 else 6

    @property
    def reference_volume(self):
        return 0.5 if self.dim == 2 else 1.0 / 6.0

    def element_vertices(self, e):
        return self.vertices[self.elements[e]]


def _geometry(vertices, elements, dim):
    verts = vertices[elements]                       # (ne, d+1, d)
    edges = verts[:, 1:, :] - verts[:, :1, :]        # (ne, d, d)
    dets = np.linalg.det(edges)
    vols = dets / (2.0 if dim == 2 else 6.0)
    inv = np.linalg.inv(edges)                       # rows: gradients of b_1..b_d
    grads = np.empty((elements.shape[0], dim + 1, dim))
    grads[:, 1:, :] = np.swapaxes(inv, 1, 2)
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    return vols, grads


def build_mesh(dim, M) -> StructuredSimplicialMesh:
    """Uniform simplicial mesh of (0,1)^d with M cells per side."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    n1 = M + 1
    idx = np.arange(n1, dtype=float) / M
    if dim == 2:
        xx, yy = np.meshgrid(idx, idx, indexing="ij")
        # x varies fastest in the linear index
        verts = np.column_stack([xx.T.ravel(), yy.T.ravel()])
    else:
        grids = np.meshgrid(idx, idx, idx, indexing="ij")
        verts = np.column_stack(
            [grids[0].transpose(2, 1, 0).ravel(),
             grids[1].transpose(2, 1, 0).ravel(),
             grids[2].transpose(2, 1, 0).ravel()]
        )

    def vid(ii):
        # ii: (..., d) integer vertex coordinates, x fastest
        out = ii[..., -1]
        for k in range(dim - 2, -1, -1):
            out = out * n1 + ii[..., k]
        return out

    cells = np.stack(
        np.meshgrid(*[np.arange(M)] * dim, indexing="ij"), axis=-1
    ).reshape(-1, dim)
    # reorder cells so x varies fastest, matching cell_index arithmetic
    order = np.zeros(len(cells), dtype=int)
    mult = 1
    for k in range(dim):
        order += cells[:, k] * mult
        mult *= M
    cells = cells[np.argsort(order, kind="stable")]

    if dim == 2:
        v00 = vid(cells)
        v10 = vid(cells + np.array([1, 0]))
        v01 = vid(cells + np.array([0, 1]))
        v11 = vid(cells + np.array([1, 1]))
        tris = np.empty((len(cells), 2, 3), dtype=int)
        tris[:, 0] = np.stack([v00, v10, v11], axis=1)
        tris[:, 1] = np.stack([v00, v11, v01], axis=1)
        elements = tris.reshape(-1, 3)
    else:
        tets = np.empty((len(cells), 6, 4), dtype=int)
        eye = np.eye(3, dtype=int)
        for t, perm in enumerate(_KUHN_PERMS):
            p0 = cells
            p1 = p0 + eye[perm[0]]
            p2 = p1 + eye[perm[1]]
            p3 = p2 + eye[perm[2]]
            chain = [vid(p0), vid(p1), vid(p2), vid(p3)]
            if _PERM_PARITY[t] < 0:
                chain[2], chain[3] = chain[3], chain[2]
            tets[:, t] = np.stack(chain, axis=1)
        elements = tets.reshape(-1, 4)

    on_boundary = np.any((verts == 0.0) | (verts == 1.0), axis=1)
    vols, grads = _geometry(verts, elements, dim)
    assert vols.min() > 0.0
    return StructuredSimplicialMesh(
        dim, M, verts, elements, on_boundary, 1.0 / M, vols, grads
    )


# ---------------------------------------------------------------------------
# Point location
# ---------------------------------------------------------------------------

_PERM_LUT = np.full(27, -1, dtype=int)
for _t, _p in enumerate(_KUHN_PERMS):
    _PERM_LUT[_p[0] * 9 + _p[1] * 3 + _p[2]] = _t


def locate_many(mesh, points):
    """Vectorized location: (elements, barycentric weights) per point.

    Points are clamped into [0,1]^d first.  Weights correspond to the stored
    vertex order of each element.
    """
    pts = np.clip(np.asarray(points, dtype=float), 0.0, 1.0)
    M = mesh.M
    scaled = pts * M
    ic = np.clip(np.floor(scaled).astype(int), 0, M - 1)
    y = scaled - ic
    cell = np.zeros(len(pts), dtype=int)
    mult = 1
    for k in range(mesh.dim):
        cell += ic[:, k] * mult
        mult *= M
    if mesh.dim == 2:
        lower = y[:, 0] >= y[:, 1]
        local = np.where(lower, 0, 1)
        w = np.empty((len(pts), 3))
        w[lower, 0] = 1.0 - y[lower, 0]
        w[lower, 1] = y[lower, 0] - y[lower, 1]
        w[lower, 2] = y[lower, 1]
        up = ~lower
        w[up, 0] = 1.0 - y[up, 1]
        w[up, 1] = y[up, 0]
        w[up, 2] = y[up, 1] - y[up, 0]
        return cell * 2 + local, w
    order = np.argsort(-y, axis=1, kind="stable")
    ys = np.take_along_axis(y, order, axis=1)
    code = order[:, 0] * 9 + order[:, 1] * 3 + order[:, 2]
    local = _PERM_LUT[code]
    w = np.empty((len(pts), 4))
    w[:, 0] = 1.0 - ys[:, 0]
    w[:, 1] = ys[:, 0] - ys[:, 1]
    w[:, 2] = ys[:, 1] - ys[:, 2]
    w[:, 3] = ys[:, 2]
    odd = np.array(_PERM_PARITY)[local] < 0
    w[odd] = w[odd][:, [0, 1, 3, 2]]
    return cell * 6 + local, w


def _bary_in_element(mesh, e, point):
    verts = mesh.element_vertices(e)
    edges = (verts[1:] - verts[0]).T
    b = np.linalg.solve(edges, point - verts[0])
    return np.concatenate([[1.0 - b.sum()], b])


def locate(mesh, point, tol=1e-12):
    """Element index and barycentric coordinates of a single point.

    Ties on shared faces/vertices resolve to the lowest element index among
    the containing elements.
    """
    p = np.clip(np.asarray(point, dtype=float), 0.0, 1.0)
    M = mesh.M
    scaled = p * M
    ic = np.clip(np.floor(scaled).astype(int), 0, M - 1)
    y = scaled - ic
    # the point may also lie in the lower-neighbour cell along axes where it
    # sits on a cell face
    choices = []
    for k in range(mesh.dim):
        if y[k] <= tol and ic[k] > 0:
            choices.append((ic[k] - 1, ic[k]))
        else:
            choices.append((ic[k],))
    nl = mesh.simplices_per_cell
    best = None
    for combo in np.stack(np.meshgrid(*choices, indexing="ij"), axis=-1).reshape(-1, mesh.dim):
        cell = 0
        mult = 1
        for k in range(mesh.dim):
            cell += combo[k] * mult
            mult *= M
        for local in range(nl):
            e = cell * nl + local
            b = _bary_in_element(mesh, e, p)
            if b.min() >= -tol and (best is None or e < best[0]):
                best = (e, b)
    if best is not None:
        return best
    # brute-force fallback: closest containment over all elements
    best_e, best_b, best_m = 0, None, -np.inf
    for e in range(mesh.n_elements):
        b = _bary_in_element(mesh, e, p)
        if b.min() > best_m:
            best_e, best_b, best_m = e, b, b.min()
    return best_e, best_b


# ---------------------------------------------------------------------------
# Nodal fields
# ---------------------------------------------------------------------------

@dataclass
class NodalField:
    """Vertex-based P1 field: scalar, d-vector, or packed symmetric tensor."""

    mesh: StructuredSimplicialMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != self.mesh.n_vertices:
            raise MeshMismatchError(
                f"{self.values.shape[0]} values for {self.mesh.n_vertices} vertices"
            )

    @property
    def arity(self):
        return 1 if self.values.ndim == 1 else self.values.shape[1]


def interpolate(fld: NodalField, point):
    """P1 evaluation at one point; exact for globally affine fields."""
    e, b = locate(fld.mesh, point)
    return b @ fld.values[fld.mesh.elements[e]]


def interpolate_many(mesh, values, points):
    """P1 evaluation of nodal values (nv, ...) at many points."""
    elems, w = locate_many(mesh, points)
    nodal = values[mesh.elements[elems]]  # (np, d+1, ...)
    if nodal.ndim == 2:
        return (nodal * w).sum(axis=1)
    return (nodal * w[:, :, None]).sum(axis=1)


def prolongate(fld: NodalField, fine_mesh) -> NodalField:
    """P1-interpolate a coarse-mesh field onto a nested finer mesh."""
    coarse = fld.mesh
    if fine_mesh.dim != coarse.dim or fine_mesh.M % coarse.M != 0:
        raise MeshMismatchError(
            f"meshes not nested: M={coarse.M} -> M={fine_mesh.M}, "
            f"dim {coarse.dim} vs {fine_mesh.dim}"
        )
    vals = interpolate_many(coarse, fld.values, fine_mesh.vertices)
    return NodalField(fine_mesh, vals)


def integrate(mesh, rule, integrand):
    """Integral over the mesh of `integrand(points) -> values` by quadrature."""
    verts = mesh.vertices[mesh.elements]              # (ne, d+1, d)
    pts = np.einsum("qi,eid->eqd", rule.points, verts)
    vals = np.asarray(integrand(pts.reshape(-1, mesh.dim))).reshape(pts.shape[:2])
    scale = mesh.volumes / mesh.reference_volume
    return float(np.einsum("e,q,eq->", scale, rule.weights, vals))


# ---------------------------------------------------------------------------
# Text dumps (reference-solution persistence)
# ---------------------------------------------------------------------------

def dump_field(fld: NodalField, path):
    """Line-oriented text dump: header, then one vertex per line."""
    mesh = fld.mesh
    vals = fld.values if fld.values.ndim == 2 else fld.values[:, None]
    with open(path, "w") as fh:
        fh.write(f"dim={mesh.dim} M={mesh.M} arity={vals.shape[1]}\n")
        for x, v in zip(mesh.vertices, vals):
            row = np.concatenate([x, v])
            fh.write(" ".join(f"{c:.17g}" for c in row) + "\n")


def load_field(path, mesh=None) -> NodalField:
    """Read a dump back; rebuilds (or checks) the mesh it was written on."""
    with open(path) as fh:
        header = fh.readline().split()
        meta = dict(kv.split("=") for kv in header)
        dim, M, arity = int(meta["dim"]), int(meta["M"]), int(meta["arity"])
        data = np.loadtxt(fh, ndmin=2)
    if mesh is None:
        mesh = build_mesh(dim, M)
    elif mesh.dim != dim or mesh.M != M:
        raise MeshMismatchError(f"dump is dim={dim} M={M}, mesh is "
                                f"dim={mesh.dim} M={mesh.M}")
    if data.shape != (mesh.n_vertices, dim + arity):
        raise ValueError(f"malformed dump: {data.shape}")
    if not np.array_equal(data[:, :dim], mesh.vertices):
        raise MeshMismatchError("dump vertex coordinates do not match the mesh")
    vals = data[:, dim:]
    return NodalField(mesh, vals[:, 0] if arity == 1 else vals)
