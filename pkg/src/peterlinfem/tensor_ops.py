"""Symmetric-matrix algebra for 2x2 and 3x3 tensors.

Symmetric tensors are stored by their upper triangle in a fixed component
order, (11, 22, 33, 12, 13, 23) for d = 3 and (11, 22, 12) for d = 2, so
symmetry can never be violated by construction.  On top of that storage the
module provides the spectral decomposition, the matrix logarithm and inverse,
trace/Frobenius norms, and numeric residuals for the classical identities of
SPD matrices:

    tr(log D) = log det(D),
    tr(D)^2 - 2 tr(log D) - tr(I) >= 0,
    tr(D + D^-1 - I) >= 0,
    dD/dt : D^-1 = d/dt tr(log D)          (Jacobi's formula),

together with the pointwise trace-norm equivalence
|tr D|^p vs d^(p-1) sum |D_ij|^p for positive semi-definite D.

Eigendecomposition is closed-form for d = 2 and cyclic Jacobi iteration for
d = 3; batched helpers for nodal fields go through LAPACK and are
cross-checked against the scalar path in the test suite.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, NonSPDError, SingularMatrixError

SPD_FLOOR = 1e-12

# Component order of the packed storage per dimension.
_IDX = {
    2: ((0, 0), (1, 1), (0, 1)),
    3: ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)),
}


def n_components(dim):
    """Number of independent entries of a symmetric dim x dim matrix."""
    return dim * (dim + 1) // 2


@dataclass(frozen=True)
class SymTensor:
    """A symmetric d x d matrix stored by its upper triangle."""

    dim: int
    components: np.ndarray

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise DimensionMismatchError(f"dim must be 2 or 3, got {self.dim}")
        comps = np.asarray(self.components, dtype=float)
        if comps.shape != (n_components(self.dim),):
            raise DimensionMismatchError(
                f"expected {n_components(self.dim)} components, got {comps.shape}"
            )
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_matrix(cls, mat):
        mat = np.asarray(mat, dtype=float)
        dim = mat.shape[0]
        if mat.shape != (dim, dim) or dim not in (2, 3):
            raise DimensionMismatchError(f"not a 2x2 or 3x3 matrix: {mat.shape}")
        if not np.allclose(mat, mat.T, atol=1e-12 * max(1.0, abs(mat).max())):
            raise ValueError("matrix is not symmetric")
        sym = 0.5 * (mat + mat.T)
        return cls(dim, np.array([sym[i, j] for i, j in _IDX[dim]]))

    @classmethod
    def identity(cls, dim):
        comps = np.zeros(n_components(dim))
        comps[:dim] = 1.0
        return cls(dim, comps)

    @classmethod
    def zero(cls, dim):
        return cls(dim, np.zeros(n_components(dim)))

    def to_matrix(self):
        mat = np.zeros((self.dim, self.dim))
        for c, (i, j) in zip(self.components, _IDX[self.dim]):
            mat[i, j] = c
            mat[j, i] = c
        return mat


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigenvalues in non-decreasing order and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        q, lam = self.eigenvectors, self.eigenvalues
        return q @ np.diag(lam) @ q.T


def trace(a: SymTensor) -> float:
    return float(np.sum(a.components[: a.dim]))


def frobenius_inner(a: SymTensor, b: SymTensor) -> float:
    """Sum_ij A_ij B_ij; off-diagonal packed entries count twice."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dim {a.dim} vs {b.dim}")
    w = component_weights(a.dim)
    return float(np.sum(w * a.components * b.components))


def component_weights(dim):
    """Multiplicity of each packed component in a full-matrix double sum."""
    w = np.ones(n_components(dim))
    w[dim:] = 2.0
    return w


def frobenius_norm(a: SymTensor) -> float:
    return float(np.sqrt(frobenius_inner(a, a)))


def _eig2(mat):
    # Closed form for symmetric 2x2.
    a, d, b = mat[0, 0], mat[1, 1], mat[0, 1]
    half_tr = 0.5 * (a + d)
    disc = np.hypot(0.5 * (a - d), b)
    lam = np.array([half_tr - disc, half_tr + disc])
    if disc <= 1e-300:
        return lam, np.eye(2)
    # Eigenvector for the larger eigenvalue, then rotate 90 degrees.
    if abs(a - lam[1]) >= abs(d - lam[1]):
        v = np.array([b, lam[1] - a])
    else:
        v = np.array([lam[1] - d, b])
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return lam, np.eye(2)
    v /= nv
    q = np.column_stack([np.array([-v[1], v[0]]), v])
    return lam, q


def _eig3_jacobi(mat, tol=1e-15, max_sweeps=32):
    # Cyclic Jacobi iteration; terminates when the off-diagonal mass is
    # negligible relative to the matrix scale.
    a = mat.copy()
    q = np.eye(3)
    scale = max(np.abs(mat).max(), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
        if off <= tol * scale:
            break
        for p, r in ((0, 1), (0, 2), (1, 2)):
            apr = a[p, r]
            if abs(apr) <= 1e-300 * scale:
                continue
            theta = 0.5 * (a[r, r] - a[p, p]) / apr
            t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
            if theta == 0.0:
                t = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rot = np.eye(3)
            rot[p, p] = rot[r, r] = c
            rot[p, r] = s
            rot[r, p] = -s
            a = rot.T @ a @ rot
            q = q @ rot
            a[p, r] = a[r, p] = 0.0
    lam = np.diag(a).copy()
    order = np.argsort(lam, kind="stable")
    return lam[order], q[:, order]


def spectral(a: SymTensor) -> SpectralDecomp:
    """Eigendecomposition A = Q diag(lambda) Q^T, eigenvalues non-decreasing."""
    mat = a.to_matrix()
    if a.dim == 2:
        lam, q = _eig2(mat)
    else:
        lam, q = _eig3_jacobi(mat)
    return SpectralDecomp(lam, q)


def min_eigenvalue(a: SymTensor) -> float:
    return float(spectral(a).eigenvalues[0])


def _apply_scalar(a, fn):
    dec = spectral(a)
    mat = dec.eigenvectors @ np.diag(fn(dec.eigenvalues)) @ dec.eigenvectors.T
    return SymTensor.from_matrix(0.5 * (mat + mat.T))


def matrix_log(a: SymTensor, floor: float = SPD_FLOOR) -> SymTensor:
    lam_min = min_eigenvalue(a)
    if lam_min <= floor:
        raise NonSPDError(lam_min)
    return _apply_scalar(a, np.log)


def inverse(a: SymTensor, floor: float = SPD_FLOOR) -> SymTensor:
    if np.abs(spectral(a).eigenvalues).min() <= floor:
        raise SingularMatrixError(np.abs(spectral(a).eigenvalues).min())
    return _apply_scalar(a, lambda lam: 1.0 / lam)


def determinant(a: SymTensor) -> float:
    """Determinant straight from the packed components (no eigensolve)."""
    c = a.components
    if a.dim == 2:
        return float(c[0] * c[1] - c[2] * c[2])
    a11, a22, a33, a12, a13, a23 = c
    return float(
        a11 * (a22 * a33 - a23 * a23)
        - a12 * (a12 * a33 - a23 * a13)
        + a13 * (a12 * a23 - a22 * a13)
    )


def check_log_identities(a: SymTensor, floor: float = SPD_FLOOR):
    """Residuals of the three SPD log identities.

    Returns (tr log A - log det A,  tr(A)^2 - 2 tr log A - tr I,
    tr(A + A^-1 - I)).  The first vanishes identically; the other two are
    non-negative for SPD input.  det A is computed from the components so the
    first residual compares two independent evaluation routes.
    """
    log_a = matrix_log(a, floor)
    tr_log = trace(log_a)
    r1 = tr_log - np.log(determinant(a))
    r2 = trace(a) ** 2 - 2.0 * tr_log - a.dim
    r3 = trace(a) + trace(inverse(a, floor)) - a.dim
    return float(r1), float(r2), float(r3)


def jacobi_residual(path, dt: float, floor: float = SPD_FLOOR) -> float:
    """Max centered-difference residual of d/dt tr(log D) = D^-1 : dD/dt.

    `path` is a uniformly spaced (spacing `dt`) sequence of SPD SymTensors.
    For a smooth path the residual decays at O(dt^2).
    """
    if len(path) < 3:
        raise ValueError("need at least three samples for a centered difference")
    tr_logs = [trace(matrix_log(d, floor)) for d in path]
    worst = 0.0
    for i in range(1, len(path) - 1):
        lhs = (tr_logs[i + 1] - tr_logs[i - 1]) / (2.0 * dt)
        dmat = SymTensor(
            path[i].dim, (path[i + 1].components - path[i - 1].components) / (2.0 * dt)
        )
        rhs = frobenius_inner(inverse(path[i], floor), dmat)
        worst = max(worst, abs(lhs - rhs))
    return worst


def trace_norm_check(a: SymTensor, p: int):
    """Pointwise trace-norm comparison (sum_ij |A_ij|^p, |tr A|^p, d^(p-1) sum).

    For positive semi-definite A and p >= 2 the triple is ordered
    lhs <= mid <= rhs; the upper bound holds for any symmetric A.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    w = component_weights(a.dim)
    entry_sum = float(np.sum(w * np.abs(a.components) ** p))
    mid = abs(trace(a)) ** p
    return entry_sum, mid, a.dim ** (p - 1) * entry_sum


# ---------------------------------------------------------------------------
# Batched helpers for nodal fields, shape (..., ncomp).
# ---------------------------------------------------------------------------

def sym_to_full(comps, dim):
    """Packed components (..., ncomp) -> full matrices (..., d, d)."""
    comps = np.asarray(comps, dtype=float)
    out = np.zeros(comps.shape[:-1] + (dim, dim))
    for k, (i, j) in enumerate(_IDX[dim]):
        out[..., i, j] = comps[..., k]
        out[..., j, i] = comps[..., k]
    return out


def full_to_sym(mats, dim):
    """Full matrices (..., d, d) -> packed components of the symmetric part."""
    mats = np.asarray(mats, dtype=float)
    sym = 0.5 * (mats + np.swapaxes(mats, -1, -2))
    return np.stack([sym[..., i, j] for i, j in _IDX[dim]], axis=-1)


def field_traces(comps, dim):
    return np.asarray(comps)[..., :dim].sum(axis=-1)


def field_min_eigenvalues(comps, dim):
    """Smallest eigenvalue per entry of a packed tensor field (via LAPACK)."""
    return np.linalg.eigvalsh(sym_to_full(comps, dim))[..., 0]


def field_tr_log(comps, dim, floor=SPD_FLOOR):
    """tr(log C) per entry; NonSPDError with the offending index if not SPD."""
    lam = np.linalg.eigvalsh(sym_to_full(comps, dim))
    lam_min = lam[..., 0]
    if lam_min.min() <= floor:
        flat = int(np.argmin(lam_min))
        raise NonSPDError(lam_min.reshape(-1)[flat], vertex=flat)
    return np.log(lam).sum(axis=-1)
