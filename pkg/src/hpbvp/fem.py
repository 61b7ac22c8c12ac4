"""Assembly and direct solution of the Newton-linearized problems.

One damped Newton update on a fixed hp-space solves

    a(u_n; u_{n+1}, v) = a(u_n; u_n, v) - dt * l(u_n; v)   for all test v,

where a(u; w, v) integrates eps*w'*v' - df(x,u)*w*v and l(u; v) integrates
eps*u'*v' - f(x,u)*v.  The matrix is symmetric but possibly indefinite, so
systems are factorized with banded LU and partial pivoting; an interleaved
node/bubble elimination order keeps the half bandwidth at the maximal local
polynomial degree.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from . import basis
from .mesh import FemFunction, HpMesh
from .problems import SemilinearProblem

PIVOT_RTOL = 1e-14
RESIDUAL_RTOL = 1e-10


class SingularSystem(RuntimeError):
    """The linearized operator is (numerically) not invertible."""


def _band_layout(mesh: HpMesh) -> tuple[np.ndarray, int]:
    """Elimination order interleaving each element's bubbles with its right node."""
    dm = mesh.dofmap
    pos = np.empty(dm.n_dof, dtype=int)
    k = 0
    for j in range(mesh.n_elements):
        dofs = dm.element_dofs[j]
        for d in dofs[2:]:
            pos[d] = k
            k += 1
        if dofs[1] >= 0:
            pos[dofs[1]] = k
            k += 1
    kb = 0
    for j in range(mesh.n_elements):
        dofs = dm.element_dofs[j]
        free = dofs[dofs >= 0]
        if free.size >= 2:
            pk = pos[free]
            kb = max(kb, int(pk.max() - pk.min()))
    return pos, kb


class BandedSystem:
    """Linearized system in LAPACK band storage.

    Rows and columns correspond to the mesh's DOF numbering; internally the
    unknowns are permuted to the banded elimination order.  ``rhs`` and
    ``to_dense`` present the system in DOF numbering.
    """

    def __init__(self, mesh, band, rhs_band, pos, kb, norm_inf, bc):
        self.mesh = mesh
        self.dofmap = mesh.dofmap
        self._band = band
        self._rhs_band = rhs_band
        self._pos = pos
        self.kb = kb
        self.norm_inf = norm_inf
        self.bc = bc

    @property
    def n(self) -> int:
        return self.dofmap.n_dof

    @property
    def rhs(self) -> np.ndarray:
        return self._rhs_band[self._pos].copy()

    def to_dense(self) -> np.ndarray:
        n, kb = self.n, self.kb
        dense = np.zeros((n, n))
        for off in range(-kb, kb + 1):
            cols = np.arange(n)
            keep = (cols + off >= 0) & (cols + off < n)
            dense[cols[keep] + off, cols[keep]] = self._band[2 * kb + off, cols[keep]]
        return dense[np.ix_(self._pos, self._pos)]


def _eval_coeff(func, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(func(x, u), dtype=float), x.shape)


def _linearized_parts(problem: SemilinearProblem, mesh: HpMesh, u: FemFunction):
    """Element loop shared by the Newton-step and Newton-transform systems.

    Returns band storage of A[i][k] = int eps*phi_k'*phi_i' - df(x,u)*phi_k*phi_i,
    the vector A applied to u's own coefficients (including lift columns), the
    residual vector r[i] = int eps*u'*phi_i' - f(x,u)*phi_i, the band layout,
    and the matrix infinity norm.  When u lives on a different (coarser) mesh
    it is evaluated pointwise and the A*u vector is not available.
    """
    dm = mesh.dofmap
    pos, kb = _band_layout(mesh)
    n = dm.n_dof
    band = np.zeros((3 * kb + 1, max(n, 1)))
    aun = np.zeros(n)
    rvec = np.zeros(n)
    eps = problem.epsilon
    same_mesh = u.mesh == mesh
    for j in range(mesh.n_elements):
        p = int(mesh.degrees[j])
        h = float(mesh.lengths[j])
        rule, V, D = basis.shape_table(p)
        xq = 0.5 * (mesh.nodes[j] + mesh.nodes[j + 1]) + 0.5 * h * rule.points
        if same_mesh:
            loc = u.local_values(j)
            uq = loc @ V
            duq = (loc @ D) * (2.0 / h)
        else:
            loc = None
            uq = u(xq)
            duq = u.derivative(xq)
        fv = _eval_coeff(problem.f, xq, uq)
        fd = _eval_coeff(problem.df, xq, uq)
        w2 = rule.weights * (0.5 * h)
        aloc = (D * (w2 * eps * 4.0 / (h * h))) @ D.T - (V * (w2 * fd)) @ V.T
        aloc = np.triu(aloc) + np.triu(aloc, 1).T
        rloc = D @ (w2 * duq * eps * 2.0 / h) - V @ (w2 * fv)
        dofs = dm.element_dofs[j]
        lf = np.flatnonzero(dofs >= 0)
        if lf.size == 0:
            continue
        pg = pos[dofs[lf]]
        sub = aloc[np.ix_(lf, lf)]
        for a in range(lf.size):
            band[2 * kb + pg - pg[a], pg[a]] += sub[:, a]
        if same_mesh:
            aun[pg] += aloc[lf, :] @ loc
        rvec[pg] += rloc[lf]
    norm_inf = _band_norm_inf(band, kb, n)
    return band, aun, rvec, pos, kb, norm_inf


def _band_norm_inf(band: np.ndarray, kb: int, n: int) -> float:
    if n == 0:
        return 0.0
    rows = np.zeros(n)
    cols = np.arange(n)
    for off in range(-kb, kb + 1):
        keep = (cols + off >= 0) & (cols + off < n)
        rows[cols[keep] + off] += np.abs(band[2 * kb + off, cols[keep]])
    return float(rows.max())


def _band_matvec(band: np.ndarray, kb: int, x: np.ndarray) -> np.ndarray:
    n = x.size
    y = np.zeros(n)
    cols = np.arange(n)
    for off in range(-kb, kb + 1):
        keep = (cols + off >= 0) & (cols + off < n)
        y[cols[keep] + off] += band[2 * kb + off, cols[keep]] * x[cols[keep]]
    return y


def assemble(problem: SemilinearProblem, mesh: HpMesh, u_n: FemFunction, dt: float) -> BandedSystem:
    """System whose solution is the next damped Newton iterate on this space."""
    if u_n.mesh != mesh:
        raise ValueError("iterate does not live on the given mesh")
    if not 0.0 < dt <= 1.0:
        raise ValueError(f"step size must lie in (0, 1], got {dt}")
    band, aun, rvec, pos, kb, norm_inf = _linearized_parts(problem, mesh, u_n)
    return BandedSystem(mesh, band, aun - dt * rvec, pos, kb, norm_inf, (u_n.bc_left, u_n.bc_right))


def solve(system: BandedSystem) -> FemFunction:
    """Direct banded LU solve with partial pivoting.

    Raises :class:`SingularSystem` when a pivot falls below
    ``PIVOT_RTOL * norm(A)``, when the factorization breaks down, or when the
    assembled entries are not finite (an iterate left the evaluable region).
    """
    n = system.n
    if n == 0:
        return FemFunction(system.mesh, np.zeros(0), *system.bc)
    band, rhs, kb = system._band, system._rhs_band, system.kb
    if not (np.all(np.isfinite(band)) and np.all(np.isfinite(rhs))):
        raise SingularSystem("non-finite entries in the linearized system")
    lu, ipiv, info = lapack.dgbtrf(band, kl=kb, ku=kb)
    if info != 0:
        raise SingularSystem(f"banded LU factorization failed (info={info})")
    udiag = np.abs(lu[2 * kb, :n])
    if udiag.min() < PIVOT_RTOL * max(system.norm_inf, np.finfo(float).tiny):
        raise SingularSystem("pivot below singularity threshold")
    x, info = lapack.dgbtrs(lu, kb, kb, rhs, ipiv)
    if info != 0:
        raise SingularSystem(f"banded back substitution failed (info={info})")
    resid = np.abs(_band_matvec(band, kb, x) - rhs).max()
    bound = RESIDUAL_RTOL * (
        system.norm_inf * np.abs(x).max() + np.abs(rhs).max() + np.finfo(float).tiny
    )
    if resid > bound:
        raise SingularSystem(f"solve residual {resid:.3e} exceeds {bound:.3e}")
    return FemFunction(system.mesh, x[system._pos], *system.bc)


def newton_transform(problem: SemilinearProblem, mesh: HpMesh, u: FemFunction) -> FemFunction:
    """Newton direction: solve A*d = -r for the current residual r.

    The returned update has zero boundary values, so u + d keeps u's lift.
    """
    if u.mesh != mesh:
        raise ValueError("iterate does not live on the given mesh")
    band, _, rvec, pos, kb, norm_inf = _linearized_parts(problem, mesh, u)
    system = BandedSystem(mesh, band, -rvec, pos, kb, norm_inf, (0.0, 0.0))
    return solve(system)


def energy_norm(mesh: HpMesh, u: FemFunction, epsilon: float) -> float:
    """(eps*||u'||^2 + ||u||^2)^(1/2), exact via elementwise Legendre expansions."""
    if u.mesh != mesh:
        raise ValueError("function does not live on the given mesh")
    acc_val = 0.0
    acc_der = 0.0
    for j in range(mesh.n_elements):
        e = basis.to_legendre(u, j)
        l2, _, dl2 = basis.local_norms(e)
        acc_val += l2 * l2
        acc_der += dl2 * dl2
    return float(np.sqrt(epsilon * acc_der + acc_val))
