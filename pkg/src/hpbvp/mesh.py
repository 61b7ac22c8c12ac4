"""1D hp-meshes, global degree-of-freedom maps, and finite element functions.

A mesh is an ordered partition of an interval together with one polynomial
degree per element.  Conforming H1 trial functions carry one coefficient per
interior node plus, on every element, one coefficient per bubble mode; the
two boundary values are kept separately as an affine lift so the coefficient
space itself stays homogeneous.  All types are immutable values; refinement
produces new meshes and transfers are exact re-expansions, never samples.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from . import basis


class HpMesh:
    """Partition of (a, b) with per-element polynomial degrees."""

    def __init__(self, nodes: Iterable[float], degrees: Iterable[int]):
        nodes = np.array(nodes, dtype=float)
        degrees = np.array(degrees, dtype=int)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("need at least two mesh nodes")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("mesh nodes must be strictly increasing")
        if degrees.shape != (nodes.size - 1,):
            raise ValueError("need exactly one degree per element")
        if np.any(degrees < 1):
            raise ValueError("polynomial degrees must be >= 1")
        nodes.setflags(write=False)
        degrees.setflags(write=False)
        self.nodes = nodes
        self.degrees = degrees

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_elements(self) -> int:
        return self.degrees.size

    @cached_property
    def lengths(self) -> np.ndarray:
        h = np.diff(self.nodes)
        h.setflags(write=False)
        return h

    @cached_property
    def dofmap(self) -> "DofMap":
        return build_dof_map(self)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, HpMesh)
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.degrees, other.degrees)
        )

    __hash__ = None  # mutable-array payload; identity hashing would mislead

    def __repr__(self) -> str:
        return (
            f"HpMesh(N={self.n_elements}, ({self.a:g}, {self.b:g}), "
            f"p_max={int(self.degrees.max())})"
        )


@dataclass(frozen=True)
class DofMap:
    """Global numbering of the free (homogeneous) degrees of freedom.

    ``element_dofs[j]`` lists the global indices of element j in local order
    [left node, right node, bubbles in increasing mode]; boundary nodes carry
    index -1.  Interior nodes are numbered first in ascending position, then
    all bubbles in ascending element and mode order.
    """

    element_dofs: tuple[np.ndarray, ...]
    n_dof: int


def build_dof_map(mesh: HpMesh) -> DofMap:
    """Deterministic global DOF numbering for the homogeneous trial space."""
    n = mesh.n_elements
    offset = n - 1
    elem_dofs = []
    for j in range(n):
        p = int(mesh.degrees[j])
        dofs = np.empty(p + 1, dtype=int)
        dofs[0] = j - 1 if j > 0 else -1
        dofs[1] = j if j < n - 1 else -1
        dofs[2:] = offset + np.arange(p - 1)
        offset += p - 1
        dofs.setflags(write=False)
        elem_dofs.append(dofs)
    return DofMap(tuple(elem_dofs), offset)


def uniform_mesh(a: float, b: float, n_elements: int, degree: int) -> HpMesh:
    """Mesh of equal elements covering (a, b), all with the same degree."""
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if n_elements < 1:
        raise ValueError("need at least one element")
    if degree < 1:
        raise ValueError("polynomial degree must be >= 1")
    return HpMesh(np.linspace(a, b, n_elements + 1), np.full(n_elements, degree))


class RefineAction(enum.Enum):
    BISECT = "BISECT"
    ENRICH = "ENRICH"


@dataclass(frozen=True)
class RefinementPlan:
    """Marked elements with their refinement action, each element at most once."""

    actions: Mapping[int, RefineAction]

    def __len__(self) -> int:
        return len(self.actions)


def apply_refinement(mesh: HpMesh, plan: RefinementPlan) -> HpMesh:
    """Execute a plan: BISECT splits at the element midpoint keeping the
    degree on both children, ENRICH raises the degree by one."""
    for j in plan.actions:
        if not 0 <= j < mesh.n_elements:
            raise ValueError(f"element index {j} out of range")
    nodes: list[float] = [mesh.nodes[0]]
    degrees: list[int] = []
    for j in range(mesh.n_elements):
        action = plan.actions.get(j)
        p = int(mesh.degrees[j])
        if action is RefineAction.BISECT:
            mid = 0.5 * (mesh.nodes[j] + mesh.nodes[j + 1])
            nodes.extend([mid, mesh.nodes[j + 1]])
            degrees.extend([p, p])
        elif action is RefineAction.ENRICH:
            nodes.append(mesh.nodes[j + 1])
            degrees.append(p + 1)
        else:
            nodes.append(mesh.nodes[j + 1])
            degrees.append(p)
    return HpMesh(nodes, degrees)


def uniform_refinement(mesh: HpMesh, bisections: int = 2, degree_increment: int = 2) -> HpMesh:
    """Globally refined companion mesh (used by the residual oracle)."""
    out = mesh
    for _ in range(bisections):
        plan = RefinementPlan({j: RefineAction.BISECT for j in range(out.n_elements)})
        out = apply_refinement(out, plan)
    for _ in range(degree_increment):
        plan = RefinementPlan({j: RefineAction.ENRICH for j in range(out.n_elements)})
        out = apply_refinement(out, plan)
    return out


class FemFunction:
    """Continuous piecewise polynomial: free coefficients plus an affine lift.

    ``coeffs`` follows the mesh's DOF numbering; the function value is the
    coefficient expansion plus the affine interpolant of (bc_left, bc_right).
    """

    def __init__(self, mesh: HpMesh, coeffs: np.ndarray, bc_left: float = 0.0, bc_right: float = 0.0):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (mesh.dofmap.n_dof,):
            raise ValueError(
                f"coefficient vector has length {coeffs.size}, expected {mesh.dofmap.n_dof}"
            )
        self.mesh = mesh
        self.coeffs = coeffs
        self.bc_left = float(bc_left)
        self.bc_right = float(bc_right)

    @classmethod
    def zero(cls, mesh: HpMesh, bc_left: float = 0.0, bc_right: float = 0.0) -> "FemFunction":
        return cls(mesh, np.zeros(mesh.dofmap.n_dof), bc_left, bc_right)

    def lift_at(self, x) -> np.ndarray:
        a, b = self.mesh.a, self.mesh.b
        return self.bc_left + (self.bc_right - self.bc_left) * (np.asarray(x, float) - a) / (b - a)

    def local_values(self, j: int) -> np.ndarray:
        """Total local shape coefficients [v_left, v_right, bubbles...] on element j."""
        dofs = self.mesh.dofmap.element_dofs[j]
        out = np.empty(dofs.size)
        out[0] = self.coeffs[dofs[0]] if dofs[0] >= 0 else 0.0
        out[1] = self.coeffs[dofs[1]] if dofs[1] >= 0 else 0.0
        out[0] += float(self.lift_at(self.mesh.nodes[j]))
        out[1] += float(self.lift_at(self.mesh.nodes[j + 1]))
        out[2:] = self.coeffs[dofs[2:]]
        return out

    def _locate(self, x: np.ndarray) -> np.ndarray:
        e = np.searchsorted(self.mesh.nodes, x, side="right") - 1
        return np.clip(e, 0, self.mesh.n_elements - 1)

    def __call__(self, x):
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        elems = self._locate(x)
        out = np.empty_like(x)
        for j in np.unique(elems):
            mask = elems == j
            xl = self.mesh.nodes[j]
            h = self.mesh.lengths[j]
            xi = 2.0 * (x[mask] - xl) / h - 1.0
            values, _ = basis.eval_shape(int(self.mesh.degrees[j]), xi)
            out[mask] = self.local_values(j) @ values
        return out[0] if scalar else out

    def derivative(self, x):
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        elems = self._locate(x)
        out = np.empty_like(x)
        for j in np.unique(elems):
            mask = elems == j
            xl = self.mesh.nodes[j]
            h = self.mesh.lengths[j]
            xi = 2.0 * (x[mask] - xl) / h - 1.0
            _, derivs = basis.eval_shape(int(self.mesh.degrees[j]), xi)
            out[mask] = (self.local_values(j) @ derivs) * (2.0 / h)
        return out[0] if scalar else out


def lincomb(ca: float, u: FemFunction, cb: float, v: FemFunction) -> FemFunction:
    """ca*u + cb*v, combining coefficients and boundary lifts alike."""
    if u.mesh != v.mesh:
        raise ValueError("mesh mismatch in linear combination")
    return FemFunction(
        u.mesh,
        ca * u.coeffs + cb * v.coeffs,
        ca * u.bc_left + cb * v.bc_left,
        ca * u.bc_right + cb * v.bc_right,
    )


def interpolate_linear(mesh: HpMesh, node_values: Iterable[float]) -> FemFunction:
    """Piecewise linear interpolant of prescribed nodal values.

    Endpoint values become the boundary lift; interior nodal coefficients are
    taken relative to it so the coefficient vector stays homogeneous.
    """
    vals = np.asarray(list(node_values), dtype=float)
    if vals.shape != mesh.nodes.shape:
        raise ValueError(
            f"got {vals.size} nodal values for a mesh with {mesh.nodes.size} nodes"
        )
    u = FemFunction.zero(mesh, vals[0], vals[-1])
    coeffs = u.coeffs.copy()
    n = mesh.n_elements
    coeffs[: n - 1] = vals[1:-1] - u.lift_at(mesh.nodes[1:-1])
    return FemFunction(mesh, coeffs, vals[0], vals[-1])


def _match_elements(old: HpMesh, new: HpMesh) -> list[tuple]:
    """Pair each old element with its image: ('same', j) or ('split', jl, jr)."""
    relation: list[tuple] = []
    jn = 0
    for jo in range(old.n_elements):
        xl, xr = old.nodes[jo], old.nodes[jo + 1]
        if jn >= new.n_elements or new.nodes[jn] != xl:
            raise ValueError("meshes are not in refinement relation")
        if new.nodes[jn + 1] == xr:
            if new.degrees[jn] < old.degrees[jo]:
                raise ValueError("refined mesh lowers a polynomial degree")
            relation.append(("same", jn))
            jn += 1
        elif (
            jn + 2 <= new.n_elements
            and new.nodes[jn + 1] == 0.5 * (xl + xr)
            and new.nodes[jn + 2] == xr
        ):
            if min(new.degrees[jn], new.degrees[jn + 1]) < old.degrees[jo]:
                raise ValueError("refined mesh lowers a polynomial degree")
            relation.append(("split", jn, jn + 1))
            jn += 2
        else:
            raise ValueError("meshes are not in refinement relation")
    if jn != new.n_elements:
        raise ValueError("meshes are not in refinement relation")
    return relation


def transfer(u: FemFunction, old: HpMesh, new: HpMesh) -> FemFunction:
    """Re-expand u exactly on a refined mesh.

    Bisection children and enriched elements contain the old local polynomial
    space, so the result is pointwise identical to u.
    """
    if u.mesh != old:
        raise ValueError("function does not live on the source mesh")
    relation = _match_elements(old, new)
    dm = new.dofmap
    coeffs = np.zeros(dm.n_dof)
    out = FemFunction(new, coeffs, u.bc_left, u.bc_right)

    def scatter(j_new: int, legendre_coeffs: np.ndarray) -> None:
        p_new = int(new.degrees[j_new])
        padded = np.zeros(p_new + 1)
        padded[: legendre_coeffs.size] = legendre_coeffs
        loc = basis.shape_from_legendre(padded)
        dofs = dm.element_dofs[j_new]
        if dofs[0] >= 0:
            coeffs[dofs[0]] = loc[0] - float(out.lift_at(new.nodes[j_new]))
        if dofs[1] >= 0:
            coeffs[dofs[1]] = loc[1] - float(out.lift_at(new.nodes[j_new + 1]))
        coeffs[dofs[2:]] = loc[2:]

    for jo, entry in enumerate(relation):
        exp = basis.to_legendre(u, jo)
        if entry[0] == "same":
            scatter(entry[1], exp.coeffs)
        else:
            scatter(entry[1], basis.split_expansion(exp.coeffs, 0))
            scatter(entry[2], basis.split_expansion(exp.coeffs, 1))
    return FemFunction(new, coeffs, u.bc_left, u.bc_right)


def shape_regularity(mesh: HpMesh) -> float:
    """Smallest bound mu >= 1 on neighboring size and degree ratios."""
    if mesh.n_elements == 1:
        return 1.0
    h = mesh.lengths
    p = mesh.degrees.astype(float)
    rh = h[1:] / h[:-1]
    rp = p[1:] / p[:-1]
    ratios = np.concatenate([rh, 1.0 / rh, rp, 1.0 / rp])
    return max(1.0, float(ratios.max()))


def dump_mesh_csv(mesh: HpMesh, path) -> None:
    """Write one row per element: j, x_left, x_right, p_j."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("j,x_left,x_right,p_j\n")
        for j in range(mesh.n_elements):
            fh.write(
                f"{j},{format(mesh.nodes[j], '.17g')},"
                f"{format(mesh.nodes[j + 1], '.17g')},{int(mesh.degrees[j])}\n"
            )
