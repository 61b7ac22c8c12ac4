"""Robust a posteriori residual estimation for the damped Newton iterates.

The estimated quantity is the dual residual norm of the shifted iterate
u_{n+1} - (1-dt)*u_n.  It splits into per-element discretization indicators
(weighted interior residual plus weighted derivative jumps at the interior
nodes) and one global linearization indicator measuring the defect between
the linearized nonlinearity and the true one.  The weights are chosen so the
estimate stays robust as the diffusion parameter goes to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial.legendre import legval

from . import basis
from .fem import BandedSystem, _linearized_parts, solve
from .mesh import FemFunction, HpMesh, lincomb
from .problems import SemilinearProblem


@dataclass(frozen=True)
class EstimatorWeights:
    """Per-element weights alpha, beta and per-node jump weights gamma.

    alpha_j = min(h_j^2 / (eps * p_j^2), 1) and
    beta_j = alpha_j / h_j + 2 * sqrt(alpha_j / eps); gamma combines the betas
    of the two elements sharing a node harmonically and vanishes at the
    boundary nodes (gamma has one entry per mesh node).
    """

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray


@dataclass(frozen=True)
class EstimatorReport:
    """Indicators of one adaptive step: eta per element, global delta, total."""

    eta: np.ndarray
    delta: float
    total: float
    weights: EstimatorWeights


def weights(mesh: HpMesh, epsilon: float) -> EstimatorWeights:
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    h = mesh.lengths
    p = mesh.degrees.astype(float)
    alpha = np.minimum(h**2 / (epsilon * p**2), 1.0)
    beta = alpha / h + 2.0 * np.sqrt(alpha / epsilon)
    gamma = np.zeros(mesh.n_elements + 1)
    gamma[1:-1] = beta[:-1] * beta[1:] / (beta[:-1] + beta[1:])
    return EstimatorWeights(alpha, beta, gamma)


def shifted_iterate(u_n: FemFunction, u_np1: FemFunction, dt: float) -> FemFunction:
    """u_{n+1} - (1-dt)*u_n; with a shared lift its boundary values are dt*lift."""
    return lincomb(1.0, u_np1, -(1.0 - dt), u_n)


def _linearized_f_at(problem, xq, un_q, unp1_q, dt):
    """dt*f(x, u_n) + df(x, u_n)*(u_{n+1} - u_n) at quadrature points."""
    fv = np.broadcast_to(np.asarray(problem.f(xq, un_q), float), xq.shape)
    fd = np.broadcast_to(np.asarray(problem.df(xq, un_q), float), xq.shape)
    return dt * fv + fd * (unp1_q - un_q)


def element_indicators(
    problem: SemilinearProblem,
    mesh: HpMesh,
    u_n: FemFunction,
    u_np1: FemFunction,
    dt: float,
    w: EstimatorWeights,
) -> np.ndarray:
    """Per-element indicators eta_j >= 0.

    eta_j^2 collects the alpha-weighted interior residual of the shifted
    iterate and half of the gamma-weighted squared derivative jumps at the
    element's two nodes; boundary nodes contribute nothing.
    """
    if u_n.mesh != mesh or u_np1.mesh != mesh:
        raise ValueError("iterates do not live on the given mesh")
    n = mesh.n_elements
    eps = problem.epsilon
    shifted = shifted_iterate(u_n, u_np1, dt)
    exps = [basis.to_legendre(shifted, j) for j in range(n)]

    # derivative jumps at interior nodes: value from the right minus the left
    jumps = np.zeros(n + 1)
    d1 = [basis.legendre_derivative(e, 1) for e in exps]
    for i in range(1, n):
        left = float(np.sum(d1[i - 1].coeffs))
        right_c = d1[i].coeffs
        signs = np.where(np.arange(right_c.size) % 2 == 0, 1.0, -1.0)
        jumps[i] = float(np.sum(right_c * signs)) - left

    eta2 = np.empty(n)
    for j in range(n):
        p = int(mesh.degrees[j])
        h = float(mesh.lengths[j])
        rule, V, _ = basis.shape_table(p)
        xq = 0.5 * (mesh.nodes[j] + mesh.nodes[j + 1]) + 0.5 * h * rule.points
        un_q = u_n.local_values(j) @ V
        unp1_q = u_np1.local_values(j) @ V
        d2 = basis.legendre_derivative(exps[j], 2)
        resid = _linearized_f_at(problem, xq, un_q, unp1_q, dt) + eps * legval(rule.points, d2.coeffs)
        interior = 0.5 * h * float(np.sum(rule.weights * resid**2))
        eta2[j] = (
            w.alpha[j] * interior
            + 0.5 * eps**2 * (w.gamma[j + 1] * jumps[j + 1] ** 2 + w.gamma[j] * jumps[j] ** 2)
        )
    return np.sqrt(eta2)


def linearization_indicator(
    problem: SemilinearProblem,
    mesh: HpMesh,
    u_n: FemFunction,
    u_np1: FemFunction,
    dt: float,
) -> float:
    """Global L2 norm of the linearization defect of the shifted iterate."""
    if u_n.mesh != mesh or u_np1.mesh != mesh:
        raise ValueError("iterates do not live on the given mesh")
    shifted = shifted_iterate(u_n, u_np1, dt)
    acc = 0.0
    for j in range(mesh.n_elements):
        p = int(mesh.degrees[j])
        h = float(mesh.lengths[j])
        rule, V, _ = basis.shape_table(p)
        xq = 0.5 * (mesh.nodes[j] + mesh.nodes[j + 1]) + 0.5 * h * rule.points
        un_q = u_n.local_values(j) @ V
        unp1_q = u_np1.local_values(j) @ V
        us_q = shifted.local_values(j) @ V
        fs = np.broadcast_to(np.asarray(problem.f(xq, us_q), float), xq.shape)
        defect = _linearized_f_at(problem, xq, un_q, unp1_q, dt) - fs
        acc += 0.5 * h * float(np.sum(rule.weights * defect**2))
    return math.sqrt(acc)


def total_estimate(delta: float, eta: np.ndarray) -> float:
    """Estimated residual (delta^2 + sum eta_j^2)^(1/2)."""
    return float(np.sqrt(delta**2 + np.sum(np.asarray(eta) ** 2)))


def build_report(
    problem: SemilinearProblem,
    mesh: HpMesh,
    u_n: FemFunction,
    u_np1: FemFunction,
    dt: float,
) -> EstimatorReport:
    """All estimator quantities of one step in a single pass."""
    w = weights(mesh, problem.epsilon)
    eta = element_indicators(problem, mesh, u_n, u_np1, dt, w)
    delta = linearization_indicator(problem, mesh, u_n, u_np1, dt)
    return EstimatorReport(eta, delta, total_estimate(delta, eta), w)


def dual_residual_oracle(problem: SemilinearProblem, mesh_fine: HpMesh, u: FemFunction) -> float:
    """Discrete dual norm of the residual of u, used to cross-check estimates.

    Solves the Riesz problem int(eps*r'*v' + r*v) = int(eps*u'*v' - f(x,u)*v)
    for all fine test functions and returns the energy norm of r.  The fine
    mesh should resolve u's mesh (same mesh or a nested refinement); u is
    evaluated pointwise, so no transfer is required.
    """
    if not (mesh_fine.a == u.mesh.a and mesh_fine.b == u.mesh.b):
        raise ValueError("fine mesh covers a different interval")
    riesz = replace(
        problem,
        f=lambda x, v: np.zeros_like(np.asarray(x, float)),
        df=lambda x, v: -np.ones_like(np.asarray(x, float)),
        bc_left=0.0,
        bc_right=0.0,
    )
    zero = FemFunction.zero(mesh_fine)
    band, _, _, pos, kb, norm_inf = _linearized_parts(riesz, mesh_fine, zero)
    _, _, load, _, _, _ = _linearized_parts(problem, mesh_fine, u)
    system = BandedSystem(mesh_fine, band, load, pos, kb, norm_inf, (0.0, 0.0))
    riesz_rep = solve(system)
    value = float(riesz_rep.coeffs @ load[pos])
    return math.sqrt(max(value, 0.0))
