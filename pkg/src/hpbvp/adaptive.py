"""Adaptive damped Newton iteration with automatic hp-refinement.

The driver interleaves two mechanisms.  A prediction-type step size
controller probes the Newton flow with a small auxiliary step and picks the
damping so the explicit Euler discretization of the flow stays within a
prescribed tolerance of the exact trajectory.  After every linearized solve,
the residual estimator splits the error into a linearization part and a
discretization part: while the discretization part dominates, elements are
marked by largest indicators and either bisected or degree-enriched depending
on a local smoothness test of the computed solution; otherwise another Newton
step is taken.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import basis
from .estimator import build_report
from .fem import SingularSystem, assemble, energy_norm, newton_transform, solve
from .mesh import (
    FemFunction,
    HpMesh,
    RefineAction,
    RefinementPlan,
    apply_refinement,
    lincomb,
    transfer,
)
from .problems import SemilinearProblem, homogenize

ZETA_LOWER = math.sqrt(3.0) / (math.sqrt(6.0) + 1.0)


class ProbeSingular(SingularSystem):
    """The auxiliary probe point left the region where the flow is defined."""

    def __init__(self, kappa: float):
        super().__init__("singular system at the step-size probe point")
        self.kappa = kappa


@dataclass(frozen=True)
class NewtonConfig:
    """Parameters of the adaptive driver.

    tau is the flow-tracking tolerance, gamma scales the probe length, theta
    balances linearization against discretization error, dorfler is the bulk
    marking fraction, and zeta the smoothness threshold deciding between
    degree enrichment and bisection.
    """

    tau: float = 0.1
    gamma: float = 0.5
    theta: float = 0.5
    dorfler: float = 0.5
    zeta: float = 0.6
    max_dof: int = 5000
    residual_tol: float = 1e-8
    max_steps: int = 10000

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if not self.gamma > 0.0:
            raise ValueError("gamma must be positive")
        if not self.theta > 0.0:
            raise ValueError("theta must be positive")
        if not 0.0 < self.dorfler < 1.0:
            raise ValueError("dorfler must lie in (0, 1)")
        if not ZETA_LOWER < self.zeta < 1.0:
            raise ValueError(f"zeta must lie in ({ZETA_LOWER:.4f}, 1)")
        if self.max_dof < 1 or self.max_steps < 1:
            raise ValueError("max_dof and max_steps must be positive")


@dataclass
class NewtonState:
    """Snapshot of the iteration: index, previous step size, iterate, mesh."""

    n: int
    kappa: float
    u: FemFunction
    mesh: HpMesh


@dataclass
class RunRecord:
    step: int
    action: str
    dt: float
    n_dof: int
    delta: float
    sum_eta2: float
    total: float
    wall_time: float
    note: str = ""


@dataclass
class RunLog:
    """Ordered records of the adaptive run plus its termination status."""

    records: list[RunRecord] = field(default_factory=list)
    status: str = "converged"


def initial_step(tau: float, nrm0: float) -> float:
    """First damping factor min(sqrt(2*tau/|N(u0)|), 1); 1 at a root."""
    if nrm0 < 0.0:
        raise ValueError("norm must be nonnegative")
    if nrm0 == 0.0:
        return 1.0
    return min(math.sqrt(2.0 * tau / nrm0), 1.0)


def probe_length(gamma: float, kappa: float, nrm: float) -> float:
    """Finite-difference step gamma * kappa / |N(u_n)|^2 for the flow probe."""
    return gamma * kappa / nrm**2


def step_from_probe(tau: float, h: float, diff: float) -> float:
    """Damping min(sqrt(2*tau*h/diff), 1); full step when the flow is locally linear."""
    if diff <= 1e-14:
        return 1.0
    return min(math.sqrt(2.0 * tau * h / diff), 1.0)


def predicted_step(
    state: NewtonState,
    config: NewtonConfig,
    problem: SemilinearProblem,
    mesh: HpMesh,
) -> float:
    """Step size from probing the Newton flow at u_n + h*N(u_n).

    The probe length follows the flow-tracking analysis but is capped so the
    probe offset has unit energy norm; without the cap the offset grows like
    1/|N(u_n)| near a root and leaves the evaluable region of exponential
    nonlinearities.  A singular system at the probe point raises
    :class:`ProbeSingular` so the driver can fall back to halving.
    """
    d1 = newton_transform(problem, mesh, state.u)
    nrm = energy_norm(mesh, d1, problem.epsilon)
    if nrm == 0.0:
        return 1.0
    h = min(probe_length(config.gamma, state.kappa, nrm), 1.0 / nrm)
    probe = lincomb(1.0, state.u, h, d1)
    try:
        d2 = newton_transform(problem, mesh, probe)
    except SingularSystem as exc:
        raise ProbeSingular(state.kappa) from exc
    diff = energy_norm(mesh, lincomb(1.0, d2, -1.0, d1), problem.epsilon)
    if not math.isfinite(diff):
        raise ProbeSingular(state.kappa)
    return step_from_probe(config.tau, h, diff)


def dorfler_mark(eta2: np.ndarray, vartheta: float) -> np.ndarray:
    """Minimal set of elements whose squared indicators reach the bulk fraction.

    Indicators are sorted in descending order with ties broken by lower
    element index; returns the selected indices in ascending order.
    """
    if not 0.0 < vartheta < 1.0:
        raise ValueError("marking fraction must lie in (0, 1)")
    eta2 = np.asarray(eta2, dtype=float)
    total = float(eta2.sum())
    if total <= 0.0:
        return np.empty(0, dtype=int)
    order = np.lexsort((np.arange(eta2.size), -eta2))
    csum = np.cumsum(eta2[order])
    m = int(np.searchsorted(csum, vartheta * total, side="left")) + 1
    m = min(m, eta2.size)
    return np.sort(order[:m])


def smoothness_indicator(u: FemFunction, mesh: HpMesh, j: int) -> float:
    """Analyticity score of u on element j, in [sqrt(3)/(sqrt(6)+1), 1].

    Ratio of the sup norm of the (p-1)-th derivative to its scaled Sobolev
    bound; since that derivative is linear, every norm is evaluated exactly.
    A vanishing derivative counts as perfectly smooth (value 1).
    """
    if u.mesh != mesh:
        raise ValueError("function does not live on the given mesh")
    p = int(mesh.degrees[j])
    h = float(mesh.lengths[j])
    d = basis.legendre_derivative(basis.to_legendre(u, j), p - 1)
    l2, linf, dl2 = basis.local_norms(d)
    if linf == 0.0:
        return 1.0
    denom = l2 / math.sqrt(h) + math.sqrt(h) * dl2 / math.sqrt(2.0)
    if denom == 0.0:
        return 1.0
    return linf / denom


def build_refinement_plan(
    u: FemFunction, mesh: HpMesh, marked: np.ndarray, zeta: float
) -> RefinementPlan:
    """Enrich marked elements where u looks smooth, bisect where it does not."""
    actions = {}
    for j in marked:
        j = int(j)
        if smoothness_indicator(u, mesh, j) >= zeta:
            actions[j] = RefineAction.ENRICH
        else:
            actions[j] = RefineAction.BISECT
    return RefinementPlan(actions)


def run(
    problem: SemilinearProblem,
    config: NewtonConfig,
    u0: FemFunction,
) -> tuple[FemFunction, RunLog]:
    """Fully adaptive Newton-Galerkin iteration.

    Each pass solves the linearized problem with the current step size and
    evaluates the estimator.  When the linearization indicator is dominated
    by the discretization indicators the space is hp-refined and the pass is
    repeated from the transferred solution (same step size, same iteration
    index); otherwise the iterate is accepted and a new step size is
    predicted.  Stops when the total estimate reaches ``residual_tol``, or
    with a flagged log when the refinement would exceed ``max_dof`` or the
    pass budget runs out.
    """
    if (u0.bc_left, u0.bc_right) != (problem.bc_left, problem.bc_right):
        raise ValueError("initial guess boundary values do not match the problem")
    hprob, _ = homogenize(problem)
    mesh = u0.mesh
    w = FemFunction(mesh, u0.coeffs.copy())
    log = RunLog()
    t0 = time.perf_counter()
    n = 0
    kappa = 1.0
    dt = None
    best = w
    for step in range(config.max_steps):
        if dt is None:
            note = ""
            if n == 0:
                d0 = newton_transform(hprob, mesh, w)
                dt = initial_step(config.tau, energy_norm(mesh, d0, hprob.epsilon))
            else:
                try:
                    dt = predicted_step(NewtonState(n, kappa, w, mesh), config, hprob, mesh)
                except ProbeSingular as exc:
                    dt = 0.5 * exc.kappa
                    note = "FALLBACK"
        system = assemble(hprob, mesh, w, dt)
        w_next = solve(system)
        report = build_report(hprob, mesh, w, w_next, dt)
        best = w_next
        sum_eta2 = float(np.sum(report.eta**2))
        refine = report.delta**2 <= config.theta * sum_eta2
        converged = report.total <= config.residual_tol
        action = "NEWTON" if (converged or not refine) else "REFINE"
        record = RunRecord(
            step=step,
            action=action,
            dt=dt,
            n_dof=mesh.dofmap.n_dof,
            delta=report.delta,
            sum_eta2=sum_eta2,
            total=report.total,
            wall_time=time.perf_counter() - t0,
            note=note,
        )
        if converged:
            log.records.append(record)
            log.status = "converged"
            break
        if refine:
            marked = dorfler_mark(report.eta**2, config.dorfler)
            shifted = lincomb(1.0, w_next, -(1.0 - dt), w)
            plan = build_refinement_plan(shifted, mesh, marked, config.zeta)
            new_mesh = apply_refinement(mesh, plan)
            if new_mesh.dofmap.n_dof > config.max_dof:
                record.note = (record.note + " BUDGET").strip()
                log.records.append(record)
                log.status = "budget_exceeded"
                break
            log.records.append(record)
            w = transfer(w_next, mesh, new_mesh)
            mesh = new_mesh
        else:
            log.records.append(record)
            kappa = dt
            dt = None
            w = w_next
            n += 1
    else:
        log.status = "step_limit"
    u = FemFunction(best.mesh, best.coeffs, problem.bc_left, problem.bc_right)
    return u, log


def newton_solve(
    problem: SemilinearProblem,
    mesh: HpMesh,
    u0: FemFunction,
    tol: float = 1e-10,
    max_steps: int = 200,
    config: NewtonConfig | None = None,
) -> FemFunction:
    """Damped Newton iteration on a fixed space, without refinement.

    Used for reference solutions on prescribed meshes; stops once the energy
    norm of the Newton update falls below ``tol``.
    """
    if (u0.bc_left, u0.bc_right) != (problem.bc_left, problem.bc_right):
        raise ValueError("initial guess boundary values do not match the problem")
    config = config or NewtonConfig()
    hprob, _ = homogenize(problem)
    w = FemFunction(mesh, u0.coeffs.copy())
    kappa = 1.0
    for n in range(max_steps):
        d = newton_transform(hprob, mesh, w)
        if energy_norm(mesh, d, hprob.epsilon) <= tol:
            break
        if n == 0:
            dt = initial_step(config.tau, energy_norm(mesh, d, hprob.epsilon))
        else:
            try:
                dt = predicted_step(NewtonState(n, kappa, w, mesh), config, hprob, mesh)
            except ProbeSingular as exc:
                dt = 0.5 * exc.kappa
        w = solve(assemble(hprob, mesh, w, dt))
        kappa = dt
    return FemFunction(mesh, w.coeffs, problem.bc_left, problem.bc_right)
