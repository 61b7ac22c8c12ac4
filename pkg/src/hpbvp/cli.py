"""Command line front end.

Selects a benchmark problem and driver parameters, runs the adaptive solver,
and writes machine-readable logs plus optional SVG figures:

    run.jsonl      one JSON object per adaptive step with keys
                   step, action, dt, n_dof, delta, sum_eta2, total
                   (and note, when a step carries one); floats use 17
                   significant digits so identical configurations produce
                   byte-identical files
    estimator.csv  step, n_dof, delta2, sum_eta2, total
    mesh.csv       j, x_left, x_right, p_j of the final mesh
    solution.csv   x, u(x) at 10 uniform points per element
    config.json    the resolved run configuration (round-trips to RunConfig)
    residual.svg, mesh.svg   with --svg
"""

from __future__ import annotations

import argparse
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import basis
from .adaptive import NewtonConfig, RunLog, run
from .mesh import FemFunction, HpMesh, dump_mesh_csv, interpolate_linear, uniform_mesh
from .problems import SemilinearProblem, builtin


@dataclass(frozen=True)
class InitialGuessSpec:
    """Initial iterate: zero, the bump 10x(1-x), nodal values from a file,
    or an explicit nodal value list."""

    kind: str  # "zero" | "bump" | "file" | "nodes"
    path: str = ""
    values: tuple[float, ...] = ()

    @classmethod
    def parse(cls, text: str) -> "InitialGuessSpec":
        if text == "zero":
            return cls("zero")
        if text == "bump":
            return cls("bump")
        if text.startswith("file:"):
            return cls("file", path=text[5:])
        raise ValueError(f"unknown initial guess {text!r}")


@dataclass(frozen=True)
class RunConfig:
    """Complete, serializable description of one solver run."""

    problem: str
    epsilon: float = 1.0
    tau: float = 0.1
    gamma: float = 0.5
    theta: float = 0.5
    dorfler: float = 0.5
    zeta: float = 0.6
    elements: int = 10
    degree: int = 1
    guess: str = "zero"
    max_dof: int = 5000
    tol: float = 1e-8
    out: str = "out"
    emit_log: bool = True
    emit_mesh: bool = True
    emit_solution: bool = True
    emit_svg: bool = False

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls(**json.loads(text))

    def newton_config(self) -> NewtonConfig:
        return NewtonConfig(
            tau=self.tau,
            gamma=self.gamma,
            theta=self.theta,
            dorfler=self.dorfler,
            zeta=self.zeta,
            max_dof=self.max_dof,
            residual_tol=self.tol,
        )


def parse_cli(argv=None) -> RunConfig:
    """Parse command line flags; exits with the usage text on bad input."""
    ap = argparse.ArgumentParser(
        prog="hpbvp",
        description="hp-adaptive Newton-Galerkin solver for -eps*u'' = f(x, u)",
    )
    ap.add_argument("--problem", required=True, help="bratu | gl | fisher:ALPHA:BETA")
    ap.add_argument("--epsilon", type=float, default=1.0, help="diffusion parameter")
    ap.add_argument("--tau", type=float, default=0.1, help="step-size prediction tolerance")
    ap.add_argument("--gamma", type=float, default=0.5, help="probe length scaling")
    ap.add_argument("--theta", type=float, default=0.5, help="refine/iterate balance")
    ap.add_argument("--dorfler", type=float, default=0.5, help="bulk marking fraction")
    ap.add_argument("--zeta", type=float, default=0.6, help="smoothness threshold")
    ap.add_argument("--elements", type=int, default=10, help="initial mesh elements")
    ap.add_argument("--degree", type=int, default=1, help="initial polynomial degree")
    ap.add_argument("--guess", default="zero", help="zero | bump | file:PATH")
    ap.add_argument("--max-dof", type=int, default=5000, help="degree-of-freedom budget")
    ap.add_argument("--tol", type=float, default=1e-8, help="residual stopping tolerance")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--svg", action="store_true", help="also write residual.svg and mesh.svg")
    ns = ap.parse_args(argv)
    InitialGuessSpec.parse(ns.guess)  # fail early on malformed guess
    return RunConfig(
        problem=ns.problem,
        epsilon=ns.epsilon,
        tau=ns.tau,
        gamma=ns.gamma,
        theta=ns.theta,
        dorfler=ns.dorfler,
        zeta=ns.zeta,
        elements=ns.elements,
        degree=ns.degree,
        guess=ns.guess,
        max_dof=ns.max_dof,
        tol=ns.tol,
        out=ns.out,
        emit_svg=ns.svg,
    )


def build_initial_guess(spec: InitialGuessSpec, mesh: HpMesh, problem: SemilinearProblem) -> FemFunction:
    """Realize an initial guess on the mesh, with the problem's boundary values."""
    if spec.kind == "zero":
        return FemFunction.zero(mesh, problem.bc_left, problem.bc_right)
    if spec.kind == "bump":
        vals = 10.0 * mesh.nodes * (1.0 - mesh.nodes)
        vals[0], vals[-1] = problem.bc_left, problem.bc_right
        return interpolate_linear(mesh, vals)
    if spec.kind == "file":
        vals = np.loadtxt(spec.path, ndmin=1)
    elif spec.kind == "nodes":
        vals = np.asarray(spec.values, dtype=float)
    else:
        raise ValueError(f"unknown guess kind {spec.kind!r}")
    if vals.shape != mesh.nodes.shape:
        raise ValueError(
            f"initial guess has {vals.size} nodal values, mesh has {mesh.nodes.size} nodes"
        )
    if vals[0] != problem.bc_left or vals[-1] != problem.bc_right:
        raise ValueError("initial guess endpoints differ from the boundary values")
    return interpolate_linear(mesh, vals)


def _g(v: float) -> str:
    return format(v, ".17g")


def _record_json(rec) -> str:
    fields = (
        f'"step": {rec.step}, "action": "{rec.action}", "dt": {_g(rec.dt)}, '
        f'"n_dof": {rec.n_dof}, "delta": {_g(rec.delta)}, '
        f'"sum_eta2": {_g(rec.sum_eta2)}, "total": {_g(rec.total)}'
    )
    if rec.note:
        fields += f', "note": "{rec.note}"'
    return "{" + fields + "}"


def emit_outputs(log: RunLog, solution: FemFunction, mesh: HpMesh, config: RunConfig) -> list[Path]:
    """Write the run artifacts into the configured output directory."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, writer) -> None:
        path = out / name
        try:
            writer(path)
        except OSError as exc:
            raise OSError(f"failed writing {path}: {exc}") from exc
        written.append(path)

    if config.emit_log:
        def write_log(path):
            with open(path, "w", encoding="utf-8") as fh:
                for rec in log.records:
                    fh.write(_record_json(rec) + "\n")
        emit("run.jsonl", write_log)

        def write_est(path):
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("step,n_dof,delta2,sum_eta2,total\n")
                for rec in log.records:
                    fh.write(
                        f"{rec.step},{rec.n_dof},{_g(rec.delta**2)},"
                        f"{_g(rec.sum_eta2)},{_g(rec.total)}\n"
                    )
        emit("estimator.csv", write_est)

    if config.emit_mesh:
        emit("mesh.csv", lambda path: dump_mesh_csv(mesh, path))

    if config.emit_solution:
        def write_solution(path):
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("x,u\n")
                for j in range(mesh.n_elements):
                    xs = np.linspace(mesh.nodes[j], mesh.nodes[j + 1], 10)
                    xi = 2.0 * (xs - mesh.nodes[j]) / mesh.lengths[j] - 1.0
                    values, _ = basis.eval_shape(int(mesh.degrees[j]), xi)
                    us = solution.local_values(j) @ values
                    for x, u in zip(xs, us):
                        fh.write(f"{_g(x)},{_g(u)}\n")
        emit("solution.csv", write_solution)

    emit("config.json", lambda path: path.write_text(config.to_json(), encoding="utf-8"))

    if config.emit_svg:
        from . import plots

        emit("residual.svg", lambda path: plots.save_residual_svg(log, path))
        emit("mesh.svg", lambda path: plots.save_mesh_svg(mesh, path))
    return written


def main(argv=None) -> int:
    config = parse_cli(argv)
    problem = builtin(config.problem, config.epsilon)
    mesh = uniform_mesh(problem.a, problem.b, config.elements, config.degree)
    guess = build_initial_guess(InitialGuessSpec.parse(config.guess), mesh, problem)
    solution, log = run(problem, config.newton_config(), guess)
    paths = emit_outputs(log, solution, solution.mesh, config)
    last = log.records[-1]
    print(
        f"{config.problem}: {log.status} after {len(log.records)} steps, "
        f"n_dof={last.n_dof}, estimated residual={last.total:.3e}"
    )
    for path in paths:
        print(f"  wrote {path}")
    return 0 if log.status == "converged" else 1


if __name__ == "__main__":
    raise SystemExit(main())
