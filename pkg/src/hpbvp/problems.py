"""Semilinear two-point boundary value problems -eps*u'' = f(x, u).

A problem bundles the diffusion parameter, the nonlinearity and its
u-derivative, the interval, and Dirichlet data.  Nonhomogeneous boundary
values are handled by an affine lift: :func:`homogenize` rewrites the datum
in terms of the homogeneous unknown w = u - lift.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

BUILTIN_NAMES = ("bratu", "ginzburg_landau", "gl", "fisher")


@dataclass(frozen=True)
class SemilinearProblem:
    """Datum of -eps*u'' = f(x, u) on (a, b) with Dirichlet values.

    ``f`` and ``df`` must be pure, vectorized callables of (x, u); ``df`` is
    the partial derivative of f with respect to u.
    """

    epsilon: float
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    df: Callable[[np.ndarray, np.ndarray], np.ndarray]
    a: float = 0.0
    b: float = 1.0
    bc_left: float = 0.0
    bc_right: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.a < self.b:
            raise ValueError(f"need a < b, got ({self.a}, {self.b})")


@dataclass(frozen=True)
class BoundaryLift:
    """Affine function matching prescribed endpoint values exactly."""

    a: float
    b: float
    left: float
    right: float

    def __call__(self, x):
        t = (np.asarray(x, dtype=float) - self.a) / (self.b - self.a)
        return self.left + (self.right - self.left) * t

    @property
    def slope(self) -> float:
        return (self.right - self.left) / (self.b - self.a)


def builtin(name: str, epsilon: float, alpha: float | None = None, beta: float | None = None) -> SemilinearProblem:
    """Benchmark problems on (0, 1).

    ``bratu``  -u'' = exp(u + 1), zero boundary values (epsilon fixed to 1).
    ``gl`` / ``ginzburg_landau``  -eps*u'' = u - u^3, zero boundary values.
    ``fisher``  -eps*u'' = u - u^2 with u(0) = alpha, u(1) = beta; the
    parameters may also be given inline as ``fisher:ALPHA:BETA``.
    """
    if ":" in name:
        parts = name.split(":")
        if parts[0] != "fisher" or len(parts) != 3:
            raise ValueError(f"unknown problem id {name!r}")
        name = "fisher"
        alpha, beta = float(parts[1]), float(parts[2])
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if name == "bratu":
        return SemilinearProblem(
            1.0,
            lambda x, u: np.exp(u + 1.0),
            lambda x, u: np.exp(u + 1.0),
        )
    if name in ("gl", "ginzburg_landau"):
        return SemilinearProblem(
            epsilon,
            lambda x, u: u - u**3,
            lambda x, u: 1.0 - 3.0 * u**2,
        )
    if name == "fisher":
        if alpha is None or beta is None:
            raise ValueError("fisher needs boundary values alpha, beta")
        return SemilinearProblem(
            epsilon,
            lambda x, u: u - u**2,
            lambda x, u: 1.0 - 2.0 * u,
            bc_left=float(alpha),
            bc_right=float(beta),
        )
    raise ValueError(f"unknown problem id {name!r}")


def homogenize(problem: SemilinearProblem) -> tuple[SemilinearProblem, BoundaryLift]:
    """Shift the Dirichlet data into the nonlinearity.

    Returns the zero-boundary-value problem for w = u - lift together with
    the lift; the lift is affine, so no extra diffusion term appears.
    """
    lift = BoundaryLift(problem.a, problem.b, problem.bc_left, problem.bc_right)
    if problem.bc_left == 0.0 and problem.bc_right == 0.0:
        return problem, lift
    f, df = problem.f, problem.df
    shifted = replace(
        problem,
        f=lambda x, w: f(x, w + lift(x)),
        df=lambda x, w: df(x, w + lift(x)),
        bc_left=0.0,
        bc_right=0.0,
    )
    return shifted, lift
