"""Reference-element machinery.

Gauss-Legendre quadrature, hierarchic shape functions (two nodal hats plus
integrated-Legendre bubbles), and exact local Legendre expansions with
recurrence-based differentiation.  Everything here lives on the reference
interval (-1, 1); physical scaling enters only through the element length
stored on a :class:`LocalExpansion`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np
from numpy.polynomial.legendre import legval

if TYPE_CHECKING:
    from .mesh import FemFunction


@dataclass(frozen=True)
class QuadRule:
    """Gauss-Legendre rule on (-1, 1): exact for polynomials of degree <= 2n-1."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class LocalExpansion:
    """Polynomial on one element, stored as Legendre coefficients.

    ``coeffs[k]`` multiplies the k-th Legendre polynomial in the reference
    coordinate; ``h`` is the physical element length, needed to scale
    derivatives and norms.
    """

    element: int
    coeffs: np.ndarray
    h: float

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, xi):
        return legval(xi, self.coeffs)


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> QuadRule:
    """n-point Gauss-Legendre rule, nodes symmetric about 0.

    Roots of the degree-n Legendre polynomial are located by Newton iteration
    from the Chebyshev initial guess, converged to 1e-15; weights follow from
    the derivative values.  Results are cached and returned read-only.
    """
    if n < 1:
        raise ValueError(f"quadrature order must be >= 1, got {n}")
    pts = np.empty(n)
    wts = np.empty(n)
    m = (n + 1) // 2
    for i in range(1, m + 1):
        if n % 2 == 1 and i == m:
            z = 0.0
        else:
            z = math.cos(math.pi * (i - 0.25) / (n + 0.5))
            for _ in range(100):
                p0, p1 = 1.0, z
                for k in range(1, n):
                    p0, p1 = p1, ((2 * k + 1) * z * p1 - k * p0) / (k + 1)
                # p1 = P_n(z), p0 = P_{n-1}(z)
                dp = n * (z * p1 - p0) / (z * z - 1.0)
                dz = p1 / dp
                z -= dz
                if abs(dz) <= 1e-15:
                    break
        p0, p1 = 1.0, z
        for k in range(1, n):
            p0, p1 = p1, ((2 * k + 1) * z * p1 - k * p0) / (k + 1)
        if z == 0.0:
            dp = n * (0.0 * p1 - p0) / (-1.0)
        else:
            dp = n * (z * p1 - p0) / (z * z - 1.0)
        w = 2.0 / ((1.0 - z * z) * dp * dp)
        pts[i - 1], wts[i - 1] = -z, w
        pts[n - i], wts[n - i] = z, w
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadRule(pts, wts)


def quad_order(p: int) -> int:
    """Points used for element integrals on a degree-p element.

    Exact for the polynomial parts of the linearized forms and over-resolving
    for smooth nonlinear integrands.
    """
    return max(p + 3, (3 * p + 2) // 2)


def legendre_table(p: int, xi: np.ndarray) -> np.ndarray:
    """Values of the Legendre polynomials 0..p at the points xi, shape (p+1, m)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    tab = np.empty((p + 1, xi.size))
    tab[0] = 1.0
    if p >= 1:
        tab[1] = xi
    for k in range(1, p):
        tab[k + 1] = ((2 * k + 1) * xi * tab[k] - k * tab[k - 1]) / (k + 1)
    return tab


def legendre_deriv_table(p: int, xi: np.ndarray) -> np.ndarray:
    """Derivatives of the Legendre polynomials 0..p at xi (reference coordinate)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    val = legendre_table(p, xi)
    der = np.empty_like(val)
    der[0] = 0.0
    if p >= 1:
        der[1] = 1.0
    for k in range(1, p):
        der[k + 1] = der[k - 1] + (2 * k + 1) * val[k]
    return der


def eval_shape(p: int, xi) -> tuple[np.ndarray, np.ndarray]:
    """Shape functions and reference derivatives on a degree-p element.

    Ordering: hat at the left node, hat at the right node, then the p-1
    integrated-Legendre bubbles, which vanish at both endpoints.  Returns
    arrays of shape (p+1,) for scalar input and (p+1, m) for vector input.
    """
    if p < 1:
        raise ValueError(f"polynomial degree must be >= 1, got {p}")
    scalar = np.ndim(xi) == 0
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    P = legendre_table(p, xi)
    values = np.empty((p + 1, xi.size))
    derivs = np.empty((p + 1, xi.size))
    values[0] = 0.5 * (1.0 - xi)
    values[1] = 0.5 * (1.0 + xi)
    derivs[0] = -0.5
    derivs[1] = 0.5
    for k in range(2, p + 1):
        s = 1.0 / math.sqrt(4 * k - 2)
        values[k] = s * (P[k] - P[k - 2])
        derivs[k] = math.sqrt((2 * k - 1) / 2.0) * P[k - 1]
    if scalar:
        return values[:, 0], derivs[:, 0]
    return values, derivs


@lru_cache(maxsize=None)
def shape_table(p: int) -> tuple[QuadRule, np.ndarray, np.ndarray]:
    """Shape values and derivatives tabulated at the standard rule for degree p."""
    rule = gauss_rule(quad_order(p))
    V, D = eval_shape(p, rule.points)
    V.setflags(write=False)
    D.setflags(write=False)
    return rule, V, D


def to_legendre(u: "FemFunction", j: int) -> LocalExpansion:
    """Exact Legendre expansion of a finite element function on element j.

    The hats and bubbles have closed-form Legendre expansions, so no
    quadrature or sampling is involved.
    """
    loc = u.local_values(j)
    p = loc.size - 1
    c = np.zeros(p + 1)
    c[0] = 0.5 * (loc[0] + loc[1])
    c[1] = 0.5 * (loc[1] - loc[0])
    for k in range(2, p + 1):
        s = 1.0 / math.sqrt(4 * k - 2)
        c[k] += s * loc[k]
        c[k - 2] -= s * loc[k]
    return LocalExpansion(j, c, float(u.mesh.lengths[j]))


def shape_from_legendre(c: np.ndarray) -> np.ndarray:
    """Invert :func:`to_legendre`: local shape coefficients [v_l, v_r, bubbles...].

    Only valid input is a coefficient vector of length >= 2 (degree >= 1).
    """
    c = np.array(c, dtype=float)
    p = c.size - 1
    out = np.zeros(p + 1)
    for k in range(p, 1, -1):
        out[k] = c[k] * math.sqrt(4 * k - 2)
        c[k - 2] += c[k]
        c[k] = 0.0
    out[0] = c[0] - c[1]
    out[1] = c[0] + c[1]
    return out


def legendre_derivative(e: LocalExpansion, order: int) -> LocalExpansion:
    """Derivative of order ``order`` with respect to the physical coordinate.

    Uses the backward Legendre recurrence; each application carries the 2/h
    chain-rule factor.  order=0 returns the expansion unchanged.
    """
    if order < 0:
        raise ValueError("derivative order must be >= 0")
    c = np.array(e.coeffs, dtype=float)
    for _ in range(order):
        n = c.size - 1
        d = np.zeros(max(n, 1))
        for k in range(n - 1, -1, -1):
            acc = d[k + 2] / (2 * k + 5) if k + 2 <= n - 1 else 0.0
            d[k] = (2 * k + 1) * (c[k + 1] + acc)
        c = d * (2.0 / e.h)
    return LocalExpansion(e.element, c, e.h)


def local_norms(e: LocalExpansion) -> tuple[float, float, float]:
    """(L2 norm, Linf norm, L2 norm of the physical derivative) on the element.

    L2 norms are exact through Legendre orthogonality.  The Linf norm is exact
    for constants and linears (endpoint values); for higher degrees it falls
    back to dense sampling.
    """
    c = e.coeffs
    k = np.arange(c.size)
    l2 = math.sqrt((e.h / 2.0) * float(np.sum(c * c * 2.0 / (2 * k + 1))))
    if c.size <= 2:
        c1 = c[1] if c.size == 2 else 0.0
        linf = max(abs(c[0] - c1), abs(c[0] + c1))
    else:
        xs = np.linspace(-1.0, 1.0, 201)
        linf = float(np.max(np.abs(legval(xs, c))))
    d = legendre_derivative(e, 1)
    kd = np.arange(d.coeffs.size)
    dl2 = math.sqrt((e.h / 2.0) * float(np.sum(d.coeffs**2 * 2.0 / (2 * kd + 1))))
    return l2, linf, dl2


def split_expansion(c: np.ndarray, side: int) -> np.ndarray:
    """Legendre coefficients of the polynomial restricted to one half interval.

    ``side`` 0 maps the left child, 1 the right child, each back onto the
    reference interval.  The projection is computed with a Gauss rule that is
    exact for the integrand degree.
    """
    c = np.asarray(c, dtype=float)
    p = c.size - 1
    rule = gauss_rule(p + 1)
    x_parent = 0.5 * (rule.points - 1.0) if side == 0 else 0.5 * (rule.points + 1.0)
    vals = legval(x_parent, c)
    P = legendre_table(p, rule.points)
    k = np.arange(p + 1)
    return (2 * k + 1) / 2.0 * ((P * rule.weights) @ vals)
