"""Riemannian conjugate gradient on the complex unit sphere and the oblique manifold.

Vectors are complex; the real inner product is <x, y> = Re(x^H y). Euclidean
gradients passed in by callers follow the convention egrad = 2 df/dx^*, so
that the directional derivative along v is <egrad, v>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPHERE = "sphere"
OBLIQUE = "oblique"


@dataclass
class RcgOptions:
    c1: float = 1e-4
    initial_step: float = 1.0
    backtrack_factor: float = 0.5
    grad_tol: float = 1e-4
    max_iter: int = 500
    max_backtracks: int = 50
    # grow the trial step while Armijo keeps holding (scale-robust schedule)
    expand: bool = True
    max_expansions: int = 40

    def __post_init__(self):
        if not 0 < self.c1 < 1:
            raise ValueError("c1 must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass
class RcgResult:
    x: np.ndarray
    costs: list
    iterations: int
    grad_norm: float
    reason: str


def inner(x, y) -> float:
    return float(np.real(np.vdot(x, y)))


def retract_sphere(w, direction, step):
    v = w + step * direction
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ZeroDivisionError("retraction through the origin")
    return v / nrm


def retract_oblique(q, direction, step):
    v = q + step * direction
    mag = np.abs(v)
    if np.any(mag == 0):
        raise ZeroDivisionError("retraction hit a zero entry")
    return v / mag


def riemannian_grad_sphere(w, egrad):
    return egrad - np.real(np.vdot(w, egrad)) * w


def riemannian_grad_oblique(q, egrad):
    return egrad - np.real(egrad * q.conj()) * q


def transport(manifold, new_point, vector):
    """Project ``vector`` onto the tangent space at ``new_point``."""
    if manifold == SPHERE:
        return riemannian_grad_sphere(new_point, vector)
    if manifold == OBLIQUE:
        return riemannian_grad_oblique(new_point, vector)
    raise ValueError(f"unknown manifold {manifold!r}")


def _project(manifold, x, egrad):
    return transport(manifold, x, egrad)


def _retract(manifold, x, d, s):
    return retract_sphere(x, d, s) if manifold == SPHERE else retract_oblique(x, d, s)


def rcg_minimize(manifold, cost, egrad, x0, opts: RcgOptions = None) -> RcgResult:
    """Minimise ``cost`` over the manifold from ``x0``.

    Polak-Ribiere+ directions with a steepest-descent restart whenever the
    conjugate direction is not a descent direction, and Armijo backtracking.
    """
    opts = opts or RcgOptions()
    x = np.asarray(x0, dtype=complex).copy()
    f = cost(x)
    g = _project(manifold, x, egrad(x))
    d = -g
    costs = [f]
    gnorm = np.sqrt(inner(g, g))
    if gnorm <= opts.grad_tol:
        return RcgResult(x, costs, 1, gnorm, "grad_tol")
    reason = "max_iter"
    it = 0
    for it in range(1, opts.max_iter + 1):
        slope = inner(g, d)
        if slope >= 0:
            d = -g
            slope = -inner(g, g)
        s = opts.initial_step
        accepted = False
        for _ in range(opts.max_backtracks):
            try:
                xn = _retract(manifold, x, d, s)
            except ZeroDivisionError:
                s *= opts.backtrack_factor
                continue
            fn = cost(xn)
            if fn <= f + opts.c1 * s * slope:
                accepted = True
                break
            s *= opts.backtrack_factor
        if not accepted:
            reason = "line_search"
            break
        if opts.expand and s == opts.initial_step:
            for _ in range(opts.max_expansions):
                s2 = s / opts.backtrack_factor
                try:
                    x2 = _retract(manifold, x, d, s2)
                except ZeroDivisionError:
                    break
                f2 = cost(x2)
                if f2 <= fn and f2 <= f + opts.c1 * s2 * slope:
                    s, xn, fn = s2, x2, f2
                else:
                    break
        gn = _project(manifold, xn, egrad(xn))
        g_old_t = transport(manifold, xn, g)
        denom = inner(g, g)
        mu = max(0.0, inner(gn, gn - g_old_t) / denom) if denom > 0 else 0.0
        d = -gn + mu * transport(manifold, xn, d)
        x, f, g = xn, fn, gn
        costs.append(f)
        gnorm = np.sqrt(inner(g, g))
        if gnorm <= opts.grad_tol:
            reason = "grad_tol"
            break
    return RcgResult(x, costs, it, gnorm, reason)
