"""Radar-communication coexistence: secrecy maximisation by block coordinate ascent.

Blocks: zero-forcing beamformer w, radar covariance R confined to the null
space of Bob's effective channel, RIS phases q through a semidefinite
relaxation with randomization, and a grid search over the power split.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .channels import ChannelSet
from .metrics import (
    NoisePowers,
    RcceDesign,
    lift_matrix,
    lift_quadratics,
    rcce_radar_sinr,
    rcce_rates,
    vec,
)
from .sdp import RandomizationInfeasible, SdpProblem, gaussian_randomization, phases_from_lifted, solve

log = logging.getLogger(__name__)

LOG2E = 1.0 / np.log(2.0)
RADAR_SLACK = 1e-6


class DegenerateChannel(ValueError):
    """Bob's channel has no component outside Eve's direction."""


class RadarInfeasible(RuntimeError):
    """No design in the searched family meets the radar SINR threshold."""


@dataclass
class RcceOptions:
    eps_step: float = 0.01
    tol: float = 1e-3
    max_outer: int = 20
    sca_max_iter: int = 20
    sca_tol: float = 1e-4
    n_samples: int = 100
    seed: int = 0
    optimize_q: bool = True
    q0: Optional[np.ndarray] = None


@dataclass
class BcdTrace:
    cs: list = field(default_factory=list)
    timings: dict = field(default_factory=lambda: {"w": 0.0, "R": 0.0, "Q": 0.0, "eps": 0.0})
    reason: str = ""
    feasible: bool = True
    iterations: int = 0
    wall_ms: float = 0.0
    points: list = field(default_factory=list)  # (C_B, C_E, gamma_A) per pass


def secrecy(design: RcceDesign, ch, noise, P) -> float:
    """Unclamped C_B - C_E."""
    C_B, C_E, _ = rcce_rates(design, ch, noise, P)
    return C_B - C_E


def radar_ok(design, ch, noise, P, gamma) -> bool:
    return rcce_radar_sinr(design, ch, noise, P) >= gamma * (1 - RADAR_SLACK)


# ---------------------------------------------------------------------------
# w block
# ---------------------------------------------------------------------------

def zf_beamformer(h_B, h_E) -> np.ndarray:
    """Unit-norm projection of h_B^H onto the orthogonal complement of h_E^H."""
    h_B = np.asarray(h_B, dtype=complex)
    h_E = np.asarray(h_E, dtype=complex)
    e = h_E.conj()
    ne = np.vdot(e, e).real
    v = h_B.conj()
    if ne > 0:
        v = v - e * (np.vdot(e, v) / ne)
    n = np.linalg.norm(v)
    if n < 1e-10 * max(1.0, np.linalg.norm(h_B)) or n < 1e-300:
        raise DegenerateChannel("h_B is (numerically) parallel to h_E")
    return v / n


# ---------------------------------------------------------------------------
# R block
# ---------------------------------------------------------------------------

def null_basis(h_B) -> np.ndarray:
    """Orthonormal N x (N-1) basis V with h_B V = 0."""
    h = np.asarray(h_B, dtype=complex)[None, :]
    return sla.null_space(h)


def _t_extreme(H_E, V, sign):
    """Extreme of tr(H_E R) over R = V R' V^H, R' PSD with unit trace, via the SDP solver."""
    n = V.shape[1]
    C = sign * (V.conj().T @ H_E @ V)
    scale = max(np.abs(C).max(), 1e-300)
    p = SdpProblem(n, objective=C / scale)
    p.add_eq(np.eye(n), 1.0)
    sol = solve(p)
    Rp = sol.X
    lam, U = np.linalg.eigh(0.5 * (Rp + Rp.conj().T))
    v = U[:, -1]  # the optimum is attained by a rank-one point
    R = V @ np.outer(v, v.conj()) @ V.conj().T
    return R, float(np.real(np.trace(H_E @ R)))


def optimize_radar_covariance(design: RcceDesign, ch: ChannelSet, noise: NoisePowers, P: float,
                              gamma: float, tol: float = 1e-4, max_iter: int = 20) -> np.ndarray:
    """Radar covariance in the null space of h_B for fixed (eps, w, q).

    Within that null space the secrecy surrogate depends on R only through
    t = tr(H_E R); it is maximised by successive linearisation of the
    interference term, with ties resolved toward the largest t (largest radar
    margin). Raises RadarInfeasible if no admissible t meets the threshold.
    """
    eps = design.epsilon
    h_B = ch.h_B(design.q)
    h_E = ch.h_E(design.q)
    H_E = np.outer(h_E.conj(), h_E)
    V = null_basis(h_B)
    if V.shape[1] == 0:
        raise RadarInfeasible("no null space for the radar covariance")
    R_hi, t_hi = _t_extreme(H_E, V, +1.0)
    R_lo, t_lo = _t_extreme(H_E, V, -1.0)
    t_lo = -t_lo
    t_lo, t_hi = min(t_lo, t_hi), max(t_lo, t_hi)

    gE = float(np.real(h_E @ h_E.conj()))
    leak = eps * abs(h_E @ design.w) ** 2
    sE = noise.sigma_E_sq / P
    # radar SINR is increasing in t: gamma_A = (1-eps) P gE t / (eps P gE leak' + N sA)
    den = eps * P * gE * abs(h_E @ design.w) ** 2 + ch.N * noise.sigma_A_sq
    if eps >= 1 or gE == 0:
        raise RadarInfeasible("no radar power")
    t_req = gamma * den / ((1 - eps) * P * gE)
    lo = max(t_lo, t_req)
    if lo > t_hi * (1 + 1e-9):
        raise RadarInfeasible("radar threshold not reachable in the null space")

    def surrogate(t, t0):
        xE0 = (1 - eps) * t0 + sE
        f3 = LOG2E * (1 - eps) * (t - t0) / (xE0 + leak) + np.log2(xE0 + leak)
        f4 = np.log2((1 - eps) * t + sE)
        return f4 - f3

    # successive linearisation on the scalar t
    t = float(np.clip(np.real(np.trace(H_E @ design.R)), lo, t_hi))
    grid = np.linspace(lo, t_hi, 201)
    for _ in range(max_iter):
        vals = surrogate(grid, t)
        best = vals.max()
        # flat surrogate: prefer the largest radar margin
        t_new = float(grid[np.nonzero(vals >= best - 1e-12 * max(1.0, abs(best)))[0][-1]])
        if abs(surrogate(t_new, t) - surrogate(t, t)) <= tol:
            t = max(t, t_new)
            break
        t = t_new
    rho = 1.0 if t_hi == t_lo else (t - t_lo) / (t_hi - t_lo)
    R = rho * R_hi + (1 - rho) * R_lo
    R = 0.5 * (R + R.conj().T)
    return R / np.real(np.trace(R))


def initial_radar_covariance(h_B, N) -> np.ndarray:
    V = null_basis(h_B)
    if V.shape[1] == 0:
        return np.eye(N) / N
    R = V @ V.conj().T
    return R / np.real(np.trace(R))


# ---------------------------------------------------------------------------
# Q block
# ---------------------------------------------------------------------------

def _log_lmi(R_lin, const, x0):
    """2x2 block [[x(U), sqrt(x0)], [sqrt(x0), s]] for the bound ln x >= ln x0 + 1 - s."""
    r = np.sqrt(x0)

    def fn(X, aux, idx):
        x = np.real(np.sum(R_lin * X.T)) + const
        return np.array([[x, r], [r, aux[idx]]], dtype=complex)

    return fn


def optimize_ris_phases_rcce(design: RcceDesign, ch: ChannelSet, noise: NoisePowers, P: float,
                             gamma: float, tol: float = 1e-4, max_iter: int = 20,
                             n_samples: int = 100, rng=None) -> np.ndarray:
    """RIS phases for fixed (eps, w, R) via lifted SDP relaxation.

    Concave log terms are handled by a tangent-reciprocal minorizer, the
    non-concave ones and the indefinite radar form by linearisation at the
    incumbent; randomization recovers unit-modulus phases. The incumbent is
    returned if no candidate improves the exact secrecy rate feasibly.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    q_inc = np.asarray(design.q, dtype=complex)
    cs_inc = secrecy(design, ch, noise, P)
    if ch.M == 0 or not radar_ok(design, ch, noise, P, gamma):
        return q_inc
    eps, w, R = design.epsilon, design.w, design.R
    W = np.outer(w, w.conj())
    forms = lift_quadratics(ch, W, R, eps, P, noise, gamma)
    n = ch.M + 1
    sB, sE = noise.sigma_B_sq, noise.sigma_E_sq
    A5 = (forms.R_c["B"] + forms.R_r["B"]) / sB
    A6 = forms.R_r["B"] / sB
    A7 = (forms.R_c["E"] + forms.R_r["E"]) / sE
    A8 = forms.R_r["E"] / sE
    Kn = forms.K / (ch.N * noise.sigma_A_sq)
    lam, V = np.linalg.eigh(0.5 * (Kn + Kn.conj().T))
    cut = 1e-12 * max(np.abs(lam).max(), 1e-300)
    pos = lam > cut
    L = V[:, pos] * np.sqrt(lam[pos])
    Kminus = (V[:, lam < 0] * lam[lam < 0]) @ V[:, lam < 0].conj().T
    r = L.shape[1]

    def val(A, U):
        return float(np.real(np.sum(A * U.T)))

    def surrogate_true(U):
        return (np.log2(val(A5, U) + 1) - np.log2(val(A6, U) + 1)
                - np.log2(val(A7, U) + 1) + np.log2(val(A8, U) + 1))

    U = lift_matrix(q_inc)
    obj_prev = surrogate_true(U)
    for _ in range(max_iter):
        ut0 = np.concatenate([[1.0], vec(U)])
        km0 = Kminus @ ut0
        km_const = float(np.real(np.vdot(ut0, km0)))
        x6, x7 = val(A6, U) + 1, val(A7, U) + 1
        x5, x8 = val(A5, U) + 1, val(A8, U) + 1
        C = -LOG2E * (A6 / x6 + A7 / x7)
        p = SdpProblem(n, objective=C, n_aux=2, linear_part=[-LOG2E, -LOG2E])
        for i in range(n):
            E = np.zeros((n, n))
            E[i, i] = 1.0
            p.add_eq(E, 1.0)
        f5 = _log_lmi(A5 / x5, 1.0 / x5, 1.0)
        f8 = _log_lmi(A8 / x8, 1.0 / x8, 1.0)
        p.add_lmi(lambda X, a: f5(X, a, 0), 2)
        p.add_lmi(lambda X, a: f8(X, a, 1), 2)
        p.add_ineq(None, -10.0, aux=[-1.0, 0.0])
        p.add_ineq(None, -10.0, aux=[0.0, -1.0])

        def radar_block(X, a, L=L, km0=km0, km_const=km_const):
            ut = np.concatenate([[1.0], vec(X)])
            y = L.conj().T @ ut
            tau = -2 * np.real(np.vdot(km0, ut)) + km_const
            B = np.eye(r + 1, dtype=complex)
            B[0, 0] = tau
            B[0, 1:] = y.conj()
            B[1:, 0] = y
            return B

        if r > 0:
            p.add_lmi(radar_block, r + 1)
        sol = solve(p)
        if not sol.usable:
            break
        U_new = 0.5 * (sol.X + sol.X.conj().T)
        obj = surrogate_true(U_new)
        if obj < obj_prev - 1e-9:
            break
        U = U_new
        done = obj - obj_prev <= tol
        obj_prev = obj
        if done:
            break

    def candidate(u):
        return RcceDesign(eps, w, R, phases_from_lifted(u))

    def feasible(u):
        return radar_ok(candidate(u), ch, noise, P, gamma)

    def score(u):
        return secrecy(candidate(u), ch, noise, P)

    try:
        u, best = gaussian_randomization(U, n_samples, feasible, score, rng, project="phase",
                                         extra=[np.append(q_inc, 1.0)])
    except RandomizationInfeasible:
        return q_inc
    if best >= cs_inc:
        return phases_from_lifted(u)
    return q_inc


# ---------------------------------------------------------------------------
# power split
# ---------------------------------------------------------------------------

def optimize_power_split(design: RcceDesign, ch: ChannelSet, noise: NoisePowers, P: float,
                         gamma: float, step: float = 0.01) -> float:
    """Grid argmax of C_s over {step, 2 step, ..., 1 - step} subject to the radar SINR."""
    grid = np.arange(1, int(round(1 / step))) * step
    best, best_eps = -np.inf, None
    for e in grid:
        d = RcceDesign(float(e), design.w, design.R, design.q)
        if not radar_ok(d, ch, noise, P, gamma):
            continue
        v = secrecy(d, ch, noise, P)
        if v > best:
            best, best_eps = v, float(e)
    if best_eps is None:
        raise RadarInfeasible("no power split meets the radar threshold")
    return best_eps


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def run_rcce_bcd(ch: ChannelSet, noise: NoisePowers, P: float, gamma: float,
                 opts: Optional[RcceOptions] = None):
    """Block coordinate ascent. Returns (RcceDesign, BcdTrace).

    On radar infeasibility the trace is flagged infeasible and reports zero
    secrecy rate. The secrecy trace is nondecreasing: an outer pass that
    would lower it is discarded and the loop stops.
    """
    t_start = time.perf_counter()
    opts = opts or RcceOptions()
    rng = np.random.default_rng(opts.seed)
    trace = BcdTrace()
    q = np.ones(ch.M, dtype=complex) if opts.q0 is None else np.asarray(opts.q0, dtype=complex)
    eps = opts.eps_step
    try:
        w = zf_beamformer(ch.h_B(q), ch.h_E(q))
    except DegenerateChannel:
        trace.feasible, trace.reason = False, "degenerate_channel"
        return RcceDesign(eps, np.ones(ch.N) / np.sqrt(ch.N), np.eye(ch.N) / ch.N, q), trace
    design = RcceDesign(eps, w, initial_radar_covariance(ch.h_B(q), ch.N), q)
    best = None  # last radar-feasible design and its secrecy
    cs_prev = None
    for it in range(1, opts.max_outer + 1):
        try:
            t0 = time.perf_counter()
            w = zf_beamformer(ch.h_B(design.q), ch.h_E(design.q))
            cand = RcceDesign(design.epsilon, w, design.R, design.q)
            t1 = time.perf_counter()
            trace.timings["w"] += t1 - t0
            try:
                R = optimize_radar_covariance(cand, ch, noise, P, gamma, opts.sca_tol, opts.sca_max_iter)
            except RadarInfeasible:
                # the current split may be too greedy; retry at the smallest one
                cand = RcceDesign(opts.eps_step, w, cand.R, cand.q)
                R = optimize_radar_covariance(cand, ch, noise, P, gamma, opts.sca_tol, opts.sca_max_iter)
            cand = RcceDesign(cand.epsilon, w, R, cand.q)
            t2 = time.perf_counter()
            trace.timings["R"] += t2 - t1
            if opts.optimize_q:
                qn = optimize_ris_phases_rcce(cand, ch, noise, P, gamma, opts.sca_tol,
                                              opts.sca_max_iter, opts.n_samples, rng)
                cand = RcceDesign(cand.epsilon, w, R, qn)
            t3 = time.perf_counter()
            trace.timings["Q"] += t3 - t2
            e = optimize_power_split(cand, ch, noise, P, gamma, opts.eps_step)
            cand = RcceDesign(e, w, R, cand.q)
            trace.timings["eps"] += time.perf_counter() - t3
        except (RadarInfeasible, DegenerateChannel) as exc:
            if best is None:
                trace.feasible, trace.reason = False, "radar_infeasible"
                trace.iterations = it
                break
            trace.reason = f"stopped: {exc}"
            break
        cs = secrecy(cand, ch, noise, P)
        trace.iterations = it
        if best is not None and cs < best[1] - 1e-9:
            trace.reason = "no_improvement"
            break
        design = cand
        best = (design, cs)
        trace.cs.append(max(0.0, cs))
        C_B, C_E, _ = rcce_rates(design, ch, noise, P)
        trace.points.append((C_B, C_E, rcce_radar_sinr(design, ch, noise, P)))
        if cs_prev is not None and abs(cs - cs_prev) <= opts.tol * max(abs(cs_prev), 1e-12):
            trace.reason = "converged"
            break
        cs_prev = cs
    else:
        trace.reason = "max_outer"
    if best is None:
        trace.feasible = False
        trace.cs = [0.0]
        trace.points = []
    else:
        design = best[0]
    trace.wall_ms = 1e3 * (time.perf_counter() - t_start)
    return design, trace
