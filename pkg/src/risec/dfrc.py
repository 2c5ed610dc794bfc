"""Dual-function radar-communication secrecy design.

Two alternating schemes over the transmit beamformer w and RIS phases q:

* fractional programming (Dinkelbach) on SDP relaxations with Gaussian
  randomization for rank-one recovery;
* a smoothed-penalty formulation minimised by Riemannian conjugate gradient
  on the sphere (w) and the oblique manifold (q).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import expit

from . import manifold as mf
from .channels import ChannelSet
from .metrics import (
    DfrcDesign,
    NoisePowers,
    dfrc_lift,
    dfrc_matrices,
    dfrc_radar_snr,
    dfrc_rates,
    lift_matrix,
    quad,
    unvec,
    vec,
)
from .sdp import RandomizationInfeasible, SdpProblem, gaussian_randomization, phases_from_lifted, solve

log = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1e-3


class RadarInfeasible(RuntimeError):
    """The radar constraint cannot be met for the current fixed block."""


@dataclass(frozen=True)
class PenaltyParams:
    zeta: float = 0.2
    eps1: float = 0.3
    gamma: float = 10 ** 1.5

    def __post_init__(self):
        if self.zeta <= 0 or self.eps1 <= 0:
            raise ValueError("zeta and eps1 must be positive")


@dataclass
class DfrcOptions:
    max_outer: int = 20
    tol: float = 1e-3
    dinkelbach_tol: float = 1e-5
    dinkelbach_max_iter: int = 30
    n_samples: int = 100
    seed: int = 0
    radar: str = "snr"  # "snr" or "illumination"
    rcg: mf.RcgOptions = field(default_factory=mf.RcgOptions)
    w0: Optional[np.ndarray] = None
    q0: Optional[np.ndarray] = None
    optimize_q: bool = True
    # extra starts draw seeded random phases; start 0 is always the informed one
    n_starts: int = 1


@dataclass
class DfrcTrace:
    cs: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    feasible: bool = True
    iterations: int = 0
    reason: str = ""
    wall_ms: float = 0.0
    points: list = field(default_factory=list)  # (C_B, C_E, gamma_A) per pass
    start: int = 0  # index of the start that produced the design


# ---------------------------------------------------------------------------
# smoothed penalty and its gradients
# ---------------------------------------------------------------------------

def smooth_max(x, eps1):
    """eps1 * ln(1 + exp(x / eps1)), a smooth upper bound of max(0, x)."""
    return eps1 * np.logaddexp(0.0, np.asarray(x, dtype=float) / eps1)


def smooth_max_slope(x, eps1):
    return expit(np.asarray(x, dtype=float) / eps1)


def _ratio(pE, pB, noise):
    return (1 + pE / noise.sigma_E_sq) / (1 + pB / noise.sigma_B_sq)


def penalty_objective(w, q, ch: ChannelSet, noise: NoisePowers, P: float, pp: PenaltyParams) -> float:
    d = DfrcDesign(w, q)
    pB = P * abs(ch.h_B(q) @ w) ** 2
    pE = P * abs(ch.h_E(q) @ w) ** 2
    gA = dfrc_radar_snr(d, ch, noise, P)
    return float(_ratio(pE, pB, noise) + pp.zeta * smooth_max(pp.gamma - gA, pp.eps1))


def w_cost_and_grad(ch, q, noise, P, pp):
    """Cost and Euclidean gradient in w for fixed q."""
    M_B, M_E, M_Ep = dfrc_matrices(ch, q, P, noise)
    scale = ch.N * noise.sigma_A_sq

    def cost(w):
        a = 1 + quad(M_E, w)
        b = 1 + quad(M_B, w)
        gA = quad(M_Ep, w) / scale
        return float(a / b + pp.zeta * smooth_max(pp.gamma - gA, pp.eps1))

    def grad(w):
        a = 1 + quad(M_E, w)
        b = 1 + quad(M_B, w)
        gA = quad(M_Ep, w) / scale
        sl = smooth_max_slope(pp.gamma - gA, pp.eps1)
        return 2 * (M_E @ w / b - M_B @ w * a / b ** 2 - pp.zeta * sl * (M_Ep @ w) / scale)

    return cost, grad


def egrad_w(w, ch, noise, P, pp, q=None):
    q = np.ones(ch.M, dtype=complex) if q is None else q
    return w_cost_and_grad(ch, q, noise, P, pp)[1](w)


@dataclass
class RadarBound:
    """Affine lower bounds of ||h_E||^2 and |h_E w|^2 in q, tight at q0."""

    t1: np.ndarray
    t1c: float
    t2: np.ndarray
    t2c: float
    scale: float  # P / (N sigma_A^2)

    def parts(self, q):
        l1 = 2 * np.real(np.vdot(q, self.t1)) + self.t1c
        l2 = 2 * np.real(np.vdot(q, self.t2)) + self.t2c
        return l1, l2

    def gamma_tilde(self, q) -> float:
        """Surrogate radar SNR; never exceeds the exact value."""
        l1, l2 = self.parts(q)
        return float(self.scale * max(l1, 0.0) * max(l2, 0.0))

    def egrad(self, q):
        l1, l2 = self.parts(q)
        if l1 <= 0 or l2 <= 0:
            return np.zeros_like(q)
        return 2 * self.scale * (l2 * self.t1 + l1 * self.t2)


def sca_radar_bound_q(q0, ch: ChannelSet, W, P: float, noise: NoisePowers) -> RadarBound:
    lift = dfrc_lift(ch, W, P, noise)
    EhE = lift.EhE
    F1, f1, g1 = EhE[:-1, :-1], EhE[:-1, -1], float(np.real(EhE[-1, -1]))
    F2, f2, g2 = lift.F("E", P), lift.f("E", P), lift.g("E", P)
    t1 = F1 @ q0 + f1
    t2 = F2 @ q0 + f2
    return RadarBound(
        t1=t1, t1c=g1 - quad(F1, q0), t2=t2, t2c=g2 - quad(F2, q0),
        scale=P / (ch.N * noise.sigma_A_sq),
    )


def q_cost_and_grad(ch, w, noise, P, pp, bound: RadarBound):
    """Surrogate cost (radar SNR replaced by its lower bound) and gradient in q."""
    W = np.outer(w, w.conj())
    lift = dfrc_lift(ch, W, P, noise)
    FB, fB, gB = lift.F("B", P), lift.f("B", P), lift.g("B", P)
    FE, fE, gE = lift.F("E", P), lift.f("E", P), lift.g("E", P)
    cB = P / noise.sigma_B_sq
    cE = P / noise.sigma_E_sq

    def forms(q):
        pb = quad(FB, q) + 2 * np.real(np.vdot(q, fB)) + gB
        pe = quad(FE, q) + 2 * np.real(np.vdot(q, fE)) + gE
        return 1 + cB * pb, 1 + cE * pe

    def cost(q):
        b, a = forms(q)
        return float(a / b + pp.zeta * smooth_max(pp.gamma - bound.gamma_tilde(q), pp.eps1))

    def grad(q):
        b, a = forms(q)
        sl = smooth_max_slope(pp.gamma - bound.gamma_tilde(q), pp.eps1)
        return (2 * cE * (FE @ q + fE) / b - 2 * cB * (FB @ q + fB) * a / b ** 2
                - pp.zeta * sl * bound.egrad(q))

    return cost, grad


def egrad_q(q, ch, noise, P, pp, bound: RadarBound, w):
    return q_cost_and_grad(ch, w, noise, P, pp, bound)[1](q)


# ---------------------------------------------------------------------------
# RCG-based alternating optimisation
# ---------------------------------------------------------------------------

def _initial_w(ch, q):
    h = ch.h_B(q)
    n = np.linalg.norm(h)
    if n == 0:
        return np.ones(ch.N, dtype=complex) / np.sqrt(ch.N)
    return h.conj() / n


def _summary(design, ch, noise, P, gamma, radar="snr"):
    C_B, C_E, C_s = dfrc_rates(design, ch, noise, P)
    if radar == "snr":
        gA = dfrc_radar_snr(design, ch, noise, P)
    else:
        gA = P * abs(ch.h_E(design.q) @ design.w) ** 2
    return C_B, C_E, C_s, gA


def _best_of_starts(run_one, ch: ChannelSet, noise, P, gamma, opts: DfrcOptions):
    """Run from ``opts.n_starts`` initial phase vectors and keep the best
    radar-feasible design (highest C_s); ties keep the earlier start."""
    t0 = time.perf_counter()
    rng = np.random.default_rng([opts.seed, 0x5EED])
    best = None
    for k in range(opts.n_starts):
        o = opts
        if k > 0:
            o = replace(opts, q0=np.exp(2j * np.pi * rng.uniform(size=ch.M)), w0=None)
        design, tr = run_one(o)
        tr.start = k
        key = (tr.feasible, _summary(design, ch, noise, P, gamma, opts.radar)[2])
        if best is None or key > best[0]:
            best = (key, design, tr)
    _, design, tr = best
    tr.wall_ms = 1e3 * (time.perf_counter() - t0)
    return design, tr


def run_dfrc_rcg(ch: ChannelSet, noise: NoisePowers, P: float, gamma: float,
                 pp: Optional[PenaltyParams] = None, opts: Optional[DfrcOptions] = None):
    """Penalty-based alternating RCG. Returns (DfrcDesign, DfrcTrace)."""
    opts = opts or DfrcOptions()
    if opts.n_starts > 1:
        return _best_of_starts(lambda o: _rcg_single(ch, noise, P, gamma, pp, o), ch, noise, P, gamma, opts)
    return _rcg_single(ch, noise, P, gamma, pp, opts)


def _rcg_single(ch, noise, P, gamma, pp, opts: DfrcOptions):
    t0 = time.perf_counter()
    pp = pp or PenaltyParams(gamma=gamma)
    if pp.gamma != gamma:
        pp = PenaltyParams(zeta=pp.zeta, eps1=pp.eps1, gamma=gamma)
    q = np.ones(ch.M, dtype=complex) if opts.q0 is None else np.asarray(opts.q0, dtype=complex)
    w = _initial_w(ch, q) if opts.w0 is None else np.asarray(opts.w0, dtype=complex)
    trace = DfrcTrace()
    f_prev = penalty_objective(w, q, ch, noise, P, pp)
    trace.objective.append(f_prev)
    for it in range(1, opts.max_outer + 1):
        cw, gw = w_cost_and_grad(ch, q, noise, P, pp)
        w = mf.rcg_minimize(mf.SPHERE, cw, gw, w, opts.rcg).x
        if opts.optimize_q and ch.M > 0:
            bound = sca_radar_bound_q(q, ch, np.outer(w, w.conj()), P, noise)
            cq, gq = q_cost_and_grad(ch, w, noise, P, pp, bound)
            q = mf.rcg_minimize(mf.OBLIQUE, cq, gq, q, opts.rcg).x
        f = penalty_objective(w, q, ch, noise, P, pp)
        trace.objective.append(f)
        design = DfrcDesign(w, q)
        C_B, C_E, C_s, gA = _summary(design, ch, noise, P, gamma)
        trace.cs.append(C_s if gA >= gamma * (1 - FEASIBILITY_SLACK) else 0.0)
        trace.points.append((C_B, C_E, gA))
        trace.iterations = it
        if abs(f - f_prev) <= opts.tol * abs(f_prev):
            trace.reason = "converged"
            break
        f_prev = f
    else:
        trace.reason = "max_outer"
    design = DfrcDesign(w, q)
    gA = dfrc_radar_snr(design, ch, noise, P)
    trace.feasible = bool(gA >= gamma * (1 - FEASIBILITY_SLACK))
    trace.wall_ms = 1e3 * (time.perf_counter() - t0)
    return design, trace


# ---------------------------------------------------------------------------
# Dinkelbach-based alternating optimisation
# ---------------------------------------------------------------------------

def _dinkelbach(num, den, make_problem, X0, tol, max_iter):
    """Maximise (1 + tr(num X)) / (1 + tr(den X)) over the feasible set of
    ``make_problem`` by parametric SDPs. Returns (X, mu sequence)."""

    def ratio(X):
        return (1 + np.real(np.trace(num @ X))) / (1 + np.real(np.trace(den @ X)))

    X = X0
    mu = ratio(X)
    mus = [mu]
    for _ in range(max_iter):
        prob = make_problem()
        prob.objective = num - mu * den
        sol = solve(prob)
        if sol.status == "infeasible":
            raise RadarInfeasible("relaxed subproblem infeasible")
        if not sol.usable:
            break
        mu_new = ratio(sol.X)
        if mu_new < mu:
            break
        X = sol.X
        converged = abs(mu_new - mu) <= tol * max(1.0, abs(mu))
        mu = mu_new
        mus.append(mu)
        if converged:
            break
    return X, mus


def _radar_matrix_w(ch, q, P, noise, radar):
    """(matrix, threshold-scale) so that the radar constraint reads tr(A W) >= gamma."""
    if radar == "snr":
        _, _, M_Ep = dfrc_matrices(ch, q, P, noise)
        return M_Ep / (ch.N * noise.sigma_A_sq)
    h = ch.h_E(q)
    return P * np.outer(h.conj(), h)


def dinkelbach_w(ch: ChannelSet, noise: NoisePowers, P: float, gamma: float, q,
                 tol: float = 1e-5, w_init=None, rng=None, n_samples=100, radar="snr",
                 max_iter=30):
    """Transmit beamformer for fixed q. Returns (w, W, mu sequence)."""
    M_B, M_E, _ = dfrc_matrices(ch, q, P, noise)
    A_rad = _radar_matrix_w(ch, q, P, noise, radar)
    lam, V = np.linalg.eigh(A_rad)
    if lam[-1] < gamma * (1 - 1e-9):
        raise RadarInfeasible("radar threshold exceeds the best achievable value")
    if w_init is not None and quad(A_rad, w_init) >= gamma:
        X0 = np.outer(w_init, np.conj(w_init))
    else:
        X0 = np.outer(V[:, -1], V[:, -1].conj())

    def make():
        p = SdpProblem(ch.N)
        p.add_eq(np.eye(ch.N), 1.0)
        p.add_ineq(A_rad, gamma)
        return p

    W, mus = _dinkelbach(M_B, M_E, make, X0, tol, max_iter)

    def feasible(w):
        return quad(A_rad, w) >= gamma * (1 - 1e-9)

    def score(w):
        return (1 + quad(M_B, w)) / (1 + quad(M_E, w))

    extra = [w_init] if w_init is not None else []
    w, _ = gaussian_randomization(W, n_samples, feasible, score, rng, project="norm", extra=extra)
    return w, W, mus


def dinkelbach_q(ch: ChannelSet, noise: NoisePowers, P: float, gamma: float, w, q0,
                 tol: float = 1e-5, rng=None, n_samples=100, radar="snr", max_iter=30):
    """RIS phases for fixed w. Returns (q, U, mu sequence).

    The radar constraint is linearised at q0 (SNR mode) or is already linear
    in U (illumination mode).
    """
    W = np.outer(w, w.conj())
    lift = dfrc_lift(ch, W, P, noise)
    n = ch.M + 1
    num = lift.R["B"] / noise.sigma_B_sq
    den = lift.R["E"] / noise.sigma_E_sq
    U0 = lift_matrix(q0)
    if radar == "snr":
        u0 = vec(U0)
        s = unvec(lift.S_E @ u0, n)
        A_rad = s.conj().T + s
        b_rad = gamma + quad(lift.S_E, u0)
    else:
        A_rad = lift.R["E"]
        b_rad = gamma
    if np.real(np.trace(A_rad @ U0)) < b_rad * (1 - 1e-9):
        raise RadarInfeasible("incumbent phases violate the radar constraint")

    def make():
        p = SdpProblem(n)
        for i in range(n):
            E = np.zeros((n, n))
            E[i, i] = 1.0
            p.add_eq(E, 1.0)
        p.add_ineq(A_rad, b_rad)
        return p

    U, mus = _dinkelbach(num, den, make, U0, tol, max_iter)

    def feasible(u):
        Uc = np.outer(u, u.conj())
        return np.real(np.trace(A_rad @ Uc)) >= b_rad * (1 - 1e-9)

    def score(u):
        Uc = np.outer(u, u.conj())
        return (1 + np.real(np.trace(num @ Uc))) / (1 + np.real(np.trace(den @ Uc)))

    u, _ = gaussian_randomization(U, n_samples, feasible, score, rng, project="phase",
                                  extra=[np.append(q0, 1.0)])
    return phases_from_lifted(u), U, mus


def run_dfrc_dinkelbach(ch: ChannelSet, noise: NoisePowers, P: float, gamma: float,
                        opts: Optional[DfrcOptions] = None):
    """Alternate Dinkelbach w- and q-updates. Returns (DfrcDesign, DfrcTrace).

    A block update is kept only if it does not lower the secrecy rate of a
    radar-feasible incumbent. Radar infeasibility yields ``feasible=False``.
    """
    opts = opts or DfrcOptions()
    if opts.n_starts > 1:
        return _best_of_starts(lambda o: _dinkelbach_single(ch, noise, P, gamma, o), ch, noise, P, gamma, opts)
    return _dinkelbach_single(ch, noise, P, gamma, opts)


def _dinkelbach_single(ch, noise, P, gamma, opts: DfrcOptions):
    t0 = time.perf_counter()
    rng = np.random.default_rng(opts.seed)
    q = np.ones(ch.M, dtype=complex) if opts.q0 is None else np.asarray(opts.q0, dtype=complex)
    w = _initial_w(ch, q) if opts.w0 is None else np.asarray(opts.w0, dtype=complex)
    trace = DfrcTrace()

    def metric(w_, q_):
        C_B, C_E, C_s, gA = _summary(DfrcDesign(w_, q_), ch, noise, P, gamma, opts.radar)
        return C_B - C_E, gA >= gamma * (1 - FEASIBILITY_SLACK)

    cs_prev = None
    for it in range(1, opts.max_outer + 1):
        cur, cur_ok = metric(w, q)
        try:
            w_new, _, mus = dinkelbach_w(ch, noise, P, gamma, q, opts.dinkelbach_tol, w, rng,
                                         opts.n_samples, opts.radar, opts.dinkelbach_max_iter)
            trace.mu.append(mus)
            val, ok = metric(w_new, q)
            if ok and (not cur_ok or val >= cur):
                w, cur, cur_ok = w_new, val, ok
        except (RadarInfeasible, RandomizationInfeasible):
            if not cur_ok:
                trace.feasible = False
                trace.reason = "radar_infeasible"
                trace.iterations = it
                break
        if opts.optimize_q and ch.M > 0 and cur_ok:
            try:
                q_new, _, mus = dinkelbach_q(ch, noise, P, gamma, w, q, opts.dinkelbach_tol, rng,
                                             opts.n_samples, opts.radar, opts.dinkelbach_max_iter)
                trace.mu.append(mus)
                val, ok = metric(w, q_new)
                if ok and val >= cur:
                    q, cur = q_new, val
            except (RadarInfeasible, RandomizationInfeasible):
                pass
        trace.cs.append(max(0.0, cur) if cur_ok else 0.0)
        trace.objective.append(cur)
        C_B, C_E, _, gA = _summary(DfrcDesign(w, q), ch, noise, P, gamma, opts.radar)
        trace.points.append((C_B, C_E, gA))
        trace.iterations = it
        if cs_prev is not None and abs(cur - cs_prev) <= opts.tol * max(abs(cs_prev), 1e-12):
            trace.reason = "converged"
            break
        cs_prev = cur
    else:
        trace.reason = "max_outer"
    if trace.reason != "radar_infeasible":
        trace.feasible = metric(w, q)[1]
    trace.wall_ms = 1e3 * (time.perf_counter() - t0)
    return DfrcDesign(w, q), trace


def design_metrics(design: DfrcDesign, ch, noise, P, gamma, radar="snr"):
    """(C_B, C_E, C_s, gamma_A) of a DFRC design."""
    return _summary(design, ch, noise, P, gamma, radar)
