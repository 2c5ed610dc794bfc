"""Worst-case secure beamforming under bounded uncertainty of Eve's channel.

Eve's stacked channel ``E = [G; h_AE^H]`` is only known up to ``E = Ebar + dE``
with ``||dE||_F <= eps_E``. Both the illumination constraint and the leakage
bound must hold for every admissible ``dE``; each is turned into an LMI by
the S-lemma and the design alternates between the transmit covariance ``W``
and the lifted phase matrix ``Theta = conj(u) u^T`` (``u = [q; 1]``).

With ``e = vec(dE)`` (column-major) the received power at Eve is::

    tr(Theta E W E^H) = e^H (W^T kron Theta) e + 2 Re(p^H e) + c_E,
    p = vec(Theta Ebar W),  c_E = tr(Theta Ebar W Ebar^H).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .channels import ChannelSet, UncertaintyModel
from .metrics import NoisePowers, lift_vector, stack_T, vec
from .sdp import RandomizationInfeasible, SdpProblem, gaussian_randomization, phases_from_lifted, solve

log = logging.getLogger(__name__)

LOG2E = 1.0 / np.log(2.0)
RADAR_SLACK = 1e-6
# below this uncertainty radius the LMIs are replaced by their nominal scalar forms
EPS_NOMINAL = 1e-12


class RadarInfeasible(RuntimeError):
    """The worst-case illumination constraint admits no solution."""


# ---------------------------------------------------------------------------
# phase quantisation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizationSpec:
    bits: int

    def __post_init__(self):
        if int(self.bits) != self.bits or self.bits < 1:
            raise ValueError("bits must be a positive integer")

    @property
    def levels(self) -> int:
        return 2 ** int(self.bits)

    @property
    def step(self) -> float:
        return 2 * np.pi / self.levels

    @property
    def level_set(self) -> np.ndarray:
        return self.step * np.arange(self.levels)


def quantize_phases(q, spec: QuantizationSpec) -> np.ndarray:
    """Map each phase to the circularly nearest level; ties go to the smaller level."""
    q = np.asarray(q, dtype=complex)
    L = spec.levels
    pos = np.mod(np.angle(q), 2 * np.pi) / spec.step
    lo = np.floor(pos).astype(int) % L
    hi = (lo + 1) % L
    d_lo = pos - np.floor(pos)
    d_hi = 1.0 - d_lo
    tie = np.abs(d_lo - d_hi) <= 1e-12
    idx = np.where(d_lo < d_hi, lo, hi)
    idx = np.where(tie, np.minimum(lo, hi), idx)
    return np.exp(1j * spec.step * idx)


# ---------------------------------------------------------------------------
# uncertainty geometry and LMIs
# ---------------------------------------------------------------------------

def stack_nominal_E(G_bar, h_AE_bar) -> np.ndarray:
    """(M+1) x N matrix with rows G_bar and h_AE_bar^H."""
    G_bar = np.asarray(G_bar)
    h_AE_bar = np.asarray(h_AE_bar)
    if G_bar.ndim != 2 or h_AE_bar.shape != (G_bar.shape[1],):
        raise ValueError("G_bar must be M x N and h_AE_bar of length N")
    return np.vstack([G_bar, h_AE_bar.conj()[None, :]])


def leakage_terms(W, Theta, Ebar):
    """(A, p, c) with tr(Theta E W E^H) = e^H A e + 2 Re(p^H e) + c."""
    A = np.kron(np.asarray(W).T, Theta)
    p = vec(Theta @ Ebar @ W)
    c = float(np.real(np.trace(Theta @ Ebar @ W @ Ebar.conj().T)))
    return A, p, c


def _s_block(sign, A, p, corner, rho):
    d = len(p)
    B = np.empty((d + 1, d + 1), dtype=complex)
    B[:d, :d] = rho * np.eye(d) + sign * A
    B[:d, d] = sign * p
    B[d, :d] = sign * np.conj(p)
    B[d, d] = corner
    return B


def lmi_radar(W, Theta, Ebar, eps_E, gamma_p, P, rho1) -> np.ndarray:
    """S-lemma block certifying tr(Theta E W E^H) >= gamma_p / P over the ball."""
    A, p, c = leakage_terms(W, Theta, Ebar)
    return _s_block(+1, A, p, c - gamma_p / P - rho1 * eps_E ** 2, rho1)


def lmi_leakage(W, Theta, Ebar, eps_E, kappa, noise: NoisePowers, P, rho2) -> np.ndarray:
    """S-lemma block certifying kappa sigma_E^2 / P >= tr(Theta E W E^H) over the ball."""
    A, p, c = leakage_terms(W, Theta, Ebar)
    return _s_block(-1, A, p, kappa * noise.sigma_E_sq / P - c - rho2 * eps_E ** 2, rho2)


def taylor_eta_bound(kappa, kappa0):
    """Tangent of log2(1 + kappa) at kappa0 (an upper bound by concavity)."""
    if np.any(np.asarray(kappa0) < 0):
        raise ValueError("kappa0 must be nonnegative")
    return LOG2E * (kappa - kappa0) / (1.0 + kappa0) + np.log2(1.0 + kappa0)


# Reduced S-lemma blocks. When one factor of W^T kron Theta is rank one, the
# quadratic form, p and the ball all live on a small subspace; the orthogonal
# complement only contributes rho * I, so the LMI is equivalent to the small
# block together with rho >= 0.

def _reduced_block_theta(Theta, Ew, c, rho, corner_const, eps_E, sign):
    """Block in Theta for fixed unit-norm w (Ew = Ebar w)."""
    n = len(Theta)
    B = np.empty((n + 1, n + 1), dtype=complex)
    pv = Theta @ Ew
    B[:n, :n] = rho * np.eye(n) + sign * Theta
    B[:n, n] = sign * pv
    B[n, :n] = sign * np.conj(pv)
    B[n, n] = sign * c + corner_const - rho * eps_E ** 2
    return B


def _reduced_block_w(W, gE, nu, c, rho, corner_const, eps_E, sign):
    """Block in W for fixed Theta = conj(u) u^T (gE = Ebar^T u, nu = ||u||^2)."""
    n = len(W)
    B = np.empty((n + 1, n + 1), dtype=complex)
    pv = np.sqrt(nu) * (W.T @ gE)
    B[:n, :n] = rho * np.eye(n) + sign * nu * W.T
    B[:n, n] = sign * pv
    B[n, :n] = sign * np.conj(pv)
    B[n, n] = sign * c + corner_const - rho * eps_E ** 2
    return B


# ---------------------------------------------------------------------------
# worst-case evaluation
# ---------------------------------------------------------------------------

def _trust_region_min(H, g, radius):
    """Global minimiser of e^H H e + 2 Re(g^H e) over ||e|| <= radius."""
    if radius <= 0:
        return np.zeros_like(g)
    lam, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    b = V.conj().T @ g
    scale = max(1.0, np.abs(lam).max())
    lo = max(0.0, -lam[0])

    def norm_at(mu):
        with np.errstate(divide="ignore"):
            return np.sqrt(np.sum(np.abs(b) ** 2 / (lam + mu) ** 2))

    if lam[0] > 1e-12 * scale and norm_at(0.0) <= radius:
        return -(V @ (b / lam))
    low = np.abs(lam + lo) <= 1e-12 * scale
    if np.linalg.norm(b[low]) <= 1e-14 * max(1.0, np.linalg.norm(b)):
        # hard case: the secular function stays finite at mu = lo
        c = np.zeros_like(b)
        c[~low] = -b[~low] / (lam[~low] + lo)
        rest = radius ** 2 - np.sum(np.abs(c) ** 2)
        if rest >= 0:
            c[np.argmax(low)] += np.sqrt(rest)
            return V @ c
    f = lambda mu: norm_at(mu) - radius
    hi = lo + np.linalg.norm(b) / radius + scale
    while f(hi) > 0:
        hi *= 2
    a = lo + 1e-12 * scale
    for _ in range(300):
        if f(a) > 0:
            break
        a = lo + (a - lo) * 0.1
    mu = brentq(f, a, hi, xtol=1e-300, rtol=1e-14) if f(a) > 0 else a
    return -(V @ (b / (lam + mu)))


def _quad_value(A, p, c, e):
    return float(np.real(np.vdot(e, A @ e)) + 2 * np.real(np.vdot(p, e)) + c)


def _ascend(A, p, c, e, radius, sign, iters):
    """Projected gradient ascent of sign * f on the ball."""
    lip = 2 * max(np.linalg.eigvalsh(0.5 * (A + A.conj().T)).max(), 1e-12)
    step = 1.0 / lip
    best = sign * _quad_value(A, p, c, e)
    for _ in range(iters):
        g = 2 * (A @ e + p)
        e_new = e + sign * step * g
        nrm = np.linalg.norm(e_new)
        if nrm > radius:
            e_new *= radius / nrm
        val = sign * _quad_value(A, p, c, e_new)
        if val <= best + 1e-15 * max(1.0, abs(best)):
            break
        e, best = e_new, val
    return e, sign * best


def worst_case_power(W, Theta, Ebar, eps_E, kind="max", n_starts=8, iters=100, seed=0) -> float:
    """Extreme of tr(Theta E W E^H) over ||E - Ebar||_F <= eps_E.

    The trust-region solution is global; a few projected-gradient starts
    guard against round-off in near hard cases.
    """
    A, p, c = leakage_terms(W, Theta, Ebar)
    if eps_E <= 0:
        return c
    sign = 1.0 if kind == "max" else -1.0
    e = _trust_region_min(-sign * A, -sign * p, eps_E)
    best = _quad_value(A, p, c, e)
    rng = np.random.default_rng(seed)
    d = len(p)
    for _ in range(n_starts):
        x = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        x *= eps_E / np.linalg.norm(x)
        _, v = _ascend(A, p, c, x, eps_E, sign, iters)
        best = max(best, v) if sign > 0 else min(best, v)
    return best


def worst_case_eve_rate(W, Theta, Ebar, eps_E, noise: NoisePowers, P, budget=(8, 100), seed=0) -> float:
    """max over the uncertainty ball of Eve's rate log2(1 + P tr(Theta E W E^H) / sigma_E^2)."""
    n_starts, iters = budget
    pw = worst_case_power(W, Theta, Ebar, eps_E, "max", n_starts, iters, seed)
    return float(np.log2(1 + P * max(pw, 0.0) / noise.sigma_E_sq))


def rank_one_extremes(w, q, Ebar, eps_E):
    """Closed-form (min, max) of |u^T E w|^2 over the ball for u = [q; 1]."""
    u = lift_vector(q)
    a = abs(u @ Ebar @ w)
    r = eps_E * np.linalg.norm(u) * np.linalg.norm(w)
    return max(0.0, a - r) ** 2, (a + r) ** 2


def audit_constraints(W, Theta, Ebar, eps_E, gamma_p, kappa, noise: NoisePowers, P,
                      n_samples=1000, ascent_iters=50, seed=0):
    """Sampled worst-case check of both semi-infinite constraints.

    Draws ``n_samples`` perturbations on the boundary of the ball, polishes
    the most adverse few by projected gradient steps and returns the
    normalised violations (radar, leakage); values <= 0 mean no violation.
    """
    A, p, c = leakage_terms(W, Theta, Ebar)
    rng = np.random.default_rng(seed)
    d = len(p)
    if eps_E > 0:
        X = rng.standard_normal((n_samples, d)) + 1j * rng.standard_normal((n_samples, d))
        X *= eps_E / np.linalg.norm(X, axis=1, keepdims=True)
        vals = np.real(np.einsum("ij,jk,ik->i", X.conj(), A, X)) + 2 * np.real(X @ p.conj()) + c
        order = np.argsort(vals)
        lo = min(_ascend(A, p, c, X[i], eps_E, -1.0, ascent_iters)[1] for i in order[:5])
        hi = max(_ascend(A, p, c, X[i], eps_E, +1.0, ascent_iters)[1] for i in order[-5:])
        lo, hi = min(lo, vals.min()), max(hi, vals.max())
    else:
        lo = hi = c
    radar_need = gamma_p / P
    leak_cap = kappa * noise.sigma_E_sq / P
    return (radar_need - lo) / max(radar_need, 1e-300), (hi - leak_cap) / max(leak_cap, 1e-300)


# ---------------------------------------------------------------------------
# design containers
# ---------------------------------------------------------------------------

@dataclass
class RobustDesign:
    W: np.ndarray
    Theta: np.ndarray
    eta: float
    kappa: float
    rho1: float
    rho2: float
    w: np.ndarray
    q: np.ndarray
    rank_gap: bool = False


@dataclass
class RobustOptions:
    max_outer: int = 20
    tol: float = 1e-2
    inner_max_iter: int = 20
    inner_tol: float = 1e-4
    n_samples: int = 100
    seed: int = 0
    random_init: bool = False
    w0: Optional[np.ndarray] = None
    q0: Optional[np.ndarray] = None
    optimize_q: bool = True
    # joint (w, q) refinement after the block loop, off by default; 60 is a useful value
    refine_tries: int = 0
    refine_scales: tuple = (0.05, 0.15, 0.4)


@dataclass
class RobustTrace:
    cs: list = field(default_factory=list)
    surrogate: list = field(default_factory=list)
    feasible: bool = True
    iterations: int = 0
    reason: str = ""
    wall_ms: float = 0.0
    rank_gap: bool = False
    points: list = field(default_factory=list)  # (C_B, worst C_E, worst illumination) per pass
    refine_gain: float = 0.0  # surrogate gained by the joint refinement


@dataclass
class _Problem:
    B: np.ndarray
    Ebar: np.ndarray
    eps_E: float
    noise: NoisePowers
    P: float
    gamma_p: float


def robust_metrics(w, q, pr: _Problem):
    """Exact worst-case quantities of a rank-one design.

    Returns dict with C_B, C_E (worst case), C_s (clamped), kappa, the
    worst-case illumination power and the radar feasibility flag.
    """
    u = lift_vector(q)
    pB = pr.P * abs(u @ pr.B @ w) ** 2
    lo, hi = rank_one_extremes(w, q, pr.Ebar, pr.eps_E)
    C_B = float(np.log2(1 + pB / pr.noise.sigma_B_sq))
    kappa = pr.P * hi / pr.noise.sigma_E_sq
    C_E = float(np.log2(1 + kappa))
    illum = pr.P * lo
    return {
        "C_B": C_B, "C_E": C_E, "C_s": max(0.0, C_B - C_E), "surrogate": C_B - C_E,
        "kappa": kappa, "illumination": illum,
        "feasible": bool(illum >= pr.gamma_p * (1 - RADAR_SLACK)),
    }


def _best_multiplier(block_of_rho, rho_hi):
    """rho in [0, rho_hi] maximising the smallest eigenvalue of an affine block."""
    f = lambda r: -np.linalg.eigvalsh(block_of_rho(r)).min()
    if rho_hi <= 0:
        return 0.0, -f(0.0)
    res = minimize_scalar(f, bounds=(0.0, rho_hi), method="bounded", options={"xatol": 1e-12 * max(1.0, rho_hi)})
    r = float(res.x)
    if f(0.0) <= res.fun:
        r = 0.0
    return r, -f(r)


def certify(w, q, pr: _Problem, kappa):
    """S-lemma multipliers (rho1, rho2) certifying a rank-one design, plus the
    smallest eigenvalues of both reduced blocks (>= 0 up to round-off when certified)."""
    u = lift_vector(q)
    Theta = np.outer(u.conj(), u)
    Ew = pr.Ebar @ w
    c = float(np.real(np.vdot(Ew, Theta @ Ew)))
    if pr.eps_E <= EPS_NOMINAL:
        return 0.0, 0.0, c - pr.gamma_p / pr.P, kappa * pr.noise.sigma_E_sq / pr.P - c
    e2 = pr.eps_E ** 2
    rad = lambda r: _reduced_block_theta(Theta, Ew, c, r, -pr.gamma_p / pr.P, pr.eps_E, +1)
    leak = lambda r: _reduced_block_theta(Theta, Ew, c, r, kappa * pr.noise.sigma_E_sq / pr.P, pr.eps_E, -1)
    hi1 = max(c - pr.gamma_p / pr.P, 0.0) / e2
    hi2 = max(kappa * pr.noise.sigma_E_sq / pr.P - c, 0.0) / e2
    r1, l1 = _best_multiplier(rad, hi1)
    r2, l2 = _best_multiplier(leak, hi2)
    return r1, r2, l1, l2


# ---------------------------------------------------------------------------
# block updates
# ---------------------------------------------------------------------------

def _log_block(R_lin, const):
    """[[x / x0, 1], [1, s]] >= 0, i.e. s >= x0 / x, with x(X) = Re tr(R_lin X) + const
    already divided by x0."""

    def fn(X, aux):
        x = np.real(np.sum(R_lin * X.T)) + const
        return np.array([[x, 1.0], [1.0, aux[3]]], dtype=complex)

    return fn


def _block_problem(n, C_lin, x0, kappa0, pr: _Problem, radar_fn, leak_fn, c_fn, unit_diag):
    """SDP over X (W or Theta) and aux = [kappa, rho1, rho2, s]."""
    prob = SdpProblem(n, objective=None, n_aux=4,
                      linear_part=[-LOG2E / (1 + kappa0), 0.0, 0.0, -LOG2E])
    if unit_diag:
        for i in range(n):
            E = np.zeros((n, n))
            E[i, i] = 1.0
            prob.add_eq(E, 1.0)
    else:
        prob.add_eq(np.eye(n), 1.0)
    prob.add_lmi(_log_block(C_lin / x0, 1.0 / x0), 2)
    prob.add_ineq(None, -10.0, aux=[0.0, 0.0, 0.0, -1.0])
    prob.add_ineq(None, 0.0, aux=[1.0, 0.0, 0.0, 0.0])
    sE, P = pr.noise.sigma_E_sq, pr.P
    if pr.eps_E <= EPS_NOMINAL:
        # nominal scalar constraints; multipliers pinned at zero
        prob.add_ineq(c_fn, pr.gamma_p / P)
        prob.add_ineq(-c_fn, 0.0, aux=[sE / P, 0.0, 0.0, 0.0])
        prob.add_eq(None, 0.0, aux=[0.0, 1.0, 0.0, 0.0])
        prob.add_eq(None, 0.0, aux=[0.0, 0.0, 1.0, 0.0])
    else:
        prob.add_ineq(None, 0.0, aux=[0.0, 1.0, 0.0, 0.0])
        d = radar_fn(np.zeros((n, n)), np.zeros(4)).shape[0]
        prob.add_lmi(radar_fn, d)
        prob.add_lmi(leak_fn, d)
    return prob


def _mm_loop(make, true_obj, X0, kappa0, x_of, max_iter, tol):
    """Re-centred minorise-maximise iterations. Returns (X, kappa, status)."""
    X, kap = X0, kappa0
    obj_prev = true_obj(X, kap)
    status = "incumbent"
    for _ in range(max_iter):
        sol = solve(make(x_of(X), kap))
        if sol.status == "infeasible":
            return X, kap, "infeasible"
        if not sol.usable:
            break
        Xn = 0.5 * (sol.X + sol.X.conj().T)
        kn = max(float(sol.aux[0]), 0.0)
        obj = true_obj(Xn, kn)
        if obj < obj_prev - 1e-9 * max(1.0, abs(obj_prev)) and status != "incumbent":
            break
        X, kap, status = Xn, kn, "solved"
        done = abs(obj - obj_prev) <= tol * max(1.0, abs(obj_prev))
        obj_prev = obj
        if done:
            break
    return X, kap, status


def _exact_score(aB, aE, pr: _Problem, r):
    """Vectorised worst-case surrogate and feasibility from the two gains."""
    sB, sE = pr.noise.sigma_B_sq, pr.noise.sigma_E_sq
    mE = np.abs(aE)
    val = np.log2(1 + pr.P * np.abs(aB) ** 2 / sB) - np.log2(1 + pr.P * (mE + r) ** 2 / sE)
    ok = pr.P * np.maximum(mE - r, 0.0) ** 2 >= pr.gamma_p * (1 - RADAR_SLACK)
    return np.where(ok, val, -np.inf)


def polish_w(q, pr: _Problem, n_angle=48, n_phase=96, n_radius=8, zooms=3):
    """Best unit-norm w for fixed q by a grid over the gains it can reach.

    Only gB^T w and gE^T w matter, so w = V z + (residual norm) v_perp with V
    an orthonormal basis of span(conj gB, conj gE) and ||z|| <= 1.
    """
    u = lift_vector(q)
    gB, gE = pr.B.T @ u, pr.Ebar.T @ u
    N = len(gB)
    r = pr.eps_E * np.linalg.norm(u)
    V, _ = np.linalg.qr(np.column_stack([gB.conj(), gE.conj()]))
    cB, cE = gB @ V, gE @ V
    perp = None
    if N > V.shape[1]:
        Z = np.linalg.svd(V.conj().T)[2][V.shape[1]:].conj().T
        perp = Z[:, 0]
    lo_a, hi_a, lo_b, hi_b, lo_r = 0.0, np.pi / 2, 0.0, 2 * np.pi, 0.0
    best = None
    for _ in range(zooms):
        al = np.linspace(lo_a, hi_a, n_angle)
        be = np.linspace(lo_b, hi_b, n_phase, endpoint=False)
        rad = np.linspace(max(lo_r, 0.0), 1.0, n_radius) if perp is not None else np.array([1.0])
        A, Bt, R = np.meshgrid(al, be, rad, indexing="ij")
        z0 = R * np.cos(A)
        z1 = R * np.sin(A) * np.exp(1j * Bt)
        sc = _exact_score(cB[0] * z0 + cB[1] * z1, cE[0] * z0 + cE[1] * z1, pr, r)
        k = int(np.argmax(sc))
        if not np.isfinite(sc.flat[k]):
            break
        i, j, l = np.unravel_index(k, sc.shape)
        best = (al[i], be[j], rad[l])
        da, db = (hi_a - lo_a) / n_angle * 2, (hi_b - lo_b) / n_phase * 2
        lo_a, hi_a = max(0.0, al[i] - da), min(np.pi / 2, al[i] + da)
        lo_b, hi_b = be[j] - db, be[j] + db
        lo_r = rad[l] - 2.0 / max(n_radius, 2)
    if best is None:
        return None
    a, b, rr = best
    w = V @ np.array([rr * np.cos(a), rr * np.sin(a) * np.exp(1j * b)])
    if perp is not None and rr < 1:
        w = w + np.sqrt(1 - rr ** 2) * perp
    return w / np.linalg.norm(w)


def polish_q(w, q, pr: _Problem, sweeps=4, n_grid=256):
    """Element-wise phase sweeps on the exact worst-case surrogate for fixed w."""
    u = lift_vector(q).copy()
    bB, bE = pr.B @ w, pr.Ebar @ w
    r = pr.eps_E * np.linalg.norm(u)
    grid = np.exp(2j * np.pi * np.arange(n_grid) / n_grid)
    aB, aE = u @ bB, u @ bE
    cur = _exact_score(aB, aE, pr, r)
    for _ in range(sweeps):
        improved = False
        for i in range(len(u) - 1):
            restB, restE = aB - u[i] * bB[i], aE - u[i] * bE[i]
            sc = _exact_score(restB + grid * bB[i], restE + grid * bE[i], pr, r)
            k = int(np.argmax(sc))
            if sc[k] > cur + 1e-12:
                u[i] = grid[k]
                aB, aE, cur = restB + grid[k] * bB[i], restE + grid[k] * bE[i], sc[k]
                improved = True
        if not improved:
            break
    return u[:-1]


def refine_joint(w, q, pr: _Problem, rng, tries=60, scales=(0.05, 0.15, 0.4)):
    """Random joint moves of all phases, each followed by an exact w refit.

    With the illumination constraint active the block updates stall on its
    boundary: moving q alone or w alone loses feasibility or rate, while a
    joint move can still climb. A move is kept only if the worst-case
    surrogate improves. Returns (w, q, metrics).
    """
    cur = robust_metrics(w, q, pr)
    for s in scales:
        for _ in range(tries):
            q1 = q * np.exp(1j * s * rng.standard_normal(len(q)))
            w1 = polish_w(q1, pr)
            if w1 is None:
                continue
            q1 = polish_q(w1, q1, pr, sweeps=2)
            m = robust_metrics(w1, q1, pr)
            if m["feasible"] and m["surrogate"] > cur["surrogate"] + 1e-9 * max(1.0, abs(cur["surrogate"])):
                w, q, cur = w1, q1, m
    return w, q, cur


def _restoration_path(x_top, x_rad, project, n_points=8):
    """Candidates moving from the principal direction to the illumination-maximising one.

    The relaxed optimum usually sits on the illumination boundary, so plain
    randomization can miss feasibility by round-off; these points restore it.
    """
    x_top = x_top / np.linalg.norm(x_top)
    x_rad = x_rad / np.linalg.norm(x_rad)
    # align global phases so the path does not pass through cancellation
    x_top = x_top * np.exp(-1j * np.angle(np.vdot(x_rad, x_top)))
    out = []
    for t in np.linspace(0.0, 1.0, n_points + 1)[1:]:
        v = (1 - t) * x_top + t * x_rad
        if project == "phase":
            v = np.exp(1j * np.angle(v))
        out.append(v)
    return out


def update_w(w_inc, q, pr: _Problem, rng, opts: RobustOptions, kappa0=None):
    """Transmit-covariance block for fixed q. Returns (w, W_relaxed, status)."""
    u = lift_vector(q)
    nu = float(np.real(np.vdot(u, u)))
    N = pr.B.shape[1]
    gB = pr.B.T @ u
    gE = pr.Ebar.T @ u
    # Re tr(C W) = P |gB^T w|^2 / sigma_B^2 and |gE^T w|^2 respectively
    CB = pr.P / pr.noise.sigma_B_sq * np.outer(gB.conj(), gB)
    CE = np.outer(gE.conj(), gE)
    sE, P = pr.noise.sigma_E_sq, pr.P

    def cval(C, W):
        return float(np.real(np.sum(C * W.T)))

    def radar_fn(X, a):
        return _reduced_block_w(X, gE, nu, cval(CE, X), a[1], -pr.gamma_p / P, pr.eps_E, +1)

    def leak_fn(X, a):
        return _reduced_block_w(X, gE, nu, cval(CE, X), a[2], a[0] * sE / P, pr.eps_E, -1)

    def make(x0, k0):
        return _block_problem(N, CB, x0, k0, pr, radar_fn, leak_fn, CE, unit_diag=False)

    def true_obj(W, k):
        return np.log2(1 + cval(CB, W)) - np.log2(1 + k)

    W0 = np.outer(w_inc, w_inc.conj())
    k_inc = robust_metrics(w_inc, q, pr)["kappa"] if kappa0 is None else kappa0
    W, _, status = _mm_loop(make, true_obj, W0, k_inc, lambda W: 1 + cval(CB, W),
                            opts.inner_max_iter, opts.inner_tol)
    if status == "infeasible":
        raise RadarInfeasible("worst-case illumination constraint infeasible in the w-block")

    def feasible(v):
        return robust_metrics(v, q, pr)["feasible"]

    def score(v):
        return robust_metrics(v, q, pr)["surrogate"]

    lam, V = np.linalg.eigh(W)
    extra = [w_inc] + _restoration_path(V[:, -1], gE.conj(), project="norm")
    w_pol = polish_w(q, pr)
    if w_pol is not None:
        extra.append(w_pol)
    v, _ = gaussian_randomization(W, opts.n_samples, feasible, score, rng, project="norm",
                                  extra=extra)
    return v, W, status


def update_q(w, q_inc, pr: _Problem, rng, opts: RobustOptions):
    """Phase block for fixed w. Returns (q, Theta_relaxed, status)."""
    n = pr.Ebar.shape[0]
    Bw = pr.B @ w
    Ew = pr.Ebar @ w
    # Re tr(C Theta) = P Bw^H Theta Bw / sigma_B^2 and Ew^H Theta Ew respectively
    CB = pr.P / pr.noise.sigma_B_sq * np.outer(Bw, Bw.conj())
    CE = np.outer(Ew, Ew.conj())
    sE, P = pr.noise.sigma_E_sq, pr.P

    def cval(C, T):
        return float(np.real(np.sum(C * T.T)))

    def radar_fn(X, a):
        return _reduced_block_theta(X, Ew, cval(CE, X), a[1], -pr.gamma_p / P, pr.eps_E, +1)

    def leak_fn(X, a):
        return _reduced_block_theta(X, Ew, cval(CE, X), a[2], a[0] * sE / P, pr.eps_E, -1)

    def make(x0, k0):
        return _block_problem(n, CB, x0, k0, pr, radar_fn, leak_fn, CE, unit_diag=True)

    def true_obj(T, k):
        return np.log2(1 + cval(CB, T)) - np.log2(1 + k)

    u0 = lift_vector(q_inc)
    T0 = np.outer(u0.conj(), u0)
    k_inc = robust_metrics(w, q_inc, pr)["kappa"]
    T, _, status = _mm_loop(make, true_obj, T0, k_inc, lambda T: 1 + cval(CB, T),
                            opts.inner_max_iter, opts.inner_tol)
    if status == "infeasible":
        raise RadarInfeasible("worst-case illumination constraint infeasible in the q-block")

    def feasible(v):
        return robust_metrics(w, phases_from_lifted(v), pr)["feasible"]

    def score(v):
        return robust_metrics(w, phases_from_lifted(v), pr)["surrogate"]

    # Theta = conj(u) u^T, so u is drawn from conj(Theta)
    lam, V = np.linalg.eigh(T.conj())
    u_rad = np.exp(-1j * np.angle(Ew))  # aligns every term of u^T Ebar w
    extra = [u0] + _restoration_path(V[:, -1], u_rad, project="phase")
    extra.append(lift_vector(polish_q(w, q_inc, pr)))
    v, _ = gaussian_randomization(T.conj(), opts.n_samples, feasible, score, rng, project="phase",
                                  extra=extra)
    return phases_from_lifted(v), T, status


def quantized_metrics(w, q, pr: _Problem, spec: Optional[QuantizationSpec]):
    """Worst-case metrics after quantising q (None keeps it continuous).

    The phases are quantised post hoc; the beamformer is then re-fitted for
    the fixed phases so that the illumination constraint still holds.
    Returns (metrics dict, w, q).
    """
    qd = np.asarray(q, dtype=complex) if spec is None else quantize_phases(q, spec)
    base = robust_metrics(w, qd, pr)
    w_fit = polish_w(qd, pr)
    if w_fit is not None:
        fit = robust_metrics(w_fit, qd, pr)
        if fit["feasible"] and (not base["feasible"] or fit["surrogate"] > base["surrogate"]):
            return fit, w_fit, qd
    if not base["feasible"]:
        base = dict(base, C_s=0.0)
    return base, w, qd


# ---------------------------------------------------------------------------
# alternating optimisation
# ---------------------------------------------------------------------------

def make_problem(ch: ChannelSet, unc: UncertaintyModel, noise: NoisePowers, P, gamma_p) -> _Problem:
    B = stack_T(ch.h_IB, ch.H_AI, ch.h_AB)
    Ebar = stack_T(ch.h_IE, ch.H_AI, ch.h_AE)
    return _Problem(B=B, Ebar=Ebar, eps_E=unc.eps_E, noise=noise, P=P, gamma_p=gamma_p)


def _initial_point(ch: ChannelSet, opts: RobustOptions, rng):
    if opts.random_init:
        q = np.exp(2j * np.pi * rng.uniform(size=ch.M))
        w = rng.standard_normal(ch.N) + 1j * rng.standard_normal(ch.N)
        w /= np.linalg.norm(w)
    else:
        q = np.ones(ch.M, dtype=complex)
        h = ch.h_B(q)
        w = h.conj() / np.linalg.norm(h) if np.linalg.norm(h) > 0 else np.ones(ch.N) / np.sqrt(ch.N)
    if opts.q0 is not None:
        q = np.asarray(opts.q0, dtype=complex)
    if opts.w0 is not None:
        w = np.asarray(opts.w0, dtype=complex)
        w = w / np.linalg.norm(w)
    return w, q


def run_robust_bcd(ch_nominal: ChannelSet, unc: UncertaintyModel, noise: NoisePowers, P: float,
                   gamma_p: float, opts: Optional[RobustOptions] = None):
    """Alternate the w- and q-blocks of the worst-case design. Returns (RobustDesign, RobustTrace).

    Each block solves its S-lemma SDP by minorise-maximise steps (tangent
    bound on log2(1 + kappa) re-centred at the previous kappa), recovers a
    rank-one point by randomization with exact worst-case re-checks and is
    kept only if the worst-case secrecy surrogate C_B - log2(1 + kappa) does
    not drop. Stops on relative change <= ``opts.tol``.
    """
    t_start = time.perf_counter()
    opts = opts or RobustOptions()
    rng = np.random.default_rng(opts.seed)
    pr = make_problem(ch_nominal, unc, noise, P, gamma_p)
    trace = RobustTrace()
    w, q = _initial_point(ch_nominal, opts, rng)
    cur = robust_metrics(w, q, pr)
    W_rel = np.outer(w, w.conj())
    u = lift_vector(q)
    T_rel = np.outer(u.conj(), u)
    first = True
    prev = None
    for it in range(1, opts.max_outer + 1):
        trace.iterations = it
        try:
            # Algorithm start: kappa_0 = 0 for the very first tangent
            w_new, W_rel, _ = update_w(w, q, pr, rng, opts, kappa0=0.0 if first else None)
        except RadarInfeasible:
            if not cur["feasible"]:
                trace.feasible, trace.reason = False, "radar_infeasible"
                break
            w_new = w
        except RandomizationInfeasible:
            trace.rank_gap = True
            w_new = w
        first = False
        m = robust_metrics(w_new, q, pr)
        if m["feasible"] and (not cur["feasible"] or m["surrogate"] >= cur["surrogate"]):
            w, cur = w_new, m
        if opts.optimize_q and ch_nominal.M > 0 and cur["feasible"]:
            try:
                q_new, T_rel, _ = update_q(w, q, pr, rng, opts)
                m = robust_metrics(w, q_new, pr)
                if m["feasible"] and m["surrogate"] >= cur["surrogate"]:
                    q, cur = q_new, m
            except RandomizationInfeasible:
                trace.rank_gap = True
            except RadarInfeasible:
                pass
        if not cur["feasible"]:
            trace.feasible, trace.reason = False, "radar_infeasible"
            break
        trace.surrogate.append(cur["surrogate"])
        trace.cs.append(cur["C_s"])
        trace.points.append((cur["C_B"], cur["C_E"], cur["illumination"]))
        if prev is not None and abs(cur["surrogate"] - prev) <= opts.tol * max(abs(prev), 1e-12):
            trace.reason = "converged"
            break
        prev = cur["surrogate"]
    else:
        trace.reason = "max_outer"
    if trace.feasible and opts.optimize_q and ch_nominal.M > 0 and opts.refine_tries > 0:
        before = cur["surrogate"]
        w, q, cur = refine_joint(w, q, pr, rng, opts.refine_tries, opts.refine_scales)
        if cur["surrogate"] > before:
            trace.refine_gain = cur["surrogate"] - before
            trace.surrogate.append(cur["surrogate"])
            trace.cs.append(cur["C_s"])
            trace.points.append((cur["C_B"], cur["C_E"], cur["illumination"]))
    if not trace.feasible:
        trace.cs = [0.0]
        trace.points = []
    kappa = cur["kappa"]
    rho1, rho2, _, _ = certify(w, q, pr, kappa)
    u = lift_vector(q)
    design = RobustDesign(
        W=np.outer(w, w.conj()), Theta=np.outer(u.conj(), u), eta=float(np.log2(1 + kappa)),
        kappa=kappa, rho1=rho1, rho2=rho2, w=w, q=q, rank_gap=trace.rank_gap,
    )
    trace.wall_ms = 1e3 * (time.perf_counter() - t_start)
    return design, trace
