"""Small dense complex-Hermitian SDP solver and Gaussian randomization.

The solver accepts problems of the form::

    maximize    Re tr(C X) + c_aux . aux
    subject to  Re tr(A_i X) + a_i . aux  = b_i
                Re tr(G_k X) + g_k . aux >= h_k
                L_l(X, aux) >= 0      (affine Hermitian-valued maps)
                X >= 0                (Hermitian PSD, size var_dim)

Internally the Hermitian variable is expanded in an orthonormal real basis,
equalities are eliminated by a null-space parametrisation and the result is
handed to a primal-dual path-following method (HKM direction, Mehrotra
predictor-corrector) that works blockwise in complex arithmetic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)

__all__ = [
    "LmiBlock",
    "SdpProblem",
    "SdpSolution",
    "RandomizationInfeasible",
    "solve",
    "hermitian_basis",
    "gaussian_randomization",
    "phases_from_lifted",
]

STEP_FRACTION = 0.98
_STALL_WINDOW = 30
_STALL_LEVEL = 1e-4
# iterations without improving the best residual before declaring a numerical breakdown
_BREAKDOWN_WINDOW = 8


class RandomizationInfeasible(RuntimeError):
    """No randomization candidate satisfied the feasibility predicate."""


@dataclass
class LmiBlock:
    """Affine Hermitian-matrix-valued map ``fn(X, aux)`` required to be PSD."""

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dim: int


@dataclass
class _Linear:
    A: Optional[np.ndarray]
    aux: Optional[np.ndarray]
    b: float


@dataclass
class SdpProblem:
    """Maximisation problem over a Hermitian PSD matrix and real auxiliaries."""

    var_dim: int
    objective: Optional[np.ndarray] = None
    n_aux: int = 0
    linear_part: Optional[np.ndarray] = None
    eq_constraints: list = field(default_factory=list)
    ineq_constraints: list = field(default_factory=list)
    lmi_blocks: list = field(default_factory=list)

    def add_eq(self, A=None, b=0.0, aux=None):
        self.eq_constraints.append(_Linear(A, aux, float(b)))

    def add_ineq(self, A=None, b=0.0, aux=None):
        """Add ``Re tr(A X) + aux_coeffs . aux >= b``."""
        self.ineq_constraints.append(_Linear(A, aux, float(b)))

    def add_lmi(self, fn, dim):
        self.lmi_blocks.append(LmiBlock(fn, int(dim)))


@dataclass
class SdpSolution:
    X: np.ndarray
    aux: np.ndarray
    objective_value: float
    status: str
    kkt_residuals: tuple
    iterations: int = 0
    duals: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def usable(self) -> bool:
        """Optimal, or stopped early with a feasible point and a small gap."""
        if self.status == "optimal":
            return True
        p, _, g = self.kkt_residuals
        return self.status == "max_iter" and p <= 1e-5 and abs(g) <= 1e-3


# --------------------------------------------------------------------------
# compilation to the internal dual form  max b.y  s.t.  C - sum y_j A_j >= 0
# --------------------------------------------------------------------------

def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal basis of n x n Hermitian matrices under Re tr(A B).

    Returns an array of shape (n*n, n, n).
    """
    basis = np.zeros((n * n, n, n), dtype=complex)
    k = 0
    s = 1.0 / np.sqrt(2.0)
    for i in range(n):
        basis[k, i, i] = 1.0
        k += 1
    for i in range(n):
        for j in range(i + 1, n):
            basis[k, i, j] = basis[k, j, i] = s
            k += 1
            basis[k, i, j] = 1j * s
            basis[k, j, i] = -1j * s
            k += 1
    return basis


def _functional(A, basis):
    if A is None:
        return np.zeros(len(basis))
    A = np.asarray(A)
    return np.real(np.einsum("ij,kji->k", A, basis))


def _aux_vec(aux, p):
    out = np.zeros(p)
    if aux is not None:
        aux = np.atleast_1d(np.asarray(aux, dtype=float))
        out[: len(aux)] = aux
    return out


@dataclass
class _Compiled:
    # LMI blocks: constant (d, d) and coefficient stacks (m, d, d)
    C_blocks: list
    A_blocks: list
    c_lp: np.ndarray
    A_lp: np.ndarray  # (m, n_lp)
    b: np.ndarray
    # reconstruction v = v0 + N @ (D * y)
    v0: np.ndarray
    N: np.ndarray
    D: np.ndarray
    obj_const: float
    obj_scale: float
    block_scales: list
    lp_scales: np.ndarray
    c_full: np.ndarray


def _hermitize(M):
    return 0.5 * (M + M.conj().T)


def _compile(problem: SdpProblem):
    n, p = problem.var_dim, problem.n_aux
    basis = hermitian_basis(n) if n > 0 else np.zeros((0, 0, 0), dtype=complex)
    nx = n * n
    nv = nx + p

    def row(con: _Linear):
        return np.concatenate([_functional(con.A, basis), _aux_vec(con.aux, p)])

    c_full = np.concatenate([
        _functional(problem.objective, basis),
        _aux_vec(problem.linear_part, p),
    ])

    # affine stacks in v-coordinates: (const, coeffs[nv])
    blocks = []
    if n > 0:
        coeffs = np.zeros((nv, n, n), dtype=complex)
        coeffs[:nx] = basis
        blocks.append((np.zeros((n, n), dtype=complex), coeffs))
    for lmi in problem.lmi_blocks:
        d = lmi.dim
        zX = np.zeros((n, n), dtype=complex)
        za = np.zeros(p)
        F0 = _hermitize(np.asarray(lmi.fn(zX, za), dtype=complex).reshape(d, d))
        coeffs = np.zeros((nv, d, d), dtype=complex)
        for k in range(nx):
            coeffs[k] = _hermitize(np.asarray(lmi.fn(basis[k], za), dtype=complex)) - F0
        for j in range(p):
            e = np.zeros(p)
            e[j] = 1.0
            coeffs[nx + j] = _hermitize(np.asarray(lmi.fn(zX, e), dtype=complex)) - F0
        blocks.append((F0, coeffs))

    G = np.array([row(c) for c in problem.ineq_constraints]).reshape(-1, nv)
    h = np.array([c.b for c in problem.ineq_constraints], dtype=float)

    # equality elimination
    if problem.eq_constraints:
        E = np.array([row(c) for c in problem.eq_constraints])
        f = np.array([c.b for c in problem.eq_constraints], dtype=float)
        U, s, Vt = np.linalg.svd(E, full_matrices=True)
        tol = max(E.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0) * 10
        r = int(np.sum(s > tol))
        v0 = Vt[:r].T @ ((U[:, :r].T @ f) / s[:r])
        if np.linalg.norm(E @ v0 - f) > 1e-8 * (1 + np.linalg.norm(f)):
            return None
        N = Vt[r:].T
    else:
        v0 = np.zeros(nv)
        N = np.eye(nv)
    m = N.shape[1]

    C_blocks, A_blocks, block_scales = [], [], []
    const_blocks = []
    for F0, coeffs in blocks:
        Cb = F0 + np.tensordot(v0, coeffs, axes=1)
        Ab = -np.tensordot(N.T, coeffs, axes=1)  # (m, d, d)
        nrm = max(np.linalg.norm(Ab[j]) for j in range(m)) if m else 0.0
        if nrm <= 1e-14 * max(1.0, np.linalg.norm(Cb)):
            const_blocks.append(Cb)
            continue
        s = 1.0 / nrm
        C_blocks.append(_hermitize(Cb * s))
        A_blocks.append(Ab * s)
        block_scales.append(s)
    for Cb in const_blocks:
        if np.linalg.eigvalsh(_hermitize(Cb)).min() < -1e-9 * max(1.0, np.linalg.norm(Cb)):
            return None

    c_lp = (G @ v0 - h) if len(h) else np.zeros(0)
    A_lp = -(G @ N).T if len(h) else np.zeros((m, 0))
    lp_scales = np.ones(len(h))
    if len(h):
        nrm = np.linalg.norm(A_lp, axis=0)
        keep = nrm > 1e-14 * np.maximum(1.0, np.abs(c_lp))
        if np.any(~keep & (c_lp < -1e-9)):
            return None
        c_lp, A_lp, nrm = c_lp[keep], A_lp[:, keep], nrm[keep]
        lp_scales = 1.0 / nrm
        c_lp = c_lp * lp_scales
        A_lp = A_lp * lp_scales

    # column scaling of y
    col = np.zeros(m)
    for Ab in A_blocks:
        col += np.sum(np.abs(Ab.reshape(m, -1)) ** 2, axis=1)
    col += np.sum(A_lp ** 2, axis=1)
    col = np.sqrt(col)
    D = np.where(col > 0, 1.0 / np.where(col > 0, col, 1.0), 1.0)
    A_blocks = [Ab * D[:, None, None] for Ab in A_blocks]
    A_lp = A_lp * D[:, None]

    b = D * (N.T @ c_full)
    bn = np.linalg.norm(b)
    obj_scale = 1.0 / bn if bn > 0 else 1.0
    b = b * obj_scale
    return _Compiled(
        C_blocks=C_blocks, A_blocks=A_blocks, c_lp=c_lp, A_lp=A_lp, b=b,
        v0=v0, N=N, D=D, obj_const=float(c_full @ v0), obj_scale=obj_scale,
        block_scales=block_scales, lp_scales=lp_scales, c_full=c_full,
    )


# --------------------------------------------------------------------------
# interior-point kernel
# --------------------------------------------------------------------------

def _inner(A, B):
    return float(np.real(np.vdot(A, B)))


def _max_step(X, dX):
    """Largest alpha with X + alpha dX PSD (X positive definite)."""
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li = sla.solve_triangular(L, np.eye(len(X)), lower=True)
    S = Li @ dX @ Li.conj().T
    lam = np.linalg.eigvalsh(_hermitize(S)).min()
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lp(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def _ipm(cp: _Compiled, tol: float, max_iter: int):
    m = len(cp.b)
    Cs, As = cp.C_blocks, cp.A_blocks
    c_lp, A_lp = cp.c_lp, cp.A_lp
    nb = len(Cs)
    n_lp = len(c_lp)
    n_tot = sum(len(C) for C in Cs) + n_lp
    Aflat = [Ab.reshape(m, -1) for Ab in As]

    normC = np.sqrt(sum(np.linalg.norm(C) ** 2 for C in Cs) + np.sum(c_lp ** 2))
    normb = np.linalg.norm(cp.b)

    # starting point
    xi = max(10.0, np.sqrt(n_tot))
    for j in range(m):
        aj = np.sqrt(sum(np.linalg.norm(Ab[j]) ** 2 for Ab in As) + np.sum(A_lp[j] ** 2))
        xi = max(xi, n_tot * (1 + abs(cp.b[j])) / (1 + aj))
    eta = max(10.0, np.sqrt(n_tot), normC, 1.0)
    X = [xi * np.eye(len(C), dtype=complex) for C in Cs]
    Z = [eta * np.eye(len(C), dtype=complex) for C in Cs]
    x = xi * np.ones(n_lp)
    z = eta * np.ones(n_lp)
    y = np.zeros(m)

    def A_op(Xs, xv):
        out = np.zeros(m)
        for k in range(nb):
            out += np.real(Aflat[k].conj() @ Xs[k].reshape(-1))
        if n_lp:
            out += A_lp @ xv
        return out

    def AT_op(yv):
        blocks = [np.tensordot(yv, As[k], axes=1) for k in range(nb)]
        return blocks, (A_lp.T @ yv if n_lp else np.zeros(0))

    status = "max_iter"
    history = []
    it = 0
    rel_p = rel_d = gap = np.inf
    best = None  # (merit, it, y, X, x, residuals) of the most accurate iterate
    for it in range(1, max_iter + 1):
        ATy, ATy_lp = AT_op(y)
        Rd = [Cs[k] - ATy[k] - Z[k] for k in range(nb)]
        rd = c_lp - ATy_lp - z
        rp = cp.b - A_op(X, x)
        pobj = sum(_inner(Cs[k], X[k]) for k in range(nb)) + c_lp @ x
        dobj = cp.b @ y
        mu = (sum(_inner(X[k], Z[k]) for k in range(nb)) + x @ z) / max(n_tot, 1)

        rel_p = np.linalg.norm(rp) / (1 + normb)
        rel_d = np.sqrt(sum(np.linalg.norm(R) ** 2 for R in Rd) + rd @ rd) / (1 + normC)
        user_obj = cp.obj_const + dobj / cp.obj_scale
        gap = (pobj - dobj) / cp.obj_scale / (1 + abs(user_obj))
        history.append(rel_d)
        if rel_p <= tol and rel_d <= tol and abs(gap) <= tol:
            status = "optimal"
            break
        merit = max(rel_p, rel_d, abs(gap))
        if best is None or merit < best[0]:
            best = (merit, it, y, X, x, (rel_d, rel_p, gap))
        elif best[0] <= _STALL_LEVEL and it - best[1] >= _BREAKDOWN_WINDOW:
            # the Schur complement has lost accuracy near the solution
            break
        if len(history) > _STALL_WINDOW:
            window = history[-_STALL_WINDOW:]
            if min(window) > _STALL_LEVEL and window[-1] > 0.5 * window[0]:
                status = "infeasible"
                break
        if max((np.abs(X[k]).max() for k in range(nb)), default=0.0) > 1e12 or (
            n_lp and x.max() > 1e12
        ):
            status = "infeasible" if rel_d > _STALL_LEVEL else "max_iter"
            break

        Zinv = []
        for k in range(nb):
            try:
                Zi = np.linalg.inv(Z[k])
            except np.linalg.LinAlgError:
                Zi = np.linalg.pinv(Z[k])
            Zinv.append(_hermitize(Zi))
        M = np.zeros((m, m))
        XAZ = []
        for k in range(nb):
            G = X[k][None, :, :] @ As[k] @ Zinv[k][None, :, :]
            XAZ.append(G)
            Gt = np.swapaxes(G, 1, 2).reshape(m, -1)
            M += np.real(As[k].reshape(m, -1) @ Gt.T)
        if n_lp:
            M += (A_lp * (x / z)) @ A_lp.T
        M = 0.5 * (M + M.T)
        try:
            factor = sla.cho_factor(M, lower=True, check_finite=False)
            solveM = lambda r: sla.cho_solve(factor, r, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            reg = 1e-12 * max(1.0, np.abs(np.diag(M)).max())
            w, V = np.linalg.eigh(M)
            w = np.maximum(w, reg)
            solveM = lambda r, V=V, w=w: V @ ((V.T @ r) / w)

        def direction(sigma_mu, Kc, kc):
            # dX = (sigma mu I - Kc) Zinv - X - X Rd Zinv + sum dy X A Zinv
            base = []
            for k in range(nb):
                d = len(X[k])
                T = (sigma_mu * np.eye(d) - Kc[k]) @ Zinv[k] - X[k] - X[k] @ Rd[k] @ Zinv[k]
                base.append(T)
            base_lp = (sigma_mu - kc) / z - x - x * rd / z if n_lp else np.zeros(0)
            rhs = rp - A_op([_hermitize(T) for T in base], base_lp)
            dy = solveM(rhs)
            dX, dZ = [], []
            for k in range(nb):
                dZk = Rd[k] - np.tensordot(dy, As[k], axes=1)
                dXk = base[k] + np.tensordot(dy, XAZ[k], axes=1)
                dX.append(_hermitize(dXk))
                dZ.append(_hermitize(dZk))
            if n_lp:
                dz = rd - A_lp.T @ dy
                dx = base_lp + (x / z) * (A_lp.T @ dy)
            else:
                dz = dx = np.zeros(0)
            return dy, dX, dZ, dx, dz

        def steps(dX, dZ, dx, dz):
            ap = min([_max_step(X[k], dX[k]) for k in range(nb)] + [_max_step_lp(x, dx)])
            ad = min([_max_step(Z[k], dZ[k]) for k in range(nb)] + [_max_step_lp(z, dz)])
            return ap, ad

        zero = [np.zeros_like(Xk) for Xk in X]
        dy, dX, dZ, dx, dz = direction(0.0, zero, np.zeros(n_lp))
        ap, ad = steps(dX, dZ, dx, dz)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = (
            sum(_inner(X[k] + ap * dX[k], Z[k] + ad * dZ[k]) for k in range(nb))
            + (x + ap * dx) @ (z + ad * dz)
        ) / max(n_tot, 1)
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        Kc = [dX[k] @ dZ[k] for k in range(nb)]
        kc = dx * dz if n_lp else np.zeros(0)
        dy, dX, dZ, dx, dz = direction(sigma * mu, Kc, kc)
        ap, ad = steps(dX, dZ, dx, dz)
        ap = min(1.0, STEP_FRACTION * ap)
        ad = min(1.0, STEP_FRACTION * ad)
        if ap < 1e-12 and ad < 1e-12:
            break
        X = [_hermitize(X[k] + ap * dX[k]) for k in range(nb)]
        Z = [_hermitize(Z[k] + ad * dZ[k]) for k in range(nb)]
        x = x + ap * dx
        z = z + ad * dz
        y = y + ad * dy

    if status == "max_iter" and best is not None and best[0] < max(rel_p, rel_d, abs(gap)):
        _, _, y, X, x, (rel_d, rel_p, gap) = best
    return y, X, x, status, it, (rel_d, rel_p, gap)


def solve(problem: SdpProblem, tol: float = 1e-7, max_iter: int = 200) -> SdpSolution:
    """Solve an :class:`SdpProblem` by a primal-dual interior-point method.

    ``status`` is one of ``"optimal"``, ``"infeasible"`` or ``"max_iter"``.
    ``kkt_residuals`` holds the relative (primal, dual, gap) residuals of
    the original maximisation problem at the returned point.
    """
    n, p = problem.var_dim, problem.n_aux
    cp = _compile(problem)
    if cp is None:
        return SdpSolution(
            X=np.zeros((n, n), dtype=complex), aux=np.zeros(p), objective_value=-np.inf,
            status="infeasible", kkt_residuals=(np.inf, np.inf, np.inf),
        )
    m = len(cp.b)
    if m == 0:
        v = cp.v0
        status = "optimal"
        y = np.zeros(0)
        it, res, duals = 0, (0.0, 0.0, 0.0), []
    else:
        y, Xd, xd, status, it, res = _ipm(cp, tol, max_iter)
        v = cp.v0 + cp.N @ (cp.D * y)
        duals = [Xd[k] * cp.block_scales[k] for k in range(len(Xd))]
    X = np.zeros((n, n), dtype=complex)
    if n > 0:
        X = _hermitize(np.tensordot(v[: n * n], hermitian_basis(n), axes=1))
    aux = v[n * n:].copy()
    value = float(cp.c_full @ v)
    log.debug("sdp: status=%s iter=%d res=%s", status, it, res)
    return SdpSolution(
        X=X, aux=aux, objective_value=value, status=status,
        kkt_residuals=tuple(float(r) for r in res), iterations=it, duals=duals,
    )


# --------------------------------------------------------------------------
# rank-one recovery
# --------------------------------------------------------------------------

def _unit_modulus(x):
    mag = np.abs(x)
    out = np.ones_like(x, dtype=complex)
    nz = mag > 0
    out[nz] = x[nz] / mag[nz]
    return out


def phases_from_lifted(u: np.ndarray) -> np.ndarray:
    """RIS phase vector from a lifted vector ``u = t [q; 1]``."""
    u = np.asarray(u, dtype=complex)
    return _unit_modulus(u[:-1] / u[-1])


def gaussian_randomization(
    U: np.ndarray,
    n_samples: int = 100,
    feasibility: Optional[Callable[[np.ndarray], bool]] = None,
    score: Optional[Callable[[np.ndarray], float]] = None,
    rng: Optional[np.random.Generator] = None,
    project: str = "phase",
    extra: Sequence[np.ndarray] = (),
):
    """Recover a rank-one candidate from a relaxed PSD solution.

    Candidates are the principal eigenvector and ``n_samples`` draws from
    CN(0, U), each projected to the feasible set of the rank-one variable
    (``"phase"``: unit-modulus entries, ``"norm"``: unit norm). The feasible
    candidate with the highest ``score`` is returned as ``(vector, score)``.

    Raises
    ------
    RandomizationInfeasible
        If no candidate satisfies ``feasibility``.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    U = _hermitize(np.asarray(U, dtype=complex))
    n = len(U)
    lam, V = np.linalg.eigh(U)
    lam = np.clip(lam, 0.0, None)
    L = V * np.sqrt(lam)
    proj = _unit_modulus if project == "phase" else (lambda v: v / np.linalg.norm(v))

    cands = [proj(V[:, -1])]
    cands.extend(proj(np.asarray(e, dtype=complex)) for e in extra)
    if n_samples > 0:
        xi = (rng.standard_normal((n, n_samples)) + 1j * rng.standard_normal((n, n_samples))) / np.sqrt(2)
        S = L @ xi
        for k in range(n_samples):
            if np.linalg.norm(S[:, k]) > 0:
                cands.append(proj(S[:, k]))

    best, best_score = None, -np.inf
    for c in cands:
        if feasibility is not None and not feasibility(c):
            continue
        val = score(c) if score is not None else 0.0
        if best is None or val > best_score:
            best, best_score = c, val
    if best is None:
        raise RandomizationInfeasible("no feasible randomization candidate")
    return best, best_score
