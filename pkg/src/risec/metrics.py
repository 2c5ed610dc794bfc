"""Rates, radar SINR/SNR and the lifted quadratic forms used by the optimizers.

Lifting convention: for RIS phases q, ``u = [q; 1]`` and ``U = u u^H``. A
received power ``|h_J x|^2`` with ``h_J = h_IJ^H diag(q) H_AI + h_AJ^H`` is
``u^H R u`` where ``R = conj(T_J X T_J^H)`` and ``T_J`` stacks
``diag(conj(h_IJ)) H_AI`` over ``h_AJ^H``. Vectorisation is column-major.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channels import ChannelSet

TINY = 1e-30
_IMAG_TOL = 1e-8


@dataclass(frozen=True)
class NoisePowers:
    sigma_B_sq: float
    sigma_E_sq: float
    sigma_A_sq: float

    def __post_init__(self):
        if min(self.sigma_B_sq, self.sigma_E_sq, self.sigma_A_sq) <= 0:
            raise ValueError("noise powers must be positive")


@dataclass
class RcceDesign:
    epsilon: float
    w: np.ndarray
    R: np.ndarray
    q: np.ndarray

    @property
    def Q(self):
        return np.diag(self.q)


@dataclass
class DfrcDesign:
    w: np.ndarray
    q: np.ndarray

    @property
    def Q(self):
        return np.diag(self.q)


def real_trace(A, B=None) -> float:
    """Re tr(A B); raises if the imaginary part is not round-off."""
    t = np.trace(A) if B is None else np.sum(A * np.asarray(B).T)
    scale = np.linalg.norm(A) * (1.0 if B is None else np.linalg.norm(B))
    if abs(t.imag) > _IMAG_TOL * max(scale, abs(t.real), TINY):
        raise ValueError("trace of Hermitian product has a non-negligible imaginary part")
    return float(t.real)


def _log2_ratio(num, den):
    return float(np.log2(max(num, TINY) / max(den, TINY)))


def quad(A, x) -> float:
    return float(np.real(np.vdot(x, A @ x)))


# ---------------------------------------------------------------------------
# direct metrics
# ---------------------------------------------------------------------------

def rcce_powers(design: RcceDesign, ch: ChannelSet, P: float):
    """(P_cB, P_rB, P_cE, P_rE) received communication and radar powers."""
    out = []
    for h in (ch.h_B(design.q), ch.h_E(design.q)):
        pc = design.epsilon * P * abs(h @ design.w) ** 2
        pr = (1 - design.epsilon) * P * float(np.real(h @ design.R @ h.conj()))
        out += [pc, pr]
    return tuple(out)


def rcce_rates(design: RcceDesign, ch: ChannelSet, noise: NoisePowers, P: float):
    """Unclamped C_B, C_E and the clamped secrecy rate [C_B - C_E]^+."""
    pcB, prB, pcE, prE = rcce_powers(design, ch, P)
    C_B = _log2_ratio(prB + noise.sigma_B_sq + pcB, prB + noise.sigma_B_sq)
    C_E = _log2_ratio(prE + noise.sigma_E_sq + pcE, prE + noise.sigma_E_sq)
    return C_B, C_E, max(0.0, C_B - C_E)


def rcce_radar_sinr(design: RcceDesign, ch: ChannelSet, noise: NoisePowers, P: float) -> float:
    h = ch.h_E(design.q)
    g = float(np.real(h @ h.conj()))
    num = (1 - design.epsilon) * P * g * float(np.real(h @ design.R @ h.conj()))
    den = design.epsilon * P * g * abs(h @ design.w) ** 2 + ch.N * noise.sigma_A_sq
    return num / den


def dfrc_rates(design: DfrcDesign, ch: ChannelSet, noise: NoisePowers, P: float):
    pB = P * abs(ch.h_B(design.q) @ design.w) ** 2
    pE = P * abs(ch.h_E(design.q) @ design.w) ** 2
    C_B = float(np.log2(1 + pB / noise.sigma_B_sq))
    C_E = float(np.log2(1 + pE / noise.sigma_E_sq))
    return C_B, C_E, max(0.0, C_B - C_E)


def dfrc_radar_snr(design: DfrcDesign, ch: ChannelSet, noise: NoisePowers, P: float) -> float:
    h = ch.h_E(design.q)
    return P * float(np.real(h @ h.conj())) * abs(h @ design.w) ** 2 / (ch.N * noise.sigma_A_sq)


# ---------------------------------------------------------------------------
# lifted forms
# ---------------------------------------------------------------------------

def stack_T(h_I, H_AI, h_A) -> np.ndarray:
    """(M+1) x N matrix T with h_I^H diag(q) H_AI + h_A^H = [q; 1]^T T."""
    return np.vstack([np.asarray(h_I).conj()[:, None] * H_AI, np.asarray(h_A).conj()[None, :]])


def lifted_power(T, X) -> np.ndarray:
    """Hermitian R with u^H R u = h X h^H for h = u^T T."""
    return np.conj(T @ X @ T.conj().T)


def lift_vector(q) -> np.ndarray:
    return np.append(np.asarray(q, dtype=complex), 1.0)


def lift_matrix(q) -> np.ndarray:
    u = lift_vector(q)
    return np.outer(u, u.conj())


def vec(X) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(x, n) -> np.ndarray:
    return np.asarray(x).reshape(n, n, order="F")


def split_psd_nsd(K):
    """K = K_plus + K_minus with K_plus PSD (zero eigenvalues included) and K_minus NSD."""
    lam, V = np.linalg.eigh(0.5 * (K + K.conj().T))
    pos = lam >= 0
    Kp = (V[:, pos] * lam[pos]) @ V[:, pos].conj().T
    Km = (V[:, ~pos] * lam[~pos]) @ V[:, ~pos].conj().T
    return Kp, Km


@dataclass
class LiftedForms:
    """Quadratic forms of the RIS variable for fixed transmit-side quantities.

    ``R_c[J]`` / ``R_r[J]`` give received communication / radar power at
    node J as tr(R U). ``EhE`` is the (M+1)-square Gram matrix whose form
    u^H EhE u equals ||h_E||^2. Kronecker lifts act on ``vec(U)``.
    """

    R_c: dict
    R_r: dict
    EhE: np.ndarray
    G_rE: np.ndarray
    G_cE: np.ndarray
    K: Optional[np.ndarray] = None
    K_plus: Optional[np.ndarray] = None
    K_minus: Optional[np.ndarray] = None

    def blocks(self, J, kind="c"):
        """(A, a, Pbar) blocks of R_cJ or R_rJ, including the power factor."""
        R = (self.R_c if kind == "c" else self.R_r)[J]
        return R[:-1, :-1], R[:-1, -1], float(np.real(R[-1, -1]))


def _check_hermitian(X, name):
    X = np.asarray(X)
    if X.shape[0] != X.shape[1] or not np.allclose(X, X.conj().T, atol=1e-10 * max(1.0, np.abs(X).max())):
        raise ValueError(f"{name} must be Hermitian")


def lift_quadratics(ch: ChannelSet, W, R, epsilon: float, P: float,
                    noise: Optional[NoisePowers] = None, gamma: Optional[float] = None) -> LiftedForms:
    """Lifted RCCE powers for fixed W (communication) and R (radar covariance).

    When ``noise`` and ``gamma`` are given, also builds the radar-constraint
    matrix K (acting on [1; vec(U)]) and its PSD/NSD split.
    """
    _check_hermitian(W, "W")
    _check_hermitian(R, "R")
    T = {"B": stack_T(ch.h_IB, ch.H_AI, ch.h_AB), "E": stack_T(ch.h_IE, ch.H_AI, ch.h_AE)}
    R_c = {J: epsilon * P * lifted_power(T[J], W) for J in "BE"}
    R_r = {J: (1 - epsilon) * P * lifted_power(T[J], R) for J in "BE"}
    EhE = lifted_power(T["E"], np.eye(ch.N))
    G_rE = np.kron(R_r["E"].T, EhE)
    G_cE = np.kron(R_c["E"].T, EhE)
    forms = LiftedForms(R_c=R_c, R_r=R_r, EhE=EhE, G_rE=G_rE, G_cE=G_cE)
    if noise is not None and gamma is not None:
        n = G_rE.shape[0]
        K = np.zeros((n + 1, n + 1), dtype=complex)
        K[0, 0] = gamma * ch.N * noise.sigma_A_sq
        K[1:, 1:] = gamma * G_cE - G_rE
        forms.K = K
        forms.K_plus, forms.K_minus = split_psd_nsd(K)
    return forms


def rcce_lifted_radar_sinr(forms: LiftedForms, U, N, sigma_A_sq) -> float:
    u = vec(U)
    return quad(forms.G_rE, u) / (quad(forms.G_cE, u) + N * sigma_A_sq)


@dataclass
class DfrcLifted:
    """Lifted DFRC powers for fixed w: P_J = tr(R_J U), gamma_A = vec(U)^H S_E vec(U)."""

    R: dict
    S_E: np.ndarray
    EhE: np.ndarray

    def F(self, J, P):
        return self.R[J][:-1, :-1] / P

    def f(self, J, P):
        return self.R[J][:-1, -1] / P

    def g(self, J, P):
        return float(np.real(self.R[J][-1, -1])) / P


def dfrc_lift(ch: ChannelSet, W, P: float, noise: NoisePowers) -> DfrcLifted:
    _check_hermitian(W, "W")
    T = {"B": stack_T(ch.h_IB, ch.H_AI, ch.h_AB), "E": stack_T(ch.h_IE, ch.H_AI, ch.h_AE)}
    Rj = {J: P * lifted_power(T[J], W) for J in "BE"}
    EhE = lifted_power(T["E"], np.eye(ch.N))
    S_E = np.kron(Rj["E"].T, EhE) / (ch.N * noise.sigma_A_sq)
    return DfrcLifted(R=Rj, S_E=S_E, EhE=EhE)


def dfrc_matrices(ch: ChannelSet, q, P: float, noise: NoisePowers):
    """(M_B, M_E, M_E') for the transmit-side fractional problem at fixed q."""
    hB = ch.h_B(q)
    hE = ch.h_E(q)
    H_B = np.outer(hB.conj(), hB)
    H_E = np.outer(hE.conj(), hE)
    M_B = P / noise.sigma_B_sq * H_B
    M_E = P / noise.sigma_E_sq * H_E
    M_Ep = P * (H_E.conj().T @ H_E)
    return M_B, M_E, M_Ep


def illumination_power(Theta, W, E) -> float:
    """tr(Theta E W E^H), nonnegative real."""
    val = real_trace(Theta @ E @ W @ E.conj().T)
    return max(0.0, val)
