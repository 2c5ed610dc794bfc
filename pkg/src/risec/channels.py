"""Propagation channels, steering vectors, path loss and CSI-error bounds."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

LINKS = ("AI", "IB", "IE", "AE", "AB")


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watt(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class SteeringParams:
    theta: float
    n_antennas: int
    spacing_over_lambda: float = 0.5

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if self.spacing_over_lambda <= 0:
            raise ValueError("spacing_over_lambda must be positive")


@dataclass(frozen=True)
class PathLossModel:
    beta0_sq_db: float = -15.0
    d0: float = 1.0
    exponents: dict = field(
        default_factory=lambda: {"AI": 2.0, "IB": 2.0, "IE": 2.0, "AE": 2.2, "AB": 3.2}
    )

    def __post_init__(self):
        if self.d0 <= 0:
            raise ValueError("d0 must be positive")
        for k, a in self.exponents.items():
            if a <= 0:
                raise ValueError(f"path-loss exponent for {k} must be positive")


@dataclass(frozen=True)
class Geometry:
    alice: tuple = (0.0, 0.0, 0.0)
    ris: tuple = (-2.5, 2.5 * np.sqrt(3.0), 5.0)
    bob: tuple = (0.0, 30.0, 10.0 * np.sqrt(3.0))
    eve: tuple = (45.0, 15.0 * np.sqrt(3.0), 30.0)

    def distance(self, link: str) -> float:
        ends = {"AI": ("alice", "ris"), "IB": ("ris", "bob"), "IE": ("ris", "eve"),
                "AE": ("alice", "eve"), "AB": ("alice", "bob")}[link]
        a, b = (np.asarray(getattr(self, e), dtype=float) for e in ends)
        return float(np.linalg.norm(a - b))


@dataclass
class ChannelSet:
    """Alice-RIS (M x N), Alice-Bob (N), Alice-Eve (N), RIS-Bob (M), RIS-Eve (M)."""

    H_AI: np.ndarray
    h_AB: np.ndarray
    h_AE: np.ndarray
    h_IB: np.ndarray
    h_IE: np.ndarray

    def __post_init__(self):
        M, N = self.H_AI.shape
        for name, v, n in (("h_AB", self.h_AB, N), ("h_AE", self.h_AE, N),
                           ("h_IB", self.h_IB, M), ("h_IE", self.h_IE, M)):
            if v.shape != (n,):
                raise ValueError(f"{name} has shape {v.shape}, expected ({n},)")
        for v in (self.H_AI, self.h_AB, self.h_AE, self.h_IB, self.h_IE):
            if not np.all(np.isfinite(v)):
                raise ValueError("channel entries must be finite")

    @property
    def N(self) -> int:
        return self.H_AI.shape[1]

    @property
    def M(self) -> int:
        return self.H_AI.shape[0]

    def h_B(self, q):
        return effective_channel(self.h_IB, q, self.H_AI, self.h_AB)

    def h_E(self, q):
        return effective_channel(self.h_IE, q, self.H_AI, self.h_AE)

    def without_ris(self) -> "ChannelSet":
        """Copy with every RIS link zeroed (direct paths only)."""
        return replace(self, H_AI=np.zeros_like(self.H_AI),
                       h_IB=np.zeros_like(self.h_IB), h_IE=np.zeros_like(self.h_IE))


@dataclass
class UncertaintyModel:
    """Bounded CSI error for the cascaded RIS-Eve channel and Eve's angle."""

    eps_G: float
    phi: float
    theta_bar: float
    n_antennas: int
    beta_AE: float = 1.0
    spacing_over_lambda: float = 0.5

    def __post_init__(self):
        if self.eps_G < 0 or self.phi < 0:
            raise ValueError("uncertainty bounds must be nonnegative")

    @property
    def eps_A(self) -> float:
        return steering_error_bound(self.theta_bar, self.phi, self.n_antennas,
                                    self.spacing_over_lambda)

    @property
    def eps_AE(self) -> float:
        return self.beta_AE * self.eps_A

    @property
    def eps_E(self) -> float:
        return float(np.sqrt(self.eps_G ** 2 + self.eps_AE ** 2))


def steering_vector(p: SteeringParams) -> np.ndarray:
    n = np.arange(p.n_antennas)
    return np.exp(1j * 2 * np.pi * p.spacing_over_lambda * n * np.sin(p.theta))


def path_loss(distance: float, link: str, model: PathLossModel) -> float:
    """Linear power gain beta^2 = beta0^2 (d/d0)^-alpha."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    alpha = model.exponents[link]
    return float(db_to_lin(model.beta0_sq_db) * (distance / model.d0) ** (-alpha))


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(geometry, model: PathLossModel, steering: SteeringParams, rng,
                    n_ris: int = 9, gains=None) -> ChannelSet:
    """Draw one channel realisation.

    Rayleigh fading on every link except Alice-Eve, which is line of sight
    along ``steering``. ``gains`` may override the per-link power gains
    (e.g. all ones); a zero gain yields an all-zero channel.
    """
    N, M = steering.n_antennas, n_ris
    if gains is None:
        gains = {k: path_loss(geometry.distance(k), k, model) for k in LINKS}
    amp = {k: np.sqrt(gains[k]) for k in LINKS}
    H_AI = amp["AI"] * _cn(rng, M, N)
    h_AB = amp["AB"] * _cn(rng, N)
    h_IB = amp["IB"] * _cn(rng, M)
    h_IE = amp["IE"] * _cn(rng, M)
    h_AE = amp["AE"] * steering_vector(steering)
    return ChannelSet(H_AI=H_AI, h_AB=h_AB, h_AE=h_AE, h_IB=h_IB, h_IE=h_IE)


def effective_channel(h_I, Q, H_AI, h_A) -> np.ndarray:
    """h_I^H Q H_AI + h_A^H as a 1-D array of length N.

    ``Q`` may be the diagonal matrix or its diagonal.
    """
    h_I = np.asarray(h_I)
    Q = np.asarray(Q)
    q = np.diag(Q) if Q.ndim == 2 else Q
    H_AI = np.asarray(H_AI)
    h_A = np.asarray(h_A)
    if q.shape[0] != h_I.shape[0] or H_AI.shape != (h_I.shape[0], h_A.shape[0]):
        raise ValueError("dimension mismatch in effective_channel")
    return (h_I.conj() * q) @ H_AI + h_A.conj()


def cascaded_channel(h_IE, H_AI) -> np.ndarray:
    """G = diag(h_IE^H) H_AI, so that h_IE^H Q H_AI = q^T G."""
    return np.asarray(h_IE).conj()[:, None] * np.asarray(H_AI)


def steering_error_bound(theta_bar, phi, N, spacing_over_lambda=0.5) -> float:
    n = np.arange(N)
    psi = np.abs(2 * np.pi * spacing_over_lambda * n * (np.sin(theta_bar) - np.sin(theta_bar + phi)))
    return float(np.sqrt(np.sum(2.0 * (1.0 - np.cos(psi)))))


def sample_bounded_perturbation(eps, rows, cols, rng, boundary=False) -> np.ndarray:
    """Complex matrix drawn uniformly in direction with Frobenius norm <= eps.

    With ``boundary=True`` the norm equals ``eps``; otherwise the radius is
    drawn so that points are uniform in the ball.
    """
    if eps <= 0:
        return np.zeros((rows, cols), dtype=complex)
    D = _cn(rng, rows, cols)
    D /= np.linalg.norm(D)
    r = eps if boundary else eps * rng.uniform() ** (1.0 / (2 * rows * cols))
    return r * D
