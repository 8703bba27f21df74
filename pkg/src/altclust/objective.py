"""The projection subproblem: F(W), its gradient and the matrix Phi(W).

The pairwise scatter matrices A_ij = (x_i - x_j)(x_i - x_j)^T are never
formed. For symmetric weights P,

    sum_{i,j} P_ij A_ij = 2 X^T (diag(P 1) - P) X

over ordered pairs, which is what every contraction below routes through.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kernels import GammaMatrix, gaussian_kernel
from .linalg import StiefelPoint


@dataclass(frozen=True)
class WSubproblem:
    X: np.ndarray
    gamma_psi: np.ndarray
    dinv_sqrt: np.ndarray
    sigma: float
    q: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if not np.all(np.isfinite(X)):
            raise ValueError("X has non-finite entries")
        n, d = X.shape
        if self.gamma_psi.shape != (n, n) or self.dinv_sqrt.shape != (n,):
            raise ValueError("gamma_psi / dinv_sqrt do not match X")
        if not 1 <= self.q <= d:
            raise ValueError(f"need 1 <= q <= d={d}, got q={self.q}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "X", X)

    @classmethod
    def from_gamma(cls, X, gm: GammaMatrix, sigma: float, q: int) -> "WSubproblem":
        return cls(X=np.asarray(X, dtype=float), gamma_psi=gm.psi, dinv_sqrt=gm.dinv_sqrt,
                   sigma=float(sigma), q=int(q))

    @cached_property
    def gamma(self) -> np.ndarray:
        d = self.dinv_sqrt
        return d[:, None] * self.gamma_psi * d[None, :]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _as_array(W) -> np.ndarray:
    return W.W if isinstance(W, StiefelPoint) else np.asarray(W, dtype=float)


def laplacian_contract(X: np.ndarray, P: np.ndarray) -> np.ndarray:
    """sum over ordered pairs of P_ij (x_i - x_j)(x_i - x_j)^T, for symmetric P."""
    row = P.sum(axis=1)
    M = 2.0 * ((X * row[:, None]).T @ X - X.T @ P @ X)
    return 0.5 * (M + M.T)


def f_cost(prob: WSubproblem, W) -> float:
    W = _as_array(W)
    K = gaussian_kernel(prob.X, W, prob.sigma).K
    return -float(np.sum(prob.gamma * K))


def phi_matrix(prob: WSubproblem, W) -> np.ndarray:
    W = _as_array(W)
    K = gaussian_kernel(prob.X, W, prob.sigma).K
    return laplacian_contract(prob.X, prob.gamma * K / prob.sigma**2)


def f_gradient(prob: WSubproblem, W) -> np.ndarray:
    W = _as_array(W)
    return phi_matrix(prob, W) @ W


def cost_and_gradient(prob: WSubproblem, W) -> tuple[float, np.ndarray]:
    """One kernel evaluation for both F(W) and its gradient."""
    W = _as_array(W)
    K = gaussian_kernel(prob.X, W, prob.sigma).K
    GK = prob.gamma * K
    return -float(GK.sum()), laplacian_contract(prob.X, GK / prob.sigma**2) @ W


def stationarity_residual(prob: WSubproblem, W: StiefelPoint) -> float:
    """||Phi(W) W - W Lambda||_F / (1 + ||Phi(W)||_F)."""
    if not isinstance(W, StiefelPoint) or W.eigenvalues is None:
        raise ValueError("stationarity_residual needs a StiefelPoint with eigenvalues")
    Phi = phi_matrix(prob, W.W)
    R = Phi @ W.W - W.W * W.eigenvalues[None, :]
    return float(np.linalg.norm(R, "fro") / (1.0 + np.linalg.norm(Phi, "fro")))
