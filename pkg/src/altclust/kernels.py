"""Gaussian kernels on projected data, degree normalization, HSIC and the
pairwise weight matrix of the projection subproblem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import center_bilateral

EXP_CLAMP = -700.0


@dataclass(frozen=True)
class KernelBundle:
    K: np.ndarray
    degrees: np.ndarray
    dinv_sqrt: np.ndarray
    sigma: float
    exponent_min: float = 0.0  # smallest pre-clamp exponent, for diagnostics

    @property
    def n(self) -> int:
        return self.K.shape[0]


@dataclass(frozen=True)
class GammaMatrix:
    gamma: np.ndarray
    psi: np.ndarray
    dinv_sqrt: np.ndarray
    lambda_weight: float


def pairwise_sq_dists(Z: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows, with an exact zero diagonal."""
    sq = np.einsum("ij,ij->i", Z, Z)
    D2 = sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)
    np.maximum(D2, 0.0, out=D2)
    D2 = 0.5 * (D2 + D2.T)
    np.fill_diagonal(D2, 0.0)
    return D2


def gaussian_kernel(X, W, sigma: float) -> KernelBundle:
    """K_ij = exp(-||W^T(x_i - x_j)||^2 / (2 sigma^2)).

    ``W`` need not be orthonormal; ``W = 0`` gives the all-ones matrix.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    if X.shape[1] != W.shape[0]:
        raise ValueError(f"X has {X.shape[1]} columns but W has {W.shape[0]} rows")
    expo = -pairwise_sq_dists(X @ W) / (2.0 * sigma**2)
    expo_min = float(expo.min()) if expo.size else 0.0
    K = np.exp(np.maximum(expo, EXP_CLAMP))
    degrees = K.sum(axis=1)
    return KernelBundle(K=K, degrees=degrees, dinv_sqrt=1.0 / np.sqrt(degrees),
                        sigma=float(sigma), exponent_min=expo_min)


def normalize_kernel(bundle: KernelBundle) -> np.ndarray:
    """D^{-1/2} K D^{-1/2}."""
    d = bundle.dinv_sqrt
    return d[:, None] * bundle.K * d[None, :]


def hsic(Ka, Kb, normalized: bool = True) -> float:
    """Tr(Ka H Kb H) / (n-1)^2; pass ``normalized=False`` to drop the factor."""
    Ka = np.asarray(Ka, dtype=float)
    Kb = np.asarray(Kb, dtype=float)
    if Ka.shape != Kb.shape or Ka.ndim != 2 or Ka.shape[0] != Ka.shape[1]:
        raise ValueError(f"need two square matrices of equal size, got {Ka.shape}, {Kb.shape}")
    n = Ka.shape[0]
    # Tr(Ka H Kb H) = <Ka, H Kb H>_F for symmetric Ka
    val = float(np.sum(Ka * center_bilateral(Kb)))
    if normalized:
        if n < 2:
            raise ValueError("normalized HSIC needs n >= 2")
        val /= (n - 1) ** 2
    return val


def gamma_matrix(U, Y, lambda_weight: float, bundle: KernelBundle) -> GammaMatrix:
    """gamma = D^{-1/2} H (U U^T - lambda Y Y^T) H D^{-1/2}.

    The 1/(n-1)^2 HSIC factor is left out; it is a positive constant of the
    objective and does not move any minimizer.
    """
    U = np.asarray(U, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = bundle.n
    if U.shape[0] != n or Y.shape[0] != n:
        raise ValueError(f"U, Y need {n} rows, got {U.shape[0]} and {Y.shape[0]}")
    if lambda_weight < 0:
        raise ValueError("lambda_weight must be >= 0")
    psi = center_bilateral(U @ U.T - lambda_weight * (Y @ Y.T))
    psi = 0.5 * (psi + psi.T)
    d = bundle.dinv_sqrt
    gamma = d[:, None] * psi * d[None, :]
    return GammaMatrix(gamma=gamma, psi=psi, dinv_sqrt=d.copy(), lambda_weight=float(lambda_weight))


def cost_hadamard(gm: GammaMatrix, bundle: KernelBundle) -> float:
    """sum_ij (Psi o dd^T o K)_ij with ``d`` the degree scaling frozen in ``gm``."""
    if gm.psi.shape != bundle.K.shape:
        raise ValueError(f"size mismatch: gamma {gm.psi.shape} vs kernel {bundle.K.shape}")
    d = gm.dinv_sqrt
    return float(np.sum(gm.psi * np.outer(d, d) * bundle.K))
