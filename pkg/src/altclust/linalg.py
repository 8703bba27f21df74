"""Dense symmetric eigensolves, Stiefel utilities and bilateral centering.

All eigenvector output follows one convention: eigenvalues ascending
(algebraic order) and each eigenvector's first entry with magnitude above
``SIGN_EPS`` made positive. Downstream iterations rely on this for replay.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

SIGN_EPS = 1e-12
SYMMETRY_RTOL = 1e-8


class EigenSolveError(RuntimeError):
    """Raised when LAPACK fails to converge on a symmetric eigenproblem."""

    def __init__(self, message: str, iterations: Optional[int] = None):
        super().__init__(message)
        self.iterations = iterations


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True)
class StiefelPoint:
    """A column-orthonormal ``d x q`` matrix, optionally with the eigenvalues
    it was selected for (ascending)."""

    W: np.ndarray
    eigenvalues: Optional[np.ndarray] = None

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.ndim != 2:
            raise ValueError(f"W must be 2-D, got shape {W.shape}")
        d, q = W.shape
        if not 1 <= q <= d:
            raise ValueError(f"need 1 <= q <= d, got d={d}, q={q}")
        object.__setattr__(self, "W", W)
        if self.eigenvalues is not None:
            ev = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
            if ev.shape[0] != q:
                raise ValueError(f"expected {q} eigenvalues, got {ev.shape[0]}")
            if np.any(np.diff(ev) < 0):
                raise ValueError("eigenvalues must be sorted ascending")
            object.__setattr__(self, "eigenvalues", ev)

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def q(self) -> int:
        return self.W.shape[1]


def _check_symmetric(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    asym = np.max(np.abs(M - M.T)) if M.size else 0.0
    scale = max(1.0, np.max(np.abs(M))) if M.size else 1.0
    if asym > SYMMETRY_RTOL * scale:
        raise ValueError(f"matrix is not symmetric (max |M - M^T| = {asym:.3e})")
    return M


def normalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the first entry with ``|v| > SIGN_EPS`` is positive."""
    V = np.array(vectors, dtype=float, copy=True)
    for j in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, j]) > SIGN_EPS)
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
    return V


def sym_eig_full(M) -> EigenPairs:
    M = _check_symmetric(M)
    # symmetrize exactly so LAPACK sees the same input for M and M^T
    S = 0.5 * (M + M.T)
    try:
        values, vectors = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise EigenSolveError(f"eigh failed to converge: {exc}", iterations=None) from exc
    return EigenPairs(values=values, vectors=normalize_signs(vectors))


def eig_min(M, q: int) -> StiefelPoint:
    """Eigenvectors of the ``q`` algebraically smallest eigenvalues."""
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    if not 1 <= q <= d:
        raise ValueError(f"need 1 <= q <= {d}, got q={q}")
    pairs = sym_eig_full(M)
    return StiefelPoint(pairs.vectors[:, :q].copy(), pairs.values[:q].copy())


def eig_max(M, k: int) -> StiefelPoint:
    """Eigenvectors of the ``k`` largest eigenvalues, largest first.

    The attached eigenvalues stay ascending (StiefelPoint invariant), so they
    are reported in reverse column order.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got k={k}")
    pairs = sym_eig_full(M)
    idx = np.arange(n - 1, n - 1 - k, -1)
    return StiefelPoint(pairs.vectors[:, idx].copy(), np.sort(pairs.values[idx]))


def orthonormality_defect(W) -> float:
    W = np.asarray(W, dtype=float)
    q = W.shape[1]
    return float(np.linalg.norm(W.T @ W - np.eye(q), "fro"))


def subspace_distance(W1, W2, atol: float = 1e-6) -> float:
    """Frobenius distance between the orthogonal projectors onto span(W1), span(W2)."""
    W1 = np.asarray(W1, dtype=float)
    W2 = np.asarray(W2, dtype=float)
    if W1.shape != W2.shape:
        raise ValueError(f"shape mismatch {W1.shape} vs {W2.shape}")
    for name, W in (("W1", W1), ("W2", W2)):
        defect = orthonormality_defect(W)
        if defect > atol:
            raise ValueError(f"{name} is not column-orthonormal (defect {defect:.3e})")
    # ||P1 - P2||_F^2 = 2q - 2||W1^T W2||_F^2, but the direct form keeps
    # the triangle inequality sharp in floating point
    diff = W1 @ W1.T - W2 @ W2.T
    return float(np.linalg.norm(diff, "fro"))


def center_bilateral(M) -> np.ndarray:
    """``H M H`` with ``H = I - 11^T/n``, without forming ``H``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    row = M.mean(axis=1, keepdims=True)
    col = M.mean(axis=0, keepdims=True)
    return M - row - col + M.mean()


def qr_retract(Y: np.ndarray) -> np.ndarray:
    """Q factor of ``Y`` with a positive R diagonal (unique, deterministic)."""
    Q, R = np.linalg.qr(Y)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def random_stiefel(d: int, q: int, seed) -> StiefelPoint:
    rng = np.random.default_rng(seed)
    return StiefelPoint(qr_retract(rng.standard_normal((d, q))))


def random_feasible_tangent(W, seed, max_retries: int = 10) -> np.ndarray:
    """Unit-norm ``Z`` with ``Z^T W + W^T Z = 0``.

    ``Z = W A + (I - W W^T) B`` with ``A`` skew-symmetric.
    """
    W = W.W if isinstance(W, StiefelPoint) else np.asarray(W, dtype=float)
    d, q = W.shape
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        A = rng.standard_normal((q, q))
        A = A - A.T
        B = rng.standard_normal((d, q))
        Z = W @ A + B - W @ (W.T @ B)
        norm = np.linalg.norm(Z, "fro")
        if norm > 1e-12:
            return Z / norm
    raise RuntimeError(f"could not draw a nonzero tangent after {max_retries} tries")
