"""Numerical checks of first- and second-order optimality at a candidate
fixed point of the projection subproblem."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .kernels import gaussian_kernel, pairwise_sq_dists
from .linalg import EigenPairs, StiefelPoint, orthonormality_defect, random_feasible_tangent, sym_eig_full
from .objective import WSubproblem, f_cost, phi_matrix, stationarity_residual

RANK_RTOL = 1e-10
TANGENT_ATOL = 1e-8


@dataclass
class OptimalityReport:
    stationarity_residual: float
    orthonormality_defect: float
    eigengap: float
    sigma_lhs: float
    sigma_rhs: float
    sigma_condition_holds: bool
    phi_rank_ok: bool
    curvature_samples: list[tuple[int, float]] = field(default_factory=list)
    min_curvature: float = float("nan")
    curvature_scale: float = 1.0
    phi_eigenvalues: list[float] = field(default_factory=list)

    @property
    def curvature_ok(self) -> bool:
        return self.min_curvature >= -1e-8 * self.curvature_scale

    def to_dict(self) -> dict:
        out = asdict(self)
        out["curvature_samples"] = [[int(s), float(v)] for s, v in self.curvature_samples]
        out["curvature_ok"] = bool(self.curvature_ok)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "OptimalityReport":
        data = dict(data)
        data.pop("curvature_ok", None)
        data["curvature_samples"] = [(int(s), float(v)) for s, v in data.get("curvature_samples", [])]
        return cls(**data)


def eigengap(values, q: int) -> float:
    values = np.asarray(values, dtype=float)
    if not 1 <= q < values.shape[0]:
        raise ValueError(f"need 1 <= q < {values.shape[0]} for an eigengap, got q={q}")
    return float(values[q] - values[q - 1])


def suggest_q(values, q_max: int) -> int:
    """q in [1, q_max] with the largest eigengap; the smallest q wins ties."""
    values = np.asarray(values, dtype=float)
    if q_max >= values.shape[0]:
        raise ValueError("q_max must be smaller than the number of eigenvalues")
    gaps = np.diff(values)[:q_max]
    return int(np.argmax(gaps)) + 1


def sigma_condition(prob: WSubproblem, W: StiefelPoint, full_spectrum: EigenPairs):
    """(lhs, rhs, holds) for  sigma^2 * gap  >=  sum |g_ij|/sigma^2 K_ij ||x_i - x_j||^4."""
    q = W.q
    if q >= prob.d:
        raise ValueError("sigma condition needs q < d")
    s2 = prob.sigma**2
    lhs = s2 * eigengap(full_spectrum.values, q)
    K = gaussian_kernel(prob.X, W.W, prob.sigma).K
    D2 = pairwise_sq_dists(prob.X)
    rhs = float(np.sum(np.abs(prob.gamma) / s2 * K * D2**2))
    return float(lhs), rhs, bool(lhs >= rhs)


def directional_second_order(prob: WSubproblem, W: StiefelPoint, Z) -> float:
    """Tr(Z^T D grad L[Z]) at (W, Lambda) for a feasible tangent Z."""
    if W.eigenvalues is None:
        raise ValueError("W must carry its eigenvalues")
    Z = np.asarray(Z, dtype=float)
    Wm = W.W
    infeas = np.linalg.norm(Z.T @ Wm + Wm.T @ Z, "fro")
    if infeas > TANGENT_ATOL:
        raise ValueError(f"Z is not a feasible tangent (||Z^T W + W^T Z|| = {infeas:.3e})")
    s2 = prob.sigma**2
    K = gaussian_kernel(prob.X, Wm, prob.sigma).K
    weights = prob.gamma * K / s2
    XZ = prob.X @ Z
    XW = prob.X @ Wm
    zz = pairwise_sq_dists(XZ)
    # (Z^T dx_ij) . (W^T dx_ij) over ordered pairs
    cross = _pair_inner(XZ, XW)
    total = float(np.sum(weights * (zz - cross**2 / s2)))
    return total - float(np.sum((Z * Z) * W.eigenvalues[None, :]))


def _pair_inner(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """M_ij = (a_i - a_j) . (b_i - b_j)."""
    ab = np.einsum("ij,ij->i", A, B)
    return ab[:, None] + ab[None, :] - A @ B.T - B @ A.T


def finite_diff_gradient(prob: WSubproblem, W, h: float = 1e-5, func=None) -> np.ndarray:
    """Central differences of ``func`` (default F) entry by entry."""
    if not 1e-7 <= h <= 1e-3:
        raise ValueError("h must lie in [1e-7, 1e-3]")
    func = func or (lambda M: f_cost(prob, M))
    W = np.asarray(W.W if isinstance(W, StiefelPoint) else W, dtype=float)
    G = np.zeros_like(W)
    for idx in np.ndindex(*W.shape):
        E = np.zeros_like(W)
        E[idx] = h
        G[idx] = (func(W + E) - func(W - E)) / (2.0 * h)
    return G


def optimality_report(prob: WSubproblem, W: StiefelPoint, n_directions: int = 100,
                      seed: int = 0) -> OptimalityReport:
    Phi = phi_matrix(prob, W.W)
    spectrum = sym_eig_full(Phi)
    if W.eigenvalues is None:
        W = StiefelPoint(W.W, spectrum.values[: W.q].copy())
    resid = stationarity_residual(prob, W)
    defect = orthonormality_defect(W.W)
    sv = np.abs(spectrum.values)
    phi_rank_ok = bool(sv.max() > 0 and sv.min() / sv.max() > RANK_RTOL)
    if W.q < prob.d:
        gap = eigengap(spectrum.values, W.q)
        lhs, rhs, holds = sigma_condition(prob, W, spectrum)
    else:
        gap, lhs, rhs, holds = float("nan"), float("nan"), float("nan"), False
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**31 - 1, size=n_directions)
    samples = []
    for s in seeds:
        try:
            Z = random_feasible_tangent(W, int(s))
        except RuntimeError:
            continue
        samples.append((int(s), directional_second_order(prob, W, Z)))
    min_curv = min((v for _, v in samples), default=float("nan"))
    return OptimalityReport(
        stationarity_residual=resid,
        orthonormality_defect=defect,
        eigengap=gap,
        sigma_lhs=lhs,
        sigma_rhs=rhs,
        sigma_condition_holds=holds,
        phi_rank_ok=phi_rank_ok,
        curvature_samples=samples,
        min_curvature=float(min_curv),
        curvature_scale=float(1.0 + abs(spectrum.values[-1])),
        phi_eigenvalues=[float(v) for v in spectrum.values],
    )
