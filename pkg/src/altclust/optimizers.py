"""Solvers for the orthonormally constrained projection subproblem.

* ``ism_solve``: fixed-point iteration W <- eig_min(Phi(W)).
* ``sm_solve``: Riemannian gradient descent on the Stiefel manifold with a
  QR retraction and Armijo backtracking.
* ``dg_solve``: dimension growth, one column at a time by projected gradient
  descent on the sphere inside the complement of the earlier columns.

No solver raises on non-convergence; the trace carries ``converged`` and
``stalled`` flags instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .kernels import gaussian_kernel
from .linalg import StiefelPoint, eig_min, qr_retract, subspace_distance, sym_eig_full
from .objective import WSubproblem, laplacian_contract

MIN_STEP = 1e-16


class Method(str, Enum):
    ISM = "ism"
    SM = "sm"
    DG = "dg"


@dataclass(frozen=True)
class SolverConfig:
    method: Method = Method.ISM
    max_iter: int = 500
    tol: float = 1e-6
    seed: int = 0
    sm_step: float = 1.0
    sm_backtrack: float = 0.5
    armijo_c: float = 1e-4
    dg_inner_max: int = 500

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.sm_backtrack < 1:
            raise ValueError("sm_backtrack must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")


@dataclass(frozen=True)
class IterRecord:
    iteration: int
    cost: float
    residual: float
    step: float
    time: float


@dataclass
class SolveTrace:
    method: Method
    records: list[IterRecord] = field(default_factory=list)
    converged: bool = False
    stalled: bool = False
    reseeded_columns: list[int] = field(default_factory=list)

    @property
    def n_iter(self) -> int:
        return len(self.records)

    def append(self, cost, residual, step, t0):
        self.records.append(IterRecord(len(self.records) + 1, float(cost), float(residual),
                                       float(step), time.perf_counter() - t0))


def _evaluate(prob: WSubproblem, W: np.ndarray) -> tuple[float, np.ndarray]:
    K = gaussian_kernel(prob.X, W, prob.sigma).K
    GK = prob.gamma * K
    return -float(GK.sum()), laplacian_contract(prob.X, GK / prob.sigma**2)


def _cost(prob: WSubproblem, W: np.ndarray) -> float:
    return -float(np.sum(prob.gamma * gaussian_kernel(prob.X, W, prob.sigma).K))


def _lagrangian_residual(Phi: np.ndarray, W: np.ndarray) -> float:
    G = Phi @ W
    return float(np.linalg.norm(G - W @ (W.T @ G), "fro") / (1.0 + np.linalg.norm(Phi, "fro")))


def _finish(prob: WSubproblem, W: np.ndarray) -> StiefelPoint:
    """Attach the q smallest eigenvalues of Phi at the returned point."""
    _, Phi = _evaluate(prob, W)
    values = sym_eig_full(Phi).values[: W.shape[1]]
    return StiefelPoint(W, values.copy())


def spectral_init(prob: WSubproblem) -> StiefelPoint:
    """Minimizer of the second-order Taylor model at W = 0: Phi with K = 1."""
    Phi0 = laplacian_contract(prob.X, prob.gamma / prob.sigma**2)
    return eig_min(Phi0, prob.q)


def ism_solve(prob: WSubproblem, W0: StiefelPoint, cfg: SolverConfig):
    t0 = time.perf_counter()
    trace = SolveTrace(Method.ISM)
    W = W0.W
    best_f, best_W = np.inf, W
    for _ in range(cfg.max_iter):
        f, Phi = _evaluate(prob, W)
        if f < best_f:
            best_f, best_W = f, W
        W_next = eig_min(Phi, prob.q).W
        step = subspace_distance(W, W_next)
        trace.append(f, _lagrangian_residual(Phi, W), step, t0)
        W = W_next
        if step <= cfg.tol:
            trace.converged = True
            break
    if not trace.converged:
        # the fixed-point map can cycle; hand back the lowest-cost iterate seen
        if _cost(prob, W) > best_f:
            W = best_W
    return _finish(prob, W), trace


def sm_solve(prob: WSubproblem, W0: StiefelPoint, cfg: SolverConfig):
    t0 = time.perf_counter()
    trace = SolveTrace(Method.SM)
    W = W0.W
    f, Phi = _evaluate(prob, W)
    for _ in range(cfg.max_iter):
        G = Phi @ W
        GR = G - W @ (0.5 * (W.T @ G + G.T @ W))
        gnorm2 = float(np.sum(GR * GR))
        if np.sqrt(gnorm2) <= cfg.tol * (1.0 + abs(f)):
            trace.converged = True
            break
        eta = cfg.sm_step
        while True:
            W_new = qr_retract(W - eta * GR)
            f_new = _cost(prob, W_new)
            if f_new <= f - cfg.armijo_c * eta * gnorm2:
                break
            eta *= cfg.sm_backtrack
            if eta < MIN_STEP:
                trace.stalled = True
                break
        if trace.stalled:
            break
        step = subspace_distance(W, W_new)
        W = W_new
        f, Phi = _evaluate(prob, W)
        trace.append(f, _lagrangian_residual(Phi, W), step, t0)
    return _finish(prob, W), trace


def _complement_basis(P: np.ndarray, d: int) -> np.ndarray:
    """Orthonormal basis of span(P)^perp, from the eigenvectors of I - P P^T."""
    proj = np.eye(d) - P @ P.T
    pairs = sym_eig_full(proj)
    return pairs.vectors[:, P.shape[1]:]


def dg_solve(prob: WSubproblem, W0: StiefelPoint, cfg: SolverConfig):
    t0 = time.perf_counter()
    trace = SolveTrace(Method.DG)
    d, q = prob.d, prob.q
    cols: list[np.ndarray] = []
    budget = cfg.max_iter
    all_converged = True
    for c in range(q):
        P = np.column_stack(cols) if cols else np.zeros((d, 0))

        def project(v):
            return v - P @ (P.T @ v)

        w = project(W0.W[:, c])
        if np.linalg.norm(w) < 1e-12:
            w = _complement_basis(P, d)[:, 0]
            trace.reseeded_columns.append(c)
        w = w / np.linalg.norm(w)

        def partial(v):
            return np.column_stack(cols + [v])

        f, Phi = _evaluate(prob, partial(w))
        col_converged = False
        for _ in range(min(cfg.dg_inner_max, budget)):
            g = project(Phi @ w)
            gR = g - w * (w @ g)
            gnorm2 = float(gR @ gR)
            if np.sqrt(gnorm2) <= cfg.tol * (1.0 + abs(f)):
                col_converged = True
                break
            eta = cfg.sm_step
            while True:
                v = project(w - eta * g)
                nv = np.linalg.norm(v)
                if nv < 1e-12:
                    v = _complement_basis(P, d)[:, 0]
                    trace.reseeded_columns.append(c)
                    nv = 1.0
                v = v / nv
                f_new = _cost(prob, partial(v))
                if f_new <= f - cfg.armijo_c * eta * gnorm2:
                    break
                eta *= cfg.sm_backtrack
                if eta < MIN_STEP:
                    trace.stalled = True
                    break
            if trace.stalled:
                break
            step = float(np.sqrt(max(0.0, 2.0 - 2.0 * (w @ v) ** 2)))
            w = v
            budget -= 1
            f, Phi = _evaluate(prob, partial(w))
            trace.append(f, _lagrangian_residual(Phi, partial(w)), step, t0)
        else:
            # inner budget exhausted; re-check the stopping rule at the final iterate
            g = project(Phi @ w)
            col_converged = np.linalg.norm(g - w * (w @ g)) <= cfg.tol * (1.0 + abs(f))
        all_converged &= bool(col_converged)
        cols.append(w)
        if trace.stalled:
            all_converged = False
            for cc in range(c + 1, q):
                Pc = np.column_stack(cols)
                cols.append(_complement_basis(Pc, d)[:, 0])
            break
    W = qr_retract(np.column_stack(cols))
    trace.converged = all_converged
    return _finish(prob, W), trace


SOLVERS = {Method.ISM: ism_solve, Method.SM: sm_solve, Method.DG: dg_solve}


def solve(prob: WSubproblem, W0: StiefelPoint, cfg: SolverConfig):
    return SOLVERS[cfg.method](prob, W0, cfg)
