"""Alternating minimization over the projection W, the spectral embedding U
and the degree scaling D, followed by k-means on the rows of U."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from sklearn.cluster import KMeans

from .data import Dataset
from .kernels import gamma_matrix, gaussian_kernel, normalize_kernel
from .linalg import StiefelPoint, center_bilateral, eig_max, random_stiefel, subspace_distance
from .metrics import MetricsReport, clustering_quality, nmi
from .objective import WSubproblem, f_cost
from .optimizers import SolverConfig, SolveTrace, solve, spectral_init
from .verify import OptimalityReport, optimality_report, suggest_q

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KdacConfig:
    sigma: float
    lambda_weight: float
    q: int
    k: int
    solver: SolverConfig = field(default_factory=SolverConfig)
    init: str = "si"  # "si" spectral init, "ri" random orthonormal W0
    seed: int = 0
    master_max_iter: int = 20
    master_tol: float = 1e-4
    u_init: str = "spectral"
    kmeans_restarts: int = 10
    n_directions: int = 100

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.lambda_weight < 0:
            raise ValueError("lambda_weight must be >= 0")
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.master_max_iter < 1:
            raise ValueError("master_max_iter must be >= 1")
        if self.init not in ("si", "ri"):
            raise ValueError(f"init must be 'si' or 'ri', got {self.init!r}")
        if self.u_init not in ("spectral", "labels"):
            raise ValueError(f"u_init must be 'spectral' or 'labels', got {self.u_init!r}")


@dataclass(frozen=True)
class MasterRecord:
    iteration: int
    objective: float
    w_step: float
    u_step: float
    solver_iterations: int
    solver_converged: bool
    solver_stalled: bool


@dataclass
class KdacResult:
    U: np.ndarray
    W: StiefelPoint
    labels: np.ndarray
    report: Optional[OptimalityReport]
    metrics: Optional[MetricsReport]
    master_trace: list[MasterRecord]
    solve_traces: list[SolveTrace] = field(default_factory=list)
    subproblem: Optional[WSubproblem] = None
    converged: bool = False
    wall_time_s: float = 0.0


def labels_to_indicator(labels, k: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be 1-D")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    Y = np.zeros((labels.size, k))
    Y[np.arange(labels.size), labels.astype(np.int64)] = 1.0
    return Y


def update_u(K_normalized, k: int) -> np.ndarray:
    """Top-k eigenvectors of H D^{-1/2} K D^{-1/2} H."""
    return eig_max(center_bilateral(K_normalized), k).W


def kmeans(rows, k: int, seed: int = 0, restarts: int = 10, return_inertia: bool = False):
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.shape[0] < k:
        raise ValueError(f"need at least k={k} rows, got {rows.shape[0]}")
    if k == 1:
        labels = np.zeros(rows.shape[0], dtype=np.int64)
        inertia = float(np.sum((rows - rows.mean(axis=0)) ** 2))
        return (labels, inertia) if return_inertia else labels
    km = KMeans(n_clusters=k, init="k-means++", n_init=restarts, random_state=seed,
                algorithm="lloyd", max_iter=300, tol=1e-10)
    labels = km.fit_predict(rows).astype(np.int64)
    return (labels, float(km.inertia_)) if return_inertia else labels


def initial_embedding(X, original_labels, cfg: KdacConfig):
    """(U_0, kernel of the full data) used to seed the first weight matrix."""
    bundle = gaussian_kernel(X, np.eye(X.shape[1]), cfg.sigma)
    if cfg.u_init == "labels":
        Y = labels_to_indicator(original_labels, cfg.k)
        U0 = Y / np.sqrt(np.maximum(Y.sum(axis=0), 1.0))
    else:
        U0 = update_u(normalize_kernel(bundle), cfg.k)
    return U0, bundle


def kdac_run(X, original_labels, cfg: KdacConfig, dataset: Optional[Dataset] = None,
             with_report: bool = True, on_solve=None) -> KdacResult:
    """Alternate W, D and U updates; ``on_solve(iteration, prob, W, trace)``
    is called after every W-subproblem solve."""
    t0 = time.perf_counter()
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if cfg.q > d:
        raise ValueError(f"q={cfg.q} exceeds the data dimension d={d}")
    Y = labels_to_indicator(original_labels, cfg.k)
    U, bundle = initial_embedding(X, original_labels, cfg)

    if cfg.init == "si":
        gm0 = gamma_matrix(U, Y, cfg.lambda_weight, bundle)
        W = spectral_init(WSubproblem.from_gamma(X, gm0, cfg.sigma, cfg.q))
    else:
        W = random_stiefel(d, cfg.q, cfg.seed)

    master: list[MasterRecord] = []
    traces: list[SolveTrace] = []
    prob = None
    converged = False
    for it in range(1, cfg.master_max_iter + 1):
        bundle = gaussian_kernel(X, W.W, cfg.sigma)
        gm = gamma_matrix(U, Y, cfg.lambda_weight, bundle)
        prob = WSubproblem.from_gamma(X, gm, cfg.sigma, cfg.q)
        W_new, trace = solve(prob, W, cfg.solver)
        traces.append(trace)
        if on_solve is not None:
            on_solve(it, prob, W_new, trace)
        if not trace.converged:
            log.info("master iteration %d: %s solver did not converge", it, cfg.solver.method.value)
        U_new = update_u(normalize_kernel(gaussian_kernel(X, W_new.W, cfg.sigma)), cfg.k)
        w_step = subspace_distance(W.W, W_new.W)
        u_step = subspace_distance(U, U_new)
        master.append(MasterRecord(it, f_cost(prob, W_new.W), w_step, u_step, trace.n_iter,
                                   trace.converged, trace.stalled))
        W, U = W_new, U_new
        if w_step <= cfg.master_tol and u_step <= cfg.master_tol:
            converged = True
            break

    labels = kmeans(U, cfg.k, seed=cfg.seed, restarts=cfg.kmeans_restarts)
    wall = time.perf_counter() - t0
    report = optimality_report(prob, W, cfg.n_directions, cfg.seed) if with_report else None
    result = KdacResult(U=U, W=W, labels=labels, report=report, metrics=None,
                        master_trace=master, solve_traces=traces, subproblem=prob,
                        converged=converged, wall_time_s=wall)
    ds = dataset or Dataset(X, original_labels=np.asarray(original_labels))
    result.metrics = evaluate(result, ds, cfg)
    return result


def objective_value(X, W, U, Y, lambda_weight: float, sigma: float) -> float:
    """-[HSIC(XW, U) - lambda HSIC(XW, Y)] with fresh degrees, 1/(n-1)^2 dropped."""
    bundle = gaussian_kernel(X, W, sigma)
    gm = gamma_matrix(U, Y, lambda_weight, bundle)
    return -float(np.sum(gm.gamma * bundle.K))


def evaluate(result: KdacResult, dataset: Dataset, cfg: KdacConfig) -> MetricsReport:
    X = dataset.X
    truth, orig = dataset.alt_ground_truth, dataset.original_labels
    cost = float("nan")
    if orig is not None:
        cost = objective_value(X, result.W.W, result.U, labels_to_indicator(orig, cfg.k),
                               cfg.lambda_weight, cfg.sigma)
    return MetricsReport(
        nmi_vs_truth=nmi(result.labels, truth) if truth is not None else None,
        novelty=nmi(result.labels, orig) if orig is not None else None,
        clustering_quality=clustering_quality(X, result.W.W, cfg.sigma, result.labels, cfg.k),
        objective_cost=cost,
        wall_time_s=result.wall_time_s,
        iterations=sum(t.n_iter for t in result.solve_traces),
        clustering_quality_hsic=clustering_quality(X, result.W.W, cfg.sigma, result.labels,
                                                   cfg.k, scaling="hsic"),
    )


@dataclass
class GridCell:
    sigma: float
    lambda_weight: float
    q: int
    cq: float
    sigma_lhs: float
    sigma_rhs: float
    holds: bool
    source: str = "grid"

    @property
    def deficit(self) -> float:
        if self.holds:
            return 0.0
        gap = self.sigma_rhs - self.sigma_lhs
        return float(gap) if np.isfinite(gap) else float("inf")


def _rank_key(cell: GridCell):
    # satisfying cells first, then highest CQ, then closest to satisfying
    return (not cell.holds, -round(cell.cq, 10), cell.deficit, cell.sigma, cell.lambda_weight, cell.q)


def _eval_cell(X, labels, base: KdacConfig, dataset) -> tuple[GridCell, KdacResult]:
    res = kdac_run(X, labels, base, dataset=dataset)
    rep = res.report
    cell = GridCell(base.sigma, base.lambda_weight, base.q, res.metrics.clustering_quality,
                    rep.sigma_lhs, rep.sigma_rhs, rep.sigma_condition_holds)
    return cell, res


def grid_search(X, original_labels, sigma_grid: Sequence[float], lambda_grid: Sequence[float],
                q_candidates: Sequence[int], k: int, base: Optional[KdacConfig] = None,
                dataset: Optional[Dataset] = None, executor=None):
    """Pick the highest-CQ (sigma, lambda, q) cell satisfying the sigma
    condition, falling back to the highest-CQ cell closest to satisfying it.
    If the winner still fails, retry with the eigengap-maximizing q.

    Returns ``(best_config, log)`` where ``log`` lists every evaluated cell.
    """
    if not sigma_grid or not lambda_grid or not q_candidates:
        raise ValueError("grids must be non-empty")
    base = base or KdacConfig(sigma=1.0, lambda_weight=0.0, q=q_candidates[0], k=k)
    configs = [replace(base, sigma=float(s), lambda_weight=float(l), q=int(q), k=k)
               for s, l, q in itertools.product(sigma_grid, lambda_grid, q_candidates)]
    if executor is not None:
        outcomes = list(executor.map(lambda c: _eval_cell(X, original_labels, c, dataset), configs))
    else:
        outcomes = [_eval_cell(X, original_labels, c, dataset) for c in configs]
    cells = [cell for cell, _ in outcomes]
    best_idx = min(range(len(cells)), key=lambda i: _rank_key(cells[i]))
    best_cell, best_res = outcomes[best_idx]
    best_cfg = configs[best_idx]

    d = np.asarray(X).shape[1]
    if not best_cell.holds and d > 1:
        spectrum = best_res.report.phi_eigenvalues
        q_new = suggest_q(spectrum, d - 1)
        if q_new != best_cfg.q:
            cfg_q = replace(best_cfg, q=q_new)
            cell_q, _ = _eval_cell(X, original_labels, cfg_q, dataset)
            cell_q.source = "eigengap"
            cells.append(cell_q)
            if _rank_key(cell_q) < _rank_key(best_cell):
                best_cfg, best_cell = cfg_q, cell_q
    return best_cfg, cells
