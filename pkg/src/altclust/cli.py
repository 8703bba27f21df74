"""Command-line front end: ``altclust {generate,run,bench,verify,tune}``.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
Configuration precedence: command-line flags, then a JSON config file, then
built-in defaults. The effective configuration is echoed into every report.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .data import GENERATORS, Dataset, load_csv, pca_reduce, preprocess_center_scale, save_csv
from .optimizers import Method, SolverConfig, solve, spectral_init
from .pipeline import KdacConfig, KdacResult, grid_search, initial_embedding, kdac_run, labels_to_indicator
from .kernels import gamma_matrix, gaussian_kernel
from .objective import WSubproblem
from .verify import optimality_report

log = logging.getLogger("altclust")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2
STATIONARITY_TOL = 1e-6
ORTHONORMALITY_TOL = 1e-10

DEFAULTS = {
    "sigma": 1.0,
    "lambda": 0.0,
    "q": 1,
    "k": 2,
    "solver": "ism",
    "init": "si",
    "seed": 0,
    "restarts": 1,
    "master_max_iter": 20,
    "master_tol": 1e-4,
    "tol": 1e-6,
    "max_iter": 500,
    "u_init": "spectral",
    "preprocess": True,
    "pca": None,
}

VIEWS = {
    "sg": "four Gaussian blobs on a 2x2 grid; original view = sign of feature 2, alternative = sign of feature 1",
    "lg": "four Gaussian blobs rotated into 3-D plus one uniform noise feature",
    "moon": "two interleaved parabolas (features 1-2, alternative) and two Gaussian blobs (features 3-4, original)",
    "moonn": "moon plus three uniform noise features",
}


class UsageError(Exception):
    """Bad input that maps to exit code 2."""


# ---------------------------------------------------------------- config

def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
    return data


def merge_config(file_cfg: Optional[dict], flags: dict) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update(file_cfg or {})
    cfg.update({k: v for k, v in flags.items() if v is not None})
    return cfg


def to_kdac_config(cfg: dict, seed: Optional[int] = None) -> KdacConfig:
    seed = cfg["seed"] if seed is None else seed
    try:
        solver = SolverConfig(method=Method(cfg["solver"]), max_iter=int(cfg["max_iter"]),
                              tol=float(cfg["tol"]), seed=int(seed))
        return KdacConfig(sigma=float(cfg["sigma"]), lambda_weight=float(cfg["lambda"]),
                          q=int(cfg["q"]), k=int(cfg["k"]), solver=solver, init=cfg["init"],
                          seed=int(seed), master_max_iter=int(cfg["master_max_iter"]),
                          master_tol=float(cfg["master_tol"]), u_init=cfg["u_init"])
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def _config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--sigma", type=float)
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--q", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--solver", choices=[m.value for m in Method])
    p.add_argument("--init", choices=["si", "ri"])
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--master-max-iter", type=int)
    p.add_argument("--master-tol", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--u-init", choices=["spectral", "labels"])
    p.add_argument("--pca", type=float, help="keep this fraction of variance after standardizing")
    p.add_argument("--no-preprocess", dest="preprocess", action="store_const", const=False)


def _flags_dict(args) -> dict:
    return {
        "sigma": args.sigma, "lambda": args.lambda_, "q": args.q, "k": args.k,
        "solver": args.solver, "init": args.init, "seed": args.seed, "restarts": args.restarts,
        "master_max_iter": args.master_max_iter, "master_tol": args.master_tol, "tol": args.tol,
        "max_iter": args.max_iter, "u_init": args.u_init, "preprocess": args.preprocess,
        "pca": args.pca,
    }


def resolve_config(args) -> dict:
    file_cfg = load_config_file(args.config) if args.config else None
    return merge_config(file_cfg, _flags_dict(args))


# ---------------------------------------------------------------- helpers

def worker_count() -> int:
    raw = os.environ.get("ALTCLUST_THREADS")
    avail = os.cpu_count() or 1
    if raw is None or raw.strip() == "":
        return avail
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"ALTCLUST_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("ALTCLUST_THREADS must be >= 1")
    return n


def _executor(n_tasks: int):
    workers = min(worker_count(), max(n_tasks, 1))
    return ThreadPoolExecutor(max_workers=workers) if workers > 1 else None


def _map(fn, items):
    items = list(items)
    ex = _executor(len(items))
    if ex is None:
        return [fn(x) for x in items]
    with ex:
        return list(ex.map(fn, items))


def load_dataset(path) -> Dataset:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"data file not found: {p}")
    try:
        return load_csv(p)
    except (ValueError, UnicodeDecodeError) as exc:
        raise UsageError(str(exc)) from None


def prepare(ds: Dataset, cfg: dict) -> Dataset:
    if ds.original_labels is None:
        raise UsageError("data file has no original-label column (header '# labels: last')")
    X = ds.X
    if cfg.get("preprocess", True):
        X = preprocess_center_scale(X)
    if cfg.get("pca") is not None:
        X = pca_reduce(X, float(cfg["pca"]))
    return replace(ds, X=X)


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, Method):
        return obj.value
    return obj


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def env_block(seed) -> dict:
    return {
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


# ---------------------------------------------------------------- generate

def cmd_generate(args) -> int:
    if args.name not in GENERATORS:
        raise UsageError(f"unknown dataset {args.name!r}; choose from {sorted(GENERATORS)}")
    ds = GENERATORS[args.name](args.seed)
    out = Path(args.output)
    save_csv(ds, out)
    meta = {
        "name": args.name, "seed": args.seed, "n": ds.n, "d": ds.d,
        "label_columns": ["original", "alternative"],
        "views": VIEWS[args.name],
    }
    write_json(sidecar(out, ".json"), meta)
    print(f"wrote {out} ({ds.n} x {ds.d})")
    return EXIT_OK


# ---------------------------------------------------------------- run

def _restart_stats(results: list[KdacResult], seeds: list[int]) -> dict:
    keys = ["nmi_vs_truth", "novelty", "clustering_quality", "objective_cost", "wall_time_s", "iterations"]
    stats = {}
    for key in keys:
        vals = [getattr(r.metrics, key) for r in results]
        if any(v is None for v in vals):
            stats[key] = None
            continue
        arr = np.asarray(vals, dtype=float)
        stats[key] = {"mean": float(arr.mean()), "std": float(arr.std())}
    stats["seeds"] = seeds
    stats["per_run"] = [r.metrics.to_dict() for r in results]
    return stats


def execute_run(ds: Dataset, cfg: dict):
    """Run KDAC for every restart seed; the primary result is the lowest-cost run."""
    restarts = int(cfg["restarts"])
    if restarts < 1:
        raise UsageError("restarts must be >= 1")
    seeds = [int(cfg["seed"]) + i for i in range(restarts)]
    configs = [to_kdac_config(cfg, seed=s) for s in seeds]
    results = _map(lambda c: kdac_run(ds.X, ds.original_labels, c, dataset=ds), configs)
    costs = [r.metrics.objective_cost for r in results]
    best = int(np.nanargmin(costs)) if np.any(np.isfinite(costs)) else 0
    return results[best], results, seeds


def build_report(cfg: dict, result: KdacResult, results, seeds) -> dict:
    metrics = result.metrics.to_dict()
    if len(results) > 1:
        metrics["restarts"] = _restart_stats(results, seeds)
    solves = []
    for i, tr in enumerate(result.solve_traces, start=1):
        last = tr.records[-1] if tr.records else None
        solves.append({
            "master_iteration": i, "method": tr.method.value, "iterations": tr.n_iter,
            "converged": tr.converged, "stalled": tr.stalled,
            "final_cost": last.cost if last else None,
            "final_residual": last.residual if last else None,
            "reseeded_columns": tr.reseeded_columns,
        })
    return {
        "config": cfg,
        "metrics": metrics,
        "optimality": result.report.to_dict() if result.report else None,
        "traces": {
            "converged": result.converged,
            "master": [vars(r) for r in result.master_trace],
            "solves": solves,
        },
        "env": env_block(cfg["seed"]),
    }


def write_trace_csv(path, result: KdacResult) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["master_iteration", "iteration", "cost", "residual", "w_step"])
        for m, tr in enumerate(result.solve_traces, start=1):
            for r in tr.records:
                w.writerow([m, r.iteration, repr(r.cost), repr(r.residual), repr(r.step)])


def write_labels_csv(path, labels) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "label"])
        for i, lab in enumerate(labels):
            w.writerow([i, int(lab)])


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    ds = prepare(load_dataset(args.data), cfg)
    result, results, seeds = execute_run(ds, cfg)
    out = Path(args.output)
    report = build_report(cfg, result, results, seeds)
    write_json(out, report)
    write_labels_csv(sidecar(out, ".labels.csv"), result.labels)
    write_trace_csv(sidecar(out, ".trace.csv"), result)
    m = result.metrics
    print(f"nmi={_fmt(m.nmi_vs_truth)} novelty={_fmt(m.novelty)} cq={m.clustering_quality:.4f} "
          f"cost={m.objective_cost:.6g} iterations={m.iterations} time={m.wall_time_s:.3f}s")
    return EXIT_OK


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.4f}"


# ---------------------------------------------------------------- bench

def first_subproblem(ds: Dataset, kcfg: KdacConfig):
    """The first W-subproblem of a KDAC run and its spectral start."""
    X = ds.X
    Y = labels_to_indicator(ds.original_labels, kcfg.k)
    U, bundle = initial_embedding(X, ds.original_labels, kcfg)
    W0 = spectral_init(WSubproblem.from_gamma(X, gamma_matrix(U, Y, kcfg.lambda_weight, bundle),
                                              kcfg.sigma, kcfg.q))
    b0 = gaussian_kernel(X, W0.W, kcfg.sigma)
    prob = WSubproblem.from_gamma(X, gamma_matrix(U, Y, kcfg.lambda_weight, b0), kcfg.sigma, kcfg.q)
    return prob, W0


def bench_solvers(ds: Dataset, cfg: dict, solvers: list[str]) -> list[dict]:
    base = to_kdac_config(cfg)
    rows = []
    prob, W0 = first_subproblem(ds, base)
    for name in solvers:
        scfg = replace(base.solver, method=Method(name))
        t0 = time.perf_counter()
        W, tr = solve(prob, W0, scfg)
        t_first = time.perf_counter() - t0
        res = kdac_run(ds.X, ds.original_labels, replace(base, solver=scfg), dataset=ds,
                       with_report=False)
        rows.append({
            "solver": name, "d": ds.d,
            "first_solve_iterations": tr.n_iter, "first_solve_time_s": t_first,
            "first_solve_converged": tr.converged,
            "first_solve_cost": tr.records[-1].cost if tr.records else None,
            "kdac_iterations": res.metrics.iterations, "kdac_time_s": res.wall_time_s,
            "nmi_vs_truth": res.metrics.nmi_vs_truth, "novelty": res.metrics.novelty,
        })
    return rows


def cmd_bench(args) -> int:
    cfg = resolve_config(args)
    ds = prepare(load_dataset(args.data), cfg)
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    for s in solvers:
        if s not in {m.value for m in Method}:
            raise UsageError(f"unknown solver {s!r}")
    rows = []
    if args.dims_sweep:
        rng = np.random.default_rng(int(cfg["seed"]))
        X = ds.X
        for _ in range(args.dims_sweep):
            rows.extend(bench_solvers(replace(ds, X=X), cfg, solvers))
            extra = preprocess_center_scale(rng.uniform(0.0, 1.0, size=X.shape))
            X = np.hstack([X, extra])
    else:
        rows = bench_solvers(ds, cfg, solvers)
    write_json(args.output, {"config": cfg, "rows": rows, "env": env_block(cfg["seed"])})
    for r in rows:
        print(f"{r['solver']:>3} d={r['d']:<4} first-solve it={r['first_solve_iterations']:<5} "
              f"t={r['first_solve_time_s']:.4f}s  kdac it={r['kdac_iterations']:<5} t={r['kdac_time_s']:.4f}s")
    return EXIT_OK


# ---------------------------------------------------------------- verify

def verify_outcome(report, strict: bool = False) -> tuple[int, list[str]]:
    failures = []
    if not report.stationarity_residual <= STATIONARITY_TOL:
        failures.append(f"stationarity residual {report.stationarity_residual:.3e} > {STATIONARITY_TOL:g}")
    if not report.orthonormality_defect <= ORTHONORMALITY_TOL:
        failures.append(f"orthonormality defect {report.orthonormality_defect:.3e} > {ORTHONORMALITY_TOL:g}")
    if not report.curvature_ok:
        failures.append(f"negative curvature sample {report.min_curvature:.3e}")
    if strict and not report.sigma_condition_holds:
        failures.append(f"sigma condition fails (lhs {report.sigma_lhs:.4g} < rhs {report.sigma_rhs:.4g})")
    return (EXIT_VERIFY if failures else EXIT_OK), failures


def cmd_verify(args) -> int:
    if args.result:
        try:
            payload = json.loads(Path(args.result).read_text(encoding="utf-8"))
            file_cfg = payload["config"]
            if not isinstance(file_cfg, dict):
                raise TypeError("config is not an object")
        except FileNotFoundError:
            raise UsageError(f"result file not found: {args.result}") from None
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UsageError(f"{args.result}: malformed result file ({exc})") from None
        cfg = merge_config({k: v for k, v in file_cfg.items() if k in DEFAULTS}, _flags_dict(args))
    else:
        cfg = resolve_config(args)
    ds = prepare(load_dataset(args.data), cfg)
    kcfg = to_kdac_config(cfg)
    res = kdac_run(ds.X, ds.original_labels, kcfg, dataset=ds, with_report=False)
    report = optimality_report(res.subproblem, res.W, kcfg.n_directions, kcfg.seed)
    code, failures = verify_outcome(report, strict=args.strict)
    out = report.to_dict()
    out["passed"] = code == EXIT_OK
    out["failures"] = failures
    if args.output:
        write_json(args.output, {"config": cfg, "optimality": out, "env": env_block(cfg["seed"])})
    print(f"stationarity={report.stationarity_residual:.3e} orthonormality={report.orthonormality_defect:.3e} "
          f"sigma lhs={report.sigma_lhs:.4g} rhs={report.sigma_rhs:.4g} holds={report.sigma_condition_holds} "
          f"min curvature={report.min_curvature:.4g}")
    if not report.sigma_condition_holds and not args.strict:
        print("note: sigma condition (sufficient, not necessary) does not hold")
    for f in failures:
        print(f"FAIL: {f}")
    return code


# ---------------------------------------------------------------- tune

def _grid(text: Optional[str], default) -> list:
    if text is None:
        return list(default)
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad grid {text!r}") from None


def cmd_tune(args) -> int:
    cfg = resolve_config(args)
    ds = prepare(load_dataset(args.data), cfg)
    sigmas = _grid(args.sigma_grid, np.logspace(-1, 1, 20))
    lambdas = _grid(args.lambda_grid, np.logspace(-2, 1, 20))
    qs = [int(v) for v in _grid(args.q_grid, [cfg["q"]])]
    if not sigmas or not lambdas or not qs:
        raise UsageError("grids must be non-empty")
    base = to_kdac_config(cfg)
    ex = _executor(len(sigmas) * len(lambdas) * len(qs))
    try:
        best, cells = grid_search(ds.X, ds.original_labels, sigmas, lambdas, qs, base.k,
                                  base=base, dataset=ds, executor=ex)
    finally:
        if ex is not None:
            ex.shutdown()
    best_cfg = dict(cfg, sigma=best.sigma, **{"lambda": best.lambda_weight}, q=best.q)
    out = Path(args.output)
    write_json(out, best_cfg)
    with sidecar(out, ".log.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sigma", "lambda", "q", "cq", "sigma_lhs", "sigma_rhs", "holds", "source"])
        for c in cells:
            w.writerow([repr(c.sigma), repr(c.lambda_weight), c.q, repr(c.cq), repr(c.sigma_lhs),
                        repr(c.sigma_rhs), int(c.holds), c.source])
    print(f"best sigma={best.sigma:g} lambda={best.lambda_weight:g} q={best.q} ({len(cells)} cells)")
    return EXIT_OK


# ---------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="altclust", description="Kernel alternative clustering")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    g.add_argument("name")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run KDAC and write a report")
    r.add_argument("data")
    _config_flags(r)
    r.add_argument("-o", "--output", required=True)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="compare solvers from the same start")
    b.add_argument("data")
    _config_flags(b)
    b.add_argument("--solvers", default="ism,sm,dg")
    b.add_argument("--dims-sweep", type=int, default=0,
                   help="number of rows, doubling d with uniform noise between rows")
    b.add_argument("-o", "--output", required=True)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="check optimality conditions of a run")
    v.add_argument("data")
    v.add_argument("--result", help="report JSON written by 'run'")
    _config_flags(v)
    v.add_argument("--strict", action="store_true", help="also fail when the sigma condition fails")
    v.add_argument("-o", "--output")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("tune", help="grid search over sigma, lambda and q")
    t.add_argument("data")
    _config_flags(t)
    t.add_argument("--sigma-grid")
    t.add_argument("--lambda-grid")
    t.add_argument("--q-grid")
    t.add_argument("-o", "--output", required=True)
    t.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
