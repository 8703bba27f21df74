import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from altclust.kernels import gaussian_kernel
from altclust.linalg import StiefelPoint, eig_min, random_feasible_tangent, sym_eig_full
from altclust.objective import phi_matrix
from altclust.optimizers import SolverConfig, ism_solve
from altclust.verify import (
    OptimalityReport,
    directional_second_order,
    eigengap,
    finite_diff_gradient,
    optimality_report,
    sigma_condition,
    suggest_q,
)

from conftest import fd_curvature, random_instance

seeds = st.integers(0, 2**31 - 1)


def test_eigengap_and_suggest_q():
    vals = [0.0, 0.1, 5.0, 5.2, 9.0]
    assert eigengap(vals, 2) == pytest.approx(4.9)
    assert suggest_q(vals, 4) == 2
    assert suggest_q([0.0, 1.0, 2.0, 3.0], 3) == 1  # ties go to the smallest q
    with pytest.raises(ValueError):
        eigengap(vals, 5)
    with pytest.raises(ValueError):
        suggest_q(vals, 5)


def _point(prob, W):
    Phi = phi_matrix(prob, W)
    return StiefelPoint(W.W, np.sort(np.einsum("ij,ij->j", W.W, Phi @ W.W)))


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_directional_second_order_matches_finite_differences(seed):
    prob, W, _ = random_instance(seed, n=10, d=4, q=2)
    # any Lambda works for the identity; use Rayleigh quotients
    P = _point(prob, W)
    for s in range(3):
        Z = random_feasible_tangent(P, seed + s)
        an = directional_second_order(prob, P, Z)
        fd = fd_curvature(prob, P, Z)
        assert abs(an - fd) <= 1e-4 * max(1.0, abs(an))


def test_directional_rejects_infeasible_direction():
    prob, W, _ = random_instance(1)
    P = _point(prob, W)
    with pytest.raises(ValueError):
        directional_second_order(prob, P, W.W)
    with pytest.raises(ValueError):
        directional_second_order(prob, StiefelPoint(W.W), random_feasible_tangent(W, 0))


def test_sigma_condition_with_loop_rhs():
    prob, W, _ = random_instance(2, n=8, d=3, q=1)
    spectrum = sym_eig_full(phi_matrix(prob, W))
    lhs, rhs, holds = sigma_condition(prob, W, spectrum)
    K = gaussian_kernel(prob.X, W.W, prob.sigma).K
    ref = 0.0
    for i in range(prob.n):
        for j in range(prob.n):
            dx = prob.X[i] - prob.X[j]
            ref += abs(prob.gamma[i, j]) / prob.sigma**2 * K[i, j] * float(dx @ dx) ** 2
    assert rhs == pytest.approx(ref, rel=1e-10)
    assert lhs == pytest.approx(prob.sigma**2 * (spectrum.values[1] - spectrum.values[0]))
    assert holds == (lhs >= rhs)


def test_finite_diff_step_bounds():
    prob, W, _ = random_instance(0)
    with pytest.raises(ValueError):
        finite_diff_gradient(prob, W, h=1e-9)
    with pytest.raises(ValueError):
        finite_diff_gradient(prob, W, h=1e-2)


def test_report_fields_and_round_trip():
    from altclust.data import gen_moons, preprocess_center_scale
    from test_optimizers import sg_subproblem

    ds = gen_moons(0)
    ds.X = preprocess_center_scale(ds.X)
    prob, W0 = sg_subproblem(ds, sigma=3.0, lam=1.0, q=2)
    Wc, tr = ism_solve(prob, W0, SolverConfig())
    assert tr.converged
    rep = optimality_report(prob, Wc, n_directions=20, seed=1)
    assert rep.stationarity_residual <= 1e-5 and rep.orthonormality_defect <= 1e-10
    assert len(rep.curvature_samples) == 20 and len(rep.phi_eigenvalues) == 4
    assert rep.eigengap == pytest.approx(rep.phi_eigenvalues[2] - rep.phi_eigenvalues[1])
    back = OptimalityReport.from_dict(rep.to_dict())
    assert back == rep
    again = optimality_report(prob, Wc, n_directions=20, seed=1)
    assert again.curvature_samples == rep.curvature_samples


def test_report_full_dimension_has_no_gap():
    prob, W, _ = random_instance(4, d=2, q=2)
    rep = optimality_report(prob, eig_min(phi_matrix(prob, W), 2), n_directions=5)
    assert np.isnan(rep.eigengap) and not rep.sigma_condition_holds


def test_curvature_ok_threshold():
    base = dict(stationarity_residual=0.0, orthonormality_defect=0.0, eigengap=1.0,
                sigma_lhs=1.0, sigma_rhs=0.0, sigma_condition_holds=True, phi_rank_ok=True)
    assert OptimalityReport(**base, min_curvature=-1e-9, curvature_scale=1.0).curvature_ok
    assert not OptimalityReport(**base, min_curvature=-1e-7, curvature_scale=1.0).curvature_ok
