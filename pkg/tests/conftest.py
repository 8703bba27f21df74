"""Shared builders and brute-force oracles.

The oracles below deliberately avoid the package's vectorized helpers: every
matrix is formed explicitly (H, D, A_ij) and every sum is a plain loop.
"""

from __future__ import annotations

import numpy as np
import pytest

from altclust.kernels import gamma_matrix, gaussian_kernel
from altclust.linalg import random_stiefel
from altclust.objective import WSubproblem


def random_instance(seed: int, n: int = 10, d: int = 4, q: int = 2, k: int = 2,
                    sigma=None, lam=None):
    """A random projection subproblem and a random orthonormal W on it."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    X = (X - X.mean(0)) / X.std(0)
    labels = np.arange(n) % k
    rng.shuffle(labels)
    Y = np.eye(k)[labels]
    U = np.linalg.qr(rng.standard_normal((n, k)))[0]
    sigma = float(rng.uniform(0.7, 2.5)) if sigma is None else sigma
    lam = float(rng.uniform(0.0, 1.5)) if lam is None else lam
    W = random_stiefel(d, q, seed + 1000)
    bundle = gaussian_kernel(X, W.W, sigma)
    gm = gamma_matrix(U, Y, lam, bundle)
    prob = WSubproblem.from_gamma(X, gm, sigma, q)
    return prob, W, dict(X=X, U=U, Y=Y, sigma=sigma, lam=lam, bundle=bundle, gm=gm)


# ------------------------------------------------------------------ oracles

def loop_kernel(X, W, sigma):
    n = X.shape[0]
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            z = W.T @ (X[i] - X[j])
            K[i, j] = np.exp(-float(z @ z) / (2.0 * sigma**2))
    return K


def explicit_gamma(U, Y, lam, K):
    n = K.shape[0]
    H = np.eye(n) - np.ones((n, n)) / n
    Dm = np.diag(1.0 / np.sqrt(K.sum(axis=1)))
    return Dm @ H @ (U @ U.T - lam * Y @ Y.T) @ H @ Dm


def loop_phi(X, gamma, W, sigma):
    n, d = X.shape
    Phi = np.zeros((d, d))
    for i in range(n):
        for j in range(n):
            dx = X[i] - X[j]
            z = W.T @ dx
            kij = np.exp(-float(z @ z) / (2.0 * sigma**2))
            Phi += gamma[i, j] * kij / sigma**2 * np.outer(dx, dx)
    return Phi


def loop_cost(X, gamma, W, sigma):
    n = X.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            z = W.T @ (X[i] - X[j])
            total += gamma[i, j] * np.exp(-float(z @ z) / (2.0 * sigma**2))
    return -total


def explicit_hsic(Ka, Kb):
    n = Ka.shape[0]
    H = np.eye(n) - np.ones((n, n)) / n
    return float(np.trace(Ka @ H @ Kb @ H)) / (n - 1) ** 2


def contingency_nmi(a, b):
    """Geometric-mean NMI from an explicit contingency table, natural log."""
    a = np.asarray(a)
    b = np.asarray(b)
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    if len(ua) == len(ub) == 1:
        return 1.0
    n = a.size
    C = np.zeros((len(ua), len(ub)))
    for x, y in zip(ia, ib):
        C[x, y] += 1
    pa = C.sum(1) / n
    pb = C.sum(0) / n
    mi = 0.0
    for x in range(C.shape[0]):
        for y in range(C.shape[1]):
            if C[x, y] > 0:
                pxy = C[x, y] / n
                mi += pxy * np.log(pxy / (pa[x] * pb[y]))
    ha = -sum(p * np.log(p) for p in pa if p > 0)
    hb = -sum(p * np.log(p) for p in pb if p > 0)
    if ha == 0 or hb == 0:
        return 0.0
    return float(mi / np.sqrt(ha * hb))


def fd_curvature(prob, W, Z, h=1e-5):
    """Central difference of Tr(Z^T grad L(W + tZ)) at t = 0, Lambda held fixed."""
    from altclust.objective import f_gradient

    Wm = W.W
    dG = (f_gradient(prob, Wm + h * Z) - f_gradient(prob, Wm - h * Z)) / (2.0 * h)
    return float(np.sum(Z * dG) - np.sum(Z * Z * W.eigenvalues[None, :]))


@pytest.fixture
def sg_data():
    from altclust.data import Dataset, gen_small_gauss, preprocess_center_scale

    ds = gen_small_gauss(0)
    return Dataset(preprocess_center_scale(ds.X), ds.original_labels, ds.alt_ground_truth, "sg")
