"""Synthetic datasets with two crossed label views, preprocessing and CSV I/O.

Every generator builds a balanced crossed design: each (original, alternative)
label combination gets the same number of samples, so the two views are
independent partitions (NMI exactly 0).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)

LABEL_HEADER = "# labels:"


@dataclass
class Dataset:
    X: np.ndarray
    original_labels: Optional[np.ndarray] = None
    alt_ground_truth: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {self.X.shape}")
        n = self.X.shape[0]
        for attr in ("original_labels", "alt_ground_truth"):
            lab = getattr(self, attr)
            if lab is None:
                continue
            lab = np.asarray(lab)
            if lab.shape != (n,):
                raise ValueError(f"{attr} must have length {n}, got shape {lab.shape}")
            if not np.issubdtype(lab.dtype, np.integer):
                if not np.all(lab == np.round(lab)):
                    raise ValueError(f"{attr} must be integer-valued")
            lab = lab.astype(np.int64)
            if lab.min() < 0:
                raise ValueError(f"{attr} must be nonnegative")
            setattr(self, attr, lab)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _crossed_labels(n_per_cell: int, rng: np.random.Generator):
    a = np.repeat([0, 0, 1, 1], n_per_cell)
    b = np.repeat([0, 1, 0, 1], n_per_cell)
    perm = rng.permutation(a.size)
    return a[perm], b[perm]


def gen_small_gauss(seed: int = 0, center: float = 2.0, std: float = 0.25) -> Dataset:
    """40 samples, 4 blobs at (+-c, +-c). Original view: sign of feature 2;
    alternative view: sign of feature 1."""
    rng = np.random.default_rng(seed)
    alt, orig = _crossed_labels(10, rng)
    centers = np.column_stack([np.where(alt == 1, center, -center),
                               np.where(orig == 1, center, -center)])
    X = centers + std * rng.standard_normal(centers.shape)
    return Dataset(X, original_labels=orig, alt_ground_truth=alt, name="sg")


def lg_rotation() -> np.ndarray:
    """45-degree rotation about feature 1, mixing features 2 and 3."""
    c = s = np.sqrt(0.5)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def gen_large_gauss(seed: int = 0, center: float = 2.0, std: float = 0.4,
                    noise_range: tuple[float, float] = (0.0, 1.0)) -> Dataset:
    """1000 samples in 4 dimensions: four blobs on a 2x2 grid in the plane of
    features 1-2, rotated 45 degrees into 3-D, plus a uniform-noise feature 4."""
    rng = np.random.default_rng(seed)
    alt, orig = _crossed_labels(250, rng)
    centers = np.column_stack([np.where(alt == 1, center, -center),
                               np.where(orig == 1, center, -center),
                               np.zeros(alt.size)])
    Z = centers + std * rng.standard_normal(centers.shape)
    X3 = Z @ lg_rotation().T
    noise = rng.uniform(noise_range[0], noise_range[1], size=(alt.size, 1))
    return Dataset(np.hstack([X3, noise]), original_labels=orig, alt_ground_truth=alt, name="lg")


def _parabolas(labels: np.ndarray, rng: np.random.Generator, jitter: float) -> np.ndarray:
    """Two interleaved half-parabolas: y = 1 - t^2 (label 0) and the mirrored
    copy (1 + t, t^2 - 1) (label 1), t uniform on [-1, 1]."""
    t = rng.uniform(-1.0, 1.0, size=labels.size)
    x = np.where(labels == 0, t, 1.0 + t)
    y = np.where(labels == 0, 1.0 - t**2, t**2 - 1.0)
    return np.column_stack([x, y]) + jitter * rng.standard_normal((labels.size, 2))


def gen_moons(seed: int = 0, with_noise: bool = False, jitter: float = 0.1,
              blob_center: float = 2.0, blob_std: float = 0.3,
              noise_range: tuple[float, float] = (0.0, 1.0)) -> Dataset:
    """Moon (400 x 4) or MoonN (1000 x 7).

    Features 1-2 hold the parabolas (alternative view), features 3-4 two
    Gaussian blobs at +-(c, c) (original view). MoonN appends three uniform
    noise features.
    """
    rng = np.random.default_rng(seed)
    n = 1000 if with_noise else 400
    alt, orig = _crossed_labels(n // 4, rng)
    P = _parabolas(alt, rng, jitter)
    sgn = np.where(orig == 1, 1.0, -1.0)[:, None]
    G = sgn * np.array([[blob_center, blob_center]]) + blob_std * rng.standard_normal((n, 2))
    parts = [P, G]
    if with_noise:
        parts.append(rng.uniform(noise_range[0], noise_range[1], size=(n, 3)))
    return Dataset(np.hstack(parts), original_labels=orig, alt_ground_truth=alt,
                   name="moonn" if with_noise else "moon")


GENERATORS = {
    "sg": lambda seed: gen_small_gauss(seed),
    "lg": lambda seed: gen_large_gauss(seed),
    "moon": lambda seed: gen_moons(seed, with_noise=False),
    "moonn": lambda seed: gen_moons(seed, with_noise=True),
}


def preprocess_center_scale(X, return_flags: bool = False):
    """Zero-mean, unit population variance per column; constant columns -> 0."""
    X = np.asarray(X, dtype=float)
    mu = X.mean(axis=0)
    Xc = X - mu
    sd = np.sqrt(np.mean(Xc**2, axis=0))
    const = sd <= 1e-12 * np.maximum(1.0, np.abs(mu))
    if np.any(const):
        log.warning("constant columns mapped to zero: %s", np.flatnonzero(const).tolist())
    out = np.zeros_like(Xc)
    out[:, ~const] = Xc[:, ~const] / sd[~const]
    return (out, const) if return_flags else out


def pca_reduce(X, variance_kept: float = 0.85, return_ratios: bool = False):
    """Project centered X onto the leading principal components whose
    cumulative explained variance first reaches ``variance_kept``."""
    if not 0 < variance_kept <= 1:
        raise ValueError("variance_kept must lie in (0, 1]")
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    var = s**2
    total = var.sum()
    if total == 0:
        raise ValueError("X has zero variance")
    ratios = var / total
    rank = int(np.sum(s > s[0] * max(X.shape) * np.finfo(float).eps))
    cum = np.cumsum(ratios[:rank])
    k = int(np.searchsorted(cum, variance_kept - 1e-12) + 1)
    k = min(k, rank)
    Z = Xc @ Vt[:k].T
    return (Z, ratios) if return_ratios else Z


def _fmt(v: float) -> str:
    return repr(float(v))


def save_csv(dataset: Dataset, path, labels=None) -> None:
    """Write features, then any of (original, alternative, extra labels)."""
    cols = [dataset.X]
    label_cols = [lab for lab in (dataset.original_labels, dataset.alt_ground_truth, labels)
                  if lab is not None]
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        if label_cols:
            fh.write(f"{LABEL_HEADER} last" + (f" {len(label_cols)}" if len(label_cols) > 1 else "") + "\n")
        for i in range(dataset.n):
            row = [_fmt(v) for v in dataset.X[i]] + [str(int(lab[i])) for lab in label_cols]
            fh.write(",".join(row) + "\n")


def load_csv(path, name: Optional[str] = None) -> Dataset:
    """Read the CSV format written by :func:`save_csv`.

    An optional first line ``# labels: last`` (or ``# labels: last 2``) marks
    the trailing label columns: the first of them is the original clustering,
    the second (if present) the alternative ground truth.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    n_labels = 0
    if lines[0].startswith("#"):
        header = lines.pop(0)
        if header.startswith(LABEL_HEADER):
            fields = header[len(LABEL_HEADER):].split()
            if not fields or fields[0] != "last" or len(fields) > 2:
                raise ValueError(f"{path}: unrecognized label header {header!r}")
            n_labels = int(fields[1]) if len(fields) == 2 else 1
        if not lines:
            raise ValueError(f"{path}: no data rows")
    rows = []
    width = None
    for r, line in enumerate(lines, start=1):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ValueError(f"{path}: row {r} has {len(cells)} columns, expected {width}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            bad = next(j for j, c in enumerate(cells) if not _is_float(c))
            raise ValueError(f"{path}: row {r}, column {bad + 1}: non-numeric cell {cells[bad]!r}") from None
    A = np.array(rows, dtype=float)
    if n_labels >= A.shape[1]:
        raise ValueError(f"{path}: {n_labels} label columns but only {A.shape[1]} columns")
    X = A[:, : A.shape[1] - n_labels]
    labels = []
    for j in range(A.shape[1] - n_labels, A.shape[1]):
        col = A[:, j]
        bad = np.flatnonzero((col < 0) | (col != np.round(col)))
        if bad.size:
            raise ValueError(f"{path}: row {bad[0] + 1}, column {j + 1}: invalid label {col[bad[0]]!r}")
        labels.append(col.astype(np.int64))
    return Dataset(X, original_labels=labels[0] if labels else None,
                   alt_ground_truth=labels[1] if len(labels) > 1 else None,
                   name=name or path.stem)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False
