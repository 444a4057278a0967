"""Shared instance generators and real-dataset discovery for the test suite."""

import os
from pathlib import Path

import numpy as np
import pytest

from prism.dataset import Dataset
from prism.kernel import KernelConfig
from prism.qp import nu_max

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = Path(os.environ.get("PRISM_DATA_DIR", REPO_ROOT / "data"))

# expected file names for the public benchmark sets (libsvm text format);
# see data/README.md for where to obtain them
REAL_DATASETS = {
    "breast_cancer": "breast_cancer.txt",
    "liver_disorders": "liver_disorders.txt",
    "diabetes": "diabetes.txt",
}


def real_dataset_path(name: str):
    path = DATA_DIR / REAL_DATASETS[name]
    return path if path.exists() else None


def require_real_dataset(name: str) -> Path:
    path = real_dataset_path(name)
    if path is None:
        pytest.skip(
            f"benchmark dataset {REAL_DATASETS[name]!r} not present under {DATA_DIR} "
            "(no network in the build environment; see data/README.md)")
    return path


def tiny_instance(rng, n_min=3, n_max=6, kernels=("rbf", "linear")):
    """Small well-conditioned instance: 2-d points with a minimum pairwise
    separation (keeps the Gram matrix away from singular), both classes
    present, and a feasible nu drawn away from zero."""
    N = int(rng.integers(n_min, n_max + 1))
    pts = []
    while len(pts) < N:
        cand = rng.uniform(0.0, 1.0, 2)
        if all(np.linalg.norm(cand - p) >= 0.25 for p in pts):
            pts.append(cand)
    X = np.asarray(pts)
    n_pos = int(rng.integers(1, N))
    y = np.asarray([1] * n_pos + [-1] * (N - n_pos))
    rng.shuffle(y)
    if (y == 1).sum() == 0 or (y == -1).sum() == 0:
        y[0], y[-1] = 1, -1
    kind = kernels[int(rng.integers(0, len(kernels)))]
    kernel = KernelConfig(kind, float(rng.uniform(0.4, 0.9)))
    nu = float(rng.uniform(0.3, 1.0) * nu_max(y))
    nu = max(nu, 0.05)
    return X, y, kernel, nu


def blob_dataset(seed=0, n_per_class=30, n_features=4, spread=0.22):
    """Two overlapping blobs; features 1 and 2 carry the class structure so
    rule mining has something real to find."""
    rng = np.random.default_rng(seed)
    lo = rng.normal(0.3, spread, (n_per_class, n_features))
    hi = rng.normal(0.7, spread, (n_per_class, n_features))
    lo[:, 2:] = rng.uniform(0, 1, (n_per_class, n_features - 2))
    hi[:, 2:] = rng.uniform(0, 1, (n_per_class, n_features - 2))
    X = np.clip(np.vstack([lo, hi]), 0.0, 1.0)
    y = np.asarray([1] * n_per_class + [-1] * n_per_class)
    return Dataset(X, y)


def libsvm_text(d: Dataset) -> str:
    from prism.dataset import serialize_libsvm
    return serialize_libsvm(d)
