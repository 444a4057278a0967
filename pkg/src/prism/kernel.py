"""Kernel evaluation and dense Gram matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, PrismError


@dataclass(frozen=True)
class KernelConfig:
    kind: str = "rbf"
    sigma: float = 1.0  # width in the units of the (scaled) features

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise PrismError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not self.sigma > 0:
            raise PrismError(f"rbf kernel needs sigma > 0, got {self.sigma}")


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    config: KernelConfig

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def eval_kernel(x: np.ndarray, z: np.ndarray, cfg: KernelConfig) -> float:
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise DimensionMismatch(f"shapes {x.shape} vs {z.shape}")
    if cfg.kind == "linear":
        return float(x @ z)
    d2 = float(((x - z) ** 2).sum())
    return float(np.exp(-d2 / (cfg.sigma ** 2)))


def gram(points: np.ndarray, cfg: KernelConfig) -> GramMatrix:
    """Pairwise kernel matrix over the rows of ``points``.

    Computed row by row from explicit differences (no dot-product shortcut,
    so entries match eval_kernel) and mirrored so K is bitwise symmetric.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DimensionMismatch(f"need a nonempty 2-d array, got shape {X.shape}")
    N = X.shape[0]
    if cfg.kind == "linear":
        K = X @ X.T
    else:
        d2 = np.empty((N, N), dtype=np.float64)
        for i in range(N):
            d2[i] = ((X - X[i]) ** 2).sum(axis=1)
        K = np.exp(-d2 / (cfg.sigma ** 2))
    K = np.triu(K) + np.triu(K, 1).T  # mirror the upper triangle
    if cfg.kind == "rbf":
        np.fill_diagonal(K, 1.0)
    K.flags.writeable = False
    return GramMatrix(K, cfg)


def cross_gram(A: np.ndarray, B: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """k(a_i, b_j) for rows of A against rows of B (len(A) x len(B))."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"feature counts differ: {A.shape[1]} vs {B.shape[1]}")
    if cfg.kind == "linear":
        return A @ B.T
    out = np.empty((A.shape[0], B.shape[0]), dtype=np.float64)
    for i in range(A.shape[0]):
        out[i] = np.exp(-((B - A[i]) ** 2).sum(axis=1) / (cfg.sigma ** 2))
    return out
