"""Plain nu-SVM on the dual: training, bias recovery, prediction, JSON I/O."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import Dataset
from .errors import (
    DimensionMismatch,
    EmptyTestSet,
    InfeasibleNu,
    InfeasibleSet,
    SolverFailure,
)
from .kernel import GramMatrix, KernelConfig, cross_gram, gram
from .qp import ConvexObjective, FeasibleSetA, SolveReport, SolverOptions, solve_projected_gradient

SUPPORT_EPS = 1e-12  # numerical zero for "alpha_i > 0"

DEFAULT_TRAIN_OPTS = SolverOptions(tol=1e-9, max_iter=20000, step_rule="annealed")


@dataclass
class SvmModel:
    alpha: np.ndarray
    b: float
    rho: float
    nu: float
    kernel: KernelConfig
    X: np.ndarray
    y: np.ndarray
    report: Optional[SolveReport] = None

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.alpha > SUPPORT_EPS)

    def to_json_dict(self) -> dict:
        sv = self.support_indices
        return {
            "schema_version": 1,
            "kernel": self.kernel.kind,
            "sigma": self.kernel.sigma,
            "nu": self.nu,
            "b": self.b,
            "rho": self.rho,
            "support": [
                {
                    "index": int(i),
                    "alpha": float(self.alpha[i]),
                    "y": int(self.y[i]),
                    "features": [float(v) for v in self.X[i]],
                }
                for i in sv
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SvmModel":
        for key in ("kernel", "sigma", "nu", "b", "rho", "support"):
            if key not in d:
                raise KeyError(f"model document missing field {key!r}")
        support = d["support"]
        X = np.asarray([s["features"] for s in support], dtype=np.float64)
        return cls(
            alpha=np.asarray([s["alpha"] for s in support], dtype=np.float64),
            b=float(d["b"]),
            rho=float(d["rho"]),
            nu=float(d["nu"]),
            kernel=KernelConfig(d["kernel"], float(d["sigma"])),
            X=X,
            y=np.asarray([s["y"] for s in support], dtype=np.int64),
        )


@dataclass(frozen=True)
class SoftMarginDiagnostics:
    target_margin: float       # best dual margin the relaxed program aims at
    margin_slack: float        # nonnegative shortfall against that target


def dual_objective(alpha: np.ndarray, K: GramMatrix | np.ndarray, y: np.ndarray) -> float:
    """Dual margin term: -1/2 sum_ij alpha_i alpha_j y_i y_j K_ij (<= 0 for PSD K)."""
    Km = K.entries if isinstance(K, GramMatrix) else np.asarray(K)
    alpha = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(y)
    if alpha.shape[0] != Km.shape[0] or y.shape[0] != Km.shape[0]:
        raise DimensionMismatch("alpha, K and y sizes disagree")
    z = alpha * y
    return -0.5 * float(z @ (Km @ z))


def make_dual_objective(K: np.ndarray, y: np.ndarray) -> ConvexObjective:
    """Minimization form of the dual: 1/2 alpha' Q alpha with Q = K o yy'."""
    Q = K * np.outer(y, y)
    scale = 1.0 / max(float(np.abs(Q).sum(axis=1).max()), 1e-12)

    def value(alpha, _):
        return 0.5 * float(alpha @ (Q @ alpha))

    def fused(alpha, _):
        g = Q @ alpha
        return 0.5 * float(alpha @ g), g

    def value_batch(alphas, _):
        return 0.5 * np.einsum("ij,ij->i", alphas @ Q, alphas)

    return ConvexObjective(
        value=value,
        grad_alpha=lambda a, _: Q @ a,
        value_and_grad=fused,
        value_batch=value_batch,
        step_scale=scale,
    )


def make_soft_margin_objective(K: np.ndarray, y: np.ndarray,
                               penalty: float = 2.0) -> ConvexObjective:
    """Relaxed-margin route: -t + penalty * max(0, t - L(alpha)) with the
    target margin t as the solver's scalar coordinate.  For penalty > 1 the
    optimum has t = L(alpha), so the minimum value is -max L."""
    Q = K * np.outer(y, y)
    scale = 1.0 / max(float(np.abs(Q).sum(axis=1).max()), 1e-12)

    def parts(alpha, t):
        g = Q @ alpha
        dual = -0.5 * float(alpha @ g)  # L(alpha)
        return g, dual

    def value(alpha, t):
        _, dual = parts(alpha, t)
        return -t + penalty * max(0.0, t - dual)

    def fused(alpha, t):
        g, dual = parts(alpha, t)
        active = t - dual > 0.0
        val = -t + penalty * max(0.0, t - dual)
        return val, (penalty * g if active else np.zeros_like(alpha))

    def grad_scalar(alpha, t):
        _, dual = parts(alpha, t)
        return -1.0 + (penalty if t - dual > 0.0 else 0.0)

    def value_batch(alphas, t):
        z = alphas * y
        dual = -0.5 * np.einsum("ij,ij->i", z @ K, z)
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), dual.shape)
        return -t + penalty * np.maximum(0.0, t - dual)

    return ConvexObjective(
        value=value,
        grad_alpha=lambda a, t: fused(a, t)[1],
        grad_scalar=grad_scalar,
        value_and_grad=fused,
        value_batch=value_batch,
        step_scale=scale,
        scalar_init=0.0,
    )


def _bias_from_decision_parts(f0: np.ndarray, alpha: np.ndarray, y: np.ndarray,
                              upper: float) -> tuple[float, float]:
    """b and rho from the KKT geometry of f0 = K (alpha o y).

    On unbounded ("margin") support vectors y*(f0+b) = rho, so class means of
    f0 pin both.  A class without margin vectors falls back to its tightest
    bounded vector (min f0 on positives, max f0 on negatives)."""
    eps = max(upper * 1e-6, SUPPORT_EPS)

    def class_stat(cls):
        members = y == cls
        margin = members & (alpha > eps) & (alpha < upper - eps)
        pick = np.min if cls == 1 else np.max
        if margin.any():
            return float(np.mean(f0[margin]))
        bounded = members & (alpha >= upper - eps)
        if bounded.any():
            return float(pick(f0[bounded]))
        sv = members & (alpha > SUPPORT_EPS)
        return float(pick(f0[sv])) if sv.any() else float(pick(f0[members]))

    stat_pos = class_stat(+1)
    stat_neg = class_stat(-1)
    b = -(stat_pos + stat_neg) / 2.0
    rho = max(0.0, (stat_pos - stat_neg) / 2.0)
    return b, rho


def recover_bias(alpha: np.ndarray, K: GramMatrix | np.ndarray, y: np.ndarray,
                 upper: float) -> tuple[float, float]:
    Km = K.entries if isinstance(K, GramMatrix) else np.asarray(K)
    f0 = Km @ (alpha * y)
    return _bias_from_decision_parts(f0, alpha, y, upper)


def train_nu_svm(train: Dataset, nu: float, kernel: KernelConfig,
                 opts: SolverOptions = DEFAULT_TRAIN_OPTS,
                 strict: bool = False) -> SvmModel:
    """Maximize the dual margin over the feasible set and recover the bias."""
    K = gram(train.X, kernel)
    try:
        A = FeasibleSetA(train.y, nu)
    except InfeasibleSet as exc:
        raise InfeasibleNu(str(exc)) from exc
    report = solve_projected_gradient(make_dual_objective(K.entries, train.y), A, opts)
    if strict and not report.converged:
        raise SolverFailure(f"no convergence after {report.iterations} iterations")
    b, rho = recover_bias(report.alpha, K, train.y, A.upper)
    return SvmModel(report.alpha, b, rho, nu, kernel, train.X, train.y, report)


def decision_value(model: SvmModel, x: np.ndarray) -> float:
    """Kernel expansion over the support vectors plus bias."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.X.shape[1],):
        raise DimensionMismatch(f"expected {model.X.shape[1]} features, got {x.shape}")
    sv = model.support_indices
    k_row = cross_gram(x[None, :], model.X[sv], model.kernel)[0]
    return float(k_row @ (model.alpha[sv] * model.y[sv])) + model.b


def decision_values(model: SvmModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != model.X.shape[1]:
        raise DimensionMismatch(f"expected {model.X.shape[1]} features, got {X.shape[1]}")
    sv = model.support_indices
    return cross_gram(X, model.X[sv], model.kernel) @ (model.alpha[sv] * model.y[sv]) + model.b


def predict(model: SvmModel, x: np.ndarray) -> int:
    # a decision value of exactly 0 is classified +1
    return 1 if decision_value(model, x) >= 0.0 else -1


def predict_many(model: SvmModel, X: np.ndarray) -> np.ndarray:
    return np.where(decision_values(model, X) >= 0.0, 1, -1)


def accuracy(model: SvmModel, test: Dataset) -> float:
    if len(test) == 0:
        raise EmptyTestSet("no test samples")
    return float(np.mean(predict_many(model, test.X) == test.y))
