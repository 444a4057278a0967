"""nu-SVM with mined linear rules enforced as hinge penalties.

The rule implications are discretized at the training points that satisfy
each rule's antecedent.  With hinge losses and a margin-relaxation penalty
above 1, the relaxed program collapses to a convex objective in (alpha, b):

    J(alpha, b) = -L(alpha) + lambda2 * sum_j max(0, b* - f(x+_j))
                            + lambda3 * sum_h max(0, b* + f(x-_h))

where f(x) = sum_i alpha_i y_i k(x, x_i) + b.  The rule-side multiplier
vectors v+/v- are fixed at zero: at mesh points the antecedent already holds
(g <= 0), so any positive multiplier would only slacken the constraints and
let the penalty be dodged; zero keeps them tight.  A multiplier-decomposition
of the objective is exposed for diagnostics, with the algebraic identity
margin_term + pos_prior_term + neg_prior_term = kernel_side - multiplier_side
holding for every input, optimal or not.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataset import Dataset
from .errors import (
    DimensionMismatch,
    EmptyPriorSetWarning,
    InfeasibleNu,
    InfeasibleSet,
    MultiplierBoundWarning,
    PriorConflictWarning,
    PrismError,
    SolverFailure,
)
from .kernel import KernelConfig, gram
from .prior_miner import LinearPrior
from .qp import ConvexObjective, FeasibleSetA, SolverOptions, solve_projected_gradient
from .svm import SvmModel, make_dual_objective, recover_bias

DEFAULT_SOLVER = SolverOptions(tol=1e-9, max_iter=20000, step_rule="annealed")


@dataclass
class PriorConstraintSet:
    """Training-point meshes of the two rule implications.

    ``pos_indices`` are the training rows whose features satisfy the positive
    rule's antecedent (q+ of them), likewise ``neg_indices`` for the negative
    rule.  ``g_pos``/``g_neg`` hold the antecedent line values at those rows
    (all <= 0); the fixed multipliers v+/v- pair with them in the formulas.
    """

    pos_indices: np.ndarray
    neg_indices: np.ndarray
    b_star: float
    pos_prior: Optional[LinearPrior] = None
    neg_prior: Optional[LinearPrior] = None
    g_pos: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    g_neg: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    v_plus: np.ndarray = field(default_factory=lambda: np.zeros(1))
    v_minus: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @property
    def q_pos(self) -> int:
        return len(self.pos_indices)

    @property
    def q_neg(self) -> int:
        return len(self.neg_indices)

    def remap(self, subset_indices: np.ndarray) -> "PriorConstraintSet":
        """Constraint set for a row-subset of the original training set.

        ``subset_indices`` lists the kept global rows in their new order;
        mesh indices become positions into that subset.  Global index lists
        are ascending (np.flatnonzero builds them), which searchsorted needs.
        """
        subset_indices = np.asarray(subset_indices)

        def pick(global_idx, g):
            local = np.flatnonzero(np.isin(subset_indices, global_idx))
            if len(global_idx) == 0:
                return local, g
            rows = np.searchsorted(global_idx, subset_indices[local])
            return local, g[rows]

        pos_local, g_pos = pick(self.pos_indices, self.g_pos)
        neg_local, g_neg = pick(self.neg_indices, self.g_neg)
        return PriorConstraintSet(
            pos_indices=pos_local,
            neg_indices=neg_local,
            b_star=self.b_star,
            pos_prior=self.pos_prior,
            neg_prior=self.neg_prior,
            g_pos=g_pos,
            g_neg=g_neg,
            v_plus=self.v_plus,
            v_minus=self.v_minus,
        )


def select_prior_points(train: Dataset, pos_prior: Optional[LinearPrior],
                        neg_prior: Optional[LinearPrior],
                        b_star: float = 1.0) -> PriorConstraintSet:
    """Pick the training rows where each rule's antecedent holds (any label)."""

    def antecedent_rows(prior):
        if prior is None:
            return np.zeros(0, dtype=np.intp), np.zeros((0, 1))
        vals = prior.line_values(train.X)
        rows = np.flatnonzero(vals <= 0.0)
        return rows, vals[rows].reshape(-1, 1)

    pos_idx, g_pos = antecedent_rows(pos_prior)
    neg_idx, g_neg = antecedent_rows(neg_prior)
    if pos_prior is not None and len(pos_idx) == 0:
        warnings.warn("positive rule selects no training points; its penalty vanishes",
                      EmptyPriorSetWarning, stacklevel=2)
    if neg_prior is not None and len(neg_idx) == 0:
        warnings.warn("negative rule selects no training points; its penalty vanishes",
                      EmptyPriorSetWarning, stacklevel=2)
    overlap = np.intersect1d(pos_idx, neg_idx)
    if len(overlap):
        warnings.warn(
            f"{len(overlap)} training points satisfy both rule antecedents; "
            "their hinge terms pull in opposite directions",
            PriorConflictWarning, stacklevel=2)
    return PriorConstraintSet(pos_idx, neg_idx, float(b_star), pos_prior, neg_prior,
                              g_pos, g_neg)


@dataclass(frozen=True)
class PriorSvmConfig:
    nu: float
    lambda1: float = 2.0     # margin-relaxation penalty; must exceed 1
    lambda2: float = 0.0     # positive-rule violation weight
    lambda3: float = 0.0     # negative-rule violation weight
    b_star: float = 1.0      # decision threshold the rules must clear
    bias_mode: str = "joint"  # joint | kkt-alternating
    solver: SolverOptions = DEFAULT_SOLVER

    def __post_init__(self):
        if not self.lambda1 > 1.0:
            raise PrismError(f"lambda1 must exceed 1 (got {self.lambda1}); "
                             "otherwise the margin relaxation is unbounded")
        if self.lambda2 < 0 or self.lambda3 < 0:
            raise PrismError("rule penalty weights must be nonnegative")
        if self.bias_mode not in ("joint", "kkt-alternating"):
            raise PrismError(f"unknown bias mode {self.bias_mode!r}")


@dataclass
class PriorSvmDiagnostics:
    target_margin: float        # dual margin L(alpha) the relaxation aims at
    margin_slack: float         # shortfall of L against the target (0 here)
    pos_slack: np.ndarray       # per mesh point: max(0, b* - f(x+_j))
    neg_slack: np.ndarray       # per mesh point: max(0, b* + f(x-_h))
    margin_term: float          # -L(alpha)
    pos_prior_term: float       # multiplier-weighted positive-rule residuals
    neg_prior_term: float       # multiplier-weighted negative-rule residuals
    kernel_side: float          # kernel-expansion part of the regrouping
    multiplier_side: float      # bias/threshold part of the regrouping


def _hinge_margins(alpha, b, K, y, priors):
    z = alpha * y
    fp = K[priors.pos_indices] @ z + b if priors.q_pos else np.zeros(0)
    fm = K[priors.neg_indices] @ z + b if priors.q_neg else np.zeros(0)
    vg_p = (priors.g_pos @ priors.v_plus) if priors.q_pos else np.zeros(0)
    vg_m = (priors.g_neg @ priors.v_minus) if priors.q_neg else np.zeros(0)
    pos_margin = priors.b_star - fp - vg_p   # > 0 means the rule is violated
    neg_margin = priors.b_star + fm - vg_m
    return pos_margin, neg_margin


def reduced_objective(alpha: np.ndarray, b: float, cfg: PriorSvmConfig,
                      K: np.ndarray, y: np.ndarray,
                      priors: PriorConstraintSet) -> float:
    """J(alpha, b): margin term plus hinge penalties at the rule mesh points."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape[0] != K.shape[0]:
        raise DimensionMismatch("alpha does not match the Gram matrix")
    z = alpha * y
    quad = 0.5 * float(z @ (K @ z))
    pos_margin, neg_margin = _hinge_margins(alpha, b, K, y, priors)
    return (quad
            + cfg.lambda2 * float(np.maximum(0.0, pos_margin).sum())
            + cfg.lambda3 * float(np.maximum(0.0, neg_margin).sum()))


def make_prior_objective(K: np.ndarray, y: np.ndarray, cfg: PriorSvmConfig,
                         priors: PriorConstraintSet,
                         optimize_bias: bool = True) -> ConvexObjective:
    Q = K * np.outer(y, y)
    scale = 1.0 / max(float(np.abs(Q).sum(axis=1).max()), 1e-12)
    yv = y.astype(np.float64)
    Kp = K[priors.pos_indices] if priors.q_pos else np.zeros((0, K.shape[0]))
    Km = K[priors.neg_indices] if priors.q_neg else np.zeros((0, K.shape[0]))
    vg_p = (priors.g_pos @ priors.v_plus) if priors.q_pos else np.zeros(0)
    vg_m = (priors.g_neg @ priors.v_minus) if priors.q_neg else np.zeros(0)
    b_star = priors.b_star

    def fused(alpha, b):
        g = Q @ alpha
        z = alpha * yv
        pos_margin = b_star - (Kp @ z + b) - vg_p
        neg_margin = b_star + (Km @ z + b) - vg_m
        val = (0.5 * float(alpha @ g)
               + cfg.lambda2 * float(np.maximum(0.0, pos_margin).sum())
               + cfg.lambda3 * float(np.maximum(0.0, neg_margin).sum()))
        grad = g.copy()
        act_p = pos_margin > 0.0
        act_m = neg_margin > 0.0
        if act_p.any():
            grad -= cfg.lambda2 * yv * Kp[act_p].sum(axis=0)
        if act_m.any():
            grad += cfg.lambda3 * yv * Km[act_m].sum(axis=0)
        return val, grad

    def grad_scalar(alpha, b):
        pos_margin, neg_margin = _hinge_margins(alpha, b, K, y, priors)
        return (cfg.lambda3 * float(np.sum(neg_margin > 0.0))
                - cfg.lambda2 * float(np.sum(pos_margin > 0.0)))

    def value_batch(alphas, b):
        Z = alphas * yv
        quad = 0.5 * np.einsum("ij,ij->i", Z @ K, Z)
        b = np.broadcast_to(np.asarray(b, dtype=np.float64), quad.shape)
        out = quad.copy()
        if priors.q_pos:
            pm = b_star - (Z @ Kp.T + b[:, None]) - vg_p
            out += cfg.lambda2 * np.maximum(0.0, pm).sum(axis=1)
        if priors.q_neg:
            nm = b_star + (Z @ Km.T + b[:, None]) - vg_m
            out += cfg.lambda3 * np.maximum(0.0, nm).sum(axis=1)
        return out

    return ConvexObjective(
        value=lambda a, b: fused(a, b)[0],
        grad_alpha=lambda a, b: fused(a, b)[1],
        grad_scalar=grad_scalar if optimize_bias else None,
        value_and_grad=fused,
        value_batch=value_batch,
        step_scale=scale,
    )


def _penalties_active(cfg: PriorSvmConfig, priors: PriorConstraintSet) -> bool:
    return (cfg.lambda2 > 0 and priors.q_pos > 0) or (cfg.lambda3 > 0 and priors.q_neg > 0)


def fit_with_gram(K: np.ndarray, y: np.ndarray, cfg: PriorSvmConfig,
                  priors: PriorConstraintSet):
    """Solve for (alpha, b) on a precomputed Gram matrix.

    With no active penalties the problem is the plain dual (b has zero
    subgradient), so b is recovered from the KKT margin geometry instead of
    optimized jointly."""
    try:
        A = FeasibleSetA(y, cfg.nu)
    except InfeasibleSet as exc:
        raise InfeasibleNu(str(exc)) from exc

    if not _penalties_active(cfg, priors):
        report = solve_projected_gradient(make_dual_objective(K, y), A, cfg.solver)
        b, rho = recover_bias(report.alpha, K, y, A.upper)
        return report.alpha, b, rho, report

    if cfg.bias_mode == "joint":
        obj = make_prior_objective(K, y, cfg, priors, optimize_bias=True)
        report = solve_projected_gradient(obj, A, cfg.solver)
        alpha, b = report.alpha, report.b
    else:  # kkt-alternating: freeze b per outer round, recover it from KKT
        b = 0.0
        alpha = None
        report = None
        inner = SolverOptions(tol=cfg.solver.tol,
                              max_iter=max(200, cfg.solver.max_iter // 10),
                              step_rule=cfg.solver.step_rule,
                              window=cfg.solver.window)
        for _ in range(12):
            obj = make_prior_objective(K, y, cfg, priors, optimize_bias=False)
            obj.scalar_init = b
            report = solve_projected_gradient(obj, A, inner)
            alpha = report.alpha
            new_b, _ = recover_bias(alpha, K, y, A.upper)
            if abs(new_b - b) < 1e-8:
                b = new_b
                break
            b = new_b
        report.b = b
    _, rho = recover_bias(alpha, K, y, A.upper)
    return alpha, b, rho, report


def train_prior_svm(train: Dataset, cfg: PriorSvmConfig, priors: PriorConstraintSet,
                    kernel: KernelConfig,
                    strict: bool = False) -> tuple[SvmModel, PriorSvmDiagnostics]:
    """Fit the rule-penalized model and report slack/decomposition diagnostics.

    With lambda2 = lambda3 = 0 this is exactly the plain nu-SVM path, so the
    two models coincide prediction-for-prediction."""
    K = gram(train.X, kernel)
    alpha, b, rho, report = fit_with_gram(K.entries, train.y, cfg, priors)
    if strict and not report.converged:
        raise SolverFailure(f"no convergence after {report.iterations} iterations")
    model = SvmModel(alpha, b, rho, cfg.nu, kernel, train.X, train.y, report)
    beta = np.full(priors.q_pos, cfg.lambda2)
    gamma = np.full(priors.q_neg, cfg.lambda3)
    diag = decompose(alpha, b, beta, gamma, cfg, K.entries, train.y, priors)
    return model, diag


def decompose(alpha: np.ndarray, b: float, beta_t: np.ndarray, gamma_t: np.ndarray,
              cfg: PriorSvmConfig, K: np.ndarray, y: np.ndarray,
              priors: PriorConstraintSet) -> PriorSvmDiagnostics:
    """Multiplier decomposition of the penalized objective.

    ``beta_t``/``gamma_t`` weight the rule residuals at the mesh points; their
    admissible ranges are [0, lambda2/alpha_j] and [0, lambda3/alpha_h]
    (violations only warn).  The regrouping identity
    margin + pos + neg = kernel_side - multiplier_side is checked to 1e-10.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    beta_t = np.asarray(beta_t, dtype=np.float64)
    gamma_t = np.asarray(gamma_t, dtype=np.float64)
    if beta_t.shape[0] != priors.q_pos or gamma_t.shape[0] != priors.q_neg:
        raise DimensionMismatch("multiplier lengths do not match the mesh sizes")

    z = alpha * y
    a_p = alpha[priors.pos_indices]
    a_m = alpha[priors.neg_indices]
    zk_p = K[priors.pos_indices] @ z if priors.q_pos else np.zeros(0)
    zk_m = K[priors.neg_indices] @ z if priors.q_neg else np.zeros(0)
    vg_p = (priors.g_pos @ priors.v_plus) if priors.q_pos else np.zeros(0)
    vg_m = (priors.g_neg @ priors.v_minus) if priors.q_neg else np.zeros(0)
    fp = zk_p + b
    fm = zk_m + b

    _warn_bounds(beta_t, a_p, cfg.lambda2, "positive")
    _warn_bounds(gamma_t, a_m, cfg.lambda3, "negative")

    margin_term = 0.5 * float(z @ (K @ z))
    pos_prior_term = -float(np.sum(beta_t * a_p * (fp - priors.b_star + vg_p)))
    neg_prior_term = float(np.sum(gamma_t * a_m * (fm + priors.b_star - vg_m)))
    kernel_side = (margin_term
                   - float(np.sum(beta_t * a_p * zk_p))
                   + float(np.sum(gamma_t * a_m * zk_m)))
    multiplier_side = (float(np.sum(beta_t * a_p * (b - priors.b_star + vg_p)))
                       - float(np.sum(gamma_t * a_m * (b + priors.b_star - vg_m))))

    residual = abs(margin_term + pos_prior_term + neg_prior_term
                   - (kernel_side - multiplier_side))
    if residual > 1e-10:
        raise PrismError(f"decomposition identity violated: residual {residual:.3e}")

    pos_margin, neg_margin = _hinge_margins(alpha, b, K, y, priors)
    return PriorSvmDiagnostics(
        target_margin=-margin_term,
        margin_slack=0.0,
        pos_slack=np.maximum(0.0, pos_margin),
        neg_slack=np.maximum(0.0, neg_margin),
        margin_term=margin_term,
        pos_prior_term=pos_prior_term,
        neg_prior_term=neg_prior_term,
        kernel_side=kernel_side,
        multiplier_side=multiplier_side,
    )


def _warn_bounds(mult, a_mesh, lam, which):
    if len(mult) == 0:
        return
    if np.any(mult < -1e-12):
        warnings.warn(f"negative {which}-rule multiplier", MultiplierBoundWarning,
                      stacklevel=3)
        return
    positive = a_mesh > 0
    if np.any(mult[positive] * a_mesh[positive] > lam + 1e-12):
        warnings.warn(
            f"{which}-rule multiplier exceeds its bound lambda/alpha at some mesh point",
            MultiplierBoundWarning, stacklevel=3)
