"""Benchmark protocol: hyperparameter grids, k-fold CV, repeated random
splits, paired accuracy comparison of the rule-constrained and plain models.

Report JSON convention: every wall-clock field ends with ``_seconds``; all
other fields are deterministic functions of the data and the seed.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .dataset import Dataset, fit_minmax, kfold_indices, scale_dataset, split
from .errors import (
    DimensionMismatch,
    InfeasibleSet,
    PrismError,
    SingleClass,
    SmallNuMaxWarning,
)
from .kernel import KernelConfig, cross_gram, gram
from .prior_miner import mine_prior
from .prior_svm import (
    PriorConstraintSet,
    PriorSvmConfig,
    fit_with_gram,
    select_prior_points,
    train_prior_svm,
)
from .qp import FeasibleSetA, SolverOptions
from .stats import student_t_sf
from .svm import accuracy

# CV ranks configs, so it runs on a light iteration budget; the winning
# config is refit on the full training split with the final budget.
CV_SOLVER_DEFAULT = SolverOptions(tol=1e-6, max_iter=600, step_rule="annealed")
FINAL_SOLVER_DEFAULT = SolverOptions(tol=1e-8, max_iter=20000, step_rule="annealed")

TIMING_KEY_SUFFIX = "_seconds"


def nu_grid(train: Dataset) -> np.ndarray:
    """10 equally spaced values from 0.1 to the largest feasible nu.

    nu may not exceed 2*min(N+, N-)/N; under heavy imbalance that cap can
    fall below 0.1, in which case the grid collapses to the cap alone."""
    if train.n_pos == 0 or train.n_neg == 0:
        raise SingleClass("nu grid needs both classes")
    cap = 2.0 * min(train.n_pos, train.n_neg) / len(train)
    if cap <= 0.1:
        warnings.warn(f"largest feasible nu {cap:.4f} is at or below 0.1; "
                      "using a single-point grid", SmallNuMaxWarning, stacklevel=2)
        return np.asarray([cap])
    return np.linspace(0.1, cap, 10)


@dataclass(frozen=True)
class GridSpec:
    nu_values: tuple
    sigma_values: tuple = tuple(2.0 ** k for k in range(-3, 7))
    lambda2_values: tuple = (0.0,)
    lambda3_values: tuple = (0.0,)

    def __post_init__(self):
        if any(s <= 0 for s in self.sigma_values):
            raise PrismError("sigma grid values must be positive")
        if any(l < 0 for l in self.lambda2_values + self.lambda3_values):
            raise PrismError("lambda grid values must be nonnegative")
        if len(self.nu_values) > 1 and any(
                b <= a for a, b in zip(self.nu_values, self.nu_values[1:])):
            raise PrismError("nu grid must be strictly increasing")

    @classmethod
    def for_training_set(cls, train: Dataset,
                         lambda_points=(0.0, 0.25, 0.5, 0.75, 1.0)) -> "GridSpec":
        lam = tuple(p / len(train) for p in lambda_points)
        return cls(nu_values=tuple(float(v) for v in nu_grid(train)),
                   lambda2_values=lam, lambda3_values=lam)

    def subsample(self, step: int) -> "GridSpec":
        """Every step-th point along each axis (index 0 always kept, so the
        zero-penalty point survives)."""
        if step <= 1:
            return self
        return GridSpec(self.nu_values[::step], self.sigma_values[::step],
                        self.lambda2_values[::step], self.lambda3_values[::step])

    def without_priors(self) -> "GridSpec":
        return replace(self, lambda2_values=(0.0,), lambda3_values=(0.0,))

    @property
    def size(self) -> int:
        return (len(self.nu_values) * len(self.sigma_values)
                * len(self.lambda2_values) * len(self.lambda3_values))


@dataclass(frozen=True)
class CvEntry:
    nu: float
    sigma: float
    lambda2: float
    lambda3: float
    fold_accuracies: tuple
    mean_accuracy: float
    failed: bool

    def config_dict(self) -> dict:
        return {"nu": self.nu, "sigma": self.sigma,
                "lambda2": self.lambda2, "lambda3": self.lambda3}


@dataclass
class GridSearchResult:
    best: CvEntry
    table: list
    with_priors: bool


def grid_search_cv(train: Dataset, grid: GridSpec, k: int = 5, seed: int = 0,
                   with_priors: bool = True, priors=None, b_star: float = 1.0,
                   angle_step: float = 0.1, remine_per_fold: bool = False,
                   cv_solver: Optional[SolverOptions] = None,
                   kernel_kind: str = "rbf") -> GridSearchResult:
    """Mean validation accuracy per config over k folds.

    Rules are mined once on ``train`` (pass ``remine_per_fold`` to mine inside
    each fold instead); their mesh points are re-selected on each fold's
    training rows either way.  A config that errors on any fold is marked
    failed with accuracy 0 and the search continues.  Ties take the first
    config in (nu, sigma, lambda2, lambda3) iteration order.
    """
    cv_solver = cv_solver or CV_SOLVER_DEFAULT
    folds = kfold_indices(len(train), k, seed)
    if with_priors and priors is None and not remine_per_fold:
        priors = (mine_prior(train, +1, angle_step)[0],
                  mine_prior(train, -1, angle_step)[0])

    shape = (len(grid.nu_values), len(grid.sigma_values),
             len(grid.lambda2_values), len(grid.lambda3_values))
    acc = np.zeros(shape + (k,))
    failed = np.zeros(shape, dtype=bool)

    for f, (tr_idx, va_idx) in enumerate(folds):
        tr = train.subset(tr_idx)
        va = train.subset(va_idx)
        if with_priors:
            if remine_per_fold:
                p_pos, p_neg = (mine_prior(tr, +1, angle_step)[0],
                                mine_prior(tr, -1, angle_step)[0])
            else:
                p_pos, p_neg = priors
        else:
            p_pos = p_neg = None
        pset = select_prior_points(tr, p_pos, p_neg, b_star)

        feasible = np.ones(len(grid.nu_values), dtype=bool)
        for ni, nu in enumerate(grid.nu_values):
            try:
                FeasibleSetA(tr.y, nu)
            except InfeasibleSet:
                feasible[ni] = False
                failed[ni, :, :, :] = True

        for si, sigma in enumerate(grid.sigma_values):
            kc = KernelConfig(kernel_kind, sigma)
            K = gram(tr.X, kc).entries
            K_va = cross_gram(va.X, tr.X, kc)
            for ni, nu in enumerate(grid.nu_values):
                if not feasible[ni]:
                    continue
                for l2i, lam2 in enumerate(grid.lambda2_values):
                    for l3i, lam3 in enumerate(grid.lambda3_values):
                        if failed[ni, si, l2i, l3i]:
                            continue
                        cfg = PriorSvmConfig(nu=nu, lambda2=lam2, lambda3=lam3,
                                             b_star=b_star, solver=cv_solver)
                        try:
                            alpha, b, _, _ = fit_with_gram(K, tr.y, cfg, pset)
                        except PrismError:
                            failed[ni, si, l2i, l3i] = True
                            continue
                        dv = K_va @ (alpha * tr.y) + b
                        preds = np.where(dv >= 0.0, 1, -1)
                        acc[ni, si, l2i, l3i, f] = float(np.mean(preds == va.y))

    mean_acc = acc.mean(axis=-1)
    mean_acc[failed] = 0.0
    best_flat = int(np.argmax(mean_acc))  # first max in C order = spec tie order
    table = []
    for flat in range(mean_acc.size):
        ni, si, l2i, l3i = np.unravel_index(flat, shape)
        table.append(CvEntry(
            nu=grid.nu_values[ni], sigma=grid.sigma_values[si],
            lambda2=grid.lambda2_values[l2i], lambda3=grid.lambda3_values[l3i],
            fold_accuracies=tuple(acc[ni, si, l2i, l3i]),
            mean_accuracy=float(mean_acc[ni, si, l2i, l3i]),
            failed=bool(failed[ni, si, l2i, l3i]),
        ))
    return GridSearchResult(best=table[best_flat], table=table, with_priors=with_priors)


def paired_t_test(acc_with, acc_without) -> float:
    """One-sided paired test; small p favours the rule-constrained arm.

    p = P(T_{m-1} > t) with t = mean(d) / (sd(d)/sqrt(m)), d = with - without.
    Zero-variance differences degenerate to 0, 1, or 0.5 by the sign of the
    mean; a single pair has no variance estimate and uses the same rule."""
    a = np.asarray(acc_with, dtype=np.float64)
    b = np.asarray(acc_without, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) == 0:
        raise DimensionMismatch("paired test needs equal-length nonempty vectors")
    d = a - b
    m = len(d)
    mean = float(d.mean())
    sd = float(d.std(ddof=1)) if m > 1 else 0.0
    if sd == 0.0:
        return 0.0 if mean > 0 else (1.0 if mean < 0 else 0.5)
    t = mean / (sd / np.sqrt(m))
    return student_t_sf(float(t), m - 1)


@dataclass
class RepeatOutcome:
    repeat: int
    seed: int
    acc_with: float
    acc_without: float
    config_with: dict
    config_without: dict
    pos_prior: dict
    neg_prior: dict
    q_pos: int
    q_neg: int
    mining_seconds: float
    with_seconds: float
    without_seconds: float
    error: Optional[str] = None


@dataclass
class ExperimentReport:
    dataset_name: str
    repeats: int
    seed: int
    accs_with: list
    accs_without: list
    ata_with: float       # percent
    std_with: float
    ata_without: float
    std_without: float
    p_value: float
    apt_with_seconds: float
    apt_without_seconds: float
    per_repeat: list
    flags: list
    failed_repeats: list

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "dataset": self.dataset_name,
            "repeats": self.repeats,
            "seed": self.seed,
            "accs_with": self.accs_with,
            "accs_without": self.accs_without,
            "ata_with_percent": self.ata_with,
            "std_with_percent": self.std_with,
            "ata_without_percent": self.ata_without,
            "std_without_percent": self.std_without,
            "p_value": self.p_value,
            "apt_with_seconds": self.apt_with_seconds,
            "apt_without_seconds": self.apt_without_seconds,
            "flags": self.flags,
            "failed_repeats": self.failed_repeats,
            "per_repeat": self.per_repeat,
        }

    def to_csv(self) -> str:
        header = "dataset,priors,ata_percent,std_percent,p_value,apt_seconds"
        rows = [
            f"{self.dataset_name},+,{self.ata_with:.2f},{self.std_with:.2f},"
            f"{self.p_value:.4f},{self.apt_with_seconds:.1f}",
            f"{self.dataset_name},-,{self.ata_without:.2f},{self.std_without:.2f},"
            f"{self.p_value:.4f},{self.apt_without_seconds:.1f}",
        ]
        return "\n".join([header] + rows) + "\n"

    def to_table(self) -> str:
        lines = [
            f"dataset: {self.dataset_name}   repeats: {self.repeats}   seed: {self.seed}",
            f"{'':14s}{'ATA (%)':>12s}{'std':>8s}{'p-value':>10s}{'APT (s)':>10s}",
            f"{'with rules':14s}{self.ata_with:12.2f}{self.std_with:8.2f}"
            f"{self.p_value:10.4f}{self.apt_with_seconds:10.1f}",
            f"{'without':14s}{self.ata_without:12.2f}{self.std_without:8.2f}"
            f"{'':10s}{self.apt_without_seconds:10.1f}",
        ]
        if self.flags:
            lines.append("flags: " + ", ".join(self.flags))
        return "\n".join(lines) + "\n"


def _run_one_repeat(args) -> RepeatOutcome:
    (d, r, seed, k, grid, grid_subsample, b_star, angle_step, stratified,
     remine_per_fold, cv_solver, final_solver) = args
    seed_r = seed ^ r
    try:
        train_raw, test_raw = split(d, 0.7, seed_r, stratified=stratified)
        scaling = fit_minmax(train_raw)
        train = scale_dataset(train_raw, scaling)
        test = scale_dataset(test_raw, scaling)
        spec = grid if grid is not None else GridSpec.for_training_set(train)
        spec = spec.subsample(grid_subsample)

        # arm with rules (mining time counts toward this arm)
        t0 = time.perf_counter()
        p_pos, rep_pos = mine_prior(train, +1, angle_step)
        p_neg, rep_neg = mine_prior(train, -1, angle_step)
        mining_seconds = rep_pos.seconds + rep_neg.seconds
        search_w = grid_search_cv(train, spec, k, seed_r, with_priors=True,
                                  priors=(p_pos, p_neg), b_star=b_star,
                                  angle_step=angle_step,
                                  remine_per_fold=remine_per_fold,
                                  cv_solver=cv_solver)
        best_w = search_w.best
        pset = select_prior_points(train, p_pos, p_neg, b_star)
        cfg_w = PriorSvmConfig(nu=best_w.nu, lambda2=best_w.lambda2,
                               lambda3=best_w.lambda3, b_star=b_star,
                               solver=final_solver)
        model_w, _ = train_prior_svm(train, cfg_w, pset,
                                     KernelConfig("rbf", best_w.sigma))
        acc_w = accuracy(model_w, test)
        with_seconds = time.perf_counter() - t0

        # arm without rules
        t1 = time.perf_counter()
        search_o = grid_search_cv(train, spec.without_priors(), k, seed_r,
                                  with_priors=False, cv_solver=cv_solver)
        best_o = search_o.best
        cfg_o = PriorSvmConfig(nu=best_o.nu, lambda2=0.0, lambda3=0.0,
                               b_star=b_star, solver=final_solver)
        empty = select_prior_points(train, None, None, b_star)
        model_o, _ = train_prior_svm(train, cfg_o, empty,
                                     KernelConfig("rbf", best_o.sigma))
        acc_o = accuracy(model_o, test)
        without_seconds = time.perf_counter() - t1

        return RepeatOutcome(
            repeat=r, seed=seed_r, acc_with=acc_w, acc_without=acc_o,
            config_with=best_w.config_dict(), config_without=best_o.config_dict(),
            pos_prior=p_pos.to_dict(), neg_prior=p_neg.to_dict(),
            q_pos=pset.q_pos, q_neg=pset.q_neg,
            mining_seconds=mining_seconds, with_seconds=with_seconds,
            without_seconds=without_seconds)
    except PrismError as exc:
        return RepeatOutcome(repeat=r, seed=seed_r, acc_with=0.0, acc_without=0.0,
                             config_with={}, config_without={}, pos_prior={},
                             neg_prior={}, q_pos=0, q_neg=0, mining_seconds=0.0,
                             with_seconds=0.0, without_seconds=0.0, error=str(exc))


def run_experiment(d: Dataset, repeats: int = 10, seed: int = 42, *,
                   dataset_name: str = "dataset", k: int = 5, jobs: int = 1,
                   grid: Optional[GridSpec] = None, grid_subsample: int = 1,
                   b_star: float = 1.0, angle_step: float = 0.1,
                   stratified: bool = False, remine_per_fold: bool = False,
                   cv_solver: Optional[SolverOptions] = None,
                   final_solver: Optional[SolverOptions] = None) -> ExperimentReport:
    """Repeated 70/30 protocol.  Per repeat (seeded with seed XOR r): split,
    fit scaling on the training part, mine rules there, grid-search both arms
    by 5-fold CV, refit the winners on the whole training part, score on the
    held-out part.  Failed repeats are excluded and flagged."""
    cv_solver = cv_solver or CV_SOLVER_DEFAULT
    final_solver = final_solver or FINAL_SOLVER_DEFAULT
    payloads = [
        (d, r, seed, k, grid, grid_subsample, b_star, angle_step, stratified,
         remine_per_fold, cv_solver, final_solver)
        for r in range(repeats)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one_repeat, payloads))
    else:
        outcomes = [_run_one_repeat(p) for p in payloads]

    good = [o for o in outcomes if o.error is None]
    failed = [o.repeat for o in outcomes if o.error is not None]
    flags = []
    if failed:
        flags.append("failed_repeats_excluded")
    accs_w = [o.acc_with for o in good]
    accs_o = [o.acc_without for o in good]
    m = len(good)
    if m == 0:
        flags.append("no_successful_repeats")
        ata_w = std_w = ata_o = std_o = 0.0
        p_value = 0.5
    else:
        ata_w = 100.0 * float(np.mean(accs_w))
        ata_o = 100.0 * float(np.mean(accs_o))
        if m == 1:
            flags.append("degenerate_std")
            std_w = std_o = 0.0
        else:
            std_w = 100.0 * float(np.std(accs_w, ddof=1))
            std_o = 100.0 * float(np.std(accs_o, ddof=1))
        p_value = paired_t_test(accs_w, accs_o)

    per_repeat = []
    for o in outcomes:
        entry = {
            "repeat": o.repeat, "seed": o.seed,
            "acc_with": o.acc_with, "acc_without": o.acc_without,
            "config_with": o.config_with, "config_without": o.config_without,
            "pos_prior": o.pos_prior, "neg_prior": o.neg_prior,
            "q_pos": o.q_pos, "q_neg": o.q_neg,
            "mining_seconds": o.mining_seconds,
            "with_seconds": o.with_seconds,
            "without_seconds": o.without_seconds,
        }
        if o.error is not None:
            entry["error"] = o.error
        per_repeat.append(entry)

    return ExperimentReport(
        dataset_name=dataset_name, repeats=repeats, seed=seed,
        accs_with=accs_w, accs_without=accs_o,
        ata_with=ata_w, std_with=std_w, ata_without=ata_o, std_without=std_o,
        p_value=p_value,
        apt_with_seconds=float(np.mean([o.with_seconds for o in good])) if good else 0.0,
        apt_without_seconds=float(np.mean([o.without_seconds for o in good])) if good else 0.0,
        per_repeat=per_repeat, flags=flags, failed_repeats=failed)
