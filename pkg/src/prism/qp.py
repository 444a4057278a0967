"""Convex programs over the nu-SVM dual feasible set.

The feasible set is A = {alpha : alpha.y = 0, 0 <= alpha <= 1/N, sum(alpha) >= nu}.
Euclidean projection onto A is computed exactly from the piecewise-linear
behaviour of the clipped sums in the two KKT multipliers (one for the label
equality, one for the total-sum inequality), so projected points satisfy the
constraints to machine precision.  A grid-refinement reference solver is
provided for cross-checking on tiny instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InfeasibleSet, TooLarge


class FeasibleSetA:
    """Constraint set of the dual problem; construction fails if empty."""

    def __init__(self, y: np.ndarray, nu: float):
        y = np.asarray(y, dtype=np.int64)
        if y.ndim != 1 or len(y) == 0 or set(np.unique(y)) - {1, -1}:
            raise InfeasibleSet("labels must be a nonempty vector of +1/-1")
        n_pos = int(np.sum(y == 1))
        n_neg = len(y) - n_pos
        if n_pos == 0 or n_neg == 0:
            raise InfeasibleSet("both classes must be present")
        nu_max = 2.0 * min(n_pos, n_neg) / len(y)
        if not 0.0 < nu <= 1.0:
            raise InfeasibleSet(f"nu must lie in (0, 1], got {nu}")
        if nu > nu_max + 1e-12:
            raise InfeasibleSet(f"nu={nu} exceeds nu_max={nu_max}")
        self.y = y
        self.nu = float(nu)
        self.upper = 1.0 / len(y)
        self.n_pos = n_pos
        self.n_neg = n_neg
        self.nu_max = nu_max

    def __len__(self) -> int:
        return len(self.y)

    def contains(self, alpha: np.ndarray, tol: float = 1e-9) -> bool:
        return (
            abs(float(alpha @ self.y)) <= tol
            and float(alpha.min()) >= -tol
            and float(alpha.max()) <= self.upper + tol
            and float(alpha.sum()) >= self.nu - tol
        )


def nu_max(y: np.ndarray) -> float:
    y = np.asarray(y)
    return 2.0 * min(int(np.sum(y == 1)), int(np.sum(y == -1))) / len(y)


# --- exact projection -------------------------------------------------------

def _clip_sum_curve(v: np.ndarray, u: float):
    """Knots, values and slopes of S(a) = sum(clip(v + a, 0, u))."""
    e = np.concatenate([-v, u - v])
    delta = np.concatenate([np.ones(len(v)), -np.ones(len(v))])
    order = np.argsort(e, kind="stable")
    e = e[order]
    slopes = np.cumsum(delta[order])
    vals = np.zeros_like(e)
    vals[1:] = np.cumsum(slopes[:-1] * np.diff(e))
    return e, vals, slopes


def _curve_inverse(e, vals, slopes, target: float) -> float:
    """Smallest a with curve(a) = target; target must be within range."""
    if target <= vals[0]:
        return float(e[0])
    if target >= vals[-1]:
        return float(e[-1])
    k = int(np.searchsorted(vals, target, side="left"))
    return float(e[k - 1] + (target - vals[k - 1]) / slopes[k - 1])


def _balance_root(vp: np.ndarray, vm: np.ndarray, u: float) -> float:
    """Root of D(a) = S_pos(a) - S_neg(-a); D is nondecreasing and crosses 0."""
    e = np.concatenate([-vp, u - vp, vm - u, vm])
    delta = np.concatenate([
        np.ones(len(vp)), -np.ones(len(vp)), np.ones(len(vm)), -np.ones(len(vm)),
    ])
    order = np.argsort(e, kind="stable")
    e = e[order]
    slopes = np.cumsum(delta[order])
    vals = np.empty_like(e)
    vals[0] = -len(vm) * u
    vals[1:] = vals[0] + np.cumsum(slopes[:-1] * np.diff(e))
    k = int(np.searchsorted(vals, 0.0, side="left"))
    if k == 0:
        return float(e[0])
    return float(e[k - 1] + (0.0 - vals[k - 1]) / slopes[k - 1])


def project_onto_A(v: np.ndarray, A: FeasibleSetA, tol: float = 1e-9) -> np.ndarray:
    """argmin ||alpha - v|| over A.

    Stage 1 balances the class sums with the total-sum constraint slack
    (multiplier 0); if the resulting total falls short of nu, stage 2 pins
    both class sums to nu/2, which is the KKT-optimal active case.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != A.y.shape:
        raise InfeasibleSet(f"v has shape {v.shape}, expected {A.y.shape}")
    pos = A.y == 1
    vp, vm = v[pos], v[~pos]
    u = A.upper

    a = _balance_root(vp, vm, u)
    ap = np.clip(vp + a, 0.0, u)
    am = np.clip(vm - a, 0.0, u)
    if ap.sum() + am.sum() < A.nu - 1e-14:
        half = 0.5 * A.nu
        a = _curve_inverse(*_clip_sum_curve(vp, u), half)
        b = _curve_inverse(*_clip_sum_curve(vm, u), half)
        ap = np.clip(vp + a, 0.0, u)
        am = np.clip(vm + b, 0.0, u)

    out = np.empty_like(v)
    out[pos] = ap
    out[~pos] = am
    if abs(float(out @ A.y)) > tol or float(out.sum()) < A.nu - tol:
        raise InfeasibleSet("projection failed to meet KKT residual tolerance")
    return out


# --- objectives and the iterative solver ------------------------------------

@dataclass
class ConvexObjective:
    """Convex function of (alpha, scalar); convexity is the constructor's
    contract.  The scalar coordinate hosts an unconstrained variable such as
    a bias and is frozen when ``grad_scalar`` is None."""

    value: Callable[[np.ndarray, float], float]
    grad_alpha: Callable[[np.ndarray, float], np.ndarray]
    grad_scalar: Optional[Callable[[np.ndarray, float], float]] = None
    value_and_grad: Optional[Callable] = None
    value_batch: Optional[Callable] = None
    step_scale: Optional[float] = None
    scalar_init: float = 0.0


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-7           # relative objective improvement per window
    max_iter: int = 20000
    step_rule: str = "diminishing"  # diminishing | constant | annealed
    step_scale: Optional[float] = None
    window: int = 50

    def __post_init__(self):
        if self.step_rule not in ("diminishing", "constant", "annealed"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


@dataclass
class SolveReport:
    alpha: np.ndarray
    b: float
    objective: float
    iterations: int
    converged: bool
    final_step_norm: float


_ANNEAL_FLOOR = 2.0 ** -44


def solve_projected_gradient(obj: ConvexObjective, A: FeasibleSetA,
                             opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Projected subgradient descent on alpha (scalar coordinate descended
    jointly when the objective exposes it).  Returns the best iterate seen;
    converged means the windowed best-objective improvement fell below tol
    (for the annealed rule, after the step size was exhausted)."""
    fused = obj.value_and_grad or (lambda al, sc: (obj.value(al, sc), obj.grad_alpha(al, sc)))
    s0 = opts.step_scale if opts.step_scale is not None else (obj.step_scale or 1.0)

    alpha = project_onto_A(np.full(len(A), A.nu / len(A)), A)
    scalar = obj.scalar_init
    best_val, g = fused(alpha, scalar)
    best_alpha, best_scalar = alpha.copy(), scalar
    window_mark = best_val
    level = s0
    step_norm = 0.0
    converged = False
    iterations = 0

    for t in range(1, opts.max_iter + 1):
        iterations = t
        if opts.step_rule == "diminishing":
            s = s0 / math.sqrt(t)
        elif opts.step_rule == "constant":
            s = s0
        else:
            s = level

        new_alpha = project_onto_A(alpha - s * g, A)
        if obj.grad_scalar is not None:
            new_scalar = scalar - s * obj.grad_scalar(alpha, scalar)
        else:
            new_scalar = scalar
        step_norm = float(np.linalg.norm(new_alpha - alpha)) + abs(new_scalar - scalar)
        alpha, scalar = new_alpha, new_scalar

        val, g = fused(alpha, scalar)
        if val < best_val:
            best_val = val
            best_alpha, best_scalar = alpha.copy(), scalar

        if t % opts.window == 0:
            improved = window_mark - best_val
            if improved < opts.tol * max(1.0, abs(best_val)):
                if opts.step_rule == "annealed" and level > s0 * _ANNEAL_FLOOR:
                    level *= 0.5
                else:
                    converged = True
                    break
            window_mark = best_val

    return SolveReport(best_alpha, best_scalar, best_val, iterations, converged, step_norm)


# --- exhaustive reference solver ---------------------------------------------

def _auto_grid(n_axes: int, budget: int = 700_000) -> int:
    if n_axes <= 0:
        return 1
    g = int(budget ** (1.0 / n_axes))
    return max(7, min(201, g))


def solve_bruteforce(obj: ConvexObjective, A: FeasibleSetA, passes: int = 3,
                     grid_points: Optional[int] = None,
                     b_range: Optional[tuple[float, float]] = None,
                     restrict_to_min_sum: bool = False) -> SolveReport:
    """Nested grid refinement oracle for N <= 8.

    One coordinate per class equality is eliminated exactly: the label
    constraint always, and additionally the total-sum constraint (as an
    equality) when ``restrict_to_min_sum`` is set.  The restriction is only
    valid for objectives that cannot increase when alpha is scaled down
    toward the sum's lower bound, e.g. nonnegative homogeneous quadratics.
    ``passes`` counts the refinements after the initial grid.
    """
    N = len(A)
    if N > 8:
        raise TooLarge(f"reference solver limited to N <= 8, got {N}")
    if obj.value_batch is None:
        raise ValueError("objective must provide value_batch for the reference solver")

    y = A.y
    u = A.upper
    if restrict_to_min_sum:
        pivots = [int(np.flatnonzero(y == 1)[-1]), int(np.flatnonzero(y == -1)[-1])]
    else:
        pivots = [N - 1]
    free = [i for i in range(N) if i not in pivots]
    n_axes = len(free) + (1 if b_range is not None else 0)
    g = grid_points or _auto_grid(n_axes)

    lows = [0.0] * len(free)
    highs = [u] * len(free)
    if b_range is not None:
        lows.append(float(b_range[0]))
        highs.append(float(b_range[1]))
    hard_lo, hard_hi = list(lows), list(highs)

    # known-feasible fallback keeps the incumbent defined on every pass
    seed_alpha = project_onto_A(np.full(N, A.nu / N), A)
    best_alpha = seed_alpha
    best_b = 0.0 if b_range is None else 0.5 * (b_range[0] + b_range[1])
    best_val = float(obj.value_batch(seed_alpha[None, :], np.asarray([best_b]))[0])
    evaluated = 1

    for _ in range(passes + 1):
        axes = [np.linspace(lo, hi, g) for lo, hi in zip(lows, highs)]
        mesh = np.meshgrid(*axes, indexing="ij") if axes else []
        combos = (np.stack([m.ravel() for m in mesh], axis=1)
                  if mesh else np.zeros((1, 0)))
        if b_range is not None:
            b_col = combos[:, -1]
            combos = combos[:, :-1]
        else:
            b_col = np.zeros(combos.shape[0])

        alphas = np.zeros((combos.shape[0], N))
        alphas[:, free] = combos
        if restrict_to_min_sum:
            half = 0.5 * A.nu
            for pv in pivots:
                same = [i for i in free if y[i] == y[pv]]
                alphas[:, pv] = half - combos[:, [free.index(i) for i in same]].sum(axis=1)
        else:
            pv = pivots[0]
            alphas[:, pv] = -y[pv] * (combos * y[free]).sum(axis=1)

        mask = np.ones(combos.shape[0], dtype=bool)
        for pv in pivots:
            mask &= (alphas[:, pv] >= -1e-12) & (alphas[:, pv] <= u + 1e-12)
        if not restrict_to_min_sum:
            mask &= alphas.sum(axis=1) >= A.nu - 1e-12
        if mask.any():
            cand = np.clip(alphas[mask], 0.0, u)
            cand_b = b_col[mask]
            vals = np.asarray(obj.value_batch(cand, cand_b), dtype=np.float64)
            evaluated += len(vals)
            k = int(np.argmin(vals))
            if vals[k] < best_val:
                best_val = float(vals[k])
                best_alpha = cand[k].copy()
                best_b = float(cand_b[k])

        # shrink each axis to one current grid step around the incumbent
        steps = [(hi - lo) / (g - 1) if g > 1 else 0.0 for lo, hi in zip(lows, highs)]
        centers = list(best_alpha[free]) + ([best_b] if b_range is not None else [])
        lows = [max(h_lo, c - s) for h_lo, c, s in zip(hard_lo, centers, steps)]
        highs = [min(h_hi, c + s) for h_hi, c, s in zip(hard_hi, centers, steps)]

    resolution = max((hi - lo) / (g - 1) if g > 1 else 0.0
                     for lo, hi in zip(lows, highs)) if lows else 0.0
    return SolveReport(best_alpha, best_b, best_val, evaluated, True, resolution)
