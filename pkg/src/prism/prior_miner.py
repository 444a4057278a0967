"""Mine linear class-boundary rules by exhaustive search over feature pairs
and a discretized angle grid.

For a target class, each candidate rule is a unit-direction line in one
two-feature subspace: cos(phi)*x(i) + sin(phi)*x(j) + c <= 0 implies the
target class.  The offset is pushed as close as possible to the opposite
class while keeping every opposite-class point strictly above the line, and
the angle maximizing the number of covered target points wins.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import DimensionMismatch, MiningError, NoOppositeClass, TooFewFeatures

# keeps the opposite class strictly above the line on [0,1]-scaled data
OFFSET_EPSILON = 1e-9


def angle_grid(step: float = 0.1) -> np.ndarray:
    """Angles {0, step, 2*step, ...} covering [0, 2*pi); 63 points at step 0.1."""
    if step <= 0:
        raise MiningError(f"angle step must be positive, got {step}")
    ks = np.arange(int(math.floor(2.0 * math.pi / step)) + 1)
    phis = ks * step
    return phis[phis < 2.0 * math.pi - 1e-12]


@dataclass(frozen=True)
class LinearPrior:
    """A mined rule: coef_i*x(i) + coef_j*x(j) + c <= 0  =>  y = target_class.

    Feature indices are 1-based with i < j; (coef_i, coef_j) = (cos, sin) of a
    grid angle, so the direction has unit norm.  ``support`` counts the
    target-class training points satisfying the antecedent on the mining set.
    """

    i: int
    j: int
    phi: float
    c: float
    target_class: int
    support: int
    coef_i: float
    coef_j: float

    def line_values(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] < max(self.i, self.j):
            raise DimensionMismatch(
                f"rule uses features {self.i},{self.j} but x has {X.shape[1]}")
        return X[:, self.i - 1] * self.coef_i + X[:, self.j - 1] * self.coef_j + self.c

    def render(self) -> str:
        def term(coef, name, leading):
            mag = f"{abs(coef):.4f}"
            if leading:
                return f"−{mag}{name}" if coef < 0 else f"{mag}{name}"
            return f" − {mag}{name}" if coef < 0 else f" + {mag}{name}"

        s = term(self.coef_i, f"·x({self.i})", leading=True)
        s += term(self.coef_j, f"·x({self.j})", leading=False)
        s += term(self.c, "", leading=False)
        cls = "+1" if self.target_class == 1 else "−1"
        return f"{s} ≤ 0 ⇒ y = {cls}"

    def to_dict(self) -> dict:
        return {
            "class": self.target_class,
            "i": self.i,
            "j": self.j,
            "phi": self.phi,
            "c": self.c,
            "support": self.support,
            "coefficients": [self.coef_i, self.coef_j],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearPrior":
        ci, cj = d["coefficients"]
        return cls(int(d["i"]), int(d["j"]), float(d["phi"]), float(d["c"]),
                   int(d["class"]), int(d["support"]), float(ci), float(cj))


@dataclass(frozen=True)
class PairSearchResult:
    i: int
    j: int
    phi: float
    c: float
    support: int
    coef_i: float
    coef_j: float
    degenerate: bool = False  # both features constant on the mining set


@dataclass
class MiningReport:
    pairs: list[PairSearchResult]
    best: list[LinearPrior]  # all argmax rules, pair-lexicographic order
    target_class: int
    seconds: float = 0.0


def mine_pair(train: Dataset, i: int, j: int, target: int,
              angle_step: float = 0.1) -> PairSearchResult:
    """Best rule for one (i, j) feature pair: for each grid angle the offset
    is set just past the opposite-class minimum projection, and the angle
    covering the most target points wins (ties to the smallest angle)."""
    if not (1 <= i <= train.n and 1 <= j <= train.n) or i == j:
        raise MiningError(f"bad feature pair ({i}, {j}) for n={train.n}")
    tgt = train.y == target
    opp = ~tgt
    if not opp.any():
        raise NoOppositeClass(f"no samples outside class {target:+d}")

    phis = angle_grid(angle_step)
    cos_p, sin_p = np.cos(phis), np.sin(phis)
    xi, xj = train.X[:, i - 1], train.X[:, j - 1]
    proj = np.outer(xi, cos_p) + np.outer(xj, sin_p)  # (N, angles)
    c = -proj[opp].min(axis=0) + OFFSET_EPSILON
    support = (proj[tgt] + c <= 0.0).sum(axis=0)

    k = int(np.argmax(support))  # first max = smallest angle
    degenerate = float(np.ptp(xi)) == 0.0 and float(np.ptp(xj)) == 0.0
    return PairSearchResult(i, j, float(phis[k]), float(c[k]), int(support[k]),
                            float(cos_p[k]), float(sin_p[k]), degenerate)


def mine_prior(train: Dataset, target: int,
               angle_step: float = 0.1) -> tuple[LinearPrior, MiningReport]:
    """Search all n(n-1)/2 feature pairs; the pair with the largest support
    wins, ties broken by lexicographically smallest (i, j).  The report keeps
    every per-pair result plus all tied winners."""
    if train.n < 2:
        raise TooFewFeatures(f"rule mining needs at least 2 features, got {train.n}")
    t0 = time.perf_counter()
    results = [
        mine_pair(train, i, j, target, angle_step)
        for i in range(1, train.n)
        for j in range(i + 1, train.n + 1)
    ]
    top = max(r.support for r in results)
    winners = [
        LinearPrior(r.i, r.j, r.phi, r.c, target, r.support, r.coef_i, r.coef_j)
        for r in results if r.support == top
    ]
    report = MiningReport(results, winners, target, time.perf_counter() - t0)
    return winners[0], report


def prior_satisfied(x: np.ndarray, p: LinearPrior) -> bool:
    """Antecedent test: line value <= 0, boundary inclusive."""
    return bool(p.line_values(np.asarray(x)[None, :])[0] <= 0.0)
