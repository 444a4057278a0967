"""Labeled datasets in libsvm sparse text format, scaling, and seeded splits.

Randomness policy: every shuffle in this module is driven by a splitmix64
stream feeding a Fisher-Yates shuffle with rejection sampling, so splits and
folds are reproducible bit-for-bit across platforms and Python/numpy versions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadK,
    DatasetError,
    DegenerateSplit,
    DimensionMismatch,
    EmptyDataset,
    MalformedLine,
    SingleClass,
)

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Tiny counter-based generator; the only RNG used for data shuffling."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        # rejection sampling keeps the draw exactly uniform on [0, bound)
        limit = _MASK64 + 1 - ((_MASK64 + 1) % bound)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % bound


def shuffled_indices(n: int, seed: int) -> np.ndarray:
    rng = SplitMix64(seed)
    idx = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        idx[i], idx[j] = idx[j], idx[i]
    return np.asarray(idx, dtype=np.intp)


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    label: int

    def __post_init__(self):
        if self.label not in (+1, -1):
            raise DatasetError(f"label must be +1 or -1, got {self.label}")


class Dataset:
    """Dense feature matrix with +/-1 labels.

    Arrays are frozen after construction and safe to share across workers.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray, label_mapping: dict | None = None):
        X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"X {X.shape} does not match y {y.shape}")
        bad = set(np.unique(y)) - {+1, -1}
        if bad:
            raise DatasetError(f"labels must be +1/-1, found {sorted(bad)}")
        X.flags.writeable = False
        y.flags.writeable = False
        self.X = X
        self.y = y
        self.label_mapping = label_mapping

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def n_pos(self) -> int:
        return int(np.sum(self.y == 1))

    @property
    def n_neg(self) -> int:
        return int(np.sum(self.y == -1))

    @property
    def samples(self) -> list[Sample]:
        return [Sample(self.X[i], int(self.y[i])) for i in range(len(self))]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.intp)
        return Dataset(self.X[indices], self.y[indices], self.label_mapping)


def parse_libsvm(text: str) -> Dataset:
    """Parse `<label> <idx>:<value> ...` lines into a Dataset.

    Indices are 1-based and strictly increasing within a line; n is the
    largest index seen anywhere; unspecified entries are 0.  The file must
    contain exactly two distinct label values; the numerically larger one is
    mapped to +1 (recorded in ``label_mapping``).
    """
    rows: list[dict[int, float]] = []
    raw_labels: list[float] = []
    n = 0
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        try:
            raw = float(parts[0])
        except ValueError:
            raise MalformedLine(line_no, f"bad label {parts[0]!r}")
        if not math.isfinite(raw):
            raise MalformedLine(line_no, f"non-finite label {parts[0]!r}")
        entries: dict[int, float] = {}
        prev_idx = 0
        for tok in parts[1:]:
            idx_s, _, val_s = tok.partition(":")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise MalformedLine(line_no, f"bad entry {tok!r}")
            if idx <= prev_idx:
                raise MalformedLine(line_no, f"indices not strictly increasing at {tok!r}")
            if not math.isfinite(val):
                raise MalformedLine(line_no, f"non-finite value {tok!r}")
            prev_idx = idx
            entries[idx] = val
        n = max(n, prev_idx)
        rows.append(entries)
        raw_labels.append(raw)

    if not rows:
        raise EmptyDataset("no samples")
    distinct = sorted(set(raw_labels))
    if len(distinct) == 1:
        raise SingleClass(f"only one label value present: {distinct[0]}")
    if len(distinct) > 2:
        raise DatasetError(f"expected two distinct labels, found {distinct}")
    lo, hi = distinct
    mapping = {hi: +1, lo: -1}

    X = np.zeros((len(rows), n), dtype=np.float64)
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            X[i, idx - 1] = val
    y = np.asarray([mapping[v] for v in raw_labels], dtype=np.int64)
    return Dataset(X, y, label_mapping={"+1": hi, "-1": lo})


def serialize_libsvm(d: Dataset) -> str:
    """Canonical rendering: labels +1/-1, every index listed in order, values
    in shortest round-trip decimal.  parse(serialize(d)) reproduces the
    feature matrix bit-for-bit."""
    lines = []
    for i in range(len(d)):
        label = "+1" if d.y[i] == 1 else "-1"
        feats = " ".join(f"{j + 1}:{x!r}" for j, x in enumerate(d.X[i].tolist()))
        lines.append(f"{label} {feats}".rstrip())
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ScalingParams:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        if np.any(self.min > self.max):
            raise DatasetError("per-feature min exceeds max")


def fit_minmax(train: Dataset) -> ScalingParams:
    if len(train) == 0:
        raise EmptyDataset("cannot fit scaling on an empty dataset")
    return ScalingParams(train.X.min(axis=0), train.X.max(axis=0))


def apply_minmax(x: np.ndarray, p: ScalingParams) -> np.ndarray:
    """Map x to (x - min) / (max - min) per feature.  Constant features map
    to 0; values outside the fitted range are not clipped."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.min.shape[0]:
        raise DimensionMismatch(f"expected {p.min.shape[0]} features, got {x.shape[-1]}")
    span = p.max - p.min
    safe = np.where(span > 0, span, 1.0)
    out = (x - p.min) / safe
    return np.where(span > 0, out, 0.0)


def scale_dataset(d: Dataset, p: ScalingParams) -> Dataset:
    return Dataset(apply_minmax(d.X, p), d.y, d.label_mapping)


def _round_half_up(x: float) -> int:
    # the 1e-9 nudge absorbs float noise in fraction*N at exact .5 boundaries
    return int(math.floor(x + 0.5 + 1e-9))


def split_indices(n: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError(f"train_fraction must be in (0,1), got {train_fraction}")
    n_train = _round_half_up(train_fraction * n)
    perm = shuffled_indices(n, seed)
    return perm[:n_train], perm[n_train:]


def split(d: Dataset, train_fraction: float, seed: int,
          stratified: bool = False) -> tuple[Dataset, Dataset]:
    """Seeded random train/test split; train size is round(fraction*N) half-up."""
    if stratified:
        tr_idx, te_idx = _stratified_split_indices(d, train_fraction, seed)
    else:
        tr_idx, te_idx = split_indices(len(d), train_fraction, seed)
    if len(tr_idx) == 0 or len(te_idx) == 0:
        raise DegenerateSplit("one side of the split is empty")
    train, test = d.subset(tr_idx), d.subset(te_idx)
    if train.n_pos == 0 or train.n_neg == 0:
        raise DegenerateSplit("training part contains a single class")
    return train, test


def _stratified_split_indices(d: Dataset, train_fraction: float, seed: int):
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError(f"train_fraction must be in (0,1), got {train_fraction}")
    tr_parts, te_parts = [], []
    for offset, cls in enumerate((+1, -1)):
        members = np.flatnonzero(d.y == cls)
        perm = shuffled_indices(len(members), seed ^ (0xC1A55 + offset))
        k = _round_half_up(train_fraction * len(members))
        tr_parts.append(members[perm[:k]])
        te_parts.append(members[perm[k:]])
    return np.concatenate(tr_parts), np.concatenate(te_parts)


def kfold_indices(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """k (train_idx, validation_idx) pairs; validation folds partition range(n)
    with sizes differing by at most one."""
    if k < 2 or k > n:
        raise BadK(f"k must satisfy 2 <= k <= N, got k={k}, N={n}")
    perm = shuffled_indices(n, seed)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        val = perm[start:start + size]
        train = np.concatenate([perm[:start], perm[start + size:]])
        folds.append((train, val))
        start += size
    return folds


def kfold(d: Dataset, k: int, seed: int) -> list[tuple[Dataset, Dataset]]:
    return [(d.subset(tr), d.subset(va)) for tr, va in kfold_indices(len(d), k, seed)]
