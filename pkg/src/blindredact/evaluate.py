"""Stratified k-fold cross-validation of naive Bayes, scored by accuracy and Cohen's kappa.

Each cross-validation yields per-fold scores summarized as a ``ScoreTriple``:
the lowest fold (``minus``), the highest fold (``plus``) and the fold mean
(``mikro``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import discretize
from .errors import ConfigError, DataError
from .nbayes import factorize, fit_encoded
from .table import MISSING, Column, Table

#: Generator used for every shuffle; recorded in run reports.
RNG_ALGORITHM = "numpy.random.PCG64"

FIT_SCOPES = ("fold", "global")


@dataclass(frozen=True)
class BinningConfig:
    method: str = discretize.EQUAL_FREQUENCY
    k_bins: int = 10
    fit_scope: str = "fold"

    def __post_init__(self):
        if self.method not in discretize.METHODS:
            raise ConfigError(f"binning method must be one of {discretize.METHODS}, got {self.method!r}")
        if not isinstance(self.k_bins, int) or self.k_bins < 2:
            raise ConfigError(f"k_bins must be an integer >= 2, got {self.k_bins!r}")
        if self.fit_scope not in FIT_SCOPES:
            raise ConfigError(f"fit_scope must be one of {FIT_SCOPES}, got {self.fit_scope!r}")


@dataclass(frozen=True)
class EvalConfig:
    k: int = 10
    seed: int = 0
    alpha: float = 1.0
    binning: BinningConfig = field(default_factory=BinningConfig)

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 2:
            raise ConfigError(f"k must be an integer >= 2, got {self.k!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha!r}")

    def with_seed(self, seed: int) -> "EvalConfig":
        return EvalConfig(self.k, seed, self.alpha, self.binning)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    assignment: np.ndarray

    def test_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: tuple
    counts: np.ndarray  # rows = truth, columns = predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ScoreTriple:
    minus: float
    plus: float
    mikro: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "ScoreTriple":
        if not values:
            raise ValueError("no values to summarize")
        lo, hi = min(values), max(values)
        mean = math.fsum(values) / len(values)
        return cls(float(lo), float(hi), float(min(max(mean, lo), hi)))

    def to_dict(self) -> dict:
        return {"minus": self.minus, "plus": self.plus, "mikro": self.mikro}


@dataclass
class CVResult:
    target: str
    features: list[str]
    accuracy: ScoreTriple
    kappa: ScoreTriple
    per_fold: list[dict]

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "features": self.features,
            "accuracy": self.accuracy.to_dict(),
            "kappa": self.kappa.to_dict(),
            "per_fold": self.per_fold,
        }


def stratum_labels(column: Column, binning: BinningConfig = BinningConfig()) -> np.ndarray:
    """Stratum code per row: the category itself, or a whole-column bin for numeric targets."""
    if column.is_numeric:
        edges = discretize.fit_edges(column.values, binning.method, binning.k_bins)
        return discretize.Discretizer(column.name, binning.method, binning.k_bins, edges).codes(column.values)
    return factorize([MISSING if v is None else v for v in column.values])[0]


def make_folds(table: Table, target: str, k: int = 10, seed: int = 0,
               binning: BinningConfig = BinningConfig()) -> FoldPlan:
    """Deal each target stratum, shuffled, round-robin over ``k`` folds.

    Strata are visited in first-appearance order and dealing continues where
    the previous stratum stopped, so fold sizes stay within one of each other
    overall as well as per stratum.
    """
    n = table.row_count
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    if n < k:
        raise DataError(f"cannot make {k} folds from {n} rows")
    strata = stratum_labels(table.column(target), binning)
    return _deal(strata, k, seed)


def _deal(strata: np.ndarray, k: int, seed: int) -> FoldPlan:
    rng = np.random.Generator(np.random.PCG64(seed))
    assignment = np.empty(len(strata), dtype=np.int64)
    order = np.argsort(strata, kind="stable")
    bounds = np.flatnonzero(np.diff(strata[order])) + 1
    groups = np.split(order, bounds)
    groups.sort(key=lambda g: g[0])
    offset = 0
    for rows in groups:
        rows = rng.permutation(rows)
        assignment[rows] = (offset + np.arange(len(rows))) % k
        offset = (offset + len(rows)) % k
    return FoldPlan(k, seed, assignment)


def confusion(truth: Sequence, predicted: Sequence) -> ConfusionMatrix:
    if len(truth) != len(predicted):
        raise ValueError(f"length mismatch: {len(truth)} truths vs {len(predicted)} predictions")
    index: dict = {}
    for t, p in zip(truth, predicted):
        index.setdefault(t, len(index))
        index.setdefault(p, len(index))
    counts = np.zeros((len(index), len(index)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(tuple(index), counts)


def _check_nonempty(cm: ConfusionMatrix) -> int:
    total = cm.total
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    return total


def accuracy(cm: ConfusionMatrix) -> float:
    """Percent of rows on the diagonal, in [0, 100]."""
    total = _check_nonempty(cm)
    return 100.0 * int(np.trace(cm.counts)) / total


def _kappa_from_sums(trace: int, rowsums: np.ndarray, colsums: np.ndarray, total: int) -> float:
    # integer numerator/denominator so the only rounding is the final division
    chance = int(np.dot(rowsums.astype(np.int64), colsums.astype(np.int64)))
    denominator = total * total - chance
    if denominator < 1e-12 * total * total:
        return 0.0
    return (trace * total - chance) / denominator


def kappa(cm: ConfusionMatrix) -> float:
    """Cohen's kappa ``(p_o - p_e) / (1 - p_e)``; 0 when ``1 - p_e < 1e-12``."""
    total = _check_nonempty(cm)
    return _kappa_from_sums(int(np.trace(cm.counts)), cm.counts.sum(axis=1), cm.counts.sum(axis=0), total)


def scores_from_codes(truth: np.ndarray, predicted: np.ndarray) -> tuple[float, float]:
    """(accuracy, kappa) for integer-coded labels, equal to the confusion-matrix route."""
    total = len(truth)
    if total == 0:
        raise ValueError("no rows to score")
    size = int(max(truth.max(), predicted.max())) + 1
    trace = int(np.count_nonzero(truth == predicted))
    rows = np.bincount(truth, minlength=size)
    cols = np.bincount(predicted, minlength=size)
    return 100.0 * trace / total, _kappa_from_sums(trace, rows, cols, total)


@dataclass(frozen=True)
class _Encoded:
    name: str
    numeric: bool
    values: np.ndarray  # raw floats for numeric, category codes otherwise
    card: int = 0


class Prepared:
    """Columns of a table in model-ready form: category codes or raw numbers.

    ``select`` builds a physically smaller instance; a column left out of it
    is not reachable from anything computed on the result.
    """

    def __init__(self, columns: list[_Encoded], row_count: int):
        self._columns = {c.name: c for c in columns}
        self.row_count = row_count

    @classmethod
    def from_table(cls, table: Table) -> "Prepared":
        cols = []
        for c in table.columns:
            if c.is_numeric:
                cols.append(_Encoded(c.name, True, c.values))
            else:
                codes, uniques = factorize([MISSING if v is None else v for v in c.values])
                cols.append(_Encoded(c.name, False, codes, len(uniques)))
        return cls(cols, table.row_count)

    @property
    def names(self) -> list[str]:
        return list(self._columns)

    def __contains__(self, name: str) -> bool:
        return name in self._columns

    def __getitem__(self, name: str) -> _Encoded:
        try:
            return self._columns[name]
        except KeyError:
            raise DataError(f"no column {name!r}") from None

    def select(self, names: Sequence[str]) -> "Prepared":
        return Prepared([self[n] for n in names], self.row_count)


def _fold_codes(col: _Encoded, train: np.ndarray, binning: BinningConfig, global_edges: dict):
    """(codes for every row, card, edges or None) for one column in one fold."""
    if not col.numeric:
        return col.values, col.card, None
    if binning.fit_scope == "global":
        edges = global_edges[col.name]
    else:
        train_values = col.values[train]
        if np.isnan(train_values).all():
            edges = ()
        else:
            edges = discretize.fit_edges(train_values, binning.method, binning.k_bins)
    d = discretize.Discretizer(col.name, binning.method, binning.k_bins, edges)
    return d.codes(col.values), d.n_bins + 1, edges


def cross_validate(table: Table | Prepared, target: str, config: EvalConfig = EvalConfig(),
                   features: Sequence[str] | None = None) -> CVResult:
    """k-fold CV of naive Bayes predicting ``target`` from ``features``.

    Features default to every other column.  Numeric columns (target
    included) are binned per training fold, or once over all rows when the
    fit scope is ``global``.  An empty feature set gives a prior-only model.
    """
    prepared = table if isinstance(table, Prepared) else Prepared.from_table(table)
    if target not in prepared:
        raise DataError(f"target column {target!r} not present")
    if features is None:
        features = [n for n in prepared.names if n != target]
    features = list(features)
    if target in features:
        raise DataError(f"target {target!r} cannot also be a feature")
    n, k = prepared.row_count, config.k
    if n < k:
        raise DataError(f"cannot make {k} folds from {n} rows")

    tcol = prepared[target]
    if tcol.numeric:
        strata = stratum_labels(Column(target, "numeric", tcol.values), config.binning)
    else:
        strata = tcol.values
    plan = _deal(strata, k, config.seed)

    binning = config.binning
    global_edges = {}
    if binning.fit_scope == "global":
        for name in [target, *features]:
            col = prepared[name]
            if col.numeric and not np.isnan(col.values).all():
                global_edges[name] = discretize.fit_edges(col.values, binning.method, binning.k_bins)
            elif col.numeric:
                global_edges[name] = ()

    per_fold = []
    for fold in range(k):
        train, test = plan.train_index(fold), plan.test_index(fold)
        if len(test) == 0:
            raise DataError(f"fold {fold} has no test rows")
        edges_used = {}
        y, _, edges = _fold_codes(tcol, train, binning, global_edges)
        if edges is not None:
            edges_used[target] = list(edges)
        X = np.empty((n, len(features)), dtype=np.int64)
        cards = []
        for j, name in enumerate(features):
            codes, card, edges = _fold_codes(prepared[name], train, binning, global_edges)
            X[:, j] = codes
            cards.append(card)
            if edges is not None:
                edges_used[name] = list(edges)
        model = fit_encoded(X[train], y[train], cards, config.alpha)
        predicted = model.predict_codes(X[test])
        acc, kap = scores_from_codes(y[test], predicted)
        per_fold.append({
            "fold": fold,
            "n_train": int(len(train)),
            "n_test": int(len(test)),
            "accuracy": acc,
            "kappa": kap,
            "n_labels": model.n_labels,
            "vocab_sizes": dict(zip(features, model.vocab_sizes)),
            "edges": edges_used,
        })
    return CVResult(
        target=target,
        features=features,
        accuracy=ScoreTriple.of([f["accuracy"] for f in per_fold]),
        kappa=ScoreTriple.of([f["kappa"] for f in per_fold]),
        per_fold=per_fold,
    )
