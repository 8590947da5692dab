"""Categorical naive Bayes with additive smoothing, computed in log space.

With ``n`` training rows, ``L`` labels and ``V_f`` categories of feature ``f``
seen in training::

    prior(y)          = (count(y) + alpha) / (n + alpha * L)
    cond(v | y, f)    = (count(v, y) + alpha) / (count(y) + alpha * V_f)

A category never seen in training gets the smoothing-only mass
``alpha / (count(y) + alpha * V_f)``; a missing value contributes nothing.
Labels are kept in training-appearance order, which is also the tie-break
order for :func:`predict`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .table import MISSING, Table

_CHUNK_ROWS = 4096
_CHUNK_CELLS = 2**17


def factorize(values: Sequence) -> tuple[np.ndarray, list]:
    """Integer codes in first-appearance order, plus the distinct values."""
    index: dict = {}
    codes = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        code = index.get(v)
        if code is None:
            code = index[v] = len(index)
        codes[i] = code
    return codes, list(index)


@dataclass(frozen=True, eq=False)
class EncodedNB:
    """Fitted model over integer-coded data.

    ``tables[f]`` has shape ``(card_f + 2, L)``: one row per category code,
    then the unseen-category row, then an all-zero row that code ``-1``
    (missing) indexes.
    """

    label_codes: np.ndarray
    class_counts: np.ndarray
    log_prior: np.ndarray
    tables: tuple[np.ndarray, ...]
    vocab_sizes: tuple[int, ...]
    alpha: float

    @property
    def n_labels(self) -> int:
        return len(self.label_codes)

    def joint_log_scores(self, X: np.ndarray, out: np.ndarray | None = None,
                         scratch: np.ndarray | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=np.int64).reshape(len(X), len(self.tables))
        scores = np.empty((len(X), self.n_labels)) if out is None else out
        gathered = np.empty_like(scores) if scratch is None else scratch
        scores[:] = self.log_prior
        for f, table in enumerate(self.tables):
            # anything beyond the fitted code range is an unseen category
            codes = np.minimum(X[:, f], table.shape[0] - 2)
            np.take(table, codes, axis=0, out=gathered)
            scores += gathered
        return scores

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        """Index into ``label_codes`` of the argmax label per row (first max wins)."""
        X = np.asarray(X, dtype=np.int64)
        out = np.empty(len(X), dtype=np.int64)
        # chunk so the score buffers stay cache-sized
        chunk = max(16, min(_CHUNK_ROWS, _CHUNK_CELLS // max(self.n_labels, 1)))
        scores = np.empty((chunk, self.n_labels))
        scratch = np.empty_like(scores)
        for start in range(0, len(X), chunk):
            block = X[start:start + chunk]
            m = len(block)
            s = self.joint_log_scores(block, scores[:m], scratch[:m])
            out[start:start + m] = np.argmax(s, axis=1)
        return out

    def predict_codes(self, X: np.ndarray) -> np.ndarray:
        return self.label_codes[self.predict_index(X)]

    def posterior(self, X: np.ndarray) -> np.ndarray:
        scores = self.joint_log_scores(X)
        scores -= scores.max(axis=1, keepdims=True)
        p = np.exp(scores)
        return p / p.sum(axis=1, keepdims=True)


def fit_encoded(X: np.ndarray, y: np.ndarray, cards: Sequence[int], alpha: float = 1.0) -> EncodedNB:
    """Fit on integer codes.

    ``X[:, f]`` holds codes in ``[0, cards[f])`` (``-1`` for missing, which is
    not counted); ``y`` holds non-negative label codes.  Categories with a
    code but no training rows behave exactly like unseen categories.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    if n == 0:
        raise DataError("cannot fit naive Bayes on zero rows")
    X = np.asarray(X, dtype=np.int64).reshape(n, len(cards))

    distinct, first = np.unique(y, return_index=True)
    label_codes = distinct[np.argsort(first, kind="stable")]
    lookup = np.full(int(distinct.max()) + 1, -1, dtype=np.int64)
    lookup[label_codes] = np.arange(len(label_codes))
    yl = lookup[y]
    L = len(label_codes)

    class_counts = np.bincount(yl, minlength=L)
    log_prior = np.log(class_counts + alpha) - np.log(n + alpha * L)

    tables = []
    vocab_sizes = []
    for f, card in enumerate(cards):
        x = X[:, f]
        seen = x >= 0
        xs, ys = x[seen], yl[seen]
        counts = np.bincount(ys * card + xs, minlength=L * card).reshape(L, card) if card else np.zeros((L, 0))
        V = int(np.count_nonzero(np.bincount(xs, minlength=card))) if card else 0
        log_denominator = np.log(class_counts + alpha * V)
        table = np.zeros((card + 2, L))
        table[:card] = (np.log(counts + alpha) - log_denominator[:, None]).T
        table[card] = np.log(alpha) - log_denominator
        tables.append(table)
        vocab_sizes.append(V)
    return EncodedNB(label_codes, class_counts, log_prior, tuple(tables), tuple(vocab_sizes), float(alpha))


@dataclass(frozen=True, eq=False)
class NBModel:
    target_name: str
    labels: tuple
    features: tuple[str, ...]
    vocab: tuple[tuple, ...]
    alpha: float
    core: EncodedNB

    @property
    def log_prior(self) -> dict:
        return dict(zip(self.labels, self.core.log_prior.tolist()))

    def log_conditional(self, feature: str, label, category) -> float:
        """log cond(category | label, feature); unseen categories get the smoothing mass."""
        f = self.features.index(feature)
        table = self.core.tables[f]
        try:
            row = self.vocab[f].index(category)
        except ValueError:
            row = table.shape[0] - 2
        return float(table[row, self.labels.index(label)])

    def feature_tables(self) -> dict:
        """``{feature: {label: {category: log probability}}}`` over the training vocab."""
        return {
            feature: {
                label: {cat: float(self.core.tables[f][i, j]) for i, cat in enumerate(self.vocab[f])}
                for j, label in enumerate(self.labels)
            }
            for f, feature in enumerate(self.features)
        }

    def encode(self, rows: Sequence[Mapping]) -> np.ndarray:
        index = [{c: i for i, c in enumerate(v)} for v in self.vocab]
        X = np.empty((len(rows), len(self.features)), dtype=np.int64)
        for r, row in enumerate(rows):
            for f, feature in enumerate(self.features):
                value = row.get(feature)
                X[r, f] = -1 if value is None else index[f].get(value, len(self.vocab[f]))
        return X

    def summary(self) -> dict:
        return {
            "target": self.target_name,
            "alpha": self.alpha,
            "label_counts": dict(zip(map(str, self.labels), self.core.class_counts.tolist())),
            "vocab_sizes": dict(zip(self.features, self.core.vocab_sizes)),
        }


def fit(train: Table, target: str, alpha: float = 1.0, features: Sequence[str] | None = None) -> NBModel:
    """Fit on a table of categorical columns.

    Features default to every column except ``target``.  Missing feature or
    target values are read as the ``«missing»`` token.
    """
    if features is None:
        features = [n for n in train.names if n != target]
    features = sorted(features)
    for name in [target, *features]:
        if train.column(name).is_numeric:
            raise DataError(f"column {name!r} is numeric; discretize it before fitting")
    y, labels = factorize([MISSING if v is None else v for v in train.column(target).values])
    vocab, codes = [], []
    for name in features:
        c, uniques = factorize([MISSING if v is None else v for v in train.column(name).values])
        codes.append(c)
        vocab.append(tuple(uniques))
    X = np.column_stack(codes) if codes else np.zeros((train.row_count, 0), dtype=np.int64)
    core = fit_encoded(X, y, [len(v) for v in vocab], alpha)
    return NBModel(target, tuple(labels), tuple(features), tuple(vocab), float(alpha), core)


def posterior(model: NBModel, row: Mapping) -> dict:
    """Label -> probability for one row; absent or ``None`` features carry no evidence."""
    p = model.core.posterior(model.encode([row]))[0]
    return dict(zip(model.labels, p.tolist()))


def posteriors(model: NBModel, rows: Sequence[Mapping]) -> list[dict]:
    """:func:`posterior` for many rows in one pass."""
    if not rows:
        return []
    p = model.core.posterior(model.encode(rows))
    return [dict(zip(model.labels, r)) for r in p.tolist()]


def predict(model: NBModel, row: Mapping):
    return model.labels[int(model.core.predict_index(model.encode([row]))[0])]


def batch_predict(model: NBModel, table: Table) -> list:
    if table.row_count == 0:
        return []
    missing = [f for f in model.features if f not in table]
    if missing:
        raise DataError(f"table lacks model features {missing}")
    # table cells follow fit(): a missing cell is the «missing» category, not absent evidence
    cols = [[MISSING if v is None else v for v in table.column(f).values] for f in model.features]
    rows = [dict(zip(model.features, r)) for r in zip(*cols)] if cols else [{}] * table.row_count
    return [model.labels[int(i)] for i in model.core.predict_index(model.encode(rows))]
