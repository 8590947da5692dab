"""Equal-frequency / equal-width binning of numeric columns into ordinal labels.

Intervals are left-open, right-closed: ``(-inf, e0], (e0, e1], ..., (e_last, inf)``,
so a value equal to an edge falls in the lower bin.  Values outside the
fitted range clamp to the first or last bin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .table import CATEGORICAL, MISSING, Column

EQUAL_FREQUENCY = "equal-frequency"
EQUAL_WIDTH = "equal-width"
METHODS = (EQUAL_FREQUENCY, EQUAL_WIDTH)


@dataclass(frozen=True)
class Discretizer:
    column_name: str
    method: str
    requested_bins: int
    edges: tuple[float, ...]
    fitted_on: str = "all"

    @property
    def n_bins(self) -> int:
        return len(self.edges) + 1

    def codes(self, values: np.ndarray) -> np.ndarray:
        """Integer bin index per value; NaN maps to ``n_bins`` (the missing code)."""
        values = np.asarray(values, dtype=np.float64)
        out = np.searchsorted(np.asarray(self.edges, dtype=np.float64), values, side="left")
        out[np.isnan(values)] = self.n_bins
        return out

    def to_dict(self) -> dict:
        return {
            "column": self.column_name,
            "method": self.method,
            "requested_bins": self.requested_bins,
            "edges": list(self.edges),
            "fitted_on": self.fitted_on,
        }


def _merge_edges(candidates: np.ndarray, lo: float, hi: float,
                 data: np.ndarray | None = None) -> tuple[float, ...]:
    """Strictly increasing edges inside [lo, hi); with ``data`` (sorted), also no empty bins."""
    edges = []
    for e in candidates:
        e = float(e)
        if e < lo or e >= hi:
            continue
        if edges and e <= edges[-1]:
            continue
        if data is not None:
            below = np.searchsorted(data, e, side="right")
            if below == (np.searchsorted(data, edges[-1], side="right") if edges else 0):
                continue
        edges.append(e)
    return tuple(edges)


def fit_edges(values: np.ndarray, method: str = EQUAL_FREQUENCY, k: int = 10) -> tuple[float, ...]:
    values = np.asarray(values, dtype=np.float64)
    values = values[~np.isnan(values)]
    if values.size == 0:
        raise DataError("cannot fit bins on a column with no values")
    if k < 2:
        raise ValueError(f"need at least 2 bins, got {k}")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return ()
    if method == EQUAL_WIDTH:
        candidates = lo + (hi - lo) * np.arange(1, k) / k
    elif method == EQUAL_FREQUENCY:
        values = np.sort(values)
        return _merge_edges(np.quantile(values, np.arange(1, k) / k), lo, hi, values)
    else:
        raise ValueError(f"unknown binning method {method!r}")
    return _merge_edges(candidates, lo, hi)


def fit_bins(column: Column, method: str = EQUAL_FREQUENCY, k: int = 10, fitted_on: str = "all") -> Discretizer:
    """Fit a discretizer on a numeric column (missing values ignored)."""
    if not column.is_numeric:
        raise DataError(f"column {column.name!r} is not numeric")
    try:
        edges = fit_edges(column.values, method, k)
    except DataError:
        raise DataError(f"column {column.name!r} has no non-missing values") from None
    return Discretizer(column.name, method, k, edges, fitted_on)


def bin_label(index: int) -> str:
    return f"bin_{index}"


def apply(d: Discretizer, column: Column) -> Column:
    """Map a numeric column to ``bin_i`` labels (``«missing»`` for NaN)."""
    codes = d.codes(column.values)
    labels = [MISSING if c == d.n_bins else bin_label(int(c)) for c in codes]
    return Column(column.name, CATEGORICAL, labels)
