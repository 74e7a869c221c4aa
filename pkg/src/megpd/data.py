"""CSV ingestion and the invertible preprocessing used before fitting.

Preprocessing follows the convention: each column is divided by its empirical
median, the column minimum is subtracted, and a strictly positive shift
epsilon (half the smallest positive value after the subtraction) is added so
that log-ratios are always defined.  All three constants are stored per
column, making the transform exactly invertible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

__all__ = ["DataError", "Dataset", "load_csv", "preprocess",
           "apply_preprocess", "inverse_preprocess"]


class DataError(Exception):
    """Raised for unusable input data (missing files/columns, degeneracies)."""


@dataclass(frozen=True)
class Dataset:
    """Numeric data matrix with named columns and a processing log."""

    values: np.ndarray
    columns: tuple[str, ...]
    provenance: dict

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != len(self.columns):
            raise DataError("values must be an (n, d) matrix matching columns")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def load_csv(path, columns=None, delimiter: str = ",") -> Dataset:
    """Parse a delimited text file with a header row into a Dataset.

    Rows containing missing or non-numeric entries in the selected columns
    are dropped; the count is recorded in the provenance log.
    """
    try:
        frame = pd.read_csv(path, sep=delimiter)
    except FileNotFoundError as exc:
        raise DataError(f"file not found: {path}") from exc
    except pd.errors.EmptyDataError as exc:
        raise DataError(f"empty file: {path}") from exc
    if columns is None:
        columns = list(frame.columns)
    else:
        columns = list(columns)
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise DataError(f"columns not found: {missing}; "
                            f"available: {list(frame.columns)}")
    sub = frame[columns].apply(pd.to_numeric, errors="coerce")
    keep = sub.notna().all(axis=1)
    dropped = int((~keep).sum())
    values = sub[keep].to_numpy(dtype=float)
    if values.shape[0] == 0:
        raise DataError("no usable rows after dropping missing/non-numeric entries")
    log = [f"read {len(frame)} rows from {path}"]
    if dropped:
        log.append(f"dropped {dropped} rows with missing or non-numeric entries")
    provenance = {"source": str(path), "rows_read": int(len(frame)),
                  "rows_dropped": dropped, "log": log}
    return Dataset(values=values, columns=tuple(columns), provenance=provenance)


def preprocess(ds: Dataset) -> Dataset:
    """Scale by medians, subtract minima, add the epsilon shift; store constants."""
    x = ds.values
    medians = np.median(x, axis=0)
    if np.any(medians <= 0.0):
        bad = [ds.columns[i] for i in np.nonzero(medians <= 0.0)[0]]
        raise DataError(f"non-positive median in columns {bad}")
    scaled = x / medians
    minima = scaled.min(axis=0)
    shifted = scaled - minima
    eps = np.empty(ds.d)
    for j in range(ds.d):
        positive = shifted[:, j][shifted[:, j] > 0.0]
        if positive.size == 0:
            raise DataError(f"degenerate column {ds.columns[j]!r} (constant values)")
        eps[j] = 0.5 * positive.min()
    out = shifted + eps
    constants = {"columns": list(ds.columns), "median": medians.tolist(),
                 "min": minima.tolist(), "eps": eps.tolist()}
    provenance = dict(ds.provenance)
    provenance["preprocess"] = constants
    provenance["log"] = list(provenance.get("log", [])) + [
        "preprocessed: divided by median, subtracted minimum, added epsilon shift"]
    return replace(ds, values=out, provenance=provenance)


def apply_preprocess(ds: Dataset, constants: dict) -> Dataset:
    """Re-apply a stored preprocessing transform (e.g. from a model file)."""
    if list(ds.columns) != list(constants["columns"]):
        raise DataError(f"column mismatch: data has {list(ds.columns)}, "
                        f"stored transform expects {constants['columns']}")
    med = np.asarray(constants["median"], dtype=float)
    mn = np.asarray(constants["min"], dtype=float)
    eps = np.asarray(constants["eps"], dtype=float)
    out = ds.values / med - mn + eps
    provenance = dict(ds.provenance)
    provenance["preprocess"] = constants
    provenance["log"] = list(provenance.get("log", [])) + [
        "re-applied stored preprocessing constants"]
    return replace(ds, values=out, provenance=provenance)


def inverse_preprocess(values, constants: dict) -> np.ndarray:
    """Undo preprocess(): raw = (value - eps + min) * median, column-wise."""
    arr = np.asarray(values, dtype=float)
    med = np.asarray(constants["median"], dtype=float)
    mn = np.asarray(constants["min"], dtype=float)
    eps = np.asarray(constants["eps"], dtype=float)
    return (arr - eps + mn) * med
