"""Multivariate time-series container, CSV I/O, standardization, concatenation."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Dataset:
    """T x N multivariate time series.

    Rows are time points, columns are channels. ``segment_boundaries`` holds
    1-based start indices of every segment after the first (each in (1, T]),
    recording concatenation joins so downstream lagged regressions can skip
    rows that straddle two source series.
    """

    values: np.ndarray
    channel_names: list[str]
    segment_boundaries: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-d, got shape {self.values.shape}")
        T, N = self.values.shape
        if T < 1 or N < 1:
            raise ValueError(f"need T >= 1 and N >= 1, got T={T}, N={N}")
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise ValueError(f"non-finite value at row {bad[0] + 1}, column {bad[1] + 1}")
        if len(self.channel_names) != N:
            raise ValueError(f"{len(self.channel_names)} channel names for {N} columns")
        bounds = list(self.segment_boundaries)
        if any(b <= 1 or b > T for b in bounds):
            raise ValueError(f"segment boundaries must lie in (1, T={T}]: {bounds}")
        if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            raise ValueError(f"segment boundaries must be strictly increasing: {bounds}")
        self.segment_boundaries = bounds

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def segments(self) -> list[tuple[int, int]]:
        """Half-open 0-based (start, stop) row ranges of the segments."""
        starts = [0] + [b - 1 for b in self.segment_boundaries]
        stops = starts[1:] + [self.T]
        return list(zip(starts, stops))


def valid_lag_rows(T: int, order: int, boundaries=()) -> np.ndarray:
    """0-based row indices t usable as regression targets at the given lag order.

    A row qualifies when t and t-order fall in the same segment (boundaries
    use the same 1-based convention as Dataset.segment_boundaries), so lagged
    predictors never reach across a concatenation join.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    starts = [0] + [b - 1 for b in boundaries]
    stops = starts[1:] + [T]
    keep = []
    for start, stop in zip(starts, stops):
        keep.extend(range(start + order, stop))
    return np.asarray(keep, dtype=np.int64)


def load_csv(path, has_header: bool = True) -> Dataset:
    """Read a Dataset from a comma-separated file.

    Parameters
    ----------
    path : str or Path
        UTF-8 CSV, rows = time points, '.' decimal separator.
    has_header : bool
        If True the first row supplies channel names; otherwise names are
        generated as ``ch1..chN``.

    Returns
    -------
    Dataset
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"empty file: {path}")

    names = None
    if has_header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"no data rows after header: {path}")

    ncol = len(rows[0])
    data = np.empty((len(rows), ncol), dtype=np.float64)
    for i, row in enumerate(rows):
        if len(row) != ncol:
            raise ValueError(
                f"ragged row {i + 1 + int(has_header)}: expected {ncol} columns, got {len(row)}"
            )
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise ValueError(
                    f"non-numeric cell at row {i + 1 + int(has_header)}, column {j + 1}: {cell!r}"
                ) from None

    if names is None:
        names = [f"ch{j + 1}" for j in range(ncol)]
    elif len(names) != ncol:
        raise ValueError(f"header has {len(names)} names for {ncol} columns")
    return Dataset(values=data, channel_names=names)


def save_csv(d: Dataset, path) -> None:
    """Write a Dataset as CSV with a header row, 15 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(d.channel_names)
        for row in d.values:
            w.writerow([f"{v:.15g}" for v in row])


def standardize(d: Dataset, mode: str = "demean") -> Dataset:
    """Center (and optionally scale) each column, per segment independently.

    Parameters
    ----------
    d : Dataset
    mode : {"demean", "zscore"}
        "demean" subtracts the per-segment column mean; "zscore" additionally
        divides by the sample standard deviation (divisor T-1). Zero-variance
        columns are left centered untouched by the scaling step.

    Returns
    -------
    Dataset
        New Dataset; the input is not modified.
    """
    if mode not in ("demean", "zscore"):
        raise ValueError(f"unknown mode: {mode!r}")
    out = d.values.copy()
    degenerate = np.zeros(d.N, dtype=bool)
    for start, stop in d.segments():
        seg = out[start:stop]
        if mode == "zscore" and seg.shape[0] < 2:
            raise ValueError("zscore needs at least 2 rows per segment")
        seg -= seg.mean(axis=0)
        if mode == "zscore":
            sd = seg.std(axis=0, ddof=1)
            zero = sd == 0.0
            degenerate |= zero
            sd[zero] = 1.0
            seg /= sd
    if degenerate.any():
        cols = ", ".join(d.channel_names[j] for j in np.flatnonzero(degenerate))
        warnings.warn(f"zero-variance columns left centered only: {cols}", stacklevel=2)
    return Dataset(
        values=out,
        channel_names=list(d.channel_names),
        segment_boundaries=list(d.segment_boundaries),
    )


def concatenate(datasets: list[Dataset]) -> Dataset:
    """Stack datasets in time, recording a segment boundary at each join."""
    if not datasets:
        raise ValueError("need at least one dataset")
    first = datasets[0]
    for i, d in enumerate(datasets[1:], start=2):
        if d.N != first.N:
            raise ValueError(f"dataset {i} has N={d.N}, expected {first.N}")
        if d.channel_names != first.channel_names:
            raise ValueError(f"dataset {i} channel names differ from dataset 1")
    values = np.vstack([d.values for d in datasets])
    bounds: list[int] = []
    offset = 0
    for d in datasets:
        bounds.extend(offset + b for b in d.segment_boundaries)
        offset += d.T
        if offset < values.shape[0]:
            bounds.append(offset + 1)
    return Dataset(values=values, channel_names=list(first.channel_names), segment_boundaries=sorted(set(bounds)))
