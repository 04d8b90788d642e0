"""Core domain types, CSV ingestion and train/validation/test splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from sentinel.errors import ConfigError, DataError

DEFAULT_ATTACK_COLUMN = "ATT_FLAG"

Interval = tuple  # (start, end, label), half-open


@dataclass(frozen=True)
class Measurement:
    timestamp_index: int
    value: float


def intervals_from_flags(flags: Sequence[int], prefix: str = "attack") -> list:
    """Maximal runs of 1 in a 0/1 flag sequence, as half-open labelled intervals."""
    intervals = []
    start = None
    for i, f in enumerate(flags):
        if f and start is None:
            start = i
        elif not f and start is not None:
            intervals.append((start, i, f"{prefix}_{len(intervals) + 1}"))
            start = None
    if start is not None:
        intervals.append((start, len(flags), f"{prefix}_{len(intervals) + 1}"))
    return intervals


def flags_from_intervals(intervals, length: int) -> np.ndarray:
    flags = np.zeros(length, dtype=bool)
    for start, end, _ in intervals:
        flags[start:end] = True
    return flags


def _check_intervals(intervals, length: int) -> None:
    ordered = sorted(intervals, key=lambda iv: iv[0])
    prev_end = 0
    for start, end, _ in ordered:
        if not (0 <= start < end <= length):
            raise DataError(f"attack interval [{start}, {end}) outside series of length {length}")
        if start < prev_end:
            raise DataError(f"attack intervals overlap at index {start}")
        prev_end = end


@dataclass
class SensorSeries:
    """A univariate measurement sequence with labelled attack windows.

    ``values[i]`` is the measurement at timestamp index ``i``; indices are
    implicit, contiguous and start at zero.
    """

    sensor_id: str
    values: np.ndarray
    attack_intervals: list = field(default_factory=list)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise DataError(f"series {self.sensor_id!r}: values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DataError(f"series {self.sensor_id!r}: non-finite value at index {bad}")
        self.values = values
        self.attack_intervals = sorted((tuple(iv) for iv in self.attack_intervals), key=lambda iv: iv[0])
        _check_intervals(self.attack_intervals, len(values))

    def __len__(self) -> int:
        return len(self.values)

    def measurements(self) -> Iterator[Measurement]:
        for i, v in enumerate(self.values):
            yield Measurement(i, float(v))

    def attack_flags(self) -> np.ndarray:
        return flags_from_intervals(self.attack_intervals, len(self))

    def first_attack_start(self) -> Optional[int]:
        return self.attack_intervals[0][0] if self.attack_intervals else None


@dataclass(frozen=True)
class SplitSpec:
    """Training length N and validation length; N' = N + validation_len."""

    train_len: int
    validation_len: int = 0

    def __post_init__(self):
        if self.train_len <= 0:
            raise ConfigError(f"train_len must be positive, got {self.train_len}")
        if self.validation_len < 0:
            raise ConfigError(f"validation_len must be non-negative, got {self.validation_len}")

    @property
    def fit_len(self) -> int:
        return self.train_len + self.validation_len

    def check_lag(self, lag: int) -> None:
        if not (1 < lag and 2 * lag < self.train_len):
            raise ConfigError(f"lag L={lag} requires 1 < L < N/2 with N={self.train_len}")


@dataclass
class Dataset:
    """Sensor series sharing one timeline and one set of plant-wide attack windows."""

    name: str
    series: list
    timestamps: Optional[list] = None

    def __post_init__(self):
        if not self.series:
            raise DataError(f"dataset {self.name!r} has no series")
        n = len(self.series[0])
        intervals = self.series[0].attack_intervals
        seen = set()
        for s in self.series:
            if len(s) != n:
                raise DataError(f"dataset {self.name!r}: series {s.sensor_id!r} has length {len(s)}, expected {n}")
            if s.attack_intervals != intervals:
                raise DataError(f"dataset {self.name!r}: series {s.sensor_id!r} has different attack intervals")
            if s.sensor_id in seen:
                raise DataError(f"dataset {self.name!r}: duplicate sensor id {s.sensor_id!r}")
            seen.add(s.sensor_id)
        if self.timestamps is not None and len(self.timestamps) != n:
            raise DataError(f"dataset {self.name!r}: {len(self.timestamps)} timestamps for {n} rows")

    def __len__(self) -> int:
        return len(self.series[0])

    def __getitem__(self, sensor_id: str) -> SensorSeries:
        for s in self.series:
            if s.sensor_id == sensor_id:
                return s
        raise KeyError(sensor_id)

    @property
    def sensor_ids(self) -> list:
        return [s.sensor_id for s in self.series]

    @property
    def attack_intervals(self) -> list:
        return list(self.series[0].attack_intervals)

    def attack_flags(self) -> np.ndarray:
        return self.series[0].attack_flags()

    def subset(self, sensor_ids) -> "Dataset":
        missing = [sid for sid in sensor_ids if sid not in self.sensor_ids]
        if missing:
            raise DataError(f"unknown sensors: {', '.join(missing)}")
        return Dataset(self.name, [self[sid] for sid in sensor_ids], self.timestamps)


def concat(datasets: Sequence[Dataset], name: str) -> Dataset:
    """Append datasets end to end (same sensors); attack intervals are shifted and renumbered."""
    ids = datasets[0].sensor_ids
    for ds in datasets[1:]:
        if ds.sensor_ids != ids:
            raise DataError(f"cannot concatenate {ds.name!r}: sensor columns differ")
    intervals = []
    offset = 0
    for ds in datasets:
        for start, end, _ in ds.attack_intervals:
            intervals.append((start + offset, end + offset, f"attack_{len(intervals) + 1}"))
        offset += len(ds)
    series = [
        SensorSeries(sid, np.concatenate([ds[sid].values for ds in datasets]), intervals)
        for sid in ids
    ]
    timestamps = None
    if all(ds.timestamps is not None for ds in datasets):
        timestamps = [t for ds in datasets for t in ds.timestamps]
    return Dataset(name, series, timestamps)


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a dataset CSV.

    ``timestamp_column=None`` means the first header column. ``sensor_columns=None``
    means every column except the timestamp and attack-flag columns.
    """

    timestamp_column: Optional[str] = None
    sensor_columns: Optional[tuple] = None
    attack_column: Optional[str] = DEFAULT_ATTACK_COLUMN


def _parse_float(text: str, column: str, row: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}: non-numeric value {text!r} in column {column!r}") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}: missing or non-finite value {text!r} in column {column!r}")
    return value


def load_csv(path, schema: Optional[CsvSchema] = None, name: Optional[str] = None) -> Dataset:
    """Load a dataset CSV; attack intervals are the maximal runs of flag 1."""
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: no rows") from None
        rows = [r for r in reader if r]
    if not rows:
        raise DataError(f"{path}: no rows")

    ts_col = schema.timestamp_column or header[0]
    if ts_col not in header:
        raise DataError(f"{path}: timestamp column {ts_col!r} not in header")
    attack_col = schema.attack_column if schema.attack_column in header else None
    if schema.sensor_columns is None:
        sensor_cols = [h for h in header if h not in (ts_col, attack_col)]
    else:
        sensor_cols = list(schema.sensor_columns)
        absent = [c for c in sensor_cols if c not in header]
        if absent:
            raise DataError(f"{path}: sensor columns missing from header: {', '.join(absent)}")
    if not sensor_cols:
        raise DataError(f"{path}: no sensor columns")

    col_idx = {h: i for i, h in enumerate(header)}
    values = np.empty((len(sensor_cols), len(rows)), dtype=np.float64)
    flags = np.zeros(len(rows), dtype=np.int8)
    timestamps = []
    for r, row in enumerate(rows):
        line = r + 2
        if len(row) != len(header):
            raise DataError(f"row {line}: expected {len(header)} fields, found {len(row)}")
        timestamps.append(row[col_idx[ts_col]].strip())
        for k, c in enumerate(sensor_cols):
            values[k, r] = _parse_float(row[col_idx[c]].strip(), c, line)
        if attack_col is not None:
            flag = _parse_float(row[col_idx[attack_col]].strip(), attack_col, line)
            if flag not in (0.0, 1.0):
                raise DataError(f"row {line}: attack flag must be 0 or 1, got {flag:g}")
            flags[r] = int(flag)

    intervals = intervals_from_flags(flags)
    series = [SensorSeries(c, values[k], intervals) for k, c in enumerate(sensor_cols)]
    return Dataset(name or path.stem, series, timestamps)


def write_csv(dataset: Dataset, path, timestamp_column: str = "timestamp",
              attack_column: str = DEFAULT_ATTACK_COLUMN) -> None:
    """Write a dataset in the layout ``load_csv`` reads. Floats use repr, so reloads are exact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    flags = dataset.attack_flags()
    stamps = dataset.timestamps if dataset.timestamps is not None else [str(i) for i in range(len(dataset))]
    columns = [s.values for s in dataset.series]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([timestamp_column, *dataset.sensor_ids, attack_column])
        for i in range(len(dataset)):
            writer.writerow([stamps[i], *(repr(float(col[i])) for col in columns), int(flags[i])])


def split(series: SensorSeries, spec: SplitSpec, lag: Optional[int] = None):
    """Return non-copying (train, validation, test) views of ``series.values``."""
    n_fit = spec.fit_len
    if n_fit > len(series):
        raise DataError(f"series {series.sensor_id!r}: N'={n_fit} exceeds length {len(series)}")
    first = series.first_attack_start()
    if first is not None and first < n_fit:
        raise DataError(f"series {series.sensor_id!r}: attack in training window (starts at {first} < N'={n_fit})")
    if lag is not None:
        spec.check_lag(lag)
    v = series.values
    return v[: spec.train_len], v[spec.train_len : n_fit], v[n_fit:]
