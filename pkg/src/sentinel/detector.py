"""Online scoring: ring buffer, projection, departure score, alarms.

Per push the work is one materialised window (L copies), one R x L
matrix-vector product and an R-length weighted sum, all inside a compiled
kernel. The batch scorer runs the very same kernel over a whole array, so
streaming and batch departures are bit-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from sentinel._kernel import _advance
from sentinel.boundary import EllipsoidBoundary, SphereBoundary
from sentinel.errors import DataError
from sentinel.ingest import Measurement
from sentinel.ssa import SubspaceModel

Boundary = Union[SphereBoundary, EllipsoidBoundary]


@dataclass(frozen=True, slots=True)
class ScoreEvent:
    sensor_id: str
    timestamp_index: int
    departure: float
    alarmed: bool

    def to_csv_row(self) -> list:
        return [self.sensor_id, self.timestamp_index, repr(self.departure), int(self.alarmed)]

    def to_json(self) -> str:
        return json.dumps(
            {"sensor_id": self.sensor_id, "timestamp_index": self.timestamp_index,
             "departure": self.departure, "alarmed": self.alarmed}
        )


@dataclass(frozen=True)
class PlantAlarm:
    timestamp_index: int
    alarming_sensors: tuple  # sorted sensor ids, never empty


class DetectorState:
    """Per-sensor streaming scorer.

    ``push`` returns ``None`` during the first L-1 samples, then one
    ``ScoreEvent`` per sample. Alarm condition is ``departure > threshold``.
    """

    def __init__(self, model: SubspaceModel, boundary: Boundary, sensor_id: str = ""):
        if boundary.centroid.shape[0] != model.signal_dim:
            raise DataError(
                f"boundary dimension {boundary.centroid.shape[0]} does not match signal dimension {model.signal_dim}"
            )
        self.model = model
        self.boundary = boundary
        self.sensor_id = sensor_id
        self.threshold = float(boundary.threshold)
        self._basis_t = np.ascontiguousarray(model.basis.T)
        self._centroid = np.ascontiguousarray(boundary.centroid, dtype=np.float64)
        self._weights = np.ascontiguousarray(boundary.weights, dtype=np.float64)
        self._ring = np.zeros(model.lag)
        self._scratch = np.empty(model.lag)
        self._cursor = np.zeros(2, dtype=np.int64)
        self._one = np.empty(1)
        self._out = np.empty(1)
        self._next_index: Optional[int] = None

    @property
    def samples_seen(self) -> int:
        return int(self._cursor[1])

    def window(self) -> np.ndarray:
        """The last min(samples_seen, L) values, oldest first."""
        lag = self.model.lag
        pos = int(self._cursor[0])
        ordered = np.concatenate([self._ring[pos:], self._ring[:pos]])
        return ordered[lag - min(self.samples_seen, lag):]

    def fresh(self) -> "DetectorState":
        return DetectorState(self.model, self.boundary, self.sensor_id)

    def push(self, m: Measurement) -> Optional[ScoreEvent]:
        idx = m.timestamp_index
        if self._next_index is not None and idx != self._next_index:
            raise DataError(
                f"sensor {self.sensor_id!r}: expected timestamp index {self._next_index}, got {idx}"
            )
        self._next_index = idx + 1
        self._one[0] = m.value
        n = _advance(self._ring, self._cursor, self._one, self._scratch,
                     self._basis_t, self._centroid, self._weights, self._out)
        if n == 0:
            return None
        d = float(self._out[0])
        return ScoreEvent(self.sensor_id, idx, d, d > self.threshold)

    def run(self, values) -> np.ndarray:
        """Push a block of values; return the departures produced (possibly fewer than pushed)."""
        values = np.ascontiguousarray(values, dtype=np.float64)
        out = np.empty(len(values))
        n = _advance(self._ring, self._cursor, values, self._scratch,
                     self._basis_t, self._centroid, self._weights, out)
        if self._next_index is None:
            self._next_index = 0
        self._next_index += len(values)
        return out[:n]


def departures(model: SubspaceModel, boundary: Boundary, values) -> np.ndarray:
    """Departure score for every full window of ``values`` (index L-1 onward)."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) < model.lag:
        raise DataError(f"series of length {len(values)} is shorter than lag {model.lag}")
    return DetectorState(model, boundary).run(values)


def score_series(state: DetectorState, values, start_index: int = 0) -> list:
    """Score a whole series with a fresh copy of ``state``; equivalent to pushing each value."""
    d = departures(state.model, state.boundary, values)
    first = start_index + state.model.lag - 1
    thr = state.threshold
    sid = state.sensor_id
    return [ScoreEvent(sid, first + i, float(x), bool(x > thr)) for i, x in enumerate(d)]


def aggregate(streams) -> list:
    """Merge per-sensor event streams into plant alarms (any sensor alarming)."""
    if isinstance(streams, dict):
        streams = list(streams.values())
    streams = [list(s) for s in streams]
    if not streams:
        return []
    n = len(streams[0])
    for s in streams:
        if len(s) != n:
            raise DataError(f"event streams have different lengths ({len(s)} vs {n})")
    alarms = []
    for i in range(n):
        idx = streams[0][i].timestamp_index
        hit = []
        for s in streams:
            ev = s[i]
            if ev.timestamp_index != idx:
                raise DataError(f"event streams are misaligned at position {i}")
            if ev.alarmed:
                hit.append(ev.sensor_id)
        if hit:
            alarms.append(PlantAlarm(idx, tuple(sorted(hit))))
    return alarms


EVENT_HEADER = ["sensor_id", "timestamp_index", "departure", "alarmed"]


def write_events_csv(events: Iterable[ScoreEvent], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_HEADER)
        for ev in events:
            writer.writerow(ev.to_csv_row())


def write_events_jsonl(events: Iterable[ScoreEvent], path) -> None:
    with Path(path).open("w") as fh:
        for ev in events:
            fh.write(ev.to_json() + "\n")


def read_events_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EVENT_HEADER:
            raise DataError(f"{path}: unexpected event header {header}")
        return [ScoreEvent(r[0], int(r[1]), float(r[2]), r[3] == "1") for r in reader if r]


def write_plant_alarms_csv(alarms: Iterable[PlantAlarm], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp_index", "alarming_sensors"])
        for a in alarms:
            writer.writerow([a.timestamp_index, ";".join(a.alarming_sensors)])


def read_plant_alarms_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        return [PlantAlarm(int(r[0]), tuple(r[1].split(";"))) for r in reader if r]
