"""Detection metrics and reports.

Per-attack outcomes give the detection delay and the number of sensors that
alarmed inside each attack window. Aggregate metrics classify every sample
after ``eval_start`` as alarmed/not and attack/normal.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from sentinel.detector import PlantAlarm
from sentinel.errors import DataError


@dataclass(frozen=True)
class AttackOutcome:
    attack_id: str
    start: int
    end: int
    detected: bool
    delay_samples: Optional[int]
    delay_hours: Optional[float]
    sensor_count: int


@dataclass(frozen=True)
class AggregateMetrics:
    precision: float
    recall: float
    f1: float
    false_alarm_rate: float
    tp: int
    fp: int
    tn: int
    fn: int
    undefined: tuple = ()  # metrics whose denominator was zero (reported as 0)


def per_attack(alarms, truth, samples_per_hour: float = 1.0) -> list:
    """Detection delay and alarming-sensor count for every attack interval."""
    if not truth:
        raise DataError("no attacks to evaluate")
    if samples_per_hour <= 0:
        raise DataError("samples_per_hour must be positive")
    alarms = sorted(alarms, key=lambda a: a.timestamp_index)
    stamps = np.array([a.timestamp_index for a in alarms], dtype=np.int64)
    outcomes = []
    for start, end, label in truth:
        lo, hi = np.searchsorted(stamps, [start, end])
        inside = alarms[lo:hi]
        sensors = set()
        for a in inside:
            sensors.update(a.alarming_sensors)
        if inside:
            delay = inside[0].timestamp_index - start
            outcomes.append(AttackOutcome(label, start, end, True, delay, delay / samples_per_hour, len(sensors)))
        else:
            outcomes.append(AttackOutcome(label, start, end, False, None, None, 0))
    return outcomes


def _ratio(num: int, den: int, name: str, undefined: list) -> float:
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def aggregate_metrics(alarmed, truth, eval_start: int = 0, mode: str = "plant") -> AggregateMetrics:
    """Per-sample precision, recall, F1 and false-alarm rate over ``[eval_start, len)``.

    ``alarmed`` is either a length-n boolean vector or an (sensors x n) matrix.
    With a matrix, ``mode="plant"`` marks a sample alarmed if any sensor alarms;
    ``mode="micro"`` counts every (sensor, sample) pair separately.
    """
    alarmed = np.asarray(alarmed, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if alarmed.ndim == 1:
        alarmed = alarmed[None, :]
    if alarmed.shape[1] != truth.shape[0]:
        raise DataError(f"alarm length {alarmed.shape[1]} does not match truth length {truth.shape[0]}")
    if not 0 <= eval_start <= truth.shape[0]:
        raise DataError(f"eval_start {eval_start} outside [0, {truth.shape[0]}]")
    alarmed = alarmed[:, eval_start:]
    truth = truth[eval_start:]
    if mode == "plant":
        pred = alarmed.any(axis=0)[None, :]
    elif mode == "micro":
        pred = alarmed
    else:
        raise DataError(f"unknown averaging mode {mode!r}")
    t = np.broadcast_to(truth, pred.shape)
    tp = int(np.sum(pred & t))
    fp = int(np.sum(pred & ~t))
    fn = int(np.sum(~pred & t))
    tn = int(np.sum(~pred & ~t))
    undefined = []
    precision = _ratio(tp, tp + fp, "precision", undefined)
    recall = _ratio(tp, tp + fn, "recall", undefined)
    far = _ratio(fp, fp + tn, "false_alarm_rate", undefined)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return AggregateMetrics(precision, recall, f1, far, tp, fp, tn, fn, tuple(undefined))


def alarm_matrix(streams, length: int, sensor_ids=None) -> np.ndarray:
    """Boolean (sensors x length) alarm flags from per-sensor ScoreEvent streams."""
    if sensor_ids is None:
        sensor_ids = sorted(streams)
    out = np.zeros((len(sensor_ids), length), dtype=bool)
    for k, sid in enumerate(sensor_ids):
        for ev in streams[sid]:
            if not 0 <= ev.timestamp_index < length:
                raise DataError(f"event index {ev.timestamp_index} outside timeline of length {length}")
            out[k, ev.timestamp_index] = ev.alarmed
    return out


def plant_alarms_from_matrix(matrix, sensor_ids) -> list:
    hits = np.flatnonzero(matrix.any(axis=0))
    return [PlantAlarm(int(i), tuple(sorted(sensor_ids[k] for k in np.flatnonzero(matrix[:, i])))) for i in hits]


@dataclass
class EvalReport:
    detector: str
    dataset: str
    length: int
    eval_start: int
    samples_per_hour: float
    outcomes: list
    metrics: AggregateMetrics
    sensor_metrics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "detector": self.detector,
            "dataset": self.dataset,
            "length": self.length,
            "eval_start": self.eval_start,
            "samples_per_hour": self.samples_per_hour,
            "metrics": asdict(self.metrics),
            "attacks": [asdict(o) for o in self.outcomes],
            "sensors": {k: asdict(v) for k, v in sorted(self.sensor_metrics.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def attacks_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["attack_id", "start", "end", "detected", "delay_samples", "delay_hours", "sensor_count"])
        for o in self.outcomes:
            writer.writerow([o.attack_id, o.start, o.end, int(o.detected),
                             "" if o.delay_samples is None else o.delay_samples,
                             "" if o.delay_hours is None else f"{o.delay_hours:g}", o.sensor_count])
        return buf.getvalue()

    def render_text(self) -> str:
        m = self.metrics
        lines = [
            f"detector: {self.detector}   dataset: {self.dataset}   evaluated samples: [{self.eval_start}, {self.length})",
            "",
            f"{'attack':<14}{'detected':>9}{'delay[h]':>10}{'sensors':>9}",
        ]
        for o in self.outcomes:
            delay = "x" if not o.detected else f"{o.delay_hours:g}"
            lines.append(f"{o.attack_id:<14}{'yes' if o.detected else 'no':>9}{delay:>10}{o.sensor_count:>9}")
        lines += [
            "",
            f"precision {100 * m.precision:6.2f}   recall {100 * m.recall:6.2f}   "
            f"F1 {100 * m.f1:6.2f}   false alarm {100 * m.false_alarm_rate:6.2f}",
        ]
        if m.undefined:
            lines.append(f"zero denominator (reported as 0): {', '.join(m.undefined)}")
        return "\n".join(lines) + "\n"


def evaluate(detector: str, dataset_name: str, streams, truth, length: int, eval_start: int,
             samples_per_hour: float = 1.0, mode: str = "plant") -> EvalReport:
    """Build a full report from per-sensor ScoreEvent streams.

    Alarms before ``eval_start`` (training and validation window) are ignored.
    """
    sensor_ids = sorted(streams)
    matrix = alarm_matrix(streams, length, sensor_ids)
    matrix[:, :eval_start] = False
    flags = np.zeros(length, dtype=bool)
    for start, end, _ in truth:
        flags[start:end] = True
    outcomes = per_attack(plant_alarms_from_matrix(matrix, sensor_ids), truth, samples_per_hour) if truth else []
    metrics = aggregate_metrics(matrix, flags, eval_start, mode)
    per_sensor = {sid: aggregate_metrics(matrix[k], flags, eval_start) for k, sid in enumerate(sensor_ids)}
    return EvalReport(detector, dataset_name, length, eval_start, samples_per_hour, outcomes, metrics, per_sensor)


METRIC_NAMES = ("precision", "recall", "f1", "false_alarm_rate")


@dataclass
class Comparison:
    name_a: str
    name_b: str
    attack_rows: list  # (attack_id, delay_a, delay_b, count_a, count_b)
    metric_rows: list  # (metric, a, b, b - a)

    def render_text(self) -> str:
        a, b = self.name_a, self.name_b
        lines = [f"{'attack':<14}{'delay ' + a:>18}{'delay ' + b:>18}{'count ' + a:>18}{'count ' + b:>18}"]
        for attack_id, da, db, ca, cb in self.attack_rows:
            lines.append(f"{attack_id:<14}{_fmt_delay(da):>18}{_fmt_delay(db):>18}{ca:>18}{cb:>18}")
        lines.append("")
        lines.append(f"{'metric':<18}{a:>12}{b:>12}{'delta':>12}")
        for metric, va, vb, d in self.metric_rows:
            lines.append(f"{metric:<18}{100 * va:>12.2f}{100 * vb:>12.2f}{100 * d:>+12.2f}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["row", "name", self.name_a, self.name_b, "delta"])
        for attack_id, da, db, ca, cb in self.attack_rows:
            delta = "" if da is None or db is None else db - da
            writer.writerow(["delay_hours", attack_id, _fmt_delay(da), _fmt_delay(db), delta])
            writer.writerow(["sensor_count", attack_id, ca, cb, cb - ca])
        for metric, va, vb, d in self.metric_rows:
            writer.writerow(["metric", metric, repr(va), repr(vb), repr(d)])
        return buf.getvalue()


def _fmt_delay(d) -> str:
    return "x" if d is None else f"{d:g}"


def compare(report_a: EvalReport, report_b: EvalReport) -> Comparison:
    """Side-by-side attack and aggregate rows; deltas are ``b - a``."""
    for r in (report_a, report_b):
        if r.length <= r.eval_start:
            raise DataError(f"report {r.detector!r} is empty (no evaluated samples)")
    if (report_a.dataset, report_a.length, report_a.eval_start) != (report_b.dataset, report_b.length, report_b.eval_start):
        raise DataError("reports cover different datasets or evaluation windows")
    ids_a = [(o.attack_id, o.start, o.end) for o in report_a.outcomes]
    if ids_a != [(o.attack_id, o.start, o.end) for o in report_b.outcomes]:
        raise DataError("reports have different attack truth")
    rows = [
        (oa.attack_id, oa.delay_hours, ob.delay_hours, oa.sensor_count, ob.sensor_count)
        for oa, ob in zip(report_a.outcomes, report_b.outcomes)
    ]
    metrics = []
    for name in METRIC_NAMES:
        va, vb = getattr(report_a.metrics, name), getattr(report_b.metrics, name)
        metrics.append((name, va, vb, vb - va))
    return Comparison(report_a.detector, report_b.detector, rows, metrics)
