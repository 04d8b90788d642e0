"""Command-line entry point: ``sentinel {train,score,eval,synth}``.

Runs are driven by a flat ``key = value`` config file (``#`` starts a comment).
Recognised keys, with defaults:

    dataset           path to a dataset CSV, or ``synth`` for the scenario suite
    timestamp_column  timestamp column name (default: first column)
    attack_column     0/1 attack flag column (default: ATT_FLAG)
    sensors           comma-separated subset of sensor columns (default: all)
    lag               L, window length (500)
    signal_dim        R, signal subspace dimension (3)
    train_len         N, samples used to learn the subspace (2400)
    validation_len    extra attack-free samples for the boundary (1600)
    epsilon           ellipsoid threshold slack, threshold = 1 + epsilon (0.1)
    boundary          sphere | ellipsoid | both (both)
    samples_per_hour  converts delays to hours (100)
    emit              all | test: score every sample or only [N', end) (all)
    format            csv | jsonl event files (csv)
    out               output directory (out)
    seed              RNG seed for ``synth`` (0)
    workers           concurrent per-sensor jobs (1); SENTINEL_WORKERS overrides

Outputs under ``out``:

    resolved.cfg                 the fully resolved config of the last run
    model/manifest.json          bundle manifest (sensor list, parameters)
    model/<sensor>.json          subspace basis, spectrum and fitted boundaries
    events/<kind>/<sensor>.csv   sensor_id,timestamp_index,departure,alarmed
    events/<kind>/<sensor>.jsonl same fields, one JSON object per line
    events/<kind>/plant_alarms.csv  timestamp_index,alarming_sensors (';'-joined)
    report/<kind>.{txt,json,csv} per-attack table and aggregate metrics
    report/comparison.{txt,csv}  sphere vs ellipsoid, when boundary = both
    synth/<scenario>.csv         one file per synthetic scenario

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from sentinel import detector as det
from sentinel.boundary import boundary_from_dict, fit_boundaries
from sentinel.errors import ConfigError, DataError, SentinelError
from sentinel.evalharness import compare, evaluate
from sentinel.ingest import CsvSchema, Dataset, SplitSpec, load_csv, split, write_csv
from sentinel.ssa import SubspaceModel, fit_subspace
from sentinel.synthgen import scenario_suite

BUNDLE_FORMAT = "sentinel.bundle/1"
KINDS = ("sphere", "ellipsoid")


@dataclass
class RunConfig:
    dataset: str = "synth"
    timestamp_column: str = ""
    attack_column: str = "ATT_FLAG"
    sensors: str = ""
    lag: int = 500
    signal_dim: int = 3
    train_len: int = 2400
    validation_len: int = 1600
    epsilon: float = 0.1
    boundary: str = "both"
    samples_per_hour: float = 100.0
    emit: str = "all"
    format: str = "csv"
    out: str = "out"
    seed: int = 0
    workers: int = 1

    def validate(self) -> None:
        problems = []
        if self.boundary not in ("sphere", "ellipsoid", "both"):
            problems.append(f"boundary must be sphere, ellipsoid or both (got {self.boundary!r})")
        if self.emit not in ("all", "test"):
            problems.append(f"emit must be all or test (got {self.emit!r})")
        if self.format not in ("csv", "jsonl"):
            problems.append(f"format must be csv or jsonl (got {self.format!r})")
        if self.train_len <= 0:
            problems.append(f"train_len must be positive (got {self.train_len})")
        elif not (1 < self.lag and 2 * self.lag < self.train_len):
            problems.append(f"lag must satisfy 1 < lag < train_len/2 (lag={self.lag}, train_len={self.train_len})")
        if not 1 <= self.signal_dim <= max(self.lag, 1):
            problems.append(f"signal_dim must satisfy 1 <= signal_dim <= lag (got {self.signal_dim})")
        if self.validation_len < 0:
            problems.append(f"validation_len must be non-negative (got {self.validation_len})")
        if not self.epsilon >= 0:
            problems.append(f"epsilon must be non-negative (got {self.epsilon})")
        if not self.samples_per_hour > 0:
            problems.append(f"samples_per_hour must be positive (got {self.samples_per_hour})")
        if self.workers < 1:
            problems.append(f"workers must be at least 1 (got {self.workers})")
        if self.seed < 0:
            problems.append(f"seed must be non-negative (got {self.seed})")
        if problems:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))

    @property
    def kinds(self) -> tuple:
        return KINDS if self.boundary == "both" else (self.boundary,)

    @property
    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.train_len, self.validation_len)

    @property
    def sensor_list(self) -> list:
        return [s.strip() for s in self.sensors.split(",") if s.strip()]

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))


def parse_config_text(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    cfg = base or RunConfig()
    types = {f.name: f.type for f in fields(RunConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _coerce(key, value, types[key], lineno))
    return cfg


def _coerce(key, value, typ, lineno=None):
    where = f"config line {lineno}: " if lineno else ""
    try:
        if typ in ("int", int):
            return int(value)
        if typ in ("float", float):
            return float(value)
    except ValueError:
        raise ConfigError(f"{where}{key} expects a number, got {value!r}") from None
    return value


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.sensors is not None:
        cfg.sensors = args.sensors
    if args.boundary is not None:
        cfg.boundary = args.boundary
    if args.out is not None:
        cfg.out = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    env = os.environ.get("SENTINEL_WORKERS")
    if env:
        cfg.workers = _coerce("SENTINEL_WORKERS", env, int)
    cfg.validate()
    return cfg


def load_dataset(cfg: RunConfig, path: Optional[str] = None) -> Dataset:
    source = path or cfg.dataset
    if source == "synth":
        ds = scenario_suite(cfg.seed)
    else:
        schema = CsvSchema(timestamp_column=cfg.timestamp_column or None, attack_column=cfg.attack_column or None)
        ds = load_csv(source, schema)
    if cfg.sensor_list:
        ds = ds.subset(cfg.sensor_list)
    return ds


def _safe_name(sensor_id: str) -> str:
    if not sensor_id or "/" in sensor_id or "\\" in sensor_id or sensor_id in (".", ".."):
        raise DataError(f"sensor id {sensor_id!r} cannot be used as a file name")
    return sensor_id


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _map(cfg: RunConfig, fn, items):
    if cfg.workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, items))


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved.cfg").write_text(cfg.to_text())
    return out


def train_sensor(series, cfg: RunConfig) -> dict:
    train, _, _ = split(series, cfg.split_spec, cfg.lag)
    model = fit_subspace(train, cfg.lag, cfg.signal_dim)
    fit_values = series.values[: cfg.split_spec.fit_len]
    sphere, ellipsoid, solution = fit_boundaries(model, fit_values, cfg.train_len, cfg.epsilon)
    boundaries = {"sphere": sphere, "ellipsoid": ellipsoid}
    return {
        "format": BUNDLE_FORMAT,
        "sensor_id": series.sensor_id,
        "subspace": model.to_dict(),
        "boundaries": {k: boundaries[k].to_dict() for k in cfg.kinds},
        "fit": {
            "train_len": cfg.train_len,
            "validation_len": cfg.validation_len,
            "capture_ratio": model.capture_ratio,
            "active_constraints": solution.n_active,
            "kkt_residual": solution.kkt_residual,
            "solver_iterations": solution.iterations,
        },
    }


def cmd_train(cfg: RunConfig, out_stream=sys.stdout) -> Path:
    ds = load_dataset(cfg)
    out = _prepare_out(cfg)
    model_dir = out / "model"
    model_dir.mkdir(exist_ok=True)
    records = _map(cfg, lambda s: train_sensor(s, cfg), ds.series)
    for rec in records:
        _write_json(model_dir / f"{_safe_name(rec['sensor_id'])}.json", rec)
    _write_json(model_dir / "manifest.json", {
        "format": BUNDLE_FORMAT,
        "dataset": ds.name,
        "sensors": [r["sensor_id"] for r in records],
        "boundaries": list(cfg.kinds),
        "lag": cfg.lag,
        "signal_dim": cfg.signal_dim,
        "train_len": cfg.train_len,
        "validation_len": cfg.validation_len,
        "epsilon": cfg.epsilon,
    })
    print(f"trained {len(records)} sensors from {ds.name} (L={cfg.lag}, R={cfg.signal_dim}, "
          f"N={cfg.train_len}, N'={cfg.split_spec.fit_len})", file=out_stream)
    print(f"{'sensor':<16}{'capture':>10}{'active':>8}{'kkt':>11}", file=out_stream)
    for r in records:
        f = r["fit"]
        print(f"{r['sensor_id']:<16}{f['capture_ratio']:>10.5f}{f['active_constraints']:>8}"
              f"{f['kkt_residual']:>11.2e}", file=out_stream)
    return model_dir


def load_bundle(model_dir) -> dict:
    """sensor_id -> (SubspaceModel, {kind: boundary})"""
    model_dir = Path(model_dir)
    manifest_path = model_dir / "manifest.json"
    if not manifest_path.is_file():
        raise DataError(f"model bundle manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != BUNDLE_FORMAT:
        raise DataError(f"unsupported bundle format {manifest.get('format')!r}")
    bundle = {}
    for sid in manifest["sensors"]:
        rec = json.loads((model_dir / f"{_safe_name(sid)}.json").read_text())
        model = SubspaceModel.from_dict(rec["subspace"])
        bundle[sid] = (model, {k: boundary_from_dict(v) for k, v in rec["boundaries"].items()})
    return bundle


def cmd_score(cfg: RunConfig, model_dir=None, input_path=None, out_stream=sys.stdout) -> Path:
    out = _prepare_out(cfg)
    bundle = load_bundle(model_dir or out / "model")
    ds = load_dataset(cfg, input_path)
    missing = sorted(set(bundle) - set(ds.sensor_ids))
    extra = sorted(set(ds.sensor_ids) - set(bundle))
    if missing or extra:
        raise DataError(f"sensor mismatch between bundle and data: missing {missing or 'none'}, extra {extra or 'none'}")
    emit_from = cfg.split_spec.fit_len if cfg.emit == "test" else 0
    kinds = [k for k in cfg.kinds if all(k in b for _, b in bundle.values())]
    if not kinds:
        raise ConfigError(f"bundle holds no boundary of kind {cfg.boundary!r}")
    for kind in kinds:
        kind_dir = out / "events" / kind
        kind_dir.mkdir(parents=True, exist_ok=True)

        def run(sid):
            model, bounds = bundle[sid]
            state = det.DetectorState(model, bounds[kind], sid)
            values = ds[sid].values
            events = det.score_series(state, values) if len(values) >= model.lag else []
            return [e for e in events if e.timestamp_index >= emit_from]

        streams = dict(zip(ds.sensor_ids, _map(cfg, run, ds.sensor_ids)))
        for sid, events in streams.items():
            if cfg.format == "csv":
                det.write_events_csv(events, kind_dir / f"{_safe_name(sid)}.csv")
            else:
                det.write_events_jsonl(events, kind_dir / f"{_safe_name(sid)}.jsonl")
        alarms = det.aggregate(streams) if all(len(s) == len(next(iter(streams.values()))) for s in streams.values()) else []
        det.write_plant_alarms_csv(alarms, kind_dir / "plant_alarms.csv")
        n_events = sum(len(s) for s in streams.values())
        print(f"{kind}: {n_events} events, {len(alarms)} plant alarms -> {kind_dir}", file=out_stream)
    return out / "events"


def read_events(path: Path) -> list:
    if path.suffix == ".jsonl":
        with path.open() as fh:
            return [det.ScoreEvent(**json.loads(line)) for line in fh if line.strip()]
    return det.read_events_csv(path)


def cmd_eval(cfg: RunConfig, events_dir=None, out_stream=sys.stdout) -> dict:
    out = _prepare_out(cfg)
    events_dir = Path(events_dir or out / "events")
    ds = load_dataset(cfg)
    report_dir = out / "report"
    report_dir.mkdir(exist_ok=True)
    ext = ".csv" if cfg.format == "csv" else ".jsonl"
    eval_start = min(cfg.split_spec.fit_len, len(ds))
    reports = {}
    for kind in cfg.kinds:
        kind_dir = events_dir / kind
        if not kind_dir.is_dir():
            raise DataError(f"no events for boundary {kind!r} in {events_dir}")
        streams = {}
        for sid in ds.sensor_ids:
            path = kind_dir / f"{_safe_name(sid)}{ext}"
            if not path.is_file():
                raise DataError(f"missing event file {path}")
            streams[sid] = read_events(path)
        report = evaluate(kind, ds.name, streams, ds.attack_intervals, len(ds), eval_start, cfg.samples_per_hour)
        (report_dir / f"{kind}.txt").write_text(report.render_text())
        (report_dir / f"{kind}.json").write_text(report.to_json() + "\n")
        (report_dir / f"{kind}.csv").write_text(report.attacks_csv())
        print(report.render_text(), file=out_stream)
        reports[kind] = report
    if len(reports) == 2:
        comparison = compare(reports["sphere"], reports["ellipsoid"])
        (report_dir / "comparison.txt").write_text(comparison.render_text())
        (report_dir / "comparison.csv").write_text(comparison.to_csv())
        print(comparison.render_text(), file=out_stream)
    return reports


def cmd_synth(cfg: RunConfig, out_stream=sys.stdout) -> list:
    out = _prepare_out(cfg)
    suite = scenario_suite(cfg.seed)
    synth_dir = out / "synth"
    synth_dir.mkdir(exist_ok=True)
    paths = []
    for series in suite.series:
        path = synth_dir / f"{series.sensor_id}.csv"
        write_csv(Dataset(series.sensor_id, [series]), path)
        paths.append(path)
    print(f"wrote {len(paths)} scenario files to {synth_dir}", file=out_stream)
    return paths


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentinel", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--sensors", help="comma-separated sensor subset")
    common.add_argument("--boundary", choices=("sphere", "ellipsoid", "both"))
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="fit subspace models and boundaries per sensor")
    p = sub.add_parser("score", parents=[common], help="score a dataset with a trained bundle")
    p.add_argument("--model", help="model bundle directory (default: OUT/model)")
    p.add_argument("--input", help="dataset CSV to score (default: config dataset)")
    p = sub.add_parser("eval", parents=[common], help="compute detection reports from event files")
    p.add_argument("--events", help="events directory (default: OUT/events)")
    sub.add_parser("synth", parents=[common], help="write the synthetic scenario suite")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "train":
            cmd_train(cfg)
        elif args.command == "score":
            cmd_score(cfg, args.model, args.input)
        elif args.command == "eval":
            cmd_eval(cfg, args.events)
        else:
            cmd_synth(cfg)
    except SentinelError as exc:
        print(f"sentinel: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
