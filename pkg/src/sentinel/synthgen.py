"""Synthetic plant signals with injected attacks.

Signals are an operating level plus sinusoids, an optional linear trend and
Gaussian noise. Attacks follow a three-class taxonomy by intensity, measured
in units of the noise sigma:

* MSA (micro-stealthy): below one sigma,
* SA (stealthy): one to three sigma,
* DDA (direct damage): above three sigma.

The bands are conventions for desk-scale experiments only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from sentinel.errors import ConfigError, DataError
from sentinel.ingest import Dataset, SensorSeries

KINDS = ("MSA", "SA", "DDA")
SHAPES = ("step_bias", "ramp", "freeze_to_value", "oscillation_damp")

SUITE_LENGTH = 4800
SUITE_ATTACK_START = 4000


@dataclass(frozen=True)
class Sinusoid:
    amplitude: float
    period: float
    phase: float = 0.0


@dataclass(frozen=True)
class SignalSpec:
    length: int
    components: tuple
    level: float = 0.0
    slope: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0
    sensor_id: str = "sensor"

    def __post_init__(self):
        if self.length <= 0:
            raise ConfigError(f"signal length must be positive, got {self.length}")
        if not self.components:
            raise ConfigError("signal needs at least one sinusoidal component")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        for c in self.components:
            if c.period <= 0:
                raise ConfigError(f"sinusoid period must be positive, got {c.period}")


def _band_ok(kind: str, magnitude: float) -> bool:
    m = abs(magnitude)
    if kind == "MSA":
        return m < 1.0
    if kind == "SA":
        return 1.0 <= m <= 3.0
    return m > 3.0


@dataclass(frozen=True)
class AttackSpec:
    """One attack window ``[start, end)``.

    ``magnitude`` is in noise-sigma units. For ``step_bias`` and ``ramp`` it is
    the (final) additive bias; for ``freeze_to_value`` and ``oscillation_damp``
    it is the nominal intensity used for classification, while the actual
    transform is set by ``value`` (frozen constant) or ``damping``.
    """

    kind: str
    start: int
    end: int
    magnitude: float
    shape: str
    noise_sigma: float
    value: float = 0.0
    damping: float = 0.5
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"attack kind must be one of {KINDS}, got {self.kind!r}")
        if self.shape not in SHAPES:
            raise ConfigError(f"attack shape must be one of {SHAPES}, got {self.shape!r}")
        if not 0 <= self.start < self.end:
            raise ConfigError(f"invalid attack window [{self.start}, {self.end})")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if not 0.0 <= self.damping <= 1.0:
            raise ConfigError(f"damping must lie in [0, 1], got {self.damping}")
        if not _band_ok(self.kind, self.magnitude):
            raise ConfigError(f"magnitude {self.magnitude} sigma is outside the {self.kind} band")


def generate(spec: SignalSpec) -> SensorSeries:
    """Deterministic (given ``spec.seed``) attack-free series."""
    t = np.arange(spec.length, dtype=np.float64)
    values = np.full(spec.length, float(spec.level)) + spec.slope * t
    for c in spec.components:
        values += c.amplitude * np.sin(2.0 * np.pi * t / c.period + c.phase)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        values += spec.noise_sigma * rng.standard_normal(spec.length)
    return SensorSeries(spec.sensor_id, values, [])


def inject(series: SensorSeries, attack: AttackSpec) -> SensorSeries:
    """Return a copy of ``series`` with ``attack`` applied and labelled."""
    if attack.end > len(series):
        raise DataError(f"attack window [{attack.start}, {attack.end}) exceeds series length {len(series)}")
    for start, end, _ in series.attack_intervals:
        if start < attack.end and attack.start < end:
            raise DataError(f"attack window [{attack.start}, {attack.end}) overlaps [{start}, {end})")
    values = series.values.copy()
    seg = slice(attack.start, attack.end)
    n = attack.end - attack.start
    bias = attack.magnitude * attack.noise_sigma
    if attack.shape == "step_bias":
        values[seg] += bias
    elif attack.shape == "ramp":
        values[seg] += bias * np.arange(1, n + 1) / n
    elif attack.shape == "freeze_to_value":
        values[seg] = attack.value
    else:
        local = values[seg].mean()
        values[seg] = local + (1.0 - attack.damping) * (values[seg] - local)
    label = attack.label or f"{attack.kind}_{len(series.attack_intervals) + 1}"
    intervals = [*series.attack_intervals, (attack.start, attack.end, label)]
    return SensorSeries(series.sensor_id, values, intervals)


# Signal-level emulations of the seven process-simulator scenarios. Each tuple:
# (name, level, [(amplitude, period, phase)], noise sigma, attack kind, shape, magnitude, extra)
_CATALOGUE = (
    ("MSA1", 50.0, [(2.0, 250.0, 0.0)], 0.2, "MSA", "step_bias", 0.8, {}),
    ("MSA2", 120.0, [(1.0, 500.0, 0.7)], 0.1, "MSA", "ramp", 0.9, {}),
    ("SA1", 65.0, [(1.5, 250.0, 0.3), (0.5, 125.0, 1.1)], 0.2, "SA", "step_bias", 2.0, {}),
    ("SA2", 50.0, [(2.0, 250.0, 0.0)], 0.2, "SA", "step_bias", 1.5, {}),
    ("SA3", 0.5, [(0.3, 250.0, 0.4)], 0.2, "SA", "freeze_to_value", 2.5, {"value": 0.0}),
    ("DDA1", 95.0, [(1.2, 500.0, 2.0)], 0.15, "DDA", "ramp", 8.0, {}),
    ("DDA2", 2700.0, [(5.0, 250.0, 0.9)], 1.0, "DDA", "freeze_to_value", 2700.0, {"value": 0.0}),
)

SCENARIO_NAMES = tuple(row[0] for row in _CATALOGUE)


def scenario_specs(seed: int = 0):
    """``(SignalSpec, AttackSpec)`` for each of the seven suite scenarios."""
    seeds = np.random.SeedSequence(seed).generate_state(len(_CATALOGUE))
    out = []
    for (name, level, comps, sigma, kind, shape, mag, extra), s in zip(_CATALOGUE, seeds):
        sig = SignalSpec(
            length=SUITE_LENGTH,
            components=tuple(Sinusoid(*c) for c in comps),
            level=level,
            noise_sigma=sigma,
            seed=int(s),
            sensor_id=name,
        )
        att = AttackSpec(kind, SUITE_ATTACK_START, SUITE_LENGTH, mag, shape, sigma, label=name, **extra)
        out.append((sig, att))
    return out


def scenario_suite(seed: int = 0) -> Dataset:
    """Seven labelled scenarios (two MSA, three SA, two DDA) on one 4800-sample timeline.

    Each scenario is one series named after it. Samples ``[0, 4000)`` are clean
    and the attack covers ``[4000, 4800)``.
    """
    series = []
    for sig, att in scenario_specs(seed):
        series.append(inject(generate(sig), replace(att, label="attack_1")))
    return Dataset(f"scenario_suite_seed{seed}", series)


def loose_axis_scenario(seed: int = 0, lag: int = 50) -> SensorSeries:
    """A flat-disc normal cloud with a level shift along its thin axis.

    The signal is a constant level plus a period-25 oscillation whose amplitude
    drifts slowly between 0.5 and 3, so at ``lag`` a multiple of 25 the
    projected cloud is a wide disc in the oscillation plane and thin along the
    level direction. The attack in ``[3000, 3500)`` adds a level bias of
    ``15 / sqrt(lag)`` sigma while the oscillation is small, so attacked points
    stay deep inside the sphere but leave the ellipsoid through its thin side.
    """
    if lag % 25:
        raise ConfigError(f"lag must be a multiple of 25 for this scenario, got {lag}")
    sigma = 0.1
    n = 3500
    t = np.arange(n, dtype=np.float64)
    amp = 1.75 - 1.25 * np.cos(2.0 * np.pi * t / 1500.0)
    rng = np.random.default_rng(seed)
    values = 10.0 + amp * np.sin(2.0 * np.pi * t / 25.0) + sigma * rng.standard_normal(n)
    clean = SensorSeries("loose_axis", values, [])
    magnitude = 15.0 / np.sqrt(lag)
    kind = "MSA" if magnitude < 1 else ("SA" if magnitude <= 3 else "DDA")
    return inject(clean, AttackSpec(kind, 3000, n, magnitude, "step_bias", sigma, label="attack_1"))
