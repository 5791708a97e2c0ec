"""Synthetic triaxial accelerometer traces with ground-truth activity labels.

A trace is an ordered stream of timestamped acceleration samples, each
labelled REST, WALK or FALL.  The generator places activity by label first
and then draws, per sample, a squared magnitude uniformly from the band of
that label and a uniformly random direction on the unit sphere.  Squared
magnitude is the only quantity the downstream detectors use, so the bands
fully determine detector behaviour while all three axes stay exercised.

File format: CSV with header ``t_ms,ax_g,ay_g,az_g,label``, one sample per
line, axis values printed with 6 decimal digits, labels REST|WALK|FALL,
UTF-8, LF line endings.  Axis values are quantised to that precision at
generation time, so write/load round-trips are lossless.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError, ParseError, SpecError

TRACE_HEADER = "t_ms,ax_g,ay_g,az_g,label"
DEFAULT_SAMPLE_INTERVAL_MS = 80.59

# Keeps a magnitude draw strictly inside its band after the axis values are
# quantised to the 6-decimal file precision (worst-case shift ~1e-5 g^2).
_BAND_MARGIN = 1e-4

# Falls must stay separated by more than this so a tier-3 refractory window
# can never merge two of them.
_MIN_FALL_SEPARATION_MS = 10_000


class Label(Enum):
    REST = "REST"
    WALK = "WALK"
    FALL = "FALL"


@dataclass(frozen=True, slots=True)
class AccelSample:
    t_ms: int
    ax: float
    ay: float
    az: float
    label: Label


def magnitude_sq(sample: AccelSample) -> float:
    """Squared acceleration magnitude ax^2 + ay^2 + az^2 in g^2."""
    return sample.ax * sample.ax + sample.ay * sample.ay + sample.az * sample.az


@dataclass(frozen=True)
class Trace:
    """An immutable, non-empty sample stream plus its nominal sampling period.

    ``seed`` is the generation seed; ``None`` for traces read from a file.
    Generated traces have uniform timestamp steps of ``round(sample_interval_ms)``;
    imported traces may not (see :meth:`has_uniform_step`).
    """

    sample_interval_ms: float
    samples: tuple
    seed: int | None = None

    def __post_init__(self):
        if not self.samples:
            raise FormatError("empty trace")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def step_ms(self) -> int:
        return round(self.sample_interval_ms)

    @property
    def duration_ms(self) -> int:
        return self.samples[-1].t_ms - self.samples[0].t_ms + self.step_ms

    def has_uniform_step(self) -> bool:
        step = self.step_ms
        s = self.samples
        return all(s[i + 1].t_ms - s[i].t_ms == step for i in range(len(s) - 1))

    def label_counts(self) -> dict:
        counts = {label: 0 for label in Label}
        for sample in self.samples:
            counts[sample.label] += 1
        return counts


@dataclass(frozen=True)
class TraceSpec:
    """Generation parameters for a synthetic trace.

    ``activity_fraction`` is the fraction of samples labelled WALK.  Falls are
    ``fall_count`` events of ``fall_duration_samples`` consecutive samples,
    evenly spaced over the trace.  Magnitude bands are half-open intervals in
    g^2; the FALL band spans ``[fall_floor, 2 * fall_floor)``.
    """

    duration_min: float
    sample_interval_ms: float = DEFAULT_SAMPLE_INTERVAL_MS
    activity_fraction: float = 0.0
    fall_count: int = 0
    fall_duration_samples: int = 3
    rest_band: tuple = (0.8, 1.2)
    walk_band: tuple = (2.0, 6.0)
    fall_floor: float = 6.0

    def n_samples(self) -> int:
        return round(self.duration_min * 60_000.0 / self.sample_interval_ms)

    def validate(self) -> None:
        if not self.duration_min > 0:
            raise SpecError("duration_min must be > 0")
        if not self.sample_interval_ms > 0:
            raise SpecError("sample_interval_ms must be > 0")
        if not 0.0 <= self.activity_fraction <= 1.0:
            raise SpecError("activity_fraction must lie in [0, 1]")
        if self.fall_count < 0:
            raise SpecError("fall_count must be >= 0")
        if self.fall_duration_samples < 1:
            raise SpecError("fall_duration_samples must be >= 1")
        for name, band in (("rest_band", self.rest_band), ("walk_band", self.walk_band)):
            if len(band) != 2 or not 0 < band[0] < band[1]:
                raise SpecError(f"{name} must be an increasing pair of positive g^2 values")
        if self.walk_band[0] < self.rest_band[1]:
            raise SpecError("walk_band lower bound must be >= rest_band upper bound")
        if self.fall_floor < self.walk_band[1]:
            raise SpecError("fall_floor must be >= walk_band upper bound")
        n = self.n_samples()
        if n < 1:
            raise SpecError("duration too short for a single sample")
        n_fall = self.fall_count * self.fall_duration_samples
        if round(self.activity_fraction * n) + n_fall > n:
            raise SpecError("activity and fall samples together exceed the trace length")
        if self.fall_count > 1:
            gap_samples = n / self.fall_count - self.fall_duration_samples
            if gap_samples * round(self.sample_interval_ms) <= _MIN_FALL_SEPARATION_MS:
                raise SpecError("falls cannot be separated by more than 10 s")
        elif n_fall > n:
            raise SpecError("fall samples exceed the trace length")


#: Profile that reproduces the reference tier statistics: ~233 min at the
#: default sampling period, 4.98% activity, 8 falls.
REFERENCE_PROFILE = TraceSpec(
    duration_min=233.0,
    activity_fraction=0.0498,
    fall_count=8,
)


def generate_trace(spec: TraceSpec, seed: int) -> Trace:
    """Generate a labelled trace; a pure function of ``(spec, seed)``."""
    spec.validate()
    n = spec.n_samples()
    step = round(spec.sample_interval_ms)
    rng = np.random.default_rng(seed)

    # 0 = REST, 1 = WALK, 2 = FALL
    labels = np.zeros(n, dtype=np.uint8)
    if spec.fall_count:
        seg = n / spec.fall_count
        for k in range(spec.fall_count):
            start = int(round((k + 0.5) * seg - spec.fall_duration_samples / 2))
            start = min(max(start, 0), n - spec.fall_duration_samples)
            labels[start : start + spec.fall_duration_samples] = 2

    n_walk = round(spec.activity_fraction * n)
    if n_walk:
        free = np.flatnonzero(labels == 0)
        walk_idx = rng.choice(free, size=n_walk, replace=False)
        labels[walk_idx] = 1

    lo = np.array(
        [
            spec.rest_band[0] + _BAND_MARGIN,
            spec.walk_band[0] + _BAND_MARGIN,
            spec.fall_floor + _BAND_MARGIN,
        ]
    )
    hi = np.array(
        [
            spec.rest_band[1] - _BAND_MARGIN,
            spec.walk_band[1] - _BAND_MARGIN,
            2.0 * spec.fall_floor - _BAND_MARGIN,
        ]
    )
    mag2 = rng.uniform(lo[labels], hi[labels])

    dirs = rng.normal(size=(n, 3))
    norms = np.linalg.norm(dirs, axis=1)
    degenerate = norms < 1e-12
    if degenerate.any():
        dirs[degenerate] = (1.0, 0.0, 0.0)
        norms[degenerate] = 1.0
    axes = dirs / norms[:, None] * np.sqrt(mag2)[:, None]
    axes = np.round(axes, 6)

    label_by_code = (Label.REST, Label.WALK, Label.FALL)
    samples = tuple(
        AccelSample(
            i * step,
            float(axes[i, 0]),
            float(axes[i, 1]),
            float(axes[i, 2]),
            label_by_code[labels[i]],
        )
        for i in range(n)
    )
    return Trace(spec.sample_interval_ms, samples, seed)


def write_trace(trace: Trace, path) -> None:
    """Write a trace as CSV; deterministic bytes for equal traces."""
    last_t = None
    for sample in trace.samples:
        if last_t is not None and sample.t_ms <= last_t:
            raise FormatError(f"t_ms not strictly increasing at t_ms={sample.t_ms}")
        last_t = sample.t_ms
    lines = [TRACE_HEADER]
    lines.extend(
        f"{s.t_ms},{s.ax:.6f},{s.ay:.6f},{s.az:.6f},{s.label.value}"
        for s in trace.samples
    )
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_trace(path) -> Trace:
    """Read a trace CSV written by :func:`write_trace`.

    The sampling period is inferred from the median timestamp step (the file
    does not carry the nominal value) and ``seed`` is ``None``.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if not text:
        raise FormatError("empty trace")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != TRACE_HEADER:
        raise ParseError(1, f"expected header {TRACE_HEADER!r}")

    samples = []
    last_t = None
    for line_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(line_no, f"expected 5 fields, got {len(parts)}")
        try:
            t_ms = int(parts[0])
            ax, ay, az = float(parts[1]), float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise ParseError(line_no, f"bad numeric field: {exc}") from exc
        if t_ms < 0:
            raise ParseError(line_no, "t_ms must be non-negative")
        try:
            label = Label(parts[4])
        except ValueError:
            raise ParseError(line_no, f"unknown label {parts[4]!r}") from None
        if last_t is not None and t_ms <= last_t:
            raise FormatError(f"t_ms not strictly increasing at line {line_no}")
        last_t = t_ms
        samples.append(AccelSample(t_ms, ax, ay, az, label))

    if not samples:
        raise FormatError("empty trace")
    if len(samples) > 1:
        diffs = [b.t_ms - a.t_ms for a, b in zip(samples, samples[1:])]
        interval = float(statistics.median(diffs))
    else:
        interval = DEFAULT_SAMPLE_INTERVAL_MS
    return Trace(interval, tuple(samples), seed=None)


def fall_events(trace: Trace) -> list:
    """Maximal runs of FALL-labelled samples as (start_index, end_index) pairs.

    ``end_index`` is exclusive.
    """
    events = []
    start = None
    for i, sample in enumerate(trace.samples):
        if sample.label is Label.FALL:
            if start is None:
                start = i
        elif start is not None:
            events.append((start, i))
            start = None
    if start is not None:
        events.append((start, len(trace.samples)))
    return events
