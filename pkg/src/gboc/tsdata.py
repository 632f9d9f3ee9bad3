"""Time-series ingestion, normalization, windowing, and scenario synthesis.

All functions are pure: they never mutate their inputs and are safe to call
concurrently on distinct data.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadParams,
    DegenerateSeries,
    MissingFile,
    NonBinaryLabel,
    ParseError,
    WindowTooLong,
)

EPS_STD = 1e-8


@dataclass(frozen=True)
class TimeSeries:
    """A T x d matrix of observations with optional per-timestep 0/1 labels."""

    values: np.ndarray
    labels: np.ndarray | None = None
    channel_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise BadParams(f"values must be a T x d matrix with T,d >= 1, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ParseError("values contain non-finite entries")
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (values.shape[0],):
                raise BadParams(f"labels must have length T={values.shape[0]}, got shape {labels.shape}")
            bad = np.where((labels != 0) & (labels != 1))[0]
            if bad.size:
                raise NonBinaryLabel(f"label at row {bad[0]} is not 0/1", row=int(bad[0]))
            object.__setattr__(self, "labels", labels)
        if not self.channel_names:
            object.__setattr__(self, "channel_names", [f"v{i}" for i in range(values.shape[1])])
        elif len(self.channel_names) != values.shape[1]:
            raise BadParams("channel_names length must equal d")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WindowSet:
    """Overlapping length-w windows, flattened timestep-major, tracked to their source starts."""

    windows: np.ndarray  # (N_w, w*d)
    starts: np.ndarray  # (N_w,)
    window_len: int
    stride: int
    n_channels: int

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]

    def as_sequences(self) -> np.ndarray:
        """View windows as (N_w, w, d) for the recurrent encoder."""
        return self.windows.reshape(self.n_windows, self.window_len, self.n_channels)


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean/std fitted on the training split; std clamped to EPS_STD."""

    mean: np.ndarray
    std: np.ndarray


def load_csv(path: str | Path, label_column: str | None = None) -> TimeSeries:
    """Read a comma-separated file with a mandatory header into a TimeSeries.

    All non-label columns must parse as finite reals; the label column, when
    named, must contain only 0/1.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty (no header row)") from None
        header = [h.strip() for h in header]
        label_idx: int | None = None
        if label_column is not None:
            if label_column not in header:
                raise ParseError(f"label column {label_column!r} not in header", row=0, col=label_column)
            label_idx = header.index(label_column)
        feat_idx = [i for i in range(len(header)) if i != label_idx]
        if not feat_idx:
            raise ParseError("no feature columns")

        rows: list[list[float]] = []
        labels: list[int] = []
        for rnum, record in enumerate(reader, start=1):
            if len(record) != len(header):
                raise ParseError(f"row {rnum} has {len(record)} fields, expected {len(header)}", row=rnum)
            feats = []
            for i in feat_idx:
                try:
                    v = float(record[i])
                except ValueError:
                    raise ParseError(f"row {rnum}, column {header[i]!r}: not a number", row=rnum, col=header[i]) from None
                if not np.isfinite(v):
                    raise ParseError(f"row {rnum}, column {header[i]!r}: non-finite value", row=rnum, col=header[i])
                feats.append(v)
            rows.append(feats)
            if label_idx is not None:
                raw = record[label_idx].strip()
                try:
                    lv = float(raw)
                except ValueError:
                    raise NonBinaryLabel(f"row {rnum}: label {raw!r} is not 0/1", row=rnum) from None
                if lv not in (0.0, 1.0):
                    raise NonBinaryLabel(f"row {rnum}: label {raw!r} is not 0/1", row=rnum)
                labels.append(int(lv))

    if not rows:
        raise ParseError("file has a header but no data rows")
    values = np.array(rows, dtype=np.float64)
    names = [header[i] for i in feat_idx]
    return TimeSeries(values=values, labels=np.array(labels, dtype=np.int64) if label_idx is not None else None, channel_names=names)


def save_csv(ts: TimeSeries, path: str | Path) -> None:
    """Write a TimeSeries in the same format load_csv reads (label column included when present)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(ts.channel_names) + (["label"] if ts.labels is not None else [])
        writer.writerow(header)
        for t in range(ts.T):
            row = [format(v, ".17g") for v in ts.values[t]]
            if ts.labels is not None:
                row.append(str(int(ts.labels[t])))
            writer.writerow(row)


def fit_normalizer(train: TimeSeries) -> NormStats:
    """Per-channel mean and sample (n-1) std of the training split."""
    if train.T < 2:
        raise DegenerateSeries(f"need at least 2 timesteps to fit a normalizer, got T={train.T}")
    mean = train.values.mean(axis=0)
    std = train.values.std(axis=0, ddof=1)
    std = np.maximum(std, EPS_STD)
    return NormStats(mean=mean, std=std)


def apply_normalizer(ts: TimeSeries, stats: NormStats) -> TimeSeries:
    if stats.mean.shape != (ts.d,) or stats.std.shape != (ts.d,):
        raise BadParams(f"normalizer is for d={stats.mean.shape[0]} channels, series has d={ts.d}")
    values = (ts.values - stats.mean) / stats.std
    return TimeSeries(values=values, labels=ts.labels, channel_names=list(ts.channel_names))


def make_windows(ts: TimeSeries, w: int, stride: int = 1) -> WindowSet:
    """Cut overlapping length-w windows at the given stride, flattened timestep-major."""
    if w < 1 or stride < 1:
        raise BadParams("window length and stride must be positive")
    if w > ts.T:
        raise WindowTooLong(f"window length {w} exceeds series length {ts.T}")
    n = (ts.T - w) // stride + 1
    starts = np.arange(n, dtype=np.int64) * stride
    windows = np.empty((n, w * ts.d), dtype=np.float64)
    for k, s in enumerate(starts):
        windows[k] = ts.values[s : s + w].reshape(-1)
    return WindowSet(windows=windows, starts=starts, window_len=w, stride=stride, n_channels=ts.d)


def window_labels(ts: TimeSeries, ws: WindowSet) -> np.ndarray:
    """Window label = 1 iff any covered timestep is labeled 1."""
    if ts.labels is None:
        raise BadParams("series has no labels")
    out = np.zeros(ws.n_windows, dtype=np.int64)
    for k, s in enumerate(ws.starts):
        out[k] = 1 if ts.labels[s : s + ws.window_len].any() else 0
    return out


@dataclass(frozen=True)
class SynthParams:
    """Knobs for the scenario generator; magnitudes must be positive."""

    n_spikes: int = 8
    n_shifts: int = 2
    spike_mag: float = 5.0
    shift_len: int = 20
    shift_mag: float = 3.0
    drift_slope: float = 0.001
    noise_std: float = 0.3
    n_channels: int = 1

    def __post_init__(self):
        if self.spike_mag <= 0 or self.shift_mag <= 0:
            raise BadParams("spike and shift magnitudes must be positive")
        if self.shift_len <= 0 or self.n_channels <= 0:
            raise BadParams("shift length and channel count must be positive")
        if self.n_spikes < 0 or self.n_shifts < 0:
            raise BadParams("anomaly counts must be nonnegative")
        if self.drift_slope < 0 or self.noise_std < 0:
            raise BadParams("drift slope and noise scale must be nonnegative")


SCENARIO_KINDS = ("clean", "drift", "noise", "drift_noise")


def _base_signal(T: int, d: int, rng: np.random.Generator) -> np.ndarray:
    # one long record; the caller splits it into train/test halves so both
    # follow the same seeded pattern
    t = np.arange(2 * T, dtype=np.float64)
    out = np.zeros((2 * T, d))
    for c in range(d):
        # three incommensurate periods keep the pattern nontrivial but learnable
        periods = np.array([47.0, 131.0, 223.0]) * (1.0 + 0.1 * c)
        amps = np.array([1.0, 0.6, 0.4])
        phases = rng.uniform(0.0, 2.0 * np.pi, size=3)
        for p, a, ph in zip(periods, amps, phases):
            out[:, c] += a * np.sin(2.0 * np.pi * t / p + ph)
    return out


def synth_scenario(
    kind: str, T: int, seed: int, params: SynthParams | None = None
) -> tuple[TimeSeries, TimeSeries]:
    """Build a (train, test) pair for one robustness scenario.

    Train is an anomaly-free sinusoid mixture. Test shares the signal family
    and carries injected spikes and level shifts with labels set; drift adds a
    linear trend to the test split only, noise adds i.i.d. Gaussian
    perturbation to the test values. Deterministic for a fixed seed: the
    drift/noise variants consume the generator in the same order as clean, so
    anomaly placement matches across kinds.
    """
    if kind not in SCENARIO_KINDS:
        raise BadParams(f"unknown scenario kind {kind!r}, expected one of {SCENARIO_KINDS}")
    if T < 200:
        raise BadParams(f"T must be >= 200, got {T}")
    params = params or SynthParams()
    d = params.n_channels
    rng = np.random.default_rng([seed, 0xB0C])

    signal = _base_signal(T, d, rng)
    train_values = signal[:T].copy()
    test_values = signal[T:].copy()
    labels = np.zeros(T, dtype=np.int64)

    margin = max(params.shift_len + 1, T // 50)
    lo, hi = margin, T - margin

    # level shifts first (they occupy ranges), then spikes outside them
    occupied = np.zeros(T, dtype=bool)
    for _ in range(params.n_shifts):
        for _attempt in range(200):
            s = int(rng.integers(lo, hi - params.shift_len))
            seg = slice(s, s + params.shift_len)
            if not occupied[seg].any():
                sign = 1.0 if rng.random() < 0.5 else -1.0
                test_values[seg] += sign * params.shift_mag
                labels[seg] = 1
                occupied[seg] = True
                break
        else:
            raise BadParams("could not place level shifts; series too short for requested anomalies")

    free = np.where(~occupied)[0]
    free = free[(free >= lo) & (free < hi)]
    if params.n_spikes > free.size:
        raise BadParams("could not place spikes; series too short for requested anomalies")
    spike_pos = rng.choice(free, size=params.n_spikes, replace=False)
    for pos in np.sort(spike_pos):
        sign = 1.0 if rng.random() < 0.5 else -1.0
        test_values[pos] += sign * params.spike_mag
        labels[pos] = 1

    if kind in ("drift", "drift_noise"):
        trend = params.drift_slope * np.arange(T, dtype=np.float64)
        test_values += trend[:, None]
    if kind in ("noise", "drift_noise"):
        test_values += params.noise_std * rng.standard_normal(size=(T, d))

    names = [f"v{i}" for i in range(d)]
    train = TimeSeries(values=train_values, labels=np.zeros(T, dtype=np.int64), channel_names=names)
    test = TimeSeries(values=test_values, labels=labels, channel_names=names)
    return train, test
