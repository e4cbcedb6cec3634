"""Dataset construction, windowing, normalization and sample serialization.

Samples live on an L x K grid of float64 values.  Normalization maps each
feature's dataset-wide min/max onto [-1, 1]; the affine record is kept on
the dataset so the mapping is exactly invertible and reusable.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import NumericError, ParseError, SchemaError, UsageError


@dataclass(frozen=True)
class TimeSeries:
    """One sample: L time steps by K features."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise UsageError(f"time series must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 2:
            raise UsageError("time series needs at least 2 points")
        if not np.all(np.isfinite(arr)):
            raise NumericError("time series contains non-finite values")
        object.__setattr__(self, "values", arr)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def features(self) -> int:
        return self.values.shape[1]


@dataclass
class NormRecord:
    """Per-feature affine map onto [-1, 1]; constant features map to 0."""

    minimum: np.ndarray
    maximum: np.ndarray
    constant: np.ndarray  # bool flags for max == min features


@dataclass
class Dataset:
    samples: list[TimeSeries]
    name: str = "dataset"
    normalization: NormRecord | None = None
    seed: int | None = None
    source: str | None = None
    stride: int | None = None

    def __post_init__(self):
        if not self.samples:
            raise UsageError("dataset has no samples")
        l0, k0 = self.samples[0].values.shape
        for s in self.samples:
            if s.values.shape != (l0, k0):
                raise UsageError("dataset samples must share L and K")

    @property
    def length(self) -> int:
        return self.samples[0].length

    @property
    def features(self) -> int:
        return self.samples[0].features

    def stacked(self) -> np.ndarray:
        """(N, L, K) array view of all samples."""
        return np.stack([s.values for s in self.samples])


@dataclass(frozen=True)
class SineSpec:
    """Multivariate sinusoids with per-feature frequency in [0,1] and phase in [-pi, pi]."""

    features: int = 5
    length: int = 24
    count: int = 10000
    seed: int = 42


def generate_sines(spec: SineSpec) -> Dataset:
    """Independent per-feature sinusoids, one counter-based stream per sample."""
    if spec.count <= 0 or spec.length <= 1 or spec.features <= 0:
        raise UsageError("sine spec needs positive count/features and length >= 2")
    t = np.arange(spec.length, dtype=np.float64)
    samples = []
    for i in range(spec.count):
        gen = rng.stream(spec.seed, "sines", i)
        freq = gen.uniform(0.0, 1.0, size=spec.features)
        phase = gen.uniform(-math.pi, math.pi, size=spec.features)
        values = np.sin(2.0 * math.pi * freq[None, :] * t[:, None] + phase[None, :])
        samples.append(TimeSeries(values))
    return Dataset(samples, name="sines", seed=spec.seed)


def sine_series(freq: float, phase: float, length: int) -> TimeSeries:
    t = np.arange(length, dtype=np.float64)
    return TimeSeries(np.sin(2.0 * math.pi * freq * t + phase))


def load_csv(path: str, feature_columns: list[str], window: int,
             stride: int = 1) -> Dataset:
    """Cut a numeric CSV into sliding windows of `window` rows."""
    if window < 2 or stride < 1:
        raise UsageError("window must be >= 2 and stride >= 1")
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        missing = [c for c in feature_columns if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        idx = [header.index(c) for c in feature_columns]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(row[i]) for i in idx])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}:{line_no}: non-numeric cell ({exc})") from exc
    data = np.asarray(rows, dtype=np.float64)
    if data.shape[0] < window:
        raise SchemaError(f"{path}: {data.shape[0]} rows, need at least {window} for one window")
    samples = [TimeSeries(data[start:start + window])
               for start in range(0, data.shape[0] - window + 1, stride)]
    name = os.path.splitext(os.path.basename(path))[0]
    return Dataset(samples, name=name, source=path, stride=stride)


def normalize(ds: Dataset) -> Dataset:
    """Map each feature's dataset-wide [min, max] onto [-1, 1].

    Already-normalized datasets (carrying a record) pass through unchanged,
    which makes the operation idempotent.
    """
    if ds.normalization is not None:
        return ds
    stacked = ds.stacked()
    lo = stacked.min(axis=(0, 1))
    hi = stacked.max(axis=(0, 1))
    constant = hi == lo
    record = NormRecord(minimum=lo, maximum=hi, constant=constant)
    span = np.where(constant, 1.0, hi - lo)
    samples = []
    for s in ds.samples:
        v = 2.0 * (s.values - lo) / span - 1.0
        v = np.where(constant[None, :], 0.0, v)
        samples.append(TimeSeries(v))
    return Dataset(samples, name=ds.name, normalization=record, seed=ds.seed,
                   source=ds.source, stride=ds.stride)


def denormalize(ds: Dataset) -> Dataset:
    if ds.normalization is None:
        raise UsageError("dataset carries no normalization record")
    rec = ds.normalization
    span = np.where(rec.constant, 1.0, rec.maximum - rec.minimum)
    samples = []
    for s in ds.samples:
        v = (s.values + 1.0) / 2.0 * span + rec.minimum
        v = np.where(rec.constant[None, :], rec.minimum[None, :], v)
        samples.append(TimeSeries(v))
    return Dataset(samples, name=ds.name, normalization=None, seed=ds.seed,
                   source=ds.source, stride=ds.stride)


def apply_normalization(ts: TimeSeries, rec: NormRecord) -> TimeSeries:
    span = np.where(rec.constant, 1.0, rec.maximum - rec.minimum)
    v = 2.0 * (ts.values - rec.minimum) / span - 1.0
    return TimeSeries(np.where(rec.constant[None, :], 0.0, v))


def undo_normalization(ts: TimeSeries, rec: NormRecord) -> TimeSeries:
    span = np.where(rec.constant, 1.0, rec.maximum - rec.minimum)
    v = (ts.values + 1.0) / 2.0 * span + rec.minimum
    return TimeSeries(np.where(rec.constant[None, :], rec.minimum[None, :], v))


def brownian_seed(reference: TimeSeries, seed: int) -> TimeSeries:
    """Gaussian random walk rescaled to the reference's per-feature mean/std."""
    gen = rng.stream(seed, "brownian")
    steps = gen.normal(size=reference.values.shape)
    walk = np.cumsum(steps, axis=0)
    w_mean = walk.mean(axis=0)
    w_std = walk.std(axis=0)
    w_std = np.where(w_std == 0.0, 1.0, w_std)
    r_mean = reference.values.mean(axis=0)
    r_std = reference.values.std(axis=0)
    rescaled = (walk - w_mean) / w_std * r_std + r_mean
    return TimeSeries(rescaled)


def blended_seed(reference: TimeSeries, seed: int, weight: float = 0.5) -> TimeSeries:
    """Reference series mixed with a Brownian walk of matching scale."""
    if not 0.0 <= weight <= 1.0:
        raise UsageError("blend weight must lie in [0, 1]")
    noise = brownian_seed(reference, seed)
    return TimeSeries((1.0 - weight) * reference.values + weight * noise.values)


def piecewise_linear_trend(ts: TimeSeries) -> TimeSeries:
    """Two-segment linear fit, one least-squares line per half of the series."""
    length = ts.length
    half = length // 2
    t = np.arange(length, dtype=np.float64)
    out = np.empty_like(ts.values)
    for lo, hi in ((0, half), (half, length)):
        seg_t = t[lo:hi]
        for j in range(ts.features):
            coeffs = np.polyfit(seg_t, ts.values[lo:hi, j], 1)
            out[lo:hi, j] = np.polyval(coeffs, seg_t)
    return TimeSeries(out)


def polynomial_trend(ts: TimeSeries, degree: int = 3) -> TimeSeries:
    """Low-order polynomial fit of a reference series, per feature."""
    t = np.arange(ts.length, dtype=np.float64)
    out = np.empty_like(ts.values)
    for j in range(ts.features):
        coeffs = np.polyfit(t, ts.values[:, j], degree)
        out[:, j] = np.polyval(coeffs, t)
    return TimeSeries(out)


# --- sample / manifest files -------------------------------------------------

def write_samples_csv(path: str, samples: list[TimeSeries]) -> None:
    """Columns: sample_id, t, feature_0..feature_{K-1}."""
    if not samples:
        raise UsageError("no samples to write")
    k = samples[0].features
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "t"] + [f"feature_{j}" for j in range(k)])
        for sid, s in enumerate(samples):
            for t in range(s.length):
                writer.writerow([sid, t] + [repr(float(v)) for v in s.values[t]])


def read_samples_csv(path: str) -> list[TimeSeries]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if header[:2] != ["sample_id", "t"]:
            raise SchemaError(f"{path}: expected sample_id,t,feature_* header")
        k = len(header) - 2
        buckets: dict[int, list[list[float]]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                sid = int(row[0])
                buckets.setdefault(sid, []).append([float(v) for v in row[2:2 + k]])
            except ValueError as exc:
                raise ParseError(f"{path}:{line_no}: bad cell ({exc})") from exc
    if not buckets:
        raise SchemaError(f"{path}: no data rows")
    return [TimeSeries(np.asarray(buckets[sid])) for sid in sorted(buckets)]


def write_manifest(path: str, entries: dict) -> None:
    """Flat key=value manifest; values are rendered with repr round-tripping."""
    with open(path, "w") as fh:
        for key in entries:
            fh.write(f"{key} = {entries[key]}\n")


def dataset_manifest(ds: Dataset) -> dict:
    entries: dict = {
        "source": ds.source if ds.source else "-",
        "name": ds.name,
        "n": len(ds.samples),
        "l": ds.length,
        "k": ds.features,
        "stride": ds.stride if ds.stride is not None else "-",
        "seed": ds.seed if ds.seed is not None else "-",
    }
    if ds.normalization is not None:
        rec = ds.normalization
        entries["norm_min"] = ",".join(repr(float(v)) for v in rec.minimum)
        entries["norm_max"] = ",".join(repr(float(v)) for v in rec.maximum)
        entries["norm_constant"] = ",".join("1" if c else "0" for c in rec.constant)
    return entries
