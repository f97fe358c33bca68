"""Temporal resampling, min-max scaling, differencing and flattening."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, DatasetError, TimeSeriesInstance

CONSTANT_EPS = 1e-12
CONSTANT_FILL = 0.5


@dataclass(frozen=True)
class PreprocessConfig:
    target_frames: int = 57
    use_derivative: bool = False

    def __post_init__(self):
        if int(self.target_frames) < 2:
            raise ValueError(f"target_frames must be >= 2, got {self.target_frames}")


@dataclass(frozen=True)
class FlatMatrix:
    """Frame-major flattened features: row = [c1(t1), ..., cK(t1), c1(t2), ...]."""

    values: np.ndarray
    row_labels: tuple[str, ...]
    num_channels: int

    @property
    def num_frames(self) -> int:
        return self.values.shape[1] // self.num_channels if self.num_channels else 0

    def unflatten(self) -> np.ndarray:
        """Return an array of shape (rows, channels, frames)."""
        n = self.values.shape[0]
        return self.values.reshape(n, self.num_frames, self.num_channels).transpose(0, 2, 1)


def resample_fourier(signal, m: int) -> np.ndarray:
    """Resample ``signal`` to ``m`` points by spectral truncation or zero padding.

    The signal is treated as one period of a periodic sequence. When ``m`` is
    even and smaller than the input length the kept Nyquist coefficient is the
    sum of the two bins aliasing onto it; when the input length is even and
    smaller than ``m`` its Nyquist coefficient is split evenly between the two
    target bins.
    """
    x = np.asarray(signal, dtype=np.float64)
    n = x.shape[0]
    if n < 1 or m < 1:
        raise ValueError("resample_fourier needs n >= 1 and m >= 1")
    if m == n:
        return x.copy()
    X = np.fft.fft(x)
    Y = np.zeros(m, dtype=np.complex128)
    N = min(n, m)
    half = (N - 1) // 2  # bins strictly below Nyquist on each side
    Y[: half + 1] = X[: half + 1]
    if half:
        Y[-half:] = X[-half:]
    if N % 2 == 0:
        h = N // 2
        if m < n:
            Y[h] = X[h] + X[n - h]
        else:
            Y[h] = 0.5 * X[h]
            Y[m - h] = 0.5 * X[h]
    return np.fft.ifft(Y).real * (m / n)


def temporal_scale(inst: TimeSeriesInstance, target_frames: int) -> TimeSeriesInstance:
    if inst.num_frames == target_frames:
        return inst
    out = np.vstack([resample_fourier(row, target_frames) for row in inst.matrix])
    return inst.replace(out)


def spatial_scale(inst: TimeSeriesInstance) -> TimeSeriesInstance:
    m = inst.matrix
    lo = m.min(axis=1, keepdims=True)
    hi = m.max(axis=1, keepdims=True)
    span = hi - lo
    flat = span[:, 0] < CONSTANT_EPS
    safe = np.where(span < CONSTANT_EPS, 1.0, span)
    out = (m - lo) / safe
    out[flat] = CONSTANT_FILL
    return inst.replace(out)


def differentiate(inst: TimeSeriesInstance) -> TimeSeriesInstance:
    if inst.num_frames < 2:
        raise DatasetError(f"{inst.source_id or inst.label}: differencing needs at least 2 frames")
    return inst.replace(np.diff(inst.matrix, axis=1))


def preprocess_instance(inst: TimeSeriesInstance, cfg: PreprocessConfig) -> TimeSeriesInstance:
    """temporal_scale -> optional differentiate -> spatial_scale."""
    out = temporal_scale(inst, cfg.target_frames)
    if cfg.use_derivative:
        out = differentiate(out)
    return spatial_scale(out)


def preprocess_dataset(ds: Dataset, cfg: PreprocessConfig) -> Dataset:
    return ds.map(lambda x: preprocess_instance(x, cfg))


def flatten(ds: Dataset) -> FlatMatrix:
    frames = {x.num_frames for x in ds.instances}
    if len(frames) > 1:
        raise DatasetError(f"cannot flatten instances with differing frame counts {sorted(frames)}")
    k = ds.schema.num_channels
    if not ds.instances:
        return FlatMatrix(np.zeros((0, 0)), (), k)
    rows = np.stack([x.matrix.T.reshape(-1) for x in ds.instances])
    return FlatMatrix(rows, tuple(ds.label_array()), k)
