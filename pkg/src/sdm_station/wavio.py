"""WAV helpers shared by the renderer and the extraction service."""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly


def load_mono(path: str, target_rate: int) -> np.ndarray:
    """Read a WAV, mix to mono float64 in [-1, 1], resample to target_rate."""
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    else:
        x = data.astype(np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    if rate != target_rate:
        x = resample_poly(x, target_rate, rate)
    return x


def write_wav(path: str, rate: int, channels: np.ndarray, dtype: str = "float32"):
    """Write channel-major (n_channels, n_samples) data as an N-channel WAV."""
    frames = np.asarray(channels)
    if frames.ndim == 1:
        frames = frames[None, :]
    interleaved = np.ascontiguousarray(frames.T)
    if dtype == "float32":
        wavfile.write(path, rate, interleaved.astype(np.float32))
    elif dtype == "int16":
        clipped = np.clip(interleaved, -1.0, 1.0)
        wavfile.write(path, rate, (clipped * 32767.0).astype(np.int16))
    else:
        raise ValueError(f"unsupported dtype {dtype!r}")


def read_channels(path: str) -> tuple[int, np.ndarray]:
    """Read a WAV as (rate, channel-major float64 array)."""
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    else:
        x = data.astype(np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return rate, np.ascontiguousarray(x.T)
