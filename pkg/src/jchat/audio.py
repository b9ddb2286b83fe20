"""
Minimal WAV I/O helpers.

Probing reads container headers only; full decode happens just where a
stage needs samples (excerpt cutting, channel layout). 16-bit PCM only,
which is all the pipeline emits and all the fixtures use.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class AudioProbeError(Exception):
    """File is not a readable PCM WAV."""


@dataclass
class AudioInfo:
    duration_s: float
    sample_rate_hz: int
    channels: int


def probe_wav(path: str | Path) -> AudioInfo:
    """Read duration/rate/channels from the WAV header without decoding."""
    try:
        with wave.open(str(path), "rb") as w:
            rate = w.getframerate()
            frames = w.getnframes()
            channels = w.getnchannels()
    except (wave.Error, EOFError, OSError) as e:
        raise AudioProbeError(f"{path}: {e}") from e
    if rate <= 0:
        raise AudioProbeError(f"{path}: nonpositive sample rate")
    return AudioInfo(duration_s=frames / rate, sample_rate_hz=rate, channels=channels)


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Load a 16-bit PCM WAV as float32 in [-1, 1], mono-mixed if multichannel."""
    with wave.open(str(path), "rb") as w:
        rate = w.getframerate()
        channels = w.getnchannels()
        width = w.getsampwidth()
        if width != 2:
            raise AudioProbeError(f"{path}: only 16-bit PCM supported, got width {width}")
        raw = w.readframes(w.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    return samples, rate


def write_wav(path: str | Path, samples: np.ndarray, rate: int) -> None:
    """Write mono float32 samples in [-1, 1] as 16-bit PCM."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    clipped = np.clip(samples, -1.0, 1.0)
    pcm = (clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(pcm.tobytes())


def cut_excerpt(src: str | Path, dst: str | Path, start_s: float, end_s: float) -> None:
    """Write the [start_s, end_s] slice of src as a mono WAV at the source rate."""
    samples, rate = read_wav(src)
    lo = max(0, int(round(start_s * rate)))
    hi = min(len(samples), int(round(end_s * rate)))
    write_wav(dst, samples[lo:hi], rate)


def resample(samples: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Linear-interpolation resampling; adequate for packaging layout work."""
    if rate_in == rate_out:
        return samples
    n_out = int(round(len(samples) * rate_out / rate_in))
    if n_out <= 0 or len(samples) == 0:
        return np.zeros(0, dtype=np.float32)
    x_out = np.arange(n_out) * (rate_in / rate_out)
    return np.interp(x_out, np.arange(len(samples)), samples).astype(np.float32)
