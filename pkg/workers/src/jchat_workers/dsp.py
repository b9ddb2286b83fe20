"""Shared signal-processing primitives for the reference backends."""

from __future__ import annotations

import numpy as np

from jchat.audio import read_wav, resample


def load_mono(path: str, target_rate: int) -> tuple[np.ndarray, int]:
    samples, rate = read_wav(path)
    if rate != target_rate:
        samples = resample(samples, rate, target_rate)
    return samples, target_rate


def frame_signal(samples: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """(n_frames, frame_len) view-copy; pads the tail with zeros."""
    if len(samples) < frame_len:
        samples = np.pad(samples, (0, frame_len - len(samples)))
    n_frames = 1 + (len(samples) - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return samples[idx]


def rms_energy(frames: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean(frames ** 2, axis=1) + 1e-12)


def spectral_centroid(frames: np.ndarray, rate: int) -> np.ndarray:
    window = np.hanning(frames.shape[1])
    mags = np.abs(np.fft.rfft(frames * window, axis=1))
    freqs = np.fft.rfftfreq(frames.shape[1], 1.0 / rate)
    denom = mags.sum(axis=1) + 1e-12
    return (mags @ freqs) / denom


def mel_filterbank(n_mels: int, n_fft: int, rate: int) -> np.ndarray:
    """Triangular mel filters, (n_mels, n_fft // 2 + 1)."""
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    mel_points = np.linspace(hz_to_mel(0), hz_to_mel(rate / 2), n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    bins = np.floor((n_fft + 1) * hz_points / rate).astype(int)
    fb = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(1, n_mels + 1):
        lo, center, hi = bins[m - 1], bins[m], bins[m + 1]
        for k in range(lo, center):
            if center > lo:
                fb[m - 1, k] = (k - lo) / (center - lo)
        for k in range(center, hi):
            if hi > center:
                fb[m - 1, k] = (hi - k) / (hi - center)
    return fb
