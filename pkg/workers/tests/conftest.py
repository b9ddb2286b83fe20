import sys

import numpy as np
import pytest

from jchat.audio import write_wav

RATE = 16000


def worker_cmd(task, backend="reference"):
    return [sys.executable, "-m", "jchat_workers.serve",
            "--task", task, "--backend", backend]


def synth_voice(duration_s, freq, rate=RATE):
    t = np.arange(int(duration_s * rate)) / rate
    # A couple of harmonics so the signal is not a bare sine.
    return (0.5 * np.sin(2 * np.pi * freq * t)
            + 0.2 * np.sin(2 * np.pi * 2 * freq * t)).astype(np.float32)


@pytest.fixture
def alternating_voices_wav(tmp_path):
    """Two synthetic voices taking turns with silences between them."""
    rate = RATE
    silence = np.zeros(int(0.5 * rate), dtype=np.float32)
    low = lambda d: synth_voice(d, 200.0)
    high = lambda d: synth_voice(d, 1200.0)
    signal = np.concatenate([
        silence, low(1.5), silence, high(1.5), silence, low(1.5), silence, high(1.5), silence,
    ])
    path = tmp_path / "dialogue.wav"
    write_wav(path, signal, rate)
    return path


@pytest.fixture
def noisy_speech_wav(tmp_path):
    rate = RATE
    rng = np.random.default_rng(0)
    speech = synth_voice(3.0, 220.0)
    noisy = speech + 0.05 * rng.standard_normal(len(speech)).astype(np.float32)
    path = tmp_path / "noisy.wav"
    write_wav(path, noisy, rate)
    return path
