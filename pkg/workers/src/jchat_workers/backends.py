"""
Task backends.

Each task has a "reference" backend built on plain signal processing so
the workers run (and the protocol suite passes) with no model downloads,
plus a "pretrained" adapter that lazily loads the published checkpoint
named in WorkerConfig. Adapters normalize model output (sorting,
clipping to file bounds, label stringification) so the pipeline never
sees model quirks.

The reference LID backend is a deterministic signal heuristic, not a
trained classifier: it emits a schema-valid probability map for protocol
and plumbing tests, nothing more.
"""

from __future__ import annotations

import numpy as np

from jchat.audio import probe_wav, write_wav
from jchat.model import DiarizationTurn, sort_turns

from .config import WorkerConfig
from .dsp import frame_signal, load_mono, mel_filterbank, rms_energy, spectral_centroid

FRAME_S = 0.025
HOP_S = 0.010
FEATURE_FPS = 50
FEATURE_DIM = 40

LID_LANGUAGES = ("ja", "en", "zh", "ko")


class BackendError(Exception):
    pass


class Backend:
    task = ""

    def __init__(self, config: WorkerConfig):
        self.config = config

    def handle(self, audio_path: str, params: dict) -> dict:
        raise NotImplementedError


# --- lid ------------------------------------------------------------------

class ReferenceLidBackend(Backend):
    task = "lid"

    def handle(self, audio_path, params):
        rate = self.config.expected_sample_rate
        max_window = float(params.get("max_window_s", 30.0))
        samples, _ = load_mono(audio_path, rate)
        samples = samples[: int(max_window * rate)]
        frames = frame_signal(samples, int(FRAME_S * rate), int(HOP_S * rate))
        energy = rms_energy(frames)
        voiced = frames[energy > max(1e-4, 0.1 * energy.max())]
        if len(voiced) == 0:
            voiced = frames
        centroid = float(np.mean(spectral_centroid(voiced, rate)))
        zcr = float(np.mean(np.abs(np.diff(np.sign(samples))) > 0)) if len(samples) > 1 else 0.0
        # Deterministic pseudo-logits from two summary statistics.
        logits = np.array([
            1.5 - abs(centroid - 1200.0) / 1000.0,
            1.0 - abs(centroid - 2000.0) / 1000.0,
            0.5 + zcr,
            0.3 - zcr,
        ])
        probs = np.exp(logits - logits.max())
        probs = probs / probs.sum()
        return {"probabilities": {lang: round(float(p), 6)
                                  for lang, p in zip(LID_LANGUAGES, probs)}}


class WhisperLidBackend(Backend):
    """Adapter around a published speech-recognition checkpoint's language head."""

    task = "lid"

    def __init__(self, config):
        super().__init__(config)
        import torch  # noqa: F401
        from transformers import WhisperForConditionalGeneration, WhisperProcessor

        self.processor = WhisperProcessor.from_pretrained(
            config.model, revision=config.revision or None)
        self.model = WhisperForConditionalGeneration.from_pretrained(
            config.model, revision=config.revision or None).to(config.device)

    def handle(self, audio_path, params):
        import torch

        rate = 16000
        max_window = float(params.get("max_window_s", 30.0))
        samples, _ = load_mono(audio_path, rate)
        samples = samples[: int(max_window * rate)]
        inputs = self.processor(samples, sampling_rate=rate, return_tensors="pt")
        with torch.no_grad():
            logits = self.model.detect_language(inputs.input_features.to(self.config.device))
        probs = torch.softmax(logits[0], dim=-1)
        out = {}
        for token_id, p in enumerate(probs.tolist()):
            token = self.processor.tokenizer.convert_ids_to_tokens(token_id)
            if token and token.startswith("<|") and len(token) <= 6:
                out[token.strip("<|>")] = round(float(p), 6)
        return {"probabilities": out}


# --- diarize --------------------------------------------------------------

class ReferenceDiarizeBackend(Backend):
    """Energy-gated segmentation with two-way spectral-centroid clustering.

    Good enough to label alternating synthetic voices; structural output
    contracts (sorted, in-bounds, stringified labels) match the pretrained
    adapter exactly.
    """

    task = "diarize"

    MIN_SEGMENT_S = 0.10
    MERGE_GAP_S = 0.20

    def handle(self, audio_path, params):
        rate = self.config.expected_sample_rate
        duration = probe_wav(audio_path).duration_s
        samples, _ = load_mono(audio_path, rate)
        hop = int(HOP_S * rate)
        frames = frame_signal(samples, int(FRAME_S * rate), hop)
        energy = rms_energy(frames)
        threshold = max(1e-4, 0.1 * float(energy.max()))
        active = energy > threshold

        segments = []  # (start_s, end_s) of contiguous active frames
        start = None
        for i, a in enumerate(active):
            if a and start is None:
                start = i
            elif not a and start is not None:
                segments.append((start * HOP_S, i * HOP_S + FRAME_S))
                start = None
        if start is not None:
            segments.append((start * HOP_S, len(active) * HOP_S + FRAME_S))

        merged = []
        for seg in segments:
            if merged and seg[0] - merged[-1][1] < self.MERGE_GAP_S:
                merged[-1] = (merged[-1][0], seg[1])
            else:
                merged.append(seg)
        merged = [s for s in merged if s[1] - s[0] >= self.MIN_SEGMENT_S]

        centroids = []
        for s0, s1 in merged:
            chunk = samples[int(s0 * rate): int(s1 * rate)]
            seg_frames = frame_signal(chunk, int(FRAME_S * rate), hop)
            centroids.append(float(np.mean(spectral_centroid(seg_frames, rate))))

        labels = self._cluster(centroids)
        turns = [
            DiarizationTurn(round(max(0.0, s0), 6), round(min(duration, s1), 6), f"spk{lab}")
            for (s0, s1), lab in zip(merged, labels)
            if min(duration, s1) > max(0.0, s0)
        ]
        return {"turns": [t.to_record() for t in sort_turns(turns)]}

    @staticmethod
    def _cluster(centroids: list[float]) -> list[int]:
        if not centroids:
            return []
        lo, hi = min(centroids), max(centroids)
        if hi - lo < 150.0:  # spread too small to call it two voices
            return [0] * len(centroids)
        # Two-means on a line, initialized at the extremes.
        c0, c1 = lo, hi
        labels = [0] * len(centroids)
        for _ in range(20):
            labels = [0 if abs(c - c0) <= abs(c - c1) else 1 for c in centroids]
            g0 = [c for c, l in zip(centroids, labels) if l == 0]
            g1 = [c for c, l in zip(centroids, labels) if l == 1]
            if not g0 or not g1:
                break
            c0, c1 = sum(g0) / len(g0), sum(g1) / len(g1)
        # Relabel by first appearance so labels are order-stable.
        remap, out = {}, []
        for l in labels:
            remap.setdefault(l, len(remap))
            out.append(remap[l])
        return out


class PyannoteDiarizeBackend(Backend):
    """Adapter around a published speaker-diarization pipeline checkpoint."""

    task = "diarize"

    def __init__(self, config):
        super().__init__(config)
        from pyannote.audio import Pipeline as PyannotePipeline

        self.pipeline = PyannotePipeline.from_pretrained(config.model)

    def handle(self, audio_path, params):
        duration = probe_wav(audio_path).duration_s
        annotation = self.pipeline(audio_path)
        turns = []
        for segment, _, label in annotation.itertracks(yield_label=True):
            s0 = max(0.0, float(segment.start))
            s1 = min(duration, float(segment.end))
            if s1 > s0:
                turns.append(DiarizationTurn(round(s0, 6), round(s1, 6), str(label)))
        return {"turns": [t.to_record() for t in sort_turns(turns)]}


# --- enhance --------------------------------------------------------------

class SpectralGateEnhanceBackend(Backend):
    """Spectral-subtraction noise gate; output length equals input length."""

    task = "enhance"

    def handle(self, audio_path, params):
        out_path = params.get("output_path")
        if not out_path:
            raise BackendError("enhance requires params.output_path")
        from jchat.audio import read_wav

        samples, rate = read_wav(audio_path)
        n = len(samples)
        frame_len = 512
        hop = frame_len // 2
        window = np.hanning(frame_len)
        frames = frame_signal(samples, frame_len, hop) * window
        spectra = np.fft.rfft(frames, axis=1)
        mags = np.abs(spectra)
        noise = np.percentile(mags, 10, axis=0, keepdims=True)
        gated = np.maximum(mags - noise, 0.1 * mags)
        cleaned = gated * np.exp(1j * np.angle(spectra))
        # Overlap-add back to exactly the input length.
        out = np.zeros(frames.shape[0] * hop + frame_len)
        norm = np.zeros_like(out)
        chunks = np.fft.irfft(cleaned, n=frame_len, axis=1) * window
        for i in range(frames.shape[0]):
            out[i * hop: i * hop + frame_len] += chunks[i]
            norm[i * hop: i * hop + frame_len] += window ** 2
        # Where window coverage is negligible (the very edges) the quotient
        # is ill-conditioned and would blow up to clipping; emit silence there.
        denom = norm[:n]
        out = np.where(denom > 1e-3, out[:n] / np.maximum(denom, 1e-3), 0.0)
        if len(out) < n:
            out = np.pad(out, (0, n - len(out)))
        write_wav(out_path, out.astype(np.float32), rate)
        return {"audio_path": out_path}


class DemucsEnhanceBackend(Backend):
    """Adapter around a published music-source-separation model's vocal stem."""

    task = "enhance"

    def __init__(self, config):
        super().__init__(config)
        import torch  # noqa: F401
        from demucs.pretrained import get_model

        self.model = get_model(config.model or "htdemucs")

    def handle(self, audio_path, params):
        import torch
        from demucs.apply import apply_model
        from jchat.audio import read_wav

        out_path = params.get("output_path")
        if not out_path:
            raise BackendError("enhance requires params.output_path")
        samples, rate = read_wav(audio_path)
        wav = torch.tensor(samples)[None, None, :].repeat(1, 2, 1)
        stems = apply_model(self.model, wav, device=self.config.device)[0]
        vocals = stems[self.model.sources.index("vocals")].mean(dim=0).numpy()
        vocals = vocals[: len(samples)]
        if len(vocals) < len(samples):
            vocals = np.pad(vocals, (0, len(samples) - len(vocals)))
        write_wav(out_path, vocals.astype(np.float32), rate)
        return {"audio_path": out_path}


# --- features -------------------------------------------------------------

class LogMelFeaturesBackend(Backend):
    """Frame-wise log-mel features at 50 frames/s, 40 dims."""

    task = "features"

    def handle(self, audio_path, params):
        out_path = params.get("output_path")
        start = float(params.get("start_s", 0.0))
        end = float(params.get("end_s", 0.0))
        if not out_path or end <= start:
            raise BackendError("features requires params.output_path and end_s > start_s")
        rate = self.config.expected_sample_rate
        samples, _ = load_mono(audio_path, rate)
        lo, hi = int(start * rate), int(end * rate)
        chunk = samples[lo:hi]
        n_frames = max(1, int(round((end - start) * FEATURE_FPS)))
        frame_len = int(FRAME_S * rate)
        hop = rate // FEATURE_FPS
        needed = (n_frames - 1) * hop + frame_len
        if len(chunk) < needed:
            chunk = np.pad(chunk, (0, needed - len(chunk)))
        frames = frame_signal(chunk, frame_len, hop)[:n_frames]
        window = np.hanning(frame_len)
        mags = np.abs(np.fft.rfft(frames * window, axis=1))
        fb = mel_filterbank(FEATURE_DIM, frame_len, rate)
        mels = np.log(mags @ fb.T + 1e-8).astype("<f4")
        mels.tofile(out_path)
        return {"matrix_path": out_path, "frames": int(mels.shape[0]), "dim": FEATURE_DIM}


class HubertFeaturesBackend(Backend):
    """Adapter around a published self-supervised speech encoder checkpoint."""

    task = "features"

    def __init__(self, config):
        super().__init__(config)
        import torch  # noqa: F401
        from transformers import AutoFeatureExtractor, AutoModel

        self.extractor = AutoFeatureExtractor.from_pretrained(
            config.model, revision=config.revision or None)
        self.model = AutoModel.from_pretrained(
            config.model, revision=config.revision or None).to(config.device)

    def handle(self, audio_path, params):
        import torch

        out_path = params.get("output_path")
        start = float(params.get("start_s", 0.0))
        end = float(params.get("end_s", 0.0))
        if not out_path or end <= start:
            raise BackendError("features requires params.output_path and end_s > start_s")
        rate = 16000
        samples, _ = load_mono(audio_path, rate)
        chunk = samples[int(start * rate): int(end * rate)]
        inputs = self.extractor(chunk, sampling_rate=rate, return_tensors="pt")
        with torch.no_grad():
            hidden = self.model(**{k: v.to(self.config.device) for k, v in inputs.items()}
                                ).last_hidden_state[0]
        matrix = hidden.cpu().numpy().astype("<f4")
        matrix.tofile(out_path)
        return {"matrix_path": out_path, "frames": int(matrix.shape[0]),
                "dim": int(matrix.shape[1])}


REFERENCE_BACKENDS = {
    "lid": ReferenceLidBackend,
    "diarize": ReferenceDiarizeBackend,
    "enhance": SpectralGateEnhanceBackend,
    "features": LogMelFeaturesBackend,
}

PRETRAINED_BACKENDS = {
    "lid": WhisperLidBackend,
    "diarize": PyannoteDiarizeBackend,
    "enhance": DemucsEnhanceBackend,
    "features": HubertFeaturesBackend,
}


def load_backend(config: WorkerConfig) -> Backend:
    table = REFERENCE_BACKENDS if config.backend == "reference" else PRETRAINED_BACKENDS
    if config.task not in table:
        raise BackendError(f"no {config.backend} backend for task {config.task!r}")
    return table[config.task](config)
