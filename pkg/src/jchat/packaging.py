"""
Cleansing and release packaging.

Cleansing sends each retained dialogue's excerpt through the enhancement
worker. Packaging lays every dialogue onto two channels that swap at
turn-taking events, splits the corpus into train/valid/test under a
seed, and writes a deterministic release tree.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import cut_excerpt, probe_wav, read_wav, resample, write_wav
from .model import Dialogue, round_time
from .workers.pool import WorkerPool


@dataclass
class ChannelAssignment:
    dialogue_id: str
    turn_channels: list[int]
    speaker_channel_map: dict[str, int] | None  # present only when consistent

    @property
    def consistent(self) -> bool:
        return self.speaker_channel_map is not None


@dataclass
class SplitSpec:
    """Either absolute counts or fractions for train/valid/test."""

    seed: int = 0
    counts: tuple[int, int, int] | None = None
    fractions: tuple[float, float, float] | None = None

    def __post_init__(self):
        if (self.counts is None) == (self.fractions is None):
            raise ValueError("exactly one of counts or fractions must be given")
        if self.fractions is not None and abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("fractions must sum to 1")

    def sizes(self, n: int) -> tuple[int, int, int]:
        if self.counts is not None:
            train, valid, test = self.counts
            if train + valid + test > n:
                raise ValueError(f"split counts {self.counts} exceed corpus size {n}")
            # Remainder goes to train.
            return n - valid - test, valid, test
        _, f_valid, f_test = self.fractions
        valid = int(f_valid * n)
        test = int(f_test * n)
        return n - valid - test, valid, test


def assign_channels(dialogue: Dialogue) -> ChannelAssignment:
    """Swap the output channel at every turn-taking event.

    First turn goes to channel 0; a speaker change flips the channel. The
    speaker→channel map is emitted only when the dialogue has exactly two
    speakers and the induced relation is single-valued.
    """
    if not dialogue.turns:
        raise ValueError("dialogue has no turns")
    channels = [0]
    for prev, cur in zip(dialogue.turns, dialogue.turns[1:]):
        if cur.speaker == prev.speaker:
            channels.append(channels[-1])
        else:
            channels.append(1 - channels[-1])

    speaker_map: dict[str, int] | None = None
    if len(dialogue.speakers) == 2:
        induced: dict[str, int] = {}
        consistent = True
        for turn, ch in zip(dialogue.turns, channels):
            if induced.setdefault(turn.speaker, ch) != ch:
                consistent = False
                break
        if consistent:
            speaker_map = induced
    return ChannelAssignment(
        dialogue_id=dialogue.dialogue_id,
        turn_channels=channels,
        speaker_channel_map=speaker_map,
    )


def split_dataset(dialogues: list[Dialogue], spec: SplitSpec,
                  ) -> tuple[list[Dialogue], list[Dialogue], list[Dialogue]]:
    """Uniformly random, seed-deterministic train/valid/test partition."""
    n_train, n_valid, n_test = spec.sizes(len(dialogues))
    order = sorted(range(len(dialogues)), key=lambda i: dialogues[i].dialogue_id)
    random.Random(spec.seed).shuffle(order)
    train = [dialogues[i] for i in order[:n_train]]
    valid = [dialogues[i] for i in order[n_train:n_train + n_valid]]
    test = [dialogues[i] for i in order[n_train + n_valid:n_train + n_valid + n_test]]
    return train, valid, test


def cleanse(dialogue: Dialogue, source_audio: str | Path, pool: WorkerPool,
            work_dir: str | Path) -> Dialogue:
    """Cut the dialogue's excerpt and run it through the enhancement worker.

    On worker failure the dialogue is marked failed at cleanse and stays
    out of packaging; the pipeline continues.
    """
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    excerpt = work_dir / f"{dialogue.dialogue_id}.raw.wav"
    cut_excerpt(source_audio, excerpt, dialogue.start_s, dialogue.end_s)
    enhanced = work_dir / f"{dialogue.dialogue_id}.wav"
    resp = pool.request("enhance", str(excerpt), {"output_path": str(enhanced)})
    if resp.status != "ok":
        dialogue.stage_status["cleanse"] = "failed"
        dialogue.failure_reason = resp.error_message
        return dialogue
    out_info = probe_wav(resp.payload["audio_path"])
    if abs(out_info.duration_s - dialogue.span_s) > 0.020:
        dialogue.stage_status["cleanse"] = "failed"
        dialogue.failure_reason = (
            f"enhanced duration {out_info.duration_s:.3f} s deviates from "
            f"span {dialogue.span_s:.3f} s by more than 20 ms")
        return dialogue
    dialogue.stage_status["cleanse"] = "done"
    dialogue.cleansed_path = resp.payload["audio_path"]
    return dialogue


@dataclass
class PackageResult:
    output_dir: Path
    split_sizes: dict[str, int] = field(default_factory=dict)


def _render_channels(dialogue: Dialogue, assignment: ChannelAssignment,
                     rate_out: int) -> tuple[np.ndarray, np.ndarray]:
    """Lay dialogue audio onto two mono tracks that swap at turn takes."""
    samples, rate = read_wav(dialogue.cleansed_path)
    n = len(samples)
    ch0 = np.zeros(n, dtype=np.float32)
    ch1 = np.zeros(n, dtype=np.float32)
    for turn, ch in zip(dialogue.turns, assignment.turn_channels):
        lo = max(0, int(round((turn.start_s - dialogue.start_s) * rate)))
        hi = min(n, int(round((turn.end_s - dialogue.start_s) * rate)))
        target = ch0 if ch == 0 else ch1
        target[lo:hi] = samples[lo:hi]
    return resample(ch0, rate, rate_out), resample(ch1, rate, rate_out)


def package(dialogues: list[Dialogue], spec: SplitSpec, output_dir: str | Path,
            sample_rate_out: int = 16000) -> PackageResult:
    """Write the {train,valid,test} release tree; idempotent and order-stable.

    Already-written dialogues (both channel files present) are skipped, so
    an interrupted run resumes without duplicating work.
    """
    output_dir = Path(output_dir)
    packagable = sorted(
        (d for d in dialogues if d.stage_status.get("cleanse") == "done"),
        key=lambda d: d.dialogue_id,
    )
    train, valid, test = split_dataset(packagable, spec)
    result = PackageResult(output_dir=output_dir)
    for split_name, split in (("train", train), ("valid", valid), ("test", test)):
        split_dir = output_dir / split_name
        split_dir.mkdir(parents=True, exist_ok=True)
        manifest_lines = []
        for d in sorted(split, key=lambda d: d.dialogue_id):
            assignment = assign_channels(d)
            d_dir = split_dir / d.dialogue_id
            ch0_path = d_dir / "ch0.wav"
            ch1_path = d_dir / "ch1.wav"
            if not (ch0_path.exists() and ch1_path.exists()):
                ch0, ch1 = _render_channels(d, assignment, sample_rate_out)
                write_wav(ch0_path, ch0, sample_rate_out)
                write_wav(ch1_path, ch1, sample_rate_out)
            sidecar = {
                "dialogue_id": d.dialogue_id,
                "turn_channels": assignment.turn_channels,
                "speaker_channel_map": assignment.speaker_channel_map,
                "channel_consistent": assignment.consistent,
                "turns": [t.to_record() for t in d.turns],
            }
            (d_dir / "channels.json").write_text(
                json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
            d.stage_status["package"] = "done"
            manifest_lines.append(json.dumps({
                "dialogue_id": d.dialogue_id,
                "doc_id": d.doc_id,
                "source": d.source,
                "span_s": round_time(d.span_s),
                "num_turns": len(d.turns),
                "num_speakers": len(d.speakers),
                "channel_consistent": assignment.consistent,
                "audio": [f"{d.dialogue_id}/ch0.wav", f"{d.dialogue_id}/ch1.wav"],
            }, sort_keys=True))
        (split_dir / "manifest.jsonl").write_text(
            "\n".join(manifest_lines) + ("\n" if manifest_lines else ""))
        result.split_sizes[split_name] = len(split)
    return result
