"""
Corpus statistics and frame-feature sampling.

Dialogue duration means wall-clock span (end - start); the summed-speech
reading is reported alongside as total_speech_hours so both views of the
corpus size are available.
"""

from __future__ import annotations

import json
import math
import random
import struct
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .model import Dialogue
from .workers.pool import WorkerPool


@dataclass
class SubsetStats:
    subset: str
    total_hours: float
    total_speech_hours: float
    num_dialogues: int
    avg_dialogue_duration_s: float
    avg_turns_per_dialogue: float
    avg_speakers_per_dialogue: float


@dataclass
class FeatureSampleSpec:
    n_samples: int = 1000
    window_s: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("n_samples must be > 0")
        if self.window_s <= 0:
            raise ValueError("window_s must be > 0")


def compute_subset_stats(dialogues: list[Dialogue], subset: str = "all") -> SubsetStats:
    """Arithmetic-mean statistics over one subset's dialogues."""
    selected = dialogues if subset == "all" else [d for d in dialogues if d.source == subset]
    n = len(selected)
    if n == 0:
        return SubsetStats(subset, 0.0, 0.0, 0, 0.0, 0.0, 0.0)
    spans = [d.span_s for d in selected]
    return SubsetStats(
        subset=subset,
        total_hours=math.fsum(spans) / 3600.0,
        total_speech_hours=math.fsum(d.speech_s for d in selected) / 3600.0,
        num_dialogues=n,
        avg_dialogue_duration_s=math.fsum(spans) / n,
        avg_turns_per_dialogue=sum(len(d.turns) for d in selected) / n,
        avg_speakers_per_dialogue=sum(len(d.speakers) for d in selected) / n,
    )


def stats_report(dialogues: list[Dialogue], subsets: list[str]) -> dict:
    """Per-subset stats plus the cross-subset mean-duration ratio."""
    per_subset = {s: compute_subset_stats(dialogues, s) for s in subsets}
    report = {
        "total": asdict(compute_subset_stats(dialogues, "all")),
        "subsets": {s: asdict(st) for s, st in per_subset.items()},
    }
    present = [s for s in subsets if per_subset[s].num_dialogues > 0]
    if len(present) == 2:
        a, b = present
        da = per_subset[a].avg_dialogue_duration_s
        db = per_subset[b].avg_dialogue_duration_s
        if db > 0:
            report["duration_ratio"] = {"numerator": a, "denominator": b, "ratio": da / db}
    return report


def format_stats_table(report: dict) -> str:
    header = f"{'subset':<10} {'hours':>10} {'dialogues':>10} {'avg dur s':>10} {'avg turns':>10} {'avg spk':>8}"
    lines = [header, "-" * len(header)]
    rows = list(report["subsets"].items()) + [("total", report["total"])]
    for name, st in rows:
        lines.append(
            f"{name:<10} {st['total_hours']:>10.3f} {st['num_dialogues']:>10d} "
            f"{st['avg_dialogue_duration_s']:>10.2f} {st['avg_turns_per_dialogue']:>10.2f} "
            f"{st['avg_speakers_per_dialogue']:>8.2f}")
    return "\n".join(lines)


def sample_frame_features(dialogues: list[Dialogue], spec: FeatureSampleSpec,
                          pool: WorkerPool, output_path: str | Path,
                          work_dir: str | Path) -> tuple[Path, int]:
    """Draw n_samples single-frame feature vectors from random windows.

    Each draw picks a dialogue uniformly among those at least window_s
    long, a window start uniformly within it, requests frame features for
    that window, and keeps one uniformly chosen frame. Output is a flat
    little-endian float32 matrix plus a JSON header sidecar; returns
    (matrix path, feature dim).
    """
    output_path = Path(output_path)
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    eligible = sorted(
        (d for d in dialogues if d.cleansed_path and d.span_s >= spec.window_s),
        key=lambda d: d.dialogue_id,
    )
    if not eligible:
        raise ValueError(
            f"no dialogue of at least {spec.window_s} s available for feature sampling")

    rng = random.Random(spec.seed)
    rows: list[np.ndarray] = []
    dim: int | None = None
    for i in range(spec.n_samples):
        d = eligible[rng.randrange(len(eligible))]
        offset = rng.uniform(0.0, d.span_s - spec.window_s)
        matrix_path = work_dir / f"feat-{i:06d}.f32"
        resp = pool.request("features", d.cleansed_path, {
            "start_s": round(offset, 6),
            "end_s": round(offset + spec.window_s, 6),
            "output_path": str(matrix_path),
        })
        if resp.status != "ok":
            raise RuntimeError(f"features worker failed: {resp.error_message}")
        frames = int(resp.payload["frames"])
        this_dim = int(resp.payload["dim"])
        if dim is None:
            dim = this_dim
        elif dim != this_dim:
            raise RuntimeError(f"worker changed feature dim {dim} -> {this_dim}")
        data = np.fromfile(resp.payload["matrix_path"], dtype="<f4").reshape(frames, this_dim)
        rows.append(data[rng.randrange(frames)])
        matrix_path.unlink(missing_ok=True)

    matrix = np.stack(rows).astype("<f4")
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_bytes(matrix.tobytes())
    header = {
        "rows": spec.n_samples,
        "dim": dim,
        "dtype": "float32-le",
        "window_s": spec.window_s,
        "seed": spec.seed,
    }
    output_path.with_suffix(output_path.suffix + ".json").write_text(
        json.dumps(header, sort_keys=True, indent=2) + "\n")
    return output_path, dim


def pack_le_f32(values: list[float]) -> bytes:
    return struct.pack(f"<{len(values)}f", *values)
