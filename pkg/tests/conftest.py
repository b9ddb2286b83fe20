import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

from jchat.audio import write_wav
from jchat.ingest import doc_id_for

SAMPLE_RATE = 8000

MOCK_WORKER = [sys.executable, "-m", "jchat.workers.mock"]


def make_tone_wav(path: Path, duration_s: float, freq: float = 220.0,
                  rate: int = SAMPLE_RATE) -> None:
    t = np.arange(int(round(duration_s * rate))) / rate
    write_wav(path, (0.3 * np.sin(2 * math.pi * freq * t)).astype(np.float32), rate)


def turn(speaker, start, end):
    return {"speaker": speaker, "start_s": start, "end_s": end}


# Turn patterns with known-by-construction extraction outcomes.
PATTERNS = {
    # one retained two-speaker dialogue
    "conversation": {
        "turns": [turn("A", 0.0, 3.0), turn("B", 3.5, 6.5),
                  turn("A", 7.0, 10.0), turn("B", 10.5, 13.0)],
        "retained_indices": [0],
        "rejected": 0,
    },
    # single speaker -> rejected (dominance 1.0)
    "monologue": {
        "turns": [turn("A", 0.0, 4.0), turn("A", 6.0, 10.0)],
        "retained_indices": [],
        "rejected": 1,
    },
    # one speaker holds 85% of speech time -> rejected
    "dominated": {
        "turns": [turn("A", 0.0, 8.5), turn("B", 8.7, 10.2)],
        "retained_indices": [],
        "rejected": 1,
    },
    # conversation, then a 6 s gap, then a monologue tail
    "two_dialogues": {
        "turns": [turn("A", 0.0, 3.0), turn("B", 3.5, 6.5),
                  turn("A", 7.0, 10.0), turn("B", 10.5, 13.0),
                  turn("A", 19.0, 23.0), turn("A", 23.5, 27.0)],
        "retained_indices": [0],
        "rejected": 1,
    },
    # three balanced speakers -> retained
    "conversation3spk": {
        "turns": [turn("A", 0.0, 2.0), turn("B", 2.5, 4.5),
                  turn("C", 5.0, 7.0), turn("A", 7.5, 9.5)],
        "retained_indices": [0],
        "rejected": 0,
    },
    "empty": {"turns": [], "retained_indices": [], "rejected": 0},
}

# (source, p_target, pattern, special) for the 20-document fixture corpus.
FIXTURE_DOCS = [
    ("youtube", 0.95, "conversation", None),
    ("podcast", 0.95, "conversation", None),
    ("youtube", 0.95, "monologue", None),
    ("podcast", 0.95, "dominated", None),
    ("youtube", 0.95, "two_dialogues", None),
    ("podcast", 0.95, "two_dialogues", None),
    ("youtube", 0.95, "empty", None),
    ("podcast", 0.95, "conversation", None),
    ("youtube", 0.95, "conversation3spk", None),
    ("podcast", 0.95, "conversation", None),
    ("youtube", 0.60, "conversation", None),
    ("podcast", 0.80, "conversation", None),   # exactly at threshold: rejected
    ("youtube", 0.20, "conversation", None),
    ("podcast", 0.95, "dominated", None),
    ("youtube", 0.95, "monologue", None),
    ("podcast", 0.95, "conversation", None),
    ("youtube", 0.95, "conversation", None),
    ("podcast", 0.95, "conversation", None),
    ("youtube", 0.95, "conversation", "missing_file"),
    ("podcast", 0.95, "conversation", "diarize_fail"),
]


class FixtureCorpus:
    def __init__(self, root: Path):
        self.root = root
        self.inventory_path = root / "inventory.jsonl"
        self.audio_dir = root / "audio"
        self.expected_retained: set[str] = set()
        self.doc_ids: list[str] = []

    def build(self):
        self.audio_dir.mkdir(parents=True, exist_ok=True)
        lines = []
        for i, (source, p, pattern_name, special) in enumerate(FIXTURE_DOCS):
            pattern = PATTERNS[pattern_name]
            wav = self.audio_dir / f"doc{i:02d}.wav"
            uri = str(wav)
            doc_id = doc_id_for(uri)
            self.doc_ids.append(doc_id)
            lines.append(json.dumps({"uri": uri, "source": source}))
            if special == "missing_file":
                continue
            duration = (max((t["end_s"] for t in pattern["turns"]), default=3.0)) + 2.0
            make_tone_wav(wav, duration, freq=200.0 + 10 * i)
            Path(uri + ".lid.json").write_text(json.dumps(
                {"probabilities": {"ja": p, "en": round(1 - p, 6)}}))
            Path(uri + ".turns.json").write_text(json.dumps(pattern["turns"]))
            if special == "diarize_fail":
                Path(uri + ".fail.diarize").write_text("")
                continue
            if p > 0.8:
                for idx in pattern["retained_indices"]:
                    self.expected_retained.add(f"{doc_id}_{idx:04d}")
        self.inventory_path.write_text("\n".join(lines) + "\n")
        return self


@pytest.fixture
def fixture_corpus(tmp_path):
    return FixtureCorpus(tmp_path / "corpus").build()


def write_config(path: Path, corpus: FixtureCorpus, workdir: Path, output_dir: Path,
                 num_shards: int = 3, split_counts=(8, 1, 1), n_feature_samples: int = 10):
    def argv(tasks):
        items = ", ".join(f'"{a}"' for a in MOCK_WORKER + ["--tasks", tasks])
        return f"[{items}]"

    path.write_text(f"""
[paths]
inventory = "{corpus.inventory_path}"
workdir = "{workdir}"
output_dir = "{output_dir}"

[pipeline]
num_shards = {num_shards}

[seeds]
split = 42
features = 7

[lid]
target_language = "ja"
threshold = 0.8

[segmentation]
gap_threshold_s = 5.0
dominance_threshold = 0.8
min_speakers = 2

[split]
counts = [{split_counts[0]}, {split_counts[1]}, {split_counts[2]}]

[features]
n_samples = {n_feature_samples}
window_s = 5.0

[workers.lid]
command = {argv("lid")}

[workers.diarize]
command = {argv("diarize")}

[workers.enhance]
command = {argv("enhance")}

[workers.features]
command = {argv("features")}
""")
    return path


@pytest.fixture
def pipeline_config(fixture_corpus, tmp_path):
    from jchat.pipeline import PipelineConfig

    config_path = write_config(tmp_path / "config.toml", fixture_corpus,
                               tmp_path / "work", tmp_path / "release")
    return PipelineConfig.from_toml(config_path)
