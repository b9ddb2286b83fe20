import random

import numpy as np
import pytest

from conftest import MOCK_WORKER, make_tone_wav
from jchat.analytics import (
    FeatureSampleSpec,
    compute_subset_stats,
    format_stats_table,
    sample_frame_features,
    stats_report,
)
from jchat.dialogue import split_into_dialogues
from jchat.model import DiarizationTurn, SegmentationConfig, sort_turns
from jchat.workers.pool import WorkerPool


def dialogue(doc_id, triples, source="youtube"):
    turns = sort_turns([DiarizationTurn(s, e, spk) for spk, s, e in triples])
    [d] = split_into_dialogues(turns, SegmentationConfig(gap_threshold_s=1e9),
                               doc_id=doc_id, source=source)
    return d


class TestSubsetStats:
    def test_hand_arithmetic_durations(self):
        ds = [dialogue("a", [("A", 0, 20), ("B", 20, 30)]),          # span 30 s
              dialogue("b", [("A", 5, 50), ("B", 50, 95)])]         # span 90 s
        stats = compute_subset_stats(ds)
        assert stats.total_hours == pytest.approx(120 / 3600, abs=1e-9)
        assert stats.avg_dialogue_duration_s == pytest.approx(60.0)
        assert stats.num_dialogues == 2

    def test_empty_manifest_all_zero(self):
        stats = compute_subset_stats([])
        assert (stats.num_dialogues, stats.total_hours, stats.avg_turns_per_dialogue) == (0, 0.0, 0.0)

    def test_speaker_and_turn_averages(self):
        # dialogues with (2, 3) speakers and (4, 6) turns -> avg 2.5 and 5.0
        d1 = dialogue("a", [("A", 0, 1), ("B", 1, 2), ("A", 2, 3), ("B", 3, 4)])
        d2 = dialogue("b", [("A", 0, 1), ("B", 1, 2), ("C", 2, 3),
                            ("A", 3, 4), ("B", 4, 5), ("C", 5, 6)])
        stats = compute_subset_stats([d1, d2])
        assert stats.avg_speakers_per_dialogue == pytest.approx(2.5)
        assert stats.avg_turns_per_dialogue == pytest.approx(5.0)

    def test_shard_order_invariance_and_additivity(self):
        rng = random.Random(0)
        ds = [dialogue(f"d{i}", [("A", 0, rng.uniform(5, 50)), ("B", 1, 4)])
              for i in range(30)]
        base = compute_subset_stats(ds)
        for _ in range(10):
            shuffled = list(ds)
            rng.shuffle(shuffled)
            again = compute_subset_stats(shuffled)
            assert again == base

    def test_cross_subset_duration_ratio(self):
        ds = [dialogue("y", [("A", 0, 10), ("B", 10, 20)], "youtube"),
              dialogue("p", [("A", 0, 20), ("B", 20, 30)], "podcast")]
        report = stats_report(ds, ["youtube", "podcast"])
        assert report["duration_ratio"]["ratio"] == pytest.approx(20 / 30)
        assert "total_speech_hours" in report["total"]
        assert "youtube" in format_stats_table(report)


@pytest.fixture
def features_pool():
    with WorkerPool({"features": MOCK_WORKER + ["--tasks", "features"]}) as pool:
        yield pool


def cleansed_dialogues(tmp_path, n=3, span=8.0):
    out = []
    for i in range(n):
        wav = tmp_path / f"clean{i}.wav"
        make_tone_wav(wav, span)
        d = dialogue(f"fd{i}", [("A", 0, span / 2), ("B", span / 2, span)])
        d.stage_status["cleanse"] = "done"
        d.cleansed_path = str(wav)
        out.append(d)
    return out


class TestFeatureSampling:
    def test_shape_and_sidecar(self, tmp_path, features_pool):
        ds = cleansed_dialogues(tmp_path)
        spec = FeatureSampleSpec(n_samples=10, window_s=5.0, seed=3)
        path, dim = sample_frame_features(ds, spec, features_pool,
                                          tmp_path / "feats.f32", tmp_path / "tmp")
        matrix = np.fromfile(path, dtype="<f4")
        assert matrix.size == 10 * dim
        import json
        header = json.loads((tmp_path / "feats.f32.json").read_text())
        assert header["rows"] == 10 and header["dim"] == dim

    def test_deterministic_across_runs(self, tmp_path, features_pool):
        ds = cleansed_dialogues(tmp_path)
        spec = FeatureSampleSpec(n_samples=16, window_s=5.0, seed=9)
        p1, _ = sample_frame_features(ds, spec, features_pool,
                                      tmp_path / "m1.f32", tmp_path / "t1")
        p2, _ = sample_frame_features(ds, spec, features_pool,
                                      tmp_path / "m2.f32", tmp_path / "t2")
        assert p1.read_bytes() == p2.read_bytes()

    def test_too_short_dialogues_error(self, tmp_path, features_pool):
        ds = cleansed_dialogues(tmp_path, span=2.0)
        with pytest.raises(ValueError, match="5.0"):
            sample_frame_features(ds, FeatureSampleSpec(n_samples=3, window_s=5.0, seed=1),
                                  features_pool, tmp_path / "m.f32", tmp_path / "t")

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            FeatureSampleSpec(n_samples=0)
        with pytest.raises(ValueError):
            FeatureSampleSpec(window_s=0)
