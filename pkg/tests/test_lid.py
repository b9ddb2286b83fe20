import random

import pytest
from hypothesis import given, strategies as st

from jchat.lid import (
    LanguageIdResult,
    MissingLidResult,
    filter_by_language,
    lid_yield_report,
)
from jchat.model import AudioDocument, LidConfig


def doc(doc_id, source="youtube"):
    return AudioDocument(doc_id=doc_id, source=source, uri=f"/tmp/{doc_id}.wav",
                         duration_s=10.0, sample_rate_hz=16000, channels=1,
                         stage_status={"collect": "done"})


def result(doc_id, p):
    return LanguageIdResult(doc_id=doc_id, probabilities={"ja": p, "en": 1 - p},
                            target_language="ja")


def run_filter(probs, threshold=0.8):
    docs = [doc(f"d{i}") for i in range(len(probs))]
    results = {d.doc_id: result(d.doc_id, p) for d, p in zip(docs, probs)}
    return docs, filter_by_language(docs, results, LidConfig(threshold=threshold))


class TestFilterByLanguage:
    def test_above_threshold_retained(self):
        _, part = run_filter([0.95])
        assert len(part.retained) == 1 and not part.rejected

    def test_exactly_at_threshold_rejected(self):
        # "exceed" is strict: p == threshold does not pass.
        _, part = run_filter([0.8])
        assert not part.retained and len(part.rejected) == 1

    def test_large_batch_matches_scan_oracle(self):
        rng = random.Random(123)
        probs = [round(rng.random(), 3) for _ in range(1000)]
        docs, part = run_filter(probs)
        oracle = {d.doc_id for d, p in zip(docs, probs) if p > 0.8}
        assert {d.doc_id for d in part.retained} == oracle

    def test_missing_result_is_an_error_not_a_rejection(self):
        d = doc("lonely")
        with pytest.raises(MissingLidResult, match="lonely"):
            filter_by_language([d], {}, LidConfig())

    def test_partition_preserves_order_and_is_exact(self):
        docs, part = run_filter([0.9, 0.1, 0.85, 0.5])
        assert [d.doc_id for d in part.retained] == ["d0", "d2"]
        assert [d.doc_id for d in part.rejected] == ["d1", "d3"]
        assert [d.stage_status["lid"] for d in docs] == ["done", "rejected", "done", "rejected"]

    @given(st.lists(st.floats(min_value=0, max_value=1, allow_nan=False), max_size=30),
           st.floats(min_value=0, max_value=1, allow_nan=False),
           st.floats(min_value=0, max_value=1, allow_nan=False))
    def test_monotonicity_in_threshold(self, probs, t1, t2):
        lo, hi = min(t1, t2), max(t1, t2)
        _, part_lo = run_filter(probs, threshold=lo)
        _, part_hi = run_filter(probs, threshold=hi)
        assert {d.doc_id for d in part_hi.retained} <= {d.doc_id for d in part_lo.retained}

    def test_retained_set_is_permutation_invariant(self):
        rng = random.Random(7)
        probs = [round(rng.random(), 3) for _ in range(50)]
        docs = [doc(f"d{i}") for i in range(50)]
        results = {d.doc_id: result(d.doc_id, p) for d, p in zip(docs, probs)}
        part1 = filter_by_language(list(docs), results, LidConfig())
        shuffled = list(docs)
        rng.shuffle(shuffled)
        part2 = filter_by_language(shuffled, results, LidConfig())
        assert {d.doc_id for d in part1.retained} == {d.doc_id for d in part2.retained}


class TestYieldReport:
    def test_five_of_nine(self):
        docs = [doc(f"d{i}", "youtube") for i in range(9)]
        probs = [0.9] * 5 + [0.1] * 4
        results = {d.doc_id: result(d.doc_id, p) for d, p in zip(docs, probs)}
        report = lid_yield_report(filter_by_language(docs, results, LidConfig()))
        assert report["youtube"]["percent"] == "55.6%"   # 5/9 by hand
        assert report["youtube"]["fraction"] == [5, 9]

    def test_all_retained(self):
        docs = [doc("a", "podcast")]
        results = {"a": result("a", 0.99)}
        report = lid_yield_report(filter_by_language(docs, results, LidConfig()))
        assert report["podcast"]["percent"] == "100.0%"

    def test_absent_source_not_reported(self):
        docs = [doc("a", "podcast")]
        results = {"a": result("a", 0.99)}
        report = lid_yield_report(filter_by_language(docs, results, LidConfig()))
        assert "youtube" not in report


def test_language_id_result_validation():
    bad = LanguageIdResult("d", {"ja": 1.5}, "ja")
    assert bad.validate()
    ok = LanguageIdResult("d", {"ja": 0.7, "en": 0.3}, "ja")
    assert ok.validate() == []
    assert ok.p_target == 0.7
    assert LanguageIdResult("d", {"en": 1.0}, "ja").p_target == 0.0
