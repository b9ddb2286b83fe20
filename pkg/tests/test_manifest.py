import itertools
import json

import pytest

from jchat.manifest import (
    CorpusManifest,
    ManifestError,
    read_shard,
    validate_manifest,
    write_shard,
    write_sharded,
)
from jchat.model import AudioDocument, DiarizationTurn, Dialogue


def doc(doc_id, **over):
    base = dict(doc_id=doc_id, source="local", uri=f"/tmp/{doc_id}.wav",
                duration_s=5.0, sample_rate_hz=16000, channels=1,
                stage_status={"collect": "done"})
    base.update(over)
    return AudioDocument(**base)


def test_well_formed_manifest_has_empty_report(tmp_path):
    write_shard(tmp_path / "shard-0000.jsonl", [doc("a"), doc("b")])
    assert validate_manifest(CorpusManifest.from_dir(tmp_path)) == []


def test_reversed_turn_reported_as_ordering_violation(tmp_path):
    bad = doc("a", turns=[DiarizationTurn(5.0, 2.0, "X")])
    write_shard(tmp_path / "shard-0000.jsonl", [bad])
    report = validate_manifest(CorpusManifest.from_dir(tmp_path))
    assert len(report) == 1
    assert "start_s < end_s" in report[0].rule


def test_duplicate_doc_id_across_shards(tmp_path):
    write_shard(tmp_path / "shard-0000.jsonl", [doc("dup")])
    write_shard(tmp_path / "shard-0001.jsonl", [doc("dup")])
    report = validate_manifest(CorpusManifest.from_dir(tmp_path))
    # Oracle: a set-membership scan over all records finds exactly one repeat.
    assert [v.rule for v in report] == ["duplicate doc_id in manifest"]


def test_malformed_json_line_names_line_number(tmp_path):
    p = tmp_path / "shard-0000.jsonl"
    write_shard(p, [doc("a")])
    p.write_text(p.read_text() + "{not json\n")
    with pytest.raises(ManifestError, match=":3"):
        read_shard(p)


def test_unreadable_shard_names_the_shard(tmp_path):
    with pytest.raises(ManifestError, match="missing"):
        read_shard(tmp_path / "missing-shard.jsonl")


def test_roundtrip_through_shard_file(tmp_path):
    d = Dialogue(doc_id="x", dialogue_index=0,
                 turns=[DiarizationTurn(0.0, 1.0, "A"), DiarizationTurn(1.5, 2.5, "B")],
                 start_s=0.0, end_s=2.5, speakers=["A", "B"],
                 dominance={"A": 0.5, "B": 0.5})
    records = [doc("a"), d]
    write_shard(tmp_path / "shard-0000.jsonl", records)
    back = read_shard(tmp_path / "shard-0000.jsonl")
    assert back == records


def test_validation_is_shard_order_insensitive(tmp_path):
    docs = [doc("a"), doc("b", duration_s=-2), doc("c", sample_rate_hz=0)]
    reports = []
    for i, perm in enumerate(itertools.permutations(docs)):
        d = tmp_path / f"case{i}"
        for j, rec in enumerate(perm):
            write_shard(d / f"shard-{j:04d}.jsonl", [rec])
        reports.append([str(v) for v in validate_manifest(CorpusManifest.from_dir(d))])
    assert all(r == reports[0] for r in reports)
    assert len(reports[0]) == 2


def test_write_sharded_respects_shard_size(tmp_path):
    records = [doc(f"d{i}") for i in range(7)]
    paths = write_sharded(tmp_path, records, shard_size=3)
    assert [p.name for p in paths] == ["shard-0000.jsonl", "shard-0001.jsonl", "shard-0002.jsonl"]
    assert sum(len(read_shard(p)) for p in paths) == 7


def test_header_carries_schema_version(tmp_path):
    write_shard(tmp_path / "shard-0000.jsonl", [])
    first = (tmp_path / "shard-0000.jsonl").read_text().splitlines()[0]
    assert json.loads(first)["manifest_version"] == "jchat-manifest/1"


def test_unsupported_version_rejected(tmp_path):
    p = tmp_path / "shard-0000.jsonl"
    p.write_text(json.dumps({"record_type": "header", "manifest_version": "jchat-manifest/99"}) + "\n")
    with pytest.raises(ManifestError, match="version"):
        read_shard(p)
