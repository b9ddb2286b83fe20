"""
Sharded JSONL manifest: the pipeline's durable state.

Each shard is a JSON Lines file whose first line is a header carrying the
schema version. Shards are written atomically (temp file + rename) so a
crashed stage never leaves a half-written shard behind.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .model import (
    MANIFEST_VERSION,
    AudioDocument,
    Dialogue,
    record_to_object,
)

DEFAULT_SHARD_SIZE = 100_000


class ManifestError(Exception):
    """Unreadable or malformed manifest shard."""


@dataclass
class Violation:
    record_id: str
    field: str
    rule: str

    def __str__(self):
        return f"{self.record_id}: {self.field}: {self.rule}"


def write_shard(path: str | Path, records: list[AudioDocument | Dialogue]) -> str:
    """Write one shard atomically; returns the shard's content hash."""
    import hashlib

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps({"record_type": "header", "manifest_version": MANIFEST_VERSION},
                        sort_keys=True)]
    for rec in records:
        lines.append(json.dumps(rec.to_record(), sort_keys=True))
    data = ("\n".join(lines) + "\n").encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return hashlib.sha256(data).hexdigest()


def read_shard(path: str | Path) -> list[AudioDocument | Dialogue]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"unreadable shard {path}: {e}") from e
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ManifestError(f"{path}:{lineno}: malformed JSON line: {e}") from e
        if rec.get("record_type") == "header":
            version = rec.get("manifest_version")
            if version != MANIFEST_VERSION:
                raise ManifestError(f"{path}:{lineno}: unsupported manifest version {version!r}")
            continue
        out.append(record_to_object(rec))
    return out


@dataclass
class CorpusManifest:
    """An ordered collection of shard files read as one logical manifest."""

    shard_paths: list[Path] = field(default_factory=list)
    manifest_version: str = MANIFEST_VERSION

    @classmethod
    def from_dir(cls, directory: str | Path) -> CorpusManifest:
        paths = sorted(Path(directory).glob("shard-*.jsonl"))
        return cls(shard_paths=paths)

    def records(self) -> list[AudioDocument | Dialogue]:
        out = []
        for p in self.shard_paths:
            out.extend(read_shard(p))
        return out

    def documents(self) -> list[AudioDocument]:
        return [r for r in self.records() if isinstance(r, AudioDocument)]

    def dialogues(self) -> list[Dialogue]:
        return [r for r in self.records() if isinstance(r, Dialogue)]


def write_sharded(directory: str | Path,
                  records: list[AudioDocument | Dialogue],
                  shard_size: int = DEFAULT_SHARD_SIZE) -> list[Path]:
    """Split records into shards of at most shard_size and write them all."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    chunks = [records[i:i + shard_size] for i in range(0, len(records), shard_size)] or [[]]
    paths = []
    for i, chunk in enumerate(chunks):
        p = directory / f"shard-{i:04d}.jsonl"
        write_shard(p, chunk)
        paths.append(p)
    return paths


def validate_manifest(manifest: CorpusManifest) -> list[Violation]:
    """Check every record's type invariants plus cross-shard doc_id uniqueness.

    The violation set is independent of shard ordering.
    """
    violations = []
    seen_docs: set[str] = set()
    seen_dialogues: set[str] = set()
    for rec in manifest.records():
        if isinstance(rec, AudioDocument):
            if rec.doc_id in seen_docs:
                violations.append(Violation(rec.doc_id, "doc_id", "duplicate doc_id in manifest"))
            seen_docs.add(rec.doc_id)
            for problem in rec.validate():
                fieldname, _, rule = problem.partition(": ")
                violations.append(Violation(rec.doc_id, fieldname, rule))
        else:
            key = rec.dialogue_id
            if key in seen_dialogues:
                violations.append(Violation(key, "dialogue_index",
                                            "duplicate (doc_id, dialogue_index) in manifest"))
            seen_dialogues.add(key)
            for problem in rec.validate():
                fieldname, _, rule = problem.partition(": ")
                violations.append(Violation(key, fieldname, rule))
    violations.sort(key=lambda v: (v.record_id, v.field, v.rule))
    return violations
