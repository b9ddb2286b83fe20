"""
Shared domain types for the dialogue-corpus pipeline.

All times are decimal seconds with microsecond precision; times are
rounded to 6 decimal places at serialization boundaries. Speaker labels
are local to a single document — no cross-document identity is implied.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# Closed set of pipeline stages, in execution order.
STAGES = ("collect", "lid", "diarize", "segment", "cleanse", "package", "stats")

SOURCES = ("youtube", "podcast", "local")

STAGE_STATUSES = ("pending", "done", "rejected", "failed")

MANIFEST_VERSION = "jchat-manifest/1"


def round_time(t: float) -> float:
    """Clamp a time value to microsecond precision."""
    return round(float(t), 6)


class InvariantError(ValueError):
    """A domain-type invariant was violated."""


@dataclass
class AudioDocument:
    """One collected audio file with provenance and per-stage outcomes."""

    doc_id: str
    source: str
    uri: str
    duration_s: float = 0.0
    sample_rate_hz: int = 0
    channels: int = 0
    stage_status: dict[str, str] = field(default_factory=dict)
    # Optional per-stage payloads carried on the record.
    lid: dict | None = None           # {"probabilities": {...}, "p_target": float}
    turns: list[DiarizationTurn] | None = None
    failure_reason: str | None = None

    def validate(self) -> list[str]:
        problems = []
        if not self.doc_id:
            problems.append("doc_id: must be nonempty")
        if self.source not in SOURCES:
            problems.append(f"source: unknown source {self.source!r}")
        if self.duration_s < 0:
            problems.append("duration_s: must be >= 0")
        if self.sample_rate_hz <= 0:
            problems.append("sample_rate_hz: must be > 0")
        if self.channels <= 0:
            problems.append("channels: must be > 0")
        for stage, status in self.stage_status.items():
            if stage not in STAGES:
                problems.append(f"stage_status: unknown stage {stage!r}")
            elif status not in STAGE_STATUSES:
                problems.append(f"stage_status[{stage}]: unknown status {status!r}")
        # A document rejected/failed at stage k must have no entries for later stages.
        cut = None
        for i, stage in enumerate(STAGES):
            if self.stage_status.get(stage) in ("rejected", "failed"):
                cut = i
                break
        if cut is not None:
            for later in STAGES[cut + 1:]:
                if later in self.stage_status:
                    problems.append(
                        f"stage_status: entry for {later!r} after terminal "
                        f"outcome at {STAGES[cut]!r}"
                    )
        if self.turns is not None:
            problems.extend(validate_turns(self.turns, self.duration_s))
        return problems

    def to_record(self) -> dict:
        rec = {
            "record_type": "document",
            "doc_id": self.doc_id,
            "source": self.source,
            "uri": self.uri,
            "duration_s": round_time(self.duration_s),
            "sample_rate_hz": self.sample_rate_hz,
            "channels": self.channels,
            "stage_status": dict(self.stage_status),
        }
        if self.lid is not None:
            rec["lid"] = self.lid
        if self.turns is not None:
            rec["turns"] = [t.to_record() for t in self.turns]
        if self.failure_reason is not None:
            rec["failure_reason"] = self.failure_reason
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> AudioDocument:
        turns = rec.get("turns")
        return cls(
            doc_id=rec["doc_id"],
            source=rec["source"],
            uri=rec["uri"],
            duration_s=float(rec["duration_s"]),
            sample_rate_hz=int(rec["sample_rate_hz"]),
            channels=int(rec["channels"]),
            stage_status=dict(rec.get("stage_status", {})),
            lid=rec.get("lid"),
            turns=None if turns is None else [DiarizationTurn.from_record(t) for t in turns],
            failure_reason=rec.get("failure_reason"),
        )


@dataclass(frozen=True, order=True)
class DiarizationTurn:
    """A (start, end) speech interval attributed to one document-local speaker.

    Field order gives the canonical sort key: (start_s, end_s, speaker).
    """

    start_s: float
    end_s: float
    speaker: str

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def to_record(self) -> dict:
        return {
            "speaker": self.speaker,
            "start_s": round_time(self.start_s),
            "end_s": round_time(self.end_s),
        }

    @classmethod
    def from_record(cls, rec: dict) -> DiarizationTurn:
        return cls(
            start_s=float(rec["start_s"]),
            end_s=float(rec["end_s"]),
            speaker=str(rec["speaker"]),
        )


def sort_turns(turns: list[DiarizationTurn]) -> list[DiarizationTurn]:
    """Return turns in canonical (start_s, end_s, speaker) order."""
    return sorted(turns)


def validate_turns(turns: list[DiarizationTurn], duration_s: float | None = None) -> list[str]:
    problems = []
    for i, t in enumerate(turns):
        if not (0 <= t.start_s < t.end_s):
            problems.append(f"turns[{i}]: requires 0 <= start_s < end_s, got [{t.start_s}, {t.end_s}]")
        elif duration_s is not None and t.end_s > duration_s + 1e-6:
            problems.append(f"turns[{i}]: end_s {t.end_s} beyond document duration {duration_s}")
        if i > 0 and turns[i - 1] > t:
            problems.append(f"turns[{i}]: not in canonical (start_s, end_s, speaker) order")
    return problems


@dataclass
class Dialogue:
    """A contiguous group of turns bounded by silences of at least the gap threshold."""

    doc_id: str
    dialogue_index: int
    turns: list[DiarizationTurn]
    start_s: float
    end_s: float
    speakers: list[str]                  # sorted speaker labels
    dominance: dict[str, float]
    source: str = "local"
    stage_status: dict[str, str] = field(default_factory=dict)
    cleansed_path: str | None = None
    failure_reason: str | None = None

    @property
    def dialogue_id(self) -> str:
        return f"{self.doc_id}_{self.dialogue_index:04d}"

    @property
    def span_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def speech_s(self) -> float:
        return sum(t.duration_s for t in self.turns)

    def validate(self) -> list[str]:
        problems = []
        if self.dialogue_index < 0:
            problems.append("dialogue_index: must be >= 0")
        if not self.turns:
            problems.append("turns: must be nonempty")
            return problems
        problems.extend(validate_turns(self.turns))
        if abs(self.start_s - min(t.start_s for t in self.turns)) > 1e-9:
            problems.append("start_s: must equal min turn start")
        if abs(self.end_s - max(t.end_s for t in self.turns)) > 1e-9:
            problems.append("end_s: must equal max turn end")
        if sorted(self.speakers) != sorted({t.speaker for t in self.turns}):
            problems.append("speakers: must equal set of turn speakers")
        if self.dominance and abs(sum(self.dominance.values()) - 1.0) > 1e-9:
            problems.append("dominance: values must sum to 1")
        return problems

    def to_record(self) -> dict:
        rec = {
            "record_type": "dialogue",
            "doc_id": self.doc_id,
            "dialogue_index": self.dialogue_index,
            "source": self.source,
            "turns": [t.to_record() for t in self.turns],
            "start_s": round_time(self.start_s),
            "end_s": round_time(self.end_s),
            "speakers": list(self.speakers),
            "dominance": {k: round(v, 9) for k, v in self.dominance.items()},
            "stage_status": dict(self.stage_status),
        }
        if self.cleansed_path is not None:
            rec["cleansed_path"] = self.cleansed_path
        if self.failure_reason is not None:
            rec["failure_reason"] = self.failure_reason
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> Dialogue:
        return cls(
            doc_id=rec["doc_id"],
            dialogue_index=int(rec["dialogue_index"]),
            turns=[DiarizationTurn.from_record(t) for t in rec["turns"]],
            start_s=float(rec["start_s"]),
            end_s=float(rec["end_s"]),
            speakers=list(rec["speakers"]),
            dominance={k: float(v) for k, v in rec["dominance"].items()},
            source=rec.get("source", "local"),
            stage_status=dict(rec.get("stage_status", {})),
            cleansed_path=rec.get("cleansed_path"),
            failure_reason=rec.get("failure_reason"),
        )


@dataclass
class SegmentationConfig:
    """Gap/dominance/speaker-count thresholds for dialogue extraction."""

    gap_threshold_s: float = 5.0
    dominance_threshold: float = 0.8
    min_speakers: int = 2

    def __post_init__(self):
        if self.gap_threshold_s <= 0:
            raise InvariantError("gap_threshold_s must be > 0")
        if not (0 < self.dominance_threshold <= 1):
            raise InvariantError("dominance_threshold must be in (0, 1]")
        if self.min_speakers < 1:
            raise InvariantError("min_speakers must be >= 1")


@dataclass
class LidConfig:
    """Target language and retention threshold for the language filter."""

    target_language: str = "ja"
    threshold: float = 0.8

    def __post_init__(self):
        if not (0 <= self.threshold <= 1):
            raise InvariantError("threshold must be in [0, 1]")


def record_to_object(rec: dict) -> AudioDocument | Dialogue:
    kind = rec.get("record_type")
    if kind == "document":
        return AudioDocument.from_record(rec)
    if kind == "dialogue":
        return Dialogue.from_record(rec)
    raise InvariantError(f"unknown record_type {kind!r}")
