"""
Dialogue extraction: gap-based splitting of diarization turns and
monologue filtering.

Splitting closes a dialogue whenever the next turn starts at least
gap_threshold_s after the rolling maximum end seen so far (a contained
short turn cannot fabricate a gap). A dialogue is rejected when one
speaker's share of total speech time strictly exceeds the dominance
threshold, or when it has fewer distinct speakers than required.
Overlapping turns credit every overlapping speaker in full.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    AudioDocument,
    DiarizationTurn,
    Dialogue,
    SegmentationConfig,
    validate_turns,
)


@dataclass
class DominanceReport:
    speaking_time_s: dict[str, float]
    total_speech_s: float
    max_speaker: str
    max_ratio: float


@dataclass
class RejectedDialogue:
    dialogue: Dialogue
    reason: str  # "dominance" | "too_few_speakers"


def _make_dialogue(doc_id: str, index: int, turns: list[DiarizationTurn],
                   source: str = "local") -> Dialogue:
    report = _dominance_of_turns(turns)
    ratios = {s: t / report.total_speech_s for s, t in report.speaking_time_s.items()}
    return Dialogue(
        doc_id=doc_id,
        dialogue_index=index,
        turns=list(turns),
        start_s=min(t.start_s for t in turns),
        end_s=max(t.end_s for t in turns),
        speakers=sorted({t.speaker for t in turns}),
        dominance=ratios,
        source=source,
    )


def split_into_dialogues(turns: list[DiarizationTurn],
                         config: SegmentationConfig,
                         doc_id: str = "",
                         source: str = "local") -> list[Dialogue]:
    """Split sorted turns into dialogues at silences >= gap_threshold_s."""
    if sorted(turns) != list(turns):
        raise ValueError("turns must be in canonical sorted order")
    problems = validate_turns(turns)
    if problems:
        raise ValueError("invalid turns: " + "; ".join(problems))
    if not turns:
        return []

    dialogues = []
    current = [turns[0]]
    rolling_end = turns[0].end_s
    for turn in turns[1:]:
        if turn.start_s - rolling_end >= config.gap_threshold_s:
            dialogues.append(_make_dialogue(doc_id, len(dialogues), current, source))
            current = [turn]
            rolling_end = turn.end_s
        else:
            current.append(turn)
            rolling_end = max(rolling_end, turn.end_s)
    dialogues.append(_make_dialogue(doc_id, len(dialogues), current, source))
    return dialogues


def _dominance_of_turns(turns: list[DiarizationTurn]) -> DominanceReport:
    speaking: dict[str, float] = {}
    for t in turns:
        speaking[t.speaker] = speaking.get(t.speaker, 0.0) + t.duration_s
    total = sum(speaking.values())
    # Largest share, ties broken lexicographically by speaker label.
    max_speaker = min(speaking, key=lambda s: (-speaking[s], s))
    return DominanceReport(
        speaking_time_s=speaking,
        total_speech_s=total,
        max_speaker=max_speaker,
        max_ratio=speaking[max_speaker] / total,
    )


def speaker_dominance(dialogue: Dialogue) -> DominanceReport:
    """Per-speaker speaking time and the dominant speaker's share."""
    if not dialogue.turns:
        raise ValueError("dialogue has no turns")
    return _dominance_of_turns(dialogue.turns)


def filter_valid_dialogues(dialogues: list[Dialogue], config: SegmentationConfig,
                           ) -> tuple[list[Dialogue], list[RejectedDialogue]]:
    """Partition dialogues into retained and rejected-with-reason.

    Rejection reasons are checked in a fixed order: dominance first, then
    speaker count, so a single-speaker dialogue reports "dominance".
    """
    retained, rejected = [], []
    for d in dialogues:
        report = speaker_dominance(d)
        if report.max_ratio > config.dominance_threshold:
            rejected.append(RejectedDialogue(d, "dominance"))
        elif len(d.speakers) < config.min_speakers:
            rejected.append(RejectedDialogue(d, "too_few_speakers"))
        else:
            retained.append(d)
    return retained, rejected


def extract_dialogues(doc: AudioDocument, turns: list[DiarizationTurn],
                      config: SegmentationConfig,
                      ) -> tuple[list[Dialogue], list[RejectedDialogue]]:
    """Full per-document extraction: split, then filter; marks the segment stage."""
    dialogues = split_into_dialogues(sort_if_needed(turns), config,
                                     doc_id=doc.doc_id, source=doc.source)
    retained, rejected = filter_valid_dialogues(dialogues, config)
    doc.stage_status["segment"] = "done"
    for d in retained:
        d.stage_status["segment"] = "done"
    for r in rejected:
        r.dialogue.stage_status["segment"] = "rejected"
        r.dialogue.failure_reason = r.reason
    return retained, rejected


def sort_if_needed(turns: list[DiarizationTurn]) -> list[DiarizationTurn]:
    return turns if sorted(turns) == list(turns) else sorted(turns)
