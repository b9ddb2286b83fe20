from __future__ import annotations

from dataclasses import dataclass

TASKS = ("lid", "diarize", "enhance", "features")


@dataclass
class WorkerConfig:
    """Which model serves which task, and how audio is expected."""

    task: str
    backend: str = "reference"        # "reference" or "pretrained"
    model: str = ""                   # pretrained checkpoint id, pinned revision
    revision: str = ""
    device: str = "cpu"
    expected_sample_rate: int = 16000

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.expected_sample_rate <= 0:
            raise ValueError("expected_sample_rate must be positive")
