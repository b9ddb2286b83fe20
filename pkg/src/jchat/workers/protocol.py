"""
Line-delimited JSON protocol spoken between the pipeline and inference
workers over subprocess stdio.

One UTF-8 JSON object per newline-terminated line. A worker announces
itself with a hello line {"protocol": "jchat-worker/1", "tasks": [...]}
before serving requests. Audio always moves by filesystem path, never
inline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

PROTOCOL_NAME = "jchat-worker/1"

TASKS = ("lid", "diarize", "enhance", "features")


class ProtocolError(Exception):
    """A line on the wire violated the protocol."""


@dataclass
class WorkerRequest:
    request_id: str
    task: str
    audio_path: str
    params: dict = field(default_factory=dict)

    def to_line(self) -> str:
        return json.dumps({
            "request_id": self.request_id,
            "task": self.task,
            "audio_path": self.audio_path,
            "params": self.params,
        }, sort_keys=True)

    @classmethod
    def from_line(cls, line: str) -> WorkerRequest:
        obj = _parse_line(line)
        for key in ("request_id", "task", "audio_path"):
            if key not in obj:
                raise ProtocolError(f"request missing field {key!r}")
        if obj["task"] not in TASKS:
            raise ProtocolError(f"unknown task {obj['task']!r}")
        return cls(
            request_id=obj["request_id"],
            task=obj["task"],
            audio_path=obj["audio_path"],
            params=obj.get("params", {}),
        )


@dataclass
class WorkerResponse:
    request_id: str
    status: str  # "ok" | "error"
    payload: dict = field(default_factory=dict)
    error_message: str = ""

    def to_line(self) -> str:
        obj = {"request_id": self.request_id, "status": self.status, "payload": self.payload}
        if self.status == "error":
            obj["error_message"] = self.error_message
        return json.dumps(obj, sort_keys=True)

    @classmethod
    def from_line(cls, line: str) -> WorkerResponse:
        obj = _parse_line(line)
        if "request_id" not in obj or obj.get("status") not in ("ok", "error"):
            raise ProtocolError(f"malformed response line: {line!r}")
        return cls(
            request_id=obj["request_id"],
            status=obj["status"],
            payload=obj.get("payload", {}),
            error_message=obj.get("error_message", ""),
        )


def hello_line(tasks: list[str]) -> str:
    return json.dumps({"protocol": PROTOCOL_NAME, "tasks": list(tasks)}, sort_keys=True)


def parse_hello(line: str) -> list[str]:
    obj = _parse_line(line)
    if obj.get("protocol") != PROTOCOL_NAME:
        raise ProtocolError(f"unexpected protocol {obj.get('protocol')!r}")
    tasks = obj.get("tasks")
    if not isinstance(tasks, list):
        raise ProtocolError("hello line missing tasks list")
    return [str(t) for t in tasks]


def _parse_line(line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"not valid JSON: {line!r}") from e
    if not isinstance(obj, dict):
        raise ProtocolError(f"expected a JSON object, got {type(obj).__name__}")
    return obj
