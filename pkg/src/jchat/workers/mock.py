"""
Deterministic mock workers for testing, driven by sidecar ground-truth
files next to each audio fixture:

    <audio>.lid.json     {"probabilities": {"ja": 0.93, ...}}
    <audio>.turns.json   [{"speaker": "A", "start_s": 0.0, "end_s": 1.5}, ...]
    <audio>.fail         presence injects an error response for any task
    <audio>.fail.<task>  presence injects an error for one task only

Every handler is a pure function of (audio_path, sidecars, params).
Run as a worker process with: python -m jchat.workers.mock --tasks lid,diarize
"""

from __future__ import annotations

import argparse
import hashlib
import json
import shutil
import struct
import sys
from pathlib import Path

from ..model import DiarizationTurn, sort_turns
from .protocol import ProtocolError, WorkerRequest, WorkerResponse, hello_line

MOCK_FEATURE_DIM = 8
MOCK_FRAMES_PER_SECOND = 50


def mock_lid(audio_path: str) -> dict:
    sidecar = Path(audio_path + ".lid.json")
    if not sidecar.exists():
        raise FileNotFoundError(f"missing LID sidecar {sidecar}")
    data = json.loads(sidecar.read_text())
    return {"probabilities": data["probabilities"]}


def mock_diarize(audio_path: str) -> list[DiarizationTurn]:
    """Return the sidecar's turns in canonical order."""
    sidecar = Path(audio_path + ".turns.json")
    if not sidecar.exists():
        raise FileNotFoundError(f"missing turns sidecar {sidecar}")
    raw = json.loads(sidecar.read_text())
    return sort_turns([DiarizationTurn.from_record(t) for t in raw])


def mock_enhance(audio_path: str, params: dict) -> dict:
    out = params.get("output_path")
    if not out:
        raise ValueError("enhance requires params.output_path")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(audio_path, out)  # identity enhancement
    return {"audio_path": out}


def _mock_frame_value(key: str, frame: int, dim: int) -> float:
    digest = hashlib.sha256(f"{key}:{frame}:{dim}".encode()).digest()
    return struct.unpack("<I", digest[:4])[0] / 0xFFFFFFFF


def mock_features(audio_path: str, params: dict) -> dict:
    start = float(params.get("start_s", 0.0))
    end = float(params.get("end_s", 0.0))
    out = params.get("output_path")
    if not out or end <= start:
        raise ValueError("features requires params.output_path and end_s > start_s")
    frames = max(1, int((end - start) * MOCK_FRAMES_PER_SECOND))
    key = f"{Path(audio_path).name}:{start:.6f}:{end:.6f}"
    values = [
        _mock_frame_value(key, f, d)
        for f in range(frames)
        for d in range(MOCK_FEATURE_DIM)
    ]
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_bytes(struct.pack(f"<{len(values)}f", *values))
    return {"matrix_path": out, "frames": frames, "dim": MOCK_FEATURE_DIM}


def handle_request(req: WorkerRequest) -> WorkerResponse:
    for marker in (req.audio_path + ".fail", f"{req.audio_path}.fail.{req.task}"):
        if Path(marker).exists():
            return WorkerResponse(req.request_id, "error",
                                  error_message="injected failure")
    try:
        if req.task == "lid":
            payload = mock_lid(req.audio_path)
        elif req.task == "diarize":
            payload = {"turns": [t.to_record() for t in mock_diarize(req.audio_path)]}
        elif req.task == "enhance":
            payload = mock_enhance(req.audio_path, req.params)
        elif req.task == "features":
            payload = mock_features(req.audio_path, req.params)
        else:
            return WorkerResponse(req.request_id, "error",
                                  error_message=f"unsupported task {req.task!r}")
    except Exception as e:
        return WorkerResponse(req.request_id, "error", error_message=str(e))
    return WorkerResponse(req.request_id, "ok", payload=payload)


def serve(tasks: list[str], stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    print(hello_line(tasks), file=stdout, flush=True)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = WorkerRequest.from_line(line)
        except ProtocolError as e:
            print(WorkerResponse("?", "error", error_message=str(e)).to_line(),
                  file=stdout, flush=True)
            continue
        if req.task not in tasks:
            resp = WorkerResponse(req.request_id, "error",
                                  error_message=f"task {req.task!r} not served here")
        else:
            resp = handle_request(req)
        print(resp.to_line(), file=stdout, flush=True)


def main(argv=None):
    parser = argparse.ArgumentParser(description="deterministic sidecar-driven mock worker")
    parser.add_argument("--tasks", default="lid,diarize,enhance,features",
                        help="comma-separated tasks to serve")
    args = parser.parse_args(argv)
    serve([t.strip() for t in args.tasks.split(",") if t.strip()])


if __name__ == "__main__":
    main()
