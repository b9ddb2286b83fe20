"""
Worker entry point: loads one task backend and serves requests over
stdio per protocol jchat-worker/1.

On backend load failure the worker still emits a hello line (with an
empty task list) and exits with status 3 so the pool can tell "broken
worker" from "no worker". Per-request failures produce status=error
responses and the process stays alive. Set JCHAT_WORKER_LOG to a path
for worker-side logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from jchat.workers.protocol import (
    ProtocolError,
    WorkerRequest,
    WorkerResponse,
    hello_line,
)

from .backends import load_backend
from .config import WorkerConfig

log = logging.getLogger("jchat_workers")


def setup_logging():
    log_path = os.environ.get("JCHAT_WORKER_LOG")
    if log_path:
        logging.basicConfig(filename=log_path, level=logging.INFO,
                            format="%(asctime)s %(levelname)s %(message)s")
    else:
        logging.basicConfig(stream=sys.stderr, level=logging.WARNING)


def serve(config: WorkerConfig, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    try:
        backend = load_backend(config)
    except Exception as e:
        log.error("backend load failed: %s", e)
        print(hello_line([]), file=stdout, flush=True)
        return 3
    print(hello_line([config.task]), file=stdout, flush=True)
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
        if req.task != config.task:
            resp = WorkerResponse(req.request_id, "error",
                                  error_message=f"task {req.task!r} not served here")
        elif not Path(req.audio_path).exists():
            resp = WorkerResponse(req.request_id, "error",
                                  error_message=f"audio file not found: {req.audio_path}")
        else:
            try:
                resp = WorkerResponse(req.request_id, "ok",
                                      payload=backend.handle(req.audio_path, req.params))
            except Exception as e:
                log.exception("request %s failed", req.request_id)
                resp = WorkerResponse(req.request_id, "error", error_message=str(e))
        print(resp.to_line(), file=stdout, flush=True)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="jchat inference worker")
    parser.add_argument("--task", required=True,
                        choices=["lid", "diarize", "enhance", "features"])
    parser.add_argument("--backend", default="reference",
                        choices=["reference", "pretrained"])
    parser.add_argument("--model", default="", help="pretrained checkpoint id")
    parser.add_argument("--revision", default="", help="pinned checkpoint revision")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--sample-rate", type=int, default=16000)
    args = parser.parse_args(argv)
    setup_logging()
    config = WorkerConfig(task=args.task, backend=args.backend, model=args.model,
                          revision=args.revision, device=args.device,
                          expected_sample_rate=args.sample_rate)
    return serve(config)


if __name__ == "__main__":
    sys.exit(main())
