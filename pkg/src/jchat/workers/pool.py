"""
Fixed-size pools of stdio worker subprocesses.

Writes to a worker pipe are serialized; responses are demultiplexed by
request_id so they may arrive in any order. A malformed line quarantines
the worker; a dead worker fails all of its outstanding requests with
"worker_died" and the pipeline moves on.
"""

from __future__ import annotations

import itertools
import logging
import os
import queue
import subprocess
import threading

from .protocol import (
    ProtocolError,
    WorkerRequest,
    WorkerResponse,
    parse_hello,
)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 600.0


class WorkerStartupError(Exception):
    """Worker failed to produce a valid hello line."""


class WorkerHandle:
    """One worker subprocess plus its response-demultiplexing reader thread."""

    def __init__(self, command: list[str], hello_timeout_s: float = 30.0):
        env = dict(os.environ)
        self.proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
            env=env,
        )
        self._write_lock = threading.Lock()
        self._pending_lock = threading.Lock()
        self._pending: dict[str, queue.Queue] = {}
        self._quarantined = False

        hello = self._readline_with_timeout(hello_timeout_s)
        if hello is None:
            self.close()
            raise WorkerStartupError(f"no hello line from {command}")
        self.tasks = parse_hello(hello)

        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _readline_with_timeout(self, timeout_s: float) -> str | None:
        result: list[str] = []

        def read():
            line = self.proc.stdout.readline()
            if line:
                result.append(line)

        t = threading.Thread(target=read, daemon=True)
        t.start()
        t.join(timeout_s)
        return result[0] if result else None

    @property
    def alive(self) -> bool:
        return not self._quarantined and self.proc.poll() is None

    def _read_loop(self):
        for line in self.proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                resp = WorkerResponse.from_line(line)
            except ProtocolError as e:
                log.error("quarantining worker pid=%s: %s", self.proc.pid, e)
                self._quarantined = True
                break
            with self._pending_lock:
                q = self._pending.pop(resp.request_id, None)
            if q is None:
                # Duplicate or unsolicited response: at-most-once application.
                log.warning("dropping duplicate/unknown response id=%s", resp.request_id)
                continue
            q.put(resp)
        self._fail_outstanding("worker_died")

    def _fail_outstanding(self, message: str):
        with self._pending_lock:
            pending, self._pending = self._pending, {}
        for request_id, q in pending.items():
            q.put(WorkerResponse(request_id=request_id, status="error",
                                 error_message=message))

    def send(self, req: WorkerRequest, timeout_s: float = DEFAULT_TIMEOUT_S) -> WorkerResponse:
        if not self.alive:
            return WorkerResponse(request_id=req.request_id, status="error",
                                  error_message="worker_died")
        q: queue.Queue = queue.Queue(maxsize=1)
        with self._pending_lock:
            self._pending[req.request_id] = q
        try:
            with self._write_lock:
                self.proc.stdin.write(req.to_line() + "\n")
                self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self._fail_outstanding("worker_died")
            return WorkerResponse(request_id=req.request_id, status="error",
                                  error_message="worker_died")
        try:
            return q.get(timeout=timeout_s)
        except queue.Empty:
            with self._pending_lock:
                self._pending.pop(req.request_id, None)
            return WorkerResponse(request_id=req.request_id, status="error",
                                  error_message=f"timeout after {timeout_s} s")

    def close(self):
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


class WorkerPool:
    """Per-task fixed-size pools with round-robin dispatch."""

    def __init__(self, commands: dict[str, list[str]], pool_sizes: dict[str, int] | None = None,
                 timeout_s: float = DEFAULT_TIMEOUT_S):
        pool_sizes = pool_sizes or {}
        self.timeout_s = timeout_s
        self._workers: dict[str, list[WorkerHandle]] = {}
        self._counters: dict[str, itertools.count] = {}
        self._id_counter = itertools.count()
        self._id_lock = threading.Lock()
        for task, command in commands.items():
            size = max(1, pool_sizes.get(task, 1))
            handles = [WorkerHandle(command) for _ in range(size)]
            for h in handles:
                if task not in h.tasks:
                    raise WorkerStartupError(
                        f"worker {command} does not advertise task {task!r} (has {h.tasks})")
            self._workers[task] = handles
            self._counters[task] = itertools.count()

    def next_request_id(self) -> str:
        with self._id_lock:
            return f"req-{next(self._id_counter):08d}"

    def request(self, task: str, audio_path: str, params: dict | None = None,
                timeout_s: float | None = None) -> WorkerResponse:
        """Send one request to the task's pool and wait for its response."""
        handles = self._workers.get(task)
        if not handles:
            raise KeyError(f"no worker pool configured for task {task!r}")
        req = WorkerRequest(
            request_id=self.next_request_id(),
            task=task,
            audio_path=audio_path,
            params=params or {},
        )
        idx = next(self._counters[task]) % len(handles)
        # Prefer a live worker if the round-robin pick has died.
        for offset in range(len(handles)):
            handle = handles[(idx + offset) % len(handles)]
            if handle.alive:
                break
        else:
            handle = handles[idx]
        return handle.send(req, timeout_s=timeout_s or self.timeout_s)

    def close(self):
        for handles in self._workers.values():
            for h in handles:
                h.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
