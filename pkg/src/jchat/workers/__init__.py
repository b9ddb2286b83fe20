from .protocol import PROTOCOL_NAME, WorkerRequest, WorkerResponse
from .pool import WorkerPool, WorkerHandle

__all__ = ["PROTOCOL_NAME", "WorkerRequest", "WorkerResponse", "WorkerPool", "WorkerHandle"]
