"""Master/worker execution of coded matrix-vector products over TCP."""

from .master import Master, RunReport, master_run
from .storage import JobManifest, encode_and_stage, read_matrix, write_matrix
from .worker import DelayInjection, WorkerReport, worker_run

__all__ = [
    "Master", "RunReport", "master_run", "JobManifest", "encode_and_stage",
    "read_matrix", "write_matrix", "DelayInjection", "WorkerReport", "worker_run",
]
