"""Worker loop: multiply stored rows with ``x`` one at a time until told to stop."""

from dataclasses import dataclass
import logging
import socket
import threading

import numpy as np

from . import protocol
from .storage import read_matrix

log = logging.getLogger(__name__)


@dataclass
class DelayInjection:
    """Sleep ``initial`` seconds (or Exp(``rate``) if given) before work, then ``per_task`` per row."""

    initial: float = 0.0
    per_task: float = 0.0
    rate: float = None
    seed: int = None

    def initial_sleep(self):
        if self.rate is not None:
            return float(np.random.default_rng(self.seed).exponential(1.0 / self.rate))
        return self.initial


@dataclass
class WorkerReport:
    worker_id: int
    sent: int
    assigned: int
    stopped_by_done: bool


def worker_run(rows, start_index, host, port, worker_id, delay=None, retries=5,
               retry_interval=0.2, crash_after=None):
    """Serve one job.

    ``rows`` is the worker's block of encoded rows (array or CMV1 path).  The
    worker announces itself with Setup, waits for Vector, then emits one
    Result per row in ascending encoded-index order, checking for Done
    between rows.  If every row finishes first it sends Progress and idles.
    ``crash_after`` drops the connection after that many Results (fault
    injection for tests).
    """
    if isinstance(rows, (str, bytes)) or hasattr(rows, "__fspath__"):
        rows = read_matrix(rows)
    rows = np.asarray(rows, dtype=np.float64)
    delay = delay or DelayInjection()
    sock = protocol.connect(host, port, retries=retries, interval=retry_interval)
    try:
        protocol.send_message(sock, protocol.Setup(worker_id, rows.shape[0], rows.shape[1]))
        msg = protocol.recv_message(sock)
        if isinstance(msg, (protocol.Done, type(None))):
            return WorkerReport(worker_id, 0, rows.shape[0], True)
        if isinstance(msg, protocol.Error):
            raise ConnectionError(f"master rejected worker {worker_id}: {msg.text}")
        if not isinstance(msg, protocol.Vector):
            raise protocol.ProtocolError(f"expected Vector, got {type(msg).__name__}")
        x = msg.x
        if x.shape[0] != rows.shape[1]:
            raise protocol.ProtocolError(f"vector length {x.shape[0]} != row length {rows.shape[1]}")

        done = threading.Event()
        listener = threading.Thread(target=_listen, args=(sock, done), daemon=True)
        listener.start()

        sent = 0
        if not done.wait(delay.initial_sleep()):
            for j in range(rows.shape[0]):
                if done.wait(delay.per_task) if delay.per_task > 0 else done.is_set():
                    break
                if crash_after is not None and sent >= crash_after:
                    log.info("worker %d: injected crash after %d results", worker_id, sent)
                    sock.shutdown(socket.SHUT_RDWR)
                    return WorkerReport(worker_id, sent, rows.shape[0], False)
                value = float(rows[j] @ x)
                try:
                    protocol.send_message(sock, protocol.Result(start_index + j, value))
                except OSError:
                    break
                sent += 1
            else:
                try:
                    protocol.send_message(sock, protocol.Progress(sent))
                except OSError:
                    pass
        done.wait()
        return WorkerReport(worker_id, sent, rows.shape[0], sent < rows.shape[0])
    finally:
        sock.close()


def _listen(sock, done):
    """Set ``done`` on a Done frame or when the master goes away."""
    try:
        while True:
            msg = protocol.recv_message(sock)
            if msg is None or isinstance(msg, (protocol.Done, protocol.Error)):
                break
    except (OSError, protocol.ProtocolError):
        pass
    done.set()
