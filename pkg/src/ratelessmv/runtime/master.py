"""Master: broadcast ``x``, collect streamed products, decode, then broadcast Done."""

from dataclasses import dataclass, field
import logging
import queue
import socket
import threading
import time

import numpy as np

from .. import strategies
from ..exceptions import JobFailureError, SetupFailureError
from ..ltcode import DecoderState
from . import protocol

log = logging.getLogger(__name__)

_EOF = object()


@dataclass
class RunReport:
    strategy: str
    decode_time: float
    results_used: int
    results_received: int
    per_worker: list
    disconnected: list = field(default_factory=list)
    decoded_count: int = 0

    def as_rows(self):
        rows = [("strategy", self.strategy), ("decode_time_s", f"{self.decode_time:.6f}"),
                ("results_used", self.results_used), ("results_received", self.results_received),
                ("decoded_count", self.decoded_count)]
        rows += [(f"worker_{w}_results", c) for w, c in enumerate(self.per_worker)]
        return rows


class _LTAssembler:
    def __init__(self, manifest):
        self.decoder = DecoderState(manifest.encoding_graph())

    def add(self, worker, index, value):
        if not self.decoder.complete:
            self.decoder.ingest(index, value)

    @property
    def complete(self):
        return self.decoder.complete

    @property
    def used(self):
        return self.decoder.received

    @property
    def progress(self):
        return self.decoder.decoded_count

    def result(self):
        return self.decoder.result()


class _BlockAssembler:
    """Collect whole blocks; replication keeps the first replica, MDS any k blocks."""

    def __init__(self, manifest):
        self.manifest = manifest
        spec = manifest.spec
        self.mds = spec.variant == strategies.MDS
        self.needed = spec.k if self.mds else spec.p // spec.replicas
        self.G = manifest.generator() if self.mds else None
        self.partial = [dict() for _ in manifest.workers]
        self.blocks = {}

    def add(self, worker, index, value):
        entry = self.manifest.workers[worker]
        if self.complete or entry.block in self.blocks:
            return
        self.partial[worker][index - entry.start_index] = value
        if len(self.partial[worker]) == entry.count:
            self.blocks[entry.block] = np.array([self.partial[worker][j] for j in range(entry.count)])

    @property
    def complete(self):
        return len(self.blocks) >= self.needed

    @property
    def used(self):
        return sum(len(v) for v in self.blocks.values())

    @property
    def progress(self):
        return len(self.blocks)

    def result(self):
        if self.mds:
            ids = sorted(self.blocks)[: self.needed]
            return strategies.mds_decode([self.blocks[b] for b in ids], ids, self.G)
        return strategies.replication_decode(self.blocks)


class Master:
    """Listen for the manifest's workers and run one job over them."""

    def __init__(self, manifest, host="127.0.0.1", port=0, setup_timeout=30.0, job_timeout=300.0):
        self.manifest = manifest
        self.setup_timeout = setup_timeout
        self.job_timeout = job_timeout
        self._server = socket.create_server((host, port))
        self._server.listen(manifest.p)
        self.address = self._server.getsockname()[:2]
        self._conns = {}

    def close(self):
        for sock in self._conns.values():
            try:
                sock.close()
            except OSError:
                pass
        self._server.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _accept_workers(self):
        deadline = time.monotonic() + self.setup_timeout
        p = self.manifest.p
        while len(self._conns) < p:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise SetupFailureError(f"only {len(self._conns)} of {p} workers connected")
            self._server.settimeout(remaining)
            try:
                sock, _ = self._server.accept()
            except socket.timeout as exc:
                raise SetupFailureError(f"only {len(self._conns)} of {p} workers connected") from exc
            sock.settimeout(self.setup_timeout)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            msg = protocol.recv_message(sock)
            problem = self._check_setup(msg)
            if problem:
                protocol.send_message(sock, protocol.Error(problem))
                sock.close()
                raise SetupFailureError(problem)
            sock.settimeout(None)
            self._conns[msg.worker_id] = sock

    def _check_setup(self, msg):
        if not isinstance(msg, protocol.Setup):
            return f"expected Setup, got {type(msg).__name__}"
        if not 0 <= msg.worker_id < self.manifest.p:
            return f"unknown worker id {msg.worker_id}"
        if msg.worker_id in self._conns:
            return f"duplicate worker id {msg.worker_id}"
        entry = self.manifest.workers[msg.worker_id]
        if msg.m != entry.count or msg.n != self.manifest.n:
            return (f"worker {msg.worker_id} holds {msg.m}x{msg.n}, manifest expects "
                    f"{entry.count}x{self.manifest.n}")
        return None

    def run(self, x):
        """Compute ``A @ x``; returns ``(b, RunReport)``."""
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.manifest.n:
            raise SetupFailureError(f"x has length {x.shape[0]}, matrix has {self.manifest.n} columns")
        self._accept_workers()
        manifest = self.manifest
        spec = manifest.spec
        assembler = _LTAssembler(manifest) if spec.variant == strategies.LT else _BlockAssembler(manifest)

        inbox = queue.Queue()
        readers = [threading.Thread(target=_reader, args=(w, s, inbox), daemon=True)
                   for w, s in self._conns.items()]
        for t in readers:
            t.start()

        started = time.monotonic()
        for sock in self._conns.values():
            protocol.send_message(sock, protocol.Vector(x))

        per_worker = [0] * manifest.p
        finished = set()
        dead = []
        seen = set()
        received = 0
        deadline = started + self.job_timeout
        try:
            while not assembler.complete:
                live = [w for w in range(manifest.p) if w not in finished and w not in dead]
                if not live:
                    raise JobFailureError(
                        "every worker has finished or disconnected before decoding completed",
                        self._report(spec, started, assembler, received, per_worker, dead),
                    )
                try:
                    w, msg = inbox.get(timeout=max(deadline - time.monotonic(), 0.0))
                except queue.Empty:
                    raise JobFailureError("job timed out",
                                          self._report(spec, started, assembler, received,
                                                       per_worker, dead)) from None
                if msg is _EOF:
                    if w not in finished:
                        log.warning("worker %d disconnected after %d results", w, per_worker[w])
                        dead.append(w)
                    continue
                if isinstance(msg, protocol.Result):
                    entry = manifest.workers[w]
                    if not entry.start_index <= msg.encoded_index < entry.start_index + entry.count:
                        log.warning("worker %d sent out-of-block index %d", w, msg.encoded_index)
                        continue
                    key = (w, msg.encoded_index)
                    if key in seen:
                        continue
                    seen.add(key)
                    received += 1
                    per_worker[w] += 1
                    assembler.add(w, msg.encoded_index, msg.value)
                    if per_worker[w] == entry.count:
                        finished.add(w)
                elif isinstance(msg, protocol.Progress):
                    if msg.count >= manifest.workers[w].count:
                        finished.add(w)
                elif isinstance(msg, protocol.Error):
                    log.warning("worker %d reported: %s", w, msg.text)
                    dead.append(w)
            b = assembler.result()
            report = self._report(spec, started, assembler, received, per_worker, dead)
        finally:
            self._broadcast_done()
        return b, report

    def _report(self, spec, started, assembler, received, per_worker, dead):
        return RunReport(strategy=spec.variant, decode_time=time.monotonic() - started,
                         results_used=assembler.used, results_received=received,
                         per_worker=list(per_worker), disconnected=list(dead),
                         decoded_count=assembler.progress)

    def _broadcast_done(self):
        for sock in self._conns.values():
            try:
                protocol.send_message(sock, protocol.Done())
            except OSError:
                pass
        for sock in self._conns.values():
            try:
                sock.shutdown(socket.SHUT_WR)
            except OSError:
                pass


def _reader(worker, sock, inbox):
    try:
        while True:
            msg = protocol.recv_message(sock)
            if msg is None:
                break
            inbox.put((worker, msg))
    except (OSError, protocol.ProtocolError):
        pass
    inbox.put((worker, _EOF))


def master_run(x, manifest, host="127.0.0.1", port=0, **kwargs):
    with Master(manifest, host, port, **kwargs) as master:
        return master.run(x)
