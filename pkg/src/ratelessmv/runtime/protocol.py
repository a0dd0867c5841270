"""Length-prefixed binary frames exchanged between master and workers.

Frame layout: ``<u32 payload length><u8 type><payload>``, all little-endian.
The length counts payload bytes only (not the type byte).
"""

from dataclasses import dataclass, field
import socket
import struct
import time

import numpy as np

SETUP = 0x01
VECTOR = 0x02
RESULT = 0x03
PROGRESS = 0x04
DONE = 0x05
ERROR = 0x06

_HEADER = struct.Struct("<IB")
_SETUP = struct.Struct("<IQQ")
_RESULT = struct.Struct("<Qd")
_U64 = struct.Struct("<Q")
_U32 = struct.Struct("<I")


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class Setup:
    worker_id: int
    m: int
    n: int


@dataclass(frozen=True, eq=False)
class Vector:
    x: np.ndarray = field(repr=False)

    def __eq__(self, other):
        # bitwise comparison so NaN payloads still compare equal
        return isinstance(other, Vector) and _f64_bytes(self.x) == _f64_bytes(other.x)


@dataclass(frozen=True, eq=False)
class Result:
    encoded_index: int
    value: float

    def __eq__(self, other):
        return (isinstance(other, Result) and self.encoded_index == other.encoded_index
                and struct.pack("<d", self.value) == struct.pack("<d", other.value))


@dataclass(frozen=True)
class Progress:
    count: int


@dataclass(frozen=True)
class Done:
    pass


@dataclass(frozen=True)
class Error:
    text: str


def _f64_bytes(x):
    return np.ascontiguousarray(x, dtype="<f8").tobytes()


def encode(msg):
    """Serialize a message to a complete frame."""
    if isinstance(msg, Setup):
        kind, payload = SETUP, _SETUP.pack(msg.worker_id, msg.m, msg.n)
    elif isinstance(msg, Vector):
        x = np.asarray(msg.x).reshape(-1)
        kind, payload = VECTOR, _U64.pack(x.size) + _f64_bytes(x)
    elif isinstance(msg, Result):
        kind, payload = RESULT, _RESULT.pack(msg.encoded_index, msg.value)
    elif isinstance(msg, Progress):
        kind, payload = PROGRESS, _U64.pack(msg.count)
    elif isinstance(msg, Done):
        kind, payload = DONE, b""
    elif isinstance(msg, Error):
        raw = msg.text.encode("utf-8")
        kind, payload = ERROR, _U32.pack(len(raw)) + raw
    else:
        raise TypeError(f"cannot encode {type(msg).__name__}")
    return _HEADER.pack(len(payload), kind) + payload


def decode_payload(kind, payload):
    try:
        if kind == SETUP:
            _expect(payload, _SETUP.size)
            return Setup(*_SETUP.unpack(payload))
        if kind == VECTOR:
            (n,) = _U64.unpack_from(payload)
            _expect(payload, 8 + 8 * n)
            return Vector(np.frombuffer(payload, dtype="<f8", count=n, offset=8).astype(np.float64))
        if kind == RESULT:
            _expect(payload, _RESULT.size)
            return Result(*_RESULT.unpack(payload))
        if kind == PROGRESS:
            _expect(payload, 8)
            return Progress(*_U64.unpack(payload))
        if kind == DONE:
            _expect(payload, 0)
            return Done()
        if kind == ERROR:
            (n,) = _U32.unpack_from(payload)
            _expect(payload, 4 + n)
            return Error(payload[4:].decode("utf-8"))
    except struct.error as exc:
        raise ProtocolError(f"truncated payload for frame type {kind:#04x}") from exc
    raise ProtocolError(f"unknown frame type {kind:#04x}")


def _expect(payload, size):
    if len(payload) != size:
        raise ProtocolError(f"payload is {len(payload)} bytes, expected {size}")


def decode(frame):
    """Parse exactly one complete frame."""
    if len(frame) < _HEADER.size:
        raise ProtocolError("frame shorter than header")
    length, kind = _HEADER.unpack_from(frame)
    if len(frame) != _HEADER.size + length:
        raise ProtocolError(f"frame length {len(frame)} disagrees with header ({length})")
    return decode_payload(kind, frame[_HEADER.size:])


def _recv_exact(sock, n):
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return bytes(buf)


def recv_message(sock):
    """Read one message; returns None on a clean EOF at a frame boundary."""
    header = _recv_exact(sock, _HEADER.size)
    if header is None:
        return None
    length, kind = _HEADER.unpack(header)
    payload = _recv_exact(sock, length) if length else b""
    if payload is None:
        raise ProtocolError("connection closed mid-frame")
    return decode_payload(kind, payload)


def send_message(sock, msg):
    sock.sendall(encode(msg))


def connect(host, port, retries=5, interval=0.2, timeout=5.0):
    """Open a TCP connection, retrying ``retries`` times before giving up."""
    last = None
    for attempt in range(retries + 1):
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
            sock.settimeout(None)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            return sock
        except OSError as exc:
            last = exc
            if attempt < retries:
                time.sleep(interval)
    raise ConnectionError(f"could not reach master at {host}:{port} after {retries + 1} attempts") from last
