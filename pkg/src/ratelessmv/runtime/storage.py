"""On-disk layout for a staged job: per-worker row files plus a JSON manifest.

Matrix file: ``b"CMV1"``, u64 rows, u64 cols, then row-major little-endian f64.
"""

from dataclasses import asdict, dataclass, field
import json
import os
import struct

import numpy as np

from .. import ltcode, strategies
from ..exceptions import InvalidParameterError, SetupFailureError

MAGIC = b"CMV1"
_DIMS = struct.Struct("<QQ")
MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "ratelessmv-manifest/1"


def write_matrix(path, M):
    M = np.asarray(M, dtype="<f8")
    if M.ndim != 2:
        raise InvalidParameterError(f"expected a 2-d matrix, got shape {M.shape}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_DIMS.pack(*M.shape))
        fh.write(np.ascontiguousarray(M).tobytes())


def read_matrix(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise SetupFailureError(f"{path}: not a CMV1 matrix file")
    rows, cols = _DIMS.unpack_from(raw, 4)
    body = raw[4 + _DIMS.size:]
    if len(body) != 8 * rows * cols:
        raise SetupFailureError(f"{path}: expected {rows}x{cols} values, file holds {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


@dataclass
class WorkerEntry:
    file: str
    start_index: int
    count: int
    block: int


@dataclass
class JobManifest:
    m: int
    n: int
    strategy: dict
    seed: int
    m_e: int
    workers: list = field(default_factory=list)
    base_dir: str = field(default=".", repr=False, compare=False)

    @property
    def spec(self):
        return strategies.StrategySpec.from_dict(self.strategy)

    @property
    def p(self):
        return len(self.workers)

    def worker_path(self, w):
        return os.path.join(self.base_dir, self.workers[w].file)

    def to_json(self):
        body = {
            "format": MANIFEST_FORMAT,
            "m": self.m,
            "n": self.n,
            "strategy": self.strategy,
            "seed": self.seed,
            "m_e": self.m_e,
            "workers": [asdict(w) for w in self.workers],
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            body = json.load(fh)
        if body.get("format") != MANIFEST_FORMAT:
            raise SetupFailureError(f"{path}: unrecognised manifest format {body.get('format')!r}")
        return cls(
            m=body["m"], n=body["n"], strategy=body["strategy"], seed=body["seed"],
            m_e=body["m_e"], workers=[WorkerEntry(**w) for w in body["workers"]],
            base_dir=os.path.dirname(os.path.abspath(path)),
        )

    def encoding_graph(self):
        """Regenerate the LT graph the rows were encoded with."""
        spec = self.spec
        dist = ltcode.build_degree_distribution(self.m, spec.c, spec.delta)
        return ltcode.generate_graph(self.m, spec.alpha, dist, seed=self.seed, m_e=self.m_e)

    def generator(self):
        spec = self.spec
        return strategies.mds_generator(spec.p, spec.k, seed=self.seed)


def encode_rows(A, spec, seed):
    """Encoded matrix and assignment for ``spec``; LT also returns its graph."""
    m = A.shape[0]
    assignment = strategies.plan(spec, m)
    if spec.variant == strategies.LT:
        dist = ltcode.build_degree_distribution(m, spec.c, spec.delta)
        graph = ltcode.generate_graph(m, spec.alpha, dist, seed=seed, m_e=assignment.m_e)
        return ltcode.encode_matrix(A, graph), assignment
    if spec.variant == strategies.MDS:
        Ae, _ = strategies.mds_encode(A, spec.p, spec.k, seed=seed)
        return Ae, assignment
    return np.asarray(A, dtype=np.float64), assignment


def encode_and_stage(A, spec, seed, out_dir):
    """Encode ``A`` and write one row file per worker plus ``manifest.json``.

    Output is a pure function of ``(A, spec, seed)``; rerunning rewrites
    byte-identical files.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidParameterError(f"expected a 2-d matrix, got shape {A.shape}")
    if seed is None or int(seed) != seed:
        raise InvalidParameterError("staging needs an integer seed so the master can regenerate the code")
    Ae, assignment = encode_rows(A, spec, int(seed))
    os.makedirs(out_dir, exist_ok=True)
    manifest = JobManifest(m=A.shape[0], n=A.shape[1], strategy=spec.to_dict(), seed=int(seed),
                           m_e=assignment.m_e, base_dir=os.path.abspath(out_dir))
    for w in range(spec.p):
        name = f"worker_{w}.cmv"
        start = assignment.starts[w]
        write_matrix(os.path.join(out_dir, name), Ae[start:start + assignment.rows_per_worker])
        manifest.workers.append(WorkerEntry(file=name, start_index=start,
                                            count=assignment.rows_per_worker,
                                            block=assignment.block_of[w]))
    manifest.save(os.path.join(out_dir, MANIFEST_NAME))
    return manifest
