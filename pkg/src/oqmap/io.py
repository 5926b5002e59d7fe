"""Deterministic file output: CSV tables, matrix files and run manifests."""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .spectral import ResonanceSpectrum
from .torus import PlanckGrid, QuantumMap

__all__ = [
    "BINARY_MAGIC",
    "RunManifest",
    "format_value",
    "csv_text",
    "atomic_write",
    "write_csv",
    "spectrum_rows",
    "matrix_to_json",
    "matrix_from_json",
    "matrix_to_bytes",
    "matrix_from_bytes",
    "write_matrix",
    "read_matrix",
    "write_manifest",
    "sha256_file",
    "thread_count",
]

BINARY_MAGIC = b"OQMAP1\0\0"
_VERSION = "0.1.0"


def format_value(x) -> str:
    """Round-trippable text for CSV cells: floats at 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x) or math.isinf(x):
            return repr(x)
        return format(x, ".17g")
    if isinstance(x, (complex, np.complexfloating)):
        raise TypeError("split complex values into re and im columns")
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} cells, header has {len(header)}")
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def atomic_write(path: str | os.PathLike, data: bytes) -> None:
    """Write to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    atomic_write(path, csv_text(header, rows).encode("ascii"))


SPECTRUM_HEADER = ("re", "im", "modulus", "arg", "multiplicity")


def spectrum_rows(spec: ResonanceSpectrum) -> list[tuple]:
    """Canonically ordered (re, im, modulus, arg in [0, 2 pi), multiplicity)."""
    rows = []
    for z, m in spec.entries:
        arg = math.atan2(z.imag, z.real) % (2 * math.pi)
        rows.append((z.real, z.imag, abs(z), arg, m))
    return rows


# --- matrices ---------------------------------------------------------------------


def matrix_to_json(qm: QuantumMap) -> str:
    m = qm.matrix
    doc = {
        "kind": qm.kind,
        "params": qm.params,
        "N": qm.N,
        "rows": m.shape[0],
        "cols": m.shape[1],
        "data": [[float(z.real), float(z.imag)] for z in m.ravel()],
    }
    return json.dumps(doc, sort_keys=True) + "\n"


def matrix_from_json(text: str) -> QuantumMap:
    doc = json.loads(text)
    data = np.array(doc["data"], dtype=float)
    m = (data[:, 0] + 1j * data[:, 1]).reshape(doc["rows"], doc["cols"])
    return QuantumMap(m, PlanckGrid(int(doc["N"])), doc.get("kind", "custom"), doc.get("params", {}))


def matrix_to_bytes(m: np.ndarray) -> bytes:
    """Magic, little-endian u32 rows and cols, then row-major (re, im) float64 pairs."""
    m = np.asarray(m, dtype=complex)
    rows, cols = m.shape
    body = np.ascontiguousarray(m).view(np.float64).astype("<f8").tobytes()
    return BINARY_MAGIC + struct.pack("<II", rows, cols) + body


def matrix_from_bytes(data: bytes) -> np.ndarray:
    if data[:8] != BINARY_MAGIC:
        raise ValueError("not an oqmap binary matrix")
    rows, cols = struct.unpack("<II", data[8:16])
    flat = np.frombuffer(data[16:], dtype="<f8")
    if flat.size != 2 * rows * cols:
        raise ValueError("truncated matrix payload")
    return (flat[0::2] + 1j * flat[1::2]).reshape(rows, cols)


def write_matrix(path, qm: QuantumMap, fmt: str = "json") -> None:
    if fmt == "json":
        atomic_write(path, matrix_to_json(qm).encode("ascii"))
    elif fmt == "bin":
        atomic_write(path, matrix_to_bytes(qm.matrix))
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:8] == BINARY_MAGIC:
        return matrix_from_bytes(data)
    return matrix_from_json(data.decode("ascii")).matrix


# --- manifests --------------------------------------------------------------------


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    parameters: dict
    version: str = _VERSION
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))
    outputs: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def add_output(self, path) -> None:
        self.outputs[Path(path).name] = sha256_file(path)


def write_manifest(path, manifest: RunManifest) -> None:
    text = json.dumps(asdict(manifest), sort_keys=True, indent=2, default=str) + "\n"
    atomic_write(path, text.encode("utf-8"))


def thread_count() -> int:
    """Worker cap from OQMAP_THREADS, else the CPU count."""
    raw = os.environ.get("OQMAP_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"OQMAP_THREADS must be an integer, got {raw!r}") from None
        if n < 1:
            raise ValueError("OQMAP_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1
