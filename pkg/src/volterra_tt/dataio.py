"""File formats: CSV data sets, the model container and result records.

Data sets are plain CSV with a header naming input columns ``u1..uP`` and
output columns ``y1..yL``, one sample per row.  Models are stored in a
binary container (magic ``VTN1``) holding a JSON header and the raw little-
endian float64 core entries, closed by a SHA-256 checksum; loading is
bit-exact.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .model import TimeSeriesData, VolterraModel
from .tt import TensorTrain

MODEL_MAGIC = b"VTN1"


class DataFormatError(ValueError):
    """A data or model file does not match its documented format."""


def _split_header(names: list[str]) -> tuple[int, int]:
    p = 0
    while p < len(names) and names[p] == f"u{p + 1}":
        p += 1
    l = 0
    while p + l < len(names) and names[p + l] == f"y{l + 1}":
        l += 1
    if p == 0 or l == 0 or p + l != len(names):
        raise DataFormatError(
            f"header must name columns u1..uP,y1..yL, got {','.join(names)}"
        )
    return p, l


def load_csv(path, role: str = "train") -> TimeSeriesData:
    """Read a ``u1..uP,y1..yL`` CSV into a time-series record."""
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: file is empty") from None
        p, l = _split_header([name.strip() for name in header])
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != p + l:
                raise DataFormatError(
                    f"{path}, line {lineno}: expected {p + l} fields, got {len(row)}"
                )
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise DataFormatError(
                    f"{path}, line {lineno}: non-numeric value"
                ) from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    values = np.asarray(rows)
    if not np.all(np.isfinite(values)):
        bad = int(np.argwhere(~np.all(np.isfinite(values), axis=1))[0, 0]) + 2
        raise DataFormatError(f"{path}, line {bad}: NaN/Inf not allowed")
    return TimeSeriesData(inputs=values[:, :p], outputs=values[:, p:], role=role)


def save_csv(path, data: TimeSeriesData) -> None:
    """Write a record in the schema :func:`load_csv` reads (17 digits)."""
    path = Path(path)
    header = [f"u{k + 1}" for k in range(data.n_inputs)] + [
        f"y{k + 1}" for k in range(data.n_outputs)
    ]
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for u_row, y_row in zip(data.inputs, data.outputs):
            writer.writerow([f"{x:.17g}" for x in u_row] + [f"{x:.17g}" for x in y_row])


def save_model(path, model: VolterraModel) -> None:
    """Serialise a model to the ``VTN1`` container."""
    header = {
        "order": model.order,
        "memory": model.memory,
        "n_inputs": model.n_inputs,
        "n_outputs": model.n_outputs,
        "ranks": list(model.tt.ranks),
        "canonical_site": model.tt.canonical_site,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    body = bytearray()
    body += MODEL_MAGIC
    body += struct.pack("<I", len(header_bytes))
    body += header_bytes
    for core in model.tt.cores:
        body += np.ascontiguousarray(core, dtype="<f8").tobytes()
    body += hashlib.sha256(bytes(body)).digest()
    Path(path).write_bytes(bytes(body))


def load_model(path) -> VolterraModel:
    """Read a ``VTN1`` container back into a model, verifying its checksum."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MODEL_MAGIC) + 4 + 32:
        raise DataFormatError(f"{path}: truncated model container")
    if raw[:4] != MODEL_MAGIC:
        raise DataFormatError(
            f"{path}: unsupported container version tag {raw[:4]!r} "
            f"(expected {MODEL_MAGIC.decode()})"
        )
    payload, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise DataFormatError(f"{path}: checksum mismatch, file is corrupted")
    (header_len,) = struct.unpack("<I", payload[4:8])
    header = json.loads(payload[8 : 8 + header_len].decode())
    ranks = header["ranks"]
    i = header["n_inputs"] * header["memory"] + 1
    offset = 8 + header_len
    cores = []
    for d in range(header["order"]):
        count = ranks[d] * i * ranks[d + 1]
        end = offset + count * 8
        if end > len(payload):
            raise DataFormatError(f"{path}: truncated core data")
        core = np.frombuffer(payload[offset:end], dtype="<f8").reshape(
            ranks[d], i, ranks[d + 1]
        )
        cores.append(core)
        offset = end
    if offset != len(payload):
        raise DataFormatError(f"{path}: trailing bytes in model container")
    tt = TensorTrain(cores, canonical_site=header["canonical_site"])
    return VolterraModel(
        tt=tt,
        order=header["order"],
        memory=header["memory"],
        n_inputs=header["n_inputs"],
        n_outputs=header["n_outputs"],
    )


@dataclass(frozen=True)
class ResultRecord:
    """Serialised outcome of one command-line run."""

    structure: dict
    metrics: dict
    weight_norm: float | None
    wall_time_ms: float
    seed: int | None
    config_hash: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=True)


def config_hash(payload: dict) -> str:
    """Stable hex digest of a configuration dictionary."""
    canonical = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
