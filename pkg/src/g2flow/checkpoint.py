"""Field checkpoints: one JSON header line followed by raw little-endian float64 data.

Payload layout is row-major over the active axes with the 8 octonion
components innermost, i.e. exactly ``values.astype('<f8').tobytes()``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import LatticeSpec, OctonionField

MAGIC = "g2flow-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


class CheckpointHeaderError(CheckpointError):
    pass


class CheckpointSizeError(CheckpointError):
    pass


class CheckpointValueError(CheckpointError):
    pass


class LatticeMismatchError(CheckpointError):
    def __init__(self, found: LatticeSpec, expected: LatticeSpec):
        self.found, self.expected = found, expected
        super().__init__(f"checkpoint lattice {found.to_dict()} does not match configured "
                         f"lattice {expected.to_dict()}")


@dataclass(frozen=True)
class Checkpoint:
    field: OctonionField
    t: float
    step: int


def save(path, field: OctonionField, t: float = 0.0, step: int = 0) -> None:
    """Write atomically (temporary file then rename)."""
    header = {"format": MAGIC, "version": VERSION, **field.spec.to_dict(), "t": float(t),
              "step": int(step), "dtype": "<f8", "shape": list(field.values.shape)}
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    os.replace(tmp, path)


def read_header(path) -> tuple[dict, int]:
    """Parsed header and the byte offset where the payload starts."""
    with open(path, "rb") as fh:
        line = fh.readline(1 << 16)
    if not line.endswith(b"\n"):
        raise CheckpointHeaderError(f"{path}: no header line terminator")
    try:
        header = json.loads(line.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointHeaderError(f"{path}: header is not JSON ({exc})") from None
    if not isinstance(header, dict) or header.get("format") != MAGIC:
        raise CheckpointHeaderError(f"{path}: not a {MAGIC} file")
    missing = {"active_axes", "n", "L", "t", "step", "dtype", "shape"} - header.keys()
    if missing:
        raise CheckpointHeaderError(f"{path}: header lacks {sorted(missing)}")
    if header["dtype"] != "<f8":
        raise CheckpointHeaderError(f"{path}: unsupported dtype {header['dtype']!r}")
    return header, len(line)


def load(path, expected: LatticeSpec | None = None) -> Checkpoint:
    header, offset = read_header(path)
    try:
        spec = LatticeSpec.from_dict(header)
    except (TypeError, ValueError, KeyError) as exc:
        raise CheckpointHeaderError(f"{path}: invalid lattice in header ({exc})") from None
    shape = spec.shape + (8,)
    if tuple(header["shape"]) != shape:
        raise CheckpointHeaderError(f"{path}: header shape {header['shape']} inconsistent with "
                                    f"lattice shape {list(shape)}")
    if expected is not None and spec != expected:
        raise LatticeMismatchError(spec, expected)
    payload = Path(path).read_bytes()[offset:]
    want = 8 * int(np.prod(shape))
    if len(payload) != want:
        raise CheckpointSizeError(f"{path}: payload has {len(payload)} bytes, expected {want}")
    values = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise CheckpointValueError(f"{path}: payload contains non-finite values")
    return Checkpoint(OctonionField(spec, values), float(header["t"]), int(header["step"]))
