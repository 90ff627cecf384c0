"""Checkpoint files: JSON header + raw little-endian float64 parameter block.

Layout::

    bytes 0-7    magic b"SPKDCKP1"
    bytes 8-11   header length (uint32, little-endian)
    ...          header JSON (utf-8, sorted keys)
    ...          parameters as '<f8' raw bytes

The header carries architecture metadata, the schema hash, a stage tag, the
epoch, and the selection metric. Parameters round-trip bit-exactly.
Optimizer state is intentionally not persisted; training resumes with fresh
moments.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np

from spotkd.exceptions import DataError
from spotkd.nn.model import EncoderArch, ModelArch, ModelState, param_count

MAGIC = b"SPKDCKP1"


def _arch_to_dict(arch: ModelArch) -> dict:
    return {
        "kind": arch.kind,
        "encoders": [asdict(e) for e in arch.encoders],
        "n_fine": arch.n_fine,
        "n_coarse": arch.n_coarse,
    }


def _arch_from_dict(d: dict) -> ModelArch:
    return ModelArch(
        kind=d["kind"],
        encoders=tuple(EncoderArch(**e) for e in d["encoders"]),
        n_fine=d["n_fine"],
        n_coarse=d["n_coarse"],
    )


def save_checkpoint(path, state: ModelState, stage: str = "", epoch: int = 0,
                    metric=None, schema_hash=None, extra=None) -> None:
    header = {
        "arch": _arch_to_dict(state.arch),
        "stage": stage,
        "epoch": epoch,
        "metric": metric,
        "schema_hash": schema_hash,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    params = np.ascontiguousarray(state.params, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(params.tobytes())


def load_checkpoint(path) -> tuple[ModelState, dict]:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise DataError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        raw = fh.read()
    arch = _arch_from_dict(header["arch"])
    params = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if params.size != param_count(arch):
        raise DataError(
            f"{path}: parameter block has {params.size} values, "
            f"architecture expects {param_count(arch)}"
        )
    return ModelState(arch=arch, params=params), header
