"""Binary model checkpoints.

Layout (all integers little-endian uint32, tensors row-major float64 LE):

    magic   8 bytes  b"TLGNN001"
    L       number of GCN layers
    d0      input width (node-type vocabulary size)
    d1..dL  layer output widths
    tensors W_1..W_L, attention weight, MLP weight (d_L x 2), MLP bias (2)

Loading validates the magic, the header, and the exact payload length.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .gnn import N_CLASSES, ModelParams

MAGIC = b"TLGNN001"


class CheckpointError(Exception):
    pass


def _dims(params: ModelParams) -> list[int]:
    dims = [params.gcn_weights[0].shape[0]]
    for w in params.gcn_weights:
        dims.append(w.shape[1])
    return dims


def save_model(path: str | Path, params: ModelParams) -> None:
    dims = _dims(params)
    header = MAGIC + struct.pack(f"<{len(dims) + 1}I", len(params.gcn_weights), *dims)
    with open(path, "wb") as fh:
        fh.write(header)
        for t in params.tensors():
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_model(path: str | Path) -> ModelParams:
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC:
        raise CheckpointError("bad magic: not a trojanlab checkpoint")
    if len(blob) < 12:
        raise CheckpointError("truncated header")
    (layers,) = struct.unpack_from("<I", blob, 8)
    if not 1 <= layers <= 64:
        raise CheckpointError(f"implausible layer count {layers}")
    head_end = 12 + 4 * (layers + 1)
    if len(blob) < head_end:
        raise CheckpointError("truncated header")
    dims = list(struct.unpack_from(f"<{layers + 1}I", blob, 12))
    if any(d < 1 for d in dims):
        raise CheckpointError("non-positive dimension in header")
    shapes = [(dims[l], dims[l + 1]) for l in range(layers)]
    shapes += [(dims[-1],), (dims[-1], N_CLASSES), (N_CLASSES,)]
    expected = head_end + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(blob) != expected:
        raise CheckpointError(f"payload length {len(blob)} != expected {expected}")
    offset = head_end
    tensors = []
    for s in shapes:
        count = int(np.prod(s))
        tensors.append(np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
                       .astype(np.float64).reshape(s))
        offset += 8 * count
    return ModelParams(tensors[:layers], tensors[layers], tensors[layers + 1], tensors[layers + 2])
