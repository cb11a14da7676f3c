"""Checkpoint format: a magic-tagged binary of little-endian float32 blocks
in a fixed order, with a JSON sidecar carrying shapes, vocabularies, and a
payload digest. Training arithmetic stays 64-bit; storage is 32-bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alignment import AlignParams
from .encoder import NetworkParams
from .tkg import Vocabulary

MAGIC = b"MPKD1"

_NETWORK_BLOCKS = ("entity_emb", "relation_emb", "transform_W", "attn_a", "time_freq")
_ALIGN_BLOCKS = ("temporal_WQ", "temporal_WK", "temporal_WV", "cross_WQ", "cross_WK")


@dataclass
class Checkpoint:
    teacher: NetworkParams
    student: NetworkParams
    align: AlignParams
    source_entities: Vocabulary
    target_entities: Vocabulary
    relations: Vocabulary  # base relations; reciprocal rows are implicit
    config_digest: str
    seed: int


def _blocks_of(ckpt: Checkpoint) -> list[tuple[str, np.ndarray]]:
    out = []
    for prefix, obj in (("teacher", ckpt.teacher), ("student", ckpt.student)):
        for name in _NETWORK_BLOCKS:
            out.append((f"{prefix}.{name}", getattr(obj, name)))
    for name in _ALIGN_BLOCKS:
        out.append((f"align.{name}", getattr(ckpt.align, name)))
    return out


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    path = Path(path)
    payload = bytearray(MAGIC)
    blocks = []
    for name, arr in _blocks_of(ckpt):
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        payload.extend(data)
        blocks.append({"name": name, "shape": list(arr.shape)})
    path.write_bytes(bytes(payload))
    meta = {
        "format": MAGIC.decode(),
        "dim": ckpt.teacher.dim,
        "dropout_rate": ckpt.teacher.dropout_rate,
        "n_relations": len(ckpt.relations),
        "blocks": blocks,
        "source_entity_symbols": ckpt.source_entities.symbols(),
        "target_entity_symbols": ckpt.target_entities.symbols(),
        "relation_symbols": ckpt.relations.symbols(),
        "config_digest": ckpt.config_digest,
        "seed": ckpt.seed,
        "payload_sha256": hashlib.sha256(bytes(payload)).hexdigest(),
    }
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(
        json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    payload = path.read_bytes()
    if payload[: len(MAGIC)] != MAGIC:
        raise ValueError(f"bad checkpoint magic in {path}")
    sidecar = path.with_suffix(path.suffix + ".json")
    if not sidecar.exists():
        raise FileNotFoundError(f"missing checkpoint sidecar {sidecar}")
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    digest = hashlib.sha256(payload).hexdigest()
    if digest != meta["payload_sha256"]:
        raise ValueError("checkpoint payload does not match sidecar digest")

    arrays: dict[str, np.ndarray] = {}
    offset = len(MAGIC)
    for block in meta["blocks"]:
        shape = tuple(block["shape"])
        count = int(np.prod(shape)) if shape else 1
        raw = payload[offset : offset + 4 * count]
        offset += 4 * count
        arrays[block["name"]] = (
            np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
        )
    if offset != len(payload):
        raise ValueError("checkpoint payload has trailing bytes")

    n_rel = len(meta["relation_symbols"])

    def network(prefix: str) -> NetworkParams:
        return NetworkParams(
            arrays[f"{prefix}.entity_emb"],
            arrays[f"{prefix}.relation_emb"],
            arrays[f"{prefix}.transform_W"],
            arrays[f"{prefix}.attn_a"],
            arrays[f"{prefix}.time_freq"],
            meta["dropout_rate"],
            n_rel,
        )

    align = AlignParams(*(arrays[f"align.{n}"] for n in _ALIGN_BLOCKS))
    return Checkpoint(
        network("teacher"),
        network("student"),
        align,
        Vocabulary(meta["source_entity_symbols"], frozen=True),
        Vocabulary(meta["target_entity_symbols"], frozen=True),
        Vocabulary(meta["relation_symbols"], frozen=True),
        meta["config_digest"],
        meta["seed"],
    )
