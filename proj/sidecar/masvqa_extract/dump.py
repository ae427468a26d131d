"""Attention dump container: magic, u64 LE header length, JSON header, f32 LE payloads."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MASVQA01"
TENSOR_ORDER = ("cross_attn", "cross_grad", "self_attn", "self_grad")


class DumpError(ValueError):
    pass


def _expected_shape(meta: dict, name: str) -> tuple[int, int, int]:
    if name.startswith("cross"):
        return (meta["heads"], meta["seq_len"], meta["patches"])
    return (meta["heads"], meta["seq_len"], meta["seq_len"])


def validate(meta: dict, tensors: dict[str, np.ndarray]) -> None:
    """Mirrors the checks the C++ reader applies, so bad dumps fail here first."""
    heads, seq_len, grid = meta["heads"], meta["seq_len"], meta["grid"]
    if min(heads, seq_len, grid) <= 0:
        raise DumpError("dump dimensions must be positive")
    if meta["patches"] != grid * grid:
        raise DumpError(f"patch count {meta['patches']} is not grid^2 ({grid}^2)")
    sep0, sep1 = meta["sep_positions"]
    if not 0 < sep0 < sep1 < seq_len:
        raise DumpError(f"separator positions ({sep0}, {sep1}) illegal for L={seq_len}")
    offsets = meta["offset_mapping"]
    if len(offsets) != seq_len:
        raise DumpError(f"offset_mapping has {len(offsets)} entries, expected L={seq_len}")
    text_len = len(meta["knowledge_text"])
    eff = meta["effective_knowledge_length"]
    if eff > text_len or (not meta["truncated"] and eff != text_len):
        raise DumpError("effective knowledge length disagrees with passage")
    for i, (start, end) in enumerate(offsets):
        if start > end or end > text_len:
            raise DumpError(f"token {i} offsets ({start}, {end}) outside passage")
    for name in TENSOR_ORDER:
        t = tensors[name]
        if t.shape != _expected_shape(meta, name):
            raise DumpError(f"tensor {name} shape {t.shape} mismatch")
        if not np.all(np.isfinite(t)):
            raise DumpError(f"tensor {name} has non-finite entry")
        if name.endswith("attn") and np.any(t < 0):
            raise DumpError(f"attention tensor {name} has negative entry")


def write_dump(path: str | Path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    arrays = {name: np.ascontiguousarray(tensors[name], dtype="<f4") for name in TENSOR_ORDER}
    validate(meta, arrays)
    table, offset = [], 0
    for name in TENSOR_ORDER:
        a = arrays[name]
        table.append(
            {"name": name, "shape": list(a.shape), "dtype": "f32", "byte_offset": offset, "byte_len": a.nbytes}
        )
        offset += a.nbytes
    header = json.dumps({"meta": meta, "tensors": table}, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<Q", len(header)))
        out.write(header)
        for name in TENSOR_ORDER:
            out.write(arrays[name].tobytes())


def read_header(path: str | Path) -> dict:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise DumpError("bad magic")
    (length,) = struct.unpack("<Q", raw[8:16])
    if 16 + length > len(raw):
        raise DumpError("header length exceeds file size")
    return json.loads(raw[16 : 16 + length].decode("utf-8"))
