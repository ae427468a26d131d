"""Encoder adapter interface and a deterministic stand-in encoder.

A real adapter wraps an image-text matching model: it runs the matching
forward pass on [CLS] passage [SEP] question [SEP], backpropagates the
positive matching logit, and returns block-b attention probabilities and
their gradients with any vision classification column already removed.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
from PIL import Image

_WORD = re.compile(r"\S+")


@dataclass
class EncoderOutput:
    cross_attn: np.ndarray  # [H, L, g*g]
    cross_grad: np.ndarray
    self_attn: np.ndarray  # [H, L, L]
    self_grad: np.ndarray
    grid: int
    sep_positions: tuple[int, int]
    offset_mapping: list[tuple[int, int]]
    truncated: bool
    effective_knowledge_length: int
    extra: dict = field(default_factory=dict)


class EncoderAdapter(Protocol):
    def block_count(self) -> int: ...

    def encode(
        self, image_path: Path, passage: str, question: str, block: int, max_text_len: int
    ) -> EncoderOutput: ...


def tokenize_pair(passage: str, question: str, max_text_len: int):
    """Whitespace tokens with code-point offsets into the passage.

    Returns (offsets, sep_positions, truncated, effective_knowledge_length).
    Knowledge tokens are dropped from the end until the whole sequence fits.
    """
    k_spans = [(m.start(), m.end()) for m in _WORD.finditer(passage)]
    q_count = len(_WORD.findall(question))
    if not k_spans or q_count == 0:
        raise ValueError("passage and question must each contain a token")
    room = max_text_len - q_count - 3
    if room < 1:
        raise ValueError(f"max_text_len {max_text_len} leaves no room for the passage")
    truncated = len(k_spans) > room
    k_spans = k_spans[:room]
    sep0 = 1 + len(k_spans)
    sep1 = sep0 + 1 + q_count
    offsets = [(0, 0)] + k_spans + [(0, 0)] * (q_count + 2)
    effective = k_spans[-1][1] if truncated else len(passage)
    return offsets, (sep0, sep1), truncated, effective


def _row_stochastic(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    a = rng.random(shape) + 1e-3
    return a / a.sum(axis=-1, keepdims=True)


class SyntheticEncoder:
    """Seeded random attention shaped like a real encoder's output.

    The seed folds in the image bytes and both texts, so reruns are
    bit-identical and distinct inputs give distinct tensors.
    """

    def __init__(self, heads: int = 2, grid: int = 4, blocks: int = 12):
        self.heads, self.grid, self.blocks = heads, grid, blocks

    def block_count(self) -> int:
        return self.blocks

    def encode(self, image_path: Path, passage: str, question: str, block: int, max_text_len: int) -> EncoderOutput:
        if not 0 <= block < self.blocks:
            raise ValueError(f"block {block} outside encoder range [0, {self.blocks})")
        with Image.open(image_path) as img:
            pixels = img.convert("RGB").tobytes()
        offsets, seps, truncated, effective = tokenize_pair(passage, question, max_text_len)
        digest = hashlib.sha256(pixels + b"\0" + passage.encode() + b"\0" + question.encode() + bytes([block]))
        rng = np.random.default_rng(int.from_bytes(digest.digest()[:8], "little"))
        H, L, P = self.heads, len(offsets), self.grid * self.grid
        return EncoderOutput(
            cross_attn=_row_stochastic(rng, (H, L, P)),
            cross_grad=rng.standard_normal((H, L, P)),
            self_attn=_row_stochastic(rng, (H, L, L)),
            self_grad=rng.standard_normal((H, L, L)),
            grid=self.grid,
            sep_positions=seps,
            offset_mapping=offsets,
            truncated=truncated,
            effective_knowledge_length=effective,
        )
