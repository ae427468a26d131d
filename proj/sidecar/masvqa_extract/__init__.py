"""Writes attention dumps consumed by the masvqa C++ pipeline."""

from .dump import DumpError, read_header, write_dump
from .encoder import EncoderAdapter, EncoderOutput, SyntheticEncoder, tokenize_pair

__all__ = [
    "DumpError",
    "EncoderAdapter",
    "EncoderOutput",
    "SyntheticEncoder",
    "read_header",
    "tokenize_pair",
    "write_dump",
]
