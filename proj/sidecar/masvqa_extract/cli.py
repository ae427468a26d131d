"""masvqa-extract: one attention dump per retrieved passage."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dump import write_dump
from .encoder import EncoderAdapter, SyntheticEncoder


def _load_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise SystemExit(f"{path}:{number}: {e}") from e
    return rows


def _sample_id(row: dict) -> str:
    return str(row["sample_id"] if "sample_id" in row else row["data_id"])


def _image_path(row: dict, base: Path) -> Path:
    if "image_path" in row:
        image = Path(row["image_path"])
    elif "image" in row:
        image = Path(row["image"])
    else:
        image = Path(f"{row['image_id']}.jpg")
    return image if image.is_absolute() else base / image


def extract_all(
    encoder: EncoderAdapter,
    dataset: Path,
    retrievals: Path,
    out_dir: Path,
    block: int,
    max_text_len: int,
    k: int,
) -> int:
    """Writes <sample_id>.r<rank>.mvd files; returns the number of failed passages."""
    if not 0 <= block < encoder.block_count():
        raise SystemExit(f"--block {block} outside encoder range [0, {encoder.block_count()})")
    out_dir.mkdir(parents=True, exist_ok=True)
    passages_of = {}
    for row in _load_jsonl(retrievals):
        ranked = sorted(row["passages"], key=lambda p: -p.get("score", 0.0))
        passages_of[_sample_id(row)] = [p["text"] for p in ranked[:k]]

    failures = 0
    for row in _load_jsonl(dataset):
        sid = _sample_id(row)
        passages = passages_of.get(sid)
        if not passages:
            print(f"{sid}: no retrieved passages", file=sys.stderr)
            failures += 1
            continue
        image = _image_path(row, dataset.parent)
        for rank, passage in enumerate(passages, 1):
            try:
                out = encoder.encode(image, passage, row["question"], block, max_text_len)
                meta = {
                    "heads": int(out.cross_attn.shape[0]),
                    "seq_len": len(out.offset_mapping),
                    "patches": out.grid * out.grid,
                    "grid": out.grid,
                    "block": block,
                    "sep_positions": list(out.sep_positions),
                    "offset_mapping": [list(o) for o in out.offset_mapping],
                    "knowledge_text": passage,
                    "question_text": row["question"],
                    "truncated": out.truncated,
                    "effective_knowledge_length": out.effective_knowledge_length,
                }
                tensors = {
                    "cross_attn": out.cross_attn,
                    "cross_grad": out.cross_grad,
                    "self_attn": out.self_attn,
                    "self_grad": out.self_grad,
                }
                write_dump(out_dir / f"{sid}.r{rank}.mvd", meta, tensors)
            except Exception as e:  # per-passage failures never stop the job
                print(f"{sid} rank {rank}: {e}", file=sys.stderr)
                failures += 1
    return failures


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="masvqa-extract", description=__doc__)
    ap.add_argument("--dataset", type=Path, required=True)
    ap.add_argument("--retrievals", type=Path, required=True)
    ap.add_argument("--out-dir", type=Path, required=True)
    ap.add_argument("--block", type=int, default=7)
    ap.add_argument("--max-text-len", type=int, default=512)
    ap.add_argument("--k", type=int, default=5, help="passages per sample")
    ap.add_argument("--encoder", choices=["synthetic"], default="synthetic")
    ap.add_argument("--grid", type=int, default=4, help="patch grid of the synthetic encoder")
    args = ap.parse_args(argv)
    encoder = SyntheticEncoder(grid=args.grid)
    failures = extract_all(encoder, args.dataset, args.retrievals, args.out_dir, args.block, args.max_text_len, args.k)
    return 0 if failures == 0 else 2


if __name__ == "__main__":
    sys.exit(main())
