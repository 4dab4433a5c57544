#!/usr/bin/env python3
"""Generate a synthetic word-aligned corpus: per-language text files,
pseudo visual tokens, a manifest, a shared BPE vocabulary, and a ready
training config for the CLI.

Usage:
    python scripts/make_toy_corpus.py --out runs/toy --lines 32 \
        --langs de,fr,cs --d-v 32
    promptmt train --config runs/toy/config.json
"""

import argparse
import json
from pathlib import Path

from promptmt.text import load_manifest
from promptmt.toydata import make_toy_corpus, train_toy_vocab


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--lines", type=int, default=32)
    parser.add_argument("--langs", default="de,fr,cs")
    parser.add_argument("--pivot", default="en")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--m-v", type=int, default=4)
    parser.add_argument("--d-v", type=int, default=32)
    parser.add_argument("--images", type=int, default=8)
    parser.add_argument("--vocab-size", type=int, default=360)
    args = parser.parse_args()

    out = Path(args.out)
    targets = tuple(l for l in args.langs.split(",") if l)
    manifest_path = make_toy_corpus(out, n_lines=args.lines,
                                    target_langs=targets, pivot=args.pivot,
                                    seed=args.seed, m_v=args.m_v,
                                    d_v=args.d_v, n_images=args.images)
    manifest = load_manifest(manifest_path)
    vocab = train_toy_vocab(out, manifest.languages,
                            vocab_size=args.vocab_size)

    config = {
        "out_dir": "run",
        "data": {"train_manifest": manifest_path.name, "vocab": "bpe",
                 "pivot": args.pivot},
        "model": {"d_model": 64, "n_heads": 4, "n_enc_layers": 2,
                  "n_dec_layers": 2, "d_v": args.d_v, "variant": "full",
                  "dropout": 0.0, "eps_ls": 0.0},
        "train": {"epochs": 40, "max_tokens": 512, "lr_peak": 2e-3,
                  "warmup_steps": 30, "seed": 5},
    }
    (out / "config.json").write_text(json.dumps(config, indent=2),
                                     encoding="utf-8")
    print(f"corpus: {args.lines} lines x {len(targets)} directions in {out}")
    print(f"vocabulary: {len(vocab)} tokens, {len(vocab.merges)} merges")
    print(f"train with: promptmt train --config {out / 'config.json'}")


if __name__ == "__main__":
    main()
