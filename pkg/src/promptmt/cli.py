"""Command-line surface.

Subcommands: train, translate, evaluate, mask-sweep, gradcheck, make-vtok,
bpe-train. Every command exits nonzero with a message on stderr when given
a missing file or an inconsistent configuration.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from .checks import full_model_reports, primitive_reports
from .decoding import beam_search
from .errors import ConfigError, PromptMtError
from .evaluate import (evaluate, mask_sweep, visual_tokens_for,
                       write_report_csv, write_sentences_tsv, write_sweep_csv)
from .model import ModelConfig, MultimodalTranslator, load_checkpoint
from .text import (BOS_ID, EOS_ID, Vocabulary, encode, decode, load_manifest,
                   load_parallel_examples, prefix_target_token, train_bpe)
from .train import TrainConfig, TrainState, train_loop
from .vision import make_pseudo_vtok, read_vtok


def _load_vocab_near(ckpt: Path, explicit: str | None) -> Vocabulary:
    if explicit:
        return Vocabulary.load(explicit)
    return Vocabulary.load(Path(ckpt).parent / "bpe")


def cmd_train(args) -> int:
    cfg_path = Path(args.config)
    if not cfg_path.exists():
        raise ConfigError(f"config file not found: {cfg_path}")
    raw = json.loads(cfg_path.read_text(encoding="utf-8"))
    base = cfg_path.parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    data = raw.get("data", {})
    out_dir = resolve(raw.get("out_dir", "run"))
    vocab_prefix = resolve(data["vocab"])
    vocab = Vocabulary.load(vocab_prefix)
    manifest = load_manifest(resolve(data["train_manifest"]))
    pivot = data.get("pivot", "en")
    examples = load_parallel_examples(manifest, vocab, pivot=pivot)

    tcfg = TrainConfig.from_dict(raw.get("train", {}))
    if args.resume:
        model, ck_state = load_checkpoint(args.resume)
        if ck_state is None:
            raise ConfigError(f"{args.resume} holds no optimizer state, "
                              "cannot resume")
        state = TrainState.from_checkpoint_dict(ck_state)
    else:
        mcfg = dict(raw.get("model", {}))
        mcfg.setdefault("vocab_size", len(vocab))
        if mcfg.get("variant", "full") != "text_only" and not mcfg.get("d_v"):
            if manifest.vtok_path is None:
                raise ConfigError("model.d_v not set and manifest has no "
                                  "vtok_path to infer it from")
            sample = read_vtok(manifest.vtok_path)
            if sample:
                mcfg["d_v"] = next(iter(sample.values())).tokens.shape[1]
        model = MultimodalTranslator(ModelConfig.from_dict(mcfg),
                                     seed=tcfg.seed)
        state = TrainState.fresh(model, tcfg)

    visual = None
    if model.config.variant != "text_only":
        if manifest.vtok_path is None:
            raise ConfigError(f"variant {model.config.variant!r} requires a "
                              "vtok_path in the manifest")
        visual = visual_tokens_for(model, manifest.vtok_path)

    out_dir.mkdir(parents=True, exist_ok=True)
    for suffix in (".vocab", ".merges"):
        src = Path(f"{vocab_prefix}{suffix}")
        if src.exists():
            shutil.copy(src, out_dir / f"bpe{suffix}")

    rows = train_loop(model, examples, visual, state,
                      out_dir=out_dir, log_every=args.log_every)
    if rows:
        print(f"trained {rows[-1].step} steps, final loss {rows[-1].loss:.4f}")
    print(f"checkpoints and metrics in {out_dir}")
    return 0


def cmd_translate(args) -> int:
    model, _ = load_checkpoint(args.ckpt)
    vocab = _load_vocab_near(Path(args.ckpt), args.vocab)
    needs_vision = model.config.variant != "text_only"
    visual_map = {}
    if needs_vision:
        if not args.vtok:
            raise ConfigError("this checkpoint's variant needs --vtok, and "
                              "input lines of the form 'image_id<TAB>text'")
        visual_map = visual_tokens_for(model, args.vtok)

    lines = (sys.stdin.read().splitlines() if args.input == "-"
             else _read_lines(args.input))
    for line in lines:
        if not line.strip():
            print()
            continue
        if needs_vision:
            if "\t" not in line:
                raise ConfigError("expected 'image_id<TAB>text' input line "
                                  f"for a vision variant, got {line!r}")
            image_id, text = line.split("\t", 1)
            if image_id not in visual_map:
                raise ConfigError(f"image id {image_id!r} not in {args.vtok}")
            visual = visual_map[image_id]
        else:
            text, visual = line, None
        ids = prefix_target_token([BOS_ID] + encode(text, vocab) + [EOS_ID],
                                  args.tgt_lang, vocab)
        hyp = beam_search(model, vocab, ids, args.tgt_lang, visual,
                          beam=args.beam, alpha=args.alpha)
        print(decode(hyp.tokens, vocab))
    return 0


def _read_lines(path) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    return path.read_text(encoding="utf-8").splitlines()


def cmd_evaluate(args) -> int:
    model, _ = load_checkpoint(args.ckpt)
    vocab = _load_vocab_near(Path(args.ckpt), args.vocab)
    manifest = load_manifest(args.manifest)
    report = evaluate(model, vocab, manifest, args.direction, beam=args.beam,
                      alpha=args.alpha, lowercase=args.lowercase)
    write_report_csv(args.out, [report])
    write_sentences_tsv(Path(args.out).with_suffix(".sentences.tsv"), report)
    print(f"{report.direction}: BLEU {report.bleu:.2f} "
          f"({len(report.sentences)} sentences)")
    return 0


def cmd_mask_sweep(args) -> int:
    model, _ = load_checkpoint(args.ckpt)
    vocab = _load_vocab_near(Path(args.ckpt), args.vocab)
    manifest = load_manifest(args.manifest)
    ratios = [float(r) for r in args.ratios.split(",") if r != ""]
    seeds = [int(s) for s in args.seeds.split(",") if s != ""]
    if not ratios or not seeds:
        raise ConfigError("need at least one ratio and one seed")
    reports, summary = mask_sweep(model, vocab, manifest, args.direction,
                                  ratios, seeds, beam=args.beam,
                                  alpha=args.alpha, lowercase=args.lowercase)
    write_sweep_csv(args.out, summary)
    write_report_csv(Path(args.out).with_suffix(".runs.csv"), reports)
    for row in summary:
        print(f"ratio {row['ratio']:.2f}: mean BLEU {row['mean_bleu']:.2f} "
              f"(std {row['std']:.2f})")
    return 0


def cmd_gradcheck(args) -> int:
    reports = primitive_reports()
    if args.full_model:
        reports += full_model_reports()
    failed = 0
    for report in reports:
        print(report)
        failed += not report.passed
    total = len(reports)
    print(f"{total - failed}/{total} gradient checks passed")
    return 1 if failed else 0


def cmd_make_vtok(args) -> int:
    if not args.pseudo:
        raise ConfigError("only --pseudo generation is supported; real "
                          "backbones are external and write VTOK directly")
    ids = [l.strip() for l in _read_lines(args.ids) if l.strip()]
    n = make_pseudo_vtok(ids, args.mv, args.dv, args.seed, args.out)
    print(f"wrote {n} records ({args.mv}x{args.dv}) to {args.out}")
    return 0


def cmd_bpe_train(args) -> int:
    langs = [l for l in args.langs.split(",") if l] if args.langs else []
    vocab = train_bpe(args.corpus, args.vocab_size, min_freq=args.min_freq,
                      languages=langs)
    vocab.save(args.out)
    print(f"vocabulary of {len(vocab)} tokens ({len(vocab.merges)} merges) "
          f"saved to {args.out}.vocab / {args.out}.merges")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptmt",
        description="multilingual multimodal translation with "
                    "language-conditioned visual prompts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--log-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="decode sentences from a file or -")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--tgt-lang", required=True)
    p.add_argument("--input", required=True, help="path or - for stdin")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--vocab", default=None,
                   help="vocabulary prefix (default: bpe next to the ckpt)")
    p.add_argument("--vtok", default=None,
                   help="VTOK file for vision variants")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="corpus BLEU for one direction")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--direction", required=True, help="e.g. en-de")
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--lowercase", action="store_true")
    p.add_argument("--vocab", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("mask-sweep",
                       help="BLEU under increasing source masking")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--direction", required=True)
    p.add_argument("--ratios", required=True, help="e.g. 0,0.2,0.4")
    p.add_argument("--seeds", required=True, help="e.g. 1,2,3")
    p.add_argument("--out", required=True, help="summary CSV path")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--lowercase", action="store_true")
    p.add_argument("--vocab", default=None)
    p.set_defaults(func=cmd_mask_sweep)

    p = sub.add_parser("gradcheck",
                       help="finite-difference checks of the autodiff core")
    p.add_argument("--full-model", action="store_true",
                   help="also check the composed loss of a small model")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("make-vtok", help="write a VTOK file")
    p.add_argument("--pseudo", action="store_true",
                   help="deterministic pseudo features")
    p.add_argument("--ids", required=True, help="file of image ids")
    p.add_argument("--mv", type=int, required=True, help="tokens per image")
    p.add_argument("--dv", type=int, required=True, help="feature width")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_vtok)

    p = sub.add_parser("bpe-train", help="learn a shared BPE vocabulary")
    p.add_argument("--corpus", nargs="+", required=True)
    p.add_argument("--vocab-size", type=int, required=True)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--langs", default="", help="comma-separated codes")
    p.add_argument("--min-freq", type=int, default=2)
    p.set_defaults(func=cmd_bpe_train)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PromptMtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
