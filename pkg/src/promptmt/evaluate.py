"""Corpus evaluation: unsmoothed cumulative 4-gram BLEU, per-direction
decoding reports, and the masking-ratio sweep.

BLEU is computed on whitespace tokens of detokenized text, corpus-level:
geometric mean of modified n-gram precisions for n = 1..4 times the brevity
penalty, with no smoothing, so a corpus without a single matching 4-gram
scores exactly 0.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .decoding import beam_search
from .errors import ConfigError
from .model import MultimodalTranslator
from .seeding import derive_seed
from .text import (BOS_ID, EOS_ID, CorpusManifest, Vocabulary, decode,
                   encode, manifest_image_ids, manifest_lines, mask_source,
                   prefix_target_token)
from .vision import read_vtok


def visual_tokens_for(model: MultimodalTranslator, vtok_path) -> dict:
    """Load a VTOK file, rejecting a feature width that disagrees with the
    model configuration."""
    table = read_vtok(vtok_path)
    if table:
        d_v = next(iter(table.values())).tokens.shape[1]
        if d_v != model.config.d_v:
            raise ConfigError(
                f"visual feature width mismatch: {vtok_path} has d_v={d_v}, "
                f"model expects d_v={model.config.d_v}")
    return table


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu4(hypotheses: Sequence[Sequence[str]],
          references: Sequence[Sequence[str]]) -> float:
    """Corpus BLEU in [0, 100] over pre-tokenized sentences."""
    if len(hypotheses) != len(references):
        raise ConfigError(f"bleu4: {len(hypotheses)} hypotheses vs "
                          f"{len(references)} references")
    if not hypotheses:
        raise ConfigError("bleu4: empty corpus")
    log_prec_sum = 0.0
    for n in range(1, 5):
        clipped = total = 0
        for hyp, ref in zip(hypotheses, references):
            hyp_counts = _ngrams(hyp, n)
            ref_counts = _ngrams(ref, n)
            clipped += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
            total += max(len(hyp) - n + 1, 0)
        if clipped == 0 or total == 0:
            return 0.0
        log_prec_sum += np.log(clipped / total)
    c = sum(len(h) for h in hypotheses)
    r = sum(len(ref) for ref in references)
    if c == 0:
        return 0.0
    bp = 1.0 if c > r else float(np.exp(1.0 - r / c))
    return float(100.0 * bp * np.exp(log_prec_sum / 4.0))


@dataclass
class SentenceResult:
    example_id: str
    source: str
    hypothesis: str
    reference: str


@dataclass
class EvalReport:
    direction: str
    bleu: float
    sentences: list[SentenceResult]
    ratio: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.bleu <= 100.0:
            raise ConfigError(f"BLEU out of range: {self.bleu}")


def parse_direction(direction: str) -> tuple[str, str]:
    for sep in ("->", "→", "-", "2"):
        if sep in direction:
            src, tgt = direction.split(sep, 1)
            return src.strip().lower(), tgt.strip().lower()
    raise ConfigError(f"cannot parse direction {direction!r}; "
                      "expected e.g. 'en-de'")


def _tokens(text: str, lowercase: bool) -> list[str]:
    return (text.lower() if lowercase else text).split()


def evaluate(model: MultimodalTranslator, vocab: Vocabulary,
             manifest: CorpusManifest, direction: str, beam: int = 5,
             alpha: float = 1.0, mask_ratio: Optional[float] = None,
             mask_seed: Optional[int] = None,
             lowercase: bool = False) -> EvalReport:
    """Decode every source sentence of one direction and score corpus BLEU.

    With ``mask_ratio`` set, each source is masked before decoding using a
    per-sentence seed derived from ``mask_seed``, so results are independent
    of processing order.
    """
    src_lang, tgt_lang = parse_direction(direction)
    src_lines = manifest_lines(manifest, src_lang)
    ref_lines = manifest_lines(manifest, tgt_lang)
    image_ids = manifest_image_ids(manifest, len(src_lines))

    visual_map = None
    if model.config.variant != "text_only":
        if manifest.vtok_path is None:
            raise ConfigError(f"variant {model.config.variant!r} needs a "
                              "vtok_path in the manifest")
        visual_map = visual_tokens_for(model, manifest.vtok_path)

    sentences = []
    hyp_tok, ref_tok = [], []
    for i, (src, ref) in enumerate(zip(src_lines, ref_lines)):
        ids = prefix_target_token([BOS_ID] + encode(src, vocab) + [EOS_ID],
                                  tgt_lang, vocab)
        if mask_ratio is not None and mask_ratio > 0:
            ids = mask_source(ids, mask_ratio,
                              derive_seed(mask_seed or 0, i), vocab)
        visual = None
        if visual_map is not None:
            if image_ids[i] not in visual_map:
                raise ConfigError(f"no visual tokens for image "
                                  f"{image_ids[i]!r} in {manifest.vtok_path}")
            visual = visual_map[image_ids[i]]
        hyp = beam_search(model, vocab, ids, tgt_lang, visual,
                          beam=beam, alpha=alpha)
        hyp_text = decode(hyp.tokens, vocab)
        sentences.append(SentenceResult(
            example_id=f"{manifest.split}-{i:06d}-{src_lang}2{tgt_lang}",
            source=decode(ids, vocab), hypothesis=hyp_text, reference=ref))
        hyp_tok.append(_tokens(hyp_text, lowercase))
        ref_tok.append(_tokens(ref, lowercase))

    return EvalReport(direction=f"{src_lang}-{tgt_lang}",
                      bleu=bleu4(hyp_tok, ref_tok), sentences=sentences,
                      ratio=mask_ratio, seed=mask_seed)


def mask_sweep(model: MultimodalTranslator, vocab: Vocabulary,
               manifest: CorpusManifest, direction: str,
               ratios: Sequence[float], seeds: Sequence[int], beam: int = 5,
               alpha: float = 1.0, lowercase: bool = False
               ) -> tuple[list[EvalReport], list[dict]]:
    """Evaluate under each masking ratio, averaged over seeds.

    Ratio 0 is a no-op mask, so it is decoded once and reused for every
    seed. Returns the individual reports plus {ratio, mean_bleu, std}
    summary rows for plotting.
    """
    reports, summary = [], []
    for ratio in ratios:
        if not 0.0 <= ratio <= 1.0:
            raise ConfigError(f"mask ratio must be in [0, 1], got {ratio}")
        if ratio == 0:
            rep = evaluate(model, vocab, manifest, direction, beam=beam,
                           alpha=alpha, mask_ratio=0.0, mask_seed=seeds[0],
                           lowercase=lowercase)
            per_seed = [rep] * len(seeds)
            reports.append(rep)
        else:
            per_seed = [evaluate(model, vocab, manifest, direction, beam=beam,
                                 alpha=alpha, mask_ratio=ratio, mask_seed=s,
                                 lowercase=lowercase) for s in seeds]
            reports.extend(per_seed)
        scores = np.array([r.bleu for r in per_seed])
        summary.append({"ratio": ratio, "mean_bleu": float(scores.mean()),
                        "std": float(scores.std())})
    return reports, summary


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

def write_report_csv(path: str | Path, reports: Sequence[EvalReport]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["direction", "ratio", "seed", "bleu"])
        for r in reports:
            writer.writerow([r.direction,
                             "" if r.ratio is None else f"{r.ratio:g}",
                             "" if r.seed is None else r.seed,
                             f"{r.bleu:.4f}"])


def write_sweep_csv(path: str | Path, summary: Sequence[dict]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["ratio", "mean_bleu", "std"])
        for row in summary:
            writer.writerow([f"{row['ratio']:g}", f"{row['mean_bleu']:.4f}",
                             f"{row['std']:.4f}"])


def write_sentences_tsv(path: str | Path, report: EvalReport):
    """Per-sentence dump: id, (possibly masked) source, prediction, truth."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write("example_id\tsource\thypothesis\treference\n")
        for s in report.sentences:
            f.write(f"{s.example_id}\t{s.source}\t{s.hypothesis}\t{s.reference}\n")
