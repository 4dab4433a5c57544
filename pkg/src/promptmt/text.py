"""Multilingual text pipeline: shared subword vocabulary, byte-level BPE,
target-language tagging, token-count batching, and source masking.

Tokenization is byte-level: every line is whitespace-normalized and split
into words, each word after the first carrying its leading space. Word
bytes are mapped to printable stand-in characters (so vocabulary files
stay one-token-per-line), and BPE merges never cross word boundaries.
Decoding reverses the mapping exactly, so decode(encode(t)) == t for any
whitespace-normalized text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, LanguageError, VocabularyError
from .seeding import rng_for

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3
MASK_ID = 4

RESERVED_TOKENS = ["<pad>", "<s>", "</s>", "<unk>", "<mask>"]


def _byte_to_char():
    """Invertible byte -> printable-char table (GPT-2 convention): printable
    latin bytes map to themselves, the rest shift into the U+0100 range."""
    keep = (list(range(ord("!"), ord("~") + 1))
            + list(range(ord("\xa1"), ord("\xac") + 1))
            + list(range(ord("\xae"), ord("\xff") + 1)))
    table = {}
    shifted = 0
    for b in range(256):
        if b in keep:
            table[b] = chr(b)
        else:
            table[b] = chr(256 + shifted)
            shifted += 1
    return table

_BYTE_TO_CHAR = _byte_to_char()
_CHAR_TO_BYTE = {c: b for b, c in _BYTE_TO_CHAR.items()}


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


def _split_units(text: str):
    """Split normalized text into word units; all but the first keep their
    leading space so decoding is pure concatenation."""
    words = text.split(" ")
    if words == [""]:
        return []
    return [words[0]] + [" " + w for w in words[1:]]


def _unit_to_chars(unit: str):
    return tuple(_BYTE_TO_CHAR[b] for b in unit.encode("utf-8"))


def tag_token(lang: str) -> str:
    return f"<2{lang.lower()}>"


@dataclass
class Vocabulary:
    """Shared multilingual subword vocabulary plus its merge table.

    ids: 0..4 reserved (PAD, BOS, EOS, UNK, MASK), then one tag token per
    language, then the 256 byte symbols, then merged symbols in creation
    order. Merges are stored in application order.
    """

    tokens: list[str]
    languages: list[str]
    merges: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self._token_to_id = {t: i for i, t in enumerate(self.tokens)}
        if len(self._token_to_id) != len(self.tokens):
            raise VocabularyError("duplicate token in vocabulary")
        for i, t in enumerate(RESERVED_TOKENS):
            if self.tokens[i] != t:
                raise VocabularyError(
                    f"reserved id {i} must be {t!r}, found {self.tokens[i]!r}")
        self._tag_ids = {}
        for lang in self.languages:
            tok = tag_token(lang)
            if tok not in self._token_to_id:
                raise VocabularyError(f"missing tag token for language {lang!r}")
            self._tag_ids[lang.lower()] = self._token_to_id[tok]

    def __len__(self):
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        try:
            return self._token_to_id[token]
        except KeyError:
            raise VocabularyError(f"token {token!r} not in vocabulary") from None

    def tag_id(self, lang: str) -> int:
        try:
            return self._tag_ids[lang.lower()]
        except KeyError:
            raise LanguageError(f"no tag token for language {lang!r}") from None

    def is_tag(self, token_id: int) -> bool:
        return token_id in self._tag_ids.values()

    @property
    def tag_ids(self) -> set[int]:
        return set(self._tag_ids.values())

    def save(self, prefix: str | Path):
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        with open(f"{prefix}.vocab", "w", encoding="utf-8") as f:
            for tok in self.tokens:
                f.write(tok + "\n")
        with open(f"{prefix}.merges", "w", encoding="utf-8") as f:
            for a, b in self.merges:
                f.write(f"{a} {b}\n")

    @classmethod
    def load(cls, prefix: str | Path) -> "Vocabulary":
        prefix = Path(prefix)
        vocab_path = Path(f"{prefix}.vocab")
        if not vocab_path.exists():
            raise ConfigError(f"vocabulary file not found: {vocab_path}")
        tokens = vocab_path.read_text(encoding="utf-8").splitlines()
        languages = [t[2:-1] for t in tokens
                     if t.startswith("<2") and t.endswith(">")]
        merges = []
        merges_path = Path(f"{prefix}.merges")
        if merges_path.exists():
            for line in merges_path.read_text(encoding="utf-8").splitlines():
                a, b = line.split(" ")
                merges.append((a, b))
        return cls(tokens=tokens, languages=languages, merges=merges)


def train_bpe(corpus_paths: Sequence[str | Path], vocab_size: int,
              min_freq: int = 2, languages: Sequence[str] = ()) -> Vocabulary:
    """Learn a shared byte-level BPE vocabulary over all corpus files.

    Merges are chosen by descending pair frequency, ties broken by
    lexicographically smallest pair, so retraining on identical input
    reproduces an identical merge table. Merging stops at ``vocab_size``
    or when no pair reaches ``min_freq``.
    """
    base = RESERVED_TOKENS + [tag_token(l) for l in languages] \
        + [_BYTE_TO_CHAR[b] for b in range(256)]
    if vocab_size < len(base):
        raise ConfigError(f"vocab_size {vocab_size} below minimum {len(base)} "
                          "(reserved + tags + byte alphabet)")

    unit_freqs: dict[tuple, int] = {}
    n_lines = 0
    for path in corpus_paths:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"corpus file not found: {path}")
        for line in path.read_text(encoding="utf-8").splitlines():
            line = normalize_whitespace(line)
            if not line:
                continue
            n_lines += 1
            for unit in _split_units(line):
                chars = _unit_to_chars(unit)
                unit_freqs[chars] = unit_freqs.get(chars, 0) + 1
    if n_lines == 0:
        raise ConfigError("empty corpus: no non-blank lines found")

    tokens = list(base)
    merges: list[tuple[str, str]] = []
    units = dict(unit_freqs)
    while len(tokens) < vocab_size:
        pair_freqs: dict[tuple[str, str], int] = {}
        for unit, freq in units.items():
            for a, b in zip(unit, unit[1:]):
                pair_freqs[(a, b)] = pair_freqs.get((a, b), 0) + freq
        candidates = [(f, p) for p, f in pair_freqs.items() if f >= min_freq]
        if not candidates:
            break
        best_freq = max(f for f, _ in candidates)
        best = min(p for f, p in candidates if f == best_freq)
        merges.append(best)
        tokens.append(best[0] + best[1])
        units = {_apply_merge(u, best): f for u, f in units.items()}

    return Vocabulary(tokens=tokens, languages=list(languages), merges=merges)


def _apply_merge(symbols: tuple, pair: tuple[str, str]) -> tuple:
    a, b = pair
    out = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def encode(text: str, vocab: Vocabulary) -> list[int]:
    """Subword-encode whitespace-normalized text into content token ids
    (no BOS/EOS). Symbols missing from the vocabulary map to UNK."""
    ids: list[int] = []
    for unit in _split_units(normalize_whitespace(text)):
        symbols = _unit_to_chars(unit)
        for pair in vocab.merges:
            symbols = _apply_merge(symbols, pair)
        for sym in symbols:
            ids.append(vocab._token_to_id.get(sym, UNK_ID))
    return ids


def decode(ids: Sequence[int], vocab: Vocabulary) -> str:
    """Reverse ``encode``. PAD/BOS/EOS and language tags are dropped; UNK
    and MASK render as their literal token strings."""
    pieces: list[str] = []
    buf: list[str] = []

    def flush():
        if buf:
            data = bytes(_CHAR_TO_BYTE[c] for c in "".join(buf))
            pieces.append(data.decode("utf-8", errors="replace"))
            buf.clear()

    for i in ids:
        i = int(i)
        if i in (PAD_ID, BOS_ID, EOS_ID) or vocab.is_tag(i):
            continue
        if i in (UNK_ID, MASK_ID):
            flush()
            pieces.append(vocab.tokens[i])
            continue
        if i < 0 or i >= len(vocab):
            raise VocabularyError(f"token id {i} outside vocabulary of size {len(vocab)}")
        buf.append(vocab.tokens[i])
    flush()
    return "".join(pieces)


def prefix_target_token(source_ids: Sequence[int], target_lang: str,
                        vocab: Vocabulary) -> list[int]:
    """Prepend the target-language tag to a [BOS, ..., EOS] sequence.

    The input is left unchanged; prefixing an already-tagged sequence is
    rejected rather than silently stacking tags.
    """
    tag = vocab.tag_id(target_lang)
    if source_ids and vocab.is_tag(int(source_ids[0])):
        raise LanguageError("sequence already carries a language tag")
    return [tag] + list(source_ids)


def mask_source(ids: Sequence[int], ratio: float, seed: int,
                vocab: Vocabulary) -> list[int]:
    """Replace round(ratio * n_maskable) content tokens with MASK.

    Language tags, BOS, EOS and PAD are never touched; the masked subset is
    a seeded uniform sample without replacement, and rounding is half-up.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ConfigError(f"mask ratio must be in [0, 1], got {ratio}")
    out = [int(i) for i in ids]
    maskable = [pos for pos, i in enumerate(out)
                if i not in (PAD_ID, BOS_ID, EOS_ID) and not vocab.is_tag(i)]
    k = int(np.floor(ratio * len(maskable) + 0.5))
    if k:
        rng = rng_for("mask", seed)
        chosen = rng.choice(len(maskable), size=k, replace=False)
        for c in chosen:
            out[maskable[int(c)]] = MASK_ID
    return out


# ---------------------------------------------------------------------------
# corpus manifests and batching
# ---------------------------------------------------------------------------

@dataclass
class ParallelExample:
    example_id: str
    source_lang: str
    target_lang: str
    source_ids: list[int]   # [tag, BOS, ..., EOS]
    target_ids: list[int]   # [BOS, ..., EOS]
    image_id: str

    @property
    def length(self) -> int:
        return max(len(self.source_ids), len(self.target_ids))


@dataclass
class CorpusManifest:
    split: str
    languages: list[str]
    text_paths: dict[str, Path]
    vtok_path: Optional[Path]
    image_ids_path: Optional[Path] = None


def load_manifest(path: str | Path) -> CorpusManifest:
    """Read and validate a JSON corpus manifest.

    All per-language text files must exist and be line-aligned; a length
    mismatch is a hard error naming the offending files.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"manifest not found: {path}")
    raw = json.loads(path.read_text(encoding="utf-8"))
    for key in ("split", "languages", "text_paths"):
        if key not in raw:
            raise ConfigError(f"manifest {path} missing key {key!r}")
    base = path.parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    text_paths = {}
    for lang in raw["languages"]:
        if lang not in raw["text_paths"]:
            raise ConfigError(f"manifest {path}: no text path for language {lang!r}")
        text_paths[lang] = resolve(raw["text_paths"][lang])

    manifest = CorpusManifest(
        split=raw["split"],
        languages=list(raw["languages"]),
        text_paths=text_paths,
        vtok_path=resolve(raw["vtok_path"]) if raw.get("vtok_path") else None,
        image_ids_path=(resolve(raw["image_ids_path"])
                        if raw.get("image_ids_path") else None),
    )

    counts = {}
    for lang, tp in manifest.text_paths.items():
        if not tp.exists():
            raise ConfigError(f"text file not found: {tp}")
        counts[lang] = len(tp.read_text(encoding="utf-8").splitlines())
    if len(set(counts.values())) > 1:
        detail = ", ".join(f"{manifest.text_paths[l]}={c}" for l, c in counts.items())
        raise ConfigError(f"misaligned corpus files (line counts differ): {detail}")
    return manifest


def manifest_lines(manifest: CorpusManifest, lang: str) -> list[str]:
    if lang not in manifest.text_paths:
        raise LanguageError(f"language {lang!r} not in manifest "
                            f"(has {manifest.languages})")
    lines = manifest.text_paths[lang].read_text(encoding="utf-8").splitlines()
    return [normalize_whitespace(l) for l in lines]


def manifest_image_ids(manifest: CorpusManifest, n: int) -> list[str]:
    if manifest.image_ids_path is not None:
        ids = manifest.image_ids_path.read_text(encoding="utf-8").splitlines()
        if len(ids) != n:
            raise ConfigError(f"image id file {manifest.image_ids_path} has "
                              f"{len(ids)} lines, corpus has {n}")
        return [i.strip() for i in ids]
    return [f"{manifest.split}-{i:06d}" for i in range(n)]


def load_parallel_examples(manifest: CorpusManifest, vocab: Vocabulary,
                           pivot: str = "en",
                           target_langs: Optional[Sequence[str]] = None
                           ) -> list[ParallelExample]:
    """Build (direction, line) examples for every pivot->target direction."""
    if target_langs is None:
        target_langs = [l for l in manifest.languages if l != pivot]
    src_lines = manifest_lines(manifest, pivot)
    image_ids = manifest_image_ids(manifest, len(src_lines))
    examples = []
    for tgt in target_langs:
        tgt_lines = manifest_lines(manifest, tgt)
        for n, (src, ref) in enumerate(zip(src_lines, tgt_lines)):
            source_ids = prefix_target_token(
                [BOS_ID] + encode(src, vocab) + [EOS_ID], tgt, vocab)
            target_ids = [BOS_ID] + encode(ref, vocab) + [EOS_ID]
            examples.append(ParallelExample(
                example_id=f"{manifest.split}-{n:06d}-{pivot}2{tgt}",
                source_lang=pivot, target_lang=tgt,
                source_ids=source_ids, target_ids=target_ids,
                image_id=image_ids[n]))
    return examples


@dataclass
class Batch:
    examples: list[ParallelExample]

    def padded(self, side: str) -> np.ndarray:
        seqs = [e.source_ids if side == "source" else e.target_ids
                for e in self.examples]
        width = max(len(s) for s in seqs)
        out = np.full((len(seqs), width), PAD_ID, dtype=np.int64)
        for row, s in enumerate(seqs):
            out[row, :len(s)] = s
        return out

    @property
    def n_target_tokens(self) -> int:
        return sum(len(e.target_ids) - 1 for e in self.examples)


def make_batches(examples: Sequence[ParallelExample], max_tokens: int,
                 seed: Optional[int] = None) -> list[Batch]:
    """Sort by length, pack greedily under the padded-token budget.

    The budget counts padded tokens (max length in the batch times batch
    size), source and target separately, the larger side governing. With a
    seed the batch order is shuffled; contents stay deterministic.
    """
    if not examples:
        return []
    longest = max(e.length for e in examples)
    if longest > max_tokens:
        raise ConfigError(f"max_tokens={max_tokens} below longest example "
                          f"({longest} tokens)")
    ordered = sorted(examples, key=lambda e: (e.length, e.example_id))
    batches: list[Batch] = []
    current: list[ParallelExample] = []
    max_src = max_tgt = 0
    for ex in ordered:
        new_src = max(max_src, len(ex.source_ids))
        new_tgt = max(max_tgt, len(ex.target_ids))
        if current and max(new_src, new_tgt) * (len(current) + 1) > max_tokens:
            batches.append(Batch(examples=current))
            current, max_src, max_tgt = [], 0, 0
            new_src, new_tgt = len(ex.source_ids), len(ex.target_ids)
        current.append(ex)
        max_src, max_tgt = new_src, new_tgt
    if current:
        batches.append(Batch(examples=current))
    if seed is not None:
        order = rng_for("batches", seed).permutation(len(batches))
        batches = [batches[i] for i in order]
    return batches
