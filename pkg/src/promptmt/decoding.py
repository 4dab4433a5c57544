"""Length-normalized beam search over the trained model.

Each step ranks every (hypothesis, token) continuation by cumulative log
probability and keeps the best ``beam``; continuations that pick EOS move
to the finished pool. When the length cap is reached, surviving hypotheses
take EOS with its model log probability and are flagged as forced. The
returned hypothesis maximizes logprob / length^alpha over the finished
pool, ties broken toward the lexicographically smaller token sequence, so
decoding is fully deterministic. With beam 1 this reduces to greedy
decoding; with a beam at least as wide as the expansion tree it is
exhaustive search.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import autodiff as ad
from .errors import ConfigError
from .model import MultimodalTranslator
from .text import BOS_ID, EOS_ID, Vocabulary
from .vision import VisualTokens


@dataclass
class Hypothesis:
    tokens: list[int]          # [BOS, ..., EOS] once finished
    logprob: float             # sum over generated tokens, EOS included
    alpha: float = 1.0
    forced: bool = False       # terminated by the length cap

    @property
    def n_generated(self) -> int:
        return len(self.tokens) - 1

    @property
    def score(self) -> float:
        return self.logprob / (self.n_generated ** self.alpha)


def default_max_len(source_len: int) -> int:
    return 2 * source_len + 8


def beam_search(model: MultimodalTranslator, vocab: Vocabulary,
                source_ids: list[int], target_lang: str,
                visual: Optional[VisualTokens] = None, beam: int = 5,
                max_len: Optional[int] = None,
                alpha: float = 1.0) -> Hypothesis:
    """Decode one tag-prefixed source sequence into the target language."""
    if beam < 1:
        raise ConfigError(f"beam must be >= 1, got {beam}")
    if not source_ids or source_ids[0] != vocab.tag_id(target_lang):
        raise ConfigError(f"source must be prefixed with the {target_lang!r} "
                          "tag before decoding")
    if max_len is None:
        max_len = default_max_len(len(source_ids))
    with ad.no_grad():
        memory, src_mask = model.prepare_source(source_ids, visual)
        return _search(model, memory, src_mask, len(vocab), beam, max_len,
                       alpha)


def _search(model, memory, src_mask, vocab_size, beam, max_len, alpha
            ) -> Hypothesis:
    alive: list[tuple[float, list[int]]] = [(0.0, [BOS_ID])]
    finished: list[Hypothesis] = []
    for step in range(1, max_len + 1):
        if not alive:
            break
        # alive prefixes always share a length, so one batched decode covers
        # the whole beam
        logprobs = model.next_token_logprobs_batch(
            memory, [toks for _, toks in alive], src_mask)
        candidates: list[tuple[float, list[int], bool]] = []
        at_cap = step == max_len
        for (lp, toks), row in zip(alive, logprobs):
            if at_cap:
                candidates.append((lp + float(row[EOS_ID]),
                                   toks + [EOS_ID], True))
            else:
                for tok in range(vocab_size):
                    candidates.append((lp + float(row[tok]),
                                       toks + [tok], False))
        candidates.sort(key=lambda c: (-c[0], c[1]))
        alive = []
        for lp, toks, forced in candidates[:beam]:
            if toks[-1] == EOS_ID:
                finished.append(Hypothesis(tokens=toks, logprob=lp,
                                           alpha=alpha, forced=forced))
            else:
                alive.append((lp, toks))
    return min(finished, key=lambda h: (-h.score, h.tokens))


def greedy_decode(model: MultimodalTranslator, vocab: Vocabulary,
                  source_ids: list[int], target_lang: str,
                  visual: Optional[VisualTokens] = None,
                  max_len: Optional[int] = None) -> Hypothesis:
    """Beam 1; kept as an explicit name for tests and quick scripts."""
    return beam_search(model, vocab, source_ids, target_lang, visual,
                       beam=1, max_len=max_len, alpha=1.0)
