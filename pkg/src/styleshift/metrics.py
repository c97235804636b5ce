"""Automatic transfer metrics: BLEU, perplexity, and style accuracy.

BLEU uses lowercase, punctuation-splitting tokenization, modified n-gram
precisions for n = 1..4 with a 0.1 numerator floor whenever a precision
would be zero, and the usual brevity penalty. Corpus scores aggregate the
summed n-gram statistics before taking precisions. The contract is parity
with the in-repo oracle, not byte parity with external tools.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .decoding import LogitProvider, logprobs

log = logging.getLogger(__name__)

BLEU_ORDER = 4
SMOOTH_EPS = 0.1

_BLEU_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class MetricsError(ValueError):
    pass


def bleu_tokenize(text: str) -> list[str]:
    """Lowercase and split words from punctuation (one token per mark)."""
    return _BLEU_TOKEN_RE.findall(text.lower())


@dataclass
class BleuStats:
    """Summable sufficient statistics for BLEU."""

    hits: list[int]
    totals: list[int]
    candidate_len: int
    reference_len: int

    @classmethod
    def zero(cls) -> "BleuStats":
        return cls([0] * BLEU_ORDER, [0] * BLEU_ORDER, 0, 0)

    def add(self, other: "BleuStats") -> None:
        for n in range(BLEU_ORDER):
            self.hits[n] += other.hits[n]
            self.totals[n] += other.totals[n]
        self.candidate_len += other.candidate_len
        self.reference_len += other.reference_len


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_len(cand_len: int, ref_lens: list[int]) -> int:
    # closest reference length; ties broken toward the shorter one
    return min(ref_lens, key=lambda r: (abs(r - cand_len), r))


def sentence_stats(candidate: str, references: Sequence[str]) -> BleuStats:
    cand = bleu_tokenize(candidate)
    refs = [bleu_tokenize(r) for r in references]
    stats = BleuStats.zero()
    stats.candidate_len = len(cand)
    stats.reference_len = _closest_ref_len(len(cand), [len(r) for r in refs])
    for n in range(1, BLEU_ORDER + 1):
        cand_counts = _ngrams(cand, n)
        max_ref: Counter = Counter()
        for ref in refs:
            for gram, count in _ngrams(ref, n).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        stats.totals[n - 1] = max(len(cand) - n + 1, 0)
        stats.hits[n - 1] = sum(min(c, max_ref[g]) for g, c in cand_counts.items())
    return stats


def score_stats(stats: BleuStats) -> float:
    """BLEU in [0, 100] from summed statistics.

    Orders with no candidate n-grams at all are skipped (effective-order
    convention), so identical corpora score exactly 100 regardless of
    sentence length; zero precisions at populated orders get the 0.1
    numerator floor instead.
    """
    if stats.candidate_len == 0:
        return 0.0
    log_precision = 0.0
    used_orders = 0
    for n in range(BLEU_ORDER):
        if stats.totals[n] == 0:
            continue
        used_orders += 1
        numerator = stats.hits[n] if stats.hits[n] > 0 else SMOOTH_EPS
        log_precision += np.log(numerator / stats.totals[n])
    if used_orders == 0:
        return 0.0
    if stats.candidate_len > stats.reference_len:
        brevity = 1.0
    else:
        brevity = np.exp(1.0 - stats.reference_len / stats.candidate_len)
    return float(100.0 * brevity * np.exp(log_precision / used_orders))


def bleu(candidate: str, references: Sequence[str]) -> float:
    """Single-pair BLEU-4. Empty candidates score 0.0 rather than erroring."""
    if not references:
        raise MetricsError("at least one reference is required")
    if not candidate.strip():
        return 0.0
    return score_stats(sentence_stats(candidate, references))


def corpus_bleu(candidates: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    """Corpus BLEU: n-gram statistics summed across pairs, scored once."""
    if len(candidates) != len(references):
        raise MetricsError(
            f"got {len(candidates)} candidates but {len(references)} reference sets"
        )
    if not candidates:
        raise MetricsError("corpus BLEU needs at least one pair")
    total = BleuStats.zero()
    for cand, refs in zip(candidates, references):
        total.add(sentence_stats(cand, refs))
    return score_stats(total)


def corpus_bleu_pair(
    outputs: Sequence[str],
    sources: Sequence[str],
    references: Sequence[str],
) -> tuple[float, float]:
    """(self-BLEU vs sources, reference-BLEU vs references) for a run."""
    if not (len(outputs) == len(sources) == len(references)):
        raise MetricsError("outputs, sources, and references must be aligned")
    s_sbleu = corpus_bleu(outputs, [[s] for s in sources])
    r_sbleu = corpus_bleu(outputs, [[r] for r in references])
    return s_sbleu, r_sbleu


def perplexity(provider: LogitProvider, text: str) -> float:
    """exp of the mean negative token log-likelihood under the provider."""
    tokens = provider.encode(text, strict=True)
    if not tokens:
        raise MetricsError("text produced no tokens to score")
    index = {tok: i for i, tok in enumerate(provider.vocab())}
    total = 0.0
    for t, token in enumerate(tokens):
        lp = logprobs(provider, tokens[:t])
        total += float(lp[index[token]])
    return float(np.exp(-total / len(tokens)))


class StyleClassifier(Protocol):
    labels: tuple[str, ...]

    def classify(self, text: str) -> tuple[str, float]: ...


class LexiconClassifier:
    """Toy style classifier: majority vote over per-label word sets.

    The label whose lexicon matches the most tokens wins; ties (including
    zero hits) yield "unknown" with score 0. Scores are the winning label's
    share of all lexicon hits.
    """

    def __init__(self, lexicons: dict[str, set[str]]):
        if not lexicons:
            raise MetricsError("classifier needs at least one label")
        self.lexicons = {label: {w.lower() for w in words} for label, words in lexicons.items()}
        self.labels = tuple(self.lexicons) + ("unknown",)

    @classmethod
    def from_file(cls, path: str | Path) -> "LexiconClassifier":
        """Parse `label: w1 w2 ...` lines."""
        lexicons: dict[str, set[str]] = {}
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            label, sep, words = line.partition(":")
            if not sep or not words.split():
                raise MetricsError(f"{path}: line {line_no}: expected 'label: w1 w2 ...'")
            lexicons[label.strip()] = set(words.split())
        return cls(lexicons)

    def classify(self, text: str) -> tuple[str, float]:
        tokens = [t for t in bleu_tokenize(text) if t.isalnum()]
        counts = {
            label: sum(1 for t in tokens if t in words)
            for label, words in self.lexicons.items()
        }
        total = sum(counts.values())
        if total == 0:
            return "unknown", 0.0
        best = max(counts.values())
        winners = [label for label, c in counts.items() if c == best]
        if len(winners) != 1:
            return "unknown", 0.0
        return winners[0], best / total


def style_accuracy(
    classifier: StyleClassifier,
    outputs: Sequence[str],
    target: str,
) -> float:
    """Fraction of outputs classified as the target style.

    A classifier failure on an item counts the item as a miss and logs a
    warning rather than aborting the evaluation.
    """
    if not outputs:
        raise MetricsError("style accuracy needs at least one output")
    hits = 0
    for i, text in enumerate(outputs):
        try:
            label, _ = classifier.classify(text)
        except Exception as exc:
            log.warning("classifier failed on item %d (%s); counting as miss", i, exc)
            continue
        if label == target:
            hits += 1
    return hits / len(outputs)


@dataclass
class EvalReport:
    accuracy: float
    s_sbleu: float
    ppl: float
    n_items: int
    r_sbleu: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise MetricsError("accuracy out of range")
        if self.n_items < 1:
            raise MetricsError("report needs at least one item")
