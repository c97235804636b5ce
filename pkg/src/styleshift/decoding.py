"""Contrastive decoding over an abstract next-token logit provider.

The next-token distribution is formed from three conditionals computed by
the same model under different contexts: the synthesized prompt, the bare
input, and a negative sample prepended to the input. Their log-probs are
combined as

    score(y) = (1 + alpha + beta) * lp_prompt(y)
               - alpha * lp_plain(y) - beta * lp_neg(y)

restricted to tokens whose prompt-conditioned probability is at least
``plausibility_epsilon`` times the maximum, then renormalized with a
softmax. With alpha = beta = 0 this reduces to ordinary decoding on the
prompt context.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .templates import render_input_block

# Subtracted log-probs are clipped here so tokens the contrast contexts
# consider impossible cannot dominate with an unbounded bonus.
LOGPROB_FLOOR = -30.0


class ProviderError(RuntimeError):
    """Transport-level provider failure; safe to retry."""


class ContractViolation(RuntimeError):
    """The provider returned data that breaks its interface contract."""


class UnknownTokenError(ValueError):
    def __init__(self, token: str):
        super().__init__(f"token {token!r} is not in the provider vocabulary")
        self.token = token


class GenerationError(RuntimeError):
    """Provider failure mid-sequence; carries the tokens emitted so far."""

    def __init__(self, message: str, partial: "TransferResult"):
        super().__init__(message)
        self.partial = partial


class LogitProvider(Protocol):
    eos_token: str | None

    def vocab(self) -> list[str]: ...

    def logits(self, context: Sequence[str]) -> np.ndarray: ...

    def encode(self, text: str, strict: bool = False) -> list[str]: ...

    def decode(self, tokens: Sequence[str]) -> str: ...


@dataclass
class DecodingConfig:
    alpha: float = 1.0
    beta: float = 1.0
    plausibility_epsilon: float = 0.1
    max_tokens: int = 64
    strategy: str = "greedy"           # "greedy" or "sampled"
    temperature: float = 1.0
    sample_seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if not 0.0 < self.plausibility_epsilon <= 1.0:
            raise ValueError("plausibility_epsilon must be in (0, 1]")
        if self.max_tokens < 0:
            raise ValueError("max_tokens must be >= 0")
        if self.strategy not in ("greedy", "sampled"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "sampled" and self.temperature <= 0:
            raise ValueError("temperature must be positive for sampling")


def log_softmax(values: np.ndarray) -> np.ndarray:
    """Numerically stable log-softmax; tolerates -inf entries."""
    values = np.asarray(values, dtype=np.float64)
    peak = values.max()
    if not np.isfinite(peak):
        raise ContractViolation("log-softmax input has no finite entry")
    shifted = values - peak
    with np.errstate(divide="ignore"):
        return shifted - np.log(np.exp(shifted).sum())


def logprobs(provider: LogitProvider, context: Sequence[str]) -> np.ndarray:
    """Log-softmax of the provider's next-token logits for a context."""
    raw = np.asarray(provider.logits(list(context)), dtype=np.float64)
    if np.isnan(raw).any():
        raise ContractViolation("provider returned NaN logits")
    return log_softmax(raw)


def contrast_scores(
    lp_prompt: np.ndarray,
    lp_plain: np.ndarray,
    lp_neg: np.ndarray,
    cfg: DecodingConfig,
    floor: float = LOGPROB_FLOOR,
) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized contrastive scores and the plausibility mask.

    Tokens must reach ``plausibility_epsilon`` times the prompt-context
    maximum probability to stay in the candidate set; the rest score -inf.
    The argmax always qualifies, so the set is never empty.
    """
    if not (lp_prompt.shape == lp_plain.shape == lp_neg.shape):
        raise ValueError("log-prob vectors must share one vocabulary")
    threshold = lp_prompt.max() + np.log(cfg.plausibility_epsilon)
    mask = lp_prompt >= threshold
    plain = np.maximum(lp_plain, floor)
    neg = np.maximum(lp_neg, floor)
    scores = np.full_like(lp_prompt, -np.inf)
    scores[mask] = (
        (1.0 + cfg.alpha + cfg.beta) * lp_prompt[mask]
        - cfg.alpha * plain[mask]
        - cfg.beta * neg[mask]
    )
    return scores, mask


def combine(
    lp_prompt: np.ndarray,
    lp_plain: np.ndarray,
    lp_neg: np.ndarray,
    cfg: DecodingConfig,
    floor: float = LOGPROB_FLOOR,
) -> np.ndarray:
    """Normalized contrastive log-prob vector (logsumexp equals 0)."""
    scores, _ = contrast_scores(lp_prompt, lp_plain, lp_neg, cfg, floor=floor)
    return log_softmax(scores)


@dataclass
class GenerationState:
    """The three parallel contexts plus everything emitted so far.

    Every emitted token is appended to all three contexts, keeping the
    conditionals aligned step by step.
    """

    prompt_context: list[str]
    plain_context: list[str]
    negative_context: list[str]
    emitted: list[str] = field(default_factory=list)

    def append(self, token: str) -> None:
        self.prompt_context.append(token)
        self.plain_context.append(token)
        self.negative_context.append(token)
        self.emitted.append(token)


@dataclass
class StepDiagnostic:
    token: str
    lp_prompt: float
    lp_plain: float
    lp_neg: float
    lp_combined: float


def _select(combined: np.ndarray, cfg: DecodingConfig, rng: np.random.Generator | None) -> int:
    if cfg.strategy == "greedy":
        return int(np.argmax(combined))   # first max wins ties
    if rng is None:
        rng = np.random.default_rng(cfg.sample_seed)
    probs = np.exp(log_softmax(combined / cfg.temperature))
    probs = probs / probs.sum()
    return int(rng.choice(len(combined), p=probs))


def decode_step(
    state: GenerationState,
    provider: LogitProvider,
    cfg: DecodingConfig,
    rng: np.random.Generator | None = None,
) -> tuple[str, StepDiagnostic]:
    """Emit one token: three conditional lookups, combine, select, append."""
    lp_prompt = logprobs(provider, state.prompt_context)
    lp_plain = logprobs(provider, state.plain_context)
    lp_neg = logprobs(provider, state.negative_context)
    combined = combine(lp_prompt, lp_plain, lp_neg, cfg)
    choice = _select(combined, cfg, rng)
    token = provider.vocab()[choice]
    state.append(token)
    diag = StepDiagnostic(
        token=token,
        lp_prompt=float(lp_prompt[choice]),
        lp_plain=float(lp_plain[choice]),
        lp_neg=float(lp_neg[choice]),
        lp_combined=float(combined[choice]),
    )
    return token, diag


@dataclass
class TransferResult:
    text: str
    tokens: list[str]
    steps: list[StepDiagnostic]


def generate(
    provider: LogitProvider,
    prompt,
    x: str,
    neg,
    cfg: DecodingConfig,
) -> TransferResult:
    """Decode a full sequence under the three-context contrast.

    ``prompt`` may be a SynthesizedPrompt or raw text; ``neg`` a
    NegativeSample or raw text. The plain and negative contexts share the
    prompt's trailing input block so all three end at the same cue.
    """
    prompt_text = getattr(prompt, "rendered", prompt)
    neg_text = getattr(neg, "text", neg)
    input_block = render_input_block(x)
    state = GenerationState(
        prompt_context=provider.encode(prompt_text),
        plain_context=provider.encode(input_block),
        negative_context=provider.encode(f"{neg_text}\n\n{input_block}"),
    )
    rng = np.random.default_rng(cfg.sample_seed) if cfg.strategy == "sampled" else None
    steps: list[StepDiagnostic] = []
    tokens: list[str] = []
    eos = getattr(provider, "eos_token", None)
    for _ in range(cfg.max_tokens):
        try:
            token, diag = decode_step(state, provider, cfg, rng)
        except (ProviderError, ContractViolation) as exc:
            partial = TransferResult(provider.decode(tokens), tokens, steps)
            raise GenerationError(f"provider failed mid-sequence: {exc}", partial) from exc
        steps.append(diag)
        if eos is not None and token == eos:
            break
        tokens.append(token)
    return TransferResult(provider.decode(tokens), tokens, steps)


class BigramProvider:
    """Deterministic next-token provider backed by an explicit bigram table.

    ``rows`` maps a previous token to its next-token probability row; the
    ``start`` row serves the empty context. Rows must sum to 1 within 1e-9.
    ``encode`` keeps whitespace tokens that are in the vocabulary and drops
    the rest (or raises when strict), which lets arbitrary prompt text
    condition a toy model.
    """

    def __init__(
        self,
        vocab: list[str],
        rows: dict[str, dict[str, float]],
        start: dict[str, float] | None = None,
        eos_token: str | None = None,
    ):
        if len(set(vocab)) != len(vocab):
            raise ValueError("vocabulary contains duplicates")
        self._vocab = list(vocab)
        self._index = {tok: i for i, tok in enumerate(self._vocab)}
        self.eos_token = eos_token
        if eos_token is not None and eos_token not in self._index:
            raise ValueError("eos_token must be in the vocabulary")
        self._rows = {prev: self._to_row(prev, row) for prev, row in rows.items()}
        if start is None:
            self._start = np.full(len(vocab), 1.0 / len(vocab))
        else:
            self._start = self._to_row("<start>", start)

    def _to_row(self, name: str, row: dict[str, float]) -> np.ndarray:
        dense = np.zeros(len(self._vocab))
        for token, prob in row.items():
            if token not in self._index:
                raise ValueError(f"row {name!r}: token {token!r} not in vocabulary")
            if prob < 0:
                raise ValueError(f"row {name!r}: negative probability")
            dense[self._index[token]] = prob
        if abs(dense.sum() - 1.0) > 1e-9:
            raise ValueError(f"row {name!r} sums to {dense.sum()}, expected 1")
        return dense

    def vocab(self) -> list[str]:
        return list(self._vocab)

    def logits(self, context: Sequence[str]) -> np.ndarray:
        if context:
            last = context[-1]
            if last not in self._rows:
                raise UnknownTokenError(last)
            row = self._rows[last]
        else:
            row = self._start
        with np.errstate(divide="ignore"):
            return np.log(row)

    def encode(self, text: str, strict: bool = False) -> list[str]:
        tokens = []
        for raw in text.split():
            if raw in self._index:
                tokens.append(raw)
            elif strict:
                raise UnknownTokenError(raw)
        return tokens

    def decode(self, tokens: Sequence[str]) -> str:
        return " ".join(tokens)
