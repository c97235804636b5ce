"""Prompt synthesis: per-pair style analysis, reranking, and assembly.

Each selected few-shot pair is analyzed along four dimensions (lexis,
syntax, mood, semantics) by a text-generation client, producing an
analysis chain. Chains are reordered by similarity to the input sentence
and rendered into one deterministic prompt.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from .corpus import FewShotPair
from .embedding import (
    DgcnModel,
    EmbeddingCache,
    SentenceEmbedding,
    cosine_similarity,
    embed_pair,
)
from .graphs import FlatGraphSource
from .templates import (
    ANALYSIS_LINE,
    PAIR_SEPARATOR,
    PROMPT_HEADER,
    SAMPLE_LINE,
    render_input_block,
)

log = logging.getLogger(__name__)

ANALYSIS_ATTEMPTS = 3


class StyleDimension(enum.Enum):
    LEXIS = "Lexis"
    SYNTAX = "Syntax"
    MOOD = "Mood"
    SEMANTICS = "Semantics"


# Default descriptive prompts, one per analysis dimension.
DEFAULT_DIMENSION_PROMPTS: dict[StyleDimension, str] = {
    StyleDimension.LEXIS: (
        "Analyze the lexical variations between the following sentence pairs "
        "in terms of word choice, vocabulary, and stylistic expression."
    ),
    StyleDimension.SYNTAX: (
        "Examine and compare the syntactic structures of these style transfer "
        "sentence pairs, focusing on sentence construction, grammatical "
        "patterns, and syntax differences."
    ),
    StyleDimension.MOOD: (
        "Evaluate the tone of these texts by comparing their mood, emotional "
        "cues, and overall attitude towards the subject matter."
    ),
    StyleDimension.SEMANTICS: (
        "Analyze the semantic shifts between these sentence pairs, identifying "
        "differences in meaning, context, and interpretation."
    ),
}

DIMENSION_ORDER = (
    StyleDimension.LEXIS,
    StyleDimension.SYNTAX,
    StyleDimension.MOOD,
    StyleDimension.SEMANTICS,
)


class PromptError(RuntimeError):
    pass


class AnalysisError(PromptError):
    """A dimension analysis could not be obtained from the client."""


class TransportError(PromptError):
    """Client-side transport failure; retried up to ANALYSIS_ATTEMPTS."""


class TextGenClient:
    """Text-completion capability used for pattern analysis.

    Implementations must be deterministic at temperature 0 for identical
    requests, and safe to call from multiple threads.
    """

    def complete(self, prompt: str, temperature: float = 0.0, max_tokens: int = 512) -> str:
        raise NotImplementedError


class EchoTextGen(TextGenClient):
    """Mock client that returns the request body; the deterministic default."""

    def complete(self, prompt: str, temperature: float = 0.0, max_tokens: int = 512) -> str:
        return prompt


def render_pair(pair: FewShotPair) -> str:
    if pair.target is None:
        raise PromptError(f"pair {pair.pair_id} has no target side")
    return f"{pair.source}{PAIR_SEPARATOR}{pair.target}"


def analyze_pattern(
    pair: FewShotPair,
    dim: StyleDimension,
    client: TextGenClient,
    descriptive_prompts: dict[StyleDimension, str] | None = None,
) -> str:
    """One dimension analysis. Requests run at temperature 0.

    The outbound request is the dimension's descriptive prompt followed by
    the rendered pair. Transport failures and empty responses are retried;
    after ANALYSIS_ATTEMPTS failures an AnalysisError is raised.
    """
    prompts = descriptive_prompts or DEFAULT_DIMENSION_PROMPTS
    request = f"{prompts[dim]}\n\n{render_pair(pair)}"
    last_error: Exception | None = None
    for attempt in range(ANALYSIS_ATTEMPTS):
        try:
            response = client.complete(request, temperature=0.0).strip()
        except TransportError as exc:
            last_error = exc
            log.warning("analysis attempt %d failed for %s: %s", attempt + 1, dim.value, exc)
            continue
        if response:
            return response
        last_error = AnalysisError("client returned an empty analysis")
    raise AnalysisError(
        f"{dim.value} analysis failed after {ANALYSIS_ATTEMPTS} attempts: {last_error}"
    )


@dataclass
class AnalysisChain:
    """A few-shot pair plus its four dimension analyses and embedding."""

    pair: FewShotPair
    analyses: dict[StyleDimension, str]
    pair_embedding: SentenceEmbedding

    def __post_init__(self) -> None:
        missing = [d.value for d in DIMENSION_ORDER if not self.analyses.get(d)]
        if missing:
            raise PromptError(f"chain missing analyses for: {', '.join(missing)}")

    def render(self, number: int) -> str:
        lines = [
            SAMPLE_LINE.format(
                number=number, source=self.pair.source, target=self.pair.target
            )
        ]
        for dim in DIMENSION_ORDER:
            lines.append(ANALYSIS_LINE.format(analysis=self.analyses[dim], label=dim.value))
        return "\n".join(lines)


def build_chain(
    pair: FewShotPair,
    client: TextGenClient,
    model: DgcnModel,
    graphs: FlatGraphSource | None = None,
    cache: EmbeddingCache | None = None,
    descriptive_prompts: dict[StyleDimension, str] | None = None,
) -> AnalysisChain:
    """Analyze all four dimensions in fixed order and attach the embedding."""
    analyses: dict[StyleDimension, str] = {}
    for dim in DIMENSION_ORDER:
        try:
            analyses[dim] = analyze_pattern(pair, dim, client, descriptive_prompts)
        except AnalysisError:
            raise
        except Exception as exc:
            raise AnalysisError(f"{dim.value} analysis failed: {exc}") from exc
    embedding = embed_pair(pair, model, graphs=graphs, cache=cache)
    return AnalysisChain(pair=pair, analyses=analyses, pair_embedding=embedding)


def rerank(input_emb: SentenceEmbedding, chains: list[AnalysisChain]) -> list[AnalysisChain]:
    """Stable sort by cosine similarity to the input, most similar first."""
    similarities = [cosine_similarity(input_emb, c.pair_embedding) for c in chains]
    order = sorted(range(len(chains)), key=lambda i: -similarities[i])
    return [chains[i] for i in order]


@dataclass
class SynthesizedPrompt:
    """The assembled transfer prompt; ``rendered`` is what the model sees."""

    task_header: str
    ordered_chains: list[AnalysisChain]
    input_slot: str
    rendered: str = field(init=False)

    def __post_init__(self) -> None:
        blocks = [self.task_header]
        for number, chain in enumerate(self.ordered_chains, start=1):
            blocks.append(chain.render(number))
        blocks.append(render_input_block(self.input_slot))
        self.rendered = "\n\n".join(blocks)


def assemble_prompt(
    source_style: str,
    target_style: str,
    chains: list[AnalysisChain],
    x: str,
) -> SynthesizedPrompt:
    """Render header, chains in the given order, and the input block."""
    if not x:
        raise PromptError("input text must be nonempty")
    if source_style == target_style:
        raise PromptError("source and target styles must differ")
    header = PROMPT_HEADER.format(source_style=source_style, target_style=target_style)
    return SynthesizedPrompt(task_header=header, ordered_chains=list(chains), input_slot=x)
