"""Negative-sample construction from a fixed irrelevant context.

The context text is segmented into chunks of at most ``chunk_size``
whitespace tokens by recursive splitting, and the chunk least similar to
the synthesized prompt in the embedding space is used as the repelling
context during decoding.
"""

from __future__ import annotations

from dataclasses import dataclass

from .embedding import (
    DgcnModel,
    EmbeddingCache,
    EmbeddingError,
    SentenceEmbedding,
    cosine_similarity,
    embed_text,
)
from .graphs import FlatGraphSource, GraphError

DEFAULT_CHUNK_SIZE = 256
DEFAULT_SEPARATORS = ("\n\n", "\n", ". ", " ")


class NegativeSampleError(ValueError):
    pass


@dataclass
class NegativeSample:
    text: str
    chunk_index: int
    similarity_to_prompt: float

    def __post_init__(self) -> None:
        if not self.text:
            raise NegativeSampleError("negative sample text must be nonempty")
        if not -1.0 <= self.similarity_to_prompt <= 1.0:
            raise NegativeSampleError("similarity out of [-1, 1]")


def _token_count(text: str) -> int:
    return len(text.split())


def split_chunks(
    text: str,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    separators: tuple[str, ...] = DEFAULT_SEPARATORS,
) -> list[str]:
    """Recursively split ``text`` into chunks of at most ``chunk_size`` tokens.

    Separators are tried in order. Pieces produced by a split are packed
    greedily: consecutive pieces are re-joined with the separator while the
    joined chunk stays within budget; an oversized piece recurses on the
    remaining separators. A piece no separator can break becomes its own
    chunk even when oversized.
    """
    if chunk_size < 1:
        raise NegativeSampleError("chunk_size must be >= 1")
    if not text:
        return []
    return _split(text, chunk_size, tuple(separators))


def _split(text: str, chunk_size: int, separators: tuple[str, ...]) -> list[str]:
    if _token_count(text) <= chunk_size:
        return [text]
    for i, sep in enumerate(separators):
        pieces = [p for p in text.split(sep) if p]
        if len(pieces) <= 1:
            continue
        remaining = separators[i + 1 :]
        chunks: list[str] = []
        buffer: list[str] = []
        for piece in pieces:
            if _token_count(piece) > chunk_size:
                if buffer:
                    chunks.append(sep.join(buffer))
                    buffer = []
                chunks.extend(_split(piece, chunk_size, remaining))
            elif buffer and _token_count(sep.join([*buffer, piece])) > chunk_size:
                chunks.append(sep.join(buffer))
                buffer = [piece]
            else:
                buffer.append(piece)
        if buffer:
            chunks.append(sep.join(buffer))
        return chunks
    return [text]


def select_negative(
    chunks: list[str],
    prompt_emb: SentenceEmbedding,
    model: DgcnModel,
    graphs: FlatGraphSource | None = None,
    cache: EmbeddingCache | None = None,
) -> NegativeSample:
    """Pick the chunk least cosine-similar to the prompt embedding.

    Chunks embed as the mean of their sentence embeddings. Ties go to the
    lowest chunk index; chunks that cannot be embedded are skipped unless
    every chunk fails.
    """
    if not chunks:
        raise NegativeSampleError("no chunks to select from")
    best: NegativeSample | None = None
    failures: list[str] = []
    for index, chunk in enumerate(chunks):
        try:
            emb = embed_text(chunk, model, graphs=graphs, cache=cache)
        except (EmbeddingError, GraphError) as exc:
            failures.append(f"chunk {index}: {exc}")
            continue
        similarity = cosine_similarity(prompt_emb, emb)
        if best is None or similarity < best.similarity_to_prompt:
            best = NegativeSample(
                text=chunk, chunk_index=index, similarity_to_prompt=similarity
            )
    if best is None:
        raise NegativeSampleError(
            "no chunk could be embedded: " + "; ".join(failures)
        )
    return best
