"""Dependency graphs and CoNLL-U ingestion.

A sentence is represented as an ordered list of token strings plus labeled
directed edges (head -> dependent). Graphs come either from CoNLL-U files
produced by an external parser or from the built-in flat fallback, so the
rest of the pipeline never depends on a parser being installed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path


class ConlluParseError(ValueError):
    """Raised for malformed CoNLL-U input; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class GraphError(ValueError):
    """Raised when a text cannot be turned into a dependency graph."""


@dataclass
class DependencyGraph:
    """One sentence: ordered tokens plus (head, dependent, relation) edges.

    Edge indices are 0-based positions into ``nodes``. Root rows of a
    CoNLL-U sentence produce no edge.
    """

    nodes: list[str]
    edges: list[tuple[int, int, str]]
    sentence_id: str = ""
    text: str | None = None

    def __post_init__(self) -> None:
        if not self.nodes:
            raise GraphError("graph must have at least one node")
        n = len(self.nodes)
        seen = set()
        for head, dep, rel in self.edges:
            if not (0 <= head < n and 0 <= dep < n):
                raise GraphError(
                    f"edge ({head}, {dep}, {rel!r}) out of range for {n} nodes"
                )
            if (head, dep, rel) in seen:
                raise GraphError(f"duplicate edge ({head}, {dep}, {rel!r})")
            seen.add((head, dep, rel))

    def canonical(self) -> str:
        """Stable serialization used for cache keys and determinism checks."""
        node_part = "\x1f".join(self.nodes)
        edge_part = ";".join(
            f"{h}>{d}:{r}" for h, d, r in sorted(self.edges)
        )
        return f"{node_part}\x1e{edge_part}"


def read_conllu(text: str) -> list[DependencyGraph]:
    """Parse CoNLL-U text into one DependencyGraph per sentence.

    Accepts the standard 10-column tab-separated format with blank-line
    sentence separators and ``#`` comment lines. ``# sent_id`` and
    ``# text`` comments are attached to the resulting graph when present.
    Malformed rows (wrong column count, non-integer ID/HEAD, out-of-order
    ID, HEAD out of range) raise ConlluParseError naming the line.
    """
    graphs: list[DependencyGraph] = []
    tokens: list[str] = []
    rows: list[tuple[int, int, str, int]] = []  # (id, head, deprel, line_no)
    sent_id = ""
    sent_text: str | None = None
    n_sentences = 0

    def flush() -> None:
        nonlocal tokens, rows, sent_id, sent_text, n_sentences
        if not tokens:
            return
        edges = []
        for tok_id, head, deprel, line_no in rows:
            if head < 0 or head > len(tokens):
                raise ConlluParseError(line_no, f"HEAD {head} out of range")
            if head != 0:
                edges.append((head - 1, tok_id - 1, deprel))
        graphs.append(
            DependencyGraph(
                nodes=tokens,
                edges=edges,
                sentence_id=sent_id or str(n_sentences),
                text=sent_text,
            )
        )
        n_sentences += 1
        tokens, rows, sent_id, sent_text = [], [], "", None

    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            comment = line[1:].strip()
            if comment.startswith("sent_id"):
                _, _, value = comment.partition("=")
                sent_id = value.strip()
            elif comment.startswith("text"):
                _, _, value = comment.partition("=")
                sent_text = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluParseError(line_no, f"expected 10 columns, found {len(cols)}")
        try:
            tok_id = int(cols[0])
        except ValueError:
            raise ConlluParseError(line_no, f"non-integer ID {cols[0]!r}") from None
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluParseError(line_no, f"non-integer HEAD {cols[6]!r}") from None
        if tok_id != len(tokens) + 1:
            raise ConlluParseError(
                line_no, f"ID {tok_id} out of order (expected {len(tokens) + 1})"
            )
        tokens.append(cols[1])
        rows.append((tok_id, head, cols[7], line_no))
    flush()
    return graphs


def read_conllu_file(path: str | Path) -> list[DependencyGraph]:
    return read_conllu(Path(path).read_text(encoding="utf-8"))


_TOKEN_RE = re.compile(r"\w+(?:'\w+)?|[^\w\s]")


def simple_tokenize(text: str) -> list[str]:
    """Deterministic word/punctuation tokenizer for the flat fallback."""
    return _TOKEN_RE.findall(text)


def flat_graph(text: str, sentence_id: str = "") -> DependencyGraph:
    """Build a flat parse: every token attached to token 1 with label "dep".

    Used whenever no real parse is available; keeps the embedding space
    total over arbitrary text.
    """
    tokens = simple_tokenize(text)
    if not tokens:
        raise GraphError("cannot build a graph from empty text")
    edges = [(0, i, "dep") for i in range(1, len(tokens))]
    return DependencyGraph(nodes=tokens, edges=edges, sentence_id=sentence_id, text=text)


class FlatGraphSource:
    """Graph source that always answers with the flat fallback parse."""

    def graph_for(self, text: str, key: str | None = None) -> DependencyGraph:
        return flat_graph(text, sentence_id=key or "")


class ConlluGraphSource:
    """Graph source backed by CoNLL-U files, with a configurable fallback.

    Lookup order: sentence id (``key``), then exact ``# text`` match, then
    the fallback source. Files produced by the parse adapter use ids of the
    form ``<record_index>:<side>``.
    """

    def __init__(self, paths: list[str | Path], fallback: FlatGraphSource | None = None):
        self.fallback = fallback if fallback is not None else FlatGraphSource()
        self._by_id: dict[str, DependencyGraph] = {}
        self._by_text: dict[str, DependencyGraph] = {}
        for path in paths:
            for graph in read_conllu_file(path):
                if graph.sentence_id:
                    self._by_id.setdefault(graph.sentence_id, graph)
                lookup = graph.text if graph.text is not None else " ".join(graph.nodes)
                self._by_text.setdefault(lookup.strip(), graph)

    def graph_for(self, text: str, key: str | None = None) -> DependencyGraph:
        if key is not None and key in self._by_id:
            return self._by_id[key]
        hit = self._by_text.get(text.strip())
        if hit is not None:
            return hit
        return self.fallback.graph_for(text, key=key)
