"""Sentence embeddings from gated, relation-typed graph convolutions.

Each dependency graph is augmented with one self-loop per node (relation
"self") and one inverse edge per dependency (relation "rev:<label>").
Node features start from an external word-vector table or, by default,
from a seeded hash of the token string, then pass through ``num_layers``
gated convolutions and are average-pooled into one vector. All parameters
are derived deterministically from (seed, layer, relation label) so the
whole pipeline runs with zero trained assets; externally trained weights
can be loaded from an .npz file instead.
"""

from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import DependencyGraph, FlatGraphSource, GraphError

# Universal Dependencies v2 relation labels, the default vocabulary.
UD_RELATIONS = (
    "acl", "advcl", "advmod", "amod", "appos", "aux", "case", "cc", "ccomp",
    "clf", "compound", "conj", "cop", "csubj", "dep", "det", "discourse",
    "dislocated", "expl", "fixed", "flat", "goeswith", "iobj", "list", "mark",
    "nmod", "nsubj", "nummod", "obj", "obl", "orphan", "parataxis", "punct",
    "reparandum", "root", "vocative", "xcomp",
)

SELF_RELATION = "self"
UNKNOWN_RELATION = "unk"


class EmbeddingError(ValueError):
    pass


@dataclass
class SentenceEmbedding:
    """Fixed-dimension vector in the joint semantic-structural space."""

    values: np.ndarray
    source_id: str = ""

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise EmbeddingError("embedding must be a 1-d vector")
        if not np.all(np.isfinite(self.values)):
            raise EmbeddingError("embedding contains non-finite entries")


@dataclass
class RelationParams:
    weight: np.ndarray      # (d, d)
    bias: np.ndarray        # (d,)
    gate_weight: np.ndarray  # (d,)
    gate_bias: float


def _derived_rng(seed: int, *parts: str) -> np.random.Generator:
    """Generator keyed by the seed and a list of string parts.

    blake2b of "seed|part|part..." feeds PCG64, so every derived quantity
    is a pure function of its key and independent of construction order.
    """
    key = "|".join([str(seed), *parts]).encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))


def hash_token_features(token: str, seed: int, dim: int) -> np.ndarray:
    """Seeded feature vector for one token, entries uniform in [-1, 1]."""
    return _derived_rng(seed, "token", token).uniform(-1.0, 1.0, dim)


def load_word_vectors(path: str | Path, dim: int) -> dict[str, np.ndarray]:
    """Read a word-vector table: one line per token, `token v1 ... vd`."""
    table: dict[str, np.ndarray] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != dim + 1:
            raise EmbeddingError(
                f"word-vector line {line_no}: expected {dim} values, found {len(parts) - 1}"
            )
        table[parts[0]] = np.array([float(v) for v in parts[1:]], dtype=np.float64)
    return table


class DgcnModel:
    """Relation-typed graph convolution stack with sigmoid edge gates.

    ``layers[layer][label]`` holds the RelationParams used when a message
    crosses an edge with that (resolved) label at that depth. The label
    vocabulary always contains "self", "unk" and a "rev:" twin of every
    base label; unseen labels bucket to "unk"/"rev:unk".
    """

    def __init__(
        self,
        num_layers: int,
        dim: int,
        layers: list[dict[str, RelationParams]],
        seed: int = 0,
        word_vectors: dict[str, np.ndarray] | None = None,
    ):
        if num_layers < 0:
            raise EmbeddingError("num_layers must be >= 0")
        if dim < 1:
            raise EmbeddingError("dim must be >= 1")
        if len(layers) != num_layers:
            raise EmbeddingError("one parameter table required per layer")
        self.num_layers = num_layers
        self.dim = dim
        self.seed = seed
        self.layers = layers
        self.word_vectors = word_vectors or {}
        for table in layers:
            for required in (SELF_RELATION, UNKNOWN_RELATION, f"rev:{UNKNOWN_RELATION}"):
                if required not in table:
                    raise EmbeddingError(f"layer table missing reserved label {required!r}")
            for params in table.values():
                for arr in (params.weight, params.bias, params.gate_weight):
                    if not np.all(np.isfinite(arr)):
                        raise EmbeddingError("non-finite model parameter")

    @classmethod
    def seeded(
        cls,
        num_layers: int = 2,
        dim: int = 64,
        seed: int = 0,
        relations: tuple[str, ...] = UD_RELATIONS,
        word_vectors: dict[str, np.ndarray] | None = None,
    ) -> "DgcnModel":
        """Untrained model: weights ~ N(0, 1/sqrt(dim)), biases zero.

        Every matrix is derived from (seed, layer index, label), so models
        built with different relation lists agree on shared labels.
        """
        scale = 1.0 / np.sqrt(dim)
        labels = cls._full_label_set(relations)
        layers = []
        for layer_idx in range(num_layers):
            table = {}
            for label in labels:
                rng = _derived_rng(seed, "layer", str(layer_idx), label)
                table[label] = RelationParams(
                    weight=rng.normal(0.0, scale, (dim, dim)),
                    bias=np.zeros(dim),
                    gate_weight=rng.normal(0.0, scale, dim),
                    gate_bias=0.0,
                )
            layers.append(table)
        return cls(num_layers, dim, layers, seed=seed, word_vectors=word_vectors)

    @staticmethod
    def _full_label_set(relations: tuple[str, ...]) -> list[str]:
        base = list(dict.fromkeys([*relations, UNKNOWN_RELATION]))
        return [SELF_RELATION, *base, *[f"rev:{label}" for label in base]]

    def resolve(self, label: str, layer: int) -> str:
        table = self.layers[layer]
        if label in table:
            return label
        if label.startswith("rev:"):
            return f"rev:{UNKNOWN_RELATION}"
        return UNKNOWN_RELATION

    def save(self, path: str | Path) -> None:
        arrays: dict[str, np.ndarray] = {
            "meta": np.array([self.num_layers, self.dim, self.seed], dtype=np.int64)
        }
        for layer_idx, table in enumerate(self.layers):
            for label, p in table.items():
                prefix = f"{layer_idx}\x1f{label}\x1f"
                arrays[prefix + "W"] = p.weight
                arrays[prefix + "b"] = p.bias
                arrays[prefix + "gw"] = p.gate_weight
                arrays[prefix + "gb"] = np.array([p.gate_bias])
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "DgcnModel":
        data = np.load(path, allow_pickle=False)
        num_layers, dim, seed = (int(v) for v in data["meta"])
        layers: list[dict[str, RelationParams]] = [{} for _ in range(num_layers)]
        partial: dict[tuple[int, str], dict[str, np.ndarray]] = {}
        for name in data.files:
            if name == "meta":
                continue
            layer_str, label, kind = name.split("\x1f")
            partial.setdefault((int(layer_str), label), {})[kind] = data[name]
        for (layer_idx, label), parts in partial.items():
            layers[layer_idx][label] = RelationParams(
                weight=parts["W"],
                bias=parts["b"],
                gate_weight=parts["gw"],
                gate_bias=float(parts["gb"][0]),
            )
        return cls(num_layers, dim, layers, seed=seed)


def init_node_features(graph: DependencyGraph, model: DgcnModel) -> np.ndarray:
    """Initial |nodes| x dim feature matrix.

    Tokens found in the model's word-vector table use the table entry;
    everything else falls back to the seeded hash initializer.
    """
    rows = []
    for token in graph.nodes:
        vec = model.word_vectors.get(token)
        if vec is not None:
            if vec.shape != (model.dim,):
                raise EmbeddingError(
                    f"word vector for {token!r} has dim {vec.shape}, model dim {model.dim}"
                )
            rows.append(vec)
        else:
            rows.append(hash_token_features(token, model.seed, model.dim))
    return np.array(rows, dtype=np.float64)


def _augmented_in_edges(graph: DependencyGraph) -> list[list[tuple[int, str]]]:
    """Per-node list of (source node, relation label) message edges.

    Augmentation: a "self" loop on every node, the original head->dependent
    edge, and a "rev:<label>" edge in the opposite direction.
    """
    incoming: list[list[tuple[int, str]]] = [[(i, SELF_RELATION)] for i in range(len(graph.nodes))]
    for head, dep, label in graph.edges:
        incoming[dep].append((head, label))
        incoming[head].append((dep, f"rev:{label}"))
    return incoming


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    z = np.exp(x)
    return z / (1.0 + z)


def dgcn_layer(
    features: np.ndarray,
    graph: DependencyGraph,
    model: DgcnModel,
    layer: int,
    incoming: list[list[tuple[int, str]]] | None = None,
) -> np.ndarray:
    """One gated convolution: h_i' = relu(sum_j gate_ij (W_r h_j + b_r)).

    The gate is sigmoid(gate_w_r . h_i + gate_b_r), computed on the
    receiving node; j ranges over the augmented in-edges of node i.
    """
    if features.shape != (len(graph.nodes), model.dim):
        raise EmbeddingError(
            f"feature matrix {features.shape} does not match "
            f"({len(graph.nodes)}, {model.dim})"
        )
    if incoming is None:
        incoming = _augmented_in_edges(graph)
    table = model.layers[layer]
    out = np.zeros_like(features)
    for i, in_edges in enumerate(incoming):
        acc = np.zeros(model.dim)
        h_i = features[i]
        for j, label in in_edges:
            params = table[model.resolve(label, layer)]
            gate = _sigmoid(float(params.gate_weight @ h_i) + params.gate_bias)
            acc += gate * (params.weight @ features[j] + params.bias)
        out[i] = np.maximum(acc, 0.0)
    return out


def embed_sentence(
    graph: DependencyGraph,
    model: DgcnModel,
    cache: "EmbeddingCache | None" = None,
) -> SentenceEmbedding:
    """Run all convolution layers and average-pool node states."""
    if cache is not None:
        cached = cache.get(graph, model)
        if cached is not None:
            return SentenceEmbedding(cached, source_id=graph.sentence_id)
    features = init_node_features(graph, model)
    incoming = _augmented_in_edges(graph)
    for layer in range(model.num_layers):
        features = dgcn_layer(features, graph, model, layer, incoming=incoming)
    values = features.mean(axis=0)
    if cache is not None:
        cache.put(graph, model, values)
    return SentenceEmbedding(values, source_id=graph.sentence_id)


_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+|\n+")


def split_sentences(text: str) -> list[str]:
    return [part.strip() for part in _SENTENCE_SPLIT_RE.split(text) if part.strip()]


def embed_text(
    text: str,
    model: DgcnModel,
    graphs: FlatGraphSource | None = None,
    cache: "EmbeddingCache | None" = None,
    key: str | None = None,
) -> SentenceEmbedding:
    """Embed free text: mean of per-sentence embeddings.

    Single-sentence text reduces to embed_sentence of its parse. The graph
    source decides how each sentence is parsed (CoNLL-U lookup or flat
    fallback).
    """
    source = graphs if graphs is not None else FlatGraphSource()
    sentences = split_sentences(text)
    if not sentences:
        raise EmbeddingError("cannot embed empty text")
    vectors = []
    for sentence in sentences:
        sent_key = key if key is not None and len(sentences) == 1 else None
        graph = source.graph_for(sentence, key=sent_key)
        vectors.append(embed_sentence(graph, model, cache=cache).values)
    return SentenceEmbedding(np.mean(vectors, axis=0), source_id=key or "")


def embed_pair(
    pair,
    model: DgcnModel,
    graphs: FlatGraphSource | None = None,
    cache: "EmbeddingCache | None" = None,
) -> SentenceEmbedding:
    """Element-wise mean of the source and target sentence embeddings.

    Keeps pairs and single sentences in one space so similarities between
    an input sentence and a pair are well-defined.
    """
    halves = []
    for side in ("source", "target"):
        text = getattr(pair, side)
        if text is None:
            raise EmbeddingError(f"pair {getattr(pair, 'pair_id', '')!r} has no {side} text")
        try:
            key = pair.graph_key(side) if hasattr(pair, "graph_key") else None
            halves.append(embed_text(text, model, graphs=graphs, cache=cache, key=key).values)
        except (GraphError, EmbeddingError) as exc:
            raise EmbeddingError(f"{side} side of pair could not be embedded: {exc}") from exc
    pair_id = getattr(pair, "pair_id", "")
    return SentenceEmbedding((halves[0] + halves[1]) / 2.0, source_id=pair_id)


def cosine_similarity(a: SentenceEmbedding, b: SentenceEmbedding) -> float:
    """Cosine of the angle between two embeddings; 0 if either is zero."""
    va, vb = a.values, b.values
    if va.shape != vb.shape:
        raise EmbeddingError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    norm = np.linalg.norm(va) * np.linalg.norm(vb)
    if norm == 0.0:
        return 0.0
    return float(va @ vb / norm)


class EmbeddingCache:
    """One .npy file per (graph content, seed, layers, dim) key.

    Writes go through a temp file and rename, so concurrent embedders can
    share a cache directory.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _key(self, graph: DependencyGraph, model: DgcnModel) -> str:
        payload = f"{graph.canonical()}|{model.seed}|{model.num_layers}|{model.dim}"
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:40]

    def get(self, graph: DependencyGraph, model: DgcnModel) -> np.ndarray | None:
        path = self.root / f"{self._key(graph, model)}.npy"
        if not path.exists():
            return None
        return np.load(path)

    def put(self, graph: DependencyGraph, model: DgcnModel, values: np.ndarray) -> None:
        path = self.root / f"{self._key(graph, model)}.npy"
        # np.save appends .npy unless the name already ends with it
        tmp = path.with_name(f"{path.stem}.{os.getpid()}.tmp.npy")
        np.save(tmp, values)
        tmp.replace(path)
