"""End-to-end runs: configuration, transfer, evaluation, and manifests.

A run manifest is a single JSON document written atomically (temp file
plus rename). Manifests contain no timestamps, so two runs with identical
configuration and deterministic providers are byte-identical.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .corpus import FewShotPair, load_corpus
from .decoding import DecodingConfig, generate
from .embedding import DgcnModel, EmbeddingCache, embed_text, load_word_vectors
from .graphs import ConlluGraphSource, FlatGraphSource
from .metrics import EvalReport, LexiconClassifier, corpus_bleu, perplexity
from .negatives import DEFAULT_CHUNK_SIZE, select_negative, split_chunks
from .prompts import EchoTextGen, assemble_prompt, build_chain, rerank
from .sampling import select_fewshots

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything a transfer run needs; mirrors the JSON config file."""

    fewshot_corpus: str
    inputs: str
    output_dir: str
    k_fewshots: int = 3
    references: str | None = None
    conllu_files: list[str] = field(default_factory=list)
    embedding_seed: int = 0
    embedding_layers: int = 2
    embedding_dim: int = 64
    word_vectors: str | None = None
    sampling_seed: int = 0
    decoding: dict[str, Any] = field(default_factory=dict)
    textgen: dict[str, Any] = field(default_factory=lambda: {"kind": "echo"})
    logits: dict[str, Any] = field(default_factory=dict)
    classifier: dict[str, Any] = field(default_factory=dict)
    negative_context: str | None = None
    chunk_size: int = DEFAULT_CHUNK_SIZE
    cache_dir: str | None = None
    workers: int | None = None

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for required in ("fewshot_corpus", "inputs", "output_dir"):
            if required not in raw:
                raise ConfigError(f"config missing required key {required!r}")
        return cls(**raw)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)

    def validate(self) -> None:
        if self.k_fewshots < 1:
            raise ConfigError("k_fewshots must be >= 1")
        paths = [self.fewshot_corpus, self.inputs, *self.conllu_files]
        if self.references:
            paths.append(self.references)
        if self.word_vectors:
            paths.append(self.word_vectors)
        if self.negative_context:
            paths.append(self.negative_context)
        if self.logits.get("kind") == "bigram" and "path" in self.logits:
            paths.append(self.logits["path"])
        if self.classifier.get("kind") == "lexicon" and "path" in self.classifier:
            paths.append(self.classifier["path"])
        for p in paths:
            if not Path(p).exists():
                raise ConfigError(f"referenced path does not exist: {p}")

    def to_dict(self) -> dict[str, Any]:
        return {
            name: getattr(self, name)
            for name in self.__dataclass_fields__
        }

    def decoding_config(self) -> DecodingConfig:
        return DecodingConfig(**self.decoding)


def default_negative_context() -> str:
    return (
        resources.files("styleshift").joinpath("data/irrelevant_context.txt")
        .read_text(encoding="utf-8")
    )


def build_textgen(spec: dict[str, Any]):
    kind = spec.get("kind", "echo")
    if kind == "echo":
        return EchoTextGen()
    if kind == "http":
        from .providers import HttpTextGen

        return HttpTextGen(
            base_url=spec["base_url"],
            model_id=spec.get("model_id", "default"),
            path=spec.get("path", "/generate"),
            token_env=spec.get("token_env", "STYLESHIFT_API_TOKEN"),
        )
    raise ConfigError(f"unknown textgen kind {kind!r}")


def build_logit_provider(spec: dict[str, Any]):
    kind = spec.get("kind")
    if kind == "bigram":
        from .decoding import BigramProvider

        table = json.loads(Path(spec["path"]).read_text(encoding="utf-8"))
        return BigramProvider(
            vocab=table["vocab"],
            rows=table.get("rows", {}),
            start=table.get("start"),
            eos_token=table.get("eos"),
        )
    if kind == "http":
        from .providers import HttpLogitProvider

        return HttpLogitProvider(
            base_url=spec["base_url"],
            model_id=spec.get("model_id", "default"),
            logits_path=spec.get("logits_path", "/logits"),
            vocab_path=spec.get("vocab_path", "/vocab"),
            token_env=spec.get("token_env", "STYLESHIFT_API_TOKEN"),
            eos_token=spec.get("eos_token"),
        )
    raise ConfigError(f"unknown logits provider kind {kind!r}")


def build_classifier(spec: dict[str, Any]):
    kind = spec.get("kind")
    if kind == "lexicon":
        return LexiconClassifier.from_file(spec["path"])
    if kind == "http":
        from .providers import HttpClassifier

        return HttpClassifier(
            base_url=spec["base_url"],
            path=spec.get("path", "/classify"),
            token_env=spec.get("token_env", "STYLESHIFT_API_TOKEN"),
        )
    raise ConfigError(f"unknown classifier kind {kind!r}")


def _graph_source(config: RunConfig):
    if config.conllu_files:
        return ConlluGraphSource(config.conllu_files)
    return FlatGraphSource()


def _build_model(config: RunConfig) -> DgcnModel:
    vectors = None
    if config.word_vectors:
        vectors = load_word_vectors(config.word_vectors, config.embedding_dim)
    return DgcnModel.seeded(
        num_layers=config.embedding_layers,
        dim=config.embedding_dim,
        seed=config.embedding_seed,
        word_vectors=vectors,
    )


@dataclass
class PreparedRun:
    """Run state that does not depend on the decoding weights."""

    config: RunConfig
    model: DgcnModel
    graphs: Any
    cache: EmbeddingCache | None
    chains: list
    chunks: list[str]
    fewshot_indices: list[int]


def prepare_run(config: RunConfig) -> PreparedRun:
    """Select few-shots, build chains, and segment the negative context."""
    config.validate()
    model = _build_model(config)
    graphs = _graph_source(config)
    cache = EmbeddingCache(config.cache_dir) if config.cache_dir else None
    pool = load_corpus(config.fewshot_corpus)
    for pair in pool:
        if pair.target is None:
            raise ConfigError(
                f"few-shot pool record {pair.index} has no target side"
            )
    rng = np.random.default_rng(config.sampling_seed)
    selected = select_fewshots(
        pool, config.k_fewshots, model, rng, graphs=graphs, cache=cache
    )
    client = build_textgen(config.textgen)
    workers = config.workers or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool_exec:
        chains = list(
            pool_exec.map(
                lambda pair: build_chain(pair, client, model, graphs=graphs, cache=cache),
                selected,
            )
        )
    if config.negative_context:
        context_text = Path(config.negative_context).read_text(encoding="utf-8")
    else:
        context_text = default_negative_context()
    chunks = split_chunks(context_text, config.chunk_size)
    return PreparedRun(
        config=config,
        model=model,
        graphs=graphs,
        cache=cache,
        chains=chains,
        chunks=chunks,
        fewshot_indices=[p.index for p in selected],
    )


def transfer_one(
    prepared: PreparedRun,
    provider,
    item: FewShotPair,
    decoding_cfg: DecodingConfig,
) -> dict[str, Any]:
    """Run one input through rerank, assembly, negative pick, and decoding."""
    input_emb = embed_text(
        item.source,
        prepared.model,
        graphs=prepared.graphs,
        cache=prepared.cache,
        key=item.graph_key("source"),
    )
    ordered = rerank(input_emb, prepared.chains)
    prompt = assemble_prompt(item.source_style, item.target_style, ordered, item.source)
    prompt_emb = embed_text(
        prompt.rendered, prepared.model, graphs=prepared.graphs, cache=prepared.cache
    )
    neg = select_negative(
        prepared.chunks, prompt_emb, prepared.model,
        graphs=prepared.graphs, cache=prepared.cache,
    )
    result = generate(provider, prompt, item.source, neg, decoding_cfg)
    return {
        "index": item.index,
        "input": item.source,
        "source_style": item.source_style,
        "target_style": item.target_style,
        "reference": item.reference,
        "prompt_sha256": _sha256(prompt.rendered),
        "negative_chunk_index": neg.chunk_index,
        "negative_similarity": neg.similarity_to_prompt,
        "output": result.text,
        "steps": [
            {
                "token": s.token,
                "lp_prompt": s.lp_prompt,
                "lp_plain": s.lp_plain,
                "lp_neg": s.lp_neg,
                "lp_combined": s.lp_combined,
            }
            for s in result.steps
        ],
        "error": None,
    }


def _sha256(text: str) -> str:
    import hashlib

    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def run_transfer(config: RunConfig) -> tuple[dict[str, Any], int]:
    """Execute a full transfer run; returns (manifest, failed item count).

    Per-item failures are recorded in the manifest and do not stop the run;
    configuration problems raise ConfigError before any work starts.
    """
    prepared = prepare_run(config)
    inputs = load_corpus(config.inputs, allow_empty=True)
    provider = build_logit_provider(config.logits)
    decoding_cfg = config.decoding_config()
    workers = config.workers or os.cpu_count() or 1

    def one(item: FewShotPair) -> dict[str, Any]:
        try:
            return transfer_one(prepared, provider, item, decoding_cfg)
        except Exception as exc:
            log.warning("item %d failed: %s", item.index, exc)
            return {
                "index": item.index,
                "input": item.source,
                "source_style": item.source_style,
                "target_style": item.target_style,
                "reference": item.reference,
                "output": None,
                "error": str(exc),
            }

    with ThreadPoolExecutor(max_workers=workers) as pool_exec:
        items = list(pool_exec.map(one, inputs))
    items.sort(key=lambda rec: rec["index"])

    manifest = {
        "version": __version__,
        "config": config.to_dict(),
        "fewshot_indices": prepared.fewshot_indices,
        "items": items,
        "eval": None,
    }
    write_manifest(manifest, Path(config.output_dir) / MANIFEST_NAME)
    failures = sum(1 for rec in items if rec["error"] is not None)
    return manifest, failures


def write_manifest(manifest: dict[str, Any], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
    tmp.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    tmp.replace(path)


def load_manifest(path: str | Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def run_eval(
    manifest_path: str | Path,
    classifier,
    provider,
    references_path: str | Path | None = None,
) -> EvalReport:
    """Score a finished run and append the report to its manifest.

    References come from the referenced JSONL when given, falling back to
    per-item references captured at transfer time; with neither, the
    reference BLEU is omitted with a warning.
    """
    manifest = load_manifest(manifest_path)
    items = [rec for rec in manifest["items"] if rec.get("output")]
    if not items:
        raise ConfigError("manifest has no successful items to evaluate")

    references: list[str | None]
    if references_path is not None:
        ref_records = load_corpus(references_path, allow_empty=True)
        by_index = {rec.index: rec.reference or rec.target for rec in ref_records}
        references = [by_index.get(rec["index"]) for rec in items]
    else:
        references = [rec.get("reference") for rec in items]

    outputs = [rec["output"] for rec in items]
    sources = [rec["input"] for rec in items]

    hits = 0
    for rec, output in zip(items, outputs):
        try:
            label, _ = classifier.classify(output)
        except Exception as exc:
            log.warning("classifier failed on item %d: %s", rec["index"], exc)
            continue
        if label == rec["target_style"]:
            hits += 1
    accuracy = hits / len(items)

    s_sbleu = corpus_bleu(outputs, [[s] for s in sources])
    r_sbleu = None
    if all(r is not None for r in references):
        r_sbleu = corpus_bleu(outputs, [[r] for r in references])
    else:
        log.warning("references missing for some items; omitting reference BLEU")

    ppls = []
    for rec, output in zip(items, outputs):
        try:
            ppls.append(perplexity(provider, output))
        except Exception as exc:
            log.warning("perplexity failed on item %d: %s", rec["index"], exc)
    ppl = float(np.mean(ppls)) if ppls else float("inf")

    report = EvalReport(
        accuracy=accuracy,
        s_sbleu=s_sbleu,
        r_sbleu=r_sbleu,
        ppl=ppl,
        n_items=len(items),
    )
    manifest["eval"] = {
        "accuracy": report.accuracy,
        "s_sbleu": report.s_sbleu,
        "r_sbleu": report.r_sbleu,
        "ppl": report.ppl if np.isfinite(report.ppl) else None,
        "n_items": report.n_items,
    }
    write_manifest(manifest, manifest_path)
    return report
