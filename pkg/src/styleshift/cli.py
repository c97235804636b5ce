"""Command-line entry point.

Subcommands: ``transfer`` (run the pipeline), ``eval`` (score a manifest),
``tune`` (search the contrast weights), and ``sample`` (inspect few-shot
selection). Flags override values from the JSON config file. Exit codes:
0 success, 1 configuration error, 2 run finished with per-item failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .corpus import CorpusError, load_corpus
from .decoding import DecodingConfig, generate
from .graphs import ConlluParseError
from .metrics import MetricsError
from .pipeline import (
    ConfigError,
    RunConfig,
    build_classifier,
    build_logit_provider,
    load_manifest,
    prepare_run,
    run_eval,
    run_transfer,
    transfer_one,
)
from .prompts import assemble_prompt, rerank
from .embedding import embed_text
from .tuning import (
    SearchBox,
    ValidationPipeline,
    optimize,
    save_trace,
    validation_objective,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config)
    for flag, attr in (
        ("output_dir", "output_dir"),
        ("inputs", "inputs"),
        ("k", "k_fewshots"),
        ("cache_dir", "cache_dir"),
        ("workers", "workers"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config, attr, value)
    for flag in ("alpha", "beta", "max_tokens"):
        value = getattr(args, flag, None)
        if value is not None:
            config.decoding[flag] = value
    return config


def _cmd_transfer(args: argparse.Namespace) -> int:
    config = _load_config(args)
    manifest, failures = run_transfer(config)
    print(f"wrote {Path(config.output_dir) / 'manifest.json'} "
          f"({len(manifest['items'])} items, {failures} failed)")
    return EXIT_PARTIAL if failures else EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    config = RunConfig.from_file(args.config)
    classifier = build_classifier(config.classifier)
    provider = build_logit_provider(config.logits)
    report = run_eval(
        args.manifest, classifier, provider, references_path=args.references
    )
    r_part = f"{report.r_sbleu:.2f}" if report.r_sbleu is not None else "n/a"
    print(
        f"accuracy={report.accuracy:.3f} r-sBLEU={r_part} "
        f"s-sBLEU={report.s_sbleu:.2f} PPL={report.ppl:.2f} n={report.n_items}"
    )
    return EXIT_OK


class _TunePipeline(ValidationPipeline):
    """Transfer pipeline bound to one (alpha, beta) candidate."""

    def __init__(self, prepared, provider, classifier, decoding: dict):
        self.prepared = prepared
        self.provider = provider
        self.classifier = classifier
        self.decoding = decoding

    def bound(self, alpha: float, beta: float) -> "_TunePipeline":
        cfg = dict(self.decoding)
        cfg.update(alpha=alpha, beta=beta)
        clone = _TunePipeline(self.prepared, self.provider, self.classifier, cfg)
        return clone

    def transfer(self, x: str, target_style: str) -> str:
        input_emb = embed_text(
            x, self.prepared.model, graphs=self.prepared.graphs, cache=self.prepared.cache
        )
        ordered = rerank(input_emb, self.prepared.chains)
        source_style = self.prepared.chains[0].pair.source_style
        prompt = assemble_prompt(source_style, target_style, ordered, x)
        prompt_emb = embed_text(
            prompt.rendered, self.prepared.model,
            graphs=self.prepared.graphs, cache=self.prepared.cache,
        )
        from .negatives import select_negative

        neg = select_negative(
            self.prepared.chunks, prompt_emb, self.prepared.model,
            graphs=self.prepared.graphs, cache=self.prepared.cache,
        )
        result = generate(self.provider, prompt, x, neg, DecodingConfig(**self.decoding))
        return result.text

    def classify(self, text: str) -> tuple[str, float]:
        return self.classifier.classify(text)

    def perplexity(self, text: str) -> float:
        from .metrics import perplexity

        return perplexity(self.provider, text)


def _cmd_tune(args: argparse.Namespace) -> int:
    config = _load_config(args)
    prepared = prepare_run(config)
    provider = build_logit_provider(config.logits)
    classifier = build_classifier(config.classifier)
    dev_records = load_corpus(args.dev)
    dev_set = []
    for rec in dev_records:
        reference = rec.reference or rec.target
        if reference is None:
            raise ConfigError(f"dev record {rec.index} needs a reference or target")
        dev_set.append((rec.source, reference, rec.target_style))
    base = _TunePipeline(prepared, provider, classifier, dict(config.decoding))

    def objective(alpha: float, beta: float) -> float:
        return validation_objective(base.bound(alpha, beta), dev_set)

    box = SearchBox(budget=args.budget)
    best, trace = optimize(
        objective, box, rng=np.random.default_rng(args.seed), method=args.method
    )
    if args.trace:
        save_trace(trace, args.trace)
        print(f"trace written to {args.trace}")
    print(
        f"best alpha={best.alpha:.4f} beta={best.beta:.4f} "
        f"objective={best.objective_value:.4f} (trial {best.eval_index})"
    )
    return EXIT_OK


def _cmd_sample(args: argparse.Namespace) -> int:
    config = _load_config(args)
    prepared = prepare_run(config)
    for chain in prepared.chains:
        pair = chain.pair
        print(f"[{pair.index}] {pair.source} ||| {pair.target}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="styleshift",
        description="Style transfer via synthesized prompts and contrastive decoding",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--inputs")
        p.add_argument("--k", type=int, help="number of few-shot pairs")
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--max-tokens", dest="max_tokens", type=int)
        p.add_argument("--cache-dir", dest="cache_dir")
        p.add_argument("--workers", type=int)

    transfer = sub.add_parser("transfer", help="run the transfer pipeline")
    add_common(transfer)
    transfer.set_defaults(func=_cmd_transfer)

    evaluate = sub.add_parser("eval", help="score a run manifest")
    evaluate.add_argument("--config", required=True)
    evaluate.add_argument("--manifest", required=True)
    evaluate.add_argument("--references")
    evaluate.set_defaults(func=_cmd_eval)

    tune = sub.add_parser("tune", help="search the contrast weights")
    add_common(tune)
    tune.add_argument("--dev", required=True, help="dev-set JSONL")
    tune.add_argument("--budget", type=int, default=30)
    tune.add_argument("--seed", type=int, default=0)
    tune.add_argument("--method", choices=("gp", "random"), default="gp")
    tune.add_argument("--trace", help="write the trial trace to this JSONL path")
    tune.set_defaults(func=_cmd_tune)

    sample = sub.add_parser("sample", help="show the selected few-shot pairs")
    add_common(sample)
    sample.set_defaults(func=_cmd_sample)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CorpusError, ConlluParseError, MetricsError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
