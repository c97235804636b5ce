import json
from pathlib import Path

import numpy as np
import pytest

from styleshift.corpus import CorpusError, FewShotPair, load_corpus, save_corpus
from styleshift.metrics import LexiconClassifier
from styleshift.pipeline import (
    ConfigError,
    RunConfig,
    build_logit_provider,
    default_negative_context,
    load_manifest,
    run_eval,
    run_transfer,
    write_manifest,
)

FIXTURES = Path(__file__).parent / "fixtures"


def base_config(tmp_path, **overrides):
    raw = {
        "fewshot_corpus": str(FIXTURES / "pool.jsonl"),
        "inputs": str(FIXTURES / "inputs.jsonl"),
        "output_dir": str(tmp_path / "run"),
        "k_fewshots": 2,
        "embedding_dim": 16,
        "embedding_layers": 1,
        "decoding": {"alpha": 1.0, "beta": 1.0, "max_tokens": 5},
        "textgen": {"kind": "echo"},
        "logits": {"kind": "bigram", "path": str(FIXTURES / "bigram.json")},
        "classifier": {"kind": "lexicon", "path": str(FIXTURES / "lexicon.txt")},
        "negative_context": str(FIXTURES / "negctx.txt"),
        "chunk_size": 24,
        "workers": 2,
    }
    raw.update(overrides)
    return RunConfig.from_dict(raw)


class TestLoadCorpus:
    def test_two_line_fixture(self, tmp_path):
        path = tmp_path / "two.jsonl"
        path.write_text(
            '{"source": "a", "target": "b", "source_style": "s", "target_style": "t"}\n'
            '{"source": "c", "source_style": "s", "target_style": "t"}\n'
        )
        records = load_corpus(path)
        assert len(records) == 2
        assert records[0].target == "b"
        assert records[1].target is None
        assert [r.index for r in records] == [0, 1]

    def test_missing_source_names_the_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"source": "a", "source_style": "s", "target_style": "t"}\n'
            '{"target": "b", "source_style": "s", "target_style": "t"}\n'
        )
        with pytest.raises(CorpusError, match="line 2"):
            load_corpus(path)

    def test_invalid_json_names_the_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"source": "a", "source_style": "s", "target_style": "t"}\nnot json\n')
        with pytest.raises(CorpusError, match="line 2"):
            load_corpus(path)

    def test_empty_file_is_an_error_by_default(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(CorpusError, match="empty"):
            load_corpus(path)
        assert load_corpus(path, allow_empty=True) == []

    def test_round_trip_preserves_records(self, tmp_path):
        record = FewShotPair(
            source="the tacos were amazing and the staff was friendly!",
            target="Exceptional tacos; commendably attentive staff.",
            reference="great tacos, friendly staff",
            source_style="casual",
            target_style="formal",
        )
        path = tmp_path / "roundtrip.jsonl"
        save_corpus([record], path)
        loaded = load_corpus(path)
        save_corpus(loaded, tmp_path / "again.jsonl")
        assert (tmp_path / "again.jsonl").read_text() == path.read_text()
        assert loaded[0] == record


class TestRunConfig:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            RunConfig.from_dict({"fewshot_corpus": "x", "inputs": "y",
                                 "output_dir": "z", "typo_key": 1})

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match="fewshot_corpus"):
            RunConfig.from_dict({"inputs": "y", "output_dir": "z"})

    def test_validate_checks_paths(self, tmp_path):
        config = base_config(tmp_path, fewshot_corpus=str(tmp_path / "missing.jsonl"))
        with pytest.raises(ConfigError, match="does not exist"):
            config.validate()

    def test_validate_checks_k(self, tmp_path):
        config = base_config(tmp_path, k_fewshots=0)
        with pytest.raises(ConfigError, match="k_fewshots"):
            config.validate()

    def test_from_file(self, tmp_path):
        path = tmp_path / "config.json"
        config = base_config(tmp_path)
        path.write_text(json.dumps(config.to_dict()))
        loaded = RunConfig.from_file(path)
        assert loaded == config


class TestRunTransfer:
    def test_empty_input_set_writes_empty_manifest(self, tmp_path):
        empty = tmp_path / "none.jsonl"
        empty.write_text("")
        config = base_config(tmp_path, inputs=str(empty))
        manifest, failures = run_transfer(config)
        assert failures == 0
        assert manifest["items"] == []
        assert (tmp_path / "run" / "manifest.json").exists()

    def test_three_input_run_is_byte_identical_across_runs(self, tmp_path):
        config = base_config(tmp_path)
        run_transfer(config)
        first = (tmp_path / "run" / "manifest.json").read_bytes()
        run_transfer(config)
        second = (tmp_path / "run" / "manifest.json").read_bytes()
        assert first == second

    def test_manifest_records_expected_fields(self, tmp_path):
        config = base_config(tmp_path)
        manifest, failures = run_transfer(config)
        assert failures == 0
        assert manifest["version"]
        assert len(manifest["fewshot_indices"]) == 2
        assert len(manifest["items"]) == 3
        for item in manifest["items"]:
            assert item["error"] is None
            assert item["output"]
            assert len(item["prompt_sha256"]) == 64
            assert item["negative_chunk_index"] >= 0
            assert len(item["steps"]) == 5
            for step in item["steps"]:
                assert set(step) == {"token", "lp_prompt", "lp_plain", "lp_neg", "lp_combined"}

    def test_outputs_match_stepwise_decoding_oracle(self, tmp_path):
        # prompt construction is replayed through the library (its hash is
        # pinned in the manifest), but the decoding loop itself is
        # re-evaluated with the arbitrary-precision oracle
        import hashlib

        from oracles import mp_argmax, mp_combine, mp_log_softmax

        from styleshift.embedding import embed_text
        from styleshift.pipeline import prepare_run
        from styleshift.prompts import assemble_prompt, rerank
        from styleshift.templates import render_input_block

        config = base_config(tmp_path)
        manifest, _ = run_transfer(config)
        provider = build_logit_provider(config.logits)
        cfg = config.decoding_config()
        prepared = prepare_run(config)
        inputs = load_corpus(config.inputs)

        for item in manifest["items"]:
            rec = inputs[item["index"]]
            input_emb = embed_text(rec.source, prepared.model, graphs=prepared.graphs)
            ordered = rerank(input_emb, prepared.chains)
            prompt = assemble_prompt(
                rec.source_style, rec.target_style, ordered, rec.source
            )
            digest = hashlib.sha256(prompt.rendered.encode("utf-8")).hexdigest()
            assert digest == item["prompt_sha256"]

            block = render_input_block(rec.source)
            neg_text = prepared.chunks[item["negative_chunk_index"]]
            contexts = [
                provider.encode(prompt.rendered),
                provider.encode(block),
                provider.encode(f"{neg_text}\n\n{block}"),
            ]
            tokens = []
            for _ in range(cfg.max_tokens):
                lps = [mp_log_softmax(provider.logits(c)) for c in contexts]
                scores = mp_combine(
                    lps[0], lps[1], lps[2],
                    cfg.alpha, cfg.beta, cfg.plausibility_epsilon,
                )
                token = provider.vocab()[mp_argmax(scores)]
                tokens.append(token)
                for c in contexts:
                    c.append(token)
            assert tokens == [s["token"] for s in item["steps"]]
            assert item["output"] == " ".join(tokens)

    def test_failing_item_is_recorded_and_run_continues(self, tmp_path):
        inputs = tmp_path / "inputs.jsonl"
        inputs.write_text(
            json.dumps({"source": "the food was bad", "source_style": "casual",
                        "target_style": "formal"}) + "\n"
            + json.dumps({"source": "broken item", "source_style": "formal",
                          "target_style": "formal"}) + "\n"
        )
        config = base_config(tmp_path, inputs=str(inputs))
        manifest, failures = run_transfer(config)
        assert failures == 1
        assert manifest["items"][0]["error"] is None
        assert manifest["items"][1]["error"]
        assert manifest["items"][1]["output"] is None

    def test_embedding_cache_does_not_change_results(self, tmp_path):
        config = base_config(tmp_path)
        manifest_cold, _ = run_transfer(config)

        cached = base_config(
            tmp_path, cache_dir=str(tmp_path / "cache"),
            output_dir=str(tmp_path / "run2"),
        )
        run_transfer(cached)         # cold cache
        manifest_warm, _ = run_transfer(cached)  # warm cache
        assert [i["output"] for i in manifest_warm["items"]] == [
            i["output"] for i in manifest_cold["items"]
        ]
        assert list(Path(tmp_path / "cache").glob("*.npy"))

    def test_fewshot_pool_requires_targets(self, tmp_path):
        pool = tmp_path / "pool.jsonl"
        pool.write_text(
            json.dumps({"source": "a", "source_style": "s", "target_style": "t"}) + "\n"
        )
        config = base_config(tmp_path, fewshot_corpus=str(pool), k_fewshots=1)
        with pytest.raises(ConfigError, match="no target"):
            run_transfer(config)

    def test_packaged_negative_context_is_usable(self, tmp_path):
        assert len(default_negative_context().split()) > 200
        config = base_config(tmp_path, negative_context=None)
        manifest, failures = run_transfer(config)
        assert failures == 0

    def test_checked_in_conllu_files_back_the_graph_source(self, tmp_path):
        # parses produced by the external adapter, checked in as fixtures;
        # graphs resolve by `<record_index>:<side>` id instead of the flat
        # fallback, which must change the selected few-shot embeddings
        conllu = [
            str(FIXTURES / "pool_source.conllu"),
            str(FIXTURES / "pool_target.conllu"),
            str(FIXTURES / "inputs_source.conllu"),
        ]
        with_parses = base_config(tmp_path, conllu_files=conllu)
        manifest, failures = run_transfer(with_parses)
        assert failures == 0
        assert len(manifest["items"]) == 3

        flat = base_config(tmp_path, output_dir=str(tmp_path / "flat"))
        flat_manifest, _ = run_transfer(flat)
        with_hashes = [i["prompt_sha256"] for i in manifest["items"]]
        flat_hashes = [i["prompt_sha256"] for i in flat_manifest["items"]]
        assert with_hashes != flat_hashes


class TestRunEval:
    def run(self, tmp_path, **overrides):
        config = base_config(tmp_path, **overrides)
        manifest, _ = run_transfer(config)
        return config, manifest

    def test_eval_appends_report_to_manifest(self, tmp_path):
        config, _ = self.run(tmp_path)
        manifest_path = Path(config.output_dir) / "manifest.json"
        classifier = LexiconClassifier.from_file(FIXTURES / "lexicon.txt")
        provider = build_logit_provider(config.logits)
        report = run_eval(manifest_path, classifier, provider)
        assert 0.0 <= report.accuracy <= 1.0
        assert 0.0 <= report.s_sbleu <= 100.0
        assert report.r_sbleu is not None
        assert report.ppl > 0
        stored = load_manifest(manifest_path)["eval"]
        assert stored["accuracy"] == report.accuracy
        assert stored["n_items"] == 3

    def test_identity_corpus_scores_100_bleu(self, tmp_path):
        # hand-built manifest where output == input == reference
        texts = ["the food was bad", "good meal indeed"]
        manifest = {
            "version": "0.1.0",
            "config": {},
            "fewshot_indices": [],
            "items": [
                {
                    "index": i, "input": t, "source_style": "casual",
                    "target_style": "casual", "reference": t,
                    "output": t, "error": None,
                }
                for i, t in enumerate(texts)
            ],
            "eval": None,
        }
        path = tmp_path / "manifest.json"
        write_manifest(manifest, path)
        classifier = LexiconClassifier({"casual": {"bad", "good"}})
        provider = build_logit_provider(
            {"kind": "bigram", "path": str(FIXTURES / "bigram.json")}
        )
        report = run_eval(path, classifier, provider)
        assert report.s_sbleu == 100.0
        assert report.r_sbleu == 100.0
        assert report.accuracy == 1.0
        assert np.isfinite(report.ppl) and report.ppl > 0

    def test_missing_references_omit_r_sbleu(self, tmp_path):
        inputs = tmp_path / "norefs.jsonl"
        inputs.write_text(
            json.dumps({"source": "the food was bad", "source_style": "casual",
                        "target_style": "formal"}) + "\n"
        )
        config, _ = self.run(tmp_path, inputs=str(inputs))
        manifest_path = Path(config.output_dir) / "manifest.json"
        classifier = LexiconClassifier.from_file(FIXTURES / "lexicon.txt")
        provider = build_logit_provider(config.logits)
        report = run_eval(manifest_path, classifier, provider)
        assert report.r_sbleu is None
        assert load_manifest(manifest_path)["eval"]["r_sbleu"] is None

    def test_references_file_overrides_inline(self, tmp_path):
        config, manifest = self.run(tmp_path)
        refs = tmp_path / "refs.jsonl"
        refs.write_text(
            "\n".join(
                json.dumps({
                    "source": item["input"],
                    "reference": item["output"],  # references equal to outputs
                    "source_style": "casual", "target_style": "formal",
                })
                for item in manifest["items"]
            ) + "\n"
        )
        classifier = LexiconClassifier.from_file(FIXTURES / "lexicon.txt")
        provider = build_logit_provider(config.logits)
        report = run_eval(
            Path(config.output_dir) / "manifest.json", classifier, provider,
            references_path=refs,
        )
        assert report.r_sbleu == 100.0
