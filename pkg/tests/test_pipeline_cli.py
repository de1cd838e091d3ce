import json
import math
from importlib import resources
from pathlib import Path

import pytest
from click.testing import CliRunner

from oracles import bm25_full_scan
from qreform.analysis import AnalysisConfig, analyze
from qreform.cli import main
from qreform.errors import ConfigurationError
from qreform.generation import (
    GenerationResult,
    score_key_sha256,
    write_generation_fixture,
)
from qreform.pipeline import (
    GeneratorConfig,
    PipelineConfig,
    load_pipeline_config,
    run_topics,
)
from qreform.retrieval import build_index, iter_corpus
from qreform.trecio import load_run, validate_run_file


def demo_path(name: str) -> str:
    ref = resources.files("qreform").joinpath("data", "demo", name)
    return str(ref)


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def demo_index_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("idx") / "demo.idx"
    result = CliRunner().invoke(
        main, ["index", demo_path("corpus.tsv"), str(out)]
    )
    assert result.exit_code == 0, result.output
    return str(out)


class TestCmdIndex:
    def test_demo_corpus_doc_count(self, runner, tmp_path):
        out = tmp_path / "demo.idx"
        result = runner.invoke(main, ["index", demo_path("corpus.tsv"), str(out)])
        assert result.exit_code == 0, result.output
        assert "indexed 50 documents" in result.output

    def test_reload_gives_identical_results(self, runner, tmp_path, demo_index_file):
        run_a = tmp_path / "a.run"
        run_b = tmp_path / "b.run"
        for out in (run_a, run_b):
            result = runner.invoke(
                main,
                ["run", demo_path("topics.tsv"), demo_index_file,
                 "--mode", "bm25", "--out", str(out)],
            )
            assert result.exit_code == 0, result.output
        assert run_a.read_bytes() == run_b.read_bytes()

    def test_version_mismatch_message(self, runner, tmp_path, demo_index_file):
        corrupted = tmp_path / "bad.idx"
        raw = bytearray(Path(demo_index_file).read_bytes())
        raw[8] = 77
        corrupted.write_bytes(bytes(raw))
        result = runner.invoke(
            main,
            ["run", demo_path("topics.tsv"), str(corrupted),
             "--mode", "bm25", "--out", str(tmp_path / "x.run")],
        )
        assert result.exit_code == 1
        assert "version" in result.output


class TestCmdRun:
    def test_all_runs_pass_trec_validation(self, runner, tmp_path, demo_index_file):
        for mode in ("bm25", "rm3", "bo1", "kl"):
            out = tmp_path / f"{mode}.run"
            result = runner.invoke(
                main,
                ["run", demo_path("topics.tsv"), demo_index_file,
                 "--mode", mode, "--out", str(out)],
            )
            assert result.exit_code == 0, result.output
            validate_run_file(out)

    def test_tag_defaults_to_mode(self, runner, tmp_path, demo_index_file):
        out = tmp_path / "tagged.run"
        runner.invoke(
            main,
            ["run", demo_path("topics.tsv"), demo_index_file,
             "--mode", "rm3", "--out", str(out)],
        )
        assert out.read_text().splitlines()[0].split()[5] == "rm3"

    def test_gen_mode_requires_fixture_or_endpoint(self, runner, tmp_path, demo_index_file):
        result = runner.invoke(
            main,
            ["run", demo_path("topics.tsv"), demo_index_file,
             "--mode", "t5qr", "--out", str(tmp_path / "x.run")],
        )
        assert result.exit_code == 1
        assert "endpoint or fixture" in result.output

    def test_t5qr_with_k_gen_zero_matches_rm3(self, runner, tmp_path, demo_index_file):
        rm3_out = tmp_path / "rm3.run"
        t5_out = tmp_path / "t5.run"
        base = ["run", demo_path("topics.tsv"), demo_index_file, "--tag", "shared"]
        r1 = runner.invoke(main, base + ["--mode", "rm3", "--out", str(rm3_out)])
        r2 = runner.invoke(
            main,
            base + ["--mode", "t5qr", "--out", str(t5_out), "--k-gen", "0",
                    "--fixture", demo_path("generations.jsonl")],
        )
        assert r1.exit_code == 0 and r2.exit_code == 0, r1.output + r2.output
        assert rm3_out.read_bytes() == t5_out.read_bytes()

    def test_gen_modes_run_from_fixture(self, runner, tmp_path, demo_index_file):
        for mode in ("t5qr", "t5prf", "flanqr", "flanprf"):
            out = tmp_path / f"{mode}.run"
            result = runner.invoke(
                main,
                ["run", demo_path("topics.tsv"), demo_index_file,
                 "--mode", mode, "--out", str(out),
                 "--fixture", demo_path("generations.jsonl")],
            )
            assert result.exit_code == 0, result.output
            validate_run_file(out)

    def test_worker_count_does_not_change_output(self, tmp_path):
        config = AnalysisConfig.default()
        index = build_index(iter_corpus(demo_path("corpus.tsv")), config)
        topics = {"q1": "solar panel efficiency", "q2": "heart disease prevention"}
        gen = GeneratorConfig(fixture=demo_path("generations.jsonl"))
        serial = run_topics(
            index, topics, "t5prf",
            PipelineConfig(generator=gen, workers=1),
        )
        parallel = run_topics(
            index, topics, "t5prf",
            PipelineConfig(generator=gen, workers=4),
        )
        assert {q: r.entries for q, r in serial.items()} == {
            q: r.entries for q, r in parallel.items()
        }


class TestFlanprfHandTrace:
    def test_single_query_pipeline_matches_manual_trace(self, runner, tmp_path):
        # one topic, four docs; every pipeline stage recomputed by hand
        corpus = tmp_path / "corpus.tsv"
        docs = [
            ("da", "tide pools host crabs"),
            ("db", "tide charts for sailors"),
            ("dc", "estuary mudflats attract wading birds"),
            ("dd", "mountain trails need boots"),
        ]
        corpus.write_text("".join(f"{d}\t{t}\n" for d, t in docs))
        topics = tmp_path / "topics.tsv"
        topics.write_text("t1\ttide pools\n")
        index_file = tmp_path / "toy.idx"
        assert (
            runner.invoke(
                main, ["index", str(corpus), str(index_file), "--stopwords", "none", "--no-stem"]
            ).exit_code
            == 0
        )

        # fixture for the flanprf prompt: context will be doc 'da' (the
        # only doc matching both query terms; single passage each)
        prompt = (
            "Improve the search effectiveness by suggesting expansion terms "
            "for the query: tide pools, based on the given context "
            "information: tide pools host crabs"
        )
        fixture = tmp_path / "gen.jsonl"
        write_generation_fixture(
            {prompt: [
                GenerationResult("estuary mudflats", math.log(0.5)),
                GenerationResult("tide estuary", math.log(0.25)),
            ]},
            fixture,
        )
        out = tmp_path / "flanprf.run"
        result = runner.invoke(
            main,
            ["run", str(topics), str(index_file), "--mode", "flanprf",
             "--out", str(out), "--fixture", str(fixture)],
        )
        assert result.exit_code == 0, result.output

        # manual trace: append fusion -> original terms at 1.0 plus 0.2
        # per generated-term occurrence
        weights = {"tide": 1.0 + 0.2, "pools": 1.0, "estuary": 0.4, "mudflats": 0.2}
        doc_terms = {d: t.split() for d, t in docs}
        expected = bm25_full_scan(doc_terms, weights)
        got = load_run(out)["t1"]
        assert got.doc_ids() == [d for d, _ in expected]
        for (d1, s1), (d2, s2) in zip(got.entries, expected):
            assert d1 == d2 and abs(s1 - s2) < 1e-6


class TestCmdRerank:
    def _base_run(self, runner, tmp_path, demo_index_file):
        out = tmp_path / "bm25.run"
        runner.invoke(
            main,
            ["run", demo_path("topics.tsv"), demo_index_file,
             "--mode", "bm25", "--out", str(out), "--depth", "5"],
        )
        return out

    def test_constant_fixture_gives_doc_id_order(self, runner, tmp_path, demo_index_file):
        base = self._base_run(runner, tmp_path, demo_index_file)
        fixture = tmp_path / "scores.jsonl"
        fixture.write_text(json.dumps({"default_score": 1.0}) + "\n")
        out = tmp_path / "rr.run"
        result = runner.invoke(
            main,
            ["rerank", str(base), demo_path("topics.tsv"), demo_index_file,
             "--out", str(out), "--score-fixture", str(fixture)],
        )
        assert result.exit_code == 0, result.output
        validate_run_file(out)
        for qid, ranking in load_run(out).items():
            assert ranking.doc_ids() == sorted(ranking.doc_ids())
        first = out.read_text().splitlines()[0].split()
        assert first[5] == "bm25.rr"

    def test_singleton_candidates_unchanged(self, runner, tmp_path, demo_index_file):
        base = self._base_run(runner, tmp_path, demo_index_file)
        single = tmp_path / "single.run"
        lines = [
            line for line in base.read_text().splitlines() if line.split()[3] == "1"
        ]
        single.write_text("".join(l + "\n" for l in lines))
        fixture = tmp_path / "scores.jsonl"
        fixture.write_text(json.dumps({"default_score": 0.5}) + "\n")
        out = tmp_path / "rr.run"
        result = runner.invoke(
            main,
            ["rerank", str(single), demo_path("topics.tsv"), demo_index_file,
             "--out", str(out), "--score-fixture", str(fixture)],
        )
        assert result.exit_code == 0, result.output
        assert {q: r.doc_ids() for q, r in load_run(out).items()} == {
            q: r.doc_ids() for q, r in load_run(single).items()
        }

    def test_two_query_fixture_max_aggregation(self, runner, tmp_path):
        corpus = tmp_path / "corpus.tsv"
        # window 2, stride 1: 'a b c' -> passages 'a b', 'b c'
        corpus.write_text("d1\talpha beta gamma\nd2\tdelta beta\n")
        topics = tmp_path / "topics.tsv"
        topics.write_text("t1\tbeta\nt2\tdelta\n")
        index_file = tmp_path / "toy.idx"
        CliRunner().invoke(
            main, ["index", str(corpus), str(index_file), "--stopwords", "none"]
        )
        base = tmp_path / "base.run"
        base.write_text(
            "t1 Q0 d1 1 2.0 x\nt1 Q0 d2 2 1.0 x\n"
            "t2 Q0 d2 1 2.0 x\nt2 Q0 d1 2 1.0 x\n"
        )
        entries = [
            {"query_passage_sha256": score_key_sha256("beta", "alpha beta"), "score": 0.9},
            {"query_passage_sha256": score_key_sha256("beta", "beta gamma"), "score": 0.1},
            {"query_passage_sha256": score_key_sha256("beta", "delta beta"), "score": 0.5},
            {"query_passage_sha256": score_key_sha256("delta", "alpha beta"), "score": 0.2},
            {"query_passage_sha256": score_key_sha256("delta", "beta gamma"), "score": 0.3},
            {"query_passage_sha256": score_key_sha256("delta", "delta beta"), "score": 0.8},
        ]
        fixture = tmp_path / "scores.jsonl"
        fixture.write_text("".join(json.dumps(e) + "\n" for e in entries))
        out = tmp_path / "rr.run"
        result = CliRunner().invoke(
            main,
            ["rerank", str(base), str(topics), str(index_file), "--out", str(out),
             "--score-fixture", str(fixture), "--window", "2", "--stride", "1"],
        )
        assert result.exit_code == 0, result.output
        loaded = load_run(out)
        assert dict(loaded["t1"].entries) == {"d1": 0.9, "d2": 0.5}
        assert dict(loaded["t2"].entries) == {"d2": 0.8, "d1": 0.3}


class TestCmdEval:
    def test_run_vs_itself_no_markers(self, runner, tmp_path, demo_index_file):
        out = tmp_path / "bm25.run"
        runner.invoke(
            main,
            ["run", demo_path("topics.tsv"), demo_index_file,
             "--mode", "bm25", "--out", str(out)],
        )
        result = runner.invoke(
            main,
            ["eval", str(out), "--qrels", demo_path("qrels.txt"),
             "--baseline", str(out), "--metrics", "map,ndcg@10"],
        )
        assert result.exit_code == 0, result.output
        assert "*" not in result.output.split("\n")[1]

    def test_perfect_vs_empty_map_delta(self, runner, tmp_path):
        qrels = tmp_path / "qrels.txt"
        qrels.write_text("q1 0 d1 1\nq1 0 d2 1\n")
        perfect = tmp_path / "perfect.run"
        perfect.write_text("q1 Q0 d1 1 2.0 p\nq1 Q0 d2 2 1.0 p\n")
        empty = tmp_path / "empty.run"
        empty.write_text("q1 Q0 dx 1 1.0 e\n")
        result = runner.invoke(
            main, ["eval", str(perfect), str(empty), "--qrels", str(qrels),
                   "--metrics", "map"],
        )
        assert result.exit_code == 0, result.output
        lines = result.output.strip().splitlines()
        values = {l.split("\t")[0]: float(l.split("\t")[1]) for l in lines[1:]}
        assert values["perfect.run"] - values["empty.run"] == pytest.approx(1.0)

    def test_qid_mismatch_under_significance(self, runner, tmp_path):
        qrels = tmp_path / "qrels.txt"
        qrels.write_text("q1 0 d1 1\nq2 0 d2 1\n")
        full = tmp_path / "full.run"
        full.write_text("q1 Q0 d1 1 1.0 f\nq2 Q0 d2 1 1.0 f\n")
        partial = tmp_path / "partial.run"
        partial.write_text("q1 Q0 d1 1 1.0 p\n")
        result = runner.invoke(
            main,
            ["eval", str(partial), "--qrels", str(qrels), "--baseline", str(full)],
        )
        assert result.exit_code == 1
        assert "q2" in result.output

    def test_metrics_match_oracle_values(self, runner, tmp_path):
        qrels = tmp_path / "qrels.txt"
        qrels.write_text("q1 0 d1 1\nq1 0 d3 1\n")
        run = tmp_path / "toy.run"
        run.write_text("q1 Q0 d1 1 3.0 t\nq1 Q0 d2 2 2.0 t\nq1 Q0 d3 3 1.0 t\n")
        result = runner.invoke(
            main, ["eval", str(run), "--qrels", str(qrels), "--metrics", "map,ndcg@10"]
        )
        line = result.output.strip().splitlines()[1].split("\t")
        assert float(line[1]) == pytest.approx(0.8333, abs=1e-4)
        assert float(line[2]) == pytest.approx(0.9197, abs=1e-4)


class TestCmdPairs:
    @pytest.fixture()
    def pair_inputs(self, tmp_path, runner):
        corpus = tmp_path / "corpus.tsv"
        corpus.write_text(
            "d1\triver flooding in spring\n"
            "d2\tspring river flood warnings\n"
            "d3\tmountain hiking trails\n"
            "d4\ttrail maps for hikers\n"
        )
        topics = tmp_path / "topics.tsv"
        topics.write_text(
            "q1\triver flood\nq2\tthe spring flood\nq3\tmountain trails\nq4\thiking maps\n"
        )
        qrels = tmp_path / "qrels.txt"
        qrels.write_text(
            "q1 0 d1 1\nq1 0 d2 1\nq2 0 d2 1\nq3 0 d3 1\nq3 0 d4 1\nq4 0 d4 1\n"
        )
        index_file = tmp_path / "toy.idx"
        runner.invoke(main, ["index", str(corpus), str(index_file)])
        return topics, qrels, index_file

    def test_no_filters_exports_initial_pool(self, runner, tmp_path, pair_inputs):
        topics, qrels, index_file = pair_inputs
        out = tmp_path / "pairs.tsv"
        result = runner.invoke(
            main, ["pairs", str(qrels), str(topics), str(index_file), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        rows = [l.split("\t") for l in out.read_text().splitlines()]
        assert len(rows) == 4  # (q1,q2) and (q3,q4), both orientations

    def test_filtered_pool_sizes_monotone(self, runner, tmp_path, pair_inputs):
        topics, qrels, index_file = pair_inputs
        out = tmp_path / "pairs.tsv"
        result = runner.invoke(
            main,
            ["pairs", str(qrels), str(topics), str(index_file), "--out", str(out),
             "--filters", "E+S", "--delta-o", "0"],
        )
        assert result.exit_code == 0, result.output
        sizes = [
            int(line.split("\t")[1])
            for line in result.output.splitlines()
            if line and line[0] not in "#s"
        ]
        assert sizes == sorted(sizes, reverse=True)

    def test_stage_report_matches_export(self, runner, tmp_path, pair_inputs):
        topics, qrels, index_file = pair_inputs
        out = tmp_path / "pairs.tsv"
        report = tmp_path / "report.tsv"
        result = runner.invoke(
            main,
            ["pairs", str(qrels), str(topics), str(index_file), "--out", str(out),
             "--filters", "S", "--report", str(report)],
        )
        assert result.exit_code == 0, result.output
        last = report.read_text().strip().splitlines()[-1].split("\t")
        assert int(last[1]) == len(out.read_text().splitlines())


class TestGeneratorConfig:
    def test_exactly_one_source_required(self):
        with pytest.raises(ConfigurationError):
            GeneratorConfig().require_one_source()
        with pytest.raises(ConfigurationError):
            GeneratorConfig(endpoint="http://x", fixture="f").require_one_source()
        GeneratorConfig(fixture=demo_path("generations.jsonl")).require_one_source()

    def test_env_var_overrides_endpoint(self, monkeypatch):
        from qreform.generation import HttpGenerationClient
        from qreform.pipeline import ENDPOINT_ENV_VAR

        monkeypatch.setenv(ENDPOINT_ENV_VAR, "http://from-env:9999")
        client = GeneratorConfig(endpoint="http://from-config").make_client()
        assert isinstance(client, HttpGenerationClient)
        assert client.base_url == "http://from-env:9999"

    def test_fixture_client_without_env(self, monkeypatch):
        from qreform.generation import FixtureGenerationClient
        from qreform.pipeline import ENDPOINT_ENV_VAR

        monkeypatch.delenv(ENDPOINT_ENV_VAR, raising=False)
        client = GeneratorConfig(fixture=demo_path("generations.jsonl")).make_client()
        assert isinstance(client, FixtureGenerationClient)


class TestPipelineConfigFile:
    def test_yaml_sections_loaded(self, tmp_path):
        cfg = tmp_path / "exp.yaml"
        cfg.write_text(
            "bm25: {k1: 0.9, b: 0.5}\n"
            "prf: {fb_terms: 20}\n"
            "context: {selector: maxp, num_passages: 2}\n"
            "fusion: {k_gen: 0.8}\n"
            "run: {depth: 100, workers: 2}\n"
        )
        config = load_pipeline_config(str(cfg))
        assert config.bm25.k1 == 0.9 and config.bm25.b == 0.5
        assert config.prf.fb_terms == 20
        assert config.context.selector.value == "maxp"
        assert config.fusion.k_gen == 0.8
        assert config.depth == 100 and config.workers == 2

    def test_defaults_without_file(self):
        config = load_pipeline_config(None)
        assert config.bm25.k1 == 1.2 and config.depth == 1000
        assert config.prf.fb_docs == 10 and config.context.window == 128
        assert config.generator.beam_size == 100 and config.generator.num_return == 5

    def test_cli_flag_overrides_file(self, runner, tmp_path, demo_index_file):
        cfg = tmp_path / "exp.yaml"
        cfg.write_text("bm25: {k1: 0.9}\n")
        out_file, out_flag = tmp_path / "file.run", tmp_path / "flag.run"
        runner.invoke(
            main,
            ["run", demo_path("topics.tsv"), demo_index_file, "--mode", "bm25",
             "--out", str(out_file), "--config", str(cfg), "--tag", "x"],
        )
        runner.invoke(
            main,
            ["run", demo_path("topics.tsv"), demo_index_file, "--mode", "bm25",
             "--out", str(out_flag), "--config", str(cfg), "--tag", "x",
             "--k1", "2.0"],
        )
        assert out_file.read_bytes() != out_flag.read_bytes()

    def test_bad_section_type(self, tmp_path):
        cfg = tmp_path / "exp.yaml"
        cfg.write_text("bm25: just-a-string\n")
        with pytest.raises(ConfigurationError):
            load_pipeline_config(str(cfg))
