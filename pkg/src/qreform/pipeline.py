"""Retrieve -> expand -> reformulate -> re-retrieve pipelines.

Each run mode maps one topic set to per-query rankings. Generation modes
go through the wire client (live service or recorded fixture); the T5
modes interpolate the generated terms with RM3, the FLAN modes append
them to the original query.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import yaml

from .errors import ConfigurationError, UsageError
from .generation import (
    FusionConfig,
    FusionMode,
    FixtureGenerationClient,
    GenerationRequest,
    HttpGenerationClient,
    PromptKind,
    build_prompt,
    fuse,
    generate,
    paraphrases_to_weighted_query,
)
from .pairs import FilterConfig
from .passages import ContextConfig, Selector, select_context
from .prf import DfrModel, PrfConfig, expand_dfr, expand_rm3
from .retrieval import (
    DEFAULT_DEPTH,
    Bm25Params,
    Index,
    Ranking,
    WeightedQuery,
    search,
)

log = logging.getLogger(__name__)

ENDPOINT_ENV_VAR = "QREFORM_ENDPOINT"

RUN_MODES = ("bm25", "rm3", "bo1", "kl", "t5qr", "t5prf", "flanqr", "flanprf")
GEN_MODES = ("t5qr", "t5prf", "flanqr", "flanprf")


@dataclass(frozen=True)
class GeneratorConfig:
    endpoint: str | None = None
    fixture: str | None = None
    num_return: int = 5
    beam_size: int = 100
    max_new_tokens: int = 64

    def require_one_source(self) -> None:
        endpoint = os.environ.get(ENDPOINT_ENV_VAR) or self.endpoint
        if bool(endpoint) == bool(self.fixture):
            raise ConfigurationError(
                "generation modes need exactly one of endpoint or fixture"
            )

    def make_client(self):
        endpoint = os.environ.get(ENDPOINT_ENV_VAR) or self.endpoint
        if self.fixture and not endpoint:
            return FixtureGenerationClient(self.fixture)
        if endpoint and not self.fixture:
            return HttpGenerationClient(endpoint)
        raise ConfigurationError(
            "generation modes need exactly one of endpoint or fixture"
        )


@dataclass(frozen=True)
class PipelineConfig:
    bm25: Bm25Params = Bm25Params()
    prf: PrfConfig = PrfConfig()
    context: ContextConfig = ContextConfig()
    fusion: FusionConfig = FusionConfig()
    filters: FilterConfig = FilterConfig()
    generator: GeneratorConfig = GeneratorConfig()
    depth: int = DEFAULT_DEPTH
    workers: int = 4


def load_pipeline_config(path: str | None) -> PipelineConfig:
    """Read the declarative YAML experiment manifest; missing sections
    fall back to defaults. CLI flags override the loaded values."""
    if path is None:
        return PipelineConfig()
    with open(path, encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}

    def section(name: str) -> dict:
        value = raw.get(name) or {}
        if not isinstance(value, dict):
            raise ConfigurationError(f"config section {name!r} must be a mapping")
        return value

    ctx = section("context")
    if "selector" in ctx:
        ctx["selector"] = Selector(ctx["selector"])
    fus = section("fusion")
    if "mode" in fus:
        fus["mode"] = FusionMode(fus["mode"])
    return PipelineConfig(
        bm25=Bm25Params(**section("bm25")),
        prf=PrfConfig(**section("prf")),
        context=ContextConfig(**ctx),
        fusion=FusionConfig(**fus),
        filters=FilterConfig(**section("filters")),
        generator=GeneratorConfig(**section("generation")),
        **section("run"),
    )


def _fusion_for_mode(mode: str, config: PipelineConfig) -> FusionConfig:
    # T5 modes interpolate with RM3 terms; FLAN modes append to the
    # original query. Either can be forced via config.fusion.mode.
    wanted = FusionMode.INTERPOLATE if mode.startswith("t5") else FusionMode.APPEND
    return replace(config.fusion, mode=wanted)


def run_query(
    index: Index,
    query_id: str,
    text: str,
    mode: str,
    config: PipelineConfig,
    client=None,
) -> Ranking:
    """Execute one query through the selected pipeline mode."""
    analysis = index.analysis
    original = WeightedQuery.from_text(text, analysis)
    if mode == "bm25":
        result = search(index, original, config.depth, config.bm25)
        return Ranking(query_id, result.entries)

    first_pass = search(index, original, config.depth, config.bm25)
    if mode in ("rm3", "bo1", "kl"):
        if mode == "rm3":
            expanded = expand_rm3(index, original, first_pass, config.prf)
        else:
            expanded = expand_dfr(
                index, original, first_pass, DfrModel(mode), config.prf
            )
        result = search(index, expanded, config.depth, config.bm25)
        return Ranking(query_id, result.entries)

    if mode not in GEN_MODES:
        raise ConfigurationError(f"unknown run mode: {mode}")
    if client is None:
        raise UsageError(f"mode {mode} requires a generation client")

    kind = PromptKind(mode)
    context = []
    if kind.needs_context:
        if first_pass:
            context = select_context(index, original, first_pass, config.context)
        if not context:
            # no feedback text available; degrade to the query-only prompt
            log.warning("no feedback context for %s; using query-only prompt", query_id)
            kind = PromptKind.T5QR if mode == "t5prf" else PromptKind.FLANQR
    prompt = build_prompt(kind, text, context)
    request = GenerationRequest(
        prompt=prompt,
        num_return=config.generator.num_return,
        beam_size=config.generator.beam_size,
        max_new_tokens=config.generator.max_new_tokens,
    )
    results = generate(client, request)

    fusion = _fusion_for_mode(mode, config)
    if fusion.mode is FusionMode.INTERPOLATE:
        generated = paraphrases_to_weighted_query(results, analysis)
        rm3_query = expand_rm3(index, original, first_pass, config.prf)
        fused = fuse(original, rm3_query, generated, fusion)
    else:
        fused = fuse(
            original, None, [r.text for r in results], fusion, analysis=analysis
        )
    if not fused.weights:
        log.warning("fused query for %s is empty; falling back to original", query_id)
        fused = original
    result = search(index, fused, config.depth, config.bm25)
    return Ranking(query_id, result.entries)


def run_topics(
    index: Index,
    topics: dict[str, str],
    mode: str,
    config: PipelineConfig,
    client=None,
) -> dict[str, Ranking]:
    """Run every topic through the pipeline with a bounded worker pool;
    output preserves the topics' order regardless of completion order."""
    if mode in GEN_MODES and client is None:
        client = config.generator.make_client()
    items = list(topics.items())
    if config.workers <= 1 or len(items) <= 1:
        return {
            qid: run_query(index, qid, text, mode, config, client)
            for qid, text in items
        }
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = {
            qid: pool.submit(run_query, index, qid, text, mode, config, client)
            for qid, text in items
        }
        return {qid: futures[qid].result() for qid, _ in items}
