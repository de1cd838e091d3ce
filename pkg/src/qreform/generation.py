"""Reformulation prompts, the generation-service client, likelihood
weighting of generated paraphrases, and query fusion.

All neural work happens behind an HTTP wire protocol (or a recorded
fixture of it); this module never loads a model.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import uuid
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import httpx
import jsonschema

from .analysis import AnalysisConfig, analyze
from .errors import (
    ConfigurationError,
    ProtocolError,
    ServiceError,
    TransportError,
    UsageError,
)
from .passages import Passage
from .retrieval import WeightedQuery

log = logging.getLogger(__name__)

PROMPT_TOKEN_BUDGET = 512


class PromptKind(Enum):
    T5QR = "t5qr"
    T5PRF = "t5prf"
    FLANQR = "flanqr"
    FLANPRF = "flanprf"

    @property
    def needs_context(self) -> bool:
        return self in (PromptKind.T5PRF, PromptKind.FLANPRF)


_FLAN_INSTRUCTION = (
    "Improve the search effectiveness by suggesting expansion terms for the query:"
)
_FLAN_CONTEXT_MARKER = "based on the given context information:"


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    num_return: int = 5
    beam_size: int = 100
    max_new_tokens: int = 64
    request_id: str = ""

    def __post_init__(self):
        if self.num_return > self.beam_size:
            raise ConfigurationError(
                f"num_return ({self.num_return}) exceeds beam_size ({self.beam_size})"
            )
        if not self.request_id:
            object.__setattr__(self, "request_id", uuid.uuid4().hex)


@dataclass(frozen=True)
class GenerationResult:
    text: str
    log_likelihood: float  # natural log of the joint sequence probability


class FusionMode(Enum):
    INTERPOLATE = "interpolate"
    APPEND = "append"


@dataclass(frozen=True)
class FusionConfig:
    k_rm3: float = 1.0
    k_gen: float = 0.5
    beta: float = 0.2
    mode: FusionMode = FusionMode.INTERPOLATE

    def __post_init__(self):
        if min(self.k_rm3, self.k_gen, self.beta) < 0:
            raise ConfigurationError("fusion weights must be >= 0")


def _context_text(passages: list[Passage], reserved_tokens: int) -> str:
    tokens: list[str] = []
    for p in passages:
        tokens.extend(p.text.split())
    budget = PROMPT_TOKEN_BUDGET - reserved_tokens
    if len(tokens) > budget:
        log.warning(
            "context of %d tokens exceeds the %d-token prompt budget; truncating",
            len(tokens),
            PROMPT_TOKEN_BUDGET,
        )
        tokens = tokens[: max(budget, 0)]
    return " ".join(tokens)


def build_prompt(
    kind: PromptKind, query: str, context: list[Passage] | None = None
) -> str:
    """Assemble the serialized prompt for one reformulation mode.

    Context passages are joined with spaces; if the whole prompt would
    exceed the 512-token generator input ceiling the context tail is cut
    (the query itself is never touched).
    """
    context = context or []
    if kind.needs_context and not context:
        raise UsageError(f"{kind.value} requires at least one context passage")

    if kind is PromptKind.T5QR:
        return f"refine: {query}"
    if kind is PromptKind.T5PRF:
        skeleton = f"refine: {query} context:"
        ctx = _context_text(context, reserved_tokens=len(skeleton.split()))
        return f"{skeleton} {ctx}"
    if kind is PromptKind.FLANQR:
        return f"{_FLAN_INSTRUCTION} {query}"
    if kind is PromptKind.FLANPRF:
        skeleton = f"{_FLAN_INSTRUCTION} {query}, {_FLAN_CONTEXT_MARKER}"
        ctx = _context_text(context, reserved_tokens=len(skeleton.split()))
        return f"{skeleton} {ctx}"
    raise ConfigurationError(f"unknown prompt kind: {kind}")


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def load_wire_schema() -> dict:
    ref = resources.files("qreform").joinpath("data", "wire_schema.json")
    return json.loads(ref.read_text(encoding="utf-8"))


def validate_message(instance: dict, kind: str) -> None:
    """Validate one wire message against the protocol schema; raises
    ProtocolError on violation. kind names a schema definition, e.g.
    'generate_request' or 'score_response'."""
    schema = load_wire_schema()
    if kind not in schema["definitions"]:
        raise ConfigurationError(f"unknown wire message kind: {kind}")
    try:
        jsonschema.validate(
            instance,
            {"$ref": f"#/definitions/{kind}", "definitions": schema["definitions"]},
        )
    except jsonschema.ValidationError as e:
        raise ProtocolError(f"wire message violates {kind} schema: {e.message}") from e


class HttpGenerationClient:
    """Talks the /generate and /score wire protocol over HTTP.

    Instances are safe for concurrent requests; each request carries its
    own id and the response id must match.
    """

    def __init__(self, base_url: str, timeout: float = 30.0, transport=None):
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(
            base_url=self.base_url, timeout=timeout, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def _post(self, endpoint: str, payload: dict) -> dict:
        try:
            response = self._client.post(endpoint, json=payload)
        except httpx.HTTPError as e:
            raise TransportError(f"generation service unreachable: {e}") from e
        try:
            body = response.json()
        except ValueError as e:
            raise ProtocolError(
                f"non-JSON response from {endpoint} (HTTP {response.status_code})"
            ) from e
        if "error" in body:
            validate_message(body, "error_response")
            raise ServiceError(body["error"]["code"], body["error"]["message"])
        if response.status_code != 200:
            raise ProtocolError(
                f"HTTP {response.status_code} from {endpoint} without error body"
            )
        return body

    def generate(self, request: GenerationRequest) -> list[GenerationResult]:
        payload = {
            "id": request.request_id,
            "prompt": request.prompt,
            "num_return": request.num_return,
            "beam_size": request.beam_size,
            "max_new_tokens": request.max_new_tokens,
        }
        validate_message(payload, "generate_request")
        body = self._post("/generate", payload)
        validate_message(body, "generate_response")
        if body["id"] != request.request_id:
            raise ProtocolError(
                f"response id {body['id']!r} does not match request {request.request_id!r}"
            )
        return [
            GenerationResult(r["text"], float(r["log_likelihood"]))
            for r in body["results"]
        ]

    def score(self, query: str, passage: str) -> float:
        request_id = uuid.uuid4().hex
        payload = {"id": request_id, "query": query, "passage": passage}
        validate_message(payload, "score_request")
        body = self._post("/score", payload)
        validate_message(body, "score_response")
        if body["id"] != request_id:
            raise ProtocolError(
                f"response id {body['id']!r} does not match request {request_id!r}"
            )
        return float(body["score"])


class FixtureGenerationClient:
    """Replays canned generations keyed by SHA-256 of the prompt string.

    Fixture file: one JSON object per line,
    {"prompt_sha256": ..., "results": [{"text": ..., "log_likelihood": ...}]}.
    """

    def __init__(self, path: str | Path):
        self._by_prompt: dict[str, list[GenerationResult]] = {}
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"generation fixture not found: {path}")
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                record = json.loads(line)
                try:
                    self._by_prompt[record["prompt_sha256"]] = [
                        GenerationResult(r["text"], float(r["log_likelihood"]))
                        for r in record["results"]
                    ]
                except KeyError as e:
                    raise ConfigurationError(
                        f"{path}:{lineno}: fixture record missing {e}"
                    ) from None

    def generate(self, request: GenerationRequest) -> list[GenerationResult]:
        key = prompt_sha256(request.prompt)
        if key not in self._by_prompt:
            raise UsageError(
                f"no fixture entry for prompt {request.prompt!r} (sha256 {key})"
            )
        return list(self._by_prompt[key])


def write_generation_fixture(
    entries: dict[str, list[GenerationResult]], path: str | Path
) -> None:
    """Persist prompt -> results as a fixture file (prompts are hashed)."""
    with open(path, "w", encoding="utf-8") as f:
        for prompt, results in entries.items():
            record = {
                "prompt_sha256": prompt_sha256(prompt),
                "results": [
                    {"text": r.text, "log_likelihood": r.log_likelihood}
                    for r in results
                ],
            }
            f.write(json.dumps(record) + "\n")


def score_key_sha256(query: str, passage: str) -> str:
    return hashlib.sha256(f"{query}\x1f{passage}".encode("utf-8")).hexdigest()


class FixtureScorer:
    """Replays canned relevance scores keyed by SHA-256 of query+passage.

    Fixture lines are {"query_passage_sha256": ..., "score": ...}; an
    optional {"default_score": ...} line answers unmatched lookups.
    """

    def __init__(self, path: str | Path):
        self._scores: dict[str, float] = {}
        self._default: float | None = None
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"score fixture not found: {path}")
        with open(path, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                record = json.loads(line)
                if "default_score" in record:
                    self._default = float(record["default_score"])
                else:
                    self._scores[record["query_passage_sha256"]] = float(record["score"])

    def score(self, query: str, passage: str) -> float:
        key = score_key_sha256(query, passage)
        if key in self._scores:
            return self._scores[key]
        if self._default is not None:
            return self._default
        raise UsageError(f"no score fixture entry for query {query!r}")


def generate(client, request: GenerationRequest) -> list[GenerationResult]:
    """Run one generation call and normalize the result list: descending
    log-likelihood, truncated to num_return, likelihoods finite and <= 0."""
    results = client.generate(request)
    for r in results:
        if not math.isfinite(r.log_likelihood) or r.log_likelihood > 0:
            raise ProtocolError(
                f"invalid log likelihood {r.log_likelihood!r} for {r.text!r}"
            )
    ordered = sorted(results, key=lambda r: (-r.log_likelihood, r.text))
    return ordered[: request.num_return]


def paraphrases_to_weighted_query(
    results: list[GenerationResult], analysis: AnalysisConfig
) -> WeightedQuery:
    """Combine generated paraphrases into one weighted query.

    Each paraphrase contributes its terms weighted by the paraphrase's
    joint sequence probability exp(log_likelihood); a term occurring
    twice in one paraphrase contributes twice.
    """
    if not results:
        raise UsageError("no generation results to combine")
    weights: dict[str, float] = {}
    for result in results:
        if not math.isfinite(result.log_likelihood):
            raise UsageError(f"non-finite likelihood for {result.text!r}")
        w = math.exp(result.log_likelihood)
        for term in analyze(result.text, analysis):
            weights[term] = weights.get(term, 0.0) + w
    if not weights:
        log.warning("all %d paraphrases analyzed to empty term lists", len(results))
    return WeightedQuery(weights)


def fuse(
    original: WeightedQuery,
    rm3: WeightedQuery | None,
    generated: WeightedQuery | list[str],
    config: FusionConfig,
    analysis: AnalysisConfig | None = None,
) -> WeightedQuery:
    """Combine reformulations into the final retrieval query.

    interpolate: weight(t) = k_rm3 * rm3(t) + k_gen * generated(t)
    append: original terms at weight 1.0 plus beta per occurrence of each
    analyzed generated-text term (requires `analysis`).
    """
    if config.mode is FusionMode.INTERPOLATE:
        if rm3 is None or not isinstance(generated, WeightedQuery):
            raise UsageError(
                "interpolate fusion needs rm3 and generated weighted queries"
            )
        combined: dict[str, float] = {
            t: config.k_rm3 * w for t, w in rm3.weights.items()
        }
        for t, w in generated.weights.items():
            combined[t] = combined.get(t, 0.0) + config.k_gen * w
        return WeightedQuery(combined, source_text=original.source_text)

    if isinstance(generated, WeightedQuery):
        raise UsageError("append fusion takes raw generated texts, not a weighted query")
    if analysis is None:
        raise UsageError("append fusion requires an analysis config")
    combined = {t: 1.0 for t in original.weights}
    for text in generated:
        for term in analyze(text, analysis):
            combined[term] = combined.get(term, 0.0) + config.beta
    return WeightedQuery(combined, source_text=original.source_text)
