"""The /generate and /score wire endpoints."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .model import ModelBundle, load_checkpoint, sequence_log_likelihood

log = logging.getLogger(__name__)

MAX_INPUT_TOKENS = 512


@dataclass(frozen=True)
class ServeConfig:
    checkpoint: str
    device: str = "cpu"
    max_input_tokens: int = MAX_INPUT_TOKENS
    beam_size: int = 100
    port: int = 8321

    def __post_init__(self):
        if self.max_input_tokens != MAX_INPUT_TOKENS:
            raise ValueError(
                f"max_input_tokens is pinned to {MAX_INPUT_TOKENS} "
                f"(generator input ceiling), got {self.max_input_tokens}"
            )


def _error(request_id: str, code: str, message: str, status: int) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"id": request_id, "error": {"code": code, "message": message}},
    )


def generate_paraphrases(
    bundle: ModelBundle,
    prompt: str,
    num_return: int,
    beam_size: int,
    max_new_tokens: int,
) -> list[dict]:
    """Beam-search candidates, exactly re-scored, best first.

    Likelihoods are recomputed by teacher forcing rather than taken from
    the beam bookkeeping, so they are the exact joint sequence
    log-probabilities and are always <= 0.
    """
    enc = bundle.tokenizer(prompt, return_tensors="pt")
    with torch.no_grad():
        sequences = bundle.model.generate(
            enc.input_ids,
            attention_mask=enc.attention_mask,
            num_beams=beam_size,
            num_return_sequences=num_return,
            max_new_tokens=max_new_tokens,
            early_stopping=True,
        )
    results = []
    seen = set()
    for row in sequences:
        ids = [i for i in row.tolist() if i != bundle.tokenizer.pad_token_id]
        text = bundle.decode(ids)
        if text in seen:
            continue
        seen.add(text)
        target = torch.tensor([ids], dtype=torch.long)
        ll = sequence_log_likelihood(bundle, enc.input_ids, target)
        results.append({"text": text, "log_likelihood": min(ll, 0.0)})
    results.sort(key=lambda r: (-r["log_likelihood"], r["text"]))
    return results[:num_return]


def relevance_score(bundle: ModelBundle, query: str, passage: str) -> float:
    """Relevance-token transform: log-softmax over the {true, false}
    logits of the first decoded position, evaluated at 'true'."""
    true_id = bundle.tokenizer.convert_tokens_to_ids("true")
    false_id = bundle.tokenizer.convert_tokens_to_ids("false")
    prompt = f"query : {query} document : {passage} relevant :"
    enc = bundle.tokenizer(prompt, return_tensors="pt")
    start = torch.tensor([[bundle.model.config.decoder_start_token_id]])
    with torch.no_grad():
        logits = bundle.model(
            input_ids=enc.input_ids, decoder_input_ids=start
        ).logits[0, -1]
    pair = torch.stack([logits[true_id], logits[false_id]]).log_softmax(0)
    return float(pair[0])


def create_app(config: ServeConfig) -> FastAPI:
    bundle = load_checkpoint(config.checkpoint)
    app = FastAPI(title="gen-sidecar")

    def check_common(body: dict, text_field: str) -> JSONResponse | None:
        request_id = str(body.get("id", ""))
        if not request_id:
            return _error("", "invalid_request", "missing request id", 400)
        text = body.get(text_field)
        if not isinstance(text, str) or not text.strip():
            return _error(request_id, "invalid_request", f"empty {text_field}", 400)
        if bundle.token_count(text) > config.max_input_tokens:
            return _error(
                request_id,
                "input_too_long",
                f"{text_field} exceeds {config.max_input_tokens} tokens",
                400,
            )
        return None

    @app.post("/generate")
    async def generate_endpoint(request: Request):
        body = await request.json()
        bad = check_common(body, "prompt")
        if bad is not None:
            return bad
        request_id = str(body["id"])
        try:
            num_return = int(body["num_return"])
            beam_size = int(body["beam_size"])
            max_new_tokens = int(body["max_new_tokens"])
        except (KeyError, TypeError, ValueError):
            return _error(request_id, "invalid_request", "bad decode parameters", 400)
        if num_return < 1 or beam_size < 1 or max_new_tokens < 1:
            return _error(request_id, "invalid_request", "parameters must be >= 1", 400)
        if num_return > beam_size:
            return _error(
                request_id, "invalid_request",
                f"num_return ({num_return}) exceeds beam_size ({beam_size})", 400,
            )
        try:
            results = generate_paraphrases(
                bundle, body["prompt"], num_return, beam_size, max_new_tokens
            )
        except Exception as e:  # surface as a protocol error body
            log.exception("generation failed")
            return _error(request_id, "generation_failed", str(e), 500)
        return {"id": request_id, "results": results}

    @app.post("/score")
    async def score_endpoint(request: Request):
        body = await request.json()
        for field in ("query", "passage"):
            bad = check_common(body, field)
            if bad is not None:
                return bad
        request_id = str(body["id"])
        try:
            value = relevance_score(bundle, body["query"], body["passage"])
        except Exception as e:
            log.exception("scoring failed")
            return _error(request_id, "scoring_failed", str(e), 500)
        return {"id": request_id, "score": value}

    return app
