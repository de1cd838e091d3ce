"""Tiny sequence-to-sequence checkpoints with a word-level tokenizer.

The sandbox has no route to a model hub, so the default "checkpoint" is
built locally: a small randomly initialized encoder-decoder whose
word-level vocabulary is assembled from a base word list plus any corpus
files supplied. Everything is seeded, so two builds from the same inputs
are identical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import torch
from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, processors
from transformers import PreTrainedTokenizerFast, T5Config, T5ForConditionalGeneration

PAD, EOS, UNK = "<pad>", "</s>", "<unk>"

_WORD_RE = re.compile(r"\w+|[^\w\s]")

# always-present vocabulary: protocol words, prompt templates, digits,
# single letters and a spread of common English
BASE_WORDS = (
    "true false query document relevant refine context improve the search "
    "effectiveness by suggesting expansion terms for based on given information "
    ": , . ? ! ^ 0 1 2 3 4 5 6 7 8 9 "
    "a b c d e f g h i j k l m n o p q r s t u v w x y z "
    "and of to in is it that this with as at from or an be are was were has have "
    "had not no yes what which who how when where why all any more most other "
    "some such than too very can will just into over under between about after "
    "before while during each few both new old good bad high low large small "
    "long short same different define visceral deep learning neural model data "
    "water river flood spring mountain trail hiking solar panel energy power "
    "heart disease health ocean reef coral marine warming translation language "
    "machine quality ancient roman architecture history city building time year "
    "people world work life system number part place case fact group problem "
    "hand eye week month point government company question story example state"
).split()


def _collect_words(corpus_files) -> list[str]:
    words = []
    seen = set()
    for path in corpus_files:
        text = Path(path).read_text(encoding="utf-8").lower()
        for token in _WORD_RE.findall(text):
            if token not in seen:
                seen.add(token)
                words.append(token)
    return words


def build_tokenizer(extra_words: list[str]) -> PreTrainedTokenizerFast:
    vocab = {PAD: 0, EOS: 1, UNK: 2}
    for word in BASE_WORDS + extra_words:
        if word not in vocab:
            vocab[word] = len(vocab)
    tok = Tokenizer(models.WordLevel(vocab, unk_token=UNK))
    tok.normalizer = normalizers.Lowercase()
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    tok.post_processor = processors.TemplateProcessing(
        single=f"$A {EOS}", special_tokens=[(EOS, vocab[EOS])]
    )
    return PreTrainedTokenizerFast(
        tokenizer_object=tok, pad_token=PAD, eos_token=EOS, unk_token=UNK
    )


@dataclass
class ModelBundle:
    model: T5ForConditionalGeneration
    tokenizer: PreTrainedTokenizerFast

    def token_count(self, text: str) -> int:
        return len(self.tokenizer(text).input_ids)

    def decode(self, ids) -> str:
        tokens = self.tokenizer.convert_ids_to_tokens(
            [i for i in ids if i not in (0, 1)]
        )
        return " ".join(t for t in tokens if t != UNK)


def make_checkpoint(
    out_dir: str | Path,
    seed: int = 0,
    corpus_files: tuple[str, ...] = (),
    d_model: int = 64,
) -> Path:
    """Create and save a deterministic tiny checkpoint."""
    out_dir = Path(out_dir)
    tokenizer = build_tokenizer(_collect_words(corpus_files))
    torch.manual_seed(seed)
    config = T5Config(
        vocab_size=len(tokenizer),
        d_model=d_model,
        d_kv=d_model // 4,
        d_ff=d_model * 2,
        num_layers=2,
        num_decoder_layers=2,
        num_heads=4,
        dropout_rate=0.1,
        decoder_start_token_id=0,
        pad_token_id=0,
        eos_token_id=1,
    )
    model = T5ForConditionalGeneration(config)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return out_dir


def load_checkpoint(path: str | Path, dropout: float | None = None) -> ModelBundle:
    kwargs = {} if dropout is None else {"dropout_rate": dropout}
    model = T5ForConditionalGeneration.from_pretrained(str(path), **kwargs)
    tokenizer = PreTrainedTokenizerFast.from_pretrained(str(path))
    model.eval()
    return ModelBundle(model=model, tokenizer=tokenizer)


def sequence_log_likelihood(bundle: ModelBundle, prompt_ids, target_ids) -> float:
    """Exact joint log-probability of the target sequence given the prompt,
    by teacher forcing: sum of per-token log-softmax values."""
    with torch.no_grad():
        logits = bundle.model(input_ids=prompt_ids, labels=target_ids).logits
    logprobs = logits.log_softmax(-1)
    steps = torch.arange(target_ids.shape[1])
    return float(logprobs[0, steps, target_ids[0]].sum())
