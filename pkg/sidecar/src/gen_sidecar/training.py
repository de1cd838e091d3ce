"""Teacher-forced fine-tuning of source -> target query pairs."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import torch
from transformers.optimization import Adafactor

from .model import ModelBundle, load_checkpoint

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    pairs_path: str
    base_checkpoint: str
    out_dir: str
    learning_rate: float = 3e-4
    dropout: float = 0.10
    epochs: int = 4
    batch_size: int = 6
    seed: int = 0
    max_steps: int | None = None


def read_pairs(path: str | Path) -> list[tuple[str, str]]:
    """Two-column TSV; malformed lines are skipped with a warning."""
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                log.warning("%s:%d: skipping malformed pair line", path, lineno)
                continue
            pairs.append((parts[0], parts[1]))
    return pairs


def _batches(pairs: list[tuple[str, str]], size: int):
    for start in range(0, len(pairs), size):
        yield pairs[start : start + size]


def _encode_batch(bundle: ModelBundle, batch):
    sources = [s for s, _ in batch]
    targets = [t for _, t in batch]
    enc = bundle.tokenizer(sources, return_tensors="pt", padding=True)
    with_labels = bundle.tokenizer(targets, return_tensors="pt", padding=True)
    labels = with_labels.input_ids.clone()
    labels[labels == bundle.tokenizer.pad_token_id] = -100
    return enc, labels


def finetune(config: TrainConfig) -> tuple[Path, list[float]]:
    """Fine-tune the base checkpoint on the pair file; returns the saved
    checkpoint directory and the per-step loss log."""
    pairs = read_pairs(config.pairs_path)
    if not pairs:
        raise ValueError(f"no usable training pairs in {config.pairs_path}")

    torch.manual_seed(config.seed)
    bundle = load_checkpoint(config.base_checkpoint, dropout=config.dropout)
    model = bundle.model
    model.train()
    optimizer = Adafactor(
        model.parameters(),
        lr=config.learning_rate,
        relative_step=False,
        scale_parameter=False,
        warmup_init=False,
    )

    losses: list[float] = []
    step = 0
    done = False
    for epoch in range(config.epochs):
        for batch in _batches(pairs, config.batch_size):
            enc, labels = _encode_batch(bundle, batch)
            out = model(
                input_ids=enc.input_ids,
                attention_mask=enc.attention_mask,
                labels=labels,
            )
            out.loss.backward()
            optimizer.step()
            optimizer.zero_grad()
            step += 1
            loss_value = float(out.loss.detach())
            losses.append(loss_value)
            log.info("step %d (epoch %d): loss %.4f", step, epoch + 1, loss_value)
            if config.max_steps is not None and step >= config.max_steps:
                done = True
                break
        if done:
            break

    model.eval()
    out_dir = Path(config.out_dir)
    model.save_pretrained(out_dir)
    bundle.tokenizer.save_pretrained(out_dir)
    return out_dir, losses


def greedy_decode(bundle: ModelBundle, source: str, max_new_tokens: int = 32) -> str:
    enc = bundle.tokenizer(source, return_tensors="pt")
    with torch.no_grad():
        out = bundle.model.generate(
            enc.input_ids,
            attention_mask=enc.attention_mask,
            num_beams=1,
            do_sample=False,
            max_new_tokens=max_new_tokens,
        )
    return bundle.decode(out[0].tolist())
