"""Masked-LM fine-tuning over a model-rendering corpus."""

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer

from .config import ServiceConfig
from .corpus import read_corpus_texts
from .errors import DeviceUnavailableError


@dataclass
class TrainResult:
    checkpoint_dir: Path
    epoch_losses: list[float]
    # per epoch, the per-batch losses in processing order
    step_losses: list[list[float]] = field(default_factory=list)


def _resolve_device(name: str) -> torch.device:
    device = torch.device(name)
    if device.type == "cuda" and not torch.cuda.is_available():
        raise DeviceUnavailableError("cuda requested but no CUDA device is available")
    return device


def _mask_batch(
    rows: list[list[int]],
    mask_rate: float,
    mask_id: int,
    pad_id: int,
    special_ids: frozenset[int],
    rng: random.Random,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Pad to a rectangle and mask ~mask_rate of the maskable tokens.

    Labels are -100 everywhere except the masked positions, so the
    loss only scores reconstruction of what was hidden.
    """
    width = max(len(r) for r in rows)
    inputs = torch.full((len(rows), width), pad_id, dtype=torch.long)
    labels = torch.full((len(rows), width), -100, dtype=torch.long)
    attention = torch.zeros((len(rows), width), dtype=torch.long)
    for i, row in enumerate(rows):
        inputs[i, : len(row)] = torch.tensor(row, dtype=torch.long)
        attention[i, : len(row)] = 1
        maskable = [j for j, tid in enumerate(row) if tid not in special_ids]
        if not maskable:
            continue
        k = max(1, round(mask_rate * len(maskable)))
        for j in rng.sample(maskable, min(k, len(maskable))):
            labels[i, j] = row[j]
            inputs[i, j] = mask_id
    return inputs, attention, labels


def finetune(config: ServiceConfig) -> TrainResult:
    """Train on the corpus and save a serving checkpoint.

    Masking is dynamic: each epoch re-draws the masked positions from
    the seeded stream, standard MLM practice. The per-epoch mean loss
    is appended to ``losses.jsonl`` in the checkpoint directory.
    """
    device = _resolve_device(config.device)
    texts = read_corpus_texts(config.corpus_path)

    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)
    tokenizer = AutoTokenizer.from_pretrained(config.base_model)
    model = AutoModelForMaskedLM.from_pretrained(config.base_model).to(device)
    model.train()

    encoded = [
        tokenizer(text, truncation=True, max_length=config.max_input_tokens)["input_ids"]
        for text in texts
    ]
    special_ids = frozenset(tokenizer.all_special_ids)
    mask_id = tokenizer.mask_token_id
    pad_id = tokenizer.pad_token_id

    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    loss_log = output_dir / "losses.jsonl"
    loss_log.write_text("", encoding="utf-8")

    epoch_losses: list[float] = []
    step_losses: list[list[float]] = []
    for epoch in range(1, config.epochs + 1):
        order = list(range(len(encoded)))
        rng.shuffle(order)
        steps: list[float] = []
        for start in range(0, len(order), config.batch_size):
            rows = [encoded[i] for i in order[start : start + config.batch_size]]
            inputs, attention, labels = _mask_batch(
                rows, config.mask_rate, mask_id, pad_id, special_ids, rng
            )
            out = model(
                input_ids=inputs.to(device),
                attention_mask=attention.to(device),
                labels=labels.to(device),
            )
            optimizer.zero_grad()
            out.loss.backward()
            optimizer.step()
            steps.append(out.loss.item())
        mean_loss = sum(steps) / len(steps)
        if not math.isfinite(mean_loss):
            raise RuntimeError(f"training diverged: epoch {epoch} loss is {mean_loss}")
        epoch_losses.append(mean_loss)
        step_losses.append(steps)
        with open(loss_log, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"epoch": epoch, "loss": mean_loss}) + "\n")

    model.eval()
    model.save_pretrained(output_dir)
    tokenizer.save_pretrained(output_dir)
    return TrainResult(checkpoint_dir=output_dir, epoch_losses=epoch_losses, step_losses=step_losses)
