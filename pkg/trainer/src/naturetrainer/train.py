"""Per-fold training with early stopping and prediction-file emission.

Base hyperparameters: 10 epochs, batch size 8, gradient accumulation 2,
warmup ratio 0.1, learning rate 5e-5, early-stop patience 3 on validation
F1. A run that never improves still writes its prediction file.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import torch
from torch import nn

from naturetext.evaluation import FoldSpec
from naturetext.gold import GoldRow, load_gold

from .model import EncoderClassifier, Vocabulary, batch_encode


class TrainerError(Exception):
    pass


@dataclass(frozen=True)
class TrainConfig:
    dimension: str = "nature"
    fold_index: int = 0
    model_tag: str = "compact-encoder"
    epochs: int = 10
    batch_size: int = 8
    gradient_accumulation: int = 2
    warmup_ratio: float = 0.1
    learning_rate: float = 5e-5
    patience: int = 3
    seed: int = 0
    max_len: int = 64
    d_model: int = 64
    n_layers: int = 2

    @property
    def hyper_tag(self) -> str:
        return f"lr{self.learning_rate:g}_bs{self.batch_size}"


@dataclass
class FoldResult:
    config: TrainConfig
    prediction_path: Path
    checkpoint_path: Optional[Path]
    epochs_ran: int
    stopped_early: bool
    best_val_f1: float
    val_f1_history: list = field(default_factory=list)


def prediction_path(out_dir: str | Path, config: TrainConfig) -> Path:
    """Documented layout: preds/{dimension}/{model}/{hyper}/fold{i}.jsonl"""
    return (
        Path(out_dir)
        / "preds"
        / config.dimension
        / config.model_tag
        / config.hyper_tag
        / f"fold{config.fold_index}.jsonl"
    )


def _binary_f1(predictions: Sequence[int], gold: Sequence[int]) -> float:
    tp = sum(1 for p, g in zip(predictions, gold) if p == 1 and g == 1)
    fp = sum(1 for p, g in zip(predictions, gold) if p == 1 and g == 0)
    fn = sum(1 for p, g in zip(predictions, gold) if p == 0 and g == 1)
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def _stratified_validation_split(
    rows: Sequence[GoldRow], dimension: str, fraction: float, seed: int
) -> tuple[list[GoldRow], list[GoldRow]]:
    rng = random.Random(seed)
    positives = [r for r in rows if r.label(dimension) == 1]
    negatives = [r for r in rows if r.label(dimension) == 0]
    rng.shuffle(positives)
    rng.shuffle(negatives)
    n_val_pos = max(1, round(len(positives) * fraction)) if positives else 0
    n_val_neg = max(1, round(len(negatives) * fraction)) if negatives else 0
    val = positives[:n_val_pos] + negatives[:n_val_neg]
    train = positives[n_val_pos:] + negatives[n_val_neg:]
    rng.shuffle(train)
    rng.shuffle(val)
    return train, val


def _lr_lambda(step: int, total_steps: int, warmup_steps: int) -> float:
    if step < warmup_steps:
        return (step + 1) / max(1, warmup_steps)
    remaining = total_steps - step
    return max(0.0, remaining / max(1, total_steps - warmup_steps))


@torch.no_grad()
def _predict_probs(model: nn.Module, vocab: Vocabulary, texts, max_len: int, batch_size: int = 64):
    model.eval()
    probs = []
    for start in range(0, len(texts), batch_size):
        chunk = texts[start : start + batch_size]
        logits = model(batch_encode(vocab, chunk, max_len))
        probs.extend(torch.softmax(logits, dim=-1)[:, 1].tolist())
    return probs


def train_fold(
    config: TrainConfig,
    train_rows: Sequence[GoldRow],
    test_rows: Sequence[GoldRow],
    out_dir: str | Path,
    validation_fraction: float = 0.1,
    save_checkpoint: bool = True,
) -> FoldResult:
    """Train one fold's classifier and write its prediction file.

    Early stopping watches validation F1 with the configured patience; the
    best checkpoint is restored before predicting the test split.
    """
    if not train_rows or not test_rows:
        raise TrainerError("train and test splits must be non-empty")
    torch.manual_seed(config.seed)
    torch.use_deterministic_algorithms(True)

    fit_rows, val_rows = _stratified_validation_split(
        train_rows, config.dimension, validation_fraction, config.seed
    )
    vocab = Vocabulary.build([r.text for r in fit_rows])
    model = EncoderClassifier(
        vocab_size=len(vocab),
        d_model=config.d_model,
        n_layers=config.n_layers,
        max_len=config.max_len,
    )
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    micro_per_epoch = math.ceil(len(fit_rows) / config.batch_size)
    steps_per_epoch = math.ceil(micro_per_epoch / config.gradient_accumulation)
    total_steps = steps_per_epoch * config.epochs
    warmup_steps = int(total_steps * config.warmup_ratio)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: _lr_lambda(step, total_steps, warmup_steps)
    )
    loss_fn = nn.CrossEntropyLoss()
    order_rng = random.Random(config.seed + 1)

    val_texts = [r.text for r in val_rows]
    val_gold = [r.label(config.dimension) for r in val_rows]
    best_state = {k: v.clone() for k, v in model.state_dict().items()}
    best_val_f1 = -1.0
    epochs_without_improvement = 0
    epochs_ran = 0
    stopped_early = False
    history: list[float] = []

    for epoch in range(config.epochs):
        epochs_ran = epoch + 1
        model.train()
        indices = list(range(len(fit_rows)))
        order_rng.shuffle(indices)
        optimizer.zero_grad()
        for micro, start in enumerate(range(0, len(indices), config.batch_size)):
            batch = [fit_rows[i] for i in indices[start : start + config.batch_size]]
            token_ids = batch_encode(vocab, [r.text for r in batch], config.max_len)
            labels = torch.tensor([r.label(config.dimension) for r in batch])
            loss = loss_fn(model(token_ids), labels) / config.gradient_accumulation
            loss.backward()
            if (micro + 1) % config.gradient_accumulation == 0 or start + config.batch_size >= len(indices):
                optimizer.step()
                scheduler.step()
                optimizer.zero_grad()
        if val_rows:
            val_probs = _predict_probs(model, vocab, val_texts, config.max_len)
            val_pred = [int(p >= 0.5) for p in val_probs]
            val_f1 = _binary_f1(val_pred, val_gold)
        else:
            val_f1 = 0.0
        history.append(val_f1)
        if val_f1 > best_val_f1:
            best_val_f1 = val_f1
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= config.patience:
                stopped_early = True
                break

    model.load_state_dict(best_state)
    probs = _predict_probs(model, vocab, [r.text for r in test_rows], config.max_len)
    pred_path = prediction_path(out_dir, config)
    pred_path.parent.mkdir(parents=True, exist_ok=True)
    with pred_path.open("w", encoding="utf-8") as fh:
        for row, prob in zip(test_rows, probs):
            fh.write(
                json.dumps(
                    {
                        "sample_id": row.sample_id,
                        "prob": round(prob, 8),
                        "pred": int(prob >= 0.5),
                    }
                )
                + "\n"
            )
    checkpoint_path = None
    if save_checkpoint:
        checkpoint_path = pred_path.with_suffix(".pt")
        torch.save({"state_dict": best_state, "config": config.__dict__}, checkpoint_path)
    return FoldResult(
        config=config,
        prediction_path=pred_path,
        checkpoint_path=checkpoint_path,
        epochs_ran=epochs_ran,
        stopped_early=stopped_early,
        best_val_f1=best_val_f1,
        val_f1_history=history,
    )


def train_all_folds(
    config: TrainConfig,
    gold_path: str | Path,
    folds_path: str | Path,
    out_dir: str | Path,
    save_checkpoint: bool = False,
) -> list[FoldResult]:
    """Train every fold of a FoldSpec read from the pipeline's output files."""
    rows = load_gold(gold_path)
    spec = FoldSpec.from_json(Path(folds_path).read_text("utf-8"))
    if spec.dimension != config.dimension:
        raise TrainerError(
            f"fold spec is for {spec.dimension!r}, config wants {config.dimension!r}"
        )
    by_id = {r.sample_id: r for r in rows}
    results = []
    for fold_index in range(spec.k):
        fold_config = replace(config, fold_index=fold_index)
        test_rows = [by_id[sid] for sid in spec.test_ids(fold_index)]
        train_rows = [by_id[sid] for sid in spec.train_ids(fold_index)]
        results.append(
            train_fold(fold_config, train_rows, test_rows, out_dir,
                       save_checkpoint=save_checkpoint)
        )
    return results
