"""Training loop: AdamW, reduce-on-plateau scheduling, early stopping, grids.

Causal and LSTM models train on next-token cross-entropy over every non-pad
target. Masked models train on 15%-masked positions, re-drawn each batch.
Validation for masked models is deterministic pseudo-perplexity (each
non-special position masked exactly once), which removes evaluation variance.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .checkpoint import save_checkpoint
from .errors import ConfigError, DivergenceError
from .models import (LanguageModel, ModelConfig, build_model,
                     batch_sequence_logprobs, masked_positions, pseudo_logprob)
from .vocab import MASK_ID, N_SPECIALS, PAD_ID, pad_batch

# hyper-parameter grids used when searching
LR_GRID = (1e-4, 3e-4, 1e-3, 3e-3)
BATCH_GRID = (8, 16, 32)
WEIGHT_DECAY_GRID = (0.01, 0.05, 0.1, 0.15, 0.24)
DROPOUT_GRID = (0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
HEADS_GRID = (8, 16, 32)

IGNORE_ID = -1
_EVAL_BATCH = 64


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 16
    weight_decay: float = 0.01
    dropout: float = 0.1
    n_heads: int = 8
    max_epochs: int = 100
    seed: int = 0
    mask_ratio: float = 0.15
    # plateau scheduling and stopping knobs
    lr_factor: float = 0.1
    patience: int = 2
    plateau_threshold: float = 1e-4
    max_reductions: int = 2

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be >= 1")
        if not 0.0 <= self.mask_ratio < 1.0:
            raise ConfigError("mask_ratio must lie in [0, 1)")


@dataclass
class SchedulerState:
    current_lr: float
    best_val_loss: float = math.inf
    epochs_since_improvement: int = 0
    reductions_since_improvement: int = 0
    factor: float = 0.1
    patience: int = 2
    threshold: float = 1e-4


def scheduler_step(state: SchedulerState, val_loss: float) -> SchedulerState:
    """Pure plateau rule: improvement resets counters, patience halves the lr
    by `factor` (x0.1) once `patience` non-improving epochs accumulate."""
    if val_loss < state.best_val_loss - state.threshold:
        return replace(state, best_val_loss=val_loss,
                       epochs_since_improvement=0, reductions_since_improvement=0)
    stalled = state.epochs_since_improvement + 1
    if stalled >= state.patience:
        return replace(state, current_lr=state.current_lr * state.factor,
                       epochs_since_improvement=0,
                       reductions_since_improvement=state.reductions_since_improvement + 1)
    return replace(state, epochs_since_improvement=stalled)


class EpochStats(NamedTuple):
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class RunResult:
    best_val_loss: float
    best_epoch: int
    checkpoint_path: str | None
    trace: list[EpochStats] = field(default_factory=list)


def select_best(trace: list[EpochStats]) -> tuple[int, float]:
    """Best-validation epoch; strict comparison, so ties keep the earlier one."""
    if not trace:
        raise ConfigError("empty training trace")
    best = trace[0]
    for rec in trace[1:]:
        if rec.val_loss < best.val_loss:
            best = rec
    return best.epoch, best.val_loss


class AdamW:
    """Adaptive moments with decoupled weight decay.

    Decay multiplies each matrix-shaped parameter by (1 - lr * wd) before the
    moment update; vectors (biases, gains) never decay. lr = 0 leaves every
    parameter bitwise unchanged.
    """

    def __init__(self, params: dict[str, ad.Tensor], lr: float,
                 weight_decay: float = 0.0, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            if p.data.ndim >= 2 and self.weight_decay:
                p.data *= 1.0 - self.lr * self.weight_decay
            p.data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


def mask_batch(ids: np.ndarray, mask_ratio: float = 0.15, rng=None):
    """Independently mask each non-special position with probability
    mask_ratio; rows that draw nothing get one forced mask so every utterance
    contributes. Returns (masked ids, boolean target positions).
    """
    if rng is None:
        raise ConfigError("mask_batch requires an rng")
    ids = np.asarray(ids)
    maskable = ids >= N_SPECIALS
    targets = maskable & (rng.random(ids.shape) < mask_ratio)
    for row in range(ids.shape[0]):
        if maskable[row].any() and not targets[row].any():
            choices = np.flatnonzero(maskable[row])
            targets[row, choices[rng.integers(len(choices))]] = True
    masked = np.where(targets, MASK_ID, ids)
    return masked, targets


def _causal_batch(ids: np.ndarray):
    inputs = ids[:, :-1]
    targets = np.where(ids[:, 1:] == PAD_ID, IGNORE_ID, ids[:, 1:])
    return inputs, targets


def train_epoch(model: LanguageModel, sequences: list, optimizer: AdamW,
                cfg: TrainConfig, rng) -> float:
    """One pass over seeded-shuffled padded batches; returns the exact mean
    negative log-likelihood per scored target."""
    order = rng.permutation(len(sequences))
    total_nll = 0.0
    total_targets = 0
    for batch_index, start in enumerate(range(0, len(order), cfg.batch_size)):
        chunk = [sequences[i] for i in order[start:start + cfg.batch_size]]
        ids, _ = pad_batch(chunk)
        if model.is_masked:
            inputs, positions = mask_batch(ids, cfg.mask_ratio, rng)
            if not positions.any():
                continue
            targets = np.where(positions, ids, IGNORE_ID)
        else:
            inputs, targets = _causal_batch(ids)
        logits = model.forward(inputs, train=True, rng=rng)
        loss = ad.cross_entropy(logits, targets, ignore_id=IGNORE_ID)
        value = float(loss.data)
        if not math.isfinite(value):
            raise DivergenceError(batch_index, value)
        loss.backward()
        optimizer.step()
        optimizer.zero_grad()
        n = int((targets != IGNORE_ID).sum())
        total_nll += value * n
        total_targets += n
    if total_targets == 0:
        raise ConfigError("no scorable targets in the whole epoch")
    return total_nll / total_targets


def _causal_nll(model: LanguageModel, sequences: list) -> tuple[float, int]:
    order = sorted(range(len(sequences)), key=lambda i: len(sequences[i]))
    total_lp = 0.0
    total = 0
    for start in range(0, len(order), _EVAL_BATCH):
        chunk = [sequences[i] for i in order[start:start + _EVAL_BATCH]]
        ids, _ = pad_batch(chunk)
        total_lp += float(batch_sequence_logprobs(model, ids).sum())
        total += int((ids[:, 1:] != PAD_ID).sum())
    return -total_lp, total


def _masked_nll(model: LanguageModel, sequences: list) -> tuple[float, int]:
    total_lp = 0.0
    total = 0
    for seq in sequences:
        n = len(masked_positions(np.asarray(seq)))
        if n == 0:
            continue
        total_lp += pseudo_logprob(model, seq)
        total += n
    return -total_lp, total


def evaluate(model: LanguageModel, sequences: list) -> float:
    """Mean held-out NLL per token: next-token for causal families,
    every-position-once pseudo-likelihood for the masked family."""
    nll, count = (_masked_nll if model.is_masked else _causal_nll)(model, sequences)
    if count == 0:
        raise ConfigError("no scorable tokens in evaluation split")
    return nll / count


def perplexity(model: LanguageModel, sequences: list) -> float:
    return math.exp(evaluate(model, sequences))


def perplexity_from_logprobs(logprobs) -> float:
    """exp(-mean) of per-token log-probabilities; {-1, -3} gives e^2."""
    arr = np.asarray(list(logprobs), dtype=np.float64)
    if arr.size == 0:
        raise ConfigError("no log-probabilities given")
    return float(np.exp(-arr.mean()))


def train_model(model_cfg: ModelConfig, cfg: TrainConfig, train_seqs: list,
                val_seqs: list, checkpoint_path=None,
                dataset_name: str = "") -> tuple[RunResult, LanguageModel]:
    """Full run: train with plateau scheduling, stop after `max_reductions`
    lr cuts with no improvement (or max_epochs), restore the best-validation
    parameters (ties keep the earlier epoch), optionally checkpoint."""
    cfg.validate()
    model_cfg = replace(model_cfg, dropout=cfg.dropout,
                        n_heads=cfg.n_heads if model_cfg.family != "lstm"
                        else model_cfg.n_heads)
    model = build_model(model_cfg, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    optimizer = AdamW(model.params, cfg.learning_rate, cfg.weight_decay)
    sched = SchedulerState(cfg.learning_rate, factor=cfg.lr_factor,
                           patience=cfg.patience, threshold=cfg.plateau_threshold)
    trace: list[EpochStats] = []
    best_loss = math.inf
    best_epoch = 0
    best_params = None
    for epoch in range(1, cfg.max_epochs + 1):
        train_loss = train_epoch(model, train_seqs, optimizer, cfg, rng)
        val_loss = evaluate(model, val_seqs)
        trace.append(EpochStats(epoch, train_loss, val_loss, optimizer.lr))
        if val_loss < best_loss:
            best_loss = val_loss
            best_epoch = epoch
            best_params = {k: p.data.copy() for k, p in model.params.items()}
        sched = scheduler_step(sched, val_loss)
        optimizer.lr = sched.current_lr
        if sched.reductions_since_improvement >= cfg.max_reductions:
            break
    if best_params is not None:
        for k, p in model.params.items():
            p.data = best_params[k]
    path_str = None
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path, meta={
            "dataset": dataset_name,
            "seed": cfg.seed,
            "best_val_loss": best_loss,
            "best_epoch": best_epoch,
        })
        path_str = str(checkpoint_path)
    return RunResult(best_loss, best_epoch, path_str, trace), model


@dataclass
class GridCell:
    config_index: int
    config: TrainConfig
    seed: int
    best_val_loss: float
    best_epoch: int
    checkpoint_path: str | None


def _run_cell(payload) -> GridCell:
    model_cfg, cfg, index, seed, train_seqs, val_seqs, ckpt = payload
    result, _ = train_model(model_cfg, replace(cfg, seed=seed), train_seqs,
                            val_seqs, checkpoint_path=ckpt)
    return GridCell(index, cfg, seed, result.best_val_loss, result.best_epoch,
                    result.checkpoint_path)


@dataclass
class GridResult:
    best_config: TrainConfig
    best_mean_ppl: float
    cells: list[GridCell]
    mean_ppl_by_config: list[float]
    wall_time: float


def grid_search(model_cfg: ModelConfig, configs: list[TrainConfig], train_seqs: list,
                val_seqs: list, seeds=(0, 1, 2), out_dir=None, jobs: int = 1) -> GridResult:
    """Train every (config, seed) cell, rank configurations by validation
    perplexity averaged over seeds, and return the argmin (first index wins
    ties). Cells are independent, so they parallelize across processes."""
    if not configs:
        raise ConfigError("empty grid")
    start = time.monotonic()
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    payloads = []
    for index, cfg in enumerate(configs):
        for seed in seeds:
            ckpt = None
            if out_dir is not None:
                ckpt = str(out_dir / f"{model_cfg.family}{model_cfg.n_layers}"
                                     f"_cfg{index}_seed{seed}.ckpt")
            payloads.append((model_cfg, cfg, index, seed, train_seqs, val_seqs, ckpt))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell, payloads))
    else:
        cells = [_run_cell(p) for p in payloads]
    means = []
    for index in range(len(configs)):
        ppls = [math.exp(c.best_val_loss) for c in cells if c.config_index == index]
        means.append(sum(ppls) / len(ppls))
    best_index = min(range(len(configs)), key=lambda i: (means[i], i))
    return GridResult(configs[best_index], means[best_index], cells, means,
                      time.monotonic() - start)
