"""Optimization: Adam with bias correction, linear warmup into inverse
square-root decay, and the epoch loop over mixed-direction batches.

One epoch is a full pass over every (direction, example) pair, so with six
target languages each sentence pair contributes six training instances per
epoch. Batch order is reshuffled per epoch and dropout is re-seeded per
step, both derived from the run seed, so two runs with equal seeds produce
bitwise-identical parameters.
"""

from __future__ import annotations

import csv
import time
from collections import deque
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .errors import NumericError
from .model import MultimodalTranslator, save_checkpoint
from .seeding import derive_seed, rng_for
from .text import ParallelExample, make_batches
from .vision import VisualTokens


@dataclass
class TrainConfig:
    lr_peak: float = 1e-4
    lr_init: float = 1e-7
    warmup_steps: int = 2000
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-8
    epochs: int = 30
    max_tokens: int = 4096
    seed: int = 1
    grad_clip: Optional[float] = None  # off unless set

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class TrainState:
    config: TrainConfig
    step: int = 0
    seed: int = 1
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def fresh(cls, model: MultimodalTranslator,
              config: TrainConfig) -> "TrainState":
        state = cls(config=config, step=0, seed=config.seed)
        for name, p in model.params.items():
            state.m[name] = np.zeros(p.shape, dtype=np.float32)
            state.v[name] = np.zeros(p.shape, dtype=np.float32)
        return state

    def to_checkpoint_dict(self) -> dict:
        return {"step": self.step, "seed": self.seed,
                "config": self.config.to_dict(), "m": self.m, "v": self.v}

    @classmethod
    def from_checkpoint_dict(cls, d: Mapping) -> "TrainState":
        return cls(config=TrainConfig.from_dict(d["config"]), step=d["step"],
                   seed=d["seed"], m=dict(d["m"]), v=dict(d["v"]))


def lr_schedule(step: int, config: TrainConfig) -> float:
    """Linear warmup from lr_init to lr_peak, then lr_peak*sqrt(warmup/step).

    Exact at the published anchor points: lr(1)=lr_init, lr(warmup)=lr_peak,
    and the decay branch is continuous at the boundary.
    """
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    warmup = config.warmup_steps
    if step <= warmup:
        if warmup <= 1:
            return config.lr_peak
        frac = (step - 1) / (warmup - 1)
        return config.lr_init + (config.lr_peak - config.lr_init) * frac
    return config.lr_peak * np.sqrt(warmup / step)


def adam_step(params: Mapping[str, ad.Tensor], state: TrainState, lr: float):
    """In-place bias-corrected Adam update at step ``state.step``.

    Parameters with no gradient this step keep decaying moments; a NaN or
    Inf gradient aborts, naming the parameter. Leaves every parameter
    finite or dies trying.
    """
    t = state.step
    b1, b2, eps = state.config.beta1, state.config.beta2, state.config.adam_eps
    clip = state.config.grad_clip
    if clip is not None:
        total = 0.0
        for p in params.values():
            if p.grad is not None:
                total += float((p.grad.astype(np.float64) ** 2).sum())
        norm = np.sqrt(total)
        clip_factor = min(1.0, clip / (norm + 1e-12))
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient in parameter {name!r} "
                               f"at step {t}")
        g = g.astype(np.float32)
        if clip is not None:
            g = g * np.float32(clip_factor)
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = state.m[name] / (1 - b1 ** t)
        v_hat = state.v[name] / (1 - b2 ** t)
        p.data -= np.float32(lr) * m_hat / (np.sqrt(v_hat) + np.float32(eps))
        if not np.isfinite(p.data).all():
            raise NumericError(f"non-finite parameter {name!r} after step {t}")


@dataclass
class StepMetrics:
    step: int
    epoch: int
    lr: float
    loss: float
    tokens_per_sec: float


class MetricsLog:
    """Append-only CSV of per-step training metrics."""

    FIELDS = ["step", "epoch", "lr", "loss", "tokens_per_sec"]

    def __init__(self, path: Optional[str | Path]):
        self.path = Path(path) if path else None
        self.rows: list[StepMetrics] = []
        if self.path and not self.path.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "w", newline="") as f:
                csv.writer(f).writerow(self.FIELDS)

    def append(self, row: StepMetrics):
        self.rows.append(row)
        if self.path:
            with open(self.path, "a", newline="") as f:
                csv.writer(f).writerow(
                    [row.step, row.epoch, f"{row.lr:.8g}",
                     f"{row.loss:.6f}", f"{row.tokens_per_sec:.1f}"])


def train_loop(model: MultimodalTranslator,
               examples: Sequence[ParallelExample],
               visual_map: Optional[Mapping[str, VisualTokens]],
               state: TrainState,
               epochs: Optional[int] = None,
               out_dir: Optional[str | Path] = None,
               stop_loss: Optional[float] = None,
               max_steps: Optional[int] = None,
               log_every: int = 0) -> list[StepMetrics]:
    """Run the optimization loop; returns per-step metrics.

    Checkpoints (parameters + moments) are written per epoch when
    ``out_dir`` is set. ``stop_loss`` stops once the mean loss over a full
    epoch's worth of recent steps falls below it (a single lucky batch is
    not convergence); ``max_steps`` is a hard cap. Resuming from a saved
    state reproduces the exact continuation.
    """
    cfg = state.config
    epochs = cfg.epochs if epochs is None else epochs
    out_dir = Path(out_dir) if out_dir else None
    log = MetricsLog(out_dir / "metrics.csv" if out_dir else None)
    model.train_mode = True
    start_epoch = _epoch_of(state.step, examples, cfg)
    recent: deque = deque(maxlen=1)
    try:
        for epoch in range(start_epoch, epochs):
            batches = make_batches(examples, cfg.max_tokens,
                                   seed=derive_seed(cfg.seed, "epoch", epoch))
            if recent.maxlen != len(batches):
                recent = deque(recent, maxlen=len(batches))
            for batch in batches:
                state.step += 1
                lr = lr_schedule(state.step, cfg)
                model.set_dropout_rng(rng_for("dropout", cfg.seed, state.step))
                model.zero_grad()
                t0 = time.perf_counter()
                loss = model.forward_loss(batch, visual_map)
                ad.backward(loss)
                adam_step(model.params, state, lr)
                elapsed = max(time.perf_counter() - t0, 1e-9)
                row = StepMetrics(step=state.step, epoch=epoch, lr=lr,
                                  loss=loss.item(),
                                  tokens_per_sec=batch.n_target_tokens / elapsed)
                log.append(row)
                recent.append(row.loss)
                if log_every and state.step % log_every == 0:
                    print(f"step {row.step} epoch {row.epoch} lr {row.lr:.3g} "
                          f"loss {row.loss:.4f} tok/s {row.tokens_per_sec:.0f}")
                if (stop_loss is not None and len(recent) == recent.maxlen
                        and sum(recent) / len(recent) < stop_loss):
                    return log.rows
                if max_steps is not None and state.step >= max_steps:
                    return log.rows
            if out_dir:
                save_checkpoint(out_dir / f"checkpoint_epoch{epoch + 1}.lvpm",
                                model, state.to_checkpoint_dict())
                save_checkpoint(out_dir / "checkpoint_last.lvpm",
                                model, state.to_checkpoint_dict())
    finally:
        model.train_mode = False
    return log.rows


def _epoch_of(step: int, examples: Sequence[ParallelExample],
              cfg: TrainConfig) -> int:
    """Epoch index a resumed run should continue from (epoch sizes are
    deterministic given the corpus and token budget)."""
    if step == 0:
        return 0
    per_epoch = len(make_batches(examples, cfg.max_tokens))
    return step // per_epoch if per_epoch else 0
