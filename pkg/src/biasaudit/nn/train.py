from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyTrainSet, MissingClassWarning
from .model import CnnModel, loss_and_gradients

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 8
    batch_size: int = 32
    seed: int = 0
    shuffle: bool = True

    def validate(self) -> None:
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


def sgd_step(model: CnnModel, grads: dict, lr: float) -> None:
    for name, g in grads.items():
        model.params[name] -= lr * g.astype(model.dtype)


def train(model: CnnModel, x, y, cfg: TrainConfig, progress=None):
    """Plain mini-batch SGD on normalized inputs ``x`` (n, s, s, 1) and labels ``y``.

    Returns ``(model, history)`` where history holds the mean training loss of
    each epoch. The model is updated in place. Shuffling and dropout masks
    both draw from one generator seeded with ``cfg.seed``.
    """
    cfg.validate()
    y = np.asarray(y)
    n = len(y)
    if n == 0:
        raise EmptyTrainSet("training set is empty")
    present = set(np.unique(y).tolist())
    missing = sorted(set(range(model.config.num_classes)) - present)
    if missing:
        warnings.warn(f"training set lacks classes {missing}", MissingClassWarning, stacklevel=2)

    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_gradients(model, x[idx], y[idx], training=True, rng=rng)
            if cfg.learning_rate:
                sgd_step(model, grads, cfg.learning_rate)
            total += loss * len(idx)
        history.append(total / n)
        log.info("epoch %d/%d loss %.4f", epoch + 1, cfg.epochs, history[-1])
        if progress is not None:
            progress(epoch, history[-1])
    return model, history
