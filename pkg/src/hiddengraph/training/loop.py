"""Training and evaluation on labeled proposal streams."""
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..engine import static_logits, streaming_outputs
from ..errors import ConfigError, ContractError
from ..kernel import GradientTape, ops, sgd_momentum_step
from ..model import GraphModel

log = logging.getLogger(__name__)

SUPERVISION = ("mean", "final")


@dataclass
class TrainConfig:
    """Optimizer and schedule settings.

    Defaults (lr 0.00125, momentum 0.9, weight decay 1e-4) suit fine-tuning;
    :mod:`.recipes` trains the synthetic task from scratch at larger rates.
    ``supervision="mean"`` averages the cross-entropy of every streaming
    step; ``"final"`` uses the last step only. ``static`` trains the fused
    static head instead.
    """

    lr: float = 0.00125
    momentum: float = 0.9
    weight_decay: float = 0.0001
    epochs: int = 10
    batch_size: int = 8
    seed: int = 0
    supervision: str = "mean"
    static: bool = False
    clip_norm: float | None = None

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigError("lr must be non-negative")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError("clip_norm must be positive")
        if self.supervision not in SUPERVISION:
            raise ConfigError(f"supervision must be one of {SUPERVISION}")


@dataclass
class Metrics:
    per_step_top1: list = field(default_factory=list)
    top1: float = float("nan")
    top5: float = float("nan")
    count: int = 0
    loss_history: list = field(default_factory=list)

    def records(self, split, epoch=None):
        """Line-delimited metric records (one dict per value)."""
        base = {"split": split} if epoch is None else {"split": split, "epoch": epoch}
        out = [{**base, "step": t + 1, "metric": "top1", "value": v}
               for t, v in enumerate(self.per_step_top1)]
        out.append({**base, "step": "final", "metric": "top1", "value": self.top1})
        out.append({**base, "step": "final", "metric": "top5", "value": self.top5})
        for i, v in enumerate(self.loss_history):
            out.append({**base, "step": i + 1, "metric": "loss", "value": v})
        return out


def write_records(records, fh):
    for rec in records:
        fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def cross_entropy(logits, label):
    return ops.cross_entropy(logits, label)


def sample_loss(model, stream, supervision="mean", static=False, rng=None):
    """Scalar loss tensor for one labeled stream."""
    if stream.label is None:
        raise ContractError("training needs labeled streams")
    if static:
        return ops.cross_entropy(static_logits(model, stream, rng=rng), stream.label)
    outputs = streaming_outputs(model, stream, rng)[0]
    if supervision == "final":
        return ops.cross_entropy(outputs[-1], stream.label)
    return ops.mean_scalars([ops.cross_entropy(o, stream.label) for o in outputs])


def _check_data(model, streams):
    cfg = model.config
    if not streams:
        raise ContractError("empty training set")
    for i, s in enumerate(streams):
        if s.feat_dim != cfg.feat_dim or s.num_classes != cfg.num_classes:
            raise ContractError(
                f"stream {i}: dims (D={s.feat_dim}, K={s.num_classes}) do not match "
                f"model (D={cfg.feat_dim}, K={cfg.num_classes})")
        if s.label is None:
            raise ContractError(f"stream {i} is unlabeled")
        if not s.frames:
            raise ContractError(f"stream {i} has no frames")


def clip_by_global_norm(grads, max_norm):
    """Scale all gradients down together so their joint L2 norm is at most ``max_norm``."""
    norm = float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))
    if not np.isfinite(norm) or norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {k: (g * scale).astype(g.dtype) for k, g in grads.items()}


def train_model(train, config, model=None, model_config=None, callback=None):
    """Fit a model with SGD + momentum.

    ``train`` is a list of labeled streams (or a dict with a ``"train"``
    split). Pass either a ``model`` to continue from or a ``model_config``
    to build one from ``config.seed``. Gradients of a batch are accumulated
    sample by sample in order, then one optimizer step is taken.
    Returns ``(model, history)`` with one mean training loss per epoch.
    """
    if isinstance(train, dict):
        train = train["train"]
    if model is None:
        if model_config is None:
            raise ConfigError("need a model or a model_config")
        model = GraphModel.build(model_config, seed=config.seed, static=config.static)
    if config.static and not model.static:
        model = model.to_static(seed=config.seed)
    _check_data(model, train)
    rng = np.random.default_rng([config.seed, 1])
    drop_rng = rng if model.config.dropout > 0 else None
    params = model.params
    history = []
    for epoch in range(config.epochs):
        start = time.perf_counter()
        order = rng.permutation(len(train))
        total = 0.0
        for b0 in range(0, len(order), config.batch_size):
            batch = order[b0:b0 + config.batch_size]
            params.zero_grad()
            for idx in batch:
                with GradientTape() as tape:
                    loss = sample_loss(model, train[idx], config.supervision, config.static,
                                       drop_rng)
                tape.backward(loss, seed=1.0 / len(batch))
                total += float(loss.data)
            grads = params.grads()
            if config.clip_norm is not None:
                grads = clip_by_global_norm(grads, config.clip_norm)
            sgd_momentum_step(params, grads, config.lr, config.momentum, config.weight_decay)
        history.append(total / len(train))
        log.info("epoch %d loss %.4f (%.1fs)", epoch + 1, history[-1],
                 time.perf_counter() - start)
        if callback is not None:
            callback(epoch, history[-1], model)
    return model, history


def _predict(model, stream, static):
    if static:
        return static_logits(model, stream).data[None, :]
    return streaming_outputs(model, stream)[1].logits_array()


def evaluate(model, streams, static=False, workers=1):
    """Per-step top-1 accuracy plus final-step top-1/top-5.

    In static mode there is a single prediction per stream, reported as one
    step. ``workers > 1`` spreads streams over a thread pool.
    """
    if not streams:
        raise ContractError("empty evaluation set")
    for i, s in enumerate(streams):
        if s.label is None:
            raise ContractError(f"stream {i} is unlabeled")
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            all_logits = list(pool.map(lambda s: _predict(model, s, static), streams))
    else:
        all_logits = [_predict(model, s, static) for s in streams]
    steps = max(len(lg) for lg in all_logits)
    hits = np.zeros(steps)
    seen = np.zeros(steps)
    top1 = top5 = 0
    for lg, s in zip(all_logits, streams):
        pred = lg.argmax(axis=1)
        hits[:len(lg)] += pred == s.label
        seen[:len(lg)] += 1
        final = lg[-1]
        # ties rank by class index, matching argmax
        rank = int(np.sum(final > final[s.label]) + np.sum(final[:s.label] == final[s.label]))
        top1 += rank < 1
        top5 += rank < 5
    n = len(streams)
    return Metrics([float(h / c) for h, c in zip(hits, seen)], top1 / n, top5 / n, n)
