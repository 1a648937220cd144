"""Tuned settings for the 5-class synthetic interaction task.

Parameter budgets are matched: visual 2278, location 2022 (attention width
32), baseline 2061 (LSTM width 14).
"""
from ..graph import GraphVariantConfig
from .loop import TrainConfig

TASK_DIMS = {"num_proposals": 6, "num_nodes": 3, "feat_dim": 16, "num_classes": 5}

_MODEL_EXTRA = {"visual": {}, "location": {"attn_dim": 32}, "baseline": {"lstm_dim": 14}}
_LR = {"visual": 0.05, "location": 0.02, "baseline": 0.05}


def task_model_config(variant):
    return GraphVariantConfig(variant=variant, **TASK_DIMS, **_MODEL_EXTRA[variant])


def task_train_config(variant, seed=0):
    return TrainConfig(lr=_LR[variant], epochs=30, batch_size=8, seed=seed, clip_norm=1.0)


def static_finetune_config(seed=0):
    """Short fine-tune of a trained streaming model with a fresh fusion layer."""
    return TrainConfig(lr=0.01, epochs=5, batch_size=8, seed=seed, clip_norm=1.0, static=True)
