from .loop import Metrics, TrainConfig, clip_by_global_norm, cross_entropy, evaluate, train_model
from .recipes import static_finetune_config, task_model_config, task_train_config
from .synthetic import (CLASSES, GenerationError, SyntheticTaskSpec, classify_tracks,
                        generate_interaction_dataset)

__all__ = [
    "CLASSES", "GenerationError", "Metrics", "SyntheticTaskSpec", "TrainConfig",
    "classify_tracks", "clip_by_global_norm", "cross_entropy", "evaluate",
    "generate_interaction_dataset", "static_finetune_config", "task_model_config",
    "task_train_config", "train_model",
]
