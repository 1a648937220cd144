"""Hidden-graph state and the normalization/aggregation shared by both variants."""
from dataclasses import dataclass

import numpy as np

from ._ext import kernels as _k
from .errors import ConfigError, ContractError
from .kernel import Tensor, default_dtype, ops
from .proposals import top_k_by_score

VARIANTS = ("visual", "location", "baseline")


@dataclass(frozen=True)
class GraphVariantConfig:
    """Model configuration.

    ``num_proposals`` (N) proposals are kept per frame and ``num_nodes`` (M)
    hidden nodes are tracked. ``attn_dim``, ``hidden_dim`` and ``global_dim``
    default to ``feat_dim``; ``lstm_dim`` is only used by the baseline.
    """

    variant: str = "visual"
    num_proposals: int = 20
    num_nodes: int = 5
    feat_dim: int = 1024
    num_classes: int = 174
    attn_dim: int | None = None
    hidden_dim: int | None = None
    global_dim: int | None = None
    lstm_dim: int | None = None
    internal_rounds: int = 1
    dropout: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.num_nodes < 1 or self.num_proposals < 1:
            raise ConfigError("num_nodes and num_proposals must be >= 1")
        if self.num_nodes > self.num_proposals:
            raise ConfigError(
                f"num_nodes ({self.num_nodes}) exceeds num_proposals ({self.num_proposals})")
        if self.internal_rounds < 1:
            raise ConfigError("internal_rounds must be >= 1")
        if self.feat_dim < 1 or self.num_classes < 1:
            raise ConfigError("feat_dim and num_classes must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        for name in ("attn_dim", "hidden_dim", "global_dim", "lstm_dim"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, self.feat_dim)
            elif getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data):
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class HiddenGraphState:
    """Node features (M x D tensor), optional node boxes (M x 4) and the last
    normalized cross/self weight matrices, kept only for inspection."""

    node_features: Tensor
    node_boxes: np.ndarray | None = None
    cross_weights: np.ndarray | None = None
    self_weights: np.ndarray | None = None

    @property
    def num_nodes(self):
        return self.node_features.shape[0]

    def copy(self):
        return HiddenGraphState(
            Tensor(self.node_features.data.copy(), dtype=self.node_features.dtype),
            None if self.node_boxes is None else self.node_boxes.copy(),
            None if self.cross_weights is None else self.cross_weights.copy(),
            None if self.self_weights is None else self.self_weights.copy(),
        )


def init_hidden_graph(first_frame, num_nodes, with_boxes=False, dtype=None):
    """Nodes take the features (and boxes) of the top ``num_nodes`` proposals."""
    if num_nodes < 1:
        raise ConfigError("num_nodes must be >= 1")
    if num_nodes > len(first_frame):
        raise ConfigError(
            f"num_nodes ({num_nodes}) exceeds the {len(first_frame)} proposals available")
    dtype = dtype or default_dtype()
    top = top_k_by_score(first_frame, num_nodes)
    boxes = top.boxes.astype(dtype) if with_boxes else None
    return HiddenGraphState(Tensor(top.features, dtype=dtype), boxes)


def canonical_order(frame):
    """Order proposals by descending score, then box, then feature values.

    The order depends only on the proposal contents, so any permutation of a
    frame maps to the same sequence and downstream sums are bit-identical.
    """
    keys = tuple(frame.features.T[::-1]) + tuple(frame.boxes.T[::-1]) + (-frame.scores,)
    return np.lexsort(keys)


def softmax_columns(raw):
    raw = np.asarray(raw)
    if raw.ndim != 2 or raw.shape[0] == 0:
        raise ContractError(f"softmax needs a non-empty matrix, got shape {raw.shape}")
    e = np.exp(raw - raw.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def normalize_incoming(raw, mode):
    """Normalize each column (one per target node) of an N x M weight matrix.

    ``softmax`` applies a column softmax; ``l1`` divides each column by its
    sum and maps all-zero columns to zeros.
    """
    raw = np.ascontiguousarray(raw)
    if mode == "softmax":
        return softmax_columns(raw)
    if mode == "l1":
        if np.any(raw < 0):
            raise ContractError("l1 normalization needs non-negative weights")
        if raw.dtype not in (np.float32, np.float64):
            raw = raw.astype(np.float64)
        return _k.l1_normalize_columns(raw)
    raise ContractError(f"unknown normalization mode {mode!r}")


def aggregate_messages(norm_weights, transformed):
    """Row m of the result is ``sum_n norm_weights[n, m] * transformed[n]``.

    ``transformed`` may be a Tensor (the result is then recorded on the tape)
    or a plain array.
    """
    w = np.asarray(norm_weights)
    rows = transformed.shape[0]
    if w.ndim != 2 or w.shape[0] != rows:
        raise ContractError(f"weights {w.shape} do not match {rows} transformed rows")
    if isinstance(transformed, Tensor):
        return ops.weighted_rows(w, transformed)
    return w.T @ np.asarray(transformed)
