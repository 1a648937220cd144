"""Attention readout over the hidden graph, fusion with a global feature,
and the classifier head."""
from dataclasses import dataclass

from .errors import ContractError
from .kernel import LinearMap, Tensor, ops
from .proposals import max_pool_features


@dataclass
class AttentionParams:
    query_map: LinearMap  # D -> A, applied to the running query
    node_map: LinearMap   # D -> A, applied to each node
    score_map: LinearMap  # A -> 1

    @classmethod
    def create(cls, store, dim, attn_dim, rng):
        return cls(store.add_linear("attn.query", dim, attn_dim, rng),
                   store.add_linear("attn.node", dim, attn_dim, rng),
                   store.add_linear("attn.score", attn_dim, 1, rng))

    @classmethod
    def from_store(cls, store):
        return cls(store.linear("attn.query"), store.linear("attn.node"),
                   store.linear("attn.score"))


@dataclass
class HeadParams:
    """Two-layer perceptron classifier, plus the fusion layer in static mode."""

    hidden: LinearMap
    out: LinearMap
    fusion: LinearMap | None = None
    dropout: float = 0.0

    @classmethod
    def create(cls, store, in_dim, hidden_dim, num_classes, rng, global_dim=None,
               dropout=0.0):
        hidden = store.add_linear("head.hidden", in_dim, hidden_dim, rng)
        out = store.add_linear("head.out", hidden_dim, num_classes, rng)
        fusion = None
        if global_dim is not None:
            fusion = store.add_linear("head.fusion", global_dim + in_dim, in_dim, rng)
        return cls(hidden, out, fusion, dropout)

    @classmethod
    def from_store(cls, store, dropout=0.0):
        fusion = store.linear("head.fusion") if store.has_linear("head.fusion") else None
        return cls(store.linear("head.hidden"), store.linear("head.out"), fusion, dropout)


def init_query(first_frame, dtype=None):
    """Initial readout vector: elementwise max over the first frame's proposals."""
    return Tensor(max_pool_features(first_frame), dtype=dtype)


def attend(nodes, query, params):
    """Attention-pool the nodes with ``query``; returns ``(alpha, next_query)``."""
    if nodes.shape[0] < 1:
        raise ContractError("attention over an empty graph")
    pooled, alpha = ops.attention_pool(nodes, query, params.query_map, params.node_map,
                                       params.score_map)
    return alpha, pooled


def fuse(query, global_feature, head):
    """``relu(fusion(concat(global_feature, query)))``, same width as ``query``."""
    if head.fusion is None:
        raise ContractError("head has no fusion layer (model was not built for static mode)")
    g = global_feature if isinstance(global_feature, Tensor) else Tensor(global_feature, dtype=query.dtype)
    if g.shape[0] + query.shape[0] != head.fusion.in_dim:
        raise ContractError(
            f"fusion expects {head.fusion.in_dim} inputs, got {g.shape[0]} + {query.shape[0]}")
    return ops.relu(ops.linear_apply(head.fusion, ops.concat([g, query])))


def classify(feature, head, rng=None):
    """Logits from the two-layer head. ``rng`` enables dropout (training only)."""
    hidden = ops.relu(ops.linear_apply(head.hidden, feature))
    hidden = ops.dropout(hidden, head.dropout, rng)
    return ops.linear_apply(head.out, hidden)
