"""Visual hidden graph: appearance affinities with softmax-gated messages."""
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .graph import canonical_order
from .kernel import LinearMap, Tensor, ops

PREFIX = "visual"


@dataclass
class VisualGraphParams:
    """``h``/``g`` project proposals/nodes for cross affinities, ``phi``
    projects nodes for internal affinities, and ``gate_x``/``gate_in`` form
    the update gate (shared by cross and internal updates)."""

    h: LinearMap
    g: LinearMap
    phi: LinearMap
    gate_x: LinearMap
    gate_in: LinearMap

    @classmethod
    def create(cls, store, dim, rng):
        return cls(*(store.add_linear(f"{PREFIX}.{n}", dim, dim, rng)
                     for n in ("h", "g", "phi", "gate_x", "gate_in")))

    @classmethod
    def from_store(cls, store):
        return cls(*(store.linear(f"{PREFIX}.{n}")
                     for n in ("h", "g", "phi", "gate_x", "gate_in")))


def visual_affinity(proposals, nodes, h, g):
    """Raw N x M affinities ``h(b_n) . g(x_m)``."""
    hb = ops.linear_apply(h, proposals)
    gx = ops.linear_apply(g, nodes)
    return ops.matmul(hb, ops.transpose(gx))


def gated_merge(x, x_hat, gate_x, gate_in):
    """``s = sigmoid(gate_x(x) + gate_in(x_hat))``; ``s*x + (1-s)*x_hat``."""
    return ops.gated_merge(x, x_hat, gate_x, gate_in)


def _frame_features(frame, dtype, dim):
    if frame.features.shape[1] != dim:
        raise ContractError(f"frame {frame.index}: feature dim {frame.features.shape[1]} != {dim}")
    return Tensor(frame.features, dtype=dtype)


def visual_cross_update(state, frame, params):
    """Pass messages from a frame's proposals into every node, then gate.

    Proposals are processed in :func:`canonical_order`, so the result does
    not depend on their order in ``frame``.
    """
    x = state.node_features
    order = canonical_order(frame)
    b = _frame_features(frame.take(order), x.dtype, x.shape[1])
    hb = ops.linear_apply(params.h, b)
    gx = ops.linear_apply(params.g, x)
    inflow, weights = ops.softmax_message(hb, gx, hb)
    state.node_features = ops.gated_merge(x, inflow, params.gate_x, params.gate_in)
    cross = np.empty_like(weights)
    cross[order] = weights
    state.cross_weights = cross
    return state


def visual_self_update(state, params, rounds=1):
    """Directed internal propagation among nodes, ``rounds`` times."""
    for _ in range(rounds):
        x = state.node_features
        px = ops.linear_apply(params.phi, x)
        inflow, weights = ops.softmax_message(px, px, px)
        state.node_features = ops.gated_merge(x, inflow, params.gate_x, params.gate_in)
        state.self_weights = weights
    return state
