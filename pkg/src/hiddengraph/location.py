"""Location hidden graph: IoU affinities, L1-normalized messages, box shifting.

Geometry never receives gradients; IoU weights and shifted boxes enter the
tape as constants.
"""
from dataclasses import dataclass

import numpy as np

from ._ext import kernels as _k
from .errors import ContractError
from .graph import canonical_order, normalize_incoming
from .kernel import LinearMap, Tensor, ops

PREFIX = "location"


@dataclass
class LocationGraphParams:
    p: LinearMap
    psi: LinearMap

    @classmethod
    def create(cls, store, dim, rng):
        return cls(store.add_linear(f"{PREFIX}.p", dim, dim, rng),
                   store.add_linear(f"{PREFIX}.psi", dim, dim, rng))

    @classmethod
    def from_store(cls, store):
        return cls(store.linear(f"{PREFIX}.p"), store.linear(f"{PREFIX}.psi"))


def validate_boxes(boxes):
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    if np.any(boxes[:, 0] > boxes[:, 2]) or np.any(boxes[:, 1] > boxes[:, 3]):
        raise ContractError("box corners out of order (need x1 <= x2, y1 <= y2)")
    if not np.all(np.isfinite(boxes)):
        raise ContractError("box has non-finite coordinates")
    return boxes


def iou(a, b):
    """Intersection over union of two boxes; 0 when the union is empty."""
    a, b = validate_boxes(a), validate_boxes(b)
    return float(_k.iou_matrix(a, b)[0, 0])


def iou_matrix(boxes_a, boxes_b):
    """Pairwise IoU, shape (len(boxes_a), len(boxes_b))."""
    a = np.ascontiguousarray(boxes_a)
    b = np.ascontiguousarray(boxes_b, dtype=a.dtype)
    return _k.iou_matrix(a, b)


def shift_coordinates(state, frame, norm_weights):
    """Move each node box halfway toward the weighted mean of proposal boxes.

    Nodes whose weight column is all zero keep their box.
    """
    boxes = state.node_boxes
    state.node_boxes = _k.shift_boxes(
        boxes, np.ascontiguousarray(frame.boxes, dtype=boxes.dtype),
        np.ascontiguousarray(norm_weights, dtype=boxes.dtype))
    return state


def location_cross_update(state, frame, params):
    """IoU-weighted messages from proposals, ReLU residual update, box shift."""
    if state.node_boxes is None:
        raise ContractError("location update needs node boxes")
    x = state.node_features
    if frame.features.shape[1] != x.shape[1]:
        raise ContractError(f"frame {frame.index}: feature dim {frame.features.shape[1]} != {x.shape[1]}")
    order = canonical_order(frame)
    frame = frame.take(order)
    raw = iou_matrix(frame.boxes.astype(x.dtype), state.node_boxes)
    weights = normalize_incoming(raw, "l1")
    pb = ops.linear_apply(params.p, Tensor(frame.features, dtype=x.dtype))
    inflow = ops.weighted_rows(weights, pb)
    state.node_features = ops.relu(ops.add(x, inflow))
    shift_coordinates(state, frame, weights)
    cross = np.empty_like(weights)
    cross[order] = weights
    state.cross_weights = cross
    return state


def location_self_update(state, params, rounds=1):
    """Propagate among nodes along node-node IoU edges (self loops included)."""
    raw = iou_matrix(state.node_boxes, state.node_boxes)
    # self loops always exist, even for a degenerate zero-area node box
    np.fill_diagonal(raw, 1.0)
    weights = normalize_incoming(raw, "l1")
    for _ in range(rounds):
        x = state.node_features
        inflow = ops.weighted_rows(weights, ops.linear_apply(params.psi, x))
        state.node_features = ops.relu(ops.add(x, inflow))
    state.self_weights = weights
    return state
