"""Pure-numpy implementations of the fused hot kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
Inputs are C-contiguous float32 or float64 arrays of a single dtype; outputs
share that dtype. Geometry (IoU, shifting) is computed in float64 internally.
"""
import numpy as np

BACKEND = "numpy"


def iou_matrix(boxes_a, boxes_b):
    a = np.asarray(boxes_a, dtype=np.float64)
    b = np.asarray(boxes_b, dtype=np.float64)
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.clip(ix2 - ix1, 0.0, None) * np.clip(iy2 - iy1, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out.astype(np.result_type(boxes_a), copy=False)


def l1_normalize_columns(raw):
    total = raw.sum(axis=0, dtype=np.float64)
    out = np.zeros(raw.shape, dtype=np.float64)
    np.divide(raw, total[None, :], out=out, where=total[None, :] > 0.0)
    return out.astype(raw.dtype, copy=False)


def shift_boxes(node_boxes, prop_boxes, weights):
    w = weights.astype(np.float64)
    target = w.T @ prop_boxes.astype(np.float64)
    moved = 0.5 * (node_boxes.astype(np.float64) + target)
    keep = w.sum(axis=0) <= 0.0
    moved[keep] = node_boxes[keep]
    return moved.astype(node_boxes.dtype, copy=False)


def softmax_message_forward(keys, queries, values):
    raw = keys @ queries.T
    raw = raw - raw.max(axis=0, keepdims=True)
    e = np.exp(raw)
    weights = e / e.sum(axis=0, keepdims=True)
    return weights.T @ values, weights


def softmax_message_backward(keys, queries, values, weights, grad_out):
    d_weights = values @ grad_out.T
    d_values = weights @ grad_out
    d_raw = weights * (d_weights - (weights * d_weights).sum(axis=0, keepdims=True))
    return d_raw @ queries, d_raw.T @ keys, d_values


def _sigmoid(z):
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def gated_merge_forward(x, xh, wx, bx, wh, bh):
    gate = _sigmoid(x @ wx.T + bx + xh @ wh.T + bh)
    return gate * x + (1.0 - gate) * xh, gate


def gated_merge_backward(x, xh, wx, wh, gate, grad_out):
    d_x = grad_out * gate
    d_xh = grad_out * (1.0 - gate)
    d_pre = grad_out * (x - xh) * gate * (1.0 - gate)
    d_x += d_pre @ wx
    d_xh += d_pre @ wh
    d_b = d_pre.sum(axis=0)
    return d_x, d_xh, d_pre.T @ x, d_b, d_pre.T @ xh, d_b.copy()


def attend_forward(nodes, query, wg, bg, wh, bh, wo, bo):
    e = np.tanh(nodes @ wh.T + bh + (wg @ query + bg))
    score = e @ wo[0] + bo[0]
    score = score - score.max()
    alpha = np.exp(score)
    alpha /= alpha.sum()
    return alpha, alpha @ nodes, e


def attend_backward(nodes, query, wg, wh, wo, alpha, e, grad_q):
    d_alpha = nodes @ grad_q
    d_score = alpha * (d_alpha - alpha @ d_alpha)
    d_nodes = np.outer(alpha, grad_q)
    d_wo = (d_score @ e)[None, :]
    d_bo = np.array([d_score.sum()], dtype=nodes.dtype)
    d_pre = np.outer(d_score, wo[0]) * (1.0 - e * e)
    d_wh = d_pre.T @ nodes
    d_bh = d_pre.sum(axis=0)
    d_nodes += d_pre @ wh
    d_g = d_bh.copy()
    return d_nodes, wg.T @ d_g, np.outer(d_g, query), d_g, d_wh, d_bh, d_wo, d_bo
