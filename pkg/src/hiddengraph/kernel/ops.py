"""Differentiable operations on :class:`~hiddengraph.kernel.tensor.Tensor`.

Elementwise ops, matrix products, activations and the losses are plain numpy.
The message-passing, gating and attention blocks are fused and delegate to
the compiled kernels (or their numpy fallback) from :mod:`hiddengraph._ext`.
"""
import numpy as np

from .._ext import kernels as _k
from ..errors import ContractError
from .tensor import Tensor, as_tensor, make_result


def _c(a):
    return np.ascontiguousarray(a)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    if len(shape) == 0:
        return np.asarray(g.sum(), dtype=g.dtype)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _pair(a, b):
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


def add(a, b):
    a, b = _pair(a, b)
    return make_result(a.data + b.data, (a, b),
                       lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = _pair(a, b)
    return make_result(a.data - b.data, (a, b),
                       lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b):
    a, b = _pair(a, b)
    return make_result(a.data * b.data, (a, b),
                       lambda g: (_unbroadcast(g * b.data, a.shape),
                                  _unbroadcast(g * a.data, b.shape)))


def matmul(a, b):
    """Matrix-matrix or matrix-vector product."""
    a, b = _pair(a, b)
    if a.ndim != 2 or b.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ContractError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def back(g):
        if b.ndim == 1:
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g

    return make_result(a.data @ b.data, (a, b), back)


def transpose(x):
    x = as_tensor(x)
    if x.ndim != 2:
        raise ContractError("transpose needs a matrix")
    return make_result(np.ascontiguousarray(x.data.T), (x,), lambda g: (g.T,))


def dropout(x, rate, rng):
    """Inverted dropout with a mask drawn from ``rng``; identity when rate is 0."""
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1.0 - rate)
    return mul(x, Tensor(keep, dtype=x.dtype))


def linear_apply(linear, x):
    """Apply ``linear`` to a vector, or row-wise to a matrix of inputs."""
    x = as_tensor(x, like=linear.weight)
    w, bias = linear.weight, linear.bias
    if x.shape[-1] != w.shape[1]:
        raise ContractError(
            f"{linear.name}: input width {x.shape[-1]} != in_dim {w.shape[1]}")
    if x.ndim == 1:
        out = w.data @ x.data + bias.data

        def back(g):
            return np.outer(g, x.data), g, w.data.T @ g
    else:
        out = x.data @ w.data.T + bias.data

        def back(g):
            return g.T @ x.data, g.sum(axis=0), g @ w.data

    return make_result(out, (w, bias, x), back)


def sigmoid(x):
    x = as_tensor(x)
    y = 0.5 * (np.tanh(0.5 * x.data) + 1.0)
    return make_result(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x):
    x = as_tensor(x)
    y = np.tanh(x.data)
    return make_result(y, (x,), lambda g: (g * (1.0 - y * y),))


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    return make_result(np.where(mask, x.data, 0).astype(x.dtype), (x,),
                       lambda g: (g * mask,))


def softmax_vector(x):
    x = as_tensor(x)
    if x.ndim != 1 or x.shape[0] == 0:
        raise ContractError("softmax_vector needs a non-empty vector")
    e = np.exp(x.data - x.data.max())
    y = e / e.sum()
    return make_result(y, (x,), lambda g: (y * (g - np.dot(g, y)),))


_ACTIVATIONS = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu,
                "softmax_vector": softmax_vector}


def activation(kind, x):
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ContractError(f"unknown activation {kind!r}") from None
    return fn(x)


def concat(parts):
    """Concatenate vectors end to end."""
    parts = [as_tensor(p) for p in parts]
    if any(p.ndim != 1 for p in parts):
        raise ContractError("concat joins vectors only")
    sizes = np.cumsum([p.shape[0] for p in parts])[:-1]
    return make_result(np.concatenate([p.data for p in parts]), tuple(parts),
                       lambda g: tuple(np.split(g, sizes)))


def slice_vector(x, start, stop):
    n = x.shape[0]

    def back(g):
        full = np.zeros(n, dtype=g.dtype)
        full[start:stop] = g
        return (full,)

    return make_result(x.data[start:stop].copy(), (x,), back)


def mean_rows(x):
    """Average the rows of a matrix into a vector."""
    x = as_tensor(x)
    n = x.shape[0]
    if n == 0:
        raise ContractError("mean of an empty matrix")
    return make_result(x.data.mean(axis=0), (x,),
                       lambda g: (np.broadcast_to(g / n, x.shape).astype(g.dtype),))


def max_rows(x):
    """Elementwise maximum over rows; the gradient routes to the first arg-max."""
    x = as_tensor(x)
    if x.shape[0] == 0:
        raise ContractError("max of an empty matrix")
    idx = x.data.argmax(axis=0)

    def back(g):
        full = np.zeros(x.shape, dtype=g.dtype)
        full[idx, np.arange(x.shape[1])] = g
        return (full,)

    return make_result(x.data.max(axis=0), (x,), back)


def total(x):
    x = as_tensor(x)
    return make_result(np.asarray(x.data.sum(), dtype=x.dtype), (x,),
                       lambda g: (np.full(x.shape, g, dtype=x.dtype),))


def mean_scalars(terms):
    """Average a list of scalar tensors."""
    if not terms:
        raise ContractError("mean of no terms")
    n = len(terms)
    data = np.asarray(sum(float(t.data) for t in terms) / n, dtype=terms[0].dtype)
    return make_result(data, tuple(terms),
                       lambda g: tuple(np.asarray(g / n, dtype=g.dtype) for _ in terms))


def cross_entropy(logits, label):
    """``-log softmax(logits)[label]`` as a scalar tensor."""
    logits = as_tensor(logits)
    k = logits.shape[0]
    if not 0 <= label < k:
        raise ContractError(f"label {label} outside [0, {k})")
    shifted = logits.data - logits.data.max()
    log_z = np.log(np.exp(shifted).sum())
    loss = np.asarray(log_z - shifted[label], dtype=logits.dtype)

    def back(g):
        p = np.exp(shifted - log_z)
        p[label] -= 1.0
        return (g * p,)

    return make_result(loss, (logits,), back)


# fused blocks -------------------------------------------------------------

def softmax_message(keys, queries, values):
    """Column-softmax message passing.

    ``weights[n, m] = softmax_n(keys[n] . queries[m])`` and
    ``out[m] = sum_n weights[n, m] * values[n]``. Returns ``(out, weights)``;
    ``weights`` is a plain array kept for inspection.
    """
    if keys.shape[1] != queries.shape[1] or keys.shape[0] != values.shape[0]:
        raise ContractError(
            f"message shapes {keys.shape}, {queries.shape}, {values.shape} disagree")
    kd, qd, vd = _c(keys.data), _c(queries.data), _c(values.data)
    out, weights = _k.softmax_message_forward(kd, qd, vd)

    def back(g):
        return _k.softmax_message_backward(kd, qd, vd, weights, _c(g))

    return make_result(out, (keys, queries, values), back), weights


def weighted_rows(weights, values):
    """``out[m] = sum_n weights[n, m] * values[n]`` with constant weights."""
    w = np.asarray(weights, dtype=values.dtype)
    if w.shape[0] != values.shape[0]:
        raise ContractError(f"weights {w.shape} do not match values {values.shape}")
    return make_result(w.T @ values.data, (values,), lambda g: (w @ g,))


def gated_merge(x, x_hat, gate_x, gate_in):
    """Sigmoid-gated convex merge of node states with their inflow.

    ``s = sigmoid(gate_x(x) + gate_in(x_hat))``; ``out = s*x + (1-s)*x_hat``.
    Accepts single vectors or stacked rows.
    """
    vector = x.ndim == 1
    if x.shape != x_hat.shape or x.shape[-1] != gate_x.weight.shape[1]:
        raise ContractError(f"gated merge shapes {x.shape}, {x_hat.shape} disagree")
    xd = _c(x.data.reshape(1, -1) if vector else x.data)
    hd = _c(x_hat.data.reshape(1, -1) if vector else x_hat.data)
    wx, wh = gate_x.weight.data, gate_in.weight.data
    out, gate = _k.gated_merge_forward(xd, hd, wx, gate_x.bias.data, wh, gate_in.bias.data)

    def back(g):
        g2 = _c(g.reshape(1, -1) if vector else g)
        dx, dh, dwx, dbx, dwh, dbh = _k.gated_merge_backward(xd, hd, wx, wh, gate, g2)
        if vector:
            dx, dh = dx[0], dh[0]
        return dx, dh, dwx, dbx, dwh, dbh

    data = out[0] if vector else out
    inputs = (x, x_hat, gate_x.weight, gate_x.bias, gate_in.weight, gate_in.bias)
    return make_result(data, inputs, back)


def attention_pool(nodes, query, query_map, node_map, score_map):
    """Additive attention over node rows.

    ``e_m = tanh(query_map(q) + node_map(x_m))``, ``alpha = softmax(score_map(e))``
    and the result is ``sum_m alpha_m x_m``. Returns ``(pooled, alpha)``.
    """
    if nodes.ndim != 2 or query.shape != (nodes.shape[1],):
        raise ContractError(f"attention shapes {nodes.shape}, {query.shape} disagree")
    nd, qd = _c(nodes.data), _c(query.data)
    wg, wh, wo = query_map.weight.data, node_map.weight.data, score_map.weight.data
    if wg.shape[1] != nd.shape[1] or wh.shape != wg.shape or wo.shape != (1, wg.shape[0]):
        raise ContractError("attention parameter shapes disagree")
    alpha, pooled, e = _k.attend_forward(nd, qd, wg, query_map.bias.data, wh,
                                         node_map.bias.data, wo, score_map.bias.data)

    def back(g):
        dn, dq, dwg, dbg, dwh, dbh, dwo, dbo = _k.attend_backward(
            nd, qd, wg, wh, wo, alpha, e, _c(g))
        return dn, dq, dwg, dbg, dwh, dbh, dwo, dbo

    inputs = (nodes, query, query_map.weight, query_map.bias, node_map.weight,
              node_map.bias, score_map.weight, score_map.bias)
    return make_result(pooled, inputs, back), alpha
