"""A standard LSTM cell built from recorded ops."""
from ..errors import ContractError
from . import ops


def lstm_cell_step(cell, x, h, c):
    """Advance one step.

    ``cell`` is a LinearMap from ``concat(x, h)`` to the four stacked gate
    pre-activations, ordered input, forget, output, candidate.
    Returns ``(h_new, c_new)``.
    """
    hidden = h.shape[0]
    if c.shape != (hidden,) or cell.out_dim != 4 * hidden or cell.in_dim != x.shape[0] + hidden:
        raise ContractError(
            f"lstm dims disagree: x={x.shape}, h={h.shape}, c={c.shape}, "
            f"cell={cell.weight.shape}")
    z = ops.linear_apply(cell, ops.concat([x, h]))
    i = ops.sigmoid(ops.slice_vector(z, 0, hidden))
    f = ops.sigmoid(ops.slice_vector(z, hidden, 2 * hidden))
    o = ops.sigmoid(ops.slice_vector(z, 2 * hidden, 3 * hidden))
    g = ops.tanh(ops.slice_vector(z, 3 * hidden, 4 * hidden))
    c_new = ops.add(ops.mul(f, c), ops.mul(i, g))
    h_new = ops.mul(o, ops.tanh(c_new))
    return h_new, c_new
