"""SGD with momentum and L2 weight decay."""
import numpy as np

from ..errors import ContractError


def sgd_momentum_step(params, grads, lr, momentum=0.9, weight_decay=0.0001):
    """One in-place update of every parameter in ``params``.

    ``v <- momentum * v + (g + weight_decay * theta)`` then
    ``theta <- theta - lr * v``. Velocities persist in ``params.velocity``.
    Parameters missing from ``grads`` are treated as having zero gradient.
    """
    if lr < 0:
        raise ContractError(f"learning rate must be non-negative, got {lr}")
    unknown = set(grads) - set(params.names())
    if unknown:
        raise ContractError(f"gradients for unknown parameters: {sorted(unknown)}")
    for name, t in params:
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(t.data)
        elif np.shape(g) != t.shape:
            raise ContractError(f"{name}: gradient shape {np.shape(g)} != {t.shape}")
        step = np.asarray(g, dtype=t.dtype) + t.dtype.type(weight_decay) * t.data
        v = params.velocity.get(name)
        v = step if v is None else t.dtype.type(momentum) * v + step
        params.velocity[name] = v
        t.data = t.data - t.dtype.type(lr) * v
    return params
