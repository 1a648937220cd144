"""Rank <= 2 tensors and a reverse-mode gradient tape.

A :class:`GradientTape` used as a context manager records every operation
whose inputs require gradients. ``tape.backward(loss)`` replays the record in
reverse and accumulates gradients into leaf tensors (``Tensor.grad``); a leaf
used several times receives the sum of its per-use contributions.
"""
import contextlib
import contextvars

import numpy as np

from ..errors import ContractError

_DTYPES = {32: np.float32, 64: np.float64}
_default_dtype = contextvars.ContextVar("hiddengraph_dtype", default=np.float32)
_active_tape = contextvars.ContextVar("hiddengraph_tape", default=None)


def default_dtype():
    return _default_dtype.get()


@contextlib.contextmanager
def precision(bits):
    """Select the floating point width (32 or 64) for tensors created inside."""
    if bits not in _DTYPES:
        raise ContractError(f"precision must be 32 or 64, got {bits}")
    token = _default_dtype.set(_DTYPES[bits])
    try:
        yield _DTYPES[bits]
    finally:
        _default_dtype.reset(token)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        arr = np.asarray(data, dtype=dtype or default_dtype())
        if arr.ndim > 2:
            raise ContractError(f"tensors are rank <= 2, got shape {arr.shape}")
        self.data = np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)


def as_tensor(value, like=None):
    """Wrap ``value`` as a constant tensor, matching the dtype of ``like``."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(value, dtype=dtype)


class GradientTape:
    """Record of one forward pass.

    Nodes are stored as ``(output, inputs, backward_fn)`` where ``backward_fn``
    maps the output gradient to a tuple of input gradients (``None`` for
    inputs that need none).
    """

    def __init__(self):
        self.nodes = []
        self._token = None

    def __enter__(self):
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc):
        _active_tape.reset(self._token)
        self._token = None
        return False

    def record(self, output, inputs, backward_fn):
        self.nodes.append((output, inputs, backward_fn))

    def backward(self, loss, seed=1.0):
        """Propagate ``seed * d loss`` to every leaf that requires gradients.

        Returns a dict mapping leaf names to their accumulated gradients.
        """
        if not self.nodes:
            raise ContractError("backward on an empty tape")
        if not isinstance(loss, Tensor) or loss.data.size != 1:
            raise ContractError("backward needs a scalar-valued tensor")
        produced = {id(node[0]) for node in self.nodes}
        if id(loss) not in produced:
            raise ContractError("loss tensor was not produced on this tape")
        grads = {id(loss): np.full(loss.shape, seed, dtype=loss.dtype)}
        leaves = {}
        for output, inputs, backward_fn in reversed(self.nodes):
            g_out = grads.pop(id(output), None)
            if g_out is None:
                continue
            for tensor, g in zip(inputs, backward_fn(g_out)):
                if g is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                grads[key] = grads[key] + g if key in grads else g
                if key not in produced:
                    leaves[key] = tensor
        out = {}
        for key, tensor in leaves.items():
            g = np.asarray(grads[key], dtype=tensor.dtype).reshape(tensor.shape)
            tensor.grad = g if tensor.grad is None else tensor.grad + g
            if tensor.name is not None:
                out[tensor.name] = tensor.grad
        return out


def active_tape():
    return _active_tape.get()


def backward(tape, loss, seed=1.0):
    """Functional spelling of :meth:`GradientTape.backward`."""
    return tape.backward(loss, seed)


def make_result(data, inputs, backward_fn):
    """Wrap ``data`` as an op output and record it if any input is traced."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    tape = _active_tape.get()
    out.requires_grad = tape is not None and any(t.requires_grad for t in inputs)
    if out.requires_grad:
        tape.record(out, inputs, backward_fn)
    return out
