"""Learnable parameters: linear maps and an ordered named store."""
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .tensor import Tensor, default_dtype


@dataclass
class LinearMap:
    """``y = weight @ x + bias``; weight is (out_dim, in_dim)."""

    name: str
    weight: Tensor
    bias: Tensor

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ContractError(
                f"{self.name}: bias {self.bias.shape} does not match weight {self.weight.shape}")

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]

    def __call__(self, x):
        from .ops import linear_apply
        return linear_apply(self, x)


class ParameterStore:
    """Ordered collection of named parameter tensors.

    Linear maps register their weight and bias as ``<name>.weight`` and
    ``<name>.bias``. Iteration order is insertion order and survives
    checkpointing. Momentum buffers live in ``velocity``.
    """

    def __init__(self, dtype=None):
        self.dtype = np.dtype(dtype or default_dtype())
        self._tensors = {}
        self._maps = {}
        self.velocity = {}

    # construction -----------------------------------------------------
    def add_tensor(self, name, value):
        if name in self._tensors:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(value, requires_grad=True, name=name, dtype=self.dtype)
        self._tensors[name] = t
        return t

    def add_linear(self, name, in_dim, out_dim, rng=None, zero=False):
        """Register a linear map with Glorot-uniform weights and zero bias."""
        if zero or rng is None:
            w = np.zeros((out_dim, in_dim))
        else:
            limit = np.sqrt(6.0 / (in_dim + out_dim))
            w = rng.uniform(-limit, limit, size=(out_dim, in_dim))
        weight = self.add_tensor(f"{name}.weight", w)
        bias = self.add_tensor(f"{name}.bias", np.zeros(out_dim))
        lin = LinearMap(name, weight, bias)
        self._maps[name] = lin
        return lin

    # access -----------------------------------------------------------
    def linear(self, name):
        return self._maps[name]

    def has_linear(self, name):
        return name in self._maps

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors.items())

    def __len__(self):
        return len(self._tensors)

    def names(self):
        return list(self._tensors)

    def manifest(self):
        """``[(name, shape), ...]`` in store order."""
        return [(n, tuple(t.shape)) for n, t in self._tensors.items()]

    def num_parameters(self):
        return int(sum(t.data.size for t in self._tensors.values()))

    def linear_names(self):
        return list(self._maps)

    # bulk operations ----------------------------------------------------
    def zero_grad(self):
        for t in self._tensors.values():
            t.grad = None

    def grads(self):
        """Current gradients by name; parameters never touched get zeros."""
        return {n: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for n, t in self._tensors.items()}

    def state(self):
        return {n: t.data.copy() for n, t in self._tensors.items()}

    def load_state(self, state):
        for n, t in self._tensors.items():
            value = np.asarray(state[n], dtype=self.dtype)
            if value.shape != t.shape:
                raise ContractError(f"{n}: shape {value.shape} != {t.shape}")
            t.data = np.ascontiguousarray(value)

    def copy(self, dtype=None):
        """Deep copy, optionally cast to another precision."""
        other = ParameterStore(dtype or self.dtype)
        for n, t in self._tensors.items():
            other.add_tensor(n, t.data)
        for name in self._maps:
            other._maps[name] = LinearMap(name, other[f"{name}.weight"], other[f"{name}.bias"])
        for n, v in self.velocity.items():
            other.velocity[n] = v.astype(other.dtype)
        return other

    def flat(self):
        return np.concatenate([t.data.reshape(-1) for t in self._tensors.values()])

    def tobytes(self):
        """Little-endian float32 payload in store order."""
        return b"".join(t.data.astype("<f4").tobytes() for t in self._tensors.values())
