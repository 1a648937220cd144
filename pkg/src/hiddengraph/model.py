"""Parameter layout for the graph models and the mean-pool LSTM baseline."""
from dataclasses import replace

import numpy as np

from .errors import ConfigError
from .graph import GraphVariantConfig
from .kernel import ParameterStore, default_dtype
from .location import LocationGraphParams
from .readout import AttentionParams, HeadParams
from .visual import VisualGraphParams


class GraphModel:
    """A configuration plus the parameter store it owns.

    ``static`` models carry an extra fusion layer in their head.
    """

    def __init__(self, config, params, static=False):
        self.config = config
        self.params = params
        self.static = static
        self._bind()

    def _bind(self):
        cfg, store = self.config, self.params
        self.graph = None
        self.attention = None
        self.lstm = None
        if cfg.variant == "visual":
            self.graph = VisualGraphParams.from_store(store)
        elif cfg.variant == "location":
            self.graph = LocationGraphParams.from_store(store)
        else:
            self.lstm = store.linear("baseline.lstm")
        if cfg.variant != "baseline":
            self.attention = AttentionParams.from_store(store)
        self.head = HeadParams.from_store(store, cfg.dropout)
        if self.static and self.head.fusion is None:
            raise ConfigError("static model is missing its fusion layer")

    @classmethod
    def build(cls, config, seed=0, static=False, dtype=None):
        if static and config.variant == "baseline":
            raise ConfigError("the baseline has no static mode")
        rng = np.random.default_rng(seed)
        store = ParameterStore(dtype or default_dtype())
        d = config.feat_dim
        if config.variant == "visual":
            VisualGraphParams.create(store, d, rng)
        elif config.variant == "location":
            LocationGraphParams.create(store, d, rng)
        else:
            store.add_linear("baseline.lstm", d + config.lstm_dim, 4 * config.lstm_dim, rng)
        if config.variant != "baseline":
            AttentionParams.create(store, d, config.attn_dim, rng)
        head_in = config.lstm_dim if config.variant == "baseline" else d
        HeadParams.create(store, head_in, config.hidden_dim, config.num_classes, rng,
                          global_dim=config.global_dim if static else None,
                          dropout=config.dropout)
        return cls(config, store, static)

    def to_static(self, seed=0):
        """Copy of this streaming model with a freshly initialized fusion layer."""
        if self.static:
            return self.copy()
        fresh = GraphModel.build(self.config, seed=seed, static=True, dtype=self.params.dtype)
        fresh.params.load_state({**fresh.params.state(), **self.params.state()})
        return fresh

    def copy(self, dtype=None):
        return GraphModel(self.config, self.params.copy(dtype), self.static)

    def zeroed(self):
        """Copy with every parameter set to zero."""
        out = self.copy()
        out.params.load_state({n: np.zeros(t.shape) for n, t in out.params})
        return out

    def num_parameters(self):
        return self.params.num_parameters()

    def with_config(self, **changes):
        return GraphModel(replace(self.config, **changes), self.params, self.static)

    @property
    def dtype(self):
        return self.params.dtype


def parameter_count(config, static=False):
    """Parameter count of a model built from ``config`` without building it."""
    d, a, h, k = config.feat_dim, config.attn_dim, config.hidden_dim, config.num_classes
    lin = lambda i, o: o * i + o  # noqa: E731
    total = lin(d if config.variant != "baseline" else config.lstm_dim, h) + lin(h, k)
    if config.variant == "visual":
        total += 5 * lin(d, d)
    elif config.variant == "location":
        total += 2 * lin(d, d)
    else:
        total += lin(d + config.lstm_dim, 4 * config.lstm_dim)
    if config.variant != "baseline":
        total += 2 * lin(d, a) + lin(a, 1)
    if static:
        total += lin(config.global_dim + d, d)
    return total


__all__ = ["GraphModel", "GraphVariantConfig", "parameter_count"]
