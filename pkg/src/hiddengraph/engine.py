"""Per-stream orchestration: streaming inference, static inference, baseline."""
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .graph import init_hidden_graph
from .kernel import Tensor, lstm_cell_step, ops
from .location import location_cross_update, location_self_update
from .proposals import top_k_by_score
from .readout import attend, classify, fuse, init_query
from .visual import visual_cross_update, visual_self_update


@dataclass
class PredictionTrace:
    """Per-step outputs of one stream: logits, readout vectors, attention."""

    logits: list = field(default_factory=list)
    queries: list = field(default_factory=list)
    attention: list = field(default_factory=list)

    def __len__(self):
        return len(self.logits)

    def append(self, logits, query, alpha):
        self.logits.append(np.array(logits, copy=True))
        self.queries.append(np.array(query, copy=True))
        self.attention.append(None if alpha is None else np.array(alpha, copy=True))

    def logits_array(self):
        return np.stack(self.logits)

    def predictions(self):
        return self.logits_array().argmax(axis=1)

    def prefix(self, t):
        return PredictionTrace(self.logits[:t], self.queries[:t], self.attention[:t])


def _select(frame, config):
    if len(frame) == 0:
        raise ContractError(f"frame {frame.index} has no proposals")
    if frame.features.shape[1] != config.feat_dim:
        raise ContractError(
            f"frame {frame.index}: feature dim {frame.features.shape[1]} != {config.feat_dim}")
    return top_k_by_score(frame, config.num_proposals)


class StreamingEngine:
    """Mutable per-stream state for a graph model.

    Construction consumes the first frame and already emits a prediction
    (attention over the freshly initialized nodes with the max-pooled query).
    Each :meth:`step` consumes one more frame. ``outputs`` holds the logits
    as tape tensors so a loss can be built on top of a traced run.
    """

    def __init__(self, model, first_frame, rng=None):
        config = model.config
        if config.variant == "baseline":
            raise ContractError("the baseline model runs through baseline_forward")
        self.model = model
        self.config = config
        self.rng = rng
        frame = _select(first_frame, config)
        self.state = init_hidden_graph(frame, config.num_nodes,
                                       with_boxes=config.variant == "location",
                                       dtype=model.dtype)
        self.query = init_query(frame, dtype=model.dtype)
        self.steps = 0
        self.trace = PredictionTrace()
        self.outputs = []
        self._readout()

    def _readout(self):
        alpha, self.query = attend(self.state.node_features, self.query, self.model.attention)
        logits = classify(self.query, self.model.head, self.rng)
        self.steps += 1
        self.outputs.append(logits)
        self.trace.append(logits.data, self.query.data, alpha)
        return logits

    def step(self, frame):
        frame = _select(frame, self.config)
        graph, rounds = self.model.graph, self.config.internal_rounds
        if self.config.variant == "visual":
            visual_cross_update(self.state, frame, graph)
            visual_self_update(self.state, graph, rounds)
        else:
            location_cross_update(self.state, frame, graph)
            location_self_update(self.state, graph, rounds)
        return self._readout()


def engine_init(model, first_frame, rng=None):
    return StreamingEngine(model, first_frame, rng)


def engine_step(engine, frame):
    return engine.step(frame)


def _check_stream(stream, config):
    if len(stream.frames) == 0:
        raise ContractError("stream has no frames")
    if stream.feat_dim != config.feat_dim:
        raise ContractError(f"stream feature dim {stream.feat_dim} != model {config.feat_dim}")


def streaming_outputs(model, stream, rng=None):
    """Run a stream and return ``(per-step logits tensors, trace, final query)``."""
    _check_stream(stream, model.config)
    if model.config.variant == "baseline":
        return baseline_outputs(model, stream, rng)
    engine = StreamingEngine(model, stream.frames[0], rng)
    for frame in stream.frames[1:]:
        engine.step(frame)
    return engine.outputs, engine.trace, engine.query


def run_streaming(model, stream):
    """Per-step predictions for every frame of ``stream``."""
    return streaming_outputs(model, stream)[1]


def surrogate_global_feature(stream):
    """Stand-in clip feature: mean of all proposal features over all frames."""
    feats = [f.features for f in stream.frames if len(f)]
    if not feats:
        raise ContractError("stream has no proposals")
    return np.concatenate(feats).mean(axis=0)


def static_logits(model, stream, global_feature=None, surrogate=True, rng=None):
    """Static-mode logits as a tape tensor."""
    if not model.static:
        raise ContractError("model has no fusion layer; build it with static=True")
    _, _, q_final = streaming_outputs(model, stream, rng)
    if global_feature is None:
        global_feature = stream.global_feat
    if global_feature is None:
        if not surrogate:
            raise ContractError("no global feature given and the surrogate is disabled")
        global_feature = surrogate_global_feature(stream)
    z = fuse(q_final, Tensor(global_feature, dtype=model.dtype), model.head)
    return classify(z, model.head, rng)


def run_static(model, stream, global_feature=None, surrogate=True):
    return static_logits(model, stream, global_feature, surrogate).data


# baseline ---------------------------------------------------------------------

class BaselineEngine:
    """Incremental runner for the mean-pool LSTM baseline."""

    def __init__(self, model, rng=None):
        if model.config.variant != "baseline":
            raise ContractError("BaselineEngine needs a baseline model")
        self.model = model
        self.rng = rng
        dim = model.config.lstm_dim
        self.h = Tensor(np.zeros(dim), dtype=model.dtype)
        self.c = Tensor(np.zeros(dim), dtype=model.dtype)
        self.steps = 0
        self.trace = PredictionTrace()
        self.outputs = []

    def step(self, frame):
        frame = _select(frame, self.model.config)
        pooled = ops.mean_rows(Tensor(frame.features, dtype=self.model.dtype))
        self.h, self.c = lstm_cell_step(self.model.lstm, pooled, self.h, self.c)
        logits = classify(self.h, self.model.head, self.rng)
        self.steps += 1
        self.outputs.append(logits)
        self.trace.append(logits.data, self.h.data, None)
        return logits


def open_engine(model, first_frame, rng=None):
    """Engine for any variant, with ``first_frame`` already consumed."""
    if model.config.variant == "baseline":
        engine = BaselineEngine(model, rng)
        engine.step(first_frame)
        return engine
    return StreamingEngine(model, first_frame, rng)


def baseline_outputs(model, stream, rng=None):
    _check_stream(stream, model.config)
    engine = BaselineEngine(model, rng)
    for frame in stream.frames:
        engine.step(frame)
    return engine.outputs, engine.trace, engine.h


def baseline_forward(model, stream):
    """Mean-pool the top-N features of each frame into an LSTM; classify each step."""
    return baseline_outputs(model, stream)[1]
