"""Analytic gradients against central finite differences in 64-bit."""
import time

import numpy as np
import pytest

from hiddengraph.engine import StreamingEngine, static_logits
from hiddengraph.kernel import GradientTape, Tensor, ops, precision
from hiddengraph.readout import attend, classify, fuse
from hiddengraph.training.loop import sample_loss

from helpers import random_model, random_stream

EPS = 1e-4
COORDS = 120
TOLERANCE = 1e-4


def max_relative_error(store, loss_fn, rng, coords=COORDS):
    """Worst relative gap over ``coords`` random parameter coordinates.

    The denominator is ``max(|analytic|, |numeric|, 1e-8)``.
    """
    with GradientTape() as tape:
        loss = loss_fn()
    grads = tape.backward(loss)
    sizes = [(name, t) for name, t in store]
    weights = np.array([t.data.size for _, t in sizes], dtype=float)
    worst = 0.0
    for _ in range(coords):
        name, t = sizes[rng.choice(len(sizes), p=weights / weights.sum())]
        idx = tuple(int(rng.integers(s)) for s in t.shape)
        old = t.data[idx]
        t.data[idx] = old + EPS
        up = float(loss_fn().data)
        t.data[idx] = old - EPS
        down = float(loss_fn().data)
        t.data[idx] = old
        num = (up - down) / (2 * EPS)
        ana = float(grads[name][idx]) if name in grads else 0.0
        worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-8))
    return worst


def step_loss(model, stream, label):
    engine = StreamingEngine(model, stream.frames[0])
    logits = None
    for frame in stream.frames[1:]:
        logits = engine.step(frame)
    return ops.cross_entropy(logits, label)


@pytest.fixture(autouse=True)
def double_precision():
    with precision(64):
        yield


@pytest.mark.parametrize("variant", ["visual", "location"])
def test_streaming_step_gradients(variant):
    rng = np.random.default_rng(11 if variant == "visual" else 12)
    model = random_model(rng, variant, 6, 3, 8, k=4, dtype=np.float64)
    stream = random_stream(rng, 3, 6, 8, k=4)
    err = max_relative_error(model.params, lambda: step_loss(model, stream, 2), rng)
    assert err < TOLERANCE


def test_attend_classify_gradients():
    rng = np.random.default_rng(13)
    model = random_model(rng, "visual", 5, 4, 8, k=5, dtype=np.float64)
    nodes = Tensor(rng.standard_normal((4, 8)))
    query = Tensor(rng.standard_normal(8))

    def loss():
        _, q = attend(nodes, query, model.attention)
        return ops.cross_entropy(classify(q, model.head), 3)

    assert max_relative_error(model.params, loss, rng) < TOLERANCE


def test_fusion_gradients():
    rng = np.random.default_rng(14)
    model = random_model(rng, "location", 5, 3, 8, k=4, static=True, dtype=np.float64)
    query = Tensor(rng.standard_normal(8))
    g = Tensor(rng.standard_normal(8))

    def loss():
        return ops.cross_entropy(classify(fuse(query, g, model.head), model.head), 1)

    assert max_relative_error(model.params, loss, rng) < TOLERANCE


def test_static_stream_gradients():
    rng = np.random.default_rng(15)
    model = random_model(rng, "visual", 5, 3, 6, k=3, static=True, dtype=np.float64)
    stream = random_stream(rng, 3, 5, 6, k=3)
    err = max_relative_error(model.params,
                             lambda: ops.cross_entropy(static_logits(model, stream), 0), rng)
    assert err < TOLERANCE


def test_baseline_lstm_gradients():
    rng = np.random.default_rng(16)
    model = random_model(rng, "baseline", 5, 1, 8, k=4, dtype=np.float64, lstm_dim=6)
    stream = random_stream(rng, 4, 5, 8, k=4, label=1)
    assert max_relative_error(model.params, lambda: sample_loss(model, stream), rng) < TOLERANCE


def test_mean_supervision_gradients():
    rng = np.random.default_rng(17)
    model = random_model(rng, "location", 5, 3, 6, k=3, dtype=np.float64)
    stream = random_stream(rng, 3, 5, 6, k=3, label=2)
    assert max_relative_error(model.params, lambda: sample_loss(model, stream), rng) < TOLERANCE


def test_suite_is_fast():
    start = time.perf_counter()
    rng = np.random.default_rng(18)
    model = random_model(rng, "visual", 6, 3, 8, k=4, dtype=np.float64)
    stream = random_stream(rng, 3, 6, 8, k=4)
    max_relative_error(model.params, lambda: step_loss(model, stream, 0), rng)
    # one check at acceptance size; all six stay well inside two minutes
    assert time.perf_counter() - start < 20
