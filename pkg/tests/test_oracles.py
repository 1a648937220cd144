"""Composite updates against naive double-loop references on many random instances.

Each test draws 500 instances with N <= 8, M <= 4, D <= 16 and compares the
32-bit package output with the plain-float reference at 1e-6 absolute.
"""
import numpy as np
import pytest

import reference as ref
from hiddengraph.engine import engine_init, engine_step
from hiddengraph.graph import HiddenGraphState
from hiddengraph.kernel import Tensor
from hiddengraph.location import location_cross_update, location_self_update
from hiddengraph.readout import attend
from hiddengraph.visual import visual_cross_update, visual_self_update

from helpers import random_boxes, random_frame, random_model, random_stream

INSTANCES = 500
ATOL = 1e-6


def instances(seed, variant):
    rng = np.random.default_rng(seed)
    for _ in range(INSTANCES):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, min(4, n) + 1))
        d = int(rng.integers(1, 17))
        yield rng, n, m, d, random_model(rng, variant, n, m, d)


def f32(a):
    return np.asarray(a, np.float32)


def representable(stream):
    """Round a stream to float32 values so both sides see identical inputs."""
    for f in stream.frames:
        f.features = f32(f.features).astype(np.float64)
        f.boxes = f32(f.boxes).astype(np.float64)
    return stream


def test_visual_cross_oracle():
    for rng, n, m, d, model in instances(1, "visual"):
        f = random_frame(rng, n, d)
        x = f32(rng.uniform(-1, 1, (m, d)))
        state = HiddenGraphState(Tensor(x))
        visual_cross_update(state, f, model.graph)
        want, w = ref.visual_cross(ref.Params(model.params), ref.mat(x), ref.mat(f32(f.features)))
        np.testing.assert_allclose(state.node_features.data, want, atol=ATOL, rtol=0)
        np.testing.assert_allclose(state.cross_weights, w, atol=ATOL, rtol=0)


def test_visual_self_oracle():
    for rng, n, m, d, model in instances(2, "visual"):
        x = f32(rng.uniform(-1, 1, (m, d)))
        state = HiddenGraphState(Tensor(x))
        visual_self_update(state, model.graph)
        want, w = ref.visual_self(ref.Params(model.params), ref.mat(x))
        np.testing.assert_allclose(state.node_features.data, want, atol=ATOL, rtol=0)
        np.testing.assert_allclose(state.self_weights, w, atol=ATOL, rtol=0)


def test_location_cross_oracle():
    for rng, n, m, d, model in instances(3, "location"):
        f = random_frame(rng, n, d)
        x = f32(rng.uniform(0, 1, (m, d)))
        # nodes sit near some proposals so that most columns overlap
        boxes = f32(np.clip(f.boxes[:m] + rng.uniform(-0.05, 0.05, (m, 4)), 0, 1))
        boxes[:, 2:] = np.maximum(boxes[:, 2:], boxes[:, :2])
        state = HiddenGraphState(Tensor(x), boxes.copy())
        location_cross_update(state, f, model.graph)
        want, want_boxes, w = ref.location_cross(ref.Params(model.params), ref.mat(x),
                                                 ref.mat(boxes), ref.mat(f32(f.features)),
                                                 ref.mat(f32(f.boxes)))
        np.testing.assert_allclose(state.node_features.data, want, atol=ATOL, rtol=0)
        np.testing.assert_allclose(state.node_boxes, want_boxes, atol=ATOL, rtol=0)
        np.testing.assert_allclose(state.cross_weights, w, atol=ATOL, rtol=0)


def test_location_self_oracle():
    for rng, n, m, d, model in instances(4, "location"):
        x = f32(rng.uniform(0, 1, (m, d)))
        boxes = f32(random_boxes(rng, m))
        state = HiddenGraphState(Tensor(x), boxes.copy())
        location_self_update(state, model.graph)
        want, w = ref.location_self(ref.Params(model.params), ref.mat(x), ref.mat(boxes))
        np.testing.assert_allclose(state.node_features.data, want, atol=ATOL, rtol=0)
        np.testing.assert_allclose(state.self_weights, w, atol=ATOL, rtol=0)


@pytest.mark.parametrize("variant", ["visual", "location"])
def test_attend_oracle(variant):
    for rng, n, m, d, model in instances(5, variant):
        nodes = f32(rng.uniform(-1, 1, (m, d)))
        query = f32(rng.uniform(-1, 1, d))
        alpha, pooled = attend(Tensor(nodes), Tensor(query), model.attention)
        want_alpha, want = ref.attend(ref.Params(model.params), ref.mat(nodes), ref.vec(query))
        np.testing.assert_allclose(np.ravel(alpha.data), want_alpha, atol=ATOL, rtol=0)
        np.testing.assert_allclose(pooled.data, want, atol=ATOL, rtol=0)


@pytest.mark.parametrize("variant", ["visual", "location"])
def test_engine_step_oracle(variant):
    for rng, n, m, d, model in instances(6, variant):
        stream = representable(random_stream(rng, 2, int(rng.integers(1, n + 1)), d))
        engine = engine_init(model, stream.frames[0])
        logits = engine_step(engine, stream.frames[1])
        want, query = ref.run_stream(ref.Params(model.params), variant, stream, n, m)
        np.testing.assert_allclose(logits.data, want[-1], atol=ATOL, rtol=0)
        np.testing.assert_allclose(engine.query.data, query, atol=ATOL, rtol=0)
