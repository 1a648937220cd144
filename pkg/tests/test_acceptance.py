"""Acceptance gates 1-9.

Gates 4-8 train on the 5-class synthetic interaction task (2000 train / 500
test, T=8, N=6, M=3, D=16, seed 0) with the tuned recipes. Training happens
once per session and takes several minutes on one CPU core. Each gate adds a
PASS/FAIL line to the terminal summary.
"""
import inspect
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

import test_gradients
import test_invariants
import test_oracles
from hiddengraph.checkpoint import load_model, save_checkpoint
from hiddengraph.engine import run_streaming
from hiddengraph.errors import ChecksumError
from hiddengraph.kernel import precision
from hiddengraph.model import parameter_count
from hiddengraph.training.loop import evaluate, train_model
from hiddengraph.training.recipes import (static_finetune_config, task_model_config,
                                          task_train_config)
from hiddengraph.training.synthetic import SyntheticTaskSpec, generate_interaction_dataset

from helpers import random_model, random_stream

GRAPHS = ("visual", "location")
TIME_BUDGET = 600.0


def criterion(number, title):
    return pytest.mark.criterion(number, title)


def note(request, text):
    request.node.criterion_detail = text


@pytest.fixture(scope="session")
def task():
    spec = SyntheticTaskSpec()
    assert (spec.num_proposals, spec.num_nodes, spec.feat_dim, spec.frames) == (6, 3, 16, 8)
    return generate_interaction_dataset(spec, seed=0, counts={"train": 2000, "test": 500})


@pytest.fixture(scope="session")
def trained(task):
    """Trained model, wall-clock seconds and test metrics per variant."""
    out = {}
    for variant in (*GRAPHS, "baseline"):
        cfg = task_train_config(variant, seed=0)
        start = time.perf_counter()
        model, _ = train_model(task["train"], cfg, model_config=task_model_config(variant))
        seconds = time.perf_counter() - start
        out[variant] = (model, seconds, evaluate(model, task["test"]), cfg.epochs)
    return out


# property gates -------------------------------------------------------------------------

@criterion(1, "gradient fidelity")
def test_gradient_fidelity(request):
    rng = np.random.default_rng(100)
    start = time.perf_counter()
    worst = {}
    with precision(64):
        for variant in GRAPHS:
            model = random_model(rng, variant, 6, 3, 8, k=4, dtype=np.float64)
            stream = random_stream(rng, 3, 6, 8, k=4)
            worst[f"{variant} step"] = test_gradients.max_relative_error(
                model.params, lambda: test_gradients.step_loss(model, stream, 1), rng)
        for name in ("test_attend_classify_gradients", "test_fusion_gradients",
                     "test_baseline_lstm_gradients"):
            getattr(test_gradients, name)()
    elapsed = time.perf_counter() - start
    assert test_gradients.COORDS >= 100 and test_gradients.EPS == 1e-4
    assert max(worst.values()) < 1e-4, worst
    assert elapsed < 120
    note(request, f"max rel err {max(worst.values()):.1e}, {elapsed:.1f}s")


@criterion(2, "oracle equivalence")
def test_oracle_equivalence(request):
    assert test_oracles.INSTANCES >= 500 and test_oracles.ATOL == 1e-6
    count = 0
    for name, fn in inspect.getmembers(test_oracles, inspect.isfunction):
        if not name.startswith("test_"):
            continue
        params = inspect.signature(fn).parameters
        for variant in (GRAPHS if "variant" in params else (None,)):
            fn(variant) if variant else fn()
            count += 1
    assert count == 8
    note(request, f"{count} composites x {test_oracles.INSTANCES} instances")


@criterion(3, "invariant suite")
def test_invariant_suite(request):
    assert test_invariants.CASES >= 1000
    names = [n for n, _ in inspect.getmembers(test_invariants, callable) if n.startswith("test_")]
    for name in names:
        getattr(test_invariants, name)()
    note(request, f"{len(names)} properties x {test_invariants.CASES} cases")


# learning gates ---------------------------------------------------------------------------

@pytest.mark.slow
@criterion(4, "visual graph learns the task")
def test_visual_learning(request, trained):
    model, seconds, metrics, epochs = trained["visual"]
    note(request, f"top1 {metrics.top1:.3f}, {epochs} epochs, {seconds:.0f}s")
    assert epochs <= 30
    assert seconds <= TIME_BUDGET
    assert metrics.top1 >= 0.85


@pytest.mark.slow
@criterion(5, "location graph learns the task")
def test_location_learning(request, trained):
    _, seconds, metrics, epochs = trained["location"]
    note(request, f"top1 {metrics.top1:.3f}, {epochs} epochs, {seconds:.0f}s")
    assert epochs <= 30
    assert metrics.top1 >= 0.70


@pytest.mark.slow
@criterion(6, "accuracy rises with streaming steps")
def test_streaming_monotonicity(request, trained):
    parts = []
    for variant in GRAPHS:
        curve = trained[variant][2].per_step_top1
        assert len(curve) == 8
        rho = spearmanr(np.arange(1, 9), curve).statistic
        parts.append(f"{variant} +{curve[-1] - curve[0]:.2f} rho {rho:.3f}")
        note(request, "; ".join(parts))
        assert curve[-1] - curve[0] >= 0.10, (variant, curve)
        assert rho > 0.8, (variant, curve)


@pytest.mark.slow
@criterion(7, "graphs beat the mean-pool LSTM baseline")
def test_baseline_gap(request, trained):
    counts = {v: parameter_count(task_model_config(v)) for v in (*GRAPHS, "baseline")}
    for v, (model, *_rest) in trained.items():
        assert model.num_parameters() == counts[v]
    base = trained["baseline"][2].top1
    gaps = {v: trained[v][2].top1 - base for v in GRAPHS}
    note(request, f"baseline {base:.3f}, gaps "
         + ", ".join(f"{v} +{g:.3f}" for v, g in gaps.items()) + f", params {counts}")
    for v in GRAPHS:
        assert abs(counts[v] - counts["baseline"]) <= 0.2 * counts["baseline"], counts
        assert gaps[v] >= 0.05, gaps


@pytest.mark.slow
@criterion(8, "static fusion does not degrade accuracy")
def test_static_fusion(request, task, trained):
    parts = []
    for variant in GRAPHS:
        model, _, metrics, _ = trained[variant]
        static, _ = train_model(task["train"], static_finetune_config(seed=0),
                                model=model.to_static(seed=0))
        acc = evaluate(static, task["test"], static=True).top1
        parts.append(f"{variant} {acc:.3f} vs {metrics.top1:.3f}")
        note(request, "; ".join(parts))
        assert acc >= metrics.top1 - 0.01, (variant, acc, metrics.top1)


# persistence --------------------------------------------------------------------------------

@pytest.mark.slow
@criterion(9, "checkpoint persistence")
def test_persistence(request, tmp_path, task, trained):
    streams = task["test"][:100]
    for variant, (model, *_rest) in trained.items():
        path = tmp_path / f"{variant}.dgm"
        save_checkpoint(model, path)
        loaded = load_model(path, expect_variant=variant)
        assert loaded.params.tobytes() == model.params.tobytes()
        for s in streams:
            assert (run_streaming(loaded, s).logits_array().tobytes()
                    == run_streaming(model, s).logits_array().tobytes())
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0x10
        path.write_bytes(bytes(raw))
        with pytest.raises(ChecksumError):
            load_model(path)
    note(request, "3 variants x 100 streams bit-identical; corruption rejected")
