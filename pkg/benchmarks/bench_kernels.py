"""Compare the compiled and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat 200] [--end-to-end]

Kernel timings call both backends directly, unrouted, at two problem sizes
(the synthetic task and a wide-feature setting); the wide case shows why the
package routes dense kernels to numpy above a feature width. ``--end-to-end`` also times a
full streaming pass in a subprocess per backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hiddengraph._ext import available_backends

SIZES = {"small (N=6 M=3 D=16)": (6, 3, 16), "wide (N=20 M=5 D=256)": (20, 5, 256)}


def _cases(n, m, d, dtype=np.float32, seed=0):
    rng = np.random.default_rng(seed)
    f = lambda *s: rng.standard_normal(s).astype(dtype)  # noqa: E731
    corners = rng.uniform(0, 0.6, (n, 2))
    props = np.concatenate([corners, corners + rng.uniform(0.05, 0.4, (n, 2))], 1).astype(dtype)
    nodes = props[:m].copy()
    raw = np.abs(f(n, m))
    keys, queries = f(n, d), f(m, d)
    wx, wh, bx, bh = f(d, d), f(d, d), f(d), f(d)
    x, xh = f(m, d), f(m, d)
    wg, wn, wo, bg, bn, bo = f(d, d), f(d, d), f(1, d), f(d), f(d), f(1)
    q = f(d)

    def prep(k):
        out, w = k.softmax_message_forward(keys, queries, keys)
        merged, gate = k.gated_merge_forward(x, xh, wx, bx, wh, bh)
        alpha, pooled, e = k.attend_forward(x, q, wg, bg, wn, bn, wo, bo)
        return out, w, gate, alpha, e

    return {
        "iou_matrix": lambda k, s: k.iou_matrix(props, nodes),
        "l1_normalize_columns": lambda k, s: k.l1_normalize_columns(raw),
        "shift_boxes": lambda k, s: k.shift_boxes(nodes, props, raw),
        "softmax_message fwd": lambda k, s: k.softmax_message_forward(keys, queries, keys),
        "softmax_message bwd": lambda k, s: k.softmax_message_backward(
            keys, queries, keys, s[1], s[0]),
        "gated_merge fwd": lambda k, s: k.gated_merge_forward(x, xh, wx, bx, wh, bh),
        "gated_merge bwd": lambda k, s: k.gated_merge_backward(x, xh, wx, wh, s[2], x),
        "attend fwd": lambda k, s: k.attend_forward(x, q, wg, bg, wn, bn, wo, bo),
        "attend bwd": lambda k, s: k.attend_backward(x, q, wg, wn, wo, s[3], s[4], q),
    }, prep


def bench_kernels(repeat):
    backends = available_backends()
    names = sorted(backends)
    print(f"backends: {', '.join(names)}  (median of 5 runs x {repeat} calls, microseconds/call)")
    for label, (n, m, d) in SIZES.items():
        cases, prep = _cases(n, m, d)
        print(f"\n{label}")
        print(f"  {'kernel':24s}" + "".join(f"{b:>12s}" for b in names) +
              ("     speedup" if len(names) > 1 else ""))
        for kname, fn in cases.items():
            row = {}
            for b in names:
                k = backends[b]
                state = prep(k)
                runs = timeit.repeat(lambda: fn(k, state), number=repeat, repeat=5)
                row[b] = 1e6 * float(np.median(runs)) / repeat
            line = f"  {kname:24s}" + "".join(f"{row[b]:12.2f}" for b in names)
            if "cython" in row:
                line += f"{row['numpy'] / row['cython']:11.2f}x"
            print(line)


_E2E = """
import time
from hiddengraph import BACKEND
from hiddengraph.engine import run_streaming
from hiddengraph.model import GraphModel
from hiddengraph.training import generate_interaction_dataset, SyntheticTaskSpec, task_model_config
streams = generate_interaction_dataset(SyntheticTaskSpec(), 0, {"test": 200})["test"]
for variant in ("visual", "location"):
    model = GraphModel.build(task_model_config(variant), 0)
    t0 = time.perf_counter()
    for s in streams:
        run_streaming(model, s)
    dt = time.perf_counter() - t0
    print(f"  {BACKEND:8s} {variant:9s} {1e3 * dt / len(streams):8.3f} ms/stream", flush=True)
"""


def bench_end_to_end():
    print("\nend-to-end streaming (200 synthetic streams, T=8)", flush=True)
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("HIDDENGRAPH_PURE", None)
        if pure:
            env["HIDDENGRAPH_PURE"] = "1"
        subprocess.run([sys.executable, "-c", _E2E], env=env, check=True)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    parser.add_argument("--end-to-end", action="store_true")
    args = parser.parse_args()
    bench_kernels(args.repeat)
    if args.end_to_end:
        bench_end_to_end()


if __name__ == "__main__":
    main()
