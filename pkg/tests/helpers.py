"""Random instances shared by the test modules."""
import numpy as np

from hiddengraph.graph import GraphVariantConfig
from hiddengraph.model import GraphModel
from hiddengraph.proposals import FrameProposals, ProposalStream


def random_boxes(rng, n):
    corner = rng.uniform(0.0, 0.7, size=(n, 2))
    size = rng.uniform(0.05, 0.3, size=(n, 2))
    return np.concatenate([corner, corner + size], axis=1)


def random_frame(rng, n, d, index=1, scale=1.0):
    """Frame with distinct scores, valid boxes and features in [-scale, scale]."""
    scores = rng.permutation(np.linspace(0.05, 0.95, n)) if n > 1 else np.array([0.5])
    scores = scores + rng.uniform(0, 1e-3, size=n)
    return FrameProposals(index, scores, random_boxes(rng, n),
                          rng.uniform(-scale, scale, size=(n, d)))


def random_stream(rng, frames, n, d, k=3, label=None, scale=1.0):
    return ProposalStream(d, k, label, None,
                          [random_frame(rng, n, d, t + 1, scale) for t in range(frames)])


def random_model(rng, variant, n, m, d, k=3, static=False, dtype=np.float32, **extra):
    cfg = GraphVariantConfig(variant=variant, num_proposals=n, num_nodes=m, feat_dim=d,
                             num_classes=k, **extra)
    return GraphModel.build(cfg, seed=int(rng.integers(2**31)), static=static, dtype=dtype)


def permuted(frame, rng):
    return frame.take(rng.permutation(len(frame)))
