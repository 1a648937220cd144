"""Synthetic two-actor interaction streams.

Each scene has two actors following a kinematic program for its class, a few
passive objects that only jitter, and random distractor proposals. Proposal
features are ``[identity embedding | box velocity | box position]`` plus
Gaussian noise; scores rank actors above passive objects above distractors.

The label of a scene can be re-derived from actor tracks alone with
:func:`classify_tracks`; the generator guarantees every program clears that
classifier's margins.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError
from ..proposals import FrameProposals, ProposalStream

CLASSES = ("approach", "depart", "chase", "swap", "static")

# classifier margins (normalized image units)
STILL = 0.05      # max actor displacement for "static"
RIGID = 0.05      # max change of the actor offset for "chase"
SWAPPED = 0.05    # max distance between an actor's end and the other's start
CONVERGE = 0.2    # min change of actor distance for approach / depart


class GenerationError(RuntimeError):
    """The requested geometry cannot be realized inside the unit canvas."""


@dataclass(frozen=True)
class SyntheticTaskSpec:
    classes: tuple = CLASSES
    objects: tuple = (2, 4)          # inclusive range of objects per scene
    distractors: int | None = None   # per frame; None fills frames up to N
    frames: int = 8
    feat_dim: int = 16
    identity_dim: int = 8
    noise: float = 0.2
    num_proposals: int = 6
    num_nodes: int = 3
    box_size: tuple = (0.12, 0.2)
    jitter: float = 0.006
    velocity_scale: float = 20.0
    identity_scale: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "box_size", tuple(self.box_size))
        unknown = set(self.classes) - set(CLASSES)
        if unknown:
            raise ConfigError(f"unknown classes {sorted(unknown)}")
        if len(set(self.classes)) < 2:
            raise ConfigError("need at least two distinct classes")
        if self.frames < 2:
            raise ConfigError("need at least two frames")
        lo, hi = self.objects
        if not 2 <= lo <= hi <= 4:
            raise ConfigError("objects per scene must lie in 2..4")
        if self.identity_dim + 8 != self.feat_dim:
            raise ConfigError("feat_dim must equal identity_dim + 8 (velocity + box)")
        if self.noise < 0 or self.jitter < 0:
            raise ConfigError("noise and jitter must be non-negative")

    @property
    def num_classes(self):
        return len(self.classes)

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


@dataclass
class Scene:
    """Ground-truth geometry: ``tracks`` is (objects, T, 4) boxes; the first
    two objects are the actors."""

    label: int
    kind: str
    tracks: np.ndarray
    sizes: np.ndarray
    extras: dict = field(default_factory=dict)


# geometry -------------------------------------------------------------------

def _boxes(centers, size):
    half = np.asarray(size) / 2.0
    return np.concatenate([centers - half, centers + half], axis=-1)


def _fits(boxes):
    return bool(np.all(boxes >= 0.0) and np.all(boxes <= 1.0))


def _unit(rng):
    theta = rng.uniform(0.0, 2.0 * np.pi)
    return np.array([np.cos(theta), np.sin(theta)])


def _actor_centers(kind, rng, steps):
    """Centers (2, T, 2) of the two actors for one kinematic program."""
    s = np.linspace(0.0, 1.0, steps)[:, None]
    u = _unit(rng)
    mid = rng.uniform(0.3, 0.7, size=2)
    if kind in ("approach", "depart"):
        far = rng.uniform(0.4, 0.55)
        near = rng.uniform(0.0, 0.04)
        gap = far + (near - far) * s if kind == "approach" else near + (far - near) * s
        a = mid - 0.5 * gap * u
        b = mid + 0.5 * gap * u
    elif kind == "swap":
        gap = rng.uniform(0.35, 0.5)
        side = 0.5 * gap * u
        a = (mid - side) + 2.0 * side * s
        b = (mid + side) - 2.0 * side * s
    elif kind == "chase":
        offset = rng.uniform(0.18, 0.26) * u
        travel = rng.uniform(0.3, 0.4) * u
        lead = mid - 0.5 * travel + travel * s + 0.5 * offset
        a = lead
        b = lead - offset
    elif kind == "static":
        a = np.repeat(rng.uniform(0.15, 0.85, size=(1, 2)), steps, axis=0)
        b = np.repeat(rng.uniform(0.15, 0.85, size=(1, 2)), steps, axis=0)
    else:
        raise ConfigError(f"unknown class {kind!r}")
    return np.stack([a, b])


def make_scene(spec, label, rng, attempts=200):
    kind = spec.classes[label]
    steps = spec.frames
    lo, hi = spec.box_size
    n_obj = int(rng.integers(spec.objects[0], spec.objects[1] + 1))
    for _ in range(attempts):
        sizes = rng.uniform(lo, hi, size=(n_obj, 2))
        centers = np.empty((n_obj, steps, 2))
        centers[:2] = _actor_centers(kind, rng, steps)
        for k in range(2, n_obj):
            centers[k] = rng.uniform(0.15, 0.85, size=2)
        centers = centers + rng.uniform(-spec.jitter, spec.jitter, size=centers.shape)
        tracks = np.stack([_boxes(centers[k], sizes[k]) for k in range(n_obj)])
        if _fits(tracks):
            return Scene(label, kind, tracks, sizes)
    raise GenerationError(f"could not place a {kind!r} scene inside the canvas")


def classify_tracks(tracks):
    """Recover the class name from the two actor tracks, shape (>=2, T, 4)."""
    centers = 0.5 * (tracks[:2, :, :2] + tracks[:2, :, 2:])
    a, b = centers[0], centers[1]
    disp = max(np.linalg.norm(a[-1] - a[0]), np.linalg.norm(b[-1] - b[0]))
    if disp < STILL:
        return "static"
    off0, off1 = b[0] - a[0], b[-1] - a[-1]
    if np.linalg.norm(off1 - off0) < RIGID:
        return "chase"
    if np.linalg.norm(a[-1] - b[0]) < SWAPPED and np.linalg.norm(b[-1] - a[0]) < SWAPPED:
        return "swap"
    d0, d1 = np.linalg.norm(off0), np.linalg.norm(off1)
    if d1 < d0 - CONVERGE:
        return "approach"
    if d1 > d0 + CONVERGE:
        return "depart"
    return "ambiguous"


def pair_iou(tracks, t):
    a, b = tracks[0, t], tracks[1, t]
    iw = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


# rendering ------------------------------------------------------------------

def _features(spec, identity, box, velocity):
    return np.concatenate([identity, spec.velocity_scale * velocity, 2.0 * box - 1.0])


def render_stream(scene, spec, rng):
    """Turn a scene into a labeled proposal stream."""
    n_obj, steps = scene.tracks.shape[:2]
    identities = spec.identity_scale * rng.standard_normal((n_obj, spec.identity_dim))
    n_dis = spec.distractors if spec.distractors is not None else max(spec.num_proposals - n_obj, 0)
    frames = []
    for t in range(steps):
        scores, boxes, feats = [], [], []
        for k in range(n_obj):
            box = scene.tracks[k, t]
            vel = box - scene.tracks[k, t - 1] if t > 0 else np.zeros(4)
            scores.append(rng.uniform(0.85, 1.0) if k < 2 else rng.uniform(0.6, 0.85))
            boxes.append(box)
            feats.append(_features(spec, identities[k], box, vel))
        for _ in range(n_dis):
            size = rng.uniform(*spec.box_size, size=2)
            corner = rng.uniform(0.0, 1.0 - size)
            box = np.concatenate([corner, corner + size])
            scores.append(rng.uniform(0.05, 0.5))
            boxes.append(box)
            feats.append(_features(spec, spec.identity_scale * rng.standard_normal(spec.identity_dim),
                                   box, np.zeros(4)))
        feats = np.array(feats)
        if spec.noise > 0:
            feats = feats + rng.normal(0.0, spec.noise, size=feats.shape)
        order = rng.permutation(len(scores))
        frames.append(FrameProposals(t + 1, np.array(scores)[order], np.array(boxes)[order],
                                     feats[order]))
    return ProposalStream(spec.feat_dim, spec.num_classes, scene.label, None, frames)


def balanced_labels(count, num_classes, rng):
    labels = np.arange(count) % num_classes
    return rng.permutation(labels)


def generate_interaction_dataset(spec, seed=0, counts=None, with_scenes=False):
    """Generate ``{"train": [...], "test": [...]}`` proposal streams.

    Labels are balanced exactly (counts differ by at most one across classes)
    and everything is a deterministic function of ``seed``.
    """
    counts = counts or {"train": 2000, "test": 500}
    out, scenes = {}, {}
    for i, (split, count) in enumerate(sorted(counts.items())):
        rng = np.random.default_rng([seed, i])
        labels = balanced_labels(count, spec.num_classes, rng)
        out[split], scenes[split] = [], []
        for label in labels:
            scene = make_scene(spec, int(label), rng)
            scenes[split].append(scene)
            out[split].append(render_stream(scene, spec, rng))
    return (out, scenes) if with_scenes else out
