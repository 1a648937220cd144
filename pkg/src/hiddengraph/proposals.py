"""Region-proposal streams: data types, text format, and selection helpers.

A stream file is UTF-8 JSON Lines. The first record is the header::

    {"feat_dim": 16, "num_classes": 5, "label": 2, "global_feat": [...]}

(``label`` and ``global_feat`` optional). Each further record is one frame,
in temporal order::

    {"t": 1, "proposals": [{"score": 0.9, "box": [x1, y1, x2, y2], "feat": [...]}, ...]}

Boxes are normalized to [0, 1]. Floats are written with ``repr`` so a
parse/serialize round trip is exact.

A dataset is a directory holding ``manifest.jsonl``: a header record followed
by one ``{"path": ..., "split": "train" | "test"}`` record per stream.
"""
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, ParseError

MANIFEST = "manifest.jsonl"


@dataclass(frozen=True)
class RegionProposal:
    score: float
    box: tuple
    feature: np.ndarray


@dataclass
class FrameProposals:
    """Proposals of one frame, stored column-wise.

    ``scores`` is (N,), ``boxes`` (N, 4) as x1, y1, x2, y2, ``features`` (N, D).
    """

    index: int
    scores: np.ndarray
    boxes: np.ndarray
    features: np.ndarray

    @classmethod
    def from_proposals(cls, index, proposals, feat_dim=None):
        proposals = list(proposals)
        d = feat_dim if feat_dim is not None else (len(proposals[0].feature) if proposals else 0)
        return cls(
            index,
            np.array([p.score for p in proposals], dtype=np.float64),
            np.array([p.box for p in proposals], dtype=np.float64).reshape(-1, 4),
            np.array([p.feature for p in proposals], dtype=np.float64).reshape(-1, d),
        )

    def __len__(self):
        return len(self.scores)

    @property
    def proposals(self):
        return [RegionProposal(float(s), tuple(float(v) for v in b), f)
                for s, b, f in zip(self.scores, self.boxes, self.features)]

    def take(self, order):
        order = np.asarray(order, dtype=np.intp)
        return FrameProposals(self.index, self.scores[order], self.boxes[order],
                              self.features[order])

    def __eq__(self, other):
        if not isinstance(other, FrameProposals):
            return NotImplemented
        return (self.index == other.index and np.array_equal(self.scores, other.scores)
                and np.array_equal(self.boxes, other.boxes)
                and np.array_equal(self.features, other.features))


@dataclass
class ProposalStream:
    feat_dim: int
    num_classes: int
    label: int | None = None
    global_feat: np.ndarray | None = None
    frames: list = field(default_factory=list)

    def __len__(self):
        return len(self.frames)

    def prefix(self, t):
        return ProposalStream(self.feat_dim, self.num_classes, self.label,
                              self.global_feat, self.frames[:t])

    def __eq__(self, other):
        if not isinstance(other, ProposalStream):
            return NotImplemented
        same_global = (self.global_feat is None and other.global_feat is None) or (
            self.global_feat is not None and other.global_feat is not None
            and np.array_equal(self.global_feat, other.global_feat))
        return (self.feat_dim == other.feat_dim and self.num_classes == other.num_classes
                and self.label == other.label and same_global and self.frames == other.frames)


# selection ------------------------------------------------------------------

def top_k_by_score(frame, k):
    """Keep the ``k`` highest-scored proposals, best first.

    Ties keep their original order. A frame with fewer than ``k`` proposals
    is padded by repeating its lowest-scored proposal.
    """
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    if len(frame) == 0:
        raise ContractError(f"frame {frame.index} has no proposals")
    order = np.argsort(-frame.scores, kind="stable")[:k]
    if len(order) < k:
        order = np.concatenate([order, np.full(k - len(order), order[-1])])
    return frame.take(order)


def max_pool_features(frame):
    """Elementwise maximum of the proposal features."""
    if len(frame) == 0:
        raise ContractError(f"frame {frame.index} has no proposals")
    return frame.features.max(axis=0)


# text format ----------------------------------------------------------------

def _dump(obj):
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _floats(values):
    return [float(v) for v in np.asarray(values).reshape(-1)]


def header_record(stream):
    rec = {"feat_dim": int(stream.feat_dim), "num_classes": int(stream.num_classes)}
    if stream.label is not None:
        rec["label"] = int(stream.label)
    if stream.global_feat is not None:
        rec["global_feat"] = _floats(stream.global_feat)
    return rec


def frame_record(frame):
    return {
        "t": int(frame.index),
        "proposals": [
            {"score": float(s), "box": _floats(b), "feat": _floats(f)}
            for s, b, f in zip(frame.scores, frame.boxes, frame.features)
        ],
    }


def serialize_stream(stream):
    """Canonical text form of ``stream`` (newline terminated)."""
    lines = [_dump(header_record(stream))]
    lines += [_dump(frame_record(f)) for f in stream.frames]
    return "\n".join(lines) + "\n"


def _load_json(line, lineno):
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
    if not isinstance(rec, dict):
        raise ParseError("record must be a JSON object", lineno)
    return rec


def _number_list(value, what, lineno, length=None):
    if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ParseError(f"{what} must be a list of numbers", lineno)
    if length is not None and len(value) != length:
        raise ParseError(f"{what} has length {len(value)}, expected {length}", lineno)
    arr = np.array(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{what} contains non-finite values", lineno)
    return arr


def _int_field(rec, key, lineno, required=True):
    value = rec.get(key)
    if value is None and not required:
        return None
    if not isinstance(value, int) or isinstance(value, bool):
        raise ParseError(f"header field {key!r} must be an integer", lineno)
    return value


def parse_header(line, lineno=1):
    rec = _load_json(line, lineno)
    feat_dim = _int_field(rec, "feat_dim", lineno)
    num_classes = _int_field(rec, "num_classes", lineno)
    if feat_dim < 1 or num_classes < 1:
        raise ParseError("feat_dim and num_classes must be positive", lineno)
    label = _int_field(rec, "label", lineno, required=False)
    if label is not None and not 0 <= label < num_classes:
        raise ParseError(f"label {label} outside [0, {num_classes})", lineno)
    global_feat = None
    if rec.get("global_feat") is not None:
        global_feat = _number_list(rec["global_feat"], "global_feat", lineno)
    return ProposalStream(feat_dim, num_classes, label, global_feat, [])


def parse_frame(line, lineno, feat_dim, previous_index=0):
    rec = _load_json(line, lineno)
    t = rec.get("t")
    if not isinstance(t, int) or isinstance(t, bool) or t < 1:
        raise ParseError("frame index 't' must be a positive integer", lineno)
    if t <= previous_index:
        raise ParseError(f"frame index {t} not after {previous_index}", lineno)
    props = rec.get("proposals")
    if not isinstance(props, list):
        raise ParseError("'proposals' must be a list", lineno)
    scores = np.empty(len(props))
    boxes = np.empty((len(props), 4))
    feats = np.empty((len(props), feat_dim))
    for i, p in enumerate(props):
        if not isinstance(p, dict):
            raise ParseError(f"proposal {i} must be an object", lineno)
        score = p.get("score")
        if not isinstance(score, (int, float)) or isinstance(score, bool) or not 0.0 <= score <= 1.0:
            raise ParseError(f"proposal {i}: score must be a number in [0, 1]", lineno)
        box = _number_list(p.get("box"), f"proposal {i} box", lineno, 4)
        if box.min() < 0.0 or box.max() > 1.0 or box[0] > box[2] or box[1] > box[3]:
            raise ParseError(f"proposal {i}: invalid box {box.tolist()}", lineno)
        scores[i] = score
        boxes[i] = box
        feats[i] = _number_list(p.get("feat"), f"proposal {i} feat", lineno, feat_dim)
    return FrameProposals(t, scores, boxes, feats)


def iter_stream_records(lines):
    """Yield the header, then each frame, reading ``lines`` lazily.

    Blank lines are skipped. Used by the incremental ``stream`` command.
    """
    header = None
    previous = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if header is None:
            header = parse_header(line, lineno)
            yield header
            continue
        frame = parse_frame(line, lineno, header.feat_dim, previous)
        previous = frame.index
        yield frame
    if header is None:
        raise ParseError("missing header record", 1)


def parse_proposal_stream(source):
    """Parse a stream from text, bytes, or a path."""
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, os.PathLike):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    records = iter_stream_records(text.splitlines())
    stream = next(records)
    stream.frames = list(records)
    return stream


def read_stream(path):
    return parse_proposal_stream(Path(path))


def write_stream(stream, path):
    Path(path).write_text(serialize_stream(stream), encoding="utf-8")


# datasets -------------------------------------------------------------------

def write_dataset(root, splits, meta=None):
    """Write ``{"train": [streams], "test": [streams]}`` under ``root``."""
    root = Path(root)
    records = [_dump({"format": "hiddengraph-dataset", "version": 1, **(meta or {})})]
    for split, streams in splits.items():
        (root / split).mkdir(parents=True, exist_ok=True)
        for i, stream in enumerate(streams):
            rel = f"{split}/{i:06d}.jsonl"
            write_stream(stream, root / rel)
            records.append(_dump({"path": rel, "split": split}))
    (root / MANIFEST).write_text("\n".join(records) + "\n", encoding="utf-8")


def read_manifest(root):
    root = Path(root)
    path = root / MANIFEST
    if not path.exists():
        raise ParseError(f"no {MANIFEST} in {root}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError("empty manifest", 1)
    meta = _load_json(lines[0], 1)
    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        rec = _load_json(line, lineno)
        if not isinstance(rec.get("path"), str) or rec.get("split") not in ("train", "test"):
            raise ParseError("manifest entry needs 'path' and split train|test", lineno)
        entries.append((rec["split"], rec["path"]))
    return meta, entries


def read_dataset(root, splits=("train", "test")):
    """Load streams grouped by split, plus the manifest header."""
    root = Path(root)
    meta, entries = read_manifest(root)
    out = {s: [] for s in splits}
    for split, rel in entries:
        if split in out:
            out[split].append(read_stream(root / rel))
    return out, meta
