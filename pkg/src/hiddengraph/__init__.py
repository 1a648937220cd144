"""Streaming hidden-graph models over per-frame region proposals.

A small set of nodes is carried from frame to frame, updated by message
passing from each frame's proposals and among themselves, and read out by
attention after every frame.
"""
from ._ext import BACKEND
from .checkpoint import load_checkpoint, load_model, save_checkpoint
from .engine import (PredictionTrace, StreamingEngine, baseline_forward, engine_init, engine_step,
                     open_engine, run_static, run_streaming)
from .errors import (CheckpointError, ChecksumError, ConfigError, ContractError, FormatError,
                     ManifestError, ParseError, VariantMismatchError)
from .graph import GraphVariantConfig, HiddenGraphState, init_hidden_graph
from .location import iou, location_cross_update, location_self_update
from .model import GraphModel, parameter_count
from .proposals import (FrameProposals, ProposalStream, RegionProposal, parse_proposal_stream,
                        read_dataset, serialize_stream, top_k_by_score, write_dataset)
from .readout import attend, classify, fuse, init_query
from .visual import visual_cross_update, visual_self_update

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CheckpointError", "ChecksumError", "ConfigError", "ContractError", "FormatError",
    "FrameProposals", "GraphModel", "GraphVariantConfig", "HiddenGraphState", "ManifestError",
    "ParseError", "PredictionTrace", "ProposalStream", "RegionProposal", "StreamingEngine",
    "VariantMismatchError", "attend", "baseline_forward", "classify", "engine_init",
    "engine_step", "fuse", "init_hidden_graph", "init_query", "iou", "load_checkpoint",
    "load_model", "location_cross_update", "location_self_update", "open_engine",
    "parameter_count", "parse_proposal_stream", "read_dataset", "run_static", "run_streaming",
    "save_checkpoint", "serialize_stream", "top_k_by_score", "visual_cross_update",
    "visual_self_update", "write_dataset",
]
