"""``hiddengraph`` command line: gen-data, train, eval, stream, inspect."""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import inspect_checkpoint, load_model, save_checkpoint
from .engine import open_engine
from .errors import CheckpointError, ConfigError, ContractError, ParseError
from .graph import GraphVariantConfig
from .model import GraphModel
from .proposals import iter_stream_records, read_dataset, write_dataset
from .training.loop import TrainConfig, evaluate, train_model, write_records
from .training.synthetic import GenerationError, SyntheticTaskSpec, generate_interaction_dataset

PROFILES = {
    "default": {"num_proposals": 20, "num_nodes": 5},
    "activitynet": {"num_proposals": 40, "num_nodes": 10},
}

_MODEL_KEYS = set(GraphVariantConfig.__dataclass_fields__)
_TRAIN_KEYS = set(TrainConfig.__dataclass_fields__)


def _read_json_object(path, what):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{what} {path} must hold a JSON object")
    return data


def _emit(obj, out):
    out.write(json.dumps(obj, separators=(",", ":")) + "\n")
    out.flush()


# subcommands ------------------------------------------------------------------

def cmd_gen_data(args, out):
    spec_data = _read_json_object(args.spec, "spec") if args.spec else {}
    spec = SyntheticTaskSpec.from_dict(spec_data)
    splits = generate_interaction_dataset(spec, args.seed, {"train": args.train, "test": args.test})
    meta = {"feat_dim": spec.feat_dim, "num_classes": spec.num_classes,
            "classes": list(spec.classes), "seed": args.seed, "spec": spec.to_dict()}
    write_dataset(args.out, splits, meta)
    _emit({"out": str(args.out), "train": args.train, "test": args.test}, out)
    return 0


def _model_config(args, meta):
    file_cfg = _read_json_object(args.config, "config") if args.config else {}
    values = {"feat_dim": meta.get("feat_dim"), "num_classes": meta.get("num_classes")}
    values.update(PROFILES[args.profile])
    values.update({k: v for k, v in file_cfg.items() if k in _MODEL_KEYS})
    flags = {"variant": args.variant, "num_nodes": args.nodes, "num_proposals": args.proposals}
    values.update({k: v for k, v in flags.items() if v is not None})
    values = {k: v for k, v in values.items() if v is not None}
    train_values = {k: v for k, v in file_cfg.items() if k in _TRAIN_KEYS}
    for key in ("lr", "epochs", "batch_size", "seed", "clip_norm", "supervision"):
        flag = getattr(args, key)
        if flag is not None:
            train_values[key] = flag
    if args.static:
        train_values["static"] = True
    return GraphVariantConfig(**values), TrainConfig(**train_values)


def _load_split(path, split):
    splits, meta = read_dataset(path, splits=(split,))
    streams = splits[split]
    if not streams:
        raise ContractError(f"dataset {path} has no {split!r} streams")
    meta.setdefault("feat_dim", streams[0].feat_dim)
    meta.setdefault("num_classes", streams[0].num_classes)
    return streams, meta


def cmd_train(args, out):
    train, meta = _load_split(args.data, "train")
    model_cfg, train_cfg = _model_config(args, meta)
    model = None
    if args.init:
        model = load_model(args.init, expect_variant=model_cfg.variant)
        model_cfg = model.config

    def report(epoch, loss, _model):
        _emit({"split": "train", "epoch": epoch + 1, "metric": "loss", "value": loss}, out)

    model, _ = train_model(train, train_cfg, model=model, model_config=model_cfg,
                           callback=report)
    save_checkpoint(model, args.out)
    _emit({"checkpoint": str(args.out), "variant": model.config.variant,
           "static": model.static, "parameters": model.num_parameters()}, out)
    return 0


def cmd_eval(args, out):
    model = load_model(args.model, expect_variant=args.variant)
    streams, _ = _load_split(args.data, args.split)
    static = args.static if args.static is not None else model.static
    metrics = evaluate(model, streams, static=static, workers=args.workers)
    if args.per_step:
        out.write("step\ttop1\n")
        for t, acc in enumerate(metrics.per_step_top1, start=1):
            out.write(f"{t}\t{acc:.4f}\n")
        out.write(f"final-top5\t{metrics.top5:.4f}\n")
        out.flush()
    else:
        write_records(metrics.records(args.split), out)
    return 0


def cmd_stream(args, out):
    model = load_model(args.model, expect_variant=args.variant)
    source = sys.stdin if args.input == "-" else open(args.input, encoding="utf-8")
    try:
        records = iter_stream_records(source)
        header = next(records)
        if header.feat_dim != model.config.feat_dim:
            raise ContractError(
                f"stream feature dim {header.feat_dim} != model {model.config.feat_dim}")
        engine = None
        for frame in records:
            if engine is None:
                engine = open_engine(model, frame)
                logits = engine.outputs[-1].data
            else:
                logits = engine.step(frame).data
            alpha = engine.trace.attention[-1]
            _emit({"t": frame.index, "step": engine.steps, "prediction": int(np.argmax(logits)),
                   "logits": [float(v) for v in logits],
                   "attention": None if alpha is None else [float(v) for v in alpha]}, out)
    finally:
        if source is not sys.stdin:
            source.close()
    return 0


def cmd_inspect(args, out):
    out.write(json.dumps(inspect_checkpoint(args.model), indent=2, sort_keys=True) + "\n")
    return 0


# parser -------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="hiddengraph", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic interaction dataset")
    p.add_argument("--spec", help="JSON file with generator settings")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", type=int, default=2000)
    p.add_argument("--test", type=int, default=500)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=("visual", "location", "baseline"))
    p.add_argument("--profile", choices=sorted(PROFILES), default="default")
    p.add_argument("--nodes", type=int, help="hidden nodes M (default 5)")
    p.add_argument("--proposals", type=int, help="proposals per frame N (default 20)")
    p.add_argument("--config", help="JSON file with model and training settings")
    p.add_argument("--init", help="checkpoint to continue from")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--clip-norm", type=float)
    p.add_argument("--supervision", choices=("mean", "final"))
    p.add_argument("--static", action="store_true", help="train the fused static head")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a dataset split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--variant", choices=("visual", "location", "baseline"),
                   help="fail unless the checkpoint holds this variant")
    p.add_argument("--per-step", action="store_true", help="print a per-step accuracy table")
    p.add_argument("--static", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stream", help="emit one prediction per frame of a proposal stream")
    p.add_argument("--model", required=True)
    p.add_argument("--input", default="-", help="stream file, or - for stdin")
    p.add_argument("--variant", choices=("visual", "location", "baseline"))
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("inspect", help="print a checkpoint header")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args, out)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        sys.stdout = open(os.devnull, "w")
        return 0
    except (CheckpointError, ConfigError, ContractError, ParseError, GenerationError,
            OSError) as exc:
        print(f"hiddengraph {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
