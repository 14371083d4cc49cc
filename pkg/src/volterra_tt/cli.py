"""Command-line interface.

Subcommands: ``generate`` (synthetic data to CSV), ``train`` (fixed
structure), ``grid`` (grid search), ``auto`` (automatic structure
selection), ``predict`` (model + inputs to predictions) and ``eval``
(predictions vs. reference to metrics).  Every run writes a JSON record
containing a hash of its configuration so reruns can be matched to their
setup.  Exit codes: 0 success, 1 usage/input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .als import AlsConfig, NumericalError, als_run, predict
from .dataio import (
    DataFormatError,
    ResultRecord,
    config_hash,
    load_csv,
    load_model,
    save_csv,
    save_model,
)
from .metrics import rmse, vaf
from .model import TimeSeriesData
from .selection import (
    SelectionConfig,
    SelectionTrace,
    auto_select,
    deterministic_init,
    grid_search,
    grow_to,
    random_init,
)
from .synth import generate_synthetic
from .tt import SizeLimitError, tt_norm


def _parse_range(text: str) -> tuple[int, int]:
    """Accept ``"7"`` or ``"2:10"`` (inclusive)."""
    if ":" in text:
        lo, hi = text.split(":", 1)
        return int(lo), int(hi)
    value = int(text)
    return value, value


def _write_trace_csv(path: Path, trace: SelectionTrace) -> None:
    import csv as _csv

    with path.open("w", newline="") as handle:
        writer = _csv.writer(handle)
        writer.writerow(
            [
                "order",
                "memory",
                "sweeps",
                "rmse_train",
                "rmse_val",
                "vaf_residual",
                "weight_norm",
                "wall_time_ms",
            ]
        )
        for rec in trace.records:
            writer.writerow(
                [
                    rec.order,
                    rec.memory,
                    rec.sweeps_used,
                    f"{rec.rmse_train:.17g}",
                    f"{rec.rmse_val:.17g}",
                    f"{rec.vaf_residual:.17g}",
                    f"{rec.weight_norm:.17g}",
                    f"{rec.wall_time_s * 1000.0:.3f}",
                ]
            )


def _selection_config(args, order_range, memory_range) -> SelectionConfig:
    return SelectionConfig(
        order_range=order_range,
        memory_range=memory_range,
        rank=args.rank,
        sweeps=args.sweeps,
        init="deterministic" if args.init == "svd" else "random",
        seed=args.seed,
        accept_threshold=getattr(args, "accept_threshold", 1e-4),
        memory_step=getattr(args, "m_delta", 1),
    )


def _cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, val, test, _ = generate_synthetic(
        order=args.order,
        memory=args.memory,
        seed=args.seed,
        n_total=args.samples,
        noise_snr_db=args.snr,
    )
    save_csv(out / "train.csv", train)
    save_csv(out / "val.csv", val)
    save_csv(out / "test.csv", test)
    manifest = {
        "command": "generate",
        "order": args.order,
        "memory": args.memory,
        "seed": args.seed,
        "samples": args.samples,
        "snr_db": args.snr,
    }
    manifest["config_hash"] = config_hash(manifest)
    (out / "generate.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote {out}/train.csv ({train.n_samples}), val.csv "
          f"({val.n_samples}), test.csv ({test.n_samples})")
    return 0


def _train_fixed(train: TimeSeriesData, args) -> tuple:
    """Train one model at the requested structure; returns (model, trace|None)."""
    cfg = _selection_config(args, (2, max(2, args.order)), (args.memory, args.memory))
    if args.init == "svd":
        if args.order < 2:
            raise ValueError("deterministic initialisation starts at order 2")
        model = deterministic_init(train, args.memory, args.rank, cfg.als)
        model, trace = grow_to(model, train, args.order, cfg)
        return model, trace
    model = random_init(
        args.memory,
        args.rank,
        args.order,
        args.seed,
        n_inputs=train.n_inputs,
        n_outputs=train.n_outputs,
    )
    # for random starts a "sweep" is one pass over all cores
    model, _ = als_run(model, train, args.sweeps * args.order, cfg.als)
    return model, None


def _cmd_train(args) -> int:
    t0 = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train = load_csv(args.train, role="train")
    model, _ = _train_fixed(train, args)
    skip = args.transient_skip if args.transient_skip is not None else model.memory - 1

    metrics = {
        "rmse_train": rmse(train.outputs, predict(model, train), skip),
        "vaf_train": vaf(train.outputs, predict(model, train), skip),
    }
    for name in ("val", "test"):
        path = getattr(args, name)
        if path:
            data = load_csv(path, role=name)
            metrics[f"rmse_{name}"] = rmse(data.outputs, predict(model, data), skip)
            metrics[f"vaf_{name}"] = vaf(data.outputs, predict(model, data), skip)

    save_model(out / "model.vtn", model)
    payload = {
        "command": "train",
        "order": args.order,
        "memory": args.memory,
        "rank": args.rank,
        "sweeps": args.sweeps,
        "init": args.init,
        "seed": args.seed,
        "transient_skip": skip,
    }
    record = ResultRecord(
        structure={
            "order": args.order,
            "memory": args.memory,
            "rank": args.rank,
            "sweeps": args.sweeps,
        },
        metrics=metrics,
        weight_norm=tt_norm(model.tt),
        wall_time_ms=(time.perf_counter() - t0) * 1000.0,
        seed=args.seed,
        config_hash=config_hash(payload),
    )
    (out / "result.json").write_text(record.to_json())
    print(record.to_json())
    return 0


def _cmd_grid(args, auto: bool = False) -> int:
    t0 = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train = load_csv(args.train, role="train")
    val = load_csv(args.val, role="validation")
    cfg = _selection_config(args, _parse_range(args.order), _parse_range(args.memory))
    trace = auto_select(train, val, cfg) if auto else grid_search(train, val, cfg)
    _write_trace_csv(out / "trace.csv", trace)

    order, memory, sweeps = trace.chosen
    chosen_rec = trace.records[-1] if auto else trace.record_for(order, memory)
    chosen = {
        "order": order,
        "memory": memory,
        "sweeps": sweeps,
        "rank": cfg.rank,
        "rmse_val": chosen_rec.rmse_val,
    }
    (out / "chosen.json").write_text(json.dumps(chosen, indent=2, sort_keys=True))
    payload = {
        "command": "auto" if auto else "grid",
        "order": args.order,
        "memory": args.memory,
        "rank": args.rank,
        "sweeps": args.sweeps,
        "init": args.init,
        "seed": args.seed,
        "accept_threshold": getattr(args, "accept_threshold", None),
        "m_delta": getattr(args, "m_delta", None),
    }
    record = ResultRecord(
        structure=chosen,
        metrics={
            "rmse_train": chosen_rec.rmse_train,
            "rmse_val": chosen_rec.rmse_val,
        },
        weight_norm=chosen_rec.weight_norm,
        wall_time_ms=(time.perf_counter() - t0) * 1000.0,
        seed=args.seed,
        config_hash=config_hash(payload),
    )
    (out / "result.json").write_text(record.to_json())
    print(json.dumps(chosen, sort_keys=True))
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    data = load_csv(args.data, role="test")
    outputs = predict(model, data)
    save_csv(Path(args.out), TimeSeriesData(inputs=data.inputs, outputs=outputs))
    manifest = {"command": "predict", "model": str(args.model), "data": str(args.data)}
    manifest["config_hash"] = config_hash(manifest)
    Path(str(args.out) + ".json").write_text(json.dumps(manifest, indent=2))
    return 0


def _cmd_eval(args) -> int:
    t0 = time.perf_counter()
    pred = load_csv(args.pred)
    ref = load_csv(args.ref)
    skip = args.transient_skip or 0
    metrics = {
        "rmse": rmse(ref.outputs, pred.outputs, skip),
        "vaf": vaf(ref.outputs, pred.outputs, skip),
    }
    payload = {
        "command": "eval",
        "pred": str(args.pred),
        "ref": str(args.ref),
        "transient_skip": skip,
    }
    record = ResultRecord(
        structure={},
        metrics=metrics,
        weight_norm=None,
        wall_time_ms=(time.perf_counter() - t0) * 1000.0,
        seed=None,
        config_hash=config_hash(payload),
    )
    text = record.to_json()
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def _add_structure_flags(parser, ranged: bool) -> None:
    kind = str if ranged else int
    hint = " (single value or LO:HI)" if ranged else ""
    parser.add_argument("--order", required=True, type=kind, help=f"model order{hint}")
    parser.add_argument("--memory", required=True, type=kind, help=f"memory length{hint}")
    parser.add_argument("--rank", type=int, default=3, help="tensor-train rank")
    parser.add_argument(
        "--sweeps", type=int, default=3, help="core updates between increases"
    )
    parser.add_argument(
        "--init", choices=("svd", "random"), default="svd", help="initialisation"
    )
    parser.add_argument("--seed", type=int, default=0, help="random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volterra-tt",
        description="Volterra system identification in tensor-train form",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic data set to CSV")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--memory", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=4500)
    p.add_argument("--snr", type=float, default=None, help="output SNR in dB")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train one model at a fixed structure")
    _add_structure_flags(p, ranged=False)
    p.add_argument("--train", required=True, help="training CSV")
    p.add_argument("--val", default=None, help="validation CSV")
    p.add_argument("--test", default=None, help="test CSV")
    p.add_argument("--transient-skip", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("grid", help="grid search over order and memory")
    _add_structure_flags(p, ranged=True)
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=lambda a: _cmd_grid(a, auto=False))

    p = sub.add_parser("auto", help="automatic structure selection")
    _add_structure_flags(p, ranged=True)
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--m-delta", dest="m_delta", type=int, default=1)
    p.add_argument(
        "--accept-threshold", dest="accept_threshold", type=float, default=1e-4
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=lambda a: _cmd_grid(a, auto=True))

    p = sub.add_parser("predict", help="run a stored model on an input CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="compare predictions against a reference")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--transient-skip", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, SizeLimitError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
