"""Command-line harness: ``qstbench <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from qstbench import dataio, experiments
from qstbench.errors import CorruptCheckpointError, DimensionError, ParseError, UnsupportedFormatError
from qstbench.measurement import build_projectors
from qstbench.mle import MleConfig, reconstruct_mle
from qstbench.nn.data import PROVENANCE_GRAMMAR, Provenance, generate_dataset
from qstbench.nn.model import NetworkConfig, init_model, predict_density, train
from qstbench.qstate import fidelity

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _qubits(text: str) -> int:
    try:
        d = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid qubit count {text!r}")
    if d < 1:
        raise argparse.ArgumentTypeError("qubit count must be >= 1")
    return d


def _qubit_range(text: str) -> list[int]:
    """``"1..3"``, ``"1,2"`` or ``"2"``."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split("..", 1))
            values = list(range(lo, hi + 1))
        else:
            values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid qubit range {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"invalid qubit range {text!r}")
    return sorted(set(values))


def _shots_list(text: str) -> list[int | None]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if item == "ideal":
            out.append(None)
            continue
        try:
            value = int(item)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid shots value {item!r}")
        if value < 1:
            raise argparse.ArgumentTypeError("shots must be >= 1")
        out.append(value)
    return out


def _provenance(text: str) -> Provenance:
    try:
        return Provenance.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid provenance {text!r}; grammar: {PROVENANCE_GRAMMAR}")


def _nonneg(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _mapping(items, what: str) -> dict[str, str]:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key or not value:
            raise UsageError(f"--{what} expects KEY=PATH, got {item!r}")
        out[key] = value
    return out


def _print_seed(seed: int) -> None:
    print(f"seed: {seed}")


def _add_hyper(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--dropout", type=float, dest="dropout_rate")
    p.add_argument("--batch-size", type=_positive)
    p.add_argument("--conv1", type=_positive, dest="conv1_filters")
    p.add_argument("--conv2", type=_positive, dest="conv2_filters")
    p.add_argument("--dense1", type=_positive, dest="dense1_units")
    p.add_argument("--dense2", type=_positive, dest="dense2_units")
    p.add_argument("--kernel", type=_positive, dest="kernel_size")
    p.add_argument("--pool", type=_positive, dest="pool_size")


_HYPER = ("learning_rate", "dropout_rate", "batch_size", "conv1_filters", "conv2_filters",
          "dense1_units", "dense2_units", "kernel_size", "pool_size")


def _hyper(args) -> dict:
    return {k: getattr(args, k) for k in _HYPER if getattr(args, k, None) is not None}


def _epoch_printer(entry):
    print(f"{entry['epoch']},{entry['loss']:.6g},{entry['val_fidelity']:.6f}", flush=True)


def cmd_gen_data(args) -> int:
    _print_seed(args.seed)
    dataset = generate_dataset(args.count, args.qubits, args.provenance, args.seed)
    dataio.save_dataset(dataset, args.out, include_rho=not args.no_rho)
    print(f"wrote {len(dataset)} samples (d={args.qubits}, provenance={args.provenance}) to {args.out}")
    return 0


def cmd_train(args) -> int:
    _print_seed(args.seed)
    train_set = dataio.load_dataset(args.train)
    val_set = dataio.load_dataset(args.val)
    if train_set.d != val_set.d:
        raise DimensionError(f"training data has d={train_set.d} but validation data has d={val_set.d}")
    config = NetworkConfig.default(train_set.d, epochs=args.epochs, seed=args.seed, **_hyper(args))
    print("epoch,loss,val_fidelity")
    if config.epochs == 0:
        model = init_model(config)
    else:
        model = train(train_set, val_set, config, on_epoch=_epoch_printer)
    dataio.save_model(model, args.out)
    print(f"wrote checkpoint to {args.out}")
    return 0


def cmd_bench_scaling(args) -> int:
    _print_seed(args.seed)
    checkpoints = _mapping(args.checkpoint, "checkpoint")
    models = {}
    train_times = {}
    if args.train_inline:
        for d in args.qubits:
            print(f"training d={d} inline", flush=True)
            model = experiments.train_inline(d, "ideal", args.train_count, args.val_count,
                                             args.seed, epochs=args.epochs, **_hyper(args))
            models[d] = model
            secs = [h["seconds"] for h in model.history]
            train_times[d] = float(np.mean(secs)) if secs else 0.0
    else:
        missing = [d for d in args.qubits if str(d) not in checkpoints]
        if missing:
            raise UsageError(
                "missing checkpoint for d=" + ",".join(map(str, missing))
                + " (pass --checkpoint D=PATH or --train-inline)"
            )
        for d in args.qubits:
            model = dataio.load_model(checkpoints[str(d)])
            dataio.check_model_dimension(model, d)
            models[d] = model

    table = experiments.run_scaling_benchmark(
        models, scenarios=args.scenarios.split(","), states=args.states, seed=args.seed,
        noisy_shots=args.noisy_shots, depol=args.depol, timing=not args.no_timing,
    )
    dataio.write_results(table, args.out)
    summary = experiments.summarize(table)
    for entry in summary:
        print(f"d={entry['d']} shots={entry['shots']} p={entry['noise_p']}: "
              f"mean fidelity {entry['mean_fidelity']:.4f} +- {entry['std_fidelity']:.4f}")
    for d, secs in train_times.items():
        print(f"d={d}: {secs:.3f} s per training epoch")
    summary_path = args.summary or str(Path(args.out).with_suffix(".json"))
    dataio.write_json({
        "experiment": "bench-scaling", "seed": args.seed, "conditions": summary,
        "train_seconds_per_epoch": {str(d): (0.0 if args.no_timing else s) for d, s in train_times.items()},
    }, summary_path)
    print(f"wrote {len(table.rows)} rows to {args.out}")
    return 0


def cmd_bench_shots(args) -> int:
    _print_seed(args.seed)
    d = args.qubits
    checkpoints = _mapping(args.checkpoint, "checkpoint")
    methods = {}
    for name in args.methods.split(","):
        name = name.strip()
        try:
            provenance = experiments.parse_method(name)
        except ValueError as exc:
            raise UsageError(str(exc))
        if provenance is None:
            methods[name] = experiments.mle_reconstructor(d, args.seed, MleConfig(restarts=args.mle_restarts))
        elif name in checkpoints:
            model = dataio.load_model(checkpoints[name])
            dataio.check_model_dimension(model, d)
            methods[name] = experiments.nn_reconstructor(model)
        elif args.train_inline:
            print(f"training {name} inline", flush=True)
            model = experiments.train_inline(d, provenance, args.train_count, args.val_count,
                                             args.seed, epochs=args.epochs, **_hyper(args))
            methods[name] = experiments.nn_reconstructor(model)
        else:
            raise UsageError(f"method {name} unavailable: pass --checkpoint {name}=PATH or --train-inline")

    table, noise_rows = experiments.run_shots_benchmark(
        d, methods, shots_list=args.shots, states=args.states, seed=args.seed,
        timing=not args.no_timing,
    )
    dataio.write_results(table, args.out)
    noise_path = args.noise_out or str(Path(args.out).with_name(Path(args.out).stem + "_sqdiff.csv"))
    dataio.write_csv(dataio.NOISE_HEADER, noise_rows, noise_path)
    summary = experiments.summarize(table)
    for entry in summary:
        print(f"{entry['method']} shots={entry['shots']}: mean fidelity {entry['mean_fidelity']:.4f}"
              f" +- {entry['std_fidelity']:.4f}")
    for shots in args.shots:
        vals = [r[4] for r in noise_rows if r[1] == shots]
        print(f"shots={'ideal' if shots is None else shots}: mean squared difference {np.mean(vals):.6g}")
    summary_path = args.summary or str(Path(args.out).with_suffix(".json"))
    dataio.write_json({"experiment": "bench-shots", "seed": args.seed, "conditions": summary}, summary_path)
    print(f"wrote {len(table.rows)} rows to {args.out} and squared differences to {noise_path}")
    return 0


def _print_matrix(label: str, matrix) -> None:
    print(label)
    for row in matrix:
        print("  " + " ".join(f"{v: .6f}" for v in row))


def cmd_reconstruct(args) -> int:
    _print_seed(args.seed)
    record = dataio.load_record(args.record)
    if args.method == "mle":
        result = reconstruct_mle(record, build_projectors(record.d), MleConfig(restarts=args.mle_restarts),
                                 np.random.default_rng(args.seed))
        rho = result.rho
        print(f"mle: nll={result.nll:.6g} iterations={result.iterations} converged={result.converged}")
    else:
        if not args.model:
            raise UsageError("--method nn requires --model PATH")
        model = dataio.load_model(args.model)
        rho = predict_density(model, record)
    _print_matrix("real part:", rho.real)
    _print_matrix("imaginary part:", rho.imag)
    if args.target:
        target = dataio.load_density(args.target)
        print(f"fidelity: {fidelity(target, rho):.8f}")
    if args.out:
        dataio.save_density(rho, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qstbench", description="Simulated quantum state tomography benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="simulate a training or test dataset")
    p.add_argument("--qubits", type=_qubits, required=True)
    p.add_argument("--count", type=_nonneg, required=True)
    p.add_argument("--provenance", type=_provenance, default=Provenance(), help=PROVENANCE_GRAMMAR)
    p.add_argument("--seed", type=_nonneg, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.add_argument("--no-rho", action="store_true", help="omit generating density matrices")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the reconstruction network")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--epochs", type=_nonneg, default=60)
    p.add_argument("--seed", type=_nonneg, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    _add_hyper(p)
    p.set_defaults(func=cmd_train)

    def add_bench_common(p):
        p.add_argument("--states", type=_positive, default=experiments.DEFAULT_STATES)
        p.add_argument("--seed", type=_nonneg, default=DEFAULT_SEED)
        p.add_argument("--checkpoint", action="append", metavar="KEY=PATH")
        p.add_argument("--train-inline", action="store_true")
        p.add_argument("--train-count", type=_positive, default=4000)
        p.add_argument("--val-count", type=_positive, default=200)
        p.add_argument("--epochs", type=_nonneg, default=None)
        p.add_argument("--out", required=True)
        p.add_argument("--summary", help="summary JSON path (default: OUT with .json)")
        p.add_argument("--no-timing", action="store_true", help="write 0 for wall times")
        _add_hyper(p)

    p = sub.add_parser("bench-scaling", help="NN fidelity versus qubit count")
    p.add_argument("--qubits", type=_qubit_range, default=[1, 2, 3])
    p.add_argument("--scenarios", default="ideal,depol")
    p.add_argument("--noisy-shots", type=_positive, default=experiments.NOISY_SIMULATOR_SHOTS)
    p.add_argument("--depol", type=float, default=None, help="override the depolarizing weight")
    add_bench_common(p)
    p.set_defaults(func=cmd_bench_scaling)

    p = sub.add_parser("bench-shots", help="fidelity versus shots for NN and MLE")
    p.add_argument("--qubits", type=_qubits, default=2)
    p.add_argument("--shots", type=_shots_list, default=list(experiments.DEFAULT_SHOTS))
    p.add_argument("--methods", default="nn-ideal,nn-shots:15,mle")
    p.add_argument("--mle-restarts", type=_positive, default=3)
    p.add_argument("--noise-out", help="squared-difference CSV (default: OUT_sqdiff.csv)")
    add_bench_common(p)
    p.set_defaults(func=cmd_bench_shots)

    p = sub.add_parser("reconstruct", help="reconstruct one measurement record")
    p.add_argument("--record", required=True)
    p.add_argument("--method", choices=("mle", "nn"), default="mle")
    p.add_argument("--model")
    p.add_argument("--target")
    p.add_argument("--mle-restarts", type=_positive, default=3)
    p.add_argument("--seed", type=_nonneg, default=DEFAULT_SEED)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reconstruct)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qstbench: error: {exc}", file=sys.stderr)
        return 1
    except (DimensionError, ParseError, UnsupportedFormatError, CorruptCheckpointError,
            ValueError, OSError, FloatingPointError, RuntimeError) as exc:
        print(f"qstbench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
