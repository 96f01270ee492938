"""Command-line entry point: ``dualqgan <command> [options]``.

Every command reads an optional ``--config`` JSON (TrainingConfig schema),
applies the flag overrides and writes its results into ``--out``.
Exit codes: 0 success, 2 configuration or input error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .circuit import to_qasm
from .data import load_csv, save_csv
from .errors import ConfigError, DualQGANError, NumericError
from .generator import DualGenerator
from .metrics import write_metrics_csv
from .noise import DEVICE_PRESETS, NoiseModel

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TrainingConfig JSON")
    p.add_argument("--seed", type=int, help="base seed (data seed for gen-data, init and shot seed otherwise)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--noise-depol", type=float, help="two-qubit depolarizing probability after every CX")
    p.add_argument("--noise-readout", type=float, help="symmetric readout flip probability on every qubit")
    p.add_argument("--device", choices=sorted(DEVICE_PRESETS), help="noise preset; overrides --noise-*")
    p.add_argument("--shots", type=int, help="shots per circuit; omit for exact probabilities")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dualqgan", description="Dual-PQC GAN simulator and training harness.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="write the synthetic calorimeter dataset")
    _common(p)

    p = sub.add_parser("train", help="train a generator and discriminator")
    _common(p)
    p.add_argument("--dataset", type=Path, help="dataset CSV (default: synthesize from config)")

    p = sub.add_parser("infer", help="repeated inference of a generator checkpoint")
    _common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--repetitions", type=int, default=20)
    p.add_argument("--dataset", type=Path)

    p = sub.add_parser("scan", help="noise scan over depolarizing and readout grids")
    _common(p)
    p.add_argument("--checkpoint", type=Path, help="scan inference of this checkpoint instead of training")
    p.add_argument("--lambdas", type=_floats, default=[0.0])
    p.add_argument("--readouts", type=_floats, default=[0.0])
    p.add_argument("--seeds", type=_ints, default=[0])
    p.add_argument("--train-under-noise", action="store_true")
    p.add_argument("--dataset", type=Path)

    p = sub.add_parser("export-qasm", help="write both PQCs as OpenQASM 2.0")
    _common(p)
    p.add_argument("--checkpoint", type=Path, help="bind angles from this checkpoint (default: all zero)")
    return parser


def _config(args) -> harness.TrainingConfig:
    cfg = harness.TrainingConfig.load(args.config) if args.config else harness.TrainingConfig()
    kw = {}
    if args.epochs is not None:
        kw["epochs"] = args.epochs
    if args.shots is not None:
        kw["shots"] = args.shots
    if args.seed is not None:
        if args.command == "gen-data":
            kw["seeds"] = replace(cfg.seeds, data=args.seed)
        else:
            kw["seeds"] = replace(cfg.seeds, init=args.seed, shots=args.seed)
    if args.device is not None:
        kw["noise"] = NoiseModel.from_device(args.device, cfg.n2)
    elif args.noise_depol is not None or args.noise_readout is not None:
        depol = cfg.noise.two_qubit_depol if args.noise_depol is None else args.noise_depol
        if args.noise_readout is None:
            kw["noise"] = NoiseModel(depol, cfg.noise.readout)
        else:
            kw["noise"] = NoiseModel.uniform(depol, args.noise_readout, cfg.n2)
    if not kw:
        return cfg
    try:
        return replace(cfg, **kw)
    except DualQGANError as exc:
        raise ConfigError(str(exc)) from exc


def _dataset(args, cfg: harness.TrainingConfig, pixels: int | None = None):
    if getattr(args, "dataset", None):
        return load_csv(args.dataset)
    if pixels is not None and pixels != 1 << cfg.n2:
        return harness.default_dataset(pixels, cfg.seeds.data)
    return cfg.make_dataset()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _cmd_gen_data(args, cfg, out: Path) -> None:
    save_csv(cfg.make_dataset(), out / "dataset.csv")
    _write_json(out / "dataset.json", {"pixels": 1 << cfg.n2, "seed": cfg.seeds.data, "data": cfg.to_dict()["data"]})


def _cmd_train(args, cfg, out: Path) -> None:
    result = harness.train(cfg, _dataset(args, cfg))
    (out / "metrics.csv").write_text(write_metrics_csv(result.history), encoding="utf-8")
    result.generator.save(out / "generator.json")
    result.discriminator.save(out / "discriminator.json")
    f = result.final
    _write_json(
        out / "run.json",
        {
            "config": cfg.to_dict(),
            "wall_time_s": result.wall_time,
            "final": {"epoch": f.epoch, "d_kl": f.d_kl, "d_kl_ind": f.d_kl_ind,
                      "min_pairwise_tv": f.min_pairwise_tv, "collapsed": f.collapsed},
        },
    )


def _cmd_infer(args, cfg, out: Path) -> None:
    gen = DualGenerator.load(args.checkpoint)
    report = harness.inference_test(gen, cfg.noise, args.repetitions, cfg.mode, _dataset(args, cfg, gen.n_pixels))
    _write_json(out / "inference.json", report.to_dict())
    row = report.table_row()
    print(f"D_KL = {row['d_kl']}  D_KL,ind = {row['d_kl_ind']}  (x 10^-2, {report.repetitions} repetitions)")


def _cmd_scan(args, cfg, out: Path) -> None:
    if args.checkpoint is not None:
        source = DualGenerator.load(args.checkpoint)
        dataset = _dataset(args, cfg, source.n_pixels)
    else:
        source, dataset = cfg, _dataset(args, cfg)
    rows = harness.noise_scan(
        source, args.lambdas, args.readouts, args.seeds, args.train_under_noise, cfg.shots, dataset
    )
    (out / "scan.csv").write_text(harness.write_scan_csv(rows), encoding="utf-8")


def _cmd_export_qasm(args, cfg, out: Path) -> None:
    if args.checkpoint is not None:
        gen = DualGenerator.load(args.checkpoint)
    else:
        gen = DualGenerator.from_ansatz(cfg.ansatz1, cfg.ansatz2)
    (out / "pqc1.qasm").write_text(to_qasm(gen.pqc1, gen.theta1), encoding="utf-8", newline="\n")
    (out / "pqc2.qasm").write_text(to_qasm(gen.pqc2, gen.theta2), encoding="utf-8", newline="\n")


COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "infer": _cmd_infer,
    "scan": _cmd_scan,
    "export-qasm": _cmd_export_qasm,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, cfg, args.out)
    except NumericError as exc:
        print(f"dualqgan: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DualQGANError, OSError) as exc:
        print(f"dualqgan: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
