"""Command line entry point.

Three subcommands cover the workflow:

* ``generate``   render the dataset samples of one study to disk
* ``evaluate``   score prediction CSVs against manifests
* ``run-study``  end to end: generate, train the probe, predict, evaluate

Every run prints a JSON config echo first; re-running with exactly those
values reproduces the byte-identical output tree.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

from . import dataset_io, metrics
from .assets import load_mnist, load_textures
from .errors import FactorbenchError
from .factors import Factor, FactorClassTable, default_table
from .probe import ProbeConfig, predict_split, train_probe
from .seeding import derive_seed, rng_from
from .study import (
    Pairing,
    SplitCounts,
    StudyKind,
    bookkeeping_correlate,
    cell_pattern,
    enumerate_pairings,
    materialize_split,
    select_dataset_samples,
)

ENV_MNIST_IMAGES = "FACTORBENCH_MNIST_IMAGES"
ENV_MNIST_LABELS = "FACTORBENCH_MNIST_LABELS"
ENV_TEXTURES = "FACTORBENCH_TEXTURES"


def default_texture_dir() -> Path:
    return Path(resources.files("factorbench") / "assets_data" / "textures")


def _add_asset_args(parser):
    parser.add_argument("--mnist-images", default=os.environ.get(ENV_MNIST_IMAGES))
    parser.add_argument("--mnist-labels", default=os.environ.get(ENV_MNIST_LABELS))
    parser.add_argument(
        "--textures",
        default=os.environ.get(ENV_TEXTURES),
        help="directory with the five texture PNGs (default: bundled set)",
    )
    parser.add_argument("--table", help="JSON table config overriding the built-in classes")


def _add_study_args(parser):
    parser.add_argument("--study", required=True, help="ZSO, ZGO, CGO-c, CHGO or FGO-f")
    parser.add_argument("--pair", help="target:correlate factor pair, e.g. shape:hue")
    parser.add_argument("--factor", help="target factor for single-factor (ZSO) studies")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--scale", type=float, default=1.0, help="divide default split sizes")
    parser.add_argument("--train-count", type=int, help="explicit train size (overrides --scale)")
    parser.add_argument("--val-count", type=int, help="explicit validation size")
    parser.add_argument("--test-count", type=int, help="explicit test size")
    parser.add_argument("--samples", type=int, default=5, help="dataset samples to draw")
    parser.add_argument("--workers", type=int, default=max(1, os.cpu_count() or 1))
    parser.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factorbench",
        description="Deterministic diagnostic vision benchmark generator and scorer",
    )
    parser.add_argument("--config", help="JSON file providing defaults for the flags")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="render one study's dataset samples")
    _add_study_args(gen)
    _add_asset_args(gen)

    ev = sub.add_parser("evaluate", help="score prediction files against manifests")
    ev.add_argument("--manifest", nargs="+", required=True)
    ev.add_argument("--predictions", nargs="+", required=True)
    ev.add_argument("--zso", help="report JSON of a no-shortcut run, enables drop/SCV")
    ev.add_argument("--out", required=True, help="output path prefix for .json/.txt")

    run = sub.add_parser("run-study", help="generate, train probe, predict, evaluate")
    _add_study_args(run)
    _add_asset_args(run)
    run.add_argument("--pairings", help="'all' runs every ordered factor pairing")
    run.add_argument("--probe-arch", default="linear", choices=["linear", "mlp"])
    run.add_argument("--probe-hidden", type=int, default=32)
    run.add_argument("--probe-downsample", type=int, default=32)
    run.add_argument("--probe-lr", type=float, default=1.0)
    run.add_argument("--probe-batch", type=int, default=128)
    run.add_argument("--probe-epochs", type=int, default=150)
    run.add_argument("--probe-patience", type=int, default=25)
    return parser


def parse_args(argv):
    parser = build_parser()
    # A config file supplies defaults; explicit flags win.
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        with open(known.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
        for action in parser._subparsers._group_actions:
            for sub in action.choices.values():
                valid = {a.dest for a in sub._actions}
                sub.set_defaults(**{k: v for k, v in overrides.items() if k in valid})
                for sub_action in sub._actions:
                    if sub_action.dest in overrides:
                        sub_action.required = False
    return parser.parse_args(argv)


def _echo_config(args):
    echo = {k: v for k, v in sorted(vars(args).items()) if k != "config" and v is not None}
    print("config: " + json.dumps(echo, sort_keys=True, default=str))


def _load_banks(args):
    if not args.mnist_images or not args.mnist_labels:
        raise FactorbenchError(
            "shape assets required: pass --mnist-images/--mnist-labels or set "
            f"{ENV_MNIST_IMAGES}/{ENV_MNIST_LABELS}"
        )
    shape_bank = load_mnist(args.mnist_images, args.mnist_labels)
    texture_dir = args.textures or default_texture_dir()
    texture_bank = load_textures(texture_dir)
    return shape_bank, texture_bank


def _resolve_table(args, shape_bank) -> FactorClassTable:
    if args.table:
        return FactorClassTable.load(args.table)
    return default_table(shape_counts=shape_bank.class_counts)


def _resolve_pairing(args, kind: StudyKind) -> Pairing:
    if kind.needs_pairing:
        if not args.pair:
            raise FactorbenchError(f"study {kind} needs --pair target:correlate")
        return Pairing.parse(args.pair)
    if args.factor:
        target = Factor.from_label(args.factor)
    elif args.pair:
        target = Pairing.parse(args.pair).target
    else:
        raise FactorbenchError("ZSO needs --factor (the predicted factor)")
    return Pairing(target, bookkeeping_correlate(target))


def _resolve_counts(args) -> SplitCounts:
    scaled = SplitCounts.scaled(args.scale)
    return SplitCounts(
        train=args.train_count or scaled.train,
        val=args.val_count or scaled.val,
        test=args.test_count or scaled.test,
    )


def _generate_one(kind, pairing, table, shape_bank, texture_bank, args, out_dir):
    """Export all dataset samples of one (study, pairing); returns manifests."""
    counts = _resolve_counts(args)
    samples = select_dataset_samples(table, args.seed, n_samples=args.samples)
    manifests = []
    for sample in samples:
        tag = (pairing.target.value, pairing.correlate.value, str(kind))
        pattern = cell_pattern(kind, sample, rng_from(sample.seed, "pattern", *tag))
        plan = materialize_split(
            pattern, sample, pairing, counts, rng_from(sample.seed, "split", *tag)
        )
        dataset_seed = derive_seed(sample.seed, "export", *tag)
        sample_dir = Path(out_dir) / f"sample-{sample.sample_id}"
        manifest = dataset_io.export(
            plan,
            table,
            shape_bank,
            texture_bank,
            sample_dir,
            dataset_seed,
            workers=args.workers,
            header_extra={"master_seed": args.seed},
        )
        manifests.append((manifest, sample_dir))
        print(f"wrote {sample_dir / dataset_io.MANIFEST_NAME} "
              f"({len(manifest.records)} records)")
    return manifests


def cmd_generate(args) -> int:
    kind = StudyKind.parse(args.study)
    shape_bank, texture_bank = _load_banks(args)
    table = _resolve_table(args, shape_bank)
    pairing = _resolve_pairing(args, kind)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _generate_one(kind, pairing, table, shape_bank, texture_bank, args, out_dir)
    return 0


def cmd_evaluate(args) -> int:
    if len(args.manifest) != len(args.predictions):
        raise FactorbenchError(
            f"{len(args.manifest)} manifests but {len(args.predictions)} prediction files"
        )
    pairs = []
    for mpath, ppath in zip(args.manifest, args.predictions):
        manifest = dataset_io.DatasetManifest.load(mpath)
        predictions = dataset_io.read_predictions(ppath, manifest)
        pairs.append((manifest, predictions.as_dict()))
    zso_report = None
    if args.zso:
        with open(args.zso, "r", encoding="utf-8") as fh:
            zso_report = json.load(fh)
    report = metrics.build_report(pairs, zso_report=zso_report)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.save(out.with_suffix(".json"))
    matrix = report.text_matrix()
    out.with_suffix(".txt").write_text(matrix + "\n", encoding="utf-8")
    print(matrix)
    print(f"wrote {out.with_suffix('.json')}")
    return 0


def _probe_config(args) -> ProbeConfig:
    return ProbeConfig(
        architecture=args.probe_arch,
        hidden=args.probe_hidden,
        downsample=args.probe_downsample,
        lr=args.probe_lr,
        batch_size=args.probe_batch,
        epochs=args.probe_epochs,
        patience=args.probe_patience,
        seed=derive_seed(args.seed, "probe"),
    )


def _run_one_pairing(kind, pairing, table, shape_bank, texture_bank, args, out_dir):
    manifests = _generate_one(kind, pairing, table, shape_bank, texture_bank, args, out_dir)
    config = _probe_config(args)
    rows = []
    scored = []
    for manifest, sample_dir in manifests:
        model = train_probe(config, manifest, sample_dir)
        model.save(sample_dir / "probe.bin")
        ids, labels = predict_split(model, manifest, sample_dir, "test", config.downsample)
        pred_path = sample_dir / "predictions.csv"
        dataset_io.write_predictions(ids, labels, pred_path)
        predictions = dataset_io.read_predictions(pred_path, manifest)
        test_acc = metrics.accuracy_for(manifest, predictions.as_dict())
        val_entries = [h for h in model.history_ if "val_acc" in h]
        val_acc = val_entries[model.best_epoch_ - 1]["val_acc"] if val_entries else None
        rows.append(
            {
                "sample_id": manifest.header["sample_id"],
                "val_acc": val_acc,
                "test_acc": test_acc,
                "best_epoch": model.best_epoch_,
            }
        )
        scored.append((manifest, predictions.as_dict()))
    report = metrics.build_report(scored)
    accs = [r["test_acc"] for r in rows]
    p, se = metrics.aggregate(accs)
    summary = {
        "study": str(kind),
        "pair": str(pairing),
        "per_sample": rows,
        "P": p,
        "P_se": se,
        "metrics": report.to_json_obj(),
    }
    with open(Path(out_dir) / "report.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{kind} {pairing}: P={p:.3f} se={se:.3f}")
    return summary


def cmd_run_study(args) -> int:
    kind = StudyKind.parse(args.study)
    shape_bank, texture_bank = _load_banks(args)
    table = _resolve_table(args, shape_bank)
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    if args.pairings == "all":
        pairings = enumerate_pairings()
    else:
        pairings = [_resolve_pairing(args, kind)]
    for pairing in pairings:
        pair_dir = out_root if len(pairings) == 1 else out_root / str(pairing).replace(":", "-")
        pair_dir.mkdir(parents=True, exist_ok=True)
        _run_one_pairing(kind, pairing, table, shape_bank, texture_bank, args, pair_dir)
    return 0


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    _echo_config(args)
    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "evaluate":
            return cmd_evaluate(args)
        if args.command == "run-study":
            return cmd_run_study(args)
        raise FactorbenchError(f"unknown command {args.command!r}")
    except FactorbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
