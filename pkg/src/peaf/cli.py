"""Command-line entry point: ``peaf <subcommand> [flags]``.

Exit codes: 0 success, 1 unexpected failure, 2 bad usage (unknown flag or
subcommand), 3 invalid configuration or input values, 4 missing input file.
Every subcommand that writes files also writes ``<out>.run.json`` with the
resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import power as pw
from .analog import default_frontend
from .classifier import MlpModel, TrainConfig, evaluate, roc_curve, train_mlp
from .config import FrontendConfig
from .info import DEFAULT_BINS, stage_entropy_report, write_report_csv
from .learnable import optimize_frontend
from .mfcc import MfccConfig
from .pipelines import FEATURE_NAMES, FEATURE_VARIANTS, build_pipeline
from .signal_io import DEFAULT_RECIPE, DatasetManifest, load_recipe, load_wav, synth_corpus

EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING = 4


def _dump(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _log_run(out, command: str, args: argparse.Namespace, **resolved) -> None:
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    _dump({"command": command, "flags": flags, **resolved}, f"{out}.run.json")


def _feature_config(feature: str, config_path: str | None):
    """Resolved (frontend or MFCC) config for a feature name."""
    if feature == "mfcc":
        if config_path is None:
            return MfccConfig()
        return MfccConfig(**json.loads(Path(config_path).read_text()))
    if config_path is None:
        return default_frontend(FEATURE_VARIANTS[feature])
    return FrontendConfig.load(config_path)


def _config_dict(cfg) -> dict:
    return cfg.to_dict()


def _pipeline(feature: str, cfg):
    if feature == "mfcc":
        return build_pipeline("mfcc", mfcc_cfg=cfg)
    return build_pipeline(feature, frontend=cfg)


def _extract_all(manifest: DatasetManifest, feature: str, cfg):
    pipe = _pipeline(feature, cfg)
    return [pipe(manifest.load(i))[0] for i in range(len(manifest))]


# ------------------------------------------------------------ subcommands


def cmd_synth_data(args) -> int:
    recipe = DEFAULT_RECIPE if args.recipe is None else load_recipe(args.recipe)
    manifest = synth_corpus(recipe, args.out, args.seed)
    _log_run(Path(args.out) / "manifest.csv", "synth-data", args, recipe=recipe)
    print(f"wrote {len(manifest)} files and {Path(args.out) / 'manifest.csv'}")
    return 0


def cmd_extract(args) -> int:
    cfg = _feature_config(args.feature, args.config)
    feat, _ = _pipeline(args.feature, cfg)(load_wav(args.input))
    feat.to_csv(args.out)
    _log_run(args.out, "extract", args, config=_config_dict(cfg))
    print(f"{feat.n_channels} x {feat.n_frames} {feat.stage_tag} feature -> {args.out}")
    return 0


def cmd_entropy_report(args) -> int:
    manifest = DatasetManifest.read(args.manifest)
    names = [n.strip() for n in args.pipelines.split(",") if n.strip()]
    for n in names:
        if n not in FEATURE_NAMES:
            raise ValueError(f"unknown pipeline {n!r}; expected any of {','.join(FEATURE_NAMES)}")
    configs = {n: _feature_config(n, None) for n in names}
    pipes = {n: _pipeline(n, configs[n]) for n in names}
    reports = stage_entropy_report(
        manifest, pipes, args.bins_value, args.bins_spatial, args.samples, args.seed
    )
    write_report_csv(reports, args.out)
    _log_run(args.out, "entropy-report", args, configs={n: c.to_dict() for n, c in configs.items()})
    for n, rep in reports.items():
        for stage, m, s in zip(rep.stages, rep.mean, rep.std):
            print(f"{n:>10} {stage:>14}  {m:8.4f} +- {s:.4f} bits")
    return 0


def cmd_power(args) -> int:
    if args.feature is None:
        entries = pw.power_table()
    else:
        feature = "MFCC_WITH_ADC" if args.feature == "mfcc" else args.feature
        if args.n_ops is not None:
            entries = [pw.power_report(feature, args.n_ops, args.task, classifier=args.classifier)]
        elif args.classifier is not None:
            entries = [pw.power_report(feature, task=args.task, classifier=args.classifier)]
        else:
            entries = [
                pw.power_report(feature, task=args.task, classifier=c)
                for c in pw.CLASSIFIERS
                if (c, pw.canonical_task(args.task)) in pw.N_OPS_PRESETS
            ]
    if args.out is None:
        pw.write_power_csv(entries, sys.stdout)
    else:
        pw.write_power_csv(entries, args.out)
        _log_run(
            args.out,
            "power",
            args,
            e_eff=pw.E_EFF,
            frame_rates=pw.FRAME_RATES,
            provenance=[e.provenance for e in entries],
        )
    if len(entries) == 1:
        print(f"P_tot = {entries[0].p_tot / pw.MICRO:.4f} uW")
    return 0


def cmd_train(args) -> int:
    manifest = DatasetManifest.read(args.manifest)
    cfg = _feature_config(args.feature, args.config)
    feats = _extract_all(manifest, args.feature, cfg)
    tc = TrainConfig(epochs=args.epochs, learning_rate=args.learning_rate, seed=args.seed)
    model, report = train_mlp(feats, manifest.labels, tc)
    model.class_names = manifest.class_names
    _dump(
        {"feature": args.feature, "config": _config_dict(cfg), "model": model.to_dict()},
        args.out,
    )
    _dump(report.to_dict(), f"{args.out}.report.json")
    _log_run(args.out, "train", args, config=_config_dict(cfg), train=vars(tc))
    print(f"train accuracy {report.train_accuracy:.4f}, validation accuracy {report.val_accuracy}")
    return 0


def cmd_eval(args) -> int:
    bundle = json.loads(Path(args.model).read_text())
    feature = bundle["feature"]
    if feature == "mfcc":
        cfg = MfccConfig(**bundle["config"])
    else:
        cfg = FrontendConfig.from_dict(bundle["config"])
    model = MlpModel.from_dict(bundle["model"])
    manifest = DatasetManifest.read(args.manifest)
    if model.class_names and tuple(manifest.class_names) != tuple(model.class_names):
        index = {c: i for i, c in enumerate(model.class_names)}
        labels = np.array([index[lab] for _, lab in manifest.entries])
    else:
        labels = manifest.labels
    acc, scores = evaluate(model, _extract_all(manifest, feature, cfg), labels)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("path,label," + ",".join(f"score_{k}" for k in range(scores.shape[1])) + "\n")
        for (path, lab), row in zip(manifest.entries, scores):
            fh.write(f"{path},{lab}," + ",".join(repr(float(v)) for v in row) + "\n")
    result = {"accuracy": acc, "n": int(labels.size)}
    if scores.shape[1] == 2 and np.unique(labels).size == 2:
        curve = roc_curve(scores[:, 1], labels)
        curve.to_csv(f"{args.out}.roc.csv")
        result["auc"] = curve.auc
    _dump(result, f"{args.out}.metrics.json")
    _log_run(args.out, "eval", args, feature=feature)
    print(f"accuracy {acc:.4f}" + (f", AUC {result['auc']:.4f}" if "auc" in result else ""))
    return 0


def cmd_optimize_frontend(args) -> int:
    manifest = DatasetManifest.read(args.manifest)
    cfg = _feature_config("learn-peaf", args.config)
    tc = TrainConfig(learning_rate=args.learning_rate)
    result = optimize_frontend(manifest, cfg, tc, steps=args.steps, seed=args.seed)
    result.config.save(args.out)
    history = Path(args.out).with_suffix(".history.csv")
    result.write_history(history)
    _log_run(args.out, "optimize-frontend", args, initial_config=cfg.to_dict(), classifier=vars(tc))
    if result.losses:
        print(f"loss {result.losses[0]:.4f} -> {result.losses[-1]:.4f}; history in {history}")
    return 0


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="peaf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def seed(sp):
        sp.add_argument("--seed", type=int, default=0, help="random seed (unsigned integer; all randomness derives from it)")

    sp = sub.add_parser("synth-data", help="write a synthetic labelled WAV corpus")
    sp.add_argument("--recipe", help="corpus recipe JSON (default: two AM-tone classes)")
    sp.add_argument("--out", required=True, help="output directory (gets WAVs and manifest.csv)")
    seed(sp)
    sp.set_defaults(func=cmd_synth_data)

    sp = sub.add_parser("extract", help="compute one feature matrix from a WAV file")
    sp.add_argument("--feature", choices=FEATURE_NAMES, required=True, help="feature pipeline")
    sp.add_argument("--in", dest="input", required=True, help="input WAV (16 kHz, mono, PCM16)")
    sp.add_argument("--out", required=True, help="output CSV (rows=channels, cols=frames); JSON sidecar beside it")
    sp.add_argument("--config", help="frontend or MFCC config JSON (default: built-in defaults)")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("entropy-report", help="per-stage Shannon entropy (bits) over a corpus")
    sp.add_argument("--manifest", required=True, help="manifest CSV (path,label)")
    sp.add_argument("--pipelines", default="l-peaf,mfcc", help="comma-separated feature pipelines")
    sp.add_argument("--bins-value", type=int, default=DEFAULT_BINS, help="histogram bins on the value axis (count)")
    sp.add_argument("--bins-spatial", type=int, default=DEFAULT_BINS, help="histogram bins on the spatial-label axis (count)")
    sp.add_argument("--samples", type=int, default=1000, help="maximum number of class-balanced samples (count)")
    sp.add_argument("--out", required=True, help="output CSV pipeline,stage,mean_bits,std_bits,n")
    seed(sp)
    sp.set_defaults(func=cmd_entropy_report)

    sp = sub.add_parser("power", help="total power P_feat + N_OPS*FR/E_eff (microwatts)")
    sp.add_argument("--feature", choices=FEATURE_NAMES, help="feature (default: full table of all features)")
    sp.add_argument("--n-ops", type=float, help="classifier operations per inference (count; 1 MAC = 2 ops)")
    sp.add_argument("--classifier", choices=pw.CLASSIFIERS, help="classifier preset for N_OPS")
    sp.add_argument("--task", choices=("kws", "wwd"), default="kws", help="task: kws (30 fps) or wwd (10 fps)")
    sp.add_argument("--out", help="output CSV (default: stdout)")
    sp.set_defaults(func=cmd_power)

    sp = sub.add_parser("train", help="train the MLP classifier on one feature")
    sp.add_argument("--feature", choices=FEATURE_NAMES, required=True, help="feature pipeline")
    sp.add_argument("--manifest", required=True, help="manifest CSV (path,label)")
    sp.add_argument("--config", help="frontend or MFCC config JSON")
    sp.add_argument("--epochs", type=int, default=50, help="training epochs (count)")
    sp.add_argument("--learning-rate", type=float, default=0.05, help="gradient step size (unitless)")
    sp.add_argument("--out", required=True, help="output model JSON")
    seed(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="score a manifest with a trained model")
    sp.add_argument("--model", required=True, help="model JSON written by train")
    sp.add_argument("--manifest", required=True, help="manifest CSV (path,label)")
    sp.add_argument("--out", required=True, help="output scores CSV; ROC (fpr,tpr) and metrics beside it")
    seed(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("optimize-frontend", help="gradient-descend Learn-PEAF parameters")
    sp.add_argument("--manifest", required=True, help="training manifest CSV (path,label)")
    sp.add_argument("--config", help="initial LEARN_PEAF config JSON (default: built-in)")
    sp.add_argument("--steps", type=int, default=200, help="optimization steps (count)")
    sp.add_argument("--learning-rate", type=float, default=0.03, help="classifier step size (unitless)")
    sp.add_argument("--out", required=True, help="optimized config JSON; loss history CSV step,loss beside it")
    seed(sp)
    sp.set_defaults(func=cmd_optimize_frontend)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"peaf {args.command}: missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ValueError, KeyError, json.JSONDecodeError, TypeError) as exc:
        print(f"peaf {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
