"""Command-line front end.

Every subcommand reads an optional INI config (``--config``), applies flag
overrides, writes its artifacts under ``--out`` and finishes with
``<command>.manifest.json`` plus a ``<command>.config.ini`` snapshot. The
manifest is enough to rerun the command: see ``argv_from_manifest``.

Exit codes: 0 ok, 2 usage/config, 3 I/O, 4 domain. Failures print one line
``error: <category>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import platform
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import bench as benchmod
from . import evaluation as ev
from . import pipeline, spectral
from .config import RunConfig
from .domain import TREATMENTS, SplitSpec, Treatment, stack_windows
from .features import FeatureSetId, feature_vector, write_features_csv
from .ingest import (
    index_metas,
    ingest_soil,
    parse_labels_csv,
    parse_spectral_csv,
    write_labels_csv,
    write_soil_csv,
    write_spectral_csv,
)
from .learn import fit_flat, fit_hierarchical, load_model, predict_flat, save_model
from .learn.hierarchical import LEVEL1_KINDS, LEVEL2_KINDS, HierarchicalModel
from .preprocess import preprocess, read_windows_csv, write_windows_csv
from .synth import gen_soil, gen_spectral

EXIT_USAGE, EXIT_IO, EXIT_DOMAIN = 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- small helpers ------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}.{i}")
    else:
        yield prefix, obj


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_csv(obj) -> str:
    """Flatten a JSON-like report into ``key,value`` rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in _flatten(obj):
        w.writerow([k, _csv_value(v)])
    return buf.getvalue()


class Run:
    """Output directory bookkeeping for one command invocation."""

    def __init__(self, out):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs = {}
        self.outputs = []

    def input(self, path):
        if not path:
            raise UsageError("missing required input path")
        self.inputs[str(path)] = sha256_file(path)
        return path

    def path(self, name):
        self.outputs.append(name)
        return self.out / name

    def write_text(self, name, text):
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def write_report(self, name, obj):
        """Every report goes out as JSON and as flattened CSV: ``<name>_report.*``."""
        name = f"{name.replace('-', '_')}_report"
        self.write_text(f"{name}.json", json.dumps(obj, indent=2, sort_keys=True) + "\n")
        self.write_text(f"{name}.csv", report_csv(obj))

    def write_manifest(self, command, argv, args, cfg: RunConfig):
        self.write_text(f"{command}.config.ini", cfg.to_text())
        manifest = {
            "command": command,
            "argv": list(argv),
            "args": {k: v for k, v in sorted(vars(args).items()) if not k.startswith("_")},
            "config": cfg.to_dict(),
            "config_snapshot": f"{command}.config.ini",
            "seed": cfg.run.seed,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {name: sha256_file(self.out / name) for name in sorted(set(self.outputs))},
            "versions": {
                "plantstress": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
        }
        path = self.out / f"{command}.manifest.json"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
        return manifest


def argv_from_manifest(manifest_path):
    """Argument vector that reruns the recorded command.

    The recorded flags are replayed on top of the config snapshot written next
    to the manifest, so later edits to the original config file do not leak in.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path, encoding="utf-8") as fh:
        m = json.load(fh)
    argv = list(m["argv"])
    rest = []
    i = 1
    while i < len(argv):
        if argv[i] == "--config":
            i += 2
            continue
        if argv[i].startswith("--config="):
            i += 1
            continue
        rest.append(argv[i])
        i += 1
    return [argv[0], "--config", str(manifest_path.parent / m["config_snapshot"])] + rest


# -- loading ------------------------------------------------------------------

def _load_labels(run, path):
    with open(run.input(path), encoding="utf-8") as fh:
        return parse_labels_csv(fh)


def _load_windows(run, cfg, args):
    """Labeled windows from a windows CSV, or from a soil CSV (with optional masking)."""
    metas = _load_labels(run, cfg.paths.labels)
    if cfg.paths.windows:
        if cfg.eval.mask_fraction > 0:
            raise UsageError("--mask-fraction needs raw readings (--soil), not windows")
        with open(run.input(cfg.paths.windows), encoding="utf-8") as fh:
            windows = read_windows_csv(fh)
    elif cfg.paths.soil:
        with open(run.input(cfg.paths.soil), "rb") as fh:
            readings, _ = ingest_soil(fh, cfg.range_spec())
        if cfg.eval.mask_fraction > 0:
            readings = ev.mask_readings(readings, cfg.eval.mask_fraction, cfg.run.seed)
        windows, _ = preprocess(readings, cfg.preprocess_config())
    else:
        raise UsageError("need --windows or --soil")
    if not windows:
        raise ValueError("no complete daily windows in input")
    return pipeline.label_windows(windows, metas)


def _split_spec(cfg):
    le = cfg.learn
    return SplitSpec((le.train_start, le.train_end), (le.test_start, le.test_end))


def _select(ws, which, cfg):
    train, test = pipeline.split(ws, _split_spec(cfg))
    chosen = {"train": train, "test": test, "all": ws}[which]
    if len(chosen) == 0:
        raise ValueError(f"no windows in the {which} period")
    return chosen


def _groups(cfg):
    names = [g for g in cfg.eval.groups.split(",") if g.strip()]
    groups = [Treatment.parse(g) for g in names]
    if len(groups) < 2:
        raise ValueError("need at least two treatment groups")
    return groups


def _spectra(run, cfg):
    with open(run.input(cfg.paths.spectral), "rb") as fh:
        samples, report = parse_spectral_csv(fh)
    metas = _load_labels(run, cfg.paths.labels)
    groups = _groups(cfg)
    X, y, kept = pipeline.spectral_arrays(samples, metas, groups)
    return X, y, kept, groups, report


# -- commands -----------------------------------------------------------------

def cmd_synth(run, cfg, args):
    scfg = cfg.synth_config()
    readings, metas = gen_soil(scfg)
    with open(run.path("soil.csv"), "w", encoding="utf-8", newline="") as fh:
        write_soil_csv(readings, fh)
    with open(run.path("labels.csv"), "w", encoding="utf-8", newline="") as fh:
        write_labels_csv(metas, fh)
    summary = {"n_plants": len(metas), "n_readings": len(readings), "n_days": scfg.n_days,
               "seed": scfg.seed}
    if not args.no_spectral:
        samples = gen_spectral(scfg, cfg.synth.spectral_amplitude, cfg.synth.spectral_signal_channels)
        with open(run.path("spectral.csv"), "w", encoding="utf-8", newline="") as fh:
            write_spectral_csv(samples, fh)
        summary["n_spectra"] = len(samples)
    run.write_report("synth", summary)


def cmd_ingest(run, cfg, args):
    with open(run.input(cfg.paths.soil), "rb") as fh:
        readings, report = ingest_soil(fh, cfg.range_spec())
    with open(run.path("soil_clean.csv"), "w", encoding="utf-8", newline="") as fh:
        write_soil_csv(readings, fh)
    run.write_report("ingest", report.to_dict())


def cmd_preprocess(run, cfg, args):
    with open(run.input(cfg.paths.soil), "rb") as fh:
        readings, ingest_report = ingest_soil(fh, cfg.range_spec())
    windows, drops = preprocess(readings, cfg.preprocess_config())
    with open(run.path("windows.csv"), "w", encoding="utf-8", newline="") as fh:
        write_windows_csv(windows, fh)
    run.write_report("preprocess", {"n_windows": len(windows), "ingest": ingest_report.to_dict(),
                                    "drops": drops.to_dict()})


def cmd_features(run, cfg, args):
    with open(run.input(cfg.paths.windows), encoding="utf-8") as fh:
        windows = read_windows_csv(fh)
    fset = FeatureSetId.parse(cfg.learn.features)
    labels = index_metas(_load_labels(run, cfg.paths.labels)) if cfg.paths.labels else None
    if labels is not None:
        windows = [w for w in windows if w.plant_id in labels]
    vectors = [feature_vector(w, fset) for w in windows]
    with open(run.path("features.csv"), "w", encoding="utf-8", newline="") as fh:
        write_features_csv(vectors, fset, fh, labels)
    run.write_report("features", {"feature_set": fset.value, "n_vectors": len(vectors),
                                  "n_degenerate": sum(v.degenerate for v in vectors)})


def _resnet_hyper(cfg):
    le = cfg.learn
    return {"epochs": le.resnet_epochs, "batch_size": le.resnet_batch_size, "lr": le.resnet_lr}


def cmd_train(run, cfg, args):
    ws = _load_windows(run, cfg, args)
    train = _select(ws, "train", cfg)
    le = cfg.learn
    seed = cfg.run.seed
    if args.flat:
        model = fit_flat(args.flat, train.X, train.y, le.features, seed)
        meta = {"kind": "flat", "flat": args.flat, "feature_set": le.features, "seed": seed}
        acc = float(np.mean(predict_flat(model, train.X, le.features) == train.y))
    else:
        hyper = _resnet_hyper(cfg) if le.level1 == "resnet" else None
        model = fit_hierarchical(train.X, train.y, le.level1, le.level2, le.features, seed, hyper)
        meta = {"kind": "hierarchical", "feature_set": le.features, "seed": seed}
        acc = float(np.mean(model.predict(train.X) == train.y))
    save_model(model, run.path("model.json"), meta)
    run.write_report("train", {"n_train": len(train), "train_accuracy": acc, "model": meta,
                               "class_counts": np.bincount(train.y, minlength=len(TREATMENTS)).tolist()})


def _predictor(model, meta):
    if isinstance(model, HierarchicalModel):
        return model.predict
    fset = meta.get("feature_set", "f2")
    return lambda X: predict_flat(model, X, fset)


def cmd_evaluate(run, cfg, args):
    model, meta = load_model(run.input(cfg.paths.model))
    ws = _select(_load_windows(run, cfg, args), args.split, cfg)
    sigma = cfg.eval.noise_sigma
    if isinstance(model, HierarchicalModel):
        report = pipeline.evaluate_hierarchical(model, ws, sigma, cfg.run.seed, args.split)
    else:
        if sigma > 0:
            raise ValueError("noise evaluation needs a hierarchical model")
        pred = _predictor(model, meta)(ws.X)
        report = ev.EvalReport.from_predictions(ws.y, pred, len(TREATMENTS), seed=meta.get("seed"),
                                                split=args.split, model=f"flat/{meta.get('flat')}",
                                                class_names=pipeline.TREATMENT_NAMES)
    report.extra["mask_fraction"] = cfg.eval.mask_fraction
    run.write_report("evaluate", report.to_dict())


def cmd_permtest(run, cfg, args):
    X, y, _, groups, _ = _spectra(run, cfg)
    res = pipeline.mvpa_permutation(X, y, cfg.eval.n_perm, cfg.run.seed, cfg.eval.folds,
                                    args.pca or None, n_jobs=cfg.run.threads)
    out = res.to_dict()
    out.update({"groups": [g.value for g in groups], "n_samples": int(y.size),
                "folds": cfg.eval.folds, "pca_components": args.pca, "seed": cfg.run.seed})
    run.write_report("permtest", out)


def cmd_spectral_index(run, cfg, args):
    X, y, kept, groups, _ = _spectra(run, cfg)
    mode, n_perm, seed = args.mode, cfg.eval.n_perm, cfg.run.seed
    out = {"groups": [g.value for g in groups], "n_samples": int(y.size), "mode": mode, "indices": {}}
    for name in spectral.INDEX_FUNCS:
        v = spectral.index_values(kept, name)
        parts = [v[y == g] for g in range(len(groups))]
        out["indices"][name] = {"F": spectral.anova_f(parts),
                                "p_value": spectral.anova_p(parts, mode, n_perm, seed),
                                "group_means": [float(p.mean()) for p in parts]}
    scan = spectral.sw_scan([X[y == g] for g in range(len(groups))], mode, n_perm, seed)
    out["sw_scan"] = {k: v for k, v in scan.to_dict().items() if k != "p_values"}
    run.write_report("spectral_index", out)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["channel", "wavelength_nm", "p_value", "degenerate"])
    for i, (p, d) in enumerate(zip(scan.p_values, scan.degenerate)):
        w.writerow([i, repr(float(spectral.WAVELENGTHS[i])), repr(float(p)), int(d)])
    run.write_text("sw_scan.csv", buf.getvalue())


def cmd_bench(run, cfg, args):
    with open(run.input(cfg.paths.windows), encoding="utf-8") as fh:
        X = stack_windows(read_windows_csv(fh))
    paths = args.models or [cfg.paths.model]
    reports = []
    for path in paths:
        model, meta = load_model(run.input(path))
        name = args.names[len(reports)] if args.names and len(args.names) > len(reports) else Path(path).stem
        reports.append(benchmod.bench_model(_predictor(model, meta), X, cfg.eval.bench_repeats, name,
                                            not args.no_memory))
    run.write_report("bench", {"reports": [r.to_dict() for r in reports]})
    if len(reports) >= 2:
        _, csv_text, json_text = benchmod.compare(reports)
        run.write_text("bench_compare.csv", csv_text)
        run.write_text("bench_compare.json", json_text)


def cmd_report(run, cfg, args):
    combined = {}
    for path in args.inputs:
        with open(run.input(path), encoding="utf-8") as fh:
            combined[Path(path).name] = json.load(fh)
    run.write_report("report", combined)


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "preprocess": cmd_preprocess,
    "features": cmd_features,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "permtest": cmd_permtest,
    "spectral-index": cmd_spectral_index,
    "bench": cmd_bench,
    "report": cmd_report,
}


# -- parser -------------------------------------------------------------------

def _cfg_flag(p, flag, key, **kw):
    """Flag that overrides config ``key`` (``section.name``) when given."""
    p.add_argument(flag, dest="cfg__" + key.replace(".", "__"), default=None, **kw)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI config file; flags override it")
    _cfg_flag(common, "--seed", "run.seed", type=int, help="global seed (default 0)")
    _cfg_flag(common, "--out", "paths.out", help="output directory (default ./out)")
    _cfg_flag(common, "--threads", "run.threads", type=int,
              help="worker threads for permutation tests; results do not depend on it (default 1)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override any config key; repeatable")

    parser = _Parser(prog="plantstress", description="Plant stress sensing pipeline.")
    parser.add_argument("--version", action="version", version=f"plantstress {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic soil, labels and spectra")
    _cfg_flag(p, "--rootstocks", "synth.rootstocks", help="comma list, e.g. Thomas,PP40")
    _cfg_flag(p, "--plants-per-cell", "synth.n_plants_per_cell", type=int)
    _cfg_flag(p, "--noise-sigma", "synth.noise_sigma", type=float, help="sensor noise (scaled)")
    _cfg_flag(p, "--missing-rate", "synth.missing_rate", type=float)
    p.add_argument("--no-spectral", action="store_true", help="skip the spectra file")

    p = sub.add_parser("ingest", parents=[common], help="validate, range-filter and dedup a soil CSV")
    _cfg_flag(p, "--soil", "paths.soil", help="soil CSV")

    p = sub.add_parser("preprocess", parents=[common], help="soil CSV -> daily windows CSV")
    _cfg_flag(p, "--soil", "paths.soil", help="soil CSV")
    _cfg_flag(p, "--smoothing-window", "preprocess.smoothing_window", type=int)
    _cfg_flag(p, "--utc-offset", "preprocess.utc_offset_hours", type=float)

    p = sub.add_parser("features", parents=[common], help="windows CSV -> moment features CSV")
    _cfg_flag(p, "--windows", "paths.windows", help="windows CSV")
    _cfg_flag(p, "--labels", "paths.labels", help="labels CSV (optional)")
    _cfg_flag(p, "--features", "learn.features", choices=["f2", "f4"])

    p = sub.add_parser("train", parents=[common], help="fit a hierarchical (or flat) model")
    _cfg_flag(p, "--windows", "paths.windows", help="windows CSV")
    _cfg_flag(p, "--soil", "paths.soil", help="soil CSV (alternative to --windows)")
    _cfg_flag(p, "--labels", "paths.labels", help="labels CSV")
    _cfg_flag(p, "--level1", "learn.level1", choices=list(LEVEL1_KINDS))
    _cfg_flag(p, "--level2", "learn.level2", choices=list(LEVEL2_KINDS))
    _cfg_flag(p, "--features", "learn.features", choices=["f2", "f4"])
    p.add_argument("--flat", choices=list(LEVEL2_KINDS), help="train a single-level baseline instead")

    p = sub.add_parser("evaluate", parents=[common], help="score a model on labeled windows")
    _cfg_flag(p, "--model", "paths.model", help="model JSON")
    _cfg_flag(p, "--windows", "paths.windows", help="windows CSV")
    _cfg_flag(p, "--soil", "paths.soil", help="soil CSV (needed for masking)")
    _cfg_flag(p, "--labels", "paths.labels", help="labels CSV")
    _cfg_flag(p, "--noise-sigma", "eval.noise_sigma", type=float,
              help="Gaussian input noise in training-std units")
    _cfg_flag(p, "--mask-fraction", "eval.mask_fraction", type=float,
              help="fraction of raw readings dropped before preprocessing")
    p.add_argument("--split", choices=["train", "test", "all"], default="test")

    p = sub.add_parser("permtest", parents=[common], help="SVM permutation test on spectra")
    _cfg_flag(p, "--spectral", "paths.spectral", help="spectral CSV")
    _cfg_flag(p, "--labels", "paths.labels", help="labels CSV")
    _cfg_flag(p, "--groups", "eval.groups", help="comma list of treatments")
    _cfg_flag(p, "--n-perm", "eval.n_perm", type=int)
    _cfg_flag(p, "--folds", "eval.folds", type=int)
    p.add_argument("--pca", type=int, default=0, help="PCA components before the SVM (0 = none)")

    p = sub.add_parser("spectral-index", parents=[common], help="index and per-wavelength ANOVA")
    _cfg_flag(p, "--spectral", "paths.spectral", help="spectral CSV")
    _cfg_flag(p, "--labels", "paths.labels", help="labels CSV")
    _cfg_flag(p, "--groups", "eval.groups", help="comma list of treatments")
    _cfg_flag(p, "--n-perm", "eval.n_perm", type=int)
    p.add_argument("--mode", choices=["permutation", "analytic"], default="permutation")

    p = sub.add_parser("bench", parents=[common], help="time repeated inference")
    _cfg_flag(p, "--windows", "paths.windows", help="windows CSV")
    p.add_argument("--model", dest="models", action="append", default=[],
                   help="model JSON; repeat to compare several")
    p.add_argument("--name", dest="names", action="append", default=[], help="label per --model")
    _cfg_flag(p, "--repeats", "eval.bench_repeats", type=int)
    p.add_argument("--no-memory", action="store_true", help="skip the traced memory pass")

    p = sub.add_parser("report", parents=[common], help="merge JSON reports into one JSON + CSV")
    p.add_argument("inputs", nargs="+", help="JSON report files")

    p = sub.add_parser("rerun", help="repeat the command recorded in a manifest")
    p.add_argument("manifest", help="<command>.manifest.json")
    return parser


def resolve_config(args) -> RunConfig:
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
    except configparser.Error as exc:
        raise UsageError(f"bad config file: {exc}") from exc
    for key, value in vars(args).items():
        if key.startswith("cfg__") and value is not None:
            cfg.set(key[5:].replace("__", "."), value)
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        try:
            cfg.set(key.strip(), value)
        except (AttributeError, KeyError, ValueError) as exc:
            raise UsageError(f"bad --set {item!r}") from exc
    return cfg


def _one_line(exc) -> str:
    return " ".join(str(exc).split()) or type(exc).__name__


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command == "rerun":
            argv = argv_from_manifest(args.manifest)
            args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        if cfg.run.threads < 1:
            raise UsageError("--threads must be >= 1")
        run = Run(cfg.paths.out)
        # BLAS stays single-threaded so results never depend on --threads
        with threadpool_limits(limits=1):
            COMMANDS[args.command](run, cfg, args)
        run.write_manifest(args.command, argv, args, cfg)
        return 0
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: usage: {_one_line(exc)}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: io: {_one_line(exc)}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: domain: {_one_line(exc)}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
