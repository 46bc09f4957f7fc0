"""Command-line entry point: ``dir-intent <command> [options]``.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from pathlib import Path

import numpy as np
import yaml

from . import plotting
from .errors import ConfigError, DataError, DirError
from .inference import DIRECT, two_stage_batch
from .metrics import MetricsReport, Scores, grouped_report, unseen_report
from .reporting import (footer_line, pca_2d, sha256_array, sha256_file, svg_heatmap, write_csv,
                        write_matrix_csv)
from .training import (ABLATIONS, TrainConfig, ablation_variant, load_dataset, load_model, save_model,
                       train, train_stage1)

logger = logging.getLogger("dir_intent")

PATH_KEYS = ("dataset", "labels", "embeddings")
SWEEP_PARAMS = {"alpha": "alpha", "lambda_prime": "lam_prime"}


# --------------------------------------------------------------------------
# config and manifest

def load_config(path) -> TrainConfig:
    """Read a flat YAML mapping; relative data paths resolve against the file's directory."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping of keys to values")
    for key, value in raw.items():
        if isinstance(value, dict):
            raise ConfigError(f"{path}: key {key!r} is nested; the config must be flat")
    for key in PATH_KEYS:
        if raw.get(key):
            p = Path(str(raw[key]))
            raw[key] = str(p if p.is_absolute() else (path.parent / p).resolve())
    try:
        return TrainConfig.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_sha256(cfg: TrainConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()


class Manifest:
    """Run record written before any computation and completed with output checksums."""

    def __init__(self, out: Path, command: str, config_path, cfg: TrainConfig | None, seeds, extra=None):
        self.path = out / "manifest.json"
        self.doc = {
            "command": command,
            "config_path": None if config_path is None else str(config_path),
            "resolved_config": None if cfg is None else cfg.to_dict(),
            "seeds": list(seeds),
            "output_dir": str(out),
            "options": extra or {},
            "status": "running",
            "artifacts": {},
        }
        self._write()

    def _write(self) -> None:
        self.path.write_text(json.dumps(self.doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def complete(self, files) -> None:
        root = self.path.parent
        self.doc["artifacts"] = {str(Path(f).relative_to(root)): sha256_file(f) for f in sorted(map(str, files))}
        self.doc["status"] = "complete"
        self._write()


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_list(text: str, kind=float) -> list:
    try:
        values = [kind(v) for v in str(text).replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None
    if not values:
        raise ConfigError("empty list")
    return values


def _seed_list(args, cfg: TrainConfig) -> list[int]:
    if getattr(args, "seeds", None):
        return _parse_list(args.seeds, int)
    if getattr(args, "seed", None) is not None:
        return [args.seed]
    return [cfg.seed]


def _thread_limit() -> int:
    raw = os.environ.get("DIR_NUM_THREADS")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"DIR_NUM_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("DIR_NUM_THREADS must be at least 1")
    return n


def _thread_context():
    if not os.environ.get("DIR_NUM_THREADS"):
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=_thread_limit())


# --------------------------------------------------------------------------
# shared pipeline pieces

def train_variant(cfg: TrainConfig, seed: int, ablate=(), two_stage=False):
    cfg = ablation_variant(dataclasses.replace(cfg, seed=seed, two_stage=two_stage or cfg.two_stage), ablate)
    data = load_dataset(cfg)
    model = train(data.train, data.labels, data.vocab, data.pretrained(), cfg)
    return model, data


def evaluate(model, split: str, two_stage: bool = False, source: str | None = None):
    """Return (test utterances, predictions, golds, routes, report)."""
    cfg = model.cfg
    if cfg.mode == "zsid" and split == "gzsid":
        raise ConfigError("a model trained in zsid mode has no held-out seen utterances; "
                          "generalized evaluation needs a gzsid-trained model")
    if two_stage and split != "gzsid":
        raise ConfigError("the two-stage pipeline applies to gzsid evaluation only")
    data = load_dataset(cfg, mode=split)
    labels = data.labels
    test = data.test
    if not test:
        raise DataError(f"the {split} test split is empty")
    golds = np.array([labels.index(u.label) for u in test], dtype=np.int64)
    if two_stage:
        stage1 = model.stage1
        if stage1 is None:
            logger.info("artifact has no stage-one model; training it now")
            train_set = data.train if cfg.mode == split else load_dataset(cfg).train
            stage1 = model.stage1 = train_stage1(train_set, labels, data.vocab, data.pretrained(), cfg)
        feats, seen_scores = stage1.encode(test)
        lof = stage1.gate.model.score(feats)
        unseen_scores = model.scores(test, "zsid", source)
        preds, routes = two_stage_batch(seen_scores, lof, stage1.gate.threshold, unseen_scores, labels.I)
    else:
        preds = model.predict(test, split, source)
        routes = [DIRECT] * len(test)
    if split == "gzsid":
        report = grouped_report(preds, golds, labels.I, labels.K)
    else:
        report = unseen_report(preds, golds, labels.I, labels.K)
    return test, preds, golds, routes, report


def _eval_source(ablate) -> str | None:
    ablate = list(ablate or ())
    if "no-mt" in ablate:
        raise ConfigError("no-mt is a training ablation; pass it to train")
    if {"no-ss", "es"} <= set(ablate):
        raise ConfigError("ablations no-ss and es are mutually exclusive")
    if "no-ss" in ablate:
        return "identity"
    if "es" in ablate:
        return "es"
    return None


def write_eval_outputs(out: Path, model, test, preds, golds, routes, report, footer: str, figures=True):
    names = model.labels.names
    files = [out / "report.csv", out / "predictions.csv"]
    files[0].write_text(report.to_csv(footer), encoding="utf-8")
    write_csv(files[1], ["id", "gold", "pred", "route"],
              ([u.id, names[g], names[p], r] for u, g, p, r in zip(test, golds, preds, routes)), footer)
    if figures:
        plotting.plot_report(report, out / "report.png")
        files.append(out / "report.png")
    return files


def mean_report(reports) -> MetricsReport:
    groups = {}
    for name, _ in reports[0].rows():
        vals = [r.groups.get(name) for r in reports]
        if any(v is None for v in vals):
            groups[name] = None
            continue
        groups[name] = Scores(*(float(np.mean([getattr(v, f) for v in vals]))
                                for f in ("acc", "precision", "recall", "f1")),
                              support=vals[0].support)
    return MetricsReport(groups)


# --------------------------------------------------------------------------
# commands

def cmd_train(args) -> int:
    cfg = load_config(args.config)
    seeds = _seed_list(args, cfg)
    out = _out_dir(args.out)
    manifest = Manifest(out, "train", args.config, cfg, seeds,
                        {"ablate": sorted(args.ablate or []), "two_stage": bool(args.two_stage)})
    files = []
    for seed in seeds:
        target = out if len(seeds) == 1 else _out_dir(out / f"seed-{seed}")
        model, _ = train_variant(cfg, seed, args.ablate, args.two_stage)
        sha = save_model(model, target / "model.json")
        write_csv(target / "loss_trace.csv", ["epoch", "loss"],
                  ((i, v) for i, v in enumerate(model.loss_trace, 1)), footer_line(artifact_sha256=sha))
        files += [target / "model.json", target / "loss_trace.csv"]
        if not args.no_figures:
            plotting.plot_loss(model.loss_trace, target / "loss_trace.png")
            files.append(target / "loss_trace.png")
        print(f"seed {seed}: {target / 'model.json'} sha256={sha}")
    manifest.complete(files)
    return 0


def cmd_eval(args) -> int:
    out = _out_dir(args.out)
    model = load_model(args.model)
    split = args.split or model.cfg.mode
    source = _eval_source(args.ablate)
    manifest = Manifest(out, "eval", None, model.cfg, [model.cfg.seed],
                        {"model": str(args.model), "split": split, "two_stage": bool(args.two_stage),
                         "ablate": sorted(args.ablate or [])})
    test, preds, golds, routes, report = evaluate(model, split, args.two_stage, source)
    footer = footer_line(artifact_sha256=sha256_file(args.model))
    files = write_eval_outputs(out, model, test, preds, golds, routes, report, footer, not args.no_figures)
    manifest.complete(files)
    sys.stdout.write(report.to_csv())
    return 0


def cmd_export_sim(args) -> int:
    out = _out_dir(args.out)
    model = load_model(args.model)
    manifest = Manifest(out, "export-sim", None, model.cfg, [model.cfg.seed],
                        {"model": str(args.model), "kind": args.kind, "mode": args.mode,
                         "format": args.format})
    L = model.similarity_matrix(args.mode, args.kind)
    labels = model.labels
    cols = labels.names if args.mode == "gzsl" else list(labels.unseen)
    stem = f"similarity_{args.kind}_{args.mode}"
    footer = footer_line(artifact_sha256=sha256_file(args.model), matrix_sha256=sha256_array(L))
    files = [out / f"{stem}.csv"]
    write_matrix_csv(files[0], L, labels.names, cols, footer)
    if args.format == "svg":
        files.append(out / f"{stem}.svg")
        files[-1].write_text(svg_heatmap(L, labels.names, cols), encoding="utf-8")
    manifest.complete(files)
    print(f"{files[0]} matrix_sha256={sha256_array(L)}")
    return 0


def cmd_dump_reps(args) -> int:
    out = _out_dir(args.out)
    model = load_model(args.model)
    split = args.split or model.cfg.mode
    manifest = Manifest(out, "dump-reps", None, model.cfg, [model.cfg.seed],
                        {"model": str(args.model), "split": split})
    test = load_dataset(model.cfg, mode=split).test
    if not test:
        raise DataError(f"the {split} test split is empty")
    xy, _ = pca_2d(model.represent(test))
    files = [out / "reps.csv"]
    write_csv(files[0], ["id", "gold", "x", "y"],
              ([u.id, u.label, float(x), float(y)] for u, (x, y) in zip(test, xy)),
              footer_line(artifact_sha256=sha256_file(args.model)))
    if not args.no_figures:
        files.append(out / "reps.png")
        plotting.plot_projection(xy, [u.label for u in test], files[-1], highlight=set(model.labels.unseen))
    manifest.complete(files)
    return 0


def _sweep_point(payload):
    cfg_dict, seed, ablate, split, target = payload
    cfg = TrainConfig.from_dict(cfg_dict)
    with _thread_context():
        model, _ = train_variant(cfg, seed, ablate)
        sha = save_model(model, Path(target) / "model.json")
        _, _, _, _, report = evaluate(model, split)
    overall = report.groups.get("overall") or report.groups["unseen"]
    return overall.acc, overall.f1, sha


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    key = SWEEP_PARAMS[args.param]
    grid = _parse_list(args.grid)
    seed = args.seed if args.seed is not None else cfg.seed
    split = args.split or cfg.mode
    out = _out_dir(args.out)
    manifest = Manifest(out, "sweep", args.config, cfg, [seed],
                        {"param": args.param, "grid": grid, "split": split, "ablate": sorted(args.ablate or [])})
    payloads = []
    for i, value in enumerate(grid):
        point_cfg = dataclasses.replace(cfg, **{key: float(value)})
        payloads.append((point_cfg.to_dict(), seed, list(args.ablate or ()), split,
                         str(_out_dir(out / f"point-{i:02d}"))))
    workers = min(_thread_limit(), len(payloads))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, payloads))
    else:
        results = [_sweep_point(p) for p in payloads]
    combined = hashlib.sha256("".join(r[2] for r in results).encode()).hexdigest()
    files = [out / "sweep.csv"] + [Path(p[4]) / "model.json" for p in payloads]
    write_csv(files[0], ["value", "overall_acc", "overall_f1"],
              ([v, f"{100 * a:.2f}", f"{100 * f:.2f}"] for v, (a, f, _) in zip(grid, results)),
              footer_line(param=args.param, artifact_sha256=combined))
    if not args.no_figures:
        files.append(out / "sweep.png")
        plotting.plot_sweep(grid, [r[0] for r in results], [r[1] for r in results], args.param, files[-1])
    manifest.complete(files)
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    seeds = _seed_list(args, cfg)
    split = args.split or cfg.mode
    out = _out_dir(args.out)
    manifest = Manifest(out, "run", args.config, cfg, seeds,
                        {"split": split, "two_stage": bool(args.two_stage), "ablate": sorted(args.ablate or [])})
    files, reports, shas = [], [], []
    for seed in seeds:
        target = _out_dir(out / f"seed-{seed}")
        model, _ = train_variant(cfg, seed, args.ablate, args.two_stage)
        sha = save_model(model, target / "model.json")
        test, preds, golds, routes, report = evaluate(model, split, args.two_stage)
        files.append(target / "model.json")
        files += write_eval_outputs(target, model, test, preds, golds, routes, report,
                                    footer_line(artifact_sha256=sha), figures=False)
        reports.append(report)
        shas.append(sha)
    summary = mean_report(reports)
    combined = hashlib.sha256("".join(shas).encode()).hexdigest()
    files.append(out / "report.csv")
    files[-1].write_text(summary.to_csv(footer_line(seeds=" ".join(map(str, seeds)), artifact_sha256=combined)),
                         encoding="utf-8")
    if not args.no_figures:
        files.append(out / "report.png")
        plotting.plot_report(summary, files[-1], title=f"mean over {len(seeds)} seeds")
    manifest.complete(files)
    sys.stdout.write(summary.to_csv())
    return 0


# --------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dir-intent", description="Zero-shot intent detection toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=False, model=False):
        if config:
            p.add_argument("--config", required=True, help="flat YAML config file")
        if model:
            p.add_argument("--model", required=True, help="model artifact (model.json)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    p = sub.add_parser("train", help="train a model")
    common(p, config=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="comma-separated seed list; one sub-directory per seed")
    p.add_argument("--ablate", action="append", choices=ABLATIONS)
    p.add_argument("--two-stage", action="store_true", help="also train the stage-one gate")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model")
    common(p, model=True)
    p.add_argument("--split", choices=("zsid", "gzsid"))
    p.add_argument("--two-stage", action="store_true")
    p.add_argument("--ablate", action="append", choices=ABLATIONS)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-sim", help="export a similarity matrix")
    common(p, model=True)
    p.add_argument("--kind", choices=("ss", "es"), default="ss")
    p.add_argument("--mode", choices=("zsl", "gzsl"), default="gzsl")
    p.add_argument("--format", choices=("csv", "svg"), default="csv", help="svg adds a heatmap next to the CSV")
    p.set_defaults(func=cmd_export_sim)

    p = sub.add_parser("dump-reps", help="2-D projection of utterance representations")
    common(p, model=True)
    p.add_argument("--split", choices=("zsid", "gzsid"))
    p.set_defaults(func=cmd_dump_reps)

    p = sub.add_parser("sweep", help="sweep a loss coefficient")
    common(p, config=True)
    p.add_argument("--param", choices=tuple(SWEEP_PARAMS), required=True)
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--seed", type=int)
    p.add_argument("--split", choices=("zsid", "gzsid"))
    p.add_argument("--ablate", action="append", choices=ABLATIONS)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("run", help="train and evaluate over several seeds, reporting the mean")
    common(p, config=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--split", choices=("zsid", "gzsid"))
    p.add_argument("--two-stage", action="store_true")
    p.add_argument("--ablate", action="append", choices=ABLATIONS)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_context():
            return args.func(args)
    except DirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
