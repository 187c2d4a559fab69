"""``maldyn`` command line: every pipeline stage as a subcommand.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
Each run appends one JSON line (stage, duration, seed, input and output
digests) to ``runlog.jsonl`` in the output location unless ``--run-log`` says
otherwise.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .behavior_log import Manifest, load_log, load_manifest
from .cluster import best_k, dbscan, k_scan, kmeans, report_for, save_reports
from .config import PipelineConfig, load_config
from .errors import ConfigError, DataError, EmptyCorpus, ModelFormatError, UnreadableFile
from .featurize import FeatureMatrix, Vocabulary, build_vocabulary, featurize_corpus
from .gbdt import DualModel, evaluate, explain, feature_importance, loads, train_dual
from .generate import GeneratorModel, export_generated, fit_generator, generate, load_texts
from .predict import coverage_curve_report, partition_by_year
from .reduce import fit_svd, normalize, save_embedding, tfidf_matrix, train_autoencoder
from .similarity import MODES
from .transform import TokenText, text_to_image, to_token_text


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------- helpers

def _digest(path: Path) -> str | None:
    """sha256 of a file, or of the sorted (name, digest) listing of a directory."""
    if path.is_file():
        return hashlib.sha256(path.read_bytes()).hexdigest()
    if path.is_dir():
        h = hashlib.sha256()
        for p in sorted(q for q in path.rglob("*") if q.is_file() and q.name != "runlog.jsonl"):
            h.update(str(p.relative_to(path)).encode())
            h.update(hashlib.sha256(p.read_bytes()).digest())
        return h.hexdigest()
    return None


class Run:
    """Collects inputs and outputs of one stage for the run log."""

    def __init__(self, stage: str, seed: int):
        self.stage = stage
        self.seed = seed
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []
        self.started = time.perf_counter()

    def read(self, *paths) -> None:
        self.inputs += [Path(p) for p in paths if p is not None]

    def wrote(self, *paths) -> None:
        self.outputs += [Path(p) for p in paths]

    def record(self) -> dict:
        return {
            "stage": self.stage,
            "duration_s": round(time.perf_counter() - self.started, 6),
            "seed": self.seed,
            "inputs": {str(p): _digest(p) for p in self.inputs},
            "outputs": {str(p): _digest(p) for p in self.outputs},
        }


def _out_dir(path) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _labels(manifest: Manifest) -> dict[str, int]:
    return {e.sample_id: 1 if e.label == "malware" else 0 for e in manifest if e.label != "unknown"}


def _malware(manifest: Manifest) -> Manifest:
    return manifest.filter(lambda e: e.label == "malware")


def _texts(manifest: Manifest, cfg: PipelineConfig) -> dict[str, TokenText]:
    tc = cfg.text_config()
    return {e.sample_id: to_token_text(load_log(manifest.resolve(e), e.sample_id), tc) for e in manifest}


def _embed(manifest: Manifest, cfg: PipelineConfig, out: Path, run: Run):
    """TF-IDF over malware token texts, normalized and reduced."""
    mal = _malware(manifest)
    if len(mal) == 0:
        raise EmptyCorpus("manifest has no malware samples to cluster")
    texts = _texts(mal, cfg)
    ids = list(texts)
    vocab = build_vocabulary([texts[s] for s in ids], cfg["featurize.ngram"])
    X = normalize(tfidf_matrix([texts[s] for s in ids], vocab))
    seed = cfg.stage_seed("reduce.seed")
    if cfg["reduce.method"] == "svd":
        k = min(cfg["reduce.k"], *X.shape)
        reducer = fit_svd(X, k, cfg["reduce.n_iter"], seed)
        emb = reducer.transform(X)
        (out / "reducer.json").write_text(reducer.dumps(), encoding="utf-8")
    else:
        ae = train_autoencoder(X, epochs=cfg["reduce.epochs"], lr=cfg["reduce.lr"], seed=seed,
                               batch_size=cfg["reduce.batch_size"])
        emb = ae.encode(X)
        (out / "reducer.json").write_text(ae.dumps(), encoding="utf-8")
    save_embedding(out / "embedding.csv", ids, emb)
    run.wrote(out / "reducer.json", out / "embedding.csv")
    by_id = mal.by_id()
    return ids, emb, [by_id[s].family for s in ids]


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _split(ids: list[str], fraction: float, seed: int) -> tuple[list[str], list[str]]:
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ids))
    n_test = max(1, int(round(fraction * len(ids))))
    test = sorted(ids[i] for i in perm[:n_test])
    train = sorted(ids[i] for i in perm[n_test:])
    return train, test


# ---------------------------------------------------------------- commands

def cmd_synth(args, cfg, run):
    from .synthetic import make_synthetic_corpus

    out = _out_dir(args.out)
    make_synthetic_corpus(out, n_samples=args.n, seed=cfg.seed)
    run.wrote(out / "manifest.csv", out / "logs")
    print(f"wrote {args.n} samples to {out}")


def cmd_parse(args, cfg, run):
    manifest = load_manifest(args.manifest)
    run.read(args.manifest)
    out = _out_dir(args.out)
    ok = 0
    with open(out / "parsed.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "n_actions", "n_processes", "status"])
        for e in manifest:
            try:
                log = load_log(manifest.resolve(e), e.sample_id)
            except DataError as exc:
                if args.strict:
                    raise
                w.writerow([e.sample_id, 0, 0, f"error: {exc}"])
                continue
            ok += 1
            w.writerow([e.sample_id, len(log), len({a.call_pid for a in log.actions}), "ok"])
    run.wrote(out / "parsed.csv")
    if ok == 0:
        raise EmptyCorpus("no log in the manifest could be parsed")
    print(f"parsed {ok}/{len(manifest)} logs")


def cmd_featurize(args, cfg, run):
    manifest = load_manifest(args.manifest)
    run.read(args.manifest)
    vocab = names = None
    if args.reference:
        ref = Path(args.reference)
        vocab = Vocabulary.from_json((ref / "vocab.json").read_text(encoding="utf-8"))
        names = FeatureMatrix.load(ref).names
        run.read(ref / "vocab.json", ref / "feature_names.csv")
    fm, vocab = featurize_corpus(manifest, vocab, cfg.featurize_config(), names)
    out = _out_dir(args.out)
    fm.save(out)
    (out / "vocab.json").write_text(vocab.to_json(), encoding="utf-8")
    run.wrote(out / "features.csv", out / "feature_names.csv", out / "samples.csv", out / "vocab.json")
    print(f"featurized {len(fm.sample_ids)} samples x {len(fm.names)} features ({len(fm.errors)} errors)")


def cmd_train(args, cfg, run):
    manifest = load_manifest(args.manifest)
    fm = FeatureMatrix.load(args.features)
    run.read(args.manifest, args.features)
    labels = _labels(manifest)
    ids = [s for s in fm.sample_ids if s in labels]
    if not ids:
        raise EmptyCorpus("no labelled sample has features")
    if args.split:
        train_ids, test_ids = _split(ids, cfg["gbdt.test_fraction"], cfg.seed)
    else:
        train_ids, test_ids = ids, []
    y = np.array([labels[s] for s in train_ids])
    model = train_dual(fm.rows(train_ids), y, cfg.gbdt_params("a"), cfg.gbdt_params("b"),
                       cfg["gbdt.blend"], fm.names)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(model.dumps(), encoding="utf-8")
    run.wrote(out)
    if args.split:
        split_path = out.with_name("split.csv")
        with open(split_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "part"])
            w.writerows([(s, "train") for s in train_ids] + [(s, "test") for s in test_ids])
        run.wrote(split_path)
    print(f"trained dual model on {len(train_ids)} samples -> {out}")


def _load_model(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"cannot read model {path}: {exc}") from None
    return loads(text)


def cmd_eval(args, cfg, run):
    model = _load_model(args.model)
    manifest = load_manifest(args.manifest)
    fm = FeatureMatrix.load(args.features).align(model.feature_names)
    run.read(args.model, args.manifest, args.features, args.split)
    labels = _labels(manifest)
    ids = [s for s in fm.sample_ids if s in labels]
    if args.split:
        with open(args.split, newline="", encoding="utf-8") as fh:
            test = {r["sample_id"] for r in csv.DictReader(fh) if r["part"] == "test"}
        ids = [s for s in ids if s in test]
    if not ids:
        raise EmptyCorpus("no labelled sample to evaluate")
    X, y = fm.rows(ids), np.array([labels[s] for s in ids])
    result = {"n": len(ids), "dual": evaluate(model, X, y).as_dict()}
    if isinstance(model, DualModel):
        result["model_a"] = evaluate(model.model_a, X, y).as_dict()
        result["model_b"] = evaluate(model.model_b, X, y).as_dict()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, result)
    run.wrote(out)
    d = result["dual"]
    print(f"accuracy={d['accuracy']:.4f} precision={d['precision']:.4f} recall={d['recall']:.4f} f1={d['f1']:.4f}")


def cmd_transform(args, cfg, run):
    manifest = load_manifest(args.manifest)
    run.read(args.manifest)
    out = _out_dir(args.out)
    texts = _texts(manifest, cfg)
    (out / "texts").mkdir(exist_ok=True)
    for sid, t in texts.items():
        (out / "texts" / f"{sid}.txt").write_text(t.serialize() + "\n", encoding="utf-8")
    run.wrote(out / "texts")
    if args.images:
        (out / "images").mkdir(exist_ok=True)
        ic = cfg.image_config()
        for sid, t in texts.items():
            text_to_image(t, ic).save_pgm(out / "images" / f"{sid}.pgm")
        run.wrote(out / "images")
    print(f"transformed {len(texts)} samples")


def cmd_cluster(args, cfg, run):
    manifest = load_manifest(args.manifest)
    run.read(args.manifest)
    out = _out_dir(args.out)
    ids, emb, truth = _embed(manifest, cfg, out, run)
    if cfg["cluster.algorithm"] == "kmeans":
        k = args.k or cfg["cluster.k"]
        model = kmeans(emb, k, cfg.stage_seed("cluster.seed"), cfg["cluster.max_iter"])
        param = k
    else:
        model = dbscan(emb, cfg["cluster.eps"], cfg["cluster.min_pts"])
        param = cfg["cluster.eps"]
    model.save_assignments(out / "assignments.csv", ids)
    rep = report_for(model, emb, truth, param) if any(t is not None for t in truth) else None
    if rep:
        save_reports(out / "cluster_report.csv", [rep])
        run.wrote(out / "cluster_report.csv")
    run.wrote(out / "assignments.csv")
    msg = f"{model.n_clusters} clusters over {len(ids)} samples"
    if rep:
        msg += f"; purity={rep.score:.4f} matched={rep.matched_score:.4f}"
    print(msg)


def cmd_kscan(args, cfg, run):
    manifest = load_manifest(args.manifest)
    run.read(args.manifest)
    out = _out_dir(args.out)
    ids, emb, truth = _embed(manifest, cfg, out, run)
    k_list = args.k_list or cfg["cluster.k_list"]
    k_list = [k for k in k_list if k <= len(ids)]
    reports = k_scan(emb, k_list, truth, cfg.stage_seed("cluster.seed"), cfg["cluster.max_iter"])
    save_reports(out / "kscan.csv", reports)
    run.wrote(out / "kscan.csv")
    best = best_k(reports)
    print(f"best k={int(best.k_or_eps)} matched={best.matched_score:.4f} purity={best.score:.4f}")


def _t0_texts(manifest: Manifest, cfg, scheme: str):
    mal = _malware(manifest)
    part = partition_by_year(mal, scheme)
    if not part.t0:
        raise EmptyCorpus(f"partition T0 is empty under scheme {scheme}")
    texts = _texts(mal, cfg)
    return part, texts


def cmd_gen_fit(args, cfg, run):
    manifest = load_manifest(args.manifest)
    run.read(args.manifest)
    part, texts = _t0_texts(manifest, cfg, args.scheme or cfg["coverage.scheme"])
    model = fit_generator([texts[s] for s in part.t0], cfg["generate.order"], cfg["generate.mutation_rate"],
                          cfg.stage_seed("generate.seed"))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(model.dumps(), encoding="utf-8")
    run.wrote(out)
    print(f"fitted order-{model.order} generator on {len(part.t0)} T0 samples -> {out}")


def cmd_gen_sample(args, cfg, run):
    try:
        model = GeneratorModel.loads(Path(args.model).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ModelFormatError(f"cannot load generator {args.model}: {exc}") from None
    run.read(args.model)
    n = args.n or cfg["generate.n_samples"]
    texts = generate(model, n)
    export_generated(texts, args.out)
    run.wrote(args.out)
    print(f"generated {n} samples -> {args.out}")


def cmd_coverage(args, cfg, run):
    manifest_path = args.manifest or Path(cfg["paths.data_dir"]) / "manifest.csv"
    manifest = load_manifest(manifest_path)
    run.read(manifest_path)
    scheme = args.scheme or cfg["coverage.scheme"]
    part, texts = _t0_texts(manifest, cfg, scheme)
    if args.generated:
        g = load_texts(args.generated)
        run.read(args.generated)
    else:
        model = fit_generator([texts[s] for s in part.t0], cfg["generate.order"], cfg["generate.mutation_rate"],
                              cfg.stage_seed("generate.seed"))
        g = generate(model, args.n or cfg["generate.n_samples"])
    modes = MODES if args.mode == "all" else (args.mode,) if args.mode else cfg["coverage.modes"]
    out = _out_dir(args.out or cfg["paths.out_dir"])
    reports = coverage_curve_report(texts, part, g, out, cfg.similarity_config(), modes,
                                    cfg["coverage.thresholds"], jobs=args.jobs or cfg["global.jobs"])
    for mode in reports:
        run.wrote(out / f"coverage_{mode}.csv", out / f"coverage_{mode}.svg")
    run.wrote(out / "coverage.csv")
    for mode, rep in reports.items():
        for p in rep.partitions:
            rates = " ".join(f"{r:.3f}" for r in rep.rates(p))
            print(f"{mode:6s} {p}: {rates}")


def cmd_explain(args, cfg, run):
    model = _load_model(args.model)
    fm = FeatureMatrix.load(args.features).align(model.feature_names)
    run.read(args.model, args.features)
    if args.sample_id not in fm.sample_ids:
        raise DataError("sample has no feature row", args.sample_id)
    row = fm.rows([args.sample_id])[0]
    members = [("model_a", model.model_a), ("model_b", model.model_b)] if isinstance(model, DualModel) \
        else [("model", model)]
    result = {"sample_id": args.sample_id, "probability": float(model.predict_proba(row[None, :])[0])}
    for name, m in members:
        ex = explain(m, row)
        top = sorted(ex.contributions, key=lambda kv: -abs(kv[1]))[: args.top]
        result[name] = {"bias": ex.bias, "raw_score": ex.raw_score, "top": [[k, v] for k, v in top]}
    result["importance"] = [[k, v] for k, v in list(feature_importance(model).items())[: args.top]]
    text = json.dumps(result, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        run.wrote(args.out)
    print(text)


def cmd_report(args, cfg, run):
    d = Path(args.dir)
    if not d.is_dir():
        raise DataError(f"{d} is not a directory")
    lines = ["# maldyn run report", ""]
    for metrics in sorted(d.rglob("metrics.json")):
        run.read(metrics)
        m = json.loads(metrics.read_text(encoding="utf-8"))
        lines += [f"## Classification ({metrics.relative_to(d)})", "", "| model | accuracy | precision | recall | f1 |",
                  "|---|---|---|---|---|"]
        for name in ("model_a", "model_b", "dual"):
            if name in m:
                r = m[name]
                lines.append(f"| {name} | {r['accuracy']:.4f} | {r['precision']:.4f} | {r['recall']:.4f} "
                             f"| {r['f1']:.4f} |")
        lines.append("")
    for scan in sorted(d.rglob("kscan.csv")):
        run.read(scan)
        with open(scan, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        lines += [f"## k scan ({scan.relative_to(d)})", "", "| k | purity | matched | adjusted cosine | mahalanobis |",
                  "|---|---|---|---|---|"]
        for r in rows:
            lines.append(f"| {r['k']} | {float(r['score']):.4f} | {float(r['matched_score']):.4f} "
                         f"| {float(r['adjusted_cosine']):.4f} | {float(r['mahalanobis']):.4f} |")
        lines.append("")
    for cov in sorted(d.rglob("coverage.csv")):
        run.read(cov)
        with open(cov, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        lines += [f"## Coverage ({cov.relative_to(d)})", "", "| mode | threshold | partition | covered | total | rate |",
                  "|---|---|---|---|---|---|"]
        for r in rows:
            lines.append(f"| {r['mode']} | {r['threshold']} | {r['partition']} | {r['covered']} | {r['total']} "
                         f"| {float(r['rate']):.4f} |")
        lines.append("")
    out = Path(args.out) if args.out else d / "report.md"
    out.write_text("\n".join(lines), encoding="utf-8")
    run.wrote(out)
    print(f"wrote {out}")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="maldyn", description="Malware dynamic-behavior analytics pipeline.")
    p.add_argument("--version", action="version", version=f"maldyn {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--seed", type=int, help="global seed (default: $MALDYN_SEED, then config)")
    common.add_argument("--jobs", type=int, help="worker cap for parallel stages")
    common.add_argument("--run-log", help="JSON-lines run log (default: runlog.jsonl beside the outputs)")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("synth", cmd_synth, "write the bundled synthetic corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int, default=200)

    sp = add("parse", cmd_parse, "parse every log of a manifest and summarize")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--strict", action="store_true", help="fail on the first unparsable log")

    sp = add("featurize", cmd_featurize, "extract the feature table")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--reference", help="reuse vocab and columns of an earlier featurize output")

    sp = add("train", cmd_train, "train the dual GBDT classifier")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True, help="model JSON path")
    sp.add_argument("--split", action="store_true", help="hold out gbdt.test_fraction; writes split.csv")

    sp = add("eval", cmd_eval, "evaluate a model; writes metrics JSON")
    sp.add_argument("--model", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--split", help="split.csv from train --split; evaluates its test part")
    sp.add_argument("--out", required=True)

    sp = add("transform", cmd_transform, "write token texts and optional grayscale images")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--images", action="store_true")

    sp = add("cluster", cmd_cluster, "reduce malware TF-IDF and cluster")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--k", type=int)

    sp = add("kscan", cmd_kscan, "k-means over a list of k with family scores")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--k-list", type=lambda s: [int(x) for x in s.split(",")])

    sp = add("gen-fit", cmd_gen_fit, "fit the sequence generator on T0 malware")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--scheme", choices=("7:1:1:1", "4:2:2:2"))
    sp.add_argument("--out", required=True)

    sp = add("gen-sample", cmd_gen_sample, "draw samples from a fitted generator")
    sp.add_argument("--model", required=True)
    sp.add_argument("--n", type=int)
    sp.add_argument("--out", required=True)

    sp = add("coverage", cmd_coverage, "coverage curves of T1..T3 by a generated set")
    sp.add_argument("--manifest", help="default: <paths.data_dir>/manifest.csv")
    sp.add_argument("--scheme", choices=("7:1:1:1", "4:2:2:2"))
    sp.add_argument("--mode", choices=MODES + ("all",))
    sp.add_argument("--generated", help="directory from gen-sample; otherwise fit and sample inline")
    sp.add_argument("--n", type=int, help="generated set size when sampling inline")
    sp.add_argument("--out")

    sp = add("explain", cmd_explain, "per-feature contributions for one sample")
    sp.add_argument("--model", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--sample-id", required=True)
    sp.add_argument("--top", type=int, default=10)
    sp.add_argument("--out")

    sp = add("report", cmd_report, "summarize metrics, k scans and coverage under a directory")
    sp.add_argument("--dir", required=True)
    sp.add_argument("--out")
    return p


def _resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.values["global.seed"] = args.seed
    elif os.environ.get("MALDYN_SEED"):
        try:
            cfg.values["global.seed"] = int(os.environ["MALDYN_SEED"])
        except ValueError:
            raise ConfigError(f"MALDYN_SEED is not an integer: {os.environ['MALDYN_SEED']!r}") from None
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg.values["global.jobs"] = args.jobs
    return cfg


def _log_path(args, run: Run) -> Path | None:
    if args.run_log:
        return Path(args.run_log)
    if not run.outputs:
        return None
    first = run.outputs[0]
    base = first if first.is_dir() and first.name not in ("logs", "texts") else first.parent
    return base / "runlog.jsonl"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _resolve_config(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"maldyn: config error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    run = Run(args.command, cfg.seed)
    if args.config:
        run.read(args.config)
    try:
        args.func(args, cfg, run)
    except DataError as exc:
        print(f"maldyn {args.command}: data error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"maldyn {args.command}: config error: {exc}", file=sys.stderr)
        return 1
    log_path = _log_path(args, run)
    if log_path is not None:
        log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(run.record(), sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
