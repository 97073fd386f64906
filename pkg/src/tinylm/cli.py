"""Command-line pipeline: preprocess -> train/search -> evaluate -> report.

All experiment state lives on disk as plain files under the output directory,
so every step is re-runnable and diffable. Ledger writes are keyed upserts
with atomic renames: rerunning a step never appends duplicates, and a fixed
manifest + seed reproduces every CSV byte for byte. Timing information goes
to a separate JSON sidecar precisely so the CSVs stay comparable.

Manifest format: UTF-8 ``key = value`` lines, ``#`` comments. Paths are
resolved relative to the manifest file. See the README for the key list.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import re
import sys
import time
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import cloze as cloze_mod
from . import embeddings as emb_mod
from . import zorro as zorro_mod
from .checkpoint import load_checkpoint
from .corpus import exclude_speakers, read_transcript
from .errors import TinylmError, UserError
from .models import ModelConfig
from .preprocess import (apply_unk_split, compute_stats, filter_short,
                         format_stats_table, normalize, split_corpus,
                         stats_csv_rows, token_frequencies)
from .trainer import TrainConfig, grid_search, perplexity, train_model
from .vocab import Vocabulary, build_vocab

log = logging.getLogger("tinylm")

_SPLIT_FILES = ("train.txt", "val.txt", "test.txt")


# ---------------------------------------------------------------------------
# small file helpers


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def write_csv(path: Path, rows: list[list[str]]) -> None:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    atomic_write_text(path, buf.getvalue())


def read_csv(path: Path) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def upsert_csv(path: Path, header: list[str], key_width: int,
               new_rows: list[list[str]]) -> None:
    """Keyed ledger rewrite: replace rows sharing a key prefix with the new
    ones, keep the rest, sort by key, write atomically. Idempotent."""
    rows: dict[tuple, list[str]] = {}
    if path.exists():
        existing = read_csv(path)
        if existing and existing[0] != header:
            raise UserError(f"{path} has header {existing[0]}, expected {header}")
        for row in existing[1:]:
            rows[tuple(row[:key_width])] = row
    for row in new_rows:
        rows[tuple(row[:key_width])] = row
    ordered = [header] + [rows[k] for k in sorted(rows)]
    write_csv(path, ordered)


def update_run_meta(out: Path, section: str, payload: dict) -> None:
    meta_path = out / "run_meta.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    meta[section] = payload
    atomic_write_text(meta_path, json.dumps(meta, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# manifest


def parse_manifest(path: Path) -> dict[str, str]:
    if not path.exists():
        raise UserError(f"manifest not found: {path}")
    out: dict[str, str] = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        # inline comments start at a '#' preceded by whitespace, so values
        # such as run#3 survive while `key = value  # note` parses as value
        line = re.sub(r"\s#.*$", "", line).strip()
        if "=" not in line:
            raise UserError(f"{path}:{line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


class Manifest:
    def __init__(self, values: dict[str, str], base: Path):
        self.values = values
        self.base = base

    def get(self, key: str, default: str | None = None) -> str:
        if key in self.values:
            return self.values[key]
        if default is None:
            raise UserError(f"manifest is missing required key {key!r}")
        return default

    def get_path(self, key: str, default: str | None = None) -> Path:
        return (self.base / self.get(key, default)).resolve()

    def get_int(self, key: str, default: int) -> int:
        raw = self.get(key, str(default))
        try:
            return int(raw)
        except ValueError:
            raise UserError(f"manifest key {key!r}: expected an integer, got {raw!r}") from None

    def get_float(self, key: str, default: float) -> float:
        raw = self.get(key, str(default))
        try:
            return float(raw)
        except ValueError:
            raise UserError(f"manifest key {key!r}: expected a number, got {raw!r}") from None

    def get_list(self, key: str, default: str) -> list[str]:
        return [v.strip() for v in self.get(key, default).split(",") if v.strip()]


def load_manifest(args) -> Manifest:
    if not args.manifest:
        raise UserError("--manifest is required")
    path = Path(args.manifest).resolve()
    return Manifest(parse_manifest(path), path.parent)


def out_dir(args, manifest: Manifest) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = manifest.base / manifest.get("out_dir", "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# corpus + split loading


def load_raw_utterances(manifest: Manifest) -> list[list[str]]:
    path = manifest.get_path("dataset.path")
    fmt = manifest.get("dataset.format", "")
    excluded = frozenset(manifest.get_list("exclude_speakers", "CHI"))
    if not path.exists():
        raise UserError(f"dataset path not found: {path}")
    if path.is_dir():
        files = sorted(path.glob("*.cha")) + sorted(path.glob("*.txt"))
    else:
        files = [path]
    if not files:
        raise UserError(f"no .cha or .txt files under {path}")
    utterances: list[list[str]] = []
    for f in files:
        transcript = read_transcript(f, fmt=fmt or None)
        for utt in exclude_speakers(transcript, excluded):
            tokens = normalize(utt.text)
            if tokens:
                utterances.append(tokens)
    if not utterances:
        raise UserError(f"no usable utterances in {path}")
    return utterances


def splits_dir(out: Path) -> Path:
    return out / "splits"


def write_splits(out: Path, splits: dict[str, list[list[str]]], vocab: Vocabulary) -> None:
    d = splits_dir(out)
    d.mkdir(parents=True, exist_ok=True)
    for name, utts in splits.items():
        atomic_write_text(d / f"{name}.txt",
                          "".join(" ".join(u) + "\n" for u in utts))
    vocab.save(d / "vocab.txt")


def load_splits(out: Path) -> tuple[dict[str, list[list[str]]], Vocabulary]:
    d = splits_dir(out)
    missing = [str(d / f) for f in _SPLIT_FILES + ("vocab.txt",)
               if not (d / f).exists()]
    if missing:
        raise UserError("missing preprocess outputs (run `tinylm preprocess`): "
                        + ", ".join(missing))
    splits = {}
    for f in _SPLIT_FILES:
        text = (d / f).read_text(encoding="utf-8")
        splits[f[:-4]] = [line.split() for line in text.splitlines() if line]
    return splits, Vocabulary.load(d / "vocab.txt")


def model_tag(family: str, layers: int, seed: int) -> str:
    return f"{family}{layers}_seed{seed}"


def model_config_from(manifest: Manifest, vocab_size: int) -> ModelConfig:
    return ModelConfig(
        family=manifest.get("family", "lstm"),
        n_layers=manifest.get_int("layers", 1),
        vocab_size=vocab_size,
        d_model=manifest.get_int("d_model", 512),
        d_ffn=manifest.get_int("d_ffn", 2048),
        n_heads=manifest.get_int("n_heads", 8),
        dropout=manifest.get_float("dropout", 0.1),
        max_len=manifest.get_int("max_len", 512),
    )


def train_config_from(manifest: Manifest, seed: int) -> TrainConfig:
    return TrainConfig(
        learning_rate=manifest.get_float("learning_rate", 1e-3),
        batch_size=manifest.get_int("batch_size", 16),
        weight_decay=manifest.get_float("weight_decay", 0.01),
        dropout=manifest.get_float("dropout", 0.1),
        n_heads=manifest.get_int("n_heads", 8),
        max_epochs=manifest.get_int("max_epochs", 100),
        seed=seed,
    )


def checkpoint_path(out: Path, tag: str) -> Path:
    return out / "checkpoints" / f"{tag}.ckpt"


def resolve_checkpoint(args, manifest: Manifest, out: Path) -> Path:
    if getattr(args, "checkpoint", None):
        path = Path(args.checkpoint)
    else:
        tag = model_tag(manifest.get("family", "lstm"),
                        manifest.get_int("layers", 1), args.seed)
        path = checkpoint_path(out, tag)
    if not path.exists():
        raise UserError(f"checkpoint not found: {path}")
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_preprocess(args) -> int:
    manifest = load_manifest(args)
    out = out_dir(args, manifest)
    utterances = load_raw_utterances(manifest)
    sc = split_corpus(utterances, seed=args.seed)
    sc = replace(sc, train=filter_short(sc.train), val=filter_short(sc.val))
    sc, frequencies = apply_unk_split(sc, min_count=manifest.get_int("min_count", 3))
    vocab = build_vocab(sc.train)
    write_splits(out, sc.splits(), vocab)
    stats = stats_for(sc.splits(), vocab)
    write_csv(out / "stats.csv", stats_csv_rows(stats))
    print(format_stats_table(stats), end="")
    log.info("wrote %s and %s", splits_dir(out), out / "stats.csv")
    return 0


def stats_for(splits: dict[str, list[list[str]]], vocab: Vocabulary):
    train_vocab = set(vocab.words())
    return {name: compute_stats(splits[name], train_vocab)
            for name in ("train", "val", "test")}


def cmd_stats(args) -> int:
    manifest = load_manifest(args)
    out = out_dir(args, manifest)
    try:
        splits, vocab = load_splits(out)
    except UserError:
        utterances = load_raw_utterances(manifest)
        sc = split_corpus(utterances, seed=args.seed)
        sc = replace(sc, train=filter_short(sc.train), val=filter_short(sc.val))
        sc, _ = apply_unk_split(sc, min_count=manifest.get_int("min_count", 3))
        splits, vocab = sc.splits(), build_vocab(sc.train)
    stats = stats_for(splits, vocab)
    write_csv(out / "stats.csv", stats_csv_rows(stats))
    print(format_stats_table(stats), end="")
    return 0


_LEDGER_HEADER = ["family", "layers", "learning_rate", "batch_size",
                  "weight_decay", "dropout", "n_heads", "seed",
                  "best_val_loss", "best_epoch", "n_epochs", "checkpoint"]


def _ledger_row(model_cfg: ModelConfig, cfg: TrainConfig, best_val_loss: float,
                best_epoch: int, n_epochs: int, ckpt: str) -> list[str]:
    return [model_cfg.family, str(model_cfg.n_layers), repr(cfg.learning_rate),
            str(cfg.batch_size), repr(cfg.weight_decay), repr(cfg.dropout),
            str(cfg.n_heads), str(cfg.seed), repr(best_val_loss),
            str(best_epoch), str(n_epochs), ckpt]


def cmd_train(args) -> int:
    manifest = load_manifest(args)
    out = out_dir(args, manifest)
    splits, vocab = load_splits(out)
    train_seqs = [vocab.encode(u) for u in splits["train"]]
    val_seqs = [vocab.encode(u) for u in splits["val"]]
    model_cfg = model_config_from(manifest, len(vocab))
    cfg = train_config_from(manifest, args.seed)
    tag = model_tag(model_cfg.family, model_cfg.n_layers, args.seed)
    ckpt = checkpoint_path(out, tag)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    result, _ = train_model(model_cfg, cfg, train_seqs, val_seqs,
                            checkpoint_path=ckpt,
                            dataset_name=manifest.get("dataset.name", "dataset"))
    elapsed = time.monotonic() - started
    row = _ledger_row(model_cfg, cfg, result.best_val_loss, result.best_epoch,
                      len(result.trace), str(ckpt.name))
    upsert_csv(out / "ledger.csv", _LEDGER_HEADER, key_width=8, new_rows=[row])
    update_run_meta(out, f"train.{tag}", {"wall_time_s": round(elapsed, 3)})
    print(f"{tag}: best val loss {result.best_val_loss:.6f} "
          f"(epoch {result.best_epoch}/{len(result.trace)}), "
          f"val ppl {math.exp(result.best_val_loss):.3f}")
    return 0


def cmd_search(args) -> int:
    manifest = load_manifest(args)
    out = out_dir(args, manifest)
    splits, vocab = load_splits(out)
    train_seqs = [vocab.encode(u) for u in splits["train"]]
    val_seqs = [vocab.encode(u) for u in splits["val"]]
    model_cfg = model_config_from(manifest, len(vocab))
    base = train_config_from(manifest, args.seed)
    lrs = [float(v) for v in manifest.get_list("grid.learning_rate",
                                               repr(base.learning_rate))]
    batches = [int(v) for v in manifest.get_list("grid.batch_size",
                                                 str(base.batch_size))]
    decays = [float(v) for v in manifest.get_list("grid.weight_decay",
                                                  repr(base.weight_decay))]
    configs = [replace(base, learning_rate=lr, batch_size=bs, weight_decay=wd)
               for lr in lrs for bs in batches for wd in decays]
    seeds = [int(s) for s in manifest.get_list("seeds", "0,1,2")]
    result = grid_search(model_cfg, configs, train_seqs, val_seqs, seeds=seeds,
                         out_dir=out / "checkpoints", jobs=args.jobs)
    rows = [_ledger_row(model_cfg, replace(cell.config, seed=cell.seed),
                        cell.best_val_loss, cell.best_epoch, 0,
                        Path(cell.checkpoint_path).name if cell.checkpoint_path else "")
            for cell in result.cells]
    upsert_csv(out / "search.csv", _LEDGER_HEADER, key_width=8, new_rows=rows)
    update_run_meta(out, "search", {"wall_time_s": round(result.wall_time, 3)})
    best = result.best_config
    print(f"best config: lr={best.learning_rate} batch={best.batch_size} "
          f"wd={best.weight_decay} -> mean val ppl {result.best_mean_ppl:.3f} "
          f"over seeds {seeds}")
    return 0


def cmd_ppl(args) -> int:
    manifest = load_manifest(args)
    out = out_dir(args, manifest)
    splits, vocab = load_splits(out)
    ckpt = resolve_checkpoint(args, manifest, out)
    model, _ = load_checkpoint(ckpt)
    rows = []
    for split_name in args.splits.split(","):
        split_name = split_name.strip()
        if split_name not in splits:
            raise UserError(f"unknown split {split_name!r}")
        seqs = [vocab.encode(u) for u in splits[split_name]]
        value = perplexity(model, seqs)
        rows.append([ckpt.stem, split_name, repr(value)])
        print(f"{ckpt.stem} {split_name} perplexity {value:.4f}")
    upsert_csv(out / "ppl.csv", ["model", "split", "perplexity"], key_width=2,
               new_rows=rows)
    return 0


def cmd_zorro_gen(args) -> int:
    manifest = load_manifest(args)
    out = out_dir(args, manifest)
    templates = zorro_mod.load_templates(
        Path(args.templates) if args.templates
        else manifest.get_path("zorro.templates"))
    vocab_paths = manifest.get_list("zorro.vocabs", "")
    if vocab_paths:
        vocabularies = [Vocabulary.load(manifest.base / p) for p in vocab_paths]
    else:
        _, vocab = load_splits(out)
        vocabularies = [vocab]
    shared = zorro_mod.intersect_vocab(vocabularies)
    pairs = zorro_mod.instantiate_suite(
        templates, shared,
        pairs_per_test=args.pairs or manifest.get_int("zorro.pairs_per_test", 2000),
        seed=args.seed)
    suite_path = out / "zorro_suite.tsv"
    tmp = suite_path.with_name(suite_path.name + ".tmp")
    try:
        zorro_mod.write_suite(pairs, tmp)
        tmp.replace(suite_path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    print(f"wrote {len(pairs)} pairs across {len(templates)} tests to {suite_path}")
    return 0


def cmd_zorro_eval(args) -> int:
    manifest = load_manifest(args)
    out = out_dir(args, manifest)
    _, vocab = load_splits(out)
    suite_path = Path(args.suite) if args.suite else out / "zorro_suite.tsv"
    if not suite_path.exists():
        raise UserError(f"suite not found: {suite_path} (run `tinylm zorro-gen`)")
    pairs = zorro_mod.read_suite(suite_path)
    ckpt = resolve_checkpoint(args, manifest, out)
    model, _ = load_checkpoint(ckpt)
    report = zorro_mod.evaluate_suite(model, vocab, pairs, normalize=args.normalize)
    rows = [[ckpt.stem, t.test_name, t.phenomenon, str(t.n_pairs),
             f"{t.accuracy:.6f}"] for t in report.tests]
    rows.append([ckpt.stem, "OVERALL", "", str(sum(t.n_pairs for t in report.tests)),
                 f"{report.overall:.6f}"])
    upsert_csv(out / "zorro_report.csv",
               ["model", "test", "phenomenon", "n", "accuracy"],
               key_width=2, new_rows=rows)
    print(zorro_mod.format_report(report))
    return 0


def cmd_cloze(args) -> int:
    manifest = load_manifest(args)
    out = out_dir(args, manifest)
    splits, vocab = load_splits(out)
    lexicon = cloze_mod.PosLexicon.load(manifest.get_path("lexicon"))
    items = cloze_mod.extract_clozes(splits["val"], lexicon)
    if args.limit and len(items) > args.limit:
        items = items[:args.limit]
    frequencies = token_frequencies(splits["train"])
    candidates = cloze_mod.build_candidates(vocab, lexicon, frequencies)
    ckpt = resolve_checkpoint(args, manifest, out)
    model, _ = load_checkpoint(ckpt)
    report, outcomes = cloze_mod.evaluate_clozes(model, vocab, items, candidates)
    write_csv(out / f"cloze_{ckpt.stem}.csv", cloze_mod.outcome_csv_rows(outcomes))
    upsert_csv(out / "cloze_report.csv",
               ["model", "n_clozes", "noun_ratio", "accuracy"], key_width=1,
               new_rows=[[ckpt.stem, str(report.n_clozes),
                          f"{report.noun_ratio:.6f}", f"{report.accuracy:.6f}"]])
    print(f"{ckpt.stem}: {report.n_clozes} clozes, noun ratio "
          f"{report.noun_ratio:.4f}, accuracy {report.accuracy:.4f}")
    return 0


def cmd_embed(args) -> int:
    manifest = load_manifest(args)
    out = out_dir(args, manifest)
    splits, vocab = load_splits(out)
    frequencies = token_frequencies(splits["train"])
    ckpt = resolve_checkpoint(args, manifest, out)
    model, _ = load_checkpoint(ckpt)
    embed_dir = out / "embed"
    embed_dir.mkdir(parents=True, exist_ok=True)
    k = manifest.get_int("embed.words_per_category", 6)
    for kind in ("syntactic", "semantic"):
        key = f"categories.{kind}"
        if key not in manifest.values:
            continue
        categories = emb_mod.load_categories(manifest.get_path(key))
        words, labels = [], []
        for label, members in categories.items():
            for w in emb_mod.select_category_words(members, frequencies, vocab, k=k):
                words.append(w)
                labels.append(label)
        if len(words) < 4:
            raise UserError(f"too few in-vocabulary words for {kind} categories")
        matrix = emb_mod.extract_embeddings(model, vocab, words)
        dist = emb_mod.distance_matrix(matrix.vectors)
        coords = emb_mod.tsne(dist, seed=args.seed)
        base = embed_dir / f"{kind}_{ckpt.stem}"
        emb_mod.export_scatter_csv(Path(str(base) + "_tsne.csv"), words, labels, coords)
        emb_mod.export_scatter_svg(Path(str(base) + "_tsne.svg"), words, labels,
                                   coords, title=f"{kind} t-SNE ({ckpt.stem})")
        merges = emb_mod.linkage(dist)
        emb_mod.export_merges_csv(Path(str(base) + "_merges.csv"), merges, words)
        root = emb_mod.agglomerative_cluster(dist, labels=words)
        emb_mod.export_dendrogram_svg(Path(str(base) + "_dendrogram.svg"), root,
                                      words, title=f"{kind} dendrogram ({ckpt.stem})")
        print(f"wrote {kind} embedding artifacts for {len(words)} words to {embed_dir}")
    return 0


def cmd_report(args) -> int:
    manifest = load_manifest(args)
    out = out_dir(args, manifest)
    expected = {
        "stats.csv": out / "stats.csv",
        "ledger.csv": out / "ledger.csv",
    }
    missing = [str(p) for p in expected.values() if not p.exists()]
    if missing:
        raise UserError("report needs earlier pipeline outputs; missing: "
                        + ", ".join(missing))
    report_dir = out / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    stats_rows = read_csv(out / "stats.csv")
    write_csv(report_dir / "table1_data.csv", stats_rows)

    ledger = read_csv(out / "ledger.csv")
    header, body = ledger[0], ledger[1:]
    col = {name: i for i, name in enumerate(header)}
    t3 = [["model", "seed", "best_val_loss", "val_ppl"]]
    for row in sorted(body, key=lambda r: (r[col["family"]], int(r[col["layers"]]),
                                           int(r[col["seed"]]))):
        tag = f"{row[col['family']]}{row[col['layers']]}"
        loss = float(row[col["best_val_loss"]])
        t3.append([tag, row[col["seed"]], row[col["best_val_loss"]],
                   f"{math.exp(loss):.4f}"])
    write_csv(report_dir / "table3_perplexity.csv", t3)

    produced = [str(report_dir / "table1_data.csv"),
                str(report_dir / "table3_perplexity.csv")]
    zorro_path = out / "zorro_report.csv"
    if zorro_path.exists():
        rows = read_csv(zorro_path)
        t4 = [["model", "overall_accuracy"]]
        for row in rows[1:]:
            if row[1] == "OVERALL":
                t4.append([row[0], row[4]])
        write_csv(report_dir / "table4_zorro.csv", t4)
        produced.append(str(report_dir / "table4_zorro.csv"))
    cloze_path = out / "cloze_report.csv"
    if cloze_path.exists():
        write_csv(report_dir / "table5_cloze.csv", read_csv(cloze_path))
        produced.append(str(report_dir / "table5_cloze.csv"))

    embed_dir = out / "embed"
    if embed_dir.is_dir():
        for svg in sorted(embed_dir.glob("*.svg")):
            atomic_write_text(report_dir / svg.name,
                              svg.read_text(encoding="utf-8"))

    lines = []
    for p in produced:
        rows = read_csv(Path(p))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines.append(Path(p).name)
        for r in rows:
            lines.append("  ".join(v.rjust(w) for v, w in zip(r, widths)))
        lines.append("")
    text = "\n".join(lines)
    atomic_write_text(report_dir / "tables.txt", text)
    print(text)
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tinylm",
        description="Small language models on small corpora: preprocessing, "
                    "training, and linguistic evaluation.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="experiment manifest (key = value lines)")
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--out", help="output directory (default: manifest out_dir)")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers")
    common.add_argument("--float32", action="store_true",
                        help="32-bit float mode (faster, less precise)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("preprocess", parents=[common],
                   help="parse, normalize, split, and unk-threshold the corpus")
    sub.add_parser("stats", parents=[common],
                   help="emit the dataset statistics table")
    sub.add_parser("train", parents=[common], help="train one model")
    sub.add_parser("search", parents=[common], help="hyperparameter grid search")

    p = sub.add_parser("ppl", parents=[common], help="perplexity of a checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--splits", default="val", help="comma list: val,test")

    p = sub.add_parser("zorro-gen", parents=[common],
                       help="generate a minimal-pair suite from templates")
    p.add_argument("--templates")
    p.add_argument("--pairs", type=int)

    p = sub.add_parser("zorro-eval", parents=[common],
                       help="score a checkpoint on a minimal-pair suite")
    p.add_argument("--suite")
    p.add_argument("--checkpoint")
    p.add_argument("--normalize", action="store_true",
                   help="length-normalize sentence scores")

    p = sub.add_parser("cloze", parents=[common],
                       help="noun/verb cloze evaluation on the validation split")
    p.add_argument("--checkpoint")
    p.add_argument("--limit", type=int, default=0, help="cap the number of items")

    p = sub.add_parser("embed", parents=[common],
                       help="embedding clustering and t-SNE artifacts")
    p.add_argument("--checkpoint")

    sub.add_parser("report", parents=[common],
                   help="aggregate ledgers into table-shaped CSVs")
    return parser


_COMMANDS = {
    "preprocess": cmd_preprocess,
    "stats": cmd_stats,
    "train": cmd_train,
    "search": cmd_search,
    "ppl": cmd_ppl,
    "zorro-gen": cmd_zorro_gen,
    "zorro-eval": cmd_zorro_eval,
    "cloze": cmd_cloze,
    "embed": cmd_embed,
    "report": cmd_report,
}


def _setup_logging() -> None:
    level = os.environ.get("TINYLM_LOG", "WARNING").upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        level = "WARNING"
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.float32:
        ad.set_default_dtype(np.float32)
    try:
        return _COMMANDS[args.command](args)
    except (TinylmError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
