"""Command-line orchestration: data preparation, training, evaluation, plots.

Every command takes --config <file>, --seed <int>, --out <dir> and writes a
manifest.json with the resolved configuration, seeds, and content hashes of
its inputs, so any emitted record can be reproduced bit-exactly.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from . import evaluation, textcorpus
from .evaluation import (
    FRAMEWORKS,
    RECORDS_NAME,
    SweepPlan,
    read_records,
    run_ablation,
    run_sweep,
    time_discount,
    write_manifest,
    write_records,
)
from .textcorpus import CorpusConfig, Vocabulary
from .training import train

log = logging.getLogger("tigsc")

TRAIN_FILE = "train.txt"
TEST_FILE = "test.txt"
VOCAB_FILE = "vocab.json"


def _load_values(args) -> dict:
    values = cfgmod.parse_config(args.config) if args.config else cfgmod.defaults()
    return values


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _data_dir(values: dict, required: bool = True) -> Path | None:
    path = values.get("data.dir")
    if path is None:
        if required:
            raise cfgmod.ConfigError("config key data.dir is required for this command")
        return None
    return Path(path)


def _load_split(data_dir: Path, which: str) -> list[list[str]]:
    lines = (data_dir / which).read_text(encoding="utf-8").splitlines()
    return [line.split() for line in lines if line.strip()]


def cmd_prepare_data(args) -> int:
    values = _load_values(args)
    corpus_path = values.get("corpus.path")
    if not corpus_path:
        raise cfgmod.ConfigError("config key corpus.path is required for prepare-data")
    out = _out_dir(args)
    ccfg = cfgmod.corpus_config(values, args.seed)
    vocab = textcorpus.build_vocabulary(corpus_path, ccfg)
    sentences = textcorpus.load_sentences(corpus_path, ccfg)
    train_s, test_s = textcorpus.split_sentences(sentences, ccfg)
    (out / TRAIN_FILE).write_text(
        "\n".join(" ".join(s) for s in train_s) + "\n", encoding="utf-8"
    )
    (out / TEST_FILE).write_text(
        "\n".join(" ".join(s) for s in test_s) + "\n", encoding="utf-8"
    )
    vocab.save(out / VOCAB_FILE)
    write_manifest(out, "prepare-data", values, [args.seed], inputs=[corpus_path])
    print(f"prepared {len(train_s)} train / {len(test_s)} test sentences, "
          f"vocabulary size {len(vocab)} -> {out}")
    return 0


def cmd_train(args) -> int:
    values = _load_values(args)
    data_dir = _data_dir(values)
    out = _out_dir(args)
    vocab = Vocabulary.load(data_dir / VOCAB_FILE)
    train_s = _load_split(data_dir, TRAIN_FILE)
    test_s = _load_split(data_dir, TEST_FILE)
    tcfg = cfgmod.train_config(values, args.seed)
    acfg = cfgmod.aedm_config(values, len(vocab))
    result = train(train_s, vocab, tcfg, out, val_sentences=test_s, aedm_cfg=acfg)
    write_manifest(
        out, "train", values, [args.seed],
        inputs=[data_dir / TRAIN_FILE, data_dir / TEST_FILE, data_dir / VOCAB_FILE],
    )
    last = result.last_checkpoint
    best = result.best_checkpoint
    print(f"trained {tcfg.epochs} epochs; last checkpoint {last}"
          + (f"; best (val BLEU-1 {result.best_val_bleu1:.4f}) {best}" if best else ""))
    return 0


def _plan_from_values(values: dict, out: Path, seeds: list[int],
                      frameworks: list[str] | None = None) -> SweepPlan:
    return SweepPlan(
        frameworks=frameworks or values["eval.frameworks"],
        channels=values["eval.channels"],
        snr_grid=values["eval.snr_grid"],
        seeds=seeds,
        checkpoints=values["checkpoints"],
        out_dir=str(out),
        n_sentences=values["eval.n_sentences"],
        workers=values["eval.workers"],
        max_len=values["eval.max_len"],
        eval_batch=values["eval.batch_size"],
        rician_k=values["channel.rician_k"],
    )


def cmd_sweep(args) -> int:
    values = _load_values(args)
    data_dir = _data_dir(values)
    out = _out_dir(args)
    seeds = values["eval.seeds"] if args.seed is None else [args.seed]
    plan = _plan_from_values(values, out, seeds)
    test_s = _load_split(data_dir, TEST_FILE)
    records = run_sweep(plan, test_s, data_dir / VOCAB_FILE)
    inputs = [data_dir / TEST_FILE, data_dir / VOCAB_FILE]
    inputs += [p for p in plan.checkpoints.values() if Path(p).is_file()]
    write_manifest(out, "sweep", values, seeds, inputs=inputs)
    print(f"{len(records)} records -> {out / RECORDS_NAME}")
    return 0


def cmd_evaluate(args) -> int:
    values = _load_values(args)
    if args.framework not in FRAMEWORKS:
        raise cfgmod.ConfigError(f"--framework must be one of {FRAMEWORKS}")
    if args.checkpoint:
        values["checkpoints"][args.framework] = args.checkpoint
    data_dir = _data_dir(values)
    out = _out_dir(args)
    seeds = [args.seed if args.seed is not None else values["eval.seeds"][0]]
    snr = int(values["channel.snr_db"])
    plan = _plan_from_values(values, out, seeds, frameworks=[args.framework])
    plan.channels = [values["channel.kind"]]
    plan.snr_grid = [snr]
    test_s = _load_split(data_dir, TEST_FILE)
    records = run_sweep(plan, test_s, data_dir / VOCAB_FILE)
    write_manifest(out, "evaluate", values, seeds,
                   inputs=[data_dir / TEST_FILE, data_dir / VOCAB_FILE])
    for r in records:
        print(f"{r.framework} {r.channel} {r.snr_db}dB seed={r.seed} "
              f"{r.metric}={r.value:.6f} n={r.n_sentences}")
    return 0


def cmd_ablate(args) -> int:
    values = _load_values(args)
    data_dir = _data_dir(values)
    out = _out_dir(args)
    vocab = Vocabulary.load(data_dir / VOCAB_FILE)
    train_s = _load_split(data_dir, TRAIN_FILE)
    test_s = _load_split(data_dir, TEST_FILE)
    seeds = values["eval.seeds"] if args.seed is None else [args.seed]
    base = cfgmod.train_config(values, seeds[0])
    records = run_ablation(
        base, train_s, test_s, vocab, out,
        snr_grid=values["eval.snr_grid"], seeds=seeds,
        aedm_cfg=cfgmod.aedm_config(values, len(vocab)),
        n_sentences=values["eval.n_sentences"],
    )
    write_manifest(out, "ablate", values, seeds,
                   inputs=[data_dir / TRAIN_FILE, data_dir / TEST_FILE, data_dir / VOCAB_FILE])
    print(f"{len(records)} ablation records -> {out / RECORDS_NAME}")
    return 0


def cmd_discount(args) -> int:
    values = _load_values(args)
    out = _out_dir(args)
    records_path = Path(args.records)
    manifest_path = records_path.parent / evaluation.MANIFEST_NAME
    already = False
    if manifest_path.is_file():
        already = bool(json.loads(manifest_path.read_text()).get("discounted"))
    rho = args.rho if args.rho is not None else values["eval.rho"]
    records = read_records(records_path, discounted=already)
    discounted = time_discount(records, rho)
    write_records(discounted, out / RECORDS_NAME)
    write_manifest(out, "discount", values, [], inputs=[records_path],
                   discounted=True, rho=rho)
    print(f"discounted {len(discounted)} records at rho={rho} -> {out / RECORDS_NAME}")
    return 0


def cmd_visualize(args) -> int:
    values = _load_values(args)
    data_dir = _data_dir(values)
    out = _out_dir(args)
    vocab = Vocabulary.load(data_dir / VOCAB_FILE)
    test_s = _load_split(data_dir, TEST_FILE)
    checkpoint = args.checkpoint or values["checkpoints"].get("ti-gsc")
    if not checkpoint:
        raise cfgmod.ConfigError("--checkpoint or a checkpoint.ti-gsc config key is required")
    npz = evaluation.export_embeddings(
        checkpoint, test_s, vocab,
        snr_db=values["viz.snr_db"], out_dir=out,
        chan_cfg=cfgmod.channel_config(values),
        top_n_words=values["viz.top_n_words"],
        max_per_word=values["viz.max_per_word"],
        seed=args.seed,
        tsne_iters=values["viz.tsne_iters"],
    )
    write_manifest(out, "visualize", values, [args.seed],
                   inputs=[checkpoint, data_dir / TEST_FILE, data_dir / VOCAB_FILE])
    print(f"embeddings -> {npz}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tigsc",
        description="Train and evaluate CSI-free text semantic communication frameworks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=0):
        p.add_argument("--config", type=str, default=None, help="flat key = value config file")
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--out", type=str, required=True, help="output directory")

    p = sub.add_parser("prepare-data", help="filter corpus, split, build vocabulary")
    common(p)
    p.set_defaults(func=cmd_prepare_data)

    p = sub.add_parser("train", help="train a framework per the config")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate one framework at one channel/SNR")
    common(p, seed_default=None)
    p.add_argument("--framework", type=str, required=True, choices=FRAMEWORKS)
    p.add_argument("--checkpoint", type=str, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="evaluate the configured framework/channel/SNR grid")
    common(p, seed_default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate", help="train and evaluate the four loss ablation variants")
    common(p, seed_default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("discount", help="apply the preprocessing-time discount to records")
    common(p)
    p.add_argument("--records", type=str, required=True, help="records.csv to discount")
    p.add_argument("--rho", type=float, default=None, help="preprocessing fraction in [0, 1)")
    p.set_defaults(func=cmd_discount)

    p = sub.add_parser("visualize", help="export embeddings and 2-D projections")
    common(p)
    p.add_argument("--checkpoint", type=str, default=None)
    p.set_defaults(func=cmd_visualize)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (cfgmod.ConfigError, evaluation.EvalConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
