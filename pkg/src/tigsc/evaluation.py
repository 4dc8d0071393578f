"""Framework evaluation: SNR sweeps, time discounting, ablations, embeddings.

Every sweep cell (framework, channel, SNR, seed) is computed from its own
derived RNG stream, so the worker count never changes a record. Records are
always written sorted, with a manifest holding the full configuration and
content hashes of every input file, sufficient to reproduce the run.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import multiprocessing
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from . import baselines, metrics, tsne
from .aedm import AedmConfig, SemanticTransceiver, load_checkpoint
from .channel import (
    CSI_IMPERFECT,
    CSI_PERFECT,
    ChannelConfig,
    CsiEstimate,
    equalize,
    sample_realization,
    transmit,
)
from .gsdsm import DistortionSuppressor, suppress
from .seeding import derive_seed
from .textcorpus import Vocabulary, batch_token_lists, detokenize
from .training import (
    SC_IMPERFECT_CSI,
    SC_PERFECT_CSI,
    SC_VANILLA,
    TI_GSC,
    TrainConfig,
    train,
)

log = logging.getLogger(__name__)

CONV_FIXED_CSI = "conv-fixed-csi"
CONV_FIXED_NOCSI = "conv-fixed-nocsi"
CONV_HUFFMAN_CSI = "conv-huffman-csi"
CONV_HUFFMAN_NOCSI = "conv-huffman-nocsi"

FRAMEWORKS = (
    TI_GSC,
    SC_VANILLA,
    SC_PERFECT_CSI,
    SC_IMPERFECT_CSI,
    CONV_FIXED_CSI,
    CONV_FIXED_NOCSI,
    CONV_HUFFMAN_CSI,
    CONV_HUFFMAN_NOCSI,
)
CONVENTIONAL_FRAMEWORKS = (
    CONV_FIXED_CSI,
    CONV_FIXED_NOCSI,
    CONV_HUFFMAN_CSI,
    CONV_HUFFMAN_NOCSI,
)
# The paper's CSI estimation-error variances, swept by default.
IMPERFECT_CSI_VARIANCES = (0.002, 0.02, 0.2)

SNR_GRID = tuple(range(0, 25, 3))
RECORDS_NAME = "records.csv"
MANIFEST_NAME = "manifest.json"
CSV_HEADER = ("framework", "channel", "snr_db", "seed", "metric", "value", "n_sentences")
METRICS = ("bleu1", "bleu2", "bleu3", "bleu4", "nmse", "ber", "skipped")


class EvalConfigError(ValueError):
    pass


def uses_csi(framework: str) -> bool:
    """CSI-consuming frameworks pay the preprocessing-time discount."""
    return (
        framework.startswith((SC_PERFECT_CSI, SC_IMPERFECT_CSI))
        or framework in (CONV_FIXED_CSI, CONV_HUFFMAN_CSI)
    )


@dataclass
class EvalRecord:
    framework: str
    channel: str
    snr_db: int
    seed: int
    metric: str
    value: float
    n_sentences: int
    discounted: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.snr_db not in SNR_GRID:
            raise EvalConfigError(f"snr_db must be in {SNR_GRID}, got {self.snr_db}")
        if self.metric not in METRICS:
            raise EvalConfigError(f"unknown metric {self.metric!r}")
        if not np.isfinite(self.value):
            raise EvalConfigError(f"non-finite value for {self.framework}/{self.metric}")

    def csv_row(self) -> tuple:
        return (self.framework, self.channel, self.snr_db, self.seed,
                self.metric, repr(self.value), self.n_sentences)


def write_records(records: Sequence[EvalRecord], path: str | Path) -> None:
    ordered = sorted(records, key=lambda r: (r.framework, r.channel, r.snr_db, r.seed, r.metric))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in ordered:
            writer.writerow(rec.csv_row())


def read_records(path: str | Path, discounted: bool = False) -> list[EvalRecord]:
    records = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise EvalConfigError(f"unexpected records header in {path}: {reader.fieldnames}")
        for row in reader:
            records.append(
                EvalRecord(
                    framework=row["framework"],
                    channel=row["channel"],
                    snr_db=int(row["snr_db"]),
                    seed=int(row["seed"]),
                    metric=row["metric"],
                    value=float(row["value"]),
                    n_sentences=int(row["n_sentences"]),
                    discounted=discounted,
                )
            )
    return records


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    out_dir: str | Path,
    command: str,
    config: dict,
    seeds: Sequence[int],
    inputs: Sequence[str | Path] = (),
    discounted: bool = False,
    rho: float | None = None,
) -> Path:
    manifest = {
        "format": 1,
        "command": command,
        "config": config,
        "seeds": list(seeds),
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "discounted": discounted,
        "rho": rho,
    }
    path = Path(out_dir) / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path


# -- sweep ---------------------------------------------------------------------

@dataclass
class SweepPlan:
    frameworks: list[str]
    channels: list[str]
    snr_grid: list[int]
    seeds: list[int]
    checkpoints: dict[str, str]
    out_dir: str
    n_sentences: int = 500
    workers: int = 1
    max_len: int = 32
    eval_batch: int = 64
    rician_k: float = 1.0
    csi_variances: tuple[float, ...] = IMPERFECT_CSI_VARIANCES

    def __post_init__(self):
        if not (self.frameworks and self.channels and self.snr_grid and self.seeds):
            raise EvalConfigError("frameworks, channels, snr_grid and seeds must be nonempty")
        for f in self.frameworks:
            if f not in FRAMEWORKS:
                raise EvalConfigError(f"unknown framework {f!r}, expected one of {FRAMEWORKS}")
        for s in self.snr_grid:
            if s not in SNR_GRID:
                raise EvalConfigError(f"snr_db must be in {SNR_GRID}, got {s}")
        missing = [
            f for f in self.frameworks
            if f not in CONVENTIONAL_FRAMEWORKS and f not in self.checkpoints
        ]
        if missing:
            # Handled per-cell with a warning record, but surface early too.
            log.warning("no checkpoint configured for: %s", ", ".join(missing))


@dataclass
class _Cell:
    framework: str     # base id; imperfect CSI carries the variance separately
    label: str         # record framework id
    channel: str
    snr_db: int
    seed: int
    csi_error_var: float = 0.0


def _expand_cells(plan: SweepPlan) -> list[_Cell]:
    cells = []
    for fw in plan.frameworks:
        labels = [(fw, 0.0)]
        if fw == SC_IMPERFECT_CSI:
            labels = [(f"{fw}-v{v:g}", v) for v in plan.csi_variances]
        for label, var in labels:
            for chan in plan.channels:
                for snr in plan.snr_grid:
                    for seed in plan.seeds:
                        cells.append(_Cell(fw, label, chan, snr, seed, var))
    return cells


def _channel_config(plan_kind: str, snr_db: float, rician_k: float, csi: str, var: float) -> ChannelConfig:
    return ChannelConfig(kind=plan_kind, snr_db=snr_db, rician_k=rician_k,
                         csi=csi, csi_error_var=var)


def evaluate_ann(
    aedm: SemanticTransceiver,
    gen: DistortionSuppressor | None,
    sentences: Sequence[Sequence[str]],
    vocab: Vocabulary,
    chan_cfg: ChannelConfig,
    seed: int,
    max_len: int = 32,
    eval_batch: int = 64,
) -> dict[str, float]:
    """Greedy-decode BLEU-1..4 (plus nMSE when a suppressor runs) for one cell."""
    refs, hyps = [], []
    nmse_sum = nmse_n = 0
    aedm.eval()
    if gen is not None:
        gen.eval()
    with torch.no_grad():
        for k, batch in enumerate(
            batch_token_lists(sentences, vocab, eval_batch, seed, shuffle=False)
        ):
            x = aedm.encode(batch)
            realization = sample_realization(chan_cfg, batch.size, derive_seed(seed, "cell", k))
            y = transmit(x, realization)
            if gen is not None:
                y = suppress(y, gen)
                nmse_sum += metrics.nmse(x.values, y.values)
                nmse_n += 1
            elif chan_cfg.csi == CSI_PERFECT:
                y = equalize(y, realization.h)
            elif chan_cfg.csi == CSI_IMPERFECT:
                est = CsiEstimate(
                    realization.h, chan_cfg.csi_error_var, seed=derive_seed(seed, "csi", k)
                )
                y = equalize(y, est)
            decoded = aedm.greedy_decode(y, max_len=max_len)
            for row_in, row_out in zip(batch.ids, decoded.ids):
                refs.append(detokenize(row_in, vocab).split())
                hyps.append(detokenize(row_out, vocab).split())
    out = {f"bleu{k}": metrics.bleu(refs, hyps, max_order=k).score for k in range(1, 5)}
    if nmse_n:
        out["nmse"] = nmse_sum / nmse_n
    return out


def evaluate_conventional(
    framework: str,
    sentences: Sequence[Sequence[str]],
    chan_cfg: ChannelConfig,
    seed: int,
    codebook: baselines.HuffmanCodebook | None = None,
) -> dict[str, float]:
    source = baselines.SOURCE_FIXED5 if "fixed" in framework else baselines.SOURCE_HUFFMAN
    use_csi = uses_csi(framework)
    texts = [" ".join(s) for s in sentences]
    result = baselines.run_conventional(texts, source, use_csi, chan_cfg, seed, codebook)
    refs = [t.split() for t in texts]
    hyps = [t.split() for t in result.decoded]
    out = {f"bleu{k}": metrics.bleu(refs, hyps, max_order=k).score for k in range(1, 5)}
    out["ber"] = result.ber
    return out


def _run_cell(
    cell: _Cell,
    plan: SweepPlan,
    sentences: list[list[str]],
    vocab_path: str | None,
    codebook: baselines.HuffmanCodebook | None,
) -> list[EvalRecord]:
    seed = derive_seed(cell.seed, "sweep", cell.label, cell.channel, cell.snr_db)
    n = len(sentences)
    if cell.framework in CONVENTIONAL_FRAMEWORKS:
        chan = _channel_config(cell.channel, cell.snr_db, plan.rician_k, "none", 0.0)
        values = evaluate_conventional(cell.framework, sentences, chan, seed, codebook)
    else:
        path = plan.checkpoints.get(cell.framework)
        if not path or not Path(path).is_file():
            log.warning("skipping %s: checkpoint %r not found", cell.label, path)
            return [EvalRecord(cell.label, cell.channel, cell.snr_db, cell.seed,
                               "skipped", 0.0, 0)]
        aedm, blob = load_checkpoint(path)
        gen = None
        if cell.framework == TI_GSC:
            gen = DistortionSuppressor()
            gen.load_state_dict(blob["generator"])
        csi = {SC_PERFECT_CSI: CSI_PERFECT, SC_IMPERFECT_CSI: CSI_IMPERFECT}.get(
            cell.framework, "none"
        )
        vocab = Vocabulary.load(vocab_path)
        chan = _channel_config(cell.channel, cell.snr_db, plan.rician_k, csi, cell.csi_error_var)
        values = evaluate_ann(
            aedm, gen, sentences, vocab, chan, seed,
            max_len=plan.max_len, eval_batch=plan.eval_batch,
        )
    return [
        EvalRecord(cell.label, cell.channel, cell.snr_db, cell.seed, metric, value, n)
        for metric, value in sorted(values.items())
    ]


def run_sweep(
    plan: SweepPlan,
    sentences: Sequence[Sequence[str]],
    vocab_path: str | Path | None,
) -> list[EvalRecord]:
    """Evaluate every (framework, channel, SNR, seed) cell and emit records,
    records.csv, and BLEU-vs-SNR plots. Deterministic for any worker count."""
    out_dir = Path(plan.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sentences = [list(s) for s in sentences][: plan.n_sentences]
    if not sentences:
        raise EvalConfigError("no evaluation sentences")
    cells = _expand_cells(plan)
    codebook = None
    if any(f in (CONV_HUFFMAN_CSI, CONV_HUFFMAN_NOCSI) for f in plan.frameworks):
        codebook = baselines.HuffmanCodebook.from_text(
            "".join(" ".join(s) for s in sentences)
        )
    vocab_path = str(vocab_path) if vocab_path else None

    records: list[EvalRecord] = []
    if plan.workers <= 1:
        for cell in cells:
            records.extend(_run_cell(cell, plan, sentences, vocab_path, codebook))
    else:
        # Spawned workers: forking under live torch threads can deadlock.
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=plan.workers, mp_context=ctx) as pool:
            futures = [
                pool.submit(_run_cell, cell, plan, sentences, vocab_path, codebook)
                for cell in cells
            ]
            for fut in futures:
                records.extend(fut.result())

    write_records(records, out_dir / RECORDS_NAME)
    plot_bleu_vs_snr(records, out_dir)
    return sorted(records, key=lambda r: (r.framework, r.channel, r.snr_db, r.seed, r.metric))


def plot_bleu_vs_snr(records: Sequence[EvalRecord], out_dir: str | Path, metric: str = "bleu1"):
    """One figure per channel kind; presentation only."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    channels = sorted({r.channel for r in records if r.metric == metric})
    for chan in channels:
        fig, ax = plt.subplots(figsize=(6, 4))
        frameworks = sorted({r.framework for r in records if r.channel == chan and r.metric == metric})
        for fw in frameworks:
            pts: dict[int, list[float]] = {}
            for r in records:
                if r.framework == fw and r.channel == chan and r.metric == metric:
                    pts.setdefault(r.snr_db, []).append(r.value)
            xs = sorted(pts)
            ys = [float(np.mean(pts[s])) for s in xs]
            ax.plot(xs, ys, marker="o", label=fw)
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel(metric.upper())
        ax.set_title(f"{metric.upper()} vs SNR, {chan}")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
        fig.tight_layout()
        for ext in ("svg", "png"):
            fig.savefig(out_dir / f"{metric}_vs_snr_{chan}.{ext}")
        plt.close(fig)


# -- time discounting ------------------------------------------------------------

DISCOUNTED_METRICS = ("bleu1", "bleu2", "bleu3", "bleu4")


def time_discount(records: Sequence[EvalRecord], rho: float) -> list[EvalRecord]:
    """Scale CSI-framework BLEU values by (1 - rho); non-CSI rows unchanged.

    rho is the fraction of a transmission slot spent on channel estimation
    and equalization. Records already discounted are rejected for rho > 0.
    """
    if not (0.0 <= rho < 1.0):
        raise EvalConfigError(f"rho must be in [0, 1), got {rho}")
    if rho == 0.0:
        return list(records)
    if any(r.discounted for r in records):
        raise EvalConfigError("records already discounted; refusing to discount twice")
    out = []
    for r in records:
        if uses_csi(r.framework) and r.metric in DISCOUNTED_METRICS:
            out.append(replace(r, value=r.value * (1.0 - rho), discounted=True))
        else:
            out.append(replace(r, discounted=True))
    return out


# -- ablation ---------------------------------------------------------------------

ABLATION_VARIANTS = (
    ("ti-gsc", {}),
    ("ti-gsc-w2-0", {"w2": 0.0}),          # without adversarial learning
    ("ti-gsc-sytc-0", {"sytc_weight": 0.0}),  # without syntactic learning
    ("ti-gsc-smtc-0", {"smtc_weight": 0.0}),  # without semantic learning
)


def ablation_configs(base: TrainConfig) -> list[tuple[str, TrainConfig]]:
    out = []
    for label, overrides in ABLATION_VARIANTS:
        gan = base.gan
        cfg_kwargs = {}
        for key, value in overrides.items():
            if key in ("sytc_weight", "smtc_weight"):
                gan = replace(gan, **{key: value})
            else:
                cfg_kwargs[key] = value
        out.append((label, replace(base, gan=gan, **cfg_kwargs)))
    return out


def run_ablation(
    base_cfg: TrainConfig,
    train_sentences: Sequence[Sequence[str]],
    test_sentences: Sequence[Sequence[str]],
    vocab: Vocabulary,
    out_dir: str | Path,
    snr_grid: Sequence[int] = (12,),
    seeds: Sequence[int] | None = None,
    aedm_cfg: AedmConfig | None = None,
    n_sentences: int = 500,
) -> list[EvalRecord]:
    """Train the full loss and the three single-term ablations under identical
    seeds, evaluate each at the given SNRs, and emit comparative records."""
    out_dir = Path(out_dir)
    seeds = list(seeds) if seeds else [base_cfg.seed]
    test = [list(s) for s in test_sentences][:n_sentences]
    records: list[EvalRecord] = []
    for seed in seeds:
        for label, cfg in ablation_configs(replace(base_cfg, seed=seed)):
            run_dir = out_dir / f"{label}-seed{seed}"
            result = train(train_sentences, vocab, cfg, run_dir, aedm_cfg=aedm_cfg)
            aedm, blob = load_checkpoint(result.last_checkpoint)
            gen = DistortionSuppressor()
            gen.load_state_dict(blob["generator"])
            for snr in snr_grid:
                chan = replace(cfg.channel, snr_db=float(snr))
                values = evaluate_ann(
                    aedm, gen, test, vocab, chan,
                    derive_seed(seed, "ablate", label, snr),
                )
                for metric, value in sorted(values.items()):
                    records.append(
                        EvalRecord(label, cfg.channel.kind, snr, seed, metric, value, len(test))
                    )
    write_records(records, out_dir / RECORDS_NAME)
    return records


# -- embedding export --------------------------------------------------------------

def export_embeddings(
    checkpoint: str | Path,
    sentences: Sequence[Sequence[str]],
    vocab: Vocabulary,
    snr_db: int,
    out_dir: str | Path,
    chan_cfg: ChannelConfig | None = None,
    top_n_words: int = 11,
    max_per_word: int = 150,
    seed: int = 0,
    tsne_iters: int = 1000,
) -> Path:
    """Collect encoded/received/suppressed vectors for the most frequent words,
    write them with labels, and emit a 2-D projection plot per signal kind."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    counts: dict[str, int] = {}
    for s in sentences:
        for w in s:
            counts[w] = counts.get(w, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if len(ranked) < top_n_words:
        warnings.warn(
            f"corpus has only {len(ranked)} distinct words; reducing top_n from {top_n_words}"
        )
        top_n_words = len(ranked)
    top_words = {w for w, _ in ranked[:top_n_words]}

    aedm, blob = load_checkpoint(checkpoint)
    gen = None
    if "generator" in blob:
        gen = DistortionSuppressor()
        gen.load_state_dict(blob["generator"])
        gen.eval()
    aedm.eval()
    chan_cfg = chan_cfg or ChannelConfig()
    chan_cfg = replace(chan_cfg, snr_db=float(snr_db), csi="none")

    taken: dict[str, int] = {w: 0 for w in top_words}
    vecs: dict[str, list[np.ndarray]] = {"x": [], "y": [], "ybar": []}
    labels: list[str] = []
    with torch.no_grad():
        for k, batch in enumerate(batch_token_lists(sentences, vocab, 64, seed, shuffle=False)):
            x = aedm.encode(batch)
            realization = sample_realization(chan_cfg, batch.size, derive_seed(seed, "viz", k))
            y = transmit(x, realization)
            ybar = suppress(y, gen) if gen is not None else y
            for b in range(batch.size):
                for t in range(batch.width):
                    tok = int(batch.ids[b, t])
                    if tok < 4:
                        continue
                    word = vocab.id_to_token[tok]
                    if word in top_words and taken[word] < max_per_word:
                        taken[word] += 1
                        labels.append(word)
                        vecs["x"].append(x.values[b, t].reshape(-1).numpy().copy())
                        vecs["y"].append(y.values[b, t].reshape(-1).numpy().copy())
                        vecs["ybar"].append(ybar.values[b, t].reshape(-1).numpy().copy())
            if all(v >= max_per_word for v in taken.values()):
                break

    words = np.array(labels)
    arrays = {kind: np.stack(v) if v else np.zeros((0, 1)) for kind, v in vecs.items()}
    npz_path = out_dir / f"embeddings_snr{snr_db}.npz"
    np.savez(npz_path, words=words, **arrays)

    for kind in ("x", "y", "ybar"):
        if arrays[kind].shape[0] >= 4:
            proj = tsne.tsne(arrays[kind], n_iter=tsne_iters, seed=derive_seed(seed, "tsne", kind))
            _plot_projection(proj, words, out_dir / f"tsne_{kind}_snr{snr_db}", kind, snr_db)
    return npz_path


def _plot_projection(proj: np.ndarray, words: np.ndarray, stem: Path, kind: str, snr_db: int):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 5))
    unique = sorted(set(words.tolist()))
    cmap = matplotlib.colormaps["tab20"].resampled(max(len(unique), 1))
    for i, w in enumerate(unique):
        sel = words == w
        ax.scatter(proj[sel, 0], proj[sel, 1], s=8, color=cmap(i), label=w)
    ax.set_title(f"signal {kind}, SNR {snr_db} dB")
    ax.legend(fontsize=6, markerscale=1.5, ncol=2)
    fig.tight_layout()
    for ext in ("svg", "png"):
        fig.savefig(f"{stem}.{ext}")
    plt.close(fig)
