"""Experiment orchestration: the three run modes plus the case-study matrix.

Every run function takes one ExperimentConfig, writes `report.json`,
`summary.txt`, and `config_resolved.json` into the output directory, and
returns the report dict. Reports contain no timestamps or durations, so
repeating an invocation with the same seeds produces byte-identical
output. Seeds and matrix cells are independent work units; `jobs` > 1
fans them out over processes without changing any result.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autoencoder import (
    Autoencoder,
    AutoencoderCheckpoint,
    AutoencoderConfig,
    load_checkpoint,
    pad_batch,
    pretrain,
    save_checkpoint,
)
from .corpus import (
    UNK,
    Document,
    LabeledDataset,
    build_vocabulary,
    decode_ids,
    encode,
    load_dataset,
    tokenize,
    write_split,
)
from .dpmech import PrivacyParams, calibrate_scale, clip_l1, sample_laplace
from .downstream import (
    ClassifierConfig,
    majority_baseline,
    predict_batch,
    random_baseline,
    train_classifier,
)
from .metrics import bleu, leak_audit, macro_f1
from .numcore import Rng

__all__ = [
    "MODES",
    "EPSILON_LADDER",
    "ExperimentConfig",
    "epsilon_repr",
    "aggregate_seed_stats",
    "rewrite_documents",
    "run_pretrain",
    "run_rewrite",
    "run_downstream",
    "run_case_study",
    "run_experiment",
]

MODES = ("pretrain", "rewrite", "downstream", "case_study")

# epsilon sweep of the case study, strongest-signal first
EPSILON_LADDER = (math.inf, 1000.0, 100.0, 10.0, 1.0)

DEFAULT_SEEDS = (1, 2, 3, 4, 5)


def epsilon_repr(eps: float) -> str:
    """Stable textual epsilon for report keys and directory names."""
    if math.isinf(eps):
        return "inf"
    if float(eps) == int(eps):
        return str(int(eps))
    return repr(float(eps))


@dataclass
class ExperimentConfig:
    """One experiment invocation; validation is mode-specific."""

    mode: str
    out_dir: str
    train_path: str | None = None
    validation_path: str | None = None
    test_path: str | None = None
    dataset_a: str | None = None
    dataset_b: str | None = None
    checkpoint_in: str | None = None
    checkpoint_out: str | None = None
    privacy: PrivacyParams | None = None
    autoencoder: AutoencoderConfig = field(default_factory=AutoencoderConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    seeds: list[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    jobs: int = 1
    leak_margin: float = 0.1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        if self.mode == "pretrain" and not self.train_path:
            raise ValueError("pretrain mode requires a training split")
        if self.mode == "rewrite":
            if not self.checkpoint_in:
                raise ValueError("rewrite mode requires a checkpoint")
            if self.privacy is None:
                raise ValueError("rewrite mode requires privacy parameters (epsilon)")
            if not self.train_path:
                raise ValueError("rewrite mode requires a training split")
        if self.mode == "downstream" and not (self.train_path and self.test_path):
            raise ValueError("downstream mode requires train and test splits")
        if self.mode == "case_study" and not (self.dataset_a and self.dataset_b):
            raise ValueError("case_study mode requires two dataset directories")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "out_dir": self.out_dir,
            "train_path": self.train_path,
            "validation_path": self.validation_path,
            "test_path": self.test_path,
            "dataset_a": self.dataset_a,
            "dataset_b": self.dataset_b,
            "checkpoint_in": self.checkpoint_in,
            "checkpoint_out": self.checkpoint_out,
            "epsilon": None if self.privacy is None else epsilon_repr(self.privacy.epsilon),
            "clip_c": None if self.privacy is None else self.privacy.clip_c,
            "autoencoder": self.autoencoder.to_dict(),
            "classifier": self.classifier.to_dict(),
            "seeds": list(self.seeds),
            "jobs": self.jobs,
            "leak_margin": self.leak_margin,
        }


def aggregate_seed_stats(values: list[float]) -> dict:
    """Mean and sample (n-1) standard deviation; one value has std 0."""
    if not values:
        raise ValueError("cannot aggregate an empty value list")
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(arr.mean()), "std": std}


def _stats_block(per_seed: dict[int, float]) -> dict:
    """Per-seed values (string keys for JSON) plus their aggregate."""
    values = [per_seed[s] for s in sorted(per_seed)]
    return {"per_seed": {str(s): per_seed[s] for s in sorted(per_seed)}, **aggregate_seed_stats(values)}


def _map_units(jobs: int, fn, items: list):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- rewriting ----------------------------------------------------------------


def rewrite_documents(
    model: Autoencoder,
    docs: list[Document],
    privacy: PrivacyParams,
    seed: int,
    split_name: str,
) -> list[Document]:
    """Encode, clip, privatize, and greedily decode every document.

    Noise for document i comes from the stream (seed, "rewrite", split,
    i), so results do not depend on iteration order or parallel sharding.
    A decode that produces no tokens is materialized as a single UNK so
    the document count and TSV format survive.
    """
    if not docs:
        return []
    scale = calibrate_scale(privacy)
    ids = pad_batch([encode(doc, model.vocabulary, model.config.max_len) for doc in docs])
    latents = model.encode_batch(ids)
    rng = Rng(seed)
    noisy = np.empty_like(latents)
    for i in range(latents.shape[0]):
        vec = clip_l1(latents[i], privacy.clip_c)
        if scale > 0.0:
            vec = vec + sample_laplace(scale, vec.shape[0], rng.derive("rewrite", split_name, i))
        noisy[i] = vec
    decoded = model.decode_greedy_batch(noisy)
    out = []
    for doc, token_ids in zip(docs, decoded):
        text = decode_ids(token_ids, model.vocabulary)
        out.append(Document(text=text if text else UNK, label=doc.label))
    return out


def _mean_bleu(rewritten: list[Document], source: list[Document]) -> float:
    scores = [
        bleu(tokenize(r.text), tokenize(s.text)) for r, s in zip(rewritten, source)
    ]
    return float(np.mean(scores)) if scores else 0.0


def _reconstruction_bleu(ckpt: AutoencoderCheckpoint, docs: list[Document]) -> float:
    """Noise-free rewrite quality of a checkpoint on its own corpus."""
    model = Autoencoder.from_checkpoint(ckpt)
    non_private = PrivacyParams(epsilon=math.inf, clip_c=ckpt.config.clip_c)
    rewritten = rewrite_documents(model, docs, non_private, seed=0, split_name="recon")
    return _mean_bleu(rewritten, docs)


# -- report writing -----------------------------------------------------------


def _write_outputs(config: ExperimentConfig, report: dict, summary: str) -> None:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (out / "summary.txt").write_text(summary)
    (out / "config_resolved.json").write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"
    )


def _load_splits(config: ExperimentConfig) -> LabeledDataset:
    return load_dataset(config.train_path, config.validation_path, config.test_path)


# -- pretrain mode ------------------------------------------------------------


def _pretrain_unit(payload) -> tuple[int, AutoencoderCheckpoint, float]:
    dataset, ae_config, seed = payload
    ckpt = pretrain(dataset, ae_config, seed)
    return seed, ckpt, _reconstruction_bleu(ckpt, dataset.train)


def run_pretrain(config: ExperimentConfig) -> dict:
    """Pre-train per seed; the first seed's checkpoint is the canonical
    artifact written to checkpoint_out (default <out_dir>/checkpoint.bin)."""
    dataset = _load_splits(config)
    results = _map_units(
        config.jobs,
        _pretrain_unit,
        [(dataset, config.autoencoder, seed) for seed in config.seeds],
    )
    losses = {seed: ckpt.metadata["final_loss"] for seed, ckpt, _ in results}
    bleus = {seed: recon for seed, _, recon in results}
    canonical = results[0][1]
    ckpt_path = config.checkpoint_out or str(Path(config.out_dir) / "checkpoint.bin")
    Path(ckpt_path).parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(canonical, ckpt_path)

    report = {
        "mode": "pretrain",
        "config": config.to_dict(),
        "metrics": {
            "final_loss": _stats_block({s: (v if v is not None else float("nan")) for s, v in losses.items()}),
            "reconstruction_bleu": _stats_block(bleus),
        },
        "provenance": {
            "checkpoint": ckpt_path,
            "canonical_seed": config.seeds[0],
            "train_path": config.train_path,
        },
    }
    loss_stats = report["metrics"]["final_loss"]
    bleu_stats = report["metrics"]["reconstruction_bleu"]
    summary = (
        "mode: pretrain\n"
        f"checkpoint: {ckpt_path}\n"
        f"final loss:          {loss_stats['mean']:.4f} ({loss_stats['std']:.4f})\n"
        f"reconstruction BLEU: {bleu_stats['mean']:.4f} ({bleu_stats['std']:.4f})\n"
    )
    _write_outputs(config, report, summary)
    return report


# -- rewrite mode -------------------------------------------------------------


def _rewrite_unit(payload):
    ckpt, dataset, privacy, seed = payload
    model = Autoencoder.from_checkpoint(ckpt)
    train_rw = rewrite_documents(model, dataset.train, privacy, seed, "train")
    val_rw = rewrite_documents(model, dataset.validation, privacy, seed, "validation")
    return seed, train_rw, val_rw


def run_rewrite(config: ExperimentConfig) -> dict:
    """Rewrite train and validation per seed; the test split is never
    rewritten. Canonical TSVs come from the first seed."""
    ckpt = load_checkpoint(config.checkpoint_in)
    dataset = _load_splits(config)
    results = _map_units(
        config.jobs,
        _rewrite_unit,
        [(ckpt, dataset, config.privacy, seed) for seed in config.seeds],
    )
    bleu_train = {seed: _mean_bleu(rw_train, dataset.train) for seed, rw_train, _ in results}
    per_seed_metrics = {"bleu_train": _stats_block(bleu_train)}
    if dataset.validation:
        bleu_val = {seed: _mean_bleu(rw_val, dataset.validation) for seed, _, rw_val in results}
        per_seed_metrics["bleu_validation"] = _stats_block(bleu_val)

    rewritten_dir = Path(config.out_dir) / "rewritten"
    rewritten_dir.mkdir(parents=True, exist_ok=True)
    _, canonical_train, canonical_val = results[0]
    write_split(canonical_train, rewritten_dir / "train.tsv")
    if dataset.validation:
        write_split(canonical_val, rewritten_dir / "validation.tsv")

    report = {
        "mode": "rewrite",
        "config": config.to_dict(),
        "metrics": per_seed_metrics,
        "provenance": {
            "checkpoint": config.checkpoint_in,
            "epsilon": epsilon_repr(config.privacy.epsilon),
            "rewritten_dir": str(rewritten_dir),
            "canonical_seed": config.seeds[0],
            "test_split_rewritten": False,
        },
    }
    lines = ["mode: rewrite", f"epsilon: {epsilon_repr(config.privacy.epsilon)}"]
    for name, stats in per_seed_metrics.items():
        lines.append(f"{name}: {stats['mean']:.4f} ({stats['std']:.4f})")
    _write_outputs(config, report, "\n".join(lines) + "\n")
    return report


# -- downstream mode ------------------------------------------------------------


def _downstream_unit(payload) -> tuple[int, float]:
    train, validation, test, label_set, clf_config, seed = payload
    vocab = build_vocabulary(train)
    model = train_classifier(train, validation, vocab, clf_config, seed)
    preds = predict_batch(model, test, vocab)
    return seed, macro_f1(preds, [d.label for d in test], label_set)


def run_downstream(config: ExperimentConfig) -> dict:
    """Train the classifier per seed on the given (possibly rewritten)
    train/validation splits; always evaluate on the original test split."""
    dataset = _load_splits(config)
    if not dataset.test:
        raise ValueError("downstream mode requires a non-empty test split")
    train_labels = {d.label for d in dataset.train}
    missing = [lab for lab in dataset.label_set if lab not in train_labels]
    if missing:
        warnings.warn(
            f"labels absent from the training split are always scored wrong: {missing}"
        )
    results = _map_units(
        config.jobs,
        _downstream_unit,
        [
            (dataset.train, dataset.validation, dataset.test, dataset.label_set, config.classifier, seed)
            for seed in config.seeds
        ],
    )
    f1 = _stats_block(dict(results))
    rand = _stats_block(
        {
            seed: random_baseline(dataset.test, dataset.label_set, Rng(seed).derive("random-baseline"))
            for seed in config.seeds
        }
    )
    majority = majority_baseline(dataset.train, dataset.test)

    report = {
        "mode": "downstream",
        "config": config.to_dict(),
        "metrics": {
            "test_macro_f1": f1,
            "random_baseline": rand,
            "majority_baseline": majority,
        },
        "provenance": {
            "train_path": config.train_path,
            "test_path": config.test_path,
            "evaluated_on": "original test split",
        },
    }
    summary = (
        "mode: downstream\n"
        f"test macro-F1:     {f1['mean']:.4f} ({f1['std']:.4f})\n"
        f"random baseline:   {rand['mean']:.4f} ({rand['std']:.4f})\n"
        f"majority baseline: {majority:.4f}\n"
    )
    _write_outputs(config, report, summary)
    return report


# -- case-study mode ------------------------------------------------------------


def _load_dataset_dir(path: str) -> tuple[str, LabeledDataset]:
    base = Path(path)
    val = base / "validation.tsv"
    test = base / "test.tsv"
    dataset = load_dataset(
        base / "train.tsv",
        val if val.exists() else None,
        test if test.exists() else None,
    )
    return base.name, dataset


def _case_unit(payload) -> dict:
    """One (pretrain corpus, seed) cell: pre-train once, then rewrite,
    audit, and run downstream for both corpora at every epsilon."""
    pretrain_name, datasets, ae_config, clf_config, leak_margin, seed, keep_docs = payload
    ckpt = pretrain(datasets[pretrain_name], ae_config, seed)
    model = Autoencoder.from_checkpoint(ckpt)
    pretrain_docs = datasets[pretrain_name].train
    out = {
        "pretrain": pretrain_name,
        "seed": seed,
        "final_loss": ckpt.metadata["final_loss"],
        "reconstruction_bleu": _reconstruction_bleu(ckpt, pretrain_docs),
        "settings": {},
        "rewritten_docs": {},
    }
    for rewrite_name, target in datasets.items():
        for eps in EPSILON_LADDER:
            privacy = PrivacyParams(epsilon=eps, clip_c=ae_config.clip_c)
            train_rw = rewrite_documents(model, target.train, privacy, seed, "train")
            val_rw = rewrite_documents(model, target.validation, privacy, seed, "validation")
            audit = leak_audit(train_rw, target.train, pretrain_docs, margin=leak_margin)
            vocab = build_vocabulary(train_rw)
            clf = train_classifier(train_rw, val_rw, vocab, clf_config, seed)
            preds = predict_batch(clf, target.test, vocab)
            f1 = macro_f1(preds, [d.label for d in target.test], target.label_set)
            key = (rewrite_name, epsilon_repr(eps))
            out["settings"][key] = {
                "macro_f1": f1,
                "leak_score": audit.leak_score,
                "bleu_vs_source": _mean_bleu(train_rw, target.train),
            }
            if keep_docs:
                out["rewritten_docs"][key] = (train_rw, val_rw)
    return out


def _original_unit(payload) -> tuple[str, int, float]:
    name, dataset, clf_config, seed = payload
    _, f1 = _downstream_unit(
        (dataset.train, dataset.validation, dataset.test, dataset.label_set, clf_config, seed)
    )
    return name, seed, f1


def run_case_study(config: ExperimentConfig) -> dict:
    """The full matrix: 2 pretrains x 2 rewrite corpora x 5 epsilons, all
    per seed, plus the 2 original-data downstream rows and baselines."""
    name_a, ds_a = _load_dataset_dir(config.dataset_a)
    name_b, ds_b = _load_dataset_dir(config.dataset_b)
    if name_a == name_b:
        raise ValueError("case-study dataset directories must have distinct names")
    datasets = {name_a: ds_a, name_b: ds_b}
    canonical_seed = config.seeds[0]

    units = [
        (pretrain_name, datasets, config.autoencoder, config.classifier, config.leak_margin, seed, seed == canonical_seed)
        for pretrain_name in datasets
        for seed in config.seeds
    ]
    cell_results = _map_units(config.jobs, _case_unit, units)

    originals = _map_units(
        config.jobs,
        _original_unit,
        [(name, datasets[name], config.classifier, seed) for name in datasets for seed in config.seeds],
    )

    # keyed merge so assembly order is independent of execution order
    by_cell = {(r["pretrain"], r["seed"]): r for r in cell_results}
    settings_rows = []
    rewritten_root = Path(config.out_dir) / "rewritten"
    for pretrain_name in datasets:
        for rewrite_name in datasets:
            for eps in EPSILON_LADDER:
                eps_key = epsilon_repr(eps)
                per_seed = {
                    seed: by_cell[(pretrain_name, seed)]["settings"][(rewrite_name, eps_key)]
                    for seed in config.seeds
                }
                row = {
                    "pretrain": pretrain_name,
                    "rewrite": rewrite_name,
                    "epsilon": eps_key,
                    "macro_f1": _stats_block({s: v["macro_f1"] for s, v in per_seed.items()}),
                    "leak_score": _stats_block({s: v["leak_score"] for s, v in per_seed.items()}),
                    "bleu_vs_source": _stats_block({s: v["bleu_vs_source"] for s, v in per_seed.items()}),
                }
                settings_rows.append(row)
                train_rw, val_rw = by_cell[(pretrain_name, canonical_seed)]["rewritten_docs"][
                    (rewrite_name, eps_key)
                ]
                setting_dir = rewritten_root / f"{pretrain_name}__{rewrite_name}__eps{eps_key}"
                setting_dir.mkdir(parents=True, exist_ok=True)
                write_split(train_rw, setting_dir / "train.tsv")
                if val_rw:
                    write_split(val_rw, setting_dir / "validation.tsv")

    original_rows = []
    for name in datasets:
        per_seed = {seed: f1 for nm, seed, f1 in originals if nm == name}
        original_rows.append({"dataset": name, "macro_f1": _stats_block(per_seed)})

    baselines = {}
    for name, dataset in datasets.items():
        rand = _stats_block(
            {
                seed: random_baseline(dataset.test, dataset.label_set, Rng(seed).derive("random-baseline"))
                for seed in config.seeds
            }
        )
        baselines[name] = {
            "random": rand,
            "majority": majority_baseline(dataset.train, dataset.test),
        }

    pretrain_metrics = {}
    for name in datasets:
        pretrain_metrics[name] = {
            "final_loss": _stats_block(
                {s: by_cell[(name, s)]["final_loss"] for s in config.seeds}
            ),
            "reconstruction_bleu": _stats_block(
                {s: by_cell[(name, s)]["reconstruction_bleu"] for s in config.seeds}
            ),
        }

    report = {
        "mode": "case_study",
        "config": config.to_dict(),
        "settings": settings_rows,
        "originals": original_rows,
        "baselines": baselines,
        "pretrain_metrics": pretrain_metrics,
        "provenance": {
            "datasets": {name_a: config.dataset_a, name_b: config.dataset_b},
            "canonical_seed": canonical_seed,
            "rewritten_dir": str(rewritten_root),
            "test_split_rewritten": False,
        },
    }
    _write_outputs(config, report, _case_study_summary(report))
    return report


def _case_study_summary(report: dict) -> str:
    """Plain-text matrix in the layout of the paper-style results table:
    one row per (pretrain, rewrite, epsilon) with mean (std) metrics."""
    lines = [
        f"{'pretrain':<14}{'rewrite':<14}{'epsilon':<9}{'macro-F1':<17}{'leak':<17}{'bleu-vs-source':<17}",
        "-" * 88,
    ]
    for row in report["settings"]:
        f1, leak, bl = row["macro_f1"], row["leak_score"], row["bleu_vs_source"]
        lines.append(
            f"{row['pretrain']:<14}{row['rewrite']:<14}{row['epsilon']:<9}"
            f"{f1['mean']:.3f} ({f1['std']:.3f})   "
            f"{leak['mean']:.3f} ({leak['std']:.3f})   "
            f"{bl['mean']:.3f} ({bl['std']:.3f})"
        )
    lines.append("-" * 88)
    for row in report["originals"]:
        f1 = row["macro_f1"]
        lines.append(
            f"{'original':<14}{row['dataset']:<14}{'-':<9}{f1['mean']:.3f} ({f1['std']:.3f})"
        )
    for name, base in report["baselines"].items():
        rand = base["random"]
        lines.append(
            f"baselines {name}: random {rand['mean']:.3f} ({rand['std']:.3f}), "
            f"majority {base['majority']:.3f}"
        )
    return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig) -> dict:
    """Dispatch on config.mode."""
    runner = {
        "pretrain": run_pretrain,
        "rewrite": run_rewrite,
        "downstream": run_downstream,
        "case_study": run_case_study,
    }[config.mode]
    return runner(config)
