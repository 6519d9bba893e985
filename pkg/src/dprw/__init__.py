"""Differentially private text rewriting through a sequence autoencoder.

The package pre-trains a GRU autoencoder, rewrites documents by adding
calibrated Laplace noise to their clipped latent codes, and evaluates
the privacy/utility trade-off with a downstream classifier plus a
memorization audit. See the README for the command-line workflow.
"""

from .autoencoder import (
    Autoencoder,
    AutoencoderCheckpoint,
    AutoencoderConfig,
    CheckpointError,
    load_checkpoint,
    pretrain,
    save_checkpoint,
)
from .corpus import Document, LabeledDataset, Vocabulary, build_vocabulary, load_dataset, tokenize
from .downstream import ClassifierConfig, predict_batch, train_classifier
from .dpmech import PrivacyParams, clip_l1, privatize, run_bound_suite, verify_dp_bound
from .metrics import bleu, leak_audit, macro_f1, unigram_f1
from .numcore import Rng
from .pipeline import ExperimentConfig, run_experiment

__version__ = "0.1.0"

__all__ = [
    "Autoencoder",
    "AutoencoderCheckpoint",
    "AutoencoderConfig",
    "CheckpointError",
    "ClassifierConfig",
    "Document",
    "ExperimentConfig",
    "LabeledDataset",
    "PrivacyParams",
    "Rng",
    "Vocabulary",
    "bleu",
    "build_vocabulary",
    "clip_l1",
    "leak_audit",
    "load_checkpoint",
    "load_dataset",
    "macro_f1",
    "predict_batch",
    "pretrain",
    "privatize",
    "run_bound_suite",
    "run_experiment",
    "save_checkpoint",
    "tokenize",
    "train_classifier",
    "unigram_f1",
    "verify_dp_bound",
    "__version__",
]
