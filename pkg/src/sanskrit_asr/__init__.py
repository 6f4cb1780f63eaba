"""Desk-scale end-to-end Sanskrit speech recognition toolkit."""

from .audio import AudioBuffer, LogMelSpectrogram, log_mel, read_wav, write_wav
from .data import Dataset, ManifestEntry, gen_synthetic_corpus, load_manifest
from .errors import SanskritAsrError
from .metrics import EvalReport, cer, evaluate, levenshtein, wer
from .model import (
    ModelConfig,
    ModelParams,
    count_parameters,
    greedy_decode,
    init_params,
    load_checkpoint,
    presets,
    save_checkpoint,
)
from .pipeline import TranscriptionResult, transcribe
from .script import Transcript, Vocabulary, build_vocab, deva_to_slp1, slp1_to_deva
from .training import HyperParams, TrainHistory, grad_check, train

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "Dataset",
    "EvalReport",
    "HyperParams",
    "LogMelSpectrogram",
    "ManifestEntry",
    "ModelConfig",
    "ModelParams",
    "SanskritAsrError",
    "TrainHistory",
    "Transcript",
    "TranscriptionResult",
    "Vocabulary",
    "build_vocab",
    "cer",
    "count_parameters",
    "deva_to_slp1",
    "evaluate",
    "gen_synthetic_corpus",
    "grad_check",
    "greedy_decode",
    "init_params",
    "levenshtein",
    "load_checkpoint",
    "load_manifest",
    "log_mel",
    "presets",
    "read_wav",
    "save_checkpoint",
    "slp1_to_deva",
    "train",
    "transcribe",
    "wer",
    "write_wav",
]
