"""Fine-tuning and inference service for masked-value prediction.

Talks to the rest of the toolchain only through files and HTTP: it
consumes the JSON-lines corpus and implements the prediction wire
protocol documented in docs/protocol.md at the repository root.
"""

from transformers.utils import logging as _hf_logging

from .base import make_tiny_base, train_tokenizer
from .config import DEFAULT_EPOCHS, DEFAULT_MASK_RATE, MASK_TOKEN, ServiceConfig
from .corpus import read_corpus_texts
from .errors import (
    CheckpointError,
    CorpusEmptyError,
    DeviceUnavailableError,
    MaskCountError,
    ServiceError,
)
from .predict import MlmPredictor, Prediction
from .server import build_app
from .train import TrainResult, finetune

_hf_logging.disable_progress_bar()

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "CorpusEmptyError",
    "DEFAULT_EPOCHS",
    "DEFAULT_MASK_RATE",
    "DeviceUnavailableError",
    "MASK_TOKEN",
    "MaskCountError",
    "MlmPredictor",
    "Prediction",
    "ServiceConfig",
    "ServiceError",
    "TrainResult",
    "build_app",
    "finetune",
    "make_tiny_base",
    "read_corpus_texts",
    "train_tokenizer",
    "__version__",
]
