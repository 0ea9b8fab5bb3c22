"""Run configuration for fine-tuning and serving."""

from dataclasses import dataclass

MASK_TOKEN = "<mask>"
DEFAULT_EPOCHS = 15
DEFAULT_MASK_RATE = 0.15


@dataclass
class ServiceConfig:
    """Everything one fine-tune run needs.

    Learning rate and batch size have no authoritative source in the
    mutation workflow; the defaults are ordinary masked-LM practice
    and exist to be overridden.
    """

    corpus_path: str
    base_model: str
    output_dir: str
    epochs: int = DEFAULT_EPOCHS
    mask_rate: float = DEFAULT_MASK_RATE
    port: int = 8750
    device: str = "cpu"
    learning_rate: float = 5e-4
    batch_size: int = 8
    max_input_tokens: int = 256
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.mask_rate < 1.0:
            raise ValueError(f"mask_rate must be in (0, 1), got {self.mask_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_input_tokens < 8:
            raise ValueError(f"max_input_tokens must be >= 8, got {self.max_input_tokens}")
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port must be in [1, 65535], got {self.port}")
