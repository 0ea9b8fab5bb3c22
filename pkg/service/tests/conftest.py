import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mlm_service import MlmPredictor, ServiceConfig, finetune, make_tiny_base

CORPUS = Path(__file__).parent / "data" / "toy_corpus.jsonl"


@pytest.fixture(scope="session")
def toy_corpus() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def tiny_base(tmp_path_factory, toy_corpus) -> Path:
    return make_tiny_base(toy_corpus, tmp_path_factory.mktemp("base"), seed=0)


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory, toy_corpus, tiny_base) -> Path:
    result = finetune(
        ServiceConfig(
            corpus_path=str(toy_corpus),
            base_model=str(tiny_base),
            output_dir=str(tmp_path_factory.mktemp("ckpt") / "model"),
            epochs=1,
            batch_size=2,
            seed=0,
        )
    )
    return result.checkpoint_dir


@pytest.fixture(scope="session")
def predictor(checkpoint) -> MlmPredictor:
    return MlmPredictor(checkpoint)
