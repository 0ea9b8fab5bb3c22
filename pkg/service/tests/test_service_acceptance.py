"""Acceptance gate for the prediction service.

Criterion 10: the live HTTP service satisfies every shared conformance
vector (handshake shape, top-k ordering, duplicate rejection, 400 on
malformed mask counts, deterministic repeats).

Criterion 11: a one-epoch fine-tune over a ten-model corpus completes
on CPU with finite loss, and the loss trend is decreasing on average
in at least four of five seeded runs.
"""

import json
import math
from statistics import fmean

from fastapi.testclient import TestClient

from mlm_service import ServiceConfig, build_app, finetune
from vector_runner import load_vectors, run_vectors


class _HttpAdapter:
    """Drives the conformance vectors through the real HTTP surface."""

    def __init__(self, client: TestClient):
        self.client = client

    def handshake(self):
        resp = self.client.get("/handshake")
        assert resp.status_code == 200
        return resp.json()

    def predict(self, text: str, top_k: int):
        resp = self.client.post("/predict", json={"text": text, "top_k": top_k})
        if resp.status_code == 400:
            return "mask_request", None
        assert resp.status_code == 200
        return "ok", resp.json()["predictions"]


def test_10_service_passes_conformance_vectors(predictor):
    client = TestClient(build_app(predictor))
    failures = run_vectors(_HttpAdapter(client), load_vectors())
    assert not failures, "\n".join(failures)


def test_11_finetune_smoke_cpu(tmp_path, toy_corpus, tiny_base):
    decreasing = 0
    for seed in range(5):
        out = tmp_path / f"seed{seed}"
        result = finetune(
            ServiceConfig(
                corpus_path=str(toy_corpus),
                base_model=str(tiny_base),
                output_dir=str(out),
                epochs=1,
                batch_size=1,
                seed=seed,
                device="cpu",
            )
        )
        assert all(math.isfinite(x) for x in result.epoch_losses)
        steps = result.step_losses[0]
        assert len(steps) == 10
        assert all(math.isfinite(x) for x in steps)
        half = len(steps) // 2
        if fmean(steps[half:]) < fmean(steps[:half]):
            decreasing += 1
        logged = [json.loads(l) for l in (out / "losses.jsonl").read_text().splitlines()]
        assert [d["loss"] for d in logged] == result.epoch_losses
    assert decreasing >= 4
