"""Masked-token predictors: remote protocol client and offline baseline.

Both expose the same surface: handshake() describing capabilities and
predict()/predict_text() returning scored tokens for a sequence with
exactly one mask placeholder.
"""

from __future__ import annotations

import re
import time
from collections import Counter
from dataclasses import dataclass

import requests

from . import ir
from .errors import MaskRequestError, PredictorUnavailable, ProtocolError
from .ingest import CorpusRecord
from .masking import MASK_TOKEN, MaskedSequence


@dataclass(frozen=True)
class Prediction:
    token: str
    score: float


@dataclass(frozen=True)
class PredictorHandshake:
    mask_token: str
    max_input_tokens: int
    model_id: str


def sort_predictions(preds: list[Prediction]) -> list[Prediction]:
    """Score descending, ties broken lexicographically by token."""
    best: dict[str, float] = {}
    for p in preds:
        if p.token not in best or p.score > best[p.token]:
            best[p.token] = p.score
    return [Prediction(t, s) for s, t in sorted(((s, t) for t, s in best.items()), key=lambda x: (-x[0], x[1]))]


# Keys whose values are structural, never vocabulary for prediction.
_SKIP_KEYS = frozenset({"id", "type", "sample_time", "src", "dst", "src_port", "dst_port"})

_PAIR_RE = re.compile(
    r'"([A-Za-z_]\w*)"\s*:\s*'
    r'("(?:\\.|[^"\\])*"|-?(?:\d+(?:\.\d+)?(?:[eE][+-]?\d+)?|Infinity|NaN))'
)


def _harvest_pairs(text: str) -> list[tuple[str, str]]:
    """(key, canonical value token) pairs from rendered JSON text."""
    pairs = []
    for m in _PAIR_RE.finditer(text):
        key, raw = m.group(1), m.group(2)
        if key in _SKIP_KEYS:
            continue
        token = raw[1:-1] if raw.startswith('"') else raw
        pairs.append((key, token))
    return pairs


class OfflinePredictor:
    """Per-property-key frequency model over a training corpus.

    Scores are relative frequencies among the candidate pool for the
    masked key.  Values visible in the query text itself join the
    pool with one count per occurrence, which is also how block names
    get a vocabulary: they are never harvested from the corpus, only
    from the model being queried.
    """

    model_id = "offline-frequency-baseline"
    max_input_tokens = 8192

    def __init__(self, mask_token: str = MASK_TOKEN):
        self.mask_token = mask_token
        self._table: dict[str, Counter[str]] = {}

    def fit_corpus(self, records: list[CorpusRecord]) -> "OfflinePredictor":
        for rec in records:
            for key, token in _harvest_pairs(rec.text):
                if key == ir.NAME_KEY:
                    continue
                self._table.setdefault(key, Counter())[token] += 1
        return self

    def fit_models(self, models: list[ir.ModelIR]) -> "OfflinePredictor":
        for model in models:
            for block in model.blocks:
                for key, pv in block.properties.items():
                    self._table.setdefault(key, Counter())[pv.canonical] += 1
        return self

    def handshake(self) -> PredictorHandshake:
        return PredictorHandshake(self.mask_token, self.max_input_tokens, self.model_id)

    def predict_text(self, text: str, top_k: int) -> list[Prediction]:
        if top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {top_k}")
        occurrences = text.count(self.mask_token)
        if occurrences == 0:
            raise MaskRequestError("input contains no mask placeholder")
        if occurrences > 1:
            raise MaskRequestError(f"input contains {occurrences} mask placeholders, expected 1")

        key_match = re.search(
            r'"([A-Za-z_]\w*)"\s*:\s*"?' + re.escape(self.mask_token), text
        )
        if key_match is None:
            return []
        key = key_match.group(1)

        pool: Counter[str] = Counter(self._table.get(key, Counter()))
        for pair_key, token in _harvest_pairs(text):
            if pair_key == key and self.mask_token not in token:
                pool[token] += 1
        total = sum(pool.values())
        if total == 0:
            return []
        preds = sort_predictions([Prediction(t, c / total) for t, c in pool.items()])
        return preds[:top_k]

    def predict(self, seq: MaskedSequence, top_k: int) -> list[Prediction]:
        if seq.mask_token != self.mask_token:
            text = seq.text.replace(seq.mask_token, self.mask_token)
        else:
            text = seq.text
        return self.predict_text(text, top_k)


class RemotePredictor:
    """HTTP client for the prediction wire protocol.

    Transient failures are retried with capped exponential backoff; a
    well-formed error status is surfaced immediately.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, attempts: int = 3, session=None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.attempts = attempts
        self._session = session if session is not None else requests
        self._sleep = time.sleep
        self._handshake: PredictorHandshake | None = None

    def _retry(self, what: str, call):
        delay = 0.5
        last = None
        for attempt in range(self.attempts):
            try:
                resp = call()
            except requests.RequestException as exc:
                last = exc
            else:
                if resp.status_code == 503:
                    last = ProtocolError("service reports model not loaded (503)")
                else:
                    return resp
            if attempt + 1 < self.attempts:
                self._sleep(delay)
                delay = min(delay * 2, 4.0)
        raise PredictorUnavailable(f"{what} failed after {self.attempts} attempts: {last}")

    def handshake(self) -> PredictorHandshake:
        resp = self._retry(
            "handshake", lambda: self._session.get(f"{self.endpoint}/handshake", timeout=self.timeout)
        )
        try:
            doc = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"handshake returned non-JSON body: {exc}") from exc
        try:
            hs = PredictorHandshake(
                mask_token=str(doc["mask_token"]),
                max_input_tokens=int(doc["max_input_tokens"]),
                model_id=str(doc["model_id"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"handshake response malformed: {doc!r}") from exc
        if not hs.mask_token or hs.max_input_tokens < 1:
            raise ProtocolError(f"handshake response malformed: {doc!r}")
        self._handshake = hs
        return hs

    @property
    def mask_token(self) -> str:
        if self._handshake is None:
            self.handshake()
        return self._handshake.mask_token

    def predict_text(self, text: str, top_k: int) -> list[Prediction]:
        if top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {top_k}")
        resp = self._retry(
            "predict",
            lambda: self._session.post(
                f"{self.endpoint}/predict", json={"text": text, "top_k": top_k}, timeout=self.timeout
            ),
        )
        if resp.status_code == 400:
            raise MaskRequestError(f"service rejected the request: {resp.text}")
        if resp.status_code != 200:
            raise ProtocolError(f"unexpected status {resp.status_code}: {resp.text}")
        try:
            doc = resp.json()
            raw = doc["predictions"]
            preds = [Prediction(str(p["token"]), float(p["score"])) for p in raw]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"prediction response malformed: {exc}") from exc
        if len(preds) > top_k:
            raise ProtocolError(f"service returned {len(preds)} predictions for top_k={top_k}")
        for p in preds:
            if not (0.0 <= p.score <= 1.0):
                raise ProtocolError(f"score out of range: {p}")
        return sort_predictions(preds)

    def predict(self, seq: MaskedSequence, top_k: int) -> list[Prediction]:
        text = seq.text
        if seq.mask_token != self.mask_token:
            text = text.replace(seq.mask_token, self.mask_token)
        return self.predict_text(text, top_k)
