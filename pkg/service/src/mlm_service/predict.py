"""Whole-value predictions from a fine-tuned masked LM.

The protocol promises whole value tokens while the model predicts
sub-tokens, so each candidate is reconstructed by greedy fill: start
from one of the top sub-tokens at the masked slot, then repeatedly
append the most likely next piece until a piece opens a new word or
is pure JSON structure. The raw score of a candidate is the product
of its piece probabilities; scores are renormalized over the
returned candidates. Reconstruction therefore yields single-word
values only, which is what the rendering grammar puts in one slot.
"""

import threading
from dataclasses import dataclass
from pathlib import Path

import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer

from .errors import CheckpointError, MaskCountError

# pieces made only of these characters terminate a value
_STRUCTURAL = set("\"',:{}[]()")
# byte-level markers for a piece that starts a new word
_WORD_MARKERS = ("Ġ", "Ċ", "ĉ", "▁")


def _is_new_word(piece: str) -> bool:
    return piece.startswith(_WORD_MARKERS) or (bool(piece) and piece[0].isspace())


def _body(piece: str) -> str:
    return piece.lstrip("".join(_WORD_MARKERS))


@dataclass(frozen=True)
class Prediction:
    token: str
    score: float


class MlmPredictor:
    """Stateless inference over one loaded checkpoint."""

    def __init__(
        self,
        checkpoint_dir: str | Path,
        device: str = "cpu",
        candidate_margin: int = 8,
        max_pieces: int = 6,
    ):
        checkpoint_dir = Path(checkpoint_dir)
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(checkpoint_dir)
            self.model = AutoModelForMaskedLM.from_pretrained(checkpoint_dir).to(device)
        except (OSError, ValueError) as exc:
            raise CheckpointError(f"cannot load checkpoint {checkpoint_dir}: {exc}") from exc
        self.model.eval()
        self.device = device
        self.candidate_margin = candidate_margin
        self.max_pieces = max_pieces
        self.model_id = f"mlm:{checkpoint_dir.name}"
        self.max_input_tokens = int(min(self.tokenizer.model_max_length, 1 << 16))
        self._special_ids = frozenset(self.tokenizer.all_special_ids)
        self._lock = threading.Lock()

    @property
    def mask_token(self) -> str:
        return self.tokenizer.mask_token

    def handshake(self) -> dict:
        return {
            "mask_token": self.mask_token,
            "max_input_tokens": self.max_input_tokens,
            "model_id": self.model_id,
        }

    def _mask_probs(self, ids: list[int], slot: int) -> torch.Tensor:
        out = self.model(input_ids=torch.tensor([ids], device=self.device))
        return out.logits[0, slot].softmax(-1)

    def _complete(self, ids: list[int], pos: int, first_id: int, first_prob: float) -> tuple[str, float]:
        """Greedy fill from one first piece; empty token means discard."""
        pieces = [first_id]
        score = first_prob
        while len(pieces) < self.max_pieces:
            probe = ids[:pos] + pieces + [self.tokenizer.mask_token_id] + ids[pos + 1 :]
            probs = self._mask_probs(probe, pos + len(pieces))
            next_id = int(probs.argmax())
            piece = self.tokenizer.convert_ids_to_tokens(next_id)
            if next_id in self._special_ids or _is_new_word(piece):
                break
            body = _body(piece)
            if not body or all(c in _STRUCTURAL for c in body):
                break
            pieces.append(next_id)
            score *= float(probs[next_id])
        token = self.tokenizer.decode(pieces).strip()
        return token, score

    def predict(self, text: str, top_k: int) -> list[Prediction]:
        if top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {top_k}")
        occurrences = text.count(self.mask_token)
        if occurrences != 1:
            raise MaskCountError(
                f"input contains {occurrences} mask placeholders, expected exactly 1"
            )
        with self._lock, torch.no_grad():
            ids = self.tokenizer(text)["input_ids"]
            slots = [i for i, tid in enumerate(ids) if tid == self.tokenizer.mask_token_id]
            if len(slots) != 1:
                raise MaskCountError("the mask placeholder did not survive tokenization")
            pos = slots[0]
            # headroom so greedy-fill probes never outgrow the position table
            budget = max(8, self.max_input_tokens - self.max_pieces)
            if len(ids) > budget:
                # over-long inputs keep the window centered on the mask;
                # a single-mask request is never rejected for length
                lo = max(0, pos - budget // 2)
                hi = min(len(ids), lo + budget)
                lo = max(0, hi - budget)
                ids = ids[lo:hi]
                pos -= lo

            probs = self._mask_probs(ids, pos)
            width = min(top_k + self.candidate_margin, probs.shape[-1])
            top = probs.topk(width)
            raw: dict[str, float] = {}
            for prob, cand in zip(top.values.tolist(), top.indices.tolist()):
                if cand in self._special_ids:
                    continue
                body = _body(self.tokenizer.convert_ids_to_tokens(cand))
                if not body or all(c in _STRUCTURAL for c in body):
                    continue
                token, score = self._complete(ids, pos, cand, prob)
                if token and (token not in raw or score > raw[token]):
                    raw[token] = score

        total = sum(raw.values())
        if total == 0.0:
            return []
        preds = [Prediction(token, score / total) for token, score in raw.items()]
        preds.sort(key=lambda p: (-p.score, p.token))
        return preds[:top_k]
