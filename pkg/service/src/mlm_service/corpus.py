"""Reader for the cross-component corpus format.

The corpus is JSON lines, one object per model, with at least a
"text" field holding the model rendering. Other fields (masked
variants, mask targets) belong to the producer; fine-tuning applies
its own dynamic masking, so only "text" is consumed here.
"""

import json
from pathlib import Path

from .errors import CorpusEmptyError


def read_corpus_texts(path: str | Path) -> list[str]:
    texts = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                text = doc["text"]
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{n}: not a corpus record: {exc}") from exc
            if not isinstance(text, str) or not text:
                raise ValueError(f"{path}:{n}: corpus record has an empty text field")
            texts.append(text)
    if not texts:
        raise CorpusEmptyError(f"corpus {path} holds no records")
    return texts
