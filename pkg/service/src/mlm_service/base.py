"""Fabricate a tiny local base checkpoint.

Fine-tuning normally starts from a published pretrained code MLM
named by ``ServiceConfig.base_model``. Air-gapped environments (CI,
this repository's tests) have no model hub, so this module builds a
structurally identical stand-in: a byte-level BPE tokenizer trained
on the corpus plus a randomly initialized small roberta-style model,
saved in the standard checkpoint layout. ``finetune`` loads it
through the exact same path as a hub checkpoint.
"""

import random
from pathlib import Path

from tokenizers import Tokenizer, decoders, models, pre_tokenizers, trainers
from transformers import PreTrainedTokenizerFast, RobertaConfig, RobertaForMaskedLM

from .config import MASK_TOKEN
from .corpus import read_corpus_texts

SPECIAL_TOKENS = ["<s>", "<pad>", "</s>", "<unk>", MASK_TOKEN]


def train_tokenizer(texts: list[str], vocab_size: int, max_input_tokens: int) -> PreTrainedTokenizerFast:
    tok = Tokenizer(models.BPE(unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=vocab_size,
        special_tokens=SPECIAL_TOKENS,
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
    )
    tok.train_from_iterator(texts, trainer)
    return PreTrainedTokenizerFast(
        tokenizer_object=tok,
        bos_token="<s>",
        pad_token="<pad>",
        eos_token="</s>",
        unk_token="<unk>",
        mask_token=MASK_TOKEN,
        model_max_length=max_input_tokens,
    )


def make_tiny_base(
    corpus_path: str | Path,
    output_dir: str | Path,
    vocab_size: int = 512,
    hidden_size: int = 64,
    layers: int = 2,
    heads: int = 2,
    max_input_tokens: int = 256,
    seed: int = 0,
) -> Path:
    """Write a loadable base checkpoint derived from the corpus."""
    import torch

    texts = read_corpus_texts(corpus_path)
    tokenizer = train_tokenizer(texts, vocab_size, max_input_tokens)
    config = RobertaConfig(
        vocab_size=len(tokenizer),
        hidden_size=hidden_size,
        num_hidden_layers=layers,
        num_attention_heads=heads,
        intermediate_size=hidden_size * 4,
        max_position_embeddings=max_input_tokens + 8,
        type_vocab_size=1,
        pad_token_id=tokenizer.pad_token_id,
        bos_token_id=tokenizer.bos_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    torch.manual_seed(seed)
    random.seed(seed)
    model = RobertaForMaskedLM(config)
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(output_dir)
    tokenizer.save_pretrained(output_dir)
    return output_dir
