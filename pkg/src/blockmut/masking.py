"""Mask-site enumeration and masked-sequence construction.

A mask site is one maskable value in the canonical rendering: a block
property value, or a block name when name masking is enabled.  The
whole value is replaced by a single placeholder; sub-token masking is
deliberately not supported so that predictions stay syntactically
coherent values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import ir
from .errors import UnknownSiteError

MASK_TOKEN = "<MASK>"
DEFAULT_CONTEXT_WINDOW = 256


@dataclass(frozen=True)
class MaskSite:
    block_id: str
    property_key: str
    original: ir.PropertyValue
    text_span: tuple[int, int]
    block_type: str


@dataclass(frozen=True)
class MaskedSequence:
    site: MaskSite
    text: str
    context_window: int
    mask_token: str = MASK_TOKEN


def enumerate_sites(model: ir.ModelIR, include_names: bool = False) -> list[MaskSite]:
    """All maskable sites in rendering order.

    Name sites are opt-in: they are useful for corpus building but
    renames classify poorly as mutants, so generation defaults to
    property values only.
    """
    _, spans = ir.render_with_spans(model)
    bm = model.block_map()
    sites = []
    for span in spans:
        block = bm[span.block_id]
        if span.key == ir.NAME_KEY:
            if not include_names:
                continue
            original = ir.PropertyValue("text", block.name)
        else:
            original = block.properties[span.key]
        sites.append(
            MaskSite(
                block_id=span.block_id,
                property_key=span.key,
                original=original,
                text_span=(span.start, span.end),
                block_type=block.block_type,
            )
        )
    return sites


def site_for(model: ir.ModelIR, block_id: str, property_key: str) -> MaskSite:
    for site in enumerate_sites(model, include_names=True):
        if site.block_id == block_id and site.property_key == property_key:
            return site
    raise UnknownSiteError(f"no maskable site at ({block_id!r}, {property_key!r})")


def _lexical_tokens(text: str, mask_token: str) -> list[tuple[int, int]]:
    # JSON lexical classes plus the bare mask literal; a quoted mask
    # is part of its string token, so strings never get split.
    pattern = re.compile(
        r'"(?:\\.|[^"\\])*"'
        f"|{re.escape(mask_token)}"
        r"|-?(?:\d+(?:\.\d+)?(?:[eE][+-]?\d+)?|Infinity|NaN)"
        r"|[{}\[\]:,]"
    )
    return [(m.start(), m.end()) for m in pattern.finditer(text)]


def mask(
    model: ir.ModelIR,
    site: MaskSite,
    context_window: int = DEFAULT_CONTEXT_WINDOW,
    mask_token: str = MASK_TOKEN,
) -> MaskedSequence:
    """Replace the site's value with the placeholder and window the text.

    Keeps up to context_window lexical tokens on each side of the
    token containing the placeholder.  A side shorter than the budget
    is kept whole; when both sides are truncated the placeholder sits
    at the window center.
    """
    text, spans = ir.render_with_spans(model)
    start, end = site.text_span
    if not any(s.start == start and s.end == end and s.block_id == site.block_id for s in spans):
        raise UnknownSiteError(f"site ({site.block_id!r}, {site.property_key!r}) not in this model")
    masked = text[:start] + mask_token + text[end:]

    tokens = _lexical_tokens(masked, mask_token)
    mask_pos = start if site.original.kind == "number" else start - 1
    mask_idx = None
    for i, (ts, te) in enumerate(tokens):
        if ts <= mask_pos < te:
            mask_idx = i
            break
    if mask_idx is None:
        raise UnknownSiteError("mask placeholder not found after substitution")

    lo = max(0, mask_idx - context_window)
    hi = min(len(tokens) - 1, mask_idx + context_window)
    window = masked[tokens[lo][0] : tokens[hi][1]]
    return MaskedSequence(site=site, text=window, context_window=context_window, mask_token=mask_token)


def unmask(seq: MaskedSequence, token: str) -> str:
    """Splice a token back into the placeholder slot."""
    count = seq.text.count(seq.mask_token)
    if count != 1:
        raise UnknownSiteError(f"expected exactly one placeholder, found {count}")
    return seq.text.replace(seq.mask_token, token)
