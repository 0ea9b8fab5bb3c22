"""Model file parsing (XML subset and canonical JSON) and corpus building.

The XML subset accepts the minimal shape of MDL-style exports:
``<Model>`` containing ``<Block>`` elements with ``<P>`` property
children and ``<Line>`` connection elements.  Ports in XML are
1-based as in the source tools; the in-memory form is 0-based.
"""

from __future__ import annotations

import json
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

from . import ir
from .errors import EmptyCorpusError, ParseError, SchemaError
from .masking import MASK_TOKEN


def _parse_xml(source: str, warnings: list[str]) -> ir.ModelIR:
    try:
        root = ET.fromstring(source)
    except ET.ParseError as exc:
        line = exc.position[0] if exc.position else None
        raise ParseError(f"invalid XML: {exc.msg if hasattr(exc, 'msg') else exc}", line) from exc

    if root.tag != "Model":
        raise ParseError(f"root element must be <Model>, got <{root.tag}>")
    name = root.get("Name")
    if not name:
        raise ParseError("<Model> requires a Name attribute")

    sample_time = 1.0
    for p in root.findall("P"):
        if p.get("Name") == "SampleTime":
            try:
                sample_time = float(p.text or "")
            except ValueError:
                raise ParseError(f"model SampleTime is not a number: {p.text!r}") from None

    blocks: list[ir.Block] = []
    names_to_ids: dict[str, str] = {}
    for elem in root.findall("Block"):
        btype = elem.get("BlockType")
        bname = elem.get("Name")
        if not btype or not bname:
            raise ParseError("<Block> requires BlockType and Name attributes")
        if btype not in ir.PROPERTY_SPECS:
            warnings.append(f"block {bname!r}: unknown type {btype!r} kept as {ir.STATEFLOW}")
            btype = ir.STATEFLOW
        bid = elem.get("SID") or bname
        props: dict[str, ir.PropertyValue] = {}
        for p in elem.findall("P"):
            key = p.get("Name")
            if not key:
                raise ParseError(f"block {bname!r}: <P> requires a Name attribute")
            props[key] = ir.coerce_property(btype, key, p.text or "")
        blocks.append(ir.Block(id=bid, name=bname, block_type=btype, properties=props))
        names_to_ids.setdefault(bname, bid)

    def resolve(label: str) -> str:
        return names_to_ids.get(label, label)

    connections: list[ir.Connection] = []
    for elem in root.findall("Line"):
        fields = {}
        for tag in ("SrcBlock", "SrcPort", "DstBlock", "DstPort"):
            child = elem.find(tag)
            if child is None or child.text is None:
                raise ParseError(f"<Line> requires a <{tag}> child")
            fields[tag] = child.text.strip()
        try:
            src_port = int(fields["SrcPort"]) - 1
            dst_port = int(fields["DstPort"]) - 1
        except ValueError:
            raise ParseError("<Line> ports must be integers") from None
        connections.append(
            ir.Connection(resolve(fields["SrcBlock"]), src_port, resolve(fields["DstBlock"]), dst_port)
        )

    return ir.ModelIR(name=name, blocks=blocks, connections=connections, sample_time=sample_time)


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"{where}: missing required key {key!r}")
    return obj[key]


def _parse_json(source: str) -> ir.ModelIR:
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")

    name = _require(doc, "name", "model")
    if not isinstance(name, str):
        raise SchemaError("model name must be a string")
    sample_time = doc.get("sample_time", 1.0)
    if isinstance(sample_time, bool) or not isinstance(sample_time, (int, float)):
        raise SchemaError("sample_time must be a number")

    raw_blocks = _require(doc, "blocks", "model")
    if not isinstance(raw_blocks, list):
        raise SchemaError("blocks must be a list")
    blocks: list[ir.Block] = []
    for i, rb in enumerate(raw_blocks):
        where = f"blocks[{i}]"
        if not isinstance(rb, dict):
            raise SchemaError(f"{where}: must be an object")
        bid = _require(rb, "id", where)
        bname = _require(rb, "name", where)
        btype = _require(rb, "type", where)
        for label, v in (("id", bid), ("name", bname), ("type", btype)):
            if not isinstance(v, str):
                raise SchemaError(f"{where}: {label} must be a string")
        raw_props = rb.get("Properties", rb.get("properties", {}))
        if not isinstance(raw_props, dict):
            raise SchemaError(f"{where}: Properties must be an object")
        props = {k: ir.coerce_property(btype, k, v) for k, v in raw_props.items()}
        blocks.append(ir.Block(id=bid, name=bname, block_type=btype, properties=props))

    raw_conns = doc.get("connections", [])
    if not isinstance(raw_conns, list):
        raise SchemaError("connections must be a list")
    connections: list[ir.Connection] = []
    for i, rc in enumerate(raw_conns):
        where = f"connections[{i}]"
        if not isinstance(rc, dict):
            raise SchemaError(f"{where}: must be an object")
        src = _require(rc, "src", where)
        dst = _require(rc, "dst", where)
        src_port = _require(rc, "src_port", where)
        dst_port = _require(rc, "dst_port", where)
        if not isinstance(src, str) or not isinstance(dst, str):
            raise SchemaError(f"{where}: src and dst must be block id strings")
        for label, v in (("src_port", src_port), ("dst_port", dst_port)):
            if isinstance(v, bool) or not isinstance(v, int):
                raise SchemaError(f"{where}: {label} must be an integer")
        connections.append(ir.Connection(src, int(src_port), dst, int(dst_port)))

    return ir.ModelIR(name=name, blocks=blocks, connections=connections, sample_time=float(sample_time))


def parse_model(source: str, fmt: str, warnings: list[str] | None = None) -> ir.ModelIR:
    """Parse model source text in the given format ("xml" or "json").

    Parse-level oddities that do not prevent construction (unknown
    XML block types) are appended to ``warnings`` when a list is
    passed.
    """
    sink = warnings if warnings is not None else []
    if fmt == "xml":
        return _parse_xml(source, sink)
    if fmt == "json":
        return _parse_json(source)
    raise ValueError(f"unknown format {fmt!r}; expected 'xml' or 'json'")


def load_model_file(path: str | Path, warnings: list[str] | None = None) -> ir.ModelIR:
    """Parse a model file, picking the format from the extension."""
    path = Path(path)
    fmt = "xml" if path.suffix.lower() == ".xml" else "json"
    return parse_model(path.read_text(encoding="utf-8"), fmt, warnings)


def iter_model_files(directory: str | Path) -> list[Path]:
    # sibling requirement files (<stem>.reqs.json) live next to models
    directory = Path(directory)
    return sorted(
        p
        for p in directory.iterdir()
        if p.suffix.lower() in (".json", ".xml") and not p.name.lower().endswith(".reqs.json")
    )


@dataclass(frozen=True)
class CorpusRecord:
    """One fine-tuning example: a rendering plus its masked variant.

    targets pairs each placeholder (in order of appearance) with the
    offset of the original token in ``text`` and the token itself, so
    the masking is reversible.
    """

    model_name: str
    text: str
    masked_text: str
    targets: tuple[tuple[int, str], ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "model_name": self.model_name,
                "text": self.text,
                "masked_text": self.masked_text,
                "targets": [[pos, tok] for pos, tok in self.targets],
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "CorpusRecord":
        doc = json.loads(line)
        return cls(
            model_name=doc["model_name"],
            text=doc["text"],
            masked_text=doc["masked_text"],
            targets=tuple((int(p), str(t)) for p, t in doc["targets"]),
        )


def _mask_record(model: ir.ModelIR, mask_rate: float, rng: random.Random) -> CorpusRecord:
    text, spans = ir.render_with_spans(model)
    k = round(mask_rate * len(spans))
    picked = sorted(rng.sample(range(len(spans)), k)) if k else []
    pieces: list[str] = []
    targets: list[tuple[int, str]] = []
    cursor = 0
    for idx in picked:
        span = spans[idx]
        pieces.append(text[cursor : span.start])
        pieces.append(MASK_TOKEN)
        targets.append((span.start, text[span.start : span.end]))
        cursor = span.end
    pieces.append(text[cursor:])
    return CorpusRecord(
        model_name=model.name,
        text=text,
        masked_text="".join(pieces),
        targets=tuple(targets),
    )


def build_corpus(models: list[ir.ModelIR], mask_rate: float = 0.15, seed: int = 0) -> list[CorpusRecord]:
    """One record per model, masking ~mask_rate of the maskable tokens.

    Each record's randomness is seeded independently from (seed,
    position, model name), so records do not depend on how the work
    is scheduled.
    """
    if not models:
        raise EmptyCorpusError("corpus needs at least one model")
    if not (0 < mask_rate < 1):
        raise ValueError(f"mask_rate must be in (0,1), got {mask_rate}")
    records = []
    for idx, model in enumerate(models):
        rng = random.Random(f"{seed}:{idx}:{model.name}")
        records.append(_mask_record(model, mask_rate, rng))
    return records


def write_corpus(records: list[CorpusRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")


def read_corpus(path: str | Path) -> list[CorpusRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(CorpusRecord.from_json(line))
    return records
