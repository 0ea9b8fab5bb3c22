"""In-memory model representation and its canonical text form.

A model is a flat list of blocks plus directed connections between
block ports.  The canonical rendering is deliberately boring JSON:
stable key order, two-space indent, shortest round-trip float
literals.  Byte stability is what makes text offsets usable as mask
sites, so the renderer here is hand-rolled and kept in lockstep with
``json.dumps(view, indent=2)``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from .errors import SchemaError, UnknownSiteError

INPORT = "Inport"
OUTPORT = "Outport"
CONSTANT = "Constant"
GAIN = "Gain"
SUM = "Sum"
PRODUCT = "Product"
RELATIONAL = "RelationalOperator"
LOGICAL = "LogicalOperator"
SWITCH = "Switch"
UNIT_DELAY = "UnitDelay"
DISCRETE_INTEGRATOR = "DiscreteIntegrator"
SATURATION = "Saturation"
GOTO = "Goto"
FROM = "From"
STATEFLOW = "StateflowStub"

DELAY_TYPES = frozenset({UNIT_DELAY, DISCRETE_INTEGRATOR})

RELATIONAL_OPS = ("==", "~=", "<", "<=", ">", ">=")
LOGICAL_OPS = ("AND", "OR", "XOR", "NAND", "NOR", "NOT")
DATA_TYPES = ("double", "single", "int32")
ON_OFF = ("on", "off")

# Pseudo property key used for mask sites that target the block name.
NAME_KEY = "name"


def format_number(value: float) -> str:
    """Canonical literal for a numeric property value.

    Matches what ``json.dumps`` emits for the same float so the
    hand-rolled renderer stays byte-identical to the library one.
    Negative zero collapses to plain zero.
    """
    value = float(value)
    if value == 0.0:
        value = 0.0
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "Infinity" if value > 0 else "-Infinity"
    return repr(value)


def escape_text(value: str) -> str:
    """JSON string escaping without the surrounding quotes."""
    return json.dumps(value)[1:-1]


def unescape_text(token: str) -> str:
    """Inverse of escape_text; tolerates tokens that never were escaped."""
    try:
        return json.loads(f'"{token}"')
    except ValueError:
        return token


@dataclass(frozen=True)
class PropertyValue:
    """One property value: a float or a piece of text.

    kind is "number", "enum" or "text".  Enum and text values behave
    identically at this level; the distinction only matters to
    validation and to mutation operators that want the vocabulary.
    """

    kind: str
    value: float | str

    def __post_init__(self):
        if self.kind == "number":
            v = float(self.value)
            if v == 0.0:
                v = 0.0
            object.__setattr__(self, "value", v)
        elif self.kind in ("text", "enum"):
            object.__setattr__(self, "value", str(self.value))
        else:
            raise SchemaError(f"unknown property kind: {self.kind!r}")

    @property
    def canonical(self) -> str:
        """Token form of the value as it appears in the rendered text."""
        if self.kind == "number":
            return format_number(self.value)
        return escape_text(self.value)

    @property
    def json_value(self) -> float | str:
        return self.value


def number(value: float) -> PropertyValue:
    return PropertyValue("number", value)


def text(value: str) -> PropertyValue:
    return PropertyValue("text", value)


def enum(value: str) -> PropertyValue:
    return PropertyValue("enum", value)


@dataclass(frozen=True)
class PropertySpec:
    """Declared shape of one property on one block type."""

    key: str
    kind: str
    required: bool = False
    vocabulary: tuple[str, ...] | None = None
    pattern: str | None = None

    def admits(self, value: PropertyValue) -> str | None:
        """None when the value fits, else a human-readable complaint."""
        if self.kind == "number":
            if value.kind != "number":
                return f"{self.key} expects a number, got {value.value!r}"
            if not math.isfinite(value.value):
                return f"{self.key} must be finite, got {value.canonical}"
            return None
        if value.kind == "number":
            return f"{self.key} expects text, got {value.canonical}"
        if self.vocabulary is not None and value.value not in self.vocabulary:
            allowed = ", ".join(self.vocabulary)
            return f"{self.key} must be one of [{allowed}], got {value.value!r}"
        if self.pattern is not None and re.fullmatch(self.pattern, value.value) is None:
            return f"{self.key} must match /{self.pattern}/, got {value.value!r}"
        return None


_NUMERIC_COMMON = (
    PropertySpec("OutDataTypeStr", "enum", vocabulary=DATA_TYPES),
    PropertySpec("SaturateOnIntegerOverflow", "enum", vocabulary=ON_OFF),
)

PROPERTY_SPECS: dict[str, tuple[PropertySpec, ...]] = {
    INPORT: (),
    OUTPORT: (),
    CONSTANT: (PropertySpec("Value", "number", required=True),) + _NUMERIC_COMMON,
    GAIN: (PropertySpec("Gain", "number", required=True),) + _NUMERIC_COMMON,
    SUM: (PropertySpec("Signs", "text", required=True, pattern=r"[+-]+"),) + _NUMERIC_COMMON,
    PRODUCT: _NUMERIC_COMMON,
    RELATIONAL: (
        PropertySpec("Operator", "enum", required=True, vocabulary=RELATIONAL_OPS),
    ),
    LOGICAL: (
        PropertySpec("Operator", "enum", required=True, vocabulary=LOGICAL_OPS),
    ),
    SWITCH: (PropertySpec("Threshold", "number", required=True),) + _NUMERIC_COMMON,
    UNIT_DELAY: (
        PropertySpec("InitialCondition", "number", required=True),
        PropertySpec("SampleTime", "number"),
    )
    + _NUMERIC_COMMON,
    DISCRETE_INTEGRATOR: (
        PropertySpec("InitialCondition", "number", required=True),
        PropertySpec("SampleTime", "number"),
    )
    + _NUMERIC_COMMON,
    SATURATION: (
        PropertySpec("UpperLimit", "number", required=True),
        PropertySpec("LowerLimit", "number", required=True),
    )
    + _NUMERIC_COMMON,
    GOTO: (PropertySpec("GotoTag", "text", required=True, pattern=r"\w+"),),
    FROM: (PropertySpec("GotoTag", "text", required=True, pattern=r"\w+"),),
    STATEFLOW: (
        PropertySpec("Condition", "text"),
        PropertySpec("TransitionCondition", "text"),
        PropertySpec("Action", "text"),
        PropertySpec("EntryAction", "text"),
    ),
}

BLOCK_TYPES = tuple(PROPERTY_SPECS)


def find_spec(block_type: str, key: str) -> PropertySpec | None:
    for spec in PROPERTY_SPECS.get(block_type, ()):
        if spec.key == key:
            return spec
    return None


def coerce_property(block_type: str, key: str, raw) -> PropertyValue:
    """Build a PropertyValue from a raw JSON value.

    Declared numeric keys accept numeric strings.  Anything that
    cannot be reconciled keeps its JSON shape and is left for
    validation to complain about.
    """
    if isinstance(raw, bool):
        raise SchemaError(f"property {key!r}: booleans are not a value type")
    if isinstance(raw, (int, float)):
        return PropertyValue("number", float(raw))
    if isinstance(raw, str):
        spec = find_spec(block_type, key)
        if spec is not None and spec.kind == "number":
            try:
                return PropertyValue("number", float(raw))
            except ValueError:
                return PropertyValue("text", raw)
        kind = spec.kind if spec is not None else "text"
        return PropertyValue(kind, raw)
    raise SchemaError(f"property {key!r}: unsupported value type {type(raw).__name__}")


@dataclass
class Block:
    id: str
    name: str
    block_type: str
    properties: dict[str, PropertyValue] = field(default_factory=dict)

    def get_number(self, key: str, default: float | None = None) -> float:
        pv = self.properties.get(key)
        if pv is None or pv.kind != "number":
            if default is None:
                raise SchemaError(f"block {self.id}: missing numeric property {key!r}")
            return default
        return pv.value

    def get_text(self, key: str, default: str | None = None) -> str:
        pv = self.properties.get(key)
        if pv is None or pv.kind == "number":
            if default is None:
                raise SchemaError(f"block {self.id}: missing text property {key!r}")
            return default
        return pv.value


def ordered_properties(block: Block) -> list[tuple[str, PropertyValue]]:
    """Declared properties in registry order, then extras sorted by key."""
    declared = [s.key for s in PROPERTY_SPECS.get(block.block_type, ())]
    out = [(k, block.properties[k]) for k in declared if k in block.properties]
    seen = set(declared)
    out.extend(sorted((k, v) for k, v in block.properties.items() if k not in seen))
    return out


@dataclass(frozen=True, order=True)
class Connection:
    src: str
    src_port: int
    dst: str
    dst_port: int


@dataclass
class ModelIR:
    name: str
    blocks: list[Block]
    connections: list[Connection]
    sample_time: float = 1.0

    def __post_init__(self):
        st = float(self.sample_time)
        self.sample_time = 0.0 if st == 0.0 else st

    def block(self, block_id: str) -> Block:
        for b in self.blocks:
            if b.id == block_id:
                return b
        raise UnknownSiteError(f"no block with id {block_id!r}")

    def block_map(self) -> dict[str, Block]:
        return {b.id: b for b in self.blocks}

    def blocks_sorted(self) -> list[Block]:
        return sorted(self.blocks, key=lambda b: b.id)

    def connections_sorted(self) -> list[Connection]:
        return sorted(self.connections, key=lambda c: (c.dst, c.dst_port, c.src, c.src_port))


def port_counts(block: Block) -> tuple[int, int]:
    """(inputs, outputs) for a block; -1 inputs means any number."""
    t = block.block_type
    if t == INPORT or t == CONSTANT or t == FROM:
        return (0, 1)
    if t == OUTPORT or t == GOTO:
        return (1, 0)
    if t == SUM:
        signs = block.get_text("Signs", "++")
        n = sum(1 for c in signs if c in "+-")
        return (max(n, 1), 1)
    if t == LOGICAL:
        op = block.get_text("Operator", "AND")
        return (1 if op == "NOT" else 2, 1)
    if t == SWITCH:
        return (3, 1)
    if t in (PRODUCT, RELATIONAL):
        return (2, 1)
    if t in (GAIN, UNIT_DELAY, DISCRETE_INTEGRATOR, SATURATION):
        return (1, 1)
    if t == STATEFLOW:
        return (-1, 0)
    raise SchemaError(f"unknown block type: {t!r}")


@dataclass(frozen=True)
class ValueSpan:
    """Location of one maskable value in the rendered text.

    start/end are offsets into the rendered string; for text values
    they bracket the escaped content without the quotes.
    """

    block_id: str
    key: str
    start: int
    end: int


def _block_view(block: Block) -> dict:
    return {
        "id": block.id,
        "name": block.name,
        "type": block.block_type,
        "Properties": {k: v.json_value for k, v in ordered_properties(block)},
    }


def maskable_view(model: ModelIR) -> dict:
    return {
        "name": model.name,
        "sample_time": model.sample_time,
        "blocks": [_block_view(b) for b in model.blocks_sorted()],
    }


def full_view(model: ModelIR) -> dict:
    view = maskable_view(model)
    view["connections"] = [
        {"src": c.src, "src_port": c.src_port, "dst": c.dst, "dst_port": c.dst_port}
        for c in model.connections_sorted()
    ]
    return view


def render_with_spans(model: ModelIR) -> tuple[str, tuple[ValueSpan, ...]]:
    """Canonical maskable text plus the offset of every value in it.

    The output is byte-identical to ``json.dumps(maskable_view(m),
    indent=2) + "\\n"``; a property test pins that equivalence.
    """
    out: list[str] = []
    spans: list[ValueSpan] = []
    pos = 0

    def emit(piece: str) -> None:
        nonlocal pos
        out.append(piece)
        pos += len(piece)

    def emit_text_value(block_id: str, key: str, value: str) -> None:
        escaped = escape_text(value)
        emit('"')
        spans.append(ValueSpan(block_id, key, pos, pos + len(escaped)))
        emit(escaped)
        emit('"')

    def emit_number_value(block_id: str, key: str, value: float) -> None:
        literal = format_number(value)
        spans.append(ValueSpan(block_id, key, pos, pos + len(literal)))
        emit(literal)

    emit("{\n")
    emit(f'  "name": {json.dumps(model.name)},\n')
    emit(f'  "sample_time": {format_number(model.sample_time)},\n')
    blocks = model.blocks_sorted()
    if not blocks:
        emit('  "blocks": []\n}\n')
        return "".join(out), tuple(spans)
    emit('  "blocks": [\n')
    for bi, block in enumerate(blocks):
        emit("    {\n")
        emit(f'      "id": {json.dumps(block.id)},\n')
        emit('      "name": ')
        emit_text_value(block.id, NAME_KEY, block.name)
        emit(",\n")
        emit(f'      "type": {json.dumps(block.block_type)},\n')
        props = ordered_properties(block)
        if not props:
            emit('      "Properties": {}\n')
        else:
            emit('      "Properties": {\n')
            for pi, (key, pv) in enumerate(props):
                emit(f"        {json.dumps(key)}: ")
                if pv.kind == "number":
                    emit_number_value(block.id, key, pv.value)
                else:
                    emit_text_value(block.id, key, pv.value)
                emit(",\n" if pi < len(props) - 1 else "\n")
            emit("      }\n")
        emit("    },\n" if bi < len(blocks) - 1 else "    }\n")
    emit("  ]\n}\n")
    return "".join(out), tuple(spans)


def render_text(model: ModelIR) -> str:
    return render_with_spans(model)[0]


def dump_json(model: ModelIR) -> str:
    """Full serialization including connections (the storage format)."""
    return json.dumps(full_view(model), indent=2) + "\n"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    where: str
    message: str


@dataclass(frozen=True)
class ValidityReport:
    diagnostics: tuple[Diagnostic, ...]

    @property
    def ok(self) -> bool:
        return all(d.severity != "error" for d in self.diagnostics)

    @property
    def errors(self) -> tuple[Diagnostic, ...]:
        return tuple(d for d in self.diagnostics if d.severity == "error")

    @property
    def warnings(self) -> tuple[Diagnostic, ...]:
        return tuple(d for d in self.diagnostics if d.severity == "warning")

    def summary(self) -> str:
        if not self.diagnostics:
            return "valid"
        return "; ".join(f"{d.severity} at {d.where}: {d.message}" for d in self.diagnostics)


def _cycle_members(nodes: set[str], edges: list[tuple[str, str]]) -> list[str]:
    # Peel nodes with zero in-degree, then zero out-degree; the rest
    # sit on at least one cycle.
    remaining = set(nodes)
    for key in (0, 1):
        changed = True
        while changed:
            changed = False
            degree: dict[str, int] = {n: 0 for n in remaining}
            for a, b in edges:
                if a in remaining and b in remaining:
                    degree[(a, b)[key]] += 1
            drop = {n for n, d in degree.items() if d == 0}
            if drop:
                remaining -= drop
                changed = True
    return sorted(remaining)


def validate(model: ModelIR) -> ValidityReport:
    """Static checks a model must pass before simulation.

    Errors make the model unrunnable; warnings flag constructs that
    only fault at runtime (unmatched or duplicated routing tags).
    """
    diags: list[Diagnostic] = []

    def err(where: str, message: str) -> None:
        diags.append(Diagnostic("error", where, message))

    def warn(where: str, message: str) -> None:
        diags.append(Diagnostic("warning", where, message))

    if not (math.isfinite(model.sample_time) and model.sample_time > 0):
        err("model", f"sample_time must be a positive finite number, got {model.sample_time}")

    seen_ids: set[str] = set()
    for block in model.blocks:
        if block.id in seen_ids:
            err(block.id, "duplicate block id")
        seen_ids.add(block.id)

    known: dict[str, Block] = {}
    for block in model.blocks_sorted():
        if block.id in known:
            continue
        if block.block_type not in PROPERTY_SPECS:
            err(block.id, f"unknown block type {block.block_type!r}")
            continue
        known[block.id] = block
        for spec in PROPERTY_SPECS[block.block_type]:
            pv = block.properties.get(spec.key)
            if pv is None:
                if spec.required:
                    err(block.id, f"missing required property {spec.key!r}")
                continue
            complaint = spec.admits(pv)
            if complaint is not None:
                err(block.id, complaint)
        for key, pv in block.properties.items():
            if find_spec(block.block_type, key) is None and pv.kind == "number":
                if not math.isfinite(pv.value):
                    err(block.id, f"{key} must be finite, got {pv.canonical}")

    # Connection-level checks only make sense against resolvable blocks.
    inputs_seen: dict[tuple[str, int], Connection] = {}
    for conn in model.connections_sorted():
        where = f"{conn.src}:{conn.src_port}->{conn.dst}:{conn.dst_port}"
        src = known.get(conn.src)
        dst = known.get(conn.dst)
        if conn.src not in seen_ids:
            err(where, f"connection references unknown source block {conn.src!r}")
        if conn.dst not in seen_ids:
            err(where, f"connection references unknown destination block {conn.dst!r}")
        if src is not None:
            n_out = port_counts(src)[1]
            if n_out == 0:
                err(where, f"{src.block_type} block cannot be a signal source")
            elif not (0 <= conn.src_port < n_out):
                err(where, f"source port {conn.src_port} out of range for {src.block_type}")
        if dst is not None:
            n_in = port_counts(dst)[0]
            if n_in == 0:
                err(where, f"{dst.block_type} block has no input ports")
            elif n_in > 0 and not (0 <= conn.dst_port < n_in):
                err(where, f"destination port {conn.dst_port} out of range for {dst.block_type}")
            elif conn.dst_port < 0:
                err(where, f"destination port {conn.dst_port} out of range for {dst.block_type}")
        key = (conn.dst, conn.dst_port)
        if key in inputs_seen:
            err(where, f"input port {conn.dst}:{conn.dst_port} is driven twice")
        inputs_seen[key] = conn

    for block in known.values():
        n_in = port_counts(block)[0]
        if n_in <= 0:
            continue
        for port in range(n_in):
            if (block.id, port) not in inputs_seen:
                err(block.id, f"input port {port} is not connected")

    # Routing tags: a reader without a writer, or two writers on one
    # tag, both pass validation and fault at runtime instead.
    goto_tags: dict[str, list[str]] = {}
    for block in known.values():
        if block.block_type == GOTO:
            goto_tags.setdefault(block.get_text("GotoTag", ""), []).append(block.id)
    for tag, ids in sorted(goto_tags.items()):
        if len(ids) > 1:
            warn(ids[0], f"tag {tag!r} has {len(ids)} writers; reading it faults at runtime")
    for block in known.values():
        if block.block_type == FROM:
            tag = block.get_text("GotoTag", "")
            if tag not in goto_tags:
                warn(block.id, f"tag {tag!r} has no writer; reading it faults at runtime")

    # Algebraic loops: every cycle must pass through a delay block's
    # input.  Tag routing counts as a wire, so writer feeds reader.
    edges: list[tuple[str, str]] = []
    for conn in model.connections:
        if conn.src in known and conn.dst in known:
            if known[conn.dst].block_type not in DELAY_TYPES:
                edges.append((conn.src, conn.dst))
    for tag, ids in goto_tags.items():
        for block in known.values():
            if block.block_type == FROM and block.get_text("GotoTag", "") == tag:
                for writer in ids:
                    edges.append((writer, block.id))
    loop = _cycle_members(set(known), edges)
    if loop:
        err(loop[0], "algebraic loop through blocks: " + ", ".join(loop))

    return ValidityReport(tuple(diags))


def apply_delta(model: ModelIR, site, new_token: str) -> ModelIR:
    """New model with one value replaced; the original is untouched.

    ``site`` is anything with block_id and property_key attributes.
    ``new_token`` is the canonical token form: a numeric literal for
    numeric properties, escaped text otherwise.
    """
    target = None
    for b in model.blocks:
        if b.id == site.block_id:
            target = b
            break
    if target is None:
        raise UnknownSiteError(f"no block with id {site.block_id!r}")

    key = site.property_key
    if key == NAME_KEY:
        replacement_block = Block(
            id=target.id,
            name=unescape_text(new_token),
            block_type=target.block_type,
            properties=dict(target.properties),
        )
    else:
        old = target.properties.get(key)
        if old is None:
            raise UnknownSiteError(f"block {target.id} has no property {key!r}")
        if old.kind == "number":
            try:
                new_value = PropertyValue("number", float(new_token))
            except ValueError:
                # Non-numeric prediction on a numeric slot: keep it as
                # text so validation rejects the mutant downstream.
                new_value = PropertyValue("text", unescape_text(new_token))
        else:
            new_value = PropertyValue(old.kind, unescape_text(new_token))
        props = dict(target.properties)
        props[key] = new_value
        replacement_block = Block(
            id=target.id, name=target.name, block_type=target.block_type, properties=props
        )

    new_blocks = [replacement_block if b.id == target.id else b for b in model.blocks]
    return ModelIR(
        name=model.name,
        blocks=new_blocks,
        connections=list(model.connections),
        sample_time=model.sample_time,
    )
