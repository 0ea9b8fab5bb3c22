"""Mutant generation, compile filtering, and pattern classification.

Two generators feed the same pipeline: the mask-and-predict path and
a rule-based operator catalog.  Every candidate delta is materialized
and kept only if the result passes the compile check (static
validation plus a short smoke run).  Candidates equal to the original
value, and exact duplicates of an earlier candidate, never become
mutants.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import ir
from .errors import PredictorUnavailable, SchemaError
from .masking import DEFAULT_CONTEXT_WINDOW, MASK_TOKEN, MaskSite, enumerate_sites, mask
from .sim import ConstantSignal, TestCase, simulate

PATTERN_DATA_TYPES = "Mutate signal data types"
PATTERN_GOTO_FROM = "Mutate GoTo/From blocks"
PATTERN_OVERFLOW = 'Mutate "Saturate on integer overflow"'
PATTERN_CONST_GAIN = "Mutate constant and gain values"
PATTERN_OPERATORS = "Mutate math, relational and logical operator blocks"
PATTERN_INIT_SAMPLE = "Mutate initial conditions and sample time"
PATTERN_SF_CONDITIONS = "Mutate Stateflow transition conditions"
PATTERN_SF_VARIABLES = "Mutate Stateflow variable names"
PATTERN_SF_ACTIONS = "Mutate Stateflow actions"
PATTERN_SF_KEYWORDS = "Mutate Stateflow keywords"
UNCLASSIFIED = "Unclassified"

ALL_PATTERNS = (
    PATTERN_DATA_TYPES,
    PATTERN_GOTO_FROM,
    PATTERN_OVERFLOW,
    PATTERN_CONST_GAIN,
    PATTERN_OPERATORS,
    PATTERN_INIT_SAMPLE,
    PATTERN_SF_CONDITIONS,
    PATTERN_SF_VARIABLES,
    PATTERN_SF_ACTIONS,
    PATTERN_SF_KEYWORDS,
)

_TEMPORAL_KEYWORDS = ("after", "before", "at")
_CONST_LIKE_KEYS = ("Value", "Gain", "Threshold", "UpperLimit", "LowerLimit")
_SMOKE_STEPS = 10


@dataclass(frozen=True)
class Provenance:
    kind: str  # "mlm" | "operator"
    rank: int | None = None
    score: float | None = None
    operator: str | None = None

    def to_json_dict(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.kind == "mlm":
            doc["rank"] = self.rank
            doc["score"] = self.score
        else:
            doc["operator"] = self.operator
        return doc


@dataclass(frozen=True)
class Mutant:
    id: str
    base_model: str
    site: MaskSite
    replacement: ir.PropertyValue
    provenance: Provenance
    pattern: str

    def materialize(self, base: ir.ModelIR) -> ir.ModelIR:
        return ir.apply_delta(base, self.site, self.replacement.canonical)


@dataclass
class MutantSet:
    base_model: str
    mutants: list[Mutant] = field(default_factory=list)
    stats: dict[str, int] = field(
        default_factory=lambda: {
            "generated": 0,
            "discarded_identical": 0,
            "discarded_uncompilable": 0,
        }
    )

    @property
    def compilable_fraction(self) -> float | None:
        denom = self.stats["generated"] - self.stats["discarded_identical"]
        return len(self.mutants) / denom if denom else None

    def pattern_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for m in self.mutants:
            counts[m.pattern] = counts.get(m.pattern, 0) + 1
        return dict(sorted(counts.items()))


def _tokenize_expr(text: str) -> list[str]:
    return re.findall(r"\w+|<=|>=|==|~=|[^\w\s]", text)


def _classify_stateflow(key: str, original: str, replacement: str) -> str:
    a = _tokenize_expr(original)
    b = _tokenize_expr(replacement)
    if len(a) == len(b):
        diffs = [(x, y) for x, y in zip(a, b) if x != y]
        if diffs and all(x in _TEMPORAL_KEYWORDS and y in _TEMPORAL_KEYWORDS for x, y in diffs):
            return PATTERN_SF_KEYWORDS
        ident = re.compile(r"[A-Za-z_]\w*")
        if (
            diffs
            and len(set(diffs)) == 1
            and all(
                ident.fullmatch(x) and ident.fullmatch(y) and x not in _TEMPORAL_KEYWORDS
                and y not in _TEMPORAL_KEYWORDS
                for x, y in diffs
            )
        ):
            return PATTERN_SF_VARIABLES
    if "Action" in key:
        return PATTERN_SF_ACTIONS
    return PATTERN_SF_CONDITIONS


def classify_delta(
    block_type: str, key: str, original: ir.PropertyValue, replacement: ir.PropertyValue
) -> str:
    """Map one property delta to its mutation-pattern label."""
    if key == ir.NAME_KEY:
        return PATTERN_GOTO_FROM if block_type in (ir.GOTO, ir.FROM) else UNCLASSIFIED
    if key == "OutDataTypeStr":
        return PATTERN_DATA_TYPES
    if key == "SaturateOnIntegerOverflow":
        return PATTERN_OVERFLOW
    if key in ("InitialCondition", "SampleTime"):
        return PATTERN_INIT_SAMPLE
    if key == "GotoTag":
        return PATTERN_GOTO_FROM
    if block_type == ir.STATEFLOW:
        return _classify_stateflow(key, str(original.value), str(replacement.value))
    if key in _CONST_LIKE_KEYS:
        return PATTERN_CONST_GAIN
    if key in ("Operator", "Signs"):
        return PATTERN_OPERATORS
    return UNCLASSIFIED


def classify(mutant: Mutant) -> str:
    return classify_delta(
        mutant.site.block_type, mutant.site.property_key, mutant.site.original, mutant.replacement
    )


def smoke_test(model: ir.ModelIR, steps: int = _SMOKE_STEPS) -> bool:
    """Dynamic half of the compile check: a short all-ones run."""
    inports = [b.id for b in model.blocks if b.block_type == ir.INPORT]
    test = TestCase(id="smoke", duration_steps=steps, inputs={i: ConstantSignal(1.0) for i in inports})
    try:
        trace = simulate(model, test)
    except Exception:
        return False
    return not trace.aborted


def compile_check(model: ir.ModelIR) -> bool:
    return ir.validate(model).ok and smoke_test(model)


def _replacement_value(original: ir.PropertyValue, token: str) -> ir.PropertyValue:
    if original.kind == "number":
        try:
            return ir.PropertyValue("number", float(token))
        except ValueError:
            return ir.PropertyValue("text", ir.unescape_text(token))
    return ir.PropertyValue(original.kind, ir.unescape_text(token))


class _Collector:
    """Shared candidate pipeline: dedupe, identity filter, compile filter."""

    def __init__(self, model: ir.ModelIR):
        self.model = model
        self.set = MutantSet(base_model=model.name)
        self._seen: set[tuple[str, str, str]] = set()
        self._pending: list[tuple[MaskSite, ir.PropertyValue, Provenance]] = []

    def offer(self, site: MaskSite, replacement: ir.PropertyValue, prov: Provenance) -> None:
        key = (site.block_id, site.property_key, replacement.canonical)
        if key in self._seen:
            return
        self._seen.add(key)
        self.set.stats["generated"] += 1
        if replacement.canonical == site.original.canonical:
            self.set.stats["discarded_identical"] += 1
            return
        mutated = ir.apply_delta(self.model, site, replacement.canonical)
        if not compile_check(mutated):
            self.set.stats["discarded_uncompilable"] += 1
            return
        self._pending.append((site, replacement, prov))

    def finish(self, id_tag: str) -> MutantSet:
        for i, (site, replacement, prov) in enumerate(self._pending):
            self.set.mutants.append(
                Mutant(
                    id=f"{self.model.name}-{id_tag}-{i:04d}",
                    base_model=self.model.name,
                    site=site,
                    replacement=replacement,
                    provenance=prov,
                    pattern=classify_delta(site.block_type, site.property_key, site.original, replacement),
                )
            )
        return self.set


def generate_mlm(
    model: ir.ModelIR,
    predictor,
    k: int = 3,
    context_window: int = DEFAULT_CONTEXT_WINDOW,
    include_names: bool = False,
) -> MutantSet:
    """Mask every site, predict, and keep the top k non-identical deltas.

    Asks for k+1 predictions per site since at most one can match the
    original.  A predictor outage mid-run surfaces as
    PredictorUnavailable carrying the mutants gathered so far.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    collector = _Collector(model)
    mask_token = getattr(predictor, "mask_token", MASK_TOKEN)
    for site in enumerate_sites(model, include_names=include_names):
        seq = mask(model, site, context_window=context_window, mask_token=mask_token)
        try:
            preds = predictor.predict(seq, top_k=k + 1)
        except PredictorUnavailable as exc:
            raise PredictorUnavailable(str(exc), partial=collector.finish("mlm")) from exc
        taken = 0
        for rank, pred in enumerate(preds, start=1):
            if taken >= k:
                break
            replacement = _replacement_value(site.original, pred.token)
            identical = replacement.canonical == site.original.canonical
            collector.offer(site, replacement, Provenance(kind="mlm", rank=rank, score=pred.score))
            if not identical:
                taken += 1
    return collector.finish("mlm")


def _sum_sign_variants(signs: str) -> list[str]:
    flips = [{"+": "-", "-": "+"}[c] for c in signs]
    if len(signs) <= 5:
        out = []
        for mask_bits in range(1, 1 << len(signs)):
            variant = "".join(
                flips[i] if mask_bits & (1 << i) else signs[i] for i in range(len(signs))
            )
            out.append(variant)
        return out
    return ["".join(flips[i] if i == p else signs[i] for i in range(len(signs))) for p in range(len(signs))]


def _expr_substitutions(text: str) -> list[tuple[str, str]]:
    """(operator name, mutated text) per single-token substitution."""
    out: list[tuple[str, str]] = []
    for m in re.finditer(r"\b(before|after|at)\b", text):
        for alt in _TEMPORAL_KEYWORDS:
            if alt != m.group(1):
                out.append(("stateflow-keyword", text[: m.start()] + alt + text[m.end() :]))
    for m in re.finditer(r"<=|>=|==|~=|<|>", text):
        for alt in ir.RELATIONAL_OPS:
            if alt != m.group(0):
                out.append(("stateflow-relop", text[: m.start()] + alt + text[m.end() :]))
    return out


def generate_operators(model: ir.ModelIR) -> MutantSet:
    """Rule-catalog baseline over every applicable block property."""
    collector = _Collector(model)
    sites = {(s.block_id, s.property_key): s for s in enumerate_sites(model)}

    def offer(block_id: str, key: str, value: ir.PropertyValue, op_name: str) -> None:
        site = sites.get((block_id, key))
        if site is not None:
            collector.offer(site, value, Provenance(kind="operator", operator=op_name))

    all_tags = sorted(
        {
            b.get_text("GotoTag", "")
            for b in model.blocks
            if b.block_type in (ir.GOTO, ir.FROM) and b.get_text("GotoTag", "")
        }
    )

    for block in model.blocks_sorted():
        props = block.properties
        if block.block_type == ir.RELATIONAL and "Operator" in props:
            for alt in ir.RELATIONAL_OPS:
                offer(block.id, "Operator", ir.PropertyValue("enum", alt), "relational-operator")
        if block.block_type == ir.LOGICAL and "Operator" in props:
            for alt in ir.LOGICAL_OPS:
                offer(block.id, "Operator", ir.PropertyValue("enum", alt), "logical-operator")
        if block.block_type == ir.SUM and "Signs" in props and props["Signs"].kind != "number":
            for variant in _sum_sign_variants(str(props["Signs"].value)):
                offer(block.id, "Signs", ir.PropertyValue("text", variant), "sum-signs")
        for key in _CONST_LIKE_KEYS:
            pv = props.get(key)
            if pv is not None and pv.kind == "number":
                v = pv.value
                for name, cand in (
                    ("constant-negate", -v),
                    ("constant-plus-one", v + 1.0),
                    ("constant-minus-one", v - 1.0),
                    ("constant-times-ten", v * 10.0),
                ):
                    offer(block.id, key, ir.PropertyValue("number", cand), name)
        for key in ("InitialCondition", "SampleTime"):
            pv = props.get(key)
            if pv is not None and pv.kind == "number":
                for cand in (0.0, 1.0, pv.value * 2.0):
                    offer(block.id, key, ir.PropertyValue("number", cand), "init-or-rate")
        if "SaturateOnIntegerOverflow" in props:
            current = str(props["SaturateOnIntegerOverflow"].value)
            flipped = "off" if current == "on" else "on"
            offer(block.id, "SaturateOnIntegerOverflow", ir.PropertyValue("enum", flipped), "overflow-toggle")
        if "OutDataTypeStr" in props:
            for alt in ir.DATA_TYPES:
                offer(block.id, "OutDataTypeStr", ir.PropertyValue("enum", alt), "data-type")
        if block.block_type in (ir.GOTO, ir.FROM) and "GotoTag" in props:
            for tag in all_tags:
                offer(block.id, "GotoTag", ir.PropertyValue("text", tag), "tag-retarget")
        if block.block_type == ir.STATEFLOW:
            for key, pv in ir.ordered_properties(block):
                if pv.kind == "number":
                    continue
                for op_name, mutated in _expr_substitutions(str(pv.value)):
                    offer(block.id, key, ir.PropertyValue(pv.kind, mutated), op_name)

    return collector.finish("op")


def mutant_set_to_json_dict(ms: MutantSet) -> dict:
    return {
        "base_model": ms.base_model,
        "stats": dict(ms.stats),
        "pattern_counts": ms.pattern_counts(),
        "mutants": [
            {
                "id": m.id,
                "block_id": m.site.block_id,
                "block_type": m.site.block_type,
                "property_key": m.site.property_key,
                "original": m.site.original.canonical,
                "replacement": m.replacement.canonical,
                "provenance": m.provenance.to_json_dict(),
                "pattern": m.pattern,
            }
            for m in ms.mutants
        ],
    }


def write_mutant_set(ms: MutantSet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(mutant_set_to_json_dict(ms), indent=2) + "\n", encoding="utf-8")


def read_mutant_set(path: str | Path, model: ir.ModelIR) -> MutantSet:
    """Rebind a stored mutant report against its base model."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("base_model") != model.name:
        raise SchemaError(
            f"mutant report is for {doc.get('base_model')!r}, not {model.name!r}"
        )
    sites = {(s.block_id, s.property_key): s for s in enumerate_sites(model, include_names=True)}
    stored = doc.get("stats", {})
    ms = MutantSet(base_model=model.name)
    ms.stats = {key: int(stored.get(key, 0)) for key in ms.stats}
    for rec in doc["mutants"]:
        key = (rec["block_id"], rec["property_key"])
        site = sites.get(key)
        if site is None:
            raise SchemaError(f"mutant {rec['id']}: no site at {key!r} in model {model.name!r}")
        if site.original.canonical != rec["original"]:
            raise SchemaError(
                f"mutant {rec['id']}: model value {site.original.canonical!r} "
                f"does not match recorded original {rec['original']!r}"
            )
        prov_doc = rec.get("provenance", {})
        prov = Provenance(
            kind=prov_doc.get("kind", "operator"),
            rank=prov_doc.get("rank"),
            score=prov_doc.get("score"),
            operator=prov_doc.get("operator"),
        )
        replacement = _replacement_value(site.original, rec["replacement"])
        ms.mutants.append(
            Mutant(
                id=rec["id"],
                base_model=ms.base_model,
                site=site,
                replacement=replacement,
                provenance=prov,
                pattern=rec.get("pattern")
                or classify_delta(site.block_type, site.property_key, site.original, replacement),
            )
        )
    return ms


def write_mutant_models(ms: MutantSet, base: ir.ModelIR, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for m in ms.mutants:
        path = directory / f"{m.id}.json"
        path.write_text(ir.dump_json(m.materialize(base)), encoding="utf-8")
        paths.append(path)
    return paths
