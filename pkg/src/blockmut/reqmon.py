"""Requirement monitors over recorded traces.

Three patterns cover the safety-style requirements the toolchain
needs: Always(pred), Never(pred), and ImpliesWithin(trigger,
response, deadline).  Semantics are bounded to the trace: an
obligation window that runs past a normally-ended trace counts as
satisfied (flagged vacuous), while any open obligation at an abort
counts as violated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError, UnknownSignalError
from .ir import RELATIONAL_OPS
from .sim import SignalTrace

ALWAYS = "Always"
NEVER = "Never"
IMPLIES_WITHIN = "ImpliesWithin"


@dataclass(frozen=True)
class Pred:
    """signal <op> rhs, where rhs is a constant or another signal id."""

    signal: str
    op: str
    rhs: float | str

    def __post_init__(self):
        if self.op not in RELATIONAL_OPS:
            raise SchemaError(f"unknown comparison operator: {self.op!r}")
        if not isinstance(self.rhs, str):
            object.__setattr__(self, "rhs", float(self.rhs))

    def to_json_dict(self) -> dict:
        doc: dict = {"signal": self.signal, "op": self.op}
        if isinstance(self.rhs, str):
            doc["other"] = self.rhs
        else:
            doc["value"] = self.rhs
        return doc

    @staticmethod
    def from_json_dict(doc: dict) -> "Pred":
        if "other" in doc:
            return Pred(doc["signal"], doc["op"], str(doc["other"]))
        return Pred(doc["signal"], doc["op"], float(doc["value"]))


@dataclass(frozen=True)
class Requirement:
    id: str
    kind: str
    pred: Pred | None = None            # Always / Never
    trigger: Pred | None = None         # ImpliesWithin
    response: Pred | None = None
    deadline: int | None = None

    def __post_init__(self):
        if self.kind in (ALWAYS, NEVER):
            if self.pred is None:
                raise SchemaError(f"{self.kind} requires a predicate")
        elif self.kind == IMPLIES_WITHIN:
            if self.trigger is None or self.response is None or self.deadline is None:
                raise SchemaError("ImpliesWithin requires trigger, response and deadline")
            if self.deadline < 0:
                raise SchemaError(f"deadline must be >= 0, got {self.deadline}")
        else:
            raise SchemaError(f"unknown requirement pattern: {self.kind!r}")

    def signals(self) -> set[str]:
        out: set[str] = set()
        for p in (self.pred, self.trigger, self.response):
            if p is not None:
                out.add(p.signal)
                if isinstance(p.rhs, str):
                    out.add(p.rhs)
        return out


def always(req_id: str, pred: Pred) -> Requirement:
    return Requirement(id=req_id, kind=ALWAYS, pred=pred)


def never(req_id: str, pred: Pred) -> Requirement:
    return Requirement(id=req_id, kind=NEVER, pred=pred)


def implies_within(req_id: str, trigger: Pred, response: Pred, deadline: int) -> Requirement:
    return Requirement(
        id=req_id, kind=IMPLIES_WITHIN, trigger=trigger, response=response, deadline=deadline
    )


@dataclass(frozen=True)
class Verdict:
    requirement_id: str
    satisfied: bool
    step: int | None = None       # first violation step when not satisfied
    vacuous_tail: bool = False    # satisfied only because a window outlived the trace


def _series(trace: SignalTrace, signal: str) -> np.ndarray:
    try:
        return trace.signals[signal]
    except KeyError:
        raise UnknownSignalError(
            f"requirement references unrecorded signal {signal!r}"
        ) from None


def _eval_pred(pred: Pred, trace: SignalTrace) -> np.ndarray:
    lhs = _series(trace, pred.signal)
    rhs = _series(trace, pred.rhs) if isinstance(pred.rhs, str) else pred.rhs
    if pred.op == "<":
        return lhs < rhs
    if pred.op == "<=":
        return lhs <= rhs
    if pred.op == ">":
        return lhs > rhs
    if pred.op == ">=":
        return lhs >= rhs
    if pred.op == "==":
        return lhs == rhs
    return lhs != rhs  # ~=


def check(req: Requirement, trace: SignalTrace) -> Verdict:
    """Evaluate one requirement over one trace (pure, O(duration))."""
    if req.kind in (ALWAYS, NEVER):
        ok = _eval_pred(req.pred, trace)
        if req.kind == NEVER:
            ok = ~ok
        bad = np.flatnonzero(~ok)
        if bad.size:
            return Verdict(req.id, False, int(bad[0]))
        if trace.aborted:
            return Verdict(req.id, False, trace.fault.step)
        return Verdict(req.id, True)

    trig = _eval_pred(req.trigger, trace)
    resp = _eval_pred(req.response, trace)
    n = trace.length
    open_obligation = False
    for t in np.flatnonzero(trig):
        end = int(t) + req.deadline
        if end < n:
            if not resp[t : end + 1].any():
                return Verdict(req.id, False, end)
        else:
            if not resp[t:n].any():
                # Window extends past the recorded trace; later triggers
                # can only open later windows, so the scan can stop.
                open_obligation = True
                break
    if open_obligation:
        if trace.aborted:
            return Verdict(req.id, False, trace.fault.step)
        return Verdict(req.id, True, vacuous_tail=True)
    return Verdict(req.id, True)


@dataclass
class RequirementSet:
    """Requirements plus the probe table mapping names to block ids."""

    requirements: list[Requirement]
    probes: dict[str, str] = field(default_factory=dict)

    def probe_ids(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.probes.values())))

    def resolved(self) -> list[Requirement]:
        """Requirements with probe names rewritten to block ids."""

        def fix(p: Pred | None) -> Pred | None:
            if p is None:
                return None
            rhs = self.probes.get(p.rhs, p.rhs) if isinstance(p.rhs, str) else p.rhs
            return Pred(self.probes.get(p.signal, p.signal), p.op, rhs)

        return [
            Requirement(
                id=r.id,
                kind=r.kind,
                pred=fix(r.pred),
                trigger=fix(r.trigger),
                response=fix(r.response),
                deadline=r.deadline,
            )
            for r in self.requirements
        ]


def requirement_to_json_dict(req: Requirement) -> dict:
    if req.kind in (ALWAYS, NEVER):
        args: dict = {"pred": req.pred.to_json_dict()}
    else:
        args = {
            "trigger": req.trigger.to_json_dict(),
            "response": req.response.to_json_dict(),
            "deadline": req.deadline,
        }
    return {"id": req.id, "pattern": req.kind, "args": args}


def requirement_from_json_dict(doc: dict) -> Requirement:
    try:
        kind = doc["pattern"]
        args = doc["args"]
        if kind in (ALWAYS, NEVER):
            return Requirement(id=doc["id"], kind=kind, pred=Pred.from_json_dict(args["pred"]))
        if kind == IMPLIES_WITHIN:
            return implies_within(
                doc["id"],
                Pred.from_json_dict(args["trigger"]),
                Pred.from_json_dict(args["response"]),
                int(args["deadline"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed requirement entry: {exc}") from exc
    raise SchemaError(f"unknown requirement pattern: {kind!r}")


def save_requirements(reqset: RequirementSet, path: str | Path) -> None:
    doc = {
        "probes": dict(sorted(reqset.probes.items())),
        "requirements": [requirement_to_json_dict(r) for r in reqset.requirements],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_requirements(path: str | Path) -> RequirementSet:
    """Accepts either the full document or a bare requirement list."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, list):
        return RequirementSet(requirements=[requirement_from_json_dict(d) for d in doc])
    if not isinstance(doc, dict) or "requirements" not in doc:
        raise SchemaError("requirements file must be a list or an object with 'requirements'")
    probes = doc.get("probes", {})
    if not isinstance(probes, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in probes.items()
    ):
        raise SchemaError("'probes' must map names to block ids")
    return RequirementSet(
        requirements=[requirement_from_json_dict(d) for d in doc["requirements"]],
        probes=dict(probes),
    )
