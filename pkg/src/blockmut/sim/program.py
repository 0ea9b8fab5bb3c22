"""Fixed-step synchronous interpreter for the supported block set.

A model compiles to a flat opcode program over signal slots: input
loads, state emits for delay-class blocks, then the combinational
blocks in topological order.  Per step the ops run in order, outputs
are recorded, and delay states update last, so every cycle must pass
through a delay input.  Goto/From routing is resolved away at compile
time into plain slot aliases.

Two interchangeable kernels execute the program: a compiled extension
and a pure-Python fallback.  Both operate on IEEE doubles with the
same operation order, so their traces are bit-identical.
"""

from __future__ import annotations

import heapq
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from struct import pack, unpack

import numpy as np

from .. import ir
from ..errors import InvalidModelError, UnknownSignalError

OP_INPORT = 0
OP_STATE = 1
OP_CONST = 2
OP_GAIN = 3
OP_SUM = 4
OP_PRODUCT = 5
OP_RELOP = 6
OP_LOGOP = 7
OP_SWITCH = 8
OP_SAT = 9

CAST_NONE = 0
CAST_SINGLE = 1
CAST_INT32 = 2

STATE_UNIT_DELAY = 1
STATE_INTEGRATOR = 2

FAULT_NON_FINITE = "NonFinite"
FAULT_UNRESOLVED_FROM = "UnresolvedFrom"
FAULT_MULTIPLE_GOTO = "MultipleGotoForTag"

_COMPUTE_TYPES = (
    ir.CONSTANT,
    ir.GAIN,
    ir.SUM,
    ir.PRODUCT,
    ir.RELATIONAL,
    ir.LOGICAL,
    ir.SWITCH,
    ir.SATURATION,
)


def _load_default_kernel():
    if not os.environ.get("BLOCKMUT_PURE_PY"):
        try:
            from . import _kernel

            return _kernel, "compiled"
        except ImportError:
            pass
    from . import _kernel_py

    return _kernel_py, "python"


_DEFAULT_KERNEL, KERNEL_KIND = _load_default_kernel()


def single_round_trip(x: float) -> float:
    """Value of x after passing through IEEE single precision."""
    try:
        return unpack("<f", pack("<f", x))[0]
    except OverflowError:
        return math.inf if x > 0 else -math.inf


@dataclass(frozen=True)
class RuntimeFault:
    step: int
    block: str
    kind: str


@dataclass(frozen=True)
class ConstantSignal:
    v: float

    def value(self, t: int, sample_time: float) -> float:
        return self.v


@dataclass(frozen=True)
class StepSignal:
    t0: float
    v0: float
    v1: float

    def value(self, t: int, sample_time: float) -> float:
        return self.v0 if t < self.t0 else self.v1


@dataclass(frozen=True)
class RampSignal:
    slope: float

    def value(self, t: int, sample_time: float) -> float:
        return self.slope * (t * sample_time)


@dataclass(frozen=True)
class PiecewiseConstantSignal:
    breakpoints: tuple[tuple[float, float], ...]

    def value(self, t: int, sample_time: float) -> float:
        current = self.breakpoints[0][1]
        for bt, bv in self.breakpoints:
            if bt <= t:
                current = bv
            else:
                break
        return current


_SIGNAL_KINDS = {
    "Constant": (ConstantSignal, ("v",)),
    "Step": (StepSignal, ("t0", "v0", "v1")),
    "Ramp": (RampSignal, ("slope",)),
    "PiecewiseConstant": (PiecewiseConstantSignal, ("breakpoints",)),
}


def gen_to_json(gen) -> dict:
    for kind, (cls, fields) in _SIGNAL_KINDS.items():
        if isinstance(gen, cls):
            doc = {"kind": kind}
            for f in fields:
                v = getattr(gen, f)
                doc[f] = [list(p) for p in v] if f == "breakpoints" else v
            return doc
    raise ValueError(f"unknown signal generator: {gen!r}")


def gen_from_json(doc: dict):
    kind = doc.get("kind")
    if kind not in _SIGNAL_KINDS:
        raise ValueError(f"unknown signal generator kind: {kind!r}")
    cls, fields = _SIGNAL_KINDS[kind]
    args = {}
    for f in fields:
        v = doc[f]
        args[f] = tuple((float(a), float(b)) for a, b in v) if f == "breakpoints" else float(v)
    return cls(**args)


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # keep pytest from collecting this as a test class

    id: str
    duration_steps: int
    inputs: dict[str, object] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "duration_steps": self.duration_steps,
            "inputs": {k: gen_to_json(v) for k, v in sorted(self.inputs.items())},
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TestCase":
        return cls(
            id=str(doc["id"]),
            duration_steps=int(doc["duration_steps"]),
            inputs={k: gen_from_json(v) for k, v in doc["inputs"].items()},
        )


def save_suite(tests: list[TestCase], path: str | Path) -> None:
    doc = {"tests": [t.to_json_dict() for t in tests]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_suite(path: str | Path) -> list[TestCase]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [TestCase.from_json_dict(t) for t in doc["tests"]]


@dataclass(frozen=True)
class SignalTrace:
    """Recorded block outputs, one array per recorded id.

    length is the number of completed steps; on a fault the arrays
    stop just before the faulting step.
    """

    signals: dict[str, np.ndarray]
    output_ids: tuple[str, ...]
    duration_steps: int
    length: int
    fault: RuntimeFault | None = None

    @property
    def aborted(self) -> bool:
        return self.fault is not None


@dataclass
class Program:
    opcode: np.ndarray
    out_slot: np.ndarray
    in0: np.ndarray
    in1: np.ndarray
    in2: np.ndarray
    f0: np.ndarray
    f1: np.ndarray
    iarg: np.ndarray
    vlen: np.ndarray
    cast: np.ndarray
    satflag: np.ndarray
    vec_src: np.ndarray
    vec_coef: np.ndarray
    st_kind: np.ndarray
    st_src: np.ndarray
    st_ts: np.ndarray
    st_init: np.ndarray
    n_slots: int
    op_block: tuple[str, ...]
    inport_ids: tuple[str, ...]
    record_ids: tuple[str, ...]
    record_slots: np.ndarray
    output_ids: tuple[str, ...]
    sample_time: float
    static_fault: RuntimeFault | None = None


def _int_array(values) -> np.ndarray:
    return np.asarray(list(values), dtype=np.int32).reshape(-1)


def _float_array(values) -> np.ndarray:
    return np.asarray(list(values), dtype=np.float64).reshape(-1)


def _cast_code(block: ir.Block) -> int:
    dtype = block.get_text("OutDataTypeStr", "double")
    if dtype == "single":
        return CAST_SINGLE
    if dtype == "int32":
        return CAST_INT32
    return CAST_NONE


def compile_program(model: ir.ModelIR, extra_records: tuple[str, ...] = ()) -> Program:
    """Lower a validated model to the flat opcode form."""
    bm = model.block_map()
    conn_src: dict[tuple[str, int], str] = {}
    for c in model.connections_sorted():
        conn_src[(c.dst, c.dst_port)] = c.src

    goto_writers: dict[str, list[str]] = {}
    for b in model.blocks_sorted():
        if b.block_type == ir.GOTO:
            goto_writers.setdefault(b.get_text("GotoTag", ""), []).append(b.id)

    def empty_with_fault(fault: RuntimeFault) -> Program:
        outports = tuple(sorted(b.id for b in model.blocks if b.block_type == ir.OUTPORT))
        recorded = list(outports)
        for rid in sorted(extra_records):
            if rid not in recorded:
                recorded.append(rid)
        return Program(
            opcode=_int_array([]), out_slot=_int_array([]), in0=_int_array([]),
            in1=_int_array([]), in2=_int_array([]), f0=_float_array([]), f1=_float_array([]),
            iarg=_int_array([]), vlen=_int_array([]), cast=_int_array([]), satflag=_int_array([]),
            vec_src=_int_array([]), vec_coef=_float_array([]), st_kind=_int_array([]),
            st_src=_int_array([]), st_ts=_float_array([]), st_init=_float_array([]),
            n_slots=0, op_block=(),
            inport_ids=tuple(sorted(b.id for b in model.blocks if b.block_type == ir.INPORT)),
            record_ids=tuple(recorded), record_slots=_int_array([]), output_ids=outports,
            sample_time=model.sample_time, static_fault=fault,
        )

    # Routing errors become step-0 faults rather than exceptions: a
    # mutant that retargets a tag must count as a crashing run.
    for b in model.blocks_sorted():
        if b.block_type == ir.FROM:
            writers = goto_writers.get(b.get_text("GotoTag", ""), [])
            if len(writers) == 0:
                return empty_with_fault(RuntimeFault(0, b.id, FAULT_UNRESOLVED_FROM))
            if len(writers) > 1:
                return empty_with_fault(RuntimeFault(0, b.id, FAULT_MULTIPLE_GOTO))

    def resolve_source(src_id: str) -> str:
        seen = set()
        while bm[src_id].block_type == ir.FROM:
            if src_id in seen:
                raise InvalidModelError(f"tag routing cycle at {src_id}")
            seen.add(src_id)
            tag = bm[src_id].get_text("GotoTag", "")
            writer = goto_writers[tag][0]
            try:
                src_id = conn_src[(writer, 0)]
            except KeyError:
                raise InvalidModelError(f"tag writer {writer} has no input") from None
        return src_id

    slot_of: dict[str, int] = {}
    for b in model.blocks_sorted():
        if b.block_type in (ir.GOTO, ir.FROM, ir.OUTPORT, ir.STATEFLOW):
            continue
        slot_of[b.id] = len(slot_of)

    def input_slot(block_id: str, port: int) -> int:
        try:
            src = conn_src[(block_id, port)]
        except KeyError:
            raise InvalidModelError(f"input port {block_id}:{port} is not connected") from None
        return slot_of[resolve_source(src)]

    inports = sorted(b.id for b in model.blocks if b.block_type == ir.INPORT)
    delays = [b for b in model.blocks_sorted() if b.block_type in ir.DELAY_TYPES]
    compute = [b for b in model.blocks_sorted() if b.block_type in _COMPUTE_TYPES]

    # Topological order over combinational blocks only; input loads
    # and state emits precede them and carry no dependencies.
    producer: dict[int, str] = {}
    compute_ids = {b.id for b in compute}
    block_inputs: dict[str, list[int]] = {}
    for b in compute:
        n_in = ir.port_counts(b)[0]
        block_inputs[b.id] = [input_slot(b.id, p) for p in range(n_in)]
        producer[slot_of[b.id]] = b.id
    deps: dict[str, int] = {b.id: 0 for b in compute}
    fanout: dict[str, list[str]] = {b.id: [] for b in compute}
    for b in compute:
        for s in block_inputs[b.id]:
            owner = producer.get(s)
            if owner is not None:
                deps[b.id] += 1
                fanout[owner].append(b.id)
    ready = [bid for bid, d in sorted(deps.items()) if d == 0]
    heapq.heapify(ready)
    topo: list[str] = []
    while ready:
        bid = heapq.heappop(ready)
        topo.append(bid)
        for nxt in fanout[bid]:
            deps[nxt] -= 1
            if deps[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(topo) != len(compute):
        stuck = sorted(bid for bid, d in deps.items() if d > 0)
        raise InvalidModelError("algebraic loop through blocks: " + ", ".join(stuck))

    ops: list[dict] = []
    op_block: list[str] = []
    vec_src: list[int] = []
    vec_coef: list[float] = []

    def add_op(block: ir.Block, **kw) -> None:
        base = dict(
            opcode=0, out=slot_of[block.id], in0=-1, in1=-1, in2=-1,
            f0=0.0, f1=0.0, iarg=0, vlen=0,
            cast=_cast_code(block),
            satflag=1 if block.get_text("SaturateOnIntegerOverflow", "off") == "on" else 0,
        )
        base.update(kw)
        ops.append(base)
        op_block.append(block.id)

    for col, bid in enumerate(inports):
        add_op(bm[bid], opcode=OP_INPORT, iarg=col)
    for s_idx, b in enumerate(delays):
        add_op(b, opcode=OP_STATE, iarg=s_idx)
    for bid in topo:
        b = bm[bid]
        ins = block_inputs[bid]
        t = b.block_type
        if t == ir.CONSTANT:
            add_op(b, opcode=OP_CONST, f0=b.get_number("Value"))
        elif t == ir.GAIN:
            add_op(b, opcode=OP_GAIN, in0=ins[0], f0=b.get_number("Gain"))
        elif t == ir.SUM:
            signs = [c for c in b.get_text("Signs", "++") if c in "+-"]
            off = len(vec_src)
            vec_src.extend(ins)
            vec_coef.extend(1.0 if c == "+" else -1.0 for c in signs)
            add_op(b, opcode=OP_SUM, iarg=off, vlen=len(ins))
        elif t == ir.PRODUCT:
            add_op(b, opcode=OP_PRODUCT, in0=ins[0], in1=ins[1])
        elif t == ir.RELATIONAL:
            code = ir.RELATIONAL_OPS.index(b.get_text("Operator"))
            add_op(b, opcode=OP_RELOP, in0=ins[0], in1=ins[1], iarg=code)
        elif t == ir.LOGICAL:
            op = b.get_text("Operator")
            code = ir.LOGICAL_OPS.index(op)
            in1 = -1 if op == "NOT" else ins[1]
            add_op(b, opcode=OP_LOGOP, in0=ins[0], in1=in1, iarg=code)
        elif t == ir.SWITCH:
            add_op(b, opcode=OP_SWITCH, in0=ins[0], in1=ins[1], in2=ins[2], f0=b.get_number("Threshold"))
        else:
            add_op(b, opcode=OP_SAT, in0=ins[0], f0=b.get_number("LowerLimit"), f1=b.get_number("UpperLimit"))

    st_kind, st_src, st_ts, st_init = [], [], [], []
    for b in delays:
        st_kind.append(STATE_UNIT_DELAY if b.block_type == ir.UNIT_DELAY else STATE_INTEGRATOR)
        st_src.append(input_slot(b.id, 0))
        st_ts.append(b.get_number("SampleTime", model.sample_time))
        st_init.append(b.get_number("InitialCondition"))

    outports = sorted(b.id for b in model.blocks if b.block_type == ir.OUTPORT)
    record_ids: list[str] = list(outports)
    for rid in sorted(extra_records):
        if rid not in record_ids:
            record_ids.append(rid)
    record_slots = []
    for rid in record_ids:
        if rid not in bm:
            raise UnknownSignalError(f"no block with id {rid!r} to record")
        b = bm[rid]
        if b.block_type in (ir.OUTPORT, ir.GOTO):
            record_slots.append(input_slot(rid, 0))
        elif b.block_type == ir.FROM:
            record_slots.append(slot_of[resolve_source(rid)])
        elif rid in slot_of:
            record_slots.append(slot_of[rid])
        else:
            raise UnknownSignalError(f"block {rid!r} has no recordable output")

    return Program(
        opcode=_int_array(o["opcode"] for o in ops),
        out_slot=_int_array(o["out"] for o in ops),
        in0=_int_array(o["in0"] for o in ops),
        in1=_int_array(o["in1"] for o in ops),
        in2=_int_array(o["in2"] for o in ops),
        f0=_float_array(o["f0"] for o in ops),
        f1=_float_array(o["f1"] for o in ops),
        iarg=_int_array(o["iarg"] for o in ops),
        vlen=_int_array(o["vlen"] for o in ops),
        cast=_int_array(o["cast"] for o in ops),
        satflag=_int_array(o["satflag"] for o in ops),
        vec_src=_int_array(vec_src),
        vec_coef=_float_array(vec_coef),
        st_kind=_int_array(st_kind),
        st_src=_int_array(st_src),
        st_ts=_float_array(st_ts),
        st_init=_float_array(st_init),
        n_slots=len(slot_of),
        op_block=tuple(op_block),
        inport_ids=tuple(inports),
        record_ids=tuple(record_ids),
        record_slots=_int_array(record_slots),
        output_ids=tuple(outports),
        sample_time=model.sample_time,
        static_fault=None,
    )


def simulate_program(prog: Program, test: TestCase, kernel=None) -> SignalTrace:
    kernel = kernel or _DEFAULT_KERNEL
    steps = test.duration_steps
    if steps < 1:
        raise ValueError(f"duration_steps must be positive, got {steps}")

    if prog.static_fault is not None:
        return SignalTrace(
            signals={rid: np.empty(0) for rid in prog.record_ids},
            output_ids=prog.output_ids,
            duration_steps=steps,
            length=0,
            fault=prog.static_fault,
        )

    for bid in prog.inport_ids:
        if bid not in test.inputs:
            raise InvalidModelError(f"test {test.id!r} does not drive Inport {bid!r}")
    inputs = np.empty((steps, len(prog.inport_ids)), dtype=np.float64)
    for col, bid in enumerate(prog.inport_ids):
        gen = test.inputs[bid]
        for t in range(steps):
            inputs[t, col] = gen.value(t, prog.sample_time)

    out = np.zeros((steps, len(prog.record_ids)), dtype=np.float64)
    st_state = prog.st_init.copy()
    slots = np.zeros(prog.n_slots, dtype=np.float64)
    completed, fault_op = kernel.run(
        prog.opcode, prog.out_slot, prog.in0, prog.in1, prog.in2,
        prog.f0, prog.f1, prog.iarg, prog.vlen, prog.cast, prog.satflag,
        prog.vec_src, prog.vec_coef,
        prog.st_kind, prog.st_src, prog.st_ts, st_state,
        inputs, prog.record_slots, out, prog.n_slots,
    )
    fault = None
    if fault_op >= 0:
        fault = RuntimeFault(step=completed, block=prog.op_block[fault_op], kind=FAULT_NON_FINITE)
    length = completed
    signals = {rid: out[:length, i].copy() for i, rid in enumerate(prog.record_ids)}
    return SignalTrace(
        signals=signals,
        output_ids=prog.output_ids,
        duration_steps=steps,
        length=length,
        fault=fault,
    )


def simulate(model: ir.ModelIR, test: TestCase, record: tuple[str, ...] = (), kernel=None) -> SignalTrace:
    return simulate_program(compile_program(model, tuple(record)), test, kernel=kernel)


def export_trace_csv(trace: SignalTrace, path: str | Path) -> None:
    ids = list(trace.signals)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(ids) + "\n")
        for t in range(trace.length):
            fh.write(",".join(ir.format_number(float(trace.signals[i][t])) for i in ids) + "\n")
