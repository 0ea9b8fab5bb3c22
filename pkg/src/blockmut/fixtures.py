"""Built-in benchmark models and their requirements.

Three small controllers exercise every block type and mutation
pattern the toolchain knows about: a two-tank level controller with
tag-routed thresholds, a saturating integrator chain, and a
relational/logical decision network.  The two chart stubs carry
deliberately parallel expressions so that masked-value prediction on
one model proposes the other's phrasing.
"""

from __future__ import annotations

from pathlib import Path

from . import ir
from .reqmon import Pred, RequirementSet, always, implies_within


def _block(bid: str, btype: str, **props) -> ir.Block:
    return ir.Block(
        id=bid,
        name=bid,
        block_type=btype,
        properties={k: ir.coerce_property(btype, k, v) for k, v in props.items()},
    )


def _wire(*triples) -> list[ir.Connection]:
    out = []
    for src, dst, dst_port in triples:
        out.append(ir.Connection(src=src, src_port=0, dst=dst, dst_port=dst_port))
    return out


def two_tank() -> ir.ModelIR:
    """Tank filler: integrate inflow while below the high threshold.

    The thresholds travel through Goto/From tag pairs, so retargeting
    a single From reroutes a comparison input without touching any
    wire. Two spare broadcast tags (pump handshakes) give tag mutants
    somewhere to land.
    """
    blocks = [
        _block("inflow", ir.INPORT),
        _block("cSL", ir.CONSTANT, Value=2.0),
        _block("cSH", ir.CONSTANT, Value=8.0),
        _block("gSL", ir.GOTO, GotoTag="SL_Input"),
        _block("gSH", ir.GOTO, GotoTag="SH_Input"),
        _block("fSL", ir.FROM, GotoTag="SL_Input"),
        _block("fSH", ir.FROM, GotoTag="SH_Input"),
        _block("lt_high", ir.RELATIONAL, Operator="<"),
        _block("flow", ir.PRODUCT),
        _block("level", ir.DISCRETE_INTEGRATOR, InitialCondition=0.5),
        _block("le_low", ir.RELATIONAL, Operator="<="),
        _block("g_next", ir.GOTO, GotoTag="next_pump"),
        _block("g_prev", ir.GOTO, GotoTag="prev_pump"),
        _block("out_level", ir.OUTPORT),
        _block("out_alarm", ir.OUTPORT),
    ]
    connections = _wire(
        ("cSL", "gSL", 0),
        ("cSH", "gSH", 0),
        ("level", "lt_high", 0),
        ("fSH", "lt_high", 1),
        ("inflow", "flow", 0),
        ("flow", "level", 0),
        ("level", "le_low", 0),
        ("fSL", "le_low", 1),
        ("inflow", "g_next", 0),
        ("inflow", "g_prev", 0),
        ("level", "out_level", 0),
        ("le_low", "out_alarm", 0),
    )
    connections.append(ir.Connection(src="lt_high", src_port=0, dst="flow", dst_port=1))
    return ir.ModelIR(name="two_tank", blocks=blocks, connections=connections, sample_time=0.5)


def two_tank_requirements() -> RequirementSet:
    return RequirementSet(
        requirements=[
            always("R1_no_overfill", Pred("out_level", "<=", 9.0)),
            implies_within(
                "R2_alarm_off_when_high",
                Pred("out_level", ">=", 5.0),
                Pred("out_alarm", "==", 0.0),
                0,
            ),
            implies_within(
                "R3_fills_eventually",
                Pred("out_level", ">=", 0.0),
                Pred("out_level", ">=", 4.0),
                60,
            ),
        ],
    )


def integrator() -> ir.ModelIR:
    """Saturating integrator with a one-step smoothing average."""
    blocks = [
        _block("u", ir.INPORT),
        _block(
            "pre", ir.GAIN, Gain=0.5, OutDataTypeStr="single", SaturateOnIntegerOverflow="off"
        ),
        _block("acc", ir.DISCRETE_INTEGRATOR, InitialCondition=0.0, SampleTime=0.1),
        _block(
            "sat",
            ir.SATURATION,
            UpperLimit=5.0,
            LowerLimit=-5.0,
            OutDataTypeStr="double",
            SaturateOnIntegerOverflow="on",
        ),
        _block("smooth", ir.UNIT_DELAY, InitialCondition=0.0),
        _block("avg", ir.SUM, Signs="++"),
        _block("post", ir.GAIN, Gain=1.0, OutDataTypeStr="double"),
        _block(
            "sfc",
            ir.STATEFLOW,
            Condition="after(3, u > 0)",
            TransitionCondition="level > 5",
            Action="y = y + 1;",
            EntryAction="y = 0;",
        ),
        _block("y", ir.OUTPORT),
    ]
    connections = _wire(
        ("u", "pre", 0),
        ("pre", "acc", 0),
        ("acc", "sat", 0),
        ("sat", "smooth", 0),
        ("sat", "avg", 0),
        ("avg", "post", 0),
        ("post", "y", 0),
        ("u", "sfc", 0),
    )
    connections.append(ir.Connection(src="smooth", src_port=0, dst="avg", dst_port=1))
    return ir.ModelIR(name="integrator", blocks=blocks, connections=connections, sample_time=1.0)


def integrator_requirements() -> RequirementSet:
    return RequirementSet(
        requirements=[
            always("IA1_bounded_output", Pred("y", "<=", 12.0)),
            always("IA2_no_undershoot", Pred("y", ">=", -0.5)),
            always("IA3_saturation_holds", Pred("sat_probe", "<=", 5.000001)),
        ],
        probes={"sat_probe": "sat"},
    )


def logic() -> ir.ModelIR:
    """Threshold comparisons feeding AND/OR gates and a switch."""
    blocks = [
        _block("a", ir.INPORT),
        _block("b", ir.INPORT),
        _block("thA", ir.CONSTANT, Value=1.0),
        _block(
            "thB", ir.CONSTANT, Value=2.0, OutDataTypeStr="int32", SaturateOnIntegerOverflow="on"
        ),
        _block("ra", ir.RELATIONAL, Operator=">"),
        _block("rb", ir.RELATIONAL, Operator=">="),
        _block("both", ir.LOGICAL, Operator="AND"),
        _block("either", ir.LOGICAL, Operator="OR"),
        _block("pick", ir.SWITCH, Threshold=0.5),
        _block(
            "sfl",
            ir.STATEFLOW,
            Condition="before(3, u > 0)",
            TransitionCondition="level >= 5",
            Action="mode = mode + 1;",
            EntryAction="mode = 0; flag = 1;",
        ),
        _block("sel", ir.OUTPORT),
        _block("anyo", ir.OUTPORT),
    ]
    connections = _wire(
        ("a", "ra", 0),
        ("b", "rb", 0),
        ("ra", "both", 0),
        ("ra", "either", 0),
        ("a", "pick", 0),
        ("pick", "sel", 0),
        ("either", "anyo", 0),
        ("a", "sfl", 0),
    )
    connections += [
        ir.Connection(src="thA", src_port=0, dst="ra", dst_port=1),
        ir.Connection(src="thB", src_port=0, dst="rb", dst_port=1),
        ir.Connection(src="rb", src_port=0, dst="both", dst_port=1),
        ir.Connection(src="rb", src_port=0, dst="either", dst_port=1),
        ir.Connection(src="both", src_port=0, dst="pick", dst_port=1),
        ir.Connection(src="b", src_port=0, dst="pick", dst_port=2),
    ]
    return ir.ModelIR(name="logic", blocks=blocks, connections=connections, sample_time=1.0)


def logic_requirements() -> RequirementSet:
    return RequirementSet(
        requirements=[
            always("L1_output_bounded", Pred("sel", "<=", 10.5)),
            implies_within(
                "L2_and_implies_or",
                Pred("both_probe", "==", 1.0),
                Pred("anyo", "==", 1.0),
                0,
            ),
            implies_within(
                "L3_rb_implies_or",
                Pred("rb_probe", "==", 1.0),
                Pred("anyo", "==", 1.0),
                0,
            ),
        ],
        probes={"both_probe": "both", "rb_probe": "rb"},
    )


BENCH = (
    ("two_tank", two_tank, two_tank_requirements),
    ("integrator", integrator, integrator_requirements),
    ("logic", logic, logic_requirements),
)


def bench_models() -> list[ir.ModelIR]:
    return [build() for _, build, _ in BENCH]


def write_bench(directory: str | Path) -> list[Path]:
    """Emit every bench model and its requirements file."""
    from .reqmon import save_requirements

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, build, build_reqs in BENCH:
        model_path = directory / f"{name}.json"
        model_path.write_text(ir.dump_json(build()), encoding="utf-8")
        req_path = directory / f"{name}.reqs.json"
        save_requirements(build_reqs(), req_path)
        written += [model_path, req_path]
    return written
