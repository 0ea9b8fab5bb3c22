"""Random valid models for round-trip and simulation property tests.

Blocks are generated in topological layers, so wiring can never form
a combinational loop; every fixed-arity input gets exactly one
driver.  Names and numeric values intentionally include characters
and magnitudes that stress the canonical renderer.
"""

from __future__ import annotations

import random

from blockmut import ir

_NAME_POOL = [
    "plain",
    "with space",
    'quoted "name"',
    "back\\slash",
    "tab\there",
    "newline\nname",
    "unicode-éß",
    "trailing.dot.",
    "UPPER_case-9",
]

_EXPR_POOL = [
    "after(3, u > 0)",
    "before(2, x >= 1)",
    "at(5, level < 10)",
    "y = y + 1;",
    "mode = 0; flag = 1;",
    "speed >= limit",
]


def _rand_number(rng: random.Random) -> float:
    kind = rng.randrange(6)
    if kind == 0:
        return float(rng.randint(-20, 20))
    if kind == 1:
        return rng.uniform(-5.0, 5.0)
    if kind == 2:
        return rng.choice([0.0, -0.0, 0.5, 1.5, 100.0])
    if kind == 3:
        return rng.uniform(-1e-4, 1e-4)
    if kind == 4:
        return rng.uniform(1e6, 1e12)
    return rng.choice([0.1, 0.25, 2.0, -3.75])


def _common_props(rng: random.Random, props: dict) -> None:
    if rng.random() < 0.4:
        props["OutDataTypeStr"] = rng.choice(list(ir.DATA_TYPES))
    if rng.random() < 0.3:
        props["SaturateOnIntegerOverflow"] = rng.choice(list(ir.ON_OFF))


def random_model(rng: random.Random, name: str | None = None) -> ir.ModelIR:
    blocks: list[ir.Block] = []
    connections: list[ir.Connection] = []
    outputs: list[str] = []  # ids whose port 0 can drive inputs
    serial = 0

    def add(block_type: str, props: dict, inputs: list[str] | None = None) -> str:
        nonlocal serial
        bid = f"b{serial:02d}"
        serial += 1
        blocks.append(
            ir.Block(
                id=bid,
                name=rng.choice(_NAME_POOL) if rng.random() < 0.5 else bid,
                block_type=block_type,
                properties={k: ir.coerce_property(block_type, k, v) for k, v in props.items()},
            )
        )
        for port, src in enumerate(inputs or []):
            connections.append(ir.Connection(src=src, src_port=0, dst=bid, dst_port=port))
        return bid

    for _ in range(rng.randint(1, 3)):
        outputs.append(add(ir.INPORT, {}))
    for _ in range(rng.randint(1, 3)):
        outputs.append(add(ir.CONSTANT, {"Value": _rand_number(rng)}))

    # One tag pair; the From joins the pool so later blocks may read it.
    if rng.random() < 0.6:
        tag = f"tag_{rng.randint(0, 99)}"
        add(ir.GOTO, {"GotoTag": tag}, [rng.choice(outputs)])
        outputs.append(add(ir.FROM, {"GotoTag": tag}))

    for _ in range(rng.randint(2, 8)):
        choice = rng.randrange(9)
        props: dict = {}
        if choice == 0:
            props["Gain"] = _rand_number(rng)
            _common_props(rng, props)
            outputs.append(add(ir.GAIN, props, [rng.choice(outputs)]))
        elif choice == 1:
            signs = "".join(rng.choice("+-") for _ in range(rng.randint(2, 4)))
            props["Signs"] = signs
            _common_props(rng, props)
            outputs.append(add(ir.SUM, props, [rng.choice(outputs) for _ in signs]))
        elif choice == 2:
            _common_props(rng, props)
            outputs.append(add(ir.PRODUCT, props, [rng.choice(outputs) for _ in range(2)]))
        elif choice == 3:
            props["Operator"] = rng.choice(list(ir.RELATIONAL_OPS))
            outputs.append(add(ir.RELATIONAL, props, [rng.choice(outputs) for _ in range(2)]))
        elif choice == 4:
            op = rng.choice(list(ir.LOGICAL_OPS))
            props["Operator"] = op
            n = 1 if op == "NOT" else 2
            outputs.append(add(ir.LOGICAL, props, [rng.choice(outputs) for _ in range(n)]))
        elif choice == 5:
            props["Threshold"] = _rand_number(rng)
            outputs.append(add(ir.SWITCH, props, [rng.choice(outputs) for _ in range(3)]))
        elif choice == 6:
            lo = rng.uniform(-10.0, 0.0)
            props.update({"UpperLimit": lo + rng.uniform(0.5, 10.0), "LowerLimit": lo})
            _common_props(rng, props)
            outputs.append(add(ir.SATURATION, props, [rng.choice(outputs)]))
        elif choice == 7:
            props["InitialCondition"] = _rand_number(rng)
            _common_props(rng, props)
            outputs.append(add(ir.UNIT_DELAY, props, [rng.choice(outputs)]))
        else:
            props["InitialCondition"] = _rand_number(rng)
            if rng.random() < 0.5:
                props["SampleTime"] = rng.choice([0.1, 0.5, 1.0])
            _common_props(rng, props)
            outputs.append(add(ir.DISCRETE_INTEGRATOR, props, [rng.choice(outputs)]))

    if rng.random() < 0.4:
        keys = rng.sample(
            ["Condition", "TransitionCondition", "Action", "EntryAction"], rng.randint(1, 3)
        )
        add(
            ir.STATEFLOW,
            {k: rng.choice(_EXPR_POOL) for k in keys},
            [rng.choice(outputs) for _ in range(rng.randrange(3))],
        )

    for _ in range(rng.randint(1, 3)):
        add(ir.OUTPORT, {}, [rng.choice(outputs)])

    model = ir.ModelIR(
        name=name or f"rand_{rng.randint(0, 10 ** 6)}",
        blocks=blocks,
        connections=connections,
        sample_time=rng.choice([0.25, 0.5, 1.0]),
    )
    report = ir.validate(model)
    assert report.ok, [d.message for d in report.errors]
    return model
