#!/usr/bin/env python3
"""Compare the compiled simulation kernel against the pure-Python one.

Runs the same compiled programs under every importable kernel,
asserts the traces are bit-identical, and prints per-kernel timing.
Usage:

    python3 benchmarks/bench_kernel.py [--steps N] [--repeats N] [--chain N]
"""

import argparse
import statistics
import time

from blockmut import fixtures, ir
from blockmut.sim import (
    ConstantSignal,
    StepSignal,
    TestCase,
    available_kernels,
    compile_program,
    simulate_program,
)


def _chain_model(length: int) -> ir.ModelIR:
    """A long alternating gain/integrator/delay chain; pure kernel load."""
    blocks = [fixtures._block("u", ir.INPORT)]
    connections = []
    prev = "u"
    for i in range(length):
        bid = f"n{i:03d}"
        kind = i % 3
        if kind == 0:
            blocks.append(fixtures._block(bid, ir.GAIN, Gain=1.0 + 0.01 * i))
        elif kind == 1:
            blocks.append(
                fixtures._block(bid, ir.DISCRETE_INTEGRATOR, InitialCondition=0.0, SampleTime=0.01)
            )
        else:
            blocks.append(fixtures._block(bid, ir.UNIT_DELAY, InitialCondition=0.5))
        connections.append(ir.Connection(src=prev, src_port=0, dst=bid, dst_port=0))
        prev = bid
    blocks.append(fixtures._block("y", ir.OUTPORT))
    connections.append(ir.Connection(src=prev, src_port=0, dst="y", dst_port=0))
    return ir.ModelIR(name=f"chain{length}", blocks=blocks, connections=connections, sample_time=0.1)


def _workload(steps: int, chain: int) -> list[tuple[ir.ModelIR, TestCase]]:
    jobs = []
    for model in fixtures.bench_models():
        inports = [b.id for b in model.blocks if b.block_type == ir.INPORT]
        inputs = {bid: StepSignal(t0=steps // 3, v0=0.4, v1=1.6) for bid in inports}
        jobs.append((model, TestCase(id="bench", duration_steps=steps, inputs=inputs)))
    chain_model = _chain_model(chain)
    jobs.append(
        (chain_model, TestCase(id="bench", duration_steps=steps, inputs={"u": ConstantSignal(0.75)}))
    )
    return jobs


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=2000, help="steps per simulation")
    parser.add_argument("--repeats", type=int, default=5, help="timed repetitions per kernel")
    parser.add_argument("--chain", type=int, default=120, help="length of the synthetic chain model")
    args = parser.parse_args()

    kernels = available_kernels()
    jobs = [(compile_program(model), test, model.name) for model, test in _workload(args.steps, args.chain)]

    traces: dict[str, list] = {}
    timings: dict[str, float] = {}
    for name, kernel in sorted(kernels.items()):
        samples = []
        for _ in range(args.repeats):
            start = time.perf_counter()
            run = [simulate_program(prog, test, kernel=kernel) for prog, test, _ in jobs]
            samples.append(time.perf_counter() - start)
        traces[name] = run
        timings[name] = min(samples)
        steps_done = sum(t.length for t in run)
        print(f"{name:>9}: best {timings[name] * 1e3:8.2f} ms "
              f"({steps_done / timings[name]:,.0f} steps/s over {len(jobs)} models, "
              f"median {statistics.median(samples) * 1e3:.2f} ms)")

    names = sorted(traces)
    reference = traces[names[0]]
    for other in names[1:]:
        for (_, _, model_name), a, b in zip(jobs, reference, traces[other]):
            assert a.signals.keys() == b.signals.keys(), model_name
            for rec in a.signals:
                same = (a.signals[rec] == b.signals[rec]).all()
                assert same, f"{model_name}:{rec} differs between {names[0]} and {other}"
            assert a.fault == b.fault and a.length == b.length, model_name
    if len(names) > 1:
        print(f"traces bit-identical across kernels: {', '.join(names)}")
        if "python" in timings and "compiled" in timings:
            print(f"speedup compiled vs python: {timings['python'] / timings['compiled']:.1f}x")
    else:
        print("only one kernel importable; build the extension to compare")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
