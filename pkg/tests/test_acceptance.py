"""End-to-end acceptance gate.

One test per acceptance criterion, numbered so the ``pytest -v``
listing doubles as the pass/fail report.  Every test states its
tolerance and wall-clock budget inline; a pass means both the
behavior and the budget held.  The prediction-service half of the
conformance criterion lives with the service package; the offline
half runs here.
"""

import itertools
import json
import random
import statistics
import time
import warnings
from contextlib import contextmanager

import numpy as np

from blockmut import fixtures, harness, ir, mutgen
from blockmut.cli import main
from blockmut.errors import MaskRequestError
from blockmut.fixtures import _block, _wire
from blockmut.ingest import CorpusRecord, parse_model
from blockmut.predictor import OfflinePredictor
from blockmut.reqmon import save_requirements
from blockmut.sim import RampSignal, StepSignal, TestCase, simulate

from util_conformance import load_vectors, run_vectors
from util_models import random_model


@contextmanager
def budget(seconds: float):
    start = time.monotonic()
    yield
    elapsed = time.monotonic() - start
    assert elapsed < seconds, f"took {elapsed:.2f}s, budget is {seconds:.0f}s"


@contextmanager
def quiet():
    # harness warns when the original model violates a requirement on
    # some test; that path has its own unit tests
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def test_01_fifty_random_models_round_trip_byte_exactly():
    with budget(5.0):
        rng = random.Random(20260814)
        for i in range(50):
            model = random_model(rng, name=f"rt_{i:02d}")
            text = ir.dump_json(model)
            reparsed = parse_model(text, "json")
            assert ir.dump_json(reparsed) == text
            assert ir.render_text(reparsed) == ir.render_text(model)


def test_02_micro_models_match_hand_recurrences():
    tol = 1e-12
    steps = 100
    with budget(1.0):
        # constant through two gains: y_t = c * g1 * g2
        chain = ir.ModelIR(
            name="gain_chain",
            blocks=[
                _block("c", ir.CONSTANT, Value=1.25),
                _block("g1", ir.GAIN, Gain=-2.0),
                _block("g2", ir.GAIN, Gain=0.7),
                _block("y", ir.OUTPORT),
            ],
            connections=_wire(("c", "g1", 0), ("g1", "g2", 0), ("g2", "y", 0)),
            sample_time=1.0,
        )
        trace = simulate(chain, TestCase(id="t", duration_steps=steps, inputs={}))
        expect = 1.25 * -2.0 * 0.7
        assert all(abs(v - expect) <= tol for v in trace.signals["y"])

        # forward Euler on a ramp: y_t = x_t, x_{t+1} = x_t + ts * u_t
        euler = ir.ModelIR(
            name="euler",
            blocks=[
                _block("u", ir.INPORT),
                _block("acc", ir.DISCRETE_INTEGRATOR, InitialCondition=0.25, SampleTime=0.5),
                _block("y", ir.OUTPORT),
            ],
            connections=_wire(("u", "acc", 0), ("acc", "y", 0)),
            sample_time=0.25,
        )
        trace = simulate(euler, TestCase(id="t", duration_steps=steps, inputs={"u": RampSignal(slope=0.3)}))
        x = 0.25
        for t in range(steps):
            assert abs(trace.signals["y"][t] - x) <= tol
            x += 0.5 * (0.3 * t * 0.25)

        # two unit delays: y_0 = ic2, y_1 = ic1, y_t = u_{t-2}
        delays = ir.ModelIR(
            name="delay_chain",
            blocks=[
                _block("u", ir.INPORT),
                _block("d1", ir.UNIT_DELAY, InitialCondition=9.0),
                _block("d2", ir.UNIT_DELAY, InitialCondition=7.0),
                _block("y", ir.OUTPORT),
            ],
            connections=_wire(("u", "d1", 0), ("d1", "d2", 0), ("d2", "y", 0)),
            sample_time=1.0,
        )
        u = [2.5 if t < 4 else -1.5 for t in range(steps)]
        trace = simulate(
            delays,
            TestCase(id="t", duration_steps=steps, inputs={"u": StepSignal(t0=4, v0=2.5, v1=-1.5)}),
        )
        expect_seq = [7.0, 9.0] + u[: steps - 2]
        assert all(abs(a - b) <= tol for a, b in zip(trace.signals["y"], expect_seq))


def test_03_tag_swap_mutants_emerge_offline_and_die_under_both_notions(tmp_path):
    with budget(30.0):
        model = fixtures.two_tank()
        assert 8 <= len(model.blocks) <= 15
        model_path = tmp_path / "two_tank.json"
        model_path.write_text(ir.dump_json(model), encoding="utf-8")
        save_requirements(fixtures.two_tank_requirements(), tmp_path / "two_tank.reqs.json")

        mut_dir = tmp_path / "mut"
        rc = main([
            "mutate", "--model", str(model_path), "--mode", "mlm",
            "--predictor", "offline", "--output-dir", str(mut_dir),
        ])
        assert rc == 0
        ms = mutgen.read_mutant_set(mut_dir / "mutants_mlm.json", model)
        swaps = [
            m for m in ms.mutants
            if m.site.block_type == ir.FROM and m.site.property_key == "GotoTag"
        ]
        # the cross-threshold reroute: the From feeding the high-level
        # comparison now reads the low-level constant's tag
        assert any(
            m.site.block_id == "fSH" and m.replacement.canonical == "SL_Input" for m in swaps
        )

        exp_dir = tmp_path / "exp"
        with quiet():
            rc = main([
                "experiment", "--models", str(model_path), "--seed", "0",
                "--jobs", "1", "--output-dir", str(exp_dir),
            ])
        assert rc == 0
        ems = mutgen.read_mutant_set(exp_dir / "two_tank" / "mutants_mlm.json", model)
        cross = {
            m.id
            for m in ems.mutants
            if m.site.property_key == "GotoTag"
            and (
                (m.site.block_id == "fSH" and m.replacement.canonical == "SL_Input")
                or (m.site.block_id == "fSL" and m.replacement.canonical == "SH_Input")
            )
        }
        assert cross
        doc = json.loads((exp_dir / "two_tank" / "matrix_mlm.json").read_text(encoding="utf-8"))
        for notion in ("classical", "req_aware"):
            assert cross <= set(doc["killable"][notion]), f"tag swaps not killed under {notion}"


def test_04_req_aware_kills_are_a_subset_and_a_classical_only_kill_exists():
    total = 0
    classical_only = False
    for _, build, build_reqs in fixtures.BENCH:
        model = build()
        suite = harness.generate_reference_suite(model, size=50, seed=4)
        ms = mutgen.generate_operators(model)
        total += len(ms.mutants)
        with quiet():
            matrix = harness.compute_kill_matrix(model, ms, suite, build_reqs())
        # exact boolean containment, no tolerance
        assert not np.any(matrix.req_aware & ~matrix.classical)
        if np.any(matrix.classical & ~matrix.req_aware):
            classical_only = True
    assert total >= 100
    assert classical_only


def test_05_greedy_selection_covers_exactly_and_brute_force_agrees():
    with budget(60.0):
        rng = random.Random(5)
        for trial in range(200):
            n_tests = rng.randint(1, 12)
            n_mut = rng.randint(1, 20)
            density = rng.choice((0.1, 0.3, 0.6))
            cells = np.array(
                [[rng.random() < density for _ in range(n_mut)] for _ in range(n_tests)]
            )
            matrix = harness.KillMatrix(
                tests=[f"t{i}" for i in range(n_tests)],
                mutants=[f"m{j}" for j in range(n_mut)],
                classical=cells,
                req_aware=np.zeros_like(cells),
            )
            selected = harness.select_minimal_tests(matrix, "classical")
            killable = set(matrix.killable("classical"))
            assert matrix.kills_of_tests("classical", selected) == killable

            cols = [set(np.flatnonzero(cells[i]).tolist()) for i in range(n_tests)]
            target = set().union(*cols) if cols else set()
            optimum = None
            for size in range(n_tests + 1):
                for combo in itertools.combinations(range(n_tests), size):
                    covered = set().union(*(cols[i] for i in combo)) if combo else set()
                    if covered == target:
                        optimum = size
                        break
                if optimum is not None:
                    break
            assert len(selected) >= optimum
            assert len(selected) <= n_tests


def test_06_every_pattern_classifies_and_mlm_mutants_never_unclassified():
    pv = ir.PropertyValue
    cases = [
        (ir.GAIN, "OutDataTypeStr", pv("enum", "double"), pv("enum", "single"),
         mutgen.PATTERN_DATA_TYPES),
        (ir.FROM, "GotoTag", pv("text", "A"), pv("text", "B"), mutgen.PATTERN_GOTO_FROM),
        (ir.GAIN, "SaturateOnIntegerOverflow", pv("enum", "off"), pv("enum", "on"),
         mutgen.PATTERN_OVERFLOW),
        (ir.CONSTANT, "Value", pv("number", 1.0), pv("number", 2.0), mutgen.PATTERN_CONST_GAIN),
        (ir.RELATIONAL, "Operator", pv("enum", "<"), pv("enum", "<="),
         mutgen.PATTERN_OPERATORS),
        (ir.DISCRETE_INTEGRATOR, "InitialCondition", pv("number", 0.0), pv("number", 1.0),
         mutgen.PATTERN_INIT_SAMPLE),
        (ir.STATEFLOW, "Condition", pv("text", "u > 0"), pv("text", "u >= 0"),
         mutgen.PATTERN_SF_CONDITIONS),
        (ir.STATEFLOW, "Condition", pv("text", "u > 0"), pv("text", "v > 0"),
         mutgen.PATTERN_SF_VARIABLES),
        (ir.STATEFLOW, "EntryAction", pv("text", "y = 0;"), pv("text", "y = 2; z = 1;"),
         mutgen.PATTERN_SF_ACTIONS),
        (ir.STATEFLOW, "Condition", pv("text", "after(3, u > 0)"), pv("text", "before(3, u > 0)"),
         mutgen.PATTERN_SF_KEYWORDS),
    ]
    seen = set()
    for block_type, key, orig, repl, want in cases:
        got = mutgen.classify_delta(block_type, key, orig, repl)
        assert got == want, f"{block_type}.{key}: {got!r} != {want!r}"
        seen.add(got)
    assert seen == set(mutgen.ALL_PATTERNS)
    assert len(seen) == 10

    models = fixtures.bench_models()
    predictor = OfflinePredictor().fit_models(models)
    produced = set()
    n_mutants = 0
    for model in models:
        ms = mutgen.generate_mlm(model, predictor, k=3)
        for m in ms.mutants:
            assert m.pattern != mutgen.UNCLASSIFIED, f"{m.id} unclassified"
            produced.add(m.pattern)
        n_mutants += len(ms.mutants)
    assert n_mutants > 0
    assert len(produced) >= 6, f"only {sorted(produced)}"


def test_07_every_emitted_mutant_is_valid_one_delta_and_stats_reconcile():
    models = fixtures.bench_models()
    predictor = OfflinePredictor().fit_models(models)
    for model in models:
        base_lines = ir.render_text(model).splitlines()
        for ms in (mutgen.generate_operators(model), mutgen.generate_mlm(model, predictor, k=3)):
            assert set(ms.stats) == {"generated", "discarded_identical", "discarded_uncompilable"}
            assert ms.stats["generated"] == (
                len(ms.mutants)
                + ms.stats["discarded_identical"]
                + ms.stats["discarded_uncompilable"]
            )
            denom = ms.stats["generated"] - ms.stats["discarded_identical"]
            if denom:
                assert ms.compilable_fraction == len(ms.mutants) / denom
            for m in ms.mutants:
                mutated = ir.apply_delta(model, m.site, m.replacement.canonical)
                assert ir.validate(mutated).ok
                assert mutgen.smoke_test(mutated)
                mutated_lines = ir.render_text(mutated).splitlines()
                assert len(mutated_lines) == len(base_lines)
                diff = [i for i, (a, b) in enumerate(zip(base_lines, mutated_lines)) if a != b]
                assert len(diff) == 1, f"{m.id} changed {len(diff)} lines"


def test_08_worker_count_never_changes_the_reports(tmp_path):
    model_path = tmp_path / "two_tank.json"
    model_path.write_text(ir.dump_json(fixtures.two_tank()), encoding="utf-8")
    save_requirements(fixtures.two_tank_requirements(), tmp_path / "two_tank.reqs.json")

    def run(jobs: int, out: str) -> None:
        with quiet():
            rc = main([
                "experiment", "--models", str(model_path), "--seed", "3",
                "--suite-size", "15", "--repetitions", "2", "--duration-steps", "80",
                "--jobs", str(jobs), "--output-dir", str(tmp_path / out),
            ])
        assert rc == 0

    run(1, "serial")
    run(8, "parallel")

    def tree(name: str) -> dict[str, bytes]:
        root = tmp_path / name
        return {
            p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file()
        }

    serial, parallel = tree("serial"), tree("parallel")
    assert serial.keys() == parallel.keys()
    for rel in serial:
        if rel == "config.json":
            a, b = json.loads(serial[rel]), json.loads(parallel[rel])
            for key in ("jobs", "output_dir"):
                a.pop(key)
                b.pop(key)
            assert a == b
        else:
            assert serial[rel] == parallel[rel], f"{rel} differs between --jobs 1 and --jobs 8"


def test_09_adaptive_suites_spread_wider_than_pure_random():
    with budget(10.0):
        for dim in (1, 3):
            adaptive = [
                harness.suite_pairwise_min_distance(
                    harness.art_points(dim, 16, candidates_per_pick=10, rng=random.Random(seed))
                )
                for seed in range(20)
            ]
            pure = [
                harness.suite_pairwise_min_distance(
                    harness.art_points(dim, 16, candidates_per_pick=1, rng=random.Random(seed))
                )
                for seed in range(20)
            ]
            assert statistics.fmean(adaptive) > statistics.fmean(pure), f"dim={dim}"


class _OfflineAdapter:
    """Conformance-vector adapter over the offline predictor."""

    def __init__(self, predictor: OfflinePredictor):
        self.predictor = predictor

    def handshake(self) -> dict:
        hs = self.predictor.handshake()
        return {
            "mask_token": hs.mask_token,
            "max_input_tokens": hs.max_input_tokens,
            "model_id": hs.model_id,
        }

    def predict(self, text: str, top_k: int):
        try:
            preds = self.predictor.predict_text(text, top_k)
        except MaskRequestError:
            return "mask_request", None
        return "ok", [{"token": p.token, "score": p.score} for p in preds]


def test_10_offline_predictor_passes_the_shared_conformance_vectors():
    doc = load_vectors()
    predictor = OfflinePredictor().fit_corpus(
        [CorpusRecord(model_name="seed", text=doc["offline_fit_text"], masked_text="", targets=())]
    )
    failures = run_vectors(_OfflineAdapter(predictor), doc)
    assert not failures, "\n".join(failures)
