"""Experiment orchestration: reference suites, kill matrices, greedy
test selection, and cross-approach comparison reports.

The kill matrix is computed under two notions at once.  classical:
the mutant's outputs drift past the tolerance on some step, or the
mutant run aborts while the original completes.  requirements-aware:
classical AND the mutant trace violates a requirement the original
satisfies on that test.  The conjunction keeps the subset law
(req-aware kills are classical kills) structural even when
requirements constrain internal probe signals.
"""

from __future__ import annotations

import json
import math
import random
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean

import numpy as np

from . import ir
from .errors import BlockmutError, InvalidModelError
from .mutgen import Mutant, MutantSet
from .reqmon import Requirement, RequirementSet, check
from .sim import (
    SignalTrace,
    StepSignal,
    TestCase,
    available_kernels,
    compile_program,
    simulate_program,
)

NOTIONS = ("classical", "req_aware")
DEFAULT_TOLERANCE = 1e-6
DEFAULT_SUITE_SIZE = 50
DEFAULT_CANDIDATES = 10


def _resolve_kernel(name: str | None):
    if name is None:
        return None
    kernels = available_kernels()
    if name not in kernels:
        raise ValueError(f"unknown kernel {name!r}; have {sorted(kernels)}")
    return kernels[name]


def art_points(
    dim: int, size: int, candidates_per_pick: int = DEFAULT_CANDIDATES, rng: random.Random | None = None
) -> list[tuple[float, ...]]:
    """Adaptive-random points in the unit cube.

    The first point is a single uniform draw.  Each later point is the
    best of candidates_per_pick uniform draws, scored by minimum
    Euclidean distance to the points already chosen (ties keep the
    earliest candidate).  candidates_per_pick=1 degenerates to pure
    random sampling with the same draw pattern.
    """
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    if candidates_per_pick < 1:
        raise ValueError(f"candidates_per_pick must be >= 1, got {candidates_per_pick}")
    rng = rng if rng is not None else random.Random()
    points: list[tuple[float, ...]] = []
    for i in range(size):
        n_cands = 1 if i == 0 else candidates_per_pick
        candidates = [tuple(rng.random() for _ in range(dim)) for _ in range(n_cands)]
        best = candidates[0]
        best_score = -1.0
        if points:
            for cand in candidates:
                score = min(math.dist(cand, p) for p in points)
                if score > best_score:
                    best, best_score = cand, score
        points.append(best)
    return points


def suite_pairwise_min_distance(points: list[tuple[float, ...]]) -> float:
    return min(
        math.dist(a, b) for i, a in enumerate(points) for b in points[i + 1 :]
    )


def generate_reference_suite(
    model: ir.ModelIR,
    size: int = DEFAULT_SUITE_SIZE,
    candidates_per_pick: int = DEFAULT_CANDIDATES,
    seed: int | str = 0,
    duration_steps: int = 100,
    value_range: tuple[float, float] = (0.0, 2.0),
) -> list[TestCase]:
    """ART suite of step inputs: (onset, before, after) per Inport."""
    inports = sorted(b.id for b in model.blocks if b.block_type == ir.INPORT)
    rng = random.Random(f"{seed}:{model.name}")
    points = art_points(3 * len(inports), size, candidates_per_pick, rng)
    lo, hi = value_range
    tests = []
    for idx, point in enumerate(points):
        inputs = {}
        for j, bid in enumerate(inports):
            t0f, v0f, v1f = point[3 * j : 3 * j + 3]
            inputs[bid] = StepSignal(
                t0=int(t0f * duration_steps),
                v0=lo + v0f * (hi - lo),
                v1=lo + v1f * (hi - lo),
            )
        tests.append(TestCase(id=f"t{idx:03d}", duration_steps=duration_steps, inputs=inputs))
    return tests


@dataclass
class KillMatrix:
    tests: list[str]
    mutants: list[str]
    classical: np.ndarray  # bool, shape (len(tests), len(mutants))
    req_aware: np.ndarray
    excluded_pairs: list[tuple[str, str]] = field(default_factory=list)

    def matrix(self, notion: str) -> np.ndarray:
        if notion == "classical":
            return self.classical
        if notion == "req_aware":
            return self.req_aware
        raise ValueError(f"unknown notion {notion!r}; have {NOTIONS}")

    def killable(self, notion: str) -> list[str]:
        m = self.matrix(notion)
        return [mid for j, mid in enumerate(self.mutants) if bool(m[:, j].any())]

    @property
    def killable_classical(self) -> list[str]:
        return self.killable("classical")

    @property
    def killable_req(self) -> list[str]:
        return self.killable("req_aware")

    def kills_of_tests(self, notion: str, test_ids) -> set[str]:
        m = self.matrix(notion)
        killed: set[str] = set()
        for tid in test_ids:
            row = m[self.tests.index(tid)]
            killed.update(self.mutants[j] for j in np.flatnonzero(row))
        return killed

    def to_json_dict(self) -> dict:
        return {
            "tests": list(self.tests),
            "mutants": list(self.mutants),
            "classical": self.classical.astype(int).tolist(),
            "req_aware": self.req_aware.astype(int).tolist(),
            "excluded_pairs": [list(p) for p in self.excluded_pairs],
            "killable": {n: self.killable(n) for n in NOTIONS},
        }


def export_kill_matrix_csv(matrix: KillMatrix, notion: str, path: str | Path) -> None:
    m = matrix.matrix(notion)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("test," + ",".join(matrix.mutants) + "\n")
        for i, tid in enumerate(matrix.tests):
            fh.write(tid + "," + ",".join("1" if v else "0" for v in m[i]) + "\n")


@dataclass(frozen=True)
class _MatrixContext:
    base: ir.ModelIR
    suite: tuple[TestCase, ...]
    reqs: tuple[Requirement, ...]
    extra_records: tuple[str, ...]
    tolerance: float
    kernel_name: str | None
    orig_traces: tuple[SignalTrace, ...]
    excluded: frozenset[tuple[str, str]]


def _mutant_column(ctx: _MatrixContext, mutant: Mutant) -> tuple[list[bool], list[bool]]:
    kernel = _resolve_kernel(ctx.kernel_name)
    model = mutant.materialize(ctx.base)
    try:
        prog = compile_program(model, extra_records=ctx.extra_records)
    except BlockmutError:
        prog = None  # unbuildable mutant: treat like a run that aborts instantly
    classical_col: list[bool] = []
    req_col: list[bool] = []
    for test, orig in zip(ctx.suite, ctx.orig_traces):
        live_reqs = [r for r in ctx.reqs if (r.id, test.id) not in ctx.excluded]
        if prog is None:
            killed = True
            violated = bool(live_reqs)
        else:
            trace = simulate_program(prog, test, kernel=kernel)
            if trace.aborted:
                killed = True
            else:
                killed = any(
                    bool(np.any(np.abs(orig.signals[sid] - trace.signals[sid]) > ctx.tolerance))
                    for sid in orig.output_ids
                )
            violated = any(not check(r, trace).satisfied for r in live_reqs)
        classical_col.append(bool(killed))
        req_col.append(bool(killed and violated))
    return classical_col, req_col


_WORKER_CTX: _MatrixContext | None = None


def _init_worker(ctx: _MatrixContext) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker_entry(job: tuple[int, Mutant]) -> tuple[int, tuple[list[bool], list[bool]]]:
    j, mutant = job
    return j, _mutant_column(_WORKER_CTX, mutant)


def compute_kill_matrix(
    original: ir.ModelIR,
    mutants: MutantSet | list[Mutant],
    suite: list[TestCase],
    reqs: RequirementSet | list[Requirement] | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    kernel_name: str | None = None,
    jobs: int = 1,
) -> KillMatrix:
    """Simulate every (test, mutant) cell under both kill notions.

    The original model must run clean on every test; a fault there is
    a hard error.  (requirement, test) pairs the original itself
    violates are excluded from the req-aware notion with a warning.
    Results are independent of the worker count.
    """
    mutant_list = list(mutants.mutants) if isinstance(mutants, MutantSet) else list(mutants)
    if reqs is None:
        reqset = RequirementSet(requirements=[])
    elif isinstance(reqs, RequirementSet):
        reqset = reqs
    else:
        reqset = RequirementSet(requirements=list(reqs))
    resolved = tuple(reqset.resolved())
    extra = reqset.probe_ids()
    kernel = _resolve_kernel(kernel_name)

    prog = compile_program(original, extra_records=extra)
    orig_traces = []
    for test in suite:
        trace = simulate_program(prog, test, kernel=kernel)
        if trace.aborted:
            raise InvalidModelError(
                f"original model {original.name!r} aborted on test {test.id!r}: "
                f"{trace.fault.kind} at step {trace.fault.step} (block {trace.fault.block})"
            )
        orig_traces.append(trace)

    excluded: set[tuple[str, str]] = set()
    for test, trace in zip(suite, orig_traces):
        for req in resolved:
            if not check(req, trace).satisfied:
                excluded.add((req.id, test.id))
                warnings.warn(
                    f"original model violates requirement {req.id!r} on test {test.id!r}; "
                    "pair excluded from the requirements-aware notion",
                    stacklevel=2,
                )

    ctx = _MatrixContext(
        base=original,
        suite=tuple(suite),
        reqs=resolved,
        extra_records=extra,
        tolerance=tolerance,
        kernel_name=kernel_name,
        orig_traces=tuple(orig_traces),
        excluded=frozenset(excluded),
    )

    columns: list[tuple[list[bool], list[bool]] | None] = [None] * len(mutant_list)
    if jobs <= 1 or len(mutant_list) < 2:
        for j, mutant in enumerate(mutant_list):
            columns[j] = _mutant_column(ctx, mutant)
    else:
        chunk = max(1, len(mutant_list) // (jobs * 4))
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ctx,)) as ex:
            for j, col in ex.map(_worker_entry, list(enumerate(mutant_list)), chunksize=chunk):
                columns[j] = col

    n_tests, n_mut = len(suite), len(mutant_list)
    classical = np.zeros((n_tests, n_mut), dtype=bool)
    req_aware = np.zeros((n_tests, n_mut), dtype=bool)
    for j, col in enumerate(columns):
        classical[:, j] = col[0]
        req_aware[:, j] = col[1]
    return KillMatrix(
        tests=[t.id for t in suite],
        mutants=[m.id for m in mutant_list],
        classical=classical,
        req_aware=req_aware,
        excluded_pairs=sorted(excluded),
    )


def select_minimal_tests(
    matrix: KillMatrix, notion: str = "classical", order: list[int] | None = None
) -> list[str]:
    """Greedy set cover over one notion's matrix.

    Picks the test killing the most not-yet-killed mutants until no
    test adds coverage; the result kills every killable mutant.  Ties
    go to the lowest test index, or to the earliest position in
    ``order`` when a tie-shuffling permutation is supplied.
    """
    m = matrix.matrix(notion)
    n_tests = len(matrix.tests)
    pos = list(range(n_tests))
    if order is not None:
        if sorted(order) != list(range(n_tests)):
            raise ValueError("order must be a permutation of test indices")
        for rank, i in enumerate(order):
            pos[i] = rank
    kills = [set(np.flatnonzero(m[i]).tolist()) for i in range(n_tests)]
    remaining: set[int] = set().union(*kills) if kills else set()
    selected: list[int] = []
    chosen: set[int] = set()
    while remaining:
        best_i = None
        best_gain = 0
        for i in range(n_tests):
            if i in chosen:
                continue
            gain = len(kills[i] & remaining)
            if gain == 0:
                continue
            if gain > best_gain or (gain == best_gain and pos[i] < pos[best_i]):
                best_i, best_gain = i, gain
        if best_i is None:
            break
        selected.append(best_i)
        chosen.add(best_i)
        remaining -= kills[best_i]
    return [matrix.tests[i] for i in selected]


def mutation_score(killed: int, killable: int) -> float | None:
    """killed/killable; None when nothing is killable."""
    if killed > killable:
        raise ValueError(f"killed ({killed}) exceeds killable ({killable})")
    if killable == 0:
        return None
    return killed / killable


def score_text(score: float | None) -> str:
    return "n/a" if score is None else f"{100.0 * score:.1f}%"


@dataclass
class ComparisonReport:
    label_a: str
    label_b: str
    test_count: int
    repetitions: list[dict]
    averages: dict[str, dict[str, float | None]]
    killable: dict[str, dict[str, int]]  # notion -> {label: count}
    seed: int | str = 0

    def to_json_dict(self) -> dict:
        return {
            "label_a": self.label_a,
            "label_b": self.label_b,
            "test_count": self.test_count,
            "seed": self.seed,
            "killable": self.killable,
            "repetitions": self.repetitions,
            "averages": self.averages,
        }


def _notion_averages(entries: list[dict], a_killable: int, b_killable: int) -> dict:
    avg = {
        "selected_a": fmean(len(e["selected_a"]) for e in entries),
        "selected_b": fmean(len(e["selected_b"]) for e in entries),
        "only_a": fmean(e["only_a"] for e in entries),
        "only_b": fmean(e["only_b"] for e in entries),
        "both": fmean(e["both"] for e in entries),
        "a_killed_by_b": fmean(e["a_killed_by_b"] for e in entries),
        "b_killed_by_a": fmean(e["b_killed_by_a"] for e in entries),
    }
    avg["a_score_by_b"] = None if a_killable == 0 else avg["a_killed_by_b"] / a_killable
    avg["b_score_by_a"] = None if b_killable == 0 else avg["b_killed_by_a"] / b_killable
    return avg


def compare_approaches(
    original: ir.ModelIR,
    set_a: MutantSet,
    set_b: MutantSet,
    suite: list[TestCase],
    reqs: RequirementSet | list[Requirement] | None = None,
    repetitions: int = 5,
    tolerance: float = DEFAULT_TOLERANCE,
    seed: int | str = 0,
    jobs: int = 1,
    kernel_name: str | None = None,
    label_a: str = "A",
    label_b: str = "B",
) -> tuple[ComparisonReport, KillMatrix, KillMatrix]:
    """Select minimal suites per approach and count cross-approach kills.

    Greedy selection is deterministic, so each repetition re-runs it
    under a seeded shuffle of the tie-breaking order; everything else
    is fixed.  Returns the report plus both kill matrices.
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    matrix_a = compute_kill_matrix(original, set_a, suite, reqs, tolerance, kernel_name, jobs)
    matrix_b = compute_kill_matrix(original, set_b, suite, reqs, tolerance, kernel_name, jobs)

    entries: list[dict] = []
    killable = {}
    for notion in NOTIONS:
        ka = matrix_a.killable(notion)
        kb = matrix_b.killable(notion)
        killable[notion] = {label_a: len(ka), label_b: len(kb)}
        for r in range(repetitions):
            rng = random.Random(f"{seed}:{notion}:{r}")
            order = rng.sample(range(len(suite)), len(suite))
            sel_a = select_minimal_tests(matrix_a, notion, order)
            sel_b = select_minimal_tests(matrix_b, notion, order)
            both = set(sel_a) & set(sel_b)
            a_killed_by_b = matrix_a.kills_of_tests(notion, sel_b)
            b_killed_by_a = matrix_b.kills_of_tests(notion, sel_a)
            entries.append(
                {
                    "notion": notion,
                    "rep": r,
                    "selected_a": sel_a,
                    "selected_b": sel_b,
                    "only_a": len(set(sel_a) - both),
                    "only_b": len(set(sel_b) - both),
                    "both": len(both),
                    "a_killable": len(ka),
                    "a_killed_by_b": len(a_killed_by_b),
                    "b_killable": len(kb),
                    "b_killed_by_a": len(b_killed_by_a),
                }
            )

    averages = {
        notion: _notion_averages(
            [e for e in entries if e["notion"] == notion],
            killable[notion][label_a],
            killable[notion][label_b],
        )
        for notion in NOTIONS
    }
    report = ComparisonReport(
        label_a=label_a,
        label_b=label_b,
        test_count=len(suite),
        repetitions=entries,
        averages=averages,
        killable=killable,
        seed=seed,
    )
    return report, matrix_a, matrix_b


def render_comparison_text(report: ComparisonReport) -> str:
    """Plain-text cross-kill table, one section per kill notion."""
    a, b = report.label_a, report.label_b
    lines = [
        f"Cross-approach comparison: {a} vs {b} "
        f"({report.test_count} reference tests, {len(report.repetitions) // len(NOTIONS)} repetitions)"
    ]
    for notion in NOTIONS:
        avg = report.averages[notion]
        ka = report.killable[notion][a]
        kb = report.killable[notion][b]
        lines.append(f"[{notion}]")
        lines.append(
            f"  selected tests (avg): {a} {avg['selected_a']:.1f}, {b} {avg['selected_b']:.1f} "
            f"(only-{a} {avg['only_a']:.1f}, only-{b} {avg['only_b']:.1f}, shared {avg['both']:.1f})"
        )
        not_a = ka - avg["a_killed_by_b"]
        not_b = kb - avg["b_killed_by_a"]
        lines.append(
            f"  {a} mutants: {ka} killable; killed by {b}-selected tests {avg['a_killed_by_b']:.1f} "
            f"({score_text(avg['a_score_by_b'])}), not killed {not_a:.1f}"
        )
        lines.append(
            f"  {b} mutants: {kb} killable; killed by {a}-selected tests {avg['b_killed_by_a']:.1f} "
            f"({score_text(avg['b_score_by_a'])}), not killed {not_b:.1f}"
        )
    return "\n".join(lines) + "\n"


def write_comparison(report: ComparisonReport, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "comparison.json").write_text(
        json.dumps(report.to_json_dict(), indent=2) + "\n", encoding="utf-8"
    )
    (directory / "comparison.txt").write_text(render_comparison_text(report), encoding="utf-8")
