"""Command-line entry point.

One binary, nine subcommands: convert, corpus, mask, mutate,
simulate, kill-matrix, select-tests, experiment, classify.  Every
command is deterministic given its config and seed, and every command
that creates an output directory drops the effective config there as
config.json.

Exit codes: 0 success, 1 user/input error, 2 predictor unreachable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, harness, ir, mutgen
from .errors import BlockmutError, PredictorUnavailable, ProtocolError, SchemaError
from .ingest import (
    build_corpus,
    iter_model_files,
    load_model_file,
    parse_model,
    read_corpus,
    write_corpus,
)
from .masking import DEFAULT_CONTEXT_WINDOW, enumerate_sites, mask, site_for
from .predictor import OfflinePredictor, RemotePredictor
from .reqmon import load_requirements
from .sim import (
    ConstantSignal,
    TestCase,
    available_kernels,
    export_trace_csv,
    load_suite,
    save_suite,
    simulate,
)


@dataclass
class RunConfig:
    """Experiment settings; JSON config file first, CLI flags win."""

    models: list[str] = field(default_factory=list)
    requirements: dict[str, str] = field(default_factory=dict)
    predictor: str = "offline"
    corpus: str | None = None
    k: int = 3
    context_window: int = DEFAULT_CONTEXT_WINDOW
    suite_size: int = harness.DEFAULT_SUITE_SIZE
    duration_steps: int = 100
    candidates_per_pick: int = harness.DEFAULT_CANDIDATES
    value_low: float = 0.0
    value_high: float = 2.0
    tolerance: float = harness.DEFAULT_TOLERANCE
    seed: int = 0
    repetitions: int = 5
    jobs: int = 1
    kernel: str | None = None
    output_dir: str = "experiment-out"

    @staticmethod
    def from_file(path: str | Path) -> "RunConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise SchemaError("config file must hold a JSON object")
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise SchemaError(f"unknown config keys: {', '.join(unknown)}")
        return RunConfig(**doc)

    def apply_overrides(self, args: argparse.Namespace) -> None:
        for f in dataclasses.fields(self):
            value = getattr(args, f.name, None)
            if value is not None:
                setattr(self, f.name, value)

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)


def _echo_config(directory: Path, command: str, payload: dict) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, **payload}
    (directory / "config.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _make_offline_predictor(corpus_path: str | None, models: list[ir.ModelIR]) -> OfflinePredictor:
    predictor = OfflinePredictor()
    if corpus_path:
        predictor.fit_corpus(read_corpus(corpus_path))
    else:
        predictor.fit_models(models)
    return predictor


def _make_predictor(endpoint: str, corpus_path: str | None, models: list[ir.ModelIR]):
    if endpoint == "offline":
        return _make_offline_predictor(corpus_path, models)
    return RemotePredictor(endpoint)


def _requirements_for(model_path: Path, overrides: dict[str, str]):
    stem = model_path.stem
    if stem in overrides:
        return load_requirements(overrides[stem])
    sibling = model_path.with_name(f"{stem}.reqs.json")
    if sibling.exists():
        return load_requirements(sibling)
    return None


def cmd_convert(args: argparse.Namespace) -> int:
    source = Path(args.input).read_text(encoding="utf-8")
    fmt = args.format
    if fmt == "auto":
        fmt = "xml" if Path(args.input).suffix.lower() == ".xml" else "json"
    warn_sink: list[str] = []
    model = parse_model(source, fmt, warnings=warn_sink)
    for w in warn_sink:
        print(f"warning: {w}", file=sys.stderr)
    Path(args.output).write_text(ir.dump_json(model), encoding="utf-8")
    print(f"wrote {args.output} ({len(model.blocks)} blocks)")
    return 0


def cmd_corpus(args: argparse.Namespace) -> int:
    paths = iter_model_files(args.models)
    models = [load_model_file(p) for p in paths]
    records = build_corpus(models, mask_rate=args.mask_rate, seed=args.seed)
    write_corpus(records, args.output)
    print(f"wrote {args.output} ({len(records)} records from {len(models)} models)")
    return 0


def cmd_mask(args: argparse.Namespace) -> int:
    model = load_model_file(args.model)
    if args.block is None or args.key is None:
        for site in enumerate_sites(model, include_names=args.include_names):
            print(f"{site.block_id}\t{site.property_key}\t{site.original.canonical}")
        return 0
    site = site_for(model, args.block, args.key)
    seq = mask(model, site, context_window=args.context_window, mask_token=args.mask_token)
    if args.output:
        Path(args.output).write_text(seq.text + "\n", encoding="utf-8")
    else:
        print(seq.text)
    return 0


def _mutate_one_mode(
    model: ir.ModelIR, mode: str, args: argparse.Namespace, outdir: Path
) -> mutgen.MutantSet:
    if mode == "mlm":
        predictor = _make_predictor(args.predictor, args.corpus, [model])
        ms = mutgen.generate_mlm(
            model, predictor, k=args.k, context_window=args.context_window
        )
    else:
        ms = mutgen.generate_operators(model)
    mutgen.write_mutant_set(ms, outdir / f"mutants_{mode}.json")
    if args.emit_models:
        mutgen.write_mutant_models(ms, model, outdir / f"models_{mode}")
    s = ms.stats
    print(
        f"{mode}: {len(ms.mutants)} mutants "
        f"(generated {s['generated']}, identical {s['discarded_identical']}, "
        f"uncompilable {s['discarded_uncompilable']})"
    )
    return ms


def cmd_mutate(args: argparse.Namespace) -> int:
    if args.k < 1:
        raise SchemaError(f"k must be >= 1, got {args.k}")
    model = load_model_file(args.model)
    outdir = Path(args.output_dir)
    _echo_config(
        outdir,
        "mutate",
        {
            "model": str(args.model),
            "mode": args.mode,
            "predictor": args.predictor,
            "corpus": args.corpus,
            "k": args.k,
            "context_window": args.context_window,
            "emit_models": bool(args.emit_models),
        },
    )
    modes = ["mlm", "operators"] if args.mode == "both" else [args.mode]
    for mode in modes:
        _mutate_one_mode(model, mode, args, outdir)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    model = load_model_file(args.model)
    if args.suite:
        suite = load_suite(args.suite)
        wanted = [t for t in suite if args.test_id in (None, t.id)]
        if not wanted:
            raise SchemaError(f"no test {args.test_id!r} in {args.suite}")
        test = wanted[0]
    else:
        inports = sorted(b.id for b in model.blocks if b.block_type == ir.INPORT)
        test = TestCase(
            id="adhoc",
            duration_steps=args.steps,
            inputs={bid: ConstantSignal(args.value) for bid in inports},
        )
    record = tuple(s for s in (args.record or "").split(",") if s)
    trace = simulate(model, test, record=record, kernel=_kernel_or_none(args.kernel))
    export_trace_csv(trace, args.output)
    if trace.aborted:
        f = trace.fault
        print(f"aborted: {f.kind} at step {f.step} (block {f.block})")
    print(f"wrote {args.output} ({trace.length} steps, {len(trace.signals)} signals)")
    return 0


def _kernel_or_none(name: str | None):
    if name is None:
        return None
    kernels = available_kernels()
    if name not in kernels:
        raise SchemaError(f"unknown kernel {name!r}; available: {', '.join(sorted(kernels))}")
    return kernels[name]


def cmd_kill_matrix(args: argparse.Namespace) -> int:
    model = load_model_file(args.model)
    ms = mutgen.read_mutant_set(args.mutants, model)
    suite = load_suite(args.suite)
    reqs = load_requirements(args.requirements) if args.requirements else None
    matrix = harness.compute_kill_matrix(
        model, ms, suite, reqs,
        tolerance=args.tolerance, kernel_name=args.kernel, jobs=args.jobs,
    )
    outdir = Path(args.output_dir)
    _echo_config(
        outdir,
        "kill-matrix",
        {
            "model": str(args.model),
            "mutants": str(args.mutants),
            "suite": str(args.suite),
            "requirements": str(args.requirements) if args.requirements else None,
            "tolerance": args.tolerance,
            "jobs": args.jobs,
            "kernel": args.kernel,
        },
    )
    (outdir / "matrix.json").write_text(
        json.dumps(matrix.to_json_dict(), indent=2) + "\n", encoding="utf-8"
    )
    for notion in harness.NOTIONS:
        harness.export_kill_matrix_csv(matrix, notion, outdir / f"matrix_{notion}.csv")
    for notion in harness.NOTIONS:
        killable = len(matrix.killable(notion))
        print(f"{notion}: {killable}/{len(matrix.mutants)} mutants killable")
    return 0


def _matrix_from_json(path: str | Path) -> harness.KillMatrix:
    import numpy as np

    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return harness.KillMatrix(
        tests=list(doc["tests"]),
        mutants=list(doc["mutants"]),
        classical=np.asarray(doc["classical"], dtype=bool).reshape(
            len(doc["tests"]), len(doc["mutants"])
        ),
        req_aware=np.asarray(doc["req_aware"], dtype=bool).reshape(
            len(doc["tests"]), len(doc["mutants"])
        ),
        excluded_pairs=[tuple(p) for p in doc.get("excluded_pairs", [])],
    )


def cmd_select_tests(args: argparse.Namespace) -> int:
    matrix = _matrix_from_json(args.matrix)
    notions = list(harness.NOTIONS) if args.notion == "both" else [args.notion]
    selection = {}
    for notion in notions:
        selected = harness.select_minimal_tests(matrix, notion)
        killable = len(matrix.killable(notion))
        selection[notion] = {"selected": selected, "killable": killable}
        print(f"{notion}: {len(selected)} tests cover {killable} killable mutants: "
              + (", ".join(selected) if selected else "(none)"))
    if args.output:
        Path(args.output).write_text(json.dumps(selection, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    model = load_model_file(args.model)
    ms = mutgen.read_mutant_set(args.mutants, model)
    counts = ms.pattern_counts()
    for pattern, count in counts.items():
        print(f"{count:5d}  {pattern}")
    if args.output:
        Path(args.output).write_text(json.dumps(counts, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    cfg.apply_overrides(args)
    if not cfg.models:
        raise SchemaError("no models configured; pass --models or a config file")
    if cfg.k < 1:
        raise SchemaError(f"k must be >= 1, got {cfg.k}")

    model_paths: list[Path] = []
    for entry in cfg.models:
        p = Path(entry)
        if p.is_dir():
            model_paths.extend(iter_model_files(p))
        elif not p.name.lower().endswith(".reqs.json"):
            model_paths.append(p)
    cfg.models = [str(p) for p in model_paths]
    models = [load_model_file(p) for p in model_paths]
    outdir = Path(cfg.output_dir)
    _echo_config(outdir, "experiment", cfg.to_json_dict())

    if cfg.predictor == "offline":
        predictor = _make_offline_predictor(cfg.corpus, models)
    else:
        predictor = RemotePredictor(cfg.predictor)

    for path, model in zip(model_paths, models):
        mdir = outdir / model.name
        mdir.mkdir(parents=True, exist_ok=True)
        reqs = _requirements_for(path, cfg.requirements)

        suite = harness.generate_reference_suite(
            model,
            size=cfg.suite_size,
            candidates_per_pick=cfg.candidates_per_pick,
            seed=cfg.seed,
            duration_steps=cfg.duration_steps,
            value_range=(cfg.value_low, cfg.value_high),
        )
        save_suite(suite, mdir / "suite.json")

        set_mlm = mutgen.generate_mlm(model, predictor, k=cfg.k, context_window=cfg.context_window)
        set_ops = mutgen.generate_operators(model)
        mutgen.write_mutant_set(set_mlm, mdir / "mutants_mlm.json")
        mutgen.write_mutant_set(set_ops, mdir / "mutants_operators.json")

        report, matrix_mlm, matrix_ops = harness.compare_approaches(
            model,
            set_mlm,
            set_ops,
            suite,
            reqs,
            repetitions=cfg.repetitions,
            tolerance=cfg.tolerance,
            seed=cfg.seed,
            jobs=cfg.jobs,
            kernel_name=cfg.kernel,
            label_a="mlm",
            label_b="operators",
        )
        for label, matrix in (("mlm", matrix_mlm), ("operators", matrix_ops)):
            (mdir / f"matrix_{label}.json").write_text(
                json.dumps(matrix.to_json_dict(), indent=2) + "\n", encoding="utf-8"
            )
            for notion in harness.NOTIONS:
                harness.export_kill_matrix_csv(matrix, notion, mdir / f"matrix_{label}_{notion}.csv")
        harness.write_comparison(report, mdir)
        print(f"[{model.name}] mlm {len(set_mlm.mutants)} mutants, "
              f"operators {len(set_ops.mutants)} mutants")
        for line in harness.render_comparison_text(report).splitlines():
            print(f"[{model.name}] {line}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockmut",
        description="Mutation testing for block-diagram models with masked-value prediction.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a model file to canonical IR JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=["auto", "xml", "json"], default="auto")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("corpus", help="build a masked-token training corpus from a model dir")
    p.add_argument("--models", required=True, help="directory of .json/.xml models")
    p.add_argument("--output", required=True)
    p.add_argument("--mask-rate", type=float, default=0.15, dest="mask_rate")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("mask", help="list mask sites or print one masked sequence")
    p.add_argument("--model", required=True)
    p.add_argument("--block")
    p.add_argument("--key")
    p.add_argument("--context-window", type=int, default=DEFAULT_CONTEXT_WINDOW,
                   dest="context_window")
    p.add_argument("--mask-token", default="<MASK>", dest="mask_token")
    p.add_argument("--include-names", action="store_true", dest="include_names")
    p.add_argument("--output")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("mutate", help="generate mutants for one model")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=["mlm", "operators", "both"], default="both")
    p.add_argument("--predictor", default="offline", help='"offline" or a service URL')
    p.add_argument("--corpus", help="corpus JSONL to fit the offline predictor on")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--context-window", type=int, default=DEFAULT_CONTEXT_WINDOW,
                   dest="context_window")
    p.add_argument("--emit-models", action="store_true", dest="emit_models")
    p.add_argument("--output-dir", required=True, dest="output_dir")
    p.set_defaults(func=cmd_mutate)

    p = sub.add_parser("simulate", help="run one test case and export the trace CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--suite", help="suite JSON; defaults to a constant-input ad-hoc test")
    p.add_argument("--test-id", dest="test_id")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--value", type=float, default=1.0)
    p.add_argument("--record", help="comma-separated extra block ids to record")
    p.add_argument("--kernel", choices=["python", "compiled"])
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("kill-matrix", help="compute kill matrices for stored mutants")
    p.add_argument("--model", required=True)
    p.add_argument("--mutants", required=True)
    p.add_argument("--suite", required=True)
    p.add_argument("--requirements")
    p.add_argument("--tolerance", type=float, default=harness.DEFAULT_TOLERANCE)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--kernel", choices=["python", "compiled"])
    p.add_argument("--output-dir", required=True, dest="output_dir")
    p.set_defaults(func=cmd_kill_matrix)

    p = sub.add_parser("select-tests", help="greedy minimal test selection from a matrix")
    p.add_argument("--matrix", required=True, help="matrix.json from kill-matrix")
    p.add_argument("--notion", choices=["classical", "req_aware", "both"], default="both")
    p.add_argument("--output")
    p.set_defaults(func=cmd_select_tests)

    p = sub.add_parser("experiment", help="full comparison run over configured models")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--models", nargs="+", default=None)
    p.add_argument("--predictor", default=None)
    p.add_argument("--corpus", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--context-window", type=int, default=None, dest="context_window")
    p.add_argument("--suite-size", type=int, default=None, dest="suite_size")
    p.add_argument("--duration-steps", type=int, default=None, dest="duration_steps")
    p.add_argument("--candidates-per-pick", type=int, default=None, dest="candidates_per_pick")
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--kernel", choices=["python", "compiled"], default=None)
    p.add_argument("--output-dir", default=None, dest="output_dir")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("classify", help="pattern counts for a stored mutant set")
    p.add_argument("--model", required=True)
    p.add_argument("--mutants", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_classify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (PredictorUnavailable, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BlockmutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
