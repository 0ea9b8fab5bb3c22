"""Mutant generation: operator catalog, MLM path, classification, persistence."""

import pytest

from blockmut import ir
from blockmut.errors import PredictorUnavailable, SchemaError
from blockmut.fixtures import _block, _wire, integrator, two_tank
from blockmut.ingest import parse_model
from blockmut.masking import MASK_TOKEN
from blockmut.mutgen import (
    ALL_PATTERNS,
    PATTERN_CONST_GAIN,
    PATTERN_DATA_TYPES,
    PATTERN_GOTO_FROM,
    PATTERN_INIT_SAMPLE,
    PATTERN_OPERATORS,
    PATTERN_OVERFLOW,
    PATTERN_SF_ACTIONS,
    PATTERN_SF_CONDITIONS,
    PATTERN_SF_KEYWORDS,
    PATTERN_SF_VARIABLES,
    UNCLASSIFIED,
    MutantSet,
    _sum_sign_variants,
    classify,
    classify_delta,
    compile_check,
    generate_mlm,
    generate_operators,
    read_mutant_set,
    write_mutant_models,
    write_mutant_set,
)
from blockmut.predictor import Prediction


def _model(name, blocks, wires, sample_time=1.0):
    return ir.ModelIR(name=name, sample_time=sample_time, blocks=blocks, connections=wires)


def _stats(ms: MutantSet) -> tuple[int, int, int]:
    return (
        ms.stats["generated"],
        ms.stats["discarded_identical"],
        ms.stats["discarded_uncompilable"],
    )


def _by_key(ms: MutantSet, key: str):
    return [m for m in ms.mutants if m.site.property_key == key]


class TestOperatorCatalog:
    def test_constant_perturbations_deduplicate(self):
        # 0.5: negate and minus-one both give -0.5; the duplicate is
        # skipped before any counter moves
        m = _model("one", [_block("c", "Constant", Value=0.5), _block("y", "Outport")],
                   _wire(("c", "y", 0)))
        ms = generate_operators(m)
        assert {q.replacement.canonical for q in ms.mutants} == {"-0.5", "1.5", "5.0"}
        assert _stats(ms) == (3, 0, 0)

    def test_zero_negation_is_identical(self):
        # -0.0 canonicalizes to 0.0, as does 0.0 * 10
        m = _model("zero", [_block("c", "Constant", Value=0.0), _block("y", "Outport")],
                   _wire(("c", "y", 0)))
        ms = generate_operators(m)
        assert {q.replacement.canonical for q in ms.mutants} == {"1.0", "-1.0"}
        assert _stats(ms) == (3, 1, 0)

    def test_sum_signs_enumerated_fully(self):
        m = _model("sum", [
            _block("a", "Inport"), _block("b", "Inport"),
            _block("s", "Sum", Signs="+-"), _block("y", "Outport"),
        ], _wire(("a", "s", 0), ("b", "s", 1), ("s", "y", 0)))
        ms = generate_operators(m)
        assert {q.replacement.canonical for q in ms.mutants} == {"--", "++", "-+"}
        assert _stats(ms) == (3, 0, 0)

    def test_sign_variant_counts(self):
        assert set(_sum_sign_variants("+-")) == {"--", "++", "-+"}
        assert len(_sum_sign_variants("+-+-+")) == 31  # 2^5 - 1, full enumeration
        long = _sum_sign_variants("++++++")
        assert len(long) == 6  # beyond five inputs, one flip per position
        assert all(sum(a != b for a, b in zip(v, "++++++")) == 1 for v in long)

    def test_relational_operator_substitutions(self):
        m = _model("rel", [
            _block("a", "Inport"), _block("b", "Inport"),
            _block("r", "RelationalOperator", Operator="<"), _block("y", "Outport"),
        ], _wire(("a", "r", 0), ("b", "r", 1), ("r", "y", 0)))
        ms = generate_operators(m)
        assert {q.replacement.canonical for q in ms.mutants} == {"==", "~=", "<=", ">", ">="}
        assert _stats(ms) == (6, 1, 0)

    def test_arity_changing_logical_swap_fails_compile(self):
        m = _model("log", [
            _block("a", "Inport"), _block("b", "Inport"),
            _block("g", "LogicalOperator", Operator="AND"), _block("y", "Outport"),
        ], _wire(("a", "g", 0), ("b", "g", 1), ("g", "y", 0)))
        ms = generate_operators(m)
        # NOT is unary; with two wired inputs it cannot compile
        assert {q.replacement.canonical for q in ms.mutants} == {"OR", "XOR", "NAND", "NOR"}
        assert _stats(ms) == (6, 1, 1)

    def test_tag_retargeting_only_survives_on_readers(self):
        m = _model("tags", [
            _block("c", "Constant", Value=1.0),
            _block("c2", "Constant", Value=2.0),
            _block("g1", "Goto", GotoTag="A"),
            _block("g2", "Goto", GotoTag="B"),
            _block("f1", "From", GotoTag="A"),
            _block("y", "Outport"),
        ], _wire(("c", "g1", 0), ("c2", "g2", 0), ("f1", "y", 0)))
        ms = generate_operators(m)
        tag_mutants = _by_key(ms, "GotoTag")
        # moving the reader works; moving either writer breaks routing
        assert len(tag_mutants) == 1
        assert tag_mutants[0].site.block_id == "f1"
        assert tag_mutants[0].replacement.canonical == "B"
        assert tag_mutants[0].pattern == PATTERN_GOTO_FROM
        assert _stats(ms) == (14, 3, 2)

    def test_init_sample_and_dtype_and_overflow_rules(self):
        m = _model("mix", [
            _block("u", "Inport"),
            _block("d", "UnitDelay", InitialCondition=0.5),
            _block("g", "Gain", Gain=1.0, OutDataTypeStr="double",
                   SaturateOnIntegerOverflow="off"),
            _block("y", "Outport"),
        ], _wire(("u", "d", 0), ("d", "g", 0), ("g", "y", 0)))
        ms = generate_operators(m)
        assert {q.replacement.canonical for q in _by_key(ms, "InitialCondition")} == {"0.0", "1.0"}
        assert {q.replacement.canonical for q in _by_key(ms, "OutDataTypeStr")} == {"single", "int32"}
        assert {q.replacement.canonical for q in _by_key(ms, "SaturateOnIntegerOverflow")} == {"on"}
        # Gain 1.0: negate -1, +1 gives 2, -1 gives 0, x10 gives 10
        assert {q.replacement.canonical for q in _by_key(ms, "Gain")} == {"-1.0", "2.0", "0.0", "10.0"}

    def test_chart_expression_substitutions(self):
        m = _model("sf", [
            _block("u", "Inport"),
            _block("chart", "StateflowStub", Condition="after(3, u > 0)"),
            _block("y", "Outport"),
        ], _wire(("u", "chart", 0), ("u", "y", 0)))
        ms = generate_operators(m)
        texts = {q.replacement.canonical for q in _by_key(ms, "Condition")}
        assert texts == {
            "before(3, u > 0)", "at(3, u > 0)",
            "after(3, u == 0)", "after(3, u ~= 0)", "after(3, u < 0)",
            "after(3, u <= 0)", "after(3, u >= 0)",
        }
        counts = ms.pattern_counts()
        assert counts[PATTERN_SF_KEYWORDS] == 2
        assert counts[PATTERN_SF_CONDITIONS] == 5

    def test_ids_are_unique_and_sequenced(self):
        ms = generate_operators(two_tank())
        ids = [m.id for m in ms.mutants]
        assert len(set(ids)) == len(ids)
        assert ids[0] == "two_tank-op-0000"
        assert all(m.base_model == "two_tank" for m in ms.mutants)

    def test_every_mutant_validates_and_smokes(self):
        base = two_tank()
        ms = generate_operators(base)
        assert ms.mutants, "catalog produced nothing"
        for m in ms.mutants:
            assert compile_check(m.materialize(base)), m.id

    def test_stats_invariant_on_benchmarks(self):
        for base in (two_tank(), integrator()):
            ms = generate_operators(base)
            g, i, u = _stats(ms)
            assert g == len(ms.mutants) + i + u
            assert ms.compilable_fraction == len(ms.mutants) / (g - i)


class TestClassification:
    @pytest.mark.parametrize("block_type,key,orig,repl,expect", [
        ("Constant", "Value", "2.0", "3.0", PATTERN_CONST_GAIN),
        ("Gain", "Gain", "1.0", "-1.0", PATTERN_CONST_GAIN),
        ("Switch", "Threshold", "0.5", "5.0", PATTERN_CONST_GAIN),
        ("Saturation", "UpperLimit", "5.0", "50.0", PATTERN_CONST_GAIN),
        ("Gain", "OutDataTypeStr", "double", "int32", PATTERN_DATA_TYPES),
        ("Gain", "SaturateOnIntegerOverflow", "off", "on", PATTERN_OVERFLOW),
        ("UnitDelay", "InitialCondition", "0.0", "1.0", PATTERN_INIT_SAMPLE),
        ("UnitDelay", "SampleTime", "0.1", "0.2", PATTERN_INIT_SAMPLE),
        ("From", "GotoTag", "A", "B", PATTERN_GOTO_FROM),
        ("RelationalOperator", "Operator", "<", ">=", PATTERN_OPERATORS),
        ("Sum", "Signs", "++", "+-", PATTERN_OPERATORS),
        ("Constant", "Mystery", "a", "b", UNCLASSIFIED),
    ])
    def test_property_delta_labels(self, block_type, key, orig, repl, expect):
        o = ir.coerce_property(block_type, key, orig)
        r = ir.coerce_property(block_type, key, repl)
        assert classify_delta(block_type, key, o, r) == expect

    def test_renamed_goto_block_counts_as_routing(self):
        o = ir.PropertyValue("text", "old")
        r = ir.PropertyValue("text", "new")
        assert classify_delta("Goto", ir.NAME_KEY, o, r) == PATTERN_GOTO_FROM
        assert classify_delta("Gain", ir.NAME_KEY, o, r) == UNCLASSIFIED

    @pytest.mark.parametrize("key,orig,repl,expect", [
        ("Condition", "after(3, u > 0)", "before(3, u > 0)", PATTERN_SF_KEYWORDS),
        ("TransitionCondition", "before(x) & after(y)", "after(x) & before(y)", PATTERN_SF_KEYWORDS),
        ("TransitionCondition", "level > 5", "level >= 5", PATTERN_SF_CONDITIONS),
        ("TransitionCondition", "level > 5", "mode > 5", PATTERN_SF_VARIABLES),
        ("Action", "y = y + 1;", "mode = mode + 1;", PATTERN_SF_VARIABLES),
        ("Action", "y = y + 1;", "y = y + 2;", PATTERN_SF_ACTIONS),
        ("EntryAction", "y = 0;", "y = y + 1;", PATTERN_SF_ACTIONS),
        ("Condition", "u > 0", "u >= 1", PATTERN_SF_CONDITIONS),
    ])
    def test_chart_delta_labels(self, key, orig, repl, expect):
        o = ir.PropertyValue("text", orig)
        r = ir.PropertyValue("text", repl)
        assert classify_delta("StateflowStub", key, o, r) == expect

    def test_label_vocabulary_is_closed(self):
        assert len(ALL_PATTERNS) == 10 and UNCLASSIFIED not in ALL_PATTERNS
        for base in (two_tank(), integrator()):
            for m in generate_operators(base).mutants:
                assert classify(m) == m.pattern
                assert m.pattern in ALL_PATTERNS


class _ScriptedPredictor:
    """Returns a fixed token list for every site."""

    mask_token = MASK_TOKEN

    def __init__(self, tokens, fail_after=None):
        self.tokens = tokens
        self.fail_after = fail_after
        self.calls = 0

    def predict(self, seq, top_k):
        if self.fail_after is not None and self.calls >= self.fail_after:
            raise PredictorUnavailable("scripted outage")
        self.calls += 1
        return [Prediction(t, 1.0 / (i + 2)) for i, t in enumerate(self.tokens[:top_k])]


class TestMlmGeneration:
    def _one_site_model(self):
        return _model("m1", [_block("c", "Constant", Value=2.0), _block("y", "Outport")],
                      _wire(("c", "y", 0)))

    def test_identical_prediction_discarded(self):
        ms = generate_mlm(self._one_site_model(), _ScriptedPredictor(["2.0", "3.0"]), k=1)
        assert [m.replacement.canonical for m in ms.mutants] == ["3.0"]
        assert _stats(ms) == (2, 1, 0)
        assert ms.compilable_fraction == 1.0

    def test_k_limits_kept_mutants_per_site(self):
        ms = generate_mlm(self._one_site_model(), _ScriptedPredictor(["9.0", "8.0", "7.0"]), k=2)
        assert [m.replacement.canonical for m in ms.mutants] == ["9.0", "8.0"]
        assert _stats(ms) == (2, 0, 0)

    def test_provenance_records_rank_and_score(self):
        ms = generate_mlm(self._one_site_model(), _ScriptedPredictor(["9.0", "8.0"]), k=2)
        provs = [m.provenance for m in ms.mutants]
        assert [(p.kind, p.rank) for p in provs] == [("mlm", 1), ("mlm", 2)]
        assert provs[0].score > provs[1].score
        assert provs[0].to_json_dict() == {"kind": "mlm", "rank": 1, "score": 0.5}

    def test_uncompilable_prediction_counted(self):
        m = _model("m2", [
            _block("a", "Inport"), _block("b", "Inport"),
            _block("g", "LogicalOperator", Operator="AND"), _block("y", "Outport"),
        ], _wire(("a", "g", 0), ("b", "g", 1), ("g", "y", 0)))
        ms = generate_mlm(m, _ScriptedPredictor(["NOT", "OR"]), k=2)
        assert [q.replacement.canonical for q in ms.mutants] == ["OR"]
        assert _stats(ms) == (2, 0, 1)

    def test_outage_carries_partial_results(self):
        m = _model("m3", [
            _block("c", "Constant", Value=2.0),
            _block("g", "Gain", Gain=3.0),
            _block("y", "Outport"),
        ], _wire(("c", "g", 0), ("g", "y", 0)))
        with pytest.raises(PredictorUnavailable) as err:
            generate_mlm(m, _ScriptedPredictor(["42.0"], fail_after=1), k=1)
        partial = err.value.partial
        assert partial is not None and len(partial.mutants) == 1
        assert partial.mutants[0].replacement.canonical == "42.0"

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            generate_mlm(self._one_site_model(), _ScriptedPredictor(["1.0"]), k=0)

    def test_mlm_ids_tagged(self):
        ms = generate_mlm(self._one_site_model(), _ScriptedPredictor(["3.0"]), k=1)
        assert ms.mutants[0].id == "m1-mlm-0000"


class TestPersistence:
    def test_report_round_trip(self, tmp_path):
        base = two_tank()
        ms = generate_operators(base)
        path = tmp_path / "mutants.json"
        write_mutant_set(ms, path)
        back = read_mutant_set(path, base)
        assert back.base_model == ms.base_model
        assert back.stats == ms.stats
        assert [(m.id, m.site.block_id, m.site.property_key, m.replacement.canonical, m.pattern)
                for m in back.mutants] == \
               [(m.id, m.site.block_id, m.site.property_key, m.replacement.canonical, m.pattern)
                for m in ms.mutants]

    def test_report_rejects_wrong_model(self, tmp_path):
        ms = generate_operators(two_tank())
        path = tmp_path / "mutants.json"
        write_mutant_set(ms, path)
        with pytest.raises(SchemaError):
            read_mutant_set(path, integrator())

    def test_report_rejects_stale_original(self, tmp_path):
        base = two_tank()
        ms = generate_operators(base)
        path = tmp_path / "mutants.json"
        write_mutant_set(ms, path)
        drifted = ir.apply_delta(base, ms.mutants[0].site, "123456.0")
        with pytest.raises(SchemaError):
            read_mutant_set(path, drifted)

    def test_materialized_models_written_per_mutant(self, tmp_path):
        base = two_tank()
        ms = generate_operators(base)
        paths = write_mutant_models(ms, base, tmp_path / "models")
        assert [p.name for p in paths] == [f"{m.id}.json" for m in ms.mutants]
        reread = parse_model(paths[0].read_text(encoding="utf-8"), "json")
        assert reread.name == base.name
        assert ir.render_text(reread) != ir.render_text(base)
