import random

import pytest

from splac import featexpr as fx
from splac.analyses import (
    AfterActionSafe,
    HasLabel,
    NamePrefix,
    Response,
    Trace,
    Verdict,
    check_after_action_fts,
    check_after_action_lts,
    check_response_fts,
    check_response_lts,
    parse_query,
    parse_spec,
    query_fts,
    query_lts,
    query_to_text,
    reach_fts,
    spec_to_text,
)
from splac.errors import SchemaError
from splac.featexpr import TRUE, parse
from splac.plmodel import LTS, State, Transition, derive_fts, derive_var_set

from conftest import build_fts, make_pump_fts
from oracles import oracle_after_action_ok, oracle_query, oracle_response_ok, random_fts


def lts(states, initial, transitions):
    return LTS(
        tuple(State(sid, frozenset(labels)) for sid, labels in states),
        initial,
        tuple(Transition(*t) for t in transitions),
    )


def validate_trace(trace: Trace, model: LTS, expect_deadlock_end: bool) -> None:
    edges = {(t.src, t.dst) for t in model.transitions}
    assert trace.stem and trace.stem[0] == model.initial
    for a, b in zip(trace.stem, trace.stem[1:]):
        assert (a, b) in edges
    if trace.loop:
        assert (trace.stem[-1], trace.loop[0]) in edges
        for a, b in zip(trace.loop, trace.loop[1:]):
            assert (a, b) in edges
        assert (trace.loop[-1], trace.loop[0]) in edges
    elif expect_deadlock_end:
        assert not model.successors(trace.stem[-1])


class TestQueryLTS:
    def test_unlabelled_model_matches_nothing(self, ab_fts):
        product = derive_fts(ab_fts, {"B"})
        assert query_lts(product, HasLabel("Alarm")) == []

    def test_pump_alarm_prefix(self, pump_fts):
        full = max(pump_fts.feature_model.configurations(), key=len)
        product = derive_fts(pump_fts, full)
        got = query_lts(product, NamePrefix("Alrm_"))
        assert got == sorted(oracle_query(product, NamePrefix("Alrm_")))
        assert len(got) == 3

    def test_empty_label_model(self):
        m = lts([("s0", [])], "s0", [])
        assert query_lts(m, HasLabel("x")) == []


class TestCheckResponseLTS:
    def test_deadlocked_trigger_violates(self):
        m = lts([("s0", ["T"])], "s0", [])
        verdict = check_response_lts(m, Response("T", "R"))
        assert not verdict.ok
        validate_trace(verdict.witness, m, expect_deadlock_end=True)

    def test_immediate_response_ok(self):
        m = lts(
            [("s0", ["T"]), ("s1", ["R"])],
            "s0",
            [("s0", "go", "s1"), ("s1", "stay", "s1")],
        )
        assert check_response_lts(m, Response("T", "R")).ok

    def test_pump_product_ok(self, pump_fts):
        product = derive_fts(pump_fts, {"HW", "CIR"})
        spec = Response("Alrm_DoseRateHardLimitsViolationS", "Safe")
        verdict = check_response_lts(product, spec)
        assert verdict.ok
        assert oracle_response_ok(product, spec.trigger, spec.response)

    def test_response_free_cycle_violates(self):
        m = lts(
            [("s0", ["T"]), ("s1", []), ("s2", ["R"])],
            "s0",
            [("s0", "x", "s1"), ("s1", "y", "s1"), ("s1", "z", "s2"), ("s2", "w", "s2")],
        )
        verdict = check_response_lts(m, Response("T", "R"))
        assert not verdict.ok
        assert verdict.witness.loop
        validate_trace(verdict.witness, m, expect_deadlock_end=False)

    def test_matches_oracle_on_random_products(self):
        rng = random.Random(20240811)
        for _ in range(120):
            model = random_fts(rng)
            for cfg in model.feature_model.configurations():
                product = derive_fts(model, cfg)
                got = check_response_lts(product, Response("T", "R"))
                assert got.ok == oracle_response_ok(product, "T", "R")
                if not got.ok:
                    validate_trace(got.witness, product, expect_deadlock_end=not got.witness.loop)


class TestCheckAfterActionLTS:
    def test_vacuous_without_action(self):
        m = lts([("s0", [])], "s0", [])
        assert check_after_action_lts(m, AfterActionSafe("alpha", "P")).ok

    def test_pattern_found(self):
        m = lts(
            [("s0", []), ("t", []), ("u", ["P"])],
            "s0",
            [("s0", "alpha", "t"), ("t", "beta", "u")],
        )
        verdict = check_after_action_lts(m, AfterActionSafe("alpha", "P"))
        assert not verdict.ok
        assert verdict.witness.stem == ("s0", "t", "u")

    def test_unlabelled_successor_ok(self):
        m = lts(
            [("s0", []), ("t", []), ("u", [])],
            "s0",
            [("s0", "alpha", "t"), ("t", "beta", "u")],
        )
        assert check_after_action_lts(m, AfterActionSafe("alpha", "P")).ok


class TestReachFTS:
    def test_ab_reach_expressions(self, ab_fts):
        fm = ab_fts.feature_model
        reach = reach_fts(ab_fts)
        assert fm.equivalent(reach["s0"], parse("A xor B"))
        assert fm.equivalent(reach["s1"], parse("A xor B"))
        assert fm.equivalent(reach["s2"], parse("A"))

    def test_single_state(self):
        m = build_fts(["A"], "A", [("s0", [])], "s0", [])
        assert reach_fts(m)["s0"] == parse("A")

    def test_false_inbound_unreachable(self):
        m = build_fts(
            ["A"],
            "true",
            [("s0", []), ("s1", [])],
            "s0",
            [("s0", "a", "s1", "false")],
        )
        assert reach_fts(m)["s1"] == fx.FALSE

    def test_reach_matches_derivation(self, ab_fts, pump_fts):
        for model in (ab_fts, pump_fts):
            fm = model.feature_model
            reach = reach_fts(model)
            for cfg in fm.configurations():
                product_ids = {s.id for s in derive_fts(model, cfg).states}
                for state in model.states:
                    assert fm.entails(cfg, reach[state.id]) == (state.id in product_ids)


class TestQueryFTS:
    def test_labelled_state_guard(self, ab_fts):
        labelled = build_fts(
            ["A", "B"],
            "A xor B",
            [("s0", []), ("s1", []), ("s2", ["X"])],
            "s0",
            [
                ("s0", "a", "s1", "true"),
                ("s1", "b", "s0", "B"),
                ("s1", "d", "s2", "A"),
                ("s2", "c", "s0", "A"),
            ],
        )
        result = query_fts(labelled, HasLabel("X"))
        assert result.entries == (("s2", parse("A")),)

    def test_no_match_empty(self, ab_fts):
        assert query_fts(ab_fts, HasLabel("zzz")).entries == ()

    def test_pump_alarm_guards(self, pump_fts):
        result = query_fts(pump_fts, NamePrefix("Alrm_"))
        fm = pump_fts.feature_model
        by_state = dict(result.entries)
        assert fm.equivalent(by_state["Alrm_PumpOverheatS"], TRUE)
        assert fm.equivalent(by_state["Alrm_DoseRateHardLimitsViolationS"], parse("CIR"))
        assert fm.equivalent(by_state["Alrm_WrongDrugTypeS"], parse("CDT"))

    def test_lift_correctness(self, pump_fts):
        fm = pump_fts.feature_model
        result = query_fts(pump_fts, NamePrefix("Alrm_"))
        for cfg in fm.configurations():
            derived = derive_var_set(result, cfg, fm.alphabet)
            product = set(query_lts(derive_fts(pump_fts, cfg), NamePrefix("Alrm_")))
            assert derived == product

    def test_restriction_narrows_scope(self, pump_fts):
        restricted = query_fts(pump_fts, NamePrefix("Alrm_"), parse("CIR"))
        fm = pump_fts.feature_model
        for cfg in fm.configurations(parse("CIR")):
            derived = derive_var_set(restricted, cfg, fm.alphabet)
            assert derived == set(query_lts(derive_fts(pump_fts, cfg), NamePrefix("Alrm_")))


def violation_under_b_fts():
    return build_fts(
        ["A", "B"],
        "true",
        [("s0", []), ("trig", ["T"]), ("resp", ["R"]), ("sink", [])],
        "s0",
        [
            ("s0", "go", "trig", "true"),
            ("trig", "ok", "resp", "true"),
            ("resp", "stay", "resp", "true"),
            ("trig", "bad", "sink", "B"),
        ],
    )


class TestCheckResponseFTS:
    def test_pump_all_ok(self, pump_fts):
        spec = Response("Alrm_DoseRateHardLimitsViolationS", "Safe")
        verdict = check_response_fts(pump_fts, spec)
        assert verdict.all_ok()
        assert len(verdict.cells) == 1
        fm = pump_fts.feature_model
        assert fm.equivalent(verdict.cells[0][1], fm.formula)

    def test_violation_only_under_b(self):
        model = violation_under_b_fts()
        fm = model.feature_model
        verdict = check_response_fts(model, Response("T", "R"))
        ok_cells = [g for v, g in verdict.cells if v.ok]
        bad_cells = [g for v, g in verdict.cells if not v.ok]
        assert len(ok_cells) == 1 and len(bad_cells) == 1
        assert fm.equivalent(ok_cells[0], parse("!B"))
        assert fm.equivalent(bad_cells[0], parse("B"))

    def test_restriction_partitions_only_that_region(self, ab_fts):
        verdict = check_response_fts(ab_fts, Response("T", "R"), parse("A"))
        fm = ab_fts.feature_model
        union = fx.or_all(g for _, g in verdict.cells)
        assert fx.equiv(union, fx.And(fm.formula, parse("A")), fm.alphabet)

    def test_cells_partition_scope(self):
        model = violation_under_b_fts()
        fm = model.feature_model
        verdict = check_response_fts(model, Response("T", "R"))
        assert fx.is_partition([g for _, g in verdict.cells], verdict.scope, fm.alphabet)


class TestCheckAfterActionFTS:
    def test_no_action_all_ok(self, pump_fts):
        verdict = check_after_action_fts(pump_fts, AfterActionSafe("no_such_action", "Safe"))
        assert verdict.all_ok()

    def test_pump_alarm_halts_infusion(self, pump_fts):
        spec = AfterActionSafe("dose_rate_violation", "Infusion_NormalOperationS")
        verdict = check_after_action_fts(pump_fts, spec)
        assert verdict.all_ok()

    def test_guarded_bad_pattern(self):
        model = build_fts(
            ["C"],
            "true",
            [("s0", []), ("t", []), ("u", ["P"])],
            "s0",
            [("s0", "alpha", "t", "true"), ("t", "beta", "u", "C")],
        )
        fm = model.feature_model
        verdict = check_after_action_fts(model, AfterActionSafe("alpha", "P"))
        bad = [g for v, g in verdict.cells if not v.ok]
        assert len(bad) == 1
        assert fm.equivalent(bad[0], parse("C"))


class TestLiftCorrectnessExhaustive:
    """Def-2.2 equality on fixture FTSs for every valid configuration."""

    SPECS = [
        Response("T", "R"),
        Response("Alarm", "Safe"),
        AfterActionSafe("halt", "Infusion_NormalOperationS"),
        AfterActionSafe("a", "P"),
    ]
    QUERIES = [HasLabel("Alarm"), HasLabel("T"), NamePrefix("Alrm_"), NamePrefix("s")]

    def fixtures(self, ab_fts, pump_fts):
        return [ab_fts, pump_fts, violation_under_b_fts()]

    def test_query_lift(self, ab_fts, pump_fts):
        for model in self.fixtures(ab_fts, pump_fts):
            fm = model.feature_model
            for query in self.QUERIES:
                lifted = query_fts(model, query)
                for cfg in fm.configurations():
                    assert derive_var_set(lifted, cfg, fm.alphabet) == set(
                        query_lts(derive_fts(model, cfg), query)
                    )

    def test_response_lift(self, ab_fts, pump_fts):
        for model in self.fixtures(ab_fts, pump_fts):
            fm = model.feature_model
            for spec in (s for s in self.SPECS if isinstance(s, Response)):
                lifted = check_response_fts(model, spec)
                for cfg in fm.configurations():
                    derived = lifted.derive(cfg, fm.alphabet)
                    product = check_response_lts(derive_fts(model, cfg), spec)
                    assert derived.ok == product.ok

    def test_after_action_lift(self, ab_fts, pump_fts):
        for model in self.fixtures(ab_fts, pump_fts):
            fm = model.feature_model
            for spec in (s for s in self.SPECS if isinstance(s, AfterActionSafe)):
                lifted = check_after_action_fts(model, spec)
                for cfg in fm.configurations():
                    derived = lifted.derive(cfg, fm.alphabet)
                    product = check_after_action_lts(derive_fts(model, cfg), spec)
                    assert derived.ok == product.ok

    def test_randomized_lift_with_witness_replay(self):
        rng = random.Random(7)
        for _ in range(60):
            model = random_fts(rng)
            fm = model.feature_model
            lifted = check_response_fts(model, Response("T", "R"))
            for cfg in fm.configurations():
                product = derive_fts(model, cfg)
                derived = lifted.derive(cfg, fm.alphabet)
                assert derived.ok == oracle_response_ok(product, "T", "R")
                if not derived.ok:
                    validate_trace(derived.witness, product, expect_deadlock_end=not derived.witness.loop)


class TestMiniSyntax:
    def test_parse_query(self):
        assert parse_query("label:Alarm") == HasLabel("Alarm")
        assert parse_query("prefix:Alrm_") == NamePrefix("Alrm_")
        with pytest.raises(SchemaError):
            parse_query("Alarm")

    def test_parse_spec(self):
        assert parse_spec("response Alarm => Safe") == Response("Alarm", "Safe")
        assert parse_spec("after-action halt forbid Running") == AfterActionSafe("halt", "Running")
        with pytest.raises(SchemaError):
            parse_spec("eventually Safe")

    def test_round_trip(self):
        for text in ["response Alarm => Safe", "after-action halt forbid Running"]:
            assert spec_to_text(parse_spec(text)) == text
        for text in ["label:Alarm", "prefix:Alrm_"]:
            assert query_to_text(parse_query(text)) == text
