import pytest

from splac.accore import (
    AnalysisResult,
    Decomp,
    Evd,
    Evidence,
    EvidenceLedger,
    Goal,
    Manual,
    ModelElement,
    ModelRef,
    PlainSet,
    PredicateRef,
    QueryResult,
    Strategy,
    Und,
    ac_from_json,
    ac_to_json,
    check_refinement,
    evaluate_goal,
    evidence_for_verdict,
    goal_fingerprint,
    iter_nodes,
    ledger_from_json,
    ledger_to_json,
    manual_evidence,
    node_at,
    parse_path,
    path_to_str,
    root_goal,
    supp,
)
from splac.analyses import Verdict
from splac.errors import LedgerError, ProvenanceError, SchemaError, StructureError
from splac.plmodel import ModelStore
from splac.templates import default_registry

from acfixtures import PUMP_ALARMS, build_pump_product_ac, product_lts, pump_store


def prop_goal(schema="claim", **params):
    return Goal(PredicateRef(schema, tuple(sorted(params.items()))))


class TestRootGoal:
    def test_all_constructors(self):
        g = prop_goal(text="p")
        assert root_goal(Und(g)) == g
        assert root_goal(Evd(g, "e1")) == g
        strategy = Strategy("s", Manual(reviewed=True))
        assert root_goal(Decomp(g, strategy, [Und(g)])) == g

    def test_decomp_requires_children(self):
        with pytest.raises(StructureError):
            Decomp(prop_goal(), Strategy("s", Manual()), [])


class TestFingerprints:
    def test_identical_goals_equal(self):
        a = Goal(PredicateRef("result-ok"), ModelRef("m", "old"))
        b = Goal(PredicateRef("result-ok"), ModelRef("m", "old"))
        assert goal_fingerprint(a) == goal_fingerprint(b)

    def test_version_bump_changes_digest(self):
        a = Goal(PredicateRef("response-holds", (("response", "R"), ("trigger", "T"))), ModelRef("m", "old"))
        b = Goal(PredicateRef("response-holds", (("response", "R"), ("trigger", "T"))), ModelRef("m", "new"))
        assert goal_fingerprint(a) != goal_fingerprint(b)

    def test_parameter_change_changes_digest(self):
        a = Goal(PredicateRef("response-holds", (("response", "R"), ("trigger", "T"))), ModelRef("m", "old"))
        b = Goal(PredicateRef("response-holds", (("response", "R2"), ("trigger", "T"))), ModelRef("m", "old"))
        assert goal_fingerprint(a) != goal_fingerprint(b)


class TestLedger:
    def test_dangling_evidence_raises(self):
        ledger = EvidenceLedger()
        with pytest.raises(LedgerError):
            ledger.adequate("nope", "fp")

    def test_entry_round_trip(self):
        ledger = EvidenceLedger()
        ledger.add_evidence(Evidence("e1", "manual"))
        ledger.set_adequate("e1", "fp")
        assert ledger.adequate("e1", "fp") is True
        assert ledger.adequate("e1", "other") is False
        again = ledger_from_json(ledger_to_json(ledger))
        assert again.adequate("e1", "fp") is True


class TestSupp:
    def test_undeveloped_never_supported(self):
        store, registry, ledger = ModelStore(), default_registry(), EvidenceLedger()
        assert supp(Und(prop_goal()), ledger, registry, store) is False

    def test_evidenced_prop_goal(self):
        store, registry, ledger = ModelStore(), default_registry(), EvidenceLedger()
        g = prop_goal(text="the spec is right")
        eid = manual_evidence(ledger, g)
        assert supp(Evd(g, eid), ledger, registry, store) is True

    def test_inadequate_entry_not_supported(self):
        store, registry, ledger = ModelStore(), default_registry(), EvidenceLedger()
        g = prop_goal()
        eid = manual_evidence(ledger, g, adequate=False)
        assert supp(Evd(g, eid), ledger, registry, store) is False

    def test_composed_pump_case_supported(self):
        store = pump_store()
        ac, ledger, registry = build_pump_product_ac(store)
        assert supp(ac, ledger, registry, store) is True

    def test_missing_leaf_breaks_support(self):
        store = pump_store()
        ac, ledger, registry = build_pump_product_ac(store)
        # forget one model-check result entry
        victim = node_at(ac, (1, 0, 1))
        ledger.entries.pop((victim.evidence_id, goal_fingerprint(victim.goal)))
        assert supp(ac, ledger, registry, store) is False

    def test_supp_monotone_in_ledger(self):
        store = pump_store()
        ac, ledger, registry = build_pump_product_ac(store)
        assert supp(ac, ledger, registry, store) is True
        extra = prop_goal(text="unrelated")
        manual_evidence(ledger, extra)
        assert supp(ac, ledger, registry, store) is True

    def test_supported_implies_leaves_adequate_and_refinements_sound(self):
        store = pump_store()
        ac, ledger, registry = build_pump_product_ac(store)
        assert supp(ac, ledger, registry, store)
        for _, node in iter_nodes(ac):
            if isinstance(node, Evd):
                assert ledger.adequate(node.evidence_id, goal_fingerprint(node.goal))
            if isinstance(node, Decomp):
                assert check_refinement(node.goal, node.strategy, node.children, registry, store)


class TestCheckRefinement:
    def test_manual_unreviewed_false(self):
        store, registry = ModelStore(), default_registry()
        g = prop_goal()
        assert check_refinement(g, Strategy("s", Manual(False)), [Und(g)], registry, store) is False
        assert check_refinement(g, Strategy("s", Manual(True)), [Und(g)], registry, store) is True

    def test_unknown_template_provenance_error(self):
        from splac.accore import TemplateInst

        store, registry = ModelStore(), default_registry()
        g = prop_goal()
        strategy = Strategy("s", TemplateInst("no-such-template", {}, "d"))
        with pytest.raises(ProvenanceError):
            check_refinement(g, strategy, [Und(g)], registry, store)

    def test_missing_subgoal_breaks_refinement(self):
        store = pump_store()
        ac, ledger, registry = build_pump_product_ac(store)
        enum_node = node_at(ac, (1,))
        pruned = list(enum_node.children[:-1])
        assert check_refinement(enum_node.goal, enum_node.strategy, pruned, registry, store) is False


class TestEvaluateGoal:
    def test_result_ok(self):
        good = Goal(
            PredicateRef("result-ok"),
            AnalysisResult("response-check", ModelRef("m", "old"), "response T => R", Verdict.passed()),
        )
        assert evaluate_goal(good, ModelStore()) is True

    def test_element_response(self):
        store = pump_store()
        goal = Goal(
            PredicateRef("element-response-safe", (("response", "Safe"),)),
            ModelElement(ModelRef("pump", "old"), PUMP_ALARMS[0]),
        )
        assert evaluate_goal(goal, store) is True

    def test_element_response_fails_on_deadlocked_alarm(self):
        store = ModelStore()
        store.register("pump", "old", product_lts(PUMP_ALARMS, deadlock_alarm=PUMP_ALARMS[1]))
        goal = Goal(
            PredicateRef("element-response-safe", (("response", "Safe"),)),
            ModelElement(ModelRef("pump", "old"), PUMP_ALARMS[1]),
        )
        assert evaluate_goal(goal, store) is False

    def test_forall_over_query_result(self):
        store = pump_store()
        goal = Goal(
            PredicateRef("forall", (("element_response", "Safe"),)),
            QueryResult(ModelRef("pump", "old"), "prefix:Alrm_", PUMP_ALARMS),
        )
        assert evaluate_goal(goal, store) is True

    def test_prop_goal_not_executable(self):
        with pytest.raises(SchemaError):
            evaluate_goal(prop_goal(), ModelStore())

    def test_abstract_set_not_executable(self):
        goal = Goal(PredicateRef("forall", (("element_response", "Safe"),)), PlainSet(("x",)))
        with pytest.raises(SchemaError):
            evaluate_goal(goal, ModelStore())


class TestSerialization:
    def test_ac_json_round_trip(self):
        store = pump_store()
        ac, _, _ = build_pump_product_ac(store)
        data = ac_to_json(ac)
        again = ac_from_json(data)
        assert ac_to_json(again) == data

    def test_paths(self):
        assert parse_path("") == ()
        assert parse_path("0/2/1") == (0, 2, 1)
        assert path_to_str((0, 2, 1)) == "0/2/1"
        with pytest.raises(StructureError):
            parse_path("a/b")


class TestEvidenceHelpers:
    def test_verdict_evidence_adequate_iff_ok(self):
        ledger = EvidenceLedger()
        ok_goal = Goal(
            PredicateRef("result-ok"),
            AnalysisResult("response-check", ModelRef("m", "old"), "response T => R", Verdict.passed()),
        )
        eid = evidence_for_verdict(ledger, ok_goal)
        assert ledger.adequate(eid, goal_fingerprint(ok_goal)) is True

        from splac.analyses import Trace

        bad_goal = Goal(
            PredicateRef("result-ok"),
            AnalysisResult(
                "response-check",
                ModelRef("m", "old"),
                "response T => R",
                Verdict.violation(Trace(("s0",), ())),
            ),
        )
        eid2 = evidence_for_verdict(ledger, bad_goal)
        assert ledger.adequate(eid2, goal_fingerprint(bad_goal)) is False
