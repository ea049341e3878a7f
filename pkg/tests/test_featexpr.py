import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splac.errors import AlphabetError, CapacityError, FormulaParseError, StructureError
from splac.featexpr import (
    FALSE,
    TRUE,
    And,
    FeatureModel,
    Implies,
    Not,
    Or,
    Var,
    Xor,
    canonical_str,
    config_term,
    configs_of,
    equiv,
    eval_expr,
    implies,
    is_partition,
    names_of,
    parse,
    parse_config,
    satisfiable,
    simplify,
    simplify_within,
    to_str,
)

A, B, C = Var("A"), Var("B"), Var("C")


def brute_truth_table(expr, alphabet):
    """Independent oracle: set of satisfying assignments by direct evaluation."""
    feats = sorted(alphabet)
    rows = set()
    for combo in itertools.product([False, True], repeat=len(feats)):
        cfg = frozenset(f for f, on in zip(feats, combo) if on)
        if eval_expr(expr, cfg, feats):
            rows.add(cfg)
    return rows


class TestEvalExpr:
    def test_single_feature(self):
        assert eval_expr(B, {"B"}, ["A", "B"]) is True

    def test_true_on_empty_config(self):
        assert eval_expr(TRUE, set(), []) is True

    def test_xor_feature_model(self):
        assert eval_expr(Xor(A, B), {"A"}, ["A", "B"]) is True
        assert eval_expr(Xor(A, B), {"A", "B"}, ["A", "B"]) is False

    def test_unknown_feature_in_formula(self):
        with pytest.raises(AlphabetError):
            eval_expr(Var("Z"), set(), ["A"])

    def test_unknown_feature_in_config(self):
        with pytest.raises(AlphabetError):
            eval_expr(A, {"Z"}, ["A"])


class TestConfigsOf:
    def test_xor_two_features(self):
        assert configs_of(Xor(A, B), ["A", "B"]) == [frozenset({"A"}), frozenset({"B"})]

    def test_false_is_empty(self):
        assert configs_of(FALSE, ["A", "B"]) == []

    def test_pump_style_formula_has_ten_configs(self):
        # HW & (MD => CDT & VD) over five features; expected count frozen from
        # the brute-force truth-table oracle over all 32 assignments.
        fm = And(Var("HW"), Implies(Var("MD"), And(Var("CDT"), Var("VD"))))
        alphabet = ["HW", "MD", "CDT", "VD", "CIR"]
        got = configs_of(fm, alphabet)
        assert len(got) == 10
        assert set(got) == brute_truth_table(fm, alphabet)

    def test_canonical_order_and_no_duplicates(self):
        got = configs_of(TRUE, ["B", "A"])
        assert len(got) == len(set(got)) == 4
        assert got == sorted(got, key=lambda c: tuple(sorted(c)))

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            configs_of(TRUE, [f"F{i}" for i in range(25)])


class TestSemanticRelations:
    def test_contradiction_unsat(self):
        assert satisfiable(And(A, Not(A)), ["A"]) is False

    def test_implies_conjunct(self):
        assert implies(And(A, B), A, ["A", "B"]) is True

    def test_xor_expansion_equiv(self):
        expanded = And(Or(A, B), Not(And(A, B)))
        assert equiv(Xor(A, B), expanded, ["A", "B"]) is True

    def test_alphabet_mismatch(self):
        with pytest.raises(AlphabetError):
            implies(A, Var("Z"), ["A"])


class TestIsPartition:
    def test_complementary_pair(self):
        assert is_partition([A, Not(A)], TRUE, ["A"]) is True

    def test_zero_width_part_allowed(self):
        assert is_partition([Not(B), FALSE, B], TRUE, ["A", "B"]) is True

    def test_overlapping_parts_rejected(self):
        assert is_partition([A, And(A, B)], A, ["A", "B"]) is False

    def test_part_outside_whole_rejected(self):
        assert is_partition([TRUE], A, ["A"]) is False

    def test_empty_parts_list_rejected(self):
        with pytest.raises(StructureError):
            is_partition([], TRUE, ["A"])


class TestSimplify:
    def test_and_true_absorbed(self):
        assert simplify(And(A, TRUE), ["A"]) == A

    def test_merge_adjacent_terms(self):
        assert simplify(Or(And(A, B), And(A, Not(B))), ["A", "B"]) == A

    def test_xnor_sum_of_products(self):
        got = simplify(Not(Xor(A, B)), ["A", "B"])
        assert got == Or(And(A, B), And(Not(A), Not(B)))

    def test_tautology_and_contradiction(self):
        assert simplify(Or(A, Not(A)), ["A"]) == TRUE
        assert simplify(And(A, Not(A)), ["A"]) == FALSE

    def test_canonical_str(self):
        assert canonical_str(Not(Xor(A, B)), ["A", "B"]) == "A & B | !A & !B"


class TestSimplifyWithin:
    def test_dont_care_outside_context(self):
        # within A xor B, the region A & !B collapses to A
        got = simplify_within(And(A, Not(B)), Xor(A, B), ["A", "B"])
        assert got == A

    def test_agrees_on_context(self):
        fm = Xor(A, B)
        got = simplify_within(And(A, Not(B)), fm, ["A", "B"])
        for cfg in configs_of(fm, ["A", "B"]):
            assert eval_expr(got, cfg, ["A", "B"]) == eval_expr(And(A, Not(B)), cfg, ["A", "B"])

    def test_false_stays_false(self):
        assert simplify_within(FALSE, TRUE, ["A"]) == FALSE


class TestGrammar:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("true", TRUE),
            ("false", FALSE),
            ("A", A),
            ("!A", Not(A)),
            ("A & B", And(A, B)),
            ("A | B & C", Or(A, And(B, C))),
            ("A xor B", Xor(A, B)),
            ("A => B => C", Implies(A, Implies(B, C))),
            ("(A | B) & !(A & B)", And(Or(A, B), Not(And(A, B)))),
            ("A & B & C", And(And(A, B), C)),
        ],
    )
    def test_parse(self, text, expected):
        assert parse(text) == expected

    def test_whitespace_insensitive(self):
        assert parse(" A&B ") == parse("A & B")

    @pytest.mark.parametrize("bad", ["", "A &", "A B", "(A", "A ) B", "&", "=>A", "A!B"])
    def test_parse_errors(self, bad):
        with pytest.raises(FormulaParseError):
            parse(bad)

    def test_xor_and_implies_survive_round_trip(self):
        # first-class constructors must not desugar through serialization
        for text in ["A xor B", "A => B", "!(A xor B) => C"]:
            expr = parse(text)
            assert parse(to_str(expr)) == expr
            assert to_str(parse(to_str(expr))) == to_str(expr)


def _expr_strategy(names=("A", "B", "C")):
    leaves = st.sampled_from([TRUE, FALSE] + [Var(n) for n in names])

    def extend(children):
        return st.one_of(
            children.map(Not),
            st.tuples(children, children).map(lambda t: And(*t)),
            st.tuples(children, children).map(lambda t: Or(*t)),
            st.tuples(children, children).map(lambda t: Implies(*t)),
            st.tuples(children, children).map(lambda t: Xor(*t)),
        )

    return st.recursive(leaves, extend, max_leaves=12)


class TestProperties:
    ALPHABET = ["A", "B", "C"]

    @given(_expr_strategy())
    @settings(max_examples=150, deadline=None)
    def test_simplify_preserves_semantics(self, expr):
        simplified = simplify(expr, self.ALPHABET)
        for cfg in configs_of(TRUE, self.ALPHABET):
            assert eval_expr(simplified, cfg, self.ALPHABET) == eval_expr(expr, cfg, self.ALPHABET)

    @given(_expr_strategy())
    @settings(max_examples=150, deadline=None)
    def test_round_trip(self, expr):
        assert parse(to_str(expr)) == expr

    @given(_expr_strategy())
    @settings(max_examples=100, deadline=None)
    def test_simplify_idempotent(self, expr):
        once = simplify(expr, self.ALPHABET)
        assert simplify(once, self.ALPHABET) == once

    @given(_expr_strategy(), _expr_strategy())
    @settings(max_examples=100, deadline=None)
    def test_equiv_matches_truth_tables(self, left, right):
        expected = brute_truth_table(left, self.ALPHABET) == brute_truth_table(right, self.ALPHABET)
        assert equiv(left, right, self.ALPHABET) == expected

    @given(_expr_strategy())
    @settings(max_examples=60, deadline=None)
    def test_configs_of_matches_oracle(self, expr):
        assert set(configs_of(expr, self.ALPHABET)) == brute_truth_table(expr, self.ALPHABET)

    @given(_expr_strategy(), _expr_strategy())
    @settings(max_examples=100, deadline=None)
    def test_simplify_within_agrees_on_context(self, expr, context):
        got = simplify_within(expr, context, self.ALPHABET)
        for cfg in configs_of(context, self.ALPHABET):
            assert eval_expr(got, cfg, self.ALPHABET) == eval_expr(expr, cfg, self.ALPHABET)


class TestFeatureModel:
    def test_rejects_unsatisfiable(self):
        with pytest.raises(StructureError):
            FeatureModel(("A",), And(A, Not(A)))

    def test_rejects_undeclared_formula_names(self):
        with pytest.raises(AlphabetError):
            FeatureModel(("A",), B)

    def test_rejects_duplicate_features(self):
        with pytest.raises(AlphabetError):
            FeatureModel(("A", "A"), A)

    def test_configurations(self):
        fm = FeatureModel(("A", "B"), Xor(A, B))
        assert fm.configurations() == [frozenset({"A"}), frozenset({"B"})]

    def test_equivalent_modulo_model(self):
        fm = FeatureModel(("A", "B"), Xor(A, B))
        assert fm.equivalent(And(A, Not(B)), A) is True
        assert equiv(And(A, Not(B)), A, ["A", "B"]) is False

    def test_extend_alphabet(self):
        fm = FeatureModel(("A",), A)
        grown = fm.extended(["B"])
        assert grown.alphabet == ("A", "B")
        assert grown.formula == A


class TestHelpers:
    def test_config_term(self):
        assert config_term({"A"}, ["A", "B"]) == And(A, Not(B))

    def test_parse_config(self):
        assert parse_config("B, A") == frozenset({"A", "B"})
        assert parse_config("") == frozenset()
        with pytest.raises(AlphabetError):
            parse_config("A, 9bad")

    def test_names_of(self):
        assert names_of(parse("A & !B => C xor A")) == frozenset({"A", "B", "C"})
