"""Variability-aware regression of variational assurance cases.

Annotations are triples of feature expressions partitioning a node's scope
into reuse / revise / recheck configurations.  The passes mirror the product
procedure: the lifted forward pass updates subjects and analyses template
strategies, splitting matched children by presence condition where the
re-instantiated subgoals shifted; the lifted backward pass folds values with
the composition operator, whose derivation at any configuration equals the
product Min.

Feature-model evolutions are handled by partitioning the evolved model into
retained and new configurations: regression runs under the retained ones and
model-contingent annotations are afterwards composed with an all-revise value
over the new ones (fresh configurations carry no assurance yet).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from . import analyses as an
from . import featexpr as fx
from .accore import Manual, PredicateRef, Strategy, TemplateInst, digest
from .errors import InstantiationError, SchemaError, StructureError
from .featexpr import FALSE, TRUE, FeatureExpr, FeatureModel
from .plmodel import FTS, ModelStore, delta_hat
from .regression import EvolutionSet, RegValue
from .templates import AnalyticTemplate, EnumerationTemplate, QueryTemplate, Template, TemplateRegistry
from .varac import (
    PLModelRef,
    VarAC,
    VarAnalysisResult,
    VarGoal,
    VarQueryResult,
    VarSetValue,
    VarSingletonElement,
    VarSingletonValue,
    VarSubject,
    VDecomp,
    VEvd,
    VUnd,
    iter_var_nodes,
    lift_instantiate_goals,
    var_input_from_payload,
    var_input_to_payload,
    variational_correctness,
)

OLD_VERSION = "old"
NEW_VERSION = "new"


# --- variability-aware regression values ---


@dataclass(frozen=True)
class VarRegValue:
    """Feature-expression triple partitioning the scope ``over``."""

    over: FeatureExpr
    reuse: FeatureExpr
    revise: FeatureExpr
    recheck: FeatureExpr

    def derive(self, config: Iterable[str], alphabet: Iterable[str]) -> RegValue:
        cfg = frozenset(config)
        if not fx.eval_expr(self.over, cfg, alphabet):
            raise StructureError(f"configuration {sorted(cfg)} outside the value's scope")
        if fx.eval_expr(self.reuse, cfg, alphabet):
            return RegValue.REUSE
        if fx.eval_expr(self.revise, cfg, alphabet):
            return RegValue.REVISE
        if fx.eval_expr(self.recheck, cfg, alphabet):
            return RegValue.RECHECK
        raise StructureError("regression parts do not cover the scope")

    def parts(self) -> tuple[FeatureExpr, FeatureExpr, FeatureExpr]:
        return (self.reuse, self.revise, self.recheck)


def make_var_reg(
    over: FeatureExpr,
    reuse: FeatureExpr,
    revise: FeatureExpr,
    recheck: FeatureExpr,
    alphabet: Iterable[str],
) -> VarRegValue:
    """Normalized constructor: parts are clipped to the scope and simplified,
    so the partition invariant holds by construction."""
    feats = sorted(set(alphabet))
    over_s = fx.simplify(over, feats)
    return VarRegValue(
        over_s,
        fx.simplify(fx.And(reuse, over_s), feats),
        fx.simplify(fx.And(revise, over_s), feats),
        fx.simplify(fx.And(recheck, over_s), feats),
    )


def reuse_value(scope: FeatureExpr, alphabet: Iterable[str]) -> VarRegValue:
    return make_var_reg(scope, scope, FALSE, FALSE, alphabet)


def revise_value(scope: FeatureExpr, alphabet: Iterable[str]) -> VarRegValue:
    return make_var_reg(scope, FALSE, scope, FALSE, alphabet)


def recheck_value(scope: FeatureExpr, alphabet: Iterable[str]) -> VarRegValue:
    return make_var_reg(scope, FALSE, FALSE, scope, alphabet)


def compose_reg(v1: VarRegValue, v2: VarRegValue, alphabet: Iterable[str]) -> VarRegValue:
    """Binary composition over the union of scopes; deriving the result at any
    configuration yields the Min of the values derivable there."""
    phi, psi = v1.over, v2.over
    p_ok, p_rev, p_chk = v1.parts()
    q_ok, q_rev, q_chk = v2.parts()
    theta_ok = fx.Or(
        fx.And(p_ok, q_ok), fx.Or(fx.And(p_ok, fx.Not(psi)), fx.And(q_ok, fx.Not(phi)))
    )
    theta_rev = fx.Or(p_rev, q_rev)
    theta_chk = fx.Or(
        fx.Or(fx.And(p_chk, fx.Not(psi)), fx.And(q_chk, fx.Not(phi))),
        fx.And(fx.Or(p_chk, q_chk), fx.And(fx.Not(p_rev), fx.Not(q_rev))),
    )
    return make_var_reg(fx.Or(phi, psi), theta_ok, theta_rev, theta_chk, alphabet)


def min_reg_lift(values: Iterable[VarRegValue], alphabet: Iterable[str]) -> VarRegValue:
    out: VarRegValue | None = None
    for v in values:
        out = v if out is None else compose_reg(out, v, alphabet)
    if out is None:
        raise StructureError("min_reg_lift needs at least one value")
    return out


def match_lift_split(
    new_pc: FeatureExpr, old_pc: FeatureExpr
) -> tuple[FeatureExpr, FeatureExpr, FeatureExpr]:
    """(obsolete, reuse, new) regions for a matched goal whose presence
    condition moved from ``old_pc`` to ``new_pc``."""
    return (
        fx.And(old_pc, fx.Not(new_pc)),
        fx.And(old_pc, new_pc),
        fx.And(new_pc, fx.Not(old_pc)),
    )


# --- evolution sets ---


@dataclass(frozen=True)
class VarEvolutionSet:
    """Per-model feature expressions of the configurations whose derived
    products changed."""

    deltas: tuple[tuple[str, FeatureExpr], ...]

    def delta(self, model_id: str | None) -> FeatureExpr:
        if model_id is None:
            return FALSE
        for mid, expr in self.deltas:
            if mid == model_id:
                return expr
        return FALSE

    def model_ids(self) -> frozenset[str]:
        return frozenset(mid for mid, _ in self.deltas)

    def derive(self, config: Iterable[str], alphabet: Iterable[str]) -> EvolutionSet:
        cfg = frozenset(config)
        return EvolutionSet(
            frozenset(mid for mid, expr in self.deltas if fx.eval_expr(expr, cfg, alphabet))
        )


def compute_var_evolution(store: ModelStore, fm: FeatureModel, mode: str = "auto") -> VarEvolutionSet:
    """Evolution expressions for every model with two live versions."""
    deltas = []
    for model_id in store.ids():
        if not (store.has(model_id, OLD_VERSION) and store.has(model_id, NEW_VERSION)):
            continue
        old = store.get(model_id, OLD_VERSION)
        new = store.get(model_id, NEW_VERSION)
        if not (isinstance(old, FTS) and isinstance(new, FTS)):
            continue
        deltas.append((model_id, delta_hat(old.with_feature_model(fm), new.with_feature_model(fm), fm, mode)))
    return VarEvolutionSet(tuple(deltas))


# --- lifted regression-analysis handles ---


class LiftedRPHandle:
    REVERIFY = "reverify"
    ABSENT = "absent"

    def __init__(
        self, kind: str, func: Callable[[VarGoal, ModelStore, FeatureModel], VarRegValue] | None = None
    ) -> None:
        if kind not in (self.REVERIFY, self.ABSENT, "structural"):
            raise SchemaError(f"unknown lifted regression handle kind {kind!r}")
        self.kind = kind
        self.func = func


class LiftedRPRegistry:
    def __init__(self) -> None:
        self._handles: dict[str, LiftedRPHandle] = {}

    def set_handle(self, schema: str, handle: LiftedRPHandle) -> None:
        self._handles[schema] = handle

    def handle(self, schema: str) -> LiftedRPHandle | None:
        return self._handles.get(schema)


def default_lifted_rp_registry() -> LiftedRPRegistry:
    registry = LiftedRPRegistry()
    registry.set_handle("result-ok", LiftedRPHandle(LiftedRPHandle.REVERIFY))
    return registry


# --- annotations (keyed by node identity during the run) ---


@dataclass
class VarAnnotationStore:
    goal_values: dict[int, VarRegValue] = field(default_factory=dict)
    strategy_values: dict[int, VarRegValue] = field(default_factory=dict)
    evidence_values: dict[int, VarRegValue] = field(default_factory=dict)
    obsolete: set[int] = field(default_factory=set)
    recheck_regions: dict[int, FeatureExpr] = field(default_factory=dict)
    reasons: dict[int, str] = field(default_factory=dict)
    new_goals: list[tuple[VarAC, VarGoal]] = field(default_factory=list)
    _nodes: dict[int, VarAC] = field(default_factory=dict)

    def key(self, node: VarAC) -> int:
        k = id(node)
        self._nodes[k] = node  # keeps the node alive so ids stay unique
        return k

    def mark_recheck_region(self, node: VarAC, region: FeatureExpr, fm: FeatureModel) -> None:
        k = self.key(node)
        merged = fx.Or(self.recheck_regions.get(k, FALSE), region)
        self.recheck_regions[k] = fx.simplify(merged, fm.alphabet)


# --- subject updating ---


def _update_pl_ref(ref: PLModelRef, evolution: VarEvolutionSet) -> PLModelRef:
    if ref.model_id in evolution.model_ids() and ref.version == OLD_VERSION:
        return PLModelRef(ref.model_id, NEW_VERSION)
    return ref


def update_var_subject(subject: VarSubject, evolution: VarEvolutionSet) -> VarSubject:
    if isinstance(subject, PLModelRef):
        return _update_pl_ref(subject, evolution)
    if isinstance(subject, VarSingletonElement):
        return VarSingletonElement(_update_pl_ref(subject.model, evolution), subject.state, subject.guard)
    if isinstance(subject, VarQueryResult):
        return VarQueryResult(
            _update_pl_ref(subject.model, evolution), subject.query, subject.restrict, subject.entries
        )
    if isinstance(subject, VarAnalysisResult):
        return VarAnalysisResult(
            subject.analysis,
            _update_pl_ref(subject.model, evolution),
            subject.spec,
            subject.restrict,
            subject.cells,
        )
    return subject


def var_subject_model_id(subject: VarSubject | None) -> str | None:
    if isinstance(subject, PLModelRef):
        return subject.model_id
    if isinstance(subject, VarSingletonElement):
        return subject.model.model_id
    if isinstance(subject, (VarQueryResult, VarAnalysisResult)):
        return subject.model.model_id
    return None


# --- lifted input synthesis ---


def synthesize_var_input(
    template: Template,
    old_inp,
    parent: VarGoal,
    store: ModelStore,
    fm: FeatureModel,
    from_parent: bool,
):
    """A variational input satisfying Inv(C) over the parent's presence
    condition, or None.  Analytic inputs are repaired by retargeting the
    evolved model; enumeration inputs re-derive from the refreshed parent
    subject; other inputs only survive if they still satisfy the criterion."""
    candidates = []
    if isinstance(template, AnalyticTemplate):
        model_id = var_subject_model_id(parent.subject)
        if model_id is not None and old_inp is not None:
            ref = PLModelRef(model_id, _parent_version(parent))
            candidates.append((ref, old_inp[1]))
    elif isinstance(template, EnumerationTemplate) and from_parent:
        if isinstance(parent.subject, (VarQueryResult, VarSetValue)):
            candidates.append(parent.subject)
    if old_inp is not None:
        candidates.append(old_inp)
    for candidate in candidates:
        try:
            if variational_correctness(template, candidate, parent, store, fm):
                return candidate
        except (SchemaError, KeyError):
            continue
    return None


def _parent_version(parent: VarGoal) -> str:
    subject = parent.subject
    if isinstance(subject, PLModelRef):
        return subject.version
    if isinstance(subject, VarSingletonElement):
        return subject.model.version
    if isinstance(subject, (VarQueryResult, VarAnalysisResult)):
        return subject.model.version
    raise SchemaError("parent goal has no model-backed subject")


# --- matching ---


def _var_goals_match(new_goal: VarGoal, old_goal: VarGoal, fm: FeatureModel) -> bool:
    """Identity modulo presence condition, model version and refreshed
    analysis output; presence-condition differences are handled by splitting."""
    if new_goal.pred != old_goal.pred:
        return False
    a, b = new_goal.subject, old_goal.subject
    if a is None and b is None:
        return True
    if type(a) is not type(b):
        return False
    if isinstance(a, PLModelRef):
        return a.model_id == b.model_id
    if isinstance(a, VarSingletonElement):
        return a.model.model_id == b.model.model_id and a.state == b.state
    if isinstance(a, VarSingletonValue):
        return a.value == b.value
    if isinstance(a, VarQueryResult):
        return a.model.model_id == b.model.model_id and a.query == b.query
    if isinstance(a, VarAnalysisResult):
        return a.model.model_id == b.model.model_id and a.analysis == b.analysis and a.spec == b.spec
    if isinstance(a, VarSetValue):
        if [v for v, _ in a.entries] != [v for v, _ in b.entries]:
            return False
        return all(
            fm.equivalent(pa, pb) for (_, pa), (_, pb) in zip(a.entries, b.entries)
        )
    return a == b


def restrict_subtree(node: VarAC, region: FeatureExpr, fm: FeatureModel) -> VarAC:
    """Deep copy with every presence condition clipped to ``region``."""
    goal = VarGoal(node.goal.pred, node.goal.subject, fx.simplify(fx.And(node.goal.pc, region), fm.alphabet))
    if isinstance(node, VUnd):
        return VUnd(goal)
    if isinstance(node, VEvd):
        return VEvd(goal, node.evidence_id)
    return VDecomp(goal, node.strategy, [restrict_subtree(c, region, fm) for c in node.children])


# --- lifted template regression (Alg. 5) ---


def template_regression_lift(
    node: VDecomp,
    template: Template,
    evolution: VarEvolutionSet,
    phi_delta: FeatureExpr,
    store: ModelStore,
    fm: FeatureModel,
    annotations: VarAnnotationStore,
) -> VarRegValue:
    phi = node.goal.pc
    scope = fx.And(phi, fm.formula)
    prov = node.strategy.provenance
    assert isinstance(prov, TemplateInst)
    old_inp = var_input_from_payload(template, prov.input_payload)
    new_inp = synthesize_var_input(template, old_inp, node.goal, store, fm, prov.input_from_parent)
    if new_inp is None:
        value = make_var_reg(scope, fx.Not(phi_delta), FALSE, phi_delta, fm.alphabet)
        region = fx.And(scope, phi_delta)
        for child in node.children:
            for _, sub in iter_var_nodes(child):
                annotations.mark_recheck_region(sub, fx.And(sub.goal.pc, region), fm)
        annotations.reasons[annotations.key(node)] = "no input satisfying the variational correctness criterion"
        return value

    evidence_producing = _is_evidence_producing_var(node, template)
    if template.analytic is not None and evidence_producing:
        new_goals = [
            VarGoal(
                c.goal.pred,
                update_var_subject(c.goal.subject, evolution) if c.goal.subject is not None else None,
                c.goal.pc,
            )
            for c in node.children
        ]
    else:
        try:
            new_goals = lift_instantiate_goals(template, new_inp, node.goal, store, fm)
        except InstantiationError:
            new_goals = []

    payload = var_input_to_payload(template, new_inp)
    node.strategy = Strategy(
        node.strategy.label,
        TemplateInst(prov.template_id, payload, digest(payload), prov.input_from_parent),
    )

    taken: set[int] = set()
    matches: list[tuple[int, VarGoal]] = []
    unmatched_new: list[VarGoal] = []
    for new_goal in new_goals:
        found = None
        for i, child in enumerate(node.children):
            if i in taken:
                continue
            if _var_goals_match(new_goal, child.goal, fm):
                found = i
                break
        if found is None:
            unmatched_new.append(new_goal)
        else:
            taken.add(found)
            matches.append((found, new_goal))

    new_children: list[VarAC] = []
    phi_new_parts: list[FeatureExpr] = []
    replacement_by_index: dict[int, list[VarAC]] = {}
    for i, new_goal in matches:
        child = node.children[i]
        old_pc, new_pc = child.goal.pc, new_goal.pc
        phi_obs, phi_reuse, phi_missing = match_lift_split(new_pc, old_pc)
        copies: list[VarAC] = []
        if fx.satisfiable(fx.And(phi_obs, fm.formula), fm.alphabet):
            # the goal vanished from some configurations: obsolete copy there,
            # reuse copy restricted to the overlap
            obs_copy = restrict_subtree(child, phi_obs, fm)
            annotations.obsolete.add(annotations.key(obs_copy))
            copies.append(obs_copy)
            child = restrict_subtree(child, phi_reuse, fm)
            reuse_pc = fx.simplify(phi_reuse, fm.alphabet)
        elif fx.equiv(old_pc, new_pc, fm.alphabet):
            reuse_pc = new_pc
        else:
            reuse_pc = fx.simplify(phi_reuse, fm.alphabet)
        child.goal = VarGoal(new_goal.pred, new_goal.subject, reuse_pc)
        copies.append(child)
        replacement_by_index[i] = copies
        if fx.satisfiable(fx.And(phi_missing, fm.formula), fm.alphabet):
            # configurations gaining the goal have no argument for it yet
            missing = VarGoal(new_goal.pred, new_goal.subject, fx.simplify(phi_missing, fm.alphabet))
            annotations.new_goals.append((node, missing))
            phi_new_parts.append(phi_missing)
    for i, child in enumerate(node.children):
        if i in replacement_by_index:
            new_children.extend(replacement_by_index[i])
        else:
            annotations.obsolete.add(annotations.key(child))
            new_children.append(child)
    for g in unmatched_new:
        annotations.new_goals.append((node, g))
        phi_new_parts.append(g.pc)
    node.children = new_children

    phi_new = fx.or_all(phi_new_parts) if phi_new_parts else FALSE
    if phi_new_parts:
        annotations.reasons[annotations.key(node)] = "re-instantiation requires new subgoals"
    return make_var_reg(scope, fx.Not(phi_new), phi_new, FALSE, fm.alphabet)


def _is_evidence_producing_var(node: VDecomp, template: Template) -> bool:
    if template.analytic is None:
        return False
    gy = None
    for child in node.children:
        if isinstance(child.goal.subject, (VarAnalysisResult, VarQueryResult)):
            gy = child
            break
    if gy is None:
        return template.evidence_producing_default
    if isinstance(gy, VEvd):
        return True
    if isinstance(gy, VDecomp):
        return False
    return template.evidence_producing_default


# --- the lifted forward pass (Alg. 6) ---


def forward_pass_lift(
    ac: VarAC,
    evolution: VarEvolutionSet,
    store: ModelStore,
    registry: TemplateRegistry,
    fm: FeatureModel,
    annotations: VarAnnotationStore,
) -> None:
    if ac.goal.subject is not None:
        updated = update_var_subject(ac.goal.subject, evolution)
        if updated != ac.goal.subject:
            ac.goal = VarGoal(ac.goal.pred, updated, ac.goal.pc)
    if isinstance(ac, (VUnd, VEvd)):
        return
    assert isinstance(ac, VDecomp)
    phi = ac.goal.pc
    scope = fx.And(phi, fm.formula)
    prov = ac.strategy.provenance
    if isinstance(prov, Manual):
        annotations.strategy_values[annotations.key(ac)] = recheck_value(scope, fm.alphabet)
        annotations.reasons[annotations.key(ac)] = "manual strategy"
        for child in ac.children:
            for _, sub in iter_var_nodes(child):
                annotations.mark_recheck_region(sub, fx.And(sub.goal.pc, fm.formula), fm)
        return
    template = registry.get(prov.template_id)
    phi_delta = evolution.delta(var_subject_model_id(ac.goal.subject))
    if not fx.satisfiable(fx.and_all([phi, phi_delta, fm.formula]), fm.alphabet):
        annotations.strategy_values[annotations.key(ac)] = reuse_value(scope, fm.alphabet)
        for child in ac.children:
            forward_pass_lift(child, evolution, store, registry, fm, annotations)
        return
    value = template_regression_lift(ac, template, evolution, phi_delta, store, fm, annotations)
    annotations.strategy_values[annotations.key(ac)] = value
    for child in ac.children:
        if annotations.key(child) in annotations.obsolete:
            continue
        if not fx.satisfiable(fx.And(fx.And(child.goal.pc, fx.Not(value.recheck)), fm.formula), fm.alphabet):
            continue  # entirely inside the recheck region: already marked
        forward_pass_lift(child, evolution, store, registry, fm, annotations)


# --- reusable core (pruning obsolete copies) ---


def extract_reusable_core_lift(ac: VarAC, annotations: VarAnnotationStore) -> VarAC:
    def rebuild(node: VarAC) -> VarAC:
        if not isinstance(node, VDecomp):
            return node
        kept = [rebuild(c) for c in node.children if annotations.key(c) not in annotations.obsolete]
        if not kept:
            return VUnd(node.goal)
        node.children = kept
        return node

    return rebuild(ac)


# --- lifted evidence regression (Alg. 7) ---


def _lifted_reverify(goal: VarGoal, store: ModelStore, fm: FeatureModel) -> VarRegValue:
    subject = goal.subject
    if not isinstance(subject, VarAnalysisResult):
        raise SchemaError("lifted reverification needs a variational analysis-result goal")
    model = store.get(subject.model.model_id, subject.model.version)
    if not isinstance(model, FTS):
        raise SchemaError("lifted reverification needs a product-line model")
    spec = an.parse_spec(subject.spec)
    outcome = an.run_lifted_analysis(subject.analysis, model.with_feature_model(fm), spec, goal.pc)
    ok = fx.or_all(g for v, g in outcome.cells if v.ok)
    bad = fx.or_all(g for v, g in outcome.cells if not v.ok)
    return make_var_reg(fx.And(goal.pc, fm.formula), ok, bad, FALSE, fm.alphabet)


def evd_regression_lift(
    evolution: VarEvolutionSet,
    goal: VarGoal,
    evidence_id: str,
    lifted_rp: LiftedRPRegistry,
    store: ModelStore,
    fm: FeatureModel,
    annotations: VarAnnotationStore,
    node: VarAC,
) -> VarRegValue:
    phi = goal.pc
    scope = fx.And(phi, fm.formula)
    phi_delta = evolution.delta(var_subject_model_id(goal.subject))
    if goal.propositional or not fx.satisfiable(fx.And(scope, phi_delta), fm.alphabet):
        value = reuse_value(scope, fm.alphabet)
    else:
        handle = lifted_rp.handle(goal.pred.schema)
        if handle is None or handle.kind == LiftedRPHandle.ABSENT:
            value = make_var_reg(scope, fx.Not(phi_delta), FALSE, phi_delta, fm.alphabet)
        elif handle.kind == LiftedRPHandle.REVERIFY:
            value = _lifted_reverify(goal, store, fm)
        else:
            value = handle.func(goal, store, fm)
    annotations.evidence_values[annotations.key(node)] = value
    annotations.goal_values[annotations.key(node)] = value
    return value


# --- the lifted backward pass (Alg. 8) ---


def _apply_recheck_region(value: VarRegValue, region: FeatureExpr, alphabet) -> VarRegValue:
    """Override: configurations in an eagerly marked region are recheck no
    matter what was computed for them (they were never analysed)."""
    return make_var_reg(
        value.over,
        fx.And(value.reuse, fx.Not(region)),
        fx.And(value.revise, fx.Not(region)),
        fx.Or(fx.And(value.recheck, fx.Not(region)), fx.And(region, value.over)),
        alphabet,
    )


def _mark_subtree_recheck(node: VarAC, fm: FeatureModel, annotations: VarAnnotationStore) -> None:
    for _, sub in iter_var_nodes(node):
        scope = fx.And(sub.goal.pc, fm.formula)
        annotations.goal_values[annotations.key(sub)] = recheck_value(scope, fm.alphabet)
        if isinstance(sub, VEvd):
            annotations.evidence_values[annotations.key(sub)] = recheck_value(scope, fm.alphabet)
        if isinstance(sub, VDecomp):
            annotations.strategy_values.setdefault(annotations.key(sub), recheck_value(scope, fm.alphabet))


def backward_pass_lift(
    evolution: VarEvolutionSet,
    core: VarAC,
    lifted_rp: LiftedRPRegistry,
    store: ModelStore,
    fm: FeatureModel,
    annotations: VarAnnotationStore,
) -> VarRegValue:
    scope = fx.And(core.goal.pc, fm.formula)
    key = annotations.key(core)
    region = annotations.recheck_regions.get(key, FALSE)
    if not fx.satisfiable(fx.And(scope, fx.Not(region)), fm.alphabet) and fx.satisfiable(scope, fm.alphabet):
        # the whole node sits inside an eagerly rechecked region
        _mark_subtree_recheck(core, fm, annotations)
        return recheck_value(scope, fm.alphabet)
    if isinstance(core, VUnd):
        value = revise_value(scope, fm.alphabet)
        value = _apply_recheck_region(value, region, fm.alphabet)
        annotations.goal_values[key] = value
        return value
    if isinstance(core, VEvd):
        value = evd_regression_lift(evolution, core.goal, core.evidence_id, lifted_rp, store, fm, annotations, core)
        if fx.satisfiable(fx.And(region, fm.formula), fm.alphabet):
            value = _apply_recheck_region(value, region, fm.alphabet)
            annotations.evidence_values[key] = value
            annotations.goal_values[key] = value
        return value
    strategy_value = annotations.strategy_values.get(key)
    if strategy_value is None:
        strategy_value = reuse_value(scope, fm.alphabet)
        annotations.strategy_values[key] = strategy_value
    if fx.equiv(fx.And(strategy_value.recheck, fm.formula), fx.And(scope, fm.formula), fm.alphabet) and fx.satisfiable(
        scope, fm.alphabet
    ):
        annotations.goal_values[key] = strategy_value
        for child in core.children:
            _mark_subtree_recheck(child, fm, annotations)
        return strategy_value
    values = [strategy_value]
    for child in core.children:
        values.append(backward_pass_lift(evolution, child, lifted_rp, store, fm, annotations))
    uncovered = fx.And(scope, fx.Not(fx.or_all(c.goal.pc for c in core.children)))
    if fx.satisfiable(uncovered, fm.alphabet):
        # configurations whose derivation leaves the goal undeveloped
        values.append(revise_value(uncovered, fm.alphabet))
    value = min_reg_lift(values, fm.alphabet)
    value = make_var_reg(scope, value.reuse, value.revise, value.recheck, fm.alphabet)
    value = _apply_recheck_region(value, region, fm.alphabet)
    annotations.goal_values[key] = value
    return value


# --- variability evolution (feature-model changes) ---


@dataclass(frozen=True)
class VariabilityPartition:
    """Retained vs newly introduced configurations of an evolved feature model,
    expressed over the combined alphabet."""

    fm_combined: FeatureModel  # evolved model over the union alphabet
    phi_reuse: FeatureExpr
    phi_new: FeatureExpr
    new_features: tuple[str, ...]


def compute_variability_partition(
    old_fm: FeatureModel, new_fm: FeatureModel, new_features: Iterable[str] = ()
) -> VariabilityPartition:
    new_feats = tuple(sorted(set(new_features)))
    alphabet = tuple(dict.fromkeys(old_fm.alphabet + new_fm.alphabet + new_feats))
    removed = [f for f in old_fm.alphabet if f not in new_fm.alphabet and f not in new_feats]
    formula_new = new_fm.formula
    for f in removed:
        formula_new = fx.And(formula_new, fx.Not(fx.Var(f)))
    added_block = fx.or_all(fx.Var(f) for f in new_feats) if new_feats else FALSE
    phi_reuse = fx.And(fx.And(old_fm.formula, formula_new), fx.Not(added_block))
    phi_new = fx.And(fx.Or(fx.Not(old_fm.formula), added_block), formula_new)
    combined = FeatureModel(alphabet, fx.simplify(formula_new, alphabet))
    return VariabilityPartition(
        combined,
        fx.simplify(phi_reuse, alphabet),
        fx.simplify(phi_new, alphabet),
        new_feats,
    )


def _extends_at_new_configs(node: VarAC, is_strategy: bool, registry: TemplateRegistry) -> bool:
    """Whether a node's annotation must be composed with all-revise over the
    new configurations.  Propositional goals and analytic template strategies
    keep their support; everything model-contingent has none there."""
    if is_strategy:
        assert isinstance(node, VDecomp)
        prov = node.strategy.provenance
        if isinstance(prov, Manual):
            return True
        template_obj = registry.get(prov.template_id)
        return template_obj.analytic is None
    return not node.goal.propositional


def apply_variability_extension(
    core: VarAC,
    annotations: VarAnnotationStore,
    partition: VariabilityPartition,
    registry: TemplateRegistry,
) -> None:
    fm = partition.fm_combined
    phi_new = partition.phi_new
    for _, node in iter_var_nodes(core):
        key = annotations.key(node)
        ext = fx.And(node.goal.pc, fx.And(phi_new, fm.formula))
        ext_sat = fx.satisfiable(ext, fm.alphabet)
        for table, is_strategy in ((annotations.goal_values, False), (annotations.evidence_values, False)):
            if key not in table:
                continue
            value = table[key]
            if not ext_sat:
                table[key] = value
                continue
            if _extends_at_new_configs(node, False, registry):
                table[key] = compose_reg(value, revise_value(ext, fm.alphabet), fm.alphabet)
            else:
                table[key] = compose_reg(value, reuse_value(ext, fm.alphabet), fm.alphabet)
        if key in annotations.strategy_values and ext_sat:
            value = annotations.strategy_values[key]
            if _extends_at_new_configs(node, True, registry):
                annotations.strategy_values[key] = compose_reg(value, revise_value(ext, fm.alphabet), fm.alphabet)
            else:
                annotations.strategy_values[key] = compose_reg(value, reuse_value(ext, fm.alphabet), fm.alphabet)


def report_repair_obligations(
    core: VarAC,
    store: ModelStore,
    registry: TemplateRegistry,
    partition: VariabilityPartition,
    annotations: VarAnnotationStore,
) -> None:
    """Re-run argument-producing template strategies over the newly introduced
    configurations and record (never graft) the subgoals they would need."""
    fm = partition.fm_combined
    phi_new = partition.phi_new

    def walk(node: VarAC, parent_ext_goal: VarGoal | None) -> None:
        if not isinstance(node, VDecomp):
            return
        prov = node.strategy.provenance
        ext_children: dict[int, VarGoal] = {}
        if isinstance(prov, TemplateInst):
            template = registry.get(prov.template_id)
            argument_producing = not (
                template.analytic is not None and _is_evidence_producing_var(node, template)
            )
            ext_pc = fx.simplify(fx.And(node.goal.pc, phi_new), fm.alphabet)
            if argument_producing and fx.satisfiable(fx.And(ext_pc, fm.formula), fm.alphabet):
                parent_goal = parent_ext_goal or VarGoal(node.goal.pred, node.goal.subject, ext_pc)
                old_inp = var_input_from_payload(template, prov.input_payload)
                new_inp = synthesize_var_input(
                    template, old_inp, parent_goal, store, fm, prov.input_from_parent
                )
                if new_inp is not None:
                    try:
                        goals = lift_instantiate_goals(template, new_inp, parent_goal, store, fm)
                    except (InstantiationError, SchemaError):
                        goals = []
                    taken: set[int] = set()
                    for g in goals:
                        found = None
                        for i, child in enumerate(node.children):
                            if i in taken:
                                continue
                            if _var_goals_match(g, child.goal, fm):
                                found = i
                                break
                        if found is None:
                            if fx.satisfiable(fx.And(g.pc, fm.formula), fm.alphabet):
                                annotations.new_goals.append((node, g))
                        else:
                            taken.add(found)
                            ext_children[found] = g
        for i, child in enumerate(node.children):
            walk(child, ext_children.get(i))

    walk(core, None)


# --- full run ---


@dataclass
class LiftedRegressionReport:
    core: VarAC
    root_value: VarRegValue
    fm: FeatureModel
    goal_values: dict[tuple[int, ...], VarRegValue]
    strategy_values: dict[tuple[int, ...], VarRegValue]
    evidence_values: dict[tuple[int, ...], VarRegValue]
    reasons: dict[tuple[int, ...], str]
    new_goals: list[tuple[tuple[int, ...] | None, VarGoal]]
    evolution: VarEvolutionSet

    def _triple(self, value: VarRegValue) -> dict[str, str]:
        alphabet = self.fm.alphabet
        return {
            "reuse": fx.canonical_str(value.reuse, alphabet),
            "revise": fx.canonical_str(value.revise, alphabet),
            "recheck": fx.canonical_str(value.recheck, alphabet),
        }

    def to_json(self) -> dict[str, Any]:
        from .accore import path_to_str
        from .varac import var_goal_to_json

        nodes: dict[str, Any] = {}
        for path, _ in iter_var_nodes(self.core):
            key = path_to_str(path)
            entry: dict[str, Any] = {}
            if path in self.goal_values:
                entry["regression"] = self._triple(self.goal_values[path])
            if path in self.strategy_values:
                entry["strategy"] = self._triple(self.strategy_values[path])
            if path in self.evidence_values:
                entry["evidence"] = self._triple(self.evidence_values[path])
            if path in self.reasons:
                entry["reason"] = self.reasons[path]
            nodes[key] = entry
        return {
            "root": self._triple(self.root_value),
            "featureModel": fx.to_str(self.fm.formula),
            "features": list(self.fm.alphabet),
            "delta": {mid: fx.canonical_str(e, self.fm.alphabet) for mid, e in self.evolution.deltas},
            "nodes": nodes,
            "newGoals": [
                {
                    "under": path_to_str(path) if path is not None else None,
                    "goal": var_goal_to_json(goal),
                }
                for path, goal in self.new_goals
            ],
        }


def run_lifted_regression(
    ac: VarAC,
    store: ModelStore,
    registry: TemplateRegistry,
    fm: FeatureModel,
    evolution: VarEvolutionSet | None = None,
    lifted_rp: LiftedRPRegistry | None = None,
    variability: VariabilityPartition | None = None,
    delta_mode: str = "auto",
    report_repairs: bool = True,
) -> LiftedRegressionReport:
    """Lifted forward pass, core extraction, lifted backward pass, optional
    feature-model-evolution extension and repair reporting.

    With a variability partition, the regression runs under the retained
    configurations and the extension afterwards accounts for the new ones.
    """
    lifted_rp = lifted_rp or default_lifted_rp_registry()
    if variability is not None:
        fm_run = FeatureModel(
            variability.fm_combined.alphabet,
            fx.simplify(variability.phi_reuse, variability.fm_combined.alphabet),
        )
    else:
        fm_run = fm
    if evolution is None:
        evolution = compute_var_evolution(store, fm_run, delta_mode)
    working = copy.deepcopy(ac)
    annotations = VarAnnotationStore()
    forward_pass_lift(working, evolution, store, registry, fm_run, annotations)
    core = extract_reusable_core_lift(working, annotations)
    root_value = backward_pass_lift(evolution, core, lifted_rp, store, fm_run, annotations)
    if variability is not None:
        apply_variability_extension(core, annotations, variability, registry)
        if report_repairs:
            report_repair_obligations(core, store, registry, variability, annotations)
        root_key = annotations.key(core)
        root_value = annotations.goal_values[root_key]
        fm_out = variability.fm_combined
    else:
        fm_out = fm_run

    by_path_goal: dict[tuple[int, ...], VarRegValue] = {}
    by_path_strategy: dict[tuple[int, ...], VarRegValue] = {}
    by_path_evidence: dict[tuple[int, ...], VarRegValue] = {}
    reasons: dict[tuple[int, ...], str] = {}
    key_to_path: dict[int, tuple[int, ...]] = {}
    for path, node in iter_var_nodes(core):
        key = annotations.key(node)
        key_to_path[key] = path
        if key in annotations.goal_values:
            by_path_goal[path] = annotations.goal_values[key]
        if key in annotations.strategy_values:
            by_path_strategy[path] = annotations.strategy_values[key]
        if key in annotations.evidence_values:
            by_path_evidence[path] = annotations.evidence_values[key]
        if key in annotations.reasons:
            reasons[path] = annotations.reasons[key]
    new_goals = [
        (key_to_path.get(annotations.key(under)), goal) for under, goal in annotations.new_goals
    ]
    return LiftedRegressionReport(
        core,
        root_value,
        fm_out,
        by_path_goal,
        by_path_strategy,
        by_path_evidence,
        reasons,
        new_goals,
        evolution,
    )
