"""Product-level regression of assurance cases after model evolution.

The run proceeds in two passes over a working copy of the AC.  The forward
pass walks top-down, updating goal subjects to the evolved model versions and
deciding per strategy whether the argument survives (template regression with
matching of re-instantiated subgoals).  Obsolete subtrees are pruned into the
reusable core.  The backward pass walks bottom-up from evidence, composing
regression values with Min under revise < recheck < reuse.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from . import analyses as an
from .accore import (
    AC,
    AnalysisResult,
    Decomp,
    Evd,
    Goal,
    Manual,
    ModelElement,
    ModelRef,
    QueryResult,
    Strategy,
    Subject,
    TemplateInst,
    Und,
    digest,
    goal_to_json,
    iter_nodes,
    path_to_str,
)
from .errors import InstantiationError, SchemaError, StructureError
from .plmodel import LTS, ModelStore
from .templates import AnalyticTemplate, Template, TemplateRegistry

OLD_VERSION = "old"
NEW_VERSION = "new"


class RegValue(enum.Enum):
    """Reuse / Revise / Recheck, totally ordered revise < recheck < reuse."""

    REVISE = 0
    RECHECK = 1
    REUSE = 2

    @property
    def symbol(self) -> str:
        return {RegValue.REUSE: "reuse", RegValue.REVISE: "revise", RegValue.RECHECK: "recheck"}[self]


def min_reg(values: Iterable[RegValue]) -> RegValue:
    out: RegValue | None = None
    for v in values:
        if out is None or v.value < out.value:
            out = v
    if out is None:
        raise StructureError("min_reg needs at least one value")
    return out


@dataclass(frozen=True)
class EvolutionSet:
    """Model ids evolved from the old to the new version."""

    model_ids: frozenset[str]

    def __contains__(self, model_id: str) -> bool:
        return model_id in self.model_ids


class RPHandle:
    """Product regression analysis handle for one predicate schema."""

    REVERIFY = "reverify"
    ABSENT = "absent"

    def __init__(self, kind: str, func: Callable[[Goal, ModelStore], RegValue] | None = None) -> None:
        if kind not in (self.REVERIFY, self.ABSENT, "structural"):
            raise SchemaError(f"unknown regression handle kind {kind!r}")
        self.kind = kind
        self.func = func


class RPRegistry:
    """Predicate schema -> product regression analysis availability."""

    def __init__(self) -> None:
        self._handles: dict[str, RPHandle] = {}

    def set_handle(self, schema: str, handle: RPHandle) -> None:
        self._handles[schema] = handle

    def handle(self, schema: str) -> RPHandle | None:
        return self._handles.get(schema)


def default_rp_registry() -> RPRegistry:
    """Reverification is available for analysis-result goals by default."""
    registry = RPRegistry()
    registry.set_handle("result-ok", RPHandle(RPHandle.REVERIFY))
    return registry


@dataclass
class AnnotationStore:
    """Per-node outcome of a run: goal/strategy/evidence regression values,
    obsolete flags and eager recheck marks, keyed by node path."""

    goal_values: dict[tuple[int, ...], RegValue] = field(default_factory=dict)
    strategy_values: dict[tuple[int, ...], RegValue] = field(default_factory=dict)
    evidence_values: dict[tuple[int, ...], RegValue] = field(default_factory=dict)
    obsolete: set[tuple[int, ...]] = field(default_factory=set)
    rechecked: set[tuple[int, ...]] = field(default_factory=set)
    reasons: dict[tuple[int, ...], str] = field(default_factory=dict)
    new_goals: list[tuple[tuple[int, ...], Goal]] = field(default_factory=list)


# --- subject updating ---


def _update_model_ref(ref: ModelRef, delta: EvolutionSet) -> ModelRef:
    if ref.model_id in delta and ref.version == OLD_VERSION:
        return ModelRef(ref.model_id, NEW_VERSION)
    return ref


def update_subject(subject: Subject, delta: EvolutionSet) -> Subject:
    """Swap evolved model references to the new version, leaving recorded
    analysis outputs untouched (re-execution is the backward pass's call)."""
    if isinstance(subject, ModelRef):
        return _update_model_ref(subject, delta)
    if isinstance(subject, ModelElement):
        return ModelElement(_update_model_ref(subject.model, delta), subject.state)
    if isinstance(subject, QueryResult):
        return QueryResult(_update_model_ref(subject.model, delta), subject.query, subject.states)
    if isinstance(subject, AnalysisResult):
        return AnalysisResult(
            subject.analysis, _update_model_ref(subject.model, delta), subject.spec, subject.output
        )
    return subject


def subject_model_id(subject: Subject | None) -> str | None:
    if isinstance(subject, ModelRef):
        return subject.model_id
    if isinstance(subject, ModelElement):
        return subject.model.model_id
    if isinstance(subject, (QueryResult, AnalysisResult)):
        return subject.model.model_id
    return None


def _subject_modified(goal: Goal, delta: EvolutionSet) -> bool:
    model_id = subject_model_id(goal.subject)
    return model_id is not None and model_id in delta


# --- template regression (forward-pass helper) ---


def is_evidence_producing(node: Decomp, template: Template) -> bool:
    """Structural detection: how is the analysis-output subgoal supported?
    Falls back to the template's default while the child is undeveloped."""
    if template.analytic is None:
        return False
    gy = None
    for child in node.children:
        if isinstance(child.goal.subject, (AnalysisResult, QueryResult)):
            gy = child
            break
    if gy is None:
        return template.evidence_producing_default
    if isinstance(gy, Evd):
        return True
    if isinstance(gy, Decomp):
        return False
    return template.evidence_producing_default


def _goals_match(new_goal: Goal, old_goal: Goal, delta: EvolutionSet) -> bool:
    """Match identity: equal predicate, subjects equal modulo the old-to-new
    model substitution and modulo a refreshed analysis output."""
    if new_goal.pred != old_goal.pred:
        return False
    old_subject = update_subject(old_goal.subject, delta) if old_goal.subject is not None else None
    new_subject = new_goal.subject
    if old_subject == new_subject:
        return True
    if isinstance(old_subject, QueryResult) and isinstance(new_subject, QueryResult):
        return old_subject.model == new_subject.model and old_subject.query == new_subject.query
    if isinstance(old_subject, AnalysisResult) and isinstance(new_subject, AnalysisResult):
        return (
            old_subject.analysis == new_subject.analysis
            and old_subject.model == new_subject.model
            and old_subject.spec == new_subject.spec
        )
    return False


def template_regression(
    node: Decomp,
    path: tuple[int, ...],
    template: Template,
    delta: EvolutionSet,
    store: ModelStore,
    annotations: AnnotationStore,
) -> RegValue:
    """Regression of one template-based strategy (the forward-pass kernel).

    Synthesizes a replacement input; on failure everything below is marked
    recheck.  On success the updated subgoals are matched against the existing
    children: unmatched children become obsolete, unmatched new subgoals force
    a revise verdict.
    """
    prov = node.strategy.provenance
    assert isinstance(prov, TemplateInst)
    old_inp = template.input_from_payload(prov.input_payload)
    new_inp = template.synthesize_input(old_inp, node.goal, store, prov.input_from_parent)
    if new_inp is None:
        for i, child in enumerate(node.children):
            _mark_recheck(child, path + (i,), annotations)
        annotations.reasons[path] = "no input satisfying the correctness criterion"
        return RegValue.RECHECK

    evidence_producing = is_evidence_producing(node, template)
    if template.analytic is not None and evidence_producing:
        new_goals = [
            Goal(c.goal.pred, update_subject(c.goal.subject, delta) if c.goal.subject else None)
            for c in node.children
        ]
    else:
        try:
            new_goals = template.instantiate_goals(new_inp, node.goal, store)
        except InstantiationError:
            # the updated input admits no subgoals (e.g. an emptied query
            # result): every existing child is obsolete, nothing is missing
            new_goals = []

    payload = template.input_to_payload(new_inp)
    node.strategy = Strategy(
        node.strategy.label,
        TemplateInst(prov.template_id, payload, digest(payload), prov.input_from_parent),
    )

    matched: dict[int, Goal] = {}
    taken: set[int] = set()
    unmatched_new: list[Goal] = []
    for new_goal in new_goals:
        found = None
        for i, child in enumerate(node.children):
            if i in taken:
                continue
            if _goals_match(new_goal, child.goal, delta):
                found = i
                break
        if found is None:
            unmatched_new.append(new_goal)
        else:
            taken.add(found)
            matched[found] = new_goal
    for i, new_goal in matched.items():
        node.children[i].goal = new_goal
    for i, child in enumerate(node.children):
        if i not in taken:
            annotations.obsolete.add(path + (i,))
    for g in unmatched_new:
        annotations.new_goals.append((path, g))
    if unmatched_new:
        annotations.reasons[path] = "re-instantiation requires new subgoals"
        return RegValue.REVISE
    return RegValue.REUSE


def _mark_recheck(node: AC, path: tuple[int, ...], annotations: AnnotationStore) -> None:
    for sub_path, sub in iter_nodes(node, path):
        annotations.rechecked.add(sub_path)
        annotations.goal_values[sub_path] = RegValue.RECHECK
        if isinstance(sub, Evd):
            annotations.evidence_values[sub_path] = RegValue.RECHECK
        if isinstance(sub, Decomp):
            annotations.strategy_values[sub_path] = RegValue.RECHECK


# --- the forward pass ---


def forward_pass(
    ac: AC,
    delta: EvolutionSet,
    store: ModelStore,
    registry: TemplateRegistry,
    annotations: AnnotationStore,
    path: tuple[int, ...] = (),
) -> None:
    before = ac.goal.subject
    if ac.goal.subject is not None:
        updated = update_subject(ac.goal.subject, delta)
        if updated != before:
            ac.goal = Goal(ac.goal.pred, updated)
    if isinstance(ac, (Und, Evd)):
        return
    assert isinstance(ac, Decomp)
    prov = ac.strategy.provenance
    if isinstance(prov, Manual):
        annotations.strategy_values[path] = RegValue.RECHECK
        annotations.reasons[path] = "manual strategy"
        for i, child in enumerate(ac.children):
            _mark_recheck(child, path + (i,), annotations)
        return
    template = registry.get(prov.template_id)
    if not _subject_modified(ac.goal, delta):
        annotations.strategy_values[path] = RegValue.REUSE
        for i, child in enumerate(ac.children):
            forward_pass(child, delta, store, registry, annotations, path + (i,))
        return
    value = template_regression(ac, path, template, delta, store, annotations)
    annotations.strategy_values[path] = value
    if value is RegValue.RECHECK:
        return
    for i, child in enumerate(ac.children):
        child_path = path + (i,)
        if child_path in annotations.obsolete:
            continue
        forward_pass(child, delta, store, registry, annotations, child_path)


# --- reusable core extraction ---


def extract_reusable_core(ac: AC, annotations: AnnotationStore) -> AC:
    """Prune obsolete subtrees; decompositions losing every child become
    undeveloped goals.  Annotation paths are re-indexed for the core."""

    def rebuild(node: AC, path: tuple[int, ...], new_path: tuple[int, ...], out: AnnotationStore) -> AC:
        if path in annotations.goal_values:
            out.goal_values[new_path] = annotations.goal_values[path]
        if path in annotations.strategy_values:
            out.strategy_values[new_path] = annotations.strategy_values[path]
        if path in annotations.evidence_values:
            out.evidence_values[new_path] = annotations.evidence_values[path]
        if path in annotations.rechecked:
            out.rechecked.add(new_path)
        if path in annotations.reasons:
            out.reasons[new_path] = annotations.reasons[path]
        if not isinstance(node, Decomp):
            return node
        kept: list[AC] = []
        index = 0
        for i, child in enumerate(node.children):
            child_path = path + (i,)
            if child_path in annotations.obsolete:
                continue
            kept.append(rebuild(child, child_path, new_path + (index,), out))
            index += 1
        if not kept:
            return Und(node.goal)
        return Decomp(node.goal, node.strategy, kept)

    fresh = AnnotationStore()
    fresh.new_goals = list(annotations.new_goals)
    core = rebuild(ac, (), (), fresh)
    annotations.goal_values = fresh.goal_values
    annotations.strategy_values = fresh.strategy_values
    annotations.evidence_values = fresh.evidence_values
    annotations.rechecked = fresh.rechecked
    annotations.reasons = fresh.reasons
    annotations.obsolete = set()
    return core


# --- evidence regression and the backward pass ---


def _reverify(goal: Goal, store: ModelStore) -> RegValue:
    """Re-run the recorded analysis on the updated input; RegValue follows the
    verdict status."""
    subject = goal.subject
    if not isinstance(subject, AnalysisResult):
        raise SchemaError("reverification needs an analysis-result goal")
    model = store.get(subject.model.model_id, subject.model.version)
    if not isinstance(model, LTS):
        raise SchemaError("reverification needs a product model")
    output = an.run_product_analysis(subject.analysis, model, an.parse_spec(subject.spec))
    return RegValue.REUSE if output.ok else RegValue.REVISE


def evd_regression(
    delta: EvolutionSet,
    goal: Goal,
    evidence_id: str,
    rp_registry: RPRegistry,
    store: ModelStore,
    annotations: AnnotationStore,
    path: tuple[int, ...],
) -> RegValue:
    if goal.propositional or not _subject_modified(goal, delta):
        value = RegValue.REUSE
    else:
        handle = rp_registry.handle(goal.pred.schema)
        if handle is None or handle.kind == RPHandle.ABSENT:
            value = RegValue.RECHECK
        elif handle.kind == RPHandle.REVERIFY:
            value = _reverify(goal, store)
        else:
            value = handle.func(goal, store)
    annotations.evidence_values[path] = value
    annotations.goal_values[path] = value
    return value


def backward_pass(
    delta: EvolutionSet,
    core: AC,
    rp_registry: RPRegistry,
    store: ModelStore,
    annotations: AnnotationStore,
    path: tuple[int, ...] = (),
) -> RegValue:
    if isinstance(core, Und):
        annotations.goal_values[path] = RegValue.REVISE
        return RegValue.REVISE
    if isinstance(core, Evd):
        if path in annotations.rechecked:
            return RegValue.RECHECK
        return evd_regression(delta, core.goal, core.evidence_id, rp_registry, store, annotations, path)
    strategy_value = annotations.strategy_values.get(path, RegValue.REUSE)
    if strategy_value is RegValue.RECHECK:
        annotations.goal_values[path] = RegValue.RECHECK
        return RegValue.RECHECK
    values = [strategy_value]
    for i, child in enumerate(core.children):
        values.append(backward_pass(delta, child, rp_registry, store, annotations, path + (i,)))
    value = min_reg(values)
    annotations.goal_values[path] = value
    return value


# --- full run ---


@dataclass
class RegressionReport:
    core: AC
    root_value: RegValue
    annotations: AnnotationStore

    def to_json(self) -> dict[str, Any]:
        nodes: dict[str, Any] = {}
        for p, node in iter_nodes(self.core):
            key = path_to_str(p)
            entry: dict[str, Any] = {}
            if p in self.annotations.goal_values:
                entry["regression"] = self.annotations.goal_values[p].symbol
            if p in self.annotations.strategy_values:
                entry["strategy"] = self.annotations.strategy_values[p].symbol
            if p in self.annotations.evidence_values:
                entry["evidence"] = self.annotations.evidence_values[p].symbol
            entry["obsolete"] = p in self.annotations.obsolete
            if p in self.annotations.reasons:
                entry["reason"] = self.annotations.reasons[p]
            nodes[key] = entry
        return {
            "root": self.root_value.symbol,
            "nodes": nodes,
            "newGoals": [
                {"under": path_to_str(p), "goal": goal_to_json(g)} for p, g in self.annotations.new_goals
            ],
        }


def run_regression(
    ac: AC,
    delta: EvolutionSet,
    store: ModelStore,
    registry: TemplateRegistry,
    rp_registry: RPRegistry | None = None,
) -> RegressionReport:
    """Forward pass, core extraction and backward pass over a working copy."""
    rp_registry = rp_registry or default_rp_registry()
    working = copy.deepcopy(ac)
    annotations = AnnotationStore()
    forward_pass(working, delta, store, registry, annotations)
    core = extract_reusable_core(working, annotations)
    root_value = backward_pass(delta, core, rp_registry, store, annotations)
    return RegressionReport(core, root_value, annotations)
