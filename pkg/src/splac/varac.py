"""Variational assurance cases.

Goals carry presence conditions and product-line subjects; deriving an AC for
a configuration prunes absent subtrees and derives every subject.  Support is
lifted through configuration invariance: evidence must cover the invariance
proposition of its goal, and every decomposition must refine its parent under
every configuration where the parent is present.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator

from . import analyses as an
from . import featexpr as fx
from .accore import (
    AC,
    AnalysisResult,
    Atom,
    Decomp,
    Evd,
    Evidence,
    EvidenceLedger,
    Goal,
    ModelElement,
    ModelRef,
    PlainSet,
    PredicateRef,
    QueryResult,
    SetFamily,
    Strategy,
    TemplateInst,
    Und,
    check_refinement,
    digest,
    goal_fingerprint,
    pred_from_json,
    pred_to_json,
    strategy_from_json,
    strategy_to_json,
    verdict_from_json,
    verdict_to_json,
)
from .analyses import Verdict
from .errors import DerivationError, InstantiationError, SchemaError, StructureError
from .plmodel import FTS, LTS, ModelStore, derive_fts
from .featexpr import FALSE, TRUE, FeatureExpr, FeatureModel
from .templates import (
    AnalyticTemplate,
    DomainDecompTemplate,
    EnumerationTemplate,
    QueryTemplate,
    Template,
    TemplateRegistry,
    instantiate as product_instantiate,
)


class _Undefined:
    """Sentinel for deriving a variational singleton outside its guard; never
    equal to any value and never observable from a well-formed AC."""

    def __repr__(self) -> str:
        return "UNDEFINED"


UNDEFINED = _Undefined()


# --- variational subjects ---


@dataclass(frozen=True)
class PLModelRef:
    model_id: str
    version: str


@dataclass(frozen=True)
class VarSingletonElement:
    """A guarded model state; derives to a model element when present."""

    model: PLModelRef
    state: str
    guard: FeatureExpr


@dataclass(frozen=True)
class VarSingletonValue:
    value: Any
    guard: FeatureExpr


@dataclass(frozen=True)
class VarSetValue:
    entries: tuple[tuple[Any, FeatureExpr], ...]


@dataclass(frozen=True)
class VarSetFamily:
    sets: tuple[VarSetValue, ...]


@dataclass(frozen=True)
class VarExplicitValue:
    """Explicit product line of arbitrary values (guarded cells)."""

    cells: tuple[tuple[Any, FeatureExpr], ...]


@dataclass(frozen=True)
class VarQueryResult:
    model: PLModelRef
    query: str
    restrict: FeatureExpr
    entries: tuple[tuple[str, FeatureExpr], ...]


@dataclass(frozen=True)
class VarAnalysisResult:
    analysis: str
    model: PLModelRef
    spec: str
    restrict: FeatureExpr
    cells: tuple[tuple[Verdict, FeatureExpr], ...]

    def all_ok(self) -> bool:
        return all(v.ok for v, _ in self.cells)


VarSubject = (
    PLModelRef
    | VarSingletonElement
    | VarSingletonValue
    | VarSetValue
    | VarSetFamily
    | VarExplicitValue
    | VarQueryResult
    | VarAnalysisResult
)


@dataclass(frozen=True)
class VarGoal:
    pred: PredicateRef
    subject: VarSubject | None
    pc: FeatureExpr

    @property
    def propositional(self) -> bool:
        return self.subject is None


# --- variational AC trees ---


@dataclass
class VUnd:
    goal: VarGoal


@dataclass
class VEvd:
    goal: VarGoal
    evidence_id: str


@dataclass
class VDecomp:
    goal: VarGoal
    strategy: Strategy
    children: list["VarAC"]

    def __post_init__(self) -> None:
        if not self.children:
            raise StructureError("a decomposition needs at least one child")


VarAC = VUnd | VEvd | VDecomp

Path = tuple[int, ...]


def var_root_goal(ac: VarAC) -> VarGoal:
    return ac.goal


def iter_var_nodes(ac: VarAC, path: Path = ()) -> Iterator[tuple[Path, VarAC]]:
    yield path, ac
    if isinstance(ac, VDecomp):
        for i, child in enumerate(ac.children):
            yield from iter_var_nodes(child, path + (i,))


def var_node_at(ac: VarAC, path: Path) -> VarAC:
    node = ac
    for i in path:
        if not isinstance(node, VDecomp):
            raise KeyError(f"path {path} leaves the tree")
        node = node.children[i]
    return node


def replace_var_node(root: VarAC, path: Path, new_node: VarAC) -> VarAC:
    if not path:
        return new_node
    parent = var_node_at(root, path[:-1])
    if not isinstance(parent, VDecomp):
        raise KeyError(f"path {path} leaves the tree")
    parent.children[path[-1]] = new_node
    return root


# --- derivation ---


def derive_subject(subject: VarSubject, config: frozenset[str], fm: FeatureModel):
    if isinstance(subject, PLModelRef):
        return ModelRef(subject.model_id, subject.version)
    if isinstance(subject, VarSingletonElement):
        if not fm.entails(config, subject.guard):
            return UNDEFINED
        return ModelElement(ModelRef(subject.model.model_id, subject.model.version), subject.state)
    if isinstance(subject, VarSingletonValue):
        if not fm.entails(config, subject.guard):
            return UNDEFINED
        return PlainSet((subject.value,))
    if isinstance(subject, VarSetValue):
        present = [v for v, pc in subject.entries if fm.entails(config, pc)]
        return PlainSet(tuple(present))
    if isinstance(subject, VarSetFamily):
        return SetFamily(tuple(derive_subject(s, config, fm).values for s in subject.sets))
    if isinstance(subject, VarExplicitValue):
        for value, guard in subject.cells:
            if fm.entails(config, guard):
                return Atom(value)
        raise DerivationError("explicit value cells do not cover the requested configuration")
    if isinstance(subject, VarQueryResult):
        states = tuple(sorted(sid for sid, pc in subject.entries if fm.entails(config, pc)))
        return QueryResult(ModelRef(subject.model.model_id, subject.model.version), subject.query, states)
    if isinstance(subject, VarAnalysisResult):
        output = None
        for verdict, guard in subject.cells:
            if fm.entails(config, guard):
                output = verdict
                break
        if output is None:
            raise DerivationError("analysis cells do not cover the requested configuration")
        model = ModelRef(subject.model.model_id, subject.model.version)
        return AnalysisResult(subject.analysis, model, subject.spec, output)
    raise SchemaError(f"unknown variational subject {subject!r}")


def derive_var_goal(goal: VarGoal, config: Iterable[str], fm: FeatureModel) -> Goal:
    cfg = frozenset(config)
    if not fm.admits(cfg) or not fm.entails(cfg, goal.pc):
        raise DerivationError(
            f"configuration {sorted(cfg)} does not satisfy the goal's presence condition"
        )
    if goal.propositional:
        return Goal(goal.pred)
    derived = derive_subject(goal.subject, cfg, fm)
    assert derived is not UNDEFINED, "undefined singleton observed from a present goal"
    return Goal(goal.pred, derived)


def _derive_template_input(template: Template, payload: Any, config: frozenset[str], fm: FeatureModel) -> Any:
    inp = var_input_from_payload(template, payload)
    if isinstance(template, AnalyticTemplate):
        model, spec = inp
        product_ref = {"id": model.model_id, "version": model.version}
        if isinstance(template, QueryTemplate):
            return {"model": product_ref, "query": spec}
        return {"model": product_ref, "spec": spec}
    if isinstance(template, EnumerationTemplate):
        derived = derive_subject(inp, config, fm)
        return template.input_to_payload(derived)
    if isinstance(template, DomainDecompTemplate):
        derived = derive_subject(inp, config, fm)
        return template.input_to_payload(derived)
    raise SchemaError(f"cannot derive input for template {template.template_id!r}")


def derive_var_ac(
    ac: VarAC, config: Iterable[str], fm: FeatureModel, registry: TemplateRegistry | None = None
) -> AC:
    """Product AC for ``config``: absent subtrees are pruned; a decomposition
    with no surviving children becomes an undeveloped goal."""
    cfg = frozenset(config)
    goal = derive_var_goal(ac.goal, cfg, fm)
    if isinstance(ac, VUnd):
        return Und(goal)
    if isinstance(ac, VEvd):
        return Evd(goal, ac.evidence_id)
    surviving = [child for child in ac.children if fm.entails(cfg, child.goal.pc)]
    if not surviving:
        return Und(goal)
    strategy = ac.strategy
    if isinstance(strategy.provenance, TemplateInst) and registry is not None:
        template = registry.get(strategy.provenance.template_id)
        payload = _derive_template_input(template, strategy.provenance.input_payload, cfg, fm)
        strategy = Strategy(
            strategy.label,
            TemplateInst(
                strategy.provenance.template_id,
                payload,
                digest(payload),
                strategy.provenance.input_from_parent,
            ),
        )
    return Decomp(goal, strategy, [derive_var_ac(c, cfg, fm, registry) for c in surviving])


def derive_store(store: ModelStore, config: Iterable[str], fm: FeatureModel | None = None) -> ModelStore:
    """Per-configuration product store: every FTS is derived, products pass
    through.  ``fm`` (when given) replaces each model's own feature model, e.g.
    for runs under a restricted one."""
    cfg = frozenset(config)
    out = ModelStore()
    for model_id in store.ids():
        for version in store.versions(model_id):
            model = store.get(model_id, version)
            if isinstance(model, FTS):
                try:
                    if fm is not None:
                        model = model.with_feature_model(fm)
                    if model.feature_model.admits(cfg):
                        out.register(model_id, version, derive_fts(model, cfg))
                except AlphabetError:
                    continue  # not expressible under the feature model in force
            else:
                out.register(model_id, version, model)
    return out


# --- fingerprints, ledger derivation ---


def var_subject_to_json(subject: VarSubject) -> dict[str, Any]:
    if isinstance(subject, PLModelRef):
        return {"kind": "pl-model", "id": subject.model_id, "version": subject.version}
    if isinstance(subject, VarSingletonElement):
        return {
            "kind": "var-element",
            "model": {"id": subject.model.model_id, "version": subject.model.version},
            "state": subject.state,
            "guard": fx.to_str(subject.guard),
        }
    if isinstance(subject, VarSingletonValue):
        return {"kind": "var-singleton", "value": subject.value, "guard": fx.to_str(subject.guard)}
    if isinstance(subject, VarSetValue):
        return {
            "kind": "var-set",
            "entries": [{"value": v, "pc": fx.to_str(pc)} for v, pc in subject.entries],
        }
    if isinstance(subject, VarSetFamily):
        return {"kind": "var-family", "sets": [var_subject_to_json(s) for s in subject.sets]}
    if isinstance(subject, VarExplicitValue):
        return {
            "kind": "var-explicit",
            "cells": [{"value": v, "guard": fx.to_str(g)} for v, g in subject.cells],
        }
    if isinstance(subject, VarQueryResult):
        return {
            "kind": "var-query-result",
            "model": {"id": subject.model.model_id, "version": subject.model.version},
            "query": subject.query,
            "restrict": fx.to_str(subject.restrict),
            "entries": [{"value": sid, "pc": fx.to_str(pc)} for sid, pc in subject.entries],
        }
    if isinstance(subject, VarAnalysisResult):
        return {
            "kind": "var-analysis-result",
            "analysis": subject.analysis,
            "model": {"id": subject.model.model_id, "version": subject.model.version},
            "spec": subject.spec,
            "restrict": fx.to_str(subject.restrict),
            "cells": [
                {"output": verdict_to_json(v), "guard": fx.to_str(g)} for v, g in subject.cells
            ],
        }
    raise SchemaError(f"unknown variational subject {subject!r}")


def var_subject_from_json(data: dict[str, Any]) -> VarSubject:
    kind = data["kind"]
    if kind == "pl-model":
        return PLModelRef(data["id"], data["version"])
    if kind == "var-element":
        return VarSingletonElement(
            PLModelRef(data["model"]["id"], data["model"]["version"]),
            data["state"],
            fx.parse(data["guard"]),
        )
    if kind == "var-singleton":
        return VarSingletonValue(data["value"], fx.parse(data["guard"]))
    if kind == "var-set":
        return VarSetValue(tuple((e["value"], fx.parse(e["pc"])) for e in data["entries"]))
    if kind == "var-family":
        return VarSetFamily(tuple(var_subject_from_json(s) for s in data["sets"]))
    if kind == "var-explicit":
        return VarExplicitValue(tuple((c["value"], fx.parse(c["guard"])) for c in data["cells"]))
    if kind == "var-query-result":
        return VarQueryResult(
            PLModelRef(data["model"]["id"], data["model"]["version"]),
            data["query"],
            fx.parse(data["restrict"]),
            tuple((e["value"], fx.parse(e["pc"])) for e in data["entries"]),
        )
    if kind == "var-analysis-result":
        return VarAnalysisResult(
            data["analysis"],
            PLModelRef(data["model"]["id"], data["model"]["version"]),
            data["spec"],
            fx.parse(data["restrict"]),
            tuple((verdict_from_json(c["output"]), fx.parse(c["guard"])) for c in data["cells"]),
        )
    raise SchemaError(f"unknown variational subject kind {kind!r}")


def var_goal_to_json(goal: VarGoal) -> dict[str, Any]:
    out: dict[str, Any] = {"pred": pred_to_json(goal.pred), "pc": fx.to_str(goal.pc)}
    if goal.subject is not None:
        out["subject"] = var_subject_to_json(goal.subject)
    return out


def var_goal_from_json(data: dict[str, Any]) -> VarGoal:
    subject = var_subject_from_json(data["subject"]) if "subject" in data else None
    return VarGoal(pred_from_json(data["pred"]), subject, fx.parse(data["pc"]))


def var_ac_to_json(ac: VarAC) -> dict[str, Any]:
    if isinstance(ac, VUnd):
        return {"kind": "und", "goal": var_goal_to_json(ac.goal)}
    if isinstance(ac, VEvd):
        return {"kind": "evd", "goal": var_goal_to_json(ac.goal), "evidence": ac.evidence_id}
    return {
        "kind": "decomp",
        "goal": var_goal_to_json(ac.goal),
        "strategy": strategy_to_json(ac.strategy),
        "children": [var_ac_to_json(c) for c in ac.children],
    }


def var_ac_from_json(data: dict[str, Any]) -> VarAC:
    kind = data["kind"]
    goal = var_goal_from_json(data["goal"])
    if kind == "und":
        return VUnd(goal)
    if kind == "evd":
        return VEvd(goal, data["evidence"])
    if kind == "decomp":
        return VDecomp(
            goal, strategy_from_json(data["strategy"]), [var_ac_from_json(c) for c in data["children"]]
        )
    raise StructureError(f"unknown variational AC node kind {kind!r}")


def var_goal_fingerprint(goal: VarGoal, fm: FeatureModel) -> str:
    """Propositional goals share the product fingerprint (their evidence is
    configuration-independent); predicative goals bind evidence to the
    invariance proposition over their presence condition."""
    if goal.propositional:
        return goal_fingerprint(Goal(goal.pred))
    return digest(
        {
            "inv": pred_to_json(goal.pred),
            "subject": var_subject_to_json(goal.subject),
            "pc": fx.canonical_str(goal.pc, fx.names_of(goal.pc)),
        }
    )


def derive_ledger(ledger: EvidenceLedger, ac: VarAC, config: Iterable[str], fm: FeatureModel) -> EvidenceLedger:
    """Product ledger induced by a configuration: every evidence binding on a
    present goal carries over to the derived goal's fingerprint."""
    cfg = frozenset(config)
    out = EvidenceLedger()
    for eid, record in ledger.evidence.items():
        out.add_evidence(record)
    for _, node in iter_var_nodes(ac):
        if not isinstance(node, VEvd):
            continue
        if not fm.entails(cfg, node.goal.pc):
            continue
        adequate = ledger.adequate(node.evidence_id, var_goal_fingerprint(node.goal, fm))
        derived_goal = derive_var_goal(node.goal, cfg, fm)
        out.set_adequate(node.evidence_id, goal_fingerprint(derived_goal), adequate)
    return out


# --- well-formedness, invariance, variational support ---


def well_formed(ac: VarAC, fm: FeatureModel) -> bool:
    """Every child's presence condition implies its parent's (Def of
    well-formed decompositions)."""
    for _, node in iter_var_nodes(ac):
        if isinstance(node, VDecomp):
            for child in node.children:
                if not fx.implies(child.goal.pc, node.goal.pc, fm.alphabet):
                    return False
    return True


def inv(
    predicate: Callable[[frozenset[str]], bool], scope: FeatureExpr, fm: FeatureModel
) -> bool:
    """Configuration invariance: the per-configuration predicate holds for
    every valid configuration satisfying ``scope``."""
    return all(predicate(cfg) for cfg in fm.configurations(scope))


def supp_var(
    ac: VarAC,
    ledger: EvidenceLedger,
    registry: TemplateRegistry,
    store: ModelStore,
    fm: FeatureModel,
) -> bool:
    """Lifted support.  Evidence binds to invariance propositions; every
    decomposition must leave at least one child and refine its parent under
    every configuration where the parent is present."""
    if not well_formed(ac, fm):
        raise StructureError("variational AC is not well-formed")
    return _supp_var(ac, ledger, registry, store, fm)


def _supp_var(ac, ledger, registry, store, fm) -> bool:
    if isinstance(ac, VUnd):
        return False
    if isinstance(ac, VEvd):
        return ledger.adequate(ac.evidence_id, var_goal_fingerprint(ac.goal, fm))
    if not all(_supp_var(child, ledger, registry, store, fm) for child in ac.children):
        return False

    def refines_at(cfg: frozenset[str]) -> bool:
        surviving = [c for c in ac.children if fm.entails(cfg, c.goal.pc)]
        if not surviving:
            return False  # refinement excludes empty premise sets
        parent = derive_var_goal(ac.goal, cfg, fm)
        strategy = ac.strategy
        if isinstance(strategy.provenance, TemplateInst):
            template = registry.get(strategy.provenance.template_id)
            payload = _derive_template_input(template, strategy.provenance.input_payload, cfg, fm)
            strategy = Strategy(
                strategy.label,
                TemplateInst(strategy.provenance.template_id, payload, digest(payload)),
            )
        derived_children = [Und(derive_var_goal(c.goal, cfg, fm)) for c in surviving]
        return check_refinement(parent, strategy, derived_children, registry, derive_store(store, cfg, fm))

    return inv(refines_at, ac.goal.pc, fm)


# --- lifted instantiation ---


def var_input_from_payload(template: Template, payload: Any):
    """Decode a lifted instantiation input recorded in strategy provenance."""
    if isinstance(template, AnalyticTemplate):
        model = PLModelRef(payload["model"]["id"], payload["model"]["version"])
        if isinstance(template, QueryTemplate):
            return (model, payload["query"])
        return (model, payload["spec"])
    if isinstance(template, EnumerationTemplate):
        return var_subject_from_json(payload)
    if isinstance(template, DomainDecompTemplate):
        return var_subject_from_json(payload)
    raise SchemaError(f"template {template.template_id!r} has no lifted input encoding")


def var_input_to_payload(template: Template, inp) -> Any:
    if isinstance(template, AnalyticTemplate):
        model, spec = inp
        ref = {"id": model.model_id, "version": model.version}
        if isinstance(template, QueryTemplate):
            return {"model": ref, "query": spec}
        return {"model": ref, "spec": spec}
    if isinstance(template, (EnumerationTemplate, DomainDecompTemplate)):
        return var_subject_to_json(inp)
    raise SchemaError(f"template {template.template_id!r} has no lifted input encoding")


def _resolve_fts(store: ModelStore, ref: PLModelRef) -> FTS:
    model = store.get(ref.model_id, ref.version)
    if not isinstance(model, FTS):
        raise SchemaError(f"model {ref.model_id!r}@{ref.version!r} is not a product-line model")
    return model


def variational_correctness(
    template: Template, inp, parent: VarGoal, store: ModelStore, fm: FeatureModel
) -> bool:
    """Inv(C): the product correctness criterion holds under every valid
    configuration satisfying the parent's presence condition."""

    def holds_at(cfg: frozenset[str]) -> bool:
        product_inp = template.input_from_payload(
            _derive_template_input(template, var_input_to_payload(template, inp), cfg, fm)
        )
        parent_goal = derive_var_goal(parent, cfg, fm)
        return template.correctness(product_inp, parent_goal, derive_store(store, cfg, fm))

    return inv(holds_at, parent.pc, fm)


def _lift_analytic_goals(
    template: AnalyticTemplate,
    inp: tuple[PLModelRef, str],
    parent: VarGoal,
    store: ModelStore,
    fm: FeatureModel,
) -> list[VarGoal]:
    model_ref, spec_text = inp
    model = _resolve_fts(store, model_ref).with_feature_model(fm)
    pc = parent.pc
    g_x = VarGoal(
        PredicateRef("spec-adequate", (("analysis", template.analysis_id), ("content", spec_text))),
        None,
        pc,
    )
    g_f = VarGoal(PredicateRef("analysis-sound", (("analysis", template.analysis_id),)), None, pc)
    g_lift = VarGoal(PredicateRef("lift-correct", (("analysis", template.analysis_id),)), None, pc)
    if isinstance(template, QueryTemplate):
        result = an.query_fts(model, an.parse_query(spec_text), pc)
        response = parent.pred.param("response")
        g_y = VarGoal(
            PredicateRef("forall", (("element_response", response),)),
            VarQueryResult(model_ref, spec_text, pc, result.entries),
            pc,
        )
    else:
        output = an.run_lifted_analysis(template.analysis_id, model, template._spec_obj(spec_text), pc)
        g_y = VarGoal(
            PredicateRef("result-ok"),
            VarAnalysisResult(template.analysis_id, model_ref, spec_text, pc, output.cells),
            pc,
        )
    return [g_x, g_y, g_f, g_lift]


def _lift_enumeration_goals(
    template: EnumerationTemplate, inp, parent: VarGoal, fm: FeatureModel
) -> list[VarGoal]:
    pc = parent.pc
    if isinstance(inp, VarQueryResult):
        if not inp.entries:
            raise InstantiationError("cannot enumerate an empty variational query result")
        response = parent.pred.param("element_response")
        pred = PredicateRef("element-response-safe", (("response", response),))
        return [
            VarGoal(
                pred,
                VarSingletonElement(inp.model, sid, guard),
                fx.simplify(fx.And(pc, guard), fm.alphabet),
            )
            for sid, guard in inp.entries
        ]
    if isinstance(inp, VarSetValue):
        if not inp.entries:
            raise InstantiationError("cannot enumerate an empty variational set")
        return [
            VarGoal(
                parent.pred,
                VarSingletonValue(value, guard),
                fx.simplify(fx.And(pc, guard), fm.alphabet),
            )
            for value, guard in inp.entries
        ]
    raise SchemaError("lifted enumeration input must be a variational set or query result")


def _lift_domain_decomp_goals(
    template: DomainDecompTemplate, inp: VarSetFamily, parent: VarGoal
) -> list[VarGoal]:
    if not inp.sets:
        raise InstantiationError("variational domain decomposition needs at least one subset")
    return [VarGoal(parent.pred, s, parent.pc) for s in inp.sets]


def lift_instantiate_goals(
    template: Template, inp, parent: VarGoal, store: ModelStore, fm: FeatureModel
) -> list[VarGoal]:
    if isinstance(template, AnalyticTemplate):
        return _lift_analytic_goals(template, inp, parent, store, fm)
    if isinstance(template, EnumerationTemplate):
        return _lift_enumeration_goals(template, inp, parent, fm)
    if isinstance(template, DomainDecompTemplate):
        return _lift_domain_decomp_goals(template, inp, parent)
    raise SchemaError(f"template {template.template_id!r} has no lifted instantiation")


def lift_instantiate(
    template: Template,
    inp,
    parent: VarGoal,
    store: ModelStore,
    fm: FeatureModel,
    label: str | None = None,
    input_from_parent: bool = False,
) -> VDecomp:
    """Lifted template instantiation; rejects inputs failing the variational
    correctness criterion."""
    if parent.pred.schema != template.parent_schema:
        raise SchemaError(
            f"template {template.template_id!r} decomposes {template.parent_schema!r} goals,"
            f" got {parent.pred.schema!r}"
        )
    if not variational_correctness(template, inp, parent, store, fm):
        raise InstantiationError(
            f"variational correctness criterion of {template.template_id!r} rejected the input"
        )
    goals = lift_instantiate_goals(template, inp, parent, store, fm)
    if not goals:
        raise InstantiationError("lifted instantiation produced no subgoals")
    payload = var_input_to_payload(template, inp)
    strategy = Strategy(
        label or template.template_id,
        TemplateInst(template.template_id, payload, digest(payload), input_from_parent),
    )
    return VDecomp(parent, strategy, [VUnd(g) for g in goals])


# --- evidence helpers ---


def var_manual_evidence(
    ledger: EvidenceLedger,
    goal: VarGoal,
    fm: FeatureModel,
    evidence_id: str | None = None,
    adequate: bool = True,
) -> str:
    eid = evidence_id or f"ev-{var_goal_fingerprint(goal, fm)[:12]}"
    ledger.add_evidence(Evidence(eid, "manual", ""))
    ledger.set_adequate(eid, var_goal_fingerprint(goal, fm), adequate=adequate)
    return eid


def var_evidence_for_verdict(
    ledger: EvidenceLedger, goal: VarGoal, fm: FeatureModel, evidence_id: str | None = None
) -> str:
    """Auto-entry for a lifted verdict goal: adequate exactly when every cell
    over the goal's presence condition is Ok."""
    if not isinstance(goal.subject, VarAnalysisResult):
        raise SchemaError("lifted verdict evidence needs a variational analysis-result goal")
    eid = evidence_id or f"ev-{var_goal_fingerprint(goal, fm)[:12]}"
    ledger.add_evidence(Evidence(eid, "analysis-result", digest(var_subject_to_json(goal.subject))))
    ledger.set_adequate(eid, var_goal_fingerprint(goal, fm), adequate=goal.subject.all_ok())
    return eid


def support_var_leaf(
    root: VarAC, path: Path, ledger: EvidenceLedger, fm: FeatureModel, evidence_id: str | None = None
) -> str:
    node = var_node_at(root, path)
    if not isinstance(node, VUnd):
        raise StructureError(f"node at {path} is not an undeveloped goal")
    if isinstance(node.goal.subject, VarAnalysisResult):
        eid = var_evidence_for_verdict(ledger, node.goal, fm, evidence_id)
    else:
        eid = var_manual_evidence(ledger, node.goal, fm, evidence_id)
    replace_var_node(root, path, VEvd(node.goal, eid))
    return eid
