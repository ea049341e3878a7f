"""Verifiable decomposition templates.

A template bundles the predicate schema it can decompose, an instantiation
function producing the subgoals, and a decidable correctness criterion that
guarantees the decomposition is a sound refinement whenever it holds.  The
four built-ins: domain decomposition and enumeration over sets, and the two
analytic templates that execute an analysis and argue from its input adequacy,
output, and the analysis' own soundness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from . import analyses as an
from . import featexpr as fx
from .accore import (
    AC,
    AnalysisResult,
    Decomp,
    Goal,
    ModelElement,
    ModelRef,
    PlainSet,
    PredicateRef,
    QueryResult,
    SetFamily,
    Strategy,
    Subject,
    TemplateInst,
    Und,
    digest,
    goal_fingerprint,
)
from .errors import InstantiationError, ProvenanceError, SchemaError
from .plmodel import LTS, ModelStore


@dataclass(frozen=True)
class AnalysisBinding:
    """Which analysis an analytic template runs and where its subgoals sit."""

    analysis_id: str
    gx_index: int
    gy_index: int
    gf_index: int


def _resolve_lts(store: ModelStore, ref: ModelRef) -> LTS:
    model = store.get(ref.model_id, ref.version)
    if not isinstance(model, LTS):
        raise SchemaError(f"model {ref.model_id!r}@{ref.version!r} is not a product model")
    return model


def _parent_set(parent: Goal) -> tuple[Any, ...]:
    if isinstance(parent.subject, QueryResult):
        return parent.subject.states
    if isinstance(parent.subject, PlainSet):
        return parent.subject.values
    raise SchemaError("expected a set-valued parent subject")


class Template:
    template_id: str = ""
    parent_schema: str = ""
    analytic: AnalysisBinding | None = None
    evidence_producing_default: bool = False

    # input encoding
    def input_from_payload(self, payload: Any):
        raise NotImplementedError

    def input_to_payload(self, inp) -> Any:
        raise NotImplementedError

    # template semantics
    def correctness(self, inp, parent: Goal, store: ModelStore) -> bool:
        raise NotImplementedError

    def instantiate_goals(self, inp, parent: Goal, store: ModelStore) -> list[Goal]:
        raise NotImplementedError

    def synthesize_input(self, old_inp, parent: Goal, store: ModelStore, from_parent: bool):
        """A new input satisfying the correctness criterion for the updated
        parent, or None when none can be derived automatically."""
        raise NotImplementedError


class DomainDecompTemplate(Template):
    """Split a forall goal across a covering family of subsets."""

    template_id = "domain-decomp"
    parent_schema = "forall"

    def input_from_payload(self, payload: Any) -> SetFamily:
        return SetFamily(tuple(tuple(s) for s in payload["sets"]))

    def input_to_payload(self, inp: SetFamily) -> Any:
        return {"sets": [list(s) for s in inp.sets]}

    def correctness(self, inp: SetFamily, parent: Goal, store: ModelStore) -> bool:
        union: set[Any] = set()
        for s in inp.sets:
            union.update(s)
        return set(_parent_set(parent)) <= union

    def instantiate_goals(self, inp: SetFamily, parent: Goal, store: ModelStore) -> list[Goal]:
        if not inp.sets:
            raise InstantiationError("domain decomposition needs at least one subset")
        return [Goal(parent.pred, PlainSet(tuple(s))) for s in inp.sets]

    def synthesize_input(self, old_inp, parent, store, from_parent):
        if old_inp is not None and self.correctness(old_inp, parent, store):
            return old_inp
        return None


class EnumerationTemplate(Template):
    """Split a forall goal over a finite set into one goal per element."""

    template_id = "enumeration"
    parent_schema = "forall"

    def input_from_payload(self, payload: Any) -> Subject:
        if isinstance(payload, dict) and payload.get("kind") == "query-result":
            from .accore import subject_from_json

            return subject_from_json(payload)
        return PlainSet(tuple(payload["values"]))

    def input_to_payload(self, inp: Subject) -> Any:
        from .accore import subject_to_json

        return subject_to_json(inp)

    def correctness(self, inp: Subject, parent: Goal, store: ModelStore) -> bool:
        if isinstance(inp, QueryResult) and isinstance(parent.subject, QueryResult):
            return inp == parent.subject
        if isinstance(inp, PlainSet) and isinstance(parent.subject, PlainSet):
            return set(inp.values) == set(parent.subject.values)
        return False

    def _element_pred(self, parent: Goal) -> PredicateRef:
        response = parent.pred.param("element_response")
        return PredicateRef("element-response-safe", (("response", response),))

    def instantiate_goals(self, inp: Subject, parent: Goal, store: ModelStore) -> list[Goal]:
        if isinstance(inp, QueryResult):
            if not inp.states:
                raise InstantiationError("cannot enumerate an empty query result")
            pred = self._element_pred(parent)
            return [Goal(pred, ModelElement(inp.model, sid)) for sid in inp.states]
        if isinstance(inp, PlainSet):
            if not inp.values:
                raise InstantiationError("cannot enumerate an empty set")
            return [Goal(parent.pred, PlainSet((v,))) for v in inp.values]
        raise SchemaError("enumeration input must be a query result or a plain set")

    def synthesize_input(self, old_inp, parent, store, from_parent):
        if from_parent and isinstance(parent.subject, (QueryResult, PlainSet)):
            return parent.subject
        if old_inp is not None and self.correctness(old_inp, parent, store):
            return old_inp
        return None


class AnalyticTemplate(Template):
    """Shared machinery: run the bound analysis, argue from spec adequacy
    (g_X), the produced output (g_Y) and analysis soundness (g_f)."""

    analysis_id: str = ""
    analytic = None  # set by subclasses

    def input_from_payload(self, payload: Any) -> tuple[ModelRef, str]:
        return (ModelRef(payload["model"]["id"], payload["model"]["version"]), payload["spec"])

    def input_to_payload(self, inp: tuple[ModelRef, str]) -> Any:
        model, spec = inp
        return {"model": {"id": model.model_id, "version": model.version}, "spec": spec}

    def _parent_model(self, parent: Goal) -> ModelRef:
        if isinstance(parent.subject, ModelRef):
            return parent.subject
        if isinstance(parent.subject, ModelElement):
            return parent.subject.model
        raise SchemaError(f"template {self.template_id!r} needs a model-backed parent goal")

    def correctness(self, inp: tuple[ModelRef, str], parent: Goal, store: ModelStore) -> bool:
        model, _ = inp
        return model == self._parent_model(parent)

    def _spec_obj(self, spec_text: str):
        raise NotImplementedError

    def _run(self, model_ref: ModelRef, spec_text: str, store: ModelStore) -> AnalysisResult:
        model = _resolve_lts(store, model_ref)
        output = an.run_product_analysis(self.analysis_id, model, self._spec_obj(spec_text))
        return AnalysisResult(self.analysis_id, model_ref, spec_text, output)

    def _prop_goals(self, spec_text: str) -> tuple[Goal, Goal]:
        g_x = Goal(
            PredicateRef(
                "spec-adequate", (("analysis", self.analysis_id), ("content", spec_text))
            )
        )
        g_f = Goal(PredicateRef("analysis-sound", (("analysis", self.analysis_id),)))
        return g_x, g_f

    def instantiate_goals(self, inp: tuple[ModelRef, str], parent: Goal, store: ModelStore) -> list[Goal]:
        model_ref, spec_text = inp
        g_x, g_f = self._prop_goals(spec_text)
        g_y = Goal(PredicateRef("result-ok"), self._run(model_ref, spec_text, store))
        return [g_x, g_y, g_f]

    def synthesize_input(self, old_inp, parent, store, from_parent):
        spec_text = old_inp[1] if old_inp else None
        if spec_text is None:
            return None
        candidate = (self._parent_model(parent), spec_text)
        if self.correctness(candidate, parent, store):
            return candidate
        return None


class ResponseCheckTemplate(AnalyticTemplate):
    """Model checking of the response property against a model-level goal."""

    template_id = "check-response"
    parent_schema = "response-holds"
    analysis_id = an.RESPONSE_CHECK
    analytic = AnalysisBinding(an.RESPONSE_CHECK, gx_index=0, gy_index=1, gf_index=2)
    evidence_producing_default = True

    def _spec_obj(self, spec_text: str):
        spec = an.parse_spec(spec_text)
        if not isinstance(spec, an.Response):
            raise SchemaError("check-response needs a response spec")
        return spec


class ElementResponseCheckTemplate(AnalyticTemplate):
    """Model checking dispatched from a per-state response goal; the spec's
    trigger label must identify the state the goal is about."""

    template_id = "check-element-response"
    parent_schema = "element-response-safe"
    analysis_id = an.RESPONSE_CHECK
    analytic = AnalysisBinding(an.RESPONSE_CHECK, gx_index=0, gy_index=1, gf_index=2)
    evidence_producing_default = True

    def _spec_obj(self, spec_text: str):
        spec = an.parse_spec(spec_text)
        if not isinstance(spec, an.Response):
            raise SchemaError("check-element-response needs a response spec")
        return spec

    def correctness(self, inp: tuple[ModelRef, str], parent: Goal, store: ModelStore) -> bool:
        if not super().correctness(inp, parent, store):
            return False
        assert isinstance(parent.subject, ModelElement)
        model_ref, spec_text = inp
        spec = self._spec_obj(spec_text)
        if spec.response != parent.pred.param("response"):
            return False
        model = store.get(model_ref.model_id, model_ref.version)
        if isinstance(model, LTS):
            try:
                state = model.state(parent.subject.state)
            except KeyError:
                return False
            return spec.trigger in state.labels
        # product-line models are handled by the lifted instantiation path
        for state in model.states:
            if state.id == parent.subject.state:
                return spec.trigger in state.labels
        return False


class AfterActionCheckTemplate(AnalyticTemplate):
    template_id = "check-after-action"
    parent_schema = "after-action-safe-holds"
    analysis_id = an.AFTER_ACTION_CHECK
    analytic = AnalysisBinding(an.AFTER_ACTION_CHECK, gx_index=0, gy_index=1, gf_index=2)
    evidence_producing_default = True

    def _spec_obj(self, spec_text: str):
        spec = an.parse_spec(spec_text)
        if not isinstance(spec, an.AfterActionSafe):
            raise SchemaError("check-after-action needs an after-action spec")
        return spec


class QueryTemplate(AnalyticTemplate):
    """Querying analytic template: the query output becomes a forall goal to
    be supported by further argumentation (argument-producing)."""

    template_id = "query-states"
    parent_schema = "all-matching-safe"
    analysis_id = an.QUERY
    analytic = AnalysisBinding(an.QUERY, gx_index=0, gy_index=1, gf_index=2)
    evidence_producing_default = False

    def input_from_payload(self, payload: Any) -> tuple[ModelRef, str]:
        return (ModelRef(payload["model"]["id"], payload["model"]["version"]), payload["query"])

    def input_to_payload(self, inp: tuple[ModelRef, str]) -> Any:
        model, query = inp
        return {"model": {"id": model.model_id, "version": model.version}, "query": query}

    def instantiate_goals(self, inp: tuple[ModelRef, str], parent: Goal, store: ModelStore) -> list[Goal]:
        model_ref, query_text = inp
        model = _resolve_lts(store, model_ref)
        states = tuple(an.query_lts(model, an.parse_query(query_text)))
        response = parent.pred.param("response")
        g_x = Goal(
            PredicateRef("spec-adequate", (("analysis", self.analysis_id), ("content", query_text)))
        )
        g_y = Goal(
            PredicateRef("forall", (("element_response", response),)),
            QueryResult(model_ref, query_text, states),
        )
        g_f = Goal(PredicateRef("analysis-sound", (("analysis", self.analysis_id),)))
        return [g_x, g_y, g_f]


class TemplateRegistry:
    def __init__(self) -> None:
        self._templates: dict[str, Template] = {}

    def register(self, template: Template) -> None:
        self._templates[template.template_id] = template

    def get(self, template_id: str) -> Template:
        try:
            return self._templates[template_id]
        except KeyError:
            raise ProvenanceError(f"unknown template {template_id!r}") from None

    def ids(self) -> list[str]:
        return sorted(self._templates)


def default_registry() -> TemplateRegistry:
    registry = TemplateRegistry()
    for cls in (
        DomainDecompTemplate,
        EnumerationTemplate,
        ResponseCheckTemplate,
        ElementResponseCheckTemplate,
        AfterActionCheckTemplate,
        QueryTemplate,
    ):
        registry.register(cls())
    return registry


def instantiate(
    template: Template,
    inp,
    parent: Goal,
    store: ModelStore,
    label: str | None = None,
    input_from_parent: bool = False,
) -> Decomp:
    """Decompose ``parent`` with ``template``: checks the schema and the
    correctness criterion, then produces a Decomp with undeveloped children."""
    if parent.pred.schema != template.parent_schema:
        raise SchemaError(
            f"template {template.template_id!r} decomposes {template.parent_schema!r} goals,"
            f" got {parent.pred.schema!r}"
        )
    if not template.correctness(inp, parent, store):
        raise InstantiationError(f"correctness criterion of {template.template_id!r} rejected the input")
    goals = template.instantiate_goals(inp, parent, store)
    if not goals:
        raise InstantiationError("instantiation produced no subgoals")
    payload = template.input_to_payload(inp)
    strategy = Strategy(
        label or template.template_id,
        TemplateInst(template.template_id, payload, digest(payload), input_from_parent),
    )
    return Decomp(parent, strategy, [Und(g) for g in goals])
