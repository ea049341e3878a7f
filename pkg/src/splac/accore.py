"""Product-level assurance cases.

An assurance case is a tree of goals: an undeveloped goal, a goal supported by
an evidence artifact, or a goal decomposed by a strategy into child cases.
Support is the usual semantics: every leaf carries adequate evidence and every
decomposition is a sound refinement.  Evidence adequacy is a ledger, not a
proof checker; analysis-produced verdicts are auto-entered for their result
goals, human judgements (spec adequacy, analysis soundness, reviews) are
manual entries.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from typing import Any, Iterable, Iterator

from . import analyses as an
from . import featexpr as fx
from .analyses import Trace, Verdict
from .errors import LedgerError, ProvenanceError, SchemaError, StructureError
from .plmodel import LTS, ModelStore


def digest(payload: Any) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


# --- subjects ---


@dataclass(frozen=True)
class ModelRef:
    """A versioned reference into the model store."""

    model_id: str
    version: str


@dataclass(frozen=True)
class ModelElement:
    """A state of a specific model version."""

    model: ModelRef
    state: str


@dataclass(frozen=True)
class QueryResult:
    """The output of a query analysis, together with the input that produced it."""

    model: ModelRef
    query: str  # mini-syntax text
    states: tuple[str, ...]


@dataclass(frozen=True)
class AnalysisResult:
    """The output of a checking analysis, together with the input that produced it."""

    analysis: str
    model: ModelRef
    spec: str  # mini-syntax text
    output: Verdict


@dataclass(frozen=True)
class PlainSet:
    values: tuple[Any, ...]


@dataclass(frozen=True)
class SetFamily:
    sets: tuple[tuple[Any, ...], ...]


@dataclass(frozen=True)
class Atom:
    """A bare inline value (e.g. a product derived from an explicit product line)."""

    value: Any


Subject = ModelRef | ModelElement | QueryResult | AnalysisResult | PlainSet | SetFamily | Atom


@dataclass(frozen=True)
class PredicateRef:
    """A predicate schema id with its bound parameters."""

    schema: str
    params: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(sorted(self.params)))

    def param(self, key: str) -> str:
        for k, v in self.params:
            if k == key:
                return v
        raise SchemaError(f"predicate {self.schema!r} missing parameter {key!r}")


@dataclass(frozen=True)
class Goal:
    """Propositional (no subject) or predicative (subject + predicate) goal."""

    pred: PredicateRef
    subject: Subject | None = None

    @property
    def propositional(self) -> bool:
        return self.subject is None


# --- predicate schema registry ---

PROP_SCHEMAS = {"spec-adequate", "analysis-sound", "lift-correct", "claim"}

PRED_SCHEMAS = {
    "forall",                    # subject: QueryResult | PlainSet
    "element-response-safe",     # subject: ModelElement
    "response-holds",            # subject: ModelRef
    "after-action-safe-holds",   # subject: ModelRef
    "all-matching-safe",         # subject: ModelRef
    "result-ok",                 # subject: AnalysisResult
}


def known_schema(schema: str) -> bool:
    return schema in PROP_SCHEMAS or schema in PRED_SCHEMAS


def check_goal_schema(goal: Goal) -> None:
    if not known_schema(goal.pred.schema):
        raise SchemaError(f"unknown predicate schema {goal.pred.schema!r}")
    if goal.propositional and goal.pred.schema not in PROP_SCHEMAS:
        raise SchemaError(f"schema {goal.pred.schema!r} needs a subject")
    if not goal.propositional and goal.pred.schema in PROP_SCHEMAS:
        raise SchemaError(f"propositional schema {goal.pred.schema!r} cannot take a subject")


def _resolve_lts(store: ModelStore, ref: ModelRef) -> LTS:
    model = store.get(ref.model_id, ref.version)
    if not isinstance(model, LTS):
        raise SchemaError(f"model {ref.model_id!r}@{ref.version!r} is not a product model")
    return model


def state_response_ok(model: LTS, state_id: str, response: str) -> bool:
    """Every maximal execution answers each visit of ``state_id`` with a later
    response-labelled state (vacuously true when the state is unreachable)."""
    if state_id not in {s.id for s in model.states}:
        return True
    reachable = an._reachable_ids(model)
    if state_id not in reachable:
        return True
    return an._bad_continuation(model, state_id, response) is None


def evaluate_goal(goal: Goal, store: ModelStore) -> bool:
    """Executable interpretation of predicative goals over concrete subjects.

    Propositional goals have no executable interpretation (SchemaError); they
    are supported through the ledger only.
    """
    check_goal_schema(goal)
    schema = goal.pred.schema
    if goal.propositional:
        raise SchemaError(f"propositional goal {schema!r} is not executable")
    subject = goal.subject
    if schema == "result-ok":
        if not isinstance(subject, AnalysisResult):
            raise SchemaError("result-ok needs an analysis-result subject")
        return subject.output.ok
    if schema == "element-response-safe":
        if not isinstance(subject, ModelElement):
            raise SchemaError("element-response-safe needs a model-element subject")
        model = _resolve_lts(store, subject.model)
        return state_response_ok(model, subject.state, goal.pred.param("response"))
    if schema == "response-holds":
        if not isinstance(subject, ModelRef):
            raise SchemaError("response-holds needs a model subject")
        model = _resolve_lts(store, subject)
        spec = an.Response(goal.pred.param("trigger"), goal.pred.param("response"))
        return an.check_response_lts(model, spec).ok
    if schema == "after-action-safe-holds":
        if not isinstance(subject, ModelRef):
            raise SchemaError("after-action-safe-holds needs a model subject")
        model = _resolve_lts(store, subject)
        spec = an.AfterActionSafe(goal.pred.param("action"), goal.pred.param("forbidden"))
        return an.check_after_action_lts(model, spec).ok
    if schema == "all-matching-safe":
        if not isinstance(subject, ModelRef):
            raise SchemaError("all-matching-safe needs a model subject")
        model = _resolve_lts(store, subject)
        query = an.parse_query(goal.pred.param("query"))
        response = goal.pred.param("response")
        return all(state_response_ok(model, sid, response) for sid in an.query_lts(model, query))
    if schema == "forall":
        response = goal.pred.param("element_response")
        if isinstance(subject, QueryResult):
            model = _resolve_lts(store, subject.model)
            return all(state_response_ok(model, sid, response) for sid in subject.states)
        if isinstance(subject, PlainSet):
            raise SchemaError("forall over an abstract set is ledger-supported, not executable")
        raise SchemaError("forall needs a query-result or set subject")
    raise SchemaError(f"no evaluator for schema {schema!r}")


# --- strategies ---


@dataclass(frozen=True)
class Manual:
    reviewed: bool = False


@dataclass(frozen=True)
class TemplateInst:
    template_id: str
    input_payload: Any
    input_fingerprint: str
    input_from_parent: bool = False


@dataclass(frozen=True)
class Strategy:
    label: str
    provenance: Manual | TemplateInst


# --- assurance case trees ---


@dataclass
class Und:
    goal: Goal


@dataclass
class Evd:
    goal: Goal
    evidence_id: str


@dataclass
class Decomp:
    goal: Goal
    strategy: Strategy
    children: list["AC"]

    def __post_init__(self) -> None:
        if not self.children:
            raise StructureError("a decomposition needs at least one child")


AC = Und | Evd | Decomp

Path = tuple[int, ...]


def root_goal(ac: AC) -> Goal:
    return ac.goal


def iter_nodes(ac: AC, path: Path = ()) -> Iterator[tuple[Path, AC]]:
    yield path, ac
    if isinstance(ac, Decomp):
        for i, child in enumerate(ac.children):
            yield from iter_nodes(child, path + (i,))


def node_at(ac: AC, path: Path) -> AC:
    node = ac
    for i in path:
        if not isinstance(node, Decomp):
            raise KeyError(f"path {path} leaves the tree")
        node = node.children[i]
    return node


def replace_node(root: AC, path: Path, new_node: AC) -> AC:
    """Substitute the subtree at ``path``; returns the (possibly new) root."""
    if not path:
        return new_node
    parent = node_at(root, path[:-1])
    if not isinstance(parent, Decomp):
        raise KeyError(f"path {path} leaves the tree")
    parent.children[path[-1]] = new_node
    return root


def parse_path(text: str) -> Path:
    """Parse a node address like '0/2/1'; the empty string is the root."""
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split("/"))
    except ValueError:
        raise StructureError(f"malformed node path {text!r}") from None


def path_to_str(path: Path) -> str:
    return "/".join(str(i) for i in path)


# --- evidence ledger ---


@dataclass(frozen=True)
class Evidence:
    evidence_id: str
    kind: str  # "manual" | "analysis-result"
    payload_digest: str = ""


class EvidenceLedger:
    """Evidence records and per-goal adequacy entries keyed by fingerprint."""

    def __init__(self) -> None:
        self.evidence: dict[str, Evidence] = {}
        self.entries: dict[tuple[str, str], bool] = {}

    def add_evidence(self, evidence: Evidence) -> None:
        self.evidence[evidence.evidence_id] = evidence

    def set_adequate(self, evidence_id: str, fingerprint: str, adequate: bool = True) -> None:
        if evidence_id not in self.evidence:
            raise LedgerError(f"unknown evidence id {evidence_id!r}")
        self.entries[(evidence_id, fingerprint)] = adequate

    def adequate(self, evidence_id: str, fingerprint: str) -> bool:
        if evidence_id not in self.evidence:
            raise LedgerError(f"unknown evidence id {evidence_id!r}")
        return self.entries.get((evidence_id, fingerprint), False)


# --- fingerprints and serialization ---


def verdict_to_json(verdict: Verdict) -> dict[str, Any]:
    if verdict.ok:
        return {"ok": True}
    return {
        "ok": False,
        "witness": {"stem": list(verdict.witness.stem), "loop": list(verdict.witness.loop)},
    }


def verdict_from_json(data: dict[str, Any]) -> Verdict:
    if data["ok"]:
        return Verdict.passed()
    w = data["witness"]
    return Verdict.violation(Trace(tuple(w["stem"]), tuple(w.get("loop", ()))))


def subject_to_json(subject: Subject) -> dict[str, Any]:
    if isinstance(subject, ModelRef):
        return {"kind": "model", "id": subject.model_id, "version": subject.version}
    if isinstance(subject, ModelElement):
        return {"kind": "element", "model": subject_to_json(subject.model), "state": subject.state}
    if isinstance(subject, QueryResult):
        return {
            "kind": "query-result",
            "model": subject_to_json(subject.model),
            "query": subject.query,
            "states": list(subject.states),
        }
    if isinstance(subject, AnalysisResult):
        return {
            "kind": "analysis-result",
            "analysis": subject.analysis,
            "model": subject_to_json(subject.model),
            "spec": subject.spec,
            "output": verdict_to_json(subject.output),
        }
    if isinstance(subject, PlainSet):
        return {"kind": "set", "values": sorted(map(str, subject.values))}
    if isinstance(subject, SetFamily):
        return {"kind": "family", "sets": [sorted(map(str, s)) for s in subject.sets]}
    if isinstance(subject, Atom):
        return {"kind": "atom", "value": subject.value}
    raise SchemaError(f"unknown subject {subject!r}")


def subject_from_json(data: dict[str, Any]) -> Subject:
    kind = data["kind"]
    if kind == "model":
        return ModelRef(data["id"], data["version"])
    if kind == "element":
        model = subject_from_json(data["model"])
        assert isinstance(model, ModelRef)
        return ModelElement(model, data["state"])
    if kind == "query-result":
        model = subject_from_json(data["model"])
        assert isinstance(model, ModelRef)
        return QueryResult(model, data["query"], tuple(data["states"]))
    if kind == "analysis-result":
        model = subject_from_json(data["model"])
        assert isinstance(model, ModelRef)
        return AnalysisResult(data["analysis"], model, data["spec"], verdict_from_json(data["output"]))
    if kind == "set":
        return PlainSet(tuple(data["values"]))
    if kind == "family":
        return SetFamily(tuple(tuple(s) for s in data["sets"]))
    if kind == "atom":
        return Atom(data["value"])
    raise SchemaError(f"unknown subject kind {kind!r}")


def pred_to_json(pred: PredicateRef) -> dict[str, Any]:
    return {"schema": pred.schema, "params": dict(pred.params)}


def pred_from_json(data: dict[str, Any]) -> PredicateRef:
    return PredicateRef(data["schema"], tuple(sorted(data.get("params", {}).items())))


def goal_to_json(goal: Goal) -> dict[str, Any]:
    out: dict[str, Any] = {"pred": pred_to_json(goal.pred)}
    if goal.subject is not None:
        out["subject"] = subject_to_json(goal.subject)
    return out


def goal_from_json(data: dict[str, Any]) -> Goal:
    subject = subject_from_json(data["subject"]) if "subject" in data else None
    return Goal(pred_from_json(data["pred"]), subject)


def goal_fingerprint(goal: Goal) -> str:
    return digest(goal_to_json(goal))


def strategy_to_json(strategy: Strategy) -> dict[str, Any]:
    if isinstance(strategy.provenance, Manual):
        prov: dict[str, Any] = {"kind": "manual", "reviewed": strategy.provenance.reviewed}
    else:
        prov = {
            "kind": "template",
            "template": strategy.provenance.template_id,
            "inputDigest": strategy.provenance.input_fingerprint,
            "input": strategy.provenance.input_payload,
            "inputFromParent": strategy.provenance.input_from_parent,
        }
    return {"label": strategy.label, "provenance": prov}


def strategy_from_json(data: dict[str, Any]) -> Strategy:
    prov = data["provenance"]
    if prov["kind"] == "manual":
        return Strategy(data["label"], Manual(prov.get("reviewed", False)))
    if prov["kind"] == "template":
        return Strategy(
            data["label"],
            TemplateInst(
                prov["template"],
                prov["input"],
                prov["inputDigest"],
                prov.get("inputFromParent", False),
            ),
        )
    raise ProvenanceError(f"unknown provenance kind {prov['kind']!r}")


def ac_to_json(ac: AC) -> dict[str, Any]:
    if isinstance(ac, Und):
        return {"kind": "und", "goal": goal_to_json(ac.goal)}
    if isinstance(ac, Evd):
        return {"kind": "evd", "goal": goal_to_json(ac.goal), "evidence": ac.evidence_id}
    return {
        "kind": "decomp",
        "goal": goal_to_json(ac.goal),
        "strategy": strategy_to_json(ac.strategy),
        "children": [ac_to_json(c) for c in ac.children],
    }


def ac_from_json(data: dict[str, Any]) -> AC:
    kind = data["kind"]
    goal = goal_from_json(data["goal"])
    if kind == "und":
        return Und(goal)
    if kind == "evd":
        return Evd(goal, data["evidence"])
    if kind == "decomp":
        return Decomp(goal, strategy_from_json(data["strategy"]), [ac_from_json(c) for c in data["children"]])
    raise StructureError(f"unknown AC node kind {kind!r}")


def ledger_to_json(ledger: EvidenceLedger) -> dict[str, Any]:
    return {
        "evidence": [
            {"id": e.evidence_id, "kind": e.kind, "payloadDigest": e.payload_digest}
            for e in sorted(ledger.evidence.values(), key=lambda e: e.evidence_id)
        ],
        "entries": [
            {"evidence": eid, "fingerprint": fp, "adequate": ok}
            for (eid, fp), ok in sorted(ledger.entries.items())
        ],
    }


def ledger_from_json(data: dict[str, Any]) -> EvidenceLedger:
    ledger = EvidenceLedger()
    for e in data.get("evidence", ()):
        ledger.add_evidence(Evidence(e["id"], e["kind"], e.get("payloadDigest", "")))
    for entry in data.get("entries", ()):
        ledger.set_adequate(entry["evidence"], entry["fingerprint"], entry.get("adequate", True))
    return ledger


# --- refinement and support ---


def check_refinement(
    parent: Goal,
    strategy: Strategy,
    children: Iterable[AC],
    registry: "TemplateRegistry",
    store: ModelStore,
) -> bool:
    """Soundness of one decomposition step.

    Manual strategies reduce to their review flag.  Template strategies
    re-evaluate the template's correctness criterion against the recorded
    input and require the recorded children to be exactly the instantiation
    the template prescribes (missing subgoals make the refinement unsound even
    when the criterion holds).
    """
    if isinstance(strategy.provenance, Manual):
        return strategy.provenance.reviewed
    template = registry.get(strategy.provenance.template_id)
    inp = template.input_from_payload(strategy.provenance.input_payload)
    if not template.correctness(inp, parent, store):
        return False
    expected = template.instantiate_goals(inp, parent, store)
    got = Counter(goal_fingerprint(c.goal) for c in children)
    want = Counter(goal_fingerprint(g) for g in expected)
    # every prescribed subgoal must be present; extra supported premises
    # (e.g. a lift-correctness goal) only strengthen the antecedent
    return all(got[fp] >= n for fp, n in want.items())


def supp(ac: AC, ledger: EvidenceLedger, registry: "TemplateRegistry", store: ModelStore) -> bool:
    """The supported predicate: leaves adequate, decompositions sound."""
    if isinstance(ac, Und):
        return False
    if isinstance(ac, Evd):
        return ledger.adequate(ac.evidence_id, goal_fingerprint(ac.goal))
    if not all(supp(child, ledger, registry, store) for child in ac.children):
        return False
    return check_refinement(ac.goal, ac.strategy, ac.children, registry, store)


# --- evidence helpers ---


def evidence_for_verdict(ledger: EvidenceLedger, goal: Goal, evidence_id: str | None = None) -> str:
    """Register the analysis output embedded in a result goal as evidence.

    The entry is adequate exactly when the verdict is Ok; the payload digest
    binds the evidence to the input/output pair it certifies.
    """
    if not isinstance(goal.subject, AnalysisResult):
        raise SchemaError("verdict evidence needs an analysis-result goal")
    eid = evidence_id or f"ev-{goal_fingerprint(goal)[:12]}"
    ledger.add_evidence(Evidence(eid, "analysis-result", digest(subject_to_json(goal.subject))))
    ledger.set_adequate(eid, goal_fingerprint(goal), adequate=goal.subject.output.ok)
    return eid


def manual_evidence(
    ledger: EvidenceLedger, goal: Goal, evidence_id: str | None = None, adequate: bool = True
) -> str:
    eid = evidence_id or f"ev-{goal_fingerprint(goal)[:12]}"
    ledger.add_evidence(Evidence(eid, "manual", ""))
    ledger.set_adequate(eid, goal_fingerprint(goal), adequate=adequate)
    return eid


def support_leaf(root: AC, path: Path, ledger: EvidenceLedger, evidence_id: str | None = None) -> str:
    """Turn the undeveloped goal at ``path`` into an evidenced leaf.

    Analysis-result goals get auto-entered verdict evidence; everything else
    gets a manual adequacy entry.
    """
    node = node_at(root, path)
    if not isinstance(node, Und):
        raise StructureError(f"node at {path} is not an undeveloped goal")
    if isinstance(node.goal.subject, AnalysisResult):
        eid = evidence_for_verdict(ledger, node.goal, evidence_id)
    else:
        eid = manual_evidence(ledger, node.goal, evidence_id)
    replace_node(root, path, Evd(node.goal, eid))
    return eid
