"""Product-level and family-based (lifted) model analyses.

Three analyses back the assurance templates: state querying, response-property
checking (every trigger occurrence is eventually followed by a response state)
and after-action safety (no forbidden state directly follows a given action).
Maximal executions are infinite paths or paths ending in a deadlocked state;
deadlocked continuations count, so a trigger followed by deadlock without a
response is a violation.

The lifted versions operate on a whole FTS at once.  Reachability and
violation regions are computed as feature-expression fixpoints; violation
witnesses are extracted per violating configuration and merged into cells by
witness identity, so each cell replays in all of its configurations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from . import featexpr as fx
from .errors import SchemaError, StructureError
from .featexpr import FALSE, TRUE, FeatureExpr
from .plmodel import FTS, LTS, VarSet, derive_fts


# --- queries and specs ---


@dataclass(frozen=True)
class HasLabel:
    label: str

    def __post_init__(self) -> None:
        if not self.label:
            raise StructureError("query label must be nonempty")

    def matches(self, state) -> bool:
        return self.label in state.labels


@dataclass(frozen=True)
class NamePrefix:
    prefix: str

    def __post_init__(self) -> None:
        if not self.prefix:
            raise StructureError("query prefix must be nonempty")

    def matches(self, state) -> bool:
        return state.id.startswith(self.prefix)


Query = HasLabel | NamePrefix


@dataclass(frozen=True)
class Response:
    trigger: str
    response: str

    def __post_init__(self) -> None:
        if not self.trigger or not self.response:
            raise StructureError("response spec labels must be nonempty")


@dataclass(frozen=True)
class AfterActionSafe:
    action: str
    forbidden: str

    def __post_init__(self) -> None:
        if not self.action or not self.forbidden:
            raise StructureError("after-action spec fields must be nonempty")


PropertySpec = Response | AfterActionSafe


@dataclass(frozen=True)
class Trace:
    """A witness path: stem from the initial state, optionally closed by a
    lasso loop; a stem without a loop ends in a deadlocked state or at the
    violating state itself (for after-action violations)."""

    stem: tuple[str, ...]
    loop: tuple[str, ...] = ()


@dataclass(frozen=True)
class Verdict:
    witness: Trace | None = None

    @property
    def ok(self) -> bool:
        return self.witness is None

    @staticmethod
    def passed() -> Verdict:
        return Verdict(None)

    @staticmethod
    def violation(witness: Trace) -> Verdict:
        return Verdict(witness)


@dataclass(frozen=True)
class VarVerdict:
    """Explicit product line of verdicts partitioning the analysed scope."""

    cells: tuple[tuple[Verdict, FeatureExpr], ...]
    scope: FeatureExpr  # feature model conjoined with the restriction

    def derive(self, config: Iterable[str], alphabet: Iterable[str]) -> Verdict:
        cfg = frozenset(config)
        if not fx.eval_expr(self.scope, cfg, alphabet):
            raise StructureError(f"configuration {sorted(cfg)} outside the verdict scope")
        for verdict, guard in self.cells:
            if fx.eval_expr(guard, cfg, alphabet):
                return verdict
        raise StructureError("verdict cells left a configuration uncovered")

    def all_ok(self) -> bool:
        return all(v.ok for v, _ in self.cells)


# --- product-level analyses ---


def query_lts(model: LTS, query: Query) -> list[str]:
    """State ids matching the query, in canonical (sorted) order."""
    return sorted(s.id for s in model.states if query.matches(s))


def _reachable_ids(model: LTS) -> set[str]:
    seen = {model.initial}
    frontier = [model.initial]
    while frontier:
        here = frontier.pop()
        for t in model.successors(here):
            if t.dst not in seen:
                seen.add(t.dst)
                frontier.append(t.dst)
    return seen


def _shortest_stem(model: LTS, target: str) -> tuple[str, ...]:
    if target == model.initial:
        return (model.initial,)
    parent: dict[str, str] = {}
    frontier = [model.initial]
    seen = {model.initial}
    while frontier:
        nxt: list[str] = []
        for here in frontier:
            for t in model.successors(here):
                if t.dst not in seen:
                    seen.add(t.dst)
                    parent[t.dst] = here
                    if t.dst == target:
                        path = [target]
                        while path[-1] != model.initial:
                            path.append(parent[path[-1]])
                        return tuple(reversed(path))
                    nxt.append(t.dst)
        frontier = nxt
    raise StructureError(f"state {target!r} unreachable while building a witness")


def _bad_continuation(model: LTS, start: str, response: str) -> tuple[tuple[str, ...], tuple[str, ...]] | None:
    """A response-free maximal continuation from ``start``: either a path to a
    deadlocked state (loop empty) or a lasso through response-free states.
    Returns (continuation states after ``start``, loop) or None."""
    if not model.successors(start):
        return ((), ())
    stack: list[list[str]] = [[start]]
    while stack:
        path = stack.pop()
        here = path[-1]
        for t in sorted(model.successors(here), key=lambda t: (t.action, t.dst), reverse=True):
            dst = t.dst
            if response in model.labels_of(dst):
                continue
            if dst in path:
                # closes a response-free cycle among continuation states
                idx = path.index(dst)
                if idx == 0:
                    # cycle back to the start state: rotate so the loop is
                    # entered by the edge leaving the stem
                    return (), tuple(path[1:]) + (dst,)
                return tuple(path[1:idx]), tuple(path[idx:])
            if not model.successors(dst):
                return tuple(path[1:]) + (dst,), ()
            stack.append(path + [dst])
    return None


def check_response_lts(model: LTS, spec: Response) -> Verdict:
    """Ok iff on every maximal execution each trigger occurrence is followed,
    strictly later, by a response-labelled state."""
    reachable = _reachable_ids(model)
    for state in model.states:  # canonical order keeps witnesses deterministic
        if state.id not in reachable or spec.trigger not in state.labels:
            continue
        continuation = _bad_continuation(model, state.id, spec.response)
        if continuation is None:
            continue
        tail, loop = continuation
        stem = _shortest_stem(model, state.id) + tail
        return Verdict.violation(Trace(stem, loop))
    return Verdict.passed()


def check_after_action_lts(model: LTS, spec: AfterActionSafe) -> Verdict:
    """Violation iff a reachable ``action`` transition leads to a state with a
    successor labelled ``forbidden``."""
    reachable = _reachable_ids(model)
    for t in model.transitions:
        if t.action != spec.action or t.src not in reachable:
            continue
        for t2 in model.successors(t.dst):
            if spec.forbidden in model.labels_of(t2.dst):
                stem = _shortest_stem(model, t.src) + (t.dst, t2.dst)
                return Verdict.violation(Trace(stem, ()))
    return Verdict.passed()


# --- family-based analyses ---


def reach_fts(model: FTS) -> dict[str, FeatureExpr]:
    """Least fixpoint per state of the configurations under which it survives
    derivation; the initial state is reachable for the whole feature model."""
    fm = model.feature_model
    alphabet = fm.alphabet
    reach: dict[str, FeatureExpr] = {s.id: FALSE for s in model.states}
    reach[model.initial] = fm.formula
    for _ in range(len(model.states) + 1):
        changed = False
        for t in model.transitions:
            flowed = fx.And(reach[t.src], t.pc)
            merged = fx.Or(reach[t.dst], flowed)
            if not fx.equiv(merged, reach[t.dst], alphabet):
                reach[t.dst] = fx.simplify(merged, alphabet)
                changed = True
        if not changed:
            break
    return {sid: fx.simplify(e, alphabet) for sid, e in reach.items()}


def query_fts(model: FTS, query: Query, restrict: FeatureExpr = TRUE) -> VarSet[str]:
    """Variational query result: matching states guarded by the configurations
    (within the restriction) under which they survive derivation."""
    fm = model.feature_model
    scope = fx.And(fm.formula, restrict)
    reach = reach_fts(model)
    entries = []
    for state in model.states:
        if not query.matches(state):
            continue
        guard = fx.And(reach[state.id], restrict)
        if not fx.satisfiable(fx.And(guard, fm.formula), fm.alphabet):
            continue
        entries.append((state.id, fx.simplify_within(guard, scope, fm.alphabet)))
    return VarSet(tuple(sorted(entries, key=lambda e: e[0])))


def _deadlock_expr(model: FTS, state_id: str) -> FeatureExpr:
    outgoing = [t.pc for t in model.transitions if t.src == state_id]
    return fx.Not(fx.or_all(outgoing)) if outgoing else TRUE


def _response_violation_expr(model: FTS, spec: Response) -> FeatureExpr:
    """Configurations with a reachable trigger occurrence followed by a
    response-free maximal continuation (deadlock or response-free cycle)."""
    fm = model.feature_model
    alphabet = fm.alphabet
    nonresponse = {s.id for s in model.states if spec.response not in s.labels}
    nr_edges = [t for t in model.transitions if t.src in nonresponse and t.dst in nonresponse]

    # response-free infinite continuation: greatest fixpoint over the
    # non-response subgraph
    inf: dict[str, FeatureExpr] = {sid: TRUE for sid in nonresponse}
    for _ in range(len(nonresponse) + 1):
        changed = False
        for sid in sorted(nonresponse):
            new = fx.or_all(fx.And(t.pc, inf[t.dst]) for t in nr_edges if t.src == sid)
            if not fx.equiv(new, inf[sid], alphabet):
                inf[sid] = fx.simplify(new, alphabet)
                changed = True
        if not changed:
            break

    # response-free path to a deadlock or into an infinite continuation:
    # least fixpoint over the non-response subgraph
    bad_tail: dict[str, FeatureExpr] = {
        sid: fx.simplify(fx.Or(_deadlock_expr(model, sid), inf[sid]), alphabet) for sid in nonresponse
    }
    for _ in range(len(nonresponse) + 1):
        changed = False
        for sid in sorted(nonresponse):
            step = fx.or_all(fx.And(t.pc, bad_tail[t.dst]) for t in nr_edges if t.src == sid)
            merged = fx.Or(bad_tail[sid], step)
            if not fx.equiv(merged, bad_tail[sid], alphabet):
                bad_tail[sid] = fx.simplify(merged, alphabet)
                changed = True
        if not changed:
            break

    reach = reach_fts(model)
    parts = []
    for state in model.states:
        if spec.trigger not in state.labels:
            continue
        # the first continuation step must land on a non-response state; a
        # deadlocked trigger state is bad on its own
        steps = fx.or_all(
            fx.And(t.pc, bad_tail[t.dst])
            for t in model.transitions
            if t.src == state.id and t.dst in nonresponse
        )
        bad_from = fx.Or(_deadlock_expr(model, state.id), steps)
        parts.append(fx.And(reach[state.id], bad_from))
    return fx.or_all(parts)


def _after_action_violation_expr(model: FTS, spec: AfterActionSafe) -> FeatureExpr:
    reach = reach_fts(model)
    parts = []
    for t in model.transitions:
        if t.action != spec.action:
            continue
        for t2 in model.transitions:
            if t2.src != t.dst:
                continue
            if spec.forbidden in model.state(t2.dst).labels:
                parts.append(fx.and_all([reach[t.src], t.pc, t2.pc]))
    return fx.or_all(parts)


def _cells_from_violation_expr(
    model: FTS,
    restrict: FeatureExpr,
    violation_expr: FeatureExpr,
    product_checker: Callable[[LTS], Verdict],
) -> VarVerdict:
    """Split the scope into an Ok cell and per-witness violation cells.

    The violating region comes from the family-based expression; witnesses are
    extracted per violating configuration with the product checker and merged
    by identity, so configurations with distinct counterexamples land in
    distinct cells.
    """
    fm = model.feature_model
    alphabet = fm.alphabet
    scope = fx.And(fm.formula, restrict)
    viol = fx.And(violation_expr, scope)
    # Guards are conjoined with the scope so the cell list partitions the
    # analysed configurations (no guard holds outside the scope).
    cells: list[tuple[Verdict, FeatureExpr]] = []
    ok_guard = fx.simplify(fx.And(scope, fx.Not(viol)), alphabet)
    if fx.satisfiable(ok_guard, alphabet):
        cells.append((Verdict.passed(), ok_guard))
    by_witness: dict[Trace, list[frozenset[str]]] = {}
    for cfg in fx.configs_of(viol, alphabet):
        verdict = product_checker(derive_fts(model, cfg))
        if verdict.ok:
            raise StructureError("family-based violation region disagrees with the product checker")
        by_witness.setdefault(verdict.witness, []).append(cfg)
    for witness, cfgs in by_witness.items():
        guard = fx.or_all(fx.config_term(c, alphabet) for c in cfgs)
        cells.append((Verdict.violation(witness), fx.simplify(guard, alphabet)))
    cells.sort(key=lambda cell: fx.to_str(cell[1]))
    return VarVerdict(tuple(cells), scope)


def check_response_fts(model: FTS, spec: Response, restrict: FeatureExpr = TRUE) -> VarVerdict:
    return _cells_from_violation_expr(
        model,
        restrict,
        _response_violation_expr(model, spec),
        lambda product: check_response_lts(product, spec),
    )


def check_after_action_fts(model: FTS, spec: AfterActionSafe, restrict: FeatureExpr = TRUE) -> VarVerdict:
    return _cells_from_violation_expr(
        model,
        restrict,
        _after_action_violation_expr(model, spec),
        lambda product: check_after_action_lts(product, spec),
    )


# --- analysis registry used by the template machinery ---

QUERY = "query"
RESPONSE_CHECK = "response-check"
AFTER_ACTION_CHECK = "after-action-check"

ANALYSIS_IDS = (QUERY, RESPONSE_CHECK, AFTER_ACTION_CHECK)


def run_product_analysis(analysis_id: str, model: LTS, spec) -> object:
    if analysis_id == QUERY:
        return query_lts(model, spec)
    if analysis_id == RESPONSE_CHECK:
        return check_response_lts(model, spec)
    if analysis_id == AFTER_ACTION_CHECK:
        return check_after_action_lts(model, spec)
    raise SchemaError(f"unknown analysis {analysis_id!r}")


def run_lifted_analysis(analysis_id: str, model: FTS, spec, restrict: FeatureExpr = TRUE) -> object:
    if analysis_id == QUERY:
        return query_fts(model, spec, restrict)
    if analysis_id == RESPONSE_CHECK:
        return check_response_fts(model, spec, restrict)
    if analysis_id == AFTER_ACTION_CHECK:
        return check_after_action_fts(model, spec, restrict)
    raise SchemaError(f"unknown analysis {analysis_id!r}")


# --- spec/query mini-syntax for the CLI ---


def parse_query(text: str) -> Query:
    text = text.strip()
    if text.startswith("label:"):
        return HasLabel(text[len("label:"):].strip())
    if text.startswith("prefix:"):
        return NamePrefix(text[len("prefix:"):].strip())
    raise SchemaError(f"unrecognized query {text!r}; use 'label:L' or 'prefix:P'")


def parse_spec(text: str) -> PropertySpec:
    parts = text.split()
    if len(parts) == 4 and parts[0] == "response" and parts[2] == "=>":
        return Response(parts[1], parts[3])
    if len(parts) == 4 and parts[0] == "after-action" and parts[2] == "forbid":
        return AfterActionSafe(parts[1], parts[3])
    raise SchemaError(
        f"unrecognized spec {text!r}; use 'response TRIGGER => SAFE' or 'after-action ACT forbid LABEL'"
    )


def spec_to_text(spec: PropertySpec) -> str:
    if isinstance(spec, Response):
        return f"response {spec.trigger} => {spec.response}"
    return f"after-action {spec.action} forbid {spec.forbidden}"


def query_to_text(query: Query) -> str:
    if isinstance(query, HasLabel):
        return f"label:{query.label}"
    return f"prefix:{query.prefix}"
