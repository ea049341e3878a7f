"""Annotative behavioral product-line models.

A featured transition system (FTS) is a labelled transition system whose
transitions carry presence conditions.  Products (plain LTSs) are derived per
configuration by dropping transitions with unsatisfied presence conditions and
pruning everything that becomes unreachable from the initial state.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Any, Generic, Iterable, TypeVar

from . import featexpr as fx
from .errors import DerivationError, StructureError
from .featexpr import FALSE, TRUE, FeatureExpr, FeatureModel

T = TypeVar("T")

EXACT_DELTA_MAX_FEATURES = 12


@dataclass(frozen=True)
class State:
    id: str
    labels: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Transition:
    src: str
    action: str
    dst: str


@dataclass(frozen=True)
class FtsTransition:
    src: str
    action: str
    dst: str
    pc: FeatureExpr = TRUE

    def key(self) -> tuple[str, str, str]:
        return (self.src, self.action, self.dst)


def _canonical_states(states: Iterable[State]) -> tuple[State, ...]:
    out = tuple(sorted(states, key=lambda s: s.id))
    seen: set[str] = set()
    for s in out:
        if s.id in seen:
            raise StructureError(f"duplicate state id: {s.id!r}")
        seen.add(s.id)
    return out


@dataclass(frozen=True)
class LTS:
    """A product model: states with label sets, actions on transitions."""

    states: tuple[State, ...]
    initial: str
    transitions: tuple[Transition, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", _canonical_states(self.states))
        ids = {s.id for s in self.states}
        if self.initial not in ids:
            raise StructureError(f"initial state {self.initial!r} not among states")
        for t in self.transitions:
            if t.src not in ids or t.dst not in ids:
                raise StructureError(f"dangling transition {t}")
        object.__setattr__(
            self, "transitions", tuple(sorted(set(self.transitions), key=lambda t: (t.src, t.action, t.dst)))
        )

    def state(self, state_id: str) -> State:
        for s in self.states:
            if s.id == state_id:
                return s
        raise KeyError(state_id)

    def successors(self, state_id: str) -> list[Transition]:
        return [t for t in self.transitions if t.src == state_id]

    def labels_of(self, state_id: str) -> frozenset[str]:
        return self.state(state_id).labels


@dataclass(frozen=True)
class FTS:
    """An LTS skeleton whose transitions are guarded by presence conditions."""

    feature_model: FeatureModel
    states: tuple[State, ...]
    initial: str
    transitions: tuple[FtsTransition, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", _canonical_states(self.states))
        ids = {s.id for s in self.states}
        if self.initial not in ids:
            raise StructureError(f"initial state {self.initial!r} not among states")
        for t in self.transitions:
            if t.src not in ids or t.dst not in ids:
                raise StructureError(f"dangling transition {t}")
            fx.eval_expr(t.pc, frozenset(), self.feature_model.alphabet)  # alphabet check
        object.__setattr__(
            self,
            "transitions",
            tuple(sorted(self.transitions, key=lambda t: (t.src, t.action, t.dst))),
        )
        keys = [t.key() for t in self.transitions]
        if len(keys) != len(set(keys)):
            raise StructureError("duplicate (src, action, dst) transition")

    def state(self, state_id: str) -> State:
        for s in self.states:
            if s.id == state_id:
                return s
        raise KeyError(state_id)

    def with_feature_model(self, feature_model: FeatureModel) -> FTS:
        """The same skeleton under another (e.g. extended or restricted) model."""
        return FTS(feature_model, self.states, self.initial, self.transitions)


def derive_fts(model: FTS, config: Iterable[str]) -> LTS:
    """Extract the product for ``config``: drop unsatisfied transitions, then
    prune states and transitions unreachable from the initial state."""
    cfg = frozenset(config)
    fm = model.feature_model
    if not fm.admits(cfg):
        raise DerivationError(f"configuration {sorted(cfg)} violates the feature model")
    kept = [t for t in model.transitions if fm.entails(cfg, t.pc)]
    succ: dict[str, list[FtsTransition]] = {}
    for t in kept:
        succ.setdefault(t.src, []).append(t)
    reachable = {model.initial}
    frontier = [model.initial]
    while frontier:
        here = frontier.pop()
        for t in succ.get(here, ()):
            if t.dst not in reachable:
                reachable.add(t.dst)
                frontier.append(t.dst)
    states = tuple(s for s in model.states if s.id in reachable)
    transitions = tuple(
        Transition(t.src, t.action, t.dst) for t in kept if t.src in reachable and t.dst in reachable
    )
    return LTS(states, model.initial, transitions)


@dataclass(frozen=True)
class ExplicitPL(Generic[T]):
    """Explicit product line of arbitrary values: guarded cells that must
    partition the valid configurations."""

    cells: tuple[tuple[T, FeatureExpr], ...]

    def guards(self) -> list[FeatureExpr]:
        return [g for _, g in self.cells]

    def values(self) -> list[T]:
        return [v for v, _ in self.cells]


def validate_explicit(pl: ExplicitPL, fm: FeatureModel) -> None:
    if not pl.cells:
        raise StructureError("explicit product line has no cells")
    if not fx.is_partition(pl.guards(), fm.formula, fm.alphabet):
        raise StructureError("explicit product line guards do not partition the feature model")


def derive_explicit(pl: ExplicitPL[T], config: Iterable[str], fm: FeatureModel) -> T:
    validate_explicit(pl, fm)
    cfg = frozenset(config)
    if not fm.admits(cfg):
        raise DerivationError(f"configuration {sorted(cfg)} violates the feature model")
    for value, guard in pl.cells:
        if fm.entails(cfg, guard):
            return value
    raise StructureError("validated explicit product line left a configuration uncovered")


@dataclass(frozen=True)
class VarSet(Generic[T]):
    """A set whose elements carry presence conditions."""

    entries: tuple[tuple[T, FeatureExpr], ...]

    def __post_init__(self) -> None:
        values = [v for v, _ in self.entries]
        if len(values) != len(set(values)):
            raise StructureError("variational set values must be distinct")


def derive_var_set(vs: VarSet[T], config: Iterable[str], alphabet: Iterable[str]) -> set[T]:
    cfg = frozenset(config)
    return {v for v, pc in vs.entries if fx.eval_expr(pc, cfg, alphabet)}


class ModelStore:
    """Versioned model registry; at most two live versions per id."""

    def __init__(self) -> None:
        self._models: dict[str, dict[str, FTS | LTS]] = {}

    def register(self, model_id: str, version: str, model: FTS | LTS) -> None:
        versions = self._models.setdefault(model_id, {})
        if version not in versions and len(versions) >= 2:
            raise StructureError(f"model {model_id!r} already has two live versions")
        versions[version] = model

    def get(self, model_id: str, version: str) -> FTS | LTS:
        try:
            return self._models[model_id][version]
        except KeyError:
            raise KeyError(f"no model {model_id!r} at version {version!r}") from None

    def has(self, model_id: str, version: str) -> bool:
        return version in self._models.get(model_id, {})

    def versions(self, model_id: str) -> list[str]:
        return sorted(self._models.get(model_id, {}))

    def ids(self) -> list[str]:
        return sorted(self._models)


# --- model diffing and variational evolution expressions ---


@dataclass(frozen=True)
class ElementDiff:
    """Added/removed/modified states and transitions, each with the feature
    expression attributing where the element (or its change) can be present."""

    added_states: tuple[tuple[str, FeatureExpr], ...] = ()
    removed_states: tuple[tuple[str, FeatureExpr], ...] = ()
    modified_states: tuple[tuple[str, FeatureExpr], ...] = ()
    added_transitions: tuple[tuple[tuple[str, str, str], FeatureExpr], ...] = ()
    removed_transitions: tuple[tuple[tuple[str, str, str], FeatureExpr], ...] = ()
    modified_transitions: tuple[tuple[tuple[str, str, str], FeatureExpr], ...] = ()

    def is_empty(self) -> bool:
        return not (
            self.added_states
            or self.removed_states
            or self.modified_states
            or self.added_transitions
            or self.removed_transitions
            or self.modified_transitions
        )

    def impact_expr(self) -> FeatureExpr:
        parts = [pc for _, pc in (
            self.added_states
            + self.removed_states
            + self.modified_states
            + self.added_transitions
            + self.removed_transitions
            + self.modified_transitions
        )]
        return fx.or_all(parts) if parts else FALSE


def _state_presence_attribution(model: FTS, state_id: str) -> FeatureExpr:
    # Not full reachability: the disjunction of inbound guards (or TRUE for the
    # initial state) over-approximates where the state can appear, which is all
    # the over-approximate impact expression needs.
    if state_id == model.initial:
        return TRUE
    inbound = [t.pc for t in model.transitions if t.dst == state_id]
    return fx.or_all(inbound) if inbound else FALSE


def diff_models(old: FTS, new: FTS) -> ElementDiff:
    if set(old.feature_model.alphabet) != set(new.feature_model.alphabet):
        raise StructureError("diff requires a shared feature alphabet")
    alphabet = old.feature_model.alphabet
    old_states = {s.id: s for s in old.states}
    new_states = {s.id: s for s in new.states}
    added_states = []
    removed_states = []
    modified_states = []
    for sid in sorted(set(old_states) | set(new_states)):
        if sid not in old_states:
            added_states.append((sid, _state_presence_attribution(new, sid)))
        elif sid not in new_states:
            removed_states.append((sid, _state_presence_attribution(old, sid)))
        elif old_states[sid].labels != new_states[sid].labels:
            pc = fx.Or(_state_presence_attribution(old, sid), _state_presence_attribution(new, sid))
            modified_states.append((sid, pc))
    old_trans = {t.key(): t for t in old.transitions}
    new_trans = {t.key(): t for t in new.transitions}
    added_transitions = []
    removed_transitions = []
    modified_transitions = []
    for key in sorted(set(old_trans) | set(new_trans)):
        if key not in old_trans:
            added_transitions.append((key, new_trans[key].pc))
        elif key not in new_trans:
            removed_transitions.append((key, old_trans[key].pc))
        elif not fx.equiv(old_trans[key].pc, new_trans[key].pc, alphabet):
            modified_transitions.append((key, fx.Or(old_trans[key].pc, new_trans[key].pc)))
    return ElementDiff(
        added_states=tuple(added_states),
        removed_states=tuple(removed_states),
        modified_states=tuple(modified_states),
        added_transitions=tuple(added_transitions),
        removed_transitions=tuple(removed_transitions),
        modified_transitions=tuple(modified_transitions),
    )


def _shared_feature_model(old: FTS, new: FTS, fm: FeatureModel | None) -> FeatureModel:
    if fm is not None:
        return fm
    if set(old.feature_model.alphabet) != set(new.feature_model.alphabet):
        raise StructureError("evolution without a shared alphabet needs an explicit feature model")
    if not fx.equiv(old.feature_model.formula, new.feature_model.formula, old.feature_model.alphabet):
        raise StructureError("evolution without a shared feature model needs an explicit one")
    return old.feature_model


def delta_hat_exact(old: FTS, new: FTS, fm: FeatureModel | None = None) -> FeatureExpr:
    """The feature expression holding exactly on configurations whose derived
    products differ (structural identity on ids, labels and transitions)."""
    fm = _shared_feature_model(old, new, fm)
    changed = [
        c for c in fm.configurations() if derive_fts(old, c) != derive_fts(new.with_feature_model(fm), c)
    ]
    disjunction = fx.or_all(fx.config_term(c, fm.alphabet) for c in changed)
    return fx.simplify_within(disjunction, fm.formula, fm.alphabet)


def delta_hat_over_approx(old: FTS, new: FTS, fm: FeatureModel | None = None) -> FeatureExpr:
    """Sound over-approximation from element-level diffing: every configuration
    with differing products satisfies the result (the converse may fail)."""
    fm = _shared_feature_model(old, new, fm)
    return fx.simplify_within(diff_models(old, new).impact_expr(), fm.formula, fm.alphabet)


def delta_hat(old: FTS, new: FTS, fm: FeatureModel | None = None, mode: str = "auto") -> FeatureExpr:
    """Default policy: exact up to EXACT_DELTA_MAX_FEATURES features, the
    element-level over-approximation beyond that; mode 'exact'/'approx' forces."""
    fm = _shared_feature_model(old, new, fm)
    if mode == "exact":
        return delta_hat_exact(old, new, fm)
    if mode == "approx":
        return delta_hat_over_approx(old, new, fm)
    if mode != "auto":
        raise ValueError(f"unknown delta mode {mode!r}")
    if len(fm.alphabet) <= EXACT_DELTA_MAX_FEATURES:
        return delta_hat_exact(old, new, fm)
    return delta_hat_over_approx(old, new, fm)


# --- JSON formats ---


def lts_to_json(model: LTS) -> dict[str, Any]:
    return {
        "states": [{"id": s.id, "labels": sorted(s.labels)} for s in model.states],
        "initial": model.initial,
        "transitions": [{"src": t.src, "action": t.action, "dst": t.dst} for t in model.transitions],
    }


def lts_from_json(data: dict[str, Any]) -> LTS:
    states = tuple(State(s["id"], frozenset(s.get("labels", ()))) for s in data["states"])
    transitions = tuple(Transition(t["src"], t["action"], t["dst"]) for t in data["transitions"])
    return LTS(states, data["initial"], transitions)


def fts_to_json(model: FTS, model_id: str | None = None, version: str | None = None) -> dict[str, Any]:
    out: dict[str, Any] = {
        "features": list(model.feature_model.alphabet),
        "featureModel": fx.to_str(model.feature_model.formula),
        "states": [{"id": s.id, "labels": sorted(s.labels)} for s in model.states],
        "initial": model.initial,
        "transitions": [
            {"src": t.src, "action": t.action, "dst": t.dst, "pc": fx.to_str(t.pc)}
            for t in model.transitions
        ],
    }
    if model_id is not None:
        out["id"] = model_id
    if version is not None:
        out["version"] = version
    return out


def fts_from_json(data: dict[str, Any]) -> FTS:
    fm = FeatureModel(tuple(data["features"]), fx.parse(data["featureModel"]))
    states = tuple(State(s["id"], frozenset(s.get("labels", ()))) for s in data["states"])
    transitions = tuple(
        FtsTransition(t["src"], t["action"], t["dst"], fx.parse(t["pc"]) if "pc" in t else TRUE)
        for t in data["transitions"]
    )
    return FTS(fm, states, data["initial"], transitions)


def load_model_file(path: str) -> tuple[str, str, FTS | LTS]:
    """Read one model file; returns (id, version, model).  Files without a
    ``features`` key are plain LTS models."""
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    model: FTS | LTS
    if "features" in data:
        model = fts_from_json(data)
    else:
        model = lts_from_json(data)
    model_id = data.get("id", os.path.splitext(os.path.basename(path))[0])
    version = data.get("version", "old")
    return model_id, version, model
