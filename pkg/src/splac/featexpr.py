"""Propositional feature-expression algebra.

Feature expressions annotate product-line elements and assurance goals.  All
semantic operations (satisfiability, implication, equivalence, partition
checking, simplification) are decided by exhaustive truth-table enumeration,
which is exact and fast at the alphabet sizes this engine targets (a couple of
dozen features at most, guarded by ``MAX_ENUM_FEATURES``).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import AlphabetError, CapacityError, FormulaParseError, StructureError

MAX_ENUM_FEATURES = 24

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_RESERVED = {"true", "false", "xor"}

Configuration = frozenset  # configurations are frozen sets of feature names


def valid_feature_name(name: str) -> bool:
    """A feature name is a case-sensitive identifier, excluding grammar keywords."""
    return bool(_NAME_RE.fullmatch(name)) and name not in _RESERVED


@dataclass(frozen=True)
class FeatureExpr:
    """Base class of the expression AST.  Use the subclasses or ``parse``."""

    def __and__(self, other: FeatureExpr) -> FeatureExpr:
        return And(self, other)

    def __or__(self, other: FeatureExpr) -> FeatureExpr:
        return Or(self, other)

    def __invert__(self) -> FeatureExpr:
        return Not(self)

    def implies_expr(self, other: FeatureExpr) -> FeatureExpr:
        return Implies(self, other)

    def xor_expr(self, other: FeatureExpr) -> FeatureExpr:
        return Xor(self, other)

    def __str__(self) -> str:
        return to_str(self)


@dataclass(frozen=True)
class Const(FeatureExpr):
    value: bool


@dataclass(frozen=True)
class Var(FeatureExpr):
    name: str


@dataclass(frozen=True)
class Not(FeatureExpr):
    arg: FeatureExpr


@dataclass(frozen=True)
class And(FeatureExpr):
    left: FeatureExpr
    right: FeatureExpr


@dataclass(frozen=True)
class Or(FeatureExpr):
    left: FeatureExpr
    right: FeatureExpr


@dataclass(frozen=True)
class Implies(FeatureExpr):
    left: FeatureExpr
    right: FeatureExpr


@dataclass(frozen=True)
class Xor(FeatureExpr):
    left: FeatureExpr
    right: FeatureExpr


TRUE = Const(True)
FALSE = Const(False)


def var(name: str) -> Var:
    if not valid_feature_name(name):
        raise AlphabetError(f"invalid feature name: {name!r}")
    return Var(name)


def and_all(exprs: Iterable[FeatureExpr]) -> FeatureExpr:
    """Left-associated conjunction of ``exprs``; TRUE when empty."""
    result: FeatureExpr | None = None
    for e in exprs:
        result = e if result is None else And(result, e)
    return TRUE if result is None else result


def or_all(exprs: Iterable[FeatureExpr]) -> FeatureExpr:
    """Left-associated disjunction of ``exprs``; FALSE when empty."""
    result: FeatureExpr | None = None
    for e in exprs:
        result = e if result is None else Or(result, e)
    return FALSE if result is None else result


def names_of(expr: FeatureExpr) -> frozenset[str]:
    """The set of feature names occurring in ``expr``."""
    out: set[str] = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Var):
            out.add(e.name)
        elif isinstance(e, Not):
            stack.append(e.arg)
        elif isinstance(e, (And, Or, Implies, Xor)):
            stack.append(e.left)
            stack.append(e.right)
    return frozenset(out)


def _eval(expr: FeatureExpr, config: frozenset[str]) -> bool:
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        return expr.name in config
    if isinstance(expr, Not):
        return not _eval(expr.arg, config)
    if isinstance(expr, And):
        return _eval(expr.left, config) and _eval(expr.right, config)
    if isinstance(expr, Or):
        return _eval(expr.left, config) or _eval(expr.right, config)
    if isinstance(expr, Implies):
        return (not _eval(expr.left, config)) or _eval(expr.right, config)
    if isinstance(expr, Xor):
        return _eval(expr.left, config) != _eval(expr.right, config)
    raise TypeError(f"not a feature expression: {expr!r}")


def _check_alphabet(expr: FeatureExpr, alphabet: Iterable[str]) -> frozenset[str]:
    known = frozenset(alphabet)
    unknown = names_of(expr) - known
    if unknown:
        raise AlphabetError(f"expression uses undeclared features: {sorted(unknown)}")
    return known


def eval_expr(expr: FeatureExpr, config: Iterable[str], alphabet: Iterable[str]) -> bool:
    """Decide ``config |= expr`` with every name checked against ``alphabet``."""
    known = _check_alphabet(expr, alphabet)
    cfg = frozenset(config)
    stray = cfg - known
    if stray:
        raise AlphabetError(f"configuration uses undeclared features: {sorted(stray)}")
    return _eval(expr, cfg)


def _iter_assignments(variables: Sequence[str]) -> Iterator[frozenset[str]]:
    for combo in itertools.product((False, True), repeat=len(variables)):
        yield frozenset(v for v, on in zip(variables, combo) if on)


def configs_of(expr: FeatureExpr, alphabet: Iterable[str]) -> list[frozenset[str]]:
    """All configurations over ``alphabet`` satisfying ``expr``, canonically ordered.

    Canonical order is lexicographic over the sorted feature names of each
    configuration.  Guarded at ``MAX_ENUM_FEATURES`` features.
    """
    feats = sorted(set(alphabet))
    if len(feats) > MAX_ENUM_FEATURES:
        raise CapacityError(f"alphabet of {len(feats)} features exceeds enumeration guard")
    _check_alphabet(expr, feats)
    sat = [c for c in _iter_assignments(feats) if _eval(expr, c)]
    sat.sort(key=lambda c: tuple(sorted(c)))
    return sat


def _support_assignments(*exprs: FeatureExpr) -> Iterator[frozenset[str]]:
    # Truth only depends on mentioned names, so enumerating the joint support
    # decides the same relation as enumerating the full alphabet.
    support = sorted(frozenset().union(*(names_of(e) for e in exprs)) if exprs else frozenset())
    if len(support) > MAX_ENUM_FEATURES:
        raise CapacityError(f"support of {len(support)} features exceeds enumeration guard")
    return _iter_assignments(support)


def satisfiable(expr: FeatureExpr, alphabet: Iterable[str]) -> bool:
    _check_alphabet(expr, alphabet)
    return any(_eval(expr, c) for c in _support_assignments(expr))


def implies(left: FeatureExpr, right: FeatureExpr, alphabet: Iterable[str]) -> bool:
    _check_alphabet(left, alphabet)
    _check_alphabet(right, alphabet)
    return all(_eval(right, c) for c in _support_assignments(left, right) if _eval(left, c))


def equiv(left: FeatureExpr, right: FeatureExpr, alphabet: Iterable[str]) -> bool:
    _check_alphabet(left, alphabet)
    _check_alphabet(right, alphabet)
    return all(_eval(left, c) == _eval(right, c) for c in _support_assignments(left, right))


def is_partition(parts: Sequence[FeatureExpr], expr: FeatureExpr, alphabet: Iterable[str]) -> bool:
    """True iff ``parts`` splits the satisfying set of ``expr``.

    Every configuration satisfying ``expr`` must satisfy exactly one part, and
    no part may be satisfied outside the satisfying set of ``expr``.
    """
    if not parts:
        raise StructureError("a partition needs at least one part")
    _check_alphabet(expr, alphabet)
    for p in parts:
        _check_alphabet(p, alphabet)
    for c in _support_assignments(expr, *parts):
        hits = sum(1 for p in parts if _eval(p, c))
        if _eval(expr, c):
            if hits != 1:
                return False
        elif hits != 0:
            return False
    return True


# --- canonical simplification (minimal-term sum of products) ---


def _minterms(expr: FeatureExpr, support: Sequence[str]) -> set[int]:
    out = set()
    for i, combo in enumerate(itertools.product((False, True), repeat=len(support))):
        cfg = frozenset(v for v, on in zip(support, combo) if on)
        if _eval(expr, cfg):
            # bit k of the index corresponds to support[k]
            idx = 0
            for k, on in enumerate(combo):
                if on:
                    idx |= 1 << k
            out.add(idx)
    return out


def _prime_implicants(minterms: set[int], nvars: int) -> set[tuple[int, int]]:
    """Quine-McCluskey merge; implicants are (value, mask) pairs.

    ``mask`` has a 1 bit for every position that is fixed; ``value`` holds the
    fixed bits.  Positions outside the mask are don't-care within the cube.
    """
    full_mask = (1 << nvars) - 1
    current = {(m, full_mask) for m in minterms}
    primes: set[tuple[int, int]] = set()
    while current:
        merged: set[tuple[int, int]] = set()
        used: set[tuple[int, int]] = set()
        group = sorted(current)
        for i, (v1, m1) in enumerate(group):
            for v2, m2 in group[i + 1:]:
                if m1 != m2:
                    continue
                diff = v1 ^ v2
                if diff and (diff & (diff - 1)) == 0:  # differ in exactly one bit
                    merged.add((v1 & ~diff, m1 & ~diff))
                    used.add((v1, m1))
                    used.add((v2, m2))
        primes |= current - used
        current = merged
    return primes


def _covers(implicant: tuple[int, int], minterm: int) -> bool:
    value, mask = implicant
    return (minterm & mask) == value


def _petrick_min_cover(
    primes: list[tuple[int, int]], minterms: set[int]
) -> list[tuple[int, int]]:
    """Smallest prime cover: fewest terms, then fewest literals, then lexicographic."""
    # Essential primes first keeps the product-of-sums expansion tiny.
    remaining = set(minterms)
    chosen: set[tuple[int, int]] = set()
    changed = True
    while changed and remaining:
        changed = False
        for m in sorted(remaining):
            covering = [p for p in primes if _covers(p, m)]
            if len(covering) == 1:
                p = covering[0]
                if p not in chosen:
                    chosen.add(p)
                    changed = True
                remaining -= {x for x in remaining if _covers(p, x)}
                break
    if remaining:
        covers_by_minterm = [frozenset(p for p in primes if _covers(p, m)) for m in sorted(remaining)]
        candidates: set[frozenset[tuple[int, int]]] = {frozenset()}
        for options in covers_by_minterm:
            candidates = {c | {p} for c in candidates for p in options}
            # prune supersets to keep the expansion irredundant
            minimal = {c for c in candidates if not any(o < c for o in candidates)}
            candidates = minimal
        best = min(candidates, key=lambda c: _cover_key(chosen | c))
        chosen |= best
    return sorted(chosen, key=_term_key)


def _literal_count(implicant: tuple[int, int]) -> int:
    return bin(implicant[1]).count("1")


def _term_key(implicant: tuple[int, int]) -> tuple:
    value, mask = implicant
    lits = []
    k = 0
    m = mask
    while m:
        if m & 1:
            lits.append((k, 0 if value & (1 << k) else 1))
        m >>= 1
        k += 1
    return tuple(lits)


def _cover_key(cover: Iterable[tuple[int, int]]) -> tuple:
    terms = sorted(cover, key=_term_key)
    return (len(terms), sum(_literal_count(t) for t in terms), [_term_key(t) for t in terms])


def simplify(expr: FeatureExpr, alphabet: Iterable[str]) -> FeatureExpr:
    """Equivalent minimal-term sum-of-products in canonical order.

    Features appear in alphabet order within each product term; terms are
    sorted lexicographically with positive literals before negative ones.
    """
    feats = sorted(set(alphabet))
    _check_alphabet(expr, feats)
    support = [f for f in feats if f in names_of(expr)]
    if len(support) > MAX_ENUM_FEATURES:
        raise CapacityError(f"support of {len(support)} features exceeds enumeration guard")
    minterms = _minterms(expr, support)
    if not minterms:
        return FALSE
    if len(minterms) == 1 << len(support):
        return TRUE
    primes = sorted(_prime_implicants(minterms, len(support)), key=_term_key)
    cover = _petrick_min_cover(primes, minterms)
    terms: list[FeatureExpr] = []
    for value, mask in cover:
        lits: list[FeatureExpr] = []
        for k, name in enumerate(support):
            if mask & (1 << k):
                lit: FeatureExpr = Var(name)
                if not value & (1 << k):
                    lit = Not(lit)
                lits.append(lit)
        terms.append(and_all(lits) if lits else TRUE)
    return or_all(terms)


def simplify_within(expr: FeatureExpr, context: FeatureExpr, alphabet: Iterable[str]) -> FeatureExpr:
    """Minimal-term form of ``expr`` treating configurations outside ``context``
    as don't-care.  The result agrees with ``expr`` on every configuration
    satisfying ``context`` and is otherwise unconstrained.
    """
    feats = sorted(set(alphabet))
    _check_alphabet(expr, feats)
    _check_alphabet(context, feats)
    support = [f for f in feats if f in names_of(expr) | names_of(context)]
    if len(support) > MAX_ENUM_FEATURES:
        raise CapacityError(f"support of {len(support)} features exceeds enumeration guard")
    on = _minterms(And(expr, context), support)
    dc = _minterms(Not(context), support)
    if not on:
        return FALSE
    if len(on | dc) == 1 << len(support):
        return TRUE
    primes = sorted(_prime_implicants(on | dc, len(support)), key=_term_key)
    cover = _petrick_min_cover(primes, on)
    terms: list[FeatureExpr] = []
    for value, mask in cover:
        lits: list[FeatureExpr] = []
        for k, name in enumerate(support):
            if mask & (1 << k):
                lit: FeatureExpr = Var(name)
                if not value & (1 << k):
                    lit = Not(lit)
                lits.append(lit)
        terms.append(and_all(lits) if lits else TRUE)
    return or_all(terms)


# --- textual grammar ---
#
#   expr    := implies
#   implies := xor ('=>' implies)?        right-associative
#   xor     := or ('xor' or)*
#   or      := and ('|' and)*
#   and     := unary ('&' unary)*
#   unary   := '!' unary | atom
#   atom    := 'true' | 'false' | ident | '(' expr ')'

_TOKEN_RE = re.compile(r"\s*(=>|[!&|()]|[A-Za-z_][A-Za-z0-9_]*)")


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise FormulaParseError(f"unexpected character at {pos}: {text[pos:]!r}")
            break
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]) -> None:
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise FormulaParseError("unexpected end of formula")
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.take()
        if got != tok:
            raise FormulaParseError(f"expected {tok!r}, found {got!r}")

    def parse_expr(self) -> FeatureExpr:
        left = self.parse_xor()
        if self.peek() == "=>":
            self.take()
            return Implies(left, self.parse_expr())
        return left

    def parse_xor(self) -> FeatureExpr:
        left = self.parse_or()
        while self.peek() == "xor":
            self.take()
            left = Xor(left, self.parse_or())
        return left

    def parse_or(self) -> FeatureExpr:
        left = self.parse_and()
        while self.peek() == "|":
            self.take()
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> FeatureExpr:
        left = self.parse_unary()
        while self.peek() == "&":
            self.take()
            left = And(left, self.parse_unary())
        return left

    def parse_unary(self) -> FeatureExpr:
        if self.peek() == "!":
            self.take()
            return Not(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self) -> FeatureExpr:
        tok = self.take()
        if tok == "(":
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if valid_feature_name(tok):
            return Var(tok)
        raise FormulaParseError(f"unexpected token {tok!r}")


def parse(text: str) -> FeatureExpr:
    """Parse the textual grammar; raises FormulaParseError on malformed input."""
    parser = _Parser(_tokenize(text))
    expr = parser.parse_expr()
    if parser.peek() is not None:
        raise FormulaParseError(f"trailing input from token {parser.peek()!r}")
    return expr


_PREC = {Implies: 1, Xor: 2, Or: 3, And: 4, Not: 5, Var: 6, Const: 6}
_OP = {Implies: "=>", Xor: "xor", Or: "|", And: "&"}


def to_str(expr: FeatureExpr) -> str:
    """Structure-preserving rendering: ``parse(to_str(e)) == e``."""
    prec = _PREC[type(expr)]
    if isinstance(expr, Const):
        return "true" if expr.value else "false"
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Not):
        inner = to_str(expr.arg)
        if _PREC[type(expr.arg)] < prec:
            inner = f"({inner})"
        return f"!{inner}"
    assert isinstance(expr, (And, Or, Implies, Xor))
    # Implies is parsed right-associative, the rest left-associative.
    left_min = prec if isinstance(expr, Implies) else prec - 1
    right_min = prec - 1 if isinstance(expr, Implies) else prec
    left = to_str(expr.left)
    if _PREC[type(expr.left)] <= left_min:
        left = f"({left})"
    right = to_str(expr.right)
    if _PREC[type(expr.right)] <= right_min:
        right = f"({right})"
    return f"{left} {_OP[type(expr)]} {right}"


def canonical_str(expr: FeatureExpr, alphabet: Iterable[str]) -> str:
    """Serialized canonical form, for deterministic reports and digests."""
    return to_str(simplify(expr, alphabet))


def config_term(config: Iterable[str], alphabet: Iterable[str]) -> FeatureExpr:
    """The full conjunction selecting exactly ``config`` over ``alphabet``."""
    cfg = frozenset(config)
    lits: list[FeatureExpr] = []
    for name in sorted(set(alphabet)):
        v: FeatureExpr = Var(name)
        lits.append(v if name in cfg else Not(v))
    return and_all(lits)


@dataclass(frozen=True)
class FeatureModel:
    """An ordered feature alphabet together with a satisfiable validity formula."""

    alphabet: tuple[str, ...]
    formula: FeatureExpr

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for name in self.alphabet:
            if not valid_feature_name(name):
                raise AlphabetError(f"invalid feature name: {name!r}")
            if name in seen:
                raise AlphabetError(f"duplicate feature name: {name!r}")
            seen.add(name)
        _check_alphabet(self.formula, self.alphabet)
        if not satisfiable(self.formula, self.alphabet):
            raise StructureError("feature model is unsatisfiable: empty product line")

    def configurations(self, restrict: FeatureExpr = TRUE) -> list[frozenset[str]]:
        return configs_of(And(self.formula, restrict), self.alphabet)

    def admits(self, config: Iterable[str]) -> bool:
        return eval_expr(self.formula, config, self.alphabet)

    def entails(self, config: Iterable[str], expr: FeatureExpr) -> bool:
        return eval_expr(expr, config, self.alphabet)

    def equivalent(self, left: FeatureExpr, right: FeatureExpr) -> bool:
        """Equivalence restricted to the valid configurations of the model."""
        return equiv(And(self.formula, left), And(self.formula, right), self.alphabet)

    def simplify(self, expr: FeatureExpr) -> FeatureExpr:
        return simplify(expr, self.alphabet)

    def extended(self, new_features: Iterable[str], formula: FeatureExpr | None = None) -> FeatureModel:
        """The same model over a grown alphabet (formula unchanged by default)."""
        alphabet = self.alphabet + tuple(f for f in new_features if f not in self.alphabet)
        return FeatureModel(alphabet, self.formula if formula is None else formula)


def config_to_json(config: Iterable[str]) -> list[str]:
    return sorted(config)


def parse_config(text: str) -> frozenset[str]:
    """Parse a comma-separated configuration; empty string means the empty set."""
    items = [part.strip() for part in text.split(",") if part.strip()]
    for item in items:
        if not valid_feature_name(item):
            raise AlphabetError(f"invalid feature name in configuration: {item!r}")
    return frozenset(items)
