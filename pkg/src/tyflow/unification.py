"""First-order syntactic unification with occurs check."""

from __future__ import annotations

from collections.abc import Iterable, Mapping

from .terms import App, Const, Subst, Term, Var, apply, iter_vars

CLASH = "clash"
OCCURS = "occurs"
SORT = "sort"


class UnificationError(Exception):
    """No unifier exists.

    ``kind`` is one of ``"clash"``, ``"occurs"`` or ``"sort"``; ``witness`` is
    the offending pair of (already substituted) terms.
    """

    def __init__(self, kind: str, witness: tuple[Term, Term]):
        left, right = witness
        super().__init__(f"{kind}: {left} vs {right}")
        self.kind = kind
        self.witness = witness


def unify(pairs: Iterable[tuple[Term, Term]], subst: Subst | None = None) -> Subst:
    """Most general unifier of ``pairs``, optionally extending ``subst``.

    Equations are processed left to right, depth first.  When two variables
    meet, the one with the lower id is bound to the other, so older goal
    variables are expressed in terms of newer rule variables.
    """
    pairs = list(pairs)
    for left, right in pairs:
        if left.sort != right.sort:
            raise UnificationError(SORT, (left, right))
    bindings: dict[Var, Term] = dict(subst) if subst else {}
    stack = list(reversed(pairs))
    while stack:
        left, right = stack.pop()
        left = apply(bindings, left)
        right = apply(bindings, right)
        if left == right:
            continue
        if isinstance(left, Var) and isinstance(right, Var):
            if left.id < right.id:
                _bind(bindings, left, right)
            else:
                _bind(bindings, right, left)
        elif isinstance(left, Var):
            _bind_checked(bindings, left, right)
        elif isinstance(right, Var):
            _bind_checked(bindings, right, left)
        elif isinstance(left, App) and isinstance(right, App) and left.con == right.con and len(left.args) == len(right.args):
            stack.extend(reversed(list(zip(left.args, right.args))))
        else:
            raise UnificationError(CLASH, (left, right))
    return Subst(bindings, check=False)


def _bind_checked(bindings: dict[Var, Term], v: Var, t: Term) -> None:
    if v.sort != t.sort:
        raise UnificationError(SORT, (v, t))
    if any(w == v for w in iter_vars(t)):
        raise UnificationError(OCCURS, (v, t))
    _bind(bindings, v, t)


def _bind(bindings: dict[Var, Term], v: Var, t: Term) -> None:
    single = {v: t}
    for w, u in bindings.items():
        bindings[w] = apply(single, u)
    bindings[v] = t


def unifiable(pairs: Iterable[tuple[Term, Term]]) -> bool:
    try:
        unify(pairs)
    except UnificationError:
        return False
    return True


class MatchError(Exception):
    pass


def match(pattern: Term, target: Term, bindings: dict[Var, Term] | None = None) -> dict[Var, Term]:
    """One-way matching: find ``m`` with ``apply(m, pattern) == target``.

    Variables of ``target`` are treated as rigid.  Raises :class:`MatchError`.
    """
    bindings = {} if bindings is None else bindings
    stack = [(pattern, target)]
    while stack:
        p, t = stack.pop()
        if isinstance(p, Var):
            if p.sort != t.sort:
                raise MatchError(f"sort mismatch binding {p} to {t}")
            prev = bindings.get(p)
            if prev is None:
                bindings[p] = t
            elif prev != t:
                raise MatchError(f"{p} matched to both {prev} and {t}")
        elif isinstance(p, Const):
            if p != t:
                raise MatchError(f"{p} does not match {t}")
        elif isinstance(t, App) and t.con == p.con and len(t.args) == len(p.args):
            stack.extend(zip(p.args, t.args))
        else:
            raise MatchError(f"{p} does not match {t}")
    return bindings


def match_all(patterns: Iterable[Term], targets: Iterable[Term], bindings: dict[Var, Term] | None = None) -> dict[Var, Term]:
    bindings = {} if bindings is None else bindings
    patterns, targets = list(patterns), list(targets)
    if len(patterns) != len(targets):
        raise MatchError("length mismatch")
    for p, t in zip(patterns, targets):
        match(p, t, bindings)
    return bindings


def factor_witness(general: Mapping[Var, Term], other: Mapping[Var, Term], vars: Iterable[Var]) -> Subst:
    """Find ``rho`` with ``other(v) == rho(general(v))`` for every ``v`` in ``vars``.

    This is the test oracle for most-generality: an MGU must admit such a
    ``rho`` for every other unifier.  Identity bindings are dropped.  Raises
    :class:`MatchError` when no factor exists.
    """
    bindings: dict[Var, Term] = {}
    for v in vars:
        match(apply(general, v), apply(other, v), bindings)
    return Subst({v: t for v, t in bindings.items() if t != v}, check=False)
