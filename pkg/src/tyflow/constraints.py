"""Built-in constraint predicates usable in typing rules.

A constraint is checked on ground arguments.  Some constraints can also be
*solved* when a few arguments are still open (``lookup`` can compute the type
of a bound name); the proof search in :mod:`tyflow.typecheck` uses that to
handle premise variables that never appear in the conclusion.  The synthesis
engine never solves constraints: by the time it checks one, every argument
is ground.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass

from .terms import App, Subst, Term
from .unification import UnificationError, unify


class ConstraintError(Exception):
    """Unknown constraint, wrong arity, or non-ground arguments."""


Checker = Callable[[Sequence[Term]], bool]
Solver = Callable[[Sequence[Term]], Iterator[Subst]]


@dataclass(frozen=True)
class ConstraintDef:
    name: str
    arity: int
    check: Checker
    solve: Solver | None = None


def _bindings(ctx: Term) -> Iterator[tuple[Term, Term]]:
    # Contexts are snoc lists: a constant for the empty context, or a
    # three-argument constructor (rest, key, value).  Innermost first.
    while isinstance(ctx, App) and len(ctx.args) == 3 and ctx.args[0].sort == ctx.sort:
        rest, key, value = ctx.args
        yield key, value
        ctx = rest


def _lookup_value(ctx: Term, name: Term) -> Term | None:
    for key, value in _bindings(ctx):
        if key == name:
            return value
    return None


def _lookup(args: Sequence[Term]) -> bool:
    ctx, name, ty = args
    return _lookup_value(ctx, name) == ty


def _solve_lookup(args: Sequence[Term]) -> Iterator[Subst]:
    ctx, name, ty = args
    if not (ctx.ground and name.ground):
        return
    value = _lookup_value(ctx, name)
    if value is None or value.sort != ty.sort:
        return
    try:
        yield unify([(value, ty)])
    except UnificationError:
        return


def _not_bound(args: Sequence[Term]) -> bool:
    ctx, name = args
    return _lookup_value(ctx, name) is None


def _solve_eq(args: Sequence[Term]) -> Iterator[Subst]:
    a, b = args
    if a.sort != b.sort:
        return
    try:
        yield unify([(a, b)])
    except UnificationError:
        return


class ConstraintRegistry:
    """Name -> constraint definition.  Hosts may register their own."""

    def __init__(self, defs: Sequence[ConstraintDef] = ()):
        self._defs = {d.name: d for d in defs}

    def register(self, name: str, arity: int, check: Checker, solve: Solver | None = None) -> None:
        self._defs[name] = ConstraintDef(name, arity, check, solve)

    def __contains__(self, name: str) -> bool:
        return name in self._defs

    def get(self, name: str) -> ConstraintDef:
        try:
            return self._defs[name]
        except KeyError:
            raise ConstraintError(f"unknown constraint {name!r}") from None

    def names(self) -> list[str]:
        return sorted(self._defs)

    def evaluate(self, name: str, args: Sequence[Term]) -> bool:
        cdef = self.get(name)
        if len(args) != cdef.arity:
            raise ConstraintError(f"{name} takes {cdef.arity} arguments, got {len(args)}")
        for a in args:
            if not a.ground:
                raise ConstraintError(f"{name} called on non-ground argument {a}")
        return bool(cdef.check(args))

    def solve(self, name: str, args: Sequence[Term]) -> Iterator[Subst]:
        """Substitutions making the constraint true; empty when it cannot be solved."""
        cdef = self.get(name)
        if all(a.ground for a in args):
            if self.evaluate(name, args):
                yield Subst()
            return
        if cdef.solve is None:
            raise ConstraintError(f"{name} cannot be solved with open arguments {list(map(str, args))}")
        yield from cdef.solve(args)


def default_registry() -> ConstraintRegistry:
    return ConstraintRegistry(
        [
            ConstraintDef("lookup", 3, _lookup, _solve_lookup),
            ConstraintDef("not_bound", 2, _not_bound),
            ConstraintDef("eq", 2, lambda a: a[0] == a[1], _solve_eq),
            ConstraintDef("neq", 2, lambda a: a[0] != a[1]),
            ConstraintDef("true_k", 0, lambda a: True),
        ]
    )


BUILTINS = default_registry()
