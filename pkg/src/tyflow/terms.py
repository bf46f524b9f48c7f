"""Sorted first-order terms, substitutions and the fresh-variable supply.

Terms are immutable.  Every node carries the name of its sort, so sort safety of
substitutions can be checked locally without consulting a signature.  The
canonical textual form is an s-expression: constants and atoms print bare,
applications are parenthesised and variables print as ``?name.id``.
"""

from __future__ import annotations

import itertools
import threading
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Union

INDUCTIVE = "inductive"
TEXT = "text"
INT = "int"

BUILTIN_SORTS = {"String": TEXT, "Int": INT}


class SortError(Exception):
    """A term does not fit the sort expected at its position."""

    def __init__(self, message: str, term: "Term | None" = None):
        super().__init__(message)
        self.term = term


@dataclass(frozen=True, slots=True)
class Sort:
    name: str
    kind: str = INDUCTIVE


@dataclass(frozen=True, slots=True)
class ConstructorSig:
    name: str
    result: str
    params: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class Const:
    name: str
    sort: str

    def __str__(self) -> str:
        return self.name

    @property
    def ground(self) -> bool:
        return True


@dataclass(frozen=True, slots=True)
class Var:
    id: int
    sort: str
    name: str = field(default="v", compare=False)

    def __str__(self) -> str:
        return f"?{self.name}.{self.id}"

    @property
    def ground(self) -> bool:
        return False


@dataclass(frozen=True, slots=True)
class App:
    con: str
    args: tuple["Term", ...]
    sort: str
    ground: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "ground", all(a.ground for a in self.args))

    def __str__(self) -> str:
        return "(" + " ".join([self.con, *map(str, self.args)]) + ")"


Term = Union[Const, Var, App]


def is_ground(t: Term) -> bool:
    return t.ground


def size(t: Term) -> int:
    if isinstance(t, App):
        return 1 + sum(size(a) for a in t.args)
    return 1


def iter_vars(t: Term) -> Iterator[Var]:
    """Yield variable occurrences of ``t`` in pre-order (with repeats)."""
    if isinstance(t, Var):
        yield t
    elif isinstance(t, App) and not t.ground:
        for a in t.args:
            yield from iter_vars(a)


def free_vars(*terms: Term) -> tuple[Var, ...]:
    """Variables of ``terms``, each once, ordered by first pre-order occurrence."""
    seen: dict[Var, None] = {}
    for t in terms:
        for v in iter_vars(t):
            seen.setdefault(v)
    return tuple(seen)


# -- fresh variables ---------------------------------------------------------


class FreshSupply:
    """Monotone, thread-safe source of variable ids."""

    def __init__(self, start: int = 1):
        self._counter = itertools.count(start)
        self._lock = threading.Lock()

    def next_id(self) -> int:
        with self._lock:
            return next(self._counter)

    def var(self, sort: str, name: str = "v") -> Var:
        return Var(self.next_id(), sort, name)


FRESH = FreshSupply()


def fresh_var(sort: str, name: str = "v") -> Var:
    return FRESH.var(sort, name)


# -- substitutions -----------------------------------------------------------


class Subst(Mapping):
    """An idempotent finite map from variables to terms.

    Construction checks that each binding preserves the variable's sort.
    Idempotence (no domain variable occurs in a range term) is maintained by
    :func:`compose` and :mod:`tyflow.unification`; it is not re-verified on
    every construction because that would be quadratic on hot paths.
    """

    __slots__ = ("_map",)

    def __init__(self, bindings: Mapping[Var, Term] | Iterable[tuple[Var, Term]] = (), *, check: bool = True):
        m = dict(bindings)
        if check:
            for v, t in m.items():
                if not isinstance(v, Var):
                    raise TypeError(f"substitution key {v!r} is not a variable")
                if v.sort != t.sort:
                    raise SortError(f"cannot bind {v} of sort {v.sort} to {t} of sort {t.sort}", t)
        self._map = m

    def __getitem__(self, v: Var) -> Term:
        return self._map[v]

    def __iter__(self):
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def __eq__(self, other) -> bool:
        if isinstance(other, Subst):
            return self._map == other._map
        if isinstance(other, Mapping):
            return self._map == dict(other)
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._map.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{v} -> {t}" for v, t in self._map.items())
        return "{" + inner + "}"

    @property
    def domain(self) -> frozenset[Var]:
        return frozenset(self._map)

    def is_assignment(self) -> bool:
        return all(t.ground for t in self._map.values())

    def is_idempotent(self) -> bool:
        dom = self._map.keys()
        return not any(v in dom for t in self._map.values() for v in iter_vars(t))

    def __call__(self, t: Term) -> Term:
        return apply(self, t)


EMPTY = Subst()


def apply(s: Mapping[Var, Term], t: Term) -> Term:
    """Replace every variable of ``t`` bound by ``s`` simultaneously."""
    if t.ground or not s:
        return t
    if isinstance(t, Var):
        return s.get(t, t)
    new_args = tuple(apply(s, a) for a in t.args)
    if all(n is o for n, o in zip(new_args, t.args)):
        return t
    return App(t.con, new_args, t.sort)


def apply_all(s: Mapping[Var, Term], ts: Iterable[Term]) -> tuple[Term, ...]:
    return tuple(apply(s, t) for t in ts)


def compose(s1: Subst, s2: Subst) -> Subst:
    """The substitution ``s1 . s2``: first ``s2``, then ``s1``.

    ``apply(compose(s1, s2), t) == apply(s1, apply(s2, t))`` always holds.  The
    result is idempotent whenever no range term of ``s1`` mentions a variable
    in the domain of ``s2``, which is how composition is used throughout the
    synthesis engine (later substitutions bind only variables still open after
    earlier ones).
    """
    if not s2:
        return s1
    if not s1:
        return s2
    out = {v: apply(s1, t) for v, t in s2.items()}
    for v, t in s1.items():
        if v not in out:
            out[v] = t
    out = {v: t for v, t in out.items() if t != v}
    return Subst(out, check=False)


def restrict(s: Subst, vs: Iterable[Var]) -> Subst:
    keep = set(vs)
    return Subst({v: t for v, t in s.items() if v in keep}, check=False)


def fresh_rename(terms: Iterable[Term], supply: FreshSupply | None = None) -> tuple[tuple[Term, ...], Subst]:
    """Rename every variable of ``terms`` apart, keeping names and sorts.

    Returns the renamed terms and the renaming used.
    """
    supply = supply or FRESH
    terms = tuple(terms)
    renaming = Subst({v: supply.var(v.sort, v.name) for v in free_vars(*terms)}, check=False)
    return apply_all(renaming, terms), renaming


def renumber(terms: Iterable[Term], start: int = 0) -> tuple[tuple[Term, ...], Subst]:
    """Rename variables to consecutive ids in first-occurrence order."""
    terms = tuple(terms)
    renaming = Subst({v: Var(start + i, v.sort, v.name) for i, v in enumerate(free_vars(*terms))}, check=False)
    return apply_all(renaming, terms), renaming


# -- signatures --------------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    """Sorts with their constants and constructors, in declaration order.

    ``alternatives[sort]`` lists constant and constructor names exactly as they
    were declared; that order is the canonical order of term tokens.
    """

    sorts: Mapping[str, Sort]
    alternatives: Mapping[str, tuple[str, ...]]
    constants: Mapping[str, str]  # constant name -> sort
    constructors: Mapping[str, ConstructorSig]

    def sort_of_symbol(self, name: str) -> str | None:
        if name in self.constants:
            return self.constants[name]
        if name in self.constructors:
            return self.constructors[name].result
        return None

    def kind(self, sort: str) -> str:
        return self.sorts[sort].kind


def check_sort(t: Term, expected: str, sig: Signature) -> None:
    """Raise :class:`SortError` naming the first subterm that is not well-sorted."""
    if expected not in sig.sorts:
        raise SortError(f"unknown sort {expected}", t)
    if t.sort != expected:
        raise SortError(f"{t} has sort {t.sort}, expected {expected}", t)
    kind = sig.sorts[expected].kind
    if isinstance(t, Var):
        return
    if isinstance(t, Const):
        if kind == TEXT:
            if not is_atom(t.name):
                raise SortError(f"{t.name!r} is not a valid String atom", t)
        elif kind == INT:
            if not _is_int(t.name):
                raise SortError(f"{t.name!r} is not an Int literal", t)
        elif sig.constants.get(t.name) != expected:
            raise SortError(f"{t.name} is not a constant of sort {expected}", t)
        return
    csig = sig.constructors.get(t.con)
    if csig is None or csig.result != expected:
        raise SortError(f"{t.con} is not a constructor of sort {expected}", t)
    if len(t.args) != len(csig.params):
        raise SortError(f"{t.con} expects {len(csig.params)} arguments, got {len(t.args)}", t)
    for a, p in zip(t.args, csig.params):
        check_sort(a, p, sig)


def is_atom(text: str) -> bool:
    return bool(text) and (text[0].isalpha() or text[0] == "_") and all(c.isalnum() or c in "_'" for c in text)


def _is_int(text: str) -> bool:
    return text.lstrip("-").isdigit()
