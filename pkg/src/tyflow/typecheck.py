"""Type derivation trees and the backtracking checker that builds them."""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass

from .constraints import ConstraintError
from .language import Judgment, LanguageDef, TypingRule
from .terms import Subst, SortError, Term, apply, check_sort, compose, fresh_rename
from .unification import UnificationError, unify

DEFAULT_DEPTH = 64

NO_RULE = "no-rule"
DEPTH = "depth"


class DerivationError(Exception):
    """No derivation was found; ``kind`` tells whether the depth limit was hit."""

    def __init__(self, kind: str, goal: Judgment):
        reason = "depth limit exceeded" if kind == DEPTH else "no rule applies"
        super().__init__(f"cannot derive {goal}: {reason}")
        self.kind = kind
        self.goal = goal


class TreeError(Exception):
    """A type derivation tree violates one of its invariants at ``path``."""

    def __init__(self, path: tuple[int, ...], message: str):
        where = "root" if not path else "node " + ".".join(map(str, path))
        super().__init__(f"{where}: {message}")
        self.path = path


@dataclass(frozen=True)
class TypeDerivationTree:
    judgment: Judgment
    rule_id: str
    instantiation: Subst
    children: tuple["TypeDerivationTree", ...] = ()

    def nodes(self) -> Iterator["TypeDerivationTree"]:
        """Pre-order traversal."""
        yield self
        for c in self.children:
            yield from c.nodes()

    def size(self) -> int:
        return sum(1 for _ in self.nodes())

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)

    def shape(self) -> tuple:
        return (self.rule_id, tuple(c.shape() for c in self.children))

    def pretty(self, indent: int = 0) -> str:
        lines = [f"{'  ' * indent}{self.judgment}  [{self.rule_id}]"]
        lines += [c.pretty(indent + 1) for c in self.children]
        return "\n".join(lines)


@dataclass
class _Node:
    rule: TypingRule
    renaming: Subst
    children: list["_Node"]

    def finish(self, s: Subst) -> TypeDerivationTree | None:
        inst = {v: apply(s, apply(self.renaming, v)) for v in self.rule.variables()}
        if not all(t.ground for t in inst.values()):
            return None
        kids = []
        for c in self.children:
            k = c.finish(s)
            if k is None:
                return None
            kids.append(k)
        return TypeDerivationTree(self.rule.conclusion.subst(inst), self.rule.id, Subst(inst, check=False), tuple(kids))


class _Search:
    def __init__(self, lang: LanguageDef, limit: int):
        self.lang = lang
        self.limit = limit
        self.hit_limit = False

    def goal(self, goal: Judgment, s: Subst, depth: int) -> Iterator[tuple[Subst, _Node]]:
        if depth > self.limit:
            self.hit_limit = True
            return
        g = goal.subst(s)
        for rule in self.lang.rules_concluding(g.pred):
            renamed, renaming = _rename(rule)
            try:
                s1 = unify(zip(renamed.conclusion.args, g.args), s)
            except UnificationError:
                continue
            for s2, kids in self.premises(renamed.premises, s1, depth + 1):
                for s3 in self.constraints(renamed, s2):
                    yield s3, _Node(rule, renaming, kids)

    def premises(self, premises, s: Subst, depth: int, i: int = 0) -> Iterator[tuple[Subst, list[_Node]]]:
        if i == len(premises):
            yield s, []
            return
        for s1, node in self.goal(premises[i], s, depth):
            for s2, rest in self.premises(premises, s1, depth, i + 1):
                yield s2, [node, *rest]

    def constraints(self, rule: TypingRule, s: Subst, i: int = 0) -> Iterator[Subst]:
        if i == len(rule.constraints):
            yield s
            return
        c = rule.constraints[i].subst(s)
        for sol in self.lang.registry.solve(c.name, c.args):
            yield from self.constraints(rule, compose(sol, s), i + 1)


def _rename(rule: TypingRule) -> tuple[TypingRule, Subst]:
    _, renaming = fresh_rename(rule.variables())
    return rule.subst(renaming), renaming


def derive(lang: LanguageDef, goal: Judgment, depth_limit: int = DEFAULT_DEPTH) -> TypeDerivationTree:
    """Build a derivation of ``goal`` trying rules in file order, premises left to right.

    The goal may contain variables that the derivation determines (the
    existential premise variables of a root rule); the returned tree is fully
    ground.  Raises :class:`DerivationError`.
    """
    search = _Search(lang, depth_limit)
    for s, node in search.goal(goal, Subst(), 1):
        tree = node.finish(s)
        if tree is not None:
            return tree
    raise DerivationError(DEPTH if search.hit_limit else NO_RULE, goal)


def check_program(lang: LanguageDef, program: Term, depth_limit: int = DEFAULT_DEPTH) -> TypeDerivationTree:
    """Derive ``root(program)``; the program must be ground."""
    if not program.ground:
        raise ValueError(f"program {program} is not ground")
    return derive(lang, Judgment(lang.root, (program,)), depth_limit)


def is_well_typed(lang: LanguageDef, program: Term, depth_limit: int = DEFAULT_DEPTH) -> bool:
    try:
        check_program(lang, program, depth_limit)
    except DerivationError:
        return False
    return True


def verify_tree(lang: LanguageDef, tree: TypeDerivationTree, path: tuple[int, ...] = ()) -> None:
    """Re-check every node without search; raise :class:`TreeError` at the first bad node."""
    j = tree.judgment
    psig = lang.preds.get(j.pred)
    if psig is None or len(j.args) != len(psig.params):
        raise TreeError(path, f"judgment {j} does not match any predicate signature")
    for a, sort in zip(j.args, psig.params):
        if not a.ground:
            raise TreeError(path, f"judgment {j} is not ground")
        try:
            check_sort(a, sort, lang.sig)
        except SortError as e:
            raise TreeError(path, str(e)) from None
    if tree.rule_id not in lang.rule_index:
        raise TreeError(path, f"unknown rule {tree.rule_id}")
    rule = lang.rule(tree.rule_id)
    inst = tree.instantiation
    rule_vars = set(rule.variables())
    if set(inst) != rule_vars:
        raise TreeError(path, f"instantiation of {rule.id} does not cover exactly its variables")
    for v, t in inst.items():
        if not t.ground or t.sort != v.sort:
            raise TreeError(path, f"{rule.id}: {v.name} instantiated to {t}")
    if rule.conclusion.subst(inst) != j:
        raise TreeError(path, f"{rule.id} concludes {rule.conclusion.subst(inst)}, node says {j}")
    if len(tree.children) != len(rule.premises):
        raise TreeError(path, f"{rule.id} has {len(rule.premises)} premises but node has {len(tree.children)} children")
    for i, (premise, child) in enumerate(zip(rule.premises, tree.children)):
        if premise.subst(inst) != child.judgment:
            raise TreeError(path, f"premise {i} of {rule.id} is {premise.subst(inst)}, child says {child.judgment}")
    for c in rule.constraints:
        try:
            holds = lang.evaluate(c.subst(inst))
        except ConstraintError as e:
            raise TreeError(path, str(e)) from None
        if not holds:
            raise TreeError(path, f"constraint {c.subst(inst)} of {rule.id} is false")
    for i, child in enumerate(tree.children):
        verify_tree(lang, child, path + (i,))
