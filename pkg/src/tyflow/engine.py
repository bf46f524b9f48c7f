"""Goal-directed synthesis driven one decision token at a time.

:class:`SynthState` is an immutable snapshot of a synthesis run: a stack of
open rule applications, the composed substitution so far and the tokens
consumed.  ``state.choice()`` says what the run is waiting for (a rule for the
current goal, or the next token of a term being acquired) and which tokens are
legal; ``state.advance(token)`` returns the successor state or raises
:class:`SynthFailure`.  Because states never change, any state can be kept and
extended several ways, which is all beam search and exhaustive enumeration
need.

Token forms are ``R:<rule>``, ``C:<constructor>``, ``K:<constant>`` and
``N:<atom>``.  Terms are acquired in pre-order: a ``C`` token opens a
constructor whose arguments follow.
"""

from __future__ import annotations

import math
import random
import threading
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field, replace

from .language import Judgment, LanguageDef
from .terms import EMPTY, INT, TEXT, App, Const, Subst, Term, Var, apply, apply_all, compose, free_vars, fresh_rename
from .translation import SynthesisRule
from .typecheck import TypeDerivationTree
from .unification import UnificationError, unify

RULE, CON, CONST, NAME = "R", "C", "K", "N"

# failure sites
SELECTION = "selection"
UNIFICATION = "unification"
ACQUISITION = "acquisition"
CONSTRAINT = "constraint"
BUDGET = "budget"
EXHAUSTED = "exhausted"

DEFAULT_MAX_TOKENS = 256
DEFAULT_MAX_DEPTH = 64


@dataclass(frozen=True, slots=True)
class Token:
    kind: str
    value: str

    def __str__(self) -> str:
        return f"{self.kind}:{self.value}"

    @classmethod
    def parse(cls, text: str) -> "Token":
        kind, sep, value = text.partition(":")
        if not sep or kind not in (RULE, CON, CONST, NAME) or not value:
            raise ValueError(f"malformed token {text!r}")
        return cls(kind, value)


def parse_tokens(text: str) -> tuple[Token, ...]:
    return tuple(Token.parse(t) for t in text.split())


def format_tokens(tokens: Iterable[Token]) -> str:
    return " ".join(map(str, tokens))


class SynthFailure(Exception):
    """A synthesis run cannot continue.

    ``site`` names where it failed, ``index`` is the position of the token
    whose consequences failed and ``path`` the subgoal path of the rule
    application involved.
    """

    def __init__(self, site: str, index: int, detail: str, path: tuple[int, ...] = ()):
        super().__init__(f"{site} failure at token {index}: {detail}")
        self.site = site
        self.index = index
        self.detail = detail
        self.path = path


class IllegalToken(ValueError):
    """A token outside the legal set was offered.  Always a caller bug."""

    def __init__(self, token: Token, index: int, legal: Sequence[Token]):
        shown = " ".join(map(str, legal[:12])) + (" ..." if len(legal) > 12 else "")
        super().__init__(f"token {index} ({token}) is not legal here; legal: {shown or 'none'}")
        self.token = token
        self.index = index


class GroundnessViolation(AssertionError):
    pass


class InvariantMonitor:
    """Thread-safe tally of the groundness checks made by the engine."""

    def __init__(self):
        self._lock = threading.Lock()
        self.checks = 0
        self.violations = 0
        self.last: str | None = None

    def record(self, ok: bool, message: str = "") -> None:
        with self._lock:
            self.checks += 1
            if not ok:
                self.violations += 1
                self.last = message

    def reset(self) -> None:
        with self._lock:
            self.checks = self.violations = 0
            self.last = None

    def snapshot(self) -> tuple[int, int]:
        with self._lock:
            return self.checks, self.violations


GROUNDNESS = InvariantMonitor()


@dataclass(frozen=True)
class Limits:
    max_tokens: int = DEFAULT_MAX_TOKENS
    max_depth: int = DEFAULT_MAX_DEPTH
    prune_types: bool = True
    check_invariants: bool = True


@dataclass(frozen=True)
class SynthDerivationTree:
    goal: Judgment
    rule_id: str
    sigma: Subst
    acquisition: Subst
    theta: Subst
    instantiation: Subst
    children: tuple["SynthDerivationTree", ...] = ()

    def nodes(self) -> Iterator["SynthDerivationTree"]:
        yield self
        for c in self.children:
            yield from c.nodes()

    def size(self) -> int:
        return sum(1 for _ in self.nodes())

    def shape(self) -> tuple:
        return (self.rule_id, tuple(c.shape() for c in self.children))


@dataclass(frozen=True)
class Choice:
    """What a run waits for.  ``tokens`` is the legal set in canonical order;
    ``affordable`` drops the tokens whose static minimum cost already exceeds
    the remaining budget; the rest may still fail the budget check once the
    goal is known."""

    kind: str  # "rule" or "term"
    goal: Judgment
    tokens: tuple[Token, ...]
    affordable: tuple[Token, ...]
    sort: str | None = None
    var: Var | None = None


# -- per-language tables ---------------------------------------------------------


class TokenTables:
    """Legal token lists, canonical order and minimal completion costs."""

    def __init__(self, lang: LanguageDef):
        sig = lang.sig
        self.rule_tokens: dict[str, tuple[Token, ...]] = {p: () for p in lang.preds}
        for r in lang.rules:
            self.rule_tokens[r.conclusion.pred] += (Token(RULE, r.id),)
        self.term_tokens: dict[str, tuple[Token, ...]] = {}
        for sname, srt in sig.sorts.items():
            if srt.kind == TEXT:
                toks = tuple(Token(NAME, a) for a in lang.names)
            elif srt.kind == INT:
                toks = tuple(Token(CONST, i) for i in lang.ints)
            else:
                toks = tuple(Token(CON if a in sig.constructors else CONST, a) for a in sig.alternatives.get(sname, ()))
            self.term_tokens[sname] = toks
        self.rule_sets = {p: frozenset(t) for p, t in self.rule_tokens.items()}
        self.term_sets = {s: frozenset(t) for s, t in self.term_tokens.items()}
        self.order: dict[Token, int] = {}
        for toks in (*self.rule_tokens.values(), *self.term_tokens.values()):
            for i, t in enumerate(toks):
                self.order[t] = i
        self.min_term = self._min_terms(lang)
        self.min_goal = self._min_goals(lang)
        self.token_cost: dict[Token, float] = {}
        for r in lang.rules:
            self.token_cost[Token(RULE, r.id)] = 1 + sum(self.min_goal[j.pred] for j in r.premises)
        for toks in self.term_tokens.values():
            for t in toks:
                if t.kind == CON:
                    self.token_cost[t] = 1 + sum(self.min_term[s] for s in sig.constructors[t.value].params)
                else:
                    self.token_cost[t] = 1

    @staticmethod
    def _min_terms(lang: LanguageDef) -> dict[str, float]:
        sig = lang.sig
        m = {s: math.inf for s in sig.sorts}
        for s, srt in sig.sorts.items():
            if srt.kind == TEXT and lang.names or srt.kind == INT and lang.ints:
                m[s] = 1
        changed = True
        while changed:
            changed = False
            for s, alts in sig.alternatives.items():
                for a in alts:
                    c = 1 + sum(m[p] for p in sig.constructors[a].params) if a in sig.constructors else 1
                    if c < m[s]:
                        m[s], changed = c, True
        return m

    @staticmethod
    def _min_goals(lang: LanguageDef) -> dict[str, float]:
        m = {p: math.inf for p in lang.preds}
        changed = True
        while changed:
            changed = False
            for r in lang.rules:
                c = 1 + sum(m[j.pred] for j in r.premises)
                if c < m[r.conclusion.pred]:
                    m[r.conclusion.pred], changed = c, True
        return m


def tables(lang: LanguageDef) -> TokenTables:
    return lang.token_tables


# -- the state machine ------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class _Partial:
    con: str
    params: tuple[str, ...]
    args: tuple[Term, ...] = ()


@dataclass(frozen=True, slots=True)
class _Frame:
    goal: Judgment
    path: tuple[int, ...]
    rule: SynthesisRule | None = None
    body: object = None  # the renamed TypingRule
    renaming: Subst = EMPTY
    sigma: Subst = EMPTY
    pending: tuple[Var, ...] = ()
    acquired: tuple[tuple[Var, Term], ...] = ()
    partial: tuple[_Partial, ...] = ()
    next_sub: int = 0
    children: tuple[SynthDerivationTree, ...] = ()

    def expected_sort(self) -> str:
        if self.partial:
            p = self.partial[-1]
            return p.params[len(p.args)]
        return self.pending[0].sort


class SynthState:
    __slots__ = ("lang", "limits", "subst", "frames", "tokens", "tree", "doomed", "_tables")

    def __init__(self, lang, limits, subst, frames, tokens, tree, doomed):
        self.lang: LanguageDef = lang
        self.limits: Limits = limits
        self.subst: Subst = subst
        self.frames: tuple[_Frame, ...] = frames
        self.tokens: tuple[Token, ...] = tokens
        self.tree: SynthDerivationTree | None = tree
        self.doomed: bool = doomed
        self._tables: TokenTables = lang.token_tables

    @classmethod
    def start(cls, lang: LanguageDef, goal: Judgment | None = None, limits: Limits | None = None) -> "SynthState":
        goal = goal or lang.root_goal()
        state = cls(lang, limits or Limits(), EMPTY, (_Frame(goal, ()),), (), None, False)
        state._check_selectable(state.frames[-1], 0)
        return state

    # -- inspection

    @property
    def done(self) -> bool:
        return self.tree is not None

    @property
    def accepted(self) -> bool:
        return self.tree is not None and not self.doomed

    def current_frame(self) -> _Frame:
        return self.frames[-1]

    def legal_tokens(self) -> tuple[Token, ...]:
        if self.done:
            return ()
        top = self.frames[-1]
        if top.rule is None:
            return self._tables.rule_tokens.get(top.goal.pred, ())
        return self._tables.term_tokens[top.expected_sort()]

    def choice(self) -> Choice:
        if self.done:
            raise RuntimeError("synthesis already finished")
        top = self.frames[-1]
        legal = self.legal_tokens()
        room = self.limits.max_tokens - len(self.tokens) - self._rest_cost()
        cost = self._tables.token_cost
        affordable = tuple(t for t in legal if cost[t] <= room)
        goal = top.goal.subst(self.subst)
        if top.rule is None:
            return Choice("rule", goal, legal, affordable)
        return Choice("term", goal, legal, affordable, top.expected_sort(), top.pending[0])

    def min_remaining(self) -> float:
        """Lower bound on the tokens still needed to finish."""
        if self.done:
            return 0
        top = self.frames[-1]
        if top.rule is None:
            demand = self._tables.min_goal.get(top.goal.pred, math.inf)
        else:
            demand = self._tables.min_term[top.expected_sort()]
        return self._rest_cost() + demand

    def _rest_cost(self) -> float:
        # Cost of everything still open except the item currently demanded.
        mg, mt = self._tables.min_goal, self._tables.min_term
        total = 0.0
        top = self.frames[-1]
        for f in self.frames[:-1]:
            total += sum(mg[j.pred] for j in f.body.premises[f.next_sub + 1 :])
        if top.rule is not None:
            # each open constructor still owes the params after the one in progress
            for p in top.partial:
                total += sum(mt[s] for s in p.params[len(p.args) + 1 :])
            waiting = top.pending[1:]
            total += sum(mt[v.sort] for v in waiting)
            total += sum(mg[j.pred] for j in top.body.premises[top.next_sub :])
        return total

    # -- transitions

    def advance(self, token: Token | str) -> "SynthState":
        if isinstance(token, str):
            token = Token.parse(token)
        index = len(self.tokens)
        if self.done:
            raise IllegalToken(token, index, ())
        top = self.frames[-1]
        legal = self._tables.rule_sets[top.goal.pred] if top.rule is None else self._tables.term_sets[top.expected_sort()]
        if token not in legal:
            raise IllegalToken(token, index, self.legal_tokens())
        if index + 1 > self.limits.max_tokens:
            raise SynthFailure(BUDGET, index, f"token budget {self.limits.max_tokens} exhausted", top.path)
        if top.rule is None:
            nxt = self._select(token, index)
        else:
            nxt = self._acquire(token)
        nxt = nxt._settle(index)
        if not nxt.done and len(nxt.tokens) + nxt.min_remaining() > self.limits.max_tokens:
            raise SynthFailure(BUDGET, index, f"cannot finish within {self.limits.max_tokens} tokens", nxt.frames[-1].path)
        return nxt

    def _with(self, **kw) -> "SynthState":
        fields = {
            "lang": self.lang,
            "limits": self.limits,
            "subst": self.subst,
            "frames": self.frames,
            "tokens": self.tokens,
            "tree": self.tree,
            "doomed": self.doomed,
        }
        fields.update(kw)
        return SynthState(**fields)

    def _select(self, token: Token, index: int) -> "SynthState":
        top = self.frames[-1]
        srule = self.lang.synthesis_rules[token.value]
        rule = self.lang.rule(token.value)
        _, renaming = fresh_rename(rule.variables())
        body = rule.subst(renaming)
        goal = top.goal.subst(self.subst)
        doomed = self.doomed
        try:
            sigma = unify(zip(body.conclusion.args, goal.args))
        except UnificationError as e:
            if self.limits.prune_types:
                raise SynthFailure(UNIFICATION, index, f"{token.value} does not conclude {goal}: {e}", top.path) from None
            sigma, doomed = EMPTY, True
        subst = compose(sigma, self.subst)
        pending = free_vars(*apply_all(subst, apply_all(renaming, srule.free)))
        frame = replace(top, rule=srule, body=body, renaming=renaming, sigma=sigma, pending=pending)
        return self._with(subst=subst, frames=self.frames[:-1] + (frame,), tokens=self.tokens + (token,), doomed=doomed)

    def _acquire(self, token: Token) -> "SynthState":
        top = self.frames[-1]
        sort = top.expected_sort()
        if token.kind == CON:
            params = self.lang.sig.constructors[token.value].params
            frame = replace(top, partial=top.partial + (_Partial(token.value, params),))
            return self._with(frames=self.frames[:-1] + (frame,), tokens=self.tokens + (token,))
        term: Term = Const(token.value, sort)
        partial = list(top.partial)
        while partial:
            p = partial.pop()
            args = p.args + (term,)
            if len(args) < len(p.params):
                partial.append(_Partial(p.con, p.params, args))
                break
            term = App(p.con, args, self.lang.sig.constructors[p.con].result)
        else:
            var = top.pending[0]
            frame = replace(top, partial=(), pending=top.pending[1:], acquired=top.acquired + ((var, term),))
            subst = compose(Subst({var: term}, check=False), self.subst)
            return self._with(subst=subst, frames=self.frames[:-1] + (frame,), tokens=self.tokens + (token,))
        frame = replace(top, partial=tuple(partial))
        return self._with(frames=self.frames[:-1] + (frame,), tokens=self.tokens + (token,))

    def _check_selectable(self, frame: _Frame, index: int) -> None:
        if not self._tables.rule_tokens.get(frame.goal.pred):
            raise SynthFailure(SELECTION, index, f"no rule concludes {frame.goal.pred}", frame.path)

    def _settle(self, index: int) -> "SynthState":
        # Runs the deterministic part of rule application until the next
        # oracle query: pushing subgoals, checking constraints, closing nodes.
        frames = list(self.frames)
        subst, doomed, tree = self.subst, self.doomed, None
        while True:
            top = frames[-1]
            if top.rule is None:
                self._check_selectable(top, index)
                break
            if top.pending:
                sort = top.expected_sort()
                if not self._tables.term_tokens[sort]:
                    raise SynthFailure(ACQUISITION, index, f"no tokens for sort {sort}", top.path)
                break
            body = top.body
            if top.next_sub < len(body.premises):
                if len(frames) >= self.limits.max_depth:
                    raise SynthFailure(BUDGET, index, f"depth limit {self.limits.max_depth} reached", top.path)
                frames.append(_Frame(body.premises[top.next_sub].subst(subst), top.path + (top.next_sub,)))
                continue
            node, ok = self._close(top, subst, doomed, index)
            doomed = doomed or not ok
            frames.pop()
            if not frames:
                tree = node
                break
            parent = frames[-1]
            frames[-1] = replace(parent, next_sub=parent.next_sub + 1, children=parent.children + (node,))
        return self._with(subst=subst, frames=tuple(frames), doomed=doomed, tree=tree)

    def _close(self, frame: _Frame, subst: Subst, doomed: bool, index: int) -> tuple[SynthDerivationTree, bool]:
        body = frame.body
        ok = True
        constraints = [c.subst(subst) for c in body.constraints]
        if not doomed:
            if self.limits.check_invariants:
                self._assert_ground(frame, subst, constraints)
            for c in constraints:
                if not self.lang.evaluate(c):
                    if self.limits.prune_types:
                        raise SynthFailure(CONSTRAINT, index, f"{c} is false", frame.path)
                    ok = False
                    break
        else:
            ok = False
        theta = Subst({v: apply(subst, v) for v in free_vars(*frame.goal.args)}, check=False)
        inst = Subst({v: apply(subst, apply(frame.renaming, v)) for v in self.lang.rule(frame.rule.id).variables()}, check=False)
        node = SynthDerivationTree(
            goal=frame.goal,
            rule_id=frame.rule.id,
            sigma=frame.sigma,
            acquisition=Subst(frame.acquired, check=False),
            theta=theta,
            instantiation=inst,
            children=frame.children,
        )
        return node, ok

    def _assert_ground(self, frame: _Frame, subst: Subst, constraints) -> None:
        body = frame.body
        terms = [*frame.goal.args, *body.conclusion.args]
        terms += [a for j in body.premises for a in j.args]
        terms += [a for c in constraints for a in c.args]
        bad = [t for t in apply_all(subst, terms) if not t.ground]
        message = f"{frame.rule.id} at {frame.path}: {', '.join(map(str, bad))} not ground" if bad else ""
        GROUNDNESS.record(not bad, message)
        if bad:
            raise GroundnessViolation(message)

    def program(self) -> Term:
        if not self.accepted:
            raise RuntimeError("synthesis has not produced an accepted tree")
        return extract_program(self.lang, self.tree)


# -- drivers ------------------------------------------------------------------


class Oracle:
    """Answers the two queries of a synthesis run.

    Subclasses override :meth:`select_rule` and :meth:`acquire_token`; both
    must return a member of ``legal``.
    """

    def select_rule(self, prompt: str, prefix: Sequence[Token], choice: Choice) -> Token:
        raise NotImplementedError

    def acquire_token(self, prompt: str, prefix: Sequence[Token], choice: Choice) -> Token:
        raise NotImplementedError

    def choose(self, prompt: str, prefix: Sequence[Token], choice: Choice) -> Token:
        if choice.kind == "rule":
            return self.select_rule(prompt, prefix, choice)
        return self.acquire_token(prompt, prefix, choice)


class ReplayOracle(Oracle):
    def __init__(self, tokens: Iterable[Token | str]):
        self.tokens = [t if isinstance(t, Token) else Token.parse(t) for t in tokens]

    def choose(self, prompt: str, prefix: Sequence[Token], choice: Choice) -> Token:
        i = len(prefix)
        if i >= len(self.tokens):
            raise SynthFailure(EXHAUSTED, i, "decision sequence ended early")
        return self.tokens[i]


class RandomOracle(Oracle):
    """Uniform choice among the tokens that can still finish within budget."""

    def __init__(self, seed: int | None = None, rng: random.Random | None = None):
        self.rng = rng or random.Random(seed)

    def choose(self, prompt: str, prefix: Sequence[Token], choice: Choice) -> Token:
        options = choice.affordable or choice.tokens
        return options[self.rng.randrange(len(options))]


class FunctionOracle(Oracle):
    """Wrap a plain ``f(prompt, prefix, choice) -> Token``."""

    def __init__(self, fn):
        self.fn = fn

    def choose(self, prompt: str, prefix: Sequence[Token], choice: Choice) -> Token:
        return self.fn(prompt, prefix, choice)


def run(
    lang: LanguageDef,
    oracle: Oracle,
    goal: Judgment | None = None,
    limits: Limits | None = None,
    prompt: str = "",
) -> SynthState:
    """Drive a run to completion; returns the final state."""
    state = SynthState.start(lang, goal, limits)
    while not state.done:
        choice = state.choice()
        state = state.advance(oracle.choose(prompt, state.tokens, choice))
    return state


def gen_synth_tree(
    lang: LanguageDef,
    goal: Judgment | None,
    oracle: Oracle,
    limits: Limits | None = None,
    prompt: str = "",
) -> SynthDerivationTree:
    """Build a synthesis derivation tree for ``goal`` (default: the root goal).

    Raises :class:`SynthFailure` when the oracle's decisions lead nowhere and
    :class:`IllegalToken` when it answers outside the legal set.
    """
    state = run(lang, oracle, goal, limits, prompt)
    if not state.accepted:
        raise SynthFailure(CONSTRAINT, len(state.tokens), "run finished on a branch that failed a type check")
    return state.tree


def replay_tokens(lang: LanguageDef, tokens: Sequence[Token], goal: Judgment | None = None, limits: Limits | None = None) -> SynthState:
    """Feed ``tokens`` to a fresh run; the run must finish exactly at the last one."""
    state = SynthState.start(lang, goal, limits)
    for i, tok in enumerate(tokens):
        if state.done:
            raise SynthFailure(EXHAUSTED, i, f"trailing token {tok} after the derivation finished")
        state = state.advance(tok)
    if not state.done:
        raise SynthFailure(EXHAUSTED, len(tokens), "decision sequence ended early")
    return state


def extract_program(lang: LanguageDef, tree: SynthDerivationTree) -> Term:
    goal = tree.goal
    if goal.pred != lang.root or len(goal.args) != 1 or not isinstance(goal.args[0], Var):
        raise ValueError(f"expected a tree for ({lang.root} ?p), got {goal}")
    return tree.theta[goal.args[0]]


def _result(lang: LanguageDef, tree: SynthDerivationTree):
    # The program for a unary root predicate, else the whole ground judgment.
    if len(tree.goal.args) == 1 and isinstance(tree.goal.args[0], Var):
        return extract_program(lang, tree)
    return Judgment(tree.goal.pred, apply_all(tree.theta, tree.goal.args))


def synth_to_type_tree(tree: SynthDerivationTree) -> TypeDerivationTree:
    judgment = Judgment(tree.goal.pred, apply_all(tree.theta, tree.goal.args))
    return TypeDerivationTree(judgment, tree.rule_id, tree.instantiation, tuple(synth_to_type_tree(c) for c in tree.children))


@dataclass
class Enumeration:
    results: list[tuple[tuple[Token, ...], Term | Judgment]] = field(default_factory=list)
    explored: int = 0

    @property
    def programs(self) -> list[Term]:
        return [p for _, p in self.results]


def enumerate_all(
    lang: LanguageDef,
    max_tokens: int,
    goal: Judgment | None = None,
    prune_types: bool = True,
) -> Enumeration:
    """Every accepted decision sequence of at most ``max_tokens`` tokens.

    Depth-first in canonical token order, so results come out sorted.
    ``explored`` counts the states reached.  With ``prune_types`` off, a
    branch that fails unification or a constraint keeps going and is only
    rejected when it finishes.
    """
    limits = Limits(max_tokens=max_tokens, prune_types=prune_types, check_invariants=True)
    out = Enumeration()
    try:
        root = SynthState.start(lang, goal, limits)
    except SynthFailure:
        return out
    stack = [root]
    while stack:
        state = stack.pop()
        out.explored += 1
        if state.done:
            if state.accepted:
                out.results.append((state.tokens, _result(lang, state.tree)))
            continue
        children = []
        for tok in state.choice().affordable:
            try:
                children.append(state.advance(tok))
            except SynthFailure:
                continue
        stack.extend(reversed(children))
    return out
