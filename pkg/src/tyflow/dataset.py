"""Derivation trees to decision sequences, replay, and JSON Lines task records."""

from __future__ import annotations

import json
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

from .engine import (
    CON,
    CONST,
    NAME,
    RULE,
    IllegalToken,
    Limits,
    SynthFailure,
    SynthState,
    Token,
    extract_program,
    format_tokens,
)
from .language import Judgment, LanguageDef, parse_program, text_atoms
from .terms import App, Const, Term, Var, apply, free_vars
from .typecheck import TypeDerivationTree, TreeError, derive, verify_tree
from .unification import match_all


@dataclass(frozen=True)
class StepRecord:
    i: int
    goal: str
    prefix: str
    next: str

    def to_json(self) -> dict:
        return {"i": self.i, "goal": self.goal, "prefix": self.prefix, "next": self.next}


@dataclass(frozen=True)
class TaskRecord:
    id: str
    prompt: str
    program: str
    tokens: tuple[str, ...]
    steps: tuple[StepRecord, ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "prompt": self.prompt,
            "program": self.program,
            "tokens": list(self.tokens),
            "steps": [s.to_json() for s in self.steps],
        }


class ReplayError(Exception):
    def __init__(self, index: int, site: str, detail: str):
        super().__init__(f"token {index}: {site}: {detail}")
        self.index = index
        self.site = site
        self.detail = detail


class DatasetError(Exception):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def term_tokens(t: Term) -> list[Token]:
    """Pre-order acquisition tokens that build the ground term ``t``."""
    if isinstance(t, App):
        out = [Token(CON, t.con)]
        for a in t.args:
            out += term_tokens(a)
        return out
    if isinstance(t, Const):
        return [Token(NAME if t.sort == "String" else CONST, t.name)]
    raise ValueError(f"cannot serialise non-ground term {t}")


class _GoalNamer:
    """Renumbers variables from 0 in first-occurrence order across one record."""

    def __init__(self):
        self.ids: dict[Var, Var] = {}

    def __call__(self, goal: Judgment) -> str:
        for v in free_vars(*goal.args):
            if v not in self.ids:
                self.ids[v] = Var(len(self.ids), v.sort, v.name)
        return str(goal.subst(self.ids))


def _follow(lang: LanguageDef, tree: TypeDerivationTree, limits: Limits) -> tuple[SynthState, list[tuple[Judgment, Token]]]:
    nodes = list(tree.nodes())
    state = SynthState.start(lang, None, limits)
    trace: list[tuple[Judgment, Token]] = []
    k = -1
    queue: list[Token] = []
    while not state.done:
        choice = state.choice()
        if choice.kind == "rule":
            k += 1
            tok = Token(RULE, nodes[k].rule_id)
        else:
            if not queue:
                queue = _acquisition_tokens(state, nodes[k])
            tok = queue.pop(0)
        trace.append((choice.goal, tok))
        state = state.advance(tok)
    return state, trace


def _acquisition_tokens(state: SynthState, node: TypeDerivationTree) -> list[Token]:
    # The node's judgment fixes every goal variable; its instantiation fixes
    # every renamed rule variable.  Together they ground all pending vars.
    frame = state.current_frame()
    known = match_all(frame.goal.subst(state.subst).args, node.judgment.args)
    for v, t in frame.renaming.items():
        known.setdefault(t, node.instantiation[v])
    out: list[Token] = []
    for v in frame.pending:
        out += term_tokens(apply(known, v))
    return out


def tree_to_decisions(lang: LanguageDef, tree: TypeDerivationTree, limits: Limits | None = None) -> tuple[tuple[Token, ...], tuple[StepRecord, ...]]:
    """The decision sequence that rebuilds ``tree``, with one step record per token."""
    try:
        verify_tree(lang, tree)
    except TreeError as e:
        raise ValueError(f"refusing to serialise an invalid tree: {e}") from None
    if tree.judgment.pred != lang.root:
        raise ValueError(f"tree must be rooted at {lang.root}, got {tree.judgment.pred}")
    lang = lang.with_names(text_atoms(tree.judgment.args[0]))
    state, trace = _follow(lang, tree, limits or Limits())
    tokens = tuple(t for _, t in trace)
    name = _GoalNamer()
    steps = tuple(StepRecord(i, name(g), format_tokens(tokens[:i]), str(t)) for i, (g, t) in enumerate(trace))
    program = extract_program(lang, state.tree)
    if program != tree.judgment.args[0]:
        raise AssertionError(f"decision sequence rebuilds {program}, not {tree.judgment.args[0]}")
    return tokens, steps


def replay(lang: LanguageDef, tokens: Sequence[Token | str], limits: Limits | None = None) -> Term:
    """Rebuild the program a decision sequence encodes; raise :class:`ReplayError`."""
    toks: list[Token] = []
    for i, t in enumerate(tokens):
        try:
            toks.append(t if isinstance(t, Token) else Token.parse(t))
        except ValueError as e:
            raise ReplayError(i, "syntax", str(e)) from None
    lang = lang.with_names(t.value for t in toks if t.kind == NAME)
    try:
        state = SynthState.start(lang, None, limits)
        for i, tok in enumerate(toks):
            if state.done:
                raise ReplayError(i, "trailing", f"{tok} after the derivation finished")
            state = state.advance(tok)
    except IllegalToken as e:
        raise ReplayError(e.index, "grammar", str(e)) from None
    except SynthFailure as e:
        raise ReplayError(e.index, e.site, e.detail) from None
    if not state.done:
        raise ReplayError(len(toks), "truncated", "decision sequence ended before the derivation finished")
    return extract_program(lang, state.tree)


def replay_goals(lang: LanguageDef, tokens: Sequence[Token]) -> list[str]:
    """Goal text seen before each token, numbered as in step records."""
    lang = lang.with_names(t.value for t in tokens if t.kind == NAME)
    state = SynthState.start(lang)
    name = _GoalNamer()
    goals = []
    for tok in tokens:
        goals.append(name(state.choice().goal))
        state = state.advance(tok)
    return goals


def extract_record(lang: LanguageDef, task_id: str, prompt: str, program_text: str) -> TaskRecord:
    program = parse_program(program_text, lang)
    lang = lang.with_names(text_atoms(program))
    tree = derive(lang, Judgment(lang.root, (program,)))
    tokens, steps = tree_to_decisions(lang, tree)
    return TaskRecord(task_id, prompt, str(program), tuple(map(str, tokens)), steps)


def validate_record(lang: LanguageDef, rec: TaskRecord) -> list[str]:
    """Problems with ``rec``: replay mismatch or inconsistent steps.  Empty means ok."""
    problems = []
    try:
        program = replay(lang, rec.tokens)
    except ReplayError as e:
        return [f"{rec.id}: tokens do not replay: {e}"]
    if str(program) != rec.program:
        problems.append(f"{rec.id}: tokens rebuild {program}, record says {rec.program}")
    if len(rec.steps) != len(rec.tokens):
        problems.append(f"{rec.id}: {len(rec.steps)} steps for {len(rec.tokens)} tokens")
        return problems
    toks = [Token.parse(t) for t in rec.tokens]
    goals = replay_goals(lang, toks)
    for i, (step, goal) in enumerate(zip(rec.steps, goals)):
        if step.i != i or step.next != rec.tokens[i] or step.prefix != " ".join(rec.tokens[:i]) or step.goal != goal:
            problems.append(f"{rec.id}: step {i} is inconsistent with the token sequence")
            break
    return problems


# -- JSON Lines ---------------------------------------------------------------


def _record_from_json(obj, line: int) -> TaskRecord:
    if not isinstance(obj, dict):
        raise DatasetError(line, "expected a JSON object")
    expected = {"id", "prompt", "program", "tokens", "steps"}
    if set(obj) != expected:
        raise DatasetError(line, f"fields must be exactly {sorted(expected)}, got {sorted(obj)}")
    try:
        steps = tuple(StepRecord(int(s["i"]), str(s["goal"]), str(s["prefix"]), str(s["next"])) for s in obj["steps"])
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(line, f"malformed step: {e}") from None
    if not isinstance(obj["tokens"], list) or not all(isinstance(t, str) for t in obj["tokens"]):
        raise DatasetError(line, "tokens must be a list of strings")
    return TaskRecord(str(obj["id"]), str(obj["prompt"]), str(obj["program"]), tuple(obj["tokens"]), steps)


def dumps_record(rec: TaskRecord) -> str:
    return json.dumps(rec.to_json(), ensure_ascii=False)


def write_jsonl(records: Iterable[TaskRecord], out: str | Path | IO[str]) -> None:
    if isinstance(out, (str, Path)):
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            write_jsonl(records, fh)
        return
    for rec in records:
        out.write(dumps_record(rec) + "\n")


def read_jsonl(src: str | Path | IO[str]) -> list[TaskRecord]:
    if isinstance(src, (str, Path)):
        with open(src, encoding="utf-8") as fh:
            return read_jsonl(fh)
    out = []
    for n, line in enumerate(src, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DatasetError(n, f"invalid JSON: {e.msg} (column {e.colno})") from None
        out.append(_record_from_json(obj, n))
    return out


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    prompt: str
    program: str


def read_corpus(src: str | Path | IO[str]) -> list[CorpusEntry]:
    """Corpus files are JSON Lines with ``id``, ``prompt`` and ``program``."""
    if isinstance(src, (str, Path)):
        with open(src, encoding="utf-8") as fh:
            return read_corpus(fh)
    out = []
    for n, line in enumerate(src, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            out.append(CorpusEntry(str(obj["id"]), str(obj["prompt"]), str(obj["program"])))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise DatasetError(n, f"bad corpus entry: {e}") from None
    return out


def shuffled(records: Sequence, seed: int) -> list:
    out = list(records)
    random.Random(seed).shuffle(out)
    return out

