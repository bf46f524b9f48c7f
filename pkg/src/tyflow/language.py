"""Language definitions: sorts, predicates and typing rules written as CHCs.

A definition file is a sequence of statements, each introduced by a keyword::

    language stlc
    names x y z
    sort Prog = true | false | var(String) | app(Prog, Prog) | abs(String, Type, Prog)
    sort Type = bool | arrow(Type, Type)
    sort Context = empty | bind(Context, String, Type)
    pred typed(Context, Prog, Type)
    pred well_typed(Prog)
    root well_typed
    rule T-VAR: [lookup(G, x, t)] --- typed(G, var(x), t)
    rule T-APP: typed(G, p1, arrow(t1, t2)); typed(G, p2, t1) --- typed(G, app(p1, p2), t2)
    rule T-ROOT: typed(empty, p, t) --- well_typed(p)

Layout is free; ``#`` starts a comment.  Inside rules an identifier names a
constant when the expected sort declares one of that name and a schematic
variable otherwise.  Constraints go in square brackets and are conjoined.
"""

from __future__ import annotations

import functools
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace

from .constraints import BUILTINS, ConstraintRegistry
from .terms import (
    BUILTIN_SORTS,
    INDUCTIVE,
    INT,
    TEXT,
    App,
    Const,
    ConstructorSig,
    Signature,
    Sort,
    SortError,
    Subst,
    Term,
    Var,
    apply_all,
    check_sort,
    free_vars,
    fresh_var,
    is_atom,
)

DEFAULT_NAMES = ("x", "y", "z", "f", "g", "h", "u", "v", "w")
KEYWORDS = ("language", "names", "ints", "sort", "pred", "root", "rule")


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        if self.line:
            return f"{self.line}:{self.col}: {self.message}"
        return self.message


class LanguageError(Exception):
    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(map(str, self.diagnostics)))


class TermSyntaxError(Exception):
    def __init__(self, message: str, pos: int):
        super().__init__(f"at offset {pos}: {message}")
        self.pos = pos


@dataclass(frozen=True)
class PredicateSig:
    name: str
    params: tuple[str, ...]


@dataclass(frozen=True)
class Judgment:
    pred: str
    args: tuple[Term, ...]

    def __str__(self) -> str:
        return "(" + " ".join([self.pred, *map(str, self.args)]) + ")"

    @property
    def ground(self) -> bool:
        return all(a.ground for a in self.args)

    def subst(self, s: Mapping[Var, Term]) -> "Judgment":
        return Judgment(self.pred, apply_all(s, self.args))


@dataclass(frozen=True)
class Constraint:
    name: str
    args: tuple[Term, ...]

    def __str__(self) -> str:
        return "(" + " ".join([self.name, *map(str, self.args)]) + ")"

    def subst(self, s: Mapping[Var, Term]) -> "Constraint":
        return Constraint(self.name, apply_all(s, self.args))


@dataclass(frozen=True)
class TypingRule:
    id: str
    premises: tuple[Judgment, ...]
    constraints: tuple[Constraint, ...]
    conclusion: Judgment

    def variables(self) -> tuple[Var, ...]:
        terms = [a for j in self.premises for a in j.args]
        terms += [a for c in self.constraints for a in c.args]
        terms += self.conclusion.args
        return free_vars(*terms)

    def subst(self, s: Mapping[Var, Term]) -> "TypingRule":
        return TypingRule(
            self.id,
            tuple(j.subst(s) for j in self.premises),
            tuple(c.subst(s) for c in self.constraints),
            self.conclusion.subst(s),
        )


@dataclass(frozen=True)
class LanguageDef:
    name: str
    sig: Signature
    preds: Mapping[str, PredicateSig]
    rules: tuple[TypingRule, ...]
    root: str
    names: tuple[str, ...] = DEFAULT_NAMES
    ints: tuple[str, ...] = ()
    registry: ConstraintRegistry = field(default=BUILTINS, compare=False, repr=False)

    @functools.cached_property
    def rule_index(self) -> dict[str, int]:
        return {r.id: i for i, r in enumerate(self.rules)}

    def rule(self, rule_id: str) -> TypingRule:
        return self.rules[self.rule_index[rule_id]]

    def rules_concluding(self, pred: str) -> list[TypingRule]:
        return [r for r in self.rules if r.conclusion.pred == pred]

    @functools.cached_property
    def synthesis_rules(self):
        from .translation import to_synthesis_rule

        return {r.id: to_synthesis_rule(r) for r in self.rules}

    @functools.cached_property
    def token_tables(self):
        from .engine import TokenTables

        return TokenTables(self)

    def with_names(self, atoms: Iterable[str]) -> "LanguageDef":
        """A copy whose name pool also contains ``atoms`` (appended in order)."""
        extra = [a for a in dict.fromkeys(atoms) if a not in self.names]
        if not extra:
            return self
        return replace(self, names=self.names + tuple(extra))

    def root_goal(self) -> Judgment:
        psig = self.preds[self.root]
        return Judgment(self.root, tuple(fresh_var(s, s[0].lower()) for s in psig.params))

    def evaluate(self, c: Constraint) -> bool:
        return self.registry.evaluate(c.name, c.args)


# -- tokenizer ----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<sep>-{3,})
  | (?P<str>"[^"\n]*")
  | (?P<int>-?\d+)
  | (?P<id>[A-Za-z_](?:[\w']|-(?=[\w']))*)
  | (?P<punct>[()\[\],;|=:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, diags: list[Diagnostic]) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            diags.append(Diagnostic(line, pos - line_start + 1, f"unexpected character {text[pos]!r}"))
            pos += 1
            continue
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        if "\n" in chunk:
            line += chunk.count("\n")
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    return toks


class _Stop(Exception):
    pass


class _Parser:
    def __init__(self, toks: list[_Tok], diags: list[Diagnostic]):
        self.toks = toks
        self.i = 0
        self.diags = diags

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def at_keyword(self) -> bool:
        t = self.peek()
        return t is None or (t.kind == "id" and t.text in KEYWORDS)

    def error(self, tok: _Tok | None, message: str):
        if tok is None:
            last = self.toks[-1] if self.toks else None
            line, col = (last.line, last.col) if last else (1, 1)
            self.diags.append(Diagnostic(line, col, f"{message} (at end of file)"))
        else:
            self.diags.append(Diagnostic(tok.line, tok.col, message))
        raise _Stop

    def take(self, kind: str | None = None, text: str | None = None) -> _Tok:
        t = self.peek()
        if t is None or (kind and t.kind != kind) or (text and t.text != text):
            want = text or kind or "token"
            got = "end of file" if t is None else repr(t.text)
            self.error(t, f"expected {want}, got {got}")
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        t = self.peek()
        if t is not None and t.text == text and t.kind in ("punct", "sep"):
            self.i += 1
            return True
        return False

    def skip_statement(self):
        self.i += 1
        while not self.at_keyword():
            self.i += 1

    # raw terms: ("id"|"str"|"int", text, tok) or ("app", name, args, tok)
    def raw_term(self):
        t = self.peek()
        if t is None:
            self.error(t, "expected a term")
        if t.kind == "str":
            self.i += 1
            return ("str", t.text[1:-1], t)
        if t.kind == "int":
            self.i += 1
            return ("int", t.text, t)
        name = self.take("id")
        if self.accept("("):
            args = []
            if not self.accept(")"):
                args.append(self.raw_term())
                while self.accept(","):
                    args.append(self.raw_term())
                self.take("punct", ")")
            return ("app", name.text, args, name)
        return ("id", name.text, name)


@dataclass
class _RawRule:
    id: str
    tok: _Tok
    premises: list
    constraints: list
    conclusion: object


def parse_language(text: str, registry: ConstraintRegistry = BUILTINS) -> LanguageDef:
    """Parse and validate a definition file; raise :class:`LanguageError`."""
    diags: list[Diagnostic] = []
    p = _Parser(_tokenize(text, diags), diags)
    name = "anonymous"
    names: list[str] | None = None
    ints: list[str] = []
    sort_decls: list[tuple[_Tok, list[tuple[_Tok, list[_Tok]]]]] = []
    pred_decls: list[tuple[_Tok, list[_Tok]]] = []
    root_tok: _Tok | None = None
    raw_rules: list[_RawRule] = []

    while p.peek() is not None:
        start = p.i
        try:
            kw = p.take("id")
            if kw.text not in KEYWORDS:
                p.error(kw, f"expected a statement keyword, got {kw.text!r}")
            if kw.text == "language":
                name = p.take("id").text
            elif kw.text == "names":
                names = names or []
                while not p.at_keyword():
                    names.append(p.take("id").text)
            elif kw.text == "ints":
                while not p.at_keyword():
                    ints.append(p.take("int").text)
            elif kw.text == "sort":
                sname = p.take("id")
                p.take("punct", "=")
                alts = [_alternative(p)]
                while p.accept("|"):
                    alts.append(_alternative(p))
                sort_decls.append((sname, alts))
            elif kw.text == "pred":
                pname = p.take("id")
                params: list[_Tok] = []
                if p.accept("("):
                    if not p.accept(")"):
                        params.append(p.take("id"))
                        while p.accept(","):
                            params.append(p.take("id"))
                        p.take("punct", ")")
                pred_decls.append((pname, params))
            elif kw.text == "root":
                root_tok = p.take("id")
            elif kw.text == "rule":
                raw_rules.append(_rule(p))
            if not p.at_keyword():
                p.error(p.peek(), f"unexpected {p.peek().text!r} after {kw.text} statement")
        except _Stop:
            p.i = start
            p.skip_statement()

    sig, sig_diags = _build_signature(sort_decls)
    diags += sig_diags
    preds: dict[str, PredicateSig] = {}
    for pname, params in pred_decls:
        if pname.text in preds:
            diags.append(Diagnostic(pname.line, pname.col, f"duplicate predicate {pname.text}"))
        for s in params:
            if s.text not in sig.sorts:
                diags.append(Diagnostic(s.line, s.col, f"unknown sort {s.text} in predicate {pname.text}"))
        preds[pname.text] = PredicateSig(pname.text, tuple(s.text for s in params))

    rules = []
    for raw in raw_rules:
        rule = _resolve_rule(raw, sig, preds, diags)
        if rule is not None:
            rules.append(rule)

    if root_tok is None:
        diags.append(Diagnostic(0, 0, "no root predicate"))
        root = ""
    else:
        root = root_tok.text
    lang = LanguageDef(
        name=name,
        sig=sig,
        preds=preds,
        rules=tuple(rules),
        root=root,
        names=DEFAULT_NAMES if names is None else tuple(names),
        ints=tuple(ints),
        registry=registry,
    )
    if not diags:
        diags += validate(lang)
    if diags:
        raise LanguageError(diags)
    return lang


def _alternative(p: _Parser) -> tuple[_Tok, list[_Tok]]:
    con = p.take("id")
    params: list[_Tok] = []
    if p.accept("("):
        params.append(p.take("id"))
        while p.accept(","):
            params.append(p.take("id"))
        p.take("punct", ")")
    return con, params


def _rule(p: _Parser) -> _RawRule:
    rid = p.take("id")
    p.take("punct", ":")
    premises, constraints = [], []
    while not p.accept("---"):
        if p.accept("["):
            if not p.accept("]"):
                constraints.append(p.raw_term())
                while p.accept(",") or p.accept(";"):
                    constraints.append(p.raw_term())
                p.take("punct", "]")
        else:
            premises.append(p.raw_term())
        p.accept(";")
    conclusion = p.raw_term()
    return _RawRule(rid.text, rid, premises, constraints, conclusion)


def _build_signature(sort_decls) -> tuple[Signature, list[Diagnostic]]:
    diags: list[Diagnostic] = []
    sorts = {n: Sort(n, k) for n, k in BUILTIN_SORTS.items()}
    declared = [s for s, _ in sort_decls]
    for s in declared:
        if s.text in sorts:
            diags.append(Diagnostic(s.line, s.col, f"duplicate sort {s.text}"))
        sorts[s.text] = Sort(s.text, INDUCTIVE)
    alternatives: dict[str, tuple[str, ...]] = {n: () for n in BUILTIN_SORTS}
    constants: dict[str, str] = {}
    constructors: dict[str, ConstructorSig] = {}
    for sname, alts in sort_decls:
        names = []
        for con, params in alts:
            if con.text in constants or con.text in constructors:
                diags.append(Diagnostic(con.line, con.col, f"duplicate constructor or constant {con.text}"))
                continue
            for prm in params:
                if prm.text not in sorts:
                    diags.append(Diagnostic(prm.line, prm.col, f"unknown sort {prm.text}"))
            if params:
                constructors[con.text] = ConstructorSig(con.text, sname.text, tuple(x.text for x in params))
            else:
                constants[con.text] = sname.text
            names.append(con.text)
        alternatives[sname.text] = tuple(names)
    return Signature(sorts, alternatives, constants, constructors), diags


class _RuleScope:
    def __init__(self, sig: Signature, diags: list[Diagnostic], rule_id: str):
        self.sig = sig
        self.diags = diags
        self.rule_id = rule_id
        self.vars: dict[str, Var] = {}
        self.ok = True

    def report(self, tok: _Tok, message: str):
        self.diags.append(Diagnostic(tok.line, tok.col, f"rule {self.rule_id}: {message}"))
        self.ok = False

    def var(self, name: str, sort: str, tok: _Tok) -> Var:
        v = self.vars.get(name)
        if v is None:
            v = self.vars[name] = Var(len(self.vars) + 1, sort, name)
        elif v.sort == "?" and sort != "?":
            v = self.vars[name] = Var(v.id, sort, name)
        elif sort not in ("?", v.sort):
            self.report(tok, f"variable {name} used at sorts {v.sort} and {sort}")
        return v

    def term(self, raw, expected: str) -> Term:
        kind = raw[0]
        tok = raw[-1]
        sk = self.sig.sorts[expected].kind if expected in self.sig.sorts else None
        if kind == "str":
            if sk != TEXT:
                self.report(tok, f"string literal where {expected} expected")
            return Const(raw[1], "String")
        if kind == "int":
            if sk != INT:
                self.report(tok, f"integer literal where {expected} expected")
            return Const(raw[1], "Int")
        if kind == "app":
            _, con, args, _ = raw
            csig = self.sig.constructors.get(con)
            if csig is None:
                self.report(tok, f"undeclared constructor {con}")
                return self.var(con, expected, tok)
            if csig.result != expected:
                self.report(tok, f"constructor {con} builds {csig.result}, expected {expected}")
            if len(args) != len(csig.params):
                self.report(tok, f"{con} takes {len(csig.params)} arguments, got {len(args)}")
                return self.var(con, expected, tok)
            return App(con, tuple(self.term(a, s) for a, s in zip(args, csig.params)), csig.result)
        name = raw[1]
        if sk == INDUCTIVE:
            if self.sig.constants.get(name) == expected:
                return Const(name, expected)
            if name in self.sig.constructors:
                self.report(tok, f"constructor {name} used without arguments")
            elif name in self.sig.constants:
                self.report(tok, f"constant {name} has sort {self.sig.constants[name]}, expected {expected}")
        return self.var(name, expected, tok)

    def judgment(self, raw, preds: Mapping[str, PredicateSig]) -> Judgment | None:
        tok = raw[-1]
        if raw[0] != "app":
            self.report(tok, f"expected a judgment, got {raw[1]}")
            return None
        _, pname, args, _ = raw
        psig = preds.get(pname)
        if psig is None:
            self.report(tok, f"undeclared predicate {pname}")
            return None
        if len(args) != len(psig.params):
            self.report(tok, f"{pname} takes {len(psig.params)} arguments, got {len(args)}")
            return None
        return Judgment(pname, tuple(self.term(a, s) for a, s in zip(args, psig.params)))

    def constraint_arg(self, raw) -> Term:
        kind = raw[0]
        if kind == "str":
            return Const(raw[1], "String")
        if kind == "int":
            return Const(raw[1], "Int")
        if kind == "app":
            csig = self.sig.constructors.get(raw[1])
            return self.term(raw, csig.result if csig else "?")
        name = raw[1]
        if name in self.vars:
            return self.vars[name]
        if name in self.sig.constants:
            return Const(name, self.sig.constants[name])
        return self.var(name, "?", raw[-1])


def _resolve_rule(raw: _RawRule, sig: Signature, preds, diags: list[Diagnostic]) -> TypingRule | None:
    scope = _RuleScope(sig, diags, raw.id)
    premises = [scope.judgment(r, preds) for r in raw.premises]
    conclusion = scope.judgment(raw.conclusion, preds)
    constraints = []
    for r in raw.constraints:
        if r[0] != "app" and r[0] != "id":
            scope.report(r[-1], "expected a constraint")
            continue
        cname = r[1]
        args = r[2] if r[0] == "app" else []
        constraints.append(Constraint(cname, tuple(scope.constraint_arg(a) for a in args)))
    if not scope.ok or conclusion is None or any(j is None for j in premises):
        return None
    rule = TypingRule(raw.id, tuple(premises), tuple(constraints), conclusion)
    # Template variables get negative ids local to the rule; they are always
    # renamed apart before meeting any other term.
    table = {v: Var(-(i + 1), v.sort, v.name) for i, v in enumerate(rule.variables())}
    return rule.subst(Subst(table, check=False))


# -- validation ----------------------------------------------------------------


def validate(lang: LanguageDef) -> list[Diagnostic]:
    """All well-formedness violations of ``lang``; an empty list means ok."""
    diags: list[Diagnostic] = []

    def err(message: str):
        diags.append(Diagnostic(0, 0, message))

    sig = lang.sig
    for csig in sig.constructors.values():
        if csig.result not in sig.sorts:
            err(f"constructor {csig.name} builds undeclared sort {csig.result}")
        for s in csig.params:
            if s not in sig.sorts:
                err(f"constructor {csig.name} takes undeclared sort {s}")
    for cname, s in sig.constants.items():
        if cname in sig.constructors:
            err(f"{cname} is both a constant and a constructor")
        if s not in sig.sorts:
            err(f"constant {cname} has undeclared sort {s}")
    for psig in lang.preds.values():
        for s in psig.params:
            if s not in sig.sorts:
                err(f"predicate {psig.name} takes undeclared sort {s}")
    for atom in lang.names:
        if not is_atom(atom):
            err(f"name pool entry {atom!r} is not an identifier")

    seen: set[str] = set()
    for rule in lang.rules:
        if rule.id in seen:
            err(f"duplicate rule id {rule.id}")
        seen.add(rule.id)
        var_sorts: dict[int, str] = {}
        judgment_vars: set[Var] = set()
        for j in (*rule.premises, rule.conclusion):
            psig = lang.preds.get(j.pred)
            if psig is None:
                err(f"rule {rule.id}: undeclared predicate {j.pred}")
                continue
            if len(j.args) != len(psig.params):
                err(f"rule {rule.id}: {j.pred} takes {len(psig.params)} arguments, got {len(j.args)}")
                continue
            for a, s in zip(j.args, psig.params):
                try:
                    check_sort(a, s, sig)
                except SortError as e:
                    err(f"rule {rule.id}: {e}")
                for v in free_vars(a):
                    if var_sorts.setdefault(v.id, v.sort) != v.sort:
                        err(f"rule {rule.id}: variable {v.name} used at sorts {var_sorts[v.id]} and {v.sort}")
                    judgment_vars.add(v)
        for c in rule.constraints:
            if c.name not in lang.registry:
                err(f"rule {rule.id}: unknown constraint {c.name}")
            elif len(c.args) != lang.registry.get(c.name).arity:
                err(f"rule {rule.id}: constraint {c.name} takes {lang.registry.get(c.name).arity} arguments")
            stray = [v for v in free_vars(*c.args) if v not in judgment_vars]
            if stray:
                names = ", ".join(v.name for v in stray)
                err(f"rule {rule.id}: constraint {c.name} uses {names}, which occur in no premise or conclusion")
    if not lang.root:
        err("no root predicate")
    elif lang.root not in lang.preds:
        err(f"root predicate {lang.root} is not declared")
    elif not lang.rules_concluding(lang.root):
        err(f"no rule concludes the root predicate {lang.root}")
    return diags


# -- printing --------------------------------------------------------------------


def _rule_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return f'"{t.name}"' if t.sort == "String" else t.name
    return f"{t.con}({', '.join(map(_rule_term, t.args))})"


def _rule_judgment(j: Judgment | Constraint) -> str:
    head = j.pred if isinstance(j, Judgment) else j.name
    return f"{head}({', '.join(map(_rule_term, j.args))})"


def format_rule(rule: TypingRule) -> str:
    body = [_rule_judgment(j) for j in rule.premises]
    if rule.constraints:
        body.append("[" + ", ".join(_rule_judgment(c) for c in rule.constraints) + "]")
    lhs = "; ".join(body)
    return f"rule {rule.id}: {lhs}{' ' if lhs else ''}--- {_rule_judgment(rule.conclusion)}"


def format_language(lang: LanguageDef) -> str:
    sig = lang.sig
    lines = [f"language {lang.name}", "names " + " ".join(lang.names)]
    if lang.ints:
        lines.append("ints " + " ".join(lang.ints))
    for sname, alts in sig.alternatives.items():
        if sname in BUILTIN_SORTS:
            continue
        parts = []
        for a in alts:
            if a in sig.constructors:
                parts.append(f"{a}({', '.join(sig.constructors[a].params)})")
            else:
                parts.append(a)
        lines.append(f"sort {sname} = " + " | ".join(parts))
    for psig in lang.preds.values():
        lines.append(f"pred {psig.name}({', '.join(psig.params)})")
    lines.append(f"root {lang.root}")
    lines += [format_rule(r) for r in lang.rules]
    return "\n".join(lines) + "\n"


# -- canonical term syntax ---------------------------------------------------------

_SEXP = re.compile(r"\s*(?:(?P<open>\()|(?P<close>\))|(?P<var>\?[A-Za-z_][\w'\-]*\.-?\d+)|(?P<atom>[^\s()]+))")


def _sexp_tokens(text: str) -> list[tuple[str, str, int]]:
    out, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _SEXP.match(text, pos)
        if m is None:
            raise TermSyntaxError(f"unexpected character {text[pos]!r}", pos)
        out.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    return out


class _SexpReader:
    def __init__(self, text: str, lang: LanguageDef):
        self.toks = _sexp_tokens(text)
        self.i = 0
        self.lang = lang

    def _next(self):
        if self.i >= len(self.toks):
            raise TermSyntaxError("unexpected end of input", self.toks[-1][2] if self.toks else 0)
        t = self.toks[self.i]
        self.i += 1
        return t

    def finish(self):
        if self.i < len(self.toks):
            raise TermSyntaxError(f"trailing input {self.toks[self.i][1]!r}", self.toks[self.i][2])

    def term(self, expected: str) -> Term:
        sig = self.lang.sig
        if expected not in sig.sorts:
            raise TermSyntaxError(f"unknown sort {expected}", 0)
        kind, text, pos = self._next()
        if kind == "var":
            name, _, vid = text[1:].rpartition(".")
            return Var(int(vid), expected, name)
        if kind == "close":
            raise TermSyntaxError("unexpected ')'", pos)
        skind = sig.sorts[expected].kind
        if kind == "atom":
            if skind == TEXT:
                if not is_atom(text):
                    raise TermSyntaxError(f"{text!r} is not a String atom", pos)
                return Const(text, expected)
            if skind == INT:
                if not text.lstrip("-").isdigit():
                    raise TermSyntaxError(f"{text!r} is not an Int literal", pos)
                return Const(text, expected)
            if sig.constants.get(text) == expected:
                return Const(text, expected)
            if text in sig.constructors:
                raise TermSyntaxError(f"constructor {text} needs parentheses", pos)
            raise TermSyntaxError(f"{text} is not a constant of sort {expected}", pos)
        ckind, con, cpos = self._next()
        if ckind != "atom":
            raise TermSyntaxError("expected a constructor name after '('", cpos)
        csig = sig.constructors.get(con)
        if csig is None or csig.result != expected:
            raise TermSyntaxError(f"{con} is not a constructor of sort {expected}", cpos)
        args = tuple(self.term(s) for s in csig.params)
        ckind, ctext, cpos = self._next()
        if ckind != "close":
            raise TermSyntaxError(f"{con} takes {len(csig.params)} arguments; expected ')' got {ctext!r}", cpos)
        return App(con, args, expected)

    def judgment(self) -> Judgment:
        kind, _, pos = self._next()
        if kind != "open":
            raise TermSyntaxError("a judgment starts with '('", pos)
        kind, pred, pos = self._next()
        psig = self.lang.preds.get(pred)
        if kind != "atom" or psig is None:
            raise TermSyntaxError(f"unknown predicate {pred}", pos)
        args = tuple(self.term(s) for s in psig.params)
        kind, text, pos = self._next()
        if kind != "close":
            raise TermSyntaxError(f"expected ')' after {pred} arguments, got {text!r}", pos)
        return Judgment(pred, args)


def parse_term(text: str, expected: str, lang: LanguageDef) -> Term:
    """Read canonical syntax at sort ``expected``; raise :class:`TermSyntaxError`."""
    r = _SexpReader(text, lang)
    t = r.term(expected)
    r.finish()
    return t


def parse_judgment(text: str, lang: LanguageDef) -> Judgment:
    r = _SexpReader(text, lang)
    j = r.judgment()
    r.finish()
    return j


def parse_program(text: str, lang: LanguageDef) -> Term:
    """Parse a program at the sort of the root predicate's first parameter."""
    return parse_term(text, lang.preds[lang.root].params[0], lang)


def text_atoms(t: Term) -> list[str]:
    """String atoms occurring in ``t``, in pre-order."""
    if isinstance(t, Const):
        return [t.name] if t.sort == "String" else []
    if isinstance(t, App):
        return [a for arg in t.args for a in text_atoms(arg)]
    return []
