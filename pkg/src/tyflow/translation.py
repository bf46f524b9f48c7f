"""Typing rules to synthesis rules and back.

A synthesis rule reads its typing rule "backwards": given a goal whose
arguments may be unknown, it unifies the goal with the rule's conclusion,
asks an oracle for the conclusion variables that no premise can determine,
solves the premises as subgoals and finally checks the constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

from .language import Constraint, Judgment, LanguageDef, TypingRule, _rule_judgment, _rule_term
from .terms import Term, Var, free_vars

# Conclusion variables live in their own id range so they never collide with
# the (negative, small) template ids of the rule body.
_CONCLUSION_BASE = 10000


@dataclass(frozen=True)
class SynthesisRule:
    id: str
    pred: str
    conclusion_vars: tuple[Var, ...]
    pattern: tuple[Term, ...]
    free: tuple[Var, ...]
    subgoals: tuple[Judgment, ...]
    constraints: tuple[Constraint, ...]

    @property
    def display_id(self) -> str:
        return "S-" + self.id[2:] if self.id.startswith("T-") else "S-" + self.id


def conclusion_vars(sorts: tuple[str, ...]) -> tuple[Var, ...]:
    return tuple(Var(-(_CONCLUSION_BASE + i), s, f"s{i}") for i, s in enumerate(sorts))


def to_synthesis_rule(rule: TypingRule) -> SynthesisRule:
    pattern = rule.conclusion.args
    premise_vars = set(free_vars(*(a for j in rule.premises for a in j.args)))
    free = tuple(v for v in free_vars(*pattern) if v not in premise_vars)
    assert not premise_vars & set(free)
    return SynthesisRule(
        id=rule.id,
        pred=rule.conclusion.pred,
        conclusion_vars=conclusion_vars(tuple(t.sort for t in pattern)),
        pattern=pattern,
        free=free,
        subgoals=rule.premises,
        constraints=rule.constraints,
    )


def to_typing_rule(srule: SynthesisRule) -> TypingRule:
    return TypingRule(srule.id, srule.subgoals, srule.constraints, Judgment(srule.pred, srule.pattern))


def format_synthesis_rule(srule: SynthesisRule) -> str:
    """Multi-line layout used by ``translate-rules``."""
    xs = ", ".join(v.name for v in srule.conclusion_vars)
    eqs = ", ".join(f"{v.name} = {_rule_term(t)}" for v, t in zip(srule.conclusion_vars, srule.pattern))
    lines = [
        f"{srule.display_id}: {srule.pred}({xs})",
        f"  unify    {eqs}",
        f"  acquire  [{', '.join(v.name for v in srule.free)}]",
    ]
    if srule.subgoals:
        for i, g in enumerate(srule.subgoals, 1):
            lines.append(f"  subgoal{i} {_rule_judgment(g)}")
    else:
        lines.append("  subgoals none")
    check = " and ".join(_rule_judgment(c) for c in srule.constraints) or "true"
    lines.append(f"  check    {check}")
    lines.append(f"  result   {{{xs}}}")
    return "\n".join(lines)


def format_synthesis_rules(lang: LanguageDef) -> str:
    return "\n\n".join(format_synthesis_rule(lang.synthesis_rules[r.id]) for r in lang.rules) + "\n"
