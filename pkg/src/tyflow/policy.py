"""Scoring policies and beam search over decision sequences.

A policy assigns a log-weight to every legal token of a choice.  It may look
at the prompt, the decision prefix and the current goal (carried by the
:class:`~tyflow.engine.Choice`).  Policies never see illegal tokens: the
engine decides legality, the policy only ranks.
"""

from __future__ import annotations

import math
import random
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from .engine import Choice, Limits, Oracle, SynthFailure, SynthState, Token
from .language import Judgment, LanguageDef
from .terms import Term

BEGIN = "<s>"


class Policy:
    def score(self, prompt: str, prefix: Sequence[Token], choice: Choice) -> dict[Token, float]:
        raise NotImplementedError


class UniformPolicy(Policy):
    def score(self, prompt, prefix, choice):
        w = -math.log(len(choice.tokens)) if choice.tokens else 0.0
        return dict.fromkeys(choice.tokens, w)


class NGramModel(Policy):
    """Token n-gram counts with add-one smoothing over each legal set.

    With ``conditioned`` set, the context also includes the goal predicate and
    the kind of choice (rule, or the sort of the term being built).
    """

    def __init__(self, n: int, counts: dict[tuple[str, ...], Counter] | None = None, conditioned: bool = False):
        if n < 1:
            raise ValueError("n-gram order must be at least 1")
        self.n = n
        self.conditioned = conditioned
        self.counts: dict[tuple[str, ...], Counter] = defaultdict(Counter)
        for ctx, c in (counts or {}).items():
            self.counts[ctx].update(c)

    def __eq__(self, other):
        return (
            isinstance(other, NGramModel)
            and (self.n, self.conditioned) == (other.n, other.conditioned)
            and {k: v for k, v in self.counts.items() if v} == {k: v for k, v in other.counts.items() if v}
        )

    @staticmethod
    def head(choice: Choice) -> str:
        return f"@{choice.goal.pred}/{choice.sort or 'rule'}"

    def context(self, prefix: Sequence[Token | str], choice: Choice | None = None) -> tuple[str, ...]:
        hist = [BEGIN] * (self.n - 1) + [str(t) for t in prefix]
        ctx = tuple(hist[len(hist) - (self.n - 1) :]) if self.n > 1 else ()
        if self.conditioned:
            ctx = (self.head(choice),) + ctx
        return ctx

    @classmethod
    def train(cls, records: Iterable, n: int, lang: LanguageDef | None = None, conditioned: bool = False) -> "NGramModel":
        """Count n-grams over ``records`` (anything with a ``tokens`` list).

        The conditioned variant replays every record through ``lang`` to
        recover the choice each token answered.
        """
        model = cls(n, conditioned=conditioned)
        if conditioned and lang is None:
            raise ValueError("a conditioned model needs the language to replay records")
        for rec in records:
            toks = [t if isinstance(t, Token) else Token.parse(t) for t in rec.tokens]
            choices = _replay_choices(lang, toks) if conditioned else [None] * len(toks)
            for i, (tok, ch) in enumerate(zip(toks, choices)):
                model.counts[model.context(toks[:i], ch)][str(tok)] += 1
        return model

    def score(self, prompt, prefix, choice):
        c = self.counts.get(self.context(prefix, choice), Counter())
        legal = [str(t) for t in choice.tokens]
        total = sum(c[t] for t in legal) + len(legal)
        return {tok: math.log((c[s] + 1) / total) for tok, s in zip(choice.tokens, legal)}

    def save(self, path: str | Path) -> None:
        lines = [f"# order {self.n}" + (" conditioned" if self.conditioned else "")]
        for ctx in sorted(self.counts):
            for tok, k in sorted(self.counts[ctx].items()):
                lines.append(" ".join([*ctx, tok, str(k)]))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NGramModel":
        text = Path(path).read_text(encoding="utf-8").splitlines()
        if not text or not text[0].startswith("# order "):
            raise ValueError(f"{path}: missing '# order N' header")
        header = text[0].split()
        model = cls(int(header[2]), conditioned="conditioned" in header[3:])
        width = model.n + (1 if model.conditioned else 0)
        for lineno, line in enumerate(text[1:], 2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != width + 1:
                raise ValueError(f"{path}:{lineno}: expected {width} tokens and a count")
            *gram, count = parts
            model.counts[tuple(gram[:-1])][gram[-1]] += int(count)
        return model


def _replay_choices(lang: LanguageDef, tokens: Sequence[Token]) -> list[Choice]:
    lang = lang.with_names(t.value for t in tokens if t.kind == "N")
    state = SynthState.start(lang)
    out = []
    for tok in tokens:
        out.append(state.choice())
        state = state.advance(tok)
    return out


class SampledPolicy(Policy):
    """Adds seeded Gumbel noise to another policy's scores."""

    def __init__(self, base: Policy, seed: int | None = None):
        self.base = base
        self.rng = random.Random(seed)

    def score(self, prompt, prefix, choice):
        return {t: w + _gumbel(self.rng) for t, w in self.base.score(prompt, prefix, choice).items()}


def _gumbel(rng: random.Random) -> float:
    return -math.log(-math.log(rng.random() or 1e-300))


class PolicyOracle(Oracle):
    """Greedy oracle: the best-scoring affordable token, ties to canonical order."""

    def __init__(self, policy: Policy):
        self.policy = policy

    def choose(self, prompt, prefix, choice):
        scores = self.policy.score(prompt, prefix, choice)
        options = choice.affordable or choice.tokens
        return max(options, key=lambda t: scores[t])


# -- beam search ----------------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    program: Term
    weight: float
    tokens: tuple[Token, ...]


@dataclass
class _Branch:
    state: SynthState
    weight: float
    key: float  # ranking weight, equals ``weight`` unless sampling
    order: tuple[int, ...]


def beam_search(
    lang: LanguageDef,
    policy: Policy,
    k: int,
    max_tokens: int = 256,
    prompt: str = "",
    goal: Judgment | None = None,
    seed: int | None = None,
    refill: bool = True,
    prune_types: bool = True,
) -> list[Candidate]:
    """Token-synchronous beam search; returns completed programs, best first.

    Each step expands every live branch over its affordable tokens and keeps
    the ``k`` best expansions.  Expansions the engine rejects are dropped; with
    ``refill`` the next best take their places in the same step.  Finished
    branches take a slot when selected and then move to the output.  Ties
    are broken by canonical token order.  ``seed`` switches on Gumbel noise
    in the ranking (the reported weights stay noise-free).
    """
    if k < 1:
        raise ValueError("beam width must be at least 1")
    rng = random.Random(seed) if seed is not None else None
    limits = Limits(max_tokens=max_tokens, prune_types=prune_types)
    try:
        start = SynthState.start(lang, goal, limits)
    except SynthFailure:
        return []
    order = lang.token_tables.order
    beam = [_Branch(start, 0.0, 0.0, ())]
    finished: list[_Branch] = []
    while beam:
        expansions = []
        for b in beam:
            choice = b.state.choice()
            scores = policy.score(prompt, b.state.tokens, choice)
            for tok in choice.affordable:
                w = scores[tok]
                noise = _gumbel(rng) if rng else 0.0
                expansions.append((-(b.key + w + noise), b.order + (order[tok],), b, tok, w, noise))
        expansions.sort(key=lambda e: (e[0], e[1]))
        beam = []
        slots = k
        for negkey, ordr, parent, tok, w, noise in expansions:
            if slots == 0:
                break
            try:
                state = parent.state.advance(tok)
            except SynthFailure:
                if not refill:
                    slots -= 1
                continue
            slots -= 1
            branch = _Branch(state, parent.weight + w, -negkey, ordr)
            if state.done:
                if state.accepted:
                    finished.append(branch)
            else:
                beam.append(branch)
    finished.sort(key=lambda b: (-b.weight, b.order))
    return [Candidate(b.state.program(), b.weight, b.state.tokens) for b in finished]


def sequence_weight(lang: LanguageDef, policy: Policy, tokens: Sequence[Token], prompt: str = "") -> float:
    """Total log-weight ``policy`` gives to an accepted decision sequence."""
    state = SynthState.start(lang.with_names(t.value for t in tokens if t.kind == "N"))
    total = 0.0
    for tok in tokens:
        total += policy.score(prompt, state.tokens, state.choice())[tok]
        state = state.advance(tok)
    return total
