"""Type-guided program synthesis from typing rules written as constrained Horn clauses."""

from .dataset import replay, tree_to_decisions
from .engine import Limits, SynthState, Token, enumerate_all, extract_program, gen_synth_tree, synth_to_type_tree
from .language import LanguageDef, parse_language, parse_program, parse_term
from .languages import builtin_corpus, builtin_languages, load_language
from .policy import NGramModel, UniformPolicy, beam_search
from .terms import App, Const, Subst, Var, apply, compose
from .translation import to_synthesis_rule, to_typing_rule
from .typecheck import derive, verify_tree
from .unification import UnificationError, unify

__version__ = "0.1.0"

__all__ = [
    "App",
    "apply",
    "beam_search",
    "builtin_corpus",
    "builtin_languages",
    "compose",
    "Const",
    "derive",
    "enumerate_all",
    "extract_program",
    "gen_synth_tree",
    "LanguageDef",
    "Limits",
    "load_language",
    "NGramModel",
    "parse_language",
    "parse_program",
    "parse_term",
    "replay",
    "Subst",
    "synth_to_type_tree",
    "SynthState",
    "to_synthesis_rule",
    "to_typing_rule",
    "Token",
    "tree_to_decisions",
    "UnificationError",
    "UniformPolicy",
    "unify",
    "Var",
    "verify_tree",
]
