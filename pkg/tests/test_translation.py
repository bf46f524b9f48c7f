from pathlib import Path

import pytest

from tyflow.language import parse_language
from tyflow.languages import builtin_path
from tyflow.terms import free_vars
from tyflow.translation import format_synthesis_rules, to_synthesis_rule, to_typing_rule

GOLDEN = Path(__file__).with_name("golden")


def free_names(lang, rule_id):
    return [v.name for v in to_synthesis_rule(lang.rule(rule_id)).free]


@pytest.fixture(params=["stlc", "ext", "acq"])
def any_lang(request):
    return request.getfixturevalue(request.param)


def test_application_acquires_nothing(stlc):
    assert free_names(stlc, "T-APP") == []


def test_variable_acquires_all(stlc):
    assert free_names(stlc, "T-VAR") == ["G", "x", "t"]


def test_rule1_acquires_x0(acq):
    s = to_synthesis_rule(acq.rule("T-Rule1"))
    assert [v.name for v in s.free] == ["x0"]
    assert s.display_id == "S-Rule1"
    assert [j.pred for j in s.subgoals] == ["P1", "P2"]
    assert to_typing_rule(s) == acq.rule("T-Rule1")


def test_abstraction_round_trip(stlc):
    assert to_typing_rule(to_synthesis_rule(stlc.rule("T-ABS"))) == stlc.rule("T-ABS")


def test_free_order_is_conclusion_preorder(ext):
    for r in ext.rules:
        s = to_synthesis_rule(r)
        order = free_vars(*s.pattern)
        assert list(s.free) == [v for v in order if v in s.free]


def test_bijection(any_lang):
    for r in any_lang.rules:
        s = to_synthesis_rule(r)
        assert to_typing_rule(s) == r
        assert to_synthesis_rule(to_typing_rule(s)) == s


def test_free_disjoint_from_subgoals(any_lang):
    for s in any_lang.synthesis_rules.values():
        assert not set(s.free) & set(free_vars(*(a for j in s.subgoals for a in j.args)))


def test_conclusion_vars(stlc):
    s = stlc.synthesis_rules["T-APP"]
    assert [v.name for v in s.conclusion_vars] == ["s0", "s1", "s2"]
    assert [v.sort for v in s.conclusion_vars] == ["Context", "Prog", "Type"]


def test_deterministic(stlc):
    text = format_synthesis_rules(stlc)
    assert format_synthesis_rules(parse_language(builtin_path("languages", "stlc").read_text())) == text


@pytest.mark.parametrize("name,golden", [("stlc", "stlc.rules"), ("acq", "acquire.rules")])
def test_golden_layout(request, name, golden):
    lang = request.getfixturevalue(name)
    assert format_synthesis_rules(lang) == (GOLDEN / golden).read_text()
