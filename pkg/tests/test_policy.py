import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ID_APP_PROGRAM, ID_APP_PROMPT, ID_APP_TOKENS
from tyflow.dataset import extract_record
from tyflow.engine import Limits, SynthState, enumerate_all, parse_tokens, run
from tyflow.policy import (
    NGramModel,
    PolicyOracle,
    SampledPolicy,
    UniformPolicy,
    beam_search,
    sequence_weight,
)
from tyflow.typecheck import is_well_typed

ID_APP = parse_tokens(ID_APP_TOKENS)


@pytest.fixture(scope="module")
def id_app_records(stlc):
    return [extract_record(stlc, "stlc-001", ID_APP_PROMPT, ID_APP_PROGRAM)]


@pytest.fixture(scope="module")
def bigram(id_app_records):
    return NGramModel.train(id_app_records, 2)


def after(lang, text):
    s = SynthState.start(lang)
    for t in parse_tokens(text):
        s = s.advance(t)
    return s


def total_probability(scores):
    return sum(math.exp(w) for w in scores.values())


class TestNGram:
    def test_bigram_prefers_application(self, stlc, bigram):
        s = after(stlc, "R:T-ROOT")
        scores = bigram.score("", s.tokens, s.choice())
        assert max(scores, key=scores.get) == parse_tokens("R:T-APP")[0]
        assert scores[parse_tokens("R:T-APP")[0]] == pytest.approx(math.log(2 / 6))

    def test_empty_unigram_is_uniform(self, stlc):
        s = after(stlc, "R:T-ROOT")
        scores = NGramModel.train([], 1).score("", s.tokens, s.choice())
        assert all(w == pytest.approx(-math.log(5)) for w in scores.values())
        assert scores == UniformPolicy().score("", s.tokens, s.choice())

    def test_deterministic(self, id_app_records):
        assert NGramModel.train(id_app_records, 3) == NGramModel.train(id_app_records, 3)

    def test_order_must_be_positive(self):
        with pytest.raises(ValueError):
            NGramModel(0)

    def test_save_load(self, tmp_path, bigram, id_app_records, stlc):
        path = tmp_path / "m.ngram"
        bigram.save(path)
        assert path.read_text().splitlines()[0] == "# order 2"
        assert NGramModel.load(path) == bigram
        cond = NGramModel.train(id_app_records, 2, lang=stlc, conditioned=True)
        cond.save(path)
        assert NGramModel.load(path) == cond

    def test_count_file_lines(self, tmp_path, bigram):
        path = tmp_path / "m.ngram"
        bigram.save(path)
        lines = path.read_text().splitlines()[1:]
        assert "<s> R:T-ROOT 1" in lines and "K:bool N:x 1" in lines
        assert sum(int(line.split()[-1]) for line in lines) == 9

    def test_load_errors(self, tmp_path):
        path = tmp_path / "bad"
        path.write_text("R:T-ROOT 1\n")
        with pytest.raises(ValueError, match="header"):
            NGramModel.load(path)
        path.write_text("# order 2\nR:T-ROOT 1\n")
        with pytest.raises(ValueError, match=":2:"):
            NGramModel.load(path)

    def test_conditioned_context(self, stlc, id_app_records):
        model = NGramModel.train(id_app_records, 1, lang=stlc, conditioned=True)
        assert model.counts[("@typed/String",)]["N:x"] == 2
        assert model.counts[("@typed/rule",)]["R:T-APP"] == 1

    def test_conditioned_needs_language(self, id_app_records):
        with pytest.raises(ValueError):
            NGramModel.train(id_app_records, 2, conditioned=True)


class TestBeam:
    def test_budget_two(self, stlc):
        out = beam_search(stlc, UniformPolicy(), 2, max_tokens=2)
        assert [str(c.program) for c in out] == ["true", "false"]
        assert out[0].weight == out[1].weight == pytest.approx(-math.log(5))

    def test_bigram_recovers_training_program(self, stlc, bigram):
        (best,) = beam_search(stlc, bigram, 1, max_tokens=9, prompt=ID_APP_PROMPT)[:1]
        assert str(best.program) == ID_APP_PROGRAM
        assert best.tokens == ID_APP

    def test_bigram_stepwise_cross_check(self, stlc, bigram):
        # Among all accepted sequences within the budget, the training
        # sequence takes the best-scoring continuation at every step.
        accepted = [tokens for tokens, _ in enumerate_all(stlc, 9).results]
        assert ID_APP in accepted
        for i in range(len(ID_APP)):
            options = {t[i] for t in accepted if t[:i] == ID_APP[:i]}
            scores = bigram.score("", ID_APP[:i], after(stlc, " ".join(map(str, ID_APP[:i]))).choice())
            best = max(scores[t] for t in options)
            assert [t for t in options if scores[t] == best] == [ID_APP[i]]

    def test_short_programs_outweigh_training_sequence(self, stlc, bigram):
        # Totals favour short programs, so only a narrow beam recovers the training program.
        assert sequence_weight(stlc, bigram, parse_tokens("R:T-ROOT R:T-TRUE")) > sequence_weight(stlc, bigram, ID_APP)
        top = beam_search(stlc, bigram, 1, max_tokens=9)
        assert [c.tokens for c in top] == [ID_APP]

    def test_greedy_oracle(self, stlc, bigram):
        s = run(stlc, PolicyOracle(bigram), limits=Limits(max_tokens=9))
        assert str(s.program()) == ID_APP_PROGRAM

    def test_large_beam_matches_enumeration(self, stlc):
        for budget in range(2, 8):
            expected = {str(p) for p in enumerate_all(stlc, budget).programs}
            got = {str(c.program) for c in beam_search(stlc, UniformPolicy(), 10_000, max_tokens=budget)}
            assert got == expected

    def test_outputs_well_typed_and_sorted(self, ext):
        out = beam_search(ext, UniformPolicy(), 6, max_tokens=20)
        assert out
        assert all(is_well_typed(ext, c.program) for c in out)
        assert [c.weight for c in out] == sorted((c.weight for c in out), reverse=True)

    def test_no_refill_keeps_fewer(self, ext):
        with_refill = beam_search(ext, UniformPolicy(), 3, max_tokens=16)
        without = beam_search(ext, UniformPolicy(), 3, max_tokens=16, refill=False)
        assert len(without) <= len(with_refill)

    def test_deterministic_without_seed(self, ext):
        a = beam_search(ext, UniformPolicy(), 4, max_tokens=24)
        assert a == beam_search(ext, UniformPolicy(), 4, max_tokens=24)

    def test_seeded(self, ext):
        a = beam_search(ext, UniformPolicy(), 2, max_tokens=24, seed=7)
        assert a == beam_search(ext, UniformPolicy(), 2, max_tokens=24, seed=7)

    def test_seed_does_not_change_weights(self, stlc):
        for c in beam_search(stlc, UniformPolicy(), 3, max_tokens=12, seed=1):
            assert c.weight == pytest.approx(sequence_weight(stlc, UniformPolicy(), c.tokens))

    def test_width_validated(self, stlc):
        with pytest.raises(ValueError):
            beam_search(stlc, UniformPolicy(), 0)

    def test_nothing_fits(self, stlc):
        assert beam_search(stlc, UniformPolicy(), 3, max_tokens=1) == []


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_scores_normalise(seed, n):
    from tyflow.languages import load_builtin

    lang = load_builtin("stlc-ext")
    from tyflow.engine import RandomOracle, SynthFailure

    policy = NGramModel.train([], n)
    oracle = RandomOracle(seed)
    s = SynthState.start(lang, limits=Limits(max_tokens=30))
    try:
        while not s.done:
            choice = s.choice()
            scores = policy.score("", s.tokens, choice)
            assert set(scores) == set(choice.tokens)
            assert total_probability(scores) == pytest.approx(1.0)
            s = s.advance(oracle.choose("", s.tokens, choice))
    except SynthFailure:
        pass


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_sampled_policy_only_adds_noise(seed):
    from tyflow.languages import load_builtin

    lang = load_builtin("stlc")
    s = after(lang, "R:T-ROOT")
    base = UniformPolicy().score("", s.tokens, s.choice())
    noisy = SampledPolicy(UniformPolicy(), seed).score("", s.tokens, s.choice())
    assert set(noisy) == set(base) and all(math.isfinite(w) for w in noisy.values())
