import json
import subprocess
import sys

import pytest

from conftest import ID_APP_PROGRAM, ID_APP_TOKENS, FIXTURES
from tyflow.cli import FAIL, OK, USAGE, main
from tyflow.languages import builtin_path

STLC_CORPUS = str(builtin_path("corpus", "stlc"))
EXT_CORPUS = str(builtin_path("corpus", "stlc-ext"))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def json_lines(text):
    return [json.loads(line) for line in text.splitlines()]


class TestCheck:
    def test_worked_program(self, capsys):
        code, out, _ = run(capsys, "check", "--program", ID_APP_PROGRAM)
        assert code == OK
        assert json_lines(out) == [{"program": ID_APP_PROGRAM, "well_typed": True, "nodes": 5}]

    def test_tree(self, capsys):
        code, out, _ = run(capsys, "check", "--program", ID_APP_PROGRAM, "--tree")
        assert code == OK
        assert out.splitlines()[1] == f"  (typed empty {ID_APP_PROGRAM} bool)  [T-APP]"

    def test_ill_typed(self, capsys):
        code, _, err = run(capsys, "check", "--program", "(var x)")
        assert code == FAIL and "no rule applies" in err

    def test_syntax_error(self, capsys):
        code, _, err = run(capsys, "check", "--program", "(app true")
        assert code == FAIL and "error" in err

    def test_file(self, capsys, tmp_path):
        f = tmp_path / "progs.txt"
        f.write_text("true\n(abs x bool (var x))\n\n")
        code, out, _ = run(capsys, "check", "--file", str(f))
        assert code == OK and len(out.splitlines()) == 2

    def test_every_corpus_entry(self, capsys, tmp_path):
        for lang, corpus in (("stlc", STLC_CORPUS), ("stlc-ext", EXT_CORPUS)):
            progs = [json.loads(line)["program"] for line in open(corpus, encoding="utf-8")]
            f = tmp_path / "p.txt"
            f.write_text("\n".join(progs))
            assert run(capsys, "check", "--lang", lang, "--file", str(f))[0] == OK

    def test_missing_file_is_usage(self, capsys, tmp_path):
        assert run(capsys, "check", "--file", str(tmp_path / "nope"))[0] == USAGE


class TestTranslate:
    def test_stlc(self, capsys):
        code, out, _ = run(capsys, "translate-rules")
        assert code == OK
        assert out.count("\nS-") + out.startswith("S-") == 6
        block = out.split("S-APP:")[1].split("\n\n")[0]
        assert "acquire  []" in block

    def test_fixture_file(self, capsys):
        code, out, _ = run(capsys, "translate-rules", "--lang", str(FIXTURES / "acquire.lang"))
        assert code == OK and "S-Rule1: P(s0, s1)" in out and "acquire  [x0]" in out

    def test_stable(self, capsys):
        assert run(capsys, "translate-rules") == run(capsys, "translate-rules")

    def test_bad_language_is_usage(self, capsys, tmp_path):
        f = tmp_path / "bad.lang"
        f.write_text("language bad\nrule X: --- nope(a)\n")
        code, _, err = run(capsys, "translate-rules", "--lang", str(f))
        assert code == USAGE and "undeclared predicate" in err


class TestExtractReplay:
    def test_single_task(self, capsys, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text(open(STLC_CORPUS, encoding="utf-8").readline())
        out = tmp_path / "o.jsonl"
        assert run(capsys, "extract", "--corpus", str(corpus), "-o", str(out))[0] == OK
        (rec,) = json_lines(out.read_text())
        assert rec["tokens"] == ID_APP_TOKENS.split()

    def test_rerun_identical_and_jobs(self, capsys, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run(capsys, "extract", "--lang", "stlc-ext", "--corpus", EXT_CORPUS, "-o", str(a))
        run(capsys, "extract", "--lang", "stlc-ext", "--corpus", EXT_CORPUS, "-o", str(b), "--jobs", "4")
        assert a.read_bytes() == b.read_bytes() and a.read_bytes()

    def test_empty_corpus(self, capsys, tmp_path):
        corpus = tmp_path / "empty.jsonl"
        corpus.write_text("")
        out = tmp_path / "o.jsonl"
        assert run(capsys, "extract", "--corpus", str(corpus), "-o", str(out))[0] == OK
        assert out.read_text() == ""

    def test_ill_typed_entry(self, capsys, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text('{"id": "a", "prompt": "", "program": "true"}\n{"id": "b", "prompt": "", "program": "(var x)"}\n')
        out = tmp_path / "o.jsonl"
        code, _, err = run(capsys, "extract", "--corpus", str(corpus), "-o", str(out))
        assert code == FAIL and "b:" in err
        assert len(out.read_text().splitlines()) == 1

    def test_replay(self, capsys, tmp_path):
        f = tmp_path / "t.txt"
        f.write_text(ID_APP_TOKENS.replace(" ", "\n") + "\n")
        code, out, _ = run(capsys, "replay", "--tokens", str(f))
        assert code == OK and out.strip() == ID_APP_PROGRAM

    def test_replay_truncated(self, capsys, tmp_path):
        f = tmp_path / "t.txt"
        f.write_text("R:T-ROOT R:T-APP R:T-ABS")
        code, _, err = run(capsys, "replay", "--tokens", str(f))
        assert code == FAIL and "token 3: truncated" in err


class TestSynth:
    def test_uniform_budget_two(self, capsys):
        code, out, _ = run(capsys, "synth", "--beam", "2", "--max-tokens", "2")
        lines = json_lines(out)
        assert code == OK
        assert {line["program"] for line in lines[:-1]} == {"true", "false"}
        assert all(line["well_typed"] and line["tokens"] == 2 for line in lines[:-1])
        assert lines[-1]["candidates"] == 2 and lines[-1]["seed"] is None

    def test_trained_bigram(self, capsys, tmp_path):
        corpus = tmp_path / "c.jsonl"
        first = open(STLC_CORPUS, encoding="utf-8").readline()
        corpus.write_text(first)
        data, model = tmp_path / "d.jsonl", tmp_path / "m.ngram"
        run(capsys, "extract", "--corpus", str(corpus), "-o", str(data))
        assert run(capsys, "train-ngram", "--data", str(data), "-n", "2", "-o", str(model))[0] == OK
        prompt = json.loads(first)["prompt"]
        code, out, _ = run(capsys, "synth", "--policy", f"ngram:{model}", "--beam", "1", "--max-tokens", "9", "--prompt", prompt)
        assert code == OK and json_lines(out)[0]["program"] == ID_APP_PROGRAM

    def test_report_file_and_env_seed(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("TYFLOW_SEED", "1")
        report = tmp_path / "r.jsonl"
        assert run(capsys, "synth", "--lang", "stlc-ext", "--max-tokens", "16", "-o", str(report))[0] == OK
        lines = json_lines(report.read_text())
        assert lines[-1]["seed"] == 1 and lines[-1]["candidates"] > 2
        assert [line["rank"] for line in lines[:-1]] == list(range(1, len(lines)))

    def test_bad_policy(self, capsys):
        assert run(capsys, "synth", "--policy", "gpt")[0] == USAGE

    def test_bad_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("TYFLOW_SEED", "abc")
        assert run(capsys, "synth")[0] == USAGE

    def test_nothing_found(self, capsys):
        code, out, _ = run(capsys, "synth", "--max-tokens", "1")
        assert code == FAIL and json_lines(out)[-1]["candidates"] == 0


class TestEnumerate:
    def test_budget_two(self, capsys):
        code, out, _ = run(capsys, "enumerate", "--max-tokens", "2")
        lines = json_lines(out)
        assert code == OK
        assert [line["program"] for line in lines[:-1]] == ["true", "false"]
        assert lines[-1]["count"] == 2

    def test_pruning_flag(self, capsys):
        _, pruned, _ = run(capsys, "enumerate", "--max-tokens", "6", "--names", "x")
        _, unpruned, _ = run(capsys, "enumerate", "--max-tokens", "6", "--names", "x", "--no-type-pruning")
        a, b = json_lines(pruned), json_lines(unpruned)
        assert a[:-1] == b[:-1]
        assert a[-1]["explored"] < b[-1]["explored"]


class TestRoundtrip:
    @pytest.mark.parametrize("lang,corpus", [("stlc", STLC_CORPUS), ("stlc-ext", EXT_CORPUS)])
    def test_bundled(self, capsys, lang, corpus):
        code, out, _ = run(capsys, "roundtrip", "--lang", lang, "--corpus", corpus, "--jobs", "2")
        assert code == OK and out.splitlines()[-1] == "22/22 passed"

    def test_ill_typed_row(self, capsys, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text('{"id": "good", "prompt": "", "program": "true"}\n{"id": "bad", "prompt": "", "program": "(var x)"}\n')
        code, out, _ = run(capsys, "roundtrip", "--corpus", str(corpus))
        rows = out.splitlines()
        assert code == FAIL
        assert rows[0].split() == ["good", "pass"]
        assert rows[1].startswith("bad   FAIL at check")
        assert rows[2] == "1/2 passed"

    def test_empty(self, capsys, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text("")
        code, out, _ = run(capsys, "roundtrip", "--corpus", str(corpus))
        assert code == OK and out.strip() == "0/0 passed"


class TestUsage:
    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["synth", "--bogus"])
        assert e.value.code == USAGE

    def test_no_command(self, capsys):
        with pytest.raises(SystemExit) as e:
            main([])
        assert e.value.code == USAGE

    def test_unknown_language(self, capsys):
        assert run(capsys, "enumerate", "--max-tokens", "2", "--lang", "nope")[0] == USAGE

    def test_bad_corpus(self, capsys, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text("{oops\n")
        assert run(capsys, "roundtrip", "--corpus", str(corpus))[0] == USAGE


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "tyflow", "enumerate", "--max-tokens", "2"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout.splitlines()[-1]) == {"count": 2, "explored": 4}
