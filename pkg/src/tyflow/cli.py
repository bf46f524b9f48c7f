"""Command-line interface: ``tyflow <command> ...``.

Exit codes: 0 success, 1 domain failure (ill-typed program, failed replay,
round-trip mismatch), 2 usage error (bad flags, unreadable files, malformed
definitions).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .dataset import DatasetError, ReplayError, TaskRecord, extract_record, read_corpus, read_jsonl, replay, write_jsonl
from .engine import enumerate_all, parse_tokens
from .language import Judgment, LanguageError, TermSyntaxError, parse_program
from .languages import load_language
from .policy import NGramModel, UniformPolicy, beam_search
from .translation import format_synthesis_rules
from .typecheck import DerivationError, check_program, derive

OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _lang(args):
    try:
        return load_language(args.lang)
    except LanguageError as e:
        raise UsageError(f"{args.lang}: invalid language definition\n{e}") from None
    except OSError as e:
        raise UsageError(f"cannot read language {args.lang}: {e.strerror or e}") from None


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror or e}") from None


def _emit(obj, out=None) -> None:
    print(json.dumps(obj, ensure_ascii=False), file=out or sys.stdout)


def _seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("TYFLOW_SEED")
    if env is None or env == "":
        return None
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"TYFLOW_SEED must be an integer, got {env!r}") from None


# -- commands -------------------------------------------------------------------


def cmd_check(args) -> int:
    lang = _lang(args)
    texts = [args.program] if args.program is not None else [ln for ln in _read(args.file).splitlines() if ln.strip()]
    status = OK
    for text in texts:
        try:
            program = parse_program(text, lang)
            tree = check_program(lang, program, args.depth)
        except TermSyntaxError as e:
            print(f"error: {text}: {e}", file=sys.stderr)
            status = FAIL
            continue
        except DerivationError as e:
            print(f"error: {e}", file=sys.stderr)
            status = FAIL
            continue
        if args.tree:
            print(tree.pretty())
        else:
            _emit({"program": str(program), "well_typed": True, "nodes": tree.size()})
    return status


def cmd_translate(args) -> int:
    sys.stdout.write(format_synthesis_rules(_lang(args)))
    return OK


def _run_jobs(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _corpus(path: str):
    try:
        return read_corpus(path)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror or e}") from None
    except DatasetError as e:
        raise UsageError(f"{path}: {e}") from None


def cmd_extract(args) -> int:
    lang = _lang(args)
    entries = _corpus(args.corpus)

    def one(entry):
        try:
            return extract_record(lang, entry.id, entry.prompt, entry.program), None
        except (TermSyntaxError, DerivationError) as e:
            return None, f"{entry.id}: {e}"

    results = _run_jobs(one, entries, args.jobs)
    records = [r for r, _ in results if r is not None]
    for _, err in results:
        if err:
            print(f"error: {err}", file=sys.stderr)
    write_jsonl(records, args.output)
    return OK if all(err is None for _, err in results) else FAIL


def cmd_replay(args) -> int:
    lang = _lang(args)
    try:
        tokens = parse_tokens(_read(args.tokens))
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return FAIL
    try:
        program = replay(lang, tokens)
    except ReplayError as e:
        print(f"error: replay failed at token {e.index}: {e.site}: {e.detail}", file=sys.stderr)
        return FAIL
    print(program)
    return OK


def _policy(spec: str):
    if spec == "uniform":
        return UniformPolicy()
    if spec.startswith("ngram:"):
        try:
            return NGramModel.load(spec[len("ngram:") :])
        except (OSError, ValueError) as e:
            raise UsageError(f"cannot load n-gram model: {e}") from None
    raise UsageError(f"unknown policy {spec!r}; use 'uniform' or 'ngram:MODEL'")


def cmd_synth(args) -> int:
    lang = _lang(args)
    if args.beam < 1:
        raise UsageError("--beam must be at least 1")
    policy = _policy(args.policy)
    seed = _seed(args)
    t0 = time.perf_counter()
    cands = beam_search(lang, policy, args.beam, args.max_tokens, prompt=args.prompt, seed=seed, refill=not args.no_refill)
    elapsed = time.perf_counter() - t0
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        for rank, c in enumerate(cands, 1):
            ok = True
            try:
                derive(lang, Judgment(lang.root, (c.program,)))
            except DerivationError:
                ok = False
            _emit(
                {
                    "rank": rank,
                    "program": str(c.program),
                    "weight": round(c.weight, 6),
                    "well_typed": ok,
                    "tokens": len(c.tokens),
                },
                out,
            )
        _emit({"candidates": len(cands), "elapsed": round(elapsed, 4), "seed": seed}, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return OK if cands else FAIL


def cmd_enumerate(args) -> int:
    lang = _lang(args)
    if args.names is not None:
        lang = replace(lang, names=tuple(n for n in args.names.split(",") if n))
    result = enumerate_all(lang, args.max_tokens, prune_types=not args.no_type_pruning)
    for tokens, program in result.results:
        _emit({"program": str(program), "tokens": " ".join(map(str, tokens))})
    _emit({"count": len(result.results), "explored": result.explored})
    return OK


def _roundtrip_row(lang, entry) -> tuple[str, str, str]:
    try:
        program = parse_program(entry.program, lang)
    except TermSyntaxError as e:
        return entry.id, "parse", str(e)
    try:
        check_program(lang, program)
    except DerivationError as e:
        return entry.id, "check", str(e)
    try:
        rec = extract_record(lang, entry.id, entry.prompt, entry.program)
    except Exception as e:  # noqa: BLE001 - reported as a failed row
        return entry.id, "extract", str(e)
    try:
        rebuilt = replay(lang, rec.tokens)
    except ReplayError as e:
        return entry.id, "replay", str(e)
    if str(rebuilt) != str(program):
        return entry.id, "compare", f"rebuilt {rebuilt}"
    return entry.id, "ok", ""


def cmd_roundtrip(args) -> int:
    lang = _lang(args)
    entries = _corpus(args.corpus)
    rows = _run_jobs(lambda e: _roundtrip_row(lang, e), entries, args.jobs)
    width = max([len(r[0]) for r in rows] + [2])
    for rid, stage, detail in rows:
        status = "pass" if stage == "ok" else f"FAIL at {stage}: {detail}"
        print(f"{rid:<{width}}  {status}")
    failed = sum(1 for r in rows if r[1] != "ok")
    print(f"{len(rows) - failed}/{len(rows)} passed")
    return OK if failed == 0 else FAIL


def cmd_train(args) -> int:
    lang = _lang(args) if args.conditioned else None
    try:
        records: list[TaskRecord] = read_jsonl(args.data)
    except OSError as e:
        raise UsageError(f"cannot read {args.data}: {e.strerror or e}") from None
    except DatasetError as e:
        raise UsageError(f"{args.data}: {e}") from None
    model = NGramModel.train(records, args.n, lang=lang, conditioned=args.conditioned)
    model.save(args.output)
    _emit({"records": len(records), "order": args.n, "contexts": len(model.counts)})
    return OK


# -- argument parsing -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tyflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def lang_arg(sp):
        sp.add_argument("--lang", default="stlc", help="definition file or bundled name (stlc, stlc-ext)")

    sp = sub.add_parser("check", help="type-check programs")
    lang_arg(sp)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--program", help="program in canonical term syntax")
    src.add_argument("--file", help="file with one program per line")
    sp.add_argument("--tree", action="store_true", help="print the derivation tree")
    sp.add_argument("--depth", type=int, default=64, help="proof search depth limit")
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("translate-rules", help="print the synthesis rules")
    lang_arg(sp)
    sp.set_defaults(fn=cmd_translate)

    sp = sub.add_parser("extract", help="turn a corpus into decision-sequence records")
    lang_arg(sp)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(fn=cmd_extract)

    sp = sub.add_parser("replay", help="rebuild the program a token file encodes")
    lang_arg(sp)
    sp.add_argument("--tokens", required=True, help="file of whitespace-separated tokens")
    sp.set_defaults(fn=cmd_replay)

    sp = sub.add_parser("synth", help="beam search for programs")
    lang_arg(sp)
    sp.add_argument("--prompt", default="")
    sp.add_argument("--policy", default="uniform", help="uniform or ngram:MODEL")
    sp.add_argument("--beam", type=int, default=4)
    sp.add_argument("--max-tokens", type=int, default=32)
    sp.add_argument("--seed", type=int, default=None, help="sample with this seed (default: $TYFLOW_SEED, else deterministic)")
    sp.add_argument("--no-refill", action="store_true", help="do not refill beam slots freed by pruning")
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=cmd_synth)

    sp = sub.add_parser("enumerate", help="list every program within a token budget")
    lang_arg(sp)
    sp.add_argument("--max-tokens", type=int, required=True)
    sp.add_argument("--names", help="comma-separated name pool replacing the language's")
    sp.add_argument("--no-type-pruning", action="store_true")
    sp.set_defaults(fn=cmd_enumerate)

    sp = sub.add_parser("roundtrip", help="check -> extract -> replay every corpus program")
    lang_arg(sp)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(fn=cmd_roundtrip)

    sp = sub.add_parser("train-ngram", help="count n-grams over extracted records")
    lang_arg(sp)
    sp.add_argument("--data", required=True, help="records written by extract")
    sp.add_argument("-n", type=int, default=2)
    sp.add_argument("--conditioned", action="store_true", help="condition on the goal predicate and choice kind")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(fn=cmd_train)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
