"""Bundled language definitions and their example corpora."""

from __future__ import annotations

import functools
from importlib import resources
from pathlib import Path

from ..dataset import CorpusEntry, read_corpus
from ..language import LanguageDef, parse_language

_FILES = {"stlc": "stlc", "stlc-ext": "stlc_ext"}


def _package_text(*parts: str) -> str:
    return resources.files("tyflow").joinpath(*parts).read_text(encoding="utf-8")


@functools.lru_cache(maxsize=None)
def load_builtin(name: str) -> LanguageDef:
    if name not in _FILES:
        raise KeyError(f"no bundled language {name!r}; choose from {', '.join(_FILES)}")
    return parse_language(_package_text("languages", _FILES[name] + ".lang"))


def builtin_languages() -> dict[str, LanguageDef]:
    return {name: load_builtin(name) for name in _FILES}


def builtin_corpus(name: str) -> list[CorpusEntry]:
    if name not in _FILES:
        raise KeyError(f"no bundled corpus {name!r}")
    return read_corpus(_package_text("corpus", _FILES[name] + ".jsonl").splitlines())


def load_language(spec: str) -> LanguageDef:
    """A bundled language by name, or a definition file by path."""
    if spec in _FILES:
        return load_builtin(spec)
    return parse_language(Path(spec).read_text(encoding="utf-8"))


def builtin_path(kind: str, name: str) -> Path:
    """Filesystem path of a bundled file (``kind`` is ``languages`` or ``corpus``)."""
    suffix = ".lang" if kind == "languages" else ".jsonl"
    with resources.as_file(resources.files("tyflow").joinpath(kind, _FILES[name] + suffix)) as p:
        return Path(p)
