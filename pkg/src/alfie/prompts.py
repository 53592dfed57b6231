"""Prompt tokenization and subject-noun span selection.

The noun picker is a deterministic heuristic (alphabetic token, not a
stopword, not a generic noun) plus an explicit override path, so the engine
needs no POS tagger. The generic-noun exclusion list is configurable from a
plain-text file, one lowercase word per line.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

__all__ = [
    "DEFAULT_EXCLUSION",
    "NounSpans",
    "extract_nouns",
    "load_exclusion_file",
    "select_noun_spans",
    "tokenize",
]

# generic, uninformative nouns whose attention maps tend to cover the whole canvas
DEFAULT_EXCLUSION = frozenset({
    "image", "photo", "picture", "illustration", "photograph", "background",
    "view", "scene", "closeup", "close-up", "portrait", "shot",
})

# articles, prepositions, pronouns, auxiliaries, conjunctions, and common
# color/size adjectives; anything here can never become a subject noun
_STOPWORDS = frozenset("""
a an the and or but nor so yet of in on at by for with from to into onto over
under above below between among through across behind beside near against
is are am was were be been being do does did has have had will would shall
should can could may might must it its this that these those there here
he she they them his her their our your my me we you i him us who which what
as if then than very not no while each both all some any most more less
other another such only own same just about around out up down off
big small large little tiny huge giant enormous long short tall wide narrow
red orange yellow green blue purple pink brown black white gray grey golden
silver dark light bright pale colorful
""".split())

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:['-][a-z0-9]+)*|[^\s]")
_WORD_RE = re.compile(r"^[a-z]+(?:[-'][a-z]+)*$")


@dataclass(frozen=True)
class NounSpans:
    """Subject-noun spans over a prompt's token sequence.

    Each span is ``(token_start, token_end, surface_string)`` with ``end``
    exclusive; spans are ordered and non-overlapping, surfaces lowercase.
    """

    spans: tuple[tuple[int, int, str], ...]
    source_prompt: str

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(s for _, _, s in self.spans)


def tokenize(prompt: str) -> list[str]:
    """Lowercased word tokenization; punctuation comes out as separate tokens."""
    return _TOKEN_RE.findall(prompt.lower())


def load_exclusion_file(path: str) -> frozenset[str]:
    """Read an exclusion list: one lowercase word per line, blanks ignored."""
    with open(path, "r", encoding="utf-8") as f:
        return frozenset(line.strip() for line in f if line.strip())


def select_noun_spans(
    tokens: list[str],
    exclusion: frozenset[str] | None = None,
    override: list[str] | None = None,
    source_prompt: str = "",
) -> NounSpans:
    """Pick subject-noun spans from an existing token sequence.

    With ``override``, each entry (possibly multi-word) must occur as a
    consecutive token run; a missing entry raises naming it. Without it,
    every alphabetic non-stopword token not in ``exclusion`` becomes a
    single-token span; an empty result only warns.
    """
    exclusion = DEFAULT_EXCLUSION if exclusion is None else exclusion

    if override is not None:
        spans = []
        for entry in override:
            needle = tokenize(entry)
            if not needle:
                raise ValueError(f"empty noun override entry: {entry!r}")
            hits = [
                i for i in range(len(tokens) - len(needle) + 1)
                if tokens[i:i + len(needle)] == needle
            ]
            if not hits:
                raise ValueError(f"override noun {entry!r} not found in prompt")
            spans.extend((i, i + len(needle), " ".join(needle)) for i in hits)
        spans.sort()
        kept: list[tuple[int, int, str]] = []
        for span in spans:
            if not kept or span[0] >= kept[-1][1]:
                kept.append(span)
        return NounSpans(spans=tuple(kept), source_prompt=source_prompt)

    spans = [
        (i, i + 1, tok)
        for i, tok in enumerate(tokens)
        if _WORD_RE.match(tok) and tok not in _STOPWORDS and tok not in exclusion
    ]
    if not spans:
        warnings.warn(
            "no subject nouns found in prompt; alpha estimation needs an explicit "
            "noun override",
            stacklevel=2,
        )
    return NounSpans(spans=tuple(spans), source_prompt=source_prompt)


def extract_nouns(
    prompt: str,
    exclusion: frozenset[str] | None = None,
    override: list[str] | None = None,
) -> NounSpans:
    """Tokenize ``prompt`` and pick its subject-noun spans."""
    return select_noun_spans(tokenize(prompt), exclusion, override, source_prompt=prompt)
