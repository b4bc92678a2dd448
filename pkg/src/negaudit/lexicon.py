"""Rule-based polarity parsing for questions and answer options.

Two lexicons ship built in. ``ORIGINAL`` knows only the literal ``no {X}``
option form and the ``absent`` question cue; ``EXTENDED`` adds four more
negated option templates and broader question cues. Matching is
deterministic: option templates are tried in order against the whole
canonicalized text, and question cues are matched longest-first as whole
words so that ``not present`` is never also read as ``present``.
"""

from __future__ import annotations

import enum
import functools
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from negaudit.answers import AnswerOption, Polarity

PLACEHOLDER = "{X}"
_TRAILING_PUNCT = ".,;:!?"


def canonicalize(text: str) -> str:
    """Lowercase, collapse whitespace, drop trailing punctuation."""
    return " ".join(text.lower().split()).rstrip(_TRAILING_PUNCT).rstrip()


class PolarityClass(str, enum.Enum):
    ABSENCE = "ABSENCE"
    PRESENCE = "PRESENCE"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class NegationLexicon:
    name: str
    question_absence_cues: tuple[str, ...]
    question_presence_cues: tuple[str, ...]
    option_negation_patterns: tuple[tuple[str, str], ...]
    hedge_cues: tuple[str, ...] = ("least", "unlikely")
    concept_synonyms: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        ids = [pid for pid, _ in self.option_negation_patterns]
        if len(set(ids)) != len(ids):
            raise ValueError(f"lexicon {self.name!r}: duplicate pattern ids")
        for pid, template in self.option_negation_patterns:
            if template.count(PLACEHOLDER) != 1:
                raise ValueError(f"lexicon {self.name!r}: template {pid!r} needs exactly one {PLACEHOLDER}")
        for cue in (*self.question_absence_cues, *self.question_presence_cues, *self.hedge_cues):
            if cue != canonicalize(cue) or not cue:
                raise ValueError(f"lexicon {self.name!r}: cue {cue!r} is not canonical lowercase")

    def template(self, pattern_id: str) -> str:
        for pid, template in self.option_negation_patterns:
            if pid == pattern_id:
                return template
        raise KeyError(f"lexicon {self.name!r} has no pattern {pattern_id!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "question_absence_cues": list(self.question_absence_cues),
            "question_presence_cues": list(self.question_presence_cues),
            "option_negation_patterns": [
                {"pattern_id": pid, "template": t} for pid, t in self.option_negation_patterns
            ],
            "hedge_cues": list(self.hedge_cues),
            "concept_synonyms": dict(self.concept_synonyms),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> NegationLexicon:
        patterns = []
        for p in data["option_negation_patterns"]:
            if isinstance(p, Mapping):
                patterns.append((p["pattern_id"], p["template"]))
            else:
                patterns.append((p[0], p[1]))
        return cls(
            name=data["name"],
            question_absence_cues=tuple(data["question_absence_cues"]),
            question_presence_cues=tuple(data["question_presence_cues"]),
            option_negation_patterns=tuple(patterns),
            hedge_cues=tuple(data.get("hedge_cues", ("least", "unlikely"))),
            concept_synonyms=tuple(sorted(data.get("concept_synonyms", {}).items())),
        )


ORIGINAL = NegationLexicon(
    name="original",
    question_absence_cues=("absent", "not present"),
    question_presence_cues=("present",),
    option_negation_patterns=(("canonical_no", "no {X}"),),
)

# "no {X}" goes last so that the longer "no evidence of {X}" wins.
EXTENDED = NegationLexicon(
    name="extended",
    question_absence_cues=("absent", "not present", "absence of", "no evidence of", "clear of", "free of"),
    question_presence_cues=("present", "presence of", "evidence of"),
    option_negation_patterns=(
        ("no_evidence_of", "no evidence of {X}"),
        ("absence_of", "absence of {X}"),
        ("not_present", "{X} is not present"),
        ("clear_of", "clear of {X}"),
        ("canonical_no", "no {X}"),
    ),
)

BUILTIN_LEXICONS = {"original": ORIGINAL, "extended": EXTENDED}


def get_lexicon(name_or_path: str | Path) -> NegationLexicon:
    """Resolve a built-in lexicon name or load a lexicon JSON file."""
    if str(name_or_path) in BUILTIN_LEXICONS:
        return BUILTIN_LEXICONS[str(name_or_path)]
    with open(name_or_path, encoding="utf-8") as fh:
        return NegationLexicon.from_dict(json.load(fh))


def _word_regex(phrase: str) -> re.Pattern[str]:
    return re.compile(r"(?<!\w)" + re.escape(phrase) + r"(?!\w)")


@functools.lru_cache(maxsize=64)
def _compiled(lexicon: NegationLexicon):
    option_res = []
    for pid, template in lexicon.option_negation_patterns:
        head, tail = template.split(PLACEHOLDER)
        option_res.append((pid, re.compile(re.escape(head) + r"(?P<x>.+)" + re.escape(tail))))
    cues = [(c, PolarityClass.ABSENCE) for c in lexicon.question_absence_cues]
    cues += [(c, PolarityClass.PRESENCE) for c in lexicon.question_presence_cues]
    cues.sort(key=lambda cue: -len(cue[0]))
    cue_res = [(_word_regex(c), label) for c, label in cues]
    hedge_res = [_word_regex(h) for h in lexicon.hedge_cues]
    return option_res, cue_res, hedge_res, dict(lexicon.concept_synonyms)


@functools.lru_cache(maxsize=4096)
def classify_question(question: str, lexicon: NegationLexicon) -> PolarityClass:
    """Absence/presence when exactly one side's cues fire; UNKNOWN otherwise."""
    _, cue_res, hedge_res, _ = _compiled(lexicon)
    text = " ".join(question.lower().split())
    if any(h.search(text) for h in hedge_res):
        return PolarityClass.UNKNOWN
    taken = bytearray(len(text))
    hits: set[PolarityClass] = set()
    for regex, label in cue_res:
        for m in regex.finditer(text):
            if any(taken[m.start():m.end()]):
                continue
            taken[m.start():m.end()] = b"\x01" * (m.end() - m.start())
            hits.add(label)
    if len(hits) == 1:
        return hits.pop()
    return PolarityClass.UNKNOWN


@functools.lru_cache(maxsize=65536)
def parse_option(text: str, lexicon: NegationLexicon) -> AnswerOption:
    canonical = canonicalize(text)
    if not canonical:
        raise ValueError(f"option text {text!r} is empty after canonicalization")
    option_res, _, _, synonyms = _compiled(lexicon)
    for pid, regex in option_res:
        m = regex.fullmatch(canonical)
        if m is None:
            continue
        concept = canonicalize(m.group("x"))
        if concept:
            return AnswerOption(text, synonyms.get(concept, concept), Polarity.NEG, pid)
    return AnswerOption(text, synonyms.get(canonical, canonical), Polarity.POS)


def parse_options(texts: Sequence[str], lexicon: NegationLexicon) -> tuple[AnswerOption, ...]:
    return tuple(parse_option(t, lexicon) for t in texts)


def _capitalize(text: str) -> str:
    return text[:1].upper() + text[1:]


def render_positive(concept: str) -> str:
    return _capitalize(concept)


def render_negated(concept: str, pattern_id: str, lexicon: NegationLexicon = EXTENDED) -> str:
    """Surface form of ``concept`` negated through one of the lexicon's templates."""
    return _capitalize(lexicon.template(pattern_id).replace(PLACEHOLDER, concept))


def find_positive_counterpart(options: Sequence[AnswerOption], negated_index: int) -> int | None:
    """Index of the unique positive option sharing the negated option's concept."""
    if not 0 <= negated_index < len(options) or not options[negated_index].is_negated:
        raise ValueError(f"option {negated_index} is not a negated option")
    concept = options[negated_index].concept
    matches = [
        i
        for i, o in enumerate(options)
        if i != negated_index and o.polarity is Polarity.POS and o.concept == concept
    ]
    return matches[0] if len(matches) == 1 else None
