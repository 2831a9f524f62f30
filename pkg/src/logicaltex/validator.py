"""Check conversion outputs structurally and against reference metadata.

Three independent checks: the converted document must not gain structural
diagnostics, bytes outside the edit plan must be untouched, and recovered
metadata is scored against a reference record with normalized edit
similarity.
"""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .converter import RewritePlan
from .lexer import decode_source, latin1_fallback, parse
from .model import strip_styling


class Verdict(Enum):
    PASS = "pass"
    WARN = "warn"
    FAIL = "fail"


@dataclass
class MetadataScores:
    title_similarity: float | None = None
    author_set_f1: float | None = None
    abstract_similarity: float | None = None
    missing: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "title_similarity": self.title_similarity,
            "author_set_f1": self.author_set_f1,
            "abstract_similarity": self.abstract_similarity,
            "missing": list(self.missing),
        }


@dataclass(frozen=True)
class Thresholds:
    title: float = 0.9
    author_f1: float = 0.9
    abstract: float = 0.85


@dataclass
class ValidationReport:
    structural_delta: list[tuple[str, str]]
    body_preserved: bool
    first_difference: int | None
    metadata: MetadataScores | None
    verdict: Verdict
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "structural": [list(k) for k in self.structural_delta],
            "body_preserved": self.body_preserved,
            "first_difference": self.first_difference,
            "metadata_scores": self.metadata.to_dict() if self.metadata else None,
            "verdict": self.verdict.value,
            "notes": list(self.notes),
        }


def validate_structure(original: str | bytes, converted: str | bytes) -> list[tuple[str, str]]:
    """Diagnostics of the converted source minus those already present in
    the original, compared position-independently.  Empty means the
    rewrite introduced no structural damage."""
    before = Counter(d.key() for d in parse(original).diagnostics)
    after = Counter(d.key() for d in parse(converted).diagnostics)
    delta = after - before
    return sorted(delta.elements())


def check_body_preservation(original: str | bytes, converted: str | bytes,
                            plan: RewritePlan) -> tuple[bool, int | None]:
    """True iff every byte outside the plan's spans matches positionally
    (after offset adjustment for replacement length changes); otherwise
    the offset of the first difference in the converted text."""
    orig = decode_source(original)
    conv = decode_source(converted)
    o = c = 0
    for e in plan.edits:
        seg = orig[o:e.span.start]
        got = conv[c:c + len(seg)]
        if got != seg:
            for k, (x, y) in enumerate(zip(seg, got)):
                if x != y:
                    return False, c + k
            return False, c + min(len(seg), len(got))
        c += len(seg)
        if conv[c:c + len(e.replacement)] != e.replacement:
            return False, c
        o = e.span.end
        c += len(e.replacement)
    tail = orig[o:]
    if conv[c:] != tail:
        for k, (x, y) in enumerate(zip(tail, conv[c:])):
            if x != y:
                return False, c + k
        return False, c + min(len(tail), len(conv) - c)
    return True, None


# ---------------------------------------------------------------------------
# Metadata comparison
# ---------------------------------------------------------------------------

_ACCENT_CMD = re.compile(
    r"\\[Hquvcdbkrt]\s*\{\s*([^{}]{0,4})\s*\}"
    r"|\\['`\"^~=.]\s*\{\s*([A-Za-z]?)\s*\}"
    r"|\\['`\"^~=.]\s*([A-Za-z])"
)
_LETTER_CMD = {
    "\\ss": "ss", "\\ae": "ae", "\\AE": "AE", "\\oe": "oe", "\\OE": "OE",
    "\\o": "o", "\\O": "O", "\\aa": "aa", "\\AA": "AA", "\\l": "l",
    "\\L": "L", "\\i": "i", "\\j": "j",
}


def normalize_for_compare(text: str) -> str:
    """Lowercase, accents to base letters, whitespace collapsed, braces
    and math shifts dropped: puts marked-up source text and plain API
    text on the same footing."""
    s = strip_styling(latin1_fallback(text))
    s = _ACCENT_CMD.sub(lambda m: m.group(1) or m.group(2) or m.group(3) or "", s)
    for cmd, repl in _LETTER_CMD.items():
        s = s.replace(cmd + " ", repl).replace(cmd, repl)
    s = unicodedata.normalize("NFKD", s)
    s = "".join(ch for ch in s if not unicodedata.combining(ch))
    s = s.replace("{", "").replace("}", "").replace("$", "")
    s = re.sub(r"\s+", " ", s)
    return s.strip().casefold()


def levenshtein(a: str, b: str) -> int:
    """Edit distance, vectorized row by row."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    bn = np.frombuffer(b.encode("utf-32-le"), dtype=np.uint32)
    prev = np.arange(len(b) + 1, dtype=np.int64)
    idx = np.arange(1, len(b) + 1, dtype=np.int64)
    for i, ch in enumerate(a, start=1):
        cost = (bn != ord(ch)).astype(np.int64)
        cur = np.empty_like(prev)
        cur[0] = i
        best = np.minimum(prev[1:] + 1, prev[:-1] + cost)
        # cur[j] = min(best[j], cur[j-1] + 1) via the prefix-min identity
        cur[1:] = np.minimum.accumulate(best - idx) + idx
        cur[1:] = np.minimum(cur[1:], best)
        prev = cur
    return int(prev[-1])


def edit_similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    denom = max(len(a), len(b))
    return 1.0 - levenshtein(a, b) / denom


def multiset_f1(a: list[str], b: list[str]) -> float:
    if not a and not b:
        return 1.0
    ca, cb = Counter(a), Counter(b)
    inter = sum(min(ca[k], cb[k]) for k in ca)
    if inter == 0:
        return 0.0
    precision = inter / sum(ca.values())
    recall = inter / sum(cb.values())
    return 2 * precision * recall / (precision + recall)


@dataclass
class ExtractedMetadata:
    title: str | None
    authors: list[str]
    abstract: str | None


def compare_metadata(extracted: ExtractedMetadata, reference) -> MetadataScores:
    """Normalized similarity scores against a reference record.

    ``reference`` needs title/authors/abstract attributes (an archive
    record or another ExtractedMetadata).  A side missing a field omits
    that score and notes it; affiliations are deliberately not scored.
    """
    scores = MetadataScores()
    ref_title = getattr(reference, "title", None)
    ref_authors = list(getattr(reference, "authors", []) or [])
    ref_abstract = getattr(reference, "abstract", None)
    if extracted.title is not None and ref_title:
        scores.title_similarity = edit_similarity(
            normalize_for_compare(extracted.title), normalize_for_compare(ref_title))
    else:
        scores.missing.append("title")
    if extracted.authors and ref_authors:
        scores.author_set_f1 = multiset_f1(
            [normalize_for_compare(a) for a in extracted.authors],
            [normalize_for_compare(a) for a in ref_authors])
    else:
        scores.missing.append("authors")
    if extracted.abstract is not None and ref_abstract:
        scores.abstract_similarity = edit_similarity(
            normalize_for_compare(extracted.abstract), normalize_for_compare(ref_abstract))
    else:
        scores.missing.append("abstract")
    return scores


def judge(structural_delta: list, body_preserved: bool,
          metadata: MetadataScores | None,
          thresholds: Thresholds = Thresholds()) -> Verdict:
    if structural_delta or not body_preserved:
        return Verdict.FAIL
    if metadata is not None:
        checks = (
            (metadata.title_similarity, thresholds.title),
            (metadata.author_set_f1, thresholds.author_f1),
            (metadata.abstract_similarity, thresholds.abstract),
        )
        for value, floor in checks:
            if value is not None and value < floor - 1e-9:
                return Verdict.WARN
        if metadata.missing:
            return Verdict.WARN
    return Verdict.PASS


def validate(original: str | bytes, converted: str | bytes, plan: RewritePlan,
             metadata: MetadataScores | None = None,
             thresholds: Thresholds = Thresholds()) -> ValidationReport:
    delta = validate_structure(original, converted)
    preserved, offset = check_body_preservation(original, converted, plan)
    verdict = judge(delta, preserved, metadata, thresholds)
    return ValidationReport(
        structural_delta=delta,
        body_preserved=preserved,
        first_difference=offset,
        metadata=metadata,
        verdict=verdict,
    )
