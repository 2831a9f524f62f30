"""Synthesize visually formatted documents from logical ones.

Each profile rewrites one logical construct into a specific visual form;
the logical elements erased along the way are captured first as a ground
truth sidecar, so a later conversion back can be scored instead of
trusted.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path

from .converter import Edit, RewritePlan, apply
from .detector import DocumentClass, classify
from .lexer import Span, decode_source, parse
from .model import LogicalDocument, extract_logical, strip_styling


class NotLogicalError(Exception):
    """The input does not classify as logical, so there is nothing to
    degrade faithfully."""


PROFILE_NAMES = (
    "centerline-style",
    "center-env",
    "numbered-markers",
    "symbol-markers",
    "unlabeled-abstract",
    "bold-solitary-sections",
    "inline-emphasis",
)

PROFILE_CODES = {
    "centerline-style": "cl",
    "center-env": "ce",
    "numbered-markers": "nm",
    "symbol-markers": "sm",
    "unlabeled-abstract": "ua",
    "bold-solitary-sections": "bs",
    "inline-emphasis": "ie",
}


@dataclass(frozen=True)
class DegradationProfile:
    name: str
    parameters: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.name not in PROFILE_NAMES:
            raise ValueError(f"unknown degradation profile {self.name!r}")

    def param(self, key: str, default: str = "") -> str:
        for k, v in self.parameters:
            if k == key:
                return v
        return default


def as_profiles(profiles) -> list[DegradationProfile]:
    out = []
    for p in profiles:
        if isinstance(p, DegradationProfile):
            out.append(p)
        else:
            out.append(DegradationProfile(str(p)))
    return sorted(out, key=lambda p: p.name)


@dataclass
class GroundTruth:
    title: str | None
    authors: list[tuple[str, list[str]]]
    abstract: str | None
    sections: list[tuple[int, str]]
    emphases: int

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "authors": [{"name": n, "affiliations": a} for n, a in self.authors],
            "abstract": self.abstract,
            "sections": [{"level": l, "heading": h} for l, h in self.sections],
            "emphases": self.emphases,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(
            title=d.get("title"),
            authors=[(a["name"], list(a["affiliations"])) for a in d.get("authors", [])],
            abstract=d.get("abstract"),
            sections=[(s["level"], s["heading"]) for s in d.get("sections", [])],
            emphases=int(d.get("emphases", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        return cls.from_dict(json.loads(text))


def capture_ground_truth(doc: LogicalDocument) -> GroundTruth:
    return GroundTruth(
        title=strip_styling(doc.title_raw) if doc.title_raw is not None else None,
        authors=[(strip_styling(a.name_raw),
                  [strip_styling(t) for t in a.affiliations_raw])
                 for a in doc.authors],
        abstract=strip_styling(doc.abstract_raw) if doc.abstract_raw is not None else None,
        sections=[(s.level, strip_styling(s.heading_raw)) for s in doc.sections],
        emphases=len(doc.emphases),
    )


def _break_before(text: str, pos: int) -> bool:
    prefix = text[:pos].rstrip(" \t")
    if not prefix:
        return True
    if prefix.endswith("\\par"):
        return True
    if prefix.endswith("\n"):
        return prefix[:-1].rstrip(" \t").endswith("\n") or not prefix[:-1].strip()
    return False


def _break_after(text: str, pos: int) -> bool:
    suffix = text[pos:].lstrip(" \t")
    if not suffix:
        return True
    if suffix.startswith("\\par"):
        return True
    if suffix.startswith("\n"):
        return suffix[1:].lstrip(" \t").startswith("\n") or not suffix[1:].strip()
    return False


# Marker alphabets.  The "text" families stay out of math mode entirely.
_NUM_FAMILIES = (
    ("$^{%s}$", "$^{%s}$"),
    ("\\textsuperscript{%s}", "\\textsuperscript{%s}"),
)
_SYM_MATH = ("*", "\\dagger", "\\ddagger", "\\S", "\\P", "\\|")
_SYM_TEXT = ("\\dag", "\\ddag", "\\S", "\\P")


class _Degrader:
    def __init__(self, text: str, profiles: list[DegradationProfile], seed: int):
        self.text = text
        self.names = {p.name for p in profiles}
        self.profiles = {p.name: p for p in profiles}
        self.rng = random.Random(seed)

    # -- pass 1: body constructs -------------------------------------------

    def degrade_sections(self, doc: LogicalDocument) -> list[Edit]:
        if "bold-solitary-sections" not in self.names or not doc.sections:
            return []
        variant = self.rng.choice(("skip-bold", "textbf-large"))
        counters = [0, 0, 0]
        edits = []
        for sec in doc.sections:
            lvl = min(sec.level, 3)
            counters[lvl - 1] += 1
            for k in range(lvl, 3):
                counters[k] = 0
            num = ".".join(str(c) for c in counters[:lvl])
            if variant == "skip-bold":
                lead = "\\medskip" if lvl == 1 else "\\smallskip"
                repl = f"{lead}\\noindent{{\\bf {num}. {sec.heading_raw}}}\\par"
                has_trailing_break = True
            else:
                if lvl == 1:
                    repl = f"\\textbf{{\\large {num} {sec.heading_raw}}}"
                else:
                    repl = f"\\textbf{{{num} {sec.heading_raw}}}"
                has_trailing_break = False
            # the header must sit in a paragraph of its own even when the
            # surrounding source has no blank lines
            if not _break_before(self.text, sec.span.start):
                repl = "\\par" + repl
            if not has_trailing_break and not _break_after(self.text, sec.span.end):
                repl = repl + "\\par"
            edits.append(Edit(sec.span, repl, "degrade-section"))
        return edits

    def degrade_emphasis(self, doc: LogicalDocument, taken: list[Span]) -> list[Edit]:
        if "inline-emphasis" not in self.names:
            return []
        edits = []
        for raw, span in doc.emphases:
            if any(t.contains_span(span) or t.intersects(span) for t in taken):
                continue
            style = "it" if self.rng.random() < 0.75 else "bf"
            edits.append(Edit(span, f"{{\\{style} {raw}}}", "degrade-emphasis"))
        return edits

    # -- pass 2: front matter ------------------------------------------------

    def fm_style(self) -> str | None:
        explicit = [n for n in ("centerline-style", "center-env") if n in self.names]
        # marker and abstract profiles need visually formatted front matter
        # to hang off, so they imply the default centerline treatment
        implied = self.marker_mode() is not None or "unlabeled-abstract" in self.names
        if not explicit and not implied:
            return None
        if len(explicit) == 2:
            return self.rng.choice(("centerline-style", "center-env"))
        if explicit:
            return explicit[0]
        return "centerline-style"

    def marker_mode(self) -> str | None:
        modes = [n for n in ("numbered-markers", "symbol-markers") if n in self.names]
        if not modes:
            return None
        if len(modes) == 2:
            return self.rng.choice(modes)
        return modes[0]

    def build_front_matter(self, doc: LogicalDocument, style: str) -> str:
        rng = self.rng
        lines: list[str] = []
        centerline = style == "centerline-style"

        title_lines: list[str] = []
        if doc.title_raw is not None:
            deco = rng.choice(("\\bf", "\\large\\bf", "\\Large\\bf", "\\Large \\bf"))
            if centerline:
                title_lines.append(f"\\centerline{{{deco} {doc.title_raw}}}")
            else:
                title_lines.append(f"{{{deco} {doc.title_raw}}}")

        # Unique affiliation texts in first-seen order; edges by index.
        aff_texts: list[str] = []
        edges: list[list[int]] = []
        for author in doc.authors:
            idxs = []
            for aff in author.affiliations_raw:
                if aff not in aff_texts:
                    aff_texts.append(aff)
                idxs.append(aff_texts.index(aff))
            edges.append(idxs)

        mode = self.marker_mode()
        use_markers = mode is not None and bool(aff_texts)
        author_lines: list[str] = []
        aff_lines: list[str] = []
        if doc.authors:
            if use_markers:
                if mode == "numbered-markers":
                    author_fmt, aff_fmt = rng.choice(_NUM_FAMILIES)
                    renderings = [str(j + 1) for j in range(len(aff_texts))]
                    author_mark = lambda idxs: author_fmt % ",".join(renderings[j] for j in idxs) if idxs else ""
                    aff_mark = lambda j: aff_fmt % renderings[j]
                else:
                    family = rng.choice(("math", "text"))
                    if family == "math":
                        syms = _SYM_MATH
                        author_mark = lambda idxs: "".join(f"$^{{{syms[j % len(syms)]}}}$" for j in idxs)
                        aff_mark = lambda j: f"$^{{{syms[j % len(syms)]}}}$"
                    else:
                        syms = _SYM_TEXT
                        author_mark = lambda idxs: "".join(syms[j % len(syms)] for j in idxs)
                        aff_mark = lambda j: syms[j % len(syms)] + " "
                marked = [a.name_raw + author_mark(idxs)
                          for a, idxs in zip(doc.authors, edges)]
                if len(marked) > 1 and rng.random() < 0.35:
                    author_lines.extend(marked)  # one line per author
                else:
                    sep = rng.choice((", ", " and ", ", "))
                    author_lines.append(sep.join(marked))
                for j, text in enumerate(aff_texts):
                    aff_lines.extend(self._affiliation_rows(aff_mark(j), text))
            elif len(aff_texts) <= 1:
                sep = rng.choice((", ", " and "))
                author_lines.append(sep.join(a.name_raw for a in doc.authors))
                for text in aff_texts:
                    aff_lines.extend(self._affiliation_rows("", text))
            else:
                # several affiliations, no markers: each author sits right
                # above its own affiliation lines
                for a in doc.authors:
                    author_lines.append(a.name_raw)
                    for text in a.affiliations_raw:
                        author_lines.extend(self._affiliation_rows("", text))

        if centerline:
            for nm in author_lines:
                title_lines.append(f"\\centerline{{{nm}}}")
            for af in aff_lines:
                title_lines.append(f"\\centerline{{{af}}}")
            joiner = rng.choice(("\n", "\n\\smallskip\n", "\n\n"))
            return joiner.join(title_lines)
        rows = title_lines + author_lines
        italic_affs = rng.random() < 0.5
        for af in aff_lines:
            rows.append(f"{{\\it {af}}}" if italic_affs else af)
        gap = rng.choice(("\\\\[2mm]", "\\\\[1mm]", "\\\\"))
        body = (gap + "\n").join(rows)
        return "\\begin{center}\n" + body + "\n\\end{center}"

    def _affiliation_rows(self, lead: str, text: str) -> list[str]:
        # Long affiliations sometimes wrap onto a continuation line, which
        # the extractor is expected to re-join.
        if len(text) > 45 and ", " in text and self.rng.random() < 0.3:
            cut = text.index(", ") + 1
            return [lead + text[:cut], text[cut:].strip()]
        return [lead + text]

    def build_abstract(self, doc: LogicalDocument) -> str | None:
        if doc.abstract_raw is None:
            return None
        rng = self.rng
        text = doc.abstract_raw
        if "unlabeled-abstract" in self.names:
            return "\\begin{center}\n{\\small " + text + "}\n\\end{center}"
        form = rng.choice(("bf-it", "bf-colon", "noindent", "label-line"))
        if form == "bf-it":
            return "{\\bf Abstract. }{\\it " + text + "}"
        if form == "bf-colon":
            return "{\\bf Abstract: }" + text
        if form == "noindent":
            return "\\noindent{\\bf ABSTRACT.} " + text
        return "\\centerline{\\bf Abstract}\n\n" + text

    def front_matter_edits(self, doc: LogicalDocument) -> list[Edit]:
        edits: list[Edit] = []
        style = self.fm_style()
        fm_active = style is not None and (doc.title_raw is not None or doc.authors)
        abstract_active = (fm_active or "unlabeled-abstract" in self.names) \
            and doc.abstract_span is not None
        rendered_abstract = self.build_abstract(doc) if abstract_active else None
        abstract_handled = False
        if fm_active:
            block = self.build_front_matter(doc, style)
            anchor = doc.maketitle_span or doc.title_span or (
                doc.author_block_spans[0] if doc.author_block_spans else None)
            if (rendered_abstract is not None and anchor is not None
                    and doc.abstract_span.start < anchor.start):
                # The source kept its abstract environment above \maketitle;
                # visually formatted papers put the abstract text below the
                # author block, so move it there.
                block = block + "\n\n" + rendered_abstract
                edits.append(Edit(doc.abstract_span, "", "degrade-abstract"))
                abstract_handled = True
            removed: list[Span] = []
            if doc.title_span is not None:
                removed.append(doc.title_span)
            if doc.date_span is not None:
                removed.append(doc.date_span)
            removed.extend(doc.author_block_spans)
            if doc.maketitle_span is not None:
                removed.append(doc.maketitle_span)
            for span in removed:
                if anchor is not None and span == anchor:
                    continue
                edits.append(Edit(span, "", "degrade-front-matter"))
            if anchor is not None:
                edits.append(Edit(anchor, block, "degrade-front-matter"))
        if rendered_abstract is not None and not abstract_handled:
            edits.append(Edit(doc.abstract_span, rendered_abstract, "degrade-abstract"))
        return edits


def degrade(source: str | bytes, profiles, seed: int = 0):
    """Rewrite a logical document into a visually formatted one.

    Returns (visual source, ground truth).  Identical inputs, profile
    sets and seeds produce identical bytes.
    """
    text = decode_source(source)
    tree = parse(text)
    if classify(tree).label is not DocumentClass.LOGICAL:
        raise NotLogicalError("input does not classify as logically formatted")
    plist = as_profiles(profiles)
    doc = extract_logical(tree)
    truth = capture_ground_truth(doc)
    worker = _Degrader(text, plist, seed)

    section_edits = worker.degrade_sections(doc)
    taken = [e.span for e in section_edits]
    emphasis_edits = worker.degrade_emphasis(doc, taken)
    pass1 = sorted(section_edits + emphasis_edits, key=lambda e: (e.span.start, e.span.end))
    stage = apply(text, RewritePlan(tuple(pass1))) if pass1 else text

    doc2 = extract_logical(parse(stage))
    pass2 = worker.front_matter_edits(doc2)
    pass2.sort(key=lambda e: (e.span.start, e.span.end))
    visual = apply(stage, RewritePlan(tuple(pass2))) if pass2 else stage

    if isinstance(source, bytes):
        return visual.encode("utf-8", errors="surrogateescape"), truth
    return visual, truth


# ---------------------------------------------------------------------------
# Corpus emission
# ---------------------------------------------------------------------------


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def profile_tag(profiles) -> str:
    return "-".join(PROFILE_CODES[p.name] for p in as_profiles(profiles))


def emit_pairs(corpus_dir: str | Path, out_dir: str | Path, profiles,
               seeds=(0,)) -> list[dict]:
    """Degrade every .tex file in a corpus once per seed, writing the
    visual file, the logical original, a ground-truth sidecar and one
    manifest row per pair.  Files that are not logical become skip
    records; the run continues."""
    corpus = Path(corpus_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plist = as_profiles(profiles)
    tag = profile_tag(plist)
    rows: list[dict] = []
    for path in sorted(corpus.glob("*.tex")):
        data = path.read_bytes()
        for seed in seeds:
            try:
                visual, truth = degrade(data, plist, seed)
            except NotLogicalError as exc:
                rows.append({
                    "source": str(path),
                    "profiles": [p.name for p in plist],
                    "seed": seed,
                    "skipped": str(exc),
                })
                continue
            stem = f"{path.stem}__{tag}_s{seed}"
            visual_path = out / f"{stem}.visual.tex"
            logical_path = out / f"{stem}.logical.tex"
            sidecar_path = out / f"{stem}.truth.json"
            visual_path.write_bytes(visual)
            logical_path.write_bytes(data)
            sidecar_path.write_text(truth.to_json(), encoding="utf-8")
            rows.append({
                "source": str(path),
                "visual": str(visual_path),
                "logical": str(logical_path),
                "sidecar": str(sidecar_path),
                "profiles": [p.name for p in plist],
                "seed": seed,
                "checksums": {
                    "source": _sha256(data),
                    "visual": _sha256(visual),
                    "sidecar": _sha256(sidecar_path.read_bytes()),
                },
            })
    manifest = out / "manifest.jsonl"
    with manifest.open("a", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return rows
