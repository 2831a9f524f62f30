"""Find visually formatted elements and classify whole documents.

Detection is context-aware on purpose: a bold group inside math, verbatim
text, a comment, or bibliographic markup is never a finding.  Every
detection carries the cues that justify it and a confidence derived from
a fixed scoring table, so rewriting can be gated conservatively.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .lexer import (
    BlockTree,
    EnvNode,
    GroupNode,
    Leaf,
    MathNode,
    Node,
    Span,
    TokenKind,
    TokenStream,
    in_any_span,
    latin1_fallback,
    protected_spans,
    walk,
)
from .model import (
    Affiliation,
    Author,
    FrontMatter,
    Marker,
    StyledText,
    extract_markers,
    resolve_affiliations,
    strip_styling,
)


class CueKind(Enum):
    CENTERED = "centered"
    BOLD = "bold"
    ITALIC = "italic"
    LARGE_FONT = "large-font"
    SOLITARY_PARAGRAPH = "solitary-paragraph"
    NUMBER_PREFIX = "number-prefix"
    MARKER_SYMBOL = "marker-symbol"
    LEADING_KEYWORD = "leading-keyword"
    NEAR_DOCUMENT_START = "near-document-start"
    INSIDE_TITLEPAGE = "inside-titlepage"


# Fixed scoring table, in integer hundredths to keep sums exact.
CUE_WEIGHTS = {
    CueKind.CENTERED: 30,
    CueKind.BOLD: 20,
    CueKind.ITALIC: 20,
    CueKind.LARGE_FONT: 20,
    CueKind.SOLITARY_PARAGRAPH: 20,
    CueKind.NUMBER_PREFIX: 20,
    CueKind.MARKER_SYMBOL: 30,
    CueKind.LEADING_KEYWORD: 40,
    CueKind.NEAR_DOCUMENT_START: 20,
    CueKind.INSIDE_TITLEPAGE: 20,
}

AUTO_APPLY_THRESHOLD = 0.5


@dataclass(frozen=True)
class Cue:
    kind: CueKind
    span: Span
    word: str = ""


class DetectionKind(Enum):
    TITLE = "title"
    AUTHOR_LINE = "author-line"
    AFFILIATION_LINE = "affiliation-line"
    ABSTRACT = "abstract"
    SECTION_HEADER = "section-header"
    EMPHASIS = "emphasis"
    THEOREM_LIKE = "theorem-like"


@dataclass
class Detection:
    kind: DetectionKind
    span: Span
    cues: frozenset[Cue]
    confidence: float
    level: int = 1
    keyword: str = ""
    data: dict = field(default_factory=dict)

    def has_cue(self, kind: CueKind) -> bool:
        return any(c.kind is kind for c in self.cues)


def score_cues(cues) -> float:
    points = sum(CUE_WEIGHTS[c.kind] for c in cues)
    return min(100, points) / 100.0


def passes(confidence: float, threshold: float) -> bool:
    return confidence + 1e-9 >= threshold


class DocumentClass(Enum):
    LOGICAL = "logical"
    MIXED = "mixed"
    VISUAL = "visual"


@dataclass(frozen=True)
class FormattingClass:
    label: DocumentClass
    score: float
    visual_count: int = 0
    logical_count: int = 0


@dataclass(frozen=True)
class Region:
    span: Span
    whole_body_fallback: bool = False

    @property
    def start(self) -> int:
        return self.span.start

    @property
    def end(self) -> int:
        return self.span.end


# ---------------------------------------------------------------------------
# Shared vocabulary
# ---------------------------------------------------------------------------

BOLD_DECLS = frozenset({"bf", "bfseries"})
ITALIC_DECLS = frozenset({"it", "itshape", "em", "sl", "slshape"})
LARGE_DECLS = frozenset({"large", "Large", "LARGE", "huge", "Huge"})
SMALL_DECLS = frozenset({"small", "footnotesize", "scriptsize", "tiny"})
ARG_STYLES = {"textbf": "bold", "textit": "italic", "textsl": "italic", "textsc": None}
DECOR_WORDS = frozenset({
    "noindent", "indent", "smallskip", "medskip", "bigskip", "vfill", "strut",
    "ignorespaces", "sloppy", "frenchspacing", "relax", "leavevmode",
})
CENTERING_DECLS = frozenset({"centering"})
SKIP_ENVIRONMENTS = frozenset({
    "thebibliography", "tabular", "tabular*", "array", "figure", "figure*",
    "table", "table*", "filecontents", "filecontents*", "thanks",
})
BIB_DENYLIST = frozenset({"bibinfo", "bibitem", "newblock", "bibliography"})

INSTITUTION_KEYWORDS = (
    "universit", "universidad", "institut", "department", "dipartimento",
    "laborator", "school", "center", "centre", "college", "academy",
    "observator", "facult",
)

ABSTRACT_LABEL_RE = re.compile(r"^(abstract|summary)\s*[.:]?\s*$", re.IGNORECASE)
THEOREM_KEYWORDS = (
    "Definition", "Theorem", "Lemma", "Proposition", "Corollary", "Remark", "Example",
)
THEOREM_LABEL_RE = re.compile(
    r"^(" + "|".join(THEOREM_KEYWORDS) + r")\s*(\d+(?:\.\d+)*)?\s*[.:]?\s*$"
)
NUMBER_PREFIX_RE = re.compile(
    r"^\s*(?:\u00a7\s*)?(?P<num>\d+(?:\.\d+)*|[IVXLC]+)\s*[.):]?(?:[\s~]+)(?P<rest>\S.*)$",
    re.DOTALL,
)
CAPTION_PREFIX_RE = re.compile(r"^(table|figure|fig\.)\b", re.IGNORECASE)

NAME_PARTICLES = frozenset({
    "van", "von", "de", "del", "della", "der", "den", "da", "di", "la", "le",
    "ter", "ten", "bin", "al", "el", "dos", "das", "du", "af", "av", "zu",
    "and",
})
_WORD_RE = re.compile(r"^[A-Z][A-Za-z'\u00c0-\u024f\-]*\.?$")

PHRASE_MAX = 160
NEAR_START_WINDOW = 500

MARKER_CONTROL_WORDS = frozenset({"dag", "ddag", "S", "P", "footnotemark",
                                  "textsuperscript", "ast", "dagger", "ddagger", "star"})

_ACCENT_STRIP = re.compile(r"\\[Huvcdbkrt]\s*\{(.{1,3})\}|\\['`\"^~=.]\s*\{?([A-Za-z])\}?")
_LETTER_STRIP = re.compile(r"\\(ss|ae|AE|oe|OE|aa|AA|o|O|l|L|i|j)(?![a-zA-Z])\s?")


def _drop_accents(text: str) -> str:
    out = _ACCENT_STRIP.sub(lambda m: m.group(1) or m.group(2) or "", text)
    out = _LETTER_STRIP.sub(lambda m: m.group(1), out)
    return out.replace("{", "").replace("}", "")


def looks_like_person_names(plain: str) -> bool:
    """2-6 capitalized words (initials, accents and name particles allowed),
    free of institution keywords."""
    flat = _drop_accents(latin1_fallback(plain)).strip().rstrip(",")
    if not flat:
        return False
    low = flat.casefold()
    if any(k in low for k in INSTITUTION_KEYWORDS):
        return False
    if "@" in flat or any(ch.isdigit() for ch in flat):
        return False
    words = flat.split()
    if not 2 <= len(words) <= 6:
        return False
    caps = 0
    for w in words:
        if w in NAME_PARTICLES:
            continue
        if not _WORD_RE.match(w):
            return False
        caps += 1
    return caps >= 1


# ---------------------------------------------------------------------------
# Line segmentation
# ---------------------------------------------------------------------------


@dataclass
class Line:
    span: Span
    content_nodes: list[Node]
    centered: bool
    in_titlepage: bool
    container: str  # "centerline" | "center-env" | "paragraph"
    container_key: int = -1
    container_span: Span | None = None
    sep_span: Span | None = None
    line_index: int = 0
    env_line_count: int = 1
    only_line_in_block: bool = True
    bold: bool = False
    italic: bool = False
    large: bool = False
    small: bool = False
    fully_wrapped: bool = False
    core_nodes: list[Node] = field(default_factory=list)
    raw: str = ""
    plain: str = ""

    @property
    def isolated(self) -> bool:
        if self.container in ("centerline", "center-env"):
            return True
        return self.only_line_in_block


def _is_neutral(nd: Node) -> bool:
    return isinstance(nd, Leaf) and nd.token.kind in (
        TokenKind.WHITESPACE, TokenKind.COMMENT, TokenKind.PAR_BREAK)


def _trim(nodes: list[Node]) -> list[Node]:
    a, b = 0, len(nodes)
    while a < b and _is_neutral(nodes[a]):
        a += 1
    while b > a and _is_neutral(nodes[b - 1]):
        b -= 1
    return nodes[a:b]


def _nodes_span(nodes: list[Node], stream: TokenStream) -> Span:
    return stream.span(nodes[0].span.start, nodes[-1].span.end)


@dataclass
class _StyleInfo:
    bold: bool = False
    italic: bool = False
    large: bool = False
    small: bool = False
    centered: bool = False
    fully_wrapped: bool = False
    core: list[Node] = field(default_factory=list)


def analyze_styles(content: list[Node]) -> _StyleInfo:
    """Peel style wrappers that cover the whole content; the remainder is
    the core.  fully_wrapped is True when no unstyled siblings remained."""
    info = _StyleInfo()
    nodes = _trim(content)
    while True:
        nodes = _trim(nodes)
        if not nodes:
            break
        head = nodes[0]
        if isinstance(head, Leaf) and head.token.kind is TokenKind.CONTROL_WORD:
            name = head.token.value or ""
            if name in DECOR_WORDS:
                nodes = nodes[1:]
                continue
            if name in CENTERING_DECLS:
                info.centered = True
                nodes = nodes[1:]
                continue
            if name in BOLD_DECLS:
                info.bold = True
                nodes = nodes[1:]
                continue
            if name in ITALIC_DECLS:
                info.italic = True
                nodes = nodes[1:]
                continue
            if name in LARGE_DECLS:
                info.large = True
                nodes = nodes[1:]
                continue
            if name in SMALL_DECLS:
                info.small = True
                nodes = nodes[1:]
                continue
            if name in ARG_STYLES:
                rest = _trim(nodes[1:])
                if len(rest) == 1 and isinstance(rest[0], GroupNode):
                    style = ARG_STYLES[name]
                    if style == "bold":
                        info.bold = True
                    elif style == "italic":
                        info.italic = True
                    nodes = rest[0].children
                    continue
        if len(nodes) == 1 and isinstance(nodes[0], GroupNode):
            nodes = nodes[0].children
            continue
        break
    # Styles are only recorded for wrappers that covered the whole
    # remainder, so any recorded style means the core is fully wrapped.
    info.core = _trim(nodes)
    info.fully_wrapped = True
    return info


class _Segmenter:
    def __init__(self, stream: TokenStream):
        self.stream = stream
        self.lines: list[Line] = []

    def run(self, nodes: list[Node], in_titlepage: bool = False) -> list[Line]:
        for block in self._blocks(nodes):
            self._emit_block(block, in_titlepage)
        return self.lines

    @staticmethod
    def _blocks(nodes: list[Node]):
        block: list[Node] = []
        for nd in nodes:
            if isinstance(nd, Leaf) and (
                nd.token.kind is TokenKind.PAR_BREAK or nd.token.is_control_word("par")
            ):
                if _trim(block):
                    yield _trim(block)
                block = []
            else:
                block.append(nd)
        if _trim(block):
            yield _trim(block)

    def _emit_block(self, block: list[Node], in_titlepage: bool):
        first = len(self.lines)
        buf: list[Node] = []

        def flush():
            content = _trim(buf)
            if content:
                self._add_line(content, centered=False, in_titlepage=in_titlepage,
                               container="paragraph")
            buf.clear()

        i = 0
        while i < len(block):
            nd = block[i]
            if isinstance(nd, Leaf) and nd.token.is_control_word("centerline"):
                j = i + 1
                while j < len(block) and _is_neutral(block[j]):
                    j += 1
                if j < len(block) and isinstance(block[j], GroupNode):
                    flush()
                    group = block[j]
                    self._add_line(
                        group.children, centered=True, in_titlepage=in_titlepage,
                        container="centerline",
                        span=self.stream.span(nd.span.start, group.span.end),
                    )
                    i = j + 1
                    continue
            if isinstance(nd, EnvNode) and nd.name in ("center", "centering"):
                flush()
                self._center_env(nd, in_titlepage)
                i += 1
                continue
            if isinstance(nd, EnvNode) and nd.name == "titlepage":
                flush()
                for sub in self._blocks(nd.children):
                    self._emit_block(sub, True)
                i += 1
                continue
            buf.append(nd)
            i += 1
        flush()
        emitted = self.lines[first:]
        for ln in emitted:
            ln.only_line_in_block = len(emitted) == 1

    def _center_env(self, env: EnvNode, in_titlepage: bool):
        rows: list[tuple[list[Node], Span | None]] = []
        current: list[Node] = []
        children = list(env.children)
        i = 0
        while i < len(children):
            nd = children[i]
            is_break = isinstance(nd, Leaf) and (
                (nd.token.kind is TokenKind.CONTROL_SYMBOL and nd.token.value == "\\")
                or nd.token.kind is TokenKind.PAR_BREAK
            )
            if is_break:
                sep_start, sep_end = nd.span.start, nd.span.end
                if (isinstance(nd, Leaf) and nd.token.kind is TokenKind.CONTROL_SYMBOL
                        and i + 1 < len(children)):
                    nxt = children[i + 1]
                    if isinstance(nxt, Leaf) and nxt.token.kind is TokenKind.TEXT:
                        m = re.match(r"\[[^\]]*\]", nxt.token.value or "")
                        if m and m.end() == len(nxt.token.value or ""):
                            sep_end = nxt.span.end
                            i += 1
                rows.append((current, Span(sep_start, sep_end)))
                current = []
            else:
                current.append(nd)
            i += 1
        rows.append((current, None))
        made = []
        for content, sep in rows:
            content = _trim(content)
            if not content:
                continue
            made.append(self._add_line(
                content, centered=True, in_titlepage=in_titlepage,
                container="center-env", container_key=env.span.start,
                container_span=env.span, sep_span=sep,
            ))
        for idx, ln in enumerate(made):
            ln.line_index = idx
            ln.env_line_count = len(made)

    def _add_line(self, content: list[Node], *, centered: bool, in_titlepage: bool,
                  container: str, span: Span | None = None, container_key: int = -1,
                  container_span: Span | None = None, sep_span: Span | None = None) -> Line:
        stream = self.stream
        if span is None:
            span = _nodes_span(content, stream)
        info = analyze_styles(content)
        raw = stream.text(span)
        line = Line(
            span=span,
            content_nodes=content,
            centered=centered or info.centered,
            in_titlepage=in_titlepage,
            container=container,
            container_key=container_key,
            container_span=container_span,
            sep_span=sep_span,
            bold=info.bold,
            italic=info.italic,
            large=info.large,
            small=info.small,
            fully_wrapped=info.fully_wrapped,
            core_nodes=info.core,
            raw=raw,
            plain=strip_styling(raw),
        )
        self.lines.append(line)
        return line


def document_body(tree: BlockTree) -> tuple[list[Node], Span]:
    for nd in tree.nodes:
        if isinstance(nd, EnvNode) and nd.name == "document":
            return nd.children, nd.inner
    end = len(tree.stream.source)
    return tree.nodes, tree.stream.span(0, end) if end else Span(0, 0, 1)


def segment_lines(tree: BlockTree, region: Region) -> list[Line]:
    nodes, _ = document_body(tree)
    selected = [nd for nd in nodes
                if region.span.start <= nd.span.start < region.span.end]
    return _Segmenter(tree.stream).run(selected)


def _core_raw(line: Line, stream: TokenStream) -> str:
    if not line.core_nodes:
        return ""
    span = _nodes_span(line.core_nodes, stream)
    return stream.text(span)


def _has_control_word(tree: BlockTree, *names: str) -> bool:
    prot = tree.stream.verbatim_spans
    for nd in walk(tree.nodes):
        if isinstance(nd, Leaf) and nd.token.kind is TokenKind.CONTROL_WORD:
            if nd.token.value in names and not in_any_span(nd.span.start, prot):
                return True
    return False


def _has_environment(tree: BlockTree, name: str) -> bool:
    return any(isinstance(nd, EnvNode) and nd.name == name for nd in walk(tree.nodes))


_STRUCTURE_WORDS = frozenset({
    "title", "author", "maketitle", "thanks", "affiliation", "address",
    "institute", "date", "section", "subsection", "subsubsection", "abstract",
})


def _line_has_logical_commands(line: "Line") -> bool:
    """Lines already carrying structural commands are never candidates;
    this also keeps a second conversion pass from re-claiming its own
    output."""
    for nd in walk(line.content_nodes):
        if isinstance(nd, Leaf) and nd.token.kind is TokenKind.CONTROL_WORD:
            if (nd.token.value or "") in _STRUCTURE_WORDS:
                return True
        elif isinstance(nd, EnvNode) and nd.name == "abstract":
            return True
    return False


def _containment_ok(span: Span, protected: list[Span]) -> bool:
    """Protected spans may sit wholly inside the candidate (they travel
    verbatim through a rewrite) but must never straddle its edges."""
    for p in protected:
        if p.start >= span.end:
            break
        if p.intersects(span) and not span.contains_span(p):
            return False
    return True


def _disjoint(span: Span, protected: list[Span]) -> bool:
    return not any(p.intersects(span) for p in protected)


# ---------------------------------------------------------------------------
# Marker scanning on lines
# ---------------------------------------------------------------------------


@dataclass
class Segment:
    span: Span
    name_raw: str
    name_plain: str
    markers: list[Marker]
    marker_spans: list[Span]
    leading_marker: bool


def _marker_construct(nodes: list[Node], i: int, stream: TokenStream) -> tuple[list[Marker], Span] | None:
    nd = nodes[i]
    if isinstance(nd, MathNode):
        found = extract_markers(stream.text(nd.span))
        if found:
            return found, nd.span
        return None
    if isinstance(nd, Leaf) and nd.token.kind is TokenKind.CONTROL_WORD:
        name = nd.token.value or ""
        if name in ("dag", "ddag", "S", "P", "ast", "dagger", "ddagger", "star"):
            found = extract_markers("\\" + name)
            if found:
                return found, nd.span
        if name == "footnotemark":
            j = i + 1
            if j < len(nodes) and isinstance(nodes[j], Leaf) \
                    and nodes[j].token.kind is TokenKind.TEXT:
                m = re.match(r"\[\s*([0-9]+|\*+)\s*\]", nodes[j].token.value or "")
                if m:
                    rendering = "\\footnotemark" + m.group(0)
                    found = extract_markers(rendering)
                    if found:
                        return found, Span(nd.span.start, nodes[j].span.start + m.end())
        if name == "textsuperscript":
            j = i + 1
            while j < len(nodes) and _is_neutral(nodes[j]):
                j += 1
            if j < len(nodes) and isinstance(nodes[j], GroupNode):
                found = extract_markers(stream.text(Span(nd.span.start, nodes[j].span.end)))
                if found:
                    return found, Span(nd.span.start, nodes[j].span.end)
    return None


def _scan_segment(nodes: list[Node], span: Span, stream: TokenStream,
                  strip_commas: bool = True) -> Segment:
    markers: list[Marker] = []
    spans: list[Span] = []
    leading = False
    i = 0
    first_real = True
    while i < len(nodes):
        nd = nodes[i]
        if _is_neutral(nd):
            i += 1
            continue
        hit = _marker_construct(nodes, i, stream)
        if hit:
            found, mspan = hit
            markers.extend(found)
            spans.append(mspan)
            if first_real:
                leading = True
            while i < len(nodes) and nodes[i].span.start < mspan.end:
                i += 1
            first_real = False
            continue
        first_real = False
        i += 1
    src = stream.source
    parts = []
    pos = span.start
    for s in sorted(spans, key=lambda s: s.start):
        parts.append(src[pos:s.start])
        pos = s.end
    parts.append(src[pos:span.end])
    name_raw = "".join(parts).strip()
    name_raw = re.sub(r"\s+,", ",", name_raw).strip()
    if strip_commas:
        name_raw = name_raw.strip(",").strip()
    return Segment(
        span=span,
        name_raw=name_raw,
        name_plain=strip_styling(name_raw),
        markers=markers,
        marker_spans=spans,
        leading_marker=leading,
    )


_AND_SPLIT = re.compile(r",|\s+and\s+")


def split_author_segments(line: Line, stream: TokenStream) -> list[Segment]:
    """Split a line's core on top-level separators; each piece keeps the
    marker constructs found inside it."""
    nodes = line.core_nodes
    if not nodes:
        return []
    whole = _nodes_span(nodes, stream)
    cuts: list[tuple[int, int]] = []
    # Textual separators are matched over the joined top-level text so a
    # separator may straddle token boundaries; anything inside a group,
    # math or command argument is off limits.
    mask: list[tuple[int, int]] = []
    for nd in nodes:
        if isinstance(nd, Leaf) and nd.token.kind is TokenKind.CONTROL_WORD \
                and nd.token.value in ("and", "quad", "qquad"):
            cuts.append((nd.span.start, nd.span.end))
        elif isinstance(nd, Leaf) and nd.token.kind in (TokenKind.TEXT, TokenKind.WHITESPACE):
            if mask and mask[-1][1] == nd.span.start:
                mask[-1] = (mask[-1][0], nd.span.end)
            else:
                mask.append((nd.span.start, nd.span.end))
    raw = stream.text(whole)
    for m in _AND_SPLIT.finditer(raw):
        a, b = whole.start + m.start(), whole.start + m.end()
        if any(r0 <= a and b <= r1 for r0, r1 in mask):
            cuts.append((a, b))
    cuts.sort()
    whole = _nodes_span(nodes, stream)
    bounds = [whole.start]
    for s, e in cuts:
        bounds.extend([s, e])
    bounds.append(whole.end)
    segments = []
    for k in range(0, len(bounds), 2):
        a, b = bounds[k], bounds[k + 1]
        if b <= a:
            continue
        # Separators may fall inside a text token, so the segment range is
        # character-based; marker constructs never straddle a separator.
        seg_nodes = [nd for nd in nodes if nd.span.start >= a and nd.span.end <= b]
        seg = _scan_segment(seg_nodes, stream.span(a, b), stream)
        if seg.name_raw or seg.markers:
            segments.append(seg)
    return segments


# ---------------------------------------------------------------------------
# Front-matter region
# ---------------------------------------------------------------------------


def frontmatter_region(tree: BlockTree) -> Region:
    """Span from the start of the document body to the earliest of the
    first sectioning command, an existing \\maketitle, the end of the
    abstract, or the end of a titlepage environment."""
    nodes, body = document_body(tree)
    boundaries: list[int] = []
    for nd in walk(nodes):
        if isinstance(nd, Leaf) and nd.token.kind is TokenKind.CONTROL_WORD:
            if nd.token.value in ("section", "subsection", "subsubsection", "maketitle"):
                boundaries.append(nd.span.start)
        elif isinstance(nd, EnvNode) and nd.name in ("titlepage", "abstract"):
            boundaries.append(nd.span.end)
    end = min(boundaries) if boundaries else body.end
    fallback = not boundaries
    coarse = Region(tree.stream.span(body.start, end), fallback)
    det = detect_abstract(tree, coarse)
    if det is not None:
        construct_end = det.data.get("construct_end", det.span.end)
        if construct_end < end:
            end = construct_end
            fallback = False
    return Region(tree.stream.span(body.start, end), fallback)


def body_region(tree: BlockTree, fm: Region) -> Region:
    _, body = document_body(tree)
    return Region(tree.stream.span(fm.span.end, body.end))


# ---------------------------------------------------------------------------
# Detection operations
# ---------------------------------------------------------------------------


def _line_cues(line: Line, stream: TokenStream) -> set[Cue]:
    cues: set[Cue] = set()
    if line.centered:
        cues.add(Cue(CueKind.CENTERED, line.span))
    if line.bold:
        cues.add(Cue(CueKind.BOLD, line.span))
    if line.italic:
        cues.add(Cue(CueKind.ITALIC, line.span))
    if line.large:
        cues.add(Cue(CueKind.LARGE_FONT, line.span))
    if line.isolated and len(line.plain) <= PHRASE_MAX:
        cues.add(Cue(CueKind.SOLITARY_PARAGRAPH, line.span))
    if line.in_titlepage:
        cues.add(Cue(CueKind.INSIDE_TITLEPAGE, line.span))
    return cues


def detect_title(tree: BlockTree, region: Region) -> list[Detection]:
    """Title candidates ranked by confidence, then position."""
    if _has_control_word(tree, "title"):
        return []
    protected = protected_spans(tree)
    stream = tree.stream
    out: list[Detection] = []
    for line in segment_lines(tree, region):
        if not (line.centered or line.bold or line.large):
            continue
        plain = line.plain
        if not 1 <= len(plain) <= 250:
            continue
        if ABSTRACT_LABEL_RE.match(plain):
            continue
        if _line_has_logical_commands(line):
            continue
        if not _containment_ok(line.span, protected):
            continue
        segs = split_author_segments(line, stream)
        if segs and segs[0].leading_marker:
            continue
        cues = _line_cues(line, stream)
        if line.span.start - region.span.start <= NEAR_START_WINDOW:
            cues.add(Cue(CueKind.NEAR_DOCUMENT_START, line.span))
        out.append(Detection(
            DetectionKind.TITLE,
            line.span,
            frozenset(cues),
            score_cues(cues),
            data={"core_raw": _core_raw(line, stream), "line": line},
        ))
    out.sort(key=lambda d: (-d.confidence, d.span.start))
    return out


def detect_authors_affiliations(
    tree: BlockTree, region: Region, title: Detection | None,
) -> tuple[list[Detection], list[Detection]]:
    """Author lines (name-shaped, optionally markered) and affiliation
    lines (institution keywords or marker-led), searched below the title."""
    stream = tree.stream
    protected = protected_spans(tree)
    authors_suppressed = _has_control_word(tree, "author")
    affils_suppressed = authors_suppressed or _has_control_word(
        tree, "affiliation", "address", "institute")
    start = title.span.end if title is not None else region.span.start
    author_dets: list[Detection] = []
    affil_dets: list[Detection] = []
    for line in segment_lines(tree, region):
        if line.span.start < start:
            continue
        plain = line.plain
        if not plain or len(plain) > 250:
            continue
        if ABSTRACT_LABEL_RE.match(plain):
            continue
        label_hit = _leading_label(line, stream)
        if label_hit is not None and ABSTRACT_LABEL_RE.match(label_hit[0]["plain"]):
            continue  # an abstract-labeled paragraph, not a person or place
        if _line_has_logical_commands(line):
            continue
        if not _containment_ok(line.span, protected):
            continue
        segs = split_author_segments(line, stream)
        if not segs:
            continue
        low = plain.casefold()
        keyworded = any(k in low for k in INSTITUTION_KEYWORDS)
        leading = segs[0].leading_marker
        cues = _line_cues(line, stream)
        marker_spans = [s for seg in segs for s in seg.marker_spans]
        if marker_spans:
            cues.add(Cue(CueKind.MARKER_SYMBOL, marker_spans[0]))
        if keyworded or leading:
            if affils_suppressed:
                continue
            whole = _scan_segment(
                line.core_nodes, _nodes_span(line.core_nodes, stream), stream,
                strip_commas=False) if line.core_nodes else None
            if whole is None:
                continue
            affil_dets.append(Detection(
                DetectionKind.AFFILIATION_LINE,
                line.span,
                frozenset(cues),
                score_cues(cues),
                data={
                    "text_raw": whole.name_raw,
                    "marker": whole.markers[0] if whole.leading_marker and whole.markers else None,
                    "line": line,
                },
            ))
            continue
        if authors_suppressed:
            continue
        if len(segs) > 8:
            continue
        if all(looks_like_person_names(s.name_plain) for s in segs):
            author_dets.append(Detection(
                DetectionKind.AUTHOR_LINE,
                line.span,
                frozenset(cues),
                score_cues(cues),
                data={"segments": segs, "line": line},
            ))
    return author_dets, affil_dets


def _leading_label(line: Line, stream: TokenStream):
    """A styled keyword construct opening the line: ({label span, styles,
    keyword}, content nodes) or None."""
    nodes = _trim(line.content_nodes)
    while nodes and isinstance(nodes[0], Leaf) \
            and nodes[0].token.kind is TokenKind.CONTROL_WORD \
            and (nodes[0].token.value or "") in DECOR_WORDS:
        nodes = _trim(nodes[1:])
    if not nodes:
        return None
    head = nodes[0]
    label_nodes: list[Node] | None = None
    rest_index = 1
    if isinstance(head, GroupNode):
        label_nodes = [head]
    elif isinstance(head, Leaf) and head.token.kind is TokenKind.CONTROL_WORD \
            and (head.token.value or "") in ARG_STYLES:
        rest = _trim(nodes[1:])
        if rest and isinstance(rest[0], GroupNode):
            label_nodes = [head, rest[0]]
            for pos, cand in enumerate(nodes):
                if cand is rest[0]:
                    rest_index = pos + 1
                    break
    if label_nodes is None:
        return None
    info = analyze_styles(label_nodes)
    if not info.core:
        return None
    label_span = _nodes_span(label_nodes, stream)
    label_plain = strip_styling(stream.text(label_span))
    content = _trim(nodes[rest_index:])
    return {
        "span": label_span,
        "plain": label_plain,
        "bold": info.bold,
        "italic": info.italic,
    }, content


def detect_abstract(tree: BlockTree, region: Region) -> Detection | None:
    """The abstract: a keyword-labeled paragraph, a label line followed by
    a paragraph, or an unlabeled centered paragraph (below the auto-apply
    threshold on its own)."""
    if _has_environment(tree, "abstract"):
        return None
    stream = tree.stream
    protected = protected_spans(tree)
    lines = segment_lines(tree, region)
    candidates: list[Detection] = []
    trailing_titlepage: Line | None = None
    for ln in lines:
        if ln.in_titlepage and ln.container == "paragraph" and len(ln.plain) >= 80 \
                and not _line_has_logical_commands(ln):
            trailing_titlepage = ln
    for idx, line in enumerate(lines):
        if _line_has_logical_commands(line):
            continue
        if not _containment_ok(line.span, protected):
            continue
        label_hit = _leading_label(line, stream)
        if label_hit is not None:
            label, content = label_hit
            if ABSTRACT_LABEL_RE.match(label["plain"]) and content:
                cues = {Cue(CueKind.LEADING_KEYWORD, label["span"], "Abstract")}
                if label["bold"]:
                    cues.add(Cue(CueKind.BOLD, label["span"]))
                content_span = _nodes_span(content, stream)
                cinfo = analyze_styles(content)
                if cinfo.italic or label["italic"]:
                    cues.add(Cue(CueKind.ITALIC, content_span))
                if line.centered:
                    cues.add(Cue(CueKind.CENTERED, line.span))
                if line.in_titlepage:
                    cues.add(Cue(CueKind.INSIDE_TITLEPAGE, line.span))
                content_raw = stream.text(_nodes_span(cinfo.core, stream)) if cinfo.core else ""
                candidates.append(Detection(
                    DetectionKind.ABSTRACT,
                    content_span,
                    frozenset(cues),
                    score_cues(cues),
                    data={
                        "label_span": label["span"],
                        "content_raw": content_raw.strip(),
                        "construct_end": line.span.end,
                    },
                ))
                continue
        if ABSTRACT_LABEL_RE.match(line.plain) and (line.bold or line.italic or line.centered):
            nxt = lines[idx + 1] if idx + 1 < len(lines) else None
            if nxt is not None and nxt.container == "paragraph" and len(nxt.plain) >= 40 \
                    and _containment_ok(nxt.span, protected):
                cues = {Cue(CueKind.LEADING_KEYWORD, line.span, "Abstract")}
                if line.bold:
                    cues.add(Cue(CueKind.BOLD, line.span))
                if line.italic:
                    cues.add(Cue(CueKind.ITALIC, line.span))
                if line.centered:
                    cues.add(Cue(CueKind.CENTERED, line.span))
                ninfo = analyze_styles(nxt.content_nodes)
                content_raw = stream.text(_nodes_span(ninfo.core, stream)) if ninfo.core else nxt.raw
                candidates.append(Detection(
                    DetectionKind.ABSTRACT,
                    nxt.span,
                    frozenset(cues),
                    score_cues(cues),
                    data={
                        "label_span": line.span,
                        "content_raw": content_raw.strip(),
                        "construct_end": nxt.span.end,
                    },
                ))
                continue
        unlabeled_centered = (line.centered and len(line.plain) >= 60
                              and line.container != "centerline")
        if unlabeled_centered or line is trailing_titlepage:
            # Unlabeled paragraph: long centered running text, or the
            # trailing paragraph of a titlepage; never a marker-led line,
            # an institution line or a list of person names.
            segs = split_author_segments(line, stream)
            if segs and segs[0].leading_marker:
                continue
            if any(k in line.plain[:60].casefold() for k in INSTITUTION_KEYWORDS):
                continue
            if segs and len(segs) <= 8 and \
                    all(looks_like_person_names(s.name_plain) for s in segs):
                continue
            cues = set()
            if line.centered:
                cues.add(Cue(CueKind.CENTERED, line.span))
            if line.in_titlepage:
                cues.add(Cue(CueKind.INSIDE_TITLEPAGE, line.span))
            if not cues:
                continue
            info = analyze_styles(line.content_nodes)
            content_raw = stream.text(_nodes_span(info.core, stream)) if info.core else line.raw
            span = line.container_span if (
                line.container == "center-env" and line.env_line_count == 1) else line.span
            candidates.append(Detection(
                DetectionKind.ABSTRACT,
                line.span,
                frozenset(cues),
                score_cues(cues),
                data={
                    "label_span": None,
                    "content_raw": content_raw.strip(),
                    "construct_end": span.end if span else line.span.end,
                    "replace_span": span,
                },
            ))
    if not candidates:
        return None
    candidates.sort(key=lambda d: (-d.confidence, d.span.start))
    return candidates[0]


def _number_prefix(core_plain: str, core_raw: str):
    m = NUMBER_PREFIX_RE.match(core_plain)
    if not m:
        return None
    num = m.group("num")
    raw_m = re.match(
        r"^\s*(?:\u00a7\s*)?" + re.escape(num) + r"\s*[.):]?(?:[\s~]+)", core_raw)
    heading_raw = core_raw[raw_m.end():] if raw_m else m.group("rest")
    if num.isdigit() or "." in num:
        level = min(num.rstrip(".").count(".") + 1, 3)
    else:
        level = 1
    return num, level, heading_raw.strip()


def detect_section_headers(tree: BlockTree, region: Region) -> list[Detection]:
    """Solitary bold/large paragraphs in the body, optionally number
    prefixed; level follows the numbering depth."""
    stream = tree.stream
    protected = protected_spans(tree)
    damaged = [d.span for d in tree.diagnostics]
    out: list[Detection] = []
    for line in segment_lines(tree, region):
        if line.container != "paragraph" or not line.only_line_in_block:
            continue
        if not line.fully_wrapped or not (line.bold or line.large):
            continue
        if not line.core_nodes:
            continue
        if not _disjoint(line.span, protected) or not _disjoint(line.span, damaged):
            continue
        core_raw = _core_raw(line, stream)
        core_plain = strip_styling(core_raw)
        if not core_plain or len(core_plain) > 120:
            continue
        if CAPTION_PREFIX_RE.match(core_plain):
            continue
        if THEOREM_LABEL_RE.match(core_plain):
            continue
        if any(isinstance(nd, Leaf) and nd.token.kind is TokenKind.CONTROL_WORD
               and (nd.token.value or "") in BIB_DENYLIST
               for nd in walk(line.content_nodes)):
            continue
        cues = {Cue(CueKind.SOLITARY_PARAGRAPH, line.span)}
        if line.bold:
            cues.add(Cue(CueKind.BOLD, line.span))
        if line.large:
            cues.add(Cue(CueKind.LARGE_FONT, line.span))
        if line.italic:
            cues.add(Cue(CueKind.ITALIC, line.span))
        numbered = _number_prefix(core_plain, core_raw)
        if numbered:
            num, level, heading_raw = numbered
            cues.add(Cue(CueKind.NUMBER_PREFIX, line.span, num))
        else:
            level, heading_raw = 1, core_raw.strip()
        out.append(Detection(
            DetectionKind.SECTION_HEADER,
            line.span,
            frozenset(cues),
            score_cues(cues),
            level=level,
            data={"heading_raw": heading_raw, "numbered": bool(numbered)},
        ))
    return out


def _env_context_skip(tree: BlockTree) -> list[Span]:
    return [nd.span for nd in walk(tree.nodes)
            if isinstance(nd, EnvNode) and nd.name in SKIP_ENVIRONMENTS]


def detect_emphasis_and_theorems(tree: BlockTree, region: Region) -> list[Detection]:
    """Old-style {\\bf ...}/{\\it ...} groups in running text, and
    paragraphs opened by a bold theorem-like keyword."""
    stream = tree.stream
    protected = protected_spans(tree)
    skip_spans = _env_context_skip(tree)
    # Anything touched by a structural diagnostic (unclosed group, stray
    # \end, ...) is damaged; rewriting it could drag an environment
    # boundary inside a command argument.
    damaged = [d.span for d in tree.diagnostics]
    out: list[Detection] = []
    claimed: list[Span] = []

    lines = segment_lines(tree, region)
    for line in lines:
        if line.container != "paragraph":
            continue
        if line.only_line_in_block and line.fully_wrapped and (line.bold or line.large):
            claimed.append(line.span)  # section candidates are not emphasis
            continue
        label_hit = _leading_label(line, stream)
        if label_hit is None:
            continue
        label, content = label_hit
        if not label["bold"] or not content:
            continue
        m = THEOREM_LABEL_RE.match(label["plain"])
        if not m:
            continue
        if not _disjoint(line.span, protected) or not _disjoint(line.span, damaged):
            claimed.append(label["span"])
            continue
        keyword = m.group(1)
        content_span = _nodes_span(content, stream)
        content_raw = stream.text(content_span).lstrip(" .:-\u2014")
        cues = {
            Cue(CueKind.BOLD, label["span"]),
            Cue(CueKind.LEADING_KEYWORD, label["span"], keyword),
        }
        out.append(Detection(
            DetectionKind.THEOREM_LIKE,
            line.span,
            frozenset(cues),
            score_cues(cues),
            keyword=keyword,
            data={"content_raw": content_raw.strip(), "label_span": label["span"]},
        ))
        claimed.append(label["span"])

    def group_candidates(nodes: list[Node]):
        for nd in nodes:
            if isinstance(nd, EnvNode):
                if nd.name in SKIP_ENVIRONMENTS:
                    continue
                yield from group_candidates(nd.children)
            elif isinstance(nd, GroupNode):
                if not (region.span.start <= nd.span.start < region.span.end):
                    yield from group_candidates(nd.children)
                    continue
                style = _old_style_group(nd)
                if style is not None:
                    yield nd, style
                else:
                    yield from group_candidates(nd.children)

    def _old_style_group(group: GroupNode):
        kids = _trim(group.children)
        if not kids:
            return None
        head = kids[0]
        if isinstance(head, Leaf) and head.token.kind is TokenKind.CONTROL_WORD:
            name = head.token.value or ""
            if name in BOLD_DECLS:
                return "bold"
            if name in ITALIC_DECLS:
                return "italic"
        return None

    body_nodes, _ = document_body(tree)
    for group, style in group_candidates(body_nodes):
        span = group.span
        if any(c.contains_span(span) or c.intersects(span) for c in claimed):
            continue
        if not _disjoint(span, protected) or not _disjoint(span, damaged):
            continue
        if any(s.contains_span(span) for s in skip_spans):
            continue
        info = analyze_styles([group])
        if not info.core:
            continue
        if any(isinstance(nd, Leaf) and nd.token.kind is TokenKind.CONTROL_WORD
               and (nd.token.value or "") in (BIB_DENYLIST | {"begin", "end"})
               for nd in walk(group.children)):
            continue
        content_span = _nodes_span(info.core, stream)
        content_raw = stream.text(content_span)
        plain = strip_styling(content_raw)
        if not plain:
            continue
        cues = set()
        if info.bold:
            cues.add(Cue(CueKind.BOLD, span))
        if info.italic:
            cues.add(Cue(CueKind.ITALIC, span))
        out.append(Detection(
            DetectionKind.EMPHASIS,
            span,
            frozenset(cues),
            score_cues(cues),
            data={"content_raw": content_raw.strip()},
        ))
    out.sort(key=lambda d: d.span.start)
    return out


# ---------------------------------------------------------------------------
# Whole-document runs
# ---------------------------------------------------------------------------


@dataclass
class DetectionSet:
    region: Region
    title_candidates: list[Detection]
    title: Detection | None
    authors: list[Detection]
    affiliations: list[Detection]
    abstract: Detection | None
    sections: list[Detection]
    emphases: list[Detection]
    theorems: list[Detection]

    def all(self) -> list[Detection]:
        items: list[Detection] = []
        items.extend(self.title_candidates)
        items.extend(self.authors)
        items.extend(self.affiliations)
        if self.abstract:
            items.append(self.abstract)
        items.extend(self.sections)
        items.extend(self.emphases)
        items.extend(self.theorems)
        return items


def detect_all(tree: BlockTree) -> DetectionSet:
    region = frontmatter_region(tree)
    titles = detect_title(tree, region)
    chosen = titles[0] if titles else None
    authors, affils = detect_authors_affiliations(tree, region, chosen)
    abstract = detect_abstract(tree, region)
    body = body_region(tree, region)
    sections = detect_section_headers(tree, body)
    emph_thm = detect_emphasis_and_theorems(tree, body)
    return DetectionSet(
        region=region,
        title_candidates=titles,
        title=chosen,
        authors=authors,
        affiliations=affils,
        abstract=abstract,
        sections=sections,
        emphases=[d for d in emph_thm if d.kind is DetectionKind.EMPHASIS],
        theorems=[d for d in emph_thm if d.kind is DetectionKind.THEOREM_LIKE],
    )


_LOGICAL_STRUCTURE_WORDS = ("title", "author", "maketitle",
                            "section", "subsection", "subsubsection")
_LOGICAL_FRONTMATTER_WORDS = ("title", "author", "maketitle", "date",
                              "thanks", "affiliation", "address", "institute")


def classify(tree: BlockTree) -> FormattingClass:
    """Logical / Mixed / Visual, scored as the fraction of structural
    elements that are expressed visually."""
    dets = detect_all(tree)
    structural: list[Detection] = []
    if dets.title is not None:
        structural.append(dets.title)
    structural.extend(dets.authors)
    structural.extend(dets.affiliations)
    if dets.abstract is not None:
        structural.append(dets.abstract)
    structural.extend(dets.sections)
    structural.extend(dets.theorems)
    visual = len(structural) + len(dets.emphases)

    logical = 0
    verbatim = tree.stream.verbatim_spans
    for nd in walk(tree.nodes):
        if isinstance(nd, Leaf) and nd.token.kind is TokenKind.CONTROL_WORD:
            if (nd.token.value or "") in _LOGICAL_STRUCTURE_WORDS \
                    and not in_any_span(nd.span.start, verbatim):
                logical += 1
        elif isinstance(nd, EnvNode) and nd.name == "abstract":
            logical += 1

    score = visual / (visual + logical) if visual else 0.0
    if visual == 0:
        return FormattingClass(DocumentClass.LOGICAL, 0.0, visual, logical)
    fm_logical = _has_control_word(tree, *_LOGICAL_FRONTMATTER_WORDS) \
        or _has_environment(tree, "abstract")
    if score >= 0.8 and not fm_logical:
        return FormattingClass(DocumentClass.VISUAL, score, visual, logical)
    return FormattingClass(DocumentClass.MIXED, score, visual, logical)


def extract_frontmatter(tree: BlockTree, dets: DetectionSet) -> FrontMatter:
    """Assemble authors, affiliations and their mapping from detections."""
    fm = FrontMatter()
    region = dets.region
    fm.frontmatter_end = Span(region.span.end, region.span.end,
                              tree.stream.line_of(region.span.end))
    if dets.title is not None:
        fm.title = StyledText.from_raw(dets.title.data.get("core_raw", ""))
        fm.title_span = dets.title.span
    for det in dets.authors:
        for seg in det.data.get("segments", []):
            fm.authors.append(Author(
                name=StyledText.from_raw(seg.name_raw),
                markers=set(seg.markers),
                span=seg.span,
            ))
    prev_line_for_merge: dict | None = None
    for det in dets.affiliations:
        marker = det.data.get("marker")
        text_raw = det.data.get("text_raw", "")
        mergeable = (
            marker is None
            and fm.affiliations
            and prev_line_for_merge is not None
            and (prev_line_for_merge["had_marker"]
                 or prev_line_for_merge["text"].rstrip().endswith(","))
        )
        if mergeable:
            prev = fm.affiliations[-1]
            joined = prev.text.raw + " " + text_raw
            fm.affiliations[-1] = Affiliation(
                text=StyledText.from_raw(joined),
                marker=prev.marker,
                span=prev.span,
            )
            prev_line_for_merge = {"had_marker": prev.marker is not None,
                                   "text": joined}
            continue
        fm.affiliations.append(Affiliation(
            text=StyledText.from_raw(text_raw),
            marker=marker,
            span=det.span,
        ))
        prev_line_for_merge = {"had_marker": marker is not None, "text": text_raw}
    resolution = resolve_affiliations(fm.authors, fm.affiliations)
    fm.author_affiliation_edges = resolution.edges
    fm.unresolved_markers = resolution.unresolved
    fm.notes = list(resolution.notes)
    if dets.abstract is not None:
        fm.abstract_span = dets.abstract.span
    for nd in walk(tree.nodes):
        if isinstance(nd, Leaf) and nd.token.is_control_word("maketitle"):
            fm.maketitle_site = nd.span
            break
    if region.whole_body_fallback:
        fm.notes.append("no front-matter boundary found; whole body considered")
    return fm
