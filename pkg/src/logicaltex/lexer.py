"""Lossless LaTeX tokenizer and block-structure parser.

The tokenizer never fails and never alters bytes: concatenating the
lexemes of the emitted tokens reproduces the input exactly.  Structural
problems (unbalanced groups, mismatched environments, unterminated math)
surface as diagnostics on the block tree, never as exceptions.

Category codes are fixed to the standard ones; ``\\catcode`` changes are
not interpreted and macros are never expanded.
"""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Union

SPECIALS = "\\{}$&~^_#%"
_WS = " \t\r\n\x0c"
_ASCII_LETTERS = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")

# Environments whose whole extent is treated as an opaque math region.
MATH_ENVIRONMENTS = frozenset({
    "equation", "align", "gather", "multline", "eqnarray",
    "displaymath", "math", "alignat",
})

# Environments captured verbatim: their body is a single opaque text token
# and is excluded from all downstream pattern detection, like math.
VERBATIM_ENVIRONMENTS = ("verbatim", "Verbatim", "lstlisting", "minted", "alltt")

_VERBATIM_BEGIN = re.compile(
    r"\\begin\s*\{\s*(" + "|".join(VERBATIM_ENVIRONMENTS) + r")(\*?)\s*\}"
)


@dataclass(frozen=True)
class Span:
    """Half-open offset range [start, end) into the decoded source text.

    ``line`` is the 1-based line number of ``start``.  Offsets index the
    decoded text; when the input arrived as bytes it was decoded with
    UTF-8/surrogateescape, so re-encoding reproduces the original bytes.
    """

    start: int
    end: int
    line: int = 0

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"span start {self.start} > end {self.end}")

    @property
    def length(self) -> int:
        return self.end - self.start

    def contains(self, offset: int) -> bool:
        return self.start <= offset < self.end

    def contains_span(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end

    def intersects(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


class TokenKind(Enum):
    CONTROL_WORD = "control-word"
    CONTROL_SYMBOL = "control-symbol"
    BEGIN_GROUP = "begin-group"
    END_GROUP = "end-group"
    MATH_SHIFT = "math-shift"
    ALIGNMENT = "alignment"
    PARAMETER = "parameter"
    COMMENT = "comment"
    PAR_BREAK = "par-break"
    WHITESPACE = "whitespace"
    TEXT = "text"
    ACTIVE_CHAR = "active-char"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    span: Span
    value: str | None = None

    def is_control_word(self, *names: str) -> bool:
        return self.kind is TokenKind.CONTROL_WORD and self.value in names


@dataclass
class TokenStream:
    """Token sequence plus the decoded source it tiles exactly."""

    source: str
    tokens: list[Token]
    verbatim_spans: list[Span] = field(default_factory=list)
    _newlines: list[int] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self._newlines:
            self._newlines = [m.start() for m in re.finditer("\n", self.source)]

    def lexeme(self, token: Token) -> str:
        return self.source[token.span.start:token.span.end]

    def text(self, span: Span) -> str:
        return self.source[span.start:span.end]

    def line_of(self, offset: int) -> int:
        return bisect_right(self._newlines, offset - 1) + 1

    def span(self, start: int, end: int) -> Span:
        return Span(start, end, self.line_of(start))

    def reassemble(self) -> str:
        return "".join(self.lexeme(t) for t in self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)


def decode_source(source: str | bytes) -> str:
    """Decode input bytes without ever losing information.

    Arbitrary byte values survive via surrogateescape and are restored
    exactly by ``encode_source``.
    """
    if isinstance(source, bytes):
        return source.decode("utf-8", errors="surrogateescape")
    return source


def encode_source(text: str) -> bytes:
    return text.encode("utf-8", errors="surrogateescape")


# Old sources are often Latin-1; their high bytes surface as lone
# surrogates after the tolerant decode.  For *analysis* (never for
# output) map the printable range back to the Latin-1 characters.
_LATIN1_FALLBACK = {cp: cp - 0xDC00 for cp in range(0xDCA0, 0xDD00)}


def latin1_fallback(text: str) -> str:
    return text.translate(_LATIN1_FALLBACK)


class _Scanner:
    def __init__(self, source: str):
        self.s = source
        self.n = len(source)
        self.i = 0
        self.line = 1
        self.tokens: list[Token] = []
        self.verbatim_spans: list[Span] = []

    def add(self, kind: TokenKind, start: int, end: int, value: str | None = None):
        self.tokens.append(Token(kind, Span(start, end, self.line), value))
        self.line += self.s.count("\n", start, end)

    def run(self) -> TokenStream:
        s, n = self.s, self.n
        while self.i < n:
            ch = s[self.i]
            if ch == "%":
                self._comment()
            elif ch == "\\":
                self._control()
            elif ch == "{":
                self.add(TokenKind.BEGIN_GROUP, self.i, self.i + 1)
                self.i += 1
            elif ch == "}":
                self.add(TokenKind.END_GROUP, self.i, self.i + 1)
                self.i += 1
            elif ch == "$":
                self.add(TokenKind.MATH_SHIFT, self.i, self.i + 1)
                self.i += 1
            elif ch == "&":
                self.add(TokenKind.ALIGNMENT, self.i, self.i + 1)
                self.i += 1
            elif ch in "~^_":
                self.add(TokenKind.ACTIVE_CHAR, self.i, self.i + 1, ch)
                self.i += 1
            elif ch == "#":
                self._parameter()
            elif ch in _WS:
                self._whitespace()
            else:
                self._text()
        return TokenStream(self.s, self.tokens, self.verbatim_spans)

    def _comment(self):
        s = self.s
        end = s.find("\n", self.i)
        if end == -1:
            end = self.n
        self.add(TokenKind.COMMENT, self.i, end, s[self.i:end])
        self.i = end

    def _parameter(self):
        s = self.s
        end = self.i + 1
        digit = None
        if end < self.n and s[end].isdigit():
            digit = s[end]
            end += 1
        self.add(TokenKind.PARAMETER, self.i, end, digit)
        self.i = end

    def _whitespace(self):
        s, n = self.s, self.n
        start = self.i
        i = start
        while i < n and s[i] in _WS:
            i += 1
        run = s[start:i]
        newlines = run.count("\n")
        if newlines == 0:
            newlines = run.count("\r")
        kind = TokenKind.PAR_BREAK if newlines >= 2 else TokenKind.WHITESPACE
        self.add(kind, start, i)
        self.i = i

    def _text(self):
        s, n = self.s, self.n
        start = self.i
        i = start
        while i < n:
            ch = s[i]
            if ch in SPECIALS:
                break
            if ch in _WS:
                # Spaces and tabs between ordinary characters belong to the
                # text run; whitespace at a boundary is its own token.
                j = i
                while j < n and s[j] in " \t":
                    j += 1
                if j > i and j < n and s[j] not in SPECIALS and s[j] not in _WS:
                    i = j
                    continue
                break
            i += 1
        self.add(TokenKind.TEXT, start, i, s[start:i])
        self.i = i

    def _control(self):
        s, n = self.s, self.n
        start = self.i
        if start + 1 >= n:
            self.add(TokenKind.CONTROL_SYMBOL, start, start + 1, "")
            self.i = start + 1
            return
        ch = s[start + 1]
        if ch not in _ASCII_LETTERS:
            self.add(TokenKind.CONTROL_SYMBOL, start, start + 2, ch)
            self.i = start + 2
            return
        i = start + 1
        while i < n and s[i] in _ASCII_LETTERS:
            i += 1
        name = s[start + 1:i]
        if name == "begin":
            m = _VERBATIM_BEGIN.match(s, start)
            if m:
                self.add(TokenKind.CONTROL_WORD, start, i, name)
                self.i = i
                self._verbatim_environment(start, m)
                return
        self.add(TokenKind.CONTROL_WORD, start, i, name)
        self.i = i
        if name == "verb":
            self._verb_argument(start)

    def _verb_argument(self, cmd_start: int):
        # \verb<delim>...<delim> (or \verb* form); the delimited body is one
        # opaque text token, never scanned for specials.
        s, n = self.s, self.n
        j = self.i
        k = j
        if k < n and s[k] == "*":
            k += 1
        if k >= n or s[k] == "\n":
            return
        delim = s[k]
        close = s.find(delim, k + 1)
        eol = s.find("\n", k + 1)
        if eol == -1:
            eol = n
        if close == -1 or close > eol:
            end = eol
        else:
            end = close + 1
        self.add(TokenKind.TEXT, j, end, s[j:end])
        self.verbatim_spans.append(Span(cmd_start, end, self.tokens[-1].span.line))
        self.i = end

    def _verbatim_environment(self, construct_start: int, begin_match: re.Match):
        # Scan the {name} part normally, then swallow everything up to the
        # matching \end{name} as one opaque text token.
        s, n = self.s, self.n
        name = begin_match.group(1) + begin_match.group(2)
        body_start = begin_match.end()
        self._scan_simple(self.i, body_start)
        end_re = re.compile(r"\\end\s*\{\s*" + re.escape(name) + r"\s*\}")
        m = end_re.search(s, body_start)
        body_end = m.start() if m else n
        if body_end > body_start:
            self.add(TokenKind.TEXT, body_start, body_end, s[body_start:body_end])
        line = self.tokens[-1].span.line if self.tokens else 1
        self.verbatim_spans.append(
            Span(construct_start, m.end() if m else n, line)
        )
        self.i = body_end

    def _scan_simple(self, start: int, end: int):
        # Tokenize a region known to contain only whitespace, braces,
        # letters and '*' (the {name} part of a \begin).
        s = self.s
        i = start
        while i < end:
            ch = s[i]
            if ch == "{":
                self.add(TokenKind.BEGIN_GROUP, i, i + 1)
                i += 1
            elif ch == "}":
                self.add(TokenKind.END_GROUP, i, i + 1)
                i += 1
            elif ch in _WS:
                j = i
                while j < end and s[j] in _WS:
                    j += 1
                run = s[i:j]
                kind = TokenKind.PAR_BREAK if run.count("\n") >= 2 else TokenKind.WHITESPACE
                self.add(kind, i, j)
                i = j
            else:
                j = i
                while j < end and s[j] not in "{}" and s[j] not in _WS:
                    j += 1
                self.add(TokenKind.TEXT, i, j, s[i:j])
                i = j
        self.i = end


def tokenize(source: str | bytes) -> TokenStream:
    """Tokenize LaTeX source losslessly.

    Total and deterministic: any byte sequence yields a stream whose
    concatenated lexemes reproduce the input exactly.
    """
    return _Scanner(decode_source(source)).run()


# ---------------------------------------------------------------------------
# Block tree
# ---------------------------------------------------------------------------


@dataclass
class Leaf:
    token: Token

    @property
    def span(self) -> Span:
        return self.token.span


@dataclass
class GroupNode:
    children: list["Node"]
    span: Span
    inner: Span


@dataclass
class EnvNode:
    name: str
    children: list["Node"]
    span: Span
    inner: Span


@dataclass
class MathNode:
    kind: str  # "inline" or "display"
    span: Span


Node = Union[Leaf, GroupNode, EnvNode, MathNode]


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    detail: str
    span: Span

    def key(self) -> tuple[str, str]:
        """Position-independent identity, for before/after comparison."""
        return (self.kind, self.detail)


@dataclass
class BlockTree:
    nodes: list[Node]
    diagnostics: list[Diagnostic]
    stream: TokenStream


@dataclass
class _Frame:
    kind: str  # "group" or "env"
    name: str | None
    start: int
    inner_start: int
    children: list[Node]


def _env_name(stream: TokenStream, i: int) -> tuple[str, int, int] | None:
    """Read the {name} after a \\begin/\\end token at index ``i``.

    Returns (name, index of the closing brace token, offset after it),
    or None when no well-formed name group follows.
    """
    toks = stream.tokens
    j = i + 1
    while j < len(toks) and toks[j].kind in (TokenKind.WHITESPACE, TokenKind.COMMENT):
        j += 1
    if j >= len(toks) or toks[j].kind is not TokenKind.BEGIN_GROUP:
        return None
    parts = []
    k = j + 1
    while k < len(toks):
        t = toks[k]
        if t.kind is TokenKind.END_GROUP:
            return ("".join(parts).strip(), k, t.span.end)
        if t.kind is TokenKind.BEGIN_GROUP:
            return None
        parts.append(stream.lexeme(t))
        k += 1
    return None


class _TreeBuilder:
    def __init__(self, stream: TokenStream):
        self.stream = stream
        self.toks = stream.tokens
        self.diags: list[Diagnostic] = []
        self.root: list[Node] = []
        self.stack: list[_Frame] = []

    def sink(self) -> list[Node]:
        return self.stack[-1].children if self.stack else self.root

    def build(self) -> BlockTree:
        toks = self.toks
        n = len(toks)
        i = 0
        while i < n:
            t = toks[i]
            k = t.kind
            if k is TokenKind.MATH_SHIFT:
                i = self._dollar_math(i)
            elif k is TokenKind.CONTROL_SYMBOL and t.value in "([":
                i = self._bracket_math(i)
            elif k is TokenKind.CONTROL_SYMBOL and t.value in ")]":
                self.diags.append(Diagnostic("math-close-without-open", t.value or "", t.span))
                self.sink().append(Leaf(t))
                i += 1
            elif t.is_control_word("begin"):
                i = self._begin(i)
            elif t.is_control_word("end"):
                i = self._end(i)
            elif k is TokenKind.BEGIN_GROUP:
                self.stack.append(_Frame("group", None, t.span.start, t.span.end, []))
                i += 1
            elif k is TokenKind.END_GROUP:
                if self.stack and self.stack[-1].kind == "group":
                    f = self.stack.pop()
                    self.sink().append(GroupNode(
                        f.children,
                        self.stream.span(f.start, t.span.end),
                        self.stream.span(f.inner_start, t.span.start),
                    ))
                else:
                    self.diags.append(Diagnostic("unmatched-end-group", "", t.span))
                    self.sink().append(Leaf(t))
                i += 1
            else:
                self.sink().append(Leaf(t))
                i += 1
        self._unwind(len(self.stream.source))
        return BlockTree(self.root, self.diags, self.stream)

    def _unwind(self, eof: int):
        while self.stack:
            f = self.stack.pop()
            span = self.stream.span(f.start, eof)
            inner = self.stream.span(f.inner_start, eof)
            if f.kind == "group":
                self.diags.append(Diagnostic("unclosed-group", "", self.stream.span(f.start, f.start + 1)))
                self.sink().append(GroupNode(f.children, span, inner))
            else:
                self.diags.append(Diagnostic("unclosed-environment", f.name or "", self.stream.span(f.start, f.start + 1)))
                self.sink().append(EnvNode(f.name or "", f.children, span, inner))

    def _dollar_math(self, i: int) -> int:
        toks, n = self.toks, len(self.toks)
        open_tok = toks[i]
        display = (
            i + 1 < n
            and toks[i + 1].kind is TokenKind.MATH_SHIFT
            and toks[i + 1].span.start == open_tok.span.end
        )
        j = i + 2 if display else i + 1
        close_end = None
        while j < n:
            t = toks[j]
            if t.kind is TokenKind.PAR_BREAK:
                break
            if t.kind is TokenKind.MATH_SHIFT:
                if display:
                    if (
                        j + 1 < n
                        and toks[j + 1].kind is TokenKind.MATH_SHIFT
                        and toks[j + 1].span.start == t.span.end
                    ):
                        close_end = toks[j + 1].span.end
                        j += 2
                        break
                else:
                    close_end = t.span.end
                    j += 1
                    break
            j += 1
        kind = "display" if display else "inline"
        if close_end is None:
            end = toks[j].span.start if j < n else len(self.stream.source)
            self.diags.append(Diagnostic("unterminated-math", kind, self.stream.span(open_tok.span.start, end)))
            self.sink().append(MathNode(kind, self.stream.span(open_tok.span.start, end)))
            return j
        self.sink().append(MathNode(kind, self.stream.span(open_tok.span.start, close_end)))
        return j

    def _bracket_math(self, i: int) -> int:
        toks, n = self.toks, len(self.toks)
        open_tok = toks[i]
        closing = ")" if open_tok.value == "(" else "]"
        kind = "inline" if open_tok.value == "(" else "display"
        j = i + 1
        close_end = None
        while j < n:
            t = toks[j]
            if t.kind is TokenKind.PAR_BREAK:
                break
            if t.kind is TokenKind.CONTROL_SYMBOL and t.value == closing:
                close_end = t.span.end
                j += 1
                break
            j += 1
        if close_end is None:
            end = toks[j].span.start if j < n else len(self.stream.source)
            self.diags.append(Diagnostic("unterminated-math", kind, self.stream.span(open_tok.span.start, end)))
            self.sink().append(MathNode(kind, self.stream.span(open_tok.span.start, end)))
            return j
        self.sink().append(MathNode(kind, self.stream.span(open_tok.span.start, close_end)))
        return j

    def _begin(self, i: int) -> int:
        t = self.toks[i]
        named = _env_name(self.stream, i)
        if named is None:
            self.sink().append(Leaf(t))
            return i + 1
        name, name_idx, after = named
        if name.rstrip("*") in MATH_ENVIRONMENTS:
            return self._math_environment(i, name, name_idx, after)
        self.stack.append(_Frame("env", name, t.span.start, after, []))
        return name_idx + 1

    def _math_environment(self, i: int, name: str, name_idx: int, after: int) -> int:
        toks, n = self.toks, len(self.toks)
        start = toks[i].span.start
        j = name_idx + 1
        while j < n:
            if toks[j].is_control_word("end"):
                named = _env_name(self.stream, j)
                if named is not None and named[0] == name:
                    self.sink().append(MathNode("display", self.stream.span(start, named[2])))
                    return named[1] + 1
            j += 1
        end = len(self.stream.source)
        self.diags.append(Diagnostic("unclosed-environment", name, self.stream.span(start, start + 1)))
        self.sink().append(MathNode("display", self.stream.span(start, end)))
        return n

    def _end(self, i: int) -> int:
        t = self.toks[i]
        named = _env_name(self.stream, i)
        if named is None:
            self.sink().append(Leaf(t))
            return i + 1
        name, name_idx, after = named
        depth = None
        for d in range(len(self.stack) - 1, -1, -1):
            if self.stack[d].kind == "env" and self.stack[d].name == name:
                depth = d
                break
        if depth is None:
            self.diags.append(Diagnostic("end-without-begin", name, t.span))
            for j in range(i, name_idx + 1):
                self.sink().append(Leaf(self.toks[j]))
            return name_idx + 1
        while len(self.stack) - 1 > depth:
            f = self.stack.pop()
            span = self.stream.span(f.start, t.span.start)
            inner = self.stream.span(f.inner_start, t.span.start)
            if f.kind == "group":
                self.diags.append(Diagnostic("group-crosses-boundary", name, self.stream.span(f.start, f.start + 1)))
                self.sink().append(GroupNode(f.children, span, inner))
            else:
                self.diags.append(Diagnostic("unclosed-environment", f.name or "", self.stream.span(f.start, f.start + 1)))
                self.sink().append(EnvNode(f.name or "", f.children, span, inner))
        f = self.stack.pop()
        self.sink().append(EnvNode(
            name,
            f.children,
            self.stream.span(f.start, after),
            self.stream.span(f.inner_start, t.span.start),
        ))
        return name_idx + 1


def build_tree(stream: TokenStream) -> BlockTree:
    """Build the nested group/environment tree; problems become diagnostics."""
    return _TreeBuilder(stream).build()


def parse(source: str | bytes) -> BlockTree:
    """Tokenize and build the tree in one step."""
    return build_tree(tokenize(source))


def walk(nodes: list[Node]) -> Iterator[Node]:
    """Yield every node in document order, depth first."""
    for node in nodes:
        yield node
        if isinstance(node, (GroupNode, EnvNode)):
            yield from walk(node.children)


def math_spans(tree: BlockTree) -> list[Span]:
    """All math region spans, sorted and non-overlapping."""
    spans = [n.span for n in walk(tree.nodes) if isinstance(n, MathNode)]
    return sorted(spans, key=lambda s: s.start)


def comment_spans(tree: BlockTree) -> list[Span]:
    return [t.span for t in tree.stream.tokens if t.kind is TokenKind.COMMENT]


def merge_spans(spans: list[Span]) -> list[Span]:
    """Sort and coalesce overlapping or touching spans."""
    out: list[Span] = []
    for s in sorted(spans, key=lambda s: (s.start, s.end)):
        if out and s.start <= out[-1].end:
            if s.end > out[-1].end:
                out[-1] = Span(out[-1].start, s.end, out[-1].line)
        else:
            out.append(s)
    return out


def protected_spans(tree: BlockTree) -> list[Span]:
    """Math, verbatim and comment regions: never the target of a rewrite."""
    spans = math_spans(tree) + list(tree.stream.verbatim_spans) + comment_spans(tree)
    return merge_spans(spans)


def in_any_span(offset: int, spans: list[Span]) -> bool:
    for s in spans:
        if s.contains(offset):
            return True
        if s.start > offset:
            break
    return False
