"""DocTags tokenizer, strict/lenient parser and canonical serializer."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, NamedTuple, Optional, Sequence

from .diagnostics import Diagnostic, DocTagsError, Severity
from .model import (
    LOC_MAX,
    ROOT_KINDS,
    TAG_RE,
    VERBATIM_KINDS,
    Block,
    BlockKind,
    CodeLang,
    Document,
    LIST_KINDS,
    LocBox,
    Page,
    PictureClass,
    allowed_children,
    classify_tag,
    strip_markup,
    validate,
)
from .otsl import CellTag, decode as decode_otsl, encode as encode_otsl

DEFAULT_MIN_REPEATS = 4
DEFAULT_MAX_PERIOD = 32


class TokenKind(str, Enum):
    OPEN = "open"
    CLOSE = "close"
    STANDALONE = "standalone"
    TEXT = "text"


class ParseMode(str, Enum):
    STRICT = "strict"
    LENIENT = "lenient"


@dataclass(frozen=True)
class Token:
    """One lexeme.

    ``name`` is the element name for open/close tags and the tag family for
    standalone tags (``loc``, ``page_break``, ``cell``, ``code_lang``,
    ``picture_class``).  ``payload`` carries the parsed value, or the string
    for text runs.  ``raw`` marks text runs that came from unrecognised markup.
    """

    kind: TokenKind
    name: str = ""
    payload: Any = None
    raw: bool = False
    span: tuple[int, int] = field(default=(0, 0), compare=False)
    issue: Optional[str] = field(default=None, compare=False)


class ParseResult(NamedTuple):
    document: Optional[Document]
    diagnostics: list[Diagnostic]


def tokenize(source: str) -> tuple[list[Token], list[Diagnostic]]:
    """Split ``source`` into tokens whose spans tile the input exactly."""
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    pos = 0
    for m in TAG_RE.finditer(source):
        start, end = m.span()
        if start > pos:
            tokens.append(Token(TokenKind.TEXT, payload=source[pos:start], span=(pos, start)))
        closing, name = bool(m.group(1)), m.group(2)
        family = classify_tag(closing, name)
        span = (start, end)
        if family is None:
            diags.append(Diagnostic(Severity.WARNING, "unknown-tag", f"unknown tag {m.group(0)!r}", span))
            tokens.append(Token(TokenKind.TEXT, payload=m.group(0), raw=True, span=span, issue="unknown-tag"))
        elif family == "open":
            tokens.append(Token(TokenKind.OPEN, name, span=span))
        elif family == "close":
            tokens.append(Token(TokenKind.CLOSE, name, span=span))
        elif family == "loc":
            value, issue = int(name[4:]), None
            if value > LOC_MAX:
                diags.append(Diagnostic(Severity.WARNING, "loc-out-of-range",
                                        f"{m.group(0)} clamped to {LOC_MAX}", span))
                value, issue = LOC_MAX, "loc-out-of-range"
            tokens.append(Token(TokenKind.STANDALONE, "loc", value, span=span, issue=issue))
        elif family == "code_lang":
            label, issue = name[1:-1], None
            try:
                lang = CodeLang(label)
            except ValueError:
                diags.append(Diagnostic(Severity.WARNING, "unknown-code-lang",
                                        f"code language {label!r} mapped to 'unknown'", span))
                lang, issue = CodeLang("unknown"), "unknown-code-lang"
            tokens.append(Token(TokenKind.STANDALONE, "code_lang", lang, span=span, issue=issue))
        elif family == "cell":
            tokens.append(Token(TokenKind.STANDALONE, "cell", CellTag(name), span=span))
        elif family == "picture_class":
            tokens.append(Token(TokenKind.STANDALONE, "picture_class", PictureClass(name), span=span))
        else:
            tokens.append(Token(TokenKind.STANDALONE, "page_break", span=span))
        pos = end
    if pos < len(source):
        tokens.append(Token(TokenKind.TEXT, payload=source[pos:], span=(pos, len(source))))
    return tokens, diags


def detect_repetition(
    tokens: Sequence,
    min_repeats: int = DEFAULT_MIN_REPEATS,
    max_period: int = DEFAULT_MAX_PERIOD,
) -> Optional[int]:
    """Find a repetition loop running to the end of ``tokens``.

    A loop is a suffix that is periodic with some period ``p <= max_period``
    and holds at least ``min_repeats`` full periods (a trailing partial period
    is allowed, as generation usually stops mid-loop).  Among all loops the one
    starting earliest wins, ties going to the shortest period.  Returns the
    index just past the first period, i.e. where to cut so one copy remains,
    or None.
    """
    if min_repeats < 2 or max_period < 1:
        raise ValueError("min_repeats must be >= 2 and max_period >= 1")
    n = len(tokens)
    best: Optional[tuple[int, int]] = None
    for p in range(1, min(max_period, n // min_repeats) + 1):
        # walk back while tokens[i] == tokens[i + p]
        start = n - p
        while start > 0 and tokens[start - 1] == tokens[start - 1 + p]:
            start -= 1
        if n - start >= min_repeats * p and (best is None or start < best[0]):
            best = (start, p)
    if best is None:
        return None
    return best[0] + best[1]


# --------------------------------------------------------------------------
# parsing


@dataclass
class _Frame:
    kind: BlockKind
    path: tuple[int, ...]
    span_start: int
    implicit: bool = False
    locs: list = field(default_factory=list)
    text_parts: list = field(default_factory=list)
    children: list = field(default_factory=list)
    code_lang: Optional[CodeLang] = None
    picture_classes: list = field(default_factory=list)
    cells: list = field(default_factory=list)  # [CellTag, [text parts]]
    has_content: bool = False


class _Parser:
    def __init__(self, mode: ParseMode, source_len: int):
        self.strict = mode is ParseMode.STRICT
        self.sev = Severity.ERROR if self.strict else Severity.WARNING
        self.source_len = source_len
        self.pages: list[list[Block]] = [[]]
        self.stack: list[_Frame] = []
        self.diags: list[Diagnostic] = []
        self.root = "before"  # before | inside | after
        self.saw_root = False

    # -- helpers
    def report(self, code, msg, span=None, path=None, severity=None):
        self.diags.append(Diagnostic(severity or self.sev, code, msg, span, path))

    def next_path(self) -> tuple[int, ...]:
        if self.stack:
            parent = self.stack[-1]
            return parent.path + (len(parent.children),)
        return (len(self.pages) - 1, len(self.pages[-1]))

    def push(self, kind: BlockKind, start: int, implicit=False):
        if (not self.strict and kind is BlockKind.OTSL and self.stack
                and self.stack[-1].kind is BlockKind.PICTURE):
            self.report("picture-table", "table nested in picture", (start, start), severity=Severity.INFO)
        self.stack.append(_Frame(kind, self.next_path(), start, implicit))

    def close_implicit_text(self):
        while self.stack and self.stack[-1].implicit and self.stack[-1].kind not in LIST_KINDS:
            self.pop(self.stack[-1].span_start)

    def force_close(self, pos: int):
        frame = self.stack[-1]
        if not frame.implicit:
            self.report("unclosed-tag", f"<{frame.kind.value}> closed implicitly", (frame.span_start, pos), frame.path)
        self.pop(pos)

    def close_all(self, pos: int):
        while self.stack:
            self.force_close(pos)

    def pop(self, pos: int):
        frame = self.stack.pop()
        block = self.build(frame, pos)
        if self.stack:
            self.stack[-1].children.append(block)
        else:
            self.pages[-1].append(block)

    def build(self, f: _Frame, pos: int) -> Block:
        span = (f.span_start, pos)
        loc = None
        if len(f.locs) == 4:
            x1, y1, x2, y2 = f.locs
            if x1 > x2 or y1 > y2:
                self.report("loc-inverted", f"location {tuple(f.locs)} is inverted", span, f.path)
                x1, x2 = min(x1, x2), max(x1, x2)
                y1, y2 = min(y1, y2), max(y1, y2)
            loc = LocBox(x1, y1, x2, y2)
        elif f.locs:
            self.report("incomplete-loc", f"{len(f.locs)} location tags, expected 4", span, f.path)
        elif not self.strict and not f.implicit:
            self.report("missing-loc", f"<{f.kind.value}> has no location", span, f.path, Severity.INFO)

        verbatim = f.kind in VERBATIM_KINDS
        text = "".join(f.text_parts)
        clean = strip_markup(text, known_only=verbatim)
        if clean != text:
            self.report("content-contains-tag", "markup removed from content", span, f.path)
            text = clean

        table = None
        if f.cells:
            cells = []
            for tag, parts in f.cells:
                cell_text = "".join(parts)
                cleaned = strip_markup(cell_text, known_only=False)
                if cleaned != cell_text:
                    self.report("content-contains-tag", "markup removed from cell", span, f.path)
                cells.append((tag, cleaned))
            table, issues = decode_otsl(cells, strict=self.strict)
            for d in issues:
                self.report(d.code, d.message, span, f.path, d.severity)
            if text.strip():
                self.report("unexpected-content", "text dropped from table element", span, f.path)
            text = ""
        elif f.kind is BlockKind.OTSL:
            table, issues = decode_otsl([], strict=self.strict)
            for d in issues:
                self.report(d.code, d.message, span, f.path, d.severity)
        if f.kind in LIST_KINDS:
            text = ""

        return Block(
            kind=f.kind,
            text=text,
            loc=loc,
            children=tuple(f.children),
            code_lang=f.code_lang,
            picture_classes=tuple(f.picture_classes),
            table=table,
        )

    # -- token handlers
    def feed(self, tok: Token):
        if self.root == "before":
            if tok.kind is TokenKind.TEXT and not tok.raw and not tok.payload.strip():
                return
            if tok.kind is TokenKind.OPEN and tok.name == "doctag":
                self.root = "inside"
                self.saw_root = True
                return
            self.report("missing-root", "input does not start with <doctag>", tok.span)
            self.root = "inside"
        elif self.root == "after":
            if tok.kind is TokenKind.TEXT and not tok.raw and not tok.payload.strip():
                return
            self.report("trailing-content", "content after </doctag>", tok.span)
            self.root = "inside"

        if tok.kind is TokenKind.TEXT:
            self.on_text(tok)
            return
        self.close_implicit_text()
        if tok.kind is TokenKind.OPEN:
            if tok.name == "doctag":
                self.report("misplaced-tag", "nested <doctag>", tok.span)
            else:
                self.on_open(BlockKind(tok.name), tok)
        elif tok.kind is TokenKind.CLOSE:
            if tok.name == "doctag":
                self.close_all(tok.span[0])
                self.root = "after"
            else:
                self.on_close(BlockKind(tok.name), tok)
        else:
            self.on_standalone(tok)

    def on_text(self, tok: Token):
        text: str = tok.payload
        blank = not tok.raw and not text.strip()
        if not self.stack:
            if blank:
                return
            if tok.raw:
                self.report("unknown-tag", f"unknown tag {text!r}", tok.span)
                return
            self.report("untagged-text", "text outside of any element", tok.span)
            self.push(BlockKind.TEXT, tok.span[0], implicit=True)
        frame = self.stack[-1]
        if frame.kind in LIST_KINDS:
            if blank:
                return
            if tok.raw:
                self.report("unknown-tag", f"unknown tag {text!r}", tok.span, frame.path)
                return
            self.report("untagged-text", "text directly inside a list", tok.span, frame.path)
            self.push(BlockKind.LIST_ITEM, tok.span[0], implicit=True)
            frame = self.stack[-1]
        if tok.raw and frame.kind not in VERBATIM_KINDS:
            self.report("unknown-tag", f"unknown tag {text!r}", tok.span, frame.path)
            return
        if frame.cells:
            frame.cells[-1][1].append(text)
        elif frame.kind is BlockKind.OTSL:
            if not blank:
                self.report("unexpected-text", "text before the first table cell", tok.span, frame.path)
            return
        else:
            frame.text_parts.append(text)
        if not blank:
            frame.has_content = True

    def on_open(self, kind: BlockKind, tok: Token):
        while True:
            parent = self.stack[-1].kind if self.stack else None
            allowed = ROOT_KINDS if parent is None else allowed_children(parent)
            if kind in allowed:
                break
            if parent is None:
                # orphan list_item: wrap it into a list
                self.report("misplaced-tag", "list_item outside of a list", tok.span)
                self.push(BlockKind.UNORDERED_LIST, tok.span[0], implicit=True)
                break
            frame = self.stack[-1]
            if frame.kind in LIST_KINDS or frame.kind in (BlockKind.PICTURE, BlockKind.OTSL):
                if not frame.implicit:
                    self.report("misplaced-tag", f"<{kind.value}> not allowed in <{frame.kind.value}>",
                                tok.span, frame.path)
            self.force_close(tok.span[0])
        self.push(kind, tok.span[0])

    def on_close(self, kind: BlockKind, tok: Token):
        for i in range(len(self.stack) - 1, -1, -1):
            if self.stack[i].kind is kind:
                while len(self.stack) > i + 1:
                    self.force_close(tok.span[0])
                self.pop(tok.span[1])
                return
        self.report("unmatched-close-tag", f"</{kind.value}> without open element", tok.span)

    def on_standalone(self, tok: Token):
        if tok.issue == "loc-out-of-range":
            self.report("loc-out-of-range", f"location clamped to {LOC_MAX}", tok.span)
        elif tok.issue == "unknown-code-lang":
            self.report("unknown-code-lang", "code language mapped to 'unknown'", tok.span,
                        severity=Severity.WARNING)

        if tok.name == "page_break":
            self.close_all(tok.span[0])
            self.pages.append([])
            return
        if not self.stack:
            self.report("misplaced-tag", f"<{tok.name}> outside of any element", tok.span)
            return
        frame = self.stack[-1]
        if tok.name == "loc":
            if len(frame.locs) >= 4:
                self.report("extra-loc", "more than four location tags", tok.span, frame.path)
                return
            if frame.has_content or frame.children or frame.cells:
                self.report("misplaced-tag", "location tag after content", tok.span, frame.path)
            frame.locs.append(tok.payload)
        elif tok.name == "cell":
            if frame.kind not in (BlockKind.OTSL, BlockKind.DOCUMENT_INDEX):
                self.report("misplaced-tag", f"table cell tag in <{frame.kind.value}>", tok.span, frame.path)
                return
            frame.cells.append((tok.payload, []))
        elif tok.name == "code_lang":
            if frame.kind is not BlockKind.CODE or frame.code_lang is not None:
                self.report("misplaced-tag", "unexpected code language tag", tok.span, frame.path)
                return
            if frame.has_content:
                self.report("misplaced-tag", "code language after content", tok.span, frame.path)
            frame.code_lang = tok.payload
        elif tok.name == "picture_class":
            if frame.kind is not BlockKind.PICTURE:
                self.report("misplaced-tag", "picture class outside <picture>", tok.span, frame.path)
                return
            frame.picture_classes.append(tok.payload)

    def finish(self) -> Document:
        self.close_implicit_text()
        if self.root == "before":
            self.report("missing-root", "no <doctag> root", (0, self.source_len))
        elif self.root == "inside":
            if self.saw_root:
                self.report("unclosed-tag", "<doctag> not closed", (self.source_len, self.source_len))
        self.close_all(self.source_len)
        return Document(tuple(Page(tuple(blocks)) for blocks in self.pages))


def parse(source: str, mode: ParseMode | str = ParseMode.STRICT) -> ParseResult:
    """Parse DocTags text.

    Strict mode returns ``(None, diagnostics)`` as soon as any error-severity
    finding exists.  Lenient mode always returns a document that passes
    ``validate``; every repair is reported as a warning or info diagnostic.
    """
    mode = ParseMode(mode)
    tokens, lex_diags = tokenize(source)
    parser = _Parser(mode, len(source))
    if mode is ParseMode.LENIENT:
        # a trailing newline after the loop must not hide it
        end = len(tokens)
        while end and tokens[end - 1].kind is TokenKind.TEXT and not tokens[end - 1].payload.strip():
            end -= 1
        cut = detect_repetition(tokens[:end])
        if cut is not None:
            parser.report("repetition-truncated", f"repetition loop cut after token {cut}",
                          (tokens[cut].span[0], len(source)))
            tokens = tokens[:cut]
    for tok in tokens:
        parser.feed(tok)
    doc = parser.finish()
    diags = parser.diags
    if mode is ParseMode.STRICT:
        if any(d.is_error for d in diags):
            return ParseResult(None, diags)
        problems = validate(doc)
        if problems:
            return ParseResult(None, diags + problems)
    return ParseResult(doc, diags)


# --------------------------------------------------------------------------
# serialization


def _loc_tags(loc: LocBox) -> str:
    return "".join(f"<loc_{v}>" for v in loc.as_tuple())


def _serialize_block(block: Block, out: list[str]):
    name = block.kind.value
    out.append(f"<{name}>")
    if block.loc is not None:
        out.append(_loc_tags(block.loc))
    if block.code_lang is not None:
        out.append(f"<_{block.code_lang.value}_>")
    for cls in block.picture_classes:
        out.append(f"<{cls.value}>")
    if block.table is not None:
        for tag, text in encode_otsl(block.table):
            out.append(f"<{tag.value}>")
            if text:
                out.append(text)
    else:
        out.append(block.text)
    for child in block.children:
        _serialize_block(child, out)
    out.append(f"</{name}>")


def serialize(doc: Document) -> str:
    """Canonical DocTags for a valid document; raises DocTagsError otherwise."""
    problems = validate(doc)
    if problems:
        raise DocTagsError("cannot serialize an invalid document", problems)
    out = ["<doctag>"]
    for i, page in enumerate(doc.pages):
        if i:
            out.append("<page_break>")
        for block in page.blocks:
            _serialize_block(block, out)
    out.append("</doctag>")
    return "".join(out)


def repair(source: str) -> tuple[str, list[Diagnostic]]:
    """Lenient parse followed by canonical serialization."""
    doc, diags = parse(source, ParseMode.LENIENT)
    return serialize(doc), diags
