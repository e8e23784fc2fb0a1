"""Typed document model for DocTags plus whole-document validation."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

from .diagnostics import Diagnostic, Severity
from .otsl import CellTag, TableGrid, validate_grid

LOC_MAX = 500


class BlockKind(str, Enum):
    TEXT = "text"
    CAPTION = "caption"
    FOOTNOTE = "footnote"
    FORMULA = "formula"
    TITLE = "title"
    LIST_ITEM = "list_item"
    PAGE_FOOTER = "page_footer"
    PAGE_HEADER = "page_header"
    PICTURE = "picture"
    SECTION_HEADER = "section_header"
    DOCUMENT_INDEX = "document_index"
    CODE = "code"
    OTSL = "otsl"
    ORDERED_LIST = "ordered_list"
    UNORDERED_LIST = "unordered_list"


_CODE_LANGS = (
    "Ada", "Awk", "Bash", "bc", "C", "C#", "C++", "CMake", "COBOL", "CSS", "Ceylon",
    "Clojure", "Crystal", "Cuda", "Cython", "D", "Dart", "dc", "Dockerfile", "Elixir",
    "Erlang", "FORTRAN", "Forth", "Go", "HTML", "Haskell", "Haxe", "Java", "JavaScript",
    "Julia", "Kotlin", "Lisp", "Lua", "Matlab", "MoonScript", "Nim", "OCaml", "ObjectiveC",
    "Octave", "PHP", "Pascal", "Perl", "Prolog", "Python", "Racket", "Ruby", "Rust", "SML",
    "SQL", "Scala", "Scheme", "Swift", "TypeScript", "unknown", "VisualBasic", "XML", "YAML",
)


def _member_name(lang: str) -> str:
    name = lang.replace("#", "_SHARP").replace("+", "P").upper()
    return name if name not in ("C", "D") else f"{name}_LANG"


CodeLang = Enum("CodeLang", [(_member_name(v), v) for v in _CODE_LANGS], type=str)
CodeLang.__doc__ = "Programming languages a code block can be tagged with."


class PictureClass(str, Enum):
    NATURAL_IMAGE = "natural_image"
    PIE_CHART = "pie_chart"
    BAR_CHART = "bar_chart"
    LINE_CHART = "line_chart"
    FLOW_CHART = "flow_chart"
    SCATTER_CHART = "scatter_chart"
    HEATMAP = "heatmap"
    REMOTE_SENSING = "remote_sensing"
    CHEMISTRY_MOLECULAR_STRUCTURE = "chemistry_molecular_structure"
    CHEMISTRY_MARKUSH_STRUCTURE = "chemistry_markush_structure"
    ICON = "icon"
    LOGO = "logo"
    SIGNATURE = "signature"
    STAMP = "stamp"
    QR_CODE = "qr_code"
    BAR_CODE = "bar_code"
    SCREENSHOT = "screenshot"
    MAP = "map"
    STRATIGRAPHIC_CHART = "stratigraphic_chart"
    CAD_DRAWING = "cad_drawing"
    ELECTRICAL_DIAGRAM = "electrical_diagram"


# Element kinds whose content is kept byte for byte.
VERBATIM_KINDS = frozenset({BlockKind.CODE, BlockKind.FORMULA})
LIST_KINDS = frozenset({BlockKind.ORDERED_LIST, BlockKind.UNORDERED_LIST})
PAGE_FURNITURE = frozenset({BlockKind.PAGE_HEADER, BlockKind.PAGE_FOOTER})

# Which child kinds each element admits; kinds not listed admit none.
ALLOWED_CHILDREN: dict[BlockKind, frozenset] = {
    BlockKind.ORDERED_LIST: frozenset({BlockKind.LIST_ITEM}),
    BlockKind.UNORDERED_LIST: frozenset({BlockKind.LIST_ITEM}),
    BlockKind.PICTURE: frozenset({BlockKind.CAPTION, BlockKind.OTSL}),
    BlockKind.OTSL: frozenset({BlockKind.CAPTION}),
}
ROOT_KINDS = frozenset(BlockKind) - {BlockKind.LIST_ITEM}


def allowed_children(kind: BlockKind) -> frozenset:
    return ALLOWED_CHILDREN.get(kind, frozenset())


# --------------------------------------------------------------------------
# tag vocabulary (shared with the tokenizer)

TAG_RE = re.compile(r"<(/?)([A-Za-z0-9_#+.\-]+)>")
_LOC_RE = re.compile(r"loc_(\d+)\Z")
_BLOCK_NAMES = frozenset(k.value for k in BlockKind) | {"doctag"}
_CELL_NAMES = frozenset(t.value for t in CellTag)
_PICTURE_NAMES = frozenset(p.value for p in PictureClass)


def classify_tag(closing: bool, name: str) -> Optional[str]:
    """Return the tag family for a ``<name>``/``</name>`` lexeme, or None if unknown.

    Families: ``open``, ``close``, ``loc``, ``page_break``, ``cell``,
    ``code_lang``, ``picture_class``.
    """
    if name in _BLOCK_NAMES:
        return "close" if closing else "open"
    if closing:
        return None
    if _LOC_RE.match(name):
        return "loc"
    if name == "page_break":
        return "page_break"
    if name in _CELL_NAMES:
        return "cell"
    if len(name) >= 3 and name[0] == "_" and name[-1] == "_":
        return "code_lang"
    if name in _PICTURE_NAMES:
        return "picture_class"
    return None


def contains_markup(text: str, known_only: bool) -> bool:
    for m in TAG_RE.finditer(text):
        if not known_only or classify_tag(bool(m.group(1)), m.group(2)) is not None:
            return True
    return False


def strip_markup(text: str, known_only: bool) -> str:
    """Remove tag lexemes until none remain (removal can splice new ones)."""
    while True:
        out = TAG_RE.sub(
            lambda m: "" if not known_only or classify_tag(bool(m.group(1)), m.group(2)) else m.group(0),
            text,
        )
        if out == text:
            return out
        text = out


# --------------------------------------------------------------------------
# model types


@dataclass(frozen=True)
class LocBox:
    """Box on the 0..500 location grid."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __iter__(self) -> Iterator[int]:
        return iter((self.x1, self.y1, self.x2, self.y2))

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class Block:
    kind: BlockKind
    text: str = ""
    loc: Optional[LocBox] = None
    children: tuple["Block", ...] = ()
    code_lang: Optional[CodeLang] = None
    picture_classes: tuple[PictureClass, ...] = ()
    table: Optional[TableGrid] = None

    def __post_init__(self):
        kind = BlockKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "children", tuple(self.children))
        object.__setattr__(self, "picture_classes", tuple(PictureClass(p) for p in self.picture_classes))
        if self.code_lang is not None:
            object.__setattr__(self, "code_lang", CodeLang(self.code_lang))
        if self.loc is not None and not isinstance(self.loc, LocBox):
            object.__setattr__(self, "loc", LocBox(*self.loc))
        if kind not in VERBATIM_KINDS:
            object.__setattr__(self, "text", self.text.strip())


@dataclass(frozen=True)
class Page:
    blocks: tuple[Block, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))


@dataclass(frozen=True)
class Document:
    pages: tuple[Page, ...] = field(default_factory=lambda: (Page(),))

    def __post_init__(self):
        object.__setattr__(self, "pages", tuple(self.pages))

    @classmethod
    def single(cls, *blocks: Block) -> "Document":
        return cls((Page(blocks),))

    def iter_blocks(self) -> Iterator[tuple[tuple[int, ...], Block]]:
        """Depth-first ``(path, block)`` pairs; path starts with the page index."""

        def walk(path, block):
            yield path, block
            for i, child in enumerate(block.children):
                yield from walk(path + (i,), child)

        for p, page in enumerate(self.pages):
            for b, block in enumerate(page.blocks):
                yield from walk((p, b), block)


# --------------------------------------------------------------------------
# validation


def _err(code, msg, path):
    return Diagnostic(Severity.ERROR, code, msg, block_path=path)


def _check_loc(loc: LocBox, path) -> list[Diagnostic]:
    out = []
    values = loc.as_tuple()
    if any(not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= LOC_MAX for v in values):
        out.append(_err("loc-out-of-range", f"location {values} outside 0..{LOC_MAX}", path))
    elif loc.x1 > loc.x2 or loc.y1 > loc.y2:
        out.append(_err("loc-inverted", f"location {values} is inverted", path))
    return out


def _check_block(block: Block, parent: Optional[BlockKind], path) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    kind = block.kind
    if block.loc is not None:
        out.extend(_check_loc(block.loc, path))

    if parent is None:
        if kind is BlockKind.LIST_ITEM:
            out.append(_err("list-item-misplaced", "list_item at page level", path))
    elif kind not in allowed_children(parent):
        if kind is BlockKind.CAPTION:
            out.append(_err("caption-misplaced", f"caption under {parent.value}", path))
        elif kind is BlockKind.LIST_ITEM:
            out.append(_err("list-item-misplaced", f"list_item under {parent.value}", path))
        elif parent in LIST_KINDS:
            out.append(_err("list-child-invalid", f"{kind.value} inside {parent.value}", path))
        else:
            out.append(_err("child-not-allowed", f"{kind.value} under {parent.value}", path))

    if block.code_lang is not None and kind is not BlockKind.CODE:
        out.append(_err("code-lang-misplaced", f"code language on {kind.value}", path))
    if block.picture_classes and kind is not BlockKind.PICTURE:
        out.append(_err("picture-class-misplaced", f"picture classes on {kind.value}", path))

    if kind is BlockKind.OTSL and block.table is None:
        out.append(_err("table-missing", "otsl element without table", path))
    if block.table is not None:
        if kind not in (BlockKind.OTSL, BlockKind.DOCUMENT_INDEX):
            out.append(_err("table-misplaced", f"table on {kind.value}", path))
        for d in validate_grid(block.table):
            out.append(_err(d.code, d.message, path))
        if any(not isinstance(cell.text, str) or contains_markup(cell.text, known_only=False)
               for _, _, cell in block.table.origins()):
            out.append(_err("content-contains-tag", "table cell text contains markup", path))

    structural = kind in LIST_KINDS or kind is BlockKind.OTSL or block.table is not None
    if structural and block.text:
        out.append(_err("unexpected-content", f"{kind.value} cannot carry text", path))
    if block.text and contains_markup(block.text, known_only=kind in VERBATIM_KINDS):
        out.append(_err("content-contains-tag", "text would be read back as markup", path))

    for i, child in enumerate(block.children):
        out.extend(_check_block(child, kind, path + (i,)))
    return out


def validate(doc: Document) -> list[Diagnostic]:
    """Return one diagnostic per invariant violation; empty means valid."""
    if not doc.pages:
        return [Diagnostic(Severity.ERROR, "no-pages", "document has no pages")]
    out = []
    for p, page in enumerate(doc.pages):
        for b, block in enumerate(page.blocks):
            out.extend(_check_block(block, None, (p, b)))
    return out
