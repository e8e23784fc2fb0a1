"""OTSL table structure: token runs <-> rectangular cell grids <-> HTML tables.

An OTSL run is a row-major sequence of cell tags, each row terminated by
``nl``.  Content-carrying tags (``fcel``, ``ched``, ``rhed``, ``srow``) are
followed by the cell text.  Merges are expressed by ``lcel`` (continue the
cell on the left), ``ucel`` (continue the cell above) and ``xcel`` (interior
of a two-dimensional merge).
"""

from __future__ import annotations

import html as _html
from dataclasses import dataclass, field
from enum import Enum
from html.parser import HTMLParser
from typing import Iterable, Mapping, Optional, Sequence, Union

from .diagnostics import Diagnostic, DocTagsError, Severity


class CellTag(str, Enum):
    FCEL = "fcel"
    ECEL = "ecel"
    LCEL = "lcel"
    UCEL = "ucel"
    XCEL = "xcel"
    CHED = "ched"
    RHED = "rhed"
    SROW = "srow"
    NL = "nl"


CONTENT_TAGS = frozenset({CellTag.FCEL, CellTag.CHED, CellTag.RHED, CellTag.SROW})


class CellRole(str, Enum):
    BODY = "body"
    COLUMN_HEADER = "column_header"
    ROW_HEADER = "row_header"
    SECTION_ROW = "section_row"


_TAG_ROLE = {
    CellTag.FCEL: CellRole.BODY,
    CellTag.ECEL: CellRole.BODY,
    CellTag.CHED: CellRole.COLUMN_HEADER,
    CellTag.RHED: CellRole.ROW_HEADER,
    CellTag.SROW: CellRole.SECTION_ROW,
}
_ROLE_TAG = {
    CellRole.COLUMN_HEADER: CellTag.CHED,
    CellRole.ROW_HEADER: CellTag.RHED,
    CellRole.SECTION_ROW: CellTag.SROW,
}

OtslToken = tuple[CellTag, Optional[str]]


@dataclass(frozen=True)
class GridCell:
    """One slot of a table grid.

    Origin slots hold the text, spans and role of a (possibly merged) cell.
    Covered slots have ``origin=False`` and point at their origin through
    ``anchor``.
    """

    origin: bool = True
    text: str = ""
    row_span: int = 1
    col_span: int = 1
    role: CellRole = CellRole.BODY
    anchor: Optional[tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "text", self.text.strip())
        object.__setattr__(self, "role", CellRole(self.role))
        if self.anchor is not None:
            object.__setattr__(self, "anchor", tuple(self.anchor))

    @property
    def empty(self) -> bool:
        return self.origin and self.text == ""


def covered(anchor: tuple[int, int]) -> GridCell:
    return GridCell(origin=False, anchor=anchor)


@dataclass(frozen=True)
class TableGrid:
    cells: tuple[tuple[GridCell, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(tuple(row) for row in self.cells))

    @property
    def rows(self) -> int:
        return len(self.cells)

    @property
    def cols(self) -> int:
        return len(self.cells[0]) if self.cells else 0

    def origins(self):
        """Yield ``(row, col, cell)`` for every origin slot, row-major."""
        for r, row in enumerate(self.cells):
            for c, cell in enumerate(row):
                if cell.origin:
                    yield r, c, cell

    @classmethod
    def from_origins(
        cls, n_rows: int, n_cols: int, origins: Mapping[tuple[int, int], GridCell]
    ) -> "TableGrid":
        """Build a grid from origin cells; unlisted slots become empty cells.

        Raises ValueError when spans overlap or leave the grid.
        """
        slots: list[list[Optional[GridCell]]] = [[None] * n_cols for _ in range(n_rows)]
        for (r, c), cell in sorted(origins.items()):
            if r + cell.row_span > n_rows or c + cell.col_span > n_cols:
                raise ValueError(f"cell at {(r, c)} spans outside a {n_rows}x{n_cols} grid")
            for i in range(r, r + cell.row_span):
                for j in range(c, c + cell.col_span):
                    if slots[i][j] is not None:
                        raise ValueError(f"slot {(i, j)} covered twice")
                    slots[i][j] = cell if (i, j) == (r, c) else covered((r, c))
        return cls(tuple(tuple(s if s is not None else GridCell() for s in row) for row in slots))

    @classmethod
    def from_texts(cls, rows: Sequence[Sequence[str]]) -> "TableGrid":
        """Grid without merges from a list of rows of strings."""
        return cls(tuple(tuple(GridCell(text=t) for t in row) for row in rows))


def validate_grid(grid: TableGrid) -> list[Diagnostic]:
    """Check rectangularity and span consistency; one diagnostic per problem."""
    out = []

    def bad(msg):
        out.append(Diagnostic(Severity.ERROR, "grid-invalid", msg))

    if grid.rows < 1 or grid.cols < 1:
        bad("grid must have at least one row and one column")
        return out
    for r, row in enumerate(grid.cells):
        if len(row) != grid.cols:
            bad(f"row {r} has {len(row)} slots, expected {grid.cols}")
    if out:
        return out

    owner: dict[tuple[int, int], tuple[int, int]] = {}
    for r, c, cell in grid.origins():
        if cell.row_span < 1 or cell.col_span < 1:
            bad(f"cell {(r, c)} has a non-positive span")
            continue
        if cell.anchor not in (None, (r, c)):
            bad(f"origin cell {(r, c)} carries a foreign anchor")
        if r + cell.row_span > grid.rows or c + cell.col_span > grid.cols:
            bad(f"cell {(r, c)} spans outside the grid")
            continue
        for i in range(r, r + cell.row_span):
            for j in range(c, c + cell.col_span):
                if (i, j) == (r, c):
                    continue
                if (i, j) in owner:
                    bad(f"slot {(i, j)} covered by {owner[i, j]} and {(r, c)}")
                owner[i, j] = (r, c)
                if grid.cells[i][j].origin:
                    bad(f"slot {(i, j)} lies inside cell {(r, c)} but is an origin")

    for r, row in enumerate(grid.cells):
        for c, cell in enumerate(row):
            if cell.origin:
                continue
            if (r, c) not in owner:
                bad(f"covered slot {(r, c)} is not inside any cell")
            elif cell.anchor != owner[r, c]:
                bad(f"covered slot {(r, c)} anchors to {cell.anchor}, expected {owner[r, c]}")
            if cell.text or cell.row_span != 1 or cell.col_span != 1 or cell.role is not CellRole.BODY:
                bad(f"covered slot {(r, c)} carries cell data")
    return out


def _tok(token) -> OtslToken:
    tag, text = token if isinstance(token, tuple) else (token, None)
    return CellTag(tag), text


def decode(tokens: Iterable[Union[OtslToken, CellTag, str]], strict: bool = False):
    """Resolve an OTSL run into a ``TableGrid``.

    Returns ``(grid, diagnostics)``.  Rule violations are reported with error
    severity when ``strict`` is set and as warnings otherwise; in both cases
    the offending cell is degraded to an empty cell so a grid is always built.
    """
    sev = Severity.ERROR if strict else Severity.WARNING
    diags: list[Diagnostic] = []

    def report(code, msg):
        diags.append(Diagnostic(sev, code, msg))

    rows: list[list[tuple[CellTag, str]]] = [[]]
    for i, token in enumerate(tokens):
        tag, text = _tok(token)
        text = (text or "").strip()
        if tag is CellTag.NL:
            if text:
                report("unexpected-cell-text", f"text after <nl> at token {i}")
            rows.append([])
            continue
        if text and tag not in CONTENT_TAGS:
            report("unexpected-cell-text", f"text after <{tag.value}> at token {i}")
            text = ""
        if tag is CellTag.FCEL and not text:
            report("empty-full-cell", f"<fcel> without content at token {i}")
            tag = CellTag.ECEL
        rows[-1].append((tag, text))
    if rows[-1]:
        report("missing-final-nl", "table run does not end with <nl>")
    else:
        rows.pop()
    if any(not row for row in rows):
        report("empty-row", "table contains rows without cells")
        rows = [row for row in rows if row]
    if not rows:
        report("empty-table", "table has no cells")
        return TableGrid(((GridCell(),),)), diags

    width = max(len(row) for row in rows)
    if any(len(row) != width for row in rows):
        report("ragged-rows", f"row lengths {[len(row) for row in rows]} differ")
        for row in rows:
            row.extend([(CellTag.ECEL, "")] * (width - len(row)))

    height = len(rows)
    tags = [[t for t, _ in row] for row in rows]
    anchor = [[(r, c) for c in range(width)] for r in range(height)]

    def degrade(r, c, code, msg):
        report(code, f"{msg} at row {r}, column {c}")
        tags[r][c] = CellTag.ECEL
        rows[r][c] = (CellTag.ECEL, "")
        anchor[r][c] = (r, c)

    for r in range(height):
        for c in range(width):
            tag = tags[r][c]
            if tag is CellTag.LCEL:
                if c == 0:
                    degrade(r, c, "lcel-first-column", "<lcel> in first column")
                elif anchor[r][c - 1][0] != r:
                    degrade(r, c, "lcel-orphan", "<lcel> continues a cell from another row")
                else:
                    anchor[r][c] = anchor[r][c - 1]
            elif tag is CellTag.UCEL:
                if r == 0:
                    degrade(r, c, "ucel-first-row", "<ucel> in first row")
                elif anchor[r - 1][c][1] != c:
                    degrade(r, c, "ucel-orphan", "<ucel> continues a cell from another column")
                else:
                    anchor[r][c] = anchor[r - 1][c]
            elif tag is CellTag.XCEL:
                left = anchor[r][c - 1] if c > 0 else None
                up = anchor[r - 1][c] if r > 0 else None
                if left is None or left != up or left[0] == r or left[1] == c:
                    degrade(r, c, "xcel-without-neighbors", "<xcel> outside a 2D merge")
                else:
                    anchor[r][c] = left

    regions: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for r in range(height):
        for c in range(width):
            regions.setdefault(anchor[r][c], []).append((r, c))
    spans: dict[tuple[int, int], tuple[int, int]] = {}
    for (r0, c0), slots in regions.items():
        h = max(r for r, _ in slots) - r0 + 1
        w = max(c for _, c in slots) - c0 + 1
        if len(slots) != h * w:
            for r, c in slots:
                if (r, c) != (r0, c0):
                    degrade(r, c, "non-rectangular-merge", f"merge from {(r0, c0)} is not rectangular")
                    spans[r, c] = (1, 1)
            h = w = 1
        spans[r0, c0] = (h, w)

    cells = []
    for r in range(height):
        out_row = []
        for c in range(width):
            if anchor[r][c] != (r, c):
                out_row.append(covered(anchor[r][c]))
                continue
            tag, text = rows[r][c]
            h, w = spans[r, c]
            out_row.append(GridCell(text=text, row_span=h, col_span=w, role=_TAG_ROLE[tag]))
        cells.append(tuple(out_row))
    return TableGrid(tuple(cells)), diags


def encode(grid: TableGrid) -> list[OtslToken]:
    """Row-major OTSL run for ``grid``; raises DocTagsError for invalid grids."""
    problems = validate_grid(grid)
    if problems:
        raise DocTagsError("cannot encode an invalid table grid", problems)
    out: list[OtslToken] = []
    for r, row in enumerate(grid.cells):
        for c, cell in enumerate(row):
            if cell.origin:
                if cell.role is not CellRole.BODY:
                    out.append((_ROLE_TAG[cell.role], cell.text or None))
                elif cell.empty:
                    out.append((CellTag.ECEL, None))
                else:
                    out.append((CellTag.FCEL, cell.text))
            else:
                ar, ac = cell.anchor
                if ar == r:
                    out.append((CellTag.LCEL, None))
                elif ac == c:
                    out.append((CellTag.UCEL, None))
                else:
                    out.append((CellTag.XCEL, None))
        out.append((CellTag.NL, None))
    return out


# --------------------------------------------------------------------------
# HTML tables


@dataclass
class HtmlNode:
    """Minimal element tree for HTML tables (table/tr/td/th)."""

    tag: str
    attrs: dict = field(default_factory=dict)
    text: str = ""
    children: list = field(default_factory=list)

    def size(self) -> int:
        return 1 + sum(child.size() for child in self.children)

    def to_html(self) -> str:
        attrs = "".join(f' {k}="{_html.escape(str(v), quote=True)}"' for k, v in self.attrs.items())
        inner = _html.escape(self.text, quote=False) + "".join(ch.to_html() for ch in self.children)
        return f"<{self.tag}{attrs}>{inner}</{self.tag}>"


_CELL_TAGS = ("td", "th")
_PASSTHROUGH = ("thead", "tbody", "tfoot")


class _TableBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root: Optional[HtmlNode] = None
        self.stack: list[HtmlNode] = []

    def handle_starttag(self, tag, attrs):
        if tag in ("br",):
            if self.stack:
                self.stack[-1].text += " "
            return
        node = HtmlNode(tag, {k: (v if v is not None else "") for k, v in attrs})
        if self.stack:
            self.stack[-1].children.append(node)
        elif self.root is None:
            self.root = node
        self.stack.append(node)

    def handle_endtag(self, tag):
        for i in range(len(self.stack) - 1, -1, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return

    def handle_data(self, data):
        if self.stack:
            self.stack[-1].text += data


def _flatten_cell_text(node: HtmlNode) -> str:
    # plain cells keep their text as is (minus the outer whitespace), so
    # grid_to_html and html_to_grid stay exact inverses
    if not node.children:
        return node.text.strip()
    parts = [node.text] + [_flatten_cell_text(ch) for ch in node.children]
    return " ".join(" ".join(parts).split())


def parse_html_table(source: str) -> HtmlNode:
    """Parse HTML markup into an ``HtmlNode`` tree rooted at the first table.

    Sections (thead/tbody/tfoot) are flattened.  Inline markup inside a cell
    is reduced to its text with whitespace collapsed.
    """
    builder = _TableBuilder()
    builder.feed(source)
    builder.close()
    root = builder.root
    if root is None:
        raise ValueError("no HTML element found")
    if root.tag != "table":
        found = _find(root, "table")
        if found is None:
            raise ValueError(f"expected a <table> root, got <{root.tag}>")
        root = found
    table = HtmlNode("table", dict(root.attrs))
    for tr in _rows(root):
        row = HtmlNode("tr")
        for cell in tr.children:
            if cell.tag in _CELL_TAGS:
                row.children.append(HtmlNode(cell.tag, dict(cell.attrs), _flatten_cell_text(cell)))
        table.children.append(row)
    return table


def _find(node: HtmlNode, tag: str) -> Optional[HtmlNode]:
    if node.tag == tag:
        return node
    for ch in node.children:
        hit = _find(ch, tag)
        if hit is not None:
            return hit
    return None


def _rows(node: HtmlNode):
    for ch in node.children:
        if ch.tag == "tr":
            yield ch
        elif ch.tag in _PASSTHROUGH:
            yield from _rows(ch)


def grid_to_html(grid: TableGrid) -> HtmlNode:
    table = HtmlNode("table")
    for r, row in enumerate(grid.cells):
        tr = HtmlNode("tr")
        for c, cell in enumerate(row):
            if not cell.origin:
                continue
            attrs = {}
            if cell.row_span > 1:
                attrs["rowspan"] = str(cell.row_span)
            if cell.col_span > 1:
                attrs["colspan"] = str(cell.col_span)
            tag = "td"
            if cell.role is CellRole.COLUMN_HEADER:
                tag = "th"
            elif cell.role is CellRole.ROW_HEADER:
                tag = "th"
                attrs["scope"] = "row"
            elif cell.role is CellRole.SECTION_ROW:
                attrs["class"] = "section-row"
            tr.children.append(HtmlNode(tag, attrs, cell.text))
        table.children.append(tr)
    return table


def _span(value, diags, what) -> int:
    if value is None or value == "":
        return 1
    try:
        n = int(str(value).strip())
    except ValueError:
        n = 0
    if n < 1:
        diags.append(Diagnostic(Severity.WARNING, "grid-invalid", f"bad {what} {value!r}, using 1"))
        return 1
    return n


def _role(node: HtmlNode) -> CellRole:
    if node.tag == "th":
        return CellRole.ROW_HEADER if node.attrs.get("scope") == "row" else CellRole.COLUMN_HEADER
    if "section-row" in node.attrs.get("class", "").split():
        return CellRole.SECTION_ROW
    return CellRole.BODY


def html_to_grid(table: Union[HtmlNode, str]):
    """Lay out an HTML table into a ``TableGrid``; returns ``(grid, diagnostics)``.

    Follows the usual HTML slot-filling procedure.  Overlapping spans are
    resolved in favour of the cell placed first; short rows are padded.
    """
    if isinstance(table, str):
        table = parse_html_table(table)
    if table.tag != "table":
        raise ValueError(f"expected a <table> root, got <{table.tag}>")
    diags: list[Diagnostic] = []
    trs = list(_rows(table))
    n_rows = len(trs)
    occupied: set[tuple[int, int]] = set()
    origins: dict[tuple[int, int], GridCell] = {}
    for r, tr in enumerate(trs):
        c = 0
        for node in tr.children:
            if node.tag not in _CELL_TAGS:
                continue
            while (r, c) in occupied:
                c += 1
            rs = _span(node.attrs.get("rowspan"), diags, "rowspan")
            cs = _span(node.attrs.get("colspan"), diags, "colspan")
            if r + rs > n_rows:
                diags.append(Diagnostic(Severity.WARNING, "span-out-of-bounds", f"rowspan {rs} at row {r}"))
                rs = n_rows - r
            w = 0
            while w < cs and (r, c + w) not in occupied:
                w += 1
            h = 1
            while h < rs and all((r + h, c + j) not in occupied for j in range(w)):
                h += 1
            if (h, w) != (rs, cs):
                diags.append(Diagnostic(Severity.WARNING, "span-overlap", f"cell at row {r}, column {c} shrunk"))
            for i in range(r, r + h):
                for j in range(c, c + w):
                    occupied.add((i, j))
            text = node.text if not node.children else _flatten_cell_text(node)
            origins[r, c] = GridCell(text=text, row_span=h, col_span=w, role=_role(node))
            c += w
    n_cols = max((c for _, c in occupied), default=-1) + 1
    if n_rows == 0 or n_cols == 0:
        diags.append(Diagnostic(Severity.WARNING, "empty-table", "table has no cells"))
        return TableGrid(((GridCell(),),)), diags
    if len(occupied) != n_rows * n_cols:
        diags.append(Diagnostic(Severity.WARNING, "ragged-rows", "short rows padded with empty cells"))
    return TableGrid.from_origins(n_rows, n_cols, origins), diags
