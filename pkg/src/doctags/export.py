"""Document export to Markdown, HTML and a lossless JSON form."""

from __future__ import annotations

import html
import json
from typing import Any

from .diagnostics import Diagnostic, DocTagsError, Severity
from .model import (
    PAGE_FURNITURE,
    Block,
    BlockKind,
    CodeLang,
    Document,
    LocBox,
    Page,
    validate,
)
from .otsl import CellRole, GridCell, TableGrid, grid_to_html

SCHEMA_VERSION = 1


# --------------------------------------------------------------------------
# Markdown


def _pipe_cell(text: str) -> str:
    return " ".join(text.split()).replace("|", "\\|")


def grid_to_markdown(grid: TableGrid) -> str:
    """Pipe table; merged cells keep their text in the top-left slot only."""
    rows = [[_pipe_cell(cell.text) if cell.origin else "" for cell in row] for row in grid.cells]
    lines = ["| " + " | ".join(rows[0]) + " |", "|" + "|".join(["---"] * grid.cols) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows[1:]]
    return "\n".join(lines)


def _md_blocks(block: Block, include_tables: bool, include_furniture: bool) -> list[str]:
    kind = block.kind
    if kind in PAGE_FURNITURE and not include_furniture:
        return []
    if kind is BlockKind.TITLE:
        return [f"# {block.text}"]
    if kind is BlockKind.SECTION_HEADER:
        return [f"## {block.text}"]
    if kind in (BlockKind.ORDERED_LIST, BlockKind.UNORDERED_LIST):
        ordered = kind is BlockKind.ORDERED_LIST
        lines = [
            f"{i}. {item.text}" if ordered else f"- {item.text}"
            for i, item in enumerate(block.children, 1)
        ]
        return ["\n".join(lines)] if lines else []
    if kind is BlockKind.CODE:
        lang = block.code_lang.value if block.code_lang not in (None, CodeLang("unknown")) else ""
        return [f"```{lang}\n{block.text}\n```"]
    if kind is BlockKind.FORMULA:
        return [f"$${block.text}$$"]
    if kind is BlockKind.PICTURE:
        alt = ", ".join(c.value for c in block.picture_classes)
        out = [f"![{alt}](#)"]
        if block.text:
            out.append(block.text)
        for child in block.children:
            out += _md_blocks(child, include_tables, include_furniture)
        return out
    if kind is BlockKind.OTSL or (kind is BlockKind.DOCUMENT_INDEX and block.table is not None):
        out = [grid_to_markdown(block.table)] if include_tables and block.table is not None else []
        for child in block.children:
            out += _md_blocks(child, include_tables, include_furniture)
        return out
    if kind is BlockKind.DOCUMENT_INDEX:
        lines = [f"- {line.strip()}" for line in block.text.splitlines() if line.strip()]
        return ["\n".join(lines)] if lines else []
    if kind is BlockKind.LIST_ITEM:
        return [f"- {block.text}"]
    # text, caption, footnote, page furniture
    return [block.text] if block.text else []


def to_markdown(doc: Document, include_page_furniture: bool = False, include_tables: bool = False) -> str:
    """Markdown in reading order.

    Tables are left out unless ``include_tables`` is set, and page headers and
    footers unless ``include_page_furniture`` is set.
    """
    chunks = []
    for page in doc.pages:
        for block in page.blocks:
            chunks += _md_blocks(block, include_tables, include_page_furniture)
    return "\n\n".join(chunks) + "\n" if chunks else ""


# --------------------------------------------------------------------------
# HTML

_HTML_TAG = {
    BlockKind.TITLE: "h1",
    BlockKind.SECTION_HEADER: "h2",
    BlockKind.TEXT: "p",
    BlockKind.LIST_ITEM: "li",
    BlockKind.ORDERED_LIST: "ol",
    BlockKind.UNORDERED_LIST: "ul",
}


def _loc_attr(block: Block) -> str:
    if block.loc is None:
        return ""
    return f' data-loc="{",".join(str(v) for v in block.loc.as_tuple())}"'


def _html_block(block: Block) -> str:
    kind, loc = block.kind, _loc_attr(block)
    esc = html.escape(block.text, quote=False)
    if kind in _HTML_TAG:
        tag = _HTML_TAG[kind]
        inner = "".join(_html_block(ch) for ch in block.children) if block.children else esc
        return f"<{tag}{loc}>{inner}</{tag}>"
    if kind is BlockKind.CODE:
        lang = f' class="language-{html.escape(block.code_lang.value)}"' if block.code_lang else ""
        return f"<pre{loc}><code{lang}>{esc}</code></pre>"
    if kind is BlockKind.FORMULA:
        return f'<div class="formula"{loc}>{esc}</div>'
    if kind is BlockKind.PICTURE:
        classes = " ".join(c.value for c in block.picture_classes)
        cls_attr = f' data-classes="{classes}"' if classes else ""
        body = f"<p>{esc}</p>" if block.text else ""
        captions = "".join(f"<figcaption>{html.escape(ch.text, quote=False)}</figcaption>"
                           for ch in block.children if ch.kind is BlockKind.CAPTION)
        tables = "".join(_html_block(ch) for ch in block.children if ch.kind is not BlockKind.CAPTION)
        return f"<figure{loc}{cls_attr}>{body}{tables}{captions}</figure>"
    if block.table is not None:
        table = grid_to_html(block.table).to_html()
        captions = "".join(f"<figcaption>{html.escape(ch.text, quote=False)}</figcaption>"
                           for ch in block.children if ch.kind is BlockKind.CAPTION)
        cls = "table" if kind is BlockKind.OTSL else "document-index"
        return f'<figure class="{cls}"{loc}>{table}{captions}</figure>'
    if kind is BlockKind.DOCUMENT_INDEX:
        items = "".join(f"<li>{html.escape(line.strip(), quote=False)}</li>"
                        for line in block.text.splitlines() if line.strip())
        return f'<nav class="document-index"{loc}><ul>{items}</ul></nav>'
    if kind is BlockKind.PAGE_HEADER:
        return f"<header{loc}>{esc}</header>"
    if kind is BlockKind.PAGE_FOOTER:
        return f"<footer{loc}>{esc}</footer>"
    # caption, footnote
    return f'<p class="{kind.value}"{loc}>{esc}</p>'


def to_html(doc: Document) -> str:
    """Semantic HTML; each non-empty page becomes a ``div.page`` container."""
    pages = []
    for i, page in enumerate(doc.pages, 1):
        if page.blocks:
            body = "".join(_html_block(b) for b in page.blocks)
            pages.append(f'<div class="page" data-page="{i}">{body}</div>')
    return "<html><body>" + "".join(pages) + "</body></html>"


# --------------------------------------------------------------------------
# JSON


def _cell_to_dict(cell: GridCell) -> dict:
    if not cell.origin:
        return {"anchor": list(cell.anchor) if cell.anchor is not None else None}
    out: dict[str, Any] = {"text": cell.text}
    if cell.row_span != 1:
        out["row_span"] = cell.row_span
    if cell.col_span != 1:
        out["col_span"] = cell.col_span
    if cell.role is not CellRole.BODY:
        out["role"] = cell.role.value
    return out


def _block_to_dict(block: Block) -> dict:
    out: dict[str, Any] = {"kind": block.kind.value, "text": block.text}
    if block.loc is not None:
        out["loc"] = list(block.loc.as_tuple())
    if block.code_lang is not None:
        out["code_lang"] = block.code_lang.value
    if block.picture_classes:
        out["picture_classes"] = [c.value for c in block.picture_classes]
    if block.table is not None:
        out["table"] = [[_cell_to_dict(c) for c in row] for row in block.table.cells]
    if block.children:
        out["children"] = [_block_to_dict(ch) for ch in block.children]
    return out


def to_json(doc: Document, indent: int | None = None) -> str:
    data = {
        "schema_version": SCHEMA_VERSION,
        "pages": [{"blocks": [_block_to_dict(b) for b in page.blocks]} for page in doc.pages],
    }
    return json.dumps(data, ensure_ascii=False, indent=indent)


def _cell_from_dict(d: dict) -> GridCell:
    if "anchor" in d:
        anchor = d["anchor"]
        return GridCell(origin=False, anchor=tuple(anchor) if anchor is not None else None)
    return GridCell(
        text=d.get("text", ""),
        row_span=int(d.get("row_span", 1)),
        col_span=int(d.get("col_span", 1)),
        role=CellRole(d.get("role", "body")),
    )


def _block_from_dict(d: dict) -> Block:
    table = d.get("table")
    return Block(
        kind=BlockKind(d["kind"]),
        text=d.get("text", ""),
        loc=LocBox(*d["loc"]) if d.get("loc") is not None else None,
        children=tuple(_block_from_dict(ch) for ch in d.get("children", ())),
        code_lang=d.get("code_lang"),
        picture_classes=tuple(d.get("picture_classes", ())),
        table=TableGrid(tuple(tuple(_cell_from_dict(c) for c in row) for row in table))
        if table is not None
        else None,
    )


def from_json(s: str) -> Document:
    """Inverse of ``to_json``; raises DocTagsError on bad or invalid payloads."""
    try:
        data = json.loads(s)
    except json.JSONDecodeError as exc:
        raise DocTagsError("malformed JSON", [Diagnostic(Severity.ERROR, "json-invalid", str(exc))]) from exc
    if not isinstance(data, dict) or data.get("schema_version") != SCHEMA_VERSION:
        version = data.get("schema_version") if isinstance(data, dict) else None
        raise DocTagsError(
            "unsupported document schema",
            [Diagnostic(Severity.ERROR, "schema-version-unsupported", f"schema_version {version!r}")],
        )
    try:
        doc = Document(tuple(Page(tuple(_block_from_dict(b) for b in p["blocks"])) for p in data["pages"]))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise DocTagsError("malformed document", [Diagnostic(Severity.ERROR, "json-invalid", repr(exc))]) from exc
    problems = validate(doc)
    if problems:
        raise DocTagsError("document violates model invariants", problems)
    return doc
