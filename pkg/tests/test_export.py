import json
import random
import re

import pytest
from hypothesis import given, settings, strategies as st

from doctags import Block, BlockKind, DocTagsError, Document, LocBox, Page, TableGrid
from doctags.export import SCHEMA_VERSION, from_json, grid_to_markdown, to_html, to_json, to_markdown
from doctags.model import PAGE_FURNITURE, contains_markup
from doctags.otsl import GridCell

from generators import all_kinds_document, random_document


# ---------------------------------------------------------------- Markdown


def test_markdown_heading_and_paragraph():
    doc = Document.single(Block(BlockKind.SECTION_HEADER, "Intro"), Block(BlockKind.TEXT, "Hi"))
    assert to_markdown(doc) == "## Intro\n\nHi\n"


def test_markdown_drops_furniture_by_default():
    doc = Document.single(Block(BlockKind.PAGE_FOOTER, "3"))
    assert to_markdown(doc) == ""
    assert to_markdown(doc, include_page_furniture=True) == "3\n"


def test_markdown_code_keeps_indentation():
    doc = Document.single(Block(BlockKind.CODE, "a;\n b;", code_lang="C++"))
    assert to_markdown(doc) == "```C++\na;\n b;\n```\n"


def test_markdown_lists_and_title():
    doc = Document.single(
        Block(BlockKind.TITLE, "T"),
        Block(BlockKind.ORDERED_LIST, children=(Block(BlockKind.LIST_ITEM, "x"), Block(BlockKind.LIST_ITEM, "y"))),
        Block(BlockKind.UNORDERED_LIST, children=(Block(BlockKind.LIST_ITEM, "z"),)),
    )
    assert to_markdown(doc) == "# T\n\n1. x\n2. y\n\n- z\n"


def test_markdown_formula_and_picture():
    doc = Document.single(
        Block(BlockKind.FORMULA, "x^{2}"),
        Block(BlockKind.PICTURE, picture_classes=("bar_chart",), children=(Block(BlockKind.CAPTION, "c"),)),
    )
    assert to_markdown(doc) == "$$x^{2}$$\n\n![bar_chart](#)\n\nc\n"


def test_markdown_tables_opt_in_and_flattened():
    grid = TableGrid.from_origins(2, 2, {(0, 0): GridCell(text="H", col_span=2), (1, 0): GridCell(text="a|b"),
                                         (1, 1): GridCell(text="c")})
    doc = Document.single(Block(BlockKind.OTSL, table=grid))
    assert to_markdown(doc) == ""
    assert to_markdown(doc, include_tables=True) == "| H |  |\n|---|---|\n| a\\|b | c |\n"
    assert grid_to_markdown(grid).count("\n") == 2


def test_markdown_textual_document_index():
    doc = Document.single(Block(BlockKind.DOCUMENT_INDEX, "Intro 1\nMethods 4"))
    assert to_markdown(doc) == "- Intro 1\n- Methods 4\n"


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans(), st.booleans())
def test_markdown_has_no_doctags_tokens(seed, tables, furniture):
    doc = random_document(random.Random(seed))
    md = to_markdown(doc, include_page_furniture=furniture, include_tables=tables)
    assert not contains_markup(md, known_only=True)
    assert md == to_markdown(doc, include_page_furniture=furniture, include_tables=tables)


_EXCLUDED = {BlockKind.OTSL, BlockKind.PICTURE, BlockKind.FORMULA} | PAGE_FURNITURE


def _naive_strip(md):
    """Drop Markdown block syntax line by line; fenced code stays verbatim."""
    out, fenced = [], False
    for line in md.split("\n"):
        if line.startswith("```"):
            fenced = not fenced
            continue
        if not fenced:
            line = re.sub(r"^(#{1,6} |- |\d+\. )", "", line)
        out.append(line)
    return " ".join(" ".join(out).split())


def _plain_text(block):
    parts = [block.text] + [_plain_text(ch) for ch in block.children]
    return " ".join(p for p in parts if p)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_markdown_strip_recovers_text(seed):
    doc = random_document(random.Random(seed), max_blocks=8)
    kept = [[b for b in page.blocks if b.kind not in _EXCLUDED and b.table is None] for page in doc.pages]
    doc = Document(tuple(Page(tuple(blocks)) for blocks in kept))
    expected = " ".join(_plain_text(b) for blocks in kept for b in blocks).split()
    assert _naive_strip(to_markdown(doc)) == " ".join(expected)


# ---------------------------------------------------------------- HTML


def test_html_empty_document():
    assert to_html(Document()) == "<html><body></body></html>"


def test_html_table_with_caption():
    doc = Document.single(Block(BlockKind.OTSL, loc=LocBox(1, 2, 3, 4), table=TableGrid.from_texts([["x"]]),
                                children=(Block(BlockKind.CAPTION, "Tab 1"),)))
    assert to_html(doc) == ('<html><body><div class="page" data-page="1"><figure class="table" data-loc="1,2,3,4">'
                            "<table><tr><td>x</td></tr></table><figcaption>Tab 1</figcaption></figure>"
                            "</div></body></html>")


def test_html_pages_in_order():
    doc = Document((Page((Block(BlockKind.TEXT, "one"),)), Page((Block(BlockKind.TEXT, "two"),))))
    html = to_html(doc)
    assert html.count('<div class="page"') == 2
    assert html.index('data-page="1"><p>one</p>') < html.index('data-page="2"><p>two</p>')


def test_html_escapes_and_code_language():
    doc = Document.single(Block(BlockKind.TEXT, "a<b & c"), Block(BlockKind.CODE, "<div>", code_lang="HTML"))
    html = to_html(doc)
    assert "<p>a&lt;b &amp; c</p>" in html
    assert '<pre><code class="language-HTML">&lt;div&gt;</code></pre>' in html


# ---------------------------------------------------------------- JSON


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_json_round_trip(seed):
    doc = random_document(random.Random(seed))
    assert from_json(to_json(doc)) == doc


def test_json_all_kinds():
    doc = all_kinds_document(random.Random(7))
    assert {b.kind for _, b in doc.iter_blocks()} == set(BlockKind)
    assert from_json(to_json(doc, indent=2)) == doc


def test_json_schema_version_checked():
    payload = json.loads(to_json(Document.single(Block(BlockKind.TEXT, "x"))))
    assert payload["schema_version"] == SCHEMA_VERSION
    payload["schema_version"] = 99
    with pytest.raises(DocTagsError) as err:
        from_json(json.dumps(payload))
    assert [d.code for d in err.value.diagnostics] == ["schema-version-unsupported"]


@pytest.mark.parametrize("payload", [
    "not json",
    '{"schema_version": 1}',
    '{"schema_version": 1, "pages": [{"blocks": [{"kind": "nope"}]}]}',
])
def test_json_malformed(payload):
    with pytest.raises(DocTagsError):
        from_json(payload)


def test_json_rejects_invariant_violation():
    bad = {"schema_version": 1, "pages": [{"blocks": [{"kind": "list_item", "text": "x"}]}]}
    with pytest.raises(DocTagsError) as err:
        from_json(json.dumps(bad))
    assert "list-item-misplaced" in [d.code for d in err.value.diagnostics]
