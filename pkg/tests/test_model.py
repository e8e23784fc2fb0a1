import pytest

from doctags import Block, BlockKind, CodeLang, Document, LocBox, Page, PictureClass, validate
from doctags.model import classify_tag, contains_markup, strip_markup
from doctags.otsl import GridCell, TableGrid, covered


def codes(doc):
    return [d.code for d in validate(doc)]


def test_vocabulary_sizes():
    assert len(BlockKind) == 15
    assert len(PictureClass) == 21
    assert CodeLang("C++") is CodeLang.CPP
    assert CodeLang("unknown") is CodeLang.UNKNOWN
    assert len(CodeLang) == 57


def test_valid_document_has_no_findings():
    doc = Document.single(
        Block(BlockKind.TITLE, "Title", LocBox(0, 0, 500, 20)),
        Block(BlockKind.UNORDERED_LIST, children=(Block(BlockKind.LIST_ITEM, "one"),)),
        Block(BlockKind.PICTURE, children=(Block(BlockKind.CAPTION, "fig"),), picture_classes=("logo",)),
        Block(BlockKind.OTSL, table=TableGrid.from_texts([["a"]]), children=(Block(BlockKind.CAPTION, "t"),)),
        Block(BlockKind.CODE, "x = 1\n", code_lang="Python"),
    )
    assert validate(doc) == []


def test_text_is_stripped_except_verbatim():
    assert Block(BlockKind.TEXT, "  hi \n").text == "hi"
    assert Block(BlockKind.CODE, "  hi \n").text == "  hi \n"
    assert Block(BlockKind.FORMULA, " x ").text == " x "


@pytest.mark.parametrize(
    "doc, code",
    [
        (Document(()), "no-pages"),
        (Document.single(Block(BlockKind.TEXT, "x", LocBox(0, 0, 501, 5))), "loc-out-of-range"),
        (Document.single(Block(BlockKind.TEXT, "x", LocBox(10, 0, 5, 5))), "loc-inverted"),
        (Document.single(Block(BlockKind.LIST_ITEM, "x")), "list-item-misplaced"),
        (Document.single(Block(BlockKind.TEXT, "x", children=(Block(BlockKind.CAPTION, "c"),))), "caption-misplaced"),
        (Document.single(Block(BlockKind.ORDERED_LIST, children=(Block(BlockKind.TEXT, "c"),))), "list-child-invalid"),
        (Document.single(Block(BlockKind.TEXT, "x", code_lang="Python")), "code-lang-misplaced"),
        (Document.single(Block(BlockKind.TEXT, "x", picture_classes=("logo",))), "picture-class-misplaced"),
        (Document.single(Block(BlockKind.OTSL)), "table-missing"),
        (Document.single(Block(BlockKind.TEXT, "x", table=TableGrid.from_texts([["a"]]))), "table-misplaced"),
        (Document.single(Block(BlockKind.TEXT, "a <text> b")), "content-contains-tag"),
        (Document.single(Block(BlockKind.TEXT, "a <b> c")), "content-contains-tag"),
        (Document.single(Block(BlockKind.CODE, "x</code>")), "content-contains-tag"),
        (Document.single(Block(BlockKind.UNORDERED_LIST, "stray")), "unexpected-content"),
        (Document.single(Block(BlockKind.PICTURE, children=(Block(BlockKind.TEXT, "t"),))), "child-not-allowed"),
    ],
)
def test_validate_findings(doc, code):
    assert code in codes(doc)


def test_verbatim_may_hold_unknown_markup():
    assert validate(Document.single(Block(BlockKind.CODE, "<div>x</div>"))) == []


def test_cell_text_with_markup_is_rejected():
    grid = TableGrid.from_texts([["<b>x</b>"]])
    assert "content-contains-tag" in codes(Document.single(Block(BlockKind.OTSL, table=grid)))


def test_invalid_grid_is_reported():
    bad = TableGrid(((GridCell(text="a", col_span=2), GridCell(text="b")),))
    assert "grid-invalid" in codes(Document.single(Block(BlockKind.OTSL, table=bad)))


def test_grid_from_origins_rejects_overlap():
    with pytest.raises(ValueError):
        TableGrid.from_origins(2, 2, {(0, 0): GridCell(text="a", row_span=2), (1, 0): GridCell(text="b")})
    with pytest.raises(ValueError):
        TableGrid.from_origins(1, 1, {(0, 0): GridCell(text="a", col_span=2)})


def test_from_origins_fills_covered_slots():
    grid = TableGrid.from_origins(2, 2, {(0, 0): GridCell(text="a", row_span=2, col_span=2)})
    assert grid.cells[1][1] == covered((0, 0))
    assert grid.rows == grid.cols == 2


def test_iter_blocks_paths():
    doc = Document(
        (Page((Block(BlockKind.TEXT, "a"),)),
         Page((Block(BlockKind.ORDERED_LIST, children=(Block(BlockKind.LIST_ITEM, "i"),)),)))
    )
    assert [p for p, _ in doc.iter_blocks()] == [(0, 0), (1, 0), (1, 0, 0)]


def test_tag_classification():
    assert classify_tag(False, "text") == "open"
    assert classify_tag(True, "text") == "close"
    assert classify_tag(False, "loc_7") == "loc"
    assert classify_tag(False, "page_break") == "page_break"
    assert classify_tag(False, "fcel") == "cell"
    assert classify_tag(False, "_Python_") == "code_lang"
    assert classify_tag(False, "bar_chart") == "picture_class"
    assert classify_tag(False, "div") is None


def test_markup_helpers():
    assert contains_markup("a <text> b", known_only=True)
    assert not contains_markup("a <div> b", known_only=True)
    assert contains_markup("a <div> b", known_only=False)
    assert not contains_markup("a < b > c", known_only=False)
    assert strip_markup("<<text>text>x", known_only=True) == "x"
