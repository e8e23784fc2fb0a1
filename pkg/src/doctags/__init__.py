"""DocTags markup toolkit: parsing and repair, OTSL tables, export, metrics."""

from .diagnostics import Diagnostic, DocTagsError, Severity
from .model import (
    Block,
    BlockKind,
    CodeLang,
    Document,
    LocBox,
    Page,
    PictureClass,
    validate,
)
from .otsl import CellRole, CellTag, GridCell, HtmlNode, TableGrid
from .parser import ParseMode, detect_repetition, parse, repair, serialize, tokenize

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlockKind",
    "CellRole",
    "CellTag",
    "CodeLang",
    "Diagnostic",
    "DocTagsError",
    "Document",
    "GridCell",
    "HtmlNode",
    "LocBox",
    "Page",
    "ParseMode",
    "PictureClass",
    "Severity",
    "TableGrid",
    "detect_repetition",
    "parse",
    "repair",
    "serialize",
    "tokenize",
    "validate",
]
