"""Diagnostics shared by the parser, validator, table decoder and exporters."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


# Stable diagnostic codes. Tests and the CLI rely on these names.
CODES: dict[str, str] = {
    # lexing / parsing
    "unknown-tag": "markup that looks like a tag but is not part of the DocTags vocabulary",
    "loc-out-of-range": "location value outside 0..500 (clamped)",
    "unknown-code-lang": "code language tag not in the supported list (mapped to 'unknown')",
    "missing-root": "input is not wrapped in <doctag>...</doctag>",
    "unclosed-tag": "an element was not closed before a sibling, page break or end of input",
    "unmatched-close-tag": "closing tag without a matching open element",
    "misplaced-tag": "tag is not allowed at this position",
    "untagged-text": "text outside of any element",
    "unexpected-text": "text where only structural tags are allowed",
    "trailing-content": "content after </doctag>",
    "incomplete-loc": "fewer than four location tags on an element",
    "extra-loc": "more than four location tags on an element",
    "missing-loc": "element carries no location tags",
    "repetition-truncated": "a repetition loop at the end of the input was cut off",
    "picture-table": "picture element carries a nested table",
    # model validation
    "no-pages": "document has no pages",
    "loc-inverted": "location box has x1 > x2 or y1 > y2",
    "caption-misplaced": "caption nested under an element other than picture/otsl",
    "list-item-misplaced": "list_item outside of ordered_list/unordered_list",
    "list-child-invalid": "list contains a child that is not a list_item",
    "child-not-allowed": "element kind does not admit this child",
    "code-lang-misplaced": "code language set on a non-code element",
    "picture-class-misplaced": "picture classes set on a non-picture element",
    "table-missing": "otsl element without a table payload",
    "table-misplaced": "table payload on an element other than otsl/document_index",
    "unexpected-content": "text content on an element that only carries structure",
    "content-contains-tag": "text content would be read back as markup",
    # OTSL
    "lcel-first-column": "<lcel> in the first column",
    "lcel-orphan": "<lcel> whose left neighbour belongs to a merge from another row",
    "ucel-first-row": "<ucel> in the first row",
    "ucel-orphan": "<ucel> whose upper neighbour belongs to a merge from another column",
    "xcel-without-neighbors": "<xcel> not inside a 2D merge reachable from left and above",
    "ragged-rows": "table rows have unequal length",
    "non-rectangular-merge": "merged region is not a filled rectangle",
    "missing-final-nl": "table token run does not end with <nl>",
    "unexpected-cell-text": "text after a cell tag that cannot carry content",
    "empty-full-cell": "<fcel> without content",
    "empty-table": "table without cells",
    "empty-row": "table row without cells",
    "grid-invalid": "table grid violates span consistency",
    "span-overlap": "HTML cell spans overlap",
    "span-out-of-bounds": "HTML rowspan reaches past the last row",
    # export / latex
    "schema-version-unsupported": "JSON document has an unknown schema_version",
    "json-invalid": "JSON payload does not describe a document",
    "unpaired-delimiter": "sized delimiter or \\left/\\right without partner",
    "unbalanced-brace": "unbalanced { or }",
    "missing-argument": "command or script without an argument",
    # evaluation
    "unknown-label": "layout label not covered by the label map (ignored)",
    "missing-prediction": "manifest item has no prediction with the same id",
    "item-failed": "manifest item could not be scored",
}


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str = ""
    span: Optional[tuple[int, int]] = None
    block_path: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if not self.code:
            raise ValueError("diagnostic code must be non-empty")
        if not self.message:
            object.__setattr__(self, "message", CODES.get(self.code, self.code))

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def to_dict(self) -> dict:
        return {
            "severity": self.severity.value,
            "code": self.code,
            "message": self.message,
            "span": list(self.span) if self.span is not None else None,
            "block_path": list(self.block_path) if self.block_path is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def error(code: str, message: str = "", **kw) -> Diagnostic:
    return Diagnostic(Severity.ERROR, code, message, **kw)


def warning(code: str, message: str = "", **kw) -> Diagnostic:
    return Diagnostic(Severity.WARNING, code, message, **kw)


def info(code: str, message: str = "", **kw) -> Diagnostic:
    return Diagnostic(Severity.INFO, code, message, **kw)


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.is_error for d in diagnostics)


class DocTagsError(ValueError):
    """Raised when an operation refuses invalid input; carries the findings."""

    def __init__(self, message: str, diagnostics: Iterable[Diagnostic] = ()):
        self.diagnostics = list(diagnostics)
        if self.diagnostics:
            codes = ", ".join(sorted({d.code for d in self.diagnostics}))
            message = f"{message} ({codes})"
        super().__init__(message)
