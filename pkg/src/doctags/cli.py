"""``doctags`` command line: convert, validate, repair and eval.

Exit codes: 0 success, 1 validation or parse failure, 2 usage error,
3 batch finished but some items were skipped.  Diagnostics go to stderr as
one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Optional, Sequence

from . import __version__
from .diagnostics import Diagnostic, Severity
from .export import to_html, to_json, to_markdown
from .geometry import (
    Detection,
    PixelBox,
    detections_from_document,
    evaluate_map,
    load_label_map,
    map_labels,
)
from .latex_norm import NormPolicy, default_policy, normalize
from .metrics import teds_pair, text_scores
from .model import Block, BlockKind, Document
from .otsl import grid_to_html
from .parser import ParseMode, parse, serialize

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2, 3
REPORT_SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


def _emit(diags: Sequence[Diagnostic], source: str, stream=None) -> None:
    stream = stream or sys.stderr
    for d in diags:
        stream.write(json.dumps({**d.to_dict(), "file": source}, ensure_ascii=False) + "\n")


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# convert / validate / repair


def cmd_convert(args) -> int:
    source = _read(args.input)
    mode = ParseMode.LENIENT if args.lenient else ParseMode.STRICT
    doc, diags = parse(source, mode)
    _emit(diags, args.input)
    if doc is None:
        return EXIT_INVALID
    if args.to == "markdown":
        out = to_markdown(doc, args.include_page_furniture, args.include_tables)
    elif args.to == "html":
        out = to_html(doc) + "\n"
    else:
        out = to_json(doc, indent=2) + "\n"
    _write(args.output, out)
    return EXIT_OK


def cmd_validate(args) -> int:
    doc, diags = parse(_read(args.input), ParseMode.STRICT)
    _emit(diags, args.input, sys.stdout)
    if doc is None or any(d.severity is Severity.ERROR for d in diags):
        return EXIT_INVALID
    return EXIT_OK


def cmd_repair(args) -> int:
    doc, diags = parse(_read(args.input), ParseMode.LENIENT)
    _emit(diags, args.input)
    if not any(page.blocks for page in doc.pages):
        if not any(d.code == "missing-root" for d in diags):
            _emit([Diagnostic(Severity.ERROR, "missing-root", "nothing left to write after repair")], args.input)
        return EXIT_INVALID
    _write(args.out, serialize(doc) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# eval


def _read_manifest(path: str) -> list[dict]:
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    for lineno, line in enumerate(_read(path).splitlines(), 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            entry = {"_error": f"line {lineno}: {exc.msg}"}
        if not isinstance(entry, dict):
            entry = {"_error": f"line {lineno}: not an object"}
        entry["_base"] = base
        entry.setdefault("id", f"#line{lineno}")
        entries.append(entry)
    return entries


def _payload(entry: dict) -> str:
    if "_error" in entry:
        raise ValueError(entry["_error"])
    if "payload" in entry:
        return str(entry["payload"])
    if "path" in entry:
        path = os.path.join(entry["_base"], entry["path"])
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    raise ValueError("entry has neither payload nor path")


def _doc(entry: dict) -> Document:
    return parse(_payload(entry), ParseMode.LENIENT).document


def _first(doc: Document, pred: Callable[[Block], bool]) -> Optional[Block]:
    for _, block in doc.iter_blocks():
        if pred(block):
            return block
    return None


def _text_of(entry: dict) -> str:
    if entry.get("format", "text") == "doctags":
        return to_markdown(_doc(entry))
    return _payload(entry)


def _table_of(entry: dict) -> str:
    fmt = entry.get("format", "html")
    if fmt == "html":
        return _payload(entry)
    if fmt == "otsl":
        doc = parse(f"<doctag><otsl>{_payload(entry)}</otsl></doctag>", ParseMode.LENIENT).document
    elif fmt == "doctags":
        doc = _doc(entry)
    else:
        raise ValueError(f"unsupported table format {fmt!r}")
    block = _first(doc, lambda b: b.table is not None)
    if block is None:
        raise ValueError("no table in document")
    return grid_to_html(block.table).to_html()


def _formula_of(entry: dict) -> str:
    fmt = entry.get("format", "latex")
    if fmt == "latex":
        return _payload(entry)
    if fmt == "doctags":
        block = _first(_doc(entry), lambda b: b.kind is BlockKind.FORMULA)
        if block is None:
            raise ValueError("no formula in document")
        return block.text
    raise ValueError(f"unsupported formula format {fmt!r}")


def _detections_of(entry: dict, is_pred: bool) -> list[Detection]:
    width, height = entry.get("page_width"), entry.get("page_height")
    page = entry["id"]
    default_score = 1.0 if is_pred else None
    if "detections" in entry:
        out = []
        for raw in entry["detections"]:
            box: Any = tuple(float(v) for v in raw["bbox"])
            if width is not None and height is not None:
                box = PixelBox(*box, float(width), float(height))
            score = raw.get("score", default_score) if is_pred else None
            out.append(Detection(str(raw["label"]), box, None if score is None else float(score), page))
        return out
    if entry.get("format") == "doctags":
        doc = _doc(entry)
        sizes = [(float(width), float(height))] * len(doc.pages) if width and height else None
        dets = detections_from_document(doc, sizes, default_score)
        return [Detection(d.label, d.box, d.score, (page, d.page)) for d in dets]
    raise ValueError("layout entry needs 'detections' or format 'doctags'")


def _mean(values: list) -> Optional[float]:
    values = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    return sum(values) / len(values) if values else None


def _json_safe(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def run_eval(task: str, preds: list[dict], gts: list[dict], jobs: int = 1,
             policy: Optional[NormPolicy] = None, label_map: Optional[dict] = None) -> dict:
    """Score prediction manifest entries against ground truth (matched by id).

    Items come back in ground-truth manifest order whatever ``jobs`` is.
    """
    pred_by_id: dict[str, dict] = {}
    duplicate_preds: set[str] = set()
    for p in preds:
        if p["id"] in pred_by_id:
            duplicate_preds.add(p["id"])
        pred_by_id.setdefault(p["id"], p)
    gt_ids = {g["id"] for g in gts}
    policy = policy or default_policy()
    label_map = label_map or load_label_map()

    def score(gt: dict) -> dict:
        item: dict[str, Any] = {"id": gt["id"]}
        pred = pred_by_id.get(gt["id"])
        try:
            if pred is None:
                raise LookupError("no prediction with this id")
            if gt["id"] in duplicate_preds:
                raise ValueError("duplicate id in prediction manifest")
            if task == "text":
                item["scores"] = text_scores(_text_of(pred), _text_of(gt)).as_dict()
            elif task == "formula":
                item["scores"] = text_scores(normalize(_formula_of(pred), policy),
                                             normalize(_formula_of(gt), policy)).as_dict()
            elif task == "table":
                item["scores"] = teds_pair(_table_of(pred), _table_of(gt))
            else:
                item["_pred"] = map_labels(_detections_of(pred, True), label_map["mapping"])
                item["_gt"] = map_labels(_detections_of(gt, False), label_map["mapping"])
                item["counts"] = {"predictions": len(item["_pred"]), "ground_truth": len(item["_gt"])}
            item["status"] = "ok"
        except LookupError as exc:
            item.update(status="error", error={"code": "missing-prediction", "message": str(exc)})
        except Exception as exc:  # one bad entry must not sink the batch
            item.update(status="error", error={"code": "item-failed", "message": f"{type(exc).__name__}: {exc}"})
        return item

    # duplicates are decided up front so results do not depend on scheduling
    order, seen_gt = [], set()
    for g in gts:
        order.append((g, g["id"] in seen_gt))
        seen_gt.add(g["id"])

    def score_entry(pair):
        g, dup = pair
        if dup:
            return {"id": g["id"], "status": "error",
                    "error": {"code": "item-failed", "message": "duplicate id in ground truth manifest"}}
        return score(g)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            items = list(pool.map(score_entry, order))
    else:
        items = [score_entry(pair) for pair in order]

    for pid in sorted(set(pred_by_id) - gt_ids):
        items.append({"id": pid, "status": "error",
                      "error": {"code": "missing-prediction", "message": "prediction id not in ground truth"}})

    ok = [it for it in items if it["status"] == "ok"]
    aggregate: dict[str, Any] = {"items": len(items), "scored": len(ok), "failed": len(items) - len(ok)}
    report: dict[str, Any] = {"schema_version": REPORT_SCHEMA_VERSION, "tool_version": __version__, "task": task}
    if task == "layout":
        all_pred = [d for it in ok for d in it.pop("_pred")]
        all_gt = [d for it in ok for d in it.pop("_gt")]
        result = evaluate_map(all_pred, all_gt, label_map["classes"])
        aggregate["map"] = result.mean_ap
        aggregate["per_class_ap"] = result.per_class
        report["diagnostics"] = [d.to_dict() for d in result.diagnostics]
    else:
        keys = list(ok[0]["scores"]) if ok else []
        aggregate["mean"] = {k: _mean([it["scores"][k] for it in ok]) for k in keys}
    if task == "formula":
        report["policy_digest"] = policy.digest()
    report["aggregate"] = aggregate
    report["items"] = items
    return _json_safe(report)


def cmd_eval(args) -> int:
    preds, gts = _read_manifest(args.pred), _read_manifest(args.gt)
    policy = NormPolicy.from_file(args.policy) if args.policy else None
    label_map = load_label_map(args.label_map) if args.label_map else None
    report = run_eval(args.task, preds, gts, args.jobs, policy, label_map)
    _write(args.report, json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    for item in report["items"]:
        if item["status"] != "ok":
            err = item["error"]
            _emit([Diagnostic(Severity.WARNING, err["code"], err["message"])], item["id"])
    return EXIT_PARTIAL if report["aggregate"]["failed"] else EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="doctags", description="DocTags conversion, repair and evaluation")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a DocTags file to markdown, html or json")
    p.add_argument("input", help="DocTags file, or - for stdin")
    p.add_argument("--to", choices=("markdown", "html", "json"), default="markdown")
    p.add_argument("--lenient", action="store_true", help="repair malformed input instead of failing")
    p.add_argument("--include-page-furniture", action="store_true")
    p.add_argument("--include-tables", action="store_true")
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", help="strict-parse a file and list diagnostics")
    p.add_argument("input")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("repair", help="lenient parse and canonical rewrite")
    p.add_argument("input")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("eval", help="score predictions against ground truth manifests")
    p.add_argument("--task", choices=("text", "table", "layout", "formula"), required=True)
    p.add_argument("--pred", required=True, help="JSONL prediction manifest")
    p.add_argument("--gt", required=True, help="JSONL ground-truth manifest")
    p.add_argument("--report", help="report path (default stdout)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--policy", help="LaTeX normalization policy JSON (formula task)")
    p.add_argument("--label-map", help="layout label map JSON (layout task)")
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("doctags: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"doctags: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"doctags: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
