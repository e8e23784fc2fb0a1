import json
import subprocess
import sys
from pathlib import Path

import pytest

from doctags.cli import EXIT_INVALID, EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, main, run_eval

FIXTURES = Path(__file__).parent / "fixtures"
CLEAN = "<doctag><section_header><loc_1><loc_2><loc_3><loc_4>Intro</section_header><text>Hi</text></doctag>"
UNCLOSED = "<doctag><text>Hi"


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def jsonl(lines):
    return [json.loads(line) for line in lines.splitlines() if line.strip()]


def manifest(tmp_path, name, entries):
    return write(tmp_path, name, "".join(json.dumps(e) + "\n" for e in entries))


# ---------------------------------------------------------------- convert


def test_convert_markdown(tmp_path, capsys):
    assert main(["convert", write(tmp_path, "a.dt", CLEAN)]) == EXIT_OK
    out = capsys.readouterr()
    assert out.out == "## Intro\n\nHi\n"
    # missing-loc is reported in lenient mode only
    assert out.err == ""


def test_convert_strict_failure(tmp_path, capsys):
    assert main(["convert", write(tmp_path, "a.dt", UNCLOSED)]) == EXIT_INVALID
    out = capsys.readouterr()
    assert out.out == ""
    assert "unclosed-tag" in [d["code"] for d in jsonl(out.err)]


def test_convert_lenient(tmp_path, capsys):
    path = write(tmp_path, "a.dt", UNCLOSED)
    assert main(["convert", path, "--lenient"]) == EXIT_OK
    out = capsys.readouterr()
    assert out.out == "Hi\n"
    diags = jsonl(out.err)
    assert "unclosed-tag" in [d["code"] for d in diags]
    assert {d["severity"] for d in diags} <= {"warning", "info"}
    assert all(d["file"] == path for d in diags)


def test_convert_html_and_json_to_file(tmp_path, capsys):
    src = write(tmp_path, "a.dt", CLEAN)
    assert main(["convert", src, "--to", "html"]) == EXIT_OK
    assert capsys.readouterr().out.startswith('<html><body><div class="page" data-page="1"><h2 data-loc="1,2,3,4">')
    dst = tmp_path / "a.json"
    assert main(["convert", src, "--to", "json", "-o", str(dst)]) == EXIT_OK
    assert json.loads(dst.read_text())["schema_version"] == 1


def test_usage_errors(tmp_path, capsys):
    assert main(["convert", str(tmp_path / "missing.dt")]) == EXIT_USAGE
    with pytest.raises(SystemExit) as err:
        main(["convert"])
    assert err.value.code == EXIT_USAGE
    capsys.readouterr()


# ---------------------------------------------------------------- validate / repair


def test_validate_clean_is_silent(tmp_path, capsys):
    assert main(["validate", write(tmp_path, "a.dt", CLEAN)]) == EXIT_OK
    assert capsys.readouterr().out == ""


def test_validate_reports_errors(tmp_path, capsys):
    assert main(["validate", write(tmp_path, "a.dt", UNCLOSED)]) == EXIT_INVALID
    assert [d["severity"] for d in jsonl(capsys.readouterr().out)] == ["error"] * 2


def test_repair_empty_file(tmp_path, capsys):
    assert main(["repair", write(tmp_path, "a.dt", "")]) == EXIT_INVALID
    assert "missing-root" in [d["code"] for d in jsonl(capsys.readouterr().err)]


def test_repair_writes_canonical(tmp_path, capsys):
    assert main(["repair", write(tmp_path, "a.dt", UNCLOSED)]) == EXIT_OK
    assert capsys.readouterr().out == "<doctag><text>Hi</text></doctag>\n"


@pytest.mark.parametrize("name", ["missing_loc.dt", "unclosed_tags.dt", "repetition_loop.dt"])
def test_defect_fixtures_repair_then_validate(tmp_path, capsys, name):
    src = str(FIXTURES / name)
    assert main(["validate", src]) == EXIT_INVALID
    out = tmp_path / "fixed.dt"
    assert main(["repair", src, "--out", str(out)]) == EXIT_OK
    assert main(["validate", str(out)]) == EXIT_OK
    capsys.readouterr()
    if name == "repetition_loop.dt":
        assert len(out.read_text()) < len((FIXTURES / name).read_text())


# ---------------------------------------------------------------- eval


def test_eval_text_identity(tmp_path, capsys):
    entries = [{"id": "p1", "payload": "the quick brown fox jumps"},
               {"id": "p2", "format": "doctags", "payload": CLEAN}]
    m = manifest(tmp_path, "m.jsonl", entries)
    report_path = tmp_path / "r.json"
    assert main(["eval", "--task", "text", "--pred", m, "--gt", m, "--report", str(report_path)]) == EXIT_OK
    report = json.loads(report_path.read_text())
    assert report["schema_version"] == 1 and report["task"] == "text"
    assert report["aggregate"]["mean"] == {"edit_distance": 0.0, "precision": 1.0, "recall": 1.0, "f1": 1.0,
                                           "bleu": 1.0}
    assert [it["id"] for it in report["items"]] == ["p1", "p2"]


def test_eval_table_matches_teds_hand_value(tmp_path):
    gt = [{"id": "t", "format": "otsl", "payload": "<fcel>1<fcel>10<nl><fcel>x<fcel>y<nl>"}]
    pred = [{"id": "t", "format": "otsl", "payload": "<fcel>1<fcel>11<nl><fcel>x<fcel>y<nl>"}]
    report = run_eval("table", pred, gt)
    scores = report["items"][0]["scores"]
    assert scores["teds"] == pytest.approx(1 - 0.5 / 7, abs=1e-12)
    assert scores["teds_structure"] == 1.0


def test_eval_layout_single_exact_match(tmp_path, capsys):
    gt = [{"id": "pg", "page_width": 612, "page_height": 792,
           "detections": [{"label": "text", "bbox": [10, 10, 200, 40]}]}]
    pred = [{"id": "pg", "page_width": 612, "page_height": 792,
             "detections": [{"label": "text", "bbox": [10, 10, 200, 40], "score": 0.7}]}]
    report = run_eval("layout", pred, gt)
    assert report["aggregate"]["map"] == 1.0
    assert report["aggregate"]["per_class_ap"]["Text"] == 1.0
    assert report["aggregate"]["per_class_ap"]["Table"] is None


def test_eval_layout_from_doctags():
    src = "<doctag><otsl><loc_10><loc_10><loc_200><loc_200><fcel>a<nl></otsl></doctag>"
    entry = [{"id": "pg", "format": "doctags", "payload": src, "page_width": 500, "page_height": 500}]
    assert run_eval("layout", entry, entry)["aggregate"]["map"] == 1.0


def test_eval_formula_uses_policy(tmp_path):
    gt = [{"id": "f", "payload": "\\Big( x \\Big)"}]
    pred = [{"id": "f", "format": "doctags", "payload": "<doctag><formula>\\left( x \\right)</formula></doctag>"}]
    report = run_eval("formula", pred, gt)
    assert report["items"][0]["scores"]["edit_distance"] == 0.0
    assert len(report["policy_digest"]) == 16


def test_eval_partial_failure(tmp_path, capsys):
    gt = manifest(tmp_path, "gt.jsonl", [{"id": "a", "payload": "x"}, {"id": "b", "payload": "y"},
                                         {"id": "c", "path": "nowhere.txt"}])
    pred = manifest(tmp_path, "pred.jsonl", [{"id": "a", "payload": "x"}, {"id": "c", "payload": "z"},
                                             {"id": "extra", "payload": "?"}])
    report_path = tmp_path / "r.json"
    code = main(["eval", "--task", "text", "--pred", pred, "--gt", gt, "--report", str(report_path), "--jobs", "3"])
    assert code == EXIT_PARTIAL
    items = json.loads(report_path.read_text())["items"]
    assert [(it["id"], it["status"]) for it in items] == [("a", "ok"), ("b", "error"), ("c", "error"),
                                                           ("extra", "error")]
    assert [it.get("error", {}).get("code") for it in items] == [None, "missing-prediction", "item-failed",
                                                                  "missing-prediction"]
    assert {d["file"] for d in jsonl(capsys.readouterr().err)} == {"b", "c", "extra"}


def test_eval_unreadable_gt_path(tmp_path):
    gt = [{"id": "c", "path": "nowhere.txt", "_base": str(tmp_path)}]
    report = run_eval("text", [{"id": "c", "payload": "z"}], gt)
    assert report["items"][0]["error"]["code"] == "item-failed"


def test_eval_is_deterministic_across_jobs(tmp_path):
    entries = [{"id": str(i), "payload": "word " * i} for i in range(20)]
    preds = [{"id": str(i), "payload": "word " * (i % 5)} for i in range(20)]
    assert run_eval("text", preds, entries, jobs=1) == run_eval("text", preds, entries, jobs=8)


def test_module_entry_point(tmp_path):
    path = write(tmp_path, "a.dt", CLEAN)
    res = subprocess.run([sys.executable, "-m", "doctags", "convert", path], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout == "## Intro\n\nHi\n"
