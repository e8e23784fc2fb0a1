"""Parsing model output that is almost, but not quite, valid DocTags.

Run: python demos/parse_and_repair.py
"""

from doctags import ParseMode, parse, repair, serialize

# A page as a small model might emit it: the list item is never closed, one
# text block lost half of its location tags, and the output stops mid-block.
raw = (
    "<doctag>"
    "<title><loc_40><loc_20><loc_460><loc_45>Annual Report</title>"
    "<unordered_list><list_item><loc_50><loc_60><loc_450><loc_75>Revenue up 12%"
    "</unordered_list>"
    "<text><loc_40><loc_90>Costs were flat"
)

print("strict parse")
doc, diags = parse(raw, ParseMode.STRICT)
print("  document:", doc)
for d in diags:
    print(f"  {d.severity.value:7} {d.code:16} {d.message}")

print("\nlenient parse keeps everything it can and says what it changed")
doc, diags = parse(raw, ParseMode.LENIENT)
for d in diags:
    print(f"  {d.severity.value:7} {d.code:16} {d.message}")
for path, block in doc.iter_blocks():
    print(f"  {path!s:10} {block.kind.value:15} {block.loc} {block.text!r}")

print("\nrepair = lenient parse + canonical serialization")
fixed, _ = repair(raw)
print(" ", fixed)

# The repaired text is clean under the strict parser and stable under repair.
assert parse(fixed, ParseMode.STRICT).document == doc
assert repair(fixed)[0] == fixed
assert serialize(doc) == fixed
print("\nrepaired output parses strictly to the same document")
