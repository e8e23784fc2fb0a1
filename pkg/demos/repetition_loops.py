"""Cutting off a generation that got stuck repeating itself.

Run: python demos/repetition_loops.py
"""

from doctags import ParseMode, detect_repetition, parse, tokenize

# Table-of-contents pages are a classic trigger: the model keeps emitting the
# same entry until it hits the token limit.
entry = "<text><loc_30><loc_100><loc_470><loc_115>2.1 Related work</text>"
raw = "<doctag><section_header><loc_30><loc_60><loc_470><loc_80>Contents</section_header>" + entry * 25

tokens, _ = tokenize(raw)
cut = detect_repetition(tokens)
print(f"{len(tokens)} tokens, loop detected; keep the first {cut}")

# detect_repetition works on any sequence, not just DocTags tokens
print("characters:", detect_repetition(list("intro abcabcabcabcab")))
print("a 3-fold repeat is legitimate:", detect_repetition(list("xyzxyzxyz")))

doc, diags = parse(raw, ParseMode.LENIENT)
print("\nlenient parse:", [d.code for d in diags if d.severity.value != "info"])
print("blocks kept:", [b.text for b in doc.pages[0].blocks])
