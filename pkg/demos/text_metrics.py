"""Scoring converted text against ground truth.

Run: python demos/text_metrics.py
"""

from doctags import parse
from doctags.export import to_markdown
from doctags.metrics import bleu, normalized_edit_distance, text_scores, token_prf

gt = "The model converts each page into structured markup in reading order."
pred = "The model converts every page to structured markup in reading order."

print(f"edit distance  {normalized_edit_distance(pred, gt):.4f}")
print("P / R / F1     {:.4f} {:.4f} {:.4f}".format(*token_prf(pred, gt)))
print(f"BLEU           {bleu(pred, gt):.4f}")

# Full pages are compared as Markdown, so location tags never affect the score.
a = parse("<doctag><title>Intro</title><text>Hello world.</text></doctag>").document
b = parse("<doctag><title><loc_1><loc_1><loc_9><loc_9>Intro</title><text>Hello world.</text></doctag>").document
print("\nsame text, different locations:", text_scores(to_markdown(b), to_markdown(a)).as_dict())

# Extra spaces move the character-level edit distance but not the token metrics.
c = parse("<doctag><title>Intro</title><text>Hello   world.</text></doctag>").document
print("same text, extra spaces:       ", text_scores(to_markdown(c), to_markdown(a)).as_dict())
