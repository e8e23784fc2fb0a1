"""Location tags, pixel boxes and layout mAP.

Run: python demos/layout_map.py
"""

import random

from doctags import parse
from doctags.geometry import (
    Detection,
    PixelBox,
    decode_loc,
    detections_from_document,
    encode_loc,
    evaluate_map,
    load_label_map,
    map_labels,
)

# Locations live on a 500x500 grid regardless of page size.
page = (612, 792)
box = PixelBox(72, 90, 540, 130, *page)
loc = encode_loc(box)
print("pixels", box.as_tuple(), "->", loc, "->", decode_loc(loc, *page).as_tuple())

gt_src = (
    "<doctag>"
    "<section_header><loc_50><loc_50><loc_450><loc_70>Results</section_header>"
    "<text><loc_50><loc_80><loc_450><loc_150>Body text.</text>"
    "<otsl><loc_50><loc_160><loc_450><loc_300><fcel>a<nl></otsl>"
    "<page_footer><loc_240><loc_480><loc_260><loc_495>7</page_footer>"
    "</doctag>"
)
label_map = load_label_map()
gt = map_labels(detections_from_document(parse(gt_src).document, [page]), label_map["mapping"])
print("\nground truth after label mapping:", [d.label for d in gt], "(footer dropped)")

# Simulated detector: jittered boxes with made-up confidences.
rng = random.Random(0)
preds = []
for d in gt:
    x1, y1, x2, y2 = d.box.as_tuple()
    jitter = lambda v: v + rng.gauss(0, 4)
    preds.append(Detection(d.label, (jitter(x1), jitter(y1), jitter(x2), jitter(y2)), rng.uniform(0.5, 1.0)))
preds.append(Detection("Picture", (300, 600, 500, 700), 0.3))

result = evaluate_map(preds, gt, label_map["classes"])
print(f"\nmAP@[.5:.95] = {result.mean_ap:.3f}")
for label, ap in result.per_class.items():
    print(f"  {label:15} {'n/a (no ground truth)' if ap is None else f'{ap:.3f}'}")
