"""OTSL tables: decode cell tags, check spans, export HTML and score with TEDS.

Run: python demos/tables_otsl.py
"""

from doctags import CellTag, ParseMode, parse
from doctags.metrics import teds
from doctags.otsl import decode, encode, grid_to_html, html_to_grid

# A header spanning two columns, a row header spanning two rows.
src = (
    "<doctag><otsl><loc_50><loc_100><loc_450><loc_200>"
    "<ecel><ched>2023<lcel><nl>"
    "<ecel><ched>H1<ched>H2<nl>"
    "<rhed>Sales<fcel>10<fcel>12<nl>"
    "<ucel><fcel>11<fcel>13<nl>"
    "<caption>Table 1: Sales by half-year</caption>"
    "</otsl></doctag>"
)
doc, diags = parse(src)
block = doc.pages[0].blocks[0]
grid = block.table
print(f"{grid.rows}x{grid.cols} grid, caption {block.children[0].text!r}")
for r, row in enumerate(grid.cells):
    print("  ", [f"{c.text or '.'} {c.row_span}x{c.col_span} {c.role.value}" if c.origin else f"<{c.anchor}>"
                 for c in row])

html = grid_to_html(grid).to_html()
print("\nHTML:", html)
assert html_to_grid(html) == (grid, [])
assert decode(encode(grid)) == (grid, [])

print("\nstructural mistakes are caught, or degraded in lenient mode")
for tokens in ([CellTag.LCEL, (CellTag.FCEL, "a"), CellTag.NL],
               [(CellTag.FCEL, "a"), CellTag.XCEL, CellTag.NL]):
    _, diags = decode(tokens, strict=True)
    print("  ", [d.code for d in diags])

# A prediction that got one number wrong and missed the row span.
pred_src = src.replace("<fcel>12", "<fcel>21").replace("<ucel><fcel>11", "<fcel>Sales<fcel>11")
pred = parse(pred_src, ParseMode.LENIENT).document.pages[0].blocks[0].table
print(f"\nTEDS {teds(grid_to_html(pred), grid_to_html(grid)):.4f}"
      f" (structure only {teds(grid_to_html(pred), grid_to_html(grid), structure_only=True):.4f})")
