"""One document, three exports: Markdown for text metrics, HTML, and JSON for storage.

Run: python demos/export_formats.py
"""

from doctags import parse
from doctags.export import from_json, to_html, to_json, to_markdown

src = (
    "<doctag>"
    "<page_header><loc_20><loc_5><loc_480><loc_15>ACME Corp</page_header>"
    "<title><loc_40><loc_30><loc_460><loc_50>Getting started</title>"
    "<text><loc_40><loc_60><loc_460><loc_90>Install the package, then run:</text>"
    "<code><loc_40><loc_95><loc_460><loc_130><_Bash_>pip install acme\n  acme --help</code>"
    "<formula><loc_40><loc_140><loc_460><loc_160>E = mc^{2}</formula>"
    "<otsl><loc_40><loc_170><loc_460><loc_220><ched>flag<ched>meaning<nl><fcel>-v<fcel>verbose<nl></otsl>"
    "<page_footer><loc_240><loc_490><loc_260><loc_498>1</page_footer>"
    "</doctag>"
)
doc, _ = parse(src)

print("Markdown (furniture and tables left out, as for text scoring)")
print(to_markdown(doc))
print("Markdown with tables and furniture")
print(to_markdown(doc, include_page_furniture=True, include_tables=True))
print("HTML")
print(to_html(doc), "\n")

payload = to_json(doc)
assert from_json(payload) == doc
print(f"JSON: {len(payload)} bytes, round-trips exactly")
