"""Normalizing LaTeX before comparing formulas.

Run: python demos/latex_normalization.py
"""

from doctags.latex_norm import NormPolicy, default_policy, normalize, normalize_with_diagnostics
from doctags.metrics import normalized_edit_distance

# Two transcriptions of the same formula.
a = r"\displaystyle f ^ { \prime \prime } ( x ) = \dfrac 1 2 \Big( x + y \Big) \, \, \label{eq:1}"
b = r"f''(x)=\frac{1}{2}\left(x+y\right)"

print("raw edit distance       ", round(normalized_edit_distance(a, b), 4))
na, nb = normalize(a), normalize(b)
print("normalized:", na)
print("           ", nb)
print("normalized edit distance", round(normalized_edit_distance(na, nb), 4))
# spacing is collapsed to single blanks but never inserted or removed wholesale,
# so what is left is whitespace and the trailing thin space

out, diags = normalize_with_diagnostics(r"\left( \frac{a}{b}")
print("\nunbalanced:", out, [d.code for d in diags])

# Policies are data; report the digest next to any score computed with them.
print("\ndefault policy", default_policy().digest(), default_policy().to_dict()["replace_map"])
custom = NormPolicy.from_dict({**default_policy().to_dict(), "remove_list": [r"\displaystyle", r"\mathrm"]})
print("custom policy ", custom.digest(), normalize(r"\mathrm{d}x", custom))
