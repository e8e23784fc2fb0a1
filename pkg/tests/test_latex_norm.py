import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from doctags.latex_norm import (
    ALL_PASSES,
    BRACE_CLOSE,
    BRACE_OPEN,
    COMMAND,
    GROUP,
    SYMBOL,
    WHITESPACE,
    NormPolicy,
    default_policy,
    normalize,
    normalize_with_diagnostics,
    tokenize_latex,
)

from generators import HAND_FORMULAS, LATEX_ATOMS, random_formula

formulas = st.lists(st.sampled_from(LATEX_ATOMS), max_size=30).map("".join)


def kinds(tokens):
    return [(t.kind, t.lexeme) for t in tokens]


def walk(tokens):
    for t in tokens:
        yield t
        yield from walk(t.children)


# ---------------------------------------------------------------- tokenizer


def test_tokenize_frac():
    tokens = tokenize_latex("\\frac{a}{b}")
    assert kinds(tokens) == [(COMMAND, "\\frac"), (GROUP, "{a}"), (GROUP, "{b}")]
    assert kinds(tokens[1].children) == [(SYMBOL, "a")]


def test_tokenize_superscript():
    assert kinds(tokenize_latex("x^2")) == [(SYMBOL, "x"), (SYMBOL, "^"), (SYMBOL, "2")]


def test_tokenize_spacing_command():
    assert kinds(tokenize_latex("a\\, b")) == [(SYMBOL, "a"), (COMMAND, "\\,"), (WHITESPACE, " "), (SYMBOL, "b")]


def test_tokenize_unbalanced_braces():
    diags = []
    tokens = tokenize_latex("}{a", diags)
    assert [t.kind for t in tokens] == [BRACE_CLOSE, BRACE_OPEN, SYMBOL]
    assert [d.code for d in diags] == ["unbalanced-brace"] * 2


@settings(max_examples=300, deadline=None)
@given(st.one_of(formulas, st.text(max_size=40)))
def test_tokenize_lossless(src):
    tokens = tokenize_latex(src)
    assert "".join(t.lexeme for t in tokens) == src
    assert all(t.lexeme.startswith("\\") for t in walk(tokens) if t.kind == COMMAND)


# ---------------------------------------------------------------- normalize


@pytest.mark.parametrize("src, want", [
    ("x ^ 2", "x^{2}"),
    ("\\Big( x \\Big)", "\\left( x \\right)"),
    ("\\frac{a}{b}", "\\frac{a}{b}"),
    ("\\dfrac{1}{2} + \\tfrac12", "\\frac{1}{2} + \\frac{1}{2}"),
    ("a \\over b", "\\frac{a}{b}"),
    ("f^{\\prime\\prime}(x)", "f''(x)"),
    ("\\bigl| x \\bigr|", "\\left| x \\right|"),
    ("x_1 , . . . , x_n", "x_{1} , \\ldots , x_{n}"),
    ("a \\cdot \\cdot \\cdot b", "a \\cdots b"),
    ("a \\, \\, \\quad b", "a \\quad b"),
    ("\\displaystyle \\sum_{i=1}^{n} i \\label{eq:sum}", "\\sum_{i=1}^{n} i"),
    ("\\sqrt[3]{x} + \\sqrt x", "\\sqrt[3]{x} + \\sqrt{x}"),
])
def test_normalize_examples(src, want):
    assert normalize(src) == want
    assert normalize(want) == want


def test_unpaired_left_right_balanced():
    out, diags = normalize_with_diagnostics("\\left( x")
    assert out == "\\left( x \\right."
    assert [d.code for d in diags] == ["unpaired-delimiter"]
    assert normalize("x \\right)") == "\\left. x \\right)"


def test_unpaired_sized_delimiter_dropped():
    out, diags = normalize_with_diagnostics("\\Big( x")
    assert out == "( x"
    assert [d.code for d in diags] == ["unpaired-delimiter"]


def test_unbalanced_braces_repaired():
    assert normalize("{a + b") == "{a + b}"
    assert normalize("a + b}") == "a + b"


def test_hand_corpus_fixed_points():
    for src in HAND_FORMULAS:
        once = normalize(src)
        assert normalize(once) == once, src


@settings(max_examples=500, deadline=None)
@given(formulas)
def test_idempotent(src):
    once = normalize(src)
    assert normalize(once) == once


@settings(max_examples=300, deadline=None)
@given(formulas)
def test_policy_soundness_and_whitespace(src):
    policy = default_policy()
    banned = policy.remove_list | policy.remove_with_argument | set(policy.replace_map) | policy.infix_fractions
    tokens = tokenize_latex(normalize(src))
    assert not any(t.kind == COMMAND and t.lexeme in banned for t in walk(tokens))
    ws = [t.kind == WHITESPACE for t in tokens]
    assert not any(a and b for a, b in zip(ws, ws[1:]))
    assert all(t.lexeme == " " for t in tokens if t.kind == WHITESPACE)


def test_fuzzed_corpus_idempotent():
    rng = random.Random(5)
    for _ in range(300):
        src = random_formula(rng)
        once = normalize(src)
        assert normalize(once) == once, src


# ---------------------------------------------------------------- policy


def test_default_policy_contents():
    policy = default_policy()
    assert {"\\displaystyle", "\\nonumber"} <= policy.remove_list
    assert "\\label" in policy.remove_with_argument
    assert policy.replace_map["\\dfrac"] == "\\frac"
    assert policy.collapse_rules == ALL_PASSES


def test_policy_chain_resolved_and_cycle_rejected():
    assert NormPolicy(replace_map={"\\a": "\\b", "\\b": "\\c"}).replace_map == {"\\a": "\\c", "\\b": "\\c"}
    with pytest.raises(ValueError):
        NormPolicy(replace_map={"\\a": "\\b", "\\b": "\\a"})
    with pytest.raises(ValueError):
        NormPolicy(collapse_rules={"spelling"})


def test_custom_policy_file(tmp_path):
    path = tmp_path / "policy.json"
    path.write_text(json.dumps({"remove_list": ["\\mathrm"], "collapse_rules": ["filter", "whitespace"]}))
    policy = NormPolicy.from_file(str(path))
    assert normalize("\\mathrm  x ^ 2", policy) == "x^2"  # no arguments pass, so no braces
    assert NormPolicy.from_dict(policy.to_dict()) == policy


def test_digest_tracks_content():
    a = NormPolicy.from_dict(default_policy().to_dict())
    assert a.digest() == default_policy().digest()
    assert len(a.digest()) == 16
    assert NormPolicy(remove_list={"\\x"}).digest() != a.digest()
