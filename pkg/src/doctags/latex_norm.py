"""LaTeX formula normalization on token streams.

The pipeline has three stages:

1. filtering: drop unwanted commands, replace commands with preferred
   equivalents, rewrite infix fractions (``a \\over b``) as ``\\frac``;
2. structure: pair sized delimiters into ``\\left``/``\\right``, brace the
   arguments of scripts and of commands with known arity, normalize spacing;
3. simplification: collapse primes, dots and runs of spacing commands.

Everything is a rewrite of tokens, never of mathematical meaning.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

from .diagnostics import Diagnostic, Severity

# token kinds
COMMAND = "command"
BRACE_OPEN = "brace_open"
BRACE_CLOSE = "brace_close"
SYMBOL = "symbol"
WHITESPACE = "whitespace"
GROUP = "braced_group"

ALL_PASSES = frozenset({
    "filter", "infix", "delimiters", "arguments", "primes", "dots", "spacing_commands", "whitespace",
})


@dataclass(frozen=True)
class LatexToken:
    kind: str
    lexeme: str
    children: tuple = ()

    @property
    def is_control_word(self) -> bool:
        return self.kind == COMMAND and len(self.lexeme) > 1 and self.lexeme[1:].isascii() and self.lexeme[1:].isalpha()


def _cmd(name: str) -> LatexToken:
    return LatexToken(COMMAND, name)


def _sym(ch: str) -> LatexToken:
    return LatexToken(SYMBOL, ch)


_SPACE = LatexToken(WHITESPACE, " ")


def group(children: Iterable[LatexToken]) -> LatexToken:
    children = tuple(children)
    return LatexToken(GROUP, "{" + render(children) + "}", children)


def _is_letter(ch: str) -> bool:
    return ch.isascii() and ch.isalpha()


def tokenize_latex(src: str, diagnostics: Optional[list] = None) -> list[LatexToken]:
    """Lossless tokenization: lexemes concatenate back to ``src``.

    Balanced ``{...}`` become ``braced_group`` tokens holding their inner
    tokens.  An unmatched ``}`` becomes a ``brace_close`` token; an unclosed
    ``{`` becomes a ``brace_open`` token followed by its would-be contents.
    """
    diags = diagnostics if diagnostics is not None else []
    stack: list[list[LatexToken]] = [[]]
    opened: list[int] = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch == "\\":
            j = i + 1
            if j < n and _is_letter(src[j]):
                while j < n and _is_letter(src[j]):
                    j += 1
                stack[-1].append(LatexToken(COMMAND, src[i:j]))
            elif j < n:
                j += 1
                stack[-1].append(LatexToken(COMMAND, src[i:j]))
            else:
                stack[-1].append(LatexToken(SYMBOL, "\\"))
            i = j
        elif ch.isspace():
            j = i
            while j < n and src[j].isspace():
                j += 1
            stack[-1].append(LatexToken(WHITESPACE, src[i:j]))
            i = j
        elif ch == "{":
            stack.append([])
            opened.append(i)
            i += 1
        elif ch == "}":
            if len(stack) > 1:
                inner = stack.pop()
                opened.pop()
                stack[-1].append(LatexToken(GROUP, "{" + "".join(t.lexeme for t in inner) + "}", tuple(inner)))
            else:
                diags.append(Diagnostic(Severity.WARNING, "unbalanced-brace", "unmatched '}'", (i, i + 1)))
                stack[-1].append(LatexToken(BRACE_CLOSE, "}"))
            i += 1
        else:
            stack[-1].append(LatexToken(SYMBOL, ch))
            i += 1
    while len(stack) > 1:
        inner = stack.pop()
        pos = opened.pop()
        diags.append(Diagnostic(Severity.WARNING, "unbalanced-brace", "unclosed '{'", (pos, pos + 1)))
        stack[-1].append(LatexToken(BRACE_OPEN, "{"))
        stack[-1].extend(inner)
    return stack[0]


def render(tokens: Iterable[LatexToken]) -> str:
    """Concatenate tokens, keeping control words separated from following letters."""
    out: list[str] = []
    prev: Optional[LatexToken] = None
    for tok in tokens:
        lexeme = tok.lexeme if tok.kind != GROUP else "{" + render(tok.children) + "}"
        if prev is not None and prev.is_control_word and lexeme and _is_letter(lexeme[0]):
            out.append(" ")
        out.append(lexeme)
        prev = tok
    return "".join(out)


# --------------------------------------------------------------------------
# policy


@dataclass(frozen=True)
class NormPolicy:
    """Which commands to drop or replace and which passes to run."""

    remove_list: frozenset = frozenset()
    remove_with_argument: frozenset = frozenset()
    replace_map: dict = field(default_factory=dict, hash=False)
    infix_fractions: frozenset = frozenset()
    collapse_rules: frozenset = ALL_PASSES

    def __post_init__(self):
        for name in ("remove_list", "remove_with_argument", "infix_fractions", "collapse_rules"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        unknown = self.collapse_rules - ALL_PASSES
        if unknown:
            raise ValueError(f"unknown passes: {sorted(unknown)}")
        resolved = {}
        for key in self.replace_map:
            seen, cur = {key}, self.replace_map[key]
            while cur in self.replace_map:
                if cur in seen:
                    raise ValueError(f"replace_map has a cycle through {cur}")
                seen.add(cur)
                cur = self.replace_map[cur]
            resolved[key] = cur
        object.__setattr__(self, "replace_map", resolved)

    @classmethod
    def from_dict(cls, data: dict) -> "NormPolicy":
        return cls(
            remove_list=data.get("remove_list", ()),
            remove_with_argument=data.get("remove_with_argument", ()),
            replace_map=dict(data.get("replace_map", {})),
            infix_fractions=data.get("infix_fractions", ()),
            collapse_rules=data.get("collapse_rules", sorted(ALL_PASSES)),
        )

    @classmethod
    def from_file(cls, path: str) -> "NormPolicy":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> "NormPolicy":
        text = resources.files("doctags").joinpath("data/latex_policy.json").read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "remove_list": sorted(self.remove_list),
            "remove_with_argument": sorted(self.remove_with_argument),
            "replace_map": dict(sorted(self.replace_map.items())),
            "infix_fractions": sorted(self.infix_fractions),
            "collapse_rules": sorted(self.collapse_rules),
        }

    def digest(self) -> str:
        """Content hash to report alongside scores computed under this policy."""
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


_DEFAULT_POLICY: Optional[NormPolicy] = None


def default_policy() -> NormPolicy:
    global _DEFAULT_POLICY
    if _DEFAULT_POLICY is None:
        _DEFAULT_POLICY = NormPolicy.default()
    return _DEFAULT_POLICY


# --------------------------------------------------------------------------
# helpers over token lists


def _next_non_space(tokens: list, i: int) -> int:
    while i < len(tokens) and tokens[i].kind == WHITESPACE:
        i += 1
    return i


def _map_groups(tokens: list, fn) -> list:
    """Apply ``fn`` to the contents of every group, innermost first, then to ``tokens``."""
    out = [group(_map_groups(list(t.children), fn)) if t.kind == GROUP else t for t in tokens]
    return fn(out)


def _repair_braces(tokens: list, diags: list) -> list:
    out: list[LatexToken] = []
    for i, tok in enumerate(tokens):
        if tok.kind == BRACE_CLOSE:
            diags.append(Diagnostic(Severity.WARNING, "unbalanced-brace", "dropped unmatched '}'"))
            continue
        if tok.kind == BRACE_OPEN:
            diags.append(Diagnostic(Severity.WARNING, "unbalanced-brace", "closed '{' at end of formula"))
            out.append(group(_repair_braces(tokens[i + 1:], diags)))
            return out
        if tok.kind == GROUP:
            tok = group(_repair_braces(list(tok.children), diags))
        elif tok.kind == SYMBOL and tok.lexeme == "\\":
            diags.append(Diagnostic(Severity.WARNING, "missing-argument", "dropped trailing backslash"))
            continue
        elif tok.kind == COMMAND and len(tok.lexeme) == 2 and tok.lexeme[1].isspace():
            tok = _cmd("\\ ")
        out.append(tok)
    return out


# --------------------------------------------------------------------------
# stage 1: filtering


def _filter(tokens: list, policy: NormPolicy) -> list:
    out: list[LatexToken] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind == COMMAND:
            name = policy.replace_map.get(tok.lexeme, tok.lexeme)
            if name in policy.remove_with_argument:
                j = _next_non_space(tokens, i + 1)
                i = j + 1 if j < len(tokens) and tokens[j].kind == GROUP else i + 1
                continue
            if name in policy.remove_list:
                i += 1
                continue
            if name != tok.lexeme:
                tok = _cmd(name)
        out.append(tok)
        i += 1
    return out


def _strip_ws(tokens: list) -> list:
    lo, hi = 0, len(tokens)
    while lo < hi and tokens[lo].kind == WHITESPACE:
        lo += 1
    while hi > lo and tokens[hi - 1].kind == WHITESPACE:
        hi -= 1
    return tokens[lo:hi]


def _infix(tokens: list, policy: NormPolicy) -> list:
    for i, tok in enumerate(tokens):
        if tok.kind == COMMAND and tok.lexeme in policy.infix_fractions:
            left = _strip_ws(tokens[:i])
            right = _infix(_strip_ws(tokens[i + 1:]), policy)
            return [_cmd("\\frac"), group(left), group(right)]
    return tokens


# --------------------------------------------------------------------------
# stage 2: delimiters, arguments, whitespace

_SIZERS = {f"\\{base}{suffix}": suffix for base in ("big", "Big", "bigg", "Bigg") for suffix in ("", "l", "r", "m")}
_OPENERS = {"(", "[", "<", "\\{", "\\langle", "\\lfloor", "\\lceil", "\\lbrace", "\\lbrack",
            "\\lvert", "\\lVert", "\\lgroup", "\\ulcorner", "\\llcorner"}
_CLOSERS = {")", "]", ">", "\\}", "\\rangle", "\\rfloor", "\\rceil", "\\rbrace", "\\rbrack",
            "\\rvert", "\\rVert", "\\rgroup", "\\urcorner", "\\lrcorner"}
_AMBIGUOUS = {"|", "/", ".", "\\|", "\\vert", "\\Vert", "\\backslash", "\\uparrow", "\\downarrow",
              "\\updownarrow", "\\Uparrow", "\\Downarrow", "\\Updownarrow"}
_DELIMS = _OPENERS | _CLOSERS | _AMBIGUOUS


def _delimiters(tokens: list, diags: list) -> list:
    # events: (index of command, index of delimiter, role, explicit)
    events = []
    drop: set[int] = set()
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind == COMMAND and (tok.lexeme in ("\\left", "\\right", "\\middle") or tok.lexeme in _SIZERS):
            j = _next_non_space(tokens, i + 1)
            if j >= len(tokens) or tokens[j].kind not in (SYMBOL, COMMAND) or tokens[j].lexeme not in _DELIMS:
                diags.append(Diagnostic(Severity.WARNING, "missing-argument", f"{tok.lexeme} without delimiter"))
                drop.add(i)
                i += 1
                continue
            delim = tokens[j].lexeme
            if tok.lexeme == "\\left":
                role, explicit = "open", True
            elif tok.lexeme == "\\right":
                role, explicit = "close", True
            elif tok.lexeme == "\\middle":
                role, explicit = "middle", True
            else:
                suffix = _SIZERS[tok.lexeme]
                explicit = False
                if suffix == "l":
                    role = "open"
                elif suffix == "r":
                    role = "close"
                elif suffix == "m":
                    role = "middle"
                elif delim in _OPENERS:
                    role = "open"
                elif delim in _CLOSERS:
                    role = "close"
                else:
                    role = "ambiguous"
            events.append([i, j, role, explicit, delim, False])
            i = j + 1
            continue
        i += 1

    stack: list[list] = []
    paired: set[int] = set()
    for ev in events:
        role = ev[2]
        if role == "middle":
            continue
        if role == "ambiguous":
            if stack and stack[-1][5] and stack[-1][4] == ev[4]:
                role = "close"
            else:
                role = "open"
            ev[2] = role
            ev[5] = True
        if role == "open":
            stack.append(ev)
        elif stack:
            opener = stack.pop()
            paired.add(opener[0])
            paired.add(ev[0])

    prefix: list[LatexToken] = []
    suffix: list[LatexToken] = []
    replace: dict[int, list] = {}
    skip: set[int] = set()
    for cmd_i, delim_i, role, explicit, delim, _ in events:
        skip.update(range(cmd_i + 1, delim_i))  # whitespace between command and delimiter
        if role == "middle":
            name = "\\middle" if explicit else None
        elif cmd_i in paired:
            name = "\\left" if role == "open" else "\\right"
        elif explicit:
            name = "\\left" if role == "open" else "\\right"
            diags.append(Diagnostic(Severity.WARNING, "unpaired-delimiter", f"unpaired {name}{delim}"))
            if role == "open":
                suffix += [_cmd("\\right"), _sym(".")]
            else:
                prefix += [_cmd("\\left"), _sym(".")]
        else:
            name = None
            diags.append(Diagnostic(Severity.WARNING, "unpaired-delimiter", f"dropped sizing of unpaired {delim}"))
        replace[cmd_i] = [_cmd(name)] if name else []

    out = list(prefix)
    for i, tok in enumerate(tokens):
        if i in drop or i in skip:
            continue
        if i in replace:
            out.extend(replace[i])
            continue
        out.append(tok)
    if suffix:
        out = _strip_ws(out)
        if out:
            out.append(_SPACE)
        out.extend(suffix)
    if prefix and len(out) > len(prefix) and out[len(prefix)].kind != WHITESPACE:
        out.insert(len(prefix), _SPACE)
    return out


# commands whose mandatory arguments are always braced
ARITY = {
    "\\frac": 2, "\\binom": 2, "\\dbinom": 2, "\\tbinom": 2, "\\stackrel": 2, "\\overset": 2,
    "\\underset": 2, "\\sqrt": 1, "\\mathrm": 1, "\\mathbf": 1, "\\mathit": 1, "\\mathsf": 1,
    "\\mathtt": 1, "\\mathcal": 1, "\\mathbb": 1, "\\mathfrak": 1, "\\mathscr": 1, "\\boldsymbol": 1,
    "\\bm": 1, "\\text": 1, "\\textrm": 1, "\\textbf": 1, "\\textit": 1, "\\operatorname": 1,
    "\\hat": 1, "\\widehat": 1, "\\bar": 1, "\\overline": 1, "\\underline": 1, "\\vec": 1,
    "\\tilde": 1, "\\widetilde": 1, "\\dot": 1, "\\ddot": 1, "\\check": 1, "\\breve": 1,
    "\\acute": 1, "\\grave": 1, "\\overrightarrow": 1, "\\overleftarrow": 1, "\\overbrace": 1,
    "\\underbrace": 1, "\\begin": 1, "\\end": 1,
}
_ARG_STOP = {"^", "_", "&", "'"}


def _take_argument(tokens: list, i: int, diags: list) -> tuple[Optional[LatexToken], int]:
    """Read one mandatory argument starting at ``i``; returns (braced group, next index)."""
    j = _next_non_space(tokens, i)
    if j >= len(tokens):
        return None, i
    tok = tokens[j]
    if tok.kind == GROUP:
        return tok, j + 1
    if tok.kind == SYMBOL and tok.lexeme in _ARG_STOP:
        return None, i
    if tok.kind == COMMAND and tok.lexeme in ARITY:
        inner, k = _take_command(tokens, j, diags)
        return group(inner), k
    if tok.kind in (COMMAND, SYMBOL):
        return group([tok]), j + 1
    return None, i


def _take_command(tokens: list, i: int, diags: list) -> tuple[list, int]:
    """Command at ``i`` plus its optional ``[...]`` and braced mandatory arguments."""
    name = tokens[i].lexeme
    out = [tokens[i]]
    k = i + 1
    if name == "\\sqrt":
        j = _next_non_space(tokens, k)
        if j < len(tokens) and tokens[j].lexeme == "[":
            depth, m = 0, j
            while m < len(tokens):
                if tokens[m].lexeme == "[":
                    depth += 1
                elif tokens[m].lexeme == "]":
                    depth -= 1
                    if depth == 0:
                        break
                m += 1
            if m < len(tokens):
                out.extend(tokens[j:m + 1])
                k = m + 1
    for _ in range(ARITY[name]):
        arg, k2 = _take_argument(tokens, k, diags)
        if arg is None:
            diags.append(Diagnostic(Severity.WARNING, "missing-argument", f"{name} lacks an argument"))
            break
        out.append(arg)
        k = k2
    return out, k


def _arguments(tokens: list, diags: list) -> list:
    out: list[LatexToken] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind == SYMBOL and tok.lexeme in ("^", "_"):
            arg, k = _take_argument(tokens, i + 1, diags)
            out.append(tok)
            if arg is None:
                diags.append(Diagnostic(Severity.WARNING, "missing-argument", f"{tok.lexeme} without argument"))
                i += 1
            else:
                out.append(arg)
                i = k
            continue
        if tok.kind == COMMAND and tok.lexeme in ARITY:
            taken, k = _take_command(tokens, i, diags)
            out.extend(taken)
            i = k
            continue
        out.append(tok)
        i += 1
    return out


_TIGHT_SYMBOLS = {"^", "_"}
_DELIM_COMMANDS = {"\\left", "\\right", "\\middle"}


def _whitespace(tokens: list) -> list:
    # collapse runs
    merged: list[LatexToken] = []
    for tok in tokens:
        if tok.kind == WHITESPACE:
            if merged and merged[-1].kind == WHITESPACE:
                continue
            merged.append(_SPACE)
        else:
            merged.append(tok)
    merged = _strip_ws(merged)
    out: list[LatexToken] = []
    for i, tok in enumerate(merged):
        if tok.kind == WHITESPACE:
            prev, nxt = out[-1] if out else None, merged[i + 1] if i + 1 < len(merged) else None
            if prev is None or nxt is None:
                continue
            if prev.lexeme in _TIGHT_SYMBOLS and prev.kind == SYMBOL:
                continue
            if nxt.kind == SYMBOL and (nxt.lexeme in _TIGHT_SYMBOLS or nxt.lexeme == "'"):
                continue
            if prev.kind == COMMAND and prev.lexeme in _DELIM_COMMANDS:
                continue
            if nxt.kind == GROUP and prev.kind in (COMMAND, GROUP):
                continue
        out.append(tok)
    return out


# --------------------------------------------------------------------------
# stage 3: simplification

_SPACING_WIDTH = {"\\!": 0, "\\,": 1, "\\:": 2, "\\>": 2, "\\;": 3, "\\ ": 4, "~": 4, "\\quad": 5, "\\qquad": 6}


def _is_spacing(tok: LatexToken) -> bool:
    return tok.kind in (COMMAND, SYMBOL) and tok.lexeme in _SPACING_WIDTH


def _primes(tokens: list) -> list:
    out: list[LatexToken] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind == SYMBOL and tok.lexeme == "^" and i + 1 < len(tokens) and tokens[i + 1].kind == GROUP:
            inner = [t for t in tokens[i + 1].children if t.kind != WHITESPACE]
            if inner and all(t.kind == COMMAND and t.lexeme == "\\prime" for t in inner):
                out.extend(_sym("'") for _ in inner)
                i += 2
                continue
        if tok.kind == SYMBOL and tok.lexeme == "'":
            # whitespace between primes is dropped
            out.append(tok)
            last = i
            j = _next_non_space(tokens, i + 1)
            while j < len(tokens) and tokens[j].kind == SYMBOL and tokens[j].lexeme == "'":
                out.append(tokens[j])
                last = j
                j = _next_non_space(tokens, j + 1)
            i = last + 1
            continue
        out.append(tok)
        i += 1
    return out


def _runs(tokens: list, pred) -> list:
    """Split indices into maximal runs of tokens satisfying ``pred`` (whitespace may separate them)."""
    runs, i = [], 0
    while i < len(tokens):
        if pred(tokens[i]):
            members = [i]
            j = _next_non_space(tokens, i + 1)
            while j < len(tokens) and pred(tokens[j]):
                members.append(j)
                j = _next_non_space(tokens, j + 1)
            runs.append(members)
            i = members[-1] + 1
        else:
            i += 1
    return runs


def _dots(tokens: list) -> list:
    out: list[LatexToken] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        for unit, count, result in ((".", 3, "\\ldots"), ("\\cdot", 3, "\\cdots")):
            if tok.lexeme == unit and tok.kind in (SYMBOL, COMMAND):
                members = [i]
                j = _next_non_space(tokens, i + 1)
                while j < len(tokens) and tokens[j].lexeme == unit:
                    members.append(j)
                    j = _next_non_space(tokens, j + 1)
                if len(members) >= count:
                    out.append(_cmd(result))
                    i = members[-1] + 1
                    break
        else:
            out.append(tok)
            i += 1
    # consecutive identical ellipses collapse to one
    final: list[LatexToken] = []
    for tok in out:
        if tok.kind == COMMAND and tok.lexeme in ("\\ldots", "\\cdots", "\\dots"):
            k = len(final)
            while k > 0 and final[k - 1].kind == WHITESPACE:
                k -= 1
            if k > 0 and final[k - 1].kind == COMMAND and final[k - 1].lexeme == tok.lexeme:
                del final[k:]
                continue
        final.append(tok)
    return final


def _spacing_commands(tokens: list) -> list:
    runs = _runs(tokens, _is_spacing)
    drop: set[int] = set()
    for members in runs:
        if len(members) < 2:
            continue
        keep = max(members, key=lambda m: (_SPACING_WIDTH[tokens[m].lexeme], -m))
        first, last = members[0], members[-1]
        drop.update(k for k in range(first, last + 1) if k != keep)
    return [t for k, t in enumerate(tokens) if k not in drop]


# --------------------------------------------------------------------------


def _pipeline(tokens: list, policy: NormPolicy, diags: list) -> list:
    passes = policy.collapse_rules
    tokens = _repair_braces(tokens, diags)
    if "filter" in passes:
        tokens = _map_groups(tokens, lambda ts: _filter(ts, policy))
    if "infix" in passes and policy.infix_fractions:
        tokens = _map_groups(tokens, lambda ts: _infix(ts, policy))
    if "delimiters" in passes:
        tokens = _map_groups(tokens, lambda ts: _delimiters(ts, diags))
    if "arguments" in passes:
        tokens = _map_groups(tokens, lambda ts: _arguments(ts, diags))
    if "primes" in passes:
        tokens = _map_groups(tokens, _primes)
    if "dots" in passes:
        tokens = _map_groups(tokens, _dots)
    if "spacing_commands" in passes:
        tokens = _map_groups(tokens, _spacing_commands)
    if "whitespace" in passes:
        tokens = _map_groups(tokens, _whitespace)
    return tokens


MAX_ROUNDS = 8


def normalize_with_diagnostics(src: str, policy: Optional[NormPolicy] = None) -> tuple[str, list[Diagnostic]]:
    policy = policy or default_policy()
    diags: list[Diagnostic] = []
    current = src
    # rewrites can expose new opportunities (e.g. a removed command joins two runs);
    # repeat until the output is stable
    for _ in range(MAX_ROUNDS):
        tokens = tokenize_latex(current, diags)
        result = render(_pipeline(tokens, policy, diags))
        if result == current:
            break
        current = result
    seen, unique = set(), []
    for d in diags:
        key = (d.code, d.message)
        if key not in seen:
            seen.add(key)
            unique.append(d)
    return current, unique


def normalize(src: str, policy: Optional[NormPolicy] = None) -> str:
    """Normalize a LaTeX formula under ``policy`` (the shipped default if omitted)."""
    return normalize_with_diagnostics(src, policy)[0]
