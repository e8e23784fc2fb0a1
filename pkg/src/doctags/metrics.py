"""Text similarity scores and tree-edit-distance similarity for tables."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .otsl import HtmlNode, parse_html_table

BLEU_EPSILON = 1e-9


@dataclass(frozen=True)
class TextScore:
    edit_distance: float
    precision: float
    recall: float
    f1: float
    bleu: float

    def as_dict(self) -> dict:
        return {
            "edit_distance": self.edit_distance,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "bleu": self.bleu,
        }


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance between two sequences."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    if len(b) < 32:
        prev = list(range(len(b) + 1))
        for i, ca in enumerate(a, 1):
            cur = [i]
            for j, cb in enumerate(b, 1):
                cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
            prev = cur
        return prev[-1]
    # row-vectorised DP; insertions resolved with a running minimum
    if isinstance(a, str):
        av = np.fromiter((ord(ch) for ch in a), dtype=np.int64, count=len(a))
        bv = np.fromiter((ord(ch) for ch in b), dtype=np.int64, count=len(b))
    else:
        lookup: dict = {}
        av = np.array([lookup.setdefault(x, len(lookup)) for x in a], dtype=np.int64)
        bv = np.array([lookup.setdefault(x, len(lookup)) for x in b], dtype=np.int64)
    idx = np.arange(len(b) + 1)
    prev = idx.copy()
    cur = np.empty_like(prev)
    for i, ch in enumerate(av, 1):
        cur[0] = i
        np.minimum(prev[:-1] + (bv != ch), prev[1:] + 1, out=cur[1:])
        cur = np.minimum.accumulate(cur - idx) + idx
        prev, cur = cur, prev
    return int(prev[-1])


def normalized_edit_distance(pred: str, gt: str) -> float:
    """Levenshtein distance divided by the longer length (0 for two empty strings)."""
    longest = max(len(pred), len(gt))
    if longest == 0:
        return 0.0
    return levenshtein(pred, gt) / longest


def token_prf(pred: str, gt: str) -> tuple[float, float, float]:
    """Bag-of-words precision, recall and F1 over whitespace tokens."""
    p_tokens, g_tokens = pred.split(), gt.split()
    if not p_tokens and not g_tokens:
        return 1.0, 1.0, 1.0
    common = sum((Counter(p_tokens) & Counter(g_tokens)).values())
    precision = common / len(p_tokens) if p_tokens else 0.0
    recall = common / len(g_tokens) if g_tokens else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def _ngrams(tokens: list, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(pred: str, gt: str, max_n: int = 4, epsilon: float = BLEU_EPSILON) -> float:
    """Sentence BLEU against a single reference.

    Orders for which the prediction has no n-grams at all are skipped; an order
    with zero matches gets ``epsilon`` added to its numerator.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    hyp, ref = pred.split(), gt.split()
    if not hyp or not ref:
        return 1.0 if hyp == ref else 0.0
    log_total, orders = 0.0, 0
    for n in range(1, max_n + 1):
        hyp_counts = _ngrams(hyp, n)
        denom = sum(hyp_counts.values())
        if denom == 0:
            continue
        ref_counts = _ngrams(ref, n)
        matched = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        log_total += math.log((matched if matched else epsilon) / denom)
        orders += 1
    brevity = 1.0 if len(hyp) > len(ref) else math.exp(1 - len(ref) / len(hyp))
    return brevity * math.exp(log_total / orders)


def text_scores(pred: str, gt: str) -> TextScore:
    p, r, f = token_prf(pred, gt)
    return TextScore(normalized_edit_distance(pred, gt), p, r, f, bleu(pred, gt))


# --------------------------------------------------------------------------
# tree edit distance


def _postorder(root, children: Callable):
    """Postorder node list and leftmost-leaf index of every node."""
    nodes, leftmost = [], []
    stack = [(root, False)]
    first_leaf: dict[int, int] = {}
    while stack:
        node, seen = stack.pop()
        kids = children(node)
        if seen or not kids:
            idx = len(nodes)
            nodes.append(node)
            leftmost.append(first_leaf[id(kids[0])] if kids else idx)
            first_leaf[id(node)] = leftmost[-1]
            continue
        stack.append((node, True))
        for kid in reversed(kids):
            stack.append((kid, False))
    return nodes, leftmost


def _keyroots(leftmost: list) -> list:
    last: dict[int, int] = {}
    for i, lm in enumerate(leftmost):
        last[lm] = i
    return sorted(last.values())


def tree_edit_distance(
    a,
    b,
    rename_cost: Callable,
    children: Callable = lambda n: n.children,
    insert_cost: float = 1.0,
    delete_cost: float = 1.0,
) -> float:
    """Ordered tree edit distance (keyroot dynamic program).

    ``rename_cost(x, y)`` prices relabelling node ``x`` of ``a`` as node ``y``
    of ``b``; inserts and deletes cost a constant per node.  The result has
    the number type of the costs (pass Fractions for exact arithmetic).
    """
    na, la = _postorder(a, children)
    nb, lb = _postorder(b, children)
    ren = [[rename_cost(x, y) for y in nb] for x in na]
    # plain 0 keeps the arithmetic in whatever number type the costs use
    td = [[0] * len(nb) for _ in na]
    for i in _keyroots(la):
        for j in _keyroots(lb):
            li, lj = la[i], lb[j]
            rows, cols = i - li + 2, j - lj + 2
            fd = [[0] * cols for _ in range(rows)]
            for x in range(1, rows):
                fd[x][0] = fd[x - 1][0] + delete_cost
            for y in range(1, cols):
                fd[0][y] = fd[0][y - 1] + insert_cost
            for x in range(1, rows):
                ia = li + x - 1
                row, above = fd[x], fd[x - 1]
                for y in range(1, cols):
                    jb = lj + y - 1
                    if la[ia] == li and lb[jb] == lj:
                        v = min(above[y] + delete_cost, row[y - 1] + insert_cost, above[y - 1] + ren[ia][jb])
                        td[ia][jb] = v
                    else:
                        v = min(above[y] + delete_cost, row[y - 1] + insert_cost,
                                fd[la[ia] - li][lb[jb] - lj] + td[ia][jb])
                    row[y] = v
    return td[-1][-1]


@dataclass
class _TedNode:
    tag: str
    colspan: str
    rowspan: str
    text: str
    children: list


def _ted_tree(node: HtmlNode, structure_only: bool) -> _TedNode:
    is_cell = node.tag in ("td", "th")
    return _TedNode(
        node.tag,
        str(node.attrs.get("colspan", "1")).strip() or "1",
        str(node.attrs.get("rowspan", "1")).strip() or "1",
        node.text if is_cell and not structure_only else "",
        [_ted_tree(ch, structure_only) for ch in node.children],
    )


@lru_cache(maxsize=65536)
def _text_cost(a: str, b: str) -> float:
    return normalized_edit_distance(a, b)


def teds_rename_cost(x: _TedNode, y: _TedNode) -> float:
    if x.tag != y.tag or x.colspan != y.colspan or x.rowspan != y.rowspan:
        return 1.0
    if x.tag in ("td", "th"):
        return _text_cost(x.text, y.text)
    return 0.0


def _size(node) -> int:
    return 1 + sum(_size(ch) for ch in node.children)


def teds(
    pred: Union[HtmlNode, str],
    gt: Union[HtmlNode, str],
    structure_only: bool = False,
) -> float:
    """Tree-edit-distance similarity between two HTML tables.

    ``structure_only`` blanks all cell text first, so only tags and spans count.
    """
    trees = []
    for t in (pred, gt):
        if isinstance(t, str):
            t = parse_html_table(t)
        if t.tag != "table":
            raise ValueError(f"expected a <table> root, got <{t.tag}>")
        trees.append(_ted_tree(t, structure_only))
    a, b = trees
    n = max(_size(a), _size(b))
    # ancestry-preserving mappings can cost more than n on malformed nesting
    # (a td inside a td), so clamp to keep the score in [0, 1]
    return max(0.0, 1.0 - float(tree_edit_distance(a, b, teds_rename_cost)) / n)


def teds_pair(pred: Optional[Union[HtmlNode, str]], gt: Union[HtmlNode, str]) -> dict:
    """Both TEDS flavours; a missing prediction scores 0."""
    if pred is None:
        return {"teds": 0.0, "teds_structure": 0.0}
    return {"teds": teds(pred, gt), "teds_structure": teds(pred, gt, structure_only=True)}
