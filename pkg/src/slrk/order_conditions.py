"""Rooted-tree order conditions for explicit Runge-Kutta tableaux.

A scheme has order p iff the elementary weight of every rooted tree t
with at most p nodes equals 1/density(t). All evaluation here is exact
rational arithmetic; order 6 involves 37 trees.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .tableau import Tableau

MAX_ORDER = 10
VERIFIED_ORDER_CAP = 8


@dataclass(frozen=True)
class RootedTree:
    """Unordered rooted tree in canonical form.

    Children are stored sorted by their level sequence, so isomorphic
    trees compare (and hash) equal.
    """

    children: tuple["RootedTree", ...] = ()

    def __post_init__(self):
        kids = tuple(sorted(self.children, key=lambda t: t.level_sequence(), reverse=True))
        object.__setattr__(self, "children", kids)
        object.__setattr__(self, "_order", 1 + sum(k.order for k in kids))
        seq = [1]
        for k in kids:
            seq.extend(d + 1 for d in k.level_sequence())
        object.__setattr__(self, "_levelseq", tuple(seq))

    @property
    def order(self) -> int:
        """Number of nodes."""
        return self._order

    def level_sequence(self) -> tuple[int, ...]:
        """Preorder node depths (root depth 1); canonical serialization."""
        return self._levelseq


LEAF = RootedTree()


def tree_from_level_sequence(seq) -> RootedTree:
    """Rebuild a tree from its preorder depth sequence."""
    seq = list(seq)
    if not seq:
        raise ValueError("empty level sequence")

    def build(pos, depth):
        kids = []
        i = pos + 1
        while i < len(seq) and seq[i] > depth:
            if seq[i] != depth + 1:
                raise ValueError(f"bad level sequence {seq}")
            child, i = build(i, depth + 1)
            kids.append(child)
        return RootedTree(tuple(kids)), i

    root, end = build(0, seq[0])
    if end != len(seq):
        raise ValueError(f"bad level sequence {seq}")
    return root


@lru_cache(maxsize=None)
def _trees_of_order(n: int) -> tuple[RootedTree, ...]:
    if n == 1:
        return (LEAF,)
    trees = {RootedTree(forest) for forest in _forests(n - 1)}
    return tuple(sorted(trees, key=RootedTree.level_sequence))


@lru_cache(maxsize=None)
def _forests(total: int) -> tuple[tuple[RootedTree, ...], ...]:
    """All multisets of trees with orders summing to `total`."""
    pool = [t for k in range(1, total + 1) for t in _trees_of_order(k)]
    out = []

    def extend(prefix, remaining, start):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for i in range(start, len(pool)):
            t = pool[i]
            if t.order > remaining:
                continue
            prefix.append(t)
            extend(prefix, remaining - t.order, i)
            prefix.pop()

    extend([], total, 0)
    return tuple(out)


def enumerate_trees(max_order: int) -> list[RootedTree]:
    """All non-isomorphic rooted trees with up to max_order nodes.

    Deterministic order: by node count, then by level sequence.
    """
    if not 1 <= max_order <= MAX_ORDER:
        raise ValueError(f"max_order must be in [1, {MAX_ORDER}], got {max_order}")
    return [t for n in range(1, max_order + 1) for t in _trees_of_order(n)]


def density(t: RootedTree) -> Fraction:
    """Tree density: order(t) times the product of child densities."""
    gamma = Fraction(t.order)
    for child in t.children:
        gamma *= density(child)
    return gamma


def _stage_weights(tab: Tableau, t: RootedTree, cache) -> tuple[Fraction, ...]:
    """Per-stage weight vector phi_i(t) for the elementary weight."""
    got = cache.get(t)
    if got is not None:
        return got
    s = tab.s
    if not t.children:
        phi = (Fraction(1),) * s
    else:
        phi = [Fraction(1)] * s
        for child in t.children:
            child_phi = _stage_weights(tab, child, cache)
            for i in range(s):
                acc = Fraction(0)
                for j in range(i):
                    aij = tab.a[i][j]
                    if aij:
                        acc += aij * child_phi[j]
                phi[i] *= acc
        phi = tuple(phi)
    cache[t] = phi
    return phi


def elementary_weight(tab: Tableau, t: RootedTree) -> Fraction:
    """Exact elementary weight of tree t under the given tableau."""
    phi = _stage_weights(tab, t, {})
    return sum((bi * pi for bi, pi in zip(tab.b, phi)), Fraction(0))


@dataclass(frozen=True)
class OrderCondition:
    """One order condition: residual = weight(tree) - 1/density(tree)."""

    tree: RootedTree
    density: Fraction
    residual: Fraction


def order_residuals(tab: Tableau, p: int) -> list[OrderCondition]:
    """Exact residuals for every tree of order <= p."""
    if p < 1:
        raise ValueError(f"order must be >= 1, got {p}")
    cache = {}
    out = []
    for t in enumerate_trees(p):
        gamma = density(t)
        phi = _stage_weights(tab, t, cache)
        weight = sum((bi * pi for bi, pi in zip(tab.b, phi)), Fraction(0))
        out.append(OrderCondition(t, gamma, weight - 1 / gamma))
    return out


def verified_order(tab: Tableau) -> int:
    """Largest p <= 8 with every order-<=p residual exactly zero."""
    cache = {}
    for p in range(1, VERIFIED_ORDER_CAP + 1):
        for t in _trees_of_order(p):
            gamma = density(t)
            phi = _stage_weights(tab, t, cache)
            weight = sum((bi * pi for bi, pi in zip(tab.b, phi)), Fraction(0))
            if weight != 1 / gamma:
                return p - 1
    return VERIFIED_ORDER_CAP
