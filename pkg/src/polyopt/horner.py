"""Multivariate Horner schemes: variable orders and scheme application.

A scheme is a variable order; applying it rewrites the polynomial as nested
brackets.  Splitting on variable v groups terms by their v-exponent,

    p  =  v^d0 * ( q0 + v^(d1-d0) * ( q1 + ... ) ),

and recursion continues inside each bracket with the remaining order.  Two
refinements match the behaviour the optimizer statistics are calibrated
against: the integer content of every bracket (and of every chain tail) is
pulled out in front, and a variable is only split on while it occurs in at
least two terms of the current bracket, otherwise it stays inside its term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import gcd
from typing import Optional, Sequence

from .core import ADD, CONST, MUL, POW, VAR, Polynomial


class Direction(Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    FORWARD_OR_BACKWARD = "forwardorbackward"
    FORWARD_AND_BACKWARD = "forwardandbackward"


@dataclass(frozen=True)
class HornerOrder:
    """A permutation of the occurring variables, outermost first."""

    sequence: tuple
    construction: str = "front-only"  # front-only | back-only | two-sided

    def __iter__(self):
        return iter(self.sequence)

    def __len__(self):
        return len(self.sequence)

    def reversed(self) -> "HornerOrder":
        return HornerOrder(tuple(reversed(self.sequence)), self.construction)


def occurrence_order(p: Polynomial, direction: Direction = Direction.FORWARD,
                     tie_break: Optional[Sequence[int]] = None) -> HornerOrder:
    """Variables sorted by the number of terms they occur in, most frequent
    first; ``BACKWARD`` returns the exact reverse.  Ties break by declaration
    order (or by an explicit ``tie_break`` ranking)."""
    if not p.terms:
        raise ValueError("empty polynomial has no occurrence order")
    counts = p.occurrence_counts()
    return occurrence_order_counts(counts, direction, tie_break)


def occurrence_order_counts(counts, direction=Direction.FORWARD,
                            tie_break=None) -> HornerOrder:
    rank = {v: i for i, v in enumerate(tie_break)} if tie_break else None
    used = [v for v in range(len(counts)) if counts[v]]
    used.sort(key=lambda v: (-counts[v], rank[v] if rank else v))
    if direction == Direction.BACKWARD:
        used.reverse()
    elif direction != Direction.FORWARD:
        raise ValueError("occurrence_order needs a single direction")
    return HornerOrder(tuple(used))


def fixed_scheme(symbols: Sequence[int], p: Polynomial) -> HornerOrder:
    """Use an explicit variable order; must be a permutation of the
    variables occurring in ``p``."""
    seq = tuple(symbols)
    occurring = set(p.variables_used())
    if len(set(seq)) != len(seq):
        raise ValueError("duplicate symbol in fixed scheme")
    if set(seq) != occurring:
        raise ValueError("fixed scheme is not a permutation of the "
                         "occurring variables")
    return HornerOrder(seq)


# ---------------------------------------------------------------------------
# scheme application
# ---------------------------------------------------------------------------


def _mono_chain(exps, coeff):
    """Tree for one term: coefficient times the variable powers in id order
    (right-associated); returns (coeff, node|None)."""
    node = None
    for v in range(len(exps) - 1, -1, -1):
        e = exps[v]
        if e:
            p = (VAR, v) if e == 1 else (POW, (VAR, v), e)
            node = p if node is None else (MUL, (p, node))
    return coeff, node


def _materialize(coeff, node):
    if node is None:
        return (CONST, coeff)
    if coeff == 1:
        return node
    return (MUL, ((CONST, coeff), node))


def _wrap_power(v, e, pair):
    coeff, node = pair
    p = (VAR, v) if e == 1 else (POW, (VAR, v), e)
    return coeff, (p if node is None else (MUL, (p, node)))


def _build(terms, order, pos):
    """terms: canonical [(exps, coeff)]; returns (content, node|None)."""
    if len(terms) == 1:
        return _mono_chain(*terms[0])
    g = 0
    for _, c in terms:
        g = gcd(g, c)
        if g == 1:
            break
    if g > 1:
        terms = [(e, c // g) for e, c in terms]
    split_v = None
    for i in range(pos, len(order)):
        v = order[i]
        n = 0
        for e, _ in terms:
            if e[v]:
                n += 1
                if n == 2:
                    break
        if n >= 2:
            split_v, pos = v, i + 1
            break
    if split_v is None:
        # flat sum in canonical term order, right-associated
        acc = None
        for e, c in reversed(terms):
            node = _materialize(*_mono_chain(e, c))
            acc = node if acc is None else (ADD, (node, acc))
        return g, acc
    groups = {}
    for e, c in terms:
        d = e[split_v]
        e2 = e[:split_v] + (0,) + e[split_v + 1:]
        groups.setdefault(d, []).append((e2, c))
    degrees = sorted(groups)
    cur = _build(groups[degrees[-1]], order, pos)
    for j in range(len(degrees) - 2, -1, -1):
        bc, bn = _wrap_power(split_v, degrees[j + 1] - degrees[j], cur)
        ac, an = _build(groups[degrees[j]], order, pos)
        share = gcd(abs(ac), abs(bc))
        node = (ADD, (_materialize(ac // share, an),
                      _materialize(bc // share, bn)))
        cur = (share, node)
    if degrees[0] > 0:
        cur = _wrap_power(split_v, degrees[0], cur)
    return g * cur[0], cur[1]


def apply_scheme(p: Polynomial, order: HornerOrder):
    """Apply a Horner scheme, returning a binary expression tree.

    Every variable of ``p`` must appear in ``order``.  The tree's operation
    count never exceeds the raw polynomial's; additions stay at term count
    minus one.
    """
    occurring = set(p.variables_used())
    if occurring - set(order.sequence):
        raise ValueError("order does not cover all variables of p")
    if p.denom != 1:
        raise ValueError("trees are integer-only; split the denominator off "
                         "first (the optimizer carries it on the output)")
    if not p.terms:
        return (CONST, 0)
    content, node = _build(list(p.terms), tuple(order.sequence), 0)
    return _materialize(content, node)


def print_scheme(order: HornerOrder, names) -> str:
    """Render the chosen order for PrintScheme-style reporting."""
    return " ".join(names[v] for v in order.sequence)
