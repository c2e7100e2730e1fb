"""Monte Carlo tree search over Horner-scheme variable orders.

The search tree's depth-d nodes fix the first (or last, or outermost and
innermost in two-sided mode) d variables of the order; playouts complete the
order uniformly at random and score it by the operation count of the
Horner+CSE form.  UCT selection balances revisiting good branches against
trying unexplored ones.

Scoring runs on a hash-consing builder shared across playouts: structurally
equal subtrees intern to one node, so each completed order is scored by a
reachability walk over the node DAG, and repeated brackets cost nothing to
rebuild.  That makes the per-playout cost roughly proportional to the part
of the scheme not seen before.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from math import gcd
from typing import Callable, NamedTuple, Optional, Sequence

from .core import Polynomial, count_operations, power_cost
from .horner import Direction, HornerOrder

INFINITY = math.inf


# ---------------------------------------------------------------------------
# fast Horner+CSE scoring
# ---------------------------------------------------------------------------


class _Builder:
    """Hash-consed binary expression nodes with per-node op costs."""

    __slots__ = ("ids", "cost", "kids")

    def __init__(self):
        self.ids = {}
        self.cost = []
        self.kids = []

    def intern(self, key, cost, kids):
        i = self.ids.get(key)
        if i is None:
            i = len(self.cost)
            self.ids[key] = i
            self.cost.append(cost)
            self.kids.append(kids)
        return i

    def var(self, v):
        return self.intern(("v", v), 0, ())

    def const(self, c):
        return self.intern(("c", c), 0, ())

    def pow(self, v, e):
        if e == 1:
            return self.var(v)
        return self.intern(("p", v, e), 1 if e == 2 else power_cost(e), ())

    def mul(self, x, y, free=False):
        if x > y:
            x, y = y, x
        return self.intern(("m", x, y), 0 if free else 1, (x, y))

    def add(self, x, y):
        if x > y:
            x, y = y, x
        return self.intern(("a", x, y), 1, (x, y))

    def scaled(self, c, node):
        if node is None:
            return self.const(c)
        if c == 1:
            return node
        return self.mul(self.const(c), node, free=(c == -1))


class SchemeScorer:
    """Memoized op-count of the Horner+CSE form of one or more outputs.

    Brackets are index tuples over the flattened term array plus a pending
    integer divisor; a variable is eliminated entirely at its split, so
    exponent vectors are never rewritten.  Results agree with
    ``count_operations`` of the cse'd ``apply_scheme`` tree.
    """

    NODE_CAP = 1_500_000

    def __init__(self, outputs: Sequence[Polynomial], nvars: int):
        self.nvars = nvars
        exps = []
        coeffs = []
        self.root_slices = []
        self.denoms = []
        for p in outputs:
            base = len(exps)
            for e, c in p.terms:
                exps.append(e)
                coeffs.append(c)
            self.root_slices.append(tuple(range(base, base + len(p.terms))))
            self.denoms.append(p.denom)
        self.coeffs = coeffs
        # sparse per-term data
        self.term_factors = [
            tuple((v, e) for v, e in enumerate(row) if e) for row in exps
        ]
        self.term_vmask = [
            sum(1 << v for v, _ in fs) for fs in self.term_factors
        ]
        self.columns = [
            [row[v] for row in exps] for v in range(nvars)
        ]
        self.order_cache = {}
        self.evaluations = 0
        self._fresh()

    def _fresh(self):
        self.b = _Builder()
        self.polys = {}
        self.poly_indices = []
        self.poly_divisor = []
        self.poly_ge2 = []
        self.split_cache = {}
        self.build_cache = {}
        self._tree_memo = {}
        self.epoch = 0
        self.stamp = []
        self.roots = [self._intern_poly(idx, 1) for idx in self.root_slices]

    def _intern_poly(self, indices, divisor):
        key = (indices, divisor)
        pid = self.polys.get(key)
        if pid is None:
            pid = len(self.poly_indices)
            self.polys[key] = pid
            self.poly_indices.append(indices)
            self.poly_divisor.append(divisor)
            once = twice = 0
            vmask = self.term_vmask
            for i in indices:
                m = vmask[i]
                twice |= once & m
                once |= m
            self.poly_ge2.append(twice)
        return pid

    def _split(self, pid, v):
        key = (pid, v)
        hit = self.split_cache.get(key)
        if hit is not None:
            return hit
        col = self.columns[v]
        groups = {}
        for i in self.poly_indices[pid]:
            d = col[i]
            g = groups.get(d)
            if g is None:
                groups[d] = [i]
            else:
                g.append(i)
        div = self.poly_divisor[pid]
        out = tuple(
            (d, self._intern_poly(tuple(g), div))
            for d, g in sorted(groups.items())
        )
        self.split_cache[key] = out
        return out

    def _term_node(self, i, mask):
        b = self.b
        node = None
        for v, e in reversed(self.term_factors[i]):
            if (mask >> v) & 1:
                p = b.pow(v, e)
                node = p if node is None else b.mul(p, node)
        return node

    def _build(self, pid, order, mask):
        key = (pid, order, mask)
        hit = self.build_cache.get(key)
        if hit is not None:
            return hit
        b = self.b
        indices = self.poly_indices[pid]
        divisor = self.poly_divisor[pid]
        coeffs = self.coeffs
        if len(indices) == 1:
            i = indices[0]
            res = (coeffs[i] // divisor, self._term_node(i, mask))
            self.build_cache[key] = res
            return res
        g = 0
        for i in indices:
            g = gcd(g, coeffs[i])
            if g == divisor:
                break
        g //= divisor
        if g > 1:
            divisor *= g
            pid = self._intern_poly(indices, divisor)
        else:
            g = 1
        if not order:
            acc = None
            for i in reversed(indices):
                t = b.scaled(coeffs[i] // divisor, self._term_node(i, mask))
                acc = t if acc is None else b.add(t, acc)
            res = (g, acc)
            self.build_cache[key] = res
            return res
        v = order[0]
        rest = order[1:]
        mask2 = mask & ~(1 << v)
        groups = self._split(pid, v)
        ge2 = self.poly_ge2

        def build_sub(spid):
            m = ge2[spid]
            so = tuple(w for w in rest if (m >> w) & 1)
            return self._build(spid, so, mask2)

        cur = build_sub(groups[-1][1])
        for j in range(len(groups) - 2, -1, -1):
            d, pj = groups[j]
            bc, bn = cur
            p = b.pow(v, groups[j + 1][0] - d)
            bn = p if bn is None else b.mul(p, bn)
            ac, an = build_sub(pj)
            share = gcd(abs(ac), abs(bc))
            node = b.add(b.scaled(ac // share, an), b.scaled(bc // share, bn))
            cur = (share, node)
        d0 = groups[0][0]
        if d0 > 0:
            bc, bn = cur
            p = b.pow(v, d0)
            cur = (bc, p if bn is None else b.mul(p, bn))
        res = (g * cur[0], cur[1])
        self.build_cache[key] = res
        return res

    def score(self, order, method: str = "cse") -> int:
        """Op count of the scheme for one completed order.

        ``cse`` counts shared subtrees once (the default playout metric);
        ``tree`` counts the plain Horner tree without sharing.
        """
        order = tuple(order)
        cache_key = order if method == "cse" else (method, order)
        hit = self.order_cache.get(cache_key)
        if hit is not None:
            return hit
        if len(self.b.cost) > self.NODE_CAP:
            self._fresh()
        self.evaluations += 1
        full = (1 << self.nvars) - 1
        roots = []
        total = 0
        for k, rid in enumerate(self.roots):
            m = self.poly_ge2[rid]
            filtered = tuple(v for v in order if (m >> v) & 1)
            c, node = self._build(rid, filtered, full)
            if node is not None:
                roots.append(node)
                if abs(c) != self.denoms[k]:
                    total += 1
        if method == "tree":
            total += sum(self._tree_total(n) for n in roots)
            self.order_cache[cache_key] = total
            return total
        cost = self.b.cost
        kids = self.b.kids
        stamp = self.stamp
        n_nodes = len(cost)
        if len(stamp) < n_nodes:
            stamp.extend([0] * (n_nodes - len(stamp)))
        self.epoch += 1
        epoch = self.epoch
        stack = roots
        while stack:
            n = stack.pop()
            if stamp[n] != epoch:
                stamp[n] = epoch
                total += cost[n]
                for k in kids[n]:
                    if stamp[k] != epoch:
                        stack.append(k)
        self.order_cache[cache_key] = total
        return total

    def _tree_total(self, node) -> int:
        """Subtree op total counting shared nodes with multiplicity."""
        memo = self._tree_memo
        hit = memo.get(node)
        if hit is not None:
            return hit
        stack = [node]
        cost = self.b.cost
        kids = self.b.kids
        while stack:
            n = stack[-1]
            if n in memo:
                stack.pop()
                continue
            missing = [k for k in kids[n] if k not in memo]
            if missing:
                stack.extend(missing)
                continue
            memo[n] = cost[n] + sum(memo[k] for k in kids[n])
            stack.pop()
        return memo[node]


# ---------------------------------------------------------------------------
# search tree
# ---------------------------------------------------------------------------

FRONT, BACK = 0, 1


class SearchNode:
    """One decision in the order: ``chosen_variable`` placed on ``side``.

    ``children`` materialize lazily; ``untried`` holds the moves not yet
    expanded (an unvisited child has UCT +infinity, so it would be chosen
    ahead of any visited sibling anyway).
    """

    __slots__ = ("chosen_variable", "side", "visits", "score_sum",
                 "children", "untried")

    def __init__(self, chosen_variable, side, moves):
        self.chosen_variable = chosen_variable
        self.side = side
        self.visits = 0
        self.score_sum = 0.0
        self.children = []
        self.untried = list(moves)

    def mean(self) -> float:
        return self.score_sum / self.visits if self.visits else 0.0


def uct_select(parent: SearchNode, cp: float) -> int:
    """Index of the child maximizing <x_i> + 2 cp sqrt(2 ln n / n_i).

    Unvisited children count as +infinity and win ties by index.
    """
    if not parent.children:
        raise ValueError("node has no children")
    log_n = math.log(parent.visits) if parent.visits > 0 else 0.0
    best_idx = -1
    best_val = -INFINITY
    for i, child in enumerate(parent.children):
        if child.visits == 0:
            return i
        val = (child.score_sum / child.visits
               + 2.0 * cp * math.sqrt(2.0 * log_n / child.visits))
        if val > best_val:
            best_val = val
            best_idx = i
    return best_idx


@dataclass
class MctsSettings:
    cp: float = 1.0
    num_expand: int = 1000
    num_keep: int = 10
    num_repeat: int = 1
    time_limit_seconds: float = 0.0
    direction: Direction = Direction.FORWARD_OR_BACKWARD
    seed: int = 0

    def __post_init__(self):
        if self.num_expand < 1 or self.num_keep < 1 or self.num_repeat < 1:
            raise ValueError("numExpand, numKeep and numRepeat must be >= 1")


class PlayoutResult(NamedTuple):
    order: HornerOrder
    score: float
    op_count: int


def _order_of(front, middle, back, two_sided: bool) -> tuple:
    return tuple(front) + tuple(middle) + tuple(reversed(back))


def playout(scorer_or_poly, partial_order, rng, scoring_method: str = "cse",
            back_partial=(), baseline: Optional[int] = None) -> PlayoutResult:
    """Complete a partial order uniformly at random and score it.

    ``score`` is baseline/opCount clamped into (0,1]; the raw ``op_count``
    is what search quality is judged by.  Fully specified orders involve no
    randomness.
    """
    scorer = _as_scorer(scorer_or_poly)
    if scoring_method not in ("cse", "tree"):
        raise ValueError(f"unknown scoring method {scoring_method!r}")
    occurring = 0
    for r in scorer.roots:
        occurring |= _once_mask(scorer, r)
    used = set(partial_order) | set(back_partial)
    rest = [v for v in range(scorer.nvars)
            if v not in used and (occurring >> v) & 1]
    rng.shuffle(rest)
    seq = _order_of(partial_order, rest, back_partial, bool(back_partial))
    op_count = scorer.score(seq, scoring_method)
    if baseline is None:
        baseline = op_count
    score = min(1.0, baseline / op_count) if op_count else 1.0
    return PlayoutResult(HornerOrder(seq), score, op_count)


def _once_mask(scorer, rid):
    mask = 0
    for i in scorer.poly_indices[rid]:
        mask |= scorer.term_vmask[i]
    return mask


def _as_scorer(obj):
    if isinstance(obj, SchemeScorer):
        return obj
    if isinstance(obj, Polynomial):
        return SchemeScorer([obj], obj.nvars)
    polys = [p for _, p in obj]
    return SchemeScorer(polys, polys[0].nvars)


# ---------------------------------------------------------------------------
# the search proper
# ---------------------------------------------------------------------------


class _BestList:
    """Global top-k (op_count, order) list with order dedup."""

    def __init__(self, keep):
        self.keep = keep
        self.by_order = {}

    def offer(self, order, count):
        prev = self.by_order.get(order)
        if prev is None or count < prev:
            self.by_order[order] = count

    def ranked(self):
        items = sorted(self.by_order.items(), key=lambda kv: (kv[1], kv[0]))
        return [(HornerOrder(o), c) for o, c in items[: self.keep]]


def _tree_moves(variables, two_sided, remaining):
    if not two_sided or len(remaining) == 1:
        return [(v, FRONT) for v in remaining]
    return ([(v, FRONT) for v in remaining]
            + [(v, BACK) for v in remaining])


def _run_tree(scorer, variables, settings, rng, best, state, num_expand,
              backward: bool, two_sided: bool, deadline):
    """One UCT tree; reward = running-best / op_count (adaptive, in (0,1])."""
    root = SearchNode(None, FRONT, _tree_moves(variables, two_sided,
                                               variables))
    for _ in range(num_expand):
        if deadline and time.monotonic() > deadline:
            return True
        node = root
        path = [root]
        front, back = [], []
        remaining = list(variables)

        def place(move):
            v, side = move
            (back if side == BACK else front).append(v)
            remaining.remove(v)

        while not node.untried and node.children:
            node = node.children[uct_select(node, settings.cp)]
            path.append(node)
            place((node.chosen_variable, node.side))
        if node.untried:
            move = node.untried.pop(0)
            place(move)
            child = SearchNode(move[0], move[1],
                               _tree_moves(variables, two_sided,
                                           [v for v in remaining]))
            node.children.append(child)
            node = child
            path.append(node)
        rng.shuffle(remaining)
        if backward:
            order = tuple(reversed(front + remaining))
        else:
            order = _order_of(front, remaining, back, two_sided)
        op_count = scorer.score(order)
        if state[0] is None or op_count < state[0]:
            state[0] = op_count
        reward = state[0] / op_count if op_count else 1.0
        for n in path:
            n.visits += 1
            n.score_sum += reward
        best.offer(order, op_count)
    return False


def mcts_search(p, settings: MctsSettings, rng=None):
    """Search variable orders; returns up to numKeep (order, opCount) pairs,
    best first.

    Runs numRepeat independent trees (numRepeat * numExpand playouts in
    total); forwardOrBackward splits each tree's budget over a forward and a
    backward tree, forwardAndBackward fills orders from both ends within a
    single tree.  The kept list is global across trees.  With a fixed seed
    the result is reproducible.
    """
    scorer = _as_scorer(p)
    if not any(scorer.poly_indices[r] for r in scorer.roots):
        raise ValueError("cannot search an empty polynomial")
    if rng is None:
        rng = random.Random(settings.seed)
    occurring = 0
    for r in scorer.roots:
        occurring |= _once_mask(scorer, r)
    variables = [v for v in range(scorer.nvars) if (occurring >> v) & 1]
    best = _BestList(settings.num_keep)
    state = [None]
    deadline = (time.monotonic() + settings.time_limit_seconds
                if settings.time_limit_seconds else None)
    direction = settings.direction
    for _ in range(settings.num_repeat):
        if direction == Direction.FORWARD:
            out = _run_tree(scorer, variables, settings, rng, best, state,
                            settings.num_expand, False, False, deadline)
        elif direction == Direction.BACKWARD:
            out = _run_tree(scorer, variables, settings, rng, best, state,
                            settings.num_expand, True, False, deadline)
        elif direction == Direction.FORWARD_AND_BACKWARD:
            out = _run_tree(scorer, variables, settings, rng, best, state,
                            settings.num_expand, False, True, deadline)
        else:
            half = settings.num_expand // 2
            out = _run_tree(scorer, variables, settings, rng, best, state,
                            half, False, False, deadline)
            out = out or _run_tree(scorer, variables, settings, rng, best,
                                   state, settings.num_expand - half, True,
                                   False, deadline)
        if out:
            break
    return best.ranked()
