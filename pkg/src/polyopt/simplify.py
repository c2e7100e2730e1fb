"""Post-Horner optimizers: common subexpression elimination, operator
merging, greedy extraction of small subexpressions, and partial
factorization.

The greedy method repeatedly counts how often the small patterns

    x^n,  x*y,  c*x,  c*x + d,  x+y,  x-y

occur across all instructions (x, y are variables or temporaries, c, d
integers), extracts the most profitable fraction of them into new
temporaries, and interleaves that with factoring variables out of sums.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from math import ceil, gcd
from typing import Dict, Iterable, Optional, Tuple

from .core import (ADD, CONST, MUL, POW, VAR, Instruction, OutputExpr,
                   Polynomial, Program, power_cost, tree_children)


@dataclass
class GreedySettings:
    max_perc: float = 5.0
    min_num: int = 10
    time_limit_seconds: float = 0.0

    def __post_init__(self):
        if not 0 < self.max_perc <= 100:
            raise ValueError("maxPerc must be in (0, 100]")
        if self.min_num < 1:
            raise ValueError("minNum must be >= 1")


# ---------------------------------------------------------------------------
# trees: CSE and operator merging
# ---------------------------------------------------------------------------


def _postorder(root):
    """Identity-aware iterative post-order over a tree/DAG."""
    seen = set()
    out = []
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            out.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for child in tree_children(node):
            if id(child) not in seen:
                stack.append((child, False))
    return out


def _class_ids(roots):
    """Value-number every subtree; equal subtrees share an id.

    Commutative operands are sorted by class id, so mirrored products and
    sums unify.  Linear in the node count.
    """
    key_to_class = {}
    node_class = {}
    order = []  # one representative node per class, first encounter
    for root in roots:
        for node in _postorder(root):
            if id(node) in node_class:
                continue
            tag = node[0]
            if tag == CONST or tag == VAR:
                key = node
            elif tag == POW:
                key = (POW, node_class[id(node[1])], node[2])
            else:
                key = (tag,) + tuple(sorted(node_class[id(c)]
                                            for c in node[1]))
            cls = key_to_class.get(key)
            if cls is None:
                cls = len(order)
                key_to_class[key] = cls
                order.append(node)
            node_class[id(node)] = cls
    return node_class, order


def merge_operators(tree):
    """Collapse same-operator parent/child pairs into n-ary nodes."""
    rebuilt = {}
    for node in _postorder(tree):
        tag = node[0]
        if tag == CONST or tag == VAR:
            rebuilt[id(node)] = node
        elif tag == POW:
            rebuilt[id(node)] = (POW, rebuilt[id(node[1])], node[2])
        else:
            children = []
            for child in node[1]:
                new = rebuilt[id(child)]
                if new[0] == tag:
                    children.extend(new[1])
                else:
                    children.append(new)
            rebuilt[id(node)] = (tag, tuple(children))
    return rebuilt[id(tree)]


# ---------------------------------------------------------------------------
# internal program workspace
# ---------------------------------------------------------------------------
#
# Holders map to [terms, const] where terms is a tuple of
# (coeff, ((ref, exp), ...)).  Holder keys are ints for temporaries and
# ('out', name, denom) for outputs.  Multi-factor terms encode products
# inline; ``to_program`` rematerializes them as product instructions so the
# public Program stays single-operator.


def _norm_terms(terms, const):
    agg = {}
    for c, f in terms:
        if not f:
            const += c
            continue
        agg[f] = agg.get(f, 0) + c
    out = tuple(sorted(((c, f) for f, c in agg.items() if c),
                       key=lambda t: t[1]))
    return out, const


def _merge_factors(factors):
    factors.sort()
    merged = []
    for r, e in factors:
        if merged and merged[-1][0] == r:
            merged[-1] = (r, merged[-1][1] + e)
        else:
            merged.append((r, e))
    return tuple(merged)


class _Workspace:
    def __init__(self, nvars):
        self.nvars = nvars
        self.body: Dict = {}
        self.out_order = []
        self.next_temp = nvars

    # -- construction ------------------------------------------------------

    def new_temp(self):
        t = self.next_temp
        self.next_temp += 1
        return t

    @staticmethod
    def from_trees(nvars, outputs, dedup, denoms=None):
        """outputs: iterable of (name, tree).  With dedup, value-equal
        subtrees share one temporary (CSE); without it the tree structure is
        kept as is."""
        ws = _Workspace(nvars)
        roots = [t for _, t in outputs]
        if dedup:
            node_ids, reps = _class_ids(roots)
            ordered = reps
            ident = lambda n: node_ids[id(n)]
        else:
            ordered = []
            seen = set()
            for r in roots:
                for n in _postorder(r):
                    if id(n) not in seen:
                        seen.add(id(n))
                        ordered.append(n)
            index = {id(n): i for i, n in enumerate(ordered)}
            ident = lambda n: index[id(n)]
        uses = {}
        for node in ordered:
            for child in tree_children(node):
                uses[ident(child)] = uses.get(ident(child), 0) + 1
        for r in roots:
            uses[ident(r)] = uses.get(ident(r), 0) + 1
        desc = {}
        for node in ordered:
            nid = ident(node)
            if nid in desc:
                continue
            tag = node[0]
            if tag == CONST:
                desc[nid] = ("c", node[1])
            elif tag == VAR:
                desc[nid] = ("t", 1, ((node[1], 1),))
            elif tag == POW:
                base = desc[ident(node[1])]
                if base[0] == "c":
                    desc[nid] = ("c", base[1] ** node[2])
                    continue
                if base[0] == "t" and base[1] == 1 and len(base[2]) == 1:
                    r0, e0 = base[2][0]
                    term = (1, ((r0, e0 * node[2]),))
                else:
                    term = (1, ((ws._materialize(base), node[2]),))
                desc[nid] = ws._maybe_temp(term, uses.get(nid, 0))
            elif tag == MUL:
                coeff = 1
                factors = []
                for child in node[1]:
                    d = desc[ident(child)]
                    if d[0] == "c":
                        coeff *= d[1]
                    elif d[0] == "t":
                        coeff *= d[1]
                        factors.extend(d[2])
                    else:
                        factors.append((d[1], 1))
                if not factors:
                    desc[nid] = ("c", coeff)
                    continue
                term = (coeff, _merge_factors(factors))
                desc[nid] = ws._maybe_temp(term, uses.get(nid, 0))
            else:  # ADD
                terms = []
                const = 0
                for child in node[1]:
                    d = desc[ident(child)]
                    if d[0] == "c":
                        const += d[1]
                    elif d[0] == "t":
                        terms.append((d[1], d[2]))
                    else:
                        terms.append((1, ((d[1], 1),)))
                t = ws.new_temp()
                ws.body[t] = list(_norm_terms(terms, const))
                desc[nid] = ("r", t)
        denoms = denoms or {}
        for name, root in outputs:
            d = desc[ident(root)]
            holder = ("out", name, denoms.get(name, 1))
            if d[0] == "c":
                ws.body[holder] = [(), d[1]]
            elif d[0] == "t":
                ws.body[holder] = [((d[1], d[2]),), 0]
            else:
                ws.body[holder] = [((1, ((d[1], 1),)),), 0]
            ws.out_order.append(holder)
        return ws

    def _materialize(self, d):
        if d[0] == "r":
            return d[1]
        t = self.new_temp()
        self.body[t] = [((d[1], d[2]),), 0]
        return t

    def _maybe_temp(self, term, nuses):
        if nuses > 1:
            t = self.new_temp()
            self.body[t] = [(term,), 0]
            return "r", t
        return ("t",) + term

    @staticmethod
    def from_program(program: Program):
        ws = _Workspace(program.nvars)
        for ins in program.instructions:
            ws.body[ins.target] = [ins.terms, ins.const]
            ws.next_temp = max(ws.next_temp, ins.target + 1)
        for out in program.outputs:
            holder = ("out", out.name, out.denom)
            ws.body[holder] = [out.terms, out.const]
            ws.out_order.append(holder)
        return ws

    # -- bookkeeping -------------------------------------------------------

    def use_counts(self):
        uses = {}
        for terms, _ in self.body.values():
            for _, f in terms:
                for r, _ in f:
                    if r >= self.nvars:
                        uses[r] = uses.get(r, 0) + 1
        return uses

    def rewrite_refs(self, subst):
        """subst: ref -> (sign, ref); applied transitively everywhere."""

        def resolve(r):
            sign = 1
            while r in subst:
                s, r = subst[r]
                sign *= s
            return sign, r

        for holder, (terms, const) in self.body.items():
            dirty = False
            new_terms = []
            for c, f in terms:
                nf = []
                changed = False
                for r, e in f:
                    if r in subst:
                        s, r2 = resolve(r)
                        c *= s**e
                        nf.append((r2, e))
                        changed = True
                    else:
                        nf.append((r, e))
                if changed:
                    dirty = True
                    nf = list(nf)
                    new_terms.append((c, _merge_factors(nf)))
                else:
                    new_terms.append((c, f))
            if dirty:
                self.body[holder][0], self.body[holder][1] = _norm_terms(
                    new_terms, const)

    def cleanup(self):
        """Alias collapse, duplicate-rhs merging, dead-code sweep."""
        while True:
            subst = {}
            rhs_seen = {}
            for holder in sorted(k for k in self.body if isinstance(k, int)):
                terms, const = self.body[holder]
                if const == 0 and len(terms) == 1:
                    c, f = terms[0]
                    if c in (1, -1) and len(f) == 1 and f[0][1] == 1:
                        subst[holder] = (c, f[0][0])
                        continue
                rhs = (terms, const)
                prev = rhs_seen.get(rhs)
                if prev is not None:
                    subst[holder] = (1, prev)
                else:
                    rhs_seen[rhs] = holder
            if subst:
                for h in subst:
                    del self.body[h]
                self.rewrite_refs(subst)
                continue
            uses = self.use_counts()
            dead = [h for h in self.body
                    if isinstance(h, int) and not uses.get(h)]
            if not dead:
                return
            for h in dead:
                del self.body[h]

    def merge_single_use(self):
        """Program-level operator merge: splice single-use sums referenced
        as a lone +-1 term into their using sum, and inline single-use
        single-term temporaries into product terms."""
        changed = True
        while changed:
            changed = False
            uses = self.use_counts()
            single = {h for h, n in uses.items() if n == 1}
            for holder in list(self.body.keys()):
                if holder not in self.body:
                    continue
                terms, const = self.body[holder]
                new_terms = []
                dirty = False
                for c, f in terms:
                    nf = []
                    for r, e in f:
                        if r in single and e == 1 and r in self.body:
                            rt, rc = self.body[r]
                            if rc == 0 and len(rt) == 1:
                                c2, f2 = rt[0]
                                c *= c2
                                nf.extend(f2)
                                del self.body[r]
                                single.discard(r)
                                dirty = True
                                continue
                        nf.append((r, e))
                    f = _merge_factors(nf) if dirty else tuple(nf)
                    if (len(f) == 1 and c in (1, -1) and f[0][1] == 1
                            and f[0][0] in single and f[0][0] in self.body):
                        r = f[0][0]
                        rt, rc = self.body[r]
                        if len(rt) >= 2 or rc:
                            del self.body[r]
                            single.discard(r)
                            new_terms.extend((c * c3, f3) for c3, f3 in rt)
                            const += c * rc
                            dirty = True
                            continue
                    new_terms.append((c, f))
                if dirty:
                    changed = True
                    tt, const = _norm_terms(new_terms, const)
                    self.body[holder] = [tt, const]
        self.cleanup()

    # -- export ------------------------------------------------------------

    def op_total(self) -> int:
        total = 0
        for holder, (terms, const) in self.body.items():
            denom = holder[2] if isinstance(holder, tuple) else 1
            n_ops = len(terms) + (1 if const else 0)
            if n_ops > 1:
                total += n_ops - 1
            for c, f in terms:
                atoms = 1 if abs(c) != denom else 0
                for _, e in f:
                    atoms += 1
                    if e == 2:
                        total += 1
                    elif e >= 3:
                        total += power_cost(e)
                total += max(atoms - 1, 0)
        return total

    def to_program(self) -> Program:
        """Materialize multi-factor sum terms as product instructions,
        topologically order and densely renumber the temporaries."""
        body = {h: [list(terms), const] for h, (terms, const)
                in self.body.items()}
        extra = {}
        counter = [self.next_temp]

        def product_temp(factors):
            # one instruction per site keeps the op count unchanged
            t = counter[0]
            counter[0] += 1
            extra[t] = [[(1, factors)], 0]
            return t

        for holder, (terms, const) in body.items():
            multi = len(terms) + (1 if const else 0) > 1
            if not multi:
                continue
            for i, (c, f) in enumerate(terms):
                if len(f) > 1:
                    terms[i] = (c, ((product_temp(f), 1),))
        body.update(extra)

        emitted = []
        done = set()

        def emit(holder):
            stack = [(holder, False)]
            while stack:
                h, expanded = stack.pop()
                if expanded:
                    done.add(h)
                    emitted.append(h)
                    continue
                if h in done:
                    continue
                stack.append((h, True))
                deps = set()
                for c, f in body[h][0]:
                    for r, _ in f:
                        if r >= self.nvars and r not in done:
                            deps.add(r)
                stack.extend((d, False) for d in sorted(deps, reverse=True))

        for holder in sorted(h for h in body if isinstance(h, int)):
            emit(holder)
        for holder in self.out_order:
            emit(holder)
        # keep only what outputs reach
        reachable = set()
        stack = list(self.out_order)
        while stack:
            h = stack.pop()
            if h in reachable:
                continue
            reachable.add(h)
            for c, f in body[h][0]:
                for r, _ in f:
                    if r >= self.nvars:
                        stack.append(r)
        renumber = {}
        instructions = []
        outputs = {}
        for h in emitted:
            if h not in reachable:
                continue
            terms, const = body[h]
            new_terms = tuple(
                (c, tuple((renumber.get(r, r), e) for r, e in f))
                for c, f in terms)
            if isinstance(h, int):
                t = self.nvars + len(instructions)
                renumber[h] = t
                instructions.append(Instruction(t, new_terms, const))
            else:
                outputs[h] = OutputExpr(h[1], new_terms, const, h[2])
        return Program(self.nvars, instructions,
                       [outputs[h] for h in self.out_order])


# ---------------------------------------------------------------------------
# public tree -> program operations
# ---------------------------------------------------------------------------


def cse(tree_or_outputs, nvars: Optional[int] = None) -> Program:
    """Common subexpression elimination on one tree (or several named
    output trees sharing one id space): every distinct subtree is computed
    once.  Runs in time linear in the node count."""
    outputs = _as_outputs(tree_or_outputs)
    if nvars is None:
        nvars = _infer_nvars(outputs)
    ws = _Workspace.from_trees(nvars, outputs, dedup=True)
    ws.cleanup()
    return ws.to_program()


def program_from_tree(tree_or_outputs, nvars: Optional[int] = None,
                      dedup: bool = False) -> Program:
    """Straight-line form of the tree without (or with) value dedup;
    same-operator chains are merged into n-ary instructions."""
    outputs = _as_outputs(tree_or_outputs)
    if nvars is None:
        nvars = _infer_nvars(outputs)
    ws = _Workspace.from_trees(nvars, outputs, dedup=dedup)
    ws.merge_single_use()
    return ws.to_program()


def _as_outputs(tree_or_outputs):
    if isinstance(tree_or_outputs, tuple) and tree_or_outputs and isinstance(
            tree_or_outputs[0], str):
        return [("expr", tree_or_outputs)]
    return list(tree_or_outputs)


def _infer_nvars(outputs):
    top = -1
    for _, tree in outputs:
        stack = [tree]
        seen = set()
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            if node[0] == VAR:
                top = max(top, node[1])
            stack.extend(tree_children(node))
    return top + 1


# ---------------------------------------------------------------------------
# greedy pattern extraction
# ---------------------------------------------------------------------------


def _term_patterns(c, f):
    ac = abs(c)
    n = len(f)
    for i in range(n):
        r, e = f[i]
        if e >= 2:
            yield ("pow", r, e)
        if ac != 1:
            yield ("cmul", ac, r)
        for j in range(i + 1, n):
            yield ("mul", r, f[j][0])


def _sum_pair_key(c1, r1, c2, r2):
    g = gcd(abs(c1), abs(c2))
    a, b = c1 // g, c2 // g
    if abs(a) != 1 or abs(b) != 1:
        return None
    if r2 < r1:
        r1, r2 = r2, r1
    return ("add" if a == b else "sub", r1, r2)


def _const_pair_key(c, const):
    g = gcd(abs(c), abs(const))
    a, b = c // g, const // g
    if a < 0:
        a, b = -a, -b
    return ("cadd", a, b)


def _count_patterns_ws(ws: _Workspace):
    counts = {}
    bump = counts.__setitem__
    for terms, const in ws.body.values():
        plain = []
        for c, f in terms:
            for key in _term_patterns(c, f):
                counts[key] = counts.get(key, 0) + 1
            if len(f) == 1 and f[0][1] == 1:
                plain.append((c, f[0][0]))
        np = len(plain)
        for i in range(np):
            c1, r1 = plain[i]
            for j in range(i + 1, np):
                c2, r2 = plain[j]
                if r1 == r2:
                    continue
                key = _sum_pair_key(c1, r1, c2, r2)
                if key:
                    counts[key] = counts.get(key, 0) + 1
            if const:
                a, b = _const_pair_key(c1, const)
                key = ("cadd", a, b, r1)
                counts[key] = counts.get(key, 0) + 1
    return counts


def count_small_subexprs(program: Program) -> Dict[tuple, int]:
    """Occurrence counts of the extractable small patterns.

    Keys: ('pow', ref, n), ('mul', r1, r2), ('cmul', |c|, ref),
    ('add'|'sub', r1, r2) with unit normalized coefficients, and
    ('cadd', c1, c0, ref) for c1*ref + c0 matches against the constant
    addend.  Commutative keys are canonically ordered, signs folded.  Cost
    is quadratic in the instruction lengths.
    """
    ws = _Workspace.from_program(program)
    ws.merge_single_use()
    return _count_patterns_ws(ws)


def _key_unit_saving(key):
    if key[0] == "pow":
        return 1 if key[2] == 2 else power_cost(key[2])
    if key[0] == "cadd":
        return 1 + (1 if abs(key[1]) != 1 else 0)
    return 1


def _key_rhs(key):
    kind = key[0]
    if kind == "pow":
        return ((1, ((key[1], key[2]),)),), 0
    if kind == "mul":
        r1, r2 = key[1], key[2]
        f = ((r1, 2),) if r1 == r2 else tuple(sorted([(r1, 1), (r2, 1)]))
        return ((1, f),), 0
    if kind == "cmul":
        return ((key[1], ((key[2], 1),)),), 0
    if kind == "add":
        return _norm_terms([(1, ((key[1], 1),)), (1, ((key[2], 1),))], 0)
    if kind == "sub":
        return _norm_terms([(1, ((key[1], 1),)), (-1, ((key[2], 1),))], 0)
    if kind == "cadd":
        return _norm_terms([(key[1], ((key[3], 1),))], key[2])
    raise ValueError(f"unknown pattern {key!r}")


def _apply_pattern(ws: _Workspace, key, rhs_index) -> bool:
    """Rewrite the still-present occurrences of ``key``; a definition is
    created (or an existing identical instruction reused) only when at
    least two remain."""
    rhs = _key_rhs(key)
    existing = rhs_index.get(rhs)
    kind = key[0]
    sites = []
    for holder, (terms, const) in ws.body.items():
        if holder == existing:
            continue
        hit = False
        if kind in ("pow", "mul", "cmul"):
            for c, f in terms:
                if kind == "pow":
                    hit = (key[1], key[2]) in f
                elif kind == "mul":
                    if key[1] == key[2]:
                        hit = any(r == key[1] and e >= 2 for r, e in f)
                    else:
                        found = 0
                        for r, _ in f:
                            if r == key[1] or r == key[2]:
                                found += 1
                        hit = found == 2
                else:
                    hit = abs(c) == key[1] and any(r == key[2]
                                                   for r, _ in f)
                if hit:
                    break
        elif kind in ("add", "sub"):
            c1 = c2 = None
            for c, f in terms:
                if len(f) == 1 and f[0][1] == 1:
                    if f[0][0] == key[1]:
                        c1 = c
                    elif f[0][0] == key[2]:
                        c2 = c
            if c1 is not None and c2 is not None:
                hit = _sum_pair_key(c1, key[1], c2, key[2]) == key
        else:  # cadd
            if const:
                for c, f in terms:
                    if len(f) == 1 and f[0][1] == 1 and f[0][0] == key[3]:
                        a, b = _const_pair_key(c, const)
                        hit = (a, b) == (key[1], key[2])
                        break
        if hit:
            sites.append(holder)
    if len(sites) + (1 if existing is not None else 0) < 2:
        return False
    if existing is None:
        existing = ws.new_temp()
        ws.body[existing] = [rhs[0], rhs[1]]
        rhs_index[rhs] = existing
    T = existing
    for holder in sites:
        terms, const = ws.body[holder]
        nt = list(terms)
        if kind == "pow":
            for i, (c, f) in enumerate(nt):
                if (key[1], key[2]) in f:
                    nf = tuple(x for x in f if x != (key[1], key[2]))
                    nt[i] = (c, _merge_factors(list(nf) + [(T, 1)]))
        elif kind == "mul":
            for i, (c, f) in enumerate(nt):
                d = dict(f)
                need = 2 if key[1] == key[2] else 1
                if d.get(key[1], 0) >= need and d.get(key[2], 0) >= 1:
                    d[key[1]] -= 1
                    d[key[2]] -= 1
                    d[T] = d.get(T, 0) + 1
                    nt[i] = (c, tuple(sorted(
                        (r, e) for r, e in d.items() if e)))
        elif kind == "cmul":
            for i, (c, f) in enumerate(nt):
                if abs(c) == key[1]:
                    d = dict(f)
                    if d.get(key[2], 0) >= 1:
                        d[key[2]] -= 1
                        d[T] = d.get(T, 0) + 1
                        nt[i] = (1 if c > 0 else -1, tuple(sorted(
                            (r, e) for r, e in d.items() if e)))
        elif kind in ("add", "sub"):
            i1 = i2 = None
            for i, (c, f) in enumerate(nt):
                if len(f) == 1 and f[0][1] == 1:
                    if f[0][0] == key[1]:
                        i1 = i
                    elif f[0][0] == key[2]:
                        i2 = i
            if i1 is not None and i2 is not None:
                c1, c2 = nt[i1][0], nt[i2][0]
                if _sum_pair_key(c1, key[1], c2, key[2]) == key:
                    # occurrence = c1 * (key[1] +- key[2])
                    nt = [x for i, x in enumerate(nt) if i not in (i1, i2)]
                    nt.append((c1, ((T, 1),)))
        else:  # cadd
            for i, (c, f) in enumerate(nt):
                if len(f) == 1 and f[0][1] == 1 and f[0][0] == key[3]:
                    a, b = _const_pair_key(c, const)
                    if (a, b) == (key[1], key[2]):
                        mult = c // key[1]
                        nt[i] = (mult, ((T, 1),))
                        const -= mult * key[2]
                    break
        tt, const = _norm_terms(nt, const)
        ws.body[holder] = [tt, const]
    return True


def _greedy_round_ws(ws: _Workspace, settings: GreedySettings) -> bool:
    counts = _count_patterns_ws(ws)
    candidates = [(key, n) for key, n in counts.items() if n >= 2]
    if not candidates:
        return False
    candidates.sort(key=lambda kn: (-(kn[1] - 1) * _key_unit_saving(kn[0]),
                                    kn[0]))
    budget = max(settings.min_num,
                 ceil(settings.max_perc * len(candidates) / 100.0))
    rhs_index = {}
    for holder, (terms, const) in ws.body.items():
        if isinstance(holder, int):
            rhs_index.setdefault((terms, const), holder)
    improved = False
    for key, _ in candidates[:budget]:
        if _apply_pattern(ws, key, rhs_index):
            improved = True
    if improved:
        ws.cleanup()
    return improved


def _partial_factor_ws(ws: _Workspace) -> bool:
    changed = False
    for holder in list(ws.body.keys()):
        if holder not in ws.body:
            continue
        while True:
            terms, const = ws.body[holder]
            if len(terms) < 2:
                break
            occ = {}
            for _, f in terms:
                for r, _ in f:
                    occ[r] = occ.get(r, 0) + 1
            best_ref, best_n = None, 1
            for r, n in occ.items():
                if n > best_n or (n == best_n and best_ref is not None
                                  and r < best_ref):
                    best_ref, best_n = r, n
            if best_ref is None or best_n < 2:
                break
            inner = []
            keep = []
            for c, f in terms:
                d = dict(f)
                if d.get(best_ref, 0) >= 1:
                    d[best_ref] -= 1
                    inner.append((c, tuple(sorted(
                        (r, e) for r, e in d.items() if e))))
                else:
                    keep.append((c, f))
            t = ws.new_temp()
            ws.body[t] = list(_norm_terms(inner, 0))
            keep.append((1, _merge_factors([(best_ref, 1), (t, 1)])))
            tt, cc = _norm_terms(keep, const)
            ws.body[holder] = [tt, cc]
            changed = True
    if changed:
        ws.cleanup()
    return changed


# ---------------------------------------------------------------------------
# public program operations
# ---------------------------------------------------------------------------


def greedy_round(program: Program,
                 settings: Optional[GreedySettings] = None):
    """One counting/extraction round; returns (program, improved flag).

    The most profitable max(minNum, maxPerc% of the candidates) patterns
    with at least two occurrences are extracted; occurrences consumed by an
    earlier extraction in the same round are left for the next one.
    """
    settings = settings or GreedySettings()
    ws = _Workspace.from_program(program)
    ws.merge_single_use()
    improved = _greedy_round_ws(ws, settings)
    return ws.to_program(), improved


def partial_factor(program: Program) -> Program:
    """Factor out, per sum, the reference occurring in the most terms
    (repeatedly, highest count first); ties prefer the lowest ref."""
    ws = _Workspace.from_program(program)
    ws.merge_single_use()
    _partial_factor_ws(ws)
    return ws.to_program()


def optimize_program(program: Program,
                     settings: Optional[GreedySettings] = None) -> Program:
    """Alternate greedy rounds and partial factorization to a fixpoint (or
    the time limit); the op count never increases."""
    settings = settings or GreedySettings()
    ws = _Workspace.from_program(program)
    ws.merge_single_use()
    _optimize_ws(ws, settings)
    return ws.to_program()


def _optimize_ws(ws: _Workspace, settings: GreedySettings) -> bool:
    """Returns True when the time limit cut the fixpoint iteration short."""
    start = time.monotonic()
    limit = settings.time_limit_seconds
    while True:
        g = _greedy_round_ws(ws, settings)
        if limit and time.monotonic() - start > limit:
            return True
        f = _partial_factor_ws(ws)
        if not g and not f:
            return False
        if limit and time.monotonic() - start > limit:
            return True
