"""Pipeline presets (O0-O3), simultaneous (bracketed) optimization, the
shift-of-variables preprocessor, benchmark fixtures and the scatter
experiment harness."""

from __future__ import annotations

import csv
import io
import random
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import gcd
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .alloc import dfs_schedule, recycle
from .core import (OpStats, OutputExpr, Polynomial, Program,
                   count_operations, normalize)
from .horner import (Direction, HornerOrder, apply_scheme, fixed_scheme,
                     occurrence_order_counts)
from .mcts import MctsSettings, SchemeScorer, mcts_search
from .simplify import GreedySettings, _optimize_ws, _Workspace

BracketedExpression = List[Tuple[str, Polynomial]]


@dataclass
class OptimizerSettings:
    level: str = "O0"
    horner: str = "occurrence"            # occurrence | mcts
    direction: Direction = Direction.FORWARD_OR_BACKWARD
    mcts: MctsSettings = field(default_factory=MctsSettings)
    method: str = "none"                  # none | cse | greedy | csegreedy
    greedy: GreedySettings = field(default_factory=GreedySettings)
    stats: bool = False
    time_limit_seconds: float = 0.0
    scheme: Optional[Sequence[int]] = None
    print_scheme: bool = False
    debug: bool = False
    seed: int = 0

    _MCTS_KEYS = {
        "mcts_constant": "cp",
        "mcts_num_expand": "num_expand",
        "mcts_num_keep": "num_keep",
        "mcts_num_repeat": "num_repeat",
        "mcts_time_limit": "time_limit_seconds",
    }
    _GREEDY_KEYS = {
        "greedy_max_perc": "max_perc",
        "greedy_min_num": "min_num",
        "greedy_time_limit": "time_limit_seconds",
    }

    @staticmethod
    def preset(level: str, **overrides) -> "OptimizerSettings":
        """Table-of-defaults presets; explicit options override the preset
        values afterwards."""
        level = level.upper()
        base = {
            "O0": OptimizerSettings(level="O0", method="none"),
            "O1": OptimizerSettings(level="O1", horner="occurrence",
                                    method="cse"),
            "O2": OptimizerSettings(level="O2", horner="occurrence",
                                    method="greedy"),
            "O3": OptimizerSettings(level="O3", horner="mcts",
                                    method="greedy"),
        }.get(level)
        if base is None:
            raise ValueError(f"unknown optimization level {level!r}")
        return base.with_overrides(**overrides)

    def with_overrides(self, **overrides) -> "OptimizerSettings":
        mcts_kw = {}
        greedy_kw = {}
        plain = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key in self._MCTS_KEYS:
                mcts_kw[self._MCTS_KEYS[key]] = value
            elif key in self._GREEDY_KEYS:
                greedy_kw[self._GREEDY_KEYS[key]] = value
            else:
                plain[key] = value
        new = replace(self, **plain)
        if mcts_kw:
            new.mcts = replace(new.mcts, **mcts_kw)
        if greedy_kw:
            new.greedy = replace(new.greedy, **greedy_kw)
        return new

    def effective_mcts(self) -> MctsSettings:
        m = replace(self.mcts, direction=self.direction, seed=self.seed)
        if self.time_limit_seconds and not m.time_limit_seconds:
            m = replace(m, time_limit_seconds=self.time_limit_seconds / 2)
        return m

    def effective_greedy(self) -> GreedySettings:
        g = self.greedy
        if self.time_limit_seconds and not g.time_limit_seconds:
            g = replace(g, time_limit_seconds=self.time_limit_seconds / 2)
        return g


@dataclass(frozen=True)
class ShiftRule:
    """xi -> xi + a*xj (xj None: xi -> xi + a)."""

    xi: int
    a: Fraction
    xj: Optional[int] = None


@dataclass
class OptimizeResult:
    program: Program
    before: OpStats
    after: OpStats
    order: Optional[HornerOrder]
    timed_out: bool = False


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _as_outputs(p, default_name: str) -> List[Tuple[str, Polynomial]]:
    if isinstance(p, Polynomial):
        return [(default_name, p)]
    outputs = list(p)
    names = [name for name, _ in outputs]
    if len(set(names)) != len(names):
        raise ValueError("bracket keys / output names must be distinct")
    return outputs


def _mono_factors(exps):
    return tuple((v, e) for v, e in enumerate(exps) if e)


def raw_program(outputs: Sequence[Tuple[str, Polynomial]]) -> Program:
    """The identity 'optimization': each output is one flat assignment."""
    nvars = outputs[0][1].nvars
    outs = []
    for name, p in outputs:
        terms = []
        const = 0
        for exps, c in p.terms:
            f = _mono_factors(exps)
            if f:
                terms.append((c, f))
            else:
                const += c
        outs.append(OutputExpr(name, tuple(terms), const, p.denom))
    return Program(nvars, (), outs)


def _strip_denoms(outputs):
    return [(name, Polynomial(p.nvars, p.terms, 1, _canonical=True))
            for name, p in outputs], {name: p.denom for name, p in outputs}


def _pipeline_workspace(outputs, order, method, denoms):
    trees = [(name, apply_scheme(p, order)) for name, p in outputs]
    nvars = outputs[0][1].nvars
    dedup = method in ("cse", "csegreedy")
    ws = _Workspace.from_trees(nvars, trees, dedup=dedup, denoms=denoms)
    if dedup:
        ws.cleanup()
    ws.merge_single_use()
    return ws


def _candidate_orders(outputs, settings: OptimizerSettings):
    polys = [p for _, p in outputs]
    nvars = polys[0].nvars
    counts = [0] * nvars
    for p in polys:
        for v, c in enumerate(p.occurrence_counts()):
            counts[v] += c
    if settings.scheme is not None:
        union = sorted({v for p in polys for v in p.variables_used()})
        occupied = Polynomial(nvars, tuple(
            (tuple(1 if w == v else 0 for w in range(nvars)), 1)
            for v in union), _canonical=True)
        return [fixed_scheme(settings.scheme, occupied)]
    occ_fwd = occurrence_order_counts(counts, Direction.FORWARD)
    occ_bwd = occ_fwd.reversed()
    if settings.horner == "occurrence":
        return {
            Direction.FORWARD: [occ_fwd],
            Direction.BACKWARD: [occ_bwd],
        }.get(settings.direction, [occ_fwd, occ_bwd])
    kept = mcts_search(outputs, settings.effective_mcts())
    orders = [order for order, _ in kept]
    # occurrence orders stay in the pool so the search can only improve
    # on the cheap baseline
    for extra in (occ_fwd, occ_bwd):
        if all(extra.sequence != o.sequence for o in orders):
            orders.append(extra)
    return orders


def optimize(p, settings: OptimizerSettings,
             name: str = "F") -> OptimizeResult:
    """Full pipeline: Horner-order candidates, per-order method pipeline,
    best program by op count, then depth-first ordering and recycling.

    ``p`` is a Polynomial or a bracketed expression (sequence of
    (key, Polynomial) sharing one variable space); bracket contents are
    optimized as one shared program with per-key outputs, never merging
    across keys.
    """
    outputs = _as_outputs(p, name)
    before = count_operations(p if isinstance(p, Polynomial) else outputs)
    if settings.level == "O0" and settings.method == "none" \
            and settings.scheme is None:
        program = raw_program(outputs)
        return OptimizeResult(program, before, count_operations(program),
                              None)
    for _, content in outputs:
        if not content.terms:
            raise ValueError("cannot optimize an empty polynomial")
    outputs_int, denoms = _strip_denoms(outputs)
    deadline = (time.monotonic() + settings.time_limit_seconds
                if settings.time_limit_seconds else None)
    orders = _candidate_orders(outputs_int, settings)
    greedy_settings = settings.effective_greedy()
    best = None
    timed_out = False
    for order in orders:
        ws = _pipeline_workspace(outputs_int, order, settings.method, denoms)
        if settings.method in ("greedy", "csegreedy"):
            if _optimize_ws(ws, greedy_settings):
                timed_out = True
        total = ws.op_total()
        if best is None or total < best[0]:
            best = (total, order, ws)
        if deadline and time.monotonic() > deadline:
            timed_out = True
            break
    total, order, ws = best
    program = recycle(dfs_schedule(ws.to_program()))
    return OptimizeResult(program, before, count_operations(program), order,
                          timed_out)


# ---------------------------------------------------------------------------
# shift of variables
# ---------------------------------------------------------------------------


def _substitute_linear(p: Polynomial, xi: int, a: Fraction,
                       xj: Optional[int]) -> Polynomial:
    """p with xi := xi + a*xj (or xi + a); exact, denominator folded in."""
    num, den = a.numerator, a.denominator
    nvars = p.nvars
    max_e = max((e[xi] for e, _ in p.terms), default=0)
    if max_e == 0 or num == 0:
        return p
    # replacement = (den*xi + num*xj) / den
    repl_terms = [(tuple(1 if v == xi else 0 for v in range(nvars)), den)]
    if xj is None:
        repl_terms.append(((0,) * nvars, num))
    else:
        repl_terms.append((tuple(1 if v == xj else 0
                                 for v in range(nvars)), num))
    repl = Polynomial(nvars, repl_terms)
    powers = [Polynomial.constant(nvars, 1)]
    for _ in range(max_e):
        powers.append(powers[-1] * repl)
    acc = Polynomial.zero(nvars)
    for exps, c in p.terms:
        e = exps[xi]
        rest = exps[:xi] + (0,) + exps[xi + 1:]
        scale = den ** (max_e - e)
        term = Polynomial(nvars, ((rest, c * scale),), _canonical=True)
        acc = acc + term * powers[e]
    return normalize(nvars, acc.terms, acc.denom * p.denom * den ** max_e)


def _shift_candidates(p: Polynomial, group: Sequence[int]):
    """Ratio candidates from cofactor-matched term pairs linear in the
    variables, most frequent first."""
    by_cofactor: Dict[tuple, List[Tuple[int, int]]] = {}
    group_set = set(group)
    for exps, c in p.terms:
        linear = [v for v in group_set if exps[v] == 1]
        support = [v for v, e in enumerate(exps) if e]
        for v in linear:
            if all(w == v or w not in group_set for w in support):
                cofactor = exps[:v] + (0,) + exps[v + 1:]
                by_cofactor.setdefault(cofactor, []).append((v, c))
        if all(w not in group_set for w in support):
            by_cofactor.setdefault(exps, []).append((None, c))
    votes: Dict[Tuple[int, Fraction, Optional[int]], int] = {}
    for entries in by_cofactor.values():
        for i, (vi, ci) in enumerate(entries):
            if vi is None:
                continue
            for vj, cj in entries:
                if vj is vi or (vj is not None and vj == vi):
                    continue
                ratio = Fraction(cj, ci)
                key = (vi, -ratio, vj)
                votes[key] = votes.get(key, 0) + 1
    ranked = sorted(votes.items(), key=lambda kv: (-kv[1], str(kv[0])))
    return [ShiftRule(xi=k[0], a=k[1], xj=k[2]) for k, _ in ranked]


def shift_search(p: Polynomial, groups: Optional[Sequence[Sequence[int]]]
                 = None, names: Optional[Sequence[str]] = None):
    """Look for shifts xi -> xi + a*xj (xj in xi's group) or xi -> xi + a
    that strictly reduce the term count; repeat until none helps.

    Returns (rules, shifted polynomial, unshift program).  The unshift
    program computes, from original variable values, the values at which
    the shifted polynomial reproduces the original.
    """
    if groups is None:
        groups = [list(range(p.nvars))]
    seen = set()
    for g in groups:
        for v in g:
            if v in seen:
                raise ValueError("groups must partition the variables")
            seen.add(v)
    rules: List[ShiftRule] = []
    current = p
    improved = True
    while improved:
        improved = False
        for group in groups:
            if len(group) < 1:
                continue
            for rule in _shift_candidates(current, group):
                shifted = _substitute_linear(current, rule.xi, rule.a,
                                             rule.xj)
                if len(shifted.terms) < len(current.terms):
                    current = shifted
                    rules.append(rule)
                    improved = True
                    break
            if improved:
                break
    unshift = _unshift_program(p.nvars, rules, names)
    return rules, current, unshift


def _unshift_program(nvars: int, rules: Sequence[ShiftRule],
                     names: Optional[Sequence[str]] = None) -> Program:
    current = [Polynomial.variable(nvars, v) for v in range(nvars)]
    for rule in rules:
        if rule.xj is None:
            delta = Polynomial.constant(nvars, 1)
        else:
            delta = current[rule.xj]
        shift = delta.scaled(-rule.a.numerator, rule.a.denominator)
        current[rule.xi] = current[rule.xi] + shift
    shifted_vars = sorted({rule.xi for rule in rules})
    names = names or [f"x{v}" for v in range(nvars)]
    return raw_program([(names[v], current[v]) for v in shifted_vars])


def apply_shift_rules(p: Polynomial, rules: Sequence[ShiftRule]) -> Polynomial:
    for rule in rules:
        p = _substitute_linear(p, rule.xi, rule.a, rule.xj)
    return p


# ---------------------------------------------------------------------------
# benchmark fixture: Sylvester resultants
# ---------------------------------------------------------------------------


def resultant_symbols(m: int, n: int) -> List[str]:
    return [f"a{i}" for i in range(m + 1)] + [f"b{i}" for i in range(n + 1)]


def resultant_fixture(m: int, n: int) -> Polynomial:
    """Expanded resultant of generic A (degree m) and B (degree n): the
    (m+n) x (m+n) Sylvester determinant over m+n+2 symbolic coefficients
    a0..am, b0..bn (declared in that order).

    The determinant expands by columns with minors memoized on the used-row
    set; entries are single variables, so expansion never multiplies two
    large polynomials.
    """
    if not 1 <= n <= m <= 7:
        raise ValueError("supported range: 1 <= n <= m <= 7")
    size = m + n
    nvars = m + n + 2
    columns: List[List[Tuple[int, int]]] = [[] for _ in range(size)]
    for i in range(n):                     # rows of A coefficients
        for k in range(m + 1):             # a_{m-k} at column i+k
            columns[i + k].append((i, m - k))
    for i in range(m):                     # rows of B coefficients
        for k in range(n + 1):
            columns[i + k].append((n + i, (m + 1) + (n - k)))
    for col in columns:
        col.sort()
    memo: Dict[int, Dict[tuple, int]] = {}

    def minor(mask: int) -> Dict[tuple, int]:
        got = memo.get(mask)
        if got is not None:
            return got
        col_idx = bin(mask).count("1")
        if col_idx == size:
            return {(0,) * nvars: 1}
        acc: Dict[tuple, int] = {}
        for row, var in columns[col_idx]:
            bit = 1 << row
            if mask & bit:
                continue
            sign = -1 if bin(mask >> (row + 1)).count("1") % 2 else 1
            for mono, c in minor(mask | bit).items():
                bumped = mono[:var] + (mono[var] + 1,) + mono[var + 1:]
                acc[bumped] = acc.get(bumped, 0) + sign * c
        acc = {k: c for k, c in acc.items() if c}
        memo[mask] = acc
        return acc

    return normalize(nvars, minor(0).items())


# ---------------------------------------------------------------------------
# scatter experiments
# ---------------------------------------------------------------------------

SCATTER_HEADER = ("cp", "final_ops", "seed", "elapsed_ms")


def scatter_experiment(p, base_settings: OptimizerSettings, samples: int,
                       cp_range: Tuple[float, float], distribution: str,
                       seed: int) -> List[tuple]:
    """Draw cp values (log: exp-uniform between the bounds, lin: uniform),
    run the optimizer once per draw with a derived per-sample seed, and
    collect (cp, final_ops, seed, elapsed_ms) rows."""
    import math

    lo, hi = cp_range
    if distribution not in ("log", "lin"):
        raise ValueError("distribution must be 'log' or 'lin'")
    if not lo < hi or (distribution == "log" and lo <= 0):
        raise ValueError(f"invalid cp range ({lo}, {hi})")
    rng = random.Random(seed)
    rows = []
    for _ in range(samples):
        if distribution == "log":
            cp = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        else:
            cp = rng.uniform(lo, hi)
        sample_seed = rng.randrange(2**31)
        settings = base_settings.with_overrides(mcts_constant=cp,
                                                seed=sample_seed)
        t0 = time.monotonic()
        result = optimize(p, settings)
        elapsed_ms = round((time.monotonic() - t0) * 1000.0, 3)
        rows.append((cp, result.after.total, sample_seed, elapsed_ms))
    return rows


def scatter_csv(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCATTER_HEADER)
    writer.writerows(rows)
    return buf.getvalue()
