"""Core data model: sparse integer polynomials, expression trees,
straight-line programs, operation statistics and the modular-evaluation
equivalence oracle.

Conventions used throughout the package:

* variables are dense integer ids ``0..nvars-1``; names live in a separate
  symbol table (see :class:`Variable`),
* a monomial is a dense exponent tuple of length ``nvars``,
* program references ``ref < nvars`` denote variables, ``ref >= nvars``
  denote temporaries,
* operation counting follows the convention of the straight-line output
  statistics: integer coefficients of magnitude 1 are free (signs are
  absorbed by additions), a square costs one multiplication and higher
  powers count as one power operation weighted by ``power_cost``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from math import gcd
from typing import Iterable, NamedTuple, Sequence, Union


class Variable(NamedTuple):
    id: int
    name: str


Monomial = tuple  # dense exponent vector, one entry per variable

DEFAULT_PRIME = 2**31 - 1


def power_cost(exponent: int) -> int:
    """Weight of one power operation: multiplications used by binary powering.

    Anchored by cost(2) = 1 and cost(3) = 2; overridable wherever operations
    are counted (the ``power_cost`` keyword) since other tools weight high
    powers differently.
    """
    if exponent < 2:
        return 0
    return exponent.bit_length() - 1 + bin(exponent).count("1") - 1


# ---------------------------------------------------------------------------
# operation statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OpStats:
    """Power/multiplication/addition counts plus the weighted total.

    ``powers`` counts power operations with exponent >= 3 (squares are plain
    multiplications); ``total`` weighs each counted power by ``power_cost``.
    """

    powers: int = 0
    multiplications: int = 0
    additions: int = 0
    total: int = 0

    def __add__(self, other: "OpStats") -> "OpStats":
        return OpStats(
            self.powers + other.powers,
            self.multiplications + other.multiplications,
            self.additions + other.additions,
            self.total + other.total,
        )

    def brief(self) -> str:
        return (
            f"{self.powers}P {self.multiplications}M "
            f"{self.additions}A : {self.total}"
        )


class _StatsAcc:
    __slots__ = ("P", "M", "A", "W")

    def __init__(self):
        self.P = self.M = self.A = self.W = 0

    def done(self) -> OpStats:
        return OpStats(self.P, self.M, self.A, self.M + self.A + self.W)


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------


def _term_key(term):
    exps = term[0]
    return (sum(exps), exps)


class Polynomial:
    """Canonical sparse multivariate polynomial with integer coefficients.

    ``terms`` is a tuple of ``(exponents, coefficient)`` pairs held in
    ascending graded-lexicographic order so equality is structural.  A
    positive ``denom`` carries the single common denominator produced by
    division by integer constants; the term coefficients stay integral.
    """

    __slots__ = ("nvars", "terms", "denom")

    def __init__(self, nvars: int, terms=(), denom: int = 1, _canonical=False):
        self.nvars = nvars
        if _canonical:
            self.terms = terms
            self.denom = denom
            return
        p = normalize(nvars, terms, denom)
        self.terms = p.terms
        self.denom = p.denom

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(nvars: int) -> "Polynomial":
        return Polynomial(nvars, (), _canonical=True)

    @staticmethod
    def constant(nvars: int, value: int) -> "Polynomial":
        if value == 0:
            return Polynomial.zero(nvars)
        mono = (0,) * nvars
        return Polynomial(nvars, ((mono, value),), _canonical=True)

    @staticmethod
    def variable(nvars: int, vid: int) -> "Polynomial":
        mono = tuple(1 if i == vid else 0 for i in range(nvars))
        return Polynomial(nvars, ((mono, 1),), _canonical=True)

    # -- basic protocol ----------------------------------------------------

    def __eq__(self, other):
        return (
            isinstance(other, Polynomial)
            and self.nvars == other.nvars
            and self.denom == other.denom
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.nvars, self.denom, self.terms))

    def __len__(self):
        return len(self.terms)

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"Polynomial(nvars={self.nvars}, {len(self.terms)} terms)"

    # -- arithmetic (used by fixtures, shifts and the symbolic oracle) ------

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if self.nvars != other.nvars:
            raise ValueError("variable spaces differ")
        d = gcd(self.denom, other.denom)
        sa = other.denom // d
        sb = self.denom // d
        acc = {}
        for exps, c in self.terms:
            acc[exps] = acc.get(exps, 0) + c * sa
        for exps, c in other.terms:
            acc[exps] = acc.get(exps, 0) + c * sb
        return normalize(self.nvars, acc.items(), self.denom * sa)

    def __neg__(self) -> "Polynomial":
        return Polynomial(
            self.nvars,
            tuple((e, -c) for e, c in self.terms),
            self.denom,
            _canonical=True,
        )

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        if self.nvars != other.nvars:
            raise ValueError("variable spaces differ")
        acc = {}
        for ea, ca in self.terms:
            for eb, cb in other.terms:
                key = tuple(x + y for x, y in zip(ea, eb))
                acc[key] = acc.get(key, 0) + ca * cb
        return normalize(self.nvars, acc.items(), self.denom * other.denom)

    def scaled(self, num: int, den: int = 1) -> "Polynomial":
        return normalize(
            self.nvars,
            tuple((e, c * num) for e, c in self.terms),
            self.denom * den,
        )

    def __pow__(self, n: int) -> "Polynomial":
        if n < 0:
            raise ValueError("negative power")
        result = Polynomial.constant(self.nvars, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    # -- queries -----------------------------------------------------------

    def variables_used(self):
        used = [False] * self.nvars
        for exps, _ in self.terms:
            for v, e in enumerate(exps):
                if e:
                    used[v] = True
        return tuple(v for v in range(self.nvars) if used[v])

    def occurrence_counts(self):
        """Per variable, the number of terms the variable occurs in."""
        cnt = [0] * self.nvars
        for exps, _ in self.terms:
            for v, e in enumerate(exps):
                if e:
                    cnt[v] += 1
        return cnt

    def content(self) -> int:
        g = 0
        for _, c in self.terms:
            g = gcd(g, c)
            if g == 1:
                break
        return g

    def evaluate_mod(self, assignment, prime: int):
        acc = 0
        for exps, c in self.terms:
            t = c % prime
            for v, e in enumerate(exps):
                if e:
                    t = t * pow(assignment[v], e, prime) % prime
            acc = (acc + t) % prime
        if self.denom != 1:
            acc = acc * pow(self.denom % prime, prime - 2, prime) % prime
        return acc


def normalize(nvars: int, terms, denom: int = 1) -> Polynomial:
    """Combine like terms, drop zeros, impose the canonical term order.

    Accepts any iterable of (exponent-tuple, coefficient) pairs; idempotent
    and independent of the input term order.
    """
    if denom == 0:
        raise ZeroDivisionError("zero denominator")
    acc = {}
    for exps, c in terms:
        if c:
            acc[exps] = acc.get(exps, 0) + c
    items = [(e, c) for e, c in acc.items() if c]
    items.sort(key=_term_key)
    if denom < 0:
        denom = -denom
        items = [(e, -c) for e, c in items]
    if denom != 1 and items:
        g = denom
        for _, c in items:
            g = gcd(g, c)
            if g == 1:
                break
        if g > 1:
            denom //= g
            items = [(e, c // g) for e, c in items]
    elif denom != 1:
        denom = 1  # zero polynomial
    return Polynomial(nvars, tuple(items), denom, _canonical=True)


# ---------------------------------------------------------------------------
# expression trees
# ---------------------------------------------------------------------------
#
# Nodes are plain tuples:
#   ('const', int)  ('var', vid)  ('pow', base_node, exp>=2)
#   ('add', (child, ...))  ('mul', (child, ...))
# Trees are binary after Horner construction and may become n-ary after
# operator merging.  Sharing is by object identity; value-equal but distinct
# tuples are distinct subtrees (that is what CSE is for).

CONST, VAR, POW, ADD, MUL = "const", "var", "pow", "add", "mul"


def tree_children(node):
    tag = node[0]
    if tag == POW:
        return (node[1],)
    if tag == ADD or tag == MUL:
        return node[1]
    return ()


def _iter_tree(roots):
    """Yield each distinct-by-identity node once (iterative, DAG aware)."""
    seen = set()
    stack = list(roots)
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        stack.extend(tree_children(node))


def _count_tree(roots, acc: _StatsAcc, pcost) -> None:
    for node in _iter_tree(roots):
        tag = node[0]
        if tag == ADD:
            acc.A += len(node[1]) - 1
        elif tag == MUL:
            joins = len(node[1]) - 1
            for ch in node[1]:
                if ch[0] == CONST and ch[1] in (1, -1):
                    joins -= 1
            acc.M += max(joins, 0)
        elif tag == POW:
            if node[2] == 2:
                acc.M += 1
            else:
                acc.P += 1
                acc.W += pcost(node[2])


# ---------------------------------------------------------------------------
# straight-line programs
# ---------------------------------------------------------------------------
#
# One instruction target is computed from a single-operator right-hand side:
#   terms: tuple of (coeff, factors) with factors a tuple of (ref, exp)
#   const: integer addend
# A multi-term rhs is a sum of coefficient*ref terms (powers of operands
# allowed); a single-term rhs is a product/power, optionally scaled.


Term = tuple  # (coeff, ((ref, exp), ...))


class Instruction(NamedTuple):
    target: int
    terms: tuple
    const: int = 0


class OutputExpr(NamedTuple):
    name: str
    terms: tuple
    const: int = 0
    denom: int = 1


class Program:
    """Ordered single-operator instructions plus named outputs.

    Before recycling, temp targets are unique and defined before use; after
    recycling targets may repeat (def-before-use still holds).
    """

    __slots__ = ("nvars", "instructions", "outputs")

    def __init__(self, nvars: int, instructions, outputs):
        self.nvars = nvars
        self.instructions = tuple(
            i if isinstance(i, Instruction) else Instruction(*i)
            for i in instructions
        )
        self.outputs = tuple(
            o if isinstance(o, OutputExpr) else OutputExpr(*o)
            for o in outputs
        )

    def __repr__(self):
        return (
            f"Program({len(self.instructions)} instructions, "
            f"{len(self.outputs)} outputs)"
        )

    def output_names(self):
        return tuple(o.name for o in self.outputs)

    def temp_refs(self):
        refs = set()
        for ins in self.instructions:
            refs.add(ins.target)
        return refs

    def max_temp(self) -> int:
        return max((i.target for i in self.instructions), default=self.nvars - 1)

    def validate(self) -> None:
        """Assert def-before-use (values, not slots) and rhs shape."""
        defined = set()
        for ins in self.instructions:
            _check_rhs(self, ins.terms, ins.const, defined)
            defined.add(ins.target)
        for out in self.outputs:
            _check_rhs(self, out.terms, out.const, defined)

    def evaluate_mod(self, assignment, prime: int):
        vals = dict(enumerate(assignment))
        for ins in self.instructions:
            vals[ins.target] = _eval_rhs(ins.terms, ins.const, vals, prime)
        result = {}
        for out in self.outputs:
            r = _eval_rhs(out.terms, out.const, vals, prime)
            if out.denom != 1:
                r = r * pow(out.denom % prime, prime - 2, prime) % prime
            result[out.name] = r
        return result

    def to_polynomials(self) -> dict:
        """Symbolically re-expand each output (oracle for small programs)."""
        nv = self.nvars
        vals = {}
        for ins in self.instructions:
            vals[ins.target] = _expand_rhs(nv, ins.terms, ins.const, vals)
        result = {}
        for out in self.outputs:
            p = _expand_rhs(nv, out.terms, out.const, vals)
            if out.denom != 1:
                p = p.scaled(1, out.denom)
            result[out.name] = p
        return result


def _check_rhs(prog, terms, const, defined):
    for c, factors in terms:
        if c == 0:
            raise ValueError("zero coefficient in rhs")
        if not factors:
            raise ValueError("constant term not folded into const")
        for ref, e in factors:
            if e < 1:
                raise ValueError("factor exponent < 1")
            if ref >= prog.nvars and ref not in defined:
                raise ValueError(f"use of undefined temp {ref}")


def _eval_rhs(terms, const, vals, prime):
    acc = const % prime
    for c, factors in terms:
        t = c % prime
        for ref, e in factors:
            t = t * pow(vals[ref], e, prime) % prime
        acc = (acc + t) % prime
    return acc


def _expand_rhs(nvars, terms, const, vals):
    acc = Polynomial.constant(nvars, const)
    for c, factors in terms:
        t = Polynomial.constant(nvars, c)
        for ref, e in factors:
            base = vals[ref] if ref >= nvars else Polynomial.variable(nvars, ref)
            t = t * base**e
        acc = acc + t
    return acc


def _count_program(prog: Program, acc: _StatsAcc, pcost) -> None:
    entries = [(i.terms, i.const) for i in prog.instructions]
    entries += [(o.terms, o.const) for o in prog.outputs]
    for terms, const in entries:
        n_ops = len(terms) + (1 if const else 0)
        if n_ops > 1:
            acc.A += n_ops - 1
        for c, factors in terms:
            atoms = 1 if abs(c) != 1 else 0
            for _, e in factors:
                atoms += 1
                if e == 2:
                    acc.M += 1
                elif e >= 3:
                    acc.P += 1
                    acc.W += pcost(e)
            acc.M += atoms - 1


# ---------------------------------------------------------------------------
# counting and the equivalence oracle
# ---------------------------------------------------------------------------


def _count_polynomial(p: Polynomial, acc: _StatsAcc, pcost) -> None:
    if len(p.terms) > 1:
        acc.A += len(p.terms) - 1
    for exps, c in p.terms:
        atoms = 1 if abs(c) != p.denom else 0
        for e in exps:
            if not e:
                continue
            atoms += 1
            if e == 2:
                acc.M += 1
            elif e >= 3:
                acc.P += 1
                acc.W += pcost(e)
        acc.M += max(atoms - 1, 0)


def count_operations(subject, power_cost=power_cost) -> OpStats:
    """Count P/M/A and the weighted total for a polynomial, a bracketed
    expression (sequence of (key, Polynomial) pairs), an expression tree, or
    a program.  Bracket keys and their joins are not counted."""
    acc = _StatsAcc()
    if isinstance(subject, Polynomial):
        _count_polynomial(subject, acc, power_cost)
    elif isinstance(subject, Program):
        _count_program(subject, acc, power_cost)
    elif isinstance(subject, tuple) and subject and isinstance(subject[0], str):
        _count_tree([subject], acc, power_cost)
    else:
        for _, content in subject:
            _count_polynomial(content, acc, power_cost)
    return acc.done()


def _subject_nvars(subject) -> int:
    if isinstance(subject, (Polynomial, Program)):
        return subject.nvars
    return next(iter(subject))[1].nvars


def evaluate_mod(subject, assignment, prime: int = DEFAULT_PRIME):
    """Exact evaluation modulo ``prime``.

    Polynomials evaluate to a single residue, programs and bracketed
    expressions to a dict keyed by output name / bracket key.
    """
    nv = _subject_nvars(subject)
    if len(assignment) < nv:
        raise ValueError("assignment does not cover all variables")
    if isinstance(subject, Polynomial):
        return subject.evaluate_mod(assignment, prime)
    if isinstance(subject, Program):
        return subject.evaluate_mod(assignment, prime)
    return {key: p.evaluate_mod(assignment, prime) for key, p in subject}


def _as_output_map(subject, assignment, prime):
    value = evaluate_mod(subject, assignment, prime)
    if isinstance(value, dict):
        return value
    return {None: value}


def equivalent(a, b, trials: int = 20, prime: int = DEFAULT_PRIME,
               seed: int = 0) -> bool:
    """Probabilistic identity test at ``trials`` random points mod prime.

    Subjects with one output (or a single polynomial) are compared by value;
    multi-output subjects are compared output-by-output (same key sets).
    """
    nv = max(_subject_nvars(a), _subject_nvars(b))
    rng = random.Random(seed)
    for _ in range(trials):
        point = [rng.randrange(prime) for _ in range(nv)]
        va = _as_output_map(a, point, prime)
        vb = _as_output_map(b, point, prime)
        if len(va) == 1 and len(vb) == 1:
            if next(iter(va.values())) != next(iter(vb.values())):
                return False
        else:
            if va.keys() != vb.keys() or va != vb:
                return False
    return True
