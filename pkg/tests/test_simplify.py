import random

import pytest

from polyopt import (GreedySettings, HornerOrder, Polynomial, apply_scheme,
                     count_operations, count_small_subexprs, cse, equivalent,
                     fixed_scheme, greedy_round, merge_operators, normalize,
                     occurrence_order, optimize_program, partial_factor,
                     program_from_tree)
from polyopt.core import (ADD, CONST, MUL, POW, VAR, Instruction, OutputExpr,
                          Program)

from conftest import random_polynomial

W, X, Y, Z = 0, 1, 2, 3


def _fig3_left_tree():
    # w^2*(y+z) + w*(x+(y+z))
    yz1 = (ADD, ((VAR, Y), (VAR, Z)))
    yz2 = (ADD, ((VAR, Y), (VAR, Z)))
    return (ADD, ((MUL, ((POW, (VAR, W), 2), yz1)),
                  (MUL, ((VAR, W), (ADD, ((VAR, X), yz2))))))


def _fig3_right_tree():
    # ((((w^2*y + w^2*z) + w*x) + w*y) + w*z
    def m(*fs):
        node = fs[-1]
        for f in fs[-2::-1]:
            node = (MUL, (f, node))
        return node
    terms = [m((POW, (VAR, W), 2), (VAR, Y)),
             m((POW, (VAR, W), 2), (VAR, Z)),
             m((VAR, W), (VAR, X)),
             m((VAR, W), (VAR, Y)),
             m((VAR, W), (VAR, Z))]
    acc = terms[0]
    for t in terms[1:]:
        acc = (ADD, (acc, t))
    return acc


def eq5_left_program():
    # Z1=w^2; Z2=y+z; Z3=Z1*Z2; Z4=x+y+z; Z5=w*Z4; a=Z3+Z5
    T = lambda k: 4 + k
    return Program(4, [
        Instruction(T(0), ((1, ((W, 2),)),), 0),
        Instruction(T(1), ((1, ((Y, 1),)), (1, ((Z, 1),))), 0),
        Instruction(T(2), ((1, ((T(0), 1), (T(1), 1))),), 0),
        Instruction(T(3), ((1, ((X, 1),)), (1, ((Y, 1),)),
                           (1, ((Z, 1),))), 0),
        Instruction(T(4), ((1, ((W, 1), (T(3), 1))),), 0),
    ], [OutputExpr("a", ((1, ((T(2), 1),)), (1, ((T(4), 1),))), 0)])


class TestCse:
    def test_eq2_counts(self, sect21):
        tree = apply_scheme(sect21, fixed_scheme([0, 1, 2], sect21))
        prog = cse(tree)
        prog.validate()
        stats = count_operations(prog)
        assert (stats.multiplications, stats.additions) == (7, 4)
        assert equivalent(sect21, prog)

    def test_eq2_shares_inner_sum(self, sect21):
        # the bracket -3 + 5z is computed once and referenced twice
        tree = apply_scheme(sect21, fixed_scheme([0, 1, 2], sect21))
        prog = cse(tree)
        shared = [i for i in prog.instructions
                  if i.const == -3 and i.terms == ((5, ((2, 1),)),)]
        assert len(shared) == 1
        uses = sum(1 for ins in prog.instructions for _, f in ins.terms
                   for r, _ in f if r == shared[0].target)
        assert uses == 2

    def test_no_duplicates_same_count(self):
        # x*y + z has nothing to share
        tree = (ADD, ((MUL, ((VAR, X), (VAR, Y))), (VAR, Z)))
        prog = cse(tree, nvars=4)
        assert count_operations(prog).total == count_operations(tree).total

    def test_fig3_association_decides_detection(self):
        left = cse(_fig3_left_tree(), nvars=4)
        right = cse(_fig3_right_tree(), nvars=4)
        # left association exposes y+z, right association misses it
        assert count_operations(left).total < count_operations(right).total
        yz = [i for i in left.instructions
              if i.terms == ((1, ((Y, 1),)), (1, ((Z, 1),))) and not i.const]
        assert len(yz) == 1

    def test_instruction_count_linear_bound(self):
        rng = random.Random(31)
        for _ in range(20):
            p = random_polynomial(rng, 4, 12)
            tree = apply_scheme(p, occurrence_order(p))
            nodes = count_operations(tree).total + len(p.terms) * 6
            prog = cse(tree)
            assert len(prog.instructions) <= nodes

    def test_idempotent_no_duplicate_instructions(self, sect21):
        tree = apply_scheme(sect21, fixed_scheme([0, 1, 2], sect21))
        prog = cse(tree)
        rhs = [(i.terms, i.const) for i in prog.instructions]
        assert len(set(rhs)) == len(rhs)


class TestMergeOperators:
    def test_nested_add_collapses(self):
        tree = (ADD, ((ADD, ((VAR, X), (VAR, Y))), (VAR, Z)))
        merged = merge_operators(tree)
        assert merged == (ADD, ((VAR, X), (VAR, Y), (VAR, Z)))

    def test_fig4_shape(self):
        merged = merge_operators(_fig3_right_tree())
        assert merged[0] == ADD
        assert len(merged[1]) == 5  # five monomial products side by side

    def test_fig4_left_tree_inner_sum(self):
        merged = merge_operators(_fig3_left_tree())
        # x+(y+z) flattens into a 3-child sum inside w*(...)
        inner = merged[1][1]
        assert inner[0] == MUL
        sums = [c for c in inner[1] if c[0] == ADD]
        assert sums and len(sums[0][1]) == 3

    def test_idempotent(self):
        tree = _fig3_right_tree()
        once = merge_operators(tree)
        assert merge_operators(once) == once


class TestCountSmallSubexprs:
    def test_product_and_sum_pairs(self):
        # a = w*y + w*z + x*y + x*z as one merged term list
        T = 4
        prog = Program(4, [
            Instruction(T, ((1, ((W, 1), (Y, 1))), (1, ((W, 1), (Z, 1))),
                            (1, ((X, 1), (Y, 1))), (1, ((X, 1), (Z, 1)))),
                        0),
        ], [OutputExpr("a", ((1, ((T, 1),)),), 0)])
        counts = count_small_subexprs(prog)
        for pair in [(W, Y), (W, Z), (X, Y), (X, Z)]:
            assert counts[("mul",) + pair] == 1

    def test_single_term_instruction_has_no_pair_keys(self):
        prog = Program(2, [
            Instruction(2, ((3, ((0, 2), (1, 1))),), 0),
        ], [OutputExpr("a", ((1, ((2, 1),)),), 0)])
        counts = count_small_subexprs(prog)
        assert ("pow", 0, 2) in counts
        assert ("cmul", 3, 0) in counts and ("cmul", 3, 1) in counts
        assert not any(k[0] in ("add", "sub", "cadd") for k in counts)

    def test_commutative_canonical_keys(self):
        mk = lambda a, b: Program(4, [
            Instruction(4, ((1, ((a, 1),)), (1, ((b, 1),))), 0),
        ], [OutputExpr("o", ((1, ((4, 1),)),), 0)])
        assert count_small_subexprs(mk(X, Y)) == count_small_subexprs(
            mk(Y, X))


class TestGreedyRound:
    def test_eq5_reuses_shared_sum(self):
        prog = eq5_left_program()
        before = count_operations(prog).total
        out, improved = greedy_round(prog)
        out.validate()
        assert improved
        assert count_operations(out).total == before - 1
        assert equivalent(prog, out)
        # some instruction now holds y+z and is referenced at least twice
        yz = [i.target for i in out.instructions
              if i.terms == ((1, ((Y, 1),)), (1, ((Z, 1),))) and not i.const]
        assert len(yz) == 1
        uses = sum(1 for ins in out.instructions for _, f in ins.terms
                   for r, _ in f if r == yz[0])
        assert uses == 2

    def test_all_distinct_pairs_unchanged(self):
        prog = Program(4, [
            Instruction(4, ((1, ((W, 1),)), (1, ((X, 1),))), 0),
            Instruction(5, ((1, ((Y, 1),)), (2, ((Z, 1),))), 0),
            Instruction(6, ((1, ((4, 1), (5, 1))),), 0),
        ], [OutputExpr("a", ((1, ((6, 1),)),), 0)])
        out, improved = greedy_round(prog)
        assert not improved
        assert count_operations(out).total == count_operations(prog).total

    def test_eq8_reaches_product_of_sums(self):
        # a = w*y + w*z + x*y + x*z ends as (y+z)*(w+x)
        T = 4
        prog = Program(4, [
            Instruction(T, ((1, ((W, 1), (Y, 1))), (1, ((W, 1), (Z, 1))),
                            (1, ((X, 1), (Y, 1))), (1, ((X, 1), (Z, 1)))),
                        0),
        ], [OutputExpr("a", ((1, ((T, 1),)),), 0)])
        out = optimize_program(prog)
        out.validate()
        assert equivalent(prog, out)
        assert count_operations(out).total == 3  # two sums and one product
        sums = [i for i in out.instructions if len(i.terms) == 2]
        assert len(sums) == 2


class TestPartialFactor:
    def test_eq7_shape(self):
        # Z1 = x*y*z; Z2 = x*z^2; a = 2x + y + Z1 + Z2
        T = lambda k: 3 + k
        prog = Program(3, [
            Instruction(T(0), ((1, ((0, 1), (1, 1), (2, 1))),), 0),
            Instruction(T(1), ((1, ((0, 1), (2, 2))),), 0),
        ], [OutputExpr("a", ((2, ((0, 1),)), (1, ((1, 1),)),
                            (1, ((T(0), 1),)), (1, ((T(1), 1),))), 0)])
        before = count_operations(prog).total
        out = partial_factor(prog)
        out.validate()
        assert equivalent(prog, out)
        assert count_operations(out).total < before
        # a = y + x*(2 + y*z + z^2)
        (a,) = out.outputs
        assert len(a.terms) == 2 and a.const == 0
        inner = [i for i in out.instructions if i.const == 2]
        assert len(inner) == 1 and len(inner[0].terms) == 2

    def test_no_repeated_variable_unchanged(self):
        prog = Program(3, [], [OutputExpr("a", ((1, ((0, 1),)),
                                               (1, ((1, 1),))), 0)])
        out = partial_factor(prog)
        assert count_operations(out).total == count_operations(prog).total

    def test_semantics_on_random_programs(self):
        rng = random.Random(41)
        for _ in range(100):
            p = random_polynomial(rng, rng.randint(2, 5), rng.randint(3, 14))
            tree = apply_scheme(p, occurrence_order(p))
            prog = program_from_tree([("F", tree)], nvars=p.nvars)
            out = partial_factor(prog)
            assert equivalent(prog, out, trials=6)


class TestOptimizeProgram:
    def test_fixpoint_on_eq5(self):
        out = optimize_program(eq5_left_program())
        again = optimize_program(out)
        assert count_operations(again).total == count_operations(out).total

    def test_single_instruction_unchanged(self):
        prog = Program(2, [Instruction(2, ((1, ((0, 1), (1, 1))),), 0)],
                       [OutputExpr("a", ((1, ((2, 1),)),), 0)])
        out = optimize_program(prog)
        assert count_operations(out).total == 1

    def test_never_increases_and_preserves_semantics(self):
        rng = random.Random(43)
        for _ in range(30):
            p = random_polynomial(rng, rng.randint(2, 5),
                                  rng.randint(3, 20))
            tree = apply_scheme(p, occurrence_order(p))
            prog = program_from_tree([("F", tree)], nvars=p.nvars)
            before = count_operations(prog).total
            out = optimize_program(prog)
            out.validate()
            assert count_operations(out).total <= before
            assert equivalent(p, out, trials=8)
