import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyopt import (OpStats, Polynomial, Program, count_operations,
                     equivalent, evaluate_mod, normalize, power_cost)
from polyopt.core import Instruction, OutputExpr

from conftest import random_polynomial


def mono(nvars, **exps):
    # helper: exponent tuple from x0=1 style kwargs
    out = [0] * nvars
    for key, e in exps.items():
        out[int(key[1:])] = e
    return tuple(out)


class TestNormalize:
    def test_like_terms_merge(self):
        p = normalize(1, [((1,), 1), ((1,), 1)])
        assert p.terms == (((1,), 2),)

    def test_cancellation_gives_empty(self):
        p = normalize(1, [((1,), 1), ((1,), -1)])
        assert p.terms == ()
        assert not p

    def test_term_order_independence(self, sect41):
        shuffled = list(sect41.terms)[::-1]
        assert normalize(3, shuffled) == sect41

    def test_idempotent(self, sect41):
        assert normalize(3, sect41.terms) == sect41

    @given(st.lists(st.tuples(
        st.tuples(st.integers(0, 4), st.integers(0, 4)),
        st.integers(-20, 20)), max_size=24))
    @settings(max_examples=200, deadline=None)
    def test_normalize_properties(self, raw):
        a = normalize(2, raw)
        # idempotent and order independent
        assert normalize(2, a.terms) == a
        assert normalize(2, list(reversed(raw))) == a
        # canonical: unique monomials, no zero coefficients, sorted
        monos = [e for e, _ in a.terms]
        assert len(set(monos)) == len(monos)
        assert all(c for _, c in a.terms)
        keys = [(sum(e), e) for e, _ in a.terms]
        assert keys == sorted(keys)


class TestPowerCost:
    @pytest.mark.parametrize("exp,cost", [
        (2, 1), (3, 2), (4, 2), (5, 3), (6, 3), (7, 4), (8, 3), (16, 4),
    ])
    def test_binary_powering_cost(self, exp, cost):
        assert power_cost(exp) == cost


class TestCountOperations:
    def test_sect41_exact(self, sect41):
        stats = count_operations(sect41)
        assert stats == OpStats(1, 16, 5, 23)
        assert stats.brief() == "1P 16M 5A : 23"

    def test_single_constant(self):
        assert count_operations(Polynomial.constant(2, 7)).total == 0

    def test_unit_coefficients_are_free(self):
        p = normalize(2, [(mono(2, x0=1), 1), (mono(2, x1=1), -1)])
        assert count_operations(p) == OpStats(0, 0, 1, 1)

    def test_square_counts_one_multiplication(self):
        p = normalize(1, [((2,), 1)])
        assert count_operations(p) == OpStats(0, 1, 0, 1)

    def test_cube_counts_as_weighted_power(self):
        p = normalize(1, [((3,), 1)])
        assert count_operations(p) == OpStats(1, 0, 0, 2)

    def test_power_cost_hook(self, sect41):
        naive = lambda e: e - 1
        assert count_operations(sect41, power_cost=naive).total == 23

    def test_bracketed_counts_sum_contents(self, sect41):
        two = [("k1", sect41), ("k2", sect41)]
        assert count_operations(two).total == 2 * 23

    def test_stats_additive(self):
        a = OpStats(1, 2, 3, 7)
        b = OpStats(0, 1, 1, 2)
        assert a + b == OpStats(1, 3, 4, 9)


class TestEvaluateMod:
    def test_simple_sum(self):
        p = normalize(2, [(mono(2, x0=1), 1), (mono(2, x1=1), 1)])
        assert evaluate_mod(p, [2, 3], 101) == 5

    def test_missing_variable_rejected(self):
        p = normalize(2, [(mono(2, x1=1), 1)])
        with pytest.raises(ValueError):
            evaluate_mod(p, [2], 101)

    def test_denominator_uses_modular_inverse(self):
        p = Polynomial(1, (((1,), 1),), denom=2)
        v = evaluate_mod(p, [10], 101)
        assert v == 5

    def test_program_follows_instruction_order(self):
        # t = x + 1; t = t * t; F = t  (recycled-style redefinition)
        prog = Program(1, [
            Instruction(1, ((1, ((0, 1),)),), 1),
            Instruction(1, ((1, ((1, 2),)),), 0),
        ], [OutputExpr("F", ((1, ((1, 1),)),), 0)])
        assert evaluate_mod(prog, [4], 10007) == {"F": 25}


class TestEquivalent:
    def test_square_identity(self):
        # (x+y)^2 == x^2 + 2xy + y^2
        lhs = normalize(2, [(mono(2, x0=1), 1), (mono(2, x1=1), 1)]) ** 2
        rhs = normalize(2, [(mono(2, x0=2), 1), ((1, 1), 2),
                            (mono(2, x1=2), 1)])
        assert equivalent(lhs, rhs, trials=20)

    def test_distinct_variables_differ(self):
        x = Polynomial.variable(2, 0)
        y = Polynomial.variable(2, 1)
        assert not equivalent(x, y, trials=20)

    def test_random_arithmetic_identities(self):
        rng = random.Random(5)
        for _ in range(20):
            a = random_polynomial(rng, 3, 5)
            b = random_polynomial(rng, 3, 4)
            assert equivalent(a * b + a, a * (b + Polynomial.constant(3, 1)))


class TestPolynomialArithmetic:
    def test_denominators_combine(self):
        x = Polynomial.variable(1, 0)
        half = x.scaled(1, 2)
        assert half + half == x
        third = x.scaled(1, 3)
        s = half + third
        assert s.denom == 6 and s.terms == (((1,), 5),)

    def test_pow_matches_repeated_mul(self):
        rng = random.Random(11)
        p = random_polynomial(rng, 2, 4)
        assert p ** 3 == p * p * p

    def test_occurrence_counts(self, sect21):
        assert sect21.occurrence_counts() == [5, 4, 4]
