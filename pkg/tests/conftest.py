import random

import pytest

from polyopt import Polynomial, SourceExpression, normalize, parse
from polyopt.driver import resultant_fixture

SECT21_SYMBOLS = ["x", "y", "z"]
SECT21_TEXT = "y-3*x+5*x*z+2*x^2*y*z-3*x^2*y^2*z+5*x^2*y^2*z^2"
SECT41_TEXT = "6*y*z^2+3*y^3-3*x*z^2+6*x*y*z-3*x^2*z+6*x^2*y"


@pytest.fixture(scope="session")
def sect21():
    return parse(SourceExpression("a", SECT21_TEXT), SECT21_SYMBOLS)


@pytest.fixture(scope="session")
def sect41():
    return parse(SourceExpression("F", SECT41_TEXT), SECT21_SYMBOLS)


@pytest.fixture(scope="session")
def res74():
    return resultant_fixture(7, 4)


@pytest.fixture(scope="session")
def res75():
    return resultant_fixture(7, 5)


def random_polynomial(rng: random.Random, nvars: int, nterms: int,
                      max_exp: int = 3, max_coeff: int = 9) -> Polynomial:
    """Dense-ish random polynomial with nonzero coefficients; the requested
    term count is an upper bound (collisions merge)."""
    terms = {}
    while len(terms) < nterms:
        exps = tuple(rng.randint(0, max_exp) for _ in range(nvars))
        c = rng.randint(1, max_coeff) * rng.choice((1, -1))
        terms[exps] = c
    return normalize(nvars, terms.items())
