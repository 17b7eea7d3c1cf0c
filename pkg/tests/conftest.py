import math
from dataclasses import dataclass

import numpy as np
import pytest

from pwcapprox.expr import parse
from pwcapprox.univariate import build_univariate


@dataclass
class Case:
    name: str
    source: str
    lower: float
    upper: float
    kappa: float
    eps: float


def fourier_cases(count=10, seed=20240601):
    """Random sums of three sinusoids on [0, 2] with kappa = sum |c_k w_k|."""
    rng = np.random.default_rng(seed)
    cases = []
    for k in range(count):
        c = rng.uniform(-1, 1, 3)
        w = rng.uniform(0.5, 4, 3)
        phi = rng.uniform(0, 2 * math.pi, 3)
        terms = [f"{float(c[i])!r}*sin({float(w[i])!r}*x1+{float(phi[i])!r})" for i in range(3)]
        kappa = float(np.sum(np.abs(c) * w))
        cases.append(Case(f"fourier{k}", "+".join(terms), 0.0, 2.0, kappa, 0.02 * kappa))
    return cases


CORPUS = [
    Case("sin", "sin(x1)", 0.0, math.pi, 1.0, 0.01),
    Case("constant", "3", 0.0, 1.0, 1.0, 0.5),
    Case("abs", "abs(x1)", -1.0, 1.0, 1.01, 0.1),
] + fourier_cases()


def build_case(case):
    f = parse(case.source, 1)
    return f, build_univariate(f, case.lower, case.upper, case.kappa, case.eps)


@pytest.fixture(scope="session")
def corpus_models():
    return [(case, *build_case(case)) for case in CORPUS]


@pytest.fixture(scope="session")
def sin_model():
    return build_case(CORPUS[0])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
