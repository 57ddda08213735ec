import numpy as np
import pytest

from multimodal_smc.smc import stream


@pytest.fixture
def rng():
    return stream(20261017, 0, 0, 99)


def brute_variance_terms(dists, kernels, phi):
    """Explicit-loop evaluation of the variance expansion, independent of fk.py."""
    n = len(kernels)
    S = len(phi)
    mun = dists[-1]
    m = sum(mun[x] * phi[x] for x in range(S))
    f = [phi[x] - m for x in range(S)]
    terms = [sum(mun[x] * f[x] ** 2 for x in range(S))]
    for k in range(n - 1, -1, -1):
        K = kernels[k]
        new = []
        for x in range(S):
            g = dists[k + 1][x] / dists[k][x] if dists[k][x] > 0 else 0.0
            new.append(g * sum(K[x][y] * f[y] for y in range(S)))
        f = new
        terms.append(sum(dists[k][x] * f[x] ** 2 for x in range(S)))
    return terms[::-1]


ACCEPTANCE_LINES = {}


def record_acceptance(number, ok, detail):
    """Print and keep one PASS/FAIL line per acceptance criterion."""
    line = f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
