from functools import lru_cache

import pytest

from harmpot.derham import build_complex
from harmpot.harmonic_normal import normal_harmonic_basis
from harmpot.meshgen import CanonicalDomainSpec, generate_canonical

ACCEPTANCE_RESULTS = {}


@lru_cache(maxsize=None)
def canonical(kind, n):
    mesh = generate_canonical(CanonicalDomainSpec(kind, n))
    return mesh, build_complex(mesh)


@lru_cache(maxsize=None)
def normal_basis(kind, n):
    mesh, cx = canonical(kind, n)
    return normal_harmonic_basis(cx, mesh.boundary_components, tol=1e-12)


@pytest.fixture
def record_criterion():
    """Record one acceptance line; printed in the terminal summary."""

    def record(number, title, passed, detail=""):
        prev = ACCEPTANCE_RESULTS.get(number)
        ok = passed and (prev is None or prev[1])
        ACCEPTANCE_RESULTS[number] = (title, ok, detail if prev is None else prev[2] + "; " + detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, ok, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
