import pytest

from rgconsensus import scenarios as sc
from rgconsensus.mcai import compute_mcai
from rgconsensus.polytope import HPolytope
from rgconsensus.regulator import AgentModel, ReferenceModel, solve_regulator


def example_agent(i, with_K=True):
    return AgentModel(sc.A[i], sc.B[i], [sc.C], HPolytope.box([-1.0], [1.0]),
                      K=[sc.K[i]] if with_K else None, name=f"agent{i + 1}")


@pytest.fixture(scope="session")
def ref():
    return ReferenceModel(sc.H, sc.Q)


@pytest.fixture(scope="session")
def agents():
    return [example_agent(i) for i in range(4)]


@pytest.fixture(scope="session")
def sols(agents, ref):
    return [solve_regulator(a, ref) for a in agents]


@pytest.fixture(scope="session")
def msets(sols):
    return [compute_mcai(s) for s in sols]


ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store a criterion verdict for the end-of-run summary."""
    def put(n, ok, detail=""):
        ACCEPTANCE[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return put


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
