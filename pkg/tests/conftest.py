import json
from importlib import resources

import pytest

from stochcert.cli import load_problem
from stochcert.model import FiniteSupport, ProblemKind, problem_from_dict


@pytest.fixture(scope="session")
def random_walk():
    return load_problem("random_walk")


@pytest.fixture(scope="session")
def random_walk_ra(random_walk):
    return random_walk.with_kind(ProblemKind.REACH_AVOID)


@pytest.fixture(scope="session")
def contraction():
    return load_problem("contraction")


@pytest.fixture(scope="session")
def contraction_ra(contraction):
    return contraction.with_kind(ProblemKind.REACH_AVOID)


def three_point(problem, lo, hi):
    """Replace a scalar uniform disturbance by the equally weighted {lo, mid, hi}."""
    mid = (lo + hi) / 2
    dist = FiniteSupport(problem.system.disturbance_vars, [[lo], [mid], [hi]], [1 / 3] * 3)
    return problem.with_disturbance(dist)


def bundled_data(name):
    """Raw JSON dict of a bundled problem, for building variants."""
    return json.loads(resources.files("stochcert").joinpath(f"data/{name}.json").read_text())


def variant(name, **changes):
    data = bundled_data(name)
    data.update(changes)
    return problem_from_dict(data)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
