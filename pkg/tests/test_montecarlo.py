import json

import numpy as np
import pytest

from conftest import three_point, variant
from stochcert.model import ProblemError
from stochcert.montecarlo import (CHUNK, BudgetExceeded, clopper_pearson, exact_probability,
                                  simulate_event, simulate_switched_coupled)

N_COUPLED = 10_000

WALK3 = {"finite": [{"point": [-0.1], "prob": "1/3"}, {"point": [0], "prob": "1/3"},
                    {"point": [0.1], "prob": "1/3"}]}


# -- estimator -----------------------------------------------------------------

def test_clopper_pearson_edges():
    assert clopper_pearson(0, 10)[0] == 0.0
    assert clopper_pearson(10, 10)[1] == 1.0
    lo, hi = clopper_pearson(50, 100)
    assert lo < 0.5 < hi and hi - 0.5 == pytest.approx(0.5 - lo)
    with pytest.raises(ValueError):
        clopper_pearson(3, 2)


@pytest.mark.parametrize("name,expected", [("random_walk", 0.0085), ("random_walk_ra", 0.0128),
                                           ("contraction", 0.2321), ("contraction_ra", 0.7708)])
def test_reference_estimates(request, name, expected):
    res = simulate_event(request.getfixturevalue(name), 200_000, seed=7)
    assert abs(res.estimate - expected) <= 0.01
    assert res.ci_lo <= res.estimate <= res.ci_hi


def test_zero_horizon(random_walk, contraction_ra):
    assert simulate_event(random_walk.with_horizon(0), 1000).estimate == 0.0
    assert simulate_event(contraction_ra.with_horizon(0), 1000).estimate == 0.0


def test_bad_inputs(random_walk):
    with pytest.raises(ValueError):
        simulate_event(random_walk, 0)
    with pytest.raises(ProblemError, match="x0"):
        variant("random_walk", x0=[1.5])


def test_deterministic_and_chunk_aligned(contraction):
    a = simulate_event(contraction, CHUNK + 1000, seed=11)
    b = simulate_event(contraction, CHUNK + 1000, seed=11)
    assert a == b
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())
    c = simulate_event(contraction, CHUNK + 1000, seed=12)
    assert c.hits != a.hits or c.seed != a.seed


def test_json_fields(random_walk):
    data = simulate_event(random_walk, 1000, seed=1).to_json()
    assert set(data) == {"estimate", "n", "ci_lo", "ci_hi", "seed", "event"}
    assert data["event"] == "exit" and data["n"] == 1000


def test_simulation_matches_coupled_originals(contraction):
    # both simulators share one stream layout, so the event counts agree
    res = simulate_event(contraction, 5000, seed=4)
    paths = simulate_switched_coupled(contraction, 5000, seed=4)
    left = ~contraction.in_safe(paths.original.reshape(-1, 1)).reshape(5000, -1)
    assert int(left.any(axis=1).sum()) == res.hits


# -- exact enumeration ------------------------------------------------------------

def test_exact_example():
    problem = variant("random_walk", x0=[0.9], horizon=2, disturbance=WALK3)
    assert exact_probability(problem) == pytest.approx(1 / 9, abs=1e-15)


def test_exact_zero_horizon(random_walk, contraction_ra):
    for p in (random_walk, contraction_ra):
        assert exact_probability(three_point(p, -0.1, 0.1), 0) == 0.0


def test_exact_all_exit():
    problem = variant("random_walk", x0=[0.95],
                      disturbance={"finite": [{"point": [0.1], "prob": 0.5},
                                              {"point": [0.2], "prob": 0.5}]})
    assert exact_probability(problem, 1) == 1.0


def test_exact_budget(random_walk):
    with pytest.raises(BudgetExceeded):
        exact_probability(three_point(random_walk, -0.1, 0.1), 15)
    with pytest.raises(ProblemError):
        exact_probability(random_walk, 2)


def test_exact_matches_recursive_definition(contraction_ra):
    problem = three_point(contraction_ra, -1, 1)

    def ra(x, k):
        if problem.in_target(np.array([[x]]))[0]:
            return 1.0
        if not problem.in_safe(np.array([[x]]))[0] or k == 0:
            return 0.0
        return sum(ra(float(problem.system.step([x], [d])[0]), k - 1) / 3 for d in (-1, 0, 1))

    for N in range(6):
        assert exact_probability(problem, N) == pytest.approx(ra(-0.9, N), abs=1e-12)


def test_estimator_coverage(random_walk):
    problem = variant("random_walk", x0=[0.8], horizon=8, disturbance=WALK3)
    p = exact_probability(problem)
    assert 0.05 < p < 0.95
    covered = sum(
        (lambda r: r.ci_lo <= p <= r.ci_hi)(simulate_event(problem, 2000, seed=s))
        for s in range(100))
    assert covered >= 99


# -- coupling of original and switched systems -------------------------------------

PROBLEMS = ["random_walk", "contraction", "random_walk_ra", "contraction_ra"]


@pytest.mark.parametrize("name", PROBLEMS)
def test_trajectories_follow_dynamics(request, name):
    problem = request.getfixturevalue(name)
    paths = simulate_switched_coupled(problem, 200, seed=2)
    step = problem.system.step
    for orig, sw in paths.pairs():
        assert orig.is_consistent(step)
        assert np.array_equal(orig.disturbances, sw.disturbances)
        assert orig.states.shape == (problem.horizon + 1, 1)


@pytest.mark.parametrize("name", ["random_walk", "contraction"])
def test_exit_coupling(request, name):
    problem = request.getfixturevalue(name)
    paths = simulate_switched_coupled(problem, N_COUPLED, seed=5)
    n, T, _ = paths.original.shape
    inside = problem.in_safe(paths.original.reshape(-1, 1)).reshape(n, T)
    exited_by = np.logical_or.accumulate(~inside, axis=1)
    sw = paths.switched.reshape(-1, 1)
    absorbed = (problem.in_extended(sw) & ~problem.in_safe(sw)).reshape(n, T)
    assert np.array_equal(exited_by, absorbed)
    assert exited_by[:, -1].any()

    # paths that never exit are copied exactly; exiting ones freeze at the exit step
    never = ~exited_by[:, -1]
    assert np.array_equal(paths.original[never], paths.switched[never])
    for i in np.flatnonzero(~never)[:200]:
        k = int(np.argmax(exited_by[i]))
        assert np.array_equal(paths.original[i, :k + 1], paths.switched[i, :k + 1])
        assert np.all(paths.switched[i, k:] == paths.switched[i, k])

    freq = absorbed.mean(axis=0)
    se = np.sqrt(np.maximum(freq * (1 - freq), 1 / n) / n)
    assert np.all(np.diff(freq) >= -3 * se[1:])


@pytest.mark.parametrize("name", ["random_walk_ra", "contraction_ra"])
def test_reach_coupling(request, name):
    problem = request.getfixturevalue(name)
    paths = simulate_switched_coupled(problem, N_COUPLED, seed=6)
    n, T, _ = paths.original.shape
    flat = paths.original.reshape(-1, 1)
    inside = problem.in_safe(flat).reshape(n, T)
    hit = problem.in_target(flat).reshape(n, T)
    # reached X_r by step i with every earlier state in X
    stayed = np.logical_and.accumulate(inside, axis=1)
    reached = np.logical_or.accumulate(hit & stayed, axis=1)
    in_target_sw = problem.in_target(paths.switched.reshape(-1, 1)).reshape(n, T)
    assert np.array_equal(reached, in_target_sw)
    assert reached[:, -1].any()
    for i in np.flatnonzero(reached[:, -1])[:200]:
        k = int(np.argmax(reached[i]))
        assert np.all(paths.switched[i, k:] == paths.original[i, k])

    freq = in_target_sw.mean(axis=0)
    se = np.sqrt(np.maximum(freq * (1 - freq), 1 / n) / n)
    assert np.all(np.diff(freq) >= -3 * se[1:])
