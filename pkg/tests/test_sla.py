import itertools
import math

import numpy as np
import pytest

from planekit.sla import (
    Allocation,
    AllocationProblem,
    AvailabilityModel,
    InfeasibleAllocation,
    ServiceClass,
    allocation_result_to_json,
    availability,
    availability_model_from_json,
    deadline_meet_prob,
    marginal_gain,
    min_feasible,
    objective,
    optimize_bruteforce,
    optimize_greedy,
    problem_from_json,
)


def svc(lam, mu, b, r):
    return ServiceClass(arrival_rate=lam, service_rate=mu, revenue=b, deadline=r)


def random_feasible_problem(rng, max_m=4, max_n=20):
    while True:
        m = int(rng.integers(1, max_m + 1))
        budget = int(rng.integers(m, max_n + 1))
        classes = tuple(
            svc(
                lam=float(rng.uniform(0.05, 5.0)),
                mu=float(rng.uniform(0.05, 5.0)),
                b=float(rng.uniform(0.0, 10.0)),
                r=float(rng.uniform(0.05, 3.0)),
            )
            for _ in range(m)
        )
        problem = AllocationProblem(classes=classes, budget=budget)
        if int(min_feasible(problem).sum()) <= budget:
            return problem


# ------------------------------------------------------------ availability

def test_availability_single_scenario_identity():
    assert availability([(1.0, 0.97)]) == 0.97


def test_availability_symmetric_half():
    assert availability([(0.5, 1.0), (0.5, 0.0)]) == 0.5


def test_availability_weighted_sum():
    # 0.6 * 0.99 + 0.4 * 0.9 = 0.954
    assert availability([(0.6, 0.99), (0.4, 0.9)]) == pytest.approx(
        0.954, abs=1e-12
    )


def test_availability_rejects_bad_probabilities():
    with pytest.raises(ValueError, match="sum to 1"):
        availability([(0.6, 0.9), (0.3, 0.9)])
    with pytest.raises(ValueError):
        AvailabilityModel(((1.2, 0.5), (-0.2, 0.5)))
    with pytest.raises(ValueError):
        AvailabilityModel(((1.0, 1.5),))
    with pytest.raises(ValueError):
        AvailabilityModel(())


def test_availability_stays_within_scenario_bounds():
    rng = np.random.default_rng(2)
    for _ in range(50):
        k = int(rng.integers(1, 6))
        probs = rng.random(k)
        probs = probs / probs.sum()
        avails = rng.random(k)
        value = availability(zip(probs, avails))
        assert avails.min() - 1e-12 <= value <= avails.max() + 1e-12


# ------------------------------------------------------ deadline meet prob

def test_deadline_prob_saturates_for_long_deadlines():
    c = svc(2.0, 1.0, 1.0, 1.0)  # n=52 -> (n*mu - lambda)*R = 50
    assert deadline_meet_prob(c, 52) == pytest.approx(1.0, abs=1e-9)


def test_deadline_prob_direct_exponentials():
    assert deadline_meet_prob(svc(2.0, 1.0, 1.0, 1.0), 3) == pytest.approx(
        1.0 - math.exp(-1.0), abs=1e-15
    )
    assert deadline_meet_prob(svc(1.0, 2.0, 1.0, 0.5), 1) == pytest.approx(
        1.0 - math.exp(-0.5), abs=1e-15
    )


def test_deadline_prob_rejects_unstable_configuration():
    with pytest.raises(ValueError, match="stability"):
        deadline_meet_prob(svc(2.0, 1.0, 1.0, 1.0), 2)  # n*mu == lambda


def test_deadline_prob_monotonicity():
    # mu and R kept moderate so the probabilities stay strictly below the
    # float 1.0 plateau across the tested range of n.
    rng = np.random.default_rng(5)
    for _ in range(30):
        lam = rng.uniform(0.1, 4.0)
        mu, r = rng.uniform(0.1, 1.2, 2)
        c = svc(lam, mu, 1.0, r)
        base = math.floor(c.utilization) + 1
        probs = [deadline_meet_prob(c, n) for n in range(base, base + 5)]
        assert all(a < b for a, b in zip(probs, probs[1:]))
        assert 0.0 < probs[0] < 1.0
        # longer deadline helps, heavier arrivals hurt
        assert deadline_meet_prob(svc(lam, mu, 1.0, r + 1.0), base) > probs[0]
        heavier = svc(lam + 0.5 * mu, mu, 1.0, r)
        n_ok = math.floor(heavier.utilization) + 1 + 5
        assert deadline_meet_prob(heavier, n_ok) < deadline_meet_prob(c, n_ok)


# ---------------------------------------------------------------- objective

def test_objective_zero_revenue_is_zero():
    p = AllocationProblem((svc(1.0, 1.0, 0.0, 1.0),), budget=5)
    assert objective(p, [5]) == 0.0


def test_objective_single_class_direct_value():
    p = AllocationProblem((svc(1.0, 1.0, 2.0, 1.0),), budget=2)
    assert objective(p, [2]) == pytest.approx(
        2.0 * (1.0 - math.exp(-1.0)), abs=1e-15
    )


def test_objective_two_identical_classes_add_up():
    c = svc(1.5, 1.0, 3.0, 0.8)
    single = AllocationProblem((c,), budget=3)
    double = AllocationProblem((c, c), budget=6)
    assert objective(double, [3, 3]) == pytest.approx(
        2.0 * objective(single, [3]), rel=1e-12
    )


def test_objective_rejects_constraint_violations_by_name():
    p = AllocationProblem((svc(2.0, 1.0, 1.0, 1.0),), budget=4)
    with pytest.raises(ValueError, match="budget"):
        objective(p, [3])
    p2 = AllocationProblem((svc(2.0, 1.0, 1.0, 1.0), svc(0.1, 1.0, 1.0, 1.0)), budget=3)
    with pytest.raises(ValueError, match="stability"):
        objective(p2, [2, 1])  # class 0 has n*mu == lambda


# -------------------------------------------------------------- min counts

def test_min_feasible_strict_integer_floors():
    assert min_feasible(AllocationProblem((svc(1.0, 2.0, 1, 1),), 1)).tolist() == [1]
    assert min_feasible(AllocationProblem((svc(2.0, 1.0, 1, 1),), 1)).tolist() == [3]
    # exactly integral utilization still needs one more server
    assert min_feasible(AllocationProblem((svc(3.0, 1.0, 1, 1),), 1)).tolist() == [4]


# ------------------------------------------------------------------ greedy

def test_greedy_single_class_takes_whole_budget():
    p = AllocationProblem((svc(1.0, 1.0, 2.0, 1.0),), budget=7)
    result = optimize_greedy(p)
    assert isinstance(result, Allocation)
    assert result.n == (7,)


def test_greedy_identical_classes_split_evenly():
    c = svc(1.0, 1.0, 2.0, 1.0)
    p = AllocationProblem((c, c), budget=8)
    result = optimize_greedy(p)
    assert result.n == (4, 4)


def test_greedy_reports_structured_infeasibility():
    p = AllocationProblem((svc(10.0, 1.0, 1.0, 1.0),), budget=4)
    result = optimize_greedy(p)
    assert isinstance(result, InfeasibleAllocation)
    assert result.required == 11 and result.budget == 4
    assert result.minimum == (11,)
    oracle = optimize_bruteforce(p)
    assert oracle == result


def test_marginal_gain_matches_term_difference():
    # Double-entry check; the subtracted form carries cancellation error,
    # so the tolerance is looser than the arithmetic itself.
    rng = np.random.default_rng(7)
    for _ in range(30):
        c = svc(rng.uniform(0.1, 4.0), rng.uniform(0.1, 1.2),
                rng.uniform(0.1, 5.0), rng.uniform(0.1, 1.2))
        base = math.floor(c.utilization) + 1
        for n in range(base, base + 4):
            term_n = c.arrival_rate * c.revenue * deadline_meet_prob(c, n)
            term_n1 = c.arrival_rate * c.revenue * deadline_meet_prob(c, n + 1)
            assert marginal_gain(c, n) == pytest.approx(
                term_n1 - term_n, rel=1e-6, abs=1e-14
            )


def test_marginal_gains_strictly_decreasing_and_positive():
    rng = np.random.default_rng(8)
    for _ in range(30):
        c = svc(*rng.uniform(0.1, 4.0, 2), rng.uniform(0.1, 5), rng.uniform(0.1, 2))
        base = math.floor(c.utilization) + 1
        gains = [marginal_gain(c, n) for n in range(base, base + 6)]
        assert all(g > 0 for g in gains)
        assert all(a > b for a, b in zip(gains, gains[1:]))


def test_greedy_matches_bruteforce_on_random_instances():
    rng = np.random.default_rng(9)
    for _ in range(200):
        p = random_feasible_problem(rng)
        g = optimize_greedy(p)
        b = optimize_bruteforce(p)
        assert isinstance(g, Allocation) and isinstance(b, Allocation)
        assert sum(g.n) == p.budget and sum(b.n) == p.budget
        assert g.objective_value == pytest.approx(b.objective_value, abs=1e-9)


# ------------------------------------------------------------- brute force

def test_bruteforce_single_class():
    p = AllocationProblem((svc(0.5, 1.0, 1.0, 1.0),), budget=6)
    assert optimize_bruteforce(p).n == (6,)


def test_bruteforce_two_class_enumeration():
    # n_min = (1, 1) and N = 3 leaves exactly the compositions (1,2), (2,1).
    a, b = svc(0.5, 1.0, 1.0, 1.0), svc(0.5, 1.0, 5.0, 1.0)
    p = AllocationProblem((a, b), budget=3)
    assert math.comb(1 + 1, 1) == 2
    best = optimize_bruteforce(p)
    scan = max(
        (objective(p, n), n)
        for n in [(1, 2), (2, 1)]
    )
    assert best.n == scan[1]
    assert best.objective_value == pytest.approx(scan[0], abs=1e-12)


def test_bruteforce_breaks_ties_lexicographically():
    c = svc(0.5, 1.0, 1.0, 1.0)
    p = AllocationProblem((c, c), budget=3)  # (1,2) and (2,1) tie by symmetry
    assert optimize_bruteforce(p).n == (1, 2)


def test_bruteforce_matches_independent_itertools_scan():
    rng = np.random.default_rng(10)
    for _ in range(20):
        p = random_feasible_problem(rng, max_m=3, max_n=12)
        base = min_feasible(p)
        spare = p.budget - int(base.sum())
        best = -math.inf
        for extras in itertools.product(range(spare + 1), repeat=p.m):
            if sum(extras) != spare:
                continue
            n = tuple(int(b + e) for b, e in zip(base, extras))
            best = max(best, objective(p, n))
        result = optimize_bruteforce(p)
        assert result.objective_value == pytest.approx(best, abs=1e-9)


def test_bruteforce_rejects_oversized_search_space():
    classes = tuple(svc(0.1, 1.0, 1.0, 1.0) for _ in range(10))
    p = AllocationProblem(classes, budget=60)
    with pytest.raises(ValueError, match="too large"):
        optimize_bruteforce(p)


# ------------------------------------------------------------------- types

def test_service_class_validation():
    with pytest.raises(ValueError):
        svc(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        svc(1.0, -1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        svc(1.0, 1.0, -0.5, 1.0)
    with pytest.raises(ValueError):
        svc(1.0, 1.0, 1.0, 0.0)
    assert svc(1.0, 2.0, 1.0, 1.0).utilization == 0.5


def test_json_round_trip():
    doc = {
        "N": 5,
        "classes": [
            {"lambda": 1.0, "mu": 2.0, "b": 3.0, "R": 0.5},
            {"lambda": 0.5, "mu": 1.0, "b": 1.0, "R": 1.0},
        ],
    }
    p = problem_from_json(doc)
    assert p.budget == 5 and p.m == 2
    assert p.classes[0].service_rate == 2.0

    result = optimize_greedy(p)
    out = allocation_result_to_json(result)
    assert sorted(out) == ["n", "objective"]
    infeasible = allocation_result_to_json(InfeasibleAllocation(9, 4, (9,)))
    assert infeasible == {"infeasible": {"required": 9, "budget": 4}}

    model = availability_model_from_json({"scenarios": [[0.6, 0.99], [0.4, 0.9]]})
    assert availability(model) == pytest.approx(0.954, abs=1e-12)

    with pytest.raises(ValueError):
        problem_from_json({"classes": []})
    with pytest.raises(ValueError):
        problem_from_json({"N": 3, "classes": [{"lambda": 1.0}]})
    with pytest.raises(ValueError):
        availability_model_from_json({})
