"""SLA mathematics: scenario-weighted availability and deadline-revenue
server allocation for M/M/1-style service classes.

Each class i has Poisson arrivals at rate lambda_i, per-server exponential
service at rate mu_i, revenue b_i per request answered within its deadline
R_i, and pooled capacity n_i * mu_i when granted n_i servers. The chance a
request meets its deadline is then 1 - exp(-(n*mu - lambda)*R), and the
allocator maximizes

    sum_i lambda_i * b_i * (1 - exp(-(n_i*mu_i - lambda_i) * R_i))

subject to sum_i n_i = N and per-class stability n_i * mu_i > lambda_i
(equivalently n_i > rho_i = lambda_i / mu_i). Every class term is
increasing and strictly concave in n_i, so granting one server at a time
to the best marginal gain is exact; a bounded exhaustive search is kept
alongside as the verification oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

__all__ = [
    "Allocation",
    "AllocationProblem",
    "AvailabilityModel",
    "InfeasibleAllocation",
    "ServiceClass",
    "availability",
    "availability_model_from_json",
    "allocation_result_to_json",
    "deadline_meet_prob",
    "marginal_gain",
    "min_feasible",
    "objective",
    "optimize_bruteforce",
    "optimize_greedy",
    "problem_from_json",
]

BRUTE_FORCE_MAX_COMPOSITIONS = 10_000_000

_PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class AvailabilityModel:
    """Scenario probabilities paired with conditional availabilities."""

    scenarios: tuple[tuple[float, float], ...]

    def __post_init__(self):
        scenarios = tuple(
            (float(p), float(a)) for p, a in self.scenarios
        )
        object.__setattr__(self, "scenarios", scenarios)
        if not scenarios:
            raise ValueError("availability model requires at least one scenario")
        total = sum(p for p, _ in scenarios)
        if abs(total - 1.0) > _PROB_SUM_TOL:
            raise ValueError(
                f"scenario probabilities must sum to 1, got {total!r}"
            )
        for p, a in scenarios:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"scenario probability {p!r} outside [0, 1]")
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"scenario availability {a!r} outside [0, 1]")


def availability(model: Union[AvailabilityModel, Iterable]) -> float:
    """Probability-weighted mean of the conditional availabilities."""
    if not isinstance(model, AvailabilityModel):
        model = AvailabilityModel(tuple(model))
    return float(sum(p * a for p, a in model.scenarios))


@dataclass(frozen=True)
class ServiceClass:
    """One request class: arrivals, per-server rate, revenue, deadline."""

    arrival_rate: float
    service_rate: float
    revenue: float
    deadline: float

    def __post_init__(self):
        if self.arrival_rate <= 0:
            raise ValueError(f"arrival rate must be > 0, got {self.arrival_rate}")
        if self.service_rate <= 0:
            raise ValueError(f"service rate must be > 0, got {self.service_rate}")
        if self.revenue < 0:
            raise ValueError(f"revenue must be >= 0, got {self.revenue}")
        if self.deadline <= 0:
            raise ValueError(f"deadline must be > 0, got {self.deadline}")

    @property
    def utilization(self) -> float:
        return self.arrival_rate / self.service_rate


@dataclass(frozen=True)
class AllocationProblem:
    """Service classes competing for a shared integer server budget."""

    classes: tuple[ServiceClass, ...]
    budget: int

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(self.classes) == 0:
            raise ValueError("allocation problem requires at least one class")
        if self.budget < 1:
            raise ValueError(f"server budget must be >= 1, got {self.budget}")

    @property
    def m(self) -> int:
        return len(self.classes)


@dataclass(frozen=True)
class Allocation:
    n: tuple[int, ...]
    objective_value: float


@dataclass(frozen=True)
class InfeasibleAllocation:
    """The stability minima alone exceed the budget."""

    required: int
    budget: int
    minimum: tuple[int, ...]


def deadline_meet_prob(c: ServiceClass, n: int) -> float:
    """P(request of class c meets its deadline) with n servers pooled."""
    n = int(n)
    capacity = n * c.service_rate
    if capacity <= c.arrival_rate:
        raise ValueError(
            f"stability violated: n*mu = {capacity} must exceed lambda = "
            f"{c.arrival_rate}"
        )
    return 1.0 - math.exp(-(capacity - c.arrival_rate) * c.deadline)


def min_feasible(p: AllocationProblem) -> np.ndarray:
    """Smallest per-class integer counts strictly above each utilization
    rho = lambda/mu, i.e. floor(rho) + 1. Feasibility itself is judged by
    comparing the sum against the budget."""
    return np.array(
        [math.floor(c.utilization) + 1 for c in p.classes], dtype=np.int64
    )


def objective(p: AllocationProblem, n) -> float:
    """Deadline-weighted revenue rate of a feasible allocation."""
    counts = [int(v) for v in n]
    if len(counts) != p.m:
        raise ValueError(f"expected {p.m} counts, got {len(counts)}")
    total = sum(counts)
    if total != p.budget:
        raise ValueError(
            f"budget constraint violated: sum(n) = {total} != N = {p.budget}"
        )
    value = 0.0
    for i, (c, ni) in enumerate(zip(p.classes, counts)):
        if ni * c.service_rate <= c.arrival_rate:
            raise ValueError(
                f"stability constraint violated for class {i}: "
                f"n*mu = {ni * c.service_rate} must exceed lambda = {c.arrival_rate} "
                f"(n > rho = {c.utilization})"
            )
        value += c.arrival_rate * c.revenue * deadline_meet_prob(c, ni)
    return value


def marginal_gain(c: ServiceClass, n: int) -> float:
    """Objective increase for class c when going from n to n+1 servers."""
    lam, mu, b, r = c.arrival_rate, c.service_rate, c.revenue, c.deadline
    return lam * b * math.exp(-(n * mu - lam) * r) * (1.0 - math.exp(-mu * r))


def optimize_greedy(p: AllocationProblem) -> Union[Allocation, InfeasibleAllocation]:
    """Exact allocator: start every class at its stability minimum, then
    grant one server at a time to the largest marginal gain (ties to the
    lowest class index). Concavity of each class term makes this optimal."""
    minimum = min_feasible(p)
    required = int(minimum.sum())
    if required > p.budget:
        return InfeasibleAllocation(
            required=required, budget=p.budget, minimum=tuple(int(v) for v in minimum)
        )
    counts = minimum.copy()
    for _ in range(p.budget - required):
        gains = np.array(
            [marginal_gain(c, int(ni)) for c, ni in zip(p.classes, counts)]
        )
        counts[int(np.argmax(gains))] += 1
    n = tuple(int(v) for v in counts)
    return Allocation(n=n, objective_value=objective(p, n))


def optimize_bruteforce(
    p: AllocationProblem,
) -> Union[Allocation, InfeasibleAllocation]:
    """Enumerate every composition of the budget meeting the stability
    minima and return the objective argmax (ties to the lexicographically
    smallest allocation). Verification oracle for the greedy allocator."""
    minimum = min_feasible(p)
    required = int(minimum.sum())
    if required > p.budget:
        return InfeasibleAllocation(
            required=required, budget=p.budget, minimum=tuple(int(v) for v in minimum)
        )
    spare = p.budget - required
    m = p.m
    n_compositions = math.comb(spare + m - 1, m - 1)
    if n_compositions > BRUTE_FORCE_MAX_COMPOSITIONS:
        raise ValueError(
            f"search space too large: {n_compositions} compositions exceed "
            f"{BRUTE_FORCE_MAX_COMPOSITIONS}"
        )

    # Per-class revenue term for every count it could receive.
    tables = []
    for c, base in zip(p.classes, minimum):
        counts = base + np.arange(spare + 1)
        tables.append(
            c.arrival_rate
            * c.revenue
            * (
                1.0
                - np.exp(
                    -(counts * c.service_rate - c.arrival_rate) * c.deadline
                )
            )
        )

    best_value = -math.inf
    best_extra: tuple[int, ...] = ()
    extras = [0] * m

    def descend(i: int, left: int, acc: float):
        nonlocal best_value, best_extra
        if i == m - 1:
            extras[i] = left
            value = acc + tables[i][left]
            if value > best_value:
                best_value = value
                best_extra = tuple(extras)
            return
        for e in range(left + 1):
            extras[i] = e
            descend(i + 1, left - e, acc + tables[i][e])

    descend(0, spare, 0.0)
    n = tuple(int(b + e) for b, e in zip(minimum, best_extra))
    return Allocation(n=n, objective_value=objective(p, n))


def problem_from_json(doc: dict) -> AllocationProblem:
    """Parse {"N": int, "classes": [{"lambda","mu","b","R"}, ...]}."""
    if not isinstance(doc, dict) or "N" not in doc or "classes" not in doc:
        raise ValueError('allocation problem JSON requires "N" and "classes"')
    classes = []
    for i, rec in enumerate(doc["classes"]):
        try:
            classes.append(
                ServiceClass(
                    arrival_rate=float(rec["lambda"]),
                    service_rate=float(rec["mu"]),
                    revenue=float(rec["b"]),
                    deadline=float(rec["R"]),
                )
            )
        except KeyError as exc:
            raise ValueError(f"class {i} missing field {exc}") from None
    return AllocationProblem(classes=tuple(classes), budget=int(doc["N"]))


def availability_model_from_json(doc: dict) -> AvailabilityModel:
    """Parse {"scenarios": [[probability, availability], ...]}."""
    if not isinstance(doc, dict) or "scenarios" not in doc:
        raise ValueError('availability JSON requires "scenarios"')
    return AvailabilityModel(tuple((p, a) for p, a in doc["scenarios"]))


def allocation_result_to_json(result) -> dict:
    if isinstance(result, Allocation):
        return {"n": list(result.n), "objective": result.objective_value}
    if isinstance(result, InfeasibleAllocation):
        return {
            "infeasible": {"required": result.required, "budget": result.budget}
        }
    raise TypeError(f"not an allocation result: {result!r}")
