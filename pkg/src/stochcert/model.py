"""Stochastic polynomial systems, semialgebraic sets and verification problems."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from .polynomial import Box, Polynomial, interval_enclosure, bernstein_form, parse_polynomial


class ProblemError(ValueError):
    """A problem description is malformed or violates a precondition."""


# ----------------------------------------------------------------------------
# Disturbances

@dataclass(frozen=True)
class UniformBox:
    """Independent uniform disturbance coordinates over a box."""

    box: Box

    @property
    def variables(self) -> tuple[str, ...]:
        return self.box.variables

    def moment(self, name: str, k: int) -> float:
        a, b = self.box.interval(name)
        if k == 0:
            return 1.0
        if b == a:
            return a ** k
        return (b ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a))

    def support_box(self) -> Box:
        return self.box

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # inverse transform per coordinate
        return self.box.sample(rng, n)


@dataclass(frozen=True)
class FiniteSupport:
    """Finitely many disturbance values with probabilities."""

    variables: tuple[str, ...]
    points: tuple[tuple[float, ...], ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "points", tuple(tuple(float(x) for x in p) for p in self.points))
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        if len(self.points) != len(self.probabilities) or not self.points:
            raise ProblemError("finite support needs matching, nonempty points and probabilities")
        if any(len(p) != len(self.variables) for p in self.points):
            raise ProblemError("finite support point arity mismatch")
        if any(p < 0 for p in self.probabilities):
            raise ProblemError("negative probability in finite support")
        if abs(math.fsum(self.probabilities) - 1.0) > 1e-12:
            raise ProblemError(f"probabilities sum to {math.fsum(self.probabilities)}, not 1")

    def support_box(self) -> Box:
        pts = np.asarray(self.points)
        return Box(self.variables, pts.min(axis=0), pts.max(axis=0))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        cdf = np.cumsum(self.probabilities)
        cdf[-1] = 1.0
        idx = np.searchsorted(cdf, rng.random(n), side="right")
        idx = np.minimum(idx, len(self.points) - 1)
        return np.asarray(self.points)[idx]


DisturbanceSpec = Union[UniformBox, FiniteSupport]


# ----------------------------------------------------------------------------
# Sets

class Relation(enum.Enum):
    LE = "<=0"
    GE = ">=0"

    def flipped(self) -> Relation:
        return Relation.GE if self is Relation.LE else Relation.LE


@dataclass(frozen=True)
class Conjunct:
    poly: Polynomial
    relation: Relation

    def oriented(self) -> Polynomial:
        """The polynomial q with the conjunct equivalent to q >= 0."""
        return self.poly if self.relation is Relation.GE else -self.poly

    def flipped(self) -> Conjunct:
        return Conjunct(self.poly, self.relation.flipped())

    def __str__(self) -> str:
        return f"{self.poly} {'<=' if self.relation is Relation.LE else '>='} 0"


@dataclass(frozen=True)
class SemialgebraicSet:
    """Conjunction of closed polynomial inequalities; no conjuncts = whole space."""

    variables: tuple[str, ...]
    conjuncts: tuple[Conjunct, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "conjuncts", tuple(
            Conjunct(c.poly.with_variables(self.variables), c.relation) for c in self.conjuncts))

    def contains(self, point) -> bool:
        for c in self.conjuncts:
            val = c.poly.evaluate(point)
            if c.relation is Relation.LE and val > 0:
                return False
            if c.relation is Relation.GE and val < 0:
                return False
        return True

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        mask = np.ones(points.shape[0], dtype=bool)
        for c in self.conjuncts:
            vals = c.poly.evaluate_many(points)
            mask &= (vals <= 0) if c.relation is Relation.LE else (vals >= 0)
        return mask

    def intersect(self, other: SemialgebraicSet) -> SemialgebraicSet:
        return SemialgebraicSet(self.variables, self.conjuncts + other.conjuncts)

    def oriented(self) -> list[Polynomial]:
        return [c.oriented() for c in self.conjuncts]

    def __str__(self) -> str:
        return " and ".join(str(c) for c in self.conjuncts) if self.conjuncts else "everything"


def difference(a: SemialgebraicSet, b: SemialgebraicSet) -> list[SemialgebraicSet]:
    """Closure of ``a \\ b`` as a union of conjunctive sets.

    With a single-conjunct ``b`` the result is one set with ``b``'s relation
    flipped; in general one piece per conjunct of ``b``.
    """
    if not b.conjuncts:
        return []
    return [SemialgebraicSet(a.variables, a.conjuncts + (c.flipped(),)) for c in b.conjuncts]


def set_contains(s: SemialgebraicSet, point) -> bool:
    return s.contains(point)


def _bernstein_range(q: Polynomial, cell: Box) -> tuple[float, float]:
    bf = bernstein_form(q, cell)
    return bf.min(), bf.max()


def set_bounding_box(s: SemialgebraicSet, box: Box, tol: float = 1e-9,
                     budget: int = 20000) -> Box | None:
    """Outer bounding box of ``s`` within ``box``, or None if provably empty.

    Each face is found by best-first search over bisected cells: a cell is
    discarded when some conjunct is provably violated on it, and the search
    for a face stops at the first cell that lies wholly inside the set or is
    narrower than ``tol`` times the box width.
    """
    oriented = [c.oriented() for c in s.conjuncts]
    scale = np.maximum(box.widths, 1e-300)

    def status(cell: Box) -> str:
        inside = True
        for q in oriented:
            lo, hi = _bernstein_range(q, cell)
            if hi < 0:
                return "out"
            if lo < 0:
                inside = False
        return "in" if inside else "maybe"

    import heapq
    lo_out = list(box.lo)
    hi_out = list(box.hi)
    for axis in range(box.dim):
        for sign in (+1, -1):
            # maximize sign * x[axis]
            counter = 0
            heap = [(-sign * (box.hi[axis] if sign > 0 else box.lo[axis]), counter, box)]
            found = None
            steps = 0
            while heap:
                key, _, cell = heapq.heappop(heap)
                steps += 1
                st = status(cell)
                if st == "out":
                    continue
                small = cell.widths[axis] <= tol * scale[axis]
                if st == "in" or small or steps > budget:
                    found = -key * sign
                    break
                widths = cell.widths / scale
                for child in cell.bisect(int(np.argmax(widths))):
                    counter += 1
                    face = child.hi[axis] if sign > 0 else child.lo[axis]
                    heapq.heappush(heap, (-sign * face, counter, child))
            if found is None:
                return None
            if sign > 0:
                hi_out[axis] = found
            else:
                lo_out[axis] = found
    return Box(box.variables, lo_out, hi_out)


# ----------------------------------------------------------------------------
# Systems and problems

@dataclass(frozen=True)
class SystemSpec:
    state_vars: tuple[str, ...]
    disturbance_vars: tuple[str, ...]
    dynamics: tuple[Polynomial, ...]
    disturbance: DisturbanceSpec

    def __post_init__(self):
        object.__setattr__(self, "state_vars", tuple(self.state_vars))
        object.__setattr__(self, "disturbance_vars", tuple(self.disturbance_vars))
        if set(self.state_vars) & set(self.disturbance_vars):
            raise ProblemError("state and disturbance variable names overlap")
        if len(self.dynamics) != len(self.state_vars):
            raise ProblemError(
                f"{len(self.dynamics)} dynamics components for {len(self.state_vars)} states")
        allowed = self.state_vars + self.disturbance_vars
        dyn = []
        for f in self.dynamics:
            extra = set(f.used_variables()) - set(allowed)
            if extra:
                raise ProblemError(f"dynamics mention undeclared variables {sorted(extra)}")
            dyn.append(f.with_variables(allowed))
        object.__setattr__(self, "dynamics", tuple(dyn))
        if tuple(self.disturbance.variables) != self.disturbance_vars:
            raise ProblemError("disturbance variables do not match the distribution")

    @property
    def all_vars(self) -> tuple[str, ...]:
        return self.state_vars + self.disturbance_vars

    def step(self, x: Sequence[float], theta: Sequence[float]) -> np.ndarray:
        point = list(x) + list(theta)
        return np.array([f.evaluate(point) for f in self.dynamics])

    def step_many(self, states: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        pts = np.hstack([np.asarray(states, float), np.asarray(thetas, float)])
        return np.column_stack([f.evaluate_many(pts) for f in self.dynamics])


class ProblemKind(enum.Enum):
    SAFETY = "safety"
    REACH_AVOID = "reach_avoid"


@dataclass(frozen=True)
class ExtendedDomain:
    """The set on which certificates live, with a bounding box."""

    set: SemialgebraicSet
    box: Box


@dataclass(frozen=True)
class ProblemSpec:
    """A finite-horizon safety or reach-avoid verification instance.

    Construction checks the cheap invariants (arity, initial-state
    membership); :func:`validate_problem` adds the containment checks.
    """

    system: SystemSpec
    kind: ProblemKind
    safe_set: SemialgebraicSet
    extended_domain: ExtendedDomain
    x0: tuple[float, ...]
    horizon: int
    target_set: SemialgebraicSet | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "kind", ProblemKind(self.kind))
        n = len(self.system.state_vars)
        if len(self.x0) != n:
            raise ProblemError(f"x0 has {len(self.x0)} entries, expected {n}")
        if int(self.horizon) != self.horizon or self.horizon < 0:
            raise ProblemError("horizon must be a nonnegative integer")
        object.__setattr__(self, "horizon", int(self.horizon))
        sv = self.system.state_vars
        for label, s in (("safe_set", self.safe_set), ("target_set", self.target_set),
                         ("extended_domain", self.extended_domain.set)):
            if s is not None and s.variables != sv:
                raise ProblemError(f"{label} is not over the state variables {sv}")
        if self.extended_domain.box.variables != sv:
            raise ProblemError("extended-domain box must list the state variables in order")
        if not self.safe_set.contains(self.x0):
            raise ProblemError(f"x0 = {list(self.x0)} is not in the safe set X (x0 ∉ X)")
        if self.kind is ProblemKind.REACH_AVOID:
            if self.target_set is None:
                raise ProblemError("reach-avoid problems need a target set")
            if self.target_set.contains(self.x0):
                raise ProblemError("x0 lies in the target set (x0 ∉ X \\ X_r)")

    @property
    def state_vars(self) -> tuple[str, ...]:
        return self.system.state_vars

    def with_kind(self, kind: ProblemKind) -> ProblemSpec:
        return replace(self, kind=kind)

    def with_horizon(self, horizon: int) -> ProblemSpec:
        return replace(self, horizon=horizon)

    def with_disturbance(self, disturbance: DisturbanceSpec) -> ProblemSpec:
        return replace(self, system=replace(self.system, disturbance=disturbance))

    # Regions used by the certificate conditions. Differences are closures.
    def in_safe(self, points: np.ndarray) -> np.ndarray:
        return self.safe_set.contains_many(points)

    def in_target(self, points: np.ndarray) -> np.ndarray:
        if self.target_set is None:
            return np.zeros(np.asarray(points).shape[0], dtype=bool)
        return self.target_set.contains_many(points)

    def in_extended(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, float)
        box = self.extended_domain.box
        inbox = np.all((pts >= np.asarray(box.lo)) & (pts <= np.asarray(box.hi)), axis=1)
        return inbox & self.extended_domain.set.contains_many(pts)

    def safe_minus_target(self) -> list[SemialgebraicSet]:
        return difference(self.safe_set, self.target_set)

    def extended_minus_safe(self) -> list[SemialgebraicSet]:
        return difference(self.extended_domain.set, self.safe_set)

    def extended_minus_target(self) -> list[SemialgebraicSet]:
        return difference(self.extended_domain.set, self.target_set)


# ----------------------------------------------------------------------------
# Operations

def one_step_expectation(v: Polynomial, system: SystemSpec) -> Polynomial:
    """E[v(f(x, theta))] as a polynomial in the state variables."""
    extra = set(v.used_variables()) - set(system.state_vars)
    if extra:
        raise ProblemError(f"v mentions non-state variables {sorted(extra)}")
    v = v.with_variables(system.state_vars)
    composed = v.compose(dict(zip(system.state_vars, system.dynamics)))
    composed = composed.with_variables(system.all_vars)
    dist = system.disturbance
    n = len(system.state_vars)
    if isinstance(dist, UniformBox):
        moments = {}
        terms: dict[tuple[int, ...], float] = {}
        for e, c in composed.terms.items():
            w = c
            for name, k in zip(system.disturbance_vars, e[n:]):
                if k:
                    if (name, k) not in moments:
                        moments[(name, k)] = dist.moment(name, k)
                    w *= moments[(name, k)]
            key = e[:n]
            terms[key] = terms.get(key, 0.0) + w
        return Polynomial(terms, system.state_vars)
    result = Polynomial.zero(system.state_vars)
    for point, prob in zip(dist.points, dist.probabilities):
        sub = composed.substitute_values(dict(zip(system.disturbance_vars, point)))
        result = result + sub.with_variables(system.state_vars) * prob
    return result


def enclose_one_step_reachable(system: SystemSpec, x_box: Box) -> Box:
    """Box containing ``{f(x, θ) : x in x_box, θ in Θ} ∪ x_box``."""
    x_box = x_box.reorder(system.state_vars)
    dbox = system.disturbance.support_box()
    joint = Box(system.all_vars, x_box.lo + dbox.lo, x_box.hi + dbox.hi)
    lo, hi = [], []
    for i, f in enumerate(system.dynamics):
        a, b = interval_enclosure(f, joint)
        lo.append(min(a, x_box.lo[i]))
        hi.append(max(b, x_box.hi[i]))
    return Box(system.state_vars, lo, hi)


def switched_step_safety(x: Sequence[float], theta: Sequence[float],
                         spec: ProblemSpec) -> np.ndarray:
    """Step of the system frozen once it leaves the safe set."""
    if spec.safe_set.contains(x):
        return spec.system.step(x, theta)
    return np.asarray(x, dtype=float)


def switched_step_reach_avoid(x: Sequence[float], theta: Sequence[float],
                              spec: ProblemSpec) -> np.ndarray:
    """Step of the system frozen on the target and outside the safe set."""
    if spec.safe_set.contains(x) and not spec.target_set.contains(x):
        return spec.system.step(x, theta)
    return np.asarray(x, dtype=float)


def switched_step_many(states: np.ndarray, thetas: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    states = np.asarray(states, float)
    moving = spec.in_safe(states)
    if spec.kind is ProblemKind.REACH_AVOID:
        moving &= ~spec.in_target(states)
    out = states.copy()
    if moving.any():
        out[moving] = spec.system.step_many(states[moving], np.asarray(thetas)[moving])
    return out


def validate_problem(problem: ProblemSpec, tol: float = 1e-7) -> None:
    """Check that the extended-domain box encloses the one-step reachable set
    of X (and X itself), and for reach-avoid that sampled target points lie
    in X. Raises :class:`ProblemError` on failure."""
    ext_box = problem.extended_domain.box
    x_box = set_bounding_box(problem.safe_set, ext_box)
    if x_box is None:
        raise ProblemError("safe set has no points inside the extended-domain box")
    reach = enclose_one_step_reachable(problem.system, x_box)
    slack = tol * max(1.0, float(np.max(np.abs(np.concatenate([ext_box.lo, ext_box.hi])))))
    if not ext_box.contains_box(reach, tol=slack):
        raise ProblemError(
            f"extended-domain box {ext_box.to_dict()} does not contain the one-step "
            f"reachable enclosure {reach.to_dict()}")
    if problem.extended_domain.set.conjuncts:
        # the enclosure must also satisfy the extended-domain conjuncts
        for q in problem.extended_domain.set.oriented():
            lo, _ = interval_enclosure(q, reach.reorder(problem.state_vars))
            if lo < -slack:
                _check_conjunct_on_box(q, reach, slack)
    if problem.kind is ProblemKind.REACH_AVOID:
        t_box = set_bounding_box(problem.target_set, ext_box)
        if t_box is None:
            return
        rng = np.random.default_rng(0)
        pts = t_box.sample(rng, 1000)
        pts = pts[problem.target_set.contains_many(pts)]
        if pts.size and not problem.safe_set.contains_many(pts).all():
            raise ProblemError("target set is not contained in the safe set")


def _check_conjunct_on_box(q: Polynomial, box: Box, slack: float, budget: int = 20000) -> None:
    stack = [box]
    n = 0
    while stack:
        cell = stack.pop()
        n += 1
        bf = bernstein_form(q, cell)
        if bf.min() >= -slack:
            continue
        if q.evaluate(cell.center) < -slack or n > budget:
            raise ProblemError(
                "one-step reachable enclosure leaves the extended-domain set "
                f"near {cell.center.tolist()}")
        stack.extend(cell.bisect(int(np.argmax(cell.widths))))


# ----------------------------------------------------------------------------
# Problem files

def _parse_number(value) -> float:
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


def _parse_conjunct(item, variables: Sequence[str]) -> Conjunct:
    if isinstance(item, str):
        text = item.strip()
        for op, rel in (("<=", Relation.LE), (">=", Relation.GE)):
            if op in text:
                lhs, rhs = text.split(op, 1)
                poly = parse_polynomial(lhs, variables) - parse_polynomial(rhs, variables)
                return Conjunct(poly, rel)
        raise ProblemError(f"conjunct {item!r} needs '<=' or '>='")
    rel = item.get("rel", item.get("relation", "<=0")).replace(" ", "")
    relation = {"<=0": Relation.LE, "<=": Relation.LE, ">=0": Relation.GE, ">=": Relation.GE}.get(rel)
    if relation is None:
        raise ProblemError(f"unknown relation {rel!r}")
    return Conjunct(parse_polynomial(item["poly"], variables), relation)


def parse_set(data, variables: Sequence[str]) -> SemialgebraicSet:
    if isinstance(data, Mapping):
        data = data.get("conjuncts", [])
    return SemialgebraicSet(tuple(variables), tuple(_parse_conjunct(c, variables) for c in data))


def _at(path: str, fn, *args):
    try:
        return fn(*args)
    except ProblemError as exc:
        raise ProblemError(f"{path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemError(f"{path}: {exc}") from exc


def problem_from_dict(data: Mapping, validate: bool = True) -> ProblemSpec:
    """Build a problem from its JSON form (see README for the schema)."""
    for key in ("state_vars", "dynamics", "disturbance", "safe_set", "extended_domain",
                "x0", "horizon"):
        if key not in data:
            raise ProblemError(f"missing field '{key}'")
    state_vars = tuple(data["state_vars"])
    dist_vars = tuple(data.get("disturbance_vars", ()))
    all_vars = state_vars + dist_vars
    dynamics = tuple(
        _at(f"dynamics[{i}]", parse_polynomial, text, all_vars)
        for i, text in enumerate(data["dynamics"]))
    dist_data = data["disturbance"]
    if "uniform_box" in dist_data:
        bounds = dist_data["uniform_box"]
        disturbance = _at("disturbance.uniform_box", lambda: UniformBox(Box(
            dist_vars, [_parse_number(bounds[v][0]) for v in dist_vars],
            [_parse_number(bounds[v][1]) for v in dist_vars])))
    elif "finite" in dist_data:
        items = dist_data["finite"]

        def build():
            pts, probs = [], []
            for item in items:
                pt = item["point"]
                if isinstance(pt, Mapping):
                    pt = [pt[v] for v in dist_vars]
                pts.append([_parse_number(x) for x in pt])
                probs.append(_parse_number(item.get("prob", item.get("probability"))))
            return FiniteSupport(dist_vars, pts, probs)
        disturbance = _at("disturbance.finite", build)
    else:
        raise ProblemError("disturbance: expected 'uniform_box' or 'finite'")
    system = _at("system", SystemSpec, state_vars, dist_vars, dynamics, disturbance)
    safe = _at("safe_set", parse_set, data["safe_set"], state_vars)
    target = None
    if data.get("target_set") is not None:
        target = _at("target_set", parse_set, data["target_set"], state_vars)
    ext = data["extended_domain"]
    ext_set = _at("extended_domain.conjuncts", parse_set, ext.get("conjuncts", []), state_vars)
    box_data = ext["box"]

    def build_box():
        if isinstance(box_data, Mapping):
            return Box(state_vars, [_parse_number(box_data[v][0]) for v in state_vars],
                       [_parse_number(box_data[v][1]) for v in state_vars])
        return Box(state_vars, [_parse_number(b[0]) for b in box_data],
                   [_parse_number(b[1]) for b in box_data])
    box = _at("extended_domain.box", build_box)
    x0 = data["x0"]
    if isinstance(x0, Mapping):
        x0 = [x0[v] for v in state_vars]
    kind = _at("kind", ProblemKind, data.get("kind", "safety"))
    problem = _at("problem", ProblemSpec, system, kind, safe, ExtendedDomain(ext_set, box),
                  tuple(_parse_number(v) for v in x0), data["horizon"], target,
                  data.get("name", ""))
    if validate:
        validate_problem(problem)
    return problem


def problem_to_dict(problem: ProblemSpec) -> dict:
    def set_json(s: SemialgebraicSet):
        return [str(c) for c in s.conjuncts]
    dist = problem.system.disturbance
    if isinstance(dist, UniformBox):
        dist_json = {"uniform_box": dist.box.to_dict()}
    else:
        dist_json = {"finite": [{"point": list(p), "prob": q}
                                for p, q in zip(dist.points, dist.probabilities)]}
    out = {
        "name": problem.name,
        "kind": problem.kind.value,
        "state_vars": list(problem.state_vars),
        "disturbance_vars": list(problem.system.disturbance_vars),
        "dynamics": [str(f.with_variables(problem.system.all_vars)) for f in problem.system.dynamics],
        "disturbance": dist_json,
        "safe_set": set_json(problem.safe_set),
        "extended_domain": {"conjuncts": set_json(problem.extended_domain.set),
                            "box": problem.extended_domain.box.to_dict()},
        "x0": list(problem.x0),
        "horizon": problem.horizon,
    }
    if problem.target_set is not None:
        out["target_set"] = set_json(problem.target_set)
    return out
