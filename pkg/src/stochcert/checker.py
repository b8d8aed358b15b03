"""Verification of certificate conditions by Bernstein branch-and-bound.

Each condition line of a certificate becomes a residual polynomial that must
be nonnegative on a semialgebraic region. A residual is checked by bisecting
the extended-domain box: cells provably outside the region are dropped,
cells whose Bernstein lower bound clears ``-VERIFY_MARGIN`` are closed, and
cells straddling a region boundary may also be closed with a nonnegative
multiplier of the straddling conjunct (``p - λq >= 0`` and ``q >= 0`` give
``p >= 0``).
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass

import numpy as np

from .bounds import BoundReport, Certificate, CertKind, evaluate_bound
from .model import ProblemKind, ProblemSpec, SemialgebraicSet, one_step_expectation
from .polynomial import Box, Polynomial, apply_axis_matrices, bernstein_matrices

# Bernstein lower bounds down to -VERIFY_MARGIN count as nonnegative.
VERIFY_MARGIN = 1e-9
# A region point with residual below -FALSIFY_THRESHOLD is a counterexample.
FALSIFY_THRESHOLD = 1e-7
SPOT_CHECK_TOL = 1e-6
DEFAULT_BUDGET = 100_000


class Verdict(enum.Enum):
    VERIFIED = "verified"
    FALSIFIED = "falsified"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Residual:
    """``poly >= 0`` required on ``region`` (or, with ``point``, at one point,
    strictly when ``strict``)."""

    name: str
    poly: Polynomial
    region: SemialgebraicSet | None
    point: tuple[float, ...] | None = None
    strict: bool = False


@dataclass
class NonnegResult:
    verdict: Verdict
    cells: int
    witness: tuple[float, ...] | None = None
    residual: float | None = None
    lower_enclosure: float | None = None
    note: str = ""

    def to_json(self) -> dict:
        return {"verdict": self.verdict.value, "cells": self.cells,
                "witness": None if self.witness is None else list(self.witness),
                "residual": self.residual, "lower_enclosure": self.lower_enclosure,
                "note": self.note}


@dataclass
class ConstraintResult:
    name: str
    region: str
    result: NonnegResult

    def to_json(self) -> dict:
        return {"name": self.name, "region": self.region, **self.result.to_json()}


@dataclass
class CheckReport:
    kind: CertKind
    constraints: list[ConstraintResult]
    margin: float = VERIFY_MARGIN
    bound: BoundReport | None = None

    @property
    def verdict(self) -> Verdict:
        verdicts = [c.result.verdict for c in self.constraints]
        if all(v is Verdict.VERIFIED for v in verdicts):
            return Verdict.VERIFIED
        if any(v is Verdict.FALSIFIED for v in verdicts):
            return Verdict.FALSIFIED
        return Verdict.UNKNOWN

    @property
    def cells(self) -> int:
        return sum(c.result.cells for c in self.constraints)

    def to_json(self) -> dict:
        out = {"kind": self.kind.value, "verdict": self.verdict.value,
               "verification_margin": self.margin, "cells_explored": self.cells,
               "constraints": [c.to_json() for c in self.constraints]}
        if self.bound is not None:
            out["bound"] = self.bound.to_json()
        return out


# ----------------------------------------------------------------------------
# Residual construction

def _expected_kind(kind: CertKind) -> ProblemKind:
    return ProblemKind.SAFETY if kind.is_safety else ProblemKind.REACH_AVOID


def residuals_for(cert: Certificate, problem: ProblemSpec) -> list[Residual]:
    """One residual per condition of the certificate's kind.

    Set differences are replaced by their closures; a difference with a
    multi-conjunct subtrahend yields one residual per piece.
    """
    kind = cert.kind
    if _expected_kind(kind) is not problem.kind:
        raise ValueError(f"{kind.value} certificate does not fit a {problem.kind.value} problem")
    sv = problem.state_vars
    v = cert.v.with_variables(sv) if set(cert.v.used_variables()) <= set(sv) else cert.v
    extra = set(v.used_variables()) - set(sv)
    if extra:
        raise ValueError(f"certificate mentions non-state variables {sorted(extra)}")
    a, b = cert.alpha, cert.beta
    ev = one_step_expectation(v, problem.system)
    X = problem.safe_set
    ext = problem.extended_domain.set
    out: list[Residual] = []

    def add(name, poly, regions):
        if isinstance(regions, SemialgebraicSet):
            regions = [regions]
        for i, r in enumerate(regions):
            suffix = f" [piece {i + 1}]" if len(regions) > 1 else ""
            out.append(Residual(name + suffix, poly, r))

    one = Polynomial.constant(1.0, sv)
    if kind in (CertKind.SAFETY_UPPER_T1, CertKind.SAFETY_UPPER_KUSHNER):
        if kind is CertKind.SAFETY_UPPER_KUSHNER:
            out.append(Residual("v(x0) < 1", one - v, None, problem.x0, strict=True))
        add("E[v(f)] <= v/α + β on X", v / a + b - ev, X)
        add("v >= 1 on X~ \\ X", v - 1.0, problem.extended_minus_safe())
        add("v >= 0 on X", v, X)
    elif kind is CertKind.SAFETY_LOWER:
        add("β + αv <= E[v(f)] on X", ev - a * v - b, X)
        if a != 1:
            add("v <= 1 on X~ \\ X", one - v, problem.extended_minus_safe())
        add("v <= M on X~", cert.M - v, ext)
    elif kind is CertKind.RA_UPPER_T3:
        add("E[v(f)] <= v/α + β on X \\ Xr", v / a + b - ev, problem.safe_minus_target())
        add("v >= 1 on Xr", v - 1.0, problem.target_set)
        add("v >= 0 on X^ \\ Xr", v, problem.extended_minus_target())
    elif kind is CertKind.RA_UPPER_KUSHNER:
        out.append(Residual("v(x0) < 1", one - v, None, problem.x0, strict=True))
        add("E[v(f)] <= v/α + β on X \\ Xr", v / a + b - ev, problem.safe_minus_target())
        add("v >= 1 on Xr", v - 1.0, problem.target_set)
        add("v >= 1 on X^ \\ X", v - 1.0, problem.extended_minus_safe())
        add("v >= 0 on X", v, X)
    elif kind is CertKind.RA_LOWER:
        add("β + αv <= E[v(f)] on X \\ Xr", ev - a * v - b, problem.safe_minus_target())
        add("v <= 1 on Xr", one - v, problem.target_set)
        add("(α-1)v <= -β on X^ \\ X", -b - (a - 1) * v, problem.extended_minus_safe())
        add("v <= M on X^", cert.M - v, ext)
    return out


# ----------------------------------------------------------------------------
# Bernstein machinery on cells

class _CellBernstein:
    """Bernstein coefficients of a fixed list of polynomials on arbitrary cells."""

    def __init__(self, polys: list[Polynomial], variables: tuple[str, ...],
                 degree: tuple[int, ...] | None = None):
        self.variables = variables
        polys = [p.with_variables(variables) for p in polys]
        if degree is None:
            degree = tuple(max((p.degree_in(v) for p in polys), default=0) for v in variables)
        self.degree = degree
        self.dense = np.stack([p.to_dense(variables, degree) for p in polys])

    def on(self, cell: Box) -> np.ndarray:
        """Array of shape (n_polys, n_coefficients)."""
        coeffs = apply_axis_matrices(self.dense, bernstein_matrices(cell, self.degree),
                                     batch_dims=1)
        return coeffs.reshape(coeffs.shape[0], -1)


def _multiplier_closes(bp: np.ndarray, bq: np.ndarray, tol: float) -> float | None:
    """A λ >= 0 with ``bp - λ bq >= -tol`` coefficient-wise, or None."""
    lo, hi = 0.0, np.inf
    pos = bq > 0
    neg = bq < 0
    zero = ~(pos | neg)
    if np.any(bp[zero] < -tol):
        return None
    if pos.any():
        hi = min(hi, float(np.min((bp[pos] + tol) / bq[pos])))
    if neg.any():
        lo = max(lo, float(np.max((bp[neg] + tol) / bq[neg])))
    if lo > hi:
        return None
    lam = lo if not np.isfinite(hi) else 0.5 * (lo + hi)
    if np.min(bp - lam * bq) < -tol:
        lam = lo
        if np.min(bp - lam * bq) < -tol:
            return None
    return lam


def check_nonnegativity(p: Polynomial, region: SemialgebraicSet | None, box: Box,
                        budget: int = DEFAULT_BUDGET, spot_check: int = 10_000,
                        seed: int = 0) -> NonnegResult:
    """Decide ``p >= 0`` on ``region ∩ box`` by branch-and-bound."""
    variables = box.variables
    p = p.with_variables(variables)
    conj = [] if region is None else [q.with_variables(variables) for q in region.oriented()]
    ref = np.maximum(box.widths, 1e-300)
    if p.is_zero():
        return NonnegResult(Verdict.VERIFIED, 1, lower_enclosure=0.0, note="zero residual")
    # common degree so p - λq can be formed coefficient-wise
    degree = tuple(max([p.degree_in(v)] + [q.degree_in(v) for q in conj]) for v in variables)
    bern = _CellBernstein([p] + conj, variables, degree)

    def in_region(x) -> bool:
        return all(q.evaluate(x) >= 0 for q in conj)

    stack = [box]
    cells = 0
    worst_open = np.inf
    while stack:
        cell = stack.pop()
        cells += 1
        if cells > budget:
            open_lows = [worst_open] + [float(bern.on(c)[0].min()) for c in stack[:1000]]
            return NonnegResult(Verdict.UNKNOWN, cells - 1, lower_enclosure=min(open_lows),
                                note=f"budget of {budget} cells exhausted; {len(stack) + 1} open")
        coeffs = bern.on(cell)
        bp, bqs = coeffs[0], coeffs[1:]
        if any(bq.max() < 0 for bq in bqs):
            continue  # cell misses the region
        if bp.min() >= -VERIFY_MARGIN:
            continue
        straddling = [bq for bq in bqs if bq.min() < 0]
        if any(_multiplier_closes(bp, bq, VERIFY_MARGIN) is not None for bq in straddling):
            continue
        # look for a counterexample at a few cell points
        idx = np.unravel_index(int(np.argmin(bp)), tuple(d + 1 for d in degree))
        lo, hi = np.asarray(cell.lo), np.asarray(cell.hi)
        greville = lo + (hi - lo) * np.array([i / d if d else 0.5 for i, d in zip(idx, degree)])
        for x in (greville, cell.center):
            val = p.evaluate(x)
            if val < -FALSIFY_THRESHOLD and in_region(x):
                return NonnegResult(Verdict.FALSIFIED, cells, tuple(float(t) for t in x), val,
                                    float(bp.min()))
        worst_open = min(worst_open, float(bp.min()))
        axis = int(np.argmax(cell.widths / ref))
        left, right = cell.bisect(axis)
        stack.append(right)
        stack.append(left)

    if spot_check:
        rng = np.random.default_rng(seed)
        pts = box.sample(rng, spot_check)
        if conj:
            mask = np.all([q.evaluate_many(pts) >= 0 for q in conj], axis=0)
            pts = pts[mask]
        if len(pts):
            vals = p.evaluate_many(pts)
            i = int(np.argmin(vals))
            if vals[i] < -SPOT_CHECK_TOL:
                return NonnegResult(Verdict.FALSIFIED, cells, tuple(map(float, pts[i])),
                                    float(vals[i]), note="found by spot check after branch-and-bound")
    return NonnegResult(Verdict.VERIFIED, cells, lower_enclosure=-VERIFY_MARGIN)


def certified_sup(v: Polynomial, box: Box, tolerance: float = 1e-6,
                  region: SemialgebraicSet | None = None, budget: int = 200_000) -> float:
    """An upper bound M on sup of ``v`` over ``region ∩ box`` with
    ``M <= sup + tolerance`` whenever the search converges within budget."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    variables = box.variables
    v = v.with_variables(variables)
    if v.is_constant():
        return v.constant_term()
    conj = [] if region is None else [q.with_variables(variables) for q in region.oriented()]
    bern = _CellBernstein([v] + conj, variables)
    ref = np.maximum(box.widths, 1e-300)

    def in_region(x) -> bool:
        return all(q.evaluate(x) >= 0 for q in conj)

    best = -np.inf
    for x in list(box.vertices()) + [box.center]:
        if in_region(x):
            best = max(best, v.evaluate(x))
    coeffs = bern.on(box)
    heap = [(-float(coeffs[0].max()), 0, box)]
    counter = 0
    cells = 0
    while heap:
        neg_up, _, cell = heapq.heappop(heap)
        upper = -neg_up
        if upper <= best + tolerance or cells >= budget:
            return max(upper, best)
        cells += 1
        for child in cell.bisect(int(np.argmax(cell.widths / ref))):
            c = bern.on(child)
            if any(bq.max() < 0 for bq in c[1:]):
                continue
            for x in (child.center, *child.vertices()):
                if in_region(x):
                    best = max(best, v.evaluate(x))
            counter += 1
            heapq.heappush(heap, (-float(c[0].max()), counter, child))
    return best


# ----------------------------------------------------------------------------
# Certificates

def check_certificate(cert: Certificate, problem: ProblemSpec,
                      budget: int = DEFAULT_BUDGET) -> CheckReport:
    """Check every condition of ``cert`` on ``problem``; when all hold,
    attach the implied probability bound."""
    box = problem.extended_domain.box
    results = []
    for res in residuals_for(cert, problem):
        if res.point is not None:
            val = res.poly.evaluate(res.point)
            ok = val > 0 if res.strict else val >= -VERIFY_MARGIN
            verdict = Verdict.VERIFIED if ok else Verdict.FALSIFIED
            r = NonnegResult(verdict, 0, None if ok else tuple(res.point), val)
            results.append(ConstraintResult(res.name, f"point {list(res.point)}", r))
            continue
        r = check_nonnegativity(res.poly, res.region, box, budget=budget)
        results.append(ConstraintResult(res.name, str(res.region), r))
    report = CheckReport(cert.kind, results)
    if report.verdict is Verdict.VERIFIED:
        v0 = cert.v.evaluate(dict(zip(problem.state_vars, problem.x0)))
        report.bound = evaluate_bound(cert.kind, v0, cert.alpha, cert.beta,
                                      problem.horizon, cert.M)
    return report
