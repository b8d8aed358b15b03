"""Certificate synthesis by linear programming over Bernstein coefficients.

Once α and β are fixed, every certificate condition is affine in the
coefficients of ``v``. Requiring nonnegative Bernstein coefficients of each
residual on cells that cover its region turns the conditions into linear
inequalities (an inner approximation of the true feasible set). Cells that
straddle a region boundary get a nonnegative multiplier per straddling
conjunct, so a residual only has to be nonnegative where the conjunct holds.

Every LP optimum is re-checked by :func:`stochcert.checker.check_certificate`
before it is returned.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import (BoundReport, Certificate, CertificateParamError, CertKind,
                     validate_certificate_params)
from .checker import CheckReport, Verdict, certified_sup, check_certificate
from .lp import LPResult, LPStatus, solve_lp
from .model import ProblemKind, ProblemSpec, SemialgebraicSet, one_step_expectation
from .polynomial import (Box, Polynomial, apply_axis_matrices, bernstein_matrices,
                         monomials_up_to)

FREE = None  # marker for "β is an LP variable"
KUSHNER_X0_MARGIN = 1e-6


class SynthesisError(RuntimeError):
    pass


class Infeasible(SynthesisError):
    """No certificate exists at this degree / subdivision depth."""


class AuditFailed(SynthesisError):
    """The LP produced a candidate that the checker did not verify."""

    def __init__(self, message: str, report: CheckReport | None = None):
        super().__init__(message)
        self.report = report


class AllInfeasible(SynthesisError, ValueError):
    """A sweep found no audited certificate at any grid point (an empty grid
    included)."""


@dataclass(frozen=True)
class SynthesisOptions:
    degree: int = 2
    depth: int = 4
    boundary_depth: int = 4
    elevation: int = 2
    alphas: tuple[float, ...] = (1.0,)
    betas: tuple[float | None, ...] = (FREE,)
    degrees: tuple[int, ...] = ()
    lp_tolerance: float = 1e-9
    margins: tuple[float, ...] = (0.0, 1e-7, 1e-5)
    lp_method: str = "simplex"
    budget: int = 100_000

    def __post_init__(self):
        if self.degree < 0 or any(d < 0 for d in self.degrees):
            raise ValueError("degrees must be nonnegative")
        if self.depth < 0 or self.boundary_depth < 0 or self.elevation < 0:
            raise ValueError("depth, boundary_depth and elevation must be nonnegative")
        if not self.alphas or not self.betas:
            raise AllInfeasible("empty α or β grid: nothing to synthesize")

    def degree_grid(self) -> tuple[int, ...]:
        return self.degrees or (self.degree,)


@dataclass
class LPModel:
    """``minimize objective @ x  s.t.  G @ x >= h`` over named variables."""

    variables: list[str]
    G: np.ndarray
    h: np.ndarray
    objective: np.ndarray
    row_labels: list[str]
    basis: list[Polynomial]
    state_vars: tuple[str, ...]
    kind: CertKind
    alpha: float
    beta: float | None
    objective_offset: float = 0.0

    @property
    def n_rows(self) -> int:
        return self.G.shape[0]

    def index(self, name: str) -> int:
        return self.variables.index(name)

    def solve(self, method: str = "simplex", tol: float = 1e-9) -> LPResult:
        return solve_lp(self.objective, self.G, self.h, method=method, tol=tol)

    def polynomial(self, x: np.ndarray) -> Polynomial:
        v = Polynomial.zero(self.state_vars)
        for xi, phi in zip(x, self.basis):
            v = v + phi * float(xi)
        return v

    def value(self, x: np.ndarray, name: str) -> float:
        return float(x[self.index(name)])

    def stats(self) -> dict:
        return {"variables": len(self.variables), "rows": self.n_rows}


@dataclass
class SynthesisResult:
    certificate: Certificate
    bound: BoundReport
    check: CheckReport
    degree: int
    lp: dict
    elapsed: float

    def to_json(self) -> dict:
        return {"certificate": self.certificate.to_json(), "bound": self.bound.to_json(),
                "degree": self.degree, "lp": self.lp, "check": self.check.to_json()}


# ----------------------------------------------------------------------------
# Constraint templates

def chebyshev_basis(box: Box, degree: int) -> list[Polynomial]:
    """Products of Chebyshev polynomials in the box-normalized coordinates,
    one per monomial of total degree ``<= degree``. Much better conditioned
    than raw monomials at high degree."""
    sv = box.variables
    cheb = []
    for name, lo, hi in zip(sv, box.lo, box.hi):
        half = (hi - lo) / 2 or 1.0
        y = (Polynomial.variable(name, sv) - (hi + lo) / 2) / half
        ts = [Polynomial.constant(1.0, sv), y]
        while len(ts) <= degree:
            ts.append(y * ts[-1] * 2.0 - ts[-2])
        cheb.append(ts)
    out = []
    for e in monomials_up_to(sv, degree):
        phi = Polynomial.constant(1.0, sv)
        for ts, k in zip(cheb, e):
            phi = phi * ts[k]
        out.append(phi)
    return out



@dataclass
class _Template:
    name: str
    regions: list[SemialgebraicSet]
    comps: dict[str, Polynomial]      # LP variable name -> polynomial coefficient
    const: Polynomial


def _templates(problem: ProblemSpec, kind: CertKind, alpha: float, beta: float | None,
               basis: list[Polynomial]) -> list[_Template]:
    sv = problem.state_vars
    monos = basis
    expect = [one_step_expectation(m, problem.system) for m in monos]
    cnames = [f"c{i}" for i in range(len(basis))]
    zero = Polynomial.zero(sv)
    one = Polynomial.constant(1.0, sv)

    def lin(polys, scale=1.0):
        return {n: p * scale for n, p in zip(cnames, polys)}

    def beta_part(sign: float):
        if beta is FREE:
            return {"beta": one * sign}, zero
        return {}, one * (sign * beta)

    X = [problem.safe_set]
    out: list[_Template] = []
    if kind in (CertKind.SAFETY_UPPER_T1, CertKind.SAFETY_UPPER_KUSHNER,
                CertKind.RA_UPPER_T3, CertKind.RA_UPPER_KUSHNER):
        dyn_region = X if kind.is_safety else problem.safe_minus_target()
        comps = {n: m / alpha - e for n, m, e in zip(cnames, monos, expect)}
        extra, const = beta_part(+1.0)
        comps.update(extra)
        out.append(_Template("decrease", dyn_region, comps, const))
        if kind.is_safety:
            out.append(_Template("v>=1 outside X", problem.extended_minus_safe(), lin(monos), -one))
            out.append(_Template("v>=0 on X", X, lin(monos), zero))
        elif kind is CertKind.RA_UPPER_T3:
            out.append(_Template("v>=1 on Xr", [problem.target_set], lin(monos), -one))
            out.append(_Template("v>=0 off Xr", problem.extended_minus_target(), lin(monos), zero))
        else:
            out.append(_Template("v>=1 on Xr", [problem.target_set], lin(monos), -one))
            out.append(_Template("v>=1 outside X", problem.extended_minus_safe(), lin(monos), -one))
            out.append(_Template("v>=0 on X", X, lin(monos), zero))
    else:
        dyn_region = X if kind.is_safety else problem.safe_minus_target()
        comps = {n: e - alpha * m for n, m, e in zip(cnames, monos, expect)}
        extra, const = beta_part(-1.0)
        comps.update(extra)
        out.append(_Template("growth", dyn_region, comps, const))
        if kind is CertKind.SAFETY_LOWER:
            if alpha != 1:
                out.append(_Template("v<=1 outside X", problem.extended_minus_safe(),
                                     lin(monos, -1.0), one))
        else:
            out.append(_Template("v<=1 on Xr", [problem.target_set], lin(monos, -1.0), one))
            comps = lin(monos, -(alpha - 1))
            extra, const = beta_part(-1.0)
            comps.update(extra)
            out.append(_Template("(α-1)v<=-β outside X", problem.extended_minus_safe(), comps, const))
        comps = lin(monos, -1.0)
        comps["M"] = one
        out.append(_Template("v<=M", [problem.extended_domain.set], comps, zero))
    return out


# ----------------------------------------------------------------------------
# Region coverage

def _conjunct_ranges(conj: list[Polynomial], cell: Box) -> list[tuple[float, float]]:
    out = []
    for q in conj:
        deg = tuple(q.degree_in(v) for v in cell.variables)
        coeffs = apply_axis_matrices(q.to_dense(cell.variables, deg), bernstein_matrices(cell, deg))
        out.append((float(coeffs.min()), float(coeffs.max())))
    return out


def cover_region(region: SemialgebraicSet, box: Box, depth: int,
                 boundary_depth: int) -> list[tuple[Box, list[int]]]:
    """Cells covering ``region ∩ box``: a uniform grid with ``2**depth``
    intervals per axis, cells provably outside dropped, and cells on the
    region boundary refined ``boundary_depth`` more levels.

    Returns ``(cell, straddling conjunct indices)`` pairs.
    """
    conj = [q.with_variables(box.variables) for q in region.oriented()]

    def classify(cell):
        straddle = []
        for i, (lo, hi) in enumerate(_conjunct_ranges(conj, cell)):
            if hi < 0:
                return None
            if lo < 0:
                straddle.append(i)
        return straddle

    cells = [box]
    for _ in range(depth):
        cells = [c for cell in cells for c in cell.split_all()]
    out = []
    frontier = []
    for cell in cells:
        st = classify(cell)
        if st is None:
            continue
        (frontier if st else out).append((cell, st))
    for level in range(boundary_depth):
        nxt = []
        for cell, _ in frontier:
            for child in cell.split_all():
                st = classify(child)
                if st is None:
                    continue
                (nxt if st else out).append((child, st))
        frontier = nxt
    out.extend(frontier)
    out.sort(key=lambda item: (item[0].lo, item[0].hi))
    return out


# ----------------------------------------------------------------------------
# LP construction

def _objective(problem: ProblemSpec, kind: CertKind, alpha: float, beta: float | None,
               var_index: dict[str, int], basis, n_vars: int) -> np.ndarray:
    N = problem.horizon
    x0 = problem.x0
    mono_at_x0 = [phi.evaluate(x0) for phi in basis]
    c = np.zeros(n_vars)
    if not kind.is_lower:
        # for fixed β every upper bound increases with v(x0); with β free
        # the bound is affine in (v(x0), β) on the range of _beta_free_range
        w_v0 = 1.0 if alpha == 1 or beta is not FREE else alpha ** (-N)
        for i, m in enumerate(mono_at_x0):
            c[var_index[f"c{i}"]] = w_v0 * m
        if beta is FREE:
            c[var_index["beta"]] = N if alpha == 1 else (1 - alpha ** (-N)) * alpha / (alpha - 1)
    else:
        w_v0 = 1.0 if alpha == 1 else alpha ** (N + 1)
        for i, m in enumerate(mono_at_x0):
            c[var_index[f"c{i}"]] = -w_v0 * m
        c[var_index["M"]] = 1.0
    return c


def _beta_free_range(kind: CertKind, alpha: float) -> tuple[float, float]:
    """β range on which the upper bound is affine in ``(v(x0), β)``."""
    if kind.is_lower:
        raise CertificateParamError(
            f"β cannot be an LP variable for {kind.value}; give it a β grid")
    if kind is CertKind.RA_UPPER_T3:
        return 0.0, 1.0
    if kind is CertKind.SAFETY_UPPER_T1 or alpha > 1:
        return (alpha - 1) / alpha, 1.0
    return 0.0, 1.0


def build_lp(problem: ProblemSpec, kind: CertKind, alpha: float, beta: float | None,
             options: SynthesisOptions, margin: float = 0.0) -> LPModel:
    """Linearize the conditions of ``kind`` for polynomials of degree
    ``options.degree``; ``beta=None`` makes β an LP variable."""
    kind = CertKind(kind)
    expected = ProblemKind.SAFETY if kind.is_safety else ProblemKind.REACH_AVOID
    if problem.kind is not expected:
        raise ValueError(f"{kind.value} does not fit a {problem.kind.value} problem")
    if beta is FREE:
        lo, hi = _beta_free_range(kind, alpha)
        validate_certificate_params(kind, alpha, lo)
        validate_certificate_params(kind, alpha, hi)
    else:
        validate_certificate_params(kind, alpha, beta)

    sv = problem.state_vars
    box = problem.extended_domain.box
    basis = chebyshev_basis(box, options.degree)
    variables = [f"c{i}" for i in range(len(basis))]
    if beta is FREE:
        variables.append("beta")
    if kind.is_lower:
        variables.append("M")
    var_index = {n: i for i, n in enumerate(variables)}
    n_main = len(variables)

    blocks: list[np.ndarray] = []     # rows over the main variables
    rhs: list[np.ndarray] = []
    labels: list[str] = []
    n_rows = 0
    lam_cols: list[tuple[int, np.ndarray]] = []  # per λ: (row start, column values)

    cover_cache: dict = {}
    for tpl in _templates(problem, kind, alpha, beta, basis):
        names = list(tpl.comps)
        polys = [tpl.comps[n] for n in names] + [tpl.const]
        for r_idx, region in enumerate(tpl.regions):
            conj = [q.with_variables(sv) for q in region.oriented()]
            degree = tuple(max([p.degree_in(v) for p in polys] + [q.degree_in(v) for q in conj])
                           + options.elevation for v in sv)
            dense = np.stack([p.with_variables(sv).to_dense(sv, degree) for p in polys + conj])
            key = (id(region), str(region))
            if key not in cover_cache:
                cover_cache[key] = cover_region(region, box, options.depth, options.boundary_depth)
            for cell, straddle in cover_cache[key]:
                coeffs = apply_axis_matrices(dense, bernstein_matrices(cell, degree), batch_dims=1)
                coeffs = coeffs.reshape(coeffs.shape[0], -1)
                k = coeffs.shape[1]
                block = np.zeros((k, n_main))
                for j, n in enumerate(names):
                    block[:, var_index[n]] = coeffs[j]
                blocks.append(block)
                rhs.append(margin - coeffs[len(names)])
                labels.extend([f"{tpl.name} on {cell.to_dict()}"] * k)
                for s in straddle:
                    lam_cols.append((n_rows, -coeffs[len(names) + 1 + s]))
                n_rows += k

    # side conditions
    extra_rows = []
    extra_rhs = []
    extra_labels = []
    if beta is FREE:
        lo, hi = _beta_free_range(kind, alpha)
        row = np.zeros(n_main)
        row[var_index["beta"]] = 1.0
        extra_rows += [row, -row]
        extra_rhs += [lo, -hi]
        extra_labels += ["beta lower", "beta upper"]
    if kind.is_kushner:
        row = np.zeros(n_main)
        for i, phi in enumerate(basis):
            row[var_index[f"c{i}"]] = -phi.evaluate(problem.x0)
        extra_rows.append(row)
        extra_rhs.append(-1.0 + KUSHNER_X0_MARGIN)
        extra_labels.append("v(x0) < 1")

    n_lam = len(lam_cols)
    total_rows = n_rows + len(extra_rows) + n_lam
    G = np.zeros((total_rows, n_main + n_lam))
    h = np.zeros(total_rows)
    if blocks:
        G[:n_rows, :n_main] = np.vstack(blocks)
        h[:n_rows] = np.concatenate(rhs)
    for j, (start, vals) in enumerate(lam_cols):
        G[start:start + len(vals), n_main + j] = vals
    r = n_rows
    for row, val in zip(extra_rows, extra_rhs):
        G[r, :n_main] = row
        h[r] = val
        r += 1
    for j in range(n_lam):
        G[r, n_main + j] = 1.0
        r += 1
    labels = labels + extra_labels + [f"lambda{j} >= 0" for j in range(n_lam)]
    variables = variables + [f"lambda{j}" for j in range(n_lam)]
    c = np.zeros(n_main + n_lam)
    c[:n_main] = _objective(problem, kind, alpha, beta, var_index, basis, n_main)
    return LPModel(variables, G, h, c, labels, basis, sv, kind, alpha, beta)


# ----------------------------------------------------------------------------
# Synthesis

def synthesize(problem: ProblemSpec, kind: CertKind, alpha: float, beta: float | None,
               options: SynthesisOptions = SynthesisOptions()) -> SynthesisResult:
    """Solve the LP for one (α, β, degree) and return an audited certificate.

    Raises :class:`Infeasible` if the LP has no solution and
    :class:`AuditFailed` if no LP solution passes the checker.
    """
    kind = CertKind(kind)
    t0 = time.perf_counter()
    last_report = None
    last_error = ""
    box = problem.extended_domain.box
    for margin in options.margins:
        model = build_lp(problem, kind, alpha, beta, options, margin=margin)
        res = model.solve(method=options.lp_method, tol=options.lp_tolerance)
        stats = {**model.stats(), **res.to_json(), "margin": margin}
        if res.status is LPStatus.INFEASIBLE:
            if margin == options.margins[0]:
                raise Infeasible(f"LP infeasible for {kind.value}, α={alpha}, β={beta}, "
                                 f"degree {options.degree}")
            break
        if res.status is not LPStatus.OPTIMAL:
            last_error = f"LP status {res.status.value}"
            continue
        v = model.polynomial(res.x)
        b = model.value(res.x, "beta") if beta is FREE else beta
        if beta is FREE:
            lo, hi = _beta_free_range(kind, alpha)
            b = min(hi, max(lo, b))
        M = None
        if kind.is_lower:
            m_lp = model.value(res.x, "M")
            M = certified_sup(v, box, tolerance=1e-9 * max(1.0, abs(m_lp)),
                              region=problem.extended_domain.set)
            v0 = v.evaluate(problem.x0)
            M = max(M, v0)
        try:
            cert = Certificate(v, kind, alpha, b, M)
        except CertificateParamError as exc:
            last_error = str(exc)
            continue
        report = check_certificate(cert, problem, budget=options.budget)
        last_report = report
        if report.verdict is Verdict.VERIFIED:
            return SynthesisResult(cert, report.bound, report, options.degree, stats,
                                   time.perf_counter() - t0)
        last_error = f"audit verdict {report.verdict.value}"
    raise AuditFailed(f"no audited certificate for {kind.value}, α={alpha}, β={beta}, "
                      f"degree {options.degree}: {last_error}", last_report)


@dataclass
class SweepResult:
    best: SynthesisResult
    attempts: list[dict] = field(default_factory=list)

    @property
    def certificate(self) -> Certificate:
        return self.best.certificate

    @property
    def bound(self) -> BoundReport:
        return self.best.bound

    def to_json(self) -> dict:
        return {"best": self.best.to_json(), "attempts": self.attempts}


def sweep(problem: ProblemSpec, kind: CertKind,
          options: SynthesisOptions = SynthesisOptions()) -> SweepResult:
    """Synthesize over the α × β × degree grid and keep the best audited bound.

    Ties prefer the smaller degree, then α closer to 1.
    """
    kind = CertKind(kind)
    best = None
    best_key = None
    attempts = []
    for alpha in options.alphas:
        for beta in options.betas:
            for degree in options.degree_grid():
                opts = replace(options, degree=degree)
                entry = {"alpha": alpha, "beta": "free" if beta is FREE else beta,
                         "degree": degree}
                try:
                    res = synthesize(problem, kind, alpha, beta, opts)
                except (SynthesisError, CertificateParamError) as exc:
                    entry["status"] = type(exc).__name__
                    entry["message"] = str(exc)
                    attempts.append(entry)
                    continue
                entry.update(status="ok", bound=res.bound.clamped_value, raw=res.bound.raw_value)
                attempts.append(entry)
                score = -res.bound.clamped_value if kind.is_lower else res.bound.clamped_value
                raw = -res.bound.raw_value if kind.is_lower else res.bound.raw_value
                key = (score, degree, abs(alpha - 1), raw)
                if best_key is None or key < best_key:
                    best, best_key = res, key
    if best is None:
        raise AllInfeasible(f"no audited {kind.value} certificate on the grid")
    return SweepResult(best, attempts)
