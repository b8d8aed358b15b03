"""Closed-form probability bounds implied by barrier-like certificates.

Every bound comes in a raw form (possibly outside [0, 1]) and a clamped form.
Parameters are validated per certificate kind before any formula is used;
the ``case_tag`` of a report records which branch fired.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .polynomial import Polynomial


class CertificateParamError(ValueError):
    """Certificate parameters outside the admissible range for their kind."""


class CertKind(enum.Enum):
    SAFETY_UPPER_T1 = "safety-upper-t1"
    SAFETY_UPPER_KUSHNER = "safety-upper-kushner"
    SAFETY_LOWER = "safety-lower"
    RA_UPPER_T3 = "ra-upper-t3"
    RA_UPPER_KUSHNER = "ra-upper-kushner"
    RA_LOWER = "ra-lower"

    @property
    def is_lower(self) -> bool:
        return self in (CertKind.SAFETY_LOWER, CertKind.RA_LOWER)

    @property
    def is_safety(self) -> bool:
        return self in (CertKind.SAFETY_UPPER_T1, CertKind.SAFETY_UPPER_KUSHNER,
                        CertKind.SAFETY_LOWER)

    @property
    def is_kushner(self) -> bool:
        return self in (CertKind.SAFETY_UPPER_KUSHNER, CertKind.RA_UPPER_KUSHNER)

    @classmethod
    def parse(cls, text: str) -> CertKind:
        text = text.strip().lower().replace("_", "-")
        return cls(text)


def gamma_of(alpha: float, beta: float) -> float:
    return beta * alpha - (alpha - 1.0)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def validate_certificate_params(kind: CertKind, alpha: float, beta: float,
                                M: float | None = None) -> str:
    """Return the case tag for ``(kind, alpha, beta)`` or raise
    :class:`CertificateParamError`."""
    kind = CertKind(kind)
    for name, val in (("alpha", alpha), ("beta", beta)):
        if not math.isfinite(val):
            raise CertificateParamError(f"{name} must be finite, got {val}")
    if M is not None and not math.isfinite(M):
        raise CertificateParamError(f"M must be finite, got {M}")
    g = gamma_of(alpha, beta)

    if kind is CertKind.SAFETY_UPPER_T1:
        if not 0 < alpha <= 1:
            raise CertificateParamError(f"α must lie in (0,1], got {alpha}")
        if beta > 1:
            raise CertificateParamError(f"β must be ≤ 1, got {beta}")
        if g < 0:
            return f"α∈(0,1], γ={_fmt(g)}<0"
        if alpha == 1:
            return f"α=1, γ={_fmt(g)}∈[0,1]"
        return f"α∈(0,1), γ={_fmt(g)}∈[0,1]"

    if kind is CertKind.SAFETY_UPPER_KUSHNER:
        if alpha < 1:
            raise CertificateParamError(f"α must be ≥ 1, got {alpha}")
        if not 0 <= beta <= 1:
            raise CertificateParamError(f"β must lie in [0,1], got {beta}")
        if alpha > 1:
            return f"α>1, γ={_fmt(g)}≤0" if g <= 0 else f"α>1, γ={_fmt(g)}>0"
        return f"α=1, γ={_fmt(g)}≥0"

    if kind is CertKind.SAFETY_LOWER:
        if alpha < 1:
            raise CertificateParamError(f"α must be ≥ 1, got {alpha}")
        if alpha == 1 and beta <= 0:
            raise CertificateParamError("β>0 required when α=1")
        if beta <= 1 - alpha:
            raise CertificateParamError(f"β must exceed 1-α={1 - alpha}, got {beta}")
        if alpha == 1:
            return "α=1 (exit is certain in the limit)"
        return "α>1"

    if kind is CertKind.RA_UPPER_T3:
        if not 0 < alpha <= 1:
            raise CertificateParamError(f"α must lie in (0,1], got {alpha}")
        if not 0 <= beta <= 1:
            raise CertificateParamError(f"β must lie in [0,1], got {beta}")
        return "α=1, β∈[0,1]" if alpha == 1 else "α∈(0,1), β∈[0,1]"

    if kind is CertKind.RA_UPPER_KUSHNER:
        if alpha < 1:
            raise CertificateParamError(f"α must be ≥ 1, got {alpha}")
        if not 0 <= beta <= 1:
            raise CertificateParamError(f"β must lie in [0,1], got {beta}")
        if alpha == 1:
            return "α=1"
        ratio = beta * alpha / (alpha - 1)
        return f"α>1, βα/(α-1)={_fmt(ratio)}>1" if ratio > 1 else f"α>1, βα/(α-1)={_fmt(ratio)}≤1"

    if kind is CertKind.RA_LOWER:
        if alpha == 1:
            raise CertificateParamError(
                "α cannot equal 1: β>1-α forces β>0 while (α-1)v ≤ -β forces β ≤ 0")
        if alpha < 1:
            raise CertificateParamError(f"α must be > 1, got {alpha}")
        if beta <= 1 - alpha:
            raise CertificateParamError(f"β must exceed 1-α={1 - alpha}, got {beta}")
        return "α>1"

    raise CertificateParamError(f"unknown kind {kind}")


@dataclass(frozen=True)
class Certificate:
    v: Polynomial
    kind: CertKind
    alpha: float
    beta: float
    M: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", CertKind(self.kind))
        if self.kind.is_lower and self.M is None:
            raise CertificateParamError(f"{self.kind.value} certificates need M")
        if not self.kind.is_lower and self.M is not None:
            raise CertificateParamError(f"{self.kind.value} certificates take no M")
        validate_certificate_params(self.kind, self.alpha, self.beta, self.M)

    def to_json(self) -> dict:
        out = {"kind": self.kind.value, "alpha": self.alpha, "beta": self.beta,
               "variables": list(self.v.variables),
               "v": {",".join(map(str, e)): c for e, c in sorted(self.v.terms.items())}}
        if self.M is not None:
            out["M"] = self.M
        return out

    @classmethod
    def from_json(cls, data, variables: Sequence[str] | None = None) -> Certificate:
        """Inverse of :meth:`to_json`. ``variables`` supplies the state
        variables when the file omits them; numbers may be fractions."""
        names = data.get("variables", variables)
        if names is None:
            raise CertificateParamError("certificate lists no variables")
        v = Polynomial.from_json({"variables": names,
                                  "terms": {k: _number(c) for k, c in data["v"].items()}})
        M = data.get("M")
        return cls(v, CertKind.parse(data["kind"]), _number(data["alpha"]),
                   _number(data["beta"]), None if M is None else _number(M))


def _number(x) -> float:
    return float(Fraction(x)) if isinstance(x, str) else float(x)


@dataclass(frozen=True)
class BoundReport:
    kind: CertKind
    case_tag: str
    gamma: float
    raw_value: float
    clamped_value: float
    v0: float
    alpha: float
    beta: float
    N: int
    M: float | None = None
    note: str = ""

    @property
    def is_lower(self) -> bool:
        return self.kind.is_lower

    def to_json(self) -> dict:
        out = {"kind": self.kind.value, "case_tag": self.case_tag, "gamma": self.gamma,
               "raw": self.raw_value, "clamped": self.clamped_value, "v0": self.v0,
               "alpha": self.alpha, "beta": self.beta, "M": self.M, "N": self.N}
        if self.note:
            out["note"] = self.note
        return out


def _report(kind, tag, raw, v0, alpha, beta, N, M=None, note="") -> BoundReport:
    return BoundReport(kind, tag, gamma_of(alpha, beta), raw, min(1.0, max(0.0, raw)),
                       v0, alpha, beta, N, M, note)


def _check_horizon(N: int) -> int:
    if int(N) != N or N < 0:
        raise CertificateParamError(f"horizon must be a nonnegative integer, got {N}")
    return int(N)


def _geometric(v0: float, alpha: float, beta: float, N: int) -> float:
    a = alpha ** (-N)
    return v0 * a + (1 - a) * alpha * beta / (alpha - 1)


def _power_form(v0: float, beta: float, N: int) -> float:
    return 1 - (1 - v0) * (1 - beta) ** N


def upper_bound_safety_t1(v0: float, alpha: float, beta: float, N: int) -> BoundReport:
    kind = CertKind.SAFETY_UPPER_T1
    tag = validate_certificate_params(kind, alpha, beta)
    N = _check_horizon(N)
    if v0 < 0:
        raise CertificateParamError(f"v(x0) must be ≥ 0, got {v0}")
    g = gamma_of(alpha, beta)
    if g < 0:
        raw = _power_form(v0, beta, N)
    elif alpha == 1:
        raw = v0 + beta * N
    else:
        raw = _geometric(v0, alpha, beta, N)
    return _report(kind, tag, raw, v0, alpha, beta, N)


def upper_bound_safety_kushner(v0: float, alpha: float, beta: float, N: int) -> BoundReport:
    kind = CertKind.SAFETY_UPPER_KUSHNER
    tag = validate_certificate_params(kind, alpha, beta)
    N = _check_horizon(N)
    if not v0 < 1:
        raise CertificateParamError(f"v(x0) < 1 is required, got {v0}")
    g = gamma_of(alpha, beta)
    if alpha > 1 and g <= 0:
        raw = _power_form(v0, beta, N)
    elif alpha > 1:
        raw = _geometric(v0, alpha, beta, N)
    else:
        raw = v0 + beta * N
    return _report(kind, tag, raw, v0, alpha, beta, N)


def _lower_formula(v0: float, M: float, alpha: float, beta: float, N: int) -> float:
    a = alpha ** (N + 1)
    return ((a * v0 - M) * (alpha - 1) + beta * (a - 1)) / ((alpha + beta - 1) * (a - 1))


def lower_bound_safety(v0: float, M: float, alpha: float, beta: float, N: int) -> BoundReport:
    kind = CertKind.SAFETY_LOWER
    tag = validate_certificate_params(kind, alpha, beta, M)
    N = _check_horizon(N)
    if v0 > M:
        raise CertificateParamError(f"v(x0)={v0} exceeds M={M}")
    note = ""
    if alpha == 1:
        raw = 1 + (v0 - M) / (beta * (N + 1))
        note = "α=1 certificate: the system exits the safe set with probability one eventually"
    else:
        raw = _lower_formula(v0, M, alpha, beta, N)
    return _report(kind, tag, raw, v0, alpha, beta, N, M, note)


def upper_bound_ra_t3(v0: float, alpha: float, beta: float, N: int) -> BoundReport:
    kind = CertKind.RA_UPPER_T3
    tag = validate_certificate_params(kind, alpha, beta)
    N = _check_horizon(N)
    raw = v0 + beta * N if alpha == 1 else _geometric(v0, alpha, beta, N)
    return _report(kind, tag, raw, v0, alpha, beta, N)


def upper_bound_ra_kushner(v0: float, alpha: float, beta: float, N: int) -> BoundReport:
    kind = CertKind.RA_UPPER_KUSHNER
    tag = validate_certificate_params(kind, alpha, beta)
    N = _check_horizon(N)
    if not v0 < 1:
        raise CertificateParamError(f"v(x0) < 1 is required, got {v0}")
    if alpha == 1:
        raw = v0 + beta * N
    elif beta * alpha / (alpha - 1) > 1:
        raw = _geometric(v0, alpha, beta, N)
    else:
        raw = _power_form(v0, beta, N)
    return _report(kind, tag, raw, v0, alpha, beta, N)


def lower_bound_ra(v0: float, M: float, alpha: float, beta: float, N: int) -> BoundReport:
    kind = CertKind.RA_LOWER
    tag = validate_certificate_params(kind, alpha, beta, M)
    N = _check_horizon(N)
    if v0 > M:
        raise CertificateParamError(f"v(x0)={v0} exceeds M={M}")
    return _report(kind, tag, _lower_formula(v0, M, alpha, beta, N), v0, alpha, beta, N, M)


def evaluate_bound(kind: CertKind, v0: float, alpha: float, beta: float, N: int,
                   M: float | None = None) -> BoundReport:
    """Dispatch to the closed form matching ``kind``."""
    kind = CertKind(kind)
    if kind is CertKind.SAFETY_UPPER_T1:
        return upper_bound_safety_t1(v0, alpha, beta, N)
    if kind is CertKind.SAFETY_UPPER_KUSHNER:
        return upper_bound_safety_kushner(v0, alpha, beta, N)
    if kind is CertKind.RA_UPPER_T3:
        return upper_bound_ra_t3(v0, alpha, beta, N)
    if kind is CertKind.RA_UPPER_KUSHNER:
        return upper_bound_ra_kushner(v0, alpha, beta, N)
    if M is None:
        raise CertificateParamError(f"{kind.value} needs M")
    if kind is CertKind.SAFETY_LOWER:
        return lower_bound_safety(v0, M, alpha, beta, N)
    return lower_bound_ra(v0, M, alpha, beta, N)


def recursion_oracle(v0: float, M: float | None, alpha: float, beta: float, N: int,
                     direction: str = "upper") -> float:
    """Evaluate a bound by iterating the one-step inequality chain.

    ``upper``: ``u <- u/alpha + beta`` applied N times starting from v0.
    ``lower``: ``s <- alpha*s + beta`` applied N+1 times from v0, then
    ``(s - M) / ((alpha + beta - 1) * sum_{i<=N} alpha^i)``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if direction == "upper":
        u = v0
        for _ in range(N):
            u = u / alpha + beta
        return u
    if direction != "lower":
        raise ValueError("direction must be 'upper' or 'lower'")
    if M is None:
        raise ValueError("lower direction needs M")
    s = v0
    total = 0.0
    power = 1.0
    for _ in range(N + 1):
        s = alpha * s + beta
        total += power
        power *= alpha
    return (s - M) / ((alpha + beta - 1) * total)


def reversed_sign_bounds(v0: float, alpha: float, beta: float, N: int) -> BoundReport:
    """Bounds from reversing every inequality of the T1 condition.

    They are never positive, which is why such a condition is useless as a
    lower-bound certificate; the function exists to test exactly that.
    """
    if not 0 < alpha <= 1:
        raise CertificateParamError(f"α must lie in (0,1], got {alpha}")
    if v0 > 0:
        raise CertificateParamError(f"v(x0) must be ≤ 0, got {v0}")
    N = _check_horizon(N)
    g = gamma_of(alpha, beta)
    if g >= 0:
        raw = 1 - (1 - v0) * alpha ** (-N)
        tag = f"α∈(0,1], γ={_fmt(g)}≥0"
    elif alpha == 1:
        raw = v0 + beta * N
        tag = f"α=1, γ={_fmt(g)}<0"
    else:
        raw = _geometric(v0, alpha, beta, N)
        tag = f"α∈(0,1), γ={_fmt(g)}<0"
    return BoundReport(CertKind.SAFETY_LOWER, tag, g, raw, min(1.0, max(0.0, raw)),
                       v0, alpha, beta, N, None, "reversed-sign condition")
