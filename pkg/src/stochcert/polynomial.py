"""Sparse multivariate polynomials over named variables.

Polynomials are immutable maps from exponent tuples to float coefficients.
Besides the usual ring operations this module provides a small text parser,
symbolic composition, tensor-product Bernstein forms over boxes and interval
enclosures built on top of them.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

# Coefficients below this magnitude are dropped during normalization.
ZERO_TOL = 1e-15

Exponent = tuple[int, ...]


class PolynomialSyntaxError(ValueError):
    """Raised when polynomial text cannot be parsed."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class Polynomial:
    """A sparse polynomial with float coefficients.

    ``variables`` fixes the meaning of each exponent slot. Two polynomials
    over different variable lists can still be combined; the result lives
    over the union of both lists (left operand first).
    """

    __slots__ = ("variables", "_terms", "_key")

    def __init__(self, terms: Mapping[Sequence[int], float] | None = None,
                 variables: Sequence[str] = ()):
        variables = tuple(variables)
        if len(set(variables)) != len(variables):
            raise ValueError(f"duplicate variable names in {variables}")
        clean: dict[Exponent, float] = {}
        for exps, coef in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != len(variables):
                raise ValueError(
                    f"exponent {exps} has arity {len(exps)}, expected {len(variables)}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            coef = float(coef)
            if not math.isfinite(coef):
                raise ValueError(f"non-finite coefficient {coef}")
            clean[exps] = clean.get(exps, 0.0) + coef
        self._terms = {k: c for k, c in clean.items() if abs(c) >= ZERO_TOL}
        self.variables = variables
        self._key = None

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, value: float, variables: Sequence[str] = ()) -> Polynomial:
        variables = tuple(variables)
        return cls({(0,) * len(variables): value}, variables)

    @classmethod
    def zero(cls, variables: Sequence[str] = ()) -> Polynomial:
        return cls({}, variables)

    @classmethod
    def variable(cls, name: str, variables: Sequence[str] | None = None) -> Polynomial:
        variables = tuple(variables) if variables is not None else (name,)
        if name not in variables:
            raise ValueError(f"{name!r} not in {variables}")
        exps = tuple(1 if v == name else 0 for v in variables)
        return cls({exps: 1.0}, variables)

    @classmethod
    def monomial(cls, exps: Sequence[int], variables: Sequence[str],
                 coef: float = 1.0) -> Polynomial:
        return cls({tuple(exps): coef}, variables)

    # -- basic accessors ----------------------------------------------
    @property
    def terms(self) -> Mapping[Exponent, float]:
        return MappingProxyType(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self._terms)

    def constant_term(self) -> float:
        return self._terms.get((0,) * len(self.variables), 0.0)

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0."""
        return max((sum(e) for e in self._terms), default=0)

    def degree_in(self, name: str) -> int:
        if name not in self.variables:
            return 0
        i = self.variables.index(name)
        return max((e[i] for e in self._terms), default=0)

    def degrees(self) -> tuple[int, ...]:
        return tuple(self.degree_in(v) for v in self.variables)

    def used_variables(self) -> tuple[str, ...]:
        return tuple(v for i, v in enumerate(self.variables)
                     if any(e[i] for e in self._terms))

    def __len__(self) -> int:
        return len(self._terms)

    # -- variable management ------------------------------------------
    def with_variables(self, variables: Sequence[str]) -> Polynomial:
        """Re-express over ``variables``, which must cover every used variable."""
        variables = tuple(variables)
        if variables == self.variables:
            return self
        missing = set(self.used_variables()) - set(variables)
        if missing:
            raise ValueError(f"variables {sorted(missing)} are used but not in {variables}")
        index = [self.variables.index(v) if v in self.variables else None for v in variables]
        terms = {tuple(e[i] if i is not None else 0 for i in index): c
                 for e, c in self._terms.items()}
        return Polynomial(terms, variables)

    def _align(self, other: Polynomial) -> tuple[Polynomial, Polynomial]:
        if self.variables == other.variables:
            return self, other
        union = self.variables + tuple(v for v in other.variables if v not in self.variables)
        return self.with_variables(union), other.with_variables(union)

    # -- arithmetic -----------------------------------------------------
    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(float(other), self.variables)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self._align(other)
        terms = dict(a._terms)
        for e, c in b._terms.items():
            terms[e] = terms.get(e, 0.0) + c
        return Polynomial(terms, a.variables)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({e: -c for e, c in self._terms.items()}, self.variables)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial({e: c * float(other) for e, c in self._terms.items()},
                              self.variables)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self._align(other)
        terms: dict[Exponent, float] = {}
        for e1, c1 in a._terms.items():
            for e2, c2 in b._terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                terms[e] = terms.get(e, 0.0) + c1 * c2
        return Polynomial(terms, a.variables)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Polynomial):
            if not other.is_constant() or other.is_zero():
                raise ZeroDivisionError("division only by nonzero constants")
            other = other.constant_term()
        if other == 0:
            raise ZeroDivisionError("division by zero")
        return self * (1.0 / float(other))

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("only nonnegative integer powers are supported")
        result = Polynomial.constant(1.0, self.variables)
        base = self
        k = int(k)
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # -- comparison -----------------------------------------------------
    def _canonical(self):
        if self._key is None:
            items = []
            for e, c in self._terms.items():
                mono = tuple(sorted((v, x) for v, x in zip(self.variables, e) if x))
                items.append((mono, c))
            self._key = frozenset(items)
        return self._key

    def __eq__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other, self.variables)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._canonical() == other._canonical()

    def __hash__(self):
        return hash(self._canonical())

    def almost_equal(self, other: Polynomial, tol: float = 1e-9) -> bool:
        """Coefficient-wise comparison with tolerance ``tol * max(1, |c|)``."""
        a, b = self._align(other)
        for e in set(a._terms) | set(b._terms):
            x, y = a._terms.get(e, 0.0), b._terms.get(e, 0.0)
            if abs(x - y) > tol * max(1.0, abs(x), abs(y)):
                return False
        return True

    # -- evaluation -----------------------------------------------------
    def evaluate(self, point: Mapping[str, float] | Sequence[float]) -> float:
        """Evaluate at a point given as a name->value map or a value sequence
        in ``self.variables`` order."""
        vals = self._point_values(point)
        total = 0.0
        for e, c in self._terms.items():
            term = c
            for x, k in zip(vals, e):
                if k:
                    term *= x ** k
            total += term
        return total

    __call__ = evaluate

    def _point_values(self, point) -> list[float]:
        if isinstance(point, Mapping):
            vals = []
            for i, v in enumerate(self.variables):
                if v in point:
                    vals.append(float(point[v]))
                elif any(e[i] for e in self._terms):
                    raise KeyError(f"missing value for variable {v!r}")
                else:
                    vals.append(0.0)
            return vals
        vals = [float(x) for x in point]
        if len(vals) != len(self.variables):
            raise ValueError(f"point has {len(vals)} entries, expected {len(self.variables)}")
        return vals

    def evaluate_many(self, values: Mapping[str, np.ndarray] | np.ndarray) -> np.ndarray:
        """Vectorized evaluation.

        ``values`` is either a name->array map or a 2-D array whose columns
        follow ``self.variables``.
        """
        if isinstance(values, Mapping):
            shape = None
            cols = []
            for i, v in enumerate(self.variables):
                if v in values:
                    arr = np.asarray(values[v], dtype=float)
                    shape = arr.shape
                    cols.append(arr)
                elif any(e[i] for e in self._terms):
                    raise KeyError(f"missing value for variable {v!r}")
                else:
                    cols.append(None)
            if shape is None:
                shape = next((np.shape(a) for a in values.values()), ())
        else:
            arr = np.asarray(values, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != len(self.variables):
                raise ValueError("expected an array of shape (k, n_variables)")
            cols = [arr[:, i] for i in range(arr.shape[1])]
            shape = arr.shape[:1]
        out = np.zeros(shape)
        powers: dict[tuple[int, int], np.ndarray] = {}
        for e, c in self._terms.items():
            term = np.full(shape, c)
            for i, k in enumerate(e):
                if k:
                    key = (i, k)
                    if key not in powers:
                        powers[key] = cols[i] ** k
                    term = term * powers[key]
            out = out + term
        return out

    # -- substitution ---------------------------------------------------
    def compose(self, substitution: Mapping[str, Polynomial]) -> Polynomial:
        """Replace every used variable by a polynomial.

        Variables that appear in ``self.variables`` but not in any term may
        be omitted from ``substitution``.
        """
        used = self.used_variables()
        missing = [v for v in used if v not in substitution]
        if missing:
            raise KeyError(f"no substitution given for {missing}")
        out_vars: list[str] = []
        for v in self.variables:
            if v in substitution:
                for w in substitution[v].variables:
                    if w not in out_vars:
                        out_vars.append(w)
        subs = {v: substitution[v].with_variables(out_vars) for v in used}
        cache: dict[tuple[str, int], Polynomial] = {}

        def power(v: str, k: int) -> Polynomial:
            if (v, k) not in cache:
                cache[(v, k)] = subs[v] if k == 1 else power(v, k - 1) * subs[v]
            return cache[(v, k)]

        result = Polynomial.zero(out_vars)
        for e, c in self._terms.items():
            term = Polynomial.constant(c, out_vars)
            for v, k in zip(self.variables, e):
                if k:
                    term = term * power(v, k)
            result = result + term
        return result

    def substitute_values(self, values: Mapping[str, float]) -> Polynomial:
        """Fix some variables to numbers; the rest remain symbolic."""
        keep = [v for v in self.variables if v not in values]
        keep_idx = [self.variables.index(v) for v in keep]
        fix = [(i, float(values[v])) for i, v in enumerate(self.variables) if v in values]
        terms: dict[Exponent, float] = {}
        for e, c in self._terms.items():
            for i, x in fix:
                if e[i]:
                    c *= x ** e[i]
            key = tuple(e[i] for i in keep_idx)
            terms[key] = terms.get(key, 0.0) + c
        return Polynomial(terms, keep)

    # -- dense forms ------------------------------------------------------
    def to_dense(self, variables: Sequence[str] | None = None,
                 degrees: Sequence[int] | None = None) -> np.ndarray:
        """Dense coefficient tensor; axis ``i`` indexes the power of ``variables[i]``."""
        p = self if variables is None else self.with_variables(variables)
        if degrees is None:
            degrees = p.degrees()
        degrees = tuple(int(d) for d in degrees)
        own = p.degrees()
        if any(a > b for a, b in zip(own, degrees)):
            raise ValueError(f"degree vector {degrees} below polynomial degrees {own}")
        dense = np.zeros(tuple(d + 1 for d in degrees))
        for e, c in p._terms.items():
            dense[e] += c
        return dense

    # -- text -------------------------------------------------------------
    def __str__(self) -> str:
        if not self._terms:
            return "0"
        order = sorted(self._terms, key=lambda e: (-sum(e), tuple(-x for x in e)))
        parts = []
        for n, e in enumerate(order):
            c = self._terms[e]
            mono = "*".join(v if k == 1 else f"{v}^{k}"
                            for v, k in zip(self.variables, e) if k)
            mag = abs(c)
            if mono and mag == 1.0:
                body = mono
            elif mono:
                body = f"{mag!r}*{mono}"
            else:
                body = repr(mag)
            if n == 0:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append((" - " if c < 0 else " + ") + body)
        return "".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({str(self)!r}, variables={self.variables})"

    def to_json(self) -> dict:
        return {"variables": list(self.variables),
                "terms": {",".join(map(str, e)): c for e, c in sorted(self._terms.items())}}

    @classmethod
    def from_json(cls, data: Mapping) -> Polynomial:
        variables = tuple(data["variables"])
        return cls({parse_exponent_key(k): float(c) for k, c in data["terms"].items()},
                   variables)


def parse_exponent_key(key: str) -> Exponent:
    """Parse an exponent key such as ``"2"``, ``"1,0"`` or ``"(1, 0)"``."""
    body = key.strip().strip("()[]").strip()
    if not body:
        return ()
    return tuple(int(p) for p in body.split(",") if p.strip())


# ----------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise PolynomialSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.variables = tuple(variables)
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok=None):
        tok = tok or self.peek()
        return PolynomialSyntaxError(message, tok[2], self.text)

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            raise self.error("empty expression")
        p = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return p

    def expr(self) -> Polynomial:
        sign = 1.0
        if self.peek()[1] in "+-" and self.peek()[0] == "op":
            sign = -1.0 if self.take()[1] == "-" else 1.0
        p = self.term() * sign
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op_tok = self.take()
            q = self.factor()
            if op_tok[1] == "*":
                p = p * q
            else:
                if not q.is_constant() or q.is_zero():
                    raise self.error("division only by a nonzero constant", op_tok)
                p = p / q.constant_term()
        return p

    def factor(self) -> Polynomial:
        base = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.take()
            if tok[0] != "num" or not tok[1].isdigit():
                raise self.error("exponent must be a nonnegative integer literal", tok)
            base = base ** int(tok[1])
        return base

    def base(self) -> Polynomial:
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return Polynomial.constant(float(text), self.variables)
        if kind == "ident":
            if text not in self.variables:
                raise self.error(f"undeclared variable {text!r}", tok)
            return Polynomial.variable(text, self.variables)
        if kind == "op" and text == "(":
            p = self.expr()
            if self.peek()[1] != ")":
                raise self.error("expected ')'")
            self.take()
            return p
        if kind == "op" and text in "+-":
            p = self.factor()
            return -p if text == "-" else p
        if kind == "end":
            raise self.error("unexpected end of input", tok)
        raise self.error(f"unexpected token {text!r}", tok)


def parse_polynomial(text: str, variables: Sequence[str]) -> Polynomial:
    """Parse ``text`` into a polynomial over ``variables``.

    Grammar (whitespace insignificant)::

        expr   := ['+'|'-'] term (('+'|'-') term)*
        term   := factor (('*'|'/') factor)*      # '/' only by constants
        factor := base ('^' uint)?
        base   := number | ident | '(' expr ')' | ('+'|'-') factor

    >>> str(parse_polynomial("(x + t)*(x + t)", ["x", "t"]))
    'x^2 + 2.0*x*t + t^2'
    """
    return _Parser(text, variables).parse()


def evaluate(p: Polynomial, point) -> float:
    return p.evaluate(point)


def compose(p: Polynomial, substitution: Mapping[str, Polynomial]) -> Polynomial:
    return p.compose(substitution)


# ----------------------------------------------------------------------------
# Boxes and intervals

@dataclass(frozen=True)
class Box:
    """Axis-aligned box, one closed interval per named variable."""

    variables: tuple[str, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "lo", tuple(float(x) for x in self.lo))
        object.__setattr__(self, "hi", tuple(float(x) for x in self.hi))
        if not (len(self.variables) == len(self.lo) == len(self.hi)):
            raise ValueError("box arity mismatch")
        for v, a, b in zip(self.variables, self.lo, self.hi):
            if not (a <= b):
                raise ValueError(f"empty interval for {v}: [{a}, {b}]")

    @classmethod
    def from_dict(cls, bounds: Mapping[str, Sequence[float]]) -> Box:
        names = tuple(bounds)
        return cls(names, tuple(bounds[v][0] for v in names), tuple(bounds[v][1] for v in names))

    def to_dict(self) -> dict:
        return {v: [a, b] for v, a, b in zip(self.variables, self.lo, self.hi)}

    @property
    def dim(self) -> int:
        return len(self.variables)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2

    def interval(self, name: str) -> tuple[float, float]:
        i = self.variables.index(name)
        return self.lo[i], self.hi[i]

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        return all(a - tol <= x <= b + tol for x, a, b in zip(point, self.lo, self.hi))

    def contains_box(self, other: Box, tol: float = 0.0) -> bool:
        other = other.reorder(self.variables)
        return all(a - tol <= c and d <= b + tol
                   for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def reorder(self, variables: Sequence[str]) -> Box:
        variables = tuple(variables)
        if variables == self.variables:
            return self
        idx = [self.variables.index(v) for v in variables]
        return Box(variables, tuple(self.lo[i] for i in idx), tuple(self.hi[i] for i in idx))

    def bisect(self, axis: int) -> tuple[Box, Box]:
        mid = (self.lo[axis] + self.hi[axis]) / 2
        hi1 = list(self.hi)
        hi1[axis] = mid
        lo2 = list(self.lo)
        lo2[axis] = mid
        return Box(self.variables, self.lo, hi1), Box(self.variables, lo2, self.hi)

    def split_all(self) -> list[Box]:
        """Bisect every axis at once (2**dim children)."""
        cells = [self]
        for axis in range(self.dim):
            cells = [half for c in cells for half in c.bisect(axis)]
        return cells

    def union_hull(self, other: Box) -> Box:
        other = other.reorder(self.variables)
        return Box(self.variables,
                   tuple(min(a, b) for a, b in zip(self.lo, other.lo)),
                   tuple(max(a, b) for a, b in zip(self.hi, other.hi)))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return lo + (hi - lo) * rng.random((n, self.dim))

    def vertices(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))))


def _ipow(lo: float, hi: float, k: int) -> tuple[float, float]:
    if k == 0:
        return 1.0, 1.0
    a, b = lo ** k, hi ** k
    if k % 2 == 0 and lo < 0 < hi:
        return 0.0, max(a, b)
    return min(a, b), max(a, b)


def naive_interval_enclosure(p: Polynomial, box: Box) -> tuple[float, float]:
    """Term-by-term interval arithmetic."""
    ivals = [box.interval(v) if v in box.variables else None for v in p.variables]
    lo_sum = hi_sum = 0.0
    for e, c in p.terms.items():
        lo, hi = c, c
        for iv, k in zip(ivals, e):
            if not k:
                continue
            if iv is None:
                raise KeyError("box does not cover all polynomial variables")
            a, b = _ipow(iv[0], iv[1], k)
            prods = (lo * a, lo * b, hi * a, hi * b)
            lo, hi = min(prods), max(prods)
        lo_sum += lo
        hi_sum += hi
    return lo_sum, hi_sum


# ----------------------------------------------------------------------------
# Bernstein forms

@lru_cache(maxsize=None)
def _power_to_bernstein(d: int) -> np.ndarray:
    """Matrix taking power coefficients on [0,1] to Bernstein coefficients."""
    t = np.zeros((d + 1, d + 1))
    for i in range(d + 1):
        for k in range(i + 1):
            t[i, k] = math.comb(i, k) / math.comb(d, k)
    return t


def _affine_shift(a: float, w: float, d: int) -> np.ndarray:
    """Matrix S with S[m, k] = C(k, m) a^(k-m) w^m, i.e. power coefficients of
    p(a + w*u) in u from those of p(x)."""
    s = np.zeros((d + 1, d + 1))
    for k in range(d + 1):
        for m in range(k + 1):
            s[m, k] = math.comb(k, m) * a ** (k - m) * w ** m
    return s


def bernstein_matrices(box: Box, degrees: Sequence[int]) -> list[np.ndarray]:
    """Per-axis matrices mapping dense power coefficients to Bernstein
    coefficients on ``box``."""
    return [_power_to_bernstein(d) @ _affine_shift(a, b - a, d)
            for a, b, d in zip(box.lo, box.hi, degrees)]


def apply_axis_matrices(dense: np.ndarray, mats: Sequence[np.ndarray],
                        batch_dims: int = 0) -> np.ndarray:
    """Contract each non-batch axis of ``dense`` with the matching matrix."""
    out = dense
    for j, m in enumerate(mats):
        axis = batch_dims + j
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [axis])), 0, axis)
    return out


@dataclass(frozen=True)
class BernsteinForm:
    box: Box
    degree: tuple[int, ...]
    coefficients: np.ndarray

    def min(self) -> float:
        return float(self.coefficients.min())

    def max(self) -> float:
        return float(self.coefficients.max())

    def evaluate(self, point: Sequence[float]) -> float:
        val = self.coefficients
        for a, b, d, x in zip(self.box.lo, self.box.hi, self.degree, point):
            u = (x - a) / (b - a) if b > a else 0.0
            basis = np.array([math.comb(d, i) * u ** i * (1 - u) ** (d - i)
                              for i in range(d + 1)])
            val = np.tensordot(basis, val, axes=([0], [0]))
        return float(val)

    def grid_point(self, index: Sequence[int]) -> np.ndarray:
        """Box point associated with a coefficient index (the Greville abscissa)."""
        return np.array([a + (b - a) * (i / d if d else 0.5)
                         for a, b, d, i in zip(self.box.lo, self.box.hi, self.degree, index)])


def bernstein_form(p: Polynomial, box: Box,
                   degree: Sequence[int] | None = None) -> BernsteinForm:
    """Bernstein coefficients of ``p`` over ``box`` at the given per-variable
    degree (default: the polynomial's own degree in each box variable)."""
    extra = set(p.used_variables()) - set(box.variables)
    if extra:
        raise KeyError(f"box does not cover variables {sorted(extra)}")
    q = p.with_variables(box.variables)
    own = q.degrees()
    degree = own if degree is None else tuple(int(d) for d in degree)
    if len(degree) != box.dim:
        raise ValueError("degree vector arity mismatch")
    if any(d < o for d, o in zip(degree, own)):
        raise ValueError(f"degree {degree} is below the polynomial degree {own}")
    coeffs = apply_axis_matrices(q.to_dense(box.variables, degree),
                                 bernstein_matrices(box, degree))
    return BernsteinForm(box, degree, coeffs)


def interval_enclosure(p: Polynomial, box: Box) -> tuple[float, float]:
    """Sound range enclosure: the tighter of the Bernstein and naive bounds."""
    if p.is_zero():
        return 0.0, 0.0
    bf = bernstein_form(p, box)
    lo1, hi1 = bf.min(), bf.max()
    lo2, hi2 = naive_interval_enclosure(p, box)
    return max(lo1, lo2), min(hi1, hi2)


def monomials_up_to(variables: Sequence[str], degree: int) -> list[Exponent]:
    """All exponent tuples of total degree <= ``degree``, graded order."""
    n = len(variables)
    out = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), total):
            e = [0] * n
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


__all__ = [
    "Box", "BernsteinForm", "Polynomial", "PolynomialSyntaxError",
    "bernstein_form", "bernstein_matrices", "apply_axis_matrices", "compose",
    "evaluate", "interval_enclosure", "monomials_up_to", "naive_interval_enclosure",
    "parse_exponent_key", "parse_polynomial",
]
