"""Command-line interface: ``stochcert <command> [options]``.

Every command writes JSON (or CSV with ``--format csv``) to stdout or to
``--out``. Failures print ``{"error": ..., "message": ...}`` and exit 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Sequence

from .bounds import Certificate, CertKind, evaluate_bound
from .checker import DEFAULT_BUDGET, check_certificate
from .model import ProblemKind, ProblemSpec, problem_from_dict
from .montecarlo import exact_probability, simulate_event
from .synth import FREE, SynthesisError, SynthesisOptions, synthesize, sweep

BUNDLED = ("random_walk", "contraction")
DEFAULT_SEED = 0
MAX_SEED = 2 ** 64

# rows of the reproduction tables: (kind, alpha, beta); upper kinds leave β free
REPRODUCE_ROWS = {
    ("random_walk", ProblemKind.SAFETY): [
        (CertKind.SAFETY_UPPER_KUSHNER, "1.1", FREE),
        (CertKind.SAFETY_UPPER_T1, "1/1.1", FREE),
        (CertKind.SAFETY_UPPER_T1, "1", FREE),
    ],
    ("random_walk", ProblemKind.REACH_AVOID): [
        (CertKind.RA_UPPER_KUSHNER, "1.1", FREE),
        (CertKind.RA_UPPER_T3, "1/1.1", FREE),
        (CertKind.RA_UPPER_T3, "1", FREE),
    ],
    ("contraction", ProblemKind.SAFETY): [
        (CertKind.SAFETY_UPPER_KUSHNER, "1.01", FREE),
        (CertKind.SAFETY_UPPER_KUSHNER, "1.001", FREE),
        (CertKind.SAFETY_UPPER_T1, "1/1.01", FREE),
        (CertKind.SAFETY_UPPER_T1, "1/1.001", FREE),
        (CertKind.SAFETY_UPPER_T1, "1", FREE),
        (CertKind.SAFETY_LOWER, "1.1", 0.0),
    ],
    ("contraction", ProblemKind.REACH_AVOID): [
        (CertKind.RA_UPPER_KUSHNER, "1.001", FREE),
        (CertKind.RA_UPPER_KUSHNER, "1.0001", FREE),
        (CertKind.RA_UPPER_KUSHNER, "1", FREE),
        (CertKind.RA_UPPER_T3, "1/1.001", FREE),
        (CertKind.RA_UPPER_T3, "1/1.0001", FREE),
        (CertKind.RA_UPPER_T3, "1", FREE),
        (CertKind.RA_LOWER, "1.06", 0.0),
    ],
}


class CLIError(Exception):
    pass


# ----------------------------------------------------------------------------
# Parsing helpers

def parse_number(text: str) -> float:
    """A float, a fraction such as ``1/3``, or a quotient of floats such as
    ``1/1.1``."""
    text = str(text).strip()
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        pass
    if text.count("/") == 1:
        num, den = text.split("/")
        return float(num) / float(den)
    raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def parse_number_list(text: str) -> tuple[float, ...]:
    return tuple(parse_number(t) for t in text.split(",") if t.strip())


def parse_beta_list(text: str) -> tuple[float | None, ...]:
    return tuple(FREE if t.strip().lower() == "free" else parse_number(t)
                 for t in text.split(",") if t.strip())


def parse_int_list(text: str) -> tuple[int, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:  # lo:hi:step, inclusive
            lo, hi, *step = (int(p) for p in part.split(":"))
            out.extend(range(lo, hi + 1, step[0] if step else 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty integer list")
    return tuple(out)


def parse_seed(text: str) -> int:
    seed = int(text)
    if not 0 <= seed < MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def parse_kind(text: str) -> CertKind:
    try:
        return CertKind.parse(text)
    except ValueError:
        choices = ", ".join(k.value for k in CertKind)
        raise argparse.ArgumentTypeError(f"unknown kind {text!r} (choose from {choices})")


def load_problem(path: str | Path, validate: bool = True) -> ProblemSpec:
    """Load a problem file. A name such as ``random_walk`` or
    ``examples/contraction.json`` that is not an existing file resolves to
    the bundled problem of that name."""
    p = Path(path)
    if p.is_file():
        text = p.read_text()
    elif p.stem in BUNDLED:
        text = resources.files("stochcert").joinpath(f"data/{p.stem}.json").read_text()
    else:
        raise CLIError(f"problem file not found: {path}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CLIError(f"{path}: invalid JSON ({exc})") from exc
    return problem_from_dict(data, validate=validate)


def _problem_for(args, kind: ProblemKind | None = None) -> ProblemSpec:
    problem = load_problem(args.problem)
    want = kind or (ProblemKind(args.event) if getattr(args, "event", None) else None)
    return problem.with_kind(want) if want else problem


def _problem_kind(kind: CertKind) -> ProblemKind:
    return ProblemKind.SAFETY if kind.is_safety else ProblemKind.REACH_AVOID


# ----------------------------------------------------------------------------
# Output

def _flatten(obj, prefix="") -> dict:
    out = {}
    for key, val in obj.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, name + "."))
        elif isinstance(val, list):
            out[name] = json.dumps(val)
        else:
            out[name] = val
    return out


def _render(obj, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
    if isinstance(obj, str):
        return obj
    flat = _flatten(obj)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(flat.keys())
    writer.writerow(flat.values())
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ----------------------------------------------------------------------------
# Commands

def cmd_simulate(args) -> dict:
    problem = _problem_for(args)
    return simulate_event(problem, args.n, args.seed).to_json()


def cmd_exact(args) -> dict:
    problem = _problem_for(args)
    N = problem.horizon if args.N is None else args.N
    return {"probability": exact_probability(problem, N), "N": N,
            "event": "exit" if problem.kind is ProblemKind.SAFETY else "reach_avoid"}


def cmd_check(args) -> dict:
    try:
        data = json.loads(Path(args.certificate).read_text())
        problem = load_problem(args.problem)
        cert = Certificate.from_json(data, problem.state_vars)
    except (OSError, KeyError, ValueError) as exc:
        raise CLIError(f"cannot read certificate {args.certificate}: {exc}") from exc
    problem = _problem_for(args, _problem_kind(cert.kind))
    return check_certificate(cert, problem, budget=args.budget).to_json()


def cmd_bound(args) -> dict:
    return evaluate_bound(args.kind, args.v0, args.alpha, args.beta, args.N, args.M).to_json()


def _options(args) -> SynthesisOptions:
    return SynthesisOptions(degree=args.degrees[0], degrees=args.degrees, depth=args.depth,
                            boundary_depth=args.boundary_depth, elevation=args.elevation,
                            alphas=args.alphas, betas=args.betas, lp_method=args.lp,
                            budget=args.budget)


def cmd_synthesize(args) -> dict:
    problem = _problem_for(args, _problem_kind(args.kind))
    result = sweep(problem, args.kind, _options(args))
    if args.certificate_out:
        Path(args.certificate_out).write_text(
            json.dumps(result.certificate.to_json(), indent=2) + "\n")
    return result.to_json()


def reproduce_table(example: str, kind: ProblemKind, degrees: Sequence[int],
                    options: SynthesisOptions) -> list[list[str]]:
    """One row per (condition, α), one column per degree; cells are audited
    clamped bounds, or ``NA`` when no certificate was found."""
    problem = load_problem(example).with_kind(kind)
    rows = [["kind", "alpha", "beta"] + [f"d={d}" for d in degrees]]
    for cert_kind, alpha_text, beta in REPRODUCE_ROWS[(example, kind)]:
        alpha = parse_number(alpha_text)
        row = [cert_kind.value, alpha_text, "free" if beta is FREE else repr(beta)]
        for d in degrees:
            try:
                res = synthesize(problem, cert_kind, alpha, beta, _replace_degree(options, d))
                row.append(f"{res.bound.clamped_value:.4f}")
            except (SynthesisError, ValueError):
                row.append("NA")
        rows.append(row)
    return rows


def _replace_degree(options: SynthesisOptions, d: int) -> SynthesisOptions:
    return replace(options, degree=d, degrees=())


def cmd_reproduce(args) -> dict | str:
    options = SynthesisOptions(depth=args.depth, boundary_depth=args.boundary_depth,
                               elevation=args.elevation, lp_method=args.lp, budget=args.budget)
    examples = args.examples or list(BUNDLED)
    tables = {}
    for example in examples:
        if example not in BUNDLED:
            raise CLIError(f"unknown example {example!r}; choose from {', '.join(BUNDLED)}")
        for kind in (ProblemKind.SAFETY, ProblemKind.REACH_AVOID):
            tables[f"{example}_{kind.value}"] = reproduce_table(example, kind, args.degrees, options)
    if args.format == "json":
        return {name: [dict(zip(t[0], r)) for r in t[1:]] for name, t in tables.items()}
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, table in tables.items():
            with open(out_dir / f"{name}.csv", "w", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerows(table)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for name, table in tables.items():
        buf.write(f"# {name}\n")
        writer.writerows(table)
    return buf.getvalue()


# ----------------------------------------------------------------------------
# Argument parsing

class _Parser(argparse.ArgumentParser):
    """Raises instead of printing usage, so bad arguments also produce
    the error JSON."""

    def error(self, message):
        raise CLIError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="stochcert",
        description="Certified bounds on exit and reach-avoid probabilities.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, problem=True):
        if problem:
            p.add_argument("--problem", required=True,
                           help="problem JSON file or bundled name (random_walk, contraction)")
        p.add_argument("--seed", type=parse_seed, default=DEFAULT_SEED)
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    def synth_opts(p):
        p.add_argument("--depth", type=int, default=5, help="uniform subdivision depth")
        p.add_argument("--boundary-depth", type=int, default=4,
                       help="extra subdivision levels on region boundaries")
        p.add_argument("--elevation", type=int, default=2, help="Bernstein degree elevation")
        p.add_argument("--lp", choices=("simplex", "highs"), default="simplex")
        p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                       help="cell budget of the certificate checker")

    event_choices = [k.value for k in ProblemKind]

    p = sub.add_parser("simulate", help="Monte-Carlo estimate with a 99%% Clopper-Pearson interval")
    common(p)
    p.add_argument("--event", choices=event_choices, help="override the problem kind")
    p.add_argument("--n", type=int, default=200_000, help="number of paths")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("exact", help="exact probability for a finite-support disturbance")
    common(p)
    p.add_argument("--event", choices=event_choices, help="override the problem kind")
    p.add_argument("--N", type=int, help="horizon (default: the problem's)")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("check", help="verify a certificate file and report its bound")
    common(p)
    p.add_argument("--certificate", required=True)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bound", help="evaluate a closed-form bound")
    common(p, problem=False)
    p.add_argument("--kind", type=parse_kind, required=True)
    p.add_argument("--v0", type=parse_number, required=True)
    p.add_argument("--alpha", type=parse_number, required=True)
    p.add_argument("--beta", type=parse_number, required=True)
    p.add_argument("--M", type=parse_number)
    p.add_argument("--N", type=int, required=True)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("synthesize", help="sweep α, β and degree; keep the best audited bound")
    common(p)
    p.add_argument("--kind", type=parse_kind, required=True)
    p.add_argument("--degrees", type=parse_int_list, default=(2,),
                   help="comma list or lo:hi:step range")
    p.add_argument("--alphas", type=parse_number_list, default=(1.0,))
    p.add_argument("--betas", type=parse_beta_list, default=(FREE,),
                   help="comma list; 'free' makes β an LP variable")
    p.add_argument("--certificate-out", help="also write the best certificate here")
    synth_opts(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("reproduce", help="bound tables for the bundled examples")
    common(p, problem=False)
    p.add_argument("--degrees", type=parse_int_list, default=tuple(range(2, 21, 2)))
    p.add_argument("--examples", nargs="*", help=f"subset of {', '.join(BUNDLED)}")
    p.add_argument("--out-dir", help="also write one CSV file per table here")
    synth_opts(p)
    p.set_defaults(func=cmd_reproduce, format="csv")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        result = args.func(args)
        _emit(_render(result, args.format), args.out)
    except Exception as exc:  # report every failure as JSON
        err = {"error": type(exc).__name__, "message": str(exc)}
        sys.stdout.write(json.dumps(err, ensure_ascii=False) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
