"""Random valid parameter tuples per certificate kind, and the value the
iterated-expectation recursion predicts for each (independent of the closed
forms under test)."""

from stochcert.bounds import CertKind, gamma_of, recursion_oracle


def _alpha_at_most_one(rng):
    return 1.0 if rng.random() < 0.3 else float(rng.uniform(0.5, 1.0))


def _alpha_at_least_one(rng):
    return 1.0 if rng.random() < 0.3 else float(rng.uniform(1.0, 3.0))


def random_tuple(kind: CertKind, rng) -> dict:
    N = int(rng.integers(0, 61))
    if kind is CertKind.SAFETY_UPPER_T1:
        alpha = _alpha_at_most_one(rng)
        return dict(v0=float(rng.uniform(0, 2)), alpha=alpha,
                    beta=float(rng.uniform(-0.5, 1.0)), N=N)
    if kind is CertKind.RA_UPPER_T3:
        return dict(v0=float(rng.uniform(0, 2)), alpha=_alpha_at_most_one(rng),
                    beta=float(rng.uniform(0, 1)), N=N)
    if kind.is_kushner:
        return dict(v0=float(rng.uniform(0, 0.999)), alpha=_alpha_at_least_one(rng),
                    beta=float(rng.uniform(0, 1)), N=N)
    if kind is CertKind.SAFETY_LOWER and rng.random() < 0.3:
        alpha, beta = 1.0, float(rng.uniform(0.01, 1))
    else:
        alpha = float(rng.uniform(1.001, 1.3))
        beta = float(rng.uniform(1 - alpha + 1e-3, 1))
    M = float(rng.uniform(0, 2))
    return dict(v0=float(rng.uniform(-1, M)), M=M, alpha=alpha, beta=beta, N=N)


def oracle_value(kind: CertKind, t: dict) -> float:
    v0, alpha, beta, N = t["v0"], t["alpha"], t["beta"], t["N"]
    if kind.is_lower:
        return recursion_oracle(v0, t["M"], alpha, beta, N, direction="lower")
    # branches with the power form 1-(1-v0)(1-β)^N are the same chain with
    # effective rate 1/(1-β)
    power = False
    if kind is CertKind.SAFETY_UPPER_T1:
        power = gamma_of(alpha, beta) < 0
    elif kind is CertKind.SAFETY_UPPER_KUSHNER:
        power = alpha > 1 and gamma_of(alpha, beta) <= 0
    elif kind is CertKind.RA_UPPER_KUSHNER:
        power = alpha > 1 and beta * alpha / (alpha - 1) <= 1
    if power:
        return recursion_oracle(v0, None, 1 / (1 - beta), beta, N, direction="upper")
    return recursion_oracle(v0, None, alpha, beta, N, direction="upper")


def reversed_tuples(rng, n):
    """(v0, α, β, N) with v0 <= 0 and α <= 1, the reversed-sign setting."""
    for _ in range(n):
        alpha = 1.0 if rng.random() < 0.3 else float(rng.uniform(0.5, 1.0))
        beta = float(rng.uniform(-1, 1))
        yield float(rng.uniform(-2, 0)), alpha, beta, int(rng.integers(0, 61))
