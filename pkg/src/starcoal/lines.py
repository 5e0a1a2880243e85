"""Backward line counting and moment duality.

Tracing n sampled individuals backward, each line resolves by mutation at
rate theta/2 and the whole set of unresolved lines collapses to one at the
population replacement events, rate 1.  The line count A(t) therefore moves
down the chain n -> n-1 -> ... with collapse jumps to 1, and its law is an
explicit mix of binomial terms.  The alternating sums in the closed forms
cancel catastrophically in floats near n = 50, so all distribution values
are assembled in exact rational arithmetic (the float inputs e^{-theta t/2}
and e^{-t} are themselves exact rationals) and rounded once at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import InvalidParameterError, RngStream, TwoTypeParams, replacement_decay_integral
from .twotype import transition_moment

__all__ = [
    "LineDist",
    "LinePath",
    "SpectralCoeffs",
    "an_distribution",
    "an_limit",
    "spectral_coeffs",
    "an_distribution_spectral",
    "mean_absorption_time",
    "simulate_lines",
    "duality_check",
    "stationary_moment_via_coalescent",
]


@dataclass(frozen=True)
class LineDist:
    """Distribution of the unresolved line count after time t."""

    n: int
    theta: float
    t: float
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.probs) != self.n + 1:
            raise InvalidParameterError("probs must have length n + 1")
        if any(q < 0.0 for q in self.probs):
            raise InvalidParameterError("negative probability entry")
        if abs(math.fsum(self.probs) - 1.0) > 1e-12:
            raise InvalidParameterError("line-count probabilities must sum to 1")


@dataclass(frozen=True)
class LinePath:
    """One backward trajectory of the line-count chain.

    events holds (time, kind, state after) with kind "mutation" or
    "coalescence"; only the first collapse is a coalescence event, later
    replacement epochs do not alter a single remaining line.  Fields after
    events record the collapse and absorption bookkeeping used by duality
    estimators; each is None when the corresponding event did not occur
    before the horizon.
    """

    initial_lines: int
    horizon: float | None
    events: tuple[tuple[float, str, int], ...]
    final_lines: int
    coalescence_time: float | None
    lines_before_coalescence: int | None
    absorption_time: float | None


def _check_n(n: int):
    if n < 1:
        raise InvalidParameterError(f"sample size n must be at least 1, got {n!r}")


def _check_theta(theta: float):
    if not (theta > 0.0 and math.isfinite(theta)):
        raise InvalidParameterError(f"theta must be positive and finite, got {theta!r}")


def _an_fractions(n: int, theta: float, t: float) -> list[Fraction]:
    """Exact rationals for P(A(t) = j), j = 0..n."""
    pf = Fraction(math.exp(-0.5 * theta * t))
    ef = Fraction(math.exp(-t))
    half = Fraction(theta) / 2
    probs: list[Fraction] = [Fraction(0)] * (n + 1)
    for j in range(2, n + 1):
        probs[j] = math.comb(n, j) * pf**j * (1 - pf) ** (n - j) * ef
    s1 = Fraction(0)
    s0 = Fraction(0)
    for k in range(1, n + 1):
        sign = -1 if k % 2 == 0 else 1
        denom = 1 + (k - 1) * half
        s1 += sign * math.comb(n, k) * (pf - ef * pf**k) / denom
        s0 += sign * math.comb(n, k) * (pf + (k - 1) * half * ef * pf**k) / denom
    probs[1] = n * pf * (1 - pf) ** (n - 1) * ef + s1
    probs[0] = 1 - s0
    return probs


def an_distribution(n: int, theta: float, t: float) -> LineDist:
    """Law of the unresolved line count, exact up to one final rounding.

    For 1 < j <= n the probability is the binomial survival term
    C(n,j) p(t)^j (1-p(t))^{n-j} e^{-t} with p(t) = e^{-theta t/2}; j = 1
    adds the alternating resolvent sum and j = 0 closes the total to 1.
    """
    _check_n(n)
    _check_theta(theta)
    if t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t!r}")
    probs = _an_fractions(n, theta, t)
    return LineDist(n=n, theta=theta, t=t, probs=tuple(float(q) for q in probs))


def an_limit(theta: float, t: float, j) -> float:
    """Large-n limits of P(A(t) = 0), P(A(t) = 1) and P(A(t) >= 2).

    The limit of the j = 1 mass is the replacement decay integral
    (e^{-theta t/2} - e^{-t})/(1 - theta/2), read as t e^{-t} at theta = 2;
    the j >= 2 mass tends to e^{-t} and j = 0 takes the complement.
    """
    _check_theta(theta)
    if not t > 0.0:
        raise InvalidParameterError(f"t must be positive, got {t!r}")
    one = replacement_decay_integral(theta, t)
    survive = math.exp(-t)
    if j == 1:
        return one
    if j in (2, "ge2", ">=2"):
        return survive
    if j == 0:
        return 1.0 - one - survive
    raise InvalidParameterError(f"j must be 0, 1 or 'ge2', got {j!r}")


@dataclass(frozen=True)
class SpectralCoeffs:
    """Spectral weights of the line-count semigroup.

    q_weights[k] scales e^{-lambda_k t} in the row for the start state n;
    p_coeffs[j][k] is the k-th spectral coefficient of the j-th probability.
    """

    n: int
    theta: float
    eigenvalues: tuple[float, ...]
    q_weights: tuple[float, ...]
    p_coeffs: tuple[tuple[float, ...], ...]


def _spectral_fractions(n: int, theta: float) -> tuple[list[Fraction], list[list[Fraction]]]:
    half = Fraction(theta) / 2
    q: list[Fraction] = [Fraction(0)] * (n + 1)
    q[0] = Fraction(1)
    if n >= 1:
        q[1] = sum(
            (-1 if i % 2 == 0 else 1) * Fraction(math.comb(n, i), 1) / (1 + (i - 1) * half)
            for i in range(1, n + 1)
        )
    for k in range(2, n + 1):
        sign = -1 if k % 2 == 0 else 1
        q[k] = sign * math.comb(n, k) * (k - 1) * (1 + k * half) / (1 + (k - 1) * half)
    p: list[list[Fraction]] = [[Fraction(0)] * (n + 1) for _ in range(n + 1)]
    p[0][0] = Fraction(1)
    if n >= 1:
        p[0][1] = Fraction(-1)
    for k in range(2, n + 1):
        p[0][k] = -half / (1 + k * half)
    if n >= 1:
        for k in range(1, n + 1):
            p[1][k] = Fraction(1)
    for j in range(2, n + 1):
        sign = -1 if j % 2 == 0 else 1
        for k in range(j, n + 1):
            p[j][k] = sign * math.comb(k, j) * (1 + (k - 1) * half) / ((k - 1) * (1 + k * half))
    return q, p


def spectral_coeffs(n: int, theta: float) -> SpectralCoeffs:
    """Eigenvalues 0, theta/2, 1 + k theta/2 with their weight arrays."""
    _check_n(n)
    _check_theta(theta)
    q, p = _spectral_fractions(n, theta)
    lams = [0.0, 0.5 * theta] + [1.0 + 0.5 * k * theta for k in range(2, n + 1)]
    return SpectralCoeffs(
        n=n,
        theta=theta,
        eigenvalues=tuple(lams[: n + 1]),
        q_weights=tuple(float(v) for v in q),
        p_coeffs=tuple(tuple(float(v) for v in row) for row in p),
    )


def an_distribution_spectral(n: int, theta: float, t: float) -> LineDist:
    """Line-count law reconstructed as sum_k e^{-lambda_k t} Q^(k) P_j^(k).

    The time factors are evaluated through the exact identity
    e^{-(1 + k theta/2) t} = e^{-t} (e^{-theta t/2})^k so the alternating
    spectral sums cancel in rational arithmetic rather than in floats; the
    route is still independent of an_distribution, which never forms the
    spectral weight matrices.
    """
    _check_n(n)
    _check_theta(theta)
    if t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t!r}")
    q, p = _spectral_fractions(n, theta)
    pf = Fraction(math.exp(-0.5 * theta * t))
    ef = Fraction(math.exp(-t))
    factors = [Fraction(1), pf] + [ef * pf**k for k in range(2, n + 1)]
    probs = [
        float(sum(factors[k] * q[k] * p[j][k] for k in range(n + 1))) for j in range(n + 1)
    ]
    return LineDist(n=n, theta=theta, t=t, probs=tuple(probs))


def mean_absorption_time(n: int, theta: float) -> float:
    """Expected time until every line has resolved.

    Equals r (1 - n! / (r (r+1) ... (r+n-1))) with r = 1 + 2/theta,
    computed in rational arithmetic; n = 1 reduces to 2/theta and n = 2,
    theta = 2 gives exactly 4/3.
    """
    _check_n(n)
    _check_theta(theta)
    r = 1 + Fraction(2) / Fraction(theta)
    denom = Fraction(1)
    for j in range(n):
        denom *= r + j
    return float(r * (1 - Fraction(math.factorial(n)) / denom))


def simulate_lines(
    n: int, theta: float, rng: RngStream, horizon: float | None = None
) -> LinePath:
    """Simulate the line-count chain, to absorption or to a fixed horizon.

    From i >= 2 the chain waits Exp(1 + i theta/2) and steps to i - 1 by
    mutation (probability i theta / (2 + i theta)) or collapses to 1; from
    1 only the final mutation remains, rate theta/2.  Replacement epochs
    seen from a single line relabel it without changing the count, so they
    are not simulated after the collapse.
    """
    _check_n(n)
    _check_theta(theta)
    if horizon is not None and not horizon > 0.0:
        raise InvalidParameterError("horizon must be positive when given")
    clock = 0.0
    state = n
    events: list[tuple[float, str, int]] = []
    coal_t = None
    coal_before = None
    absorb_t = None
    while state >= 1:
        rate = 0.5 * theta * state + (1.0 if state >= 2 else 0.0)
        wait = rng.gen.exponential() / rate
        if horizon is not None and clock + wait > horizon:
            break
        clock += wait
        if state >= 2 and rng.gen.random() * rate < 1.0:
            coal_t = clock
            coal_before = state
            state = 1
            events.append((clock, "coalescence", state))
        else:
            state -= 1
            if state == 0:
                absorb_t = clock
            events.append((clock, "mutation", state))
    return LinePath(
        initial_lines=n,
        horizon=horizon,
        events=tuple(events),
        final_lines=state,
        coalescence_time=coal_t,
        lines_before_coalescence=coal_before,
        absorption_time=absorb_t,
    )


def _line_ensemble(
    n: int, theta: float, t: float, size: int, rng: RngStream
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized chain endpoints: (state at t, lines before collapse).

    The second array is 0 for replicates with no collapse before t.  Each
    stage processes one event per active replicate, so at most n + 1 stages
    run regardless of size.
    """
    state = np.full(size, n, dtype=np.int64)
    clock = np.zeros(size)
    coal_before = np.zeros(size, dtype=np.int64)
    active = np.arange(size)
    while active.size:
        s = state[active].astype(float)
        rate = 0.5 * theta * s + (s >= 2.0)
        landed = clock[active] + rng.gen.exponential(size=active.size) / rate
        alive = landed <= t
        idx = active[alive]
        clock[idx] = landed[alive]
        s_idx = state[idx]
        coal = (s_idx >= 2) & (
            rng.gen.random(idx.size) * (0.5 * theta * s_idx + 1.0) < 1.0
        )
        coal_idx = idx[coal]
        coal_before[coal_idx] = s_idx[coal]
        state[coal_idx] = 1
        state[idx[~coal]] -= 1
        active = idx[state[idx] >= 1]
    return state, coal_before


def absorption_time_ensemble(n: int, theta: float, size: int, rng: RngStream) -> np.ndarray:
    """Absorption times of size independent chains, staged like the above."""
    _check_n(n)
    _check_theta(theta)
    state = np.full(size, n, dtype=np.int64)
    clock = np.zeros(size)
    active = np.arange(size)
    while active.size:
        s = state[active].astype(float)
        rate = 0.5 * theta * s + (s >= 2.0)
        clock[active] += rng.gen.exponential(size=active.size) / rate
        s_int = state[active]
        coal = (s_int >= 2) & (rng.gen.random(active.size) * (0.5 * theta * s_int + 1.0) < 1.0)
        state[active[coal]] = 1
        state[active[~coal]] -= 1
        active = active[state[active] >= 1]
    return clock


def duality_check(
    params: TwoTypeParams, n: int, x: float, t: float, n_mc: int, rng: RngStream
) -> tuple[float, float, float]:
    """Moment duality: E_x[xi(t)^n] against the backward-line estimator.

    The left side expands xi^n binomially through centered transition
    moments.  The right side averages, per simulated chain, x^A p^{n-A}
    when no collapse occurred by t (A the state at t, possibly 0), and
    after a collapse from i lines either x p^{n-i} (the merged line still
    unresolved at t) or p^{n+1-i} (it mutated too).

    Returns:
        (lhs, rhs, rhs standard error).
    """
    _check_n(n)
    if not (0.0 <= x <= 1.0):
        raise InvalidParameterError(f"x must lie in [0, 1], got {x!r}")
    if not t > 0.0:
        raise InvalidParameterError(f"t must be positive, got {t!r}")
    if n_mc < 2:
        raise InvalidParameterError("n_mc must be at least 2")
    p = params.p
    lhs = math.fsum(
        math.comb(n, k) * p ** (n - k) * transition_moment(params, k, x, t)
        for k in range(n + 1)
    )
    state, coal_before = _line_ensemble(n, params.theta, t, n_mc, rng)
    values = np.empty(n_mc)
    no_coal = coal_before == 0
    values[no_coal] = x ** state[no_coal].astype(float) * p ** (n - state[no_coal]).astype(float)
    merged = ~no_coal
    exponent = (n - coal_before[merged]).astype(float)
    values[merged] = np.where(
        state[merged] == 1, x * p**exponent, p ** (exponent + 1.0)
    )
    rhs = float(values.mean())
    rhs_se = float(values.std(ddof=1) / math.sqrt(n_mc))
    return lhs, rhs, rhs_se


def stationary_moment_via_coalescent(
    params: TwoTypeParams, n: int, n_mc: int, rng: RngStream
) -> tuple[float, float]:
    """Estimate of the stationary E[xi^n] from the embedded jump chain.

    Runs the discrete chain until the first collapse from i >= 2 lines
    (value p^{n+1-i}) or until a single line remains without any collapse
    (value p^n, the same as a collapse from one line).  Time plays no role,
    only the jump probabilities i theta / (2 + i theta).

    Returns:
        (estimate, standard error); n = 1 returns (p, 0.0) since every
        trajectory then scores exactly p.
    """
    _check_n(n)
    if n_mc < 2:
        raise InvalidParameterError("n_mc must be at least 2")
    state = np.full(n_mc, n, dtype=np.int64)
    a = np.ones(n_mc, dtype=np.int64)
    active = np.arange(n_mc)
    while active.size:
        s = state[active].astype(float)
        coal = rng.gen.random(active.size) * (0.5 * params.theta * s + 1.0) < 1.0
        a[active[coal]] = state[active[coal]]
        state[active[coal]] = 1
        state[active[~coal]] -= 1
        active = active[(state[active] >= 2) & (a[active] == 1)]
    values = params.p ** (n + 1 - a).astype(float)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n_mc))
