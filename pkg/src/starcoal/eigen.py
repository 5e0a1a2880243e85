"""Spectral decomposition of the two-type generator.

The generator L g = x(g(1)-g(x)) + (1-x)(g(0)-g(x)) + (theta/2)(p-x) g'(x)
acts triangularly on polynomials in y = x - p, so its eigenfunctions are
monic polynomials P_n = y^n + c_{n1} y + c_{n0} with eigenvalues 0, theta/2,
and 1 + n theta/2 for n >= 2.  The dual basis pairs a polynomial with the
stationary law (n = 0), a principal value against the unbounded kernel Q1
(n = 1), and plain Taylor coefficients at p (n >= 2).  Everything here is
closed-form linear algebra on coefficient tuples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    InvalidParameterError,
    QuadSpec,
    SingularityError,
    TwoTypeParams,
    quad,
)

__all__ = [
    "PolyRep",
    "EigenSystem",
    "eigenvalue",
    "eigen_coefficients",
    "eigen_poly",
    "eigen_system",
    "generator_apply",
    "q1_eval",
    "pv_expectation_g_q1",
    "pv_expectation_g_q1_numeric",
    "stationary_expectation",
    "hyper_pairing",
    "expansion_expectation",
]


@dataclass(frozen=True)
class PolyRep:
    """Polynomial stored by coefficients in powers of (x - shift).

    coeffs[k] multiplies (x - shift)^k.  The tuple may carry trailing zeros;
    degree reports the largest index with a non-zero entry.
    """

    shift: float
    coeffs: tuple[float, ...]

    def __post_init__(self):
        if not self.coeffs:
            raise InvalidParameterError("PolyRep needs at least one coefficient")
        if not all(math.isfinite(c) for c in self.coeffs):
            raise InvalidParameterError("PolyRep coefficients must be finite")
        if not math.isfinite(self.shift):
            raise InvalidParameterError("PolyRep shift must be finite")

    @property
    def degree(self) -> int:
        for k in range(len(self.coeffs) - 1, -1, -1):
            if self.coeffs[k] != 0.0:
                return k
        return 0

    def coefficient(self, k: int) -> float:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0.0

    def __call__(self, x: float) -> float:
        y = x - self.shift
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * y + c
        return acc

    def derivative(self) -> "PolyRep":
        if len(self.coeffs) == 1:
            return PolyRep(self.shift, (0.0,))
        return PolyRep(self.shift, tuple(k * c for k, c in enumerate(self.coeffs) if k > 0))

    def with_shift(self, new_shift: float) -> "PolyRep":
        """Re-expand around new_shift by binomial shifting."""
        if new_shift == self.shift:
            return self
        d = new_shift - self.shift
        n = len(self.coeffs)
        out = [0.0] * n
        for j in range(n):
            out[j] = math.fsum(
                self.coeffs[k] * math.comb(k, j) * d ** (k - j) for k in range(j, n)
            )
        return PolyRep(new_shift, tuple(out))


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues and eigen polynomials up to a requested degree."""

    params: TwoTypeParams
    eigenvalues: tuple[float, ...]
    polys: tuple[PolyRep, ...]


def eigenvalue(params: TwoTypeParams, n: int) -> float:
    """n-th eigenvalue: 0, theta/2, then 1 + n theta/2 from n = 2 on.

    The jump between n = 1 and n = 2 reflects the replacement events, which
    kill all centered powers of degree >= 2 but only relabel degree 1.
    """
    if n < 0:
        raise InvalidParameterError("eigenvalue index must be non-negative")
    if n == 0:
        return 0.0
    if n == 1:
        return 0.5 * params.theta
    return 1.0 + 0.5 * n * params.theta


def eigen_coefficients(params: TwoTypeParams, n: int) -> tuple[float, float]:
    """Constant and linear corrections (c_n0, c_n1) of the n-th eigen poly."""
    if n < 2:
        raise InvalidParameterError("correction coefficients exist for n >= 2 only")
    theta, p = params.theta, params.p
    a = 2.0 / theta
    q = 1.0 - p
    c0 = -(a / (n + a)) * (p * q**n + q * (-p) ** n)
    c1 = (a / (n - 1.0 + a)) * ((-p) ** n - q**n)
    return c0, c1


def eigen_poly(params: TwoTypeParams, n: int) -> PolyRep:
    """Monic eigen polynomial P_n in powers of (x - p).

    P_0 = 1, P_1 = x - p, and for n >= 2 the pure power is corrected by a
    linear and a constant term so the low-degree output of the generator
    cancels.
    """
    if n < 0:
        raise InvalidParameterError("eigen poly index must be non-negative")
    if n == 0:
        return PolyRep(params.p, (1.0,))
    if n == 1:
        return PolyRep(params.p, (0.0, 1.0))
    c0, c1 = eigen_coefficients(params, n)
    coeffs = [0.0] * (n + 1)
    coeffs[0] = c0
    coeffs[1] = c1
    coeffs[n] = 1.0
    return PolyRep(params.p, tuple(coeffs))


def eigen_system(params: TwoTypeParams, max_degree: int) -> EigenSystem:
    if max_degree < 0:
        raise InvalidParameterError("max_degree must be non-negative")
    ns = range(max_degree + 1)
    return EigenSystem(
        params=params,
        eigenvalues=tuple(eigenvalue(params, n) for n in ns),
        polys=tuple(eigen_poly(params, n) for n in ns),
    )


def generator_apply(params: TwoTypeParams, g: PolyRep) -> PolyRep:
    """Apply the generator to a polynomial, exactly.

    In the (x - p) basis with coefficients a_k the image has coefficients
    -(1 + k theta/2) a_k for k >= 2, (g(1) - g(0)) - (1 + theta/2) a_1 at
    k = 1, and (1-p) g(0) + p g(1) - a_0 at k = 0.
    """
    g = g.with_shift(params.p)
    a = g.coeffs
    g0 = g(0.0)
    g1 = g(1.0)
    out = list(a)
    out[0] = (1.0 - params.p) * g0 + params.p * g1 - a[0]
    if len(a) > 1:
        out[1] = (g1 - g0) - (1.0 + 0.5 * params.theta) * a[1]
    for k in range(2, len(a)):
        out[k] = -(1.0 + 0.5 * k * params.theta) * a[k]
    return PolyRep(params.p, tuple(out))


def q1_eval(params: TwoTypeParams, xi: float) -> float:
    """Degree-1 dual kernel, unbounded and non-integrable at p.

    Equals (1/p) ((xi-p)/(1-p))^{-1} above p and
    -(1/(1-p)) (1 - xi/p)^{-1} below; at p = 1/2 both collapse to
    1/(xi - 1/2).  Pairings against it only exist as principal values.
    """
    if not (0.0 <= xi <= 1.0):
        raise InvalidParameterError(f"xi must lie in [0, 1], got {xi!r}")
    p = params.p
    if xi == p:
        raise SingularityError("Q1 diverges at xi = p")
    if xi > p:
        return (1.0 - p) / (p * (xi - p))
    return -p / ((1.0 - p) * (p - xi))


def _linear_part_removed(g: PolyRep, p: float) -> tuple[float, ...]:
    return g.with_shift(p).coeffs


def pv_expectation_g_q1(params: TwoTypeParams, g: PolyRep) -> float:
    """Principal value of E[g(xi) Q1(xi)] under the stationary law.

    Series route: the centered powers pair as (x-p)^1 -> 1 and
    (x-p)^n -> -c_{n1} for n >= 2, constants pair to 0, so the value is
    a_1 - sum_{n>=2} a_n c_{n1}.
    """
    a = _linear_part_removed(g, params.p)
    if len(a) < 2:
        return 0.0
    acc = [a[1]]
    for n in range(2, len(a)):
        if a[n] != 0.0:
            _, c1 = eigen_coefficients(params, n)
            acc.append(-a[n] * c1)
    return math.fsum(acc)


def pv_expectation_g_q1_numeric(
    params: TwoTypeParams,
    g: PolyRep,
    spec: QuadSpec | None = None,
) -> float:
    """Principal value via the symmetric-mass substitution, numerically.

    Both stationary branches map to eta in (0, 1) with density
    (2/theta) eta^{2/theta - 1}, and Q1 contributes +1/eta above p and
    -1/eta below with equal branch weights, so the symmetric truncations
    of the PV integral collapse to one absolutely convergent integral of
    g(p + (1-p) eta) - g(p(1 - eta)) against (2/theta) eta^{2/theta - 2}.

    The branch difference is expanded in coefficients before integrating:
    evaluating the two branches separately and subtracting loses all
    precision as eta -> 0, where the quadrature needs the integrand most.
    """
    if not isinstance(g, PolyRep):
        raise InvalidParameterError("the principal-value pairing is defined for polynomial observables")
    theta, p = params.theta, params.p
    a = 2.0 / theta
    b = g.with_shift(p).coeffs
    # g(p + (1-p) eta) - g(p (1-eta)) = sum_k b_k ((1-p)^k - (-p)^k) eta^k,
    # with the k = 0 terms cancelling identically.
    diff = tuple(bk * ((1.0 - p) ** k - (-p) ** k) for k, bk in enumerate(b))

    def integrand(eta: float) -> float:
        acc = 0.0
        for c in reversed(diff[1:]):
            acc = acc * eta + c
        return a * eta ** (a - 1.0) * acc

    return quad(integrand, 0.0, 1.0, spec, singular_lower=True)


def stationary_expectation(params: TwoTypeParams, g: PolyRep) -> float:
    """E[g(xi)] under the stationary law, by pairing centered powers.

    E[(xi-p)^n] = -c_{n0} for n >= 2 and 0 for n = 1, so the value is
    a_0 - sum_{n>=2} a_n c_{n0}.
    """
    a = _linear_part_removed(g, params.p)
    acc = [a[0]]
    for n in range(2, len(a)):
        if a[n] != 0.0:
            c0, _ = eigen_coefficients(params, n)
            acc.append(-a[n] * c0)
    return math.fsum(acc)


def hyper_pairing(g: PolyRep, n: int) -> float:
    """Dual pairing of order n >= 2: the n-th Taylor coefficient at g.shift.

    The order-n dual functional annihilates polynomials of degree < n and
    all higher centered powers' low-degree corrections, leaving
    g^{(n)}(shift)/n!.
    """
    if n < 2:
        raise InvalidParameterError("hyper pairing is defined for n >= 2")
    return g.coefficient(n)


def expansion_expectation(params: TwoTypeParams, g: PolyRep, x: float, t: float) -> float:
    """E_x[g(xi(t))] assembled from the eigen expansion.

    Stationary term, plus e^{-theta t/2} times the PV pairing times (x-p),
    plus sum over n >= 2 of e^{-(1 + n theta/2) t} a_n P_n(x).  Agrees with
    the moment route for every polynomial.
    """
    if not (0.0 <= x <= 1.0):
        raise InvalidParameterError(f"x must lie in [0, 1], got {x!r}")
    if t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t!r}")
    g = g.with_shift(params.p)
    a = g.coeffs
    acc = [stationary_expectation(params, g)]
    if len(a) > 1:
        pv = pv_expectation_g_q1(params, g)
        acc.append(math.exp(-0.5 * params.theta * t) * pv * (x - params.p))
    for n in range(2, len(a)):
        if a[n] != 0.0:
            lam = 1.0 + 0.5 * n * params.theta
            acc.append(math.exp(-lam * t) * a[n] * eigen_poly(params, n)(x))
    return math.fsum(acc)
