"""Many-type and measure-valued extensions.

With d types and parent-independent mutation the process stays a finite
mixture of the two-type laws: conditioning on the last replacement's type i
puts the state on the segment from the mutation equilibrium p toward the
i-th vertex, so each region is a one-dimensional density in the coordinate
xi_i with the other coordinates pinned affinely.  Markov mutation (a
row-stochastic matrix applied at rate theta/2 per line) changes only the
single-line kernel, evaluated here by uniformization.  The infinitely-
many-types limit leaves one replacement family of mass eta plus dust, with
eta a Beta(2/theta, 1) variable; sampling formulas reduce to its moments,
kept in exact rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .core import InvalidParameterError, RngStream, replacement_decay_integral

__all__ = [
    "MultiParams",
    "MutationMatrix",
    "SimplexRegion",
    "SimplexLaw",
    "load_mutation_matrix",
    "pim_line_kernel",
    "pim_transition_law",
    "pim_region_density",
    "pim_stationary_sample",
    "markov_line_kernel",
    "markov_stationary_gamma",
    "markov_stationary_sample",
    "infinite_sampling_prob",
    "num_types_dist",
    "eta_moment",
]


@dataclass(frozen=True)
class MultiParams:
    """Parent-independent mutation on d types: rate theta/2, law p_vec."""

    theta: float
    p_vec: tuple[float, ...]

    def __post_init__(self):
        if not (self.theta > 0.0 and math.isfinite(self.theta)):
            raise InvalidParameterError(f"theta must be positive and finite, got {self.theta!r}")
        if len(self.p_vec) < 2:
            raise InvalidParameterError("p_vec needs at least two types")
        if any(not (0.0 < q < 1.0) for q in self.p_vec):
            raise InvalidParameterError("every type probability must lie strictly in (0, 1)")
        if abs(math.fsum(self.p_vec) - 1.0) > 1e-12:
            raise InvalidParameterError("type probabilities must sum to 1")

    @property
    def d(self) -> int:
        return len(self.p_vec)


@dataclass(frozen=True, eq=False)
class MutationMatrix:
    """Row-stochastic single-mutation transition matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise InvalidParameterError("mutation matrix must be square with d >= 2")
        if np.any(m < 0.0) or not np.all(np.isfinite(m)):
            raise InvalidParameterError("mutation matrix entries must be finite and non-negative")
        if np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-12:
            raise InvalidParameterError("mutation matrix rows must sum to 1")
        object.__setattr__(self, "matrix", m)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def is_irreducible(self) -> bool:
        reach = (self.matrix > 0.0) | np.eye(self.d, dtype=bool)
        for _ in range(max(1, math.ceil(math.log2(self.d)) + 1)):
            reach = reach @ reach
        return bool(np.all(reach))


def load_mutation_matrix(path) -> MutationMatrix:
    """Read a whitespace-separated numeric grid and validate it."""
    m = np.loadtxt(path, dtype=float, ndmin=2)
    return MutationMatrix(matrix=m)


@dataclass(frozen=True)
class SimplexRegion:
    """One replacement branch of the simplex-valued law.

    Parametrized by the coordinate xi_i of the replaced type on
    (lower, upper); companion(xi_i) returns the full state vector, whose
    other coordinates are the affine pin (1 - (xi_i - p_i)/(1 - p_i)) p_j.
    """

    index: int
    lower: float
    upper: float
    mass: float
    density: Callable[[float], float]
    companion: Callable[[float], tuple[float, ...]]


@dataclass(frozen=True)
class SimplexLaw:
    """Atom plus one segment density per type."""

    d: int
    atom_point: tuple[float, ...]
    atom_mass: float
    regions: tuple[SimplexRegion, ...]

    def __post_init__(self):
        total = self.atom_mass + math.fsum(r.mass for r in self.regions)
        if abs(total - 1.0) > 1e-9:
            raise InvalidParameterError(f"simplex law mass {total!r} must be 1")

    def total_mass(self) -> float:
        return self.atom_mass + math.fsum(r.mass for r in self.regions)


def _check_state(mp: MultiParams, x_vec) -> np.ndarray:
    x = np.asarray(x_vec, dtype=float)
    if x.shape != (mp.d,):
        raise InvalidParameterError(f"state must have {mp.d} coordinates")
    if np.any(x < 0.0) or np.any(x > 1.0) or abs(float(x.sum()) - 1.0) > 1e-9:
        raise InvalidParameterError("state must be a probability vector")
    return x


def pim_line_kernel(mp: MultiParams, t: float) -> np.ndarray:
    """Single-line kernel delta_ij e^{-theta t/2} + (1 - e^{-theta t/2}) p_j."""
    if t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t!r}")
    e = math.exp(-0.5 * mp.theta * t)
    m = -math.expm1(-0.5 * mp.theta * t)
    return e * np.eye(mp.d) + m * np.tile(np.asarray(mp.p_vec), (mp.d, 1))


def pim_transition_law(mp: MultiParams, x_vec, t: float) -> SimplexLaw:
    """Law at time t from state x: atom plus d replacement segments.

    Region i is the two-type upper piece in the coordinate xi_i with the
    pair (p_i, x_i); its mass p_i(1 - e^{-t}) + (x_i - p_i) K(theta, t)
    integrates the branch-i choice probability over the last replacement
    time.  Masses add to 1 exactly because the (x_i - p_i) terms cancel.
    """
    x = _check_state(mp, x_vec)
    if t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t!r}")
    if t == 0.0:
        return SimplexLaw(d=mp.d, atom_point=tuple(float(v) for v in x), atom_mass=1.0, regions=())
    if not math.isfinite(t):
        raise InvalidParameterError("pim_transition_law needs finite t")
    theta = mp.theta
    a = 2.0 / theta
    eh = math.exp(-0.5 * theta * t)
    s = -math.expm1(-t)
    big_k = replacement_decay_integral(theta, t)
    p = np.asarray(mp.p_vec)
    atom = p + (x - p) * eh

    regions = []
    for i in range(mp.d):
        pi, xi0 = float(p[i]), float(x[i])
        mass = pi * s + (xi0 - pi) * big_k

        def dens(v: float, _p=pi, _x=xi0, _eh=eh, _a=a) -> float:
            w = (v - _p) / (1.0 - _p)
            return (_p + _eh * (_x - _p) / w) * _a * w ** (_a - 1.0) / (1.0 - _p)

        def comp(v: float, _i=i, _p=pi, _pv=p) -> tuple[float, ...]:
            shrink = (1.0 - v) / (1.0 - _p)
            out = _pv * shrink
            out = out.tolist()
            out[_i] = v
            return tuple(out)

        regions.append(
            SimplexRegion(
                index=i,
                lower=pi + (1.0 - pi) * eh,
                upper=1.0,
                mass=mass,
                density=dens,
                companion=comp,
            )
        )
    return SimplexLaw(
        d=mp.d,
        atom_point=tuple(float(v) for v in atom),
        atom_mass=math.exp(-t),
        regions=tuple(regions),
    )


def pim_region_density(mp: MultiParams, x_vec, t: float, i: int, xi_i: float) -> float:
    """Branch-i density at coordinate value xi_i, zero off its segment."""
    x = _check_state(mp, x_vec)
    if not t > 0.0:
        raise InvalidParameterError(f"t must be positive, got {t!r}")
    if not 0 <= i < mp.d:
        raise InvalidParameterError("type index out of range")
    theta = mp.theta
    a = 2.0 / theta
    eh = math.exp(-0.5 * theta * t)
    pi, xi0 = mp.p_vec[i], float(x[i])
    if not (pi + (1.0 - pi) * eh < xi_i <= 1.0):
        return 0.0
    w = (xi_i - pi) / (1.0 - pi)
    return (pi + eh * (xi0 - pi) / w) * a * w ** (a - 1.0) / (1.0 - pi)


def pim_stationary_sample(mp: MultiParams, rng: RngStream, size=None):
    """Stationary state: mass eta = U^{theta/2} on type i ~ p_vec, rest split by p.

    Returns one (d,) vector or a (size, d) array.
    """
    p = np.asarray(mp.p_vec)
    if size is None:
        eta = rng.gen.random() ** (0.5 * mp.theta)
        i = int(rng.gen.choice(mp.d, p=p))
        out = (1.0 - eta) * p
        out[i] += eta
        return out
    eta = rng.gen.random(size) ** (0.5 * mp.theta)
    i = rng.gen.choice(mp.d, p=p, size=size)
    out = (1.0 - eta)[:, None] * p[None, :]
    out[np.arange(size), i] += eta
    return out


def markov_line_kernel(mm: MutationMatrix, theta: float, t: float) -> np.ndarray:
    """exp((theta/2)(M - I) t) by uniformization.

    Poisson-weighted powers of M with the weight tail kept below 1e-14;
    weights come from scipy's Poisson pmf so large theta t is safe.
    """
    from scipy.stats import poisson

    if not (theta > 0.0 and math.isfinite(theta)):
        raise InvalidParameterError(f"theta must be positive and finite, got {theta!r}")
    if t < 0.0 or not math.isfinite(t):
        raise InvalidParameterError(f"t must be non-negative and finite, got {t!r}")
    lam = 0.5 * theta * t
    if lam == 0.0:
        return np.eye(mm.d)
    kmax = max(20, int(lam + 12.0 * math.sqrt(lam) + 30.0))
    while poisson.sf(kmax, lam) > 1e-14:
        kmax *= 2
    weights = poisson.pmf(np.arange(kmax + 1), lam)
    out = np.zeros((mm.d, mm.d))
    power = np.eye(mm.d)
    for k in range(kmax + 1):
        out += weights[k] * power
        if k < kmax:
            power = power @ mm.matrix
    # Renormalize the truncated tail onto the rows; the error is <= 1e-14.
    out /= out.sum(axis=1, keepdims=True)
    return out


def markov_stationary_gamma(mm: MutationMatrix) -> np.ndarray:
    """Stationary law of the single-line chain: gamma M = gamma.

    Requires irreducibility; the linear system replaces one balance
    equation with the normalization row.
    """
    if not mm.is_irreducible():
        raise InvalidParameterError("mutation matrix must be irreducible")
    d = mm.d
    a = mm.matrix.T - np.eye(d)
    a[-1, :] = 1.0
    b = np.zeros(d)
    b[-1] = 1.0
    gamma = np.linalg.solve(a, b)
    gamma = np.clip(gamma, 0.0, None)
    return gamma / gamma.sum()


def markov_stationary_sample(mm: MutationMatrix, theta: float, rng: RngStream) -> np.ndarray:
    """Stationary state under Markov mutation.

    The last replacement happened Exp(1) ago with a type drawn from gamma;
    the state is that type's row of the line kernel over the elapsed time.
    """
    gamma = markov_stationary_gamma(mm)
    i = int(rng.gen.choice(mm.d, p=gamma))
    tau = rng.gen.exponential()
    return markov_line_kernel(mm, theta, tau)[i]


def infinite_sampling_prob(n: int, j: int, theta: float) -> float:
    """P(j of n sampled lines carry dust types, n - j the replacement family).

    Exact rational value of (n!/j!) (2/theta)_(j) / (1 + 2/theta)_(n) where
    (y)_(k) is the rising factorial; at theta = 2 every j gives 1/(n + 1).
    """
    if n < 1 or not 0 <= j <= n:
        raise InvalidParameterError("need n >= 1 and 0 <= j <= n")
    if not (theta > 0.0 and math.isfinite(theta)):
        raise InvalidParameterError(f"theta must be positive and finite, got {theta!r}")
    a = Fraction(2) / Fraction(theta)
    num = Fraction(math.factorial(n), math.factorial(j))
    for m in range(j):
        num *= a + m
    den = Fraction(1)
    for m in range(n):
        den *= 1 + a + m
    return float(num / den)


def eta_moment(m: int, b: int, theta: float) -> float:
    """E[eta^m (1 - eta)^b] for eta with density (2/theta) eta^{2/theta-1}.

    Equals (2/theta) b! / prod_{i=0..b} (2/theta + m + i), kept rational.
    """
    if m < 0 or b < 0:
        raise InvalidParameterError("moment orders must be non-negative")
    if not (theta > 0.0 and math.isfinite(theta)):
        raise InvalidParameterError(f"theta must be positive and finite, got {theta!r}")
    a = Fraction(2) / Fraction(theta)
    val = a * math.factorial(b)
    for i in range(b + 1):
        val /= a + m + i
    return float(val)


def num_types_dist(n: int, k: int, theta: float) -> float:
    """P(the sample shows k distinct types and hits the replacement family).

    With B block draws out of n, the type count is (n - B) + 1 when B >= 1,
    so this is C(n, k-1) E[eta^{n-k+1} (1 - eta)^{k-1}].  The all-dust event
    (B = 0, also k = n types) is excluded here; summing over k therefore
    gives 1 - eta_moment(0, n, theta).
    """
    if n < 1 or not 1 <= k <= n:
        raise InvalidParameterError("need n >= 1 and 1 <= k <= n")
    return math.comb(n, k - 1) * eta_moment(n - k + 1, k - 1, theta)
