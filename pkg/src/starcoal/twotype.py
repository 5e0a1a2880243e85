"""Two-type star-shaped Fleming-Viot process: exact laws and simulation.

The population is totally replaced by one individual's offspring at rate 1,
and between replacements each line mutates at rate theta/2, choosing type 1
with probability p.  Conditioning on the last replacement time gives every
law in closed form: the transition law is an atom (no replacement yet) plus
two density pieces, one per replacement type, separated by a gap of zero
density.  This module evaluates those laws, their moments, the per-
replacement-count decomposition of the density, and provides exact samplers
and a forward path simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    InvalidParameterError,
    MixedLaw,
    Piece,
    RngStream,
    TwoTypeParams,
    exp_decay_window,
    replacement_decay_integral,
    truncated_exponential_inverse_cdf,
)

__all__ = [
    "LineKernel",
    "PathRecord",
    "line_kernel",
    "marginal_q",
    "transition_law",
    "transition_density_eval",
    "stationary_law",
    "stationary_density_eval",
    "stationary_sample",
    "transition_moment",
    "stationary_moment",
    "sample_transition",
    "simulate_path",
    "path_endpoint_ensemble",
    "replacement_component_density",
]


@dataclass(frozen=True)
class LineKernel:
    """Single-line type-change probabilities over a fixed horizon.

    Entry ij is the probability a line of type i at time 0 is of type j at
    the horizon, given no replacement event occurred.
    """

    p11: float
    p12: float
    p21: float
    p22: float

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.p11, self.p12], [self.p21, self.p22]])


@dataclass(frozen=True)
class PathRecord:
    """A simulated forward trajectory.

    events holds (time, replacement type, frequency just after) triples in
    increasing time order; frequency is 1.0 after a type-1 replacement and
    0.0 after a type-2 replacement.
    """

    initial_frequency: float
    horizon: float
    events: tuple[tuple[float, int, float], ...]
    final_frequency: float


def _check_x(x: float):
    if not (0.0 <= x <= 1.0):
        raise InvalidParameterError(f"frequency x must lie in [0, 1], got {x!r}")


def _check_t(t: float, *, positive: bool = False):
    if positive:
        if not t > 0.0:
            raise InvalidParameterError(f"t must be positive, got {t!r}")
    elif t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t!r}")


def line_kernel(params: TwoTypeParams, t: float) -> LineKernel:
    """Mutation-only transition matrix of a single line over (0, t).

    A line keeps its type unless at least one mutation occurs (probability
    1 - e^{-theta t/2}), in which case the last mutation decides the type,
    landing on type 1 with probability p.
    """
    _check_t(t)
    e = math.exp(-0.5 * params.theta * t)
    m = -math.expm1(-0.5 * params.theta * t)
    p = params.p
    return LineKernel(p11=e + m * p, p12=m * (1.0 - p), p21=m * p, p22=e + m * (1.0 - p))


def marginal_q(params: TwoTypeParams, x: float, t: float) -> tuple[float, float]:
    """Type distribution of one individual drawn at time t, no replacement.

    q1 = x e^{-theta t/2} + (1 - e^{-theta t/2}) p, written here as
    p + (x-p) e^{-theta t/2} so that x = p is an exact fixed point.
    """
    _check_x(x)
    _check_t(t)
    q1 = params.p + (x - params.p) * math.exp(-0.5 * params.theta * t)
    return q1, 1.0 - q1


def transition_law(params: TwoTypeParams, x: float, t: float) -> MixedLaw:
    """Law of the type-1 frequency at time t started from x.

    Structure: an atom at the mutation-flow point q1(t; x) with mass e^{-t}
    (no replacement yet), a density piece on (p + (1-p)e^{-theta t/2}, 1)
    from type-1 replacements, a mirrored piece on (0, p(1-e^{-theta t/2}))
    from type-2 replacements, and zero density on the middle gap, which
    contains the atom.  Piece masses are closed-form: integrating the type-1
    branch over the last-replacement time gives
    p(1-e^{-t}) + (x-p) K(theta,t) with K the replacement decay integral.

    Args:
        params: mutation parameters.
        x: initial frequency in [0, 1].
        t: horizon; t = 0 returns the point mass at x.

    Returns:
        MixedLaw with exact component masses.
    """
    _check_x(x)
    _check_t(t)
    if t == 0.0:
        return MixedLaw(atoms=((x, 1.0),), pieces=())
    if not math.isfinite(t):
        raise InvalidParameterError("transition_law needs finite t; the t=inf law is stationary_law")
    theta, p = params.theta, params.p
    a = 2.0 / theta
    delta = 1.0 - 0.5 * theta
    eh = math.exp(-0.5 * theta * t)
    mix = -math.expm1(-0.5 * theta * t)
    atom_mass = math.exp(-t)
    s = -math.expm1(-t)
    big_k = replacement_decay_integral(theta, t)
    # Shared subexpressions so the atom lands exactly on a gap edge when
    # x is 0 or 1; p + (x-p) eh would differ from the edge by an ulp.
    q1 = x * eh + p * mix

    mass_up = p * s + (x - p) * big_k
    mass_lo = s - mass_up

    def dens_up(xi: float, _p=p, _x=x, _eh=eh, _a=a) -> float:
        w = (xi - _p) / (1.0 - _p)
        return (_p + _eh * (_x - _p) / w) * _a * w ** (_a - 1.0) / (1.0 - _p)

    def cdf_up(xi: float, _p=p, _x=x, _a=a, _d=delta, _t=t, _am=atom_mass) -> float:
        w = (xi - _p) / (1.0 - _p)
        return _p * (w**_a - _am) + (_x - _p) * exp_decay_window(_d, _t, _t + _a * math.log(w))

    def dens_lo(xi: float, _p=p, _x=x, _eh=eh, _a=a) -> float:
        v = 1.0 - xi / _p
        return (1.0 - _p - _eh * (_x - _p) / v) * _a * v ** (_a - 1.0) / _p

    def cdf_lo(xi: float, _p=p, _x=x, _a=a, _d=delta, _t=t, _K=big_k) -> float:
        v = 1.0 - xi / _p
        win = exp_decay_window(_d, _t, _t + _a * math.log(v))
        return (1.0 - _p) * (1.0 - v**_a) - (_x - _p) * (_K - win)

    # Offset forms: w and v recovered from the exact distance to the piece
    # edge, where both branches have a boundary layer of width eh that the
    # absolute coordinate cannot resolve once eh is below an ulp of p.

    def dens_up_off(d: float, _p=p, _x=x, _eh=eh, _a=a) -> float:
        w = _eh + d / (1.0 - _p)
        return (_p + _eh * (_x - _p) / w) * _a * w ** (_a - 1.0) / (1.0 - _p)

    def dens_lo_off(d: float, _p=p, _x=x, _eh=eh, _a=a) -> float:
        v = _eh + d / _p
        return (1.0 - _p - _eh * (_x - _p) / v) * _a * v ** (_a - 1.0) / _p

    steep = "lower" if a < 1.0 else None
    pieces = []
    if mass_up > 0.0:
        pieces.append(
            Piece(
                lower=eh + p * mix,
                upper=1.0,
                density=dens_up,
                mass=mass_up,
                cdf=cdf_up,
                singular=steep,
                offset_density=dens_up_off,
                offset_side="lower",
                offset_width=(1.0 - p) * mix,
            )
        )
    if mass_lo > 0.0:
        pieces.append(
            Piece(
                lower=0.0,
                upper=p * mix,
                density=dens_lo,
                mass=mass_lo,
                cdf=cdf_lo,
                singular="upper" if a < 1.0 else None,
                offset_density=dens_lo_off,
                offset_side="upper",
                offset_width=p * mix,
            )
        )
    return MixedLaw(atoms=((q1, atom_mass),), pieces=tuple(pieces))


def transition_density_eval(params: TwoTypeParams, x: float, t: float, xi: float) -> float:
    """Continuous-part density of the transition law at xi.

    Returns 0 on the closed middle gap and outside [0, 1]; the atom at
    q1(t; x) is not represented here.  t = inf is allowed and gives the
    stationary branches.
    """
    _check_x(x)
    _check_t(t, positive=True)
    theta, p = params.theta, params.p
    a = 2.0 / theta
    eh = math.exp(-0.5 * theta * t)
    if xi > p + (1.0 - p) * eh and xi <= 1.0:
        w = (xi - p) / (1.0 - p)
        return (p + eh * (x - p) / w) * a * w ** (a - 1.0) / (1.0 - p)
    if 0.0 <= xi < p * -math.expm1(-0.5 * theta * t):
        v = 1.0 - xi / p
        return (1.0 - p - eh * (x - p) / v) * a * v ** (a - 1.0) / p
    return 0.0


def stationary_law(params: TwoTypeParams) -> MixedLaw:
    """Stationary law: no atom, one density piece each side of p.

    The side above p carries mass p (the last replacement was type 1) and
    density p (2/theta) w^{2/theta - 1} / (1-p) with w = (xi-p)/(1-p); the
    side below p mirrors it with mass 1-p.  At theta = 2, p = 1/2 both
    branches are constant 1, the Uniform(0,1) law.
    """
    theta, p = params.theta, params.p
    a = 2.0 / theta
    half = 0.5 * theta

    def dens_up(xi: float, _p=p, _a=a) -> float:
        return _p * _a * ((xi - _p) / (1.0 - _p)) ** (_a - 1.0) / (1.0 - _p)

    def dens_lo(xi: float, _p=p, _a=a) -> float:
        return (1.0 - _p) * _a * (1.0 - xi / _p) ** (_a - 1.0) / _p

    pieces = (
        Piece(
            lower=p,
            upper=1.0,
            density=dens_up,
            mass=p,
            cdf=lambda xi, _p=p, _a=a: _p * ((xi - _p) / (1.0 - _p)) ** _a,
            inverse_cdf=lambda u, _p=p, _h=half: _p + (1.0 - _p) * u**_h,
            singular="lower" if a < 1.0 else None,
            offset_density=lambda d, _p=p, _a=a: _p * _a * (d / (1.0 - _p)) ** (_a - 1.0) / (1.0 - _p),
            offset_side="lower",
            offset_width=1.0 - p,
        ),
        Piece(
            lower=0.0,
            upper=p,
            density=dens_lo,
            mass=1.0 - p,
            cdf=lambda xi, _p=p, _a=a: (1.0 - _p) * (1.0 - (1.0 - xi / _p) ** _a),
            inverse_cdf=lambda u, _p=p, _h=half: _p * (1.0 - (1.0 - u) ** _h),
            singular="upper" if a < 1.0 else None,
            offset_density=lambda d, _p=p, _a=a: (1.0 - _p) * _a * (d / _p) ** (_a - 1.0) / _p,
            offset_side="upper",
            offset_width=p,
        ),
    )
    return MixedLaw(atoms=(), pieces=pieces)


def stationary_density_eval(params: TwoTypeParams, xi: float) -> float:
    """Pointwise stationary density with the xi >= p branch at the split.

    At xi = p the two one-sided limits agree except when theta = 2 with
    p != 1/2; the upper branch value is returned there.  An infinite limit
    (theta > 2) is reported as inf rather than raising.
    """
    if not (0.0 <= xi <= 1.0):
        raise InvalidParameterError(f"xi must lie in [0, 1], got {xi!r}")
    theta, p = params.theta, params.p
    a = 2.0 / theta
    if xi == p and a < 1.0:
        return math.inf
    if xi >= p:
        return p * a * ((xi - p) / (1.0 - p)) ** (a - 1.0) / (1.0 - p)
    return (1.0 - p) * a * (1.0 - xi / p) ** (a - 1.0) / p


def stationary_sample(params: TwoTypeParams, rng: RngStream, size=None):
    """Exact stationary draw via the eta representation.

    eta = U^{theta/2} has density (2/theta) eta^{2/theta - 1}; the sample is
    p(1-eta) + eta with probability p, else p(1-eta).
    """
    if size is None:
        eta = rng.gen.random() ** (0.5 * params.theta)
        base = params.p * (1.0 - eta)
        return base + eta if rng.gen.random() < params.p else base
    eta = rng.gen.random(size) ** (0.5 * params.theta)
    base = params.p * (1.0 - eta)
    return np.where(rng.gen.random(size) < params.p, base + eta, base)


def transition_moment(params: TwoTypeParams, n: int, x: float, t: float) -> float:
    """E_x[(xi(t) - p)^n] in closed form.

    Three terms: the decaying n-th power, the stationary contribution, and a
    cross term linear in (x - p).  Valid for all n >= 0 including t = 0 and
    t = inf; n = 0 short-circuits to 1 because the cross-term bracket
    vanishes only symbolically there (the denominator 2/theta - 1 can be 0).
    """
    if n < 0:
        raise InvalidParameterError("moment order n must be non-negative")
    _check_x(x)
    _check_t(t)
    if n == 0:
        return 1.0
    theta, p = params.theta, params.p
    a = 2.0 / theta
    q = 1.0 - p
    dx = x - p
    decay_n = math.exp(-(1.0 + 0.5 * n * theta) * t)
    main = decay_n * dx**n
    stat = (a / (n + a)) * (p * q**n + (-1.0) ** n * q * p**n) * (1.0 - decay_n)
    cross = (
        dx
        * math.exp(-0.5 * theta * t)
        * (a / (n - 1.0 + a))
        * (q**n - (-1.0) ** n * p**n)
        * -math.expm1(-(1.0 + 0.5 * (n - 1) * theta) * t)
    )
    return main + stat + cross


def stationary_moment(params: TwoTypeParams, n: int) -> tuple[float, float]:
    """Stationary moments (E[(xi-p)^n], E[xi^n]).

    The central form is the t -> inf limit of transition_moment; the raw
    form expands xi^n = ((xi-p) + p)^n binomially through the centered
    moments, whose odd first term vanishes.
    """
    if n < 0:
        raise InvalidParameterError("moment order n must be non-negative")
    theta, p = params.theta, params.p
    a = 2.0 / theta
    q = 1.0 - p

    def central(k: int) -> float:
        if k == 0:
            return 1.0
        return (a / (k + a)) * (p * q**k + (-1.0) ** k * q * p**k)

    raw = math.fsum(math.comb(n, k) * p ** (n - k) * central(k) for k in range(n + 1))
    return central(n), raw


def sample_transition(params: TwoTypeParams, x: float, t: float, rng: RngStream, size=None):
    """Exact draw(s) from the transition law.

    Uses the last-replacement representation: with probability e^{-t} return
    the atom q1(t; x); otherwise draw the back-distance tau from the
    truncated exponential on (0, t), choose branch 1 with probability
    q1(t - tau; x), and return p_{11}(tau) or p_{21}(tau).

    Args:
        size: None for a scalar, else an ensemble shape; the vector path
            consumes exactly three aligned uniform blocks so results are
            reproducible under resizing of downstream code.
    """
    _check_x(x)
    _check_t(t, positive=True)
    theta, p = params.theta, params.p
    eh = math.exp(-0.5 * theta * t)
    atom = p + (x - p) * eh
    atom_mass = math.exp(-t)
    scalar = size is None
    shape = () if scalar else size
    u_atom = rng.gen.random(shape)
    u_tau = rng.gen.random(shape)
    u_type = rng.gen.random(shape)
    tau = truncated_exponential_inverse_cdf(u_tau, t)
    decay = np.exp(-0.5 * theta * tau)
    q1_back = p + (x - p) * np.exp(-0.5 * theta * (t - tau))
    upper = p + (1.0 - p) * decay
    lower = p * (1.0 - decay)
    out = np.where(u_atom < atom_mass, atom, np.where(u_type < q1_back, upper, lower))
    return float(out) if scalar else out


def simulate_path(params: TwoTypeParams, x: float, horizon: float, rng: RngStream) -> PathRecord:
    """Forward jump-process trajectory on [0, horizon].

    Replacement epochs arrive at rate 1.  Between epochs the frequency
    follows the deterministic mutation flow toward p; at an epoch the whole
    population becomes type 1 with probability equal to the current
    frequency (setting it to 1), else type 2 (setting it to 0).
    """
    _check_x(x)
    _check_t(horizon, positive=True)
    theta, p = params.theta, params.p
    events = []
    clock = 0.0
    freq = x
    while True:
        wait = rng.gen.exponential()
        if clock + wait > horizon:
            break
        clock += wait
        before = p + (freq - p) * math.exp(-0.5 * theta * wait)
        freq = 1.0 if rng.gen.random() < before else 0.0
        events.append((clock, 1 if freq == 1.0 else 2, freq))
    final = p + (freq - p) * math.exp(-0.5 * theta * (horizon - clock))
    return PathRecord(
        initial_frequency=x, horizon=horizon, events=tuple(events), final_frequency=final
    )


def path_endpoint_ensemble(
    params: TwoTypeParams, x: float, t: float, n_paths: int, rng: RngStream
) -> np.ndarray:
    """Endpoint frequencies of n_paths independent forward trajectories.

    Staged vectorization: each stage advances every still-active path by one
    replacement event; paths whose next event falls beyond t are finalized
    by the deterministic flow.  The stage count is the maximum event count,
    which concentrates near t + O(sqrt(t log n_paths)).
    """
    theta, p = params.theta, params.p
    clock = np.zeros(n_paths)
    freq = np.full(n_paths, float(x))
    active = np.arange(n_paths)
    while active.size:
        wait = rng.gen.exponential(size=active.size)
        landed = clock[active] + wait
        hit = landed <= t
        idx = active[hit]
        clock[idx] = landed[hit]
        before = p + (freq[idx] - p) * np.exp(-0.5 * theta * wait[hit])
        freq[idx] = (rng.gen.random(idx.size) < before).astype(float)
        active = idx
    return p + (freq - p) * np.exp(-0.5 * theta * (t - clock))


def replacement_component_density(
    params: TwoTypeParams, x: float, t: float, k: int, xi: float
) -> float:
    """Joint density of exactly k replacements in (0, t) and frequency xi.

    Supported on the same two intervals as the transition density; the sum
    over k >= 1 recovers it, and each component integrates to the Poisson
    weight e^{-t} t^k / k!.  The factor u = 1 + (2/(theta t)) log w is the
    conditional position of the last of k uniformly ordered replacements.
    """
    if k < 1:
        raise InvalidParameterError("replacement count k must be at least 1")
    _check_x(x)
    _check_t(t, positive=True)
    if not math.isfinite(t):
        raise InvalidParameterError("t must be finite")
    theta, p = params.theta, params.p
    eh = math.exp(-0.5 * theta * t)
    log_poisson = k * math.log(t) - t - math.lgamma(k + 1.0)
    if xi > p + (1.0 - p) * eh and xi <= 1.0:
        w = (xi - p) / (1.0 - p)
        u = 1.0 + 2.0 * math.log(w) / (theta * t)
        r1 = p + (x - p) * eh / w
        return (2.0 * k * r1 / (theta * t * (xi - p))) * u ** (k - 1) * math.exp(log_poisson)
    if 0.0 <= xi < p * -math.expm1(-0.5 * theta * t):
        v = 1.0 - xi / p
        u = 1.0 + 2.0 * math.log(v) / (theta * t)
        r2 = 1.0 - p - (x - p) * eh / v
        return (2.0 * k * r2 / (theta * t * (p - xi))) * u ** (k - 1) * math.exp(log_poisson)
    return 0.0
