"""Selection through deterministic skeleton flows and the branching dual.

Between replacement events the frequency follows dx/dt = v(x) with
v(x) = (theta/2)(p - x) + (beta/2) x (1 - x); at rate-1 events it jumps to
1 or 0 with probability given by its current value.  All one-step laws
reduce to the flow from 1 (mu) and from 0 (nu), and the stationary law is
an exponentially weighted pushforward of those flows.  The quadratic's
roots r2 < 0 < r1 < 1 of chi^2 - (1 - theta/beta) chi - p theta/beta
control everything; r1 is the interior equilibrium.

The genealogical dual for pure selection is a branching chain: i lines
branch to i + 1 at rate i beta/2 and collapse to 1 at rate 1.  Collapse is
a constant-rate event, so the time to the ultimate ancestor is Exp(1)
whenever at least two lines are present.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .core import (
    DomainEscapeError,
    InvalidParameterError,
    MixedLaw,
    NoStationaryDistributionError,
    NonMonotoneDriftError,
    Piece,
    QuadSpec,
    RngStream,
    SimulationAbortError,
    quad,
)
from .twotype import PathRecord, TwoTypeParams
from .twotype import stationary_law as _neutral_stationary_law

__all__ = [
    "ASG_STATE_CAP",
    "DriftSpec",
    "RootPair",
    "AsgPath",
    "neutral_drift",
    "logistic_drift",
    "mutation_selection_drift",
    "custom_drift",
    "roots",
    "flow",
    "mu_nu",
    "skeleton_matrix",
    "replacement_stationary",
    "stationary_density",
    "stationary_law",
    "stationary_sample",
    "simulate_path",
    "fixation_prob",
    "asg_simulate",
    "ua_time_ensemble",
    "asg_stationary",
    "asg_stationary_gf",
    "asg_count_ensemble",
    "selection_duality_check",
]

ASG_STATE_CAP = 10_000_000

_SERIES_RATIO_LIMIT = 0.9


@dataclass(frozen=True)
class DriftSpec:
    """Between-event drift, one of four kinds.

    kind "neutral" uses (theta, p); "logistic" uses beta; the combined
    "mutation_selection" uses all three; "custom" carries a velocity
    callable with a Lipschitz bound for step control.  Use the factory
    functions rather than filling fields by hand.
    """

    kind: str
    theta: float | None = None
    p: float | None = None
    beta: float | None = None
    velocity_fn: Callable[[float], float] | None = None
    lipschitz: float | None = None

    def __post_init__(self):
        if self.kind not in ("neutral", "logistic", "mutation_selection", "custom"):
            raise InvalidParameterError(f"unknown drift kind {self.kind!r}")
        if self.kind in ("neutral", "mutation_selection"):
            if self.theta is None or not (self.theta > 0.0 and math.isfinite(self.theta)):
                raise InvalidParameterError("theta must be positive and finite")
            if self.p is None or not (0.0 < self.p < 1.0):
                raise InvalidParameterError("p must lie strictly in (0, 1)")
        if self.kind in ("logistic", "mutation_selection"):
            if self.beta is None or not (self.beta > 0.0 and math.isfinite(self.beta)):
                raise InvalidParameterError("beta must be positive and finite")
        if self.kind == "custom":
            if self.velocity_fn is None or not callable(self.velocity_fn):
                raise InvalidParameterError("custom drift needs a velocity callable")
            if self.lipschitz is None or not (self.lipschitz > 0.0 and math.isfinite(self.lipschitz)):
                raise InvalidParameterError("custom drift needs a positive Lipschitz bound")

    def velocity(self, x: float) -> float:
        if self.kind == "neutral":
            return 0.5 * self.theta * (self.p - x)
        if self.kind == "logistic":
            return 0.5 * self.beta * x * (1.0 - x)
        if self.kind == "mutation_selection":
            return 0.5 * self.theta * (self.p - x) + 0.5 * self.beta * x * (1.0 - x)
        return self.velocity_fn(x)


def neutral_drift(theta: float, p: float) -> DriftSpec:
    return DriftSpec(kind="neutral", theta=theta, p=p)


def logistic_drift(beta: float) -> DriftSpec:
    return DriftSpec(kind="logistic", beta=beta)


def mutation_selection_drift(theta: float, p: float, beta: float) -> DriftSpec:
    return DriftSpec(kind="mutation_selection", theta=theta, p=p, beta=beta)


def custom_drift(velocity, lipschitz: float) -> DriftSpec:
    return DriftSpec(kind="custom", velocity_fn=velocity, lipschitz=lipschitz)


@dataclass(frozen=True)
class RootPair:
    """Roots r2 < 0 < r1 < 1 of the drift quadratic, with shorthands.

    decay_rate is beta (r1 - r2) / 2, the relaxation rate of the flow;
    b and c are the flow constants from the endpoints 1 and 0.
    """

    theta: float
    beta: float
    p: float
    r1: float
    r2: float

    @property
    def decay_rate(self) -> float:
        return 0.5 * self.beta * (self.r1 - self.r2)

    @property
    def b(self) -> float:
        return (1.0 - self.r1) / (1.0 - self.r2)

    @property
    def c(self) -> float:
        return -self.r1 / self.r2


def roots(theta: float, beta: float, p: float) -> RootPair:
    """Solve chi^2 - (1 - phi) chi - p phi = 0, phi = theta/beta.

    The larger-magnitude root comes from the quadratic formula and the
    other from the exact product -p phi, which avoids cancellation when
    phi is large (weak selection).
    """
    if not (theta > 0.0 and math.isfinite(theta)):
        raise InvalidParameterError(f"theta must be positive and finite, got {theta!r}")
    if not (beta > 0.0 and math.isfinite(beta)):
        raise InvalidParameterError(f"beta must be positive and finite, got {beta!r}")
    if not (0.0 < p < 1.0):
        raise InvalidParameterError(f"p must lie strictly in (0, 1), got {p!r}")
    phi = theta / beta
    s = 1.0 - phi
    prod = -p * phi
    disc = math.sqrt(s * s - 4.0 * prod)
    if s >= 0.0:
        r1 = 0.5 * (s + disc)
        r2 = prod / r1
    else:
        r2 = 0.5 * (s - disc)
        r1 = prod / r2
    return RootPair(theta=theta, beta=beta, p=p, r1=r1, r2=r2)


def _ode_flow(drift: DriftSpec, chi0: float, t: float) -> float:
    from scipy.integrate import solve_ivp

    if t == 0.0:
        return chi0
    max_step = min(t, 1.0 / max(drift.lipschitz, 1e-12))
    sol = solve_ivp(
        lambda _s, y: [drift.velocity(float(y[0]))],
        (0.0, t),
        [chi0],
        method="RK45",
        rtol=1e-10,
        atol=1e-13,
        max_step=max_step,
    )
    if not sol.success:
        raise DomainEscapeError(f"flow integration failed: {sol.message}")
    traj = sol.y[0]
    if np.any(traj < -1e-9) or np.any(traj > 1.0 + 1e-9):
        raise DomainEscapeError("custom drift pushed the flow outside [0, 1]")
    return min(1.0, max(0.0, float(traj[-1])))


def flow(drift: DriftSpec, chi0: float, t: float) -> float:
    """Deterministic frequency flow started from chi0, run for time t.

    Closed forms for the three named kinds (t = inf lands on the stable
    equilibrium); custom drift integrates the ODE with step size capped by
    the Lipschitz bound.
    """
    if not (0.0 <= chi0 <= 1.0):
        raise InvalidParameterError(f"chi0 must lie in [0, 1], got {chi0!r}")
    if t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t!r}")
    if drift.kind == "neutral":
        return drift.p + (chi0 - drift.p) * math.exp(-0.5 * drift.theta * t)
    if drift.kind == "logistic":
        if chi0 == 0.0:
            return 0.0
        return chi0 / ((1.0 - chi0) * math.exp(-0.5 * drift.beta * t) + chi0)
    if drift.kind == "mutation_selection":
        rp = roots(drift.theta, drift.beta, drift.p)
        if chi0 == rp.r1:
            return rp.r1
        ratio = (rp.r1 - chi0) / (chi0 - rp.r2) * math.exp(-rp.decay_rate * t)
        return rp.r1 - (rp.r1 - rp.r2) * ratio / (1.0 + ratio)
    if not math.isfinite(t):
        raise InvalidParameterError("custom drift needs finite t")
    return _ode_flow(drift, chi0, t)


def _flow_array(drift: DriftSpec, chi0: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vectorized flow for the closed-form kinds."""
    if drift.kind == "neutral":
        return drift.p + (chi0 - drift.p) * np.exp(-0.5 * drift.theta * t)
    if drift.kind == "logistic":
        with np.errstate(invalid="ignore"):
            out = chi0 / ((1.0 - chi0) * np.exp(-0.5 * drift.beta * t) + chi0)
        return np.where(chi0 == 0.0, 0.0, out)
    if drift.kind == "mutation_selection":
        rp = roots(drift.theta, drift.beta, drift.p)
        ratio = (rp.r1 - chi0) / (chi0 - rp.r2) * np.exp(-rp.decay_rate * t)
        return rp.r1 - (rp.r1 - rp.r2) * ratio / (1.0 + ratio)
    raise InvalidParameterError("vectorized flow requires a closed-form drift kind")


def mu_nu(drift: DriftSpec, t: float) -> tuple[float, float]:
    """The two endpoint flows (from 1 and from 0) at time t.

    For mutation with selection these are evaluated from the flow-constant
    displays b e^{-decay t} and c e^{-decay t}, an independent code path
    from flow(); the factories' other kinds delegate to the closed flows.
    """
    if t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t!r}")
    if drift.kind == "mutation_selection":
        rp = roots(drift.theta, drift.beta, drift.p)
        gap = rp.r1 - rp.r2
        e = math.exp(-rp.decay_rate * t)
        be = rp.b * e
        ce = rp.c * e
        return rp.r1 + gap * be / (1.0 - be), rp.r1 - gap * ce / (1.0 + ce)
    return flow(drift, 1.0, t), flow(drift, 0.0, t)


def _skeleton_series(drift: DriftSpec) -> tuple[float, float]:
    """Exp(1)-averaged endpoint flows by geometric-series expansion.

    p11 expands b e^{-g t}/(1 - b e^{-g t}) termwise; p21 uses the
    binomial expansion in Y = c/(1+c) < 1, with the prefactor written as
    (1+c)^{-1/g} Y^{k+1} so large c cannot overflow.  Both series need
    their ratios b, Y away from 1; skeleton_matrix falls back to
    quadrature otherwise.
    """
    rp = roots(drift.theta, drift.beta, drift.p)
    g = rp.decay_rate
    inv_g = 1.0 / g
    b = rp.b
    acc = 0.0
    k = 0
    term = b / (inv_g + 1.0)
    while abs(term) > 1e-17 * max(1.0, abs(acc)):
        acc += term
        k += 1
        term *= b * (inv_g + k) / (inv_g + k + 1.0)
        if k > 500_000:
            raise RuntimeError("skeleton series for p11 failed to converge")
    p11 = rp.r1 + (2.0 / drift.beta) * acc

    y = rp.c / (1.0 + rp.c)
    front = (1.0 + rp.c) ** (-inv_g)
    acc = 0.0
    k = 0
    term = y / (inv_g + 1.0)
    while abs(front * term) > 1e-17 * max(1.0, abs(front * acc)) and term != 0.0:
        acc += term
        k += 1
        term *= y * (inv_g + k) * (inv_g + k) / (k * (inv_g + k + 1.0))
        if k > 500_000:
            raise RuntimeError("skeleton series for p21 failed to converge")
    p21 = rp.r1 - (2.0 / drift.beta) * front * acc
    return p11, p21


def _skeleton_quadrature(drift: DriftSpec, spec: QuadSpec | None = None) -> tuple[float, float]:
    """Exp(1)-averaged endpoint flows as integrals over u = e^{-t}."""
    p11 = quad(lambda u: flow(drift, 1.0, -math.log(u)), 0.0, 1.0, spec, singular_lower=True)
    p21 = quad(lambda u: flow(drift, 0.0, -math.log(u)), 0.0, 1.0, spec, singular_lower=True)
    return p11, p21


def _skeleton_ode(drift: DriftSpec) -> tuple[float, float]:
    """Exp(1)-averaged endpoint flows for custom drift, one ODE pass each.

    Integrates the pair (chi' = v(chi), I' = e^{-s} chi) to s = 45 and
    closes the tail with e^{-45} chi(45); the tail error is below e^{-45}
    since chi stays in [0, 1].  The per-node flow inversion used by the
    closed-form kinds would re-run the ODE at every quadrature point, which
    is far too slow for velocity callables.
    """
    from scipy.integrate import solve_ivp

    horizon = 45.0
    out = []
    for chi0 in (1.0, 0.0):
        sol = solve_ivp(
            lambda s, y: [drift.velocity(float(y[0])), math.exp(-s) * float(y[0])],
            (0.0, horizon),
            [chi0, 0.0],
            method="RK45",
            rtol=1e-10,
            atol=1e-13,
            max_step=min(1.0, 1.0 / max(drift.lipschitz, 1e-12)),
        )
        if not sol.success:
            raise DomainEscapeError(f"flow integration failed: {sol.message}")
        traj = sol.y[0]
        if np.any(traj < -1e-9) or np.any(traj > 1.0 + 1e-9):
            raise DomainEscapeError("custom drift pushed the flow outside [0, 1]")
        out.append(float(sol.y[1][-1]) + math.exp(-horizon) * float(traj[-1]))
    return out[0], out[1]


@lru_cache(maxsize=128)
def _skeleton_core(drift: DriftSpec) -> tuple[float, float]:
    """(E mu(T), E nu(T)) for T ~ Exp(1), cached per drift.

    stationary_density calls this at every evaluation point, so the cache
    is what makes integrating the density affordable when the skeleton
    itself needs quadrature.  DriftSpec is frozen and hashes by field
    values (custom velocity callables by identity).
    """
    if drift.kind == "neutral":
        shrink = 1.0 / (1.0 + 0.5 * drift.theta)
        return drift.p + (1.0 - drift.p) * shrink, drift.p * (1.0 - shrink)
    if drift.kind == "logistic":
        return 1.0, 0.0
    if drift.kind == "mutation_selection":
        rp = roots(drift.theta, drift.beta, drift.p)
        if rp.b <= _SERIES_RATIO_LIMIT and rp.c / (1.0 + rp.c) <= _SERIES_RATIO_LIMIT:
            return _skeleton_series(drift)
        return _skeleton_quadrature(drift)
    return _skeleton_ode(drift)


def skeleton_matrix(drift: DriftSpec) -> np.ndarray:
    """One-replacement transition matrix of the embedded type chain.

    Row 1 is (E mu(T), 1 - E mu(T)) and row 2 is (E nu(T), 1 - E nu(T))
    with T ~ Exp(1).  Neutral drift gives E mu(T) = p + (1-p)/(1 + theta/2)
    and E nu(T) = p (theta/2)/(1 + theta/2); pure selection is absorbing.
    """
    e_mu, e_nu = _skeleton_core(drift)
    return np.array([[e_mu, 1.0 - e_mu], [e_nu, 1.0 - e_nu]])


def replacement_stationary(drift: DriftSpec) -> tuple[float, float]:
    """Stationary law (pi1, pi2) of the embedded replacement-type chain.

    pi1 = E nu(T) / (E nu(T) + 1 - E mu(T)); raises when both flows pin to
    the endpoints (pure selection), where the chain is absorbing and no
    stationary law exists.
    """
    e_mu, e_nu = _skeleton_core(drift)
    denom = e_nu + (1.0 - e_mu)
    if denom < 1e-14:
        raise NoStationaryDistributionError(
            "embedded replacement chain is absorbing; no stationary law"
        )
    pi1 = e_nu / denom
    return pi1, 1.0 - pi1


def _custom_orbit_guard(drift: DriftSpec, lo: float, hi: float, sign: float):
    """Require sign * velocity > 0 on a grid over (lo, hi)."""
    xs = np.linspace(lo, hi, 257)[1:-1]
    for xv in xs:
        if sign * drift.velocity(float(xv)) <= 0.0:
            raise NonMonotoneDriftError(
                "custom drift changes sign inside a flow orbit; stationary "
                "density needs monotone endpoint flows"
            )


def _custom_hit_time(drift: DriftSpec, chi0: float, xi: float) -> float | None:
    """Time for the custom flow from chi0 to reach xi, None if unreachable."""
    from scipy.optimize import brentq

    direction = -1.0 if chi0 > xi else 1.0
    horizon = 1.0
    while True:
        val = flow(drift, chi0, horizon)
        if direction * (val - xi) >= 0.0:
            break
        horizon *= 2.0
        if horizon > 1400.0:
            return None
    if horizon == 1.0 and direction * (flow(drift, chi0, 0.0) - xi) >= 0.0:
        return 0.0
    return float(brentq(lambda s: flow(drift, chi0, s) - xi, 0.0, horizon, xtol=1e-12))


def stationary_density(drift: DriftSpec, xi: float) -> float:
    """Stationary density at xi: sum of pi_i e^{-t_i(xi)} / |v(xi)|.

    t_i(xi) is the flow time from endpoint i to xi; a branch contributes
    only where its orbit passes, above the equilibrium for the flow from 1
    and below it for the flow from 0.  The equilibrium itself has measure
    zero and returns 0.  Neutral drift reproduces the two-type stationary
    density exactly.
    """
    if not (0.0 <= xi <= 1.0):
        raise InvalidParameterError(f"xi must lie in [0, 1], got {xi!r}")
    pi1, pi2 = replacement_stationary(drift)
    if drift.kind == "neutral":
        theta, p = drift.theta, drift.p
        a = 2.0 / theta
        if xi > p:
            return pi1 * a * ((xi - p) / (1.0 - p)) ** (a - 1.0) / (1.0 - p)
        if xi < p:
            return pi2 * a * (1.0 - xi / p) ** (a - 1.0) / p
        return 0.0
    if drift.kind == "mutation_selection":
        rp = roots(drift.theta, drift.beta, drift.p)
        speed = 0.5 * drift.beta * abs(xi - rp.r1) * (xi - rp.r2)
        expo = 1.0 / rp.decay_rate
        if rp.r1 < xi < 1.0:
            decay = ((xi - rp.r1) * (1.0 - rp.r2) / ((xi - rp.r2) * (1.0 - rp.r1))) ** expo
            return pi1 * decay / speed
        if 0.0 < xi < rp.r1:
            decay = ((rp.r1 - xi) * (-rp.r2) / ((xi - rp.r2) * rp.r1)) ** expo
            return pi2 * decay / speed
        return 0.0
    # Custom drift: locate the equilibrium by orbit membership and invert
    # the flow numerically on the matching branch.
    v_xi = drift.velocity(xi)
    if xi in (0.0, 1.0):
        return 0.0
    if v_xi < 0.0:
        _custom_orbit_guard(drift, xi, 1.0, -1.0)
        t_hit = _custom_hit_time(drift, 1.0, xi)
        weight = pi1
    elif v_xi > 0.0:
        _custom_orbit_guard(drift, 0.0, xi, 1.0)
        t_hit = _custom_hit_time(drift, 0.0, xi)
        weight = pi2
    else:
        return 0.0
    if t_hit is None:
        return 0.0
    return weight * math.exp(-t_hit) / abs(v_xi)


def stationary_law(drift: DriftSpec) -> MixedLaw:
    """Stationary law as a MixedLaw, for the kinds with closed inverse flows.

    Neutral drift reuses the two-type law.  Mutation with selection splits
    at the interior equilibrium r1: branch masses (pi2, pi1), densities as
    in stationary_density, exact cdfs from the inverse flow (the factor
    e^{-t(xi)} is the decay term of the density), and quantile functions
    that push an Exp(1) age through the endpoint flows.  Each branch also
    carries an offset density anchored at r1, since quadrature in the
    absolute coordinate cannot resolve the factor |xi - r1|^{1/g - 1}
    within an ulp of the root.  Custom drifts have no closed inverse and
    are served pointwise by stationary_density instead.
    """
    if drift.kind == "neutral":
        return _neutral_stationary_law(TwoTypeParams(theta=drift.theta, p=drift.p))
    if drift.kind == "logistic":
        raise NoStationaryDistributionError(
            "embedded replacement chain is absorbing; no stationary law"
        )
    if drift.kind != "mutation_selection":
        raise InvalidParameterError(
            "stationary_law needs a named drift kind; evaluate custom drifts "
            "through stationary_density and stationary_sample"
        )
    pi1, pi2 = replacement_stationary(drift)
    rp = roots(drift.theta, drift.beta, drift.p)
    r1, r2 = rp.r1, rp.r2
    gap = r1 - r2
    expo = 1.0 / rp.decay_rate
    half_beta = 0.5 * drift.beta

    def dens_lo(z: float) -> float:
        decay = ((r1 - z) * (-r2) / ((z - r2) * r1)) ** expo
        return pi2 * decay / (half_beta * (r1 - z) * (z - r2))

    def dens_lo_off(d: float) -> float:
        back = gap - d
        return pi2 * (d * (-r2) / (back * r1)) ** expo / (half_beta * d * back)

    def cdf_lo(z: float) -> float:
        return pi2 * (1.0 - ((r1 - z) * (-r2) / ((z - r2) * r1)) ** expo)

    def inv_lo(v: float) -> float:
        return flow(drift, 0.0, -math.log1p(-v))

    def dens_up(z: float) -> float:
        decay = ((z - r1) * (1.0 - r2) / ((z - r2) * (1.0 - r1))) ** expo
        return pi1 * decay / (half_beta * (z - r1) * (z - r2))

    def dens_up_off(d: float) -> float:
        fwd = gap + d
        return pi1 * (d * (1.0 - r2) / (fwd * (1.0 - r1))) ** expo / (half_beta * d * fwd)

    def cdf_up(z: float) -> float:
        return pi1 * ((z - r1) * (1.0 - r2) / ((z - r2) * (1.0 - r1))) ** expo

    def inv_up(v: float) -> float:
        return flow(drift, 1.0, -math.log(v) if v > 0.0 else math.inf)

    steep = expo < 1.0
    return MixedLaw(
        atoms=(),
        pieces=(
            Piece(
                lower=0.0,
                upper=r1,
                density=dens_lo,
                mass=pi2,
                cdf=cdf_lo,
                inverse_cdf=inv_lo,
                singular="upper" if steep else None,
                offset_density=dens_lo_off,
                offset_side="upper",
                offset_width=r1,
            ),
            Piece(
                lower=r1,
                upper=1.0,
                density=dens_up,
                mass=pi1,
                cdf=cdf_up,
                inverse_cdf=inv_up,
                singular="lower" if steep else None,
                offset_density=dens_up_off,
                offset_side="lower",
                offset_width=1.0 - r1,
            ),
        ),
    )


def stationary_sample(drift: DriftSpec, rng: RngStream, size=None):
    """Draw from the stationary law: endpoint by pi, age Exp(1), then flow."""
    pi1, _ = replacement_stationary(drift)
    if size is None:
        chi0 = 1.0 if rng.gen.random() < pi1 else 0.0
        return flow(drift, chi0, rng.gen.exponential())
    chi0 = (rng.gen.random(size) < pi1).astype(float)
    tau = rng.gen.exponential(size=size)
    if drift.kind == "custom":
        return np.array([flow(drift, float(c), float(s)) for c, s in zip(chi0, tau)])
    return _flow_array(drift, chi0, tau)


def simulate_path(drift: DriftSpec, x: float, horizon: float, rng: RngStream) -> PathRecord:
    """Forward trajectory under an arbitrary drift: flow between rate-1 jumps."""
    if not (0.0 <= x <= 1.0):
        raise InvalidParameterError(f"x must lie in [0, 1], got {x!r}")
    if not horizon > 0.0:
        raise InvalidParameterError(f"horizon must be positive, got {horizon!r}")
    events = []
    clock = 0.0
    freq = x
    while True:
        wait = rng.gen.exponential()
        if clock + wait > horizon:
            break
        clock += wait
        before = flow(drift, freq, wait)
        freq = 1.0 if rng.gen.random() < before else 0.0
        events.append((clock, 1 if freq == 1.0 else 2, freq))
    final = flow(drift, freq, horizon - clock)
    return PathRecord(
        initial_frequency=x, horizon=horizon, events=tuple(events), final_frequency=final
    )


def fixation_prob(beta: float, x: float, fixed_type: int) -> float:
    """Absorption probability under pure selection, no mutation.

    The frequency argument is the initial frequency of the queried type.
    Type 1 (favoured): P1(x) = (2/beta) x int_0^1 z^{2/beta-1} dz /
    (1 - (1-x)(1-z)); type 2 takes the complement form.  P1(x) + P2(1-x)
    is identically 1.

    The z form is integrated directly only for a = 2/beta < 1, where the
    weight a z^{a-1} is an endpoint singularity the ladder handles.  For
    a >= 1 the exact substitution u = z^a flattens the weight, giving
    x int du / (x + (1-x) u^{1/a}); the integrand is bounded by 1/x and
    its transition layer sits at u ~ e^{-a}, so weak selection (a huge)
    degrades gracefully to P1 = x instead of losing the mass spike at
    z = 1 that defeats quadrature in the original variable.
    """
    if not (beta > 0.0 and math.isfinite(beta)):
        raise InvalidParameterError(f"beta must be positive and finite, got {beta!r}")
    if not (0.0 <= x <= 1.0):
        raise InvalidParameterError(f"frequency must lie in [0, 1], got {x!r}")
    if fixed_type not in (1, 2):
        raise InvalidParameterError("fixed_type must be 1 or 2")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    a = 2.0 / beta
    # the type-2 probability is 1 - (weighted integral with x and 1-x
    # swapped), so both cases reduce to one kernel evaluation
    w = 1.0 - x if fixed_type == 1 else x
    if a < 1.0:
        integral = a * quad(
            lambda z: z ** (a - 1.0) / (1.0 - w * (1.0 - z)),
            0.0,
            1.0,
            singular_lower=True,
        )
    else:
        inv_a = 1.0 / a
        integral = quad(
            lambda u: 1.0 / (1.0 - w + w * u**inv_a),
            0.0,
            1.0,
            singular_lower=True,
        )
    if fixed_type == 1:
        return x * integral
    return 1.0 - (1.0 - x) * integral


@dataclass(frozen=True)
class AsgPath:
    """One trajectory of the branching dual.

    events holds (time, kind, state after) with kind "branch" or
    "collapse"; t_ua is the first hit of a single line (0.0 when starting
    there, None if a horizon cut the run first).
    """

    initial_state: int
    horizon: float | None
    events: tuple[tuple[float, str, int], ...]
    final_state: int
    t_ua: float | None


def asg_simulate(
    n: int, beta: float, rng: RngStream, horizon: float | None = None
) -> AsgPath:
    """Simulate the branching dual from n lines.

    Without a horizon the run stops at the first collapse to one line (the
    ultimate ancestor); with one it continues through collapses until the
    horizon.  Rate-1 events at a single line relabel it and are skipped.
    States beyond ASG_STATE_CAP abort.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be at least 1, got {n!r}")
    if not (beta > 0.0 and math.isfinite(beta)):
        raise InvalidParameterError(f"beta must be positive and finite, got {beta!r}")
    if horizon is not None and not horizon > 0.0:
        raise InvalidParameterError("horizon must be positive when given")
    clock = 0.0
    state = n
    t_ua = 0.0 if n == 1 else None
    events: list[tuple[float, str, int]] = []
    while True:
        if t_ua is not None and horizon is None:
            break
        branch_rate = 0.5 * beta * state
        total = branch_rate + (1.0 if state >= 2 else 0.0)
        wait = rng.gen.exponential() / total
        if horizon is not None and clock + wait > horizon:
            break
        clock += wait
        if state >= 2 and rng.gen.random() * total >= branch_rate:
            state = 1
            if t_ua is None:
                t_ua = clock
            events.append((clock, "collapse", state))
        else:
            state += 1
            if state >= ASG_STATE_CAP:
                raise SimulationAbortError(
                    f"branching dual exceeded {ASG_STATE_CAP} lines"
                )
            events.append((clock, "branch", state))
    return AsgPath(
        initial_state=n,
        horizon=horizon,
        events=tuple(events),
        final_state=state,
        t_ua=t_ua,
    )


def ua_time_ensemble(n: int, beta: float, size: int, rng: RngStream) -> np.ndarray:
    """Ultimate-ancestor times of size independent dual runs.

    Staged vectorization with a scalar finish: branching makes a heavy tail
    of event counts, so once few replicates remain the per-stage numpy
    overhead dominates and a plain loop is faster.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be at least 1, got {n!r}")
    if n == 1:
        return np.zeros(size)
    state = np.full(size, n, dtype=np.int64)
    t_ua = np.zeros(size)
    active = np.arange(size)
    while active.size > 64:
        s = state[active].astype(float)
        total = 0.5 * beta * s + 1.0
        t_ua[active] += rng.gen.exponential(size=active.size) / total
        branch = rng.gen.random(active.size) * total < 0.5 * beta * s
        state[active[branch]] += 1
        if np.any(state[active] >= ASG_STATE_CAP):
            raise SimulationAbortError(f"branching dual exceeded {ASG_STATE_CAP} lines")
        active = active[branch]
    for i in active:
        s = int(state[i])
        clock = float(t_ua[i])
        while True:
            total = 0.5 * beta * s + 1.0
            clock += rng.gen.exponential() / total
            if rng.gen.random() * total >= 0.5 * beta * s:
                break
            s += 1
            if s >= ASG_STATE_CAP:
                raise SimulationAbortError(f"branching dual exceeded {ASG_STATE_CAP} lines")
        t_ua[i] = clock
    return t_ua


def asg_stationary(beta: float, i: int) -> float:
    """Stationary mass pi_i = (2/beta) (i-1)! / (1 + 2/beta)_(i).

    Rational arithmetic up to i = 64, log-gamma beyond; beta = 2 gives
    exactly 1/(i (i+1)).
    """
    if i < 1:
        raise InvalidParameterError(f"state index must be at least 1, got {i!r}")
    if not (beta > 0.0 and math.isfinite(beta)):
        raise InvalidParameterError(f"beta must be positive and finite, got {beta!r}")
    if i <= 64:
        from fractions import Fraction

        a = Fraction(2) / Fraction(beta)
        val = a * math.factorial(i - 1)
        for m in range(1, i + 1):
            val /= a + m
        return float(val)
    a = 2.0 / beta
    return math.exp(
        math.log(a) + math.lgamma(i) + math.lgamma(a + 1.0) - math.lgamma(a + 1.0 + i)
    )


def asg_stationary_gf(beta: float, y: float) -> float:
    """sum_i pi_i y^i, the stationary generating function.

    Matches the type-2 fixation probability at argument y.  Terms decay at
    least geometrically in y, so the tail is cut when its geometric bound
    drops below 1e-13.
    """
    if not (0.0 <= y < 1.0):
        raise InvalidParameterError(f"y must lie in [0, 1), got {y!r}")
    if y == 0.0:
        return 0.0
    a = 2.0 / beta
    term = a / (a + 1.0) * y
    acc = 0.0
    i = 1
    while term * y / (1.0 - y) > 1e-13 or i < 10:
        acc += term
        term *= i / (a + i + 1.0) * y
        i += 1
        if i > 10_000_000:
            raise RuntimeError("generating-function series failed to converge")
    return acc + term


def _fv_logistic_endpoints(
    beta: float, x0: float, t: float, size: int, rng: RngStream
) -> np.ndarray:
    """Endpoints of the pure-selection jump process, staged over events."""
    clock = np.zeros(size)
    freq = np.full(size, x0)
    active = np.arange(size)
    while active.size:
        wait = rng.gen.exponential(size=active.size)
        landed = clock[active] + wait
        hit = landed <= t
        idx = active[hit]
        clock[idx] = landed[hit]
        f = freq[idx]
        w = wait[hit]
        with np.errstate(invalid="ignore"):
            before = f / ((1.0 - f) * np.exp(-0.5 * beta * w) + f)
        before = np.where(f == 0.0, 0.0, before)
        freq[idx] = (rng.gen.random(idx.size) < before).astype(float)
        active = idx
    f = freq
    w = t - clock
    with np.errstate(invalid="ignore"):
        out = f / ((1.0 - f) * np.exp(-0.5 * beta * w) + f)
    return np.where(f == 0.0, 0.0, out)


def _yule_total(pe: np.ndarray, start: int, rng: RngStream) -> np.ndarray:
    """Line count after pure branching: sum of start geometrics."""
    if pe.size == 0:
        return np.zeros(0, dtype=np.int64)
    out = np.zeros(pe.size, dtype=np.int64)
    for _ in range(start):
        out += rng.gen.geometric(pe)
    if np.any(out >= ASG_STATE_CAP):
        raise SimulationAbortError(f"branching dual exceeded {ASG_STATE_CAP} lines")
    return out


def asg_count_ensemble(n: int, beta: float, t: float, size: int, rng: RngStream) -> np.ndarray:
    """Line counts B(t) of size independent dual runs with a horizon.

    Uses the exact phase structure: while at least two lines exist the next
    collapse is Exp(1) independent of the branching, which behaves as a
    pure Yule process whose increment over a phase of length u is a sum of
    geometrics with parameter e^{-beta u/2}; a single line dwells Exp(beta/2)
    with the collapse clock paused.  Each loop pass settles one phase, so
    the pass count is of order t.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be at least 1, got {n!r}")
    if not t > 0.0:
        raise InvalidParameterError(f"t must be positive, got {t!r}")
    remaining = np.full(size, float(t))
    out = np.zeros(size, dtype=np.int64)
    done = np.zeros(size, dtype=bool)
    if n >= 2:
        collapse = rng.gen.exponential(size=size)
        finish = collapse >= remaining
        pe = np.exp(-0.5 * beta * remaining[finish])
        out[finish] = _yule_total(pe, n, rng)
        done |= finish
        remaining[~finish] -= collapse[~finish]
    while not done.all():
        idx = np.flatnonzero(~done)
        dwell = rng.gen.exponential(scale=2.0 / beta, size=idx.size)
        ends = dwell >= remaining[idx]
        out[idx[ends]] = 1
        done[idx[ends]] = True
        grow = idx[~ends]
        remaining[grow] -= dwell[~ends]
        collapse = rng.gen.exponential(size=grow.size)
        finish = collapse >= remaining[grow]
        fin_idx = grow[finish]
        pe = np.exp(-0.5 * beta * remaining[fin_idx])
        out[fin_idx] = _yule_total(pe, 2, rng)
        done[fin_idx] = True
        remaining[grow[~finish]] -= collapse[~finish]
    return out


def selection_duality_check(
    n: int, x: float, t: float, beta: float, n_mc: int, rng: RngStream
) -> tuple[float, float, tuple[float, float]]:
    """Moment duality for pure selection, both sides Monte Carlo.

    Left: E[xi(t)^n] for the jump process with drift -(beta/2) x (1-x)
    started at x, simulated through the type swap xi = 1 - xi', where xi'
    is the standard logistic-drift process from 1 - x.  Right: E[x^{B(t)}]
    for the branching dual from n lines.

    Returns:
        (lhs, rhs, (lhs standard error, rhs standard error)).
    """
    if n < 1:
        raise InvalidParameterError(f"n must be at least 1, got {n!r}")
    if not (0.0 <= x <= 1.0):
        raise InvalidParameterError(f"x must lie in [0, 1], got {x!r}")
    if not t > 0.0:
        raise InvalidParameterError(f"t must be positive, got {t!r}")
    if n_mc < 2:
        raise InvalidParameterError("n_mc must be at least 2")
    swapped = _fv_logistic_endpoints(beta, 1.0 - x, t, n_mc, rng)
    lhs_vals = (1.0 - swapped) ** n
    counts = asg_count_ensemble(n, beta, t, n_mc, rng)
    rhs_vals = np.power(float(x), counts.astype(float))
    lhs = float(lhs_vals.mean())
    rhs = float(rhs_vals.mean())
    lhs_se = float(lhs_vals.std(ddof=1) / math.sqrt(n_mc))
    rhs_se = float(rhs_vals.std(ddof=1) / math.sqrt(n_mc))
    return lhs, rhs, (lhs_se, rhs_se)
