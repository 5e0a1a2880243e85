"""Cross-route consistency battery behind the ``verify`` subcommand.

Every check here compares two routes to the same quantity that share as
little code as possible: closed forms against adaptive quadrature, exact
rational spectral sums against direct evaluation, Monte Carlo ensembles
against analytic moments.  Checks are grouped into named suites so the
command line can run one at a time; ``run_suites`` executes a selection
and returns structured results, ``format_report`` renders them as stable
text with the bound printed next to each residual.  The report contains
no timings or other run-dependent noise, so two runs with the same seed
produce byte-identical output.

Monte Carlo suites draw from fixed per-suite substreams of the given
seed.  Their bounds are z-score limits (3 or 4 standard errors), wide
enough that a passing seed is overwhelmingly likely, and any particular
seed either passes forever or fails forever.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import kstest

from .core import InvalidParameterError, RngStream, quad
from .eigen import (
    PolyRep,
    eigen_poly,
    eigenvalue,
    expansion_expectation,
    generator_apply,
    hyper_pairing,
    pv_expectation_g_q1,
    pv_expectation_g_q1_numeric,
)
from .lines import (
    absorption_time_ensemble,
    an_distribution,
    an_distribution_spectral,
    duality_check,
    mean_absorption_time,
)
from .multitype import (
    MultiParams,
    MutationMatrix,
    infinite_sampling_prob,
    markov_line_kernel,
    pim_line_kernel,
    pim_transition_law,
)
from .selection import (
    _skeleton_quadrature,
    _skeleton_series,
    asg_stationary,
    asg_stationary_gf,
    custom_drift,
    fixation_prob,
    flow,
    mutation_selection_drift,
    neutral_drift,
    replacement_stationary,
    roots,
    selection_duality_check,
    skeleton_matrix,
    ua_time_ensemble,
)
from .selection import stationary_density as selection_stationary_density
from .selection import stationary_law as selection_stationary_law
from .twotype import (
    TwoTypeParams,
    line_kernel,
    replacement_component_density,
    sample_transition,
    stationary_density_eval,
    stationary_sample,
    transition_density_eval,
    transition_law,
    transition_moment,
)

__all__ = ["CheckResult", "SUITE_NAMES", "run_suites", "format_report"]


@dataclass(frozen=True)
class CheckResult:
    """One verified comparison: an observed residual against its bound.

    direction "le" means the check passes when observed <= bound (the
    usual residual case); "ge" is for quantities that must stay large,
    such as Kolmogorov-Smirnov p-values.
    """

    suite: str
    name: str
    observed: float
    bound: float
    direction: str = "le"

    def __post_init__(self):
        if self.direction not in ("le", "ge"):
            raise InvalidParameterError(f"direction must be 'le' or 'ge', got {self.direction!r}")

    @property
    def passed(self) -> bool:
        if self.direction == "le":
            return self.observed <= self.bound
        return self.observed >= self.bound


# Disjoint substream indices per suite, so adding draws to one suite never
# shifts the randomness seen by another.
_STREAM = {
    "uniform-stationary": 200,
    "transition-moments": 300,
    "expansion": 500,
    "absorption-time": 800,
    "moment-duality": 900,
    "asg": 1300,
}

_THETA_GRID = (0.5, 1.0, 2.0, 5.0)
_P_GRID = (0.1, 0.5, 0.9)


def _suite_transition_mass(seed: int) -> list[CheckResult]:
    """Total transition mass (atom plus both density pieces) equals 1."""
    worst = 0.0
    for theta in _THETA_GRID:
        for p in _P_GRID:
            par = TwoTypeParams(theta=theta, p=p)
            for t in (0.1, 1.0, 10.0):
                for x in (0.0, 0.3, 1.0):
                    law = transition_law(par, x, t)
                    worst = max(worst, abs(law.quadrature_mass() - 1.0))
    return [
        CheckResult("transition-mass", "max |quadrature mass - 1| over parameter grid", worst, 1e-10)
    ]


def _suite_uniform_stationary(seed: int) -> list[CheckResult]:
    """At theta = 2, p = 1/2 the stationary law is uniform on (0, 1)."""
    par = TwoTypeParams(theta=2.0, p=0.5)
    grid = [0.01 + 0.02 * k for k in range(50)]
    dens_dev = max(abs(stationary_density_eval(par, xi) - 1.0) for xi in grid)
    rng = RngStream(seed, _STREAM["uniform-stationary"])
    draws = stationary_sample(par, rng, size=1_000_000)
    pval = float(kstest(draws, "uniform").pvalue)
    return [
        CheckResult("uniform-stationary", "max |density - 1| on 50-point grid", dens_dev, 1e-12),
        CheckResult("uniform-stationary", "KS p-value, 1e6 draws vs uniform", pval, 0.01, "ge"),
    ]


def _suite_transition_moments(seed: int) -> list[CheckResult]:
    """Analytic transition moments against ensemble averages, n <= 4."""
    rng = RngStream(seed, _STREAM["transition-moments"])
    n_mc = 1_000_000
    root = math.sqrt(n_mc)
    worst = 0.0
    for theta in _THETA_GRID:
        for p in _P_GRID:
            par = TwoTypeParams(theta=theta, p=p)
            for t in (0.1, 1.0, 10.0):
                for x in (0.0, 0.3, 1.0):
                    draws = sample_transition(par, x, t, rng, size=n_mc) - p
                    power = np.ones_like(draws)
                    for n in range(1, 5):
                        power = power * draws
                        se = float(power.std(ddof=1)) / root
                        gap = abs(float(power.mean()) - transition_moment(par, n, x, t))
                        worst = max(worst, gap / se)
    return [
        CheckResult(
            "transition-moments", "max |mc - analytic| in SE units, n <= 4", worst, 4.0
        )
    ]


def _suite_eigen_equation(seed: int) -> list[CheckResult]:
    """Generator applied to an eigenpolynomial is -eigenvalue times it."""
    worst = 0.0
    for theta in _THETA_GRID:
        for p in _P_GRID:
            par = TwoTypeParams(theta=theta, p=p)
            for n in range(13):
                g = eigen_poly(par, n)
                h = generator_apply(par, g)
                lam = eigenvalue(par, n)
                res = max(
                    abs(h.coefficient(k) + lam * g.coefficient(k)) for k in range(14)
                )
                worst = max(worst, res)
    return [
        CheckResult("eigen-equation", "max coefficient residual, n <= 12", worst, 1e-12)
    ]


def _suite_expansion(seed: int) -> list[CheckResult]:
    """Spectral expansion of E[g(xi_t)] against the binomial moment route."""
    gen = RngStream(seed, _STREAM["expansion"])
    worst = 0.0
    for _ in range(20):
        coeffs = tuple(float(c) for c in gen.uniform(-1.0, 1.0, size=9))
        g = PolyRep(0.0, coeffs)
        for theta, p in ((0.5, 0.3), (2.0, 0.7)):
            par = TwoTypeParams(theta=theta, p=p)
            centered = g.with_shift(p).coeffs
            for x in (0.0, 0.3, 0.7, 1.0):
                for t in (0.1, 1.0, 5.0):
                    direct = math.fsum(
                        centered[k] * transition_moment(par, k, x, t) for k in range(9)
                    )
                    via = expansion_expectation(par, g, x, t)
                    worst = max(worst, abs(via - direct))
    return [
        CheckResult(
            "expansion", "max |spectral - moment route|, 20 random degree-8 g", worst, 1e-10
        )
    ]


def _suite_pairing(seed: int) -> list[CheckResult]:
    """Biorthogonality of the eigenpolynomials under both pairings."""
    pair_dev = 0.0
    pv_dev = 0.0
    pv_split = 0.0
    for theta in _THETA_GRID:
        for p in _P_GRID:
            par = TwoTypeParams(theta=theta, p=p)
            for m in range(1, 13):
                gm = eigen_poly(par, m)
                for n in range(2, 13):
                    want = 1.0 if n == m else 0.0
                    pair_dev = max(pair_dev, abs(hyper_pairing(gm, n) - want))
                want = 1.0 if m == 1 else 0.0
                exact = pv_expectation_g_q1(par, gm)
                pv_dev = max(pv_dev, abs(exact - want))
                pv_split = max(pv_split, abs(pv_expectation_g_q1_numeric(par, gm) - exact))
    return [
        CheckResult("pairing", "max |<P_m, dual_n> - delta_mn|, m, n <= 12", pair_dev, 1e-12),
        CheckResult("pairing", "max |principal-value pairing - delta_m1|", pv_dev, 1e-12),
        CheckResult("pairing", "max |numeric pv route - exact pv route|", pv_split, 1e-10),
    ]


def _suite_line_spectral(seed: int) -> list[CheckResult]:
    """Line-count law: direct survival sums against the spectral route."""
    worst = 0.0
    for theta in (0.5, 2.0, 5.0):
        for n in range(1, 21):
            for t in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0):
                direct = an_distribution(n, theta, t).probs
                spectral = an_distribution_spectral(n, theta, t).probs
                worst = max(worst, max(abs(a - b) for a, b in zip(direct, spectral)))
    zero_dev = 0.0
    for theta in (0.5, 2.0, 5.0):
        for n in range(1, 21):
            for dist in (an_distribution(n, theta, 0.0), an_distribution_spectral(n, theta, 0.0)):
                for j, q in enumerate(dist.probs):
                    want = 1.0 if j == n else 0.0
                    zero_dev = max(zero_dev, abs(q - want))
    return [
        CheckResult("line-spectral", "max |direct - spectral|, n <= 20", worst, 1e-10),
        CheckResult("line-spectral", "t = 0 mass at the start count, both routes", zero_dev, 0.0),
    ]


def _suite_absorption_time(seed: int) -> list[CheckResult]:
    """Mean time to full resolution: closed form and simulation."""
    exact_dev = abs(mean_absorption_time(2, 2.0) - 4.0 / 3.0)
    rng = RngStream(seed, _STREAM["absorption-time"])
    size = 100_000
    worst = 0.0
    for n in (2, 5, 10):
        for theta in (1.0, 2.0, 5.0):
            times = absorption_time_ensemble(n, theta, size, rng)
            se = float(times.std(ddof=1)) / math.sqrt(size)
            z = abs(float(times.mean()) - mean_absorption_time(n, theta)) / se
            worst = max(worst, z)
    return [
        CheckResult("absorption-time", "|mean(2, theta=2) - 4/3|", exact_dev, 0.0),
        CheckResult("absorption-time", "max |mc - exact| in SE units, 1e5 paths", worst, 3.0),
    ]


def _suite_moment_duality(seed: int) -> list[CheckResult]:
    """Forward moments against the backward line-count estimator."""
    rng = RngStream(seed, _STREAM["moment-duality"])
    worst = 0.0
    for theta, p, x, t in ((1.0, 0.3, 0.6, 1.0), (2.0, 0.5, 0.7, 0.5), (5.0, 0.8, 0.2, 2.0)):
        par = TwoTypeParams(theta=theta, p=p)
        for n in range(1, 5):
            lhs, rhs, se = duality_check(par, n, x, t, 1_000_000, rng)
            worst = max(worst, abs(lhs - rhs) / se)
    return [
        CheckResult(
            "moment-duality", "max |analytic - mc| in SE units, n <= 4, 1e6 paths", worst, 4.0
        )
    ]


def _suite_replacement_parts(seed: int) -> list[CheckResult]:
    """Replacement-count components: pointwise sum and Poisson masses."""
    p, x = 0.3, 0.7
    sum_dev = 0.0
    mass_dev = 0.0
    for theta in (0.5, 2.0, 5.0):
        par = TwoTypeParams(theta=theta, p=p)
        for t in (0.5, 2.0):
            eh = math.exp(-0.5 * theta * t)
            top = p * -math.expm1(-0.5 * theta * t)
            edge = p + (1.0 - p) * eh
            points = [top * f for f in (0.2, 0.5, 0.8)]
            points += [edge + (1.0 - edge) * f for f in (0.2, 0.5, 0.8)]
            for xi in points:
                total = math.fsum(
                    replacement_component_density(par, x, t, k, xi) for k in range(1, 51)
                )
                sum_dev = max(sum_dev, abs(total - transition_density_eval(par, x, t, xi)))
            for k in range(1, 11):
                def f_k(xi: float, _k=k) -> float:
                    return replacement_component_density(par, x, t, _k, xi)

                mass = quad(f_k, 0.0, top) + quad(f_k, edge, 1.0)
                want = math.exp(k * math.log(t) - t - math.lgamma(k + 1.0))
                mass_dev = max(mass_dev, abs(mass - want))
    return [
        CheckResult("replacement-parts", "max |sum of 50 components - density|", sum_dev, 1e-8),
        CheckResult("replacement-parts", "max |component mass - Poisson weight|, k <= 10", mass_dev, 1e-8),
    ]


def _suite_multitype(seed: int) -> list[CheckResult]:
    """Two-type embedding, Markov mutation kernel, sampling identity."""
    embed_dev = 0.0
    for theta in (0.5, 2.0, 5.0):
        for p in (0.3, 0.5):
            par = TwoTypeParams(theta=theta, p=p)
            mp = MultiParams(theta=theta, p_vec=(p, 1.0 - p))
            kdev = np.max(np.abs(pim_line_kernel(mp, 0.7) - line_kernel(par, 0.7).as_matrix()))
            embed_dev = max(embed_dev, float(kdev))
            for x in (0.2, 0.7):
                for t in (0.5, 2.0):
                    law = transition_law(par, x, t)
                    slaw = pim_transition_law(mp, (x, 1.0 - x), t)
                    (atom_pos, atom_mass), = law.atoms
                    embed_dev = max(embed_dev, abs(slaw.atom_mass - atom_mass))
                    embed_dev = max(embed_dev, abs(slaw.atom_point[0] - atom_pos))
                    embed_dev = max(embed_dev, abs(slaw.atom_point[1] - (1.0 - atom_pos)))
                    upper = next(pc for pc in law.pieces if pc.upper == 1.0)
                    lower = next(pc for pc in law.pieces if pc.lower == 0.0)
                    r0, r1 = slaw.regions
                    embed_dev = max(embed_dev, abs(r0.lower - upper.lower))
                    embed_dev = max(embed_dev, abs(r0.mass - upper.mass))
                    embed_dev = max(embed_dev, abs((1.0 - r1.lower) - lower.upper))
                    embed_dev = max(embed_dev, abs(r1.mass - lower.mass))
                    for f in (0.2, 0.5, 0.8):
                        xi = r0.lower + (1.0 - r0.lower) * f
                        embed_dev = max(
                            embed_dev, abs(r0.density(xi) - transition_density_eval(par, x, t, xi))
                        )
                        xi2 = r1.lower + (1.0 - r1.lower) * f
                        embed_dev = max(
                            embed_dev,
                            abs(r1.density(xi2) - transition_density_eval(par, x, t, 1.0 - xi2)),
                        )
    swap = MutationMatrix(matrix=((0.0, 1.0), (1.0, 0.0)))
    swap_dev = 0.0
    for theta in (0.5, 2.0):
        for t in (0.3, 1.0, 3.0):
            e = math.exp(-theta * t)
            want = np.array([[1.0 + e, 1.0 - e], [1.0 - e, 1.0 + e]]) / 2.0
            got = markov_line_kernel(swap, theta, t)
            swap_dev = max(swap_dev, float(np.max(np.abs(got - want))))
    samp_dev = 0.0
    for n in range(1, 21):
        want = float(Fraction(1, n + 1))
        for j in range(n + 1):
            samp_dev = max(samp_dev, abs(infinite_sampling_prob(n, j, 2.0) - want))
    return [
        CheckResult("multitype", "max two-type embedding mismatch, d = 2", embed_dev, 1e-12),
        CheckResult("multitype", "max |swap kernel - closed form|", swap_dev, 1e-12),
        CheckResult("multitype", "theta = 2 sampling probs vs 1/(n+1), n <= 20", samp_dev, 0.0),
    ]


def _suite_selection(seed: int) -> list[CheckResult]:
    """Drift roots, skeleton routes, stationary law, fixation identities."""
    root_dev = 0.0
    for theta in _THETA_GRID:
        for beta in (0.5, 2.0, 5.0):
            for p in _P_GRID:
                rp = roots(theta, beta, p)
                phi = theta / beta
                for r in (rp.r1, rp.r2):
                    root_dev = max(root_dev, abs(r * r - (1.0 - phi) * r - p * phi))

    skel_dev = 0.0
    points = [(1.0, 2.0, 0.5)]
    for theta in (0.5, 1.0, 2.0):
        for beta in (1.0, 2.0, 4.0):
            for p in (0.3, 0.5, 0.7):
                points.append((theta, beta, p))
    for theta, beta, p in points:
        rp = roots(theta, beta, p)
        # The series route only converges geometrically when both flow
        # ratios stay away from 1; elsewhere only the quadrature applies.
        if rp.b > 0.9 or rp.c / (1.0 + rp.c) > 0.9:
            continue
        drift = mutation_selection_drift(theta, p, beta)
        s_mu, s_nu = _skeleton_series(drift)
        q_mu, q_nu = _skeleton_quadrature(drift)
        skel_dev = max(skel_dev, abs(s_mu - q_mu), abs(s_nu - q_nu))

    mass_dev = 0.0
    mean_dev = 0.0
    point_dev = 0.0
    for theta, beta, p in ((1.0, 2.0, 0.5), (0.5, 4.0, 0.3), (2.0, 1.0, 0.7)):
        drift = mutation_selection_drift(theta, p, beta)
        law = selection_stationary_law(drift)
        pi1, _ = replacement_stationary(drift)
        mass_dev = max(mass_dev, abs(law.quadrature_mass() - 1.0))
        mean_dev = max(mean_dev, abs(law.mean() - pi1))
        r1 = roots(theta, beta, p).r1
        for f in (0.2, 0.6, 0.9):
            for xi in (r1 * f, r1 + (1.0 - r1) * f):
                pc = next(q for q in law.pieces if q.lower < xi < q.upper)
                point_dev = max(
                    point_dev, abs(pc.density(xi) - selection_stationary_density(drift, xi))
                )

    named = mutation_selection_drift(1.0, 0.5, 2.0)
    bespoke = custom_drift(lambda y: 0.5 * (0.5 - y) + y * (1.0 - y), 2.0)
    custom_dev = max(
        abs(selection_stationary_density(bespoke, xi) - selection_stationary_density(named, xi))
        for xi in (0.1, 0.35, 0.6, 0.9)
    )

    ln2_dev = abs(fixation_prob(2.0, 0.5, 1) - math.log(2.0))
    # fixed_type names whose initial frequency x is; the complementary
    # event starts the other type at 1 - x.
    comp_dev = 0.0
    for beta in (0.5, 2.0, 5.0):
        for x in (0.1, 0.5, 0.9):
            comp_dev = max(
                comp_dev, abs(fixation_prob(beta, x, 1) + fixation_prob(beta, 1.0 - x, 2) - 1.0)
            )

    weak = mutation_selection_drift(1.0, 0.3, 1e-6)
    neutral = neutral_drift(1.0, 0.3)
    limit_dev = float(np.max(np.abs(skeleton_matrix(weak) - skeleton_matrix(neutral))))
    for x0 in (0.0, 0.6, 1.0):
        for t in (0.5, 2.0, 10.0):
            limit_dev = max(limit_dev, abs(flow(weak, x0, t) - flow(neutral, x0, t)))
    for xi in (0.1, 0.5, 0.7, 0.9):
        limit_dev = max(
            limit_dev,
            abs(selection_stationary_density(weak, xi) - selection_stationary_density(neutral, xi)),
        )

    return [
        CheckResult("selection", "max drift-quadratic residual at both roots", root_dev, 1e-12),
        CheckResult("selection", "max |series skeleton - quadrature skeleton|", skel_dev, 1e-8),
        CheckResult("selection", "max |stationary mass - 1|", mass_dev, 1e-8),
        CheckResult("selection", "max |stationary mean - replacement weight|", mean_dev, 1e-8),
        CheckResult("selection", "max |law density - direct density|", point_dev, 1e-12),
        CheckResult("selection", "max |custom-drift density - closed form|", custom_dev, 1e-8),
        CheckResult("selection", "|fixation(1/2, beta=2) - ln 2|", ln2_dev, 1e-8),
        CheckResult("selection", "max |P_fix(1) + P_fix(2) - 1|", comp_dev, 1e-10),
        CheckResult("selection", "max neutral-limit gap at beta = 1e-6", limit_dev, 1e-4),
    ]


def _suite_asg(seed: int) -> list[CheckResult]:
    """Branching-graph clocks, stationary line counts, selection duality."""
    rng = RngStream(seed, _STREAM["asg"])
    size = 40_000
    mean_z = 0.0
    ks_min = 1.0
    for n in (2, 10):
        for beta in (0.5, 2.0):
            times = ua_time_ensemble(n, beta, size, rng)
            se = float(times.std(ddof=1)) / math.sqrt(size)
            mean_z = max(mean_z, abs(float(times.mean()) - 1.0) / se)
            ks_min = min(ks_min, float(kstest(times, "expon").pvalue))

    pi_dev = 0.0
    for i in range(1, 21):
        pi_dev = max(pi_dev, abs(asg_stationary(2.0, i) - float(Fraction(1, i * (i + 1)))))

    gf_dev = 0.0
    for beta in (0.5, 2.0, 7.0):
        for k in range(1, 10):
            y = k / 10.0
            gf_dev = max(gf_dev, abs(asg_stationary_gf(beta, y) - fixation_prob(beta, y, 2)))

    dual_z = 0.0
    for n, x, t, beta in ((2, 0.5, 1.0, 2.0), (3, 0.3, 0.5, 0.5)):
        lhs, rhs, (se_l, se_r) = selection_duality_check(n, x, t, beta, 200_000, rng)
        dual_z = max(dual_z, abs(lhs - rhs) / (se_l + se_r))

    return [
        CheckResult("asg", "max |mean collapse time - 1| in SE units", mean_z, 3.0),
        CheckResult("asg", "min KS p-value vs unit exponential", ks_min, 0.01, "ge"),
        CheckResult("asg", "beta = 2 stationary counts vs 1/(i(i+1)), i <= 20", pi_dev, 0.0),
        CheckResult("asg", "max |stationary gf - loss probability|", gf_dev, 1e-8),
        CheckResult("asg", "max |forward mc - branching mc| in joint SE units", dual_z, 4.0),
    ]


_SUITES = (
    ("transition-mass", _suite_transition_mass),
    ("uniform-stationary", _suite_uniform_stationary),
    ("transition-moments", _suite_transition_moments),
    ("eigen-equation", _suite_eigen_equation),
    ("expansion", _suite_expansion),
    ("pairing", _suite_pairing),
    ("line-spectral", _suite_line_spectral),
    ("absorption-time", _suite_absorption_time),
    ("moment-duality", _suite_moment_duality),
    ("replacement-parts", _suite_replacement_parts),
    ("multitype", _suite_multitype),
    ("selection", _suite_selection),
    ("asg", _suite_asg),
)

SUITE_NAMES = tuple(name for name, _ in _SUITES)


def run_suites(names=None, seed: int = 0) -> list[CheckResult]:
    """Run the requested suites in registry order.

    Args:
        names: iterable of suite names, or None / "all" for every suite.
        seed: base seed; each Monte Carlo suite uses its own substream.

    Returns:
        The concatenated check results.

    Raises:
        InvalidParameterError: an unknown suite name was requested.
    """
    if names is None or names == "all":
        wanted = set(SUITE_NAMES)
    else:
        wanted = set(names)
        unknown = wanted.difference(SUITE_NAMES)
        if unknown:
            raise InvalidParameterError(f"unknown suite names: {sorted(unknown)}")
    results: list[CheckResult] = []
    for name, fn in _SUITES:
        if name in wanted:
            results.extend(fn(seed))
    return results


def format_report(results) -> str:
    """Stable text rendering, one line per check plus a summary line."""
    lines = []
    for r in results:
        op = "<=" if r.direction == "le" else ">="
        status = "PASS" if r.passed else "FAIL"
        lines.append(
            f"{status}  {r.suite:<19} {r.name:<55} {r.observed:>11.4e} {op} {r.bound:.1e}"
        )
    n_pass = sum(1 for r in results if r.passed)
    lines.append(f"{n_pass} of {len(results)} checks passed")
    return "\n".join(lines) + "\n"
