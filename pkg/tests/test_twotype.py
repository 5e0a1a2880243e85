"""Two-type transition and stationary laws against independent oracles.

Frozen reference numbers were produced by 40-digit quadrature of the
last-replacement decomposition: condition on the time s since the most
recent replacement (exponential weight), the replacing type (probability
p + (x - p) e^{-theta (t-s)/2} for type 1), and push the frequency through
the deterministic mutation flow for the remaining s.  That construction
never touches the closed-form density implemented here.
"""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import kstest

from starcoal.core import InvalidParameterError, RngStream, TwoTypeParams
from starcoal.twotype import (
    line_kernel,
    marginal_q,
    path_endpoint_ensemble,
    replacement_component_density,
    sample_transition,
    simulate_path,
    stationary_density_eval,
    stationary_law,
    stationary_moment,
    stationary_sample,
    transition_density_eval,
    transition_law,
    transition_moment,
)

PAR_A = TwoTypeParams(theta=1.0, p=0.3)
PAR_B = TwoTypeParams(theta=3.5, p=0.6)
PAR_C = TwoTypeParams(theta=0.8, p=0.35)


def test_marginal_q_flow():
    q1, q2 = marginal_q(PAR_A, 0.7, 1.0)
    assert q1 == pytest.approx(0.3 + 0.4 * math.exp(-0.5), rel=1e-15)
    assert q1 + q2 == 1.0
    # x = p is an exact fixed point of the mutation flow.
    assert marginal_q(PAR_A, 0.3, 17.0) == (0.3, 0.7)
    with pytest.raises(InvalidParameterError):
        marginal_q(PAR_A, 1.2, 1.0)
    with pytest.raises(InvalidParameterError):
        marginal_q(PAR_A, 0.5, -1.0)


def test_line_kernel_rows():
    k = line_kernel(PAR_B, 0.9)
    assert k.p11 + k.p12 == pytest.approx(1.0, abs=1e-15)
    assert k.p21 + k.p22 == pytest.approx(1.0, abs=1e-15)
    assert line_kernel(PAR_B, 0.0).as_matrix() == pytest.approx(np.eye(2))
    far = line_kernel(PAR_B, 60.0)
    assert far.p11 == pytest.approx(0.6, abs=1e-12)
    assert far.p21 == pytest.approx(0.6, abs=1e-12)


def test_transition_law_structure():
    law = transition_law(PAR_A, 0.7, 1.0)
    (loc, mass), = law.atoms
    eh = math.exp(-0.5)
    assert mass == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert loc == pytest.approx(0.3 + 0.4 * eh, rel=1e-15)
    lowers = sorted(pc.lower for pc in law.pieces)
    assert len(law.pieces) == 2
    low = min(law.pieces, key=lambda pc: pc.lower)
    high = max(law.pieces, key=lambda pc: pc.lower)
    assert low.lower == 0.0
    assert low.upper == pytest.approx(0.3 * -math.expm1(-0.5), rel=1e-14)
    assert high.lower == pytest.approx(0.3 + 0.7 * eh, rel=1e-14)
    assert high.upper == 1.0
    # The atom sits strictly inside the density gap.
    assert low.upper < loc < high.lower
    assert law.quadrature_mass() == pytest.approx(1.0, abs=1e-10)


def test_transition_piece_masses_against_scipy():
    for par, x, t in ((PAR_A, 0.7, 1.0), (PAR_B, 0.2, 0.4), (PAR_C, 0.0, 2.5)):
        law = transition_law(par, x, t)
        for pc in law.pieces:
            ref, err = integrate.quad(
                pc.density, pc.lower, pc.upper, limit=200, epsabs=1e-12, epsrel=1e-12
            )
            assert pc.mass == pytest.approx(ref, abs=max(1e-9, 10 * err))


def test_transition_density_oracles():
    # 40-digit last-replacement quadrature, theta=1, p=0.3, x=0.7, t=1.
    assert transition_density_eval(PAR_A, 0.7, 1.0, 0.8) == pytest.approx(
        1.305422794773621871873730080806, rel=1e-12
    )
    assert transition_density_eval(PAR_A, 0.7, 1.0, 0.1) == pytest.approx(
        1.493696018544088648167645684468, rel=1e-12
    )
    # Same construction at theta=3.5, p=0.6, x=0.2, t=0.4.
    assert transition_density_eval(PAR_B, 0.2, 0.4, 0.9) == pytest.approx(
        0.5416168832898961391381645489357, rel=1e-12
    )
    # 0.35 falls in the gap between the two supports.
    assert transition_density_eval(PAR_B, 0.2, 0.4, 0.35) == 0.0


def test_transition_moment_oracles():
    want = (
        0.2426122638850533694415198139965,
        0.1627042807354559094365486431588,
        0.0749043628787328858772897153826,
        0.0465513859902074839378860455452,
    )
    for n, ref in enumerate(want, start=1):
        assert transition_moment(PAR_A, n, 0.7, 1.0) == pytest.approx(ref, rel=1e-13)
    assert transition_moment(PAR_A, 0, 0.7, 1.0) == 1.0
    # t = 0 collapses to the point mass at x.
    for n in range(1, 5):
        assert transition_moment(PAR_B, n, 0.2, 0.0) == pytest.approx(
            (0.2 - 0.6) ** n, rel=1e-14
        )
    # Long horizons forget x.
    for n in range(1, 5):
        assert transition_moment(PAR_C, n, 0.9, 80.0) == pytest.approx(
            stationary_moment(PAR_C, n)[0], rel=1e-12, abs=1e-13
        )
    with pytest.raises(InvalidParameterError):
        transition_moment(PAR_A, -1, 0.7, 1.0)


def test_transition_moments_match_density_integration():
    # Independent route: integrate xi^n against the law's own components.
    par, x, t = PAR_B, 0.2, 0.4
    law = transition_law(par, x, t)
    for n in (1, 2, 3):
        total = [m * (loc - par.p) ** n for loc, m in law.atoms]
        for pc in law.pieces:
            val, _ = integrate.quad(
                lambda xi: (xi - par.p) ** n * pc.density(xi),
                pc.lower,
                pc.upper,
                limit=200,
                epsabs=1e-12,
            )
            total.append(val)
        assert transition_moment(par, n, x, t) == pytest.approx(
            math.fsum(total), abs=1e-9
        )


def test_stationary_density_oracles():
    # theta=0.8, p=0.35 by the stationary last-replacement mixture.
    assert stationary_density_eval(PAR_C, 0.6) == pytest.approx(
        0.3210958365844893466463717149074, rel=1e-12
    )
    assert stationary_density_eval(PAR_C, 0.2) == pytest.approx(
        1.302627201918934112659867642532, rel=1e-12
    )
    # Full support: no interior gap in the stationary law.
    law = stationary_law(PAR_C)
    assert law.quadrature_mass() == pytest.approx(1.0, abs=1e-10)
    assert not law.atoms
    # For theta > 2 the density diverges at p but stays integrable.
    steep = TwoTypeParams(theta=5.0, p=0.4)
    assert stationary_density_eval(steep, 0.4) == math.inf
    assert stationary_law(steep).quadrature_mass() == pytest.approx(1.0, abs=1e-10)


def test_stationary_moment_values():
    central2, raw2 = stationary_moment(PAR_C, 2)
    # [p q^2 + q p^2] / (1 + theta) has the exact rational value 91/720 here.
    assert central2 == pytest.approx(91.0 / 720.0, rel=1e-14)
    assert raw2 == pytest.approx(
        0.35**2 + central2, rel=1e-14
    )
    central3, raw3 = stationary_moment(PAR_C, 3)
    assert raw3 == pytest.approx(0.2066060606060606060606060606061, rel=1e-13)
    assert stationary_moment(PAR_C, 1) == (0.0, 0.35)
    assert stationary_moment(PAR_C, 0) == (1.0, 1.0)


def test_stationary_law_cdf_and_sampling():
    law = stationary_law(PAR_C)
    for pc in law.pieces:
        # Piece cdf accumulates exactly the stored mass over its support.
        assert pc.cdf(pc.upper) == pytest.approx(pc.mass, rel=1e-12)
        for v in (0.13, 0.5, 0.92):
            xi = pc.inverse_cdf(v)
            assert pc.lower <= xi <= pc.upper
            assert pc.cdf(xi) / pc.mass == pytest.approx(v, abs=1e-10)
    draws = stationary_sample(PAR_C, RngStream(31, 0), size=20_000)
    cdf_vec = lambda v: np.array([law.cdf(float(s)) for s in np.atleast_1d(v)])
    assert kstest(draws, cdf_vec).pvalue > 0.01


def test_sample_transition_matches_moments():
    rng = RngStream(5, 0)
    par, x, t = PAR_A, 0.7, 1.0
    draws = sample_transition(par, x, t, rng, size=200_000) - par.p
    for n in (1, 2, 3):
        vals = draws**n
        se = float(vals.std(ddof=1)) / math.sqrt(vals.size)
        z = abs(float(vals.mean()) - transition_moment(par, n, x, t)) / se
        assert z < 4.0, f"moment {n}: z = {z:.2f}"
    atom_freq = float(np.mean(draws + par.p == marginal_q(par, x, t)[0]))
    want = math.exp(-t)
    assert abs(atom_freq - want) < 4.0 * math.sqrt(want * (1 - want) / draws.size)


def test_replacement_components_sum_to_density():
    par, x, t = TwoTypeParams(theta=2.0, p=0.3), 0.7, 0.8
    for xi in (0.05, 0.12, 0.85, 0.97):
        total = math.fsum(
            replacement_component_density(par, x, t, k, xi) for k in range(1, 60)
        )
        assert total == pytest.approx(
            transition_density_eval(par, x, t, xi), abs=1e-10
        )
    with pytest.raises(InvalidParameterError):
        replacement_component_density(par, x, t, 0, 0.5)


def test_replacement_components_integrate_to_poisson_weights():
    par, x, t = PAR_A, 0.1, 1.3
    eh = math.exp(-0.5 * par.theta * t)
    lo_top = par.p * -math.expm1(-0.5 * par.theta * t)
    hi_bot = par.p + (1.0 - par.p) * eh
    for k in (1, 2, 5, 9):
        f = lambda xi: replacement_component_density(par, x, t, k, xi)
        got = (
            integrate.quad(f, 0.0, lo_top, limit=200, epsabs=1e-12)[0]
            + integrate.quad(f, hi_bot, 1.0, limit=200, epsabs=1e-12)[0]
        )
        want = math.exp(-t) * t**k / math.factorial(k)
        assert got == pytest.approx(want, abs=1e-9)


def test_simulate_path_invariants():
    par = TwoTypeParams(theta=1.5, p=0.45)
    rec = simulate_path(par, 0.8, 6.0, RngStream(9, 0))
    assert rec.initial_frequency == 0.8
    assert rec.horizon == 6.0
    times = [ev[0] for ev in rec.events]
    assert times == sorted(times)
    last_t, last_f = 0.0, 0.8
    for when, kind, freq in rec.events:
        assert 0.0 < when <= 6.0
        assert (kind, freq) in ((1, 1.0), (2, 0.0))
        last_t, last_f = when, freq
    flow = par.p + (last_f - par.p) * math.exp(-0.75 * (6.0 - last_t))
    assert rec.final_frequency == pytest.approx(flow, rel=1e-15)


def test_path_endpoint_ensemble_mean():
    par, x, t = PAR_A, 0.7, 1.0
    ends = path_endpoint_ensemble(par, x, t, 100_000, RngStream(12, 0))
    assert ends.shape == (100_000,)
    assert float(ends.min()) >= 0.0 and float(ends.max()) <= 1.0
    want = par.p + transition_moment(par, 1, x, t)
    se = float(ends.std(ddof=1)) / math.sqrt(ends.size)
    assert abs(float(ends.mean()) - want) < 4.0 * se
