"""Multi-type laws: simplex embeddings, Markov mutation, sampling formulas.

The two-type module is the reference for d = 2 embeddings (region 1 maps
through xi -> 1 - xi).  Markov kernels are checked against scipy's matrix
exponential, and the sampling distributions against exact rational
arithmetic plus a direct binomial-mixture simulation.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate
from scipy.linalg import expm

from starcoal.core import InvalidParameterError, RngStream, TwoTypeParams
from starcoal.multitype import (
    MultiParams,
    MutationMatrix,
    eta_moment,
    infinite_sampling_prob,
    load_mutation_matrix,
    markov_line_kernel,
    markov_stationary_gamma,
    markov_stationary_sample,
    num_types_dist,
    pim_line_kernel,
    pim_region_density,
    pim_stationary_sample,
    pim_transition_law,
)
from starcoal.twotype import line_kernel, marginal_q, transition_density_eval, transition_law

MP3 = MultiParams(theta=1.4, p_vec=(0.2, 0.5, 0.3))


def test_multi_params_validation():
    assert MP3.d == 3
    with pytest.raises(InvalidParameterError):
        MultiParams(theta=0.0, p_vec=(0.5, 0.5))
    with pytest.raises(InvalidParameterError):
        MultiParams(theta=1.0, p_vec=(1.0,))
    with pytest.raises(InvalidParameterError):
        MultiParams(theta=1.0, p_vec=(0.0, 1.0))
    with pytest.raises(InvalidParameterError):
        MultiParams(theta=1.0, p_vec=(0.4, 0.4))


def test_mutation_matrix_validation():
    swap = MutationMatrix(matrix=np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert swap.d == 2
    assert swap.is_irreducible()
    assert not MutationMatrix(matrix=np.eye(3)).is_irreducible()
    assert not MutationMatrix(
        matrix=np.array([[1.0, 0.0], [0.5, 0.5]])
    ).is_irreducible()
    with pytest.raises(InvalidParameterError):
        MutationMatrix(matrix=np.ones((2, 3)))
    with pytest.raises(InvalidParameterError):
        MutationMatrix(matrix=np.array([[0.5, 0.5], [1.2, -0.2]]))
    with pytest.raises(InvalidParameterError):
        MutationMatrix(matrix=np.array([[0.5, 0.4], [0.5, 0.5]]))


def test_load_mutation_matrix(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("0.7 0.3\n0.2 0.8\n")
    mm = load_mutation_matrix(path)
    assert mm.matrix == pytest.approx(np.array([[0.7, 0.3], [0.2, 0.8]]))
    bad = tmp_path / "bad.txt"
    bad.write_text("0.7 0.4\n0.2 0.8\n")
    with pytest.raises(InvalidParameterError):
        load_mutation_matrix(bad)


def test_pim_line_kernel_embeds_two_type():
    theta, p = 1.9, 0.35
    mp = MultiParams(theta=theta, p_vec=(p, 1.0 - p))
    for t in (0.0, 0.4, 2.5):
        got = pim_line_kernel(mp, t)
        assert got == pytest.approx(
            line_kernel(TwoTypeParams(theta=theta, p=p), t).as_matrix(), abs=1e-15
        )
    k3 = pim_line_kernel(MP3, 0.8)
    assert k3.sum(axis=1) == pytest.approx(np.ones(3), abs=1e-15)


def test_pim_transition_law_embeds_two_type():
    theta, p, x, t = 1.0, 0.3, 0.7, 1.0
    par = TwoTypeParams(theta=theta, p=p)
    mp = MultiParams(theta=theta, p_vec=(p, 1.0 - p))
    law = pim_transition_law(mp, (x, 1.0 - x), t)
    two = transition_law(par, x, t)
    assert law.atom_mass == two.atoms[0][1]
    assert law.atom_point[0] == pytest.approx(marginal_q(par, x, t)[0], rel=1e-15)
    assert math.fsum(law.atom_point) == pytest.approx(1.0, abs=1e-15)

    upper = max(two.pieces, key=lambda pc: pc.lower)
    lower = min(two.pieces, key=lambda pc: pc.lower)
    r0, r1 = law.regions
    assert r0.lower == pytest.approx(upper.lower, rel=1e-15)
    assert r0.mass == pytest.approx(upper.mass, rel=1e-13)
    assert r1.mass == pytest.approx(lower.mass, rel=1e-13)
    for v in (0.84, 0.93, 0.99):
        assert r0.density(v) == pytest.approx(
            transition_density_eval(par, x, t, v), rel=1e-13
        )
        assert pim_region_density(mp, (x, 1.0 - x), t, 0, v) == pytest.approx(
            transition_density_eval(par, x, t, v), rel=1e-13
        )
    # Region 1 describes the type-2 coordinate; xi -> 1 - xi embeds it.
    for v in (0.88, 0.96):
        assert pim_region_density(mp, (x, 1.0 - x), t, 1, v) == pytest.approx(
            transition_density_eval(par, x, t, 1.0 - v), rel=1e-13
        )
    assert law.total_mass() == pytest.approx(1.0, abs=1e-14)


def test_pim_transition_law_three_types():
    x_vec = (0.5, 0.25, 0.25)
    t = 0.9
    law = pim_transition_law(MP3, x_vec, t)
    assert law.atom_mass == math.exp(-t)
    assert math.fsum(law.atom_point) == pytest.approx(1.0, abs=1e-14)
    assert law.total_mass() == pytest.approx(1.0, abs=1e-14)
    for region in law.regions:
        ref, err = integrate.quad(
            region.density, region.lower, region.upper, limit=200, epsabs=1e-12
        )
        assert region.mass == pytest.approx(ref, abs=max(1e-9, 10 * err))
        for v in (region.lower + 0.3 * (1.0 - region.lower), 0.99):
            comp = region.companion(v)
            assert comp[region.index] == v
            assert math.fsum(comp) == pytest.approx(1.0, abs=1e-14)
            assert all(c >= 0.0 for c in comp)
    # t = 0 degenerates to the starting point.
    frozen = pim_transition_law(MP3, x_vec, 0.0)
    assert frozen.atom_mass == 1.0
    assert frozen.atom_point == x_vec
    assert frozen.regions == ()
    with pytest.raises(InvalidParameterError):
        pim_transition_law(MP3, (0.5, 0.5, 0.5), 1.0)


def test_pim_stationary_sample():
    rng = RngStream(41, 0)
    states = pim_stationary_sample(MP3, rng, size=50_000)
    assert states.shape == (50_000, 3)
    assert float(states.min()) >= 0.0
    assert states.sum(axis=1) == pytest.approx(np.ones(50_000), abs=1e-12)
    # Stationary mean is p_vec.
    for i in range(3):
        se = float(states[:, i].std(ddof=1)) / math.sqrt(states.shape[0])
        assert abs(float(states[:, i].mean()) - MP3.p_vec[i]) < 4.0 * se
    single = pim_stationary_sample(MP3, rng)
    assert single.shape == (3,)
    assert math.fsum(single) == pytest.approx(1.0, abs=1e-12)


def test_markov_line_kernel_swap_closed_form():
    swap = MutationMatrix(matrix=np.array([[0.0, 1.0], [1.0, 0.0]]))
    theta, t = 1.6, 0.9
    same = 0.5 * (1.0 + math.exp(-theta * t))
    cross = 0.5 * (1.0 - math.exp(-theta * t))
    got = markov_line_kernel(swap, theta, t)
    assert got == pytest.approx(np.array([[same, cross], [cross, same]]), abs=1e-13)
    assert markov_line_kernel(swap, theta, 0.0) == pytest.approx(np.eye(2))


def test_markov_line_kernel_against_expm():
    m = np.array([[0.1, 0.6, 0.3], [0.4, 0.2, 0.4], [0.25, 0.25, 0.5]])
    mm = MutationMatrix(matrix=m)
    for theta, t in ((0.7, 0.5), (2.0, 1.7), (5.0, 8.0)):
        got = markov_line_kernel(mm, theta, t)
        ref = expm(0.5 * theta * (m - np.eye(3)) * t)
        assert np.max(np.abs(got - ref)) < 1e-12
        assert got.sum(axis=1) == pytest.approx(np.ones(3), abs=1e-12)


def test_markov_stationary_gamma():
    m = np.array([[0.1, 0.6, 0.3], [0.4, 0.2, 0.4], [0.25, 0.25, 0.5]])
    mm = MutationMatrix(matrix=m)
    gamma = markov_stationary_gamma(mm)
    assert gamma @ m == pytest.approx(gamma, abs=1e-13)
    assert gamma.sum() == pytest.approx(1.0, abs=1e-13)
    # Doubly stochastic chains have the uniform law.
    swap = MutationMatrix(matrix=np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert markov_stationary_gamma(swap) == pytest.approx(np.array([0.5, 0.5]))
    with pytest.raises(InvalidParameterError):
        markov_stationary_gamma(MutationMatrix(matrix=np.eye(2)))


def test_markov_stationary_sample():
    m = np.array([[0.1, 0.6, 0.3], [0.4, 0.2, 0.4], [0.25, 0.25, 0.5]])
    state = markov_stationary_sample(MutationMatrix(matrix=m), 1.3, RngStream(43, 0))
    assert state.shape == (3,)
    assert float(state.min()) >= 0.0
    assert math.fsum(state) == pytest.approx(1.0, abs=1e-12)


def test_infinite_sampling_prob():
    # theta = 2 makes every count equally likely, exactly.
    for n in (1, 4, 11, 20):
        for j in range(n + 1):
            assert infinite_sampling_prob(n, j, 2.0) == float(Fraction(1, n + 1))
    # Exact rational route at theta = 3 (so a = 2/3 has no float error:
    # Fraction(3.0) == 3).
    a = Fraction(2, 3)
    n = 6
    den = Fraction(1)
    for m in range(n):
        den *= 1 + a + m
    for j in range(n + 1):
        num = Fraction(math.factorial(n), math.factorial(j))
        for m in range(j):
            num *= a + m
        assert infinite_sampling_prob(n, j, 3.0) == float(num / den)
    assert math.fsum(
        infinite_sampling_prob(9, j, 0.7) for j in range(10)
    ) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(InvalidParameterError):
        infinite_sampling_prob(3, 4, 1.0)


def test_eta_moment():
    # 8/429, the exact rational value at theta = 4/5.
    assert eta_moment(3, 2, 0.8) == pytest.approx(float(Fraction(8, 429)), rel=1e-14)
    assert eta_moment(0, 0, 1.7) == 1.0
    # b = 0 collapses to a/(a+m); exact at theta = 2.
    for m in range(5):
        assert eta_moment(m, 0, 2.0) == float(Fraction(1, m + 1))
    # Independent quadrature of the defining integral.
    theta = 1.3
    a = 2.0 / theta
    got = eta_moment(2, 3, theta)
    ref, _ = integrate.quad(
        lambda e: a * e ** (a - 1.0) * e**2 * (1.0 - e) ** 3, 0.0, 1.0
    )
    assert got == pytest.approx(ref, abs=1e-10)
    with pytest.raises(InvalidParameterError):
        eta_moment(-1, 0, 1.0)


def test_num_types_dist_closure():
    for n, theta in ((3, 0.9), (8, 2.0), (12, 4.2)):
        total = math.fsum(num_types_dist(n, k, theta) for k in range(1, n + 1))
        assert total == pytest.approx(1.0 - eta_moment(0, n, theta), abs=1e-14)
    with pytest.raises(InvalidParameterError):
        num_types_dist(5, 0, 1.0)
    with pytest.raises(InvalidParameterError):
        num_types_dist(5, 6, 1.0)


def test_num_types_dist_against_simulation():
    # Direct mixture route: eta = U^{theta/2}, B ~ Binomial(n, eta), and
    # B >= 1 shows k = n - B + 1 distinct types.
    n, theta, size = 6, 1.5, 200_000
    gen = RngStream(44, 0).gen
    eta = gen.random(size) ** (0.5 * theta)
    b = gen.binomial(n, eta)
    for k in range(1, n + 1):
        freq = float(np.mean(b == n - k + 1))
        want = num_types_dist(n, k, theta)
        se = math.sqrt(want * (1.0 - want) / size)
        assert abs(freq - want) < 4.0 * se, f"k = {k}"
