import math

import numpy as np
import pytest
from scipy.optimize import linprog

from merlab import _bruteforce as brute, info
from merlab.core import DiscreteModel, FiniteDist, bias_model
from merlab.info import COUNTING, LEBESGUE, CgfEnvelope, Gaussian

from conftest import point_mass_model

# KL(Bern(.7) || Bern(.3)) = .7 ln(7/3) + .3 ln(3/7) = .4 ln(7/3); frozen from that closed form
KL_BERN_73 = 0.33891914415488


def test_entropy_examples():
    assert info.entropy(FiniteDist.bernoulli(0.5)) == pytest.approx(math.log(2), abs=1e-15)
    assert info.entropy(FiniteDist.bernoulli(0.3)) == pytest.approx(0.610864302054893, abs=1e-12)
    assert info.entropy(Gaussian(0.0, 1.0), LEBESGUE) == pytest.approx(1.4189385332046727, abs=1e-12)
    with pytest.raises(TypeError):
        info.entropy(Gaussian(), COUNTING)


def test_cmi_anchors(bias):
    assert info.cmi_wy(bias, 0) == pytest.approx(0.082283, abs=1e-6)
    assert info.cmi_wy(point_mass_model(), 3) == 0.0
    indep = DiscreteModel([0.3, 0.7], [0.5, 0.5], [[[0.2, 0.8], [0.6, 0.4]]] * 2)
    assert abs(info.cmi_wy(indep, 2)) <= 1e-15


def test_cmi_matches_bruteforce(random_models):
    for m in random_models[:12]:
        for n in (0, 1, 2):
            assert info.cmi_wy(m, n) == pytest.approx(brute.cmi_wy(m, n), abs=1e-12)


def test_chain_ordering(random_models):
    for m in random_models:
        a, b, c = info.mi_chain(m, 2)
        assert a <= b + 1e-12 <= c + 2e-12
        ra, rb, rc = brute.info_chain(m, 2)
        assert (a, b, c) == pytest.approx((ra, rb, rc), abs=1e-12)


def test_chain_degenerate_x():
    m = DiscreteModel([0.5, 0.5], [1.0], [[[0.2, 0.8]], [[0.7, 0.3]]])
    _, b, c = info.mi_chain(m, 2)
    assert b == c


def test_chain_point_mass():
    assert info.mi_chain(point_mass_model(), 2) == (0.0, 0.0, 0.0)


def test_distance_examples():
    p, q = FiniteDist.bernoulli(0.3), FiniteDist.bernoulli(0.7)
    assert info.tv(p, q) == pytest.approx(0.4, abs=1e-15)
    assert info.kl(q, p) == pytest.approx(0.4 * math.log(7 / 3), abs=1e-15)
    assert info.kl(q, p) == pytest.approx(KL_BERN_73, abs=1e-13)
    assert info.w2(Gaussian(0, 1), Gaussian(2, 1)) == pytest.approx(2.0, abs=1e-15)


def test_kl_disjoint_is_infinite():
    p = FiniteDist(("a", "b"), (1.0, 0.0))
    q = FiniteDist(("a", "b"), (0.0, 1.0))
    assert info.kl(p, q) == math.inf
    assert info.chisq(p, q) == math.inf
    assert info.tv(p, q) == 1.0


def test_distance_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        info.tv(np.array([0.5, 0.5]), np.array([1.0, 0.0, 0.0]))


def test_unknown_distance_kind():
    with pytest.raises(ValueError):
        info.distance("hellinger", FiniteDist.bernoulli(0.5), FiniteDist.bernoulli(0.5))


def _w2_lp(x1, p1, x2, p2) -> float:
    """Squared W2 by the transport linear program (independent of quantile merging)."""
    c = (np.subtract.outer(x1, x2) ** 2).ravel()
    m, k = len(x1), len(x2)
    A = np.zeros((m + k, m * k))
    for i in range(m):
        A[i, i * k:(i + 1) * k] = 1
    for j in range(k):
        A[m + j, j::k] = 1
    res = linprog(c, A_eq=A, b_eq=np.concatenate([p1, p2]), bounds=(0, None), method="highs")
    return res.fun


def test_w2_against_transport_lp():
    g = np.random.default_rng(0)
    for _ in range(25):
        m, k = g.integers(1, 6, size=2)
        x1, x2 = g.normal(size=m), g.normal(size=k)
        p1, p2 = g.dirichlet(np.ones(m)), g.dirichlet(np.ones(k))
        got = info.w2(FiniteDist(tuple(x1), p1), FiniteDist(tuple(x2), p2))
        assert got ** 2 == pytest.approx(_w2_lp(x1, p1, x2, p2), abs=1e-9)


def test_w2sq_rows_matches_scalar():
    g = np.random.default_rng(1)
    yv = np.array([0.3, -1.0, 2.0, 0.5])
    P, Q = g.dirichlet(np.ones(4), size=6), g.dirichlet(np.ones(4), size=6)
    rows = info.w2sq_rows(yv, P, Q)
    for i in range(6):
        ref = info.w2(FiniteDist(tuple(yv), P[i]), FiniteDist(tuple(yv), Q[i])) ** 2
        assert rows[i] == pytest.approx(ref, abs=1e-13)


def test_w2_quantile_grid_for_continuous_laws():
    from scipy.stats import norm
    v = info.w2(norm(0, 1), norm(1, 1), grid=4096)
    assert v == pytest.approx(1.0, abs=1e-3)


def test_gaussian_divergences():
    p, q = Gaussian(0.0, 1.0), Gaussian(0.0, 4.0)
    assert info.kl_gauss(p, q) == pytest.approx(0.5 * (0.25 - 1 + math.log(4)), abs=1e-15)
    assert info.chisq_gauss(Gaussian(0, 1), Gaussian(0, 0.4)) == math.inf
    assert info.tv_gauss(Gaussian(0, 1), Gaussian(0, 1)) == pytest.approx(0.0, abs=1e-12)
    # TV between unit-variance Gaussians one apart: 2 Phi(1/2) - 1
    assert info.tv_gauss(Gaussian(0, 1), Gaussian(1, 1)) == pytest.approx(0.38292492254802624, abs=1e-9)


def test_legendre_inverse_closed_forms():
    env = CgfEnvelope.subgaussian(1.0)
    assert info.legendre_inverse(env, 0.0) == 0.0
    assert info.legendre_inverse(env, 2.0) == 2.0
    chi = CgfEnvelope.chi_square_type(0.5)
    assert info.legendre_inverse(chi, 4.0) == pytest.approx(2.0)


@pytest.mark.parametrize("u", [0.1, 1.0, 10.0])
def test_legendre_inverse_numeric_matches_subgaussian(u):
    num = CgfEnvelope.numeric(lambda t: 0.5 * t * t)
    assert info.legendre_inverse(num, u) == pytest.approx(math.sqrt(2 * u), abs=1e-6)


def test_legendre_inverse_bounded_domain():
    # phi(l) = -ln(1 - l) - l on [0, 1) (centered exponential); inverse is finite and above sqrt(2u) scale
    env = CgfEnvelope.numeric(lambda t: -math.log1p(-t) - t, b=1.0)
    u = 0.5
    got = info.legendre_inverse(env, u)
    lam = np.linspace(1e-6, 1 - 1e-9, 200001)
    ref = np.min((u + (-np.log1p(-lam) - lam)) / lam)
    assert got == pytest.approx(ref, rel=1e-7)
    # phi* (got) = u
    assert env.dual(got) == pytest.approx(u, rel=1e-6)


def test_cgf_envelope_rejects_bad_phi():
    with pytest.raises(ValueError):
        CgfEnvelope.numeric(lambda t: t + 1.0)
    with pytest.raises(ValueError):
        CgfEnvelope.numeric(lambda t: -t * t)
    with pytest.raises(ValueError):
        info.legendre_inverse(CgfEnvelope.subgaussian(1.0), -1.0)


def test_pushforward_cmi_below_w_cmi(random_models):
    from merlab.core import ZERO_ONE
    from merlab.oracle import action_labels
    for m in random_models:
        lab = action_labels(m, ZERO_ONE)
        assert info.cmi_pushforward(m, lab, 1) <= info.cmi_wy(m, 1) + 1e-12
