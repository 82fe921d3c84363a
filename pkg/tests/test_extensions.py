import math

import numpy as np
import pytest

from merlab import extensions as ext
from merlab import info, linreg, oracle
from merlab.acceptance import two_family_models
from merlab.core import LOG, QUADRATIC, ZERO_ONE, DiscreteModel, RngStream, bias_model
from merlab.report import VACUOUS

TWO_FAMILY_MER_LOG = [0.22517354283677443, 0.14289066433172265, 0.10367640383617344, 0.08025415844542699]


def h2(p):
    return -(p * math.log(p) + (1 - p) * math.log(1 - p))


def coin(a, b):
    return DiscreteModel([0.5, 0.5], [1.0], [[[1 - a, a]], [[1 - b, b]]], y_values=[0.0, 1.0])


@pytest.fixture
def two_family():
    return ext.MultiModelFamily([0.5, 0.5], [coin(0.3, 0.7), coin(0.1, 0.9)])


def test_two_family_frozen_values(two_family):
    got = [ext.mm_mer(two_family, LOG, n).value for n in range(4)]
    assert got == pytest.approx(TWO_FAMILY_MER_LOG, abs=1e-14)
    # n = 0 by hand: ln 2 minus the average member noise entropy
    assert got[0] == pytest.approx(math.log(2) - 0.5 * (h2(0.3) + h2(0.1)), abs=1e-14)


def test_two_family_between_members(two_family):
    lo, hi = sorted(oracle.mer(m, LOG, 1).value for m in two_family.members)
    assert lo < ext.mm_mer(two_family, LOG, 1).value < hi


def test_single_member_matches_oracle(random_models):
    for m in random_models[:8]:
        fam = ext.MultiModelFamily([1.0], [m])
        for loss in (LOG, ZERO_ONE):
            for n in (0, 1, 2):
                assert ext.mm_mer(fam, loss, n).value == oracle.mer(m, loss, n).value


def test_identical_members(bias):
    fam = ext.MultiModelFamily([0.3, 0.7], [bias, bias])
    for n in range(3):
        assert ext.mm_mer(fam, LOG, n).value == pytest.approx(oracle.mer(bias, LOG, n).value, abs=1e-14)


def test_pooled_representation_invariance():
    for fam in two_family_models(0, 12):
        pooled = ext.pooled_model(fam)
        for loss in (LOG, ZERO_ONE, QUADRATIC):
            for n in (0, 1, 2):
                assert ext.mm_mer(fam, loss, n).value == pytest.approx(oracle.mer(pooled, loss, n).value, abs=1e-13)


def test_mm_mer_monotone_nonnegative():
    for fam in two_family_models(1, 10):
        vals = [ext.mm_mer(fam, LOG, n).value for n in range(4)]
        assert vals[-1] >= -1e-15
        assert all(b <= a + 1e-13 for a, b in zip(vals, vals[1:]))


def test_identity_and_bounds(two_family):
    for n in range(4):
        rs = {r.bound_id: r for r in ext.mm_log_identity_and_bounds(two_family, n)}
        assert abs(rs["mm_log_identity"].lhs - rs["mm_log_identity"].rhs) <= 1e-12
        assert all(r.verdict != "violated" for r in rs.values())
        assert ("mm_log_total" in rs) == (n >= 1)


def test_identity_single_member_has_no_diam_term(bias):
    fam = ext.MultiModelFamily([1.0], [bias])
    assert ext.diam_discrete(fam) == 0.0
    rs = {r.bound_id: r for r in ext.mm_log_identity_and_bounds(fam, 1)}
    assert rs["mm_log_identity"].rhs == pytest.approx(info.cmi_wy(bias, 1), abs=1e-15)


def test_disjoint_kernels_kl_vacuous_tv_finite():
    a = DiscreteModel([1.0], [1.0], [[[1.0, 0.0]]], y_values=[0.0, 1.0])
    b = DiscreteModel([1.0], [1.0], [[[0.0, 1.0]]], y_values=[0.0, 1.0])
    fam = ext.MultiModelFamily([0.5, 0.5], [a, b])
    assert ext.diam_discrete(fam, info.KL) == math.inf
    rs = {r.bound_id: r for r in ext.mm_log_identity_and_bounds(fam, 0)}
    assert rs["mm_decomposition_kl"].verdict == VACUOUS
    assert math.isfinite(rs["mm_decomposition_tv"].rhs) and rs["mm_decomposition_tv"].verdict == "holds"


def test_family_validation(bias):
    with pytest.raises(ValueError):
        ext.MultiModelFamily([0.5, 0.5], [bias])
    other = DiscreteModel([1.0], [0.5, 0.5], [[[0.5, 0.5], [0.5, 0.5]]])
    with pytest.raises(ValueError):
        ext.MultiModelFamily([0.5, 0.5], [bias, other])
    with pytest.raises(TypeError):
        ext.MultiModelFamily([0.5, 0.5], [bias, linreg.GaussLinRegModel.constant()])


def nested_linreg_family():
    m1 = linreg.GaussLinRegModel.legendre(1)
    m2 = linreg.GaussLinRegModel.legendre(2)
    return ext.MultiModelFamily([0.5, 0.5], [m1, m2])


def test_mm_linreg_bounds_hold():
    fam = nested_linreg_family()
    boxes = [((-4.0,), (4.0,)), ((-4.0, -4.0), (4.0, 4.0))]
    for n in (0, 2, 8):
        for r in ext.mm_linreg_bounds(fam, n, 2000, RngStream(3, (n,)), boxes):
            assert r.slack >= -3 * r.slack_se, r


def test_mm_linreg_index_error_vanishes():
    fam = nested_linreg_family()
    boxes = [((-4.0,), (4.0,)), ((-4.0, -4.0), (4.0, 4.0))]
    a = ext.mm_linreg_bounds(fam, 1, 1000, RngStream(4), boxes)[1]
    b = ext.mm_linreg_bounds(fam, 200, 1000, RngStream(4), boxes)[1]
    assert b.rhs < a.rhs


def test_mm_linreg_identical_families():
    m = linreg.GaussLinRegModel.legendre(2)
    fam = ext.MultiModelFamily([0.5, 0.5], [m, m])
    boxes = [((-3.0, -3.0), (3.0, 3.0))] * 2
    rs = ext.mm_linreg_bounds(fam, 4, 2000, RngStream(5), boxes)
    # the index posterior stays at the prior, so H(M | Z^n) = ln 2
    ent = rs[0]
    single = linreg.exact_mer_log(m, 4, RngStream(6), 2000)
    assert abs(ent.lhs - single.value) <= 3 * math.hypot(ent.lhs_se, single.se)
    trc = linreg.mmse_w(m, 4, RngStream(6), 2000).value
    assert ent.rhs == pytest.approx(m.e_phi2 * trc / 2 + math.log(2), rel=0.05)


def test_mm_linreg_needs_boxes():
    with pytest.raises(ValueError):
        ext.mm_linreg_bounds(nested_linreg_family(), 2, 200, RngStream(0), None)


def test_gh_entropy_single_gaussian():
    h = ext._gh_entropy(np.array([[1.0]]), np.array([[0.3]]), np.array([[2.0]]))
    assert h[0] == pytest.approx(0.5 * math.log(2 * math.pi * math.e * 2.0), abs=1e-12)


# Gaussian processes


def test_gp_prior_variance_at_zero():
    gp = ext.GPModel(ext.RBF(1.0, 1.0))
    assert ext.gp_mer_quadratic(gp, 0, 200).value == pytest.approx(1.0, abs=1e-15)
    assert ext.gp_posterior_var(gp, [], 0.3) == 1.0


def test_gp_forced_query_is_zero():
    gp = ext.GPModel(ext.RBF(1.0))
    e = ext.gp_mer_quadratic(gp, 1, 200, RngStream(1), force_query=True)
    assert e.value == 0.0 and e.se == 0.0


def test_gp_strictly_decreasing_and_oracle():
    gp = ext.GPModel(ext.RBF(1.0))
    vals = []
    for n in (1, 2, 4, 8):
        f = ext.gp_mer_quadratic(gp, n, 2000, RngStream(2, (n,)))
        o = ext.gp_conditional_var_oracle(gp, n, 2000, RngStream(2, (n,)))
        assert abs(f.value - o.value) <= 3 * math.hypot(f.se, o.se)
        vals.append(f)
    assert all(b.value < a.value for a, b in zip(vals, vals[1:]))


def test_gp_nested_designs_monotone():
    gp = ext.GPModel(ext.RBF(0.5))
    g = np.random.default_rng(3)
    xs = g.uniform(-1, 1, 10)
    x = 0.123
    v = [ext.gp_posterior_var(gp, xs[:k], x) for k in range(11)]
    assert all(b <= a + 1e-12 for a, b in zip(v, v[1:]))


def test_gp_duplicate_training_points():
    gp = ext.GPModel(ext.RBF(0.5))
    assert ext.gp_posterior_var(gp, [0.2, 0.2, -0.4], 0.5) >= 0.0
    assert ext.gp_posterior_var(gp, [0.2, 0.2, -0.4], -0.4) == 0.0


def test_gp_non_psd_rejected():
    tab = ext.TabulatedKernel((0.0, 1.0), np.array([[1.0, 2.0], [2.0, 1.0]]))
    gp = ext.GPModel(tab, linreg.FiniteX((0.0, 1.0), (0.5, 0.5)))
    with pytest.raises(ValueError, match="not PSD"):
        ext.gp_posterior_var(gp, [0.0, 1.0], 0.0)


def test_gp_log_cmi_random_sets():
    gp = ext.GPModel(ext.RBF(0.7), noise_var=0.3)
    for n in (1, 2, 5):
        r = ext.gp_log_cmi_check(gp, n, 300, RngStream(4, (n,)))
        worst = float(r.note.rsplit(" ", 1)[1])
        assert worst >= -1e-9 and r.verdict == "holds"


def test_gp_log_cmi_forced_duplicate_lhs_zero_noiseless():
    gp = ext.GPModel(ext.RBF(0.7))
    r = ext.gp_log_cmi_check(gp, 1, 200, RngStream(5), duplicate=True)
    assert r.lhs == 0.0 and r.verdict == VACUOUS


def test_gp_log_cmi_constant_kernel():
    gp = ext.GPModel(ext.ConstantKernel(2.0), noise_var=0.5)
    for n in (1, 3):
        r = ext.gp_log_cmi_check(gp, n, 200, RngStream(6))
        # one shared value F: both sides have closed forms
        lhs = 0.5 * math.log1p((2.0 - 2.0 * n * 2.0 / (0.5 + n * 2.0)) / 0.5)
        rhs = 0.5 * math.log1p(n * 2.0 / 0.5) / n
        assert r.lhs == pytest.approx(lhs, abs=1e-12)
        assert r.rhs == pytest.approx(rhs, abs=1e-12)
        assert r.slack >= -1e-9
