import math

import numpy as np
import pytest

from merlab import linreg, mc
from merlab.core import LOG, QUADRATIC, ZERO_ONE, BoundedTableLoss, RngStream, bias_model
from merlab.linreg import FiniteX, UniformX


def toy_point_mass():
    return mc.LogisticModel(1, lambda x: np.asarray(x, float)[..., None], FiniteX((-1.0, 1.0), (0.5, 0.5)),
                            mc.point_mass([1.3]))


def within(a, b, k=3.0):
    return abs(a.value - b.value) <= k * math.hypot(a.se, b.se)


def test_point_mass_logistic_is_zero():
    m = toy_point_mass()
    for loss in (LOG, QUADRATIC, ZERO_ONE):
        e = mc.estimate_mer(m, loss, 3, 200, mc.GridQuadrature(), RngStream(1))
        assert abs(e.value) <= 1e-15 and e.se <= 1e-15
    for r in mc.logistic_bounds(m, 3, 200, mc.GridQuadrature(), RngStream(1)):
        assert abs(r.lhs) <= 1e-15 and abs(r.rhs) <= 1e-12
    assert mc.estimate_mmse_w(m, 2, 200, mc.GridQuadrature(), RngStream(1)).value == 0.0


def test_toy_strictly_decreasing():
    toy = mc.LogisticModel.toy()
    ests = mc.mer_curve(toy, LOG, [0, 8], 4000, mc.GridQuadrature(), seed=3)
    assert mc.strictly_decreasing(ests)


def test_mmse_decreasing_on_toy():
    toy = mc.LogisticModel.toy()
    ests = [mc.estimate_mmse_w(toy, n, 4000, mc.GridQuadrature(), RngStream(4)) for n in (0, 4, 16)]
    assert mc.strictly_decreasing(ests)


def test_toy_mer_at_zero_matches_quadrature():
    # n = 0 posterior is the prior: MER_log = h(E sigmoid(wx)) - E h(sigmoid(wx)) with X = +-1
    toy = mc.LogisticModel.toy()
    t, wt = np.polynomial.legendre.leggauss(200)
    w = 2.0 * t
    p = 1 / (1 + np.exp(-w))
    h = lambda q: -(q * np.log(q) + (1 - q) * np.log(1 - q))
    exact = h(0.5) - float(np.dot(wt / 2, h(p)))
    est = mc.estimate_mer(toy, LOG, 0, 4000, mc.GridQuadrature(2001), RngStream(0))
    # the omniscient term is random through the drawn w
    assert abs(est.value - exact) <= 3 * est.se


@pytest.mark.parametrize("n", [0, 2, 8])
def test_toy_bounds_hold(n):
    toy = mc.LogisticModel.toy()
    for r in mc.logistic_bounds(toy, n, 2000, mc.GridQuadrature(), RngStream(5)):
        assert r.slack >= -3 * r.slack_se, r


def test_log_bound_beats_lipschitz_for_large_n():
    toy = mc.LogisticModel.toy(s_w=0.5)
    rs = {r.bound_id: r for r in mc.logistic_bounds(toy, 64, 1000, mc.GridQuadrature(), RngStream(6))}
    assert rs["logistic_log"].rhs < rs["logistic_lipschitz"].rhs


def test_grid_and_rwm_agree():
    toy = mc.LogisticModel.toy()
    for n in (2, 8):
        a = mc.estimate_mer(toy, LOG, n, 400, mc.GridQuadrature(), RngStream(7))
        b = mc.estimate_mer(toy, LOG, n, 400, mc.RandomWalkMetropolis(), RngStream(7))
        assert within(a, b)


def test_rwm_two_dimensional_agrees():
    feat = lambda x: np.stack([np.ones_like(x), x], -1)
    m = mc.LogisticModel(2, feat, FiniteX((-1.0, 0.0, 1.0), (0.3, 0.3, 0.4)), mc.BoxPrior((-1.5, -1.5), (1.5, 1.5)))
    a = mc.estimate_mer(m, LOG, 4, 300, mc.GridQuadrature(81), RngStream(8))
    b = mc.estimate_mer(m, LOG, 4, 300, mc.RandomWalkMetropolis(samples=300), RngStream(8))
    assert within(a, b)


def test_rwm_needs_two_chains():
    with pytest.raises(ValueError):
        mc.RandomWalkMetropolis(chains=1)


def test_linear_g_reduces_to_linreg():
    nl = mc.NonlinRegModel(mc.linear_g, FiniteX((1.0,), (1.0,)), mc.GaussianPrior(1, 1.0), 1.0,
                           grad=mc.linear_grad, grid=mc.GridQuadrature(801))
    lr = linreg.GaussLinRegModel.constant()
    for n in (0, 3):
        q = mc.estimate_mer(nl, QUADRATIC, n, 2000, rng=RngStream(9))
        assert q.value == pytest.approx(1 / (n + 1), abs=1e-6)  # posterior variance is deterministic here
        lg = mc.estimate_mer(nl, LOG, n, 200, rng=RngStream(9))
        assert lg.value == pytest.approx(linreg.exact_mer_log(lr, n).value, abs=1e-4)
        mm = mc.estimate_mmse_w(nl, n, 4000, rng=RngStream(9))
        assert abs(mm.value - linreg.mmse_w(lr, n).value) <= 3 * mm.se


def test_linear_g_bounds_match_linreg():
    nl = mc.NonlinRegModel(mc.linear_g, FiniteX((1.0,), (1.0,)), mc.GaussianPrior(1, 1.0), 1.0,
                           grad=mc.linear_grad, grid=mc.GridQuadrature(801))
    rs = {r.bound_id: r for r in mc.nonlinreg_bounds(nl, 4, 4000, rng=RngStream(10))}
    # 2 R_2(g | X, Z^n) = 2 E tr C = 0.4 for the constant model at n = 4
    assert abs(rs["nonlinreg_rlz_g"].rhs - 0.4) <= 3 * rs["nonlinreg_rlz_g"].rhs_se
    assert rs["nonlinreg_rlz_g"].lhs == pytest.approx(0.2, abs=1e-6)


def test_overparameterized_function_space_tighter():
    prior = mc.GridPrior(np.array([[-1.0], [1.0], [-0.5], [0.5]]), np.array([0.25] * 4))
    m = mc.NonlinRegModel(mc.squared_g, UniformX(0.0, 1.0), prior, 0.25, grad=mc.squared_grad)
    rs = {r.bound_id: r for r in mc.nonlinreg_bounds(m, 2, 2000, rng=RngStream(11))}
    assert rs["nonlinreg_rlz_g"].rhs + 3 * rs["nonlinreg_rlz_g"].rhs_se < rs["nonlinreg_rlz_w"].rhs
    assert all(r.slack >= -3 * r.slack_se for r in rs.values())


def test_nonlin_point_mass_all_zero():
    m = mc.NonlinRegModel(mc.tanh_unit, UniformX(), mc.point_mass([1.0, 2.0]), 0.5, grad=mc.tanh_unit_grad)
    for r in mc.nonlinreg_bounds(m, 2, 200, rng=RngStream(12)):
        assert abs(r.lhs) <= 1e-12 and abs(r.rhs) <= 1e-12


def test_nonlin_rejects_rwm_and_zeroone():
    m = mc.NonlinRegModel(mc.linear_g, UniformX(), mc.BoxPrior((-1.0,), (1.0,)), 1.0, grad=mc.linear_grad)
    with pytest.raises(TypeError):
        mc.simulate(m, 1, 200, mc.RandomWalkMetropolis())
    with pytest.raises(TypeError):
        mc.estimate_mer(m, ZERO_ONE, 1, 200)


def test_min_trials():
    with pytest.raises(ValueError):
        mc.estimate_mer(mc.LogisticModel.toy(), LOG, 1, 50)


def test_se_shrinks_by_sqrt2():
    toy = mc.LogisticModel.toy()
    a = mc.estimate_mer(toy, LOG, 2, 2000, mc.GridQuadrature(), RngStream(13))
    b = mc.estimate_mer(toy, LOG, 2, 4000, mc.GridQuadrature(), RngStream(14))
    assert a.se / b.se == pytest.approx(math.sqrt(2), rel=0.2)


def test_mixture_entropy_single_component():
    h = mc.mixture_entropy(np.array([[1.0, 0.0]]), np.array([0.0, 5.0]), 2.0)
    assert h[0] == pytest.approx(0.5 * math.log(2 * math.pi * math.e * 2.0), abs=1e-9)


def test_mixture_entropy_separated_components():
    h = mc.mixture_entropy(np.array([[0.5, 0.5]]), np.array([-50.0, 50.0]), 1.0)
    assert h[0] == pytest.approx(0.5 * math.log(2 * math.pi * math.e) + math.log(2), abs=1e-9)


def suite_configs():
    """The seeded 20-configuration regression suite."""
    out = []
    for i in range(10):
        g = RngStream(500, (i,)).generator
        sw = float(g.uniform(0.5, 3.0))
        vals = tuple(np.round(g.uniform(-1, 1, 3), 3))
        m = mc.LogisticModel(1, lambda x: np.asarray(x, float)[..., None], FiniteX(vals, (0.3, 0.3, 0.4)),
                             mc.BoxPrior((-sw,), (sw,)))
        out.append((m, int(g.integers(0, 10))))
    gs = [(mc.linear_g, mc.linear_grad, 1), (mc.squared_g, mc.squared_grad, 1), (mc.tanh_unit, mc.tanh_unit_grad, 2)]
    for i in range(10):
        g = RngStream(600, (i,)).generator
        fn, gr, d = gs[i % 3]
        prior = mc.BoxPrior(tuple([-1.0] * d), tuple([1.0] * d))
        out.append((mc.NonlinRegModel(fn, UniformX(), prior, float(g.uniform(0.2, 1.0)), grad=gr,
                                      grid=mc.GridQuadrature(201 if d == 1 else 41)), int(g.integers(0, 6))))
    return out


@pytest.mark.parametrize("idx", range(20))
def test_regression_suite(idx):
    m, n = suite_configs()[idx]
    fn = mc.logistic_bounds if isinstance(m, mc.LogisticModel) else mc.nonlinreg_bounds
    for r in fn(m, n, 400, rng=RngStream(700, (idx,))):
        assert r.slack >= -3 * r.slack_se, r


def test_predictive_sampling_paths(bias):
    r = mc.predictive_sampling_risk(bias, ZERO_ONE, 2)
    assert r.verdict == "holds" and r.note == "exact enumeration"
    toy = mc.LogisticModel.toy()
    t = mc.predictive_sampling_risk(toy, ZERO_ONE, 3, 2000, RngStream(15))
    assert t.slack >= -3 * t.slack_se
    pm = mc.predictive_sampling_risk(toy_point_mass(), ZERO_ONE, 1, 200, RngStream(15))
    assert pm.slack >= -1e-12


def test_predictive_sampling_deterministic_kernel():
    from merlab.core import DiscreteModel
    m = DiscreteModel([1.0, 0.0], [1.0], [[[1.0, 0.0]], [[0.0, 1.0]]])
    r = mc.predictive_sampling_risk(m, ZERO_ONE, 1)
    assert r.lhs == 0.0 and r.rhs == 0.0


def test_predictive_sampling_rejects_non_metric(bias):
    with pytest.raises(TypeError):
        mc.predictive_sampling_risk(bias, QUADRATIC, 1)
    sq = BoundedTableLoss(np.array([[0.0, 1.0], [4.0, 0.0]]), 4.0)
    with pytest.raises(TypeError):
        mc.predictive_sampling_risk(bias, sq, 1)


def test_sweep_rows_and_reproducibility():
    toy = mc.LogisticModel.toy()
    a = mc.sweep(toy, "toy", [0, 2], 200, mc.GridQuadrature(), seed=2)
    b = mc.sweep(toy, "toy", [0, 2], 200, mc.GridQuadrature(), seed=2)
    assert a == b and len(a) == 6 and len(a[0]) == len(mc.SWEEP_FIELDS)


def test_s_phi_required_for_continuous_support():
    with pytest.raises(ValueError):
        mc.LogisticModel(1, lambda x: np.asarray(x, float)[..., None], UniformX(), mc.BoxPrior((-1.0,), (1.0,)))
    m = mc.LogisticModel(1, lambda x: np.asarray(x, float)[..., None], UniformX(), mc.BoxPrior((-1.0,), (1.0,)),
                         s_phi=1.0)
    assert m.s_phi_source == "supplied"
