import math

import numpy as np
import pytest

from merlab import _bruteforce as brute
from merlab.bounds import absolute_table
from merlab.core import LOG, QUADRATIC, ZERO_ONE, DataSequence, DiscreteModel, FiniteDist, bias_model
from merlab.oracle import (ExactSum, ExceedsEnumerationBudget, ImpossibleDataError, bayes_envelope,
                           bayes_risk_data, decode_sequence, dpi_check, fundamental_limit, iter_blocks, mer,
                           plug_in_excess, posterior_error, posterior_predictive, posterior_w, required_atoms)

from conftest import point_mass_model

H2_03 = 0.6108643020548935  # binary entropy of 0.3 in nats


def test_envelope_examples():
    r, a = bayes_envelope(FiniteDist.bernoulli(0.5), ZERO_ONE)
    assert (r, a) == (0.5, 0)
    r, a = bayes_envelope(FiniteDist.bernoulli(0.3), LOG)
    assert r == pytest.approx(H2_03, abs=1e-12) and a == FiniteDist.bernoulli(0.3)
    r, a = bayes_envelope(FiniteDist.bernoulli(0.3), QUADRATIC)
    assert r == pytest.approx(0.21, abs=1e-15) and a == pytest.approx(0.3)


def test_bias_posterior_and_predictive(bias):
    z = DataSequence((("*", 1),))
    post = posterior_w(bias, "*", z)
    assert post.probs == pytest.approx([0.3, 0.7], abs=1e-15)
    assert posterior_w(bias, None, DataSequence()).probs.tolist() == [0.5, 0.5]
    assert posterior_predictive(bias, "*", z).prob(1) == pytest.approx(0.58, abs=1e-15)
    assert posterior_predictive(bias, "*", DataSequence()).prob(1) == pytest.approx(0.5, abs=1e-15)


def test_point_mass_posterior_and_predictive():
    m = point_mass_model()
    z = DataSequence(((0, 1), (0, 1), (0, 0)))
    assert posterior_w(m, 0, z).probs.tolist() == [1.0, 0.0]
    assert posterior_predictive(m, 0, z).probs.tolist() == [0.4, 0.6]


def test_impossible_data():
    m = DiscreteModel([0.5, 0.5], [1.0], [[[1.0, 0.0]], [[1.0, 0.0]]])
    with pytest.raises(ImpossibleDataError):
        posterior_w(m, 0, DataSequence(((0, 1),)))


def test_bias_bayes_risks(bias):
    assert bayes_risk_data(bias, ZERO_ONE, 0).value == pytest.approx(0.5, abs=1e-15)
    assert bayes_risk_data(bias, ZERO_ONE, 1).value == pytest.approx(0.42, abs=1e-15)
    assert bayes_risk_data(bias, LOG, 0).value == pytest.approx(math.log(2), abs=1e-15)
    assert fundamental_limit(bias, ZERO_ONE).value == pytest.approx(0.3, abs=1e-15)
    assert fundamental_limit(bias, QUADRATIC).value == pytest.approx(0.21, abs=1e-15)


def test_bias_mer_anchors(bias):
    assert mer(bias, ZERO_ONE, 0).value == pytest.approx(0.2, abs=1e-12)
    assert mer(bias, ZERO_ONE, 1).value == pytest.approx(0.12, abs=1e-12)
    assert mer(bias, LOG, 0).value == pytest.approx(math.log(2) - H2_03, abs=1e-12)
    assert mer(bias, LOG, 0).value == pytest.approx(0.082283, abs=1e-6)
    assert mer(bias, QUADRATIC, 0).value == pytest.approx(0.04, abs=1e-12)


def test_deterministic_kernel_fundamental_zero():
    ky = np.zeros((2, 3, 2))
    ky[0, :, 0] = 1
    ky[1, [0, 1], 1] = 1
    ky[1, 2, 0] = 1
    m = DiscreteModel([0.4, 0.6], [0.2, 0.3, 0.5], ky, y_values=[0.0, 1.0])
    for loss in (LOG, ZERO_ONE, QUADRATIC, absolute_table(m)):
        assert fundamental_limit(m, loss).value == 0.0


@pytest.mark.parametrize("loss", [LOG, QUADRATIC, ZERO_ONE])
def test_point_mass_mer_zero(loss):
    m = point_mass_model()
    for n in range(4):
        assert abs(mer(m, loss, n).value) <= 1e-15


def test_against_bruteforce(random_models):
    for m in random_models[:12]:
        losses = [LOG, ZERO_ONE, QUADRATIC, absolute_table(m)]
        for loss in losses:
            for n in (0, 1, 2):
                assert mer(m, loss, n).value == pytest.approx(brute.mer(m, loss, n), abs=1e-12)


def test_plug_in_excess_dominates_mer(bias, random_models):
    assert plug_in_excess(bias, ZERO_ONE, 0) >= 0.2 - 1e-12
    for m in random_models[:10]:
        for n in (0, 1):
            assert plug_in_excess(m, ZERO_ONE, n) >= mer(m, ZERO_ONE, n).value - 1e-12


def test_plug_in_zero_for_point_mass():
    assert abs(plug_in_excess(point_mass_model(), ZERO_ONE, 2)) <= 1e-15


def test_plug_in_exact_recovery():
    # two deterministic hypotheses that disagree at the only x: one sample identifies W
    m = DiscreteModel([0.5, 0.5], [1.0], [[[1.0, 0.0]], [[0.0, 1.0]]])
    assert abs(plug_in_excess(m, ZERO_ONE, 1)) <= 1e-15


def test_budget_error_before_work(bias, monkeypatch):
    assert required_atoms(bias, 10) == 2 ** 10
    with pytest.raises(ExceedsEnumerationBudget):
        mer(bias, LOG, 12, budget=1000)
    monkeypatch.setenv("MERLAB_BUDGET", "100")
    with pytest.raises(ExceedsEnumerationBudget):
        mer(bias, LOG, 8)


def test_blocks_cover_all_sequences():
    m = bias_model()
    seen = 0
    total = ExactSum()
    for blk in iter_blocks(m, 5, block=7):
        assert blk.start == seen
        seen += blk.J.shape[0]
        total.add(blk.J)
    assert seen == 2 ** 5
    assert total.value == pytest.approx(1.0, abs=1e-15)


def test_decode_sequence_order(bias):
    assert decode_sequence(bias, 3, 0).pairs == (("*", 0),) * 3
    assert decode_sequence(bias, 3, 1).pairs[-1] == ("*", 1)
    assert decode_sequence(bias, 3, 4).pairs[0] == ("*", 1)


def test_exact_sum_is_order_free():
    vals = np.array([1e16, 1.0, -1e16, 1.0])
    a = ExactSum()
    a.add(vals)
    b = ExactSum()
    b.add(vals[::-1])
    assert a.value == b.value == 2.0


def test_posterior_error_identity(random_models):
    for m in random_models:
        for n in (0, 1, 2):
            a, b = posterior_error(m, n)
            assert a == pytest.approx(b, abs=1e-12)
            assert brute.posterior_error(m, n)[0] == pytest.approx(a, abs=1e-12)


@pytest.mark.parametrize("kind", ["value_of_information", "data_growth", "total_evidence", "randomized"])
def test_dpi_triples(bias, kind):
    r = dpi_check(bias, ZERO_ONE, kind, n=1)
    assert r.verdict == "holds"


def test_randomized_rule_gains_nothing(random_models):
    for m in random_models[:8]:
        r = dpi_check(m, ZERO_ONE, "randomized", n=1, t=0.3)
        assert r.lhs == pytest.approx(r.rhs, abs=1e-13)


def test_independent_u_reduces_to_value_of_information(bias):
    # U constant: R(Y | X, Z^n) <= R(Y)
    r = dpi_check(bias, LOG, "value_of_information", n=2)
    assert r.rhs == pytest.approx(math.log(2), abs=1e-15)
    assert r.lhs < r.rhs


def test_dpi_rejects_non_markov_joint(bias):
    from merlab.oracle import MarkovTriple
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[1, 0, 1] = 0.5
    with pytest.raises(ValueError, match="not Markov"):
        dpi_check(bias, LOG, MarkovTriple(p))
