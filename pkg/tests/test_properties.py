"""Invariants checked over generated models and distributions."""
import math

import numpy as np
from hypothesis import given, strategies as st

from merlab import bounds, info, oracle
from merlab.core import (LOG, QUADRATIC, ZERO_ONE, BoundedTableLoss, FiniteDist, RngStream, loss_eval,
                         random_discrete_model, sample_indices)
from merlab.info import CgfEnvelope

from conftest import model_from_seed

seeds = st.integers(0, 2 ** 31 - 1)


def losses_for(m):
    out = [LOG, ZERO_ONE]
    if m.y_values is not None:
        out.append(QUADRATIC)
    return out


def probs(k):
    return st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k).filter(lambda v: sum(v) > 1e-3).map(
        lambda v: np.asarray(v) / sum(v))


@st.composite
def dist_pair(draw, full_support=False):
    k = draw(st.integers(1, 5))
    p = draw(probs(k))
    q = draw(probs(k))
    if full_support:
        q = 0.9 * q + 0.1 / k
    return FiniteDist(range(k), p), FiniteDist(range(k), q)


@st.composite
def real_law(draw):
    k = draw(st.integers(1, 4))
    xs = draw(st.lists(st.floats(-5, 5), min_size=k, max_size=k, unique=True))
    return FiniteDist(tuple(xs), draw(probs(k)))


@given(seeds)
def test_mer_monotone_and_nonnegative(seed):
    m = model_from_seed(seed)
    for loss in losses_for(m):
        vals = [oracle.mer(m, loss, n).value for n in range(4)]
        assert min(vals) >= -1e-12
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


@given(seeds, st.integers(0, 2))
def test_mer_below_plug_in(seed, n):
    m = model_from_seed(seed)
    for loss in losses_for(m):
        assert oracle.mer(m, loss, n).value <= oracle.plug_in_excess(m, loss, n) + 1e-12


@given(seeds, st.integers(0, 3))
def test_log_mer_equals_cmi(seed, n):
    m = model_from_seed(seed)
    assert abs(oracle.mer(m, LOG, n).value - info.cmi_wy(m, n)) <= 1e-12


@given(seeds, st.integers(1, 3))
def test_information_chain(seed, n):
    a, b, c = info.mi_chain(model_from_seed(seed), n)
    assert a <= b + 1e-12 and b <= c + 1e-12


@given(seeds, st.integers(0, 2))
def test_posterior_error_identity(seed, n):
    a, b = oracle.posterior_error(model_from_seed(seed), n)
    assert abs(a - b) <= 1e-12


@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=5).filter(lambda v: sum(v) > 1e-3))
def test_log_envelope_is_entropy(v):
    d = FiniteDist(range(len(v)), np.asarray(v) / sum(v))
    assert oracle.bayes_envelope(d, LOG)[0] == info.entropy(d)


@given(dist_pair())
def test_pinsker(pq):
    p, q = pq
    t, k = info.tv(p, q), info.kl(p, q)
    assert t * t <= k / 2 + 1e-12


@given(dist_pair(full_support=True))
def test_reverse_pinsker(pq):
    # KL <= ln(1 + chi^2) and chi^2 <= 2 TV^2 / min q
    p, q = pq
    qmin = float(np.min(q.probs))
    assert info.kl(p, q) <= math.log1p(2 * info.tv(p, q) ** 2 / qmin) + 1e-12


def mixture(a, b, g):
    acc = {}
    for x, w in zip(a.support, a.probs):
        acc[x] = acc.get(x, 0.0) + g * w
    for x, w in zip(b.support, b.probs):
        acc[x] = acc.get(x, 0.0) + (1 - g) * w
    return FiniteDist(tuple(acc), tuple(acc.values()))


@given(real_law(), real_law(), real_law(), real_law(), st.sampled_from([0.25, 0.5, 0.75]))
def test_w2_squared_joint_convexity(p1, q1, p2, q2, g):
    lhs = info.w2(mixture(p1, p2, g), mixture(q1, q2, g)) ** 2
    rhs = g * info.w2(p1, q1) ** 2 + (1 - g) * info.w2(p2, q2) ** 2
    assert lhs <= rhs + 1e-9


@given(st.floats(0.05, 20.0), st.floats(0.0, 50.0))
def test_legendre_numeric_matches_analytic(s2, u):
    a = info.legendre_inverse(CgfEnvelope.subgaussian(s2), u)
    b = info.legendre_inverse(CgfEnvelope.numeric(lambda t: 0.5 * s2 * t * t), u)
    assert abs(a - b) <= 1e-6 * max(a, 1e-12) + 1e-12


@given(seeds)
def test_battery_never_violated(seed):
    m = model_from_seed(seed)
    for n in (0, 1, 2):
        for r in bounds.battery(m, n):
            assert r.verdict in ("holds", "vacuous"), r


@given(seeds, st.integers(0, 2))
def test_subgaussian_monotone_weakening(seed, n):
    m = model_from_seed(seed, x_independent=True)
    rs = {r.bound_id: r for r in bounds.bound_subgaussian(m, ZERO_ONE, n)}
    assert rs["subgaussian_pushforward"].rhs <= rs["subgaussian_w"].rhs + 1e-12
    if "subgaussian_data" in rs:
        assert rs["subgaussian_w"].rhs <= rs["subgaussian_data"].rhs + 1e-12


@st.composite
def binary_class(draw):
    nx = draw(st.integers(1, 5))
    K = draw(st.integers(1, 6))
    t = draw(st.lists(st.lists(st.integers(0, 1), min_size=K, max_size=K), min_size=nx, max_size=nx))
    return bounds.GenerativeFunctionClass(np.array(t))


@given(binary_class(), st.randoms())
def test_vc_invariances(g, r):
    t = np.array(g.table)
    perm = list(range(t.shape[1]))
    r.shuffle(perm)
    d = bounds.vc_dimension(g)
    assert bounds.vc_dimension(g.flipped()) == d
    assert bounds.vc_dimension(bounds.GenerativeFunctionClass(t[:, perm])) == d


@given(binary_class(), st.integers(1, 3))
def test_realizable_lhs_is_bayes_risk(g, n):
    m = bounds.realizable_model(g)
    br = oracle.bayes_risk_data(m, ZERO_ONE, n).value
    assert oracle.fundamental_limit(m, ZERO_ONE).value == 0.0
    assert abs(bounds.bound_realizable(m, g, ZERO_ONE, n)[0].lhs - br) <= 1e-12


@given(st.integers(0, 2 ** 31 - 1), st.integers(0, 3), st.floats(0.0, 1.0))
def test_log_loss_finite_iff_positive(seed, y, p):
    probs_ = np.full(4, (1 - p) / 3)
    probs_[seed % 4] = p
    finite = math.isfinite(loss_eval(LOG, y, FiniteDist(range(4), probs_)))
    assert finite == (probs_[y] > 0)


@given(st.integers(1, 4), st.integers(1, 4), st.floats(0.1, 10.0), seeds)
def test_table_loss_in_range(ny, na, b, seed):
    g = np.random.default_rng(seed)
    L = BoundedTableLoss(g.uniform(0, b, (ny, na)), b)
    for y in range(ny):
        for a in range(na):
            assert 0.0 <= loss_eval(L, y, a) <= b


def test_sampling_frequencies():
    size = 10 ** 5
    for i in range(4):
        m = random_discrete_model(RngStream(40, (i,)), max_atoms=4)
        w, x, y = sample_indices(m, 1, size, RngStream(41, (i,)))
        j = np.einsum("k,kx,kxy->kxy", m.prior, m.px, m.ky)
        counts = np.zeros_like(j)
        np.add.at(counts, (w, x[:, 1], y[:, 1]), 1.0)
        se = np.sqrt(j * (1 - j) / size)
        assert np.all(np.abs(counts / size - j) <= 4 * se + 1e-15)
        assert np.all(counts[j == 0] == 0)
