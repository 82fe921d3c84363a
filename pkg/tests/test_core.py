import math
from fractions import Fraction

import numpy as np
import pytest

from merlab.core import (LOG, QUADRATIC, ZERO_ONE, BoundedTableLoss, DataSequence, DiscreteModel, FiniteDist,
                         InvalidModelError, RngStream, bias_model, ensure_valid, loss_eval, loss_from_name,
                         model_from_json, model_to_json, sample_dataset, sample_indices, validate_model)

from conftest import point_mass_model


def test_finite_dist_accepts_fractions_and_strings():
    d = FiniteDist(("a", "b", "c"), [Fraction(1, 3), "1/3", 1 / 3])
    assert d.prob("b") == pytest.approx(1 / 3)
    assert d.prob("zzz") == 0.0


def test_finite_dist_rejects_bad_input():
    with pytest.raises(ValueError):
        FiniteDist((0, 1), (0.5, 0.6))
    with pytest.raises(ValueError):
        FiniteDist((0, 0), (0.5, 0.5))
    with pytest.raises(ValueError):
        FiniteDist((0, 1), (-0.1, 1.1))
    with pytest.raises(ValueError):
        FiniteDist((), ())


def test_tiny_drift_is_renormalized():
    d = FiniteDist((0, 1), (0.5, 0.5 + 5e-11))
    assert math.fsum(d.probs) == pytest.approx(1.0, abs=1e-15)


def test_bias_model_valid(bias):
    assert validate_model(bias).ok


def test_unnormalized_row_reported():
    m = DiscreteModel([0.5, 0.5], [1.0], [[[0.5, 0.4]], [[0.5, 0.5]]])
    v = validate_model(m)
    assert not v.ok and v.message == "row not normalized"
    assert v.location[0] == "y_kernel"
    with pytest.raises(InvalidModelError):
        ensure_valid(m)


def test_quadratic_needs_embedding():
    m = DiscreteModel([1.0], [1.0], [[[0.5, 0.5]]])
    v = validate_model(m, QUADRATIC)
    assert not v.ok and v.message == "numeric embedding missing"


def test_negative_entry_reported():
    m = DiscreteModel([1.2, -0.2], [1.0], [[[0.5, 0.5]], [[0.5, 0.5]]])
    assert validate_model(m).message == "negative probability"


def test_loss_eval_values():
    assert loss_eval(LOG, 1, FiniteDist.bernoulli(0.5)) == pytest.approx(math.log(2))
    assert loss_eval(LOG, 1, FiniteDist.bernoulli(0.0)) == math.inf
    assert loss_eval(ZERO_ONE, "a", "a") == 0.0
    assert loss_eval(ZERO_ONE, "a", "b") == 1.0
    assert loss_eval(QUADRATIC, 0.3, 0.7) == pytest.approx(0.16)
    t = BoundedTableLoss(np.array([[0.0, 2.0], [1.0, 0.0]]), 2.0)
    assert loss_eval(t, 0, 1) == 2.0


def test_loss_eval_type_errors():
    with pytest.raises(TypeError):
        loss_eval(LOG, 1, 0.5)
    with pytest.raises(TypeError):
        loss_eval(QUADRATIC, 0.0, FiniteDist.bernoulli(0.5))


def test_table_loss_range_checked():
    with pytest.raises(ValueError):
        BoundedTableLoss(np.array([[0.0, 3.0]]), 2.0)
    with pytest.raises(ValueError):
        loss_from_name("table")
    with pytest.raises(ValueError):
        loss_from_name("hinge")


def test_sample_n0_has_only_fresh_pair(bias):
    s = sample_dataset(bias, 0, RngStream(3))
    assert s.data.n == 0 and len(s.fresh) == 2


def test_sampling_is_deterministic(bias):
    a = sample_dataset(bias, 5, RngStream(11, 2))
    b = sample_dataset(bias, 5, RngStream(11, 2))
    assert a == b
    c = sample_dataset(bias, 5, RngStream(11, 3))
    w1, _, y1 = sample_indices(bias, 50, 20, RngStream(11, 2))
    w2, _, y2 = sample_indices(bias, 50, 20, RngStream(11, 3))
    assert not (np.array_equal(w1, w2) and np.array_equal(y1, y2))
    assert isinstance(c.w, float)


def test_point_mass_prior_always_draws_that_atom():
    m = point_mass_model()
    w, _, _ = sample_indices(m, 3, 2000, RngStream(5))
    assert np.all(w == 0)


def test_zero_probability_atoms_never_drawn():
    m = DiscreteModel([0.5, 0.5], [0.0, 1.0, 0.0], [[[1, 0], [0.5, 0.5], [0, 1]]] * 2)
    _, x, _ = sample_indices(m, 10, 500, RngStream(1))
    assert np.all(x == 1)


def test_rng_children_distinct():
    r = RngStream(4)
    a = r.child(0).generator.random(4)
    b = r.child(1).generator.random(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, RngStream(4).child(0).generator.random(4))


def test_json_round_trip(bias):
    m = model_from_json(model_to_json(bias))
    assert np.array_equal(m.prior, bias.prior)
    assert np.allclose(m.ky, bias.ky, atol=0, rtol=0)
    assert np.array_equal(m.y_values, bias.y_values)


def test_json_missing_row_named():
    doc = {"prior": {"a": 1.0}, "x_law": {"x": 1.0}, "y_kernel": {"a": {}}}
    with pytest.raises(ValueError, match="y_kernel lacks row"):
        model_from_json(doc)
    with pytest.raises(ValueError, match="lacks keys"):
        model_from_json({"prior": {"a": 1.0}})


def test_x_dependent_law_from_dists():
    prior = FiniteDist(("u", "v"), (0.5, 0.5))
    xl = {"u": FiniteDist(("p",), (1.0,)), "v": FiniteDist(("p", "q"), (0.5, 0.5))}
    m = DiscreteModel.from_dists(prior, xl, lambda w, x: FiniteDist((0, 1), (0.5, 0.5)))
    assert m.nx == 2 and not m.x_independent
    assert validate_model(m).ok


def test_data_sequence_rejects_foreign_atoms(bias):
    with pytest.raises(ValueError):
        DataSequence((("nowhere", 1),)).indices(bias)
