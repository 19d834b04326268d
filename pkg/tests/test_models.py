import math

import numpy as np
import pytest
import scipy.sparse as sp

from swagppm import models
from swagppm.params import Layout, ParameterVector, load_checkpoint, save_checkpoint

from conftest import finite_difference_gradient, random_instance


def linear_theta(input_dim, num_classes, W=None, b=None):
    spec = models.ModelSpec(models.SOFTMAX_LINEAR, input_dim, num_classes)
    layout = spec.layout()
    values = np.zeros(layout.size)
    if W is not None:
        layout.view(values, "W")[:] = W
    if b is not None:
        layout.view(values, "b")[:] = b
    return spec, ParameterVector(values, layout)


def test_forward_zero_theta_uniform():
    spec, theta = linear_theta(3, 4)
    probs = models.forward(spec, theta, np.array([0.3, -1.0, 2.0]))
    np.testing.assert_allclose(probs, 0.25)


def test_forward_hand_logits():
    # logits (0, ln 3) -> probabilities (0.25, 0.75)
    spec, theta = linear_theta(1, 2, b=np.array([0.0, math.log(3.0)]))
    probs = models.forward(spec, theta, np.zeros(1))
    np.testing.assert_allclose(probs, [0.25, 0.75], rtol=1e-12)


def test_forward_sums_to_one(rng):
    for _ in range(100):
        spec, theta, X, y = random_instance(rng, models.SOFTMAX_LINEAR)
        P = models.forward_batch(spec, theta, X)
        assert np.all(P > 0)
        assert np.max(np.abs(P.sum(axis=1) - 1)) < 1e-12


def test_forward_dimension_mismatch():
    spec, theta = linear_theta(3, 4)
    with pytest.raises(models.ModelError, match="W"):
        models.forward(spec, theta, np.zeros(5))


def test_log_likelihood_uniform():
    spec, theta = linear_theta(3, 4)
    ll = models.log_likelihood(spec, theta, np.zeros(3), 2)
    assert ll == pytest.approx(math.log(0.25), rel=1e-12)


def test_log_likelihood_hand_value():
    spec, theta = linear_theta(1, 2, b=np.array([0.0, math.log(3.0)]))
    ll = models.log_likelihood(spec, theta, np.zeros(1), 1)
    assert ll == pytest.approx(math.log(0.75), rel=1e-12)


def test_log_likelihood_confident_limit():
    spec, theta = linear_theta(1, 2, b=np.array([0.0, 60.0]))
    ll = models.log_likelihood(spec, theta, np.zeros(1), 1)
    assert -1e-20 < ll <= 0


def test_log_likelihood_matches_forward(rng):
    for family in (models.SOFTMAX_LINEAR, models.MLP_1_HIDDEN):
        spec, theta, X, y = random_instance(rng, family)
        P = models.forward_batch(spec, theta, X)
        ll = models.log_likelihood_batch(spec, theta, X, y)
        np.testing.assert_array_equal(
            ll, np.log(P[np.arange(len(y)), y]))


@pytest.mark.parametrize("family",
                         [models.SOFTMAX_LINEAR, models.MLP_1_HIDDEN])
@pytest.mark.parametrize("weight_decay", [0.0, 0.1])
def test_gradient_finite_differences(rng, family, weight_decay):
    for _ in range(5):
        spec, theta, X, y = random_instance(rng, family,
                                            weight_decay=weight_decay)
        w = rng.uniform(0, 1, X.shape[0])
        grad = models.weighted_nll_gradient(spec, theta, X, y, w)

        def loss(values):
            return models.mean_nll(spec, theta.replace(values), X, y, w)

        fd = finite_difference_gradient(loss, theta.values.copy())
        scale = np.maximum(np.abs(fd), 1.0)
        assert np.max(np.abs(grad.values - fd) / scale) < 1e-5


def test_gradient_all_ones_equals_unweighted(rng):
    spec, theta, X, y = random_instance(rng, models.SOFTMAX_LINEAR)
    g1 = models.weighted_nll_gradient(spec, theta, X, y, np.ones(X.shape[0]))
    g2 = models.weighted_nll_gradient(spec, theta, X, y, None)
    np.testing.assert_array_equal(g1.values, g2.values)


def test_gradient_all_zero_weights(rng):
    spec, theta, X, y = random_instance(rng, models.SOFTMAX_LINEAR)
    g = models.weighted_nll_gradient(spec, theta, X, y, np.zeros(X.shape[0]))
    np.testing.assert_array_equal(g.values, 0.0)


def test_gradient_linearity_in_weights(rng):
    # singleton batch, zero decay: grad(a + b) = grad(a) + grad(b)
    spec, theta, X, y = random_instance(rng, models.MLP_1_HIDDEN, n=1)
    a, b = 0.3, 0.45
    ga = models.weighted_nll_gradient(spec, theta, X, y, [a])
    gb = models.weighted_nll_gradient(spec, theta, X, y, [b])
    gab = models.weighted_nll_gradient(spec, theta, X, y, [a + b])
    np.testing.assert_allclose(gab.values, ga.values + gb.values,
                               rtol=1e-12, atol=1e-15)


def test_gradient_rejects_bad_weights(rng):
    spec, theta, X, y = random_instance(rng, models.SOFTMAX_LINEAR)
    with pytest.raises(models.ModelError):
        models.weighted_nll_gradient(spec, theta, X, y,
                                     np.full(X.shape[0], 1.5))


def test_sparse_dense_agreement(rng):
    spec, theta, X, y = random_instance(rng, models.MLP_1_HIDDEN)
    Xs = sp.csr_matrix(X)
    np.testing.assert_allclose(models.forward_batch(spec, theta, Xs),
                               models.forward_batch(spec, theta, X),
                               rtol=1e-12)
    gs = models.weighted_nll_gradient(spec, theta, Xs, y)
    gd = models.weighted_nll_gradient(spec, theta, X, y)
    np.testing.assert_allclose(gs.values, gd.values, rtol=1e-10, atol=1e-14)


def test_clipped_gradient_sum_matches_per_example(rng):
    for family in (models.SOFTMAX_LINEAR, models.MLP_1_HIDDEN):
        spec, theta, X, y = random_instance(rng, family, n=5)
        C = 0.05
        total, norms = models.clipped_gradient_sum(spec, theta, X, y, C)
        # brute force: one-record batches, unweighted per-example gradients
        expected = np.zeros(spec.num_params)
        for i in range(X.shape[0]):
            gi = models.weighted_nll_gradient(
                spec, theta, X[i:i + 1], y[i:i + 1]).values
            norm = np.linalg.norm(gi)
            assert norm == pytest.approx(norms[i], rel=1e-10)
            expected += gi * min(1.0, C / norm)
        np.testing.assert_allclose(total.values, expected, rtol=1e-9,
                                   atol=1e-14)


def test_checkpoint_round_trip(tmp_path, rng):
    spec, theta, _, _ = random_instance(rng, models.MLP_1_HIDDEN)
    path = tmp_path / "model.bin"
    save_checkpoint(path, theta, {"seed": 7})
    loaded, head = load_checkpoint(path)
    np.testing.assert_array_equal(loaded.values, theta.values)
    assert loaded.layout == theta.layout
    assert head["seed"] == 7


def test_layout_partition():
    spec = models.ModelSpec(models.MLP_1_HIDDEN, 5, 3, 4)
    layout = spec.layout()
    offsets = [(off, off + int(np.prod(shape)))
               for _, shape, off in layout.slots]
    assert offsets[0][0] == 0
    for (_, end), (start, _) in zip(offsets, offsets[1:]):
        assert end == start
    assert offsets[-1][1] == layout.size == spec.num_params
