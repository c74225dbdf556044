import numpy as np
import pytest

from d2dpower.errors import ShapeMismatch, StaleCache
from d2dpower.gnn import (
    GnnLayerParams,
    gnn_backward_batch,
    gnn_forward,
    gnn_forward_batch,
    init_gnn,
)
from d2dpower.graphfeat import GraphSample

SLOPE = 0.01


def leaky(z):
    return np.where(z >= 0, z, SLOPE * z)


def oracle_layer(y, e, layer):
    """Literal per-node sums: z_j = y_j T1 + sum_{i != j} e_ij (y_j T2 - y_i T3)."""
    m = y.shape[0]
    z = np.zeros((m, layer.f_out))
    for j in range(m):
        z[j] = y[j] @ layer.theta1
        for i in range(m):
            if i != j:
                z[j] += e[i, j] * (y[j] @ layer.theta2 - y[i] @ layer.theta3)
    return leaky(z)


def random_stack(rng, dims):
    return init_gnn(rng, dims=dims, slope=SLOPE)


def random_edges(rng, b, m):
    e = rng.normal(size=(b, m, m))
    idx = np.arange(m)
    e[:, idx, idx] = 0.0
    return e


def test_forward_matches_triple_loop_oracle():
    rng = np.random.default_rng(0)
    layers = random_stack(rng, (3, 5))
    y = rng.normal(size=(4, 3))
    e = random_edges(rng, 1, 4)[0]
    out, _ = gnn_forward_batch(layers, y[None], e[None])
    assert np.allclose(out[0], oracle_layer(y, e, layers[0]), atol=1e-10)


def test_two_layer_forward_matches_stacked_oracle():
    rng = np.random.default_rng(1)
    layers = random_stack(rng, (3, 5, 4))
    y = rng.normal(size=(6, 3))
    e = random_edges(rng, 1, 6)[0]
    out, _ = gnn_forward_batch(layers, y[None], e[None])
    expected = oracle_layer(oracle_layer(y, e, layers[0]), e, layers[1])
    assert np.allclose(out[0], expected, atol=1e-10)


def test_zero_edges_reduce_to_pointwise_map():
    rng = np.random.default_rng(2)
    layers = random_stack(rng, (3, 4))
    y = rng.normal(size=(1, 5, 3))
    out, _ = gnn_forward_batch(layers, y, np.zeros((1, 5, 5)))
    assert np.allclose(out, leaky(y @ layers[0].theta1), atol=1e-12)


def test_single_node_has_no_messages():
    rng = np.random.default_rng(3)
    layers = random_stack(rng, (3, 4))
    y = rng.normal(size=(1, 1, 3))
    e = np.full((1, 1, 1), 9.9)  # self loop must be ignored
    out, _ = gnn_forward_batch(layers, y, e)
    assert np.allclose(out, leaky(y @ layers[0].theta1), atol=1e-12)


def test_diagonal_edges_are_ignored():
    rng = np.random.default_rng(4)
    layers = random_stack(rng, (3, 4))
    y = rng.normal(size=(2, 5, 3))
    e = random_edges(rng, 2, 5)
    dirty = e.copy()
    idx = np.arange(5)
    dirty[:, idx, idx] = rng.normal(size=(2, 5))
    clean_out, _ = gnn_forward_batch(layers, y, e)
    dirty_out, _ = gnn_forward_batch(layers, y, dirty)
    assert np.array_equal(clean_out, dirty_out)


def test_zero_features_stay_zero():
    rng = np.random.default_rng(5)
    layers = random_stack(rng, (3, 5, 4))
    out, _ = gnn_forward_batch(layers, np.zeros((1, 4, 3)), random_edges(rng, 1, 4))
    assert np.all(out == 0.0)


def test_permutation_equivariance():
    rng = np.random.default_rng(6)
    layers = random_stack(rng, (4, 8, 6))
    m = 6
    y = rng.normal(size=(m, 4))
    e = random_edges(rng, 1, m)[0]
    out, _ = gnn_forward_batch(layers, y[None], e[None])
    perm = rng.permutation(m)
    out_p, _ = gnn_forward_batch(layers, y[perm][None], e[np.ix_(perm, perm)][None])
    assert np.max(np.abs(out_p[0] - out[0][perm])) < 1e-9


def test_same_weights_evaluate_any_graph_size():
    rng = np.random.default_rng(7)
    layers = random_stack(rng, (4, 8, 6))
    for m in (2, 4, 9):
        y = rng.normal(size=(3, m, 4))
        out, _ = gnn_forward_batch(layers, y, random_edges(rng, 3, m))
        assert out.shape == (3, m, 6)


def test_batch_matches_per_sample():
    rng = np.random.default_rng(8)
    layers = random_stack(rng, (3, 5, 4))
    y = rng.normal(size=(4, 5, 3))
    e = random_edges(rng, 4, 5)
    out, _ = gnn_forward_batch(layers, y, e)
    for b in range(4):
        single, _ = gnn_forward_batch(layers, y[b][None], e[b][None])
        assert np.allclose(out[b], single[0], atol=1e-12)


def test_single_sample_wrapper():
    rng = np.random.default_rng(9)
    layers = random_stack(rng, (4, 6))
    nodes = rng.normal(size=(5, 4))
    e = random_edges(rng, 1, 5)[0]
    emb, _ = gnn_forward(GraphSample(node_features=nodes, edge_weights=e), layers)
    batched, _ = gnn_forward_batch(layers, nodes[None], e[None])
    assert emb.m == 5
    assert np.array_equal(emb.values, batched[0])


def test_init_gnn_shapes_and_bounds():
    rng = np.random.default_rng(10)
    layers = init_gnn(rng, dims=(4, 64, 64))
    assert len(layers) == 2
    assert layers[0].theta1.shape == (4, 64)
    assert layers[1].theta3.shape == (64, 64)
    bound = np.sqrt(6.0 / (4 + 64))
    for t in (layers[0].theta1, layers[0].theta2, layers[0].theta3):
        assert np.max(np.abs(t)) <= bound


def _kink_safe_setup(dims, b, m, margin=1e-3, max_tries=100):
    """Random net + inputs with all pre-activations away from the LeakyReLU kink."""
    for seed in range(max_tries):
        rng = np.random.default_rng(1000 + seed)
        layers = random_stack(rng, dims)
        y = rng.normal(size=(b, m, dims[0]))
        e = random_edges(rng, b, m)
        _, cache = gnn_forward_batch(layers, y, e)
        if min(np.min(np.abs(z)) for _, _, z in cache.per_layer) > margin:
            return layers, y, e
    raise AssertionError("no kink-safe configuration found")


def _rel_err(a, b):
    # floor the denominator: central differences carry ~1e-9 absolute roundoff,
    # so entries much smaller than 1e-3 are held to an absolute bar instead
    return np.max(np.abs(a - b) / np.maximum(1e-3, np.abs(a) + np.abs(b)))


def test_gradients_match_finite_differences():
    dims = (3, 5, 4)
    layers, y, e = _kink_safe_setup(dims, b=2, m=4)
    rng = np.random.default_rng(99)
    out, cache = gnn_forward_batch(layers, y, e)
    w = rng.normal(size=out.shape)  # loss = sum(out * w)
    grads, dy = gnn_backward_batch(layers, cache, w)

    def loss(layers_, y_):
        o, _ = gnn_forward_batch(layers_, y_, e)
        return float(np.sum(o * w))

    h = 1e-6
    # input gradient
    fd_y = np.zeros_like(y)
    for idx in np.ndindex(y.shape):
        yp = y.copy()
        yp[idx] += h
        ym = y.copy()
        ym[idx] -= h
        fd_y[idx] = (loss(layers, yp) - loss(layers, ym)) / (2 * h)
    assert _rel_err(dy, fd_y) < 1e-5

    # parameter gradients
    for k, layer in enumerate(layers):
        for t_idx, name in enumerate(("theta1", "theta2", "theta3")):
            theta = getattr(layer, name)
            fd = np.zeros_like(theta)
            for idx in np.ndindex(theta.shape):
                orig = theta[idx]
                theta[idx] = orig + h
                up = loss(layers, y)
                theta[idx] = orig - h
                down = loss(layers, y)
                theta[idx] = orig
                fd[idx] = (up - down) / (2 * h)
            assert _rel_err(grads[k][t_idx], fd) < 1e-5, f"layer {k} {name}"


def test_backward_rejects_stale_cache():
    rng = np.random.default_rng(11)
    layers_a = random_stack(rng, (3, 5))
    layers_b = random_stack(rng, (3, 6))
    y = rng.normal(size=(1, 4, 3))
    e = random_edges(rng, 1, 4)
    out, cache = gnn_forward_batch(layers_a, y, e)
    with pytest.raises(StaleCache):
        gnn_backward_batch(layers_b, cache, np.zeros((1, 4, 6)))
    with pytest.raises(StaleCache):
        gnn_backward_batch(layers_a, cache, np.zeros((1, 4, 5, 1)))


def test_forward_shape_validation():
    rng = np.random.default_rng(12)
    layers = random_stack(rng, (3, 5))
    with pytest.raises(ShapeMismatch):
        gnn_forward_batch(layers, rng.normal(size=(1, 4, 3)), rng.normal(size=(1, 4, 5)))
    with pytest.raises(ShapeMismatch):
        gnn_forward_batch(layers, rng.normal(size=(1, 4, 2)), rng.normal(size=(1, 4, 4)))
