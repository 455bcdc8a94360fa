import numpy as np
import pytest

from src.models.log_cnn import ArchConfig, ResidualCNN
from src.nn import functional as F
from src.nn.gradcheck import numerical_gradient, relative_error
from src.nn.layers import ResidualConvBlock

SEEDS = range(20)
TOL = 1e-4


@pytest.mark.parametrize("seed", SEEDS)
def test_conv1d(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, 6, 3))
    k = rng.normal(size=(3, 3, 4))
    b = rng.normal(size=4)
    r = rng.normal(size=(2, 6, 4))

    def loss():
        return float(np.sum(F.conv1d(x, k, b) * r))

    dx, dk, db = F.conv1d_backward(r, x, k)
    assert relative_error(dx, numerical_gradient(loss, x)) < TOL
    assert relative_error(dk, numerical_gradient(loss, k)) < TOL
    assert relative_error(db, numerical_gradient(loss, b)) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_embedding(seed):
    rng = np.random.default_rng(seed)
    table = rng.normal(size=(7, 3))
    ids = rng.integers(0, 7, size=(2, 5))
    r = rng.normal(size=(2, 5, 3))

    def loss():
        return float(np.sum(F.embedding_lookup(ids, table) * r))

    analytic = F.embedding_backward(r, ids, table.shape)
    assert relative_error(analytic, numerical_gradient(loss, table)) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_dense(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(4, 5))
    w = rng.normal(size=(5, 3))
    b = rng.normal(size=3)
    r = rng.normal(size=(4, 3))

    def loss():
        return float(np.sum(F.dense(x, w, b) * r))

    dx, dw, db = F.dense_backward(r, x, w)
    assert relative_error(dx, numerical_gradient(loss, x)) < TOL
    assert relative_error(dw, numerical_gradient(loss, w)) < TOL
    assert relative_error(db, numerical_gradient(loss, b)) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_relu(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 4))
    x[np.abs(x) < 1e-3] = 0.5
    r = rng.normal(size=(3, 4))

    def loss():
        return float(np.sum(F.relu(x) * r))

    assert relative_error(F.relu_backward(r, x), numerical_gradient(loss, x)) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_global_max_pool(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, 6, 3))
    r = rng.normal(size=(2, 3))

    def loss():
        return float(np.sum(F.global_max_pool1d(x)[0] * r))

    _, argmax = F.global_max_pool1d(x)
    analytic = F.global_max_pool1d_backward(r, argmax, x.shape)
    assert relative_error(analytic, numerical_gradient(loss, x)) < TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_weighted_softmax_cross_entropy(seed):
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(5, 4)) * 2
    targets = rng.integers(0, 4, size=5)
    weights = rng.uniform(0.2, 3.0, size=4)

    def loss():
        return F.softmax_cross_entropy(logits, targets, weights)[0]

    _, grad = F.softmax_cross_entropy(logits, targets, weights)
    assert relative_error(grad, numerical_gradient(loss, logits)) < TOL


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("bidirectional", [False, True])
@pytest.mark.parametrize("return_sequences", [True, False])
def test_lstm(seed, bidirectional, return_sequences):
    rng = np.random.default_rng(seed)
    d_in, units = 3, 4
    params = {}
    for suffix in ["", "_rev"] if bidirectional else [""]:
        params["W" + suffix] = rng.normal(scale=0.5, size=(d_in, 4 * units))
        params["U" + suffix] = rng.normal(scale=0.5, size=(units, 4 * units))
        params["b" + suffix] = rng.normal(scale=0.5, size=4 * units)
    x = rng.normal(size=(2, 5, d_in))
    out, _ = F.lstm_forward(x, params, return_sequences, bidirectional)
    r = rng.normal(size=out.shape)

    def loss():
        return float(np.sum(F.lstm_forward(x, params, return_sequences, bidirectional)[0] * r))

    _, cache = F.lstm_forward(x, params, return_sequences, bidirectional)
    dx, grads = F.lstm_backward(r, cache, params)
    assert relative_error(dx, numerical_gradient(loss, x)) < TOL
    for name, value in params.items():
        assert relative_error(grads[name], numerical_gradient(loss, value)) < TOL, name


@pytest.mark.parametrize("seed", SEEDS)
def test_residual_block_with_projection(seed):
    rng = np.random.default_rng(seed)
    block = ResidualConvBlock(3, 5, 3, rng, dtype=np.float64)
    x = rng.normal(size=(2, 6, 3))
    r = rng.normal(size=(2, 6, 5))

    def loss():
        return float(np.sum(block.forward(x) * r))

    block.forward(x)
    dx = block.backward(r)
    assert relative_error(dx, numerical_gradient(loss, x)) < TOL
    for sub in (block.conv, block.projection):
        for key, value in sub.params.items():
            assert relative_error(sub.grads[key], numerical_gradient(loss, value)) < TOL


def test_whole_classifier_gradients():
    arch = ArchConfig(
        max_len=8, embed_dim=3, conv_layers=[(4, 3), (4, 3)], dense_units=[3], precision="float64"
    )
    rng = np.random.default_rng(0)
    model = ResidualCNN(arch, vocab_size=6, rng=rng)
    ids = rng.integers(0, 6, size=(3, 8))
    targets = np.array([0, 2, 3])

    def loss():
        return F.softmax_cross_entropy(model.forward(ids), targets)[0]

    _, grad = F.softmax_cross_entropy(model.forward(ids), targets)
    model.backward(grad)
    analytic = {k: v.copy() for k, v in model.gradients().items()}
    for name, value in model.parameters().items():
        assert relative_error(analytic[name], numerical_gradient(loss, value)) < TOL, name


def test_conv_with_delta_kernel_is_identity():
    x = np.arange(12, dtype=np.float64).reshape(4, 3)
    k = np.zeros((3, 3, 3))
    k[1] = np.eye(3)
    assert np.array_equal(F.conv1d(x, k, np.zeros(3)), x)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(4, 5))
    assert np.allclose(F.softmax(logits), F.softmax(logits + 100.0))
    assert np.allclose(F.softmax(logits).sum(axis=1), 1.0)


def test_sigmoid_is_stable_at_extremes():
    out = F.sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert np.all(np.isfinite(out))
    assert out.tolist() == [0.0, 0.5, 1.0]
