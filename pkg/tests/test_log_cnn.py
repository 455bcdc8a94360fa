import numpy as np
import pytest

from src.config.seeding import module_rng
from src.models.log_cnn import ArchConfig, build_model
from src.nn.layers import ResidualConvBlock


def _zero_conv(block: ResidualConvBlock) -> None:
    block.conv.params["kernels"][...] = 0.0
    block.conv.params["bias"][...] = 0.0


def test_zero_conv_block_passes_input_through():
    rng = module_rng(0, "test.block")
    block = ResidualConvBlock(6, 6, 5, rng)
    _zero_conv(block)
    x = rng.normal(size=(3, 20, 6)).astype(np.float32)
    assert block.projection is None
    assert np.array_equal(block.forward(x), x)


def test_zero_conv_block_with_width_change_equals_projection():
    rng = module_rng(1, "test.block")
    block = ResidualConvBlock(4, 7, 3, rng)
    _zero_conv(block)
    x = rng.normal(size=(2, 11, 4)).astype(np.float32)
    out = block.forward(x)
    assert out.shape == (2, 11, 7)
    assert np.array_equal(out, block.projection.forward(x))


def test_plain_block_with_zero_conv_outputs_zeros():
    rng = module_rng(2, "test.block")
    block = ResidualConvBlock(5, 5, 3, rng, residual=False)
    _zero_conv(block)
    x = rng.normal(size=(2, 9, 5)).astype(np.float32)
    assert not block.forward(x).any()


@pytest.mark.parametrize("depth", [1, 3])
def test_model_with_zero_convs_classifies_pooled_embeddings(depth):
    arch = ArchConfig(max_len=30, embed_dim=8, conv_layers=[(8, 3)] * depth, dense_units=[])
    model = build_model(arch, 12, seed=4)
    layers = dict(model.sequence)
    for i in range(depth):
        _zero_conv(layers[f"conv{i}"])

    ids = module_rng(4, "test.ids").integers(0, 12, size=(3, 30)).astype(np.int32)
    logits = model.forward(ids)
    pooled = model.embedding_table[ids].max(axis=1)
    assert np.allclose(logits, layers["output"].forward(pooled), atol=1e-6)
