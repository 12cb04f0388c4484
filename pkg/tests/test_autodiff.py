import math

import numpy as np
import pytest
import torch

from rtsfnet import autodiff as ad
from rtsfnet.errors import ConfigError, InputError, UsageError


def t64(*shape, seed=0, scale=1.0):
    g = torch.Generator().manual_seed(seed)
    return (torch.randn(*shape, generator=g, dtype=torch.float64) * scale).requires_grad_(True)


def weighted(out: torch.Tensor, seed: int = 99) -> torch.Tensor:
    w = torch.randn(out.shape, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)
    return (out * w).sum()


def test_examples():
    assert ad.leaky_relu(torch.tensor(-1.0)).item() == pytest.approx(-0.3)
    assert ad.leaky_relu(torch.tensor(2.0)).item() == 2.0
    s = ad.softmax(t64(7, 5, seed=1).detach() * 30)
    np.testing.assert_allclose(s.sum(-1).numpy(), 1.0, atol=1e-9)
    ln = ad.layer_norm(torch.full((3, 6), 4.2, dtype=torch.float64))
    assert torch.all(ln == 0)


def test_shape_errors():
    with pytest.raises(ConfigError):
        ad.affine(torch.zeros(2, 3), torch.zeros(4, 5))
    with pytest.raises(ConfigError):
        ad.softmax(torch.zeros(2, 0))
    with pytest.raises(ConfigError):
        ad.concat([torch.zeros(2, 3), torch.zeros(3, 3)], dim=1)
    with pytest.raises(ConfigError):
        ad.elementwise_mul(torch.zeros(2, 3), torch.zeros(4))
    with pytest.raises(ConfigError):
        ad.dropout(torch.zeros(3), 1.0, True)


def test_backward_identities():
    x = t64(4, 3, seed=2)
    (g,) = ad.backward(ad.reduce_sum(x), [x])
    assert torch.equal(g, torch.ones_like(x))
    (g,) = ad.backward(ad.reduce_sum(x * x), [x])
    assert torch.equal(g, 2 * x.detach())
    y = t64(2, seed=3)
    gx, gy = ad.backward(ad.reduce_sum(x), [x, y])
    assert torch.equal(gy, torch.zeros_like(y))
    with pytest.raises(UsageError):
        ad.backward(x * 2, [x])


OPS = {
    "affine": (lambda x, w, b: ad.affine(x, w, b), [(5, 4), (3, 4), (3,)], 1e-5),
    "layer_norm": (lambda x, s, b: ad.layer_norm(x, s, b), [(5, 6), (6,), (6,)], 1e-4),
    "leaky_relu": (lambda x: ad.leaky_relu(x), [(6, 5)], 1e-5),
    "tanh": (lambda x: ad.tanh(x), [(6, 5)], 1e-5),
    "sigmoid": (lambda x: ad.sigmoid(x), [(6, 5)], 1e-5),
    "softmax": (lambda x: ad.softmax(x), [(4, 6)], 1e-5),
    "concat": (lambda a, b: ad.concat([a, b], dim=1), [(3, 2), (3, 4)], 1e-5),
    "elementwise_mul": (lambda a, b: ad.elementwise_mul(a, b), [(3, 4), (4,)], 1e-5),
    "reduce_sum": (lambda x: ad.reduce_sum(x, dim=1), [(3, 4)], 1e-5),
    "reduce_mean": (lambda x: ad.reduce_mean(x, dim=0), [(3, 4)], 1e-5),
    "l2_norm": (lambda x: ad.l2_norm(x), [(5, 3)], 1e-5),
    "rodrigues_rotation": (lambda p: ad.rodrigues_rotation(torch.tanh(p)), [(4, 4)], 1e-4),
    "cross_entropy": (lambda z: ad.cross_entropy(ad.softmax(z), torch.tensor([0, 2, 1])), [(3, 3)], 1e-5),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_operator_gradients(name):
    fn, shapes, tol = OPS[name]
    params = [t64(*s, seed=10 + i) for i, s in enumerate(shapes)]
    err = ad.grad_check(lambda: weighted(fn(*params)), params, eps=1e-4)
    assert err < tol


def test_dropout_modes():
    x = torch.ones(1000, dtype=torch.float64)
    g = torch.Generator().manual_seed(0)
    y = ad.dropout(x, 0.5, True, g)
    assert set(torch.unique(y).tolist()) <= {0.0, 2.0}
    assert 400 < int((y == 0).sum()) < 600
    assert torch.equal(ad.dropout(x, 0.5, False, g), x)
    layer = ad.Dropout(0.5, torch.Generator().manual_seed(1)).eval()
    a = layer(x)
    layer.generator.manual_seed(12345)
    assert torch.equal(a, layer(x)) and torch.equal(a, x)


def test_grad_check_examples():
    x = torch.tensor([0.5], dtype=torch.float64, requires_grad=True)
    assert ad.grad_check(lambda: ad.tanh(x).sum(), [x]) < 1e-6
    layer = ad.Affine(4, 3, torch.Generator().manual_seed(0)).double()
    inp = t64(5, 4, seed=4).detach()
    assert ad.grad_check(lambda: weighted(layer(inp)), list(layer.parameters())) < 1e-6
    # at the origin both probes of the identity are exact, so the error is exactly zero
    y = torch.zeros(3, dtype=torch.float64, requires_grad=True)
    assert ad.grad_check(lambda: y.sum(), [y]) == 0.0


def test_grad_check_rejects_nondeterminism():
    x = t64(3, seed=5)
    g = torch.Generator().manual_seed(0)
    with pytest.raises(UsageError):
        ad.grad_check(lambda: ad.dropout(x, 0.5, True, g).sum(), [x])


def test_grad_check_steps_around_kinks():
    # a pre-activation within eps of zero: the naive central difference straddles the kink
    x = torch.tensor([3e-5, -0.7, 1.2], dtype=torch.float64, requires_grad=True)
    stats = ad.grad_check_stats(lambda: ad.leaky_relu(x).sum(), [x], eps=1e-4)
    assert stats.max_error < 1e-9 and stats.reduced_step == 1 and stats.skipped == 0


def test_initialization_bounds():
    layer = ad.Affine(30, 20, torch.Generator().manual_seed(0))
    bound = math.sqrt(6 / 50)
    w = layer.weight.detach()
    assert w.abs().max() <= bound and w.abs().max() > 0.8 * bound
    assert torch.all(layer.bias == 0)


def test_checkpoint_round_trip(tmp_path):
    tensors = {"a.weight": torch.randn(3, 4), "b": torch.randn(5), "scalar": torch.tensor(2.5)}
    path = tmp_path / "ck.bin"
    ad.save_checkpoint(path, tensors, '{"n_h": 2}', {"epoch": 3})
    text, meta, back = ad.load_checkpoint(path)
    assert text == '{"n_h": 2}' and meta == {"epoch": 3}
    assert list(back) == list(tensors)
    for k in tensors:
        assert torch.equal(back[k], tensors[k])
    raw = bytearray(path.read_bytes())
    raw[20] ^= 0xFF  # inside the config hash
    path.write_bytes(bytes(raw))
    with pytest.raises(InputError):
        ad.load_checkpoint(path)
    path.write_bytes(b"junk")
    with pytest.raises(InputError):
        ad.load_checkpoint(path)
    with pytest.raises(UsageError):
        ad.load_checkpoint(tmp_path / "missing.bin")
