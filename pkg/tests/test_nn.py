import numpy as np
import pytest

from glpos.nn import (Adam, AdamW, BiLSTM, CheckpointError, GATConv, Linear, Module, Parameter,
                      TransformerEncoder, gat_edges, grad_check, load_checkpoint, read_checkpoint,
                      register_model, save_checkpoint)
from glpos.nn import tensor as T


def probe(rng, shape):
    """Fixed random projection so grad checks see a non-trivial scalar."""
    return rng.normal(size=shape)


def test_linear_grad_check_tight():
    rng = np.random.default_rng(0)
    lin = Linear(4, 3, rng)
    x = T.Tensor(rng.normal(size=(5, 4)))
    w = probe(rng, (5, 3))
    err = grad_check(lambda: T.tsum(T.tanh(lin(x)) * w), lin.parameters())
    assert err < 1e-7


@pytest.mark.parametrize("seed", range(3))
def test_gat_grad_check(seed):
    rng = np.random.default_rng(seed)
    n = 6
    gat = GATConv(4, 3, rng, heads=2, concat=seed % 2 == 0)
    x = Parameter(rng.normal(size=(n, 4)), "x")
    src, dst = gat_edges(n, [(0, 1), (1, 2), (2, 3), (0, 4)])
    w = probe(rng, (n, gat.out_dim))
    err = grad_check(lambda: T.tsum(gat(x, src, dst)[0] * w), gat.parameters() + [x])
    assert err < 1e-4


def test_gat_attention_properties():
    rng = np.random.default_rng(1)
    gat = GATConv(3, 2, rng, heads=2)
    x = T.Tensor(rng.normal(size=(5, 3)))
    src, dst = gat_edges(5, [(0, 1), (1, 2), (0, 2)])
    out, alpha = gat(x, src, dst)
    sums = np.zeros((5, 2))
    np.add.at(sums, dst, alpha)
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)
    # nodes 3 and 4 are isolated: output is W x
    wx = (x.data @ gat.weight.data)
    np.testing.assert_allclose(out.data[3], wx[3], atol=1e-12)
    gat.att_src.data[:] = 0
    gat.att_dst.data[:] = 0
    _, alpha = gat(x, src, dst)
    deg = np.bincount(dst, minlength=5)
    np.testing.assert_allclose(alpha[:, 0], 1.0 / deg[dst])


def test_gat_shape_error():
    gat = GATConv(3, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        gat(T.Tensor(np.zeros((2, 4))), *gat_edges(2, []))


def test_transformer_grad_check_and_mask():
    rng = np.random.default_rng(2)
    enc = TransformerEncoder(4, 2, 8, 1, rng)
    x = Parameter(rng.normal(size=(2, 3, 4)), "x")
    mask = np.array([[1, 1, 1], [1, 1, 0]], bool)
    w = probe(rng, (2, 3, 4)) * mask[..., None]
    err = grad_check(lambda: T.tsum(enc(x, mask) * w), enc.parameters() + [x], max_entries=20)
    assert err < 1e-4
    _, attn = enc(x, mask, return_attention=True)
    np.testing.assert_allclose(attn[0].sum(-1), 1.0, atol=1e-12)
    assert (attn[0][1, :, :, 2] == 0).all()
    # padding content never reaches real positions
    y = x.data.copy()
    y[1, 2] = 100.0
    np.testing.assert_allclose(enc(T.Tensor(y), mask).data[1, :2], enc(x, mask).data[1, :2])


def test_transformer_permutation_equivariance_and_errors():
    rng = np.random.default_rng(3)
    enc = TransformerEncoder(4, 2, 8, 2, rng)
    x = rng.normal(size=(1, 4, 4))
    mask = np.array([[1, 1, 1, 0]], bool)
    perm = [2, 0, 1, 3]
    a = enc(T.Tensor(x), mask).data
    b = enc(T.Tensor(x[:, perm]), mask[:, perm]).data
    np.testing.assert_allclose(b, a[:, perm], atol=1e-12)
    single = enc(T.Tensor(x[:, :1]), mask[:, :1]).data
    assert np.isfinite(single).all()
    with pytest.raises(ValueError):
        TransformerEncoder(6, 4, 8, 1, rng)


def test_bilstm_grad_check_and_padding():
    rng = np.random.default_rng(4)
    lstm = BiLSTM(3, 2, rng)
    x = Parameter(rng.normal(size=(2, 4, 3)), "x")
    lengths = [4, 2]
    w = probe(rng, (2, 4, 4))
    w[1, 2:] = 0
    err = grad_check(lambda: T.tsum(lstm(x, lengths) * w), lstm.parameters() + [x], max_entries=20)
    assert err < 1e-4
    y = x.data.copy()
    y[1, 2:] = 50.0
    np.testing.assert_allclose(lstm(T.Tensor(y), lengths).data[1, :2], lstm(x, lengths).data[1, :2])


def test_cross_entropy_examples():
    z = Parameter(np.zeros((1, 17)), "z")
    assert T.cross_entropy_masked(z, [3]).item() == pytest.approx(np.log(17))
    big = np.full((1, 17), -1e3)
    big[0, 5] = 1e3
    assert T.cross_entropy_masked(T.Tensor(big), [5]).item() == pytest.approx(0.0, abs=1e-12)
    z = Parameter(np.random.default_rng(0).normal(size=(3, 17)), "z")
    loss = T.cross_entropy_masked(z, [-1, -1, -1])
    loss.backward()
    assert loss.item() == 0.0 and (z.grad is None or (z.grad == 0).all())


def test_cross_entropy_masked_rows_are_inert():
    rng = np.random.default_rng(5)
    z = Parameter(rng.normal(size=(4, 17)), "z")
    labels = np.array([2, -1, 7, -1])
    err = grad_check(lambda: T.cross_entropy_masked(z, labels), [z])
    assert err < 1e-4
    base = T.cross_entropy_masked(z, labels).item()
    other = z.data.copy()
    other[[1, 3]] = rng.normal(size=(2, 17)) * 100
    assert T.cross_entropy_masked(T.Tensor(other), labels).item() == base
    loss = T.cross_entropy_masked(z, labels)
    z.grad = None
    loss.backward()
    assert (z.grad[[1, 3]] == 0).all()


def test_adam_first_step_and_zero_grad():
    p = Parameter(np.array([1.0, -2.0]), "p")
    opt = Adam([("p", p)], lr=0.01)
    p.grad = np.array([1.0, 0.0])
    opt.step()
    np.testing.assert_allclose(p.data, [1.0 - 0.01, -2.0], atol=1e-9)
    q = Parameter(np.array([3.0]), "q")
    opt = AdamW([("q", q)], lr=0.1, weight_decay=0.5)
    q.grad = np.zeros(1)
    opt.step()
    np.testing.assert_allclose(q.data, [3.0 - 0.1 * 0.5 * 3.0])
    q.grad = np.array([np.nan])
    with pytest.raises(FloatingPointError, match="q"):
        opt.step()


@register_model
class Tiny(Module):
    def __init__(self, config):
        self.config = dict(config)
        self.lin = Linear(config["d"], 2, np.random.default_rng(config["seed"]))

    @classmethod
    def from_config(cls, config):
        return cls(config)


def test_checkpoint_round_trip_and_errors(tmp_path):
    m = Tiny({"d": 3, "seed": 1})
    m.lin.weight.data[0, 0] = np.pi
    save_checkpoint(m, tmp_path / "m")
    again = load_checkpoint(tmp_path / "m")
    for (k, a), (k2, b) in zip(m.named_parameters(), again.named_parameters()):
        assert k == k2 and a.data.tobytes() == b.data.tobytes()
    save_checkpoint(again, tmp_path / "n")
    assert (tmp_path / "m.bin").read_bytes() == (tmp_path / "n.bin").read_bytes()
    manifest, _ = read_checkpoint(tmp_path / "m")
    assert manifest["model"] == "Tiny"
    blob = (tmp_path / "m.bin").read_bytes()
    (tmp_path / "m.bin").write_bytes(blob[:-8])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "m")
    save_checkpoint(Tiny({"d": 4, "seed": 1}), tmp_path / "w")
    import json
    man = json.loads((tmp_path / "w.json").read_text())
    man["config"]["d"] = 3
    man["tensors"][0]["shape"] = [4, 2]
    (tmp_path / "w.json").write_text(json.dumps(man))
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "w")
