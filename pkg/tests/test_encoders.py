import numpy as np
import pytest
import torch

from mvcrec.encoders import (
    NonFiniteError,
    SequenceEncoder,
    embed_input,
    gradient_check,
    last_position,
    pad_batch,
)
from mvcrec.synthetic import gradcheck_tiny


def small_encoder(d=8, blocks=2, dropout=0.0, seed=0):
    enc = SequenceEncoder(d, blocks=blocks, heads=2, dropout=dropout)
    enc.reset_parameters(seed, "enc")
    return enc


def test_pad_batch_right_aligns():
    batch = pad_batch([[3, 4], [1, 2, 3, 4, 5]], width=4)
    assert batch.indices.tolist() == [[0, 0, 3, 4], [2, 3, 4, 5]]
    assert batch.mask.tolist() == [[False, False, True, True], [True, True, True, True]]


def test_pad_batch_rejects_empty():
    with pytest.raises(ValueError):
        pad_batch([[1], []], width=3)


def test_embed_single_item_with_zero_positions():
    table = torch.randn(5, 3)
    out = embed_input(pad_batch([[2]], 3), table, torch.zeros(3, 3))
    torch.testing.assert_close(out[0, -1], table[2])


def test_embed_hand_values():
    table = torch.tensor([[0.0, 0.0], [1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    pos = torch.tensor([[0.5, 0.0], [0.0, 0.5]])
    out = embed_input(pad_batch([[1, 2], [3]], 2), table, pos)
    assert out.tolist() == [[[1.5, 2.0], [3.0, 4.5]], [[0.5, 0.0], [5.0, 6.5]]]


def test_embed_batch_equivariance():
    table, pos = torch.randn(10, 4), torch.randn(5, 4)
    seqs = [[1, 2, 3], [4], [5, 6, 7, 8, 9]]
    out = embed_input(pad_batch(seqs, 5), table, pos)
    rev = embed_input(pad_batch(seqs[::-1], 5), table, pos)
    torch.testing.assert_close(out.flip(0), rev)


def test_embed_index_out_of_range():
    with pytest.raises(IndexError):
        embed_input(pad_batch([[7]], 2), torch.randn(5, 2), torch.randn(2, 2))


def test_zero_depth_is_identity():
    enc = small_encoder(blocks=0)
    e = torch.randn(3, 4, 8)
    torch.testing.assert_close(enc(e, torch.ones(3, 4, dtype=torch.bool)), e)


def test_attention_rows_normalized_and_padding_ignored():
    enc = small_encoder().eval()
    batch = pad_batch([[1, 2], [3, 4, 5, 6]], 4)
    enc(torch.randn(2, 4, 8), batch.mask, keep_weights=True)
    for block in enc.blocks:
        w = block.attention.last_weights
        torch.testing.assert_close(w.sum(-1), torch.ones_like(w.sum(-1)))
        assert (w[0, :, :, :2] == 0).all()


def test_masked_keys_match_unpadded_encoding():
    enc = small_encoder().eval()
    torch.manual_seed(0)
    table, pos = torch.randn(10, 8), torch.randn(6, 8)
    seq = [4, 2, 9]
    short = pad_batch([seq], 3)
    padded = pad_batch([seq], 6)
    h_short = enc(embed_input(short, table, pos), short.mask)
    h_pad = enc(embed_input(padded, table, pos), padded.mask)
    torch.testing.assert_close(h_pad[:, 3:], h_short, atol=1e-6, rtol=0)


def test_padding_invariance_of_last_position():
    enc = small_encoder().eval()
    table, pos = torch.randn(10, 8), torch.randn(8, 8)
    seqs = [[1, 2, 3], [5, 6]]
    ref = last_position(enc(embed_input(pad_batch(seqs, 4), table, pos), pad_batch(seqs, 4).mask))
    for width in (5, 8):
        b = pad_batch(seqs, width)
        torch.testing.assert_close(last_position(enc(embed_input(b, table, pos), b.mask)), ref, atol=1e-6, rtol=0)


def test_last_position_batching_consistency():
    enc = small_encoder().eval()
    table, pos = torch.randn(12, 8), torch.randn(5, 8)
    seqs = [[1, 2, 3], [4, 5, 6, 7, 8], [9], [1, 2, 3]]
    b = pad_batch(seqs, 5)
    batched = last_position(enc(embed_input(b, table, pos), b.mask))
    for i, s in enumerate(seqs):
        one = pad_batch([s], 5)
        torch.testing.assert_close(batched[i], last_position(enc(embed_input(one, table, pos), one.mask))[0], atol=1e-6, rtol=0)
    torch.testing.assert_close(batched[0], batched[3])


def test_last_position_single_step():
    h = torch.randn(2, 1, 4)
    torch.testing.assert_close(last_position(h), h[:, 0])


def test_eval_deterministic_and_train_seeded():
    enc = small_encoder(dropout=0.3)
    e, m = torch.randn(2, 4, 8), torch.ones(2, 4, dtype=torch.bool)
    enc.eval()
    torch.testing.assert_close(enc(e, m), enc(e, m))
    enc.train()
    torch.manual_seed(5)
    a = enc(e, m)
    torch.manual_seed(5)
    torch.testing.assert_close(a, enc(e, m))


def test_nonfinite_detection_names_block():
    enc = small_encoder()
    with torch.no_grad():
        enc.blocks[1].ffn_out.bias.fill_(float("nan"))
    with pytest.raises(NonFiniteError, match="block 1"):
        enc(torch.randn(1, 3, 8), torch.ones(1, 3, dtype=torch.bool))


def test_head_count_must_divide_d():
    with pytest.raises(ValueError):
        SequenceEncoder(6, heads=4)


def test_gradcheck_quadratic_probe():
    p = torch.randn(50, dtype=torch.float64, requires_grad=True)
    report = gradient_check(lambda: (p**2).sum() / 2, {"p": p}, num_samples=50)
    assert report.passed
    for e in report.entries:
        assert e.analytic == pytest.approx(p.detach()[e.flat_index].item(), abs=0)


def test_gradcheck_zero_tolerance_fails():
    report = gradcheck_tiny(num_samples=30, tol=0.0)
    assert not report.passed and report.failures


def test_gradcheck_requires_double():
    p = torch.randn(3, requires_grad=True)
    with pytest.raises(TypeError):
        gradient_check(lambda: p.sum(), {"p": p})


def test_gradcheck_flags_wrong_gradient():
    p = torch.randn(20, dtype=torch.float64, requires_grad=True)

    class Wrong(torch.autograd.Function):
        @staticmethod
        def forward(ctx, x):
            ctx.save_for_backward(x)
            return (x**3).sum()

        @staticmethod
        def backward(ctx, g):
            (x,) = ctx.saved_tensors
            return g * 2 * x**2  # should be 3 x^2

    report = gradient_check(lambda: Wrong.apply(p), {"p": p}, num_samples=20)
    assert not report.passed
    assert "MISMATCH p[" in report.summary()


@pytest.mark.parametrize("variant", ["full", "mlp_fusion", "s_only", "g_only"])
def test_gradcheck_every_variant(variant):
    report = gradcheck_tiny(variant=variant, num_samples=60, seed=1)
    assert report.passed, report.summary()


def test_gradcheck_normalized_graph_path():
    report = gradcheck_tiny(gcn_normalize=True, num_samples=60, seed=2)
    assert report.passed, report.summary()
