import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvcorr import gradcheck, nn
from mvcorr.exceptions import DimensionError
from mvcorr.nn import (
    BiLstmParams,
    Dense,
    LstmParams,
    LstmState,
    MlpParams,
    SplitAeModel,
    bilstm_forward,
    deep_lstm_forward,
    lstm_backward,
    lstm_forward,
    lstm_step,
    mlp_forward,
    pack_sequences,
    splitae_loss,
)
from mvcorr.train import build_bilstm, build_deep_lstm, build_lstm, build_mlp


def _zero_lstm(H=1, D=1, peephole=True):
    cols = 2 * H + D if peephole else H + D
    z = np.zeros
    return LstmParams(z((H, cols)), z((H, cols)), z((H, H + D)), z((H, cols)), z(H), z(H), z(H), z(H), peephole)


def _scalar(v):
    return np.array([[float(v)]])


class TestMlp:
    def test_zero_sigmoid_network_outputs_half(self, rng):
        net = MlpParams([Dense(np.zeros((3, 4)), np.zeros(3)), Dense(np.zeros((2, 3)), np.zeros(2))])
        np.testing.assert_array_equal(mlp_forward(net, rng.standard_normal((4, 5)))[0], 0.5)

    def test_identity_layer_is_affine(self):
        net = MlpParams([Dense(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([0.5, -1.0]), "identity")])
        out, _ = mlp_forward(net, np.array([[1.0], [1.0]]))
        np.testing.assert_array_equal(out, [[3.5], [6.0]])

    def test_gradients_match_finite_differences(self):
        assert gradcheck.check_mlp().max_rel_error < 1e-5

    def test_dimension_mismatch(self):
        net = build_mlp([3, 2])
        with pytest.raises(DimensionError):
            mlp_forward(net, np.zeros((4, 1)))

    def test_layers_must_chain(self):
        with pytest.raises(DimensionError):
            MlpParams([Dense(np.zeros((3, 4)), np.zeros(3)), Dense(np.zeros((2, 5)), np.zeros(2))])


class TestLstmStep:
    def test_zero_weights_zero_state(self):
        s = lstm_step(_zero_lstm(), LstmState(np.zeros(1), np.zeros(1)), np.array([0.7]))
        assert s.c[0] == 0.0 and s.h[0] == 0.0

    def test_zero_weights_cell_two(self):
        s = lstm_step(_zero_lstm(), LstmState(np.array([2.0]), np.zeros(1)), np.array([0.3]))
        assert s.c[0] == pytest.approx(1.0, abs=1e-15)
        assert s.h[0] == pytest.approx(0.5 * math.tanh(1.0), abs=1e-15)
        assert s.h[0] == pytest.approx(0.38079, abs=1e-5)

    def test_scalar_hand_computation(self):
        # columns are [c_prev, h_prev, x]; W_g reads [h_prev, x]
        p = LstmParams(
            W_f=np.array([[0.3, -0.2, 0.5]]), W_i=np.array([[-0.4, 0.1, 0.8]]),
            W_g=np.array([[0.6, -0.7]]), W_o=np.array([[0.2, 0.9, -0.3]]),
            b_f=np.array([0.1]), b_i=np.array([-0.2]), b_g=np.array([0.05]), b_o=np.array([0.3]),
        )
        c0, h0, x = 0.4, -0.25, 1.5
        sig = lambda z: 1.0 / (1.0 + math.exp(-z))
        f = sig(0.3 * c0 - 0.2 * h0 + 0.5 * x + 0.1)
        i = sig(-0.4 * c0 + 0.1 * h0 + 0.8 * x - 0.2)
        g = math.tanh(0.6 * h0 - 0.7 * x + 0.05)
        o = sig(0.2 * c0 + 0.9 * h0 - 0.3 * x + 0.3)
        c = f * c0 + i * g
        h = o * math.tanh(c)
        s = lstm_step(p, LstmState(np.array([c0]), np.array([h0])), np.array([x]))
        assert s.c[0] == pytest.approx(c, abs=1e-14)
        assert s.h[0] == pytest.approx(h, abs=1e-14)

    def test_non_peephole_gates_ignore_cell_state(self, rng):
        p = build_lstm(2, 3, peephole=False, rng=rng)
        assert p.W_f.shape == (3, 5)
        x, h = rng.standard_normal(2), rng.standard_normal(3)
        a = lstm_step(p, LstmState(np.zeros(3), h), x)
        b = lstm_step(p, LstmState(5 * np.ones(3), h), x)
        f = nn.sigmoid(p.W_f @ np.concatenate([h, x]) + p.b_f)
        np.testing.assert_allclose(b.c - a.c, 5 * f, atol=1e-14)

    def test_zero_weights_halve_cell(self):
        for c0 in (-3.0, 0.25, 7.0):
            s = lstm_step(_zero_lstm(), LstmState(np.array([c0]), np.zeros(1)), np.array([1.0]))
            assert s.c[0] == 0.5 * c0

    def test_batch_matches_vectors(self, rng):
        p = build_lstm(3, 4, rng=rng)
        X = rng.standard_normal((3, 5))
        c, h = rng.standard_normal((4, 5)), rng.standard_normal((4, 5))
        batch = lstm_step(p, LstmState(c, h), X)
        for b in range(5):
            one = lstm_step(p, LstmState(c[:, b], h[:, b]), X[:, b])
            np.testing.assert_allclose(batch.c[:, b], one.c, atol=1e-15)
            np.testing.assert_allclose(batch.h[:, b], one.h, atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            lstm_step(_zero_lstm(), LstmState(np.zeros(1), np.zeros(1)), np.zeros(2))

    def test_peephole_shape_checked(self):
        with pytest.raises(DimensionError):
            LstmParams(*(np.zeros((1, 2)) for _ in range(4)), *(np.zeros(1) for _ in range(4)), peephole=True)


class TestLstmSequence:
    def test_single_step_matches_lstm_step(self, rng):
        p = build_lstm(3, 2, rng=rng)
        x = rng.standard_normal(3)
        final, _, _ = lstm_forward(p, x[None, :])
        np.testing.assert_allclose(final, lstm_step(p, LstmState(np.zeros(2), np.zeros(2)), x).h, atol=1e-15)

    def test_zero_weights_constant_input(self):
        _, all_h, _ = lstm_forward(_zero_lstm(2, 3), np.ones((6, 3)))
        np.testing.assert_array_equal(all_h, 0.0)

    def test_empty_sequence(self):
        with pytest.raises(DimensionError):
            lstm_forward(_zero_lstm(), np.zeros((0, 1)))

    @pytest.mark.parametrize("peephole", [True, False])
    def test_bptt_gradients(self, peephole):
        assert gradcheck.check_lstm(T=5, peephole=peephole).max_rel_error < 1e-4

    def test_gradient_through_every_output(self, rng):
        p = build_lstm(2, 3, rng=rng)
        for t in p.tensors():
            t[...] = 0.5 * rng.standard_normal(t.shape)
        seq = rng.standard_normal((4, 2))
        R = rng.standard_normal((4, 3))
        _, _, cache = lstm_forward(p, seq)
        grads, dseq = lstm_backward(p, cache, d_all=R)
        f = lambda: float(np.sum(R * lstm_forward(p, seq)[1]))
        numeric = gradcheck.numeric_gradient(f, p.tensors() + [seq])
        assert gradcheck.max_relative_error(grads.tensors() + [dseq], numeric) < 1e-4

    def test_full_window_equals_plain_bptt(self, rng):
        p = build_lstm(2, 3, rng=rng)
        seq = rng.standard_normal((6, 2))
        _, _, cache = lstm_forward(p, seq)
        r = rng.standard_normal(3)
        full, _ = lstm_backward(p, cache, d_final=r)
        windowed, _ = lstm_backward(p, cache, d_final=r, window=6)
        for a, b in zip(full.tensors(), windowed.tensors()):
            np.testing.assert_allclose(a, b, atol=1e-10)

    def test_truncation_ignores_early_inputs(self, rng):
        p = build_lstm(2, 3, rng=rng)
        seq = rng.standard_normal((6, 2))
        _, _, cache = lstm_forward(p, seq)
        _, dseq = lstm_backward(p, cache, d_final=rng.standard_normal(3), window=2)
        np.testing.assert_array_equal(dseq[:4], 0.0)
        assert np.any(dseq[4:] != 0)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), T=st.integers(1, 12))
    def test_outputs_bounded(self, seed, T):
        r = np.random.default_rng(seed)
        p = build_lstm(3, 4, rng=r)
        for t in p.tensors():
            t[...] = 3 * r.standard_normal(t.shape)
        _, all_h, _ = lstm_forward(p, 5 * r.standard_normal((T, 3)))
        assert np.all(np.abs(all_h) <= 1.0)


class TestBiLstm:
    def test_palindrome_symmetry(self, rng):
        cell = build_lstm(2, 3, rng=rng)
        W = rng.standard_normal((2, 3))
        p = BiLstmParams(cell, copy.deepcopy(cell), W, W.copy(), rng.standard_normal(2))
        half = rng.standard_normal((3, 2))
        seq = np.vstack([half, half[::-1]])
        out, _ = bilstm_forward(p, seq)
        np.testing.assert_allclose(out, out[::-1], atol=1e-14)

    def test_zero_combination_gives_bias(self, rng):
        p = build_bilstm(2, 3, 4, rng=rng)
        v = rng.standard_normal(4)
        p = BiLstmParams(p.forward, p.backward, np.zeros((4, 3)), np.zeros((4, 3)), v)
        out, _ = bilstm_forward(p, rng.standard_normal((5, 2)))
        np.testing.assert_allclose(out, np.tile(v, (5, 1)))

    def test_gradients(self):
        assert gradcheck.check_bilstm(T=5).max_rel_error < 1e-4

    def test_backward_cell_reads_future(self, rng):
        p = build_bilstm(1, 2, 2, rng=rng)
        seq = rng.standard_normal((4, 1))
        out, _ = bilstm_forward(p, seq)
        seq2 = seq.copy()
        seq2[-1] += 1.0
        out2, _ = bilstm_forward(p, seq2)
        assert not np.allclose(out[0], out2[0])


class TestDeepLstm:
    def test_packing_left_pads(self):
        X, mask = pack_sequences([np.ones((2, 3)), 2 * np.ones((4, 3))])
        assert X.shape == (4, 3, 2)
        np.testing.assert_array_equal(mask[:, 0], [0, 0, 1, 1])
        np.testing.assert_array_equal(X[:2, :, 0], 0)

    def test_padding_does_not_change_representation(self, rng):
        stack = build_deep_lstm(3, [4, 2], rng=rng)
        short = rng.standard_normal((3, 3))
        X, mask = pack_sequences([short, rng.standard_normal((7, 3))])
        batched, _ = deep_lstm_forward(stack, X, mask)
        alone, _ = deep_lstm_forward(stack, short[:, :, None])
        np.testing.assert_allclose(batched[:, 0], alone[:, 0], atol=1e-14)

    def test_single_layer_matches_lstm_forward(self, rng):
        stack = build_deep_lstm(3, [4], rng=rng)
        seq = rng.standard_normal((5, 3))
        final, _ = deep_lstm_forward(stack, seq[:, :, None])
        np.testing.assert_allclose(final[:, 0], lstm_forward(stack.layers[0], seq)[0], atol=1e-15)

    @pytest.mark.parametrize("bidirectional", [False, True])
    def test_gradients_on_ragged_batch(self, bidirectional):
        assert gradcheck.check_deep_lstm(bidirectional=bidirectional).max_rel_error < 1e-4

    def test_layers_must_chain(self, rng):
        with pytest.raises(DimensionError):
            nn.DeepLstm([build_lstm(3, 4, rng=rng), build_lstm(5, 2, rng=rng)])


def _identity_layer(d):
    return Dense(np.eye(d), np.zeros(d), "identity")


class TestSplitAe:
    def test_single_identity_loss_zero(self, rng):
        model = SplitAeModel("single", MlpParams([_identity_layer(3)]), MlpParams([_identity_layer(3)]),
                             MlpParams([_identity_layer(3)]))
        X = rng.standard_normal((3, 8))
        loss, _ = splitae_loss(model, X, X.copy())
        assert loss == 0.0

    def test_pair_identity_loss_zero(self, rng):
        model = SplitAeModel("pair", MlpParams([]), MlpParams([_identity_layer(3)]), MlpParams([_identity_layer(3)]),
                             MlpParams([]), np.eye(3), np.eye(3), np.zeros(3), "identity")
        X, Y = rng.standard_normal((3, 8)), rng.standard_normal((3, 8))
        loss, _ = splitae_loss(model, X, Y)
        assert loss == 0.0

    @pytest.mark.parametrize("architecture", ["single", "pair"])
    def test_zero_decoders(self, rng, architecture):
        from mvcorr.train import build_splitae

        model = build_splitae(architecture, 4, 3, [5], 2, rng=rng)
        for dec in (model.decoder_x, model.decoder_y):
            dec.layers[-1].W[...] = 0.0
            dec.layers[-1].b[...] = 0.0
        X, Y = rng.standard_normal((4, 6)), rng.standard_normal((3, 6))
        loss, _ = splitae_loss(model, X, Y)
        assert loss == pytest.approx(0.5 * (np.sum(X**2) + np.sum(Y**2)), rel=1e-14)

    @pytest.mark.parametrize("architecture", ["single", "pair"])
    def test_gradients(self, architecture):
        assert gradcheck.check_splitae(architecture).max_rel_error < 1e-5

    def test_shared_bias_is_common(self, rng):
        from mvcorr.train import build_splitae

        model = build_splitae("pair", 4, 3, [5], 2, rng=rng)
        model.shared_activation = "identity"
        model.shared_b[...] = [0.7, -0.2]
        X, Y = rng.standard_normal((4, 3)), rng.standard_normal((3, 3))
        ax = mlp_forward(model.encoder_x, X)[0]
        ay = mlp_forward(model.encoder_y, Y)[0]
        bias = np.array([[0.7], [-0.2]]).repeat(3, axis=1)
        np.testing.assert_allclose(nn.splitae_encode(model, X, 1) - model.shared_Wx @ ax, bias, atol=1e-14)
        np.testing.assert_allclose(nn.splitae_encode(model, Y, 2) - model.shared_Wy @ ay, bias, atol=1e-14)

    def test_view_dimension_mismatch(self, rng):
        from mvcorr.train import build_splitae

        model = build_splitae("single", 4, 3, [5], 2, rng=rng)
        with pytest.raises(DimensionError):
            splitae_loss(model, rng.standard_normal((4, 6)), rng.standard_normal((3, 5)))
