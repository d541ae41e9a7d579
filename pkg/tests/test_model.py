import mpmath
import numpy as np
import pytest

from oracles import gru_scalar_steps
from tablegru.errors import InvalidInputError
from tablegru.model import (GATES, Cell, ModelConfig, ModelParams, bigru_forward, dense_softmax,
                            forward, gru_cell, init_params, lstm_cell, param_shapes,
                            run_direction, softmax, zero_params)

# H = D = 1, all weights 1, biases 0, x = 1, zero state; 30-digit mpmath
SIG1 = 0.731058578630004879
TANH1 = 0.761594155955764888
GRU_H = 0.556769941145939744
LSTM_C = 0.556769941145939744
LSTM_H = 0.369606352935705773


def unit_layer(cell, value=1.0, H=1, D=1):
    p = {}
    for g in GATES[Cell(cell)]:
        p["W_" + g] = np.full((H, D), value)
        p["U_" + g] = np.full((H, H), value)
        p["b_" + g] = np.zeros(H)
    return p


def random_layer(rng, cell, H, D, scale=0.8):
    p = {}
    for g in GATES[Cell(cell)]:
        p["W_" + g] = rng.uniform(-scale, scale, (H, D))
        p["U_" + g] = rng.uniform(-scale, scale, (H, H))
        p["b_" + g] = rng.uniform(-scale, scale, H)
    return p


def scan_oracle(seq, p, cell, reverse=False):
    """Step-by-step scan with the single-step cell functions."""
    H = p["b_" + GATES[Cell(cell)][0]].shape[0]
    h = np.zeros(H)
    c = np.zeros(H)
    order = range(len(seq) - 1, -1, -1) if reverse else range(len(seq))
    out = np.zeros((len(seq), H))
    for t in order:
        if Cell(cell) is Cell.GRU:
            h = gru_cell(seq[t], h, p)
        else:
            h, c = lstm_cell(seq[t], (h, c), p)
        out[t] = h
    return out


def random_params(config, seed, scale=0.8):
    rng = np.random.default_rng(seed)
    return ModelParams(config, {k: rng.uniform(-scale, scale, s)
                                for k, s in param_shapes(config).items()})


def encode_oracle(seq, m):
    inp = seq
    for layer in ("l1", "l2"):
        inp = np.hstack([scan_oracle(inp, m.layer(layer + "f"), m.config.cell),
                         scan_oracle(inp, m.layer(layer + "b"), m.config.cell, reverse=True)])
    return inp


class TestGruCell:
    def test_zero_params_zero_state(self):
        p = unit_layer("gru", 0.0, H=3, D=2)
        np.testing.assert_array_equal(gru_cell([0.3, -2.0], np.zeros(3), p), 0.0)

    def test_zero_params_halves_state(self):
        p = unit_layer("gru", 0.0, H=3, D=2)
        v = np.array([1.0, -0.4, 2.5])
        np.testing.assert_allclose(gru_cell([5.0, 1.0], v, p), 0.5 * v, rtol=0, atol=1e-15)

    def test_scalar_hand_value(self):
        h = gru_cell([1.0], [0.0], unit_layer("gru"))
        assert h[0] == pytest.approx(SIG1 * TANH1, abs=1e-12)
        assert h[0] == pytest.approx(GRU_H, abs=1e-12)

    def test_closed_update_gate_keeps_state(self):
        rng = np.random.default_rng(4)
        p = random_layer(rng, "gru", 4, 3)
        p["b_z"] = np.full(4, -1e3)
        h_prev = rng.normal(size=4)
        np.testing.assert_allclose(gru_cell(rng.normal(size=3), h_prev, p), h_prev, atol=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            gru_cell([1.0, 2.0], [0.0], unit_layer("gru"))


class TestLstmCell:
    def test_zero_params_zero_state(self):
        h, c = lstm_cell([1.0, 2.0], (np.zeros(3), np.zeros(3)), unit_layer("lstm", 0.0, 3, 2))
        np.testing.assert_array_equal(h, 0.0)
        np.testing.assert_array_equal(c, 0.0)

    def test_zero_params_cell_decay(self):
        v = np.array([0.7, -3.0])
        h, c = lstm_cell([1.0], (np.zeros(2), v), unit_layer("lstm", 0.0, 2, 1))
        np.testing.assert_allclose(c, 0.5 * v, atol=1e-15)
        np.testing.assert_allclose(h, 0.5 * np.tanh(0.5 * v), atol=1e-15)

    def test_scalar_hand_value(self):
        h, c = lstm_cell([1.0], ([0.0], [0.0]), unit_layer("lstm"))
        assert c[0] == pytest.approx(LSTM_C, abs=1e-12)
        assert h[0] == pytest.approx(LSTM_H, abs=1e-12)

    def test_reference_digits(self):
        mpmath.mp.dps = 30
        s = 1 / (1 + mpmath.e ** -1)
        assert float(s * mpmath.tanh(1)) == pytest.approx(LSTM_C, abs=1e-15)
        assert float(s * mpmath.tanh(s * mpmath.tanh(1))) == pytest.approx(LSTM_H, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            lstm_cell([1.0], ([0.0], [0.0, 1.0]), unit_layer("lstm"))


@pytest.mark.usefixtures("backend")
class TestRunDirection:
    @pytest.mark.parametrize("cell", ["gru", "lstm"])
    def test_single_step_symmetric(self, cell):
        rng = np.random.default_rng(0)
        p = random_layer(rng, cell, 4, 3)
        seq = rng.normal(size=(1, 3))
        np.testing.assert_array_equal(run_direction(seq, p, cell, "forward"),
                                      run_direction(seq, p, cell, "backward"))

    @pytest.mark.parametrize("cell", ["gru", "lstm"])
    def test_zero_params(self, cell):
        seq = np.random.default_rng(1).normal(size=(6, 3))
        out = run_direction(seq, unit_layer(cell, 0.0, 4, 3), cell)
        np.testing.assert_array_equal(out, 0.0)

    def test_scalar_unrolled(self):
        out = run_direction(np.ones((3, 1)), unit_layer("gru"), "gru")
        np.testing.assert_allclose(out[:, 0], gru_scalar_steps([1, 1, 1]), atol=1e-12)
        np.testing.assert_allclose(out[:, 0], [0.556769941145940, 0.838274092263528,
                                               0.924527022160913], atol=1e-12)

    def test_backward_order(self):
        seq = np.array([[1.0], [-0.5], [2.0]])
        out = run_direction(seq, unit_layer("gru"), "gru", "backward")
        expected = gru_scalar_steps([2.0, -0.5, 1.0])[::-1]
        np.testing.assert_allclose(out[:, 0], expected, atol=1e-12)

    @pytest.mark.parametrize("cell", ["gru", "lstm"])
    def test_matches_cell_loop(self, cell):
        rng = np.random.default_rng(3)
        p = random_layer(rng, cell, 5, 4)
        seq = rng.normal(size=(9, 4))
        for direction, rev in (("forward", False), ("backward", True)):
            np.testing.assert_allclose(run_direction(seq, p, cell, direction),
                                       scan_oracle(seq, p, cell, rev), atol=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(InvalidInputError):
            run_direction(np.ones((3, 2)), unit_layer("gru"), "gru")


@pytest.mark.usefixtures("backend")
class TestBidirectional:
    def test_zero_params(self):
        m = zero_params(ModelConfig("column", "gru", 3, 4))
        out = bigru_forward(np.random.default_rng(0).normal(size=(5, 3)), m)
        assert out.shape == (5, 8)
        np.testing.assert_array_equal(out, 0.0)

    @pytest.mark.parametrize("cell", ["gru", "lstm"])
    def test_composition(self, cell):
        m = random_params(ModelConfig("column", cell, 3, 2), 11)
        seq = np.random.default_rng(11).normal(size=(4, 3))
        out = bigru_forward(seq, m)
        assert out.shape == (4, 4)
        np.testing.assert_allclose(out, encode_oracle(seq, m), atol=1e-12)

    @pytest.mark.parametrize("cell", ["gru", "lstm"])
    def test_direction_symmetry(self, cell):
        rng = np.random.default_rng(5)
        H, D, T = 3, 4, 7
        pf = random_layer(rng, cell, H, D)
        pb = random_layer(rng, cell, H, D)
        seq = rng.normal(size=(T, D))

        def layer1(s, fwd, bwd):
            return np.hstack([run_direction(s, fwd, cell, "forward"),
                              run_direction(s, bwd, cell, "backward")])

        original = layer1(seq, pf, pb)
        mirrored = layer1(seq[::-1], pb, pf)
        np.testing.assert_allclose(mirrored[::-1], np.hstack([original[:, H:], original[:, :H]]),
                                   atol=1e-12)


class TestDenseSoftmax:
    def test_uniform(self):
        m = zero_params(ModelConfig("row", "gru", 2, 3))
        probs = dense_softmax(np.zeros((5, 6)), m)
        np.testing.assert_array_equal(probs, 0.5)

    def test_closed_form(self):
        np.testing.assert_allclose(softmax([[np.log(3.0), 0.0]]), [[0.75, 0.25]], atol=1e-15)

    def test_large_logits(self):
        mpmath.mp.dps = 50
        exact = 1 / (1 + mpmath.e ** -1000)
        with np.errstate(over="raise"):
            probs = softmax([[1000.0, 0.0], [0.0, 1000.0], [-1000.0, 1000.0]])
        assert abs(probs[0, 0] - float(exact)) <= 1e-12
        assert probs[0, 1] <= 1e-12
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-15)

    def test_rejects_non_finite(self):
        from tablegru.errors import NumericError

        m = zero_params(ModelConfig("row", "gru", 2, 1))
        with pytest.raises(NumericError):
            dense_softmax(np.array([[np.nan, 0.0]]), m)

    def test_rows_normalized(self):
        rng = np.random.default_rng(8)
        logits = rng.normal(scale=300, size=(5000, 2))
        probs = softmax(logits)
        assert np.all(np.abs(probs.sum(axis=1) - 1.0) <= 1e-9)
        assert probs.min() >= 0.0 and probs.max() <= 1.0


@pytest.mark.usefixtures("backend")
class TestForward:
    def test_reduced_model_composition(self):
        cfg = ModelConfig("column", "gru", 16, 8)
        m = random_params(cfg, 2, scale=0.3)
        image = np.random.default_rng(2).random((16, 40))
        probs = forward(image, m)
        feats = encode_oracle(image.T, m)
        logits = feats @ m.arrays["dense_W"].T + m.arrays["dense_b"]
        expected = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        assert probs.shape == (40, 2)
        np.testing.assert_allclose(probs, expected, atol=1e-12)

    def test_row_axis_slices_rows(self):
        cfg = ModelConfig("row", "lstm", 40, 4)
        m = random_params(cfg, 3, scale=0.3)
        image = np.random.default_rng(3).random((16, 40))
        feats = encode_oracle(image, m)
        logits = feats @ m.arrays["dense_W"].T + m.arrays["dense_b"]
        np.testing.assert_allclose(forward(image, m), softmax(logits), atol=1e-12)

    def test_wrong_dims(self):
        m = zero_params(ModelConfig("column", "gru", 16, 2))
        with pytest.raises(InvalidInputError):
            forward(np.zeros((15, 40)), m)

    def test_pure(self):
        m = random_params(ModelConfig("column", "gru", 8, 4), 9)
        image = np.random.default_rng(9).random((8, 30))
        assert forward(image, m).tobytes() == forward(image, m).tobytes()


class TestFullSizeShapes:
    def test_column_model(self):
        m = init_params(ModelConfig.for_axis("column"), 0)
        assert (m.config.input_dim, m.config.hidden_dim) == (512, 512)
        image = (np.random.default_rng(0).random((512, 1600)) < 0.2).astype(float)
        probs = forward(image, m)
        assert probs.shape == (1600, 2)
        assert np.all(np.abs(probs.sum(axis=1) - 1) <= 1e-9)

    def test_row_model(self):
        m = init_params(ModelConfig.for_axis("row"), 0)
        assert (m.config.input_dim, m.config.hidden_dim) == (1600, 1024)
        assert m.arrays["l2f.W_z"].shape == (1024, 2048)
        assert m.arrays["dense_W"].shape == (2, 2048)
        probs = forward(np.zeros((512, 1600)), m)
        assert probs.shape == (512, 2)


class TestInit:
    def test_deterministic(self):
        cfg = ModelConfig("row", "lstm", 12, 6)
        a, b = init_params(cfg, 42), init_params(cfg, 42)
        for k in a.arrays:
            assert a.arrays[k].tobytes() == b.arrays[k].tobytes()
        c = init_params(cfg, 43)
        assert any(not np.array_equal(a.arrays[k], c.arrays[k]) for k in a.arrays)

    def test_biases_zero_and_bounds(self):
        cfg = ModelConfig("column", "gru", 30, 20)
        m = init_params(cfg, 1)
        for name, arr in m.arrays.items():
            if arr.ndim == 1:
                np.testing.assert_array_equal(arr, 0.0)
            else:
                limit = np.sqrt(6.0 / sum(arr.shape))
                assert np.abs(arr).max() <= limit

    def test_sample_mean(self):
        cfg = ModelConfig("column", "gru", 100, 100)
        w = init_params(cfg, 7).arrays["l1f.W_z"].ravel()
        assert w.size == 10_000
        limit = np.sqrt(6.0 / 200)
        se = limit / np.sqrt(3.0) / np.sqrt(w.size)
        assert abs(w.mean()) < 3 * se

    def test_block_count_and_order(self):
        names = list(param_shapes(ModelConfig("row", "gru", 5, 3)))
        assert names[:9] == ["l1f.W_z", "l1f.W_r", "l1f.W_h", "l1f.U_z", "l1f.U_r", "l1f.U_h",
                             "l1f.b_z", "l1f.b_r", "l1f.b_h"]
        assert names[-2:] == ["dense_W", "dense_b"]
        assert len(names) == 4 * 9 + 2
