"""Bi-directional two-layer recurrent sequence labeler.

One model handles one axis. For the column model every pixel column of
the preprocessed image is a timestep (features = image height); for the
row model every pixel row is a timestep (features = image width). Two
stacked bi-directional layers (GRU or LSTM cells) feed a per-timestep
dense layer and a two-way softmax over {content, whitespace}.

Parameters live in a flat, ordered ``dict`` so the optimizer, gradient
checker and checkpoint writer can walk them uniformly. Key names are
``"<layer><direction>.<matrix>_<gate>"``, e.g. ``"l1f.W_z"`` or
``"l2b.U_c"``, plus ``"dense_W"`` and ``"dense_b"``.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .errors import InvalidInputError, NumericError

CONTENT = 0
WHITESPACE = 1


class Axis(str, Enum):
    ROW = "row"
    COLUMN = "column"


class Cell(str, Enum):
    GRU = "gru"
    LSTM = "lstm"


GATES = {Cell.GRU: ("z", "r", "h"), Cell.LSTM: ("i", "f", "o", "c")}
DIRECTIONS = ("l1f", "l1b", "l2f", "l2b")


@dataclass(frozen=True)
class ModelConfig:
    axis: Axis
    cell: Cell = Cell.GRU
    input_dim: int = 512
    hidden_dim: int = 512

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "cell", Cell(self.cell))
        if self.input_dim <= 0 or self.hidden_dim <= 0:
            raise InvalidInputError("input_dim and hidden_dim must be positive")

    @classmethod
    def for_axis(cls, axis, cell=Cell.GRU, target_width=1600, target_height=512,
                 hidden_dim=None):
        """Full-size configuration: column H=512 over 512-pixel columns,
        row H=1024 over 1600-pixel rows, unless ``hidden_dim`` overrides."""
        axis = Axis(axis)
        if axis is Axis.COLUMN:
            return cls(axis, cell, target_height, hidden_dim or 512)
        return cls(axis, cell, target_width, hidden_dim or 1024)


def param_shapes(config):
    """Ordered mapping of parameter name to shape (checkpoint order)."""
    H = config.hidden_dim
    gates = GATES[config.cell]
    shapes = {}
    for prefix in DIRECTIONS:
        D = config.input_dim if prefix.startswith("l1") else 2 * H
        for g in gates:
            shapes[f"{prefix}.W_{g}"] = (H, D)
        for g in gates:
            shapes[f"{prefix}.U_{g}"] = (H, H)
        for g in gates:
            shapes[f"{prefix}.b_{g}"] = (H,)
    shapes["dense_W"] = (2, 2 * H)
    shapes["dense_b"] = (2,)
    return shapes


@dataclass
class ModelParams:
    config: ModelConfig
    arrays: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = param_shapes(self.config)
        if list(self.arrays) != list(shapes):
            raise InvalidInputError("parameter names do not match the configuration")
        for name, shape in shapes.items():
            arr = self.arrays[name]
            if arr.shape != shape:
                raise InvalidInputError(f"{name}: expected shape {shape}, got {arr.shape}")

    def layer(self, prefix):
        """Parameters of one recurrent block keyed by short name ("W_z", ...)."""
        return {k.split(".", 1)[1]: v for k, v in self.arrays.items()
                if k.startswith(prefix + ".")}

    def copy(self):
        return ModelParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def zeros_like(self):
        return {k: np.zeros_like(v) for k, v in self.arrays.items()}


def zero_params(config):
    return ModelParams(config, {k: np.zeros(s) for k, s in param_shapes(config).items()})


def init_params(config, seed):
    """Xavier-uniform weights, zero biases.

    Draws come from numpy's ``default_rng`` (PCG64) seeded with ``seed``,
    one matrix at a time in checkpoint order, so a seed pins every value.
    """
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in param_shapes(config).items():
        if len(shape) == 1:
            arrays[name] = np.zeros(shape)
        else:
            fan_out, fan_in = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            arrays[name] = rng.uniform(-limit, limit, size=shape)
    return ModelParams(config, arrays)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def _check_dims(x, h, p, gates):
    H, D = p["W_" + gates[0]].shape
    if x.shape != (D,) or h.shape != (H,):
        raise InvalidInputError(f"expected x of length {D} and state of length {H}, "
                                f"got {x.shape} and {h.shape}")


def gru_cell(x, h_prev, p):
    """One GRU step: h = (1-z)*h_prev + z*tanh(W_h x + U_h (r*h_prev) + b_h)."""
    x = np.asarray(x, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    _check_dims(x, h_prev, p, GATES[Cell.GRU])
    z = sigmoid(p["W_z"] @ x + p["U_z"] @ h_prev + p["b_z"])
    r = sigmoid(p["W_r"] @ x + p["U_r"] @ h_prev + p["b_r"])
    cand = np.tanh(p["W_h"] @ x + p["U_h"] @ (r * h_prev) + p["b_h"])
    return (1.0 - z) * h_prev + z * cand


def lstm_cell(x, state, p):
    x = np.asarray(x, dtype=float)
    h_prev, c_prev = (np.asarray(s, dtype=float) for s in state)
    _check_dims(x, h_prev, p, GATES[Cell.LSTM])
    if c_prev.shape != h_prev.shape:
        raise InvalidInputError("cell state and hidden state differ in length")
    i = sigmoid(p["W_i"] @ x + p["U_i"] @ h_prev + p["b_i"])
    f = sigmoid(p["W_f"] @ x + p["U_f"] @ h_prev + p["b_f"])
    o = sigmoid(p["W_o"] @ x + p["U_o"] @ h_prev + p["b_o"])
    g = np.tanh(p["W_c"] @ x + p["U_c"] @ h_prev + p["b_c"])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def _stack(p, cell):
    gates = GATES[cell]
    W = np.vstack([p["W_" + g] for g in gates])
    U = np.ascontiguousarray(np.vstack([p["U_" + g] for g in gates]))
    b = np.concatenate([p["b_" + g] for g in gates])
    return W, U, b


def _direction_forward(seq, p, cell, reverse):
    """Scan one direction; returns (T x H output in ascending t, cache)."""
    xs = np.ascontiguousarray(seq[::-1]) if reverse else seq
    W, U, b = _stack(p, cell)
    xg = np.ascontiguousarray(xs @ W.T + b)
    if cell is Cell.GRU:
        gates, hs = kernels.gru_forward(xg, U)
        cs = None
    else:
        gates, hs, cs = kernels.lstm_forward(xg, U)
    out = hs[1:]
    if reverse:
        out = out[::-1]
    return np.ascontiguousarray(out), (xs, W, U, gates, hs, cs, reverse)


def _direction_backward(d_out, cache, cell):
    """Gradients of one direction given dL/d(output); returns (grads, dL/d(input))."""
    xs, W, U, gates, hs, cs, reverse = cache
    dhs = np.ascontiguousarray(d_out[::-1] if reverse else d_out)
    if cell is Cell.GRU:
        da = kernels.gru_backward(dhs, gates, hs, U)
    else:
        da = kernels.lstm_backward(dhs, gates, hs, cs, U)
    H = hs.shape[1]
    names = GATES[cell]
    dW = da.T @ xs
    db = da.sum(axis=0)
    h_prev = hs[:-1]
    if cell is Cell.GRU:
        dU = np.vstack([da[:, : 2 * H].T @ h_prev,
                        da[:, 2 * H :].T @ (gates[:, H : 2 * H] * h_prev)])
    else:
        dU = da.T @ h_prev
    grads = {}
    for k, g in enumerate(names):
        rows = slice(k * H, (k + 1) * H)
        grads["W_" + g] = dW[rows]
        grads["U_" + g] = dU[rows]
        grads["b_" + g] = db[rows]
    dx = da @ W
    if reverse:
        dx = dx[::-1]
    return grads, dx


def run_direction(seq, p, cell=Cell.GRU, direction="forward"):
    """Hidden states of one recurrent block scanned forward or backward.

    Row ``t`` of the result is the state emitted at timestep ``t`` in both
    cases, so backward outputs come back in ascending order.
    """
    seq = _as_sequence(seq)
    cell = Cell(cell)
    D = p["W_" + GATES[cell][0]].shape[1]
    if seq.shape[1] != D:
        raise InvalidInputError(f"sequence has {seq.shape[1]} features, layer expects {D}")
    if direction not in ("forward", "backward"):
        raise InvalidInputError(f"unknown direction {direction!r}")
    out, _ = _direction_forward(seq, p, cell, direction == "backward")
    return out


def _as_sequence(seq):
    seq = np.asarray(seq, dtype=float)
    if seq.ndim != 2:
        raise InvalidInputError("sequence must be a 2-D (timesteps x features) array")
    if not np.all(np.isfinite(seq)):
        raise NumericError("sequence contains non-finite values")
    return seq


def _encode(seq, m):
    caches = []
    inp = seq
    for layer in ("l1", "l2"):
        fwd, cf = _direction_forward(inp, m.layer(layer + "f"), m.config.cell, False)
        bwd, cb = _direction_forward(inp, m.layer(layer + "b"), m.config.cell, True)
        caches.append((inp, cf, cb))
        inp = np.hstack([fwd, bwd])
    return inp, caches


def bigru_forward(seq, m):
    """Two stacked bi-directional layers; returns the T x 2H concatenation
    [forward | backward] of the second layer."""
    seq = _as_sequence(seq)
    if seq.shape[1] != m.config.input_dim:
        raise InvalidInputError(f"sequence has {seq.shape[1]} features, "
                                f"model expects {m.config.input_dim}")
    return _encode(seq, m)[0]


def softmax(logits):
    logits = np.asarray(logits, dtype=float)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def dense_softmax(features, m):
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != 2 * m.config.hidden_dim:
        raise InvalidInputError(f"features must be T x {2 * m.config.hidden_dim}")
    if not np.all(np.isfinite(features)):
        raise NumericError("non-finite features reaching the dense layer")
    return softmax(features @ m.arrays["dense_W"].T + m.arrays["dense_b"])


def image_to_sequence(image, axis):
    """Column axis: one timestep per image column. Row axis: one per image row."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise InvalidInputError("image must be a 2-D array")
    return np.ascontiguousarray(image.T if Axis(axis) is Axis.COLUMN else image)


def forward(image, m):
    """Per-timestep class probabilities (T x 2; column 1 is whitespace)."""
    seq = image_to_sequence(image, m.config.axis)
    if seq.shape[1] != m.config.input_dim:
        raise InvalidInputError(
            f"{m.config.axis.value} model expects {m.config.input_dim} pixels per "
            f"timestep, image gives {seq.shape[1]} (shape {np.shape(image)})")
    return dense_softmax(bigru_forward(seq, m), m)
