"""Training: class-weighted cross-entropy, full-unroll BPTT and Adam."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericError
from .model import (CONTENT, WHITESPACE, Axis, ModelParams, _direction_backward, _encode,
                    image_to_sequence, init_params, softmax)

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class LossConfig:
    content_weight: float = 0.66
    whitespace_weight: float = 1.0

    def __post_init__(self):
        if self.content_weight <= 0 or self.whitespace_weight <= 0:
            raise InvalidInputError("class weights must be positive")

    def weights(self, labels):
        return np.where(np.asarray(labels) == WHITESPACE,
                        self.whitespace_weight, self.content_weight)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0005
    epochs: int = 10
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InvalidInputError("beta1 and beta2 must lie in (0, 1)")
        if self.epochs < 0:
            raise InvalidInputError("epochs must be non-negative")
        if self.epsilon <= 0:
            raise InvalidInputError("epsilon must be positive")

    @classmethod
    def for_axis(cls, axis, **overrides):
        """Defaults per axis: 10 epochs for columns, 35 for rows."""
        epochs = 10 if Axis(axis) is Axis.COLUMN else 35
        return cls(**{"epochs": epochs, **overrides})


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params):
        return cls(params.zeros_like(), params.zeros_like(), 0)


def _check_labels(labels, T):
    labels = np.asarray(labels)
    if labels.shape != (T,):
        raise InvalidInputError(f"expected {T} labels, got shape {labels.shape}")
    if not np.all((labels == CONTENT) | (labels == WHITESPACE)):
        raise InvalidInputError("labels must be 0 (content) or 1 (whitespace)")
    return labels.astype(np.intp)


def weighted_bce(probs, labels, w=LossConfig()):
    """Mean over timesteps of weight(label) * -ln p[label]."""
    probs = np.asarray(probs, dtype=float)
    labels = _check_labels(labels, probs.shape[0])
    p_true = probs[np.arange(len(labels)), labels]
    return float(np.mean(w.weights(labels) * -np.log(np.maximum(p_true, PROB_CLAMP))))


def backward(image, labels, m, w=LossConfig()):
    """Loss and gradient of every parameter for one image.

    Unrolls both directions of both layers over the whole sequence.
    Returns ``(loss, grads)`` with ``grads`` keyed like ``m.arrays``.
    """
    seq = image_to_sequence(image, m.config.axis)
    if seq.shape[1] != m.config.input_dim:
        raise InvalidInputError(f"image gives {seq.shape[1]} features per timestep, "
                                f"model expects {m.config.input_dim}")
    T = seq.shape[0]
    labels = _check_labels(labels, T)
    cell = m.config.cell
    H = m.config.hidden_dim

    feats, caches = _encode(seq, m)
    dense_W = m.arrays["dense_W"]
    probs = softmax(feats @ dense_W.T + m.arrays["dense_b"])
    if not np.all(np.isfinite(probs)):
        raise NumericError("non-finite class probabilities")

    rows = np.arange(T)
    p_true = probs[rows, labels]
    weights = w.weights(labels)
    loss = float(np.mean(weights * -np.log(np.maximum(p_true, PROB_CLAMP))))

    # softmax + cross-entropy; the clamp zeroes the gradient where it binds
    d_logits = probs.copy()
    d_logits[rows, labels] -= 1.0
    d_logits *= (weights * (p_true >= PROB_CLAMP) / T)[:, None]

    grads = {"dense_W": d_logits.T @ feats, "dense_b": d_logits.sum(axis=0)}
    d_feats = d_logits @ dense_W
    layer_grads = {}
    for layer, (inp, cache_f, cache_b) in zip(("l2", "l1"), reversed(caches)):
        gf, dx_f = _direction_backward(d_feats[:, :H], cache_f, cell)
        gb, dx_b = _direction_backward(d_feats[:, H:], cache_b, cell)
        layer_grads[layer + "f"] = gf
        layer_grads[layer + "b"] = gb
        d_feats = dx_f + dx_b

    for name in m.arrays:
        if "." in name:
            prefix, short = name.split(".", 1)
            grads[name] = layer_grads[prefix][short]
    grads = {name: grads[name] for name in m.arrays}
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter block {name}")
    return loss, grads


def loss_only(image, labels, m, w=LossConfig()):
    seq = image_to_sequence(image, m.config.axis)
    feats, _ = _encode(seq, m)
    probs = softmax(feats @ m.arrays["dense_W"].T + m.arrays["dense_b"])
    return weighted_bce(probs, labels, w)


def reference_loss(image, labels, m, w=LossConfig(), dtype=np.longdouble):
    """Loss from a plain step-by-step evaluation in ``dtype``.

    Shares no code with the scan kernels. The gradient checker differences
    this in extended precision so that round-off in the loss stays far
    below the 1e-8 floor of the relative-error measure.
    """
    seq = np.asarray(image_to_sequence(image, m.config.axis), dtype=dtype)
    labels = _check_labels(labels, seq.shape[0])
    one = dtype(1)
    p = {k: np.asarray(v, dtype=dtype) for k, v in m.arrays.items()}

    def sig(x):
        return one / (one + np.exp(-x))

    def scan(xs, prefix):
        q = {k.split(".", 1)[1]: v for k, v in p.items() if k.startswith(prefix + ".")}
        H = q["b_" + ("z" if "b_z" in q else "i")].shape[0]
        h = np.zeros(H, dtype=dtype)
        c = np.zeros(H, dtype=dtype)
        out = []
        for x in xs:
            if "b_z" in q:
                z = sig(q["W_z"] @ x + q["U_z"] @ h + q["b_z"])
                r = sig(q["W_r"] @ x + q["U_r"] @ h + q["b_r"])
                cand = np.tanh(q["W_h"] @ x + q["U_h"] @ (r * h) + q["b_h"])
                h = (one - z) * h + z * cand
            else:
                i = sig(q["W_i"] @ x + q["U_i"] @ h + q["b_i"])
                f = sig(q["W_f"] @ x + q["U_f"] @ h + q["b_f"])
                o = sig(q["W_o"] @ x + q["U_o"] @ h + q["b_o"])
                g = np.tanh(q["W_c"] @ x + q["U_c"] @ h + q["b_c"])
                c = f * c + i * g
                h = o * np.tanh(c)
            out.append(h)
        return np.array(out)

    inp = seq
    for layer in ("l1", "l2"):
        fwd = scan(inp, layer + "f")
        bwd = scan(inp[::-1], layer + "b")[::-1]
        inp = np.hstack([fwd, bwd])
    logits = inp @ p["dense_W"].T + p["dense_b"]
    logits = logits - logits.max(axis=1, keepdims=True)
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    lp_true = logp[np.arange(len(labels)), labels]
    lp_true = np.maximum(lp_true, np.log(dtype(PROB_CLAMP)))
    weights = np.asarray(w.weights(labels), dtype=dtype)
    return np.mean(weights * -lp_true)


def adam_step(m, g, s, cfg):
    """One bias-corrected Adam update; returns new (params, state)."""
    t = s.t + 1
    new_arrays, new_m, new_v = {}, {}, {}
    c1 = 1.0 - cfg.beta1 ** t
    c2 = 1.0 - cfg.beta2 ** t
    for name, theta in m.arrays.items():
        grad = g[name]
        m1 = cfg.beta1 * s.m[name] + (1.0 - cfg.beta1) * grad
        v1 = cfg.beta2 * s.v[name] + (1.0 - cfg.beta2) * grad * grad
        new_arrays[name] = theta - cfg.learning_rate * (m1 / c1) / (np.sqrt(v1 / c2) + cfg.epsilon)
        new_m[name] = m1
        new_v[name] = v1
    return ModelParams(m.config, new_arrays), AdamState(new_m, new_v, t)


def grad_check(m, sample, epsilon=1e-5, w=LossConfig(), analytic=None):
    """Largest relative error between analytic and central-difference gradients.

    Relative error is ``|a - n| / max(|a|, |n|, 1e-8)``; the numeric side
    differences ``reference_loss`` evaluated in extended precision.

    ``analytic`` may be supplied to check a precomputed (e.g. deliberately
    corrupted) gradient instead of the one from ``backward``.
    """
    image, labels = sample
    if analytic is None:
        _, analytic = backward(image, labels, m, w)
    probe = m.copy()
    worst = 0.0
    for name, arr in probe.arrays.items():
        flat = arr.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = reference_loss(image, labels, probe, w)
            flat[i] = orig - epsilon
            down = reference_loss(image, labels, probe, w)
            flat[i] = orig
            numeric = float((up - down) / (2 * np.longdouble(epsilon)))
            a = a_flat[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


def train(dataset, cfg, model_cfg, w=LossConfig(), init=None, on_epoch=None):
    """Per-image Adam training for ``cfg.epochs`` passes over ``dataset``.

    ``dataset`` is a sequence of ``(image, labels)`` pairs. The image order
    is reshuffled each epoch from a generator seeded with ``[seed, 1]``;
    initial weights come from ``init_params(model_cfg, seed)`` unless
    ``init`` is given. Returns ``(params, history)`` where ``history`` holds
    the mean per-image loss of each epoch.
    """
    if len(dataset) == 0:
        raise InvalidInputError("training dataset is empty")
    params = init if init is not None else init_params(model_cfg, cfg.seed)
    if params.config != model_cfg:
        raise InvalidInputError("initial parameters do not match the model config")
    state = AdamState.for_params(params)
    rng = np.random.default_rng([cfg.seed, 1])
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        losses = []
        for idx in order:
            image, labels = dataset[idx]
            loss, grads = backward(image, labels, params, w)
            params, state = adam_step(params, grads, state, cfg)
            losses.append(loss)
        mean_loss = float(np.mean(losses))
        history.append(mean_loss)
        log.info("epoch %d mean loss %.6f", epoch + 1, mean_loss)
        if on_epoch is not None:
            on_epoch(epoch + 1, mean_loss)
    return params, history
