"""Small fully-connected ReLU network trained with minibatch SGD.

This is the gradient oracle for adversarial generation, so the parts that
matter are exactness and replayability rather than training speed:

* Glorot-uniform init, zero biases, seeded (identical seed, identical net);
* hidden ReLU with subgradient 0 at the kink, linear output layer;
* softmax with max subtraction, cross-entropy loss;
* ``jacobian`` returns the reverse-mode Jacobian of the *logits* (not the
  softmax output) with respect to the input vector;
* ``predict`` breaks logit ties toward the lowest class index, i.e. class 0.

Weights serialize to JSON with full repr precision, so save/load round
trips are exact.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import EmptyInputError, ParameterError, ParseError, ShapeError


class MlpModel:
    """Weights/biases plus layer sizes; weights[k] has shape (out, in)."""

    def __init__(self, layer_sizes, weights, biases):
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.weights = [np.asarray(W, dtype=np.float64) for W in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        if len(self.layer_sizes) < 2:
            raise ParameterError("need at least an input and an output layer")
        if any(s < 1 for s in self.layer_sizes):
            raise ParameterError("layer sizes must be >= 1")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(
            self.weights
        ):
            raise ParameterError("weight/bias count does not match layer sizes")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_sizes[k + 1], self.layer_sizes[k])
            if W.shape != want:
                raise ShapeError(
                    "weight %d has shape %r, expected %r" % (k, W.shape, want)
                )
            if b.shape != (want[0],):
                raise ShapeError(
                    "bias %d has shape %r, expected (%d,)" % (k, b.shape, want[0])
                )

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_sizes),
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
        )


def init(layer_sizes, seed: int) -> MlpModel:
    """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ParameterError("need at least an input and an output layer")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, weights, biases)


def _check_input(model: MlpModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.n_inputs:
        raise ShapeError(
            "input has shape %r, model expects (%d,)" % (x.shape, model.n_inputs)
        )
    return x


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_batch(model: MlpModel, X: np.ndarray) -> np.ndarray:
    A = X
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        A = np.maximum(A @ W.T + b, 0.0)
    return A @ model.weights[-1].T + model.biases[-1]


def forward(model: MlpModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Return (logits, softmax probabilities) for one input vector."""
    x = _check_input(model, x)
    logits = _forward_batch(model, x[None, :])[0]
    return logits, _softmax(logits)


def predict(model: MlpModel, x) -> int:
    """Class with the largest logit; ties go to the lowest index."""
    logits, _ = forward(model, x)
    return int(np.argmax(logits))


def jacobian(model: MlpModel, x) -> np.ndarray:
    """d logits / d x, shape (n_classes, n_inputs), reverse mode."""
    x = _check_input(model, x)
    a = x
    pre_acts = []
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        z = W @ a + b
        pre_acts.append(z)
        a = np.maximum(z, 0.0)
    J = model.weights[-1]
    for W, z in zip(reversed(model.weights[:-1]), reversed(pre_acts)):
        J = (J * (z > 0.0)) @ W
    return J


def train(
    model: MlpModel,
    X,
    y,
    learning_rate: float = 0.05,
    epochs: int = 30,
    batch_size: int = 64,
    l2_penalty: float = 0.0,
    seed: int = 0,
) -> tuple[MlpModel, list[float]]:
    """Minibatch SGD on softmax cross-entropy.

    Returns a trained copy (the input model is untouched) and the per-epoch
    mean cross-entropy, measured on each batch before its update; with
    learning_rate 0 the history is therefore constant.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise ShapeError(
            "training matrix has shape %r, model expects (*, %d)"
            % (X.shape, model.n_inputs)
        )
    if X.shape[0] == 0:
        raise EmptyInputError("cannot train on an empty dataset")
    if y.shape != (X.shape[0],):
        raise ShapeError("label vector length %r does not match X" % (y.shape,))
    if y.min() < 0 or y.max() >= model.n_classes:
        raise ParameterError("labels must lie in [0, %d)" % model.n_classes)
    if learning_rate < 0 or l2_penalty < 0:
        raise ParameterError("learning_rate and l2_penalty must be >= 0")
    if epochs < 1 or batch_size < 1:
        raise ParameterError("epochs and batch_size must be >= 1")

    m = model.copy()
    n = X.shape[0]
    n_classes = m.n_classes
    rng = np.random.default_rng(seed)
    history = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        # per-sample losses stored by original row so the epoch mean sums in
        # a fixed order; batch iteration order then cannot perturb the value
        losses = np.empty(n)
        for lo in range(0, n, batch_size):
            idx = perm[lo : lo + batch_size]
            xb = X[idx]
            yb = y[idx]
            nb = xb.shape[0]

            acts = [xb]
            pre_acts = []
            A = xb
            for W, b in zip(m.weights[:-1], m.biases[:-1]):
                Z = A @ W.T + b
                pre_acts.append(Z)
                A = np.maximum(Z, 0.0)
                acts.append(A)
            logits = A @ m.weights[-1].T + m.biases[-1]
            probs = _softmax(logits)
            p_true = probs[np.arange(nb), yb]
            losses[idx] = -np.log(np.maximum(p_true, 1e-300))

            delta = probs.copy()
            delta[np.arange(nb), yb] -= 1.0
            delta /= nb
            for k in range(len(m.weights) - 1, -1, -1):
                grad_W = delta.T @ acts[k] + l2_penalty * m.weights[k]
                grad_b = delta.sum(axis=0)
                if k > 0:
                    delta = (delta @ m.weights[k]) * (pre_acts[k - 1] > 0.0)
                m.weights[k] = m.weights[k] - learning_rate * grad_W
                m.biases[k] = m.biases[k] - learning_rate * grad_b
        history.append(float(losses.sum()) / n)
    return m, history


def save_model(model: MlpModel, path) -> None:
    doc = {
        "format": "mlp",
        "version": 1,
        "layer_sizes": model.layer_sizes,
        "weights": [W.tolist() for W in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> MlpModel:
    with open(path, "r") as fh:
        doc = json.load(fh)
    if doc.get("format") != "mlp":
        raise ParseError("%s: not an mlp model document" % path)
    return MlpModel(doc["layer_sizes"], doc["weights"], doc["biases"])
