"""Fully-connected softmax classifier with analytic gradients.

Parameters live in a single flat float64 vector (layer by layer, weight
matrix row-major, then biases) so optimizers, moment sketches and
serialization all operate on one array. Gradients are of the minibatch-
rescaled log posterior: Gaussian log-prior plus (M/n)-scaled batch
log-likelihood, formulated as *ascent* (optimizers add the gradient).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NetworkShape:
    """Layer widths of the classifier."""

    input_dim: int = 784
    hidden_dims: tuple[int, ...] = (200, 200, 200)
    output_dim: int = 10

    def __post_init__(self):
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if not self.hidden_dims:
            raise ValueError("hidden_dims must be non-empty")
        if any(int(d) < 1 for d in dims):
            raise ValueError(f"all dimensions must be >= 1, got {dims}")
        # normalize so shapes compare/hash by value regardless of input container
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per affine layer, input to output."""
        dims = [self.input_dim, *self.hidden_dims, self.output_dim]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def param_count(self) -> int:
        return sum(fi * fo + fo for fi, fo in self.layer_dims)


@dataclass
class Batch:
    """A minibatch of flattened images and integer class labels."""

    inputs: np.ndarray  # (n, input_dim) float64
    labels: np.ndarray  # (n,) int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.labels.dtype.kind not in "iu":
            raise ValueError("labels must be integer class indices")
        self.labels = self.labels.astype(np.int64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise ValueError(f"inputs must be a non-empty 2-D matrix, got shape {self.inputs.shape}")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ValueError("labels must be 1-D with one entry per input row")
        if not np.all(np.isfinite(self.inputs)):
            raise ValueError("inputs contain non-finite values")

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


@dataclass
class GradOutput:
    """Gradient of the scaled log posterior plus batch diagnostics."""

    grad: np.ndarray
    mean_nll: float
    accuracy: float


def split_params(shape: NetworkShape, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views (W, b) per layer into the flat parameter vector."""
    params = np.asarray(params)
    if params.shape != (shape.param_count,):
        raise ValueError(
            f"parameter vector has length {params.shape}, shape requires ({shape.param_count},)"
        )
    layers = []
    pos = 0
    for fan_in, fan_out in shape.layer_dims:
        w = params[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = params[pos:pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    return layers


def init_params(shape: NetworkShape, seed: int) -> np.ndarray:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    params = np.zeros(shape.param_count, dtype=np.float64)
    for w, _ in split_params(shape, params):
        fan_in, fan_out = w.shape
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    return params


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max for stability."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_inputs(shape: NetworkShape, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != shape.input_dim:
        raise ValueError(
            f"inputs must be (n, {shape.input_dim}), got {inputs.shape}"
        )
    if not np.all(np.isfinite(inputs)):
        raise ValueError("inputs contain non-finite values")
    return inputs


def _check_masks(shape: NetworkShape, hidden_masks) -> None:
    if hidden_masks is not None and len(hidden_masks) != len(shape.hidden_dims):
        raise ValueError("need one mask per hidden layer")


def _forward_hidden(shape, params, inputs, hidden_masks):
    """ReLU hidden activations (masked if given) and final-layer logits."""
    layers = split_params(shape, params)
    act = inputs
    hidden = []
    for i, (w, b) in enumerate(layers[:-1]):
        a = np.maximum(act @ w + b, 0.0)
        if hidden_masks is not None:
            a = a * hidden_masks[i]
        hidden.append(a)
        act = a
    w_out, b_out = layers[-1]
    logits = act @ w_out + b_out
    return hidden, logits


def forward(
    shape: NetworkShape,
    params: np.ndarray,
    inputs: np.ndarray,
    hidden_masks: list[np.ndarray] | None = None,
) -> np.ndarray:
    """Class-probability matrix for a batch of inputs.

    hidden_masks, when given, multiply each hidden layer's activations
    (one entry per hidden layer, broadcastable to (n, width)); this is
    how dropout configurations are evaluated.
    """
    inputs = _check_inputs(shape, inputs)
    _check_masks(shape, hidden_masks)
    _, logits = _forward_hidden(shape, params, inputs, hidden_masks)
    return softmax(logits)


def dropout_masks(
    shape: NetworkShape,
    rate: float,
    rng: np.random.Generator,
    n: int | None = None,
) -> list[np.ndarray]:
    """Inverted-dropout multipliers for every hidden layer.

    Each hidden unit is zeroed with probability `rate`, survivors scaled
    by 1/(1-rate). With n=None one mask per unit is drawn (a fixed thinned
    configuration); with n set, each sample gets its own mask.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    masks = []
    for width in shape.hidden_dims:
        size = (width,) if n is None else (n, width)
        keep = (rng.random(size) >= rate).astype(np.float64)
        masks.append(keep / (1.0 - rate))
    return masks


def log_posterior_value(
    shape: NetworkShape,
    params: np.ndarray,
    batch: Batch,
    total_train_size: int,
    prior_precision: float = 1.0,
    hidden_masks: list[np.ndarray] | None = None,
) -> float:
    """Scalar minibatch-rescaled log posterior (up to the normalizer)."""
    inputs = _check_inputs(shape, batch.inputs)
    _, logits = _forward_hidden(shape, params, inputs, hidden_masks)
    logp = _log_softmax(logits)[np.arange(batch.size), batch.labels]
    scale = total_train_size / batch.size
    return float(-0.5 * prior_precision * np.dot(params, params) + scale * logp.sum())


def log_posterior_grad(
    shape: NetworkShape,
    params: np.ndarray,
    batch: Batch,
    total_train_size: int,
    prior_precision: float = 1.0,
    hidden_masks: list[np.ndarray] | None = None,
) -> GradOutput:
    """Analytic gradient of the minibatch-rescaled log posterior.

    grad = -prior_precision * w + (M/n) * sum_i grad log softmax(y_i|x_i, w)
    with M the full training-set size and n the batch size, so the
    stochastic gradient is unbiased for the full-data gradient. Returned
    alongside the batch mean negative log-likelihood and accuracy.
    """
    inputs = _check_inputs(shape, batch.inputs)
    _check_masks(shape, hidden_masks)
    n = batch.size
    if total_train_size < n:
        raise ValueError("total_train_size must be at least the batch size")
    if prior_precision <= 0:
        raise ValueError("prior_precision must be positive")
    labels = batch.labels
    if labels.min() < 0 or labels.max() >= shape.output_dim:
        raise ValueError(
            f"labels must lie in [0, {shape.output_dim}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )

    hidden, logits = _forward_hidden(shape, params, inputs, hidden_masks)
    log_probs = _log_softmax(logits)
    probs = np.exp(log_probs)

    mean_nll = float(-log_probs[np.arange(n), labels].mean())
    accuracy = float((probs.argmax(axis=1) == labels).mean())

    grad = -prior_precision * params.astype(np.float64)
    grad_layers = split_params(shape, grad)
    layers = split_params(shape, params)

    # d(sum_i log p_i)/d(logits) for the softmax likelihood
    delta = -probs
    delta[np.arange(n), labels] += 1.0

    scale = total_train_size / n
    acts = [inputs] + hidden
    for i in range(len(layers) - 1, -1, -1):
        gw, gb = grad_layers[i]
        gw += scale * (acts[i].T @ delta)
        gb += scale * delta.sum(axis=0)
        if i > 0:
            delta = delta @ layers[i][0].T
            delta *= acts[i] > 0  # ReLU gate; masked units have act 0 and drop out
            if hidden_masks is not None:
                delta *= hidden_masks[i - 1]
    return GradOutput(grad=grad, mean_nll=mean_nll, accuracy=accuracy)
