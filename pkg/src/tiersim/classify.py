"""Movement classifiers built from first principles, plus trace windowing.

Three model families, in increasing capability:

* Heaviside perceptron: binary linear classifier; output 1 iff the
  pre-activation ``s = w.x + b`` is >= 0, trained by the classic error
  correction rule ``w += (t - y) x``.
* ADALINE: linear element with a sign output for classification, trained by
  the least-mean-square rule on the *pre-activation* residual
  ``w += eta (t - s) x`` (a hard sign output would have zero gradient almost
  everywhere, so the squared error ``Q`` is defined on ``s``).
* Sigmoid multilayer net: one hidden layer, sigmoid on hidden and output
  units, trained by backpropagating the gradient of the per-pattern squared
  error ``sum_k (y_k - t_k)^2``.

Windowing turns a trace into fixed-width input vectors of per-sample squared
magnitudes (or raw axis triples) with a majority ground-truth label per
window.  Class outputs are ordered (REST, WALK, FALL); the multilayer net
uses one output unit per class and the argmax decides.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DataError, DimError, IoError, ParseError
from .trace import Label, Trace, magnitude_sq

#: Class order used for window labels and net outputs.
CLASS_LABELS = (Label.REST, Label.WALK, Label.FALL)
FALL_CLASS = CLASS_LABELS.index(Label.FALL)


class OutputKind(Enum):
    HEAVISIDE = "HEAVISIDE"  # {0, 1}
    SIGN = "SIGN"            # {-1, +1}


# ---------------------------------------------------------------------------
# Linear models
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    output_kind: OutputKind

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise DimError("weights must be a non-empty 1-D vector")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def n_inputs(self) -> int:
        return self.weights.size


def new_linear(n_inputs: int, output_kind: OutputKind, seed: int | None = None) -> LinearModel:
    """Fresh linear model: zero weights, or uniform in [-0.5, 0.5] when seeded."""
    if seed is None:
        w, b = np.zeros(n_inputs), 0.0
    else:
        rng = np.random.default_rng(seed)
        w = rng.uniform(-0.5, 0.5, size=n_inputs)
        b = float(rng.uniform(-0.5, 0.5))
    return LinearModel(w, b, output_kind)


def _check_input(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise DimError(f"expected input of length {n}, got shape {x.shape}")
    return x


def linear_forward(model: LinearModel, x) -> tuple:
    """Return ``(y, s)``: the thresholded output and the pre-activation.

    ``s = 0`` maps to the positive class (1 or +1) for both output kinds.
    """
    x = _check_input(x, model.n_inputs)
    s = float(model.weights @ x + model.bias)
    if model.output_kind is OutputKind.HEAVISIDE:
        y = 1 if s >= 0.0 else 0
    else:
        y = 1 if s >= 0.0 else -1
    return y, s


def perceptron_update(model: LinearModel, x, t: int) -> LinearModel:
    """One error-correction step; no change when the pattern is classified."""
    if model.output_kind is not OutputKind.HEAVISIDE:
        raise ValueError("perceptron_update requires a HEAVISIDE model")
    if t not in (0, 1):
        raise ValueError("perceptron target must be 0 or 1")
    x = _check_input(x, model.n_inputs)
    y, _ = linear_forward(model, x)
    d = t - y
    if d == 0:
        return model
    return LinearModel(model.weights + d * x, model.bias + d, model.output_kind)


def adaline_error(dataset, model: LinearModel) -> float:
    """Mean squared residual Q over the dataset, on the pre-activation."""
    if not dataset:
        raise DataError("adaline_error requires a non-empty dataset")
    total = 0.0
    for x, t in dataset:
        _, s = linear_forward(model, x)
        total += (s - t) ** 2
    return total / len(dataset)


def lms_update(model: LinearModel, x, t: float, eta: float) -> LinearModel:
    """One least-mean-square step on the pre-activation residual."""
    if model.output_kind is not OutputKind.SIGN:
        raise ValueError("lms_update requires a SIGN model")
    if not eta > 0:
        raise ValueError("eta must be > 0")
    x = _check_input(x, model.n_inputs)
    _, s = linear_forward(model, x)
    r = t - s
    return LinearModel(model.weights + eta * r * x, model.bias + eta * r, model.output_kind)


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class LearnConfig:
    """Knobs for the training loops.

    ``batch`` patterns are accumulated before an update is applied (1 means
    stepwise).  ``target_error`` stops training once the epoch error measure
    falls to or below it.
    """

    eta: float
    batch: int = 1
    max_epochs: int = 1000
    target_error: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")


def train_perceptron(model: LinearModel, dataset, max_epochs: int = 1000):
    """Run epochs of the perceptron rule in dataset order.

    Returns ``(model, errors_per_epoch)``; stops early after the first epoch
    with zero misclassifications.
    """
    history = []
    for _ in range(max_epochs):
        errors = 0
        for x, t in dataset:
            y, _ = linear_forward(model, x)
            if y != t:
                errors += 1
                model = perceptron_update(model, x, t)
        history.append(errors)
        if errors == 0:
            break
    return model, history


def train_lms(model: LinearModel, dataset, config: LearnConfig):
    """Run LMS epochs; returns ``(model, q_per_epoch)``.

    With ``config.batch`` > 1 the per-pattern deltas are evaluated at the
    batch-start weights, summed, and applied at the end of the batch.
    """
    if not dataset:
        raise DataError("train_lms requires a non-empty dataset")
    q_history = []
    for _ in range(config.max_epochs):
        if config.batch == 1:
            for x, t in dataset:
                model = lms_update(model, x, t, config.eta)
        else:
            for start in range(0, len(dataset), config.batch):
                chunk = dataset[start : start + config.batch]
                dw = np.zeros(model.n_inputs)
                db = 0.0
                for x, t in chunk:
                    x = _check_input(x, model.n_inputs)
                    _, s = linear_forward(model, x)
                    dw += config.eta * (t - s) * x
                    db += config.eta * (t - s)
                model = LinearModel(model.weights + dw, model.bias + db, model.output_kind)
        q = adaline_error(dataset, model)
        q_history.append(q)
        if q <= config.target_error:
            break
    return model, q_history


# ---------------------------------------------------------------------------
# Multilayer net
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class MlpModel:
    w_hidden: np.ndarray  # (H, N)
    b_hidden: np.ndarray  # (H,)
    w_out: np.ndarray     # (K, H)
    b_out: np.ndarray     # (K,)

    def __post_init__(self):
        wh = np.asarray(self.w_hidden, dtype=float)
        bh = np.asarray(self.b_hidden, dtype=float)
        wo = np.asarray(self.w_out, dtype=float)
        bo = np.asarray(self.b_out, dtype=float)
        if wh.ndim != 2 or wo.ndim != 2 or bh.shape != (wh.shape[0],) or bo.shape != (wo.shape[0],):
            raise DimError("inconsistent layer shapes")
        if wo.shape[1] != wh.shape[0]:
            raise DimError("hidden and output layers disagree on the hidden width")
        for arr in (wh, bh, wo, bo):
            if not np.isfinite(arr).all():
                raise DimError("weights must be finite")
        object.__setattr__(self, "w_hidden", wh)
        object.__setattr__(self, "b_hidden", bh)
        object.__setattr__(self, "w_out", wo)
        object.__setattr__(self, "b_out", bo)

    @property
    def n_inputs(self) -> int:
        return self.w_hidden.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.w_hidden.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.w_out.shape[0]


def new_mlp(n_inputs: int, n_hidden: int, n_outputs: int, seed: int = 0) -> MlpModel:
    """Fresh net with weights and biases uniform in [-0.5, 0.5]."""
    rng = np.random.default_rng(seed)
    return MlpModel(
        rng.uniform(-0.5, 0.5, size=(n_hidden, n_inputs)),
        rng.uniform(-0.5, 0.5, size=n_hidden),
        rng.uniform(-0.5, 0.5, size=(n_outputs, n_hidden)),
        rng.uniform(-0.5, 0.5, size=n_outputs),
    )


def sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp for large |z|.
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def mlp_forward(model: MlpModel, x) -> np.ndarray:
    """Evaluate the net; every output lies strictly in (0, 1)."""
    x = _check_input(x, model.n_inputs)
    h = sigmoid(model.w_hidden @ x + model.b_hidden)
    return sigmoid(model.w_out @ h + model.b_out)


def mlp_gradients(model: MlpModel, x, t):
    """Chain-rule gradients of ``sum_k (y_k - t_k)^2`` for one pattern.

    Returns ``(grads, error)`` where grads is a tuple matching the model's
    parameter arrays.
    """
    x = _check_input(x, model.n_inputs)
    t = np.asarray(t, dtype=float)
    if t.shape != (model.n_outputs,):
        raise DimError(f"expected target of length {model.n_outputs}, got shape {t.shape}")
    h = sigmoid(model.w_hidden @ x + model.b_hidden)
    y = sigmoid(model.w_out @ h + model.b_out)
    err = y - t
    error = float(np.sum(err * err))
    delta_out = 2.0 * err * y * (1.0 - y)
    g_w_out = np.outer(delta_out, h)
    g_b_out = delta_out
    delta_hidden = (model.w_out.T @ delta_out) * h * (1.0 - h)
    g_w_hidden = np.outer(delta_hidden, x)
    g_b_hidden = delta_hidden
    return (g_w_hidden, g_b_hidden, g_w_out, g_b_out), error


def mlp_train_step(model: MlpModel, x, t, eta: float):
    """One gradient step; returns ``(model, per-pattern squared error)``."""
    if eta < 0:
        raise ValueError("eta must be >= 0")
    (g_wh, g_bh, g_wo, g_bo), error = mlp_gradients(model, x, t)
    if eta == 0.0:
        return model, error
    return (
        MlpModel(
            model.w_hidden - eta * g_wh,
            model.b_hidden - eta * g_bh,
            model.w_out - eta * g_wo,
            model.b_out - eta * g_bo,
        ),
        error,
    )


def train_mlp(model: MlpModel, dataset, config: LearnConfig):
    """Epoch loop with a seeded per-epoch shuffle.

    Returns ``(model, mse_per_epoch)`` where each entry is the mean
    per-pattern squared error observed during that epoch.  Stops once the
    epoch mean falls to or below ``config.target_error``.
    """
    if not dataset:
        raise DataError("train_mlp requires a non-empty dataset")
    rng = np.random.default_rng(config.seed)
    mse_history = []
    for _ in range(config.max_epochs):
        order = rng.permutation(len(dataset))
        total = 0.0
        if config.batch == 1:
            for idx in order:
                x, t = dataset[idx]
                model, error = mlp_train_step(model, x, t, config.eta)
                total += error
        else:
            for start in range(0, len(order), config.batch):
                chunk = order[start : start + config.batch]
                acc = None
                for idx in chunk:
                    x, t = dataset[idx]
                    grads, error = mlp_gradients(model, x, t)
                    total += error
                    acc = grads if acc is None else tuple(a + g for a, g in zip(acc, grads))
                model = MlpModel(
                    model.w_hidden - config.eta * acc[0],
                    model.b_hidden - config.eta * acc[1],
                    model.w_out - config.eta * acc[2],
                    model.b_out - config.eta * acc[3],
                )
        mse = total / len(dataset)
        mse_history.append(mse)
        if mse <= config.target_error:
            break
    return model, mse_history


def one_hot(class_index: int, n_classes: int = len(CLASS_LABELS)) -> np.ndarray:
    t = np.zeros(n_classes)
    t[class_index] = 1.0
    return t


def predict_class(model: MlpModel, x) -> int:
    """Argmax class index for one input vector."""
    return int(np.argmax(mlp_forward(model, x)))


# ---------------------------------------------------------------------------
# Windowing
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class WindowSpec:
    """How a trace is cut into classifier input vectors.

    Default feature is the squared magnitude of each sample (width-long
    vectors); ``raw_axes`` switches to the three axis values per sample
    (3 * width long).  ``stride`` defaults to ``width`` (non-overlapping).
    """

    width: int
    stride: int | None = None
    raw_axes: bool = False

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def effective_stride(self) -> int:
        return self.stride if self.stride is not None else self.width

    @property
    def n_inputs(self) -> int:
        return 3 * self.width if self.raw_axes else self.width


def window_label(samples) -> Label:
    """Majority label of a window; ties resolve to the most severe class."""
    counts = [0, 0, 0]
    for sample in samples:
        counts[CLASS_LABELS.index(sample.label)] += 1
    best = max(range(len(counts)), key=lambda i: (counts[i], i))
    return CLASS_LABELS[best]


def windows(trace: Trace, spec: WindowSpec) -> list:
    """Cut a trace into ``(input vector, majority label)`` pairs."""
    n = len(trace.samples)
    if n < spec.width:
        raise DataError(f"trace has {n} samples, needs at least {spec.width}")
    stride = spec.effective_stride
    out = []
    for start in range(0, n - spec.width + 1, stride):
        seg = trace.samples[start : start + spec.width]
        if spec.raw_axes:
            vec = np.array([c for s in seg for c in (s.ax, s.ay, s.az)])
        else:
            vec = np.array([magnitude_sq(s) for s in seg])
        out.append((vec, window_label(seg)))
    return out


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------
def _fmt(values) -> str:
    return " ".join(f"{v:.17g}" for v in np.asarray(values, dtype=float).ravel())


def save_model(model, path) -> None:
    """Write a model as text: one header line, then whitespace-separated
    parameters with 17 significant digits (lossless for float64)."""
    lines = []
    if isinstance(model, LinearModel):
        lines.append(f"linear {model.n_inputs} {model.output_kind.value}")
        lines.append(_fmt(model.weights))
        lines.append(_fmt([model.bias]))
    elif isinstance(model, MlpModel):
        lines.append(f"mlp {model.n_inputs} {model.n_hidden} {model.n_outputs}")
        lines.append(_fmt(model.w_hidden))
        lines.append(_fmt(model.b_hidden))
        lines.append(_fmt(model.w_out))
        lines.append(_fmt(model.b_out))
    else:
        raise TypeError(f"cannot save object of type {type(model).__name__}")
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_model(path):
    """Read a model written by :func:`save_model`."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if not lines:
        raise ParseError(1, "empty model file")
    header = lines[0].split()

    def floats(line_no: int) -> np.ndarray:
        if line_no >= len(lines):
            raise ParseError(line_no + 1, "missing parameter line")
        try:
            return np.array([float(tok) for tok in lines[line_no].split()])
        except ValueError as exc:
            raise ParseError(line_no + 1, f"bad parameter value: {exc}") from exc

    if header[0] == "linear":
        if len(header) != 3:
            raise ParseError(1, "linear header must be 'linear <n> <output_kind>'")
        n = int(header[1])
        try:
            kind = OutputKind(header[2])
        except ValueError:
            raise ParseError(1, f"unknown output kind {header[2]!r}") from None
        w = floats(1)
        b = floats(2)
        if w.size != n or b.size != 1:
            raise ParseError(2, "parameter count does not match header")
        return LinearModel(w, float(b[0]), kind)
    if header[0] == "mlp":
        if len(header) != 4:
            raise ParseError(1, "mlp header must be 'mlp <n> <h> <k>'")
        n, h, k = (int(tok) for tok in header[1:])
        wh = floats(1)
        bh = floats(2)
        wo = floats(3)
        bo = floats(4)
        if wh.size != h * n or bh.size != h or wo.size != k * h or bo.size != k:
            raise ParseError(2, "parameter count does not match header")
        return MlpModel(wh.reshape(h, n), bh, wo.reshape(k, h), bo)
    raise ParseError(1, f"unknown model kind {header[0]!r}")
