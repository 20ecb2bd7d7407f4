"""The pulse network: a 1 -> 200 x 5 -> 12 MLP with sine activations.

The first eight outputs are the real and imaginary parts of the state
correction N_x, the last four are the control amplitudes u_j. The state is
built from N_x by the normalized ansatz

    x(t) = (x0 + (1 - e^-t) N_x(t)) / || x0 + (1 - e^-t) N_x(t) ||

and its exact time derivative is obtained by pushing a tangent (d/dt) through
every layer alongside the value. The tangent is recorded with ordinary tape
operations, so it remains differentiable with respect to the weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff.tensor import Tensor
from .errors import DegenerateState
from .linalg import CVector

ACTIVATIONS = ("sin", "tanh", "relu")
INIT_SCHEMES = ("custom", "default")
DEFAULT_WIDTHS = (1, 200, 200, 200, 200, 200, 12)
N_STATE = 4
N_CONTROLS = 4


@dataclass(frozen=True)
class TimeGrid:
    n: int = 200
    t_final: float = 10.0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("grid size must be nonnegative")
        if self.t_final <= 0:
            raise ValueError("final time must be positive")

    @property
    def dt(self) -> float:
        return self.t_final / self.n

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n) * self.dt


@dataclass
class PinnModel:
    activation: str = "sin"
    omega0: float = 1.0
    init_scheme: str = "custom"
    seed: int = 0
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.init_scheme not in INIT_SCHEMES:
            raise ValueError(f"unknown init scheme {self.init_scheme!r}")
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if self.widths[0] != 1 or self.widths[-1] != N_STATE * 2 + N_CONTROLS:
            raise ValueError("network must map 1 input to 12 outputs")
        if not self.weights:
            init_weights(self)

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    def parameters(self) -> list[np.ndarray]:
        """Weights and biases interleaved, layer by layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_parameters(self, params):
        self.weights = [np.array(p, dtype=float) for p in params[0::2]]
        self.biases = [np.array(p, dtype=float) for p in params[1::2]]

    # --- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "activation": self.activation,
            "omega0": self.omega0,
            "init_scheme": self.init_scheme,
            "seed": self.seed,
            "widths": list(self.widths),
            "layers": [{"weight": w.tolist(), "bias": b.tolist()}
                       for w, b in zip(self.weights, self.biases)],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PinnModel":
        return cls(activation=doc["activation"], omega0=doc["omega0"],
                   init_scheme=doc["init_scheme"], seed=doc["seed"],
                   widths=tuple(doc["widths"]),
                   weights=[np.array(layer["weight"], dtype=float) for layer in doc["layers"]],
                   biases=[np.array(layer["bias"], dtype=float) for layer in doc["layers"]])

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "PinnModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def init_weights(model: PinnModel) -> PinnModel:
    """Draw fresh weights from the model's seed.

    ``custom``: the input layer uses U(-1/n_in, 1/n_in); every later layer uses
    U(-sqrt(6/n_in)/omega0, sqrt(6/n_in)/omega0); biases start at zero.
    ``default``: the usual fan-in rule, weights and biases U(-1/sqrt(n_in), 1/sqrt(n_in)).
    """
    rng = np.random.default_rng(model.seed)
    weights, biases = [], []
    for i, (n_in, n_out) in enumerate(zip(model.widths[:-1], model.widths[1:])):
        if model.init_scheme == "custom":
            bound = 1.0 / n_in if i == 0 else math.sqrt(6.0 / n_in) / model.omega0
            w = rng.uniform(-bound, bound, size=(n_out, n_in))
            b = np.zeros(n_out)
        else:
            bound = 1.0 / math.sqrt(n_in)
            w = rng.uniform(-bound, bound, size=(n_out, n_in))
            b = rng.uniform(-bound, bound, size=n_out)
        weights.append(w)
        biases.append(b)
    model.weights, model.biases = weights, biases
    return model


@dataclass
class NetworkPass:
    """Output of one network evaluation over a batch of times."""
    out: Tensor          # (N, 12)
    d_out: Tensor        # (N, 12), derivative in t
    linear: list = field(default_factory=list)      # pre-activation Tensors per layer
    activated: list = field(default_factory=list)   # post-activation Tensors per hidden layer


def _activate(kind: str, scale: float, z: Tensor, dz: Tensor):
    if kind == "sin":
        arg = z * scale
        return arg.sin(), arg.cos() * (dz * scale)
    if kind == "tanh":
        a = z.tanh()
        return a, (1.0 - a * a) * dz
    mask = (z.data > 0.0).astype(float)
    return z.relu(), dz * mask


def network(params, t, activation="sin", omega0=1.0) -> NetworkPass:
    """Evaluate the MLP and its time derivative on the times ``t``.

    ``params`` alternates weights (n_out, n_in) and biases; entries may be
    Tensors (for training) or plain arrays.
    """
    t = np.asarray(t, dtype=float).reshape(-1, 1)
    h = Tensor(t)
    dh = Tensor(np.ones_like(t))
    ws = [Tensor.lift(p) for p in params[0::2]]
    bs = [Tensor.lift(p) for p in params[1::2]]
    result = NetworkPass(None, None)
    for i, (w, b) in enumerate(zip(ws, bs)):
        z = h @ w.T + b
        dz = dh @ w.T
        result.linear.append(z)
        if i == len(ws) - 1:
            result.out, result.d_out = z, dz
            break
        scale = omega0 if (activation == "sin" and i > 0) else 1.0
        h, dh = _activate(activation, scale, z, dz)
        result.activated.append(h)
    return result


def forward(model: PinnModel, t):
    """N_x (complex, shape (N, 4)) and N_u (shape (N, 4)) as plain arrays."""
    scalar = np.ndim(t) == 0
    res = network(model.parameters(), np.atleast_1d(t), model.activation, model.omega0)
    out = res.out.data
    nx = out[:, :N_STATE] + 1j * out[:, N_STATE:2 * N_STATE]
    nu = out[:, 2 * N_STATE:]
    return (nx[0], nu[0]) if scalar else (nx, nu)


@dataclass
class AnsatzState:
    """Batched state, its time derivative, and the controls, as Tensors.

    ``x_re``/``x_im``/``dx_re``/``dx_im`` have shape (N, 4), ``u`` (N, 4).
    """
    x_re: Tensor
    x_im: Tensor
    dx_re: Tensor
    dx_im: Tensor
    u: Tensor
    norm: np.ndarray

    @property
    def x(self) -> CVector:
        return CVector(self.x_re.reshape(-1, N_STATE, 1), self.x_im.reshape(-1, N_STATE, 1))

    @property
    def dx(self) -> CVector:
        return CVector(self.dx_re.reshape(-1, N_STATE, 1), self.dx_im.reshape(-1, N_STATE, 1))


def apply_ansatz(out: Tensor, d_out: Tensor, t, x0: np.ndarray) -> AnsatzState:
    """Normalized state, its exact derivative, and the controls from raw outputs."""
    t = np.asarray(t, dtype=float).reshape(-1, 1)
    x0 = np.asarray(x0, dtype=complex).reshape(1, N_STATE)
    decay = np.exp(-t)
    envelope = 1.0 - decay
    n_re, n_im = out[:, 0:4], out[:, 4:8]
    dn_re, dn_im = d_out[:, 0:4], d_out[:, 4:8]
    y_re = x0.real + n_re * envelope
    y_im = x0.imag + n_im * envelope
    dy_re = n_re * decay + dn_re * envelope
    dy_im = n_im * decay + dn_im * envelope
    norm = (y_re * y_re + y_im * y_im).sum(axis=1, keepdims=True).sqrt()
    if np.min(norm.data) < 1e-12:
        raise DegenerateState("ansatz numerator vanished")
    x_re, x_im = y_re / norm, y_im / norm
    # d||y||/dt = Re<y|dy>/||y||; dx = (dy - x d||y||/dt) / ||y||
    dnorm = (y_re * dy_re + y_im * dy_im).sum(axis=1, keepdims=True) / norm
    dx_re = (dy_re - x_re * dnorm) / norm
    dx_im = (dy_im - x_im * dnorm) / norm
    return AnsatzState(x_re, x_im, dx_re, dx_im, out[:, 8:12], norm.data)


def evaluate(model: PinnModel, t, x0, params=None) -> AnsatzState:
    params = model.parameters() if params is None else params
    res = network(params, t, model.activation, model.omega0)
    return apply_ansatz(res.out, res.d_out, t, x0)


def state(model: PinnModel, t, x0) -> np.ndarray:
    """x(t) as a complex array; shape (4,) for scalar t, else (N, 4)."""
    s = evaluate(model, np.atleast_1d(t), x0)
    x = s.x_re.data + 1j * s.x_im.data
    return x[0] if np.ndim(t) == 0 else x


def state_time_derivative(model: PinnModel, t, x0) -> np.ndarray:
    s = evaluate(model, np.atleast_1d(t), x0)
    dx = s.dx_re.data + 1j * s.dx_im.data
    return dx[0] if np.ndim(t) == 0 else dx


def controls(model: PinnModel, grid: TimeGrid) -> np.ndarray:
    """Control amplitudes u_j(t_k), shape (N, 4)."""
    return forward(model, grid.points)[1]


# --- initialization diagnostics ----------------------------------------------

HIST_BINS = 64


@dataclass
class LayerDiagnostics:
    name: str
    linear_hist: tuple[np.ndarray, np.ndarray]
    activation_hist: tuple[np.ndarray, np.ndarray] | None
    gradient_hist: tuple[np.ndarray, np.ndarray]
    gradient_std: float
    spectrum: np.ndarray  # mean |DFT| over neurons, rfft bins


def diagnostics(model: PinnModel, grid: TimeGrid, bins: int = HIST_BINS) -> list[LayerDiagnostics]:
    """Per-layer value/gradient histograms and activation spectra over the grid.

    Gradients are adjoints of the probe loss sum(outputs) with respect to each
    layer's output (post-activation for hidden layers).
    """
    params = [Tensor(p, requires_grad=True) for p in model.parameters()]
    res = network(params, grid.points, model.activation, model.omega0)
    res.out.sum().backward()
    layers = []
    for i, z in enumerate(res.linear):
        last = i == len(res.linear) - 1
        act = res.out if last else res.activated[i]
        grad = act.grad if act.grad is not None else np.zeros_like(act.data)
        values = act.data
        layers.append(LayerDiagnostics(
            name="output" if last else f"layer{i}",
            linear_hist=np.histogram(z.data, bins=bins),
            activation_hist=None if last else np.histogram(values, bins=bins),
            gradient_hist=np.histogram(grad, bins=bins),
            gradient_std=float(np.std(grad)),
            spectrum=np.abs(np.fft.rfft(values, axis=0)).mean(axis=1),
        ))
    return layers
