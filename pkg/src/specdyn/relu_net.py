"""Two-layer ReLU network, its random initialization, and full-batch GD.

The network is f(x) = (1/sqrt(m)) sum_j a_j [<x, w_j>]_+ with the second
layer a_j in {-1, +1} frozen after initialization; only the first-layer
weights move.  One GD step on the half-mean-square risk updates every
neuron from the pre-step state:

    w_j <- w_j + (eta a_j)/(n sqrt(m)) sum_i (y_i - yhat_i) x_i 1{<w_j, x_i> > 0}.

All activation indicators are strict (`> 0`), so the subgradient at an
exact zero pre-activation is 0 and ties are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .sphere_data import Dataset, FeatureSet

_SIGN_STREAM = rng.AUX_STREAM


@dataclass(frozen=True)
class NetState:
    """Immutable snapshot of the network at one iteration."""

    W: np.ndarray          # (m, dim) first-layer weights, w_j as rows
    a: np.ndarray          # (m,) second-layer signs in {-1., +1.}
    nu: float              # initialization standard deviation
    bias_mode: bool        # True when weights carry a trailing bias coordinate
    t: int                 # iteration index
    seed: int

    def __post_init__(self):
        self.W.setflags(write=False)
        self.a.setflags(write=False)

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]


@dataclass
class TrainTrace:
    """Per-iteration records of a GD run (index 0 is the initial state)."""

    eta: float
    err_norm: np.ndarray            # ||y - yhat(t)|| / sqrt(n)
    risk: np.ndarray                # empirical risk L_n at t
    flip_counts: np.ndarray         # (T+1, n) sizes |F(x_i, t)|
    early_stopped: bool = False
    sign_patterns: dict | None = None   # t -> (n, m) bool, when recorded
    weights: list | None = None         # per-iteration W, when recorded

    @property
    def iterations(self) -> int:
        return len(self.err_norm) - 1


def init_network(m: int, d: int, nu: float, bias_mode: bool, seed: int) -> NetState:
    """Random initialization: w_j ~ N(0, nu^2 I), a_j uniform on {-1, +1}.

    In bias mode the weights get a (d+1)-th coordinate, also N(0, nu^2),
    matching the bias-augmented features.  Row j comes from the (seed, j)
    substream; signs come from a dedicated auxiliary substream.
    """
    if m < 1:
        raise ValueError(f"width must be >= 1, got {m}")
    if not 0.0 < nu <= 1.0:
        raise ValueError(f"init scale must lie in (0, 1], got {nu}")
    dim = d + 1 if bias_mode else d
    W = nu * rng.gaussian_rows(seed, m, dim)
    u = rng.substream(seed, _SIGN_STREAM).random(m)
    a = np.where(u < 0.5, 1.0, -1.0)
    return NetState(W=W, a=a, nu=nu, bias_mode=bias_mode, t=0, seed=seed)


def design_matrix(features: FeatureSet, bias_mode: bool) -> np.ndarray:
    """The (n, dim) matrix the network actually sees.

    Bias-mode networks consume bias-augmented features; the constant
    coordinate is appended here when the caller passes raw sphere points.
    """
    if bias_mode and not features.augmented:
        return np.hstack([features.points, np.ones((features.n, 1))])
    if not bias_mode and features.augmented:
        raise ValueError("augmented features passed to a bias-free network")
    return features.points


def forward(net: NetState, x: np.ndarray) -> float:
    """Prediction (1/sqrt(m)) sum_j a_j [<x, w_j>]_+ for a single input."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({net.dim},)")
    return float(np.maximum(net.W @ x, 0.0) @ net.a / math.sqrt(net.m))


def predictions(net: NetState, X: np.ndarray) -> np.ndarray:
    """Vector of predictions for the rows of the design matrix X."""
    return np.maximum(X @ net.W.T, 0.0) @ net.a / math.sqrt(net.m)


def empirical_risk(net: NetState, dataset: Dataset) -> float:
    """L_n = (1/2n) sum_i (y_i - f(x_i))^2."""
    X = design_matrix(dataset.features, net.bias_mode)
    r = dataset.responses - predictions(net, X)
    return float(r @ r) / (2 * dataset.n)


def sign_pattern(net: NetState, features: FeatureSet) -> np.ndarray:
    """(n, m) boolean matrix with bit (i, j) = 1{<w_j, x_i> > 0}."""
    X = design_matrix(features, net.bias_mode)
    return (X @ net.W.T) > 0


def gd_step(net: NetState, dataset: Dataset, eta: float) -> NetState:
    """One full-batch GD step; `a` is unchanged and `t` advances by one.

    Every per-neuron update is computed from the pre-step state, so the
    result is independent of any update ordering.
    """
    if eta <= 0:
        raise ValueError(f"stepsize must be positive, got {eta}")
    X = design_matrix(dataset.features, net.bias_mode)
    Z = X @ net.W.T
    active = Z > 0
    residual = dataset.responses - np.maximum(Z, 0.0) @ net.a / math.sqrt(net.m)
    # Delta w_j = (eta a_j)/(n sqrt(m)) * sum_i residual_i 1{active_ij} x_i
    scale = eta / (dataset.n * math.sqrt(net.m))
    W_new = net.W + scale * net.a[:, None] * ((active.T * residual) @ X)
    return NetState(W=W_new, a=net.a, nu=net.nu, bias_mode=net.bias_mode,
                    t=net.t + 1, seed=net.seed)


def train(net: NetState, dataset: Dataset, eta: float, T: int,
          record_patterns: int = 0, record_weights: bool = False,
          stop_below: float | None = None) -> tuple[NetState, TrainTrace]:
    """Run T full-batch GD steps and record the trace.

    record_patterns=k stores the (n, m) sign pattern every k-th iteration
    (0 disables storage); flip-set sizes are maintained incrementally either
    way, so they never need the full history.  With `stop_below` set,
    training stops early once ||y - yhat||/sqrt(n) falls under it.
    Returns the final state together with the trace.
    """
    if T < 1:
        raise ValueError(f"iteration count must be >= 1, got {T}")
    X = design_matrix(dataset.features, net.bias_mode)
    y = dataset.responses
    n = dataset.n
    sqrt_n = math.sqrt(n)

    patterns = {} if record_patterns else None
    weights = [net.W] if record_weights else None
    p0 = (X @ net.W.T) > 0
    ever_flipped = np.zeros_like(p0)
    if record_patterns:
        patterns[0] = p0

    r = y - predictions(net, X)
    err = [np.linalg.norm(r) / sqrt_n]
    risk = [float(r @ r) / (2 * n)]
    flips = [np.zeros(n, dtype=np.int64)]
    early = False

    state = net
    for t in range(1, T + 1):
        state = gd_step(state, dataset, eta)
        pat = (X @ state.W.T) > 0
        ever_flipped |= pat != p0
        flips.append(ever_flipped.sum(axis=1))
        r = y - predictions(state, X)
        err.append(np.linalg.norm(r) / sqrt_n)
        risk.append(float(r @ r) / (2 * n))
        if record_patterns and t % record_patterns == 0:
            patterns[t] = pat
        if record_weights:
            weights.append(state.W)
        if stop_below is not None and err[-1] < stop_below:
            early = True
            break

    trace = TrainTrace(eta=eta, err_norm=np.array(err), risk=np.array(risk),
                       flip_counts=np.array(flips), early_stopped=early,
                       sign_patterns=patterns, weights=weights)
    return state, trace


def flip_sets(sign_patterns: dict, t: int) -> np.ndarray:
    """|F(x_i, t)|: neurons whose activation bit at x_i differed from its
    initial bit at any recorded iteration k <= t.

    Needs patterns recorded at every iteration 0..t.
    """
    missing = [k for k in range(t + 1) if k not in sign_patterns]
    if missing:
        raise ValueError(f"sign patterns missing for iterations {missing[:5]}")
    p0 = sign_patterns[0]
    ever = np.zeros_like(p0)
    for k in range(1, t + 1):
        ever |= sign_patterns[k] != p0
    return ever.sum(axis=1)


def save_trace(trace: TrainTrace, path) -> None:
    """CSV dump `t,err_norm,risk,max_flip,mean_flip`."""
    with open(path, "w") as fh:
        fh.write("t,err_norm,risk,max_flip,mean_flip\n")
        for t in range(len(trace.err_norm)):
            fc = trace.flip_counts[t]
            fh.write(f"{t},{trace.err_norm[t]:.17g},{trace.risk[t]:.17g},"
                     f"{int(fc.max())},{fc.mean():.17g}\n")


def save_weights(net: NetState, path) -> None:
    """Weight checkpoint: little-endian float64 rows after a text shape header."""
    with open(path, "wb") as fh:
        fh.write(f"{net.m} {net.dim}\n".encode())
        fh.write(net.W.astype("<f8").tobytes())


def load_weights(path) -> np.ndarray:
    with open(path, "rb") as fh:
        m, dim = map(int, fh.readline().split())
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(m, dim)
