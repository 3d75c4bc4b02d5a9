"""Arc-cosine kernel values, the empirical kernel matrix, and the four
activation-pattern Gram matrices that govern the prediction-error update.

For a step t -> t+1 with second-layer sign classes A = {j : a_j = +1} and
B = {j : a_j = -1}:

    Hp[i,i']  = <x_i, x_i'>/(nm) * #{j in A : active at (i', t) and (i, t)}
    Hpt[i,i'] = <x_i, x_i'>/(nm) * #{j in A : active at (i', t) and (i, t+1)}

and Hm / Hmt likewise over B.  The prediction error e(t) = y - yhat(t) then
satisfies, entrywise,

    (I - eta (Hpt + Hm)) e(t)  <=  e(t+1)  <=  (I - eta (Hp + Hmt)) e(t),

which `sandwich_check` verifies on actual GD runs.  The kernel matrix K is
the expectation of Hp + Hm over the weight initialization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .relu_net import NetState, design_matrix, gd_step, predictions
from .sphere_data import Dataset, FeatureSet


def kernel_value(u, biased: bool = False):
    """Kernel as a function of the inner product u of unit feature vectors.

    Unbiased: (u/2pi)(pi - arccos u); biased (networks with a bias unit):
    ((u+1)/2pi)(pi - arccos((u+1)/2)).  u is clamped to [-1, 1]; values
    materially outside (beyond 1e-12, well above the rounding of unit-vector
    dot products) are rejected.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(np.abs(u_arr) > 1.0 + 1e-12):
        raise ValueError("inner product outside [-1, 1] beyond clamp tolerance")
    u_arr = np.clip(u_arr, -1.0, 1.0)
    if biased:
        v = (u_arr + 1.0) / 2.0
        out = ((u_arr + 1.0) / (2.0 * math.pi)) * (math.pi - np.arccos(v))
    else:
        out = (u_arr / (2.0 * math.pi)) * (math.pi - np.arccos(u_arr))
    return out if np.ndim(u) else float(out)


@dataclass(frozen=True)
class KernelMatrix:
    """Empirical kernel matrix with entries K(x_i, x_j)/n."""

    n: int
    entries: np.ndarray
    biased: bool

    def __post_init__(self):
        self.entries.setflags(write=False)


def empirical_kernel_matrix(features: FeatureSet, biased: bool = False) -> KernelMatrix:
    """K[i,j] = kernel_value(<x_i, x_j>, biased) / n.

    The biased kernel takes the raw (un-augmented) inner products; the bias
    contribution is part of the kernel formula itself.
    """
    if features.augmented:
        raise ValueError("kernel matrix wants un-augmented features")
    gram = features.points @ features.points.T
    entries = kernel_value(gram, biased) / features.n
    entries = (entries + entries.T) / 2.0
    return KernelMatrix(n=features.n, entries=entries, biased=biased)


@dataclass(frozen=True)
class GramSet:
    """The four Gram matrices for one step transition t -> t+1.

    The label `t` names the transition: the matrices are built from the
    states at iterations t and t+1 (the update mapping e(t) to e(t+1)).
    Hp and Hm depend on the t-state only and are exactly symmetric PSD;
    the tilde variants mix both states and need not be symmetric.
    """

    t: int
    Hp: np.ndarray
    Hm: np.ndarray
    Hp_tilde: np.ndarray
    Hm_tilde: np.ndarray

    @property
    def H(self) -> np.ndarray:
        return self.Hp + self.Hm

    @property
    def M(self) -> np.ndarray:
        """Perturbation entering the upper bound: Hm_tilde - Hm."""
        return self.Hm_tilde - self.Hm

    @property
    def L(self) -> np.ndarray:
        """Perturbation entering the lower bound: Hp_tilde - Hp."""
        return self.Hp_tilde - self.Hp


def gram_matrices(net_t: NetState, net_t1: NetState, features: FeatureSet) -> GramSet:
    """Build the GramSet for the transition net_t -> net_t1.

    Passing net_t1 = net_t (a zero-stepsize transition) makes the tilde
    matrices coincide with Hp / Hm, which is how the time-t Gram matrix
    H(t) = Hp + Hm itself is obtained.

    The sums over neurons are 0/1 pattern products: with P the (n, m)
    activation pattern, the neuron count for Hp is P_A P_A^T restricted to
    the +1 sign class, computed as an exact integer-valued matmul.
    """
    if net_t.a is not net_t1.a and not np.array_equal(net_t.a, net_t1.a):
        raise ValueError("states disagree on the second layer")
    if net_t.dim != net_t1.dim:
        raise ValueError("states disagree on the weight dimension")
    X = design_matrix(features, net_t.bias_mode)
    n, m = features.n, net_t.m
    gram = X @ X.T
    gram = (gram + gram.T) / (2.0 * n * m)

    pat_t = ((X @ net_t.W.T) > 0).astype(float)
    pat_t1 = ((X @ net_t1.W.T) > 0).astype(float)
    pos = net_t.a > 0
    out = {}
    for name, mask in (("p", pos), ("m", ~pos)):
        p_t = pat_t[:, mask]
        p_t1 = pat_t1[:, mask]
        counts = p_t @ p_t.T                 # symmetric integer counts
        counts_tilde = p_t1 @ p_t.T          # row state t+1, column state t
        out[name] = gram * counts
        out[name + "t"] = gram * counts_tilde
    return GramSet(t=net_t.t, Hp=out["p"], Hm=out["m"],
                   Hp_tilde=out["pt"], Hm_tilde=out["mt"])


def h_matrix(net: NetState, features: FeatureSet) -> np.ndarray:
    """H(t) = Hp + Hm evaluated at the state `net` alone."""
    return gram_matrices(net, net, features).H


def sandwich_check(residual_t: np.ndarray, residual_t1: np.ndarray,
                   gramset: GramSet, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Entrywise slacks of the two-sided error-evolution bound.

    lower = e(t+1) - (I - eta (Hp_tilde + Hm)) e(t)
    upper = (I - eta (Hp + Hm_tilde)) e(t) - e(t+1)

    Both are >= 0 in exact arithmetic for residuals produced by an actual
    GD step with the same stepsize.
    """
    e_t = np.asarray(residual_t, dtype=float)
    e_t1 = np.asarray(residual_t1, dtype=float)
    if e_t.shape != e_t1.shape or e_t.shape[0] != gramset.Hp.shape[0]:
        raise ValueError("residual shapes do not match the GramSet")
    lower = e_t1 - (e_t - eta * ((gramset.Hp_tilde + gramset.Hm) @ e_t))
    upper = (e_t - eta * ((gramset.Hp + gramset.Hm_tilde) @ e_t)) - e_t1
    return lower, upper


@dataclass(frozen=True)
class PerturbationReport:
    """Spectral norms of the step perturbations against their flip-set ceiling."""

    t: int
    norm_M: float
    norm_L: float
    norm_H_drift: float      # ||H(1) - H(t+1)||
    norm_K_minus_H: float    # ||K - H(1)||
    ceiling: float           # sqrt((4/(m^2 n)) sum_i |F(x_i, t+1)|^2)

    @property
    def within_bounds(self) -> bool:
        return (self.norm_M <= self.ceiling / 2 + 1e-12
                and self.norm_L <= self.ceiling / 2 + 1e-12
                and self.norm_H_drift <= self.ceiling + 1e-12)


def perturbation_norms(gramset: GramSet, kernel_matrix: KernelMatrix,
                       flip_counts: np.ndarray, h_init: np.ndarray,
                       m: int) -> PerturbationReport:
    """Measure ||M||, ||L||, ||H(1) - H(t+1)||, ||K - H(1)|| and the flip ceiling.

    `flip_counts` must be |F(x_i, t+1)| for the gramset's transition t, i.e.
    cover sign changes up to and including the post-step state; `h_init` is
    the Gram matrix H(1) of the initial weights.  M and L are bounded by
    half the ceiling, the drift by the full ceiling.
    """
    n = kernel_matrix.n
    flip = np.asarray(flip_counts, dtype=float)
    ceiling = math.sqrt(4.0 / (m * m * n) * float(np.sum(flip**2)))
    report = PerturbationReport(
        t=gramset.t,
        norm_M=float(np.linalg.norm(gramset.M, 2)),
        norm_L=float(np.linalg.norm(gramset.L, 2)),
        norm_H_drift=float(np.linalg.norm(h_init - gramset.H, 2)),
        norm_K_minus_H=float(np.linalg.norm(kernel_matrix.entries - h_init, 2)),
        ceiling=ceiling,
    )
    if not report.within_bounds:
        raise AssertionError(f"flip-set perturbation ceiling violated: {report}")
    return report


def capture_gram_run(net: NetState, dataset: Dataset, eta: float, T: int):
    """Run T GD steps, yielding (gramset, residual_t, residual_t1, flip_counts)
    per transition; flip counts include the post-step state, matching what
    `perturbation_norms` expects."""
    X = design_matrix(dataset.features, net.bias_mode)
    y = dataset.responses
    p0 = (X @ net.W.T) > 0
    ever = np.zeros_like(p0)
    state = net
    r_t = y - predictions(state, X)
    for _ in range(T):
        nxt = gd_step(state, dataset, eta)
        r_t1 = y - predictions(nxt, X)
        gs = gram_matrices(state, nxt, dataset.features)
        ever |= ((X @ nxt.W.T) > 0) != p0
        yield gs, r_t, r_t1, ever.sum(axis=1)
        state, r_t = nxt, r_t1


def save_matrix(matrix: np.ndarray, path, compress: bool = False) -> None:
    """Row-major CSV dump with 17-significant-digit floats (optionally gzipped)."""
    import gzip

    opener = gzip.open if compress else open
    with opener(path, "wt") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
