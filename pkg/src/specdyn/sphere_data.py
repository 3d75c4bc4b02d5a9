"""Reproducible datasets: uniform points on the unit sphere, polynomial
targets normalized into [-1, 1], and the bias augmentation (x -> (x, 1)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng

# Substream layout under a target seed (see rng.AUX_STREAM).
_COEF_STREAM = rng.AUX_STREAM
_CAL_STREAM = rng.AUX_STREAM + 1

_CALIBRATION_SAMPLES = 10**4
_CALIBRATION_MARGIN = 1.05
_MIN_GAUSS_NORM = 1e-8
_MAX_REDRAWS = 100


@dataclass(frozen=True)
class FeatureSet:
    """n points on S^{d-1}, or their bias-augmented images (x, 1) in R^{d+1}."""

    d: int
    n: int
    points: np.ndarray
    seed: int
    augmented: bool = False

    def __post_init__(self):
        self.points.setflags(write=False)

    @property
    def dim(self) -> int:
        """Length of each stored point (d, or d+1 when augmented)."""
        return self.d + 1 if self.augmented else self.d

    def validate(self, tol: float = 1e-12) -> None:
        """Check unit norms, the augmentation coordinate, and pairwise non-parallelism."""
        base = self.points[:, : self.d]
        norms = np.linalg.norm(base, axis=1)
        if np.max(np.abs(norms - 1.0)) > tol:
            raise ValueError("feature norms deviate from 1 beyond tolerance")
        if self.augmented and not np.all(self.points[:, self.d] == 1.0):
            raise ValueError("augmented coordinate must be exactly 1")
        dots = np.abs(base @ base.T)
        np.fill_diagonal(dots, 0.0)
        if dots.size and dots.max() >= 1.0 - tol:
            raise ValueError("found a (nearly) parallel pair of feature vectors")


@dataclass(frozen=True)
class TargetFn:
    """Polynomial target of degree 1 or 2, scaled so |f(x)| <= 1 on the sphere.

    f(x) = scale * (<linear, x> + x^T quadratic x + offset); the quadratic
    part and offset are zero for degree 1, and the scale is calibrated from
    a Monte-Carlo sup estimate with a 5% safety margin.
    """

    degree: int
    d: int
    linear: np.ndarray
    quadratic: np.ndarray
    offset: float
    scale: float
    seed: int

    def __post_init__(self):
        self.linear.setflags(write=False)
        self.quadratic.setflags(write=False)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the target on rows of `points` (un-augmented coordinates)."""
        pts = np.atleast_2d(points)[:, : self.d]
        raw = pts @ self.linear + self.offset
        if self.degree == 2:
            raw = raw + np.einsum("ij,jk,ik->i", pts, self.quadratic, pts)
        return self.scale * raw


@dataclass(frozen=True)
class Dataset:
    """Features plus responses y_i = f(x_i), each guaranteed in [-1, 1]."""

    features: FeatureSet
    responses: np.ndarray
    target: TargetFn
    clamped: int = 0  # responses that fell outside [-1, 1] and were clipped

    def __post_init__(self):
        self.responses.setflags(write=False)

    @property
    def n(self) -> int:
        return self.features.n


def sample_uniform_sphere(n: int, d: int, seed: int) -> FeatureSet:
    """n i.i.d. uniform points on S^{d-1}, as normalized Gaussian vectors.

    Point i is drawn from the (seed, i) substream, so the first k points of
    any sample are independent of n.  Vectors with norm below 1e-8 are
    re-drawn from the same substream (a measure-zero safeguard).
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    points = np.empty((n, d))
    for i in range(n):
        gen = rng.substream(seed, i)
        for _ in range(_MAX_REDRAWS):
            g = rng.gaussians(gen, d)
            norm = np.linalg.norm(g)
            if norm >= _MIN_GAUSS_NORM:
                break
        else:
            raise RuntimeError("could not draw a usable Gaussian vector")
        points[i] = g / norm
    return FeatureSet(d=d, n=n, points=points, seed=seed)


def make_polynomial_target(degree: int, d: int, seed: int) -> TargetFn:
    """Random polynomial target with i.i.d. N(0,1) coefficients.

    Degree 1 is purely linear; degree 2 adds a symmetrized quadratic part
    and a constant offset.  The scale is 1 / (1.05 * sup |raw|) with the sup
    estimated over 10^4 fresh uniform sphere points.
    """
    if degree not in (1, 2):
        raise ValueError(f"target degree must be 1 or 2, got {degree}")
    gen = rng.substream(seed, _COEF_STREAM)
    linear = rng.gaussians(gen, d)
    quadratic = np.zeros((d, d))
    offset = 0.0
    if degree == 2:
        raw_q = rng.gaussians(gen, d * d).reshape(d, d)
        quadratic = (raw_q + raw_q.T) / 2.0
        offset = float(rng.gaussians(gen, 1)[0])

    cal = np.empty((_CALIBRATION_SAMPLES, d))
    for i in range(_CALIBRATION_SAMPLES):
        g = rng.gaussian_vector(seed, _CAL_STREAM + i, d)
        cal[i] = g / np.linalg.norm(g)
    raw = cal @ linear + offset
    if degree == 2:
        raw = raw + np.einsum("ij,jk,ik->i", cal, quadratic, cal)
    scale = 1.0 / (np.max(np.abs(raw)) * _CALIBRATION_MARGIN)
    return TargetFn(degree=degree, d=d, linear=linear, quadratic=quadratic,
                    offset=offset, scale=scale, seed=seed)


def build_dataset(target: TargetFn, features: FeatureSet) -> Dataset:
    """Responses y_i = f(x_i) on the un-augmented coordinates, clipped to [-1, 1]."""
    if target.d != features.d:
        raise ValueError(f"target dimension {target.d} != feature dimension {features.d}")
    y = target.evaluate(features.points)
    clamped = int(np.count_nonzero((y < -1.0) | (y > 1.0)))
    return Dataset(features=features, responses=np.clip(y, -1.0, 1.0),
                   target=target, clamped=clamped)


def augment_with_bias(features: FeatureSet) -> FeatureSet:
    """Append a constant coordinate 1 to every point, without renormalizing.

    Inner products become <x, s> + 1, which is exactly the argument of the
    biased kernel; the augmented points have norm sqrt(2).
    """
    if features.augmented:
        raise ValueError("features are already bias-augmented")
    pts = np.hstack([features.points, np.ones((features.n, 1))])
    return FeatureSet(d=features.d, n=features.n, points=pts,
                      seed=features.seed, augmented=True)


def save_dataset(dataset: Dataset, path) -> None:
    """Write the dataset as CSV (x_0..x_{d-1}, y) plus a `.meta` sidecar."""
    feats = dataset.features
    base = feats.points[:, : feats.d]
    header = ",".join(f"x_{j}" for j in range(feats.d)) + ",y"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(feats.n):
            row = [f"{v:.17g}" for v in base[i]] + [f"{dataset.responses[i]:.17g}"]
            fh.write(",".join(row) + "\n")
    meta = {
        "d": feats.d,
        "n": feats.n,
        "seed": feats.seed,
        "target_degree": dataset.target.degree,
        "target_seed": dataset.target.seed,
        "scale": f"{dataset.target.scale:.17g}",
    }
    with open(f"{path}.meta", "w") as fh:
        for k, v in meta.items():
            fh.write(f"{k}={v}\n")


def load_dataset_arrays(path) -> tuple[np.ndarray, np.ndarray]:
    """Read back a dataset CSV as (points, responses)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :-1], data[:, -1]
