"""Closed-form bound calculators: concentration radii, the rate/floor pair
(c0, c1), the over-parameterization floor on the width, and the
early-stopping horizon.  Everything here is plain arithmetic on the
operator spectrum; nothing is fitted.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .harmonics import OperatorEigs
from .relu_net import TrainTrace


@dataclass(frozen=True)
class TheoryBounds:
    """Bundle of the computed constants plus the inputs they came from."""

    c0: float
    c1: float
    m_min: int
    T: int
    eps_conc: float
    inputs: dict = field(default_factory=dict)


def concentration_eps(n: int, m: int, delta: float) -> float:
    """Two-term spectrum concentration radius,

        sqrt(log(2 n^2 / delta) / (2m)) + sqrt(8 log(4 / delta) / n).

    The first term covers the width randomness, the second the sample size.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return (math.sqrt(math.log(2.0 * n * n / delta) / (2.0 * m))
            + math.sqrt(8.0 * math.log(4.0 / delta) / n))


def rate_constants(op_eigs: OperatorEigs, ell: int, eps_approx: float,
                      nu: float, n: int, delta: float) -> tuple[float, float]:
    """Rate constant and error floor for a target captured by the top `ell`
    distinct operator eigenspaces up to sup-error eps_approx:

        c0 = (3/4) lambda_{m_ell},
        c1 = 8 sqrt(2) sqrt(log(2/delta)) / ((lambda_{m_ell} - lambda_{m_ell+1}) sqrt(n))
             + sqrt(2) eps_approx + 2 sqrt(2) nu.

    Warns (rather than errors) when n is below the concentration threshold
    max(256 log(2/delta) / gap^2, m_ell), since desk-scale n rarely clears
    the worst-case constants.
    """
    lam_top, lam_next, m_ell = op_eigs.principal_pair(ell)
    gap = lam_top - lam_next
    if gap <= 0:
        raise ValueError("zero eigengap at the requested cutoff")
    n_floor = max(256.0 * math.log(2.0 / delta) / gap**2, float(m_ell))
    if n <= n_floor:
        warnings.warn(f"n={n} is below the concentration threshold {n_floor:.3g}; "
                      "the computed constants are not certified", stacklevel=2)
    c0 = 0.75 * lam_top
    c1 = (8.0 * math.sqrt(2.0) * math.sqrt(math.log(2.0 / delta)) / (gap * math.sqrt(n))
          + math.sqrt(2.0) * eps_approx + 2.0 * math.sqrt(2.0) * nu)
    return c0, c1


def overparam_floor(c0: float, c1: float, eta: float, T: int, nu: float,
                    n: int, delta: float) -> int:
    """Width floor guaranteeing the linearized analysis:

        m >= max{ (32/c1^2) (log(2n/delta) B^2 + (4/nu^2) B^4),
                  (10/3)^2 log(2n/delta) },    B = 1/c0 + 2 eta T c1.
    """
    if not 0.0 < delta < 0.25:
        raise ValueError(f"delta must lie in (0, 1/4), got {delta}")
    if not 0.0 < c0 < 1.0:
        raise ValueError(f"rate constant must lie in (0, 1), got {c0}")
    if c1 <= 0 or eta <= 0 or nu <= 0 or T < 1:
        raise ValueError("c1, eta, nu must be positive and T >= 1")
    log_term = math.log(2.0 * n / delta)
    B = 1.0 / c0 + 2.0 * eta * T * c1
    first = (32.0 / c1**2) * (log_term * B**2 + (4.0 / nu**2) * B**4)
    second = (10.0 / 3.0) ** 2 * log_term
    return math.ceil(max(first, second))


def early_stop_T(c0: float, c1: float, eta: float) -> int:
    """Iteration horizon T = ceil(log(1/c1) / log(1/(1 - eta c0))), after
    which the error has decayed to the floor."""
    if not 0.0 < c1 < 1.0:
        raise ValueError(f"error floor must lie in (0, 1), got {c1}")
    if not 0.0 < eta * c0 < 1.0:
        raise ValueError(f"eta * c0 must lie in (0, 1), got {eta * c0}")
    return math.ceil(math.log(1.0 / c1) / math.log(1.0 / (1.0 - eta * c0)))


def asymptotic_error_floor(n: int, gap: float, delta: float) -> float:
    """Asymptotic error floor 16 sqrt(2 log(2/delta)) / (sqrt(n) gap) in the
    zero-approximation-error regime; equals twice the first term of c1."""
    if gap <= 0:
        raise ValueError("eigengap must be positive")
    return 16.0 * math.sqrt(2.0 * math.log(2.0 / delta)) / (math.sqrt(n) * gap)


def quadratic_regime_floor(n: int, op_eigs: OperatorEigs, ell: int,
                           delta: float = 0.05) -> TheoryBounds:
    """The full bound bundle under the zero-approximation-error substitutions
    nu = 1/sqrt(n), eta = 1, T = ceil(log(n * gap)), eps = 0."""
    lam_top, lam_next, m_ell = op_eigs.principal_pair(ell)
    gap = lam_top - lam_next
    nu = 1.0 / math.sqrt(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        c0, c1 = rate_constants(op_eigs, ell, eps_approx=0.0, nu=nu, n=n, delta=delta)
    T = math.ceil(math.log(n * gap))
    m_min = overparam_floor(c0, c1, eta=1.0, T=T, nu=nu, n=n, delta=delta)
    return TheoryBounds(
        c0=c0, c1=c1, m_min=m_min, T=T,
        eps_conc=concentration_eps(n, m_min, delta),
        inputs={"n": n, "delta": delta, "ell": ell, "m_ell": m_ell,
                "lam_top": lam_top, "lam_next": lam_next, "gap": gap,
                "nu": nu, "eta": 1.0, "eps_approx": 0.0},
    )


@dataclass(frozen=True)
class BoundVerdict:
    passed: bool
    first_violation: int | None
    max_excess: float


def bound_vs_trace(trace: TrainTrace, c0: float, c1: float, eta: float) -> BoundVerdict:
    """Check ||y - yhat(t)||/sqrt(n) <= (1 - eta c0)^t + 2 c1 on every
    recorded iteration; reports the first violating t, if any."""
    t = np.arange(len(trace.err_norm))
    bound = (1.0 - eta * c0) ** t + 2.0 * c1
    excess = trace.err_norm - bound
    bad = np.nonzero(excess > 0)[0]
    return BoundVerdict(passed=bad.size == 0,
                        first_violation=int(bad[0]) if bad.size else None,
                        max_excess=float(np.max(excess)))


def bounds_report(bounds: TheoryBounds) -> str:
    """Plain-text key=value block, one entry per line."""
    lines = [f"c0={bounds.c0:.17g}", f"c1={bounds.c1:.17g}",
             f"m_min={bounds.m_min}", f"T={bounds.T}",
             f"eps_conc={bounds.eps_conc:.17g}"]
    for k, v in bounds.inputs.items():
        lines.append(f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}")
    return "\n".join(lines) + "\n"
