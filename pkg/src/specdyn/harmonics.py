"""Sphere harmonics machinery for the limiting kernel operator.

For features uniform on S^{d-1}, the integral operator of the (biased)
arc-cosine kernel acts as multiplication by beta_ell on the space of
degree-ell homogeneous harmonic polynomials (dimension N_ell).  This module
computes:

* Gegenbauer polynomials C_ell^(lam) with lam = (d-2)/2, by recurrence and
  by the defining sum (two independent routes);
* N_ell in exact integer arithmetic;
* high-order derivatives of arccos and of the biased kernel profile
  h(u) = ((u+1)/2pi)(pi - arccos((u+1)/2)), via truncated Taylor-series
  (jet) arithmetic;
* the eigenvalues beta_ell from the derivative series
      beta_ell = lam * sum_k h^{(ell+2k)}(0) / (2^{ell+2k} k! (lam)_{ell+k+1})
  and, independently, from Gauss-Legendre quadrature of the Gegenbauer
  expansion coefficients alpha_ell (beta_ell = alpha_ell * lam/(ell+lam));
* zonal projection matrices, the empirical realization of the projectors
  onto each harmonic space via the addition theorem.

The derivative series has algebraically decaying terms (~ k^-(2+lam)), so a
plain truncation cannot reach 1e-6 relative accuracy at small d.  After the
partial sum we therefore fit the terms' inverse-power asymptotics and
complete the tail with Hurwitz zeta values; both steps use only the series'
own terms, keeping the route independent of the quadrature oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

_INT64_MAX = 2**63 - 1

# Longest jet we ever need: series cap 200 -> derivative order ell + 2*200.
_JET_LEN = 640


# ---------------------------------------------------------------------------
# Gegenbauer polynomials
# ---------------------------------------------------------------------------

def gegenbauer(ell: int, lam: float, u) -> np.ndarray | float:
    """C_ell^(lam)(u) by the three-term recurrence.

    ell * C_ell = 2(ell+lam-1) u C_{ell-1} - (ell+2lam-2) C_{ell-2},
    C_0 = 1, C_1 = 2 lam u.
    """
    _check_gegenbauer_params(ell, lam)
    u_arr = np.asarray(u, dtype=float)
    c_prev = np.ones_like(u_arr)
    if ell == 0:
        return c_prev if np.ndim(u) else float(c_prev)
    c_cur = 2.0 * lam * u_arr
    for n in range(2, ell + 1):
        c_prev, c_cur = c_cur, (2.0 * (n + lam - 1.0) * u_arr * c_cur
                                - (n + 2.0 * lam - 2.0) * c_prev) / n
    return c_cur if np.ndim(u) else float(c_cur)


def gegenbauer_explicit(ell: int, lam: float, u) -> np.ndarray | float:
    """C_ell^(lam)(u) by the defining sum; dual-route check for `gegenbauer`.

    C_ell(u) = sum_{k<=ell/2} (-1)^k (lam)_{ell-k} / (k! (ell-2k)!) (2u)^{ell-2k},
    where (lam)_{ell-k} = Gamma(ell-k+lam)/Gamma(lam) is a rising factorial.
    """
    _check_gegenbauer_params(ell, lam)
    u_arr = np.asarray(u, dtype=float)
    total = np.zeros_like(u_arr)
    for k in range(ell // 2 + 1):
        coef = ((-1) ** k * pochhammer(lam, ell - k)
                / (math.factorial(k) * math.factorial(ell - 2 * k)))
        total = total + coef * (2.0 * u_arr) ** (ell - 2 * k)
    return total if np.ndim(u) else float(total)


def _check_gegenbauer_params(ell: int, lam: float) -> None:
    if ell < 0:
        raise ValueError(f"polynomial degree must be >= 0, got {ell}")
    if lam <= -0.5:
        raise ValueError(f"Gegenbauer index must exceed -1/2, got {lam}")


def pochhammer(a: float, k: int) -> float:
    """Rising factorial (a)_k = a (a+1) ... (a+k-1), with (a)_0 = 1."""
    out = 1.0
    for i in range(k):
        out *= a + i
    return out


def harmonic_dimension(ell: int, d: int) -> int:
    """Dimension N_ell = (2ell+d-2)(ell+d-3)! / (ell!(d-2)!) of the space of
    degree-ell homogeneous harmonic polynomials on S^{d-1}; exact integers."""
    if d < 3:
        raise ValueError(f"dimension must be >= 3, got {d}")
    if ell < 0:
        raise ValueError(f"degree must be >= 0, got {ell}")
    n = (2 * ell + d - 2) * math.factorial(ell + d - 3) \
        // (math.factorial(ell) * math.factorial(d - 2))
    if n > _INT64_MAX:
        raise OverflowError(f"N_ell for ell={ell}, d={d} exceeds the 64-bit range")
    return n


# ---------------------------------------------------------------------------
# Taylor-jet arithmetic (dense truncated power series)
# ---------------------------------------------------------------------------

def _jet_mul(a: np.ndarray, b: np.ndarray, nmax: int) -> np.ndarray:
    return np.convolve(a[: nmax + 1], b[: nmax + 1])[: nmax + 1]


def _jet_invsqrt(g: np.ndarray, nmax: int) -> np.ndarray:
    """Series s with s^2 * g = 1, by Newton iteration s <- s (3 - g s^2) / 2."""
    if g[0] <= 0.0:
        raise ValueError("inverse square root of a series needs a positive constant term")
    s = np.zeros(nmax + 1)
    s[0] = 1.0 / math.sqrt(g[0])
    correct = 1
    while correct <= nmax:
        gs2 = _jet_mul(g, _jet_mul(s, s, nmax), nmax)
        s = 0.5 * (3.0 * s - _jet_mul(s, gs2, nmax))
        correct *= 2
    return s


@lru_cache(maxsize=None)
def _arccos_jet(u0: float, nmax: int) -> np.ndarray:
    """Taylor coefficients of arccos about u0: arccos(u0 + v) = sum_k a_k v^k.

    d/dv arccos(u0+v) = -(1 - (u0+v)^2)^{-1/2}; the jet of the right-hand
    side comes from series inverse-square-root, then integrates term by term.
    """
    g = np.zeros(nmax + 1)
    g[0] = 1.0 - u0 * u0
    if nmax >= 1:
        g[1] = -2.0 * u0
    if nmax >= 2:
        g[2] = -1.0
    s = _jet_invsqrt(g, nmax)
    out = np.empty(nmax + 1)
    out[0] = math.acos(u0)
    out[1:] = -s[:-1] / np.arange(1, nmax + 1)
    out.setflags(write=False)  # cached; callers must copy before writing
    return out


@lru_cache(maxsize=None)
def _h_jet(nmax: int) -> np.ndarray:
    """Taylor coefficients about 0 of h(u) = ((u+1)/2pi)(pi - arccos((u+1)/2)).

    Composition with v(u) = (u+1)/2 rescales the arccos jet at 1/2 by 2^-k.
    """
    ac = _arccos_jet(0.5, nmax) / 2.0 ** np.arange(nmax + 1)
    inner = -ac
    inner[0] += math.pi
    poly = np.zeros(nmax + 1)
    poly[0] = poly[1] = 1.0 / (2.0 * math.pi)
    out = _jet_mul(poly, inner, nmax)
    out.setflags(write=False)  # cached; callers must copy before writing
    return out


def arccos_derivatives(k_max: int, u0: float = 0.5) -> np.ndarray:
    """Derivatives arccos^{(k)}(u0) for k = 0..k_max, from the Taylor jet."""
    if not -1.0 < u0 < 1.0:
        raise ValueError(f"expansion point must lie in (-1, 1), got {u0}")
    if k_max > 170:
        raise ValueError("derivative values overflow float64 beyond order 170")
    jet = _arccos_jet(u0, k_max)
    facts = np.array([math.factorial(k) for k in range(k_max + 1)])
    return jet * facts


def h_coefficients(k_max: int) -> np.ndarray:
    """Derivatives h_k = h^{(k)}(0) of the biased kernel profile, k = 0..k_max.

    h_0 = 1/3 and, for k >= 1,

        h_k = (1/2) 1{k=1}
              - (1/(pi 2^k)) (k arccos^{(k-1)}(1/2) + (1/2) arccos^{(k)}(1/2)).
    """
    if k_max > 170:
        raise ValueError("derivative values overflow float64 beyond order 170")
    ac = arccos_derivatives(k_max)
    out = np.empty(k_max + 1)
    out[0] = 1.0 / 3.0
    for k in range(1, k_max + 1):
        out[k] = (0.5 if k == 1 else 0.0) \
            - (k * ac[k - 1] + 0.5 * ac[k]) / (math.pi * 2.0 ** k)
    return out


# ---------------------------------------------------------------------------
# Operator eigenvalues: derivative series and quadrature
# ---------------------------------------------------------------------------

_SERIES_CAP = 200
_TAIL_FIT_TERMS = 5


def beta_eigenvalue(ell: int, d: int, tol: float = 1e-10) -> float:
    """Eigenvalue beta_ell of the biased-kernel integral operator, d >= 3.

    Sums lam * h^{(ell+2k)}(0) / (2^{ell+2k} k! (lam)_{ell+k+1}) over k with
    lam = (d-2)/2.  Terms are evaluated in the log domain (the derivatives
    alone overflow float64 near order 170).  Summation stops once three
    consecutive terms fall below tol * |partial sum|, or at the 200-term
    cap; the remaining tail, which decays like k^-(2+lam), is completed from
    a least-squares fit of the last computed terms to an inverse-power
    expansion, summed with Hurwitz zeta values.
    """
    if d < 3:
        raise ValueError(f"dimension must be >= 3, got {d}")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if ell > _JET_LEN - 2 * _SERIES_CAP:
        raise ValueError(f"degree {ell} exceeds the configured jet length")
    lam = (d - 2) / 2.0
    cjet = _h_jet(_JET_LEN)
    log_gamma_lam = math.lgamma(lam)

    terms = np.zeros(_SERIES_CAP + 1)
    total = 0.0
    small_streak = 0
    kstop = _SERIES_CAP
    for k in range(_SERIES_CAP + 1):
        j = ell + 2 * k
        c = cjet[j]
        if c != 0.0:
            # term = c * j! / (2^j k! (lam)_{ell+k+1}), all in log space
            lg = (math.lgamma(j + 1) - j * math.log(2.0) - math.lgamma(k + 1)
                  - (math.lgamma(lam + ell + k + 1) - log_gamma_lam))
            terms[k] = math.copysign(math.exp(lg + math.log(abs(c))), c)
        total += terms[k]
        small_streak = small_streak + 1 if abs(terms[k]) < tol * abs(total) else 0
        if small_streak >= 3:
            kstop = k
            break

    return lam * (total + _series_tail(terms[: kstop + 1], 2.0 + lam))


def _series_tail(terms: np.ndarray, decay: float) -> float:
    """Tail sum_{k>K} t_k for terms t_k ~ sum_r a_r k^-(decay+r).

    Fits the a_r by least squares on the second half of the computed terms
    and evaluates the completed tail with Hurwitz zeta functions.
    """
    kmax = len(terms) - 1
    if kmax < 2 * _TAIL_FIT_TERMS:
        return 0.0
    ks = np.arange(kmax // 2, kmax + 1, dtype=float)
    basis = np.stack([ks ** (-(decay + r)) for r in range(_TAIL_FIT_TERMS)], axis=1)
    coef, *_ = np.linalg.lstsq(basis, terms[kmax // 2:], rcond=None)
    return float(sum(coef[r] * _hurwitz_zeta(decay + r, kmax + 1)
                     for r in range(_TAIL_FIT_TERMS)))


def kernel_profile(u, biased: bool = True) -> np.ndarray:
    """The kernel as a function of the inner product u (see kernels.kernel_value)."""
    u = np.asarray(u, dtype=float)
    if biased:
        return ((u + 1.0) / (2.0 * math.pi)) * (np.pi - np.arccos(np.clip((u + 1.0) / 2.0, -1.0, 1.0)))
    return (u / (2.0 * math.pi)) * (np.pi - np.arccos(np.clip(u, -1.0, 1.0)))


@lru_cache(maxsize=None)
def _panel_rule(nodes_per_panel: int = 64):
    return np.polynomial.legendre.leggauss(nodes_per_panel)


def _composite_quad(f, a: float, b: float, panels: int) -> float:
    """Composite Gauss-Legendre quadrature of f over [a, b]."""
    x, w = _panel_rule()
    edges = np.linspace(a, b, panels + 1)
    half = (edges[1] - edges[0]) / 2.0
    mids = (edges[:-1] + edges[1:]) / 2.0
    pts = (mids[:, None] + half * x[None, :]).ravel()
    return float(np.sum(f(pts).reshape(panels, -1) * w[None, :]) * half)


def alpha_by_quadrature(ell: int, d: int, biased: bool = True) -> float:
    """Gegenbauer expansion coefficient alpha_ell of the kernel profile.

    alpha_ell = int_-1^1 h(u) C_ell(u) w(u) du / int_-1^1 C_ell(u)^2 w(u) du
    with weight w(u) = (1-u^2)^(lam-1/2).  Substituting u = cos(theta) turns
    the weight into sin(theta)^(2lam), removing the endpoint singularity;
    the integral is then done by composite Gauss-Legendre over [0, pi],
    starting at 256 nodes and doubling until two successive estimates agree
    to 1e-10 relative (cap 4096 nodes).  The denominator is cross-checked
    against its closed form pi 2^(1-2lam) Gamma(ell+2lam) / (ell! (ell+lam)
    Gamma(lam)^2).
    """
    if d < 3:
        raise ValueError(f"dimension must be >= 3, got {d}")
    lam = (d - 2) / 2.0

    def numerator(theta):
        u = np.cos(theta)
        return kernel_profile(u, biased) * gegenbauer(ell, lam, u) * np.sin(theta) ** (2 * lam)

    def denominator(theta):
        u = np.cos(theta)
        return gegenbauer(ell, lam, u) ** 2 * np.sin(theta) ** (2 * lam)

    num = _doubling_quad(numerator)
    den = _doubling_quad(denominator)
    den_closed = (math.pi * 2.0 ** (1 - 2 * lam) * math.gamma(ell + 2 * lam)
                  / (math.factorial(ell) * (ell + lam) * math.gamma(lam) ** 2))
    if abs(den - den_closed) > 1e-9 * abs(den_closed):
        raise ArithmeticError(
            f"quadrature norm {den} disagrees with closed form {den_closed}")
    return num / den_closed


def _doubling_quad(f, start_nodes: int = 256, cap: int = 4096) -> float:
    # A noise floor proportional to int |f| keeps the stopping rule
    # meaningful for integrals that vanish by orthogonality: their float
    # residue is roundoff relative to the integrand's magnitude, not to the
    # (zero) value.
    panels = start_nodes // 64
    prev = _composite_quad(f, 0.0, math.pi, panels)
    scale = _composite_quad(lambda t: np.abs(f(t)), 0.0, math.pi, panels)
    while panels * 64 < cap:
        panels *= 2
        cur = _composite_quad(f, 0.0, math.pi, panels)
        if abs(cur - prev) <= max(1e-10 * abs(cur), 1e-13 * scale, 1e-300):
            return cur
        prev = cur
    raise ArithmeticError("quadrature failed to converge within the node cap")


# ---------------------------------------------------------------------------
# Assembled operator spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorEigs:
    """Per-degree eigenvalues of the limiting integral operator.

    `entries` holds (ell, beta_ell, N_ell, alpha_ell) for ell = 0..ell_max.
    Distinct eigenvalues and cumulative multiplicities m_ell are derived by
    sorting the beta's (with their multiplicities), not from the degree
    order, although for the biased kernel the two coincide empirically.
    """

    d: int
    lam: float
    entries: tuple
    biased: bool
    tol: float

    @property
    def betas(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries])

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([e[2] for e in self.entries])

    def expanded(self, count: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Multiplicity-expanded eigenvalues sorted descending, with degrees."""
        vals = np.concatenate([np.full(e[2], e[1]) for e in self.entries])
        degs = np.concatenate([np.full(e[2], e[0], dtype=int) for e in self.entries])
        order = np.argsort(-vals, kind="stable")
        vals, degs = vals[order], degs[order]
        if count is not None:
            if count > len(vals):
                raise ValueError(
                    f"need {count} operator eigenvalues but only {len(vals)} expanded")
            vals, degs = vals[:count], degs[:count]
        return vals, degs

    def distinct(self) -> tuple[np.ndarray, np.ndarray]:
        """(mu, m) with mu the distinct eigenvalues descending and m the
        cumulative multiplicities: m[i] counts eigenvalues >= mu[i]."""
        order = np.argsort(-self.betas, kind="stable")
        mu = self.betas[order]
        cum = np.cumsum(self.multiplicities[order])
        return mu, cum

    def principal_pair(self, ell: int) -> tuple[float, float, int]:
        """(lambda_{m_ell}, lambda_{m_ell + 1}, m_ell) for the top ell
        distinct eigenvalues."""
        mu, cum = self.distinct()
        if not 1 <= ell < len(mu):
            raise ValueError(f"need 1 <= ell < {len(mu)}, got {ell}")
        return float(mu[ell - 1]), float(mu[ell]), int(cum[ell - 1])


def operator_eigs(d: int, ell_max: int, tol: float = 1e-10, biased: bool = True) -> OperatorEigs:
    """Assemble (ell, beta_ell, N_ell, alpha_ell) for ell = 0..ell_max.

    The biased kernel uses the derivative series for beta and derives alpha
    through beta = alpha * lam / (ell + lam), which keeps the stored pair
    exactly consistent; `alpha_by_quadrature` stays available as the
    independent cross-check.  The unbiased kernel has no derivative series
    here, so its eigenvalues come from quadrature alone.
    """
    lam = (d - 2) / 2.0
    entries = []
    for ell in range(ell_max + 1):
        if biased:
            beta = beta_eigenvalue(ell, d, tol)
            alpha = beta * (ell + lam) / lam
        else:
            alpha = alpha_by_quadrature(ell, d, biased=False)
            beta = alpha * lam / (ell + lam)
        entries.append((ell, beta, harmonic_dimension(ell, d), alpha))
    return OperatorEigs(d=d, lam=lam, entries=tuple(entries), biased=biased, tol=tol)


def zonal_projection_matrix(features, ell: int, d: int | None = None) -> np.ndarray:
    """Empirical projector onto the degree-ell harmonics.

    (Z_ell)_{kk'} = ((ell+lam)/lam) C_ell^(lam)(<x_k, x_k'>) / n; by the
    addition theorem this equals (1/n) sum_i Y_{ell,i}(x_k) Y_{ell,i}(x_k'),
    so no explicit harmonic basis is ever constructed.  Requires
    un-augmented unit features.
    """
    if features.augmented:
        raise ValueError("zonal projection needs un-augmented features")
    if d is not None and d != features.d:
        raise ValueError(f"dimension mismatch: {d} != features.d = {features.d}")
    if features.d < 3:
        raise ValueError("zonal projection needs ambient dimension >= 3")
    lam = (features.d - 2) / 2.0
    gram = np.clip(features.points @ features.points.T, -1.0, 1.0)
    return ((ell + lam) / lam) * gegenbauer(ell, lam, gram) / features.n


def save_operator_eigs(eigs: OperatorEigs, path) -> None:
    """CSV dump `ell,beta,N,alpha`."""
    with open(path, "w") as fh:
        fh.write("ell,beta,N,alpha\n")
        for ell, beta, n_ell, alpha in eigs.entries:
            fh.write(f"{ell},{beta:.17g},{n_ell},{alpha:.17g}\n")
