"""Symmetric eigendecomposition and the spectrum-side diagnostics:
eigenvalue concentration, the linearized GD error predictor, spectral
coefficients of the target on the empirical eigenbasis, tail energies, and
the empirical eigenspace-alignment estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .harmonics import OperatorEigs, zonal_projection_matrix
from .kernels import KernelMatrix
from .sphere_data import FeatureSet


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted descending; optional orthonormal eigenvectors.

    Eigenvector columns are sign-normalized so their largest-magnitude
    component is positive, making the decomposition deterministic.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    source: str = "other"   # "H" | "K" | "other"

    @property
    def n(self) -> int:
        return len(self.eigenvalues)


def sym_eig(S: np.ndarray, want_vectors: bool = True, source: str = "other") -> Spectrum:
    """Full eigendecomposition of a symmetric matrix.

    Rejects inputs whose asymmetry exceeds 1e-12.  Backed by the dense
    symmetric eigensolver (LAPACK); output is reordered to descending
    eigenvalues and vectors are sign-normalized.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if S.size and np.max(np.abs(S - S.T)) > 1e-12:
        raise ValueError("matrix is not symmetric within 1e-12")
    if want_vectors:
        vals, vecs = np.linalg.eigh(S)
        vals, vecs = vals[::-1].copy(), vecs[:, ::-1]
        picks = np.argmax(np.abs(vecs), axis=0)
        signs = np.sign(vecs[picks, np.arange(vecs.shape[1])])
        signs[signs == 0] = 1.0
        return Spectrum(eigenvalues=vals, eigenvectors=vecs * signs, source=source)
    vals = np.linalg.eigvalsh(S)[::-1].copy()
    return Spectrum(eigenvalues=vals, eigenvectors=None, source=source)


@dataclass(frozen=True)
class SweepEntry:
    d: int
    n: int
    m: int
    seed: int
    lam_min: float


def lambda_min_sweep(d: int, n_list, m_rule, seeds) -> list[SweepEntry]:
    """Smallest eigenvalue of the initial Gram matrix H across sample sizes.

    For each n and seed: draw n uniform sphere points, initialize a width
    m_rule(n) network, and record lambda_min of H = Hp + Hm at the initial
    weights.  m_rule may also be an integer factor (m = factor * n).
    """
    from .kernels import h_matrix
    from .relu_net import init_network
    from .sphere_data import sample_uniform_sphere

    rule = m_rule if callable(m_rule) else (lambda n, k=int(m_rule): k * n)
    out = []
    for n in n_list:
        for seed in seeds:
            feats = sample_uniform_sphere(n, d, seed)
            net = init_network(rule(n), d, nu=1.0, bias_mode=False, seed=seed)
            H = h_matrix(net, feats)
            lam_min = float(np.linalg.eigvalsh(H)[0])
            out.append(SweepEntry(d=d, n=n, m=rule(n), seed=seed, lam_min=lam_min))
    return out


@dataclass(frozen=True)
class ConcentrationReport:
    sup_deviation: float
    bound: float
    n: int
    delta: float

    @property
    def passed(self) -> bool:
        return self.sup_deviation <= self.bound


def concentration_check(spectrum_K: Spectrum, op_eigs: OperatorEigs,
                        n: int, delta: float = 0.05) -> ConcentrationReport:
    """Compare the empirical kernel spectrum against the operator spectrum.

    sup_i |lambda_i - lambdahat_i| over i <= n is checked against
    sqrt(8 log(4/delta) / n), the sample-size part of the concentration
    bound (K is already the initialization expectation, so the width term
    does not apply).
    """
    if spectrum_K.n < n:
        raise ValueError(f"spectrum has {spectrum_K.n} eigenvalues, need {n}")
    lam_op, _ = op_eigs.expanded(count=n)
    lam_emp = spectrum_K.eigenvalues[:n]
    sup = float(np.max(np.abs(lam_op - lam_emp)))
    bound = math.sqrt(8.0 * math.log(4.0 / delta) / n)
    return ConcentrationReport(sup_deviation=sup, bound=bound, n=n, delta=delta)


def linearized_error_curve(kernel_matrix: KernelMatrix, y: np.ndarray,
                           yhat0: np.ndarray, eta: float, T: int) -> np.ndarray:
    """||(I - eta K)^t (y - yhat(0))|| / sqrt(n) for t = 0..T.

    Computed by repeated mat-vecs; no matrix power is ever formed.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"stepsize must lie in (0, 1], got {eta}")
    K = kernel_matrix.entries
    v = np.asarray(y, dtype=float) - np.asarray(yhat0, dtype=float)
    sqrt_n = math.sqrt(kernel_matrix.n)
    out = np.empty(T + 1)
    out[0] = np.linalg.norm(v) / sqrt_n
    for t in range(1, T + 1):
        v = v - eta * (K @ v)
        out[t] = np.linalg.norm(v) / sqrt_n
    return out


@dataclass(frozen=True)
class SpectralCoeffs:
    """Coefficients of the response vector on the empirical eigenbasis.

    values[i] = <phihat_i, f>_emp = (1/sqrt(n)) <uhat_i, y>, where the
    empirical inner product averages over the sample points and
    phihat_i = sqrt(n) uhat_i.  Their squares sum to ||y||^2 / n.
    """

    values: np.ndarray
    eigenvalues: np.ndarray


def spectral_coeffs(spectrum: Spectrum, y: np.ndarray) -> SpectralCoeffs:
    if spectrum.eigenvectors is None:
        raise ValueError("spectral coefficients need eigenvectors")
    y = np.asarray(y, dtype=float)
    vals = (spectrum.eigenvectors.T @ y) / math.sqrt(len(y))
    return SpectralCoeffs(values=vals, eigenvalues=spectrum.eigenvalues.copy())


def tail_energy(coeffs: SpectralCoeffs, cutoff: int, eta: float, t: int) -> float:
    """sum_{i > cutoff} (1 - eta lambda_i)^{2t} coeff_i^2."""
    if cutoff > len(coeffs.values):
        raise ValueError("cutoff exceeds the number of coefficients")
    lam = coeffs.eigenvalues[cutoff:]
    c = coeffs.values[cutoff:]
    return float(np.sum((1.0 - eta * lam) ** (2 * t) * c**2))


@dataclass(frozen=True)
class AlignmentRow:
    ell: int
    m_ell: int
    alignment: float
    ceiling: float


def eigenspace_alignment(spectrum: Spectrum, features: FeatureSet,
                         op_eigs: OperatorEigs, ell_max: int,
                         delta: float = 0.05) -> list[AlignmentRow]:
    """Cross-energy between trailing empirical and leading operator eigenspaces.

    For each ell, estimates sum_{i > m_ell} sum_{j <= m_ell}
    <phihat_i, phi_j>_emp^2, where phi_j spans the top ell distinct
    operator eigenspaces.  Summing the harmonic basis of degree ell' by the
    addition theorem turns the inner sum into a zonal quadratic form:
    sum_{j in degree ell'} <phihat_i, phi_j>_emp^2 = uhat_i^T Z_ell' uhat_i,
    so the estimate needs no explicit harmonic basis and no sampling.  The
    reported ceiling is 64 lamhat_{m_ell+1} log(2/delta) /
    (lam_{m_ell} (lam_{m_ell} - lam_{m_ell+1})^2 n).
    """
    if spectrum.eigenvectors is None:
        raise ValueError("eigenspace alignment needs eigenvectors")
    _, degs = op_eigs.expanded()
    n = features.n
    rows = []
    for ell in range(1, ell_max + 1):
        lam_top, lam_next, m_ell = op_eigs.principal_pair(ell)
        if m_ell >= n:
            break
        lead_degrees = sorted(set(degs[:m_ell]))
        Z = sum(zonal_projection_matrix(features, int(ld)) for ld in lead_degrees)
        tail = spectrum.eigenvectors[:, m_ell:]
        alignment = float(np.sum(tail * (Z @ tail)))
        lam_hat_next = float(spectrum.eigenvalues[m_ell])  # (m_ell+1)-th, 0-based
        ceiling = (64.0 * lam_hat_next * math.log(2.0 / delta)
                   / (lam_top * (lam_top - lam_next) ** 2 * n))
        rows.append(AlignmentRow(ell=ell, m_ell=m_ell, alignment=alignment,
                                 ceiling=ceiling))
    return rows


def save_spectrum(spectrum: Spectrum, path) -> None:
    """CSV dump `rank,eigenvalue`."""
    with open(path, "w") as fh:
        fh.write("rank,eigenvalue\n")
        for i, v in enumerate(spectrum.eigenvalues, start=1):
            fh.write(f"{i},{v:.17g}\n")


def save_alignment(rows: list[AlignmentRow], path) -> None:
    """CSV dump `ell,m_ell,alignment,ceiling`."""
    with open(path, "w") as fh:
        fh.write("ell,m_ell,alignment,ceiling\n")
        for r in rows:
            fh.write(f"{r.ell},{r.m_ell},{r.alignment:.17g},{r.ceiling:.17g}\n")
