"""Symmetric logarithmic derivative, QFI/CFI costs and costate boundaries.

The SLD solves rho_omega = (L rho + rho L)/2.  All eigenbasis divisions are
masked with a relative rank threshold so pure and rank-deficient states are
well defined: eigenvalue pairs with lambda_i + lambda_j <= tol * Tr(rho)
contribute zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .operators import SIGMA, bar_symmetrize, dagger, hermitian_eig, kron_all

DEFAULT_RANK_TOL = 1e-10


@dataclass
class SldResult:
    """SLD operator plus the mask of retained eigen-pairs."""

    L_omega: np.ndarray
    rank_mask: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _eig_frame(rho: np.ndarray, tol: float):
    w, u = hermitian_eig(rho)
    trace = float(np.real(np.trace(rho)))
    pair_sums = w[:, None] + w[None, :]
    mask = pair_sums > tol * max(trace, np.finfo(float).tiny)
    inv = np.where(mask, 1.0 / np.where(mask, pair_sums, 1.0), 0.0)
    return w, u, mask, inv


def sld(rho: np.ndarray, rho_omega: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> SldResult:
    """Symmetric logarithmic derivative with masked eigen-pairs."""
    w, u, mask, inv = _eig_frame(rho, tol)
    rw = dagger(u) @ rho_omega @ u
    l_eig = 2.0 * rw * inv
    l_op = u @ l_eig @ dagger(u)
    l_op = (l_op + dagger(l_op)) / 2.0
    return SldResult(l_op, mask, w, u)


def qfi(rho: np.ndarray, rho_omega: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> float:
    """Quantum Fisher information Tr[rho L^2]; the terminal cost is -QFI."""
    res = sld(rho, rho_omega, tol)
    value = np.trace(rho @ res.L_omega @ res.L_omega)
    return float(np.real(value))


def sld_partials(rho: np.ndarray, rho_omega: np.ndarray, tol: float = DEFAULT_RANK_TOL):
    """Four-index partials dL[i,j,a,b] = dL_ij / d(rho_ab), and w.r.t. rho_omega.

    Solved entrywise in the eigenbasis of rho (each (a, b) sub-problem is a
    diagonal Sylvester system), then rotated back on all four indices.
    Memory is dim^4, intended for dim <= 16.
    """
    dim = rho.shape[0]
    if dim > 16:
        raise ValueError("sld_partials builds dim^4 arrays; dim > 16 not supported")
    w, u, mask, inv = _eig_frame(rho, tol)
    rw = dagger(u) @ rho_omega @ u
    lt = 2.0 * rw * inv

    eye = np.eye(dim)
    # dL_ij/drho_ab = -(delta_ia L_bj + L_ia delta_jb) / (w_i + w_j), masked
    dl_dr = -(
        np.einsum("ia,bj->ijab", eye, lt) + np.einsum("ia,jb->ijab", lt, eye)
    ) * inv[:, :, None, None]
    # dL_ij/drho_omega_ab = 2 delta_ia delta_jb / (w_i + w_j), masked
    dl_dw = 2.0 * np.einsum("ia,jb->ijab", eye, eye) * inv[:, :, None, None]

    def rotate(t):
        return np.einsum("iI,jJ,aA,bB,IJAB->ijab", u, u.conj(), u.conj(), u, t, optimize=True)

    return rotate(dl_dr), rotate(dl_dw)


def qfi_costate_boundary(
    rho: np.ndarray, rho_omega: np.ndarray, tol: float = DEFAULT_RANK_TOL
):
    """Terminal costates for the cost C_Q = -QFI.

    The costate matrix is the transpose of the entrywise partial-derivative
    array: lam[b, a] = dC_Q / d(rho_ab).  Both returned matrices are Hermitian.
    """
    res = sld(rho, rho_omega, tol)
    l_op = res.L_omega
    dl_dr, dl_dw = sld_partials(rho, rho_omega, tol)

    term_r = np.einsum("ij,jkab,ki->ab", rho, dl_dr, l_op, optimize=True)
    term_r += np.einsum("ij,jk,kiab->ab", rho, l_op, dl_dr, optimize=True)
    term_w = np.einsum("ij,jkab,ki->ab", rho, dl_dw, l_op, optimize=True)
    term_w += np.einsum("ij,jk,kiab->ab", rho, l_op, dl_dw, optimize=True)

    lam = -((l_op @ l_op) + term_r.T)
    lam_omega = -term_w.T
    lam = (lam + dagger(lam)) / 2.0
    lam_omega = (lam_omega + dagger(lam_omega)) / 2.0
    return lam, lam_omega


@lru_cache(maxsize=8)
def x_measurement_basis(n_spins: int) -> np.ndarray:
    """Product basis of single-spin sigma_x eigenstates, columns |m_x>.

    Every column is an eigenvector of J_x; the product structure removes the
    degeneracy ambiguity of the collective eigenbasis.
    """
    h = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)
    return kron_all([h] * n_spins)


def _jz_diagonal(n_spins: int) -> np.ndarray:
    diag = np.zeros(2**n_spins)
    for site in range(n_spins):
        pattern = np.array([0.5, -0.5])
        reps_outer = 2**site
        reps_inner = 2 ** (n_spins - site - 1)
        diag += np.tile(np.repeat(pattern, reps_inner), reps_outer)
    return diag


def _rotated_measurement_diagonals(rho, rho_omega, phi, n_spins):
    phase = np.exp(-1j * _jz_diagonal(n_spins) * phi)
    rot = phase[:, None] * np.conj(phase)[None, :]  # R X R^dag entrywise
    u = x_measurement_basis(n_spins)
    rt = dagger(u) @ (rho * rot) @ u
    rwt = dagger(u) @ (rho_omega * rot) @ u
    return np.real(np.diag(rt)), np.real(np.diag(rwt))


def cfi(
    rho: np.ndarray,
    rho_omega: np.ndarray,
    phi: float = 0.0,
    tol: float = DEFAULT_RANK_TOL,
) -> float:
    """Classical Fisher information of the sigma_x product measurement.

    The state is first rotated by exp(-i J_z phi); probabilities below the
    rank threshold are dropped from the sum.
    """
    n_spins = int(round(np.log2(rho.shape[0])))
    p, q = _rotated_measurement_diagonals(rho, rho_omega, phi, n_spins)
    keep = p > tol
    return float(np.sum(q[keep] ** 2 / p[keep]))


def cfi_costate_boundary(
    rho: np.ndarray,
    rho_omega: np.ndarray,
    phi: float = 0.0,
    tol: float = DEFAULT_RANK_TOL,
):
    """Terminal costates for the cost C_Q = -CFI(phi).

    Diagonal in the measurement basis, then conjugated back through the
    measurement unitary and the phase rotation.
    """
    n_spins = int(round(np.log2(rho.shape[0])))
    p, q = _rotated_measurement_diagonals(rho, rho_omega, phi, n_spins)
    keep = p > tol
    lam_d = np.where(keep, q**2 / np.where(keep, p**2, 1.0), 0.0)
    lam_w_d = np.where(keep, -2.0 * q / np.where(keep, p, 1.0), 0.0)
    u = x_measurement_basis(n_spins)
    phase = np.exp(+1j * _jz_diagonal(n_spins) * phi)
    rot = phase[:, None] * np.conj(phase)[None, :]
    lam = (u @ np.diag(lam_d) @ dagger(u)) * rot
    lam_omega = (u @ np.diag(lam_w_d) @ dagger(u)) * rot
    return lam, lam_omega


@dataclass(frozen=True)
class AsymptoticCoeffs:
    """Decoherence-free-subspace coefficients of the long-time 2-spin state."""

    a_z: float = 0.0
    b_z: float = 0.0
    a_x: float = 0.0


def extract_asymptotic_coeffs(rho: np.ndarray, rho_omega: np.ndarray) -> AsymptoticCoeffs:
    """Hilbert-Schmidt coefficients on the 2-spin DF operators."""
    if rho.shape != (4, 4):
        raise ValueError("asymptotic coefficients are defined for N=2 states")
    szz = kron_all([SIGMA["z"], SIGMA["z"]])
    sxx = kron_all([SIGMA["x"], SIGMA["x"]])
    bar_z = bar_symmetrize([SIGMA["0"], SIGMA["z"]])
    return AsymptoticCoeffs(
        a_z=float(np.real(np.trace(rho @ szz))),
        b_z=float(np.real(np.trace(rho_omega @ bar_z))) / 8.0,
        a_x=float(np.real(np.trace(rho @ sxx))),
    )


def asymptotic_qfi(kind: str, coeffs: AsymptoticCoeffs, gamma: float) -> float:
    """Closed-form long-time QFI per channel (2-spin DF subspace)."""
    if kind == "dephasing":
        return 32.0 * coeffs.b_z**2 / (1.0 + coeffs.a_z)
    if kind == "flipping":
        return 8.0 * coeffs.a_x**2 / gamma**2
    if kind == "depolarization":
        return 0.0  # no DF subspace; everything decays
    raise ValueError(f"no asymptotic QFI for channel kind {kind!r}")


def asymptotic_cfi_formula(n_spins: int, gamma: float, phi: float) -> float:
    """Closed-form CFI(phi) of the saturated flipping-channel state."""
    c = np.cos(phi) ** (2 * n_spins)
    return float(4.0 / gamma**2 * n_spins**2 * np.tan(phi) ** 2 * c / (1.0 - c))
