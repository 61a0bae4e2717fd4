"""Per-spin Lindblad dissipators and decoherence-free subspace utilities.

Three decoherence channels act identically on every spin:

* depolarization: rate gamma/3, jump operators sigma_alpha^(i)/2 for alpha in
  {x, y, z} on each site i,
* dephasing: rate gamma, jump operators sigma_z^(i)/2,
* flipping: rate gamma, jump operators sigma_x^(i)/2.

All jump operators are Hermitian, so the dissipator super-operator is
self-adjoint and negative semidefinite in the Hilbert-Schmidt sense.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .operators import SIGMA, bar_symmetrize, kron_all, site_operator

CHANNEL_KINDS = ("none", "depolarization", "dephasing", "flipping")


@dataclass(frozen=True)
class ChannelSpec:
    """Decoherence channel kind plus rate gamma (units 1/time)."""

    kind: str = "none"
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(
                f"unknown channel kind {self.kind!r}; expected one of {CHANNEL_KINDS}"
            )
        if self.gamma < 0:
            raise ValueError(f"channel rate must be >= 0, got {self.gamma}")


@lru_cache(maxsize=32)
def _weighted_jump_operators(kind: str, gamma: float, n_spins: int):
    """Jump operators with sqrt(rate) folded in, stacked as (n_ops, d, d).

    Also returns K = sum_k L_k^2 (jump operators are Hermitian), the
    anticommutator kernel of the dissipator.
    """
    dim = 2**n_spins
    ops = []
    if kind == "none" or gamma == 0.0:
        stack = np.zeros((0, dim, dim), dtype=complex)
        return stack, np.zeros((dim, dim), dtype=complex)
    if kind == "depolarization":
        rate = gamma / 3.0
        singles = [SIGMA[a] / 2.0 for a in ("x", "y", "z")]
    elif kind == "dephasing":
        rate = gamma
        singles = [SIGMA["z"] / 2.0]
    elif kind == "flipping":
        rate = gamma
        singles = [SIGMA["x"] / 2.0]
    else:  # pragma: no cover - guarded by ChannelSpec
        raise ValueError(kind)
    w = np.sqrt(rate)
    for site in range(n_spins):
        for s in singles:
            ops.append(w * site_operator(s, site, n_spins))
    stack = np.array(ops)
    k_mat = np.einsum("kij,kjl->il", stack, stack)
    return stack, k_mat


def dissipator(spec: ChannelSpec, n_spins: int, x: np.ndarray) -> np.ndarray:
    """Apply the channel dissipator: sum_k (L_k X L_k - 1/2 {L_k^2, X}).

    Works on a single matrix or on a stack of matrices (..., d, d).
    """
    x = np.asarray(x, dtype=complex)
    dim = 2**n_spins
    if x.shape[-2:] != (dim, dim):
        raise ValueError(f"operator has shape {x.shape}, expected (..., {dim}, {dim})")
    stack, k_mat = _weighted_jump_operators(spec.kind, spec.gamma, n_spins)
    if stack.shape[0] == 0:
        return np.zeros_like(x)
    jump = np.einsum("kij,...jl,klm->...im", stack, x, stack)
    return jump - 0.5 * (k_mat @ x + x @ k_mat)


def dissipator_matrix(spec: ChannelSpec, n_spins: int) -> np.ndarray:
    """Vectorized (row-major flatten) super-operator matrix of the dissipator.

    Hermitian and negative semidefinite because the jump operators are
    Hermitian.  Intended for spectrum tests and null-space computations;
    size is 4^N x 4^N.
    """
    dim = 2**n_spins
    eye = np.eye(dim)
    stack, k_mat = _weighted_jump_operators(spec.kind, spec.gamma, n_spins)
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for L in stack:
        out += np.kron(L, L.T)
    out -= 0.5 * (np.kron(k_mat, eye) + np.kron(eye, k_mat.T))
    return out


def df_basis(spec: ChannelSpec, n_spins: int = 2, tol: float = 1e-10) -> list:
    """Operators annihilated by the dissipator, excluding the identity.

    For N=2 the known analytic listings are returned (only the
    permutation-symmetric elements, which are the ones reachable from
    symmetric initial states).  For other N the null space of the vectorized
    dissipator is computed numerically and returned as an orthogonal set of
    Hermitian matrices.
    """
    if spec.kind == "none":
        return []
    if n_spins == 2:
        if spec.kind == "depolarization":
            return []
        if spec.kind == "dephasing":
            return [
                kron_all([SIGMA["z"], SIGMA["z"]]),
                bar_symmetrize([SIGMA["0"], SIGMA["z"]]),
            ]
        if spec.kind == "flipping":
            return [
                kron_all([SIGMA["x"], SIGMA["x"]]),
                bar_symmetrize([SIGMA["0"], SIGMA["x"]]),
            ]
    return _numeric_df_basis(spec, n_spins, tol)


def _numeric_df_basis(spec: ChannelSpec, n_spins: int, tol: float) -> list:
    dim = 2**n_spins
    mat = dissipator_matrix(spec, n_spins)
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2.0)
    scale = max(abs(w[0]), 1.0)
    null_vecs = v[:, np.abs(w) < tol * scale]
    # Remove the identity direction, then build a Hermitian orthogonal basis.
    ident = np.eye(dim, dtype=complex).reshape(-1) / np.sqrt(dim)
    coeffs = ident.conj() @ null_vecs
    null_vecs = null_vecs - np.outer(ident, coeffs)
    candidates = []
    for col in null_vecs.T:
        m = col.reshape(dim, dim)
        candidates.append((m + m.conj().T) / 2.0)
        candidates.append((m - m.conj().T) / 2.0j)
    basis: list[np.ndarray] = []
    for m in candidates:
        for b in basis:
            m = m - b * (np.vdot(b, m) / np.vdot(b, b))
        if np.linalg.norm(m) > 1e-7:
            basis.append(m)
    return basis
