"""Dense complex-matrix substrate: Pauli/collective-spin operators and helpers.

All operators are plain ``numpy`` arrays of dtype complex128.  The full
2^N-dimensional Hilbert space is used throughout; N is capped at 6 so the
largest matrices are 64 x 64 and dense linear algebra stays exact and cheap.
"""

from __future__ import annotations

import itertools
from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

MAX_SPINS = 6

SIGMA = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def pauli(axis) -> np.ndarray:
    """Return the 2x2 identity (axis '0' or 0) or Pauli matrix sigma_axis."""
    key = str(axis)
    if key not in SIGMA:
        raise ValueError(f"unknown Pauli axis {axis!r}; expected one of 0, x, y, z")
    return SIGMA[key].copy()


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor product of a sequence of matrices, left to right."""
    return reduce(np.kron, mats)


def site_operator(op: np.ndarray, site: int, n_spins: int) -> np.ndarray:
    """Embed a single-spin operator at `site` (0-based) in the N-spin space."""
    factors = [SIGMA["0"]] * n_spins
    factors[site] = op
    return kron_all(factors)


def _check_spin_count(n_spins: int) -> None:
    if not (1 <= n_spins <= MAX_SPINS):
        raise ValueError(f"spin count must be in [1, {MAX_SPINS}], got {n_spins}")


def collective_spin(n_spins: int, axis: str) -> np.ndarray:
    """Collective spin J_axis = sum_n sigma_axis^(n) / 2 on 2^N dimensions."""
    _check_spin_count(n_spins)
    if axis not in ("x", "y", "z"):
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    half = SIGMA[axis] / 2.0
    dim = 2**n_spins
    out = np.zeros((dim, dim), dtype=complex)
    for site in range(n_spins):
        out += site_operator(half, site, n_spins)
    return out


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def bar_symmetrize(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Sum of tensor products over all distinct arrangements of the factors.

    Identical factors (exact array equality) are treated as a multiset, so
    each distinct arrangement is counted exactly once; e.g. with factors
    (sx, sz, sz) the result has three terms.
    """
    factors = [np.asarray(f, dtype=complex) for f in factors]
    for f in factors:
        if f.shape != (2, 2):
            raise ValueError("bar_symmetrize factors must be 2x2 matrices")
    # Label equal factors with a shared key so permutations of identical
    # matrices collapse to one arrangement.
    keys: list[int] = []
    seen: list[np.ndarray] = []
    for f in factors:
        for k, g in enumerate(seen):
            if np.array_equal(f, g):
                keys.append(k)
                break
        else:
            seen.append(f)
            keys.append(len(seen) - 1)
    arrangements = sorted(set(itertools.permutations(keys)))
    dim = 2 ** len(factors)
    out = np.zeros((dim, dim), dtype=complex)
    for arr in arrangements:
        out += kron_all([seen[k] for k in arr])
    return out


class HermitianEigen(NamedTuple):
    """Ascending eigenvalues and unitary of column eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def hermitian_eig(a: np.ndarray, tol: float = 1e-9) -> HermitianEigen:
    """Eigendecomposition of a Hermitian matrix.

    Rejects input whose anti-Hermitian part exceeds ``tol`` relative to its
    norm.  The strictly Hermitian average (A + A^dag)/2 is diagonalized so the
    result is deterministic and exactly real-valued.
    """
    a = np.asarray(a, dtype=complex)
    norm = np.linalg.norm(a)
    if norm > 0 and np.linalg.norm(a - dagger(a)) > tol * norm:
        raise ValueError("matrix is not Hermitian within tolerance")
    w, u = np.linalg.eigh((a + dagger(a)) / 2.0)
    return HermitianEigen(w, u)
