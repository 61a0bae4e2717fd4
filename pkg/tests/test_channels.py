import numpy as np
import pytest

from spinqoc.channels import CHANNEL_KINDS, ChannelSpec, df_basis, dissipator, dissipator_matrix
from spinqoc.operators import SIGMA, bar_symmetrize, kron_all


def test_channel_spec_validation():
    with pytest.raises(ValueError):
        ChannelSpec("squeezing", 1.0)
    with pytest.raises(ValueError):
        ChannelSpec("dephasing", -0.5)


def test_dephasing_single_spin_decay_rate():
    # D[sigma_x] = -gamma/2 sigma_x for one spin under sigma_z/2 jumps
    spec = ChannelSpec("dephasing", 1.5)
    out = dissipator(spec, 1, SIGMA["x"])
    assert np.allclose(out, -0.75 * SIGMA["x"])
    assert np.allclose(dissipator(spec, 1, SIGMA["z"]), np.zeros((2, 2)))


def test_flipping_single_spin_decay_rate():
    # D[sigma_z] = -gamma/2 sigma_z under sigma_x/2 jumps
    spec = ChannelSpec("flipping", 2.0)
    assert np.allclose(dissipator(spec, 1, SIGMA["z"]), -1.0 * SIGMA["z"])
    assert np.allclose(dissipator(spec, 1, SIGMA["x"]), np.zeros((2, 2)))


def test_depolarization_uniform_contraction():
    # every traceless operator decays at the same rate under isotropic noise
    spec = ChannelSpec("depolarization", 1.5)
    rates = []
    for axis in ("x", "y", "z"):
        out = dissipator(spec, 1, SIGMA[axis])
        rates.append(out[np.abs(SIGMA[axis]) > 0][0] / SIGMA[axis][np.abs(SIGMA[axis]) > 0][0])
    assert np.allclose(rates, rates[0])
    assert np.real(rates[0]) < 0


def test_dissipator_trace_preserving_and_hermiticity():
    rng = np.random.default_rng(0)
    for kind in CHANNEL_KINDS[1:]:
        spec = ChannelSpec(kind, 1.5)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        out = dissipator(spec, 2, rho)
        assert abs(np.trace(out)) < 1e-12
        assert np.linalg.norm(out - out.conj().T) < 1e-12


def test_dissipator_matrix_matches_direct_application():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    for kind in CHANNEL_KINDS[1:]:
        spec = ChannelSpec(kind, 0.7)
        direct = dissipator(spec, 2, x)
        via_matrix = (dissipator_matrix(spec, 2) @ x.reshape(-1)).reshape(4, 4)
        assert np.allclose(direct, via_matrix)


def test_dissipator_matrix_negative_semidefinite():
    # Hermitian jump operators give a self-adjoint, non-positive generator
    for kind in CHANNEL_KINDS[1:]:
        spec = ChannelSpec(kind, 1.5)
        mat = dissipator_matrix(spec, 2)
        assert np.linalg.norm(mat - mat.conj().T) < 1e-12
        assert np.linalg.eigvalsh(mat).max() < 1e-12


def test_df_basis_dephasing():
    spec = ChannelSpec("dephasing", 1.5)
    basis = df_basis(spec, 2)
    assert len(basis) == 2
    for b in basis:
        assert np.linalg.norm(dissipator(spec, 2, b)) < 1e-12
    expected = [kron_all([SIGMA["z"], SIGMA["z"]]), bar_symmetrize([SIGMA["0"], SIGMA["z"]])]
    for b, e in zip(basis, expected):
        assert np.allclose(b, e)


def test_df_basis_flipping():
    spec = ChannelSpec("flipping", 1.5)
    basis = df_basis(spec, 2)
    assert len(basis) == 2
    for b in basis:
        assert np.linalg.norm(dissipator(spec, 2, b)) < 1e-12


def test_df_basis_depolarization_empty():
    assert df_basis(ChannelSpec("depolarization", 1.5), 2) == []
