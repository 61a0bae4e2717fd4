"""Forward/backward propagation of the augmented state and costate pair.

The forward variables are (rho, rho_omega) where rho_omega is the parameter
derivative of the density matrix, sourced by -i[J_z, rho].  The costates
(lam, lam_omega) obey the adjoint equations, with the dissipator entering
with a minus sign and lam driven by -i[J_z, lam_omega].

Integration is fixed-step classical RK4 with `substeps` steps per
piecewise-constant control segment.  The dynamics is linear in the state, so
for small Hilbert spaces the RK4 update is applied as the (mathematically
identical) degree-4 Taylor polynomial of the vectorized generator, which is
much faster than forming the stage matrices in Python; for larger spaces the
stage form is used to avoid 4^N x 4^N super-operators.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channels import ChannelSpec, dissipator, dissipator_matrix
from .operators import MAX_SPINS, collective_spin, hermitian_eig

# Vectorized-generator fast path is used when the Hilbert-space dimension is
# at most this (augmented generator is then at most 128 x 128).
_FAST_PATH_MAX_DIM = 8

# Target RK4 step so that chi * dt <= 0.01 at chi = 10.
_DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class ModelSpec:
    """Twist-and-turn model: H = chi J_z^2 + omega J_z + u(t) J_x plus channel."""

    N: int
    chi: float
    omega: float = 0.0
    channel: ChannelSpec = field(default_factory=ChannelSpec)

    def __post_init__(self):
        if not (1 <= self.N <= MAX_SPINS):
            raise ValueError(f"spin count must be in [1, {MAX_SPINS}], got {self.N}")

    @property
    def dim(self) -> int:
        return 2**self.N


@dataclass(frozen=True)
class ControlProtocol:
    """Piecewise-constant control on a uniform grid over [0, T].

    ``u_max = 0`` means unconstrained; otherwise every value must satisfy
    |u_k| <= u_max.
    """

    T: float
    values: np.ndarray
    u_max: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.atleast_1d(np.asarray(self.values, dtype=float)))
        if self.T <= 0:
            raise ValueError(f"total time must be positive, got {self.T}")
        if self.values.size == 0:
            raise ValueError("control protocol needs at least one segment")
        if self.u_max < 0:
            raise ValueError("amplitude bound must be >= 0")
        if self.u_max > 0 and np.any(np.abs(self.values) > self.u_max * (1 + 1e-12)):
            raise ValueError("control values exceed the amplitude bound")

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def dt(self) -> float:
        return self.T / self.M

    def grid(self) -> np.ndarray:
        """Segment boundary times, M+1 points."""
        return np.linspace(0.0, self.T, self.M + 1)

    def midpoints(self) -> np.ndarray:
        return (np.arange(self.M) + 0.5) * self.dt

    @staticmethod
    def constant(T: float, value: float, M: int, u_max: float = 0.0) -> "ControlProtocol":
        return ControlProtocol(T, np.full(M, float(value)), u_max)


def default_substeps(T: float, M: int) -> int:
    """Substeps per segment so the RK4 step is at most min(1e-3, dt/4)."""
    n = max(4, math.ceil((T / M) / _DEFAULT_DT))
    return n + (n % 2)  # even count so Simpson quadrature applies per segment


def coherent_x_state(n_spins: int) -> np.ndarray:
    """Projector onto the maximum-eigenvalue eigenvector of J_x."""
    w, u = hermitian_eig(collective_spin(n_spins, "x"))
    vec = u[:, -1]
    # Fix the global phase: first nonzero amplitude real positive.
    idx = np.argmax(np.abs(vec) > 1e-12)
    vec = vec * np.exp(-1j * np.angle(vec[idx]))
    return np.outer(vec, vec.conj())


def hl_state_density(n_spins: int) -> np.ndarray:
    """Projector onto (|m_z=N/2> + |m_z=-N/2>)/sqrt(2) (the GHZ state)."""
    dim = 2**n_spins
    vec = np.zeros(dim, dtype=complex)
    vec[0] = vec[-1] = 1.0 / np.sqrt(2.0)
    return np.outer(vec, vec.conj())


@dataclass
class AugmentedTrajectory:
    """(rho, rho_omega) sampled at segment boundaries plus the fine RK4 grid."""

    times: np.ndarray
    rho: np.ndarray
    rho_omega: np.ndarray
    fine_times: np.ndarray
    fine_rho: np.ndarray
    fine_rho_omega: np.ndarray
    substeps: int


@dataclass
class CostateTrajectory:
    """(lam, lam_omega) on the same grids as the forward trajectory."""

    times: np.ndarray
    lam: np.ndarray
    lam_omega: np.ndarray
    fine_times: np.ndarray
    fine_lam: np.ndarray
    fine_lam_omega: np.ndarray
    substeps: int


class ModelOperators:
    """Cached matrices for one model: Hamiltonian pieces and generators."""

    def __init__(self, model: ModelSpec):
        self.model = model
        self.dim = model.dim
        self.jx = collective_spin(model.N, "x")
        self.jy = collective_spin(model.N, "y")
        self.jz = collective_spin(model.N, "z")
        self.h0 = model.chi * (self.jz @ self.jz) + model.omega * self.jz
        self.h1 = self.jx

    def dissipate(self, x: np.ndarray) -> np.ndarray:
        return dissipator(self.model.channel, self.model.N, x)

    # ---- vectorized generators (fast path) -------------------------------
    @staticmethod
    def _ad(h: np.ndarray) -> np.ndarray:
        """Super-operator of X -> -i[H, X] on row-major flattened X."""
        eye = np.eye(h.shape[0])
        return -1j * (np.kron(h, eye) - np.kron(eye, h.T))

    @property
    def generators(self):
        """(G0, G1) for the forward pair and (C0, C1) for the costate pair.

        Each acts on the concatenation [vec(first), vec(second)].
        """
        if not hasattr(self, "_gen"):
            d2 = self.dim**2
            a0 = self._ad(self.h0)
            a1 = self._ad(self.h1)
            dm = dissipator_matrix(self.model.channel, self.model.N)
            src = self._ad(self.jz)  # X -> -i[J_z, X]
            zero = np.zeros((d2, d2), dtype=complex)
            g0 = np.block([[a0 + dm, zero], [src, a0 + dm]])
            g1 = np.block([[a1, zero], [zero, a1]])
            c0 = np.block([[a0 - dm, src], [zero, a0 - dm]])
            c1 = np.block([[a1, zero], [zero, a1]])
            self._gen = (g0, g1, c0, c1)
        return self._gen


@lru_cache(maxsize=64)
def _cached_operators(model: ModelSpec) -> ModelOperators:
    return ModelOperators(model)


def model_operators(model: ModelSpec) -> ModelOperators:
    return _cached_operators(model)


def _rk4_step_matrix(gen: np.ndarray, h: float) -> np.ndarray:
    """One RK4 step of y' = G y as a matrix (exact for linear dynamics)."""
    eye = np.eye(gen.shape[0], dtype=complex)
    g2 = gen @ gen
    g3 = g2 @ gen
    g4 = g3 @ gen
    return eye + h * gen + (h**2 / 2.0) * g2 + (h**3 / 6.0) * g3 + (h**4 / 24.0) * g4


def _rhs_forward(ops: ModelOperators, y: np.ndarray, u: float) -> np.ndarray:
    h = ops.h0 + u * ops.h1
    dy = -1j * (h @ y - y @ h) + ops.dissipate(y)
    dy[1] += -1j * (ops.jz @ y[0] - y[0] @ ops.jz)
    return dy


def _rhs_costate(ops: ModelOperators, y: np.ndarray, u: float) -> np.ndarray:
    h = ops.h0 + u * ops.h1
    dy = -1j * (h @ y - y @ h) - ops.dissipate(y)
    dy[0] += -1j * (ops.jz @ y[1] - y[1] @ ops.jz)
    return dy


def _rk4_step(rhs, ops, y, u, h):
    k1 = rhs(ops, y, u)
    k2 = rhs(ops, y + 0.5 * h * k1, u)
    k3 = rhs(ops, y + 0.5 * h * k2, u)
    k4 = rhs(ops, y + h * k3, u)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _propagate(model, u: ControlProtocol, y0_pair, substeps, costate, channel_sign=1.0):
    """Shared engine.  Returns fine-grid array of shape (n_fine, 2, d, d).

    For the costate pass the segments are traversed in reverse with a negative
    step; the returned array is already in forward time order.
    """
    ops = model_operators(model)
    dim = ops.dim
    s = substeps
    m = u.M
    h = u.dt / s
    n_fine = m * s + 1
    out = np.empty((n_fine, 2, dim, dim), dtype=complex)
    y = np.array(y0_pair, dtype=complex)

    if costate:
        seg_order = range(m - 1, -1, -1)
        h = -h
        out[-1] = y
    else:
        seg_order = range(m)
        out[0] = y

    use_fast = dim <= _FAST_PATH_MAX_DIM
    if use_fast:
        g0, g1, c0, c1 = ops.generators
        base, ctrl = (c0, c1) if costate else (g0, g1)
        if costate and channel_sign != -1.0:
            # Test hook: override the dissipator sign in the costate equations
            # (physical sign is -1, already baked into the cached generator).
            dm = dissipator_matrix(model.channel, model.N)
            d2 = dim**2
            zero = np.zeros((d2, d2))
            base = base + (1.0 + channel_sign) * np.block([[dm, zero], [zero, dm]])
        yv = y.reshape(2 * dim * dim)
        step_cache: dict[float, np.ndarray] = {}
        for k in seg_order:
            uk = float(u.values[k])
            if uk not in step_cache:
                step_cache[uk] = _rk4_step_matrix(base + uk * ctrl, h)
            p = step_cache[uk]
            for j in range(s):
                yv = p @ yv
                idx = k * s + (s - 1 - j) if costate else k * s + j + 1
                out[idx] = yv.reshape(2, dim, dim)
    else:
        rhs = _rhs_costate if costate else _rhs_forward
        if costate and channel_sign != -1.0:
            def rhs(ops_, y_, u_, _inner=_rhs_costate):  # noqa: ANN001
                return _inner(ops_, y_, u_) + (1.0 + channel_sign) * ops_.dissipate(y_)
        for k in seg_order:
            uk = float(u.values[k])
            for j in range(s):
                y = _rk4_step(rhs, ops, y, uk, h)
                idx = k * s + (s - 1 - j) if costate else k * s + j + 1
                out[idx] = y

    if not np.all(np.isfinite(out[0 if costate else -1])):
        raise RuntimeError(
            "non-finite values during integration; the RK4 step is too large"
        )
    return out


def propagate_terminal(
    model: ModelSpec,
    u: ControlProtocol,
    rho0: np.ndarray | None = None,
    substeps: int | None = None,
):
    """Terminal (rho(T), rho_omega(T)) without storing the trajectory.

    Same RK4 discretization as :func:`propagate_forward`; used by cost-only
    evaluations inside line searches.
    """
    if substeps is None:
        substeps = default_substeps(u.T, u.M)
    if rho0 is None:
        rho0 = coherent_x_state(model.N)
    ops = model_operators(model)
    dim = ops.dim
    h = u.dt / substeps
    y = np.stack([np.asarray(rho0, dtype=complex), np.zeros((dim, dim), dtype=complex)])
    if dim <= _FAST_PATH_MAX_DIM:
        g0, g1, _, _ = ops.generators
        yv = y.reshape(2 * dim * dim)
        step_cache: dict[float, np.ndarray] = {}
        for k in range(u.M):
            uk = float(u.values[k])
            if uk not in step_cache:
                step_cache[uk] = _rk4_step_matrix(g0 + uk * g1, h)
            p = step_cache[uk]
            for _ in range(substeps):
                yv = p @ yv
        y = yv.reshape(2, dim, dim)
    else:
        for k in range(u.M):
            uk = float(u.values[k])
            for _ in range(substeps):
                y = _rk4_step(_rhs_forward, ops, y, uk, h)
    if not np.all(np.isfinite(y)):
        raise RuntimeError("non-finite values during integration; the RK4 step is too large")
    return y[0], y[1]


def propagate_forward(
    model: ModelSpec,
    u: ControlProtocol,
    rho0: np.ndarray | None = None,
    substeps: int | None = None,
) -> AugmentedTrajectory:
    """Integrate (rho, rho_omega) from rho(0)=rho0, rho_omega(0)=0 to T."""
    if substeps is None:
        substeps = default_substeps(u.T, u.M)
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if rho0 is None:
        rho0 = coherent_x_state(model.N)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (model.dim, model.dim):
        raise ValueError(f"rho0 has shape {rho0.shape}, expected {(model.dim, model.dim)}")

    y0 = np.stack([rho0, np.zeros_like(rho0)])
    fine = _propagate(model, u, y0, substeps, costate=False)
    fine_times = np.linspace(0.0, u.T, u.M * substeps + 1)
    sel = slice(None, None, substeps)
    traj = AugmentedTrajectory(
        times=fine_times[sel].copy(),
        rho=fine[sel, 0].copy(),
        rho_omega=fine[sel, 1].copy(),
        fine_times=fine_times,
        fine_rho=fine[:, 0],
        fine_rho_omega=fine[:, 1],
        substeps=substeps,
    )
    min_eig = min(np.linalg.eigvalsh((r + r.conj().T) / 2).min() for r in traj.rho)
    if min_eig < -1e-7:
        warnings.warn(
            f"density matrix lost positivity (min eigenvalue {min_eig:.2e}); "
            "consider more substeps",
            RuntimeWarning,
            stacklevel=2,
        )
    return traj


def propagate_costate_backward(
    model: ModelSpec,
    u: ControlProtocol,
    boundary: tuple[np.ndarray, np.ndarray],
    substeps: int | None = None,
    _channel_sign: float = -1.0,
) -> CostateTrajectory:
    """Integrate (lam, lam_omega) from the terminal boundary down to t=0.

    ``_channel_sign`` is a test hook; the physical value -1 puts the
    dissipator into the costate equations with a minus sign.
    """
    if substeps is None:
        substeps = default_substeps(u.T, u.M)
    lam_t, lam_omega_t = (np.asarray(b, dtype=complex) for b in boundary)
    y0 = np.stack([lam_t, lam_omega_t])
    fine = _propagate(model, u, y0, substeps, costate=True, channel_sign=_channel_sign)
    fine_times = np.linspace(0.0, u.T, u.M * substeps + 1)
    sel = slice(None, None, substeps)
    return CostateTrajectory(
        times=fine_times[sel].copy(),
        lam=fine[sel, 0].copy(),
        lam_omega=fine[sel, 1].copy(),
        fine_times=fine_times,
        fine_lam=fine[:, 0],
        fine_lam_omega=fine[:, 1],
        substeps=substeps,
    )


def step_pair(
    model: ModelSpec,
    rho_pair: np.ndarray,
    lam_pair: np.ndarray,
    u: float,
    h: float,
    nsub: int,
):
    """Advance state and costate pairs by time h (either sign) at constant u.

    Used by the brute-force second-order diagnostics, which re-propagate both
    pairs over a short window around each evaluation time.
    """
    ops = model_operators(model)
    dt = h / nsub
    y, z = np.array(rho_pair, dtype=complex), np.array(lam_pair, dtype=complex)
    for _ in range(nsub):
        y = _rk4_step(_rhs_forward, ops, y, u, dt)
        z = _rk4_step(_rhs_costate, ops, z, u, dt)
    return y, z
