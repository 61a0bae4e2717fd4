"""Self-contained oracle suite shared by the CLI `check` command and tests.

Every check pits the adjoint machinery against an independent route:
finite differences, matrix exponentials, step halving, or a closed-form
bound.  All instances are small so the whole suite runs in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import fisher, pmp
from .channels import ChannelSpec
from .dynamics import (
    ControlProtocol,
    ModelSpec,
    coherent_x_state,
    default_substeps,
    model_operators,
    propagate_costate_backward,
    propagate_forward,
    propagate_terminal,
)
from .optimize import OptimizerConfig, optimize_protocol

ALL_CHANNELS = (
    ChannelSpec("none", 0.0),
    ChannelSpec("depolarization", 1.5),
    ChannelSpec("dephasing", 1.5),
    ChannelSpec("flipping", 1.5),
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _model(channel: ChannelSpec, n_spins: int = 2, chi: float = 10.0) -> ModelSpec:
    return ModelSpec(N=n_spins, chi=chi, channel=channel)


def _random_protocol(rng, T, M, scale=3.0, u_max=0.0):
    return ControlProtocol(T, rng.uniform(-scale, scale, size=M), u_max)


def neg_qfi_of(model, u, substeps=None, rho0=None):
    rho_t, rho_w_t = propagate_terminal(model, u, rho0, substeps)
    return -fisher.qfi(rho_t, rho_w_t)


def fd_cost_gradient(model, u, segment, h=1e-5, substeps=None):
    """Central finite difference of the terminal cost w.r.t. one segment."""
    up = ControlProtocol(u.T, u.values.copy(), 0.0)
    um = ControlProtocol(u.T, u.values.copy(), 0.0)
    up.values[segment] += h
    um.values[segment] -= h
    return (neg_qfi_of(model, up, substeps) - neg_qfi_of(model, um, substeps)) / (2 * h)


def adjoint_gradient(model, u, substeps=None):
    traj = propagate_forward(model, u, substeps=substeps)
    boundary = fisher.qfi_costate_boundary(traj.rho[-1], traj.rho_omega[-1])
    costate = propagate_costate_backward(model, u, boundary, substeps)
    return pmp.cost_gradient(traj, costate, model, u), traj, costate


def check_gradient_identity(seed=0, channels=ALL_CHANNELS, n_protocols=1,
                            n_segments=3, T=0.5, M=10, tol=1e-4) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for channel in channels:
        model = _model(channel)
        for _ in range(n_protocols):
            u = _random_protocol(rng, T, M)
            grad, _, _ = adjoint_gradient(model, u)
            segs = rng.choice(M, size=min(n_segments, M), replace=False)
            for k in segs:
                fd = fd_cost_gradient(model, u, int(k))
                rel = abs(grad[k] - fd) / max(abs(fd), abs(grad[k]), 1e-12)
                worst = max(worst, rel)
    return CheckResult(
        "gradient identity (adjoint vs finite difference)",
        worst < tol,
        f"worst relative error {worst:.2e} (tol {tol})",
    )


def check_hoc_flatness(seed=1, tol_drift=1e-6, tol_fd=1e-3) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_drift = 0.0
    worst_fd = 0.0
    for channel in ALL_CHANNELS:
        model = _model(channel)
        T, M = 0.5, 5
        u_const = float(rng.uniform(-2, 2))
        u = ControlProtocol.constant(T, u_const, M)
        _, traj, costate = adjoint_gradient(model, u)
        hoc = pmp.hoc_series(traj, costate, model, u)
        s = traj.substeps
        scale = max(np.max(np.abs(hoc)), 1e-12)
        for k in range(M):
            chunk = hoc[k * s : k * s + s + 1]
            worst_drift = max(worst_drift, np.ptp(chunk) / scale)
        # H_oc against dC_Q/dT with the same constant control extended
        delta = 1e-3
        cost_p = neg_qfi_of(model, ControlProtocol.constant(T + delta, u_const, M), traj.substeps)
        cost_m = neg_qfi_of(model, ControlProtocol.constant(T - delta, u_const, M), traj.substeps)
        fd = (cost_p - cost_m) / (2 * delta)
        rel = abs(np.mean(hoc) - fd) / max(abs(fd), 1e-12)
        worst_fd = max(worst_fd, rel)
    ok = worst_drift < tol_drift and worst_fd < tol_fd
    return CheckResult(
        "c-Hamiltonian flatness and dC/dT oracle",
        ok,
        f"max drift {worst_drift:.2e} (tol {tol_drift}), dC/dT rel err {worst_fd:.2e} (tol {tol_fd})",
    )


def check_step_halving(seed=2, tol=1e-8) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for channel in ALL_CHANNELS:
        model = _model(channel)
        u = _random_protocol(rng, 0.5, 5)
        s = default_substeps(u.T, u.M)
        q1 = -neg_qfi_of(model, u, substeps=s)
        q2 = -neg_qfi_of(model, u, substeps=2 * s)
        worst = max(worst, abs(q2 - q1))
    return CheckResult(
        "step-halving convergence",
        worst < tol,
        f"max |QFI(2h) - QFI(h)| = {worst:.2e} (tol {tol})",
    )


def check_unitary_equivalence(seed=3, tol=1e-8) -> CheckResult:
    rng = np.random.default_rng(seed)
    model = _model(ChannelSpec("none", 0.0))
    u = _random_protocol(rng, 0.5, 8)
    traj = propagate_forward(model, u)
    ops = model_operators(model)
    rho = coherent_x_state(model.N)
    worst = 0.0
    for k in range(u.M):
        prop = expm(-1j * (ops.h0 + float(u.values[k]) * ops.h1) * u.dt)
        rho = prop @ rho @ prop.conj().T
        worst = max(worst, np.linalg.norm(traj.rho[k + 1] - rho))
    return CheckResult(
        "unitary-segment equivalence (channel none)",
        worst < tol,
        f"max Frobenius deviation {worst:.2e} (tol {tol})",
    )


def check_cfi_bound(seed=4, margin=-1e-9) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = np.inf
    for channel in ALL_CHANNELS:
        model = _model(channel)
        u = _random_protocol(rng, 0.8, 8)
        traj = propagate_forward(model, u)
        q = fisher.qfi(traj.rho[-1], traj.rho_omega[-1])
        for phi in rng.uniform(-1.0, 1.0, size=5):
            c = fisher.cfi(traj.rho[-1], traj.rho_omega[-1], float(phi))
            worst = min(worst, q - c)
    return CheckResult(
        "CFI <= QFI bound",
        worst >= margin,
        f"min QFI - CFI = {worst:.3e} (must be >= {margin})",
    )


def check_second_order_agreement(seed=5, tol=1e-3) -> CheckResult:
    rng = np.random.default_rng(seed)
    model = _model(ChannelSpec("flipping", 1.5))
    u = _random_protocol(rng, 0.5, 5)
    _, traj, costate = adjoint_gradient(model, u)
    gfg_a, ffg_a = pmp.second_order_quantities(traj, costate, model, u, "analytic_flipping")
    gfg_b, ffg_b = pmp.second_order_quantities(traj, costate, model, u, "bruteforce")
    scale = max(np.max(np.abs(gfg_a)), np.max(np.abs(ffg_a)), 1e-12)
    worst = max(np.max(np.abs(gfg_a - gfg_b)), np.max(np.abs(ffg_a - ffg_b))) / scale
    return CheckResult(
        "second-order quantities: analytic vs bruteforce (flipping)",
        worst < tol,
        f"worst relative deviation {worst:.2e} (tol {tol})",
    )


def check_controlled_beats_uncontrolled(seed=6) -> CheckResult:
    model = _model(ChannelSpec("dephasing", 1.5))
    T, M = 0.5, 10
    cfg = OptimizerConfig(max_iters=30, restarts=2, seed=seed)
    res = optimize_protocol(model, T, M, cfg, with_diagnostics=False)
    qfi_unc = -neg_qfi_of(model, ControlProtocol.constant(T, 0.0, M))
    ok = res.qfi >= qfi_unc - 1e-9
    return CheckResult(
        "controlled QFI >= uncontrolled QFI",
        ok,
        f"optimized {res.qfi:.6f} vs uncontrolled {qfi_unc:.6f}",
    )


def check_state_invariants(seed=7, n_protocols=10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_tr = worst_trw = worst_herm = 0.0
    worst_eig = np.inf
    for channel in ALL_CHANNELS:
        model = _model(channel)
        for _ in range(n_protocols):
            u = _random_protocol(rng, 0.5, 5)
            traj = propagate_forward(model, u)
            for r, w in zip(traj.rho, traj.rho_omega):
                worst_tr = max(worst_tr, abs(np.trace(r) - 1.0))
                worst_trw = max(worst_trw, abs(np.trace(w)))
                worst_herm = max(
                    worst_herm,
                    np.linalg.norm(r - r.conj().T),
                    np.linalg.norm(w - w.conj().T),
                )
                worst_eig = min(worst_eig, np.linalg.eigvalsh((r + r.conj().T) / 2).min())
    ok = worst_tr < 1e-8 and worst_trw < 1e-8 and worst_herm < 1e-8 and worst_eig > -1e-7
    return CheckResult(
        "trace / Hermiticity / positivity invariants",
        ok,
        f"|tr rho - 1| {worst_tr:.1e}, |tr rho_w| {worst_trw:.1e}, "
        f"herm {worst_herm:.1e}, min eig {worst_eig:.1e}",
    )


def run_all(seed: int = 0) -> list:
    return [
        check_gradient_identity(seed),
        check_hoc_flatness(seed + 1),
        check_step_halving(seed + 2),
        check_unitary_equivalence(seed + 3),
        check_cfi_bound(seed + 4),
        check_second_order_agreement(seed + 5),
        check_controlled_beats_uncontrolled(seed + 6),
        check_state_invariants(seed + 7),
    ]
