"""Acceptance suite: one test per criterion, each registering a PASS/FAIL
line that the terminal summary prints.

These run the full physics pipeline at the documented problem sizes, so the
module takes a few minutes; everything else in tests/ is fast.
"""

import time

import numpy as np

from spinqoc import cli, fisher, pmp
from spinqoc.channels import ChannelSpec
from spinqoc.checks import ALL_CHANNELS, adjoint_gradient, fd_cost_gradient, neg_qfi_of
from spinqoc.dynamics import (
    ControlProtocol,
    ModelSpec,
    hl_state_density,
    propagate_forward,
)
from spinqoc.operators import SIGMA, bar_symmetrize, kron_all
from spinqoc.optimize import OptimizerConfig, optimize_protocol, singular_self_consistency

from conftest import record_acceptance


def test_flipping_asymptote_uncontrolled():
    """N=2, chi=10, gamma=1.5, u=0: QFI(T=10) within 1% of 8/gamma^2."""
    start = time.monotonic()
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("flipping", 1.5))
    u = ControlProtocol.constant(10.0, 0.0, 100)
    traj = propagate_forward(model, u)
    qfi_val = fisher.qfi(traj.rho[-1], traj.rho_omega[-1])
    target = 8.0 / 1.5**2
    rel = abs(qfi_val - target) / target
    elapsed = time.monotonic() - start
    ok = rel < 0.01 and elapsed < 10.0
    record_acceptance(
        "flipping asymptote (uncontrolled, T=10)",
        ok,
        f"QFI {qfi_val:.4f} vs {target:.4f} (rel {rel:.2e}), {elapsed:.1f}s",
    )
    assert rel < 0.01
    assert elapsed < 10.0


def test_sql_and_hl_limits():
    """gamma=0, chi=0, u=0: QFI = N T^2 (coherent) and N^2 T^2 (HL) to 1e-6."""
    start = time.monotonic()
    T = 1.0
    worst = 0.0
    for n in (1, 2, 3):
        model = ModelSpec(N=n, chi=0.0, channel=ChannelSpec("none", 0.0))
        u = ControlProtocol.constant(T, 0.0, 10)
        traj = propagate_forward(model, u)
        worst = max(worst, abs(fisher.qfi(traj.rho[-1], traj.rho_omega[-1]) - n * T**2))
        traj = propagate_forward(model, u, rho0=hl_state_density(n))
        worst = max(worst, abs(fisher.qfi(traj.rho[-1], traj.rho_omega[-1]) - n**2 * T**2))
    elapsed = time.monotonic() - start
    ok = worst < 1e-6 and elapsed < 5.0
    record_acceptance(
        "SQL and HL limits (N in 1..3)",
        ok,
        f"worst |QFI - limit| = {worst:.2e}, {elapsed:.1f}s",
    )
    assert worst < 1e-6
    assert elapsed < 5.0


def test_flipping_benchmark_values():
    """flipping T=1.3: constrained optimum >= 2.31; forced-singular within
    1% of 2.338 with a Legendre-Clebsch violation overlapping [0.1, 0.3]."""
    start = time.monotonic()
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("flipping", 1.5))
    cfg = OptimizerConfig(max_iters=300, restarts=4, seed=0, u_max=15.0)
    res = optimize_protocol(model, 1.3, 130, cfg, with_diagnostics=False)

    sing = singular_self_consistency(model, 1.3, 130, res.protocol.values, max_iters=60)
    rel = abs(sing.qfi - 2.338) / 2.338
    intervals = pmp.check_legendre_clebsch(sing.diagnostics.times, sing.diagnostics.gfg)
    overlap = any(a < 0.3 and b > 0.1 for a, b in intervals)
    elapsed = time.monotonic() - start
    ok = res.qfi >= 2.31 and rel < 0.01 and overlap and elapsed < 300.0
    record_acceptance(
        "flipping benchmark (T=1.3, u_max=15)",
        ok,
        f"constrained QFI {res.qfi:.4f} (>= 2.31), singular QFI {sing.qfi:.4f} "
        f"(rel {rel:.2e} to 2.338), LC intervals {[(round(a,3), round(b,3)) for a, b in intervals]}, "
        f"{elapsed:.0f}s",
    )
    assert res.qfi >= 2.31
    assert rel < 0.01
    assert overlap
    assert elapsed < 300.0


def test_dephasing_saturation():
    """dephasing optimized at T=4: QFI in [0.64, 0.72]; extracted DF-subspace
    coefficients match |a_z| ~ 0.0786 and |b_z| ~ 0.151 within 0.02.

    The sign of b_z is convention-dependent (it enters every observable
    quadratically), so the magnitude is compared.
    """
    start = time.monotonic()
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("dephasing", 1.5))
    cfg = OptimizerConfig(max_iters=200, restarts=3, seed=0, u_max=15.0)
    res = optimize_protocol(model, 4.0, 160, cfg, with_diagnostics=False)
    traj = propagate_forward(model, res.protocol)
    coeffs = fisher.extract_asymptotic_coeffs(traj.rho[-1], traj.rho_omega[-1])
    da = abs(coeffs.a_z - 0.0786)
    db = abs(abs(coeffs.b_z) - 0.151)
    elapsed = time.monotonic() - start
    ok = 0.64 <= res.qfi <= 0.72 and da <= 0.02 and db <= 0.02 and elapsed < 600.0
    record_acceptance(
        "dephasing saturation (T=4)",
        ok,
        f"QFI {res.qfi:.4f} in [0.64, 0.72], a_z {coeffs.a_z:.4f} (|d| {da:.4f}), "
        f"b_z {coeffs.b_z:.4f} (|d| from 0.151: {db:.4f}), {elapsed:.0f}s",
    )
    assert 0.64 <= res.qfi <= 0.72
    assert da <= 0.02
    assert db <= 0.02
    assert elapsed < 600.0


def test_closed_system_benchmark():
    """gamma=0, N=2, chi=10, T=1: QFI in (2, 4]; the trajectory passes near
    the HL state; gfg < 0 everywhere; u_sing tracks the converged control."""
    start = time.monotonic()
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("none", 0.0))
    cfg = OptimizerConfig(max_iters=300, restarts=3, seed=0)
    res = optimize_protocol(model, 1.0, 100, cfg)
    diag = res.diagnostics

    traj = propagate_forward(model, res.protocol)
    hl = hl_state_density(2)
    overlaps = np.array([np.real(np.trace(hl @ r)) for r in traj.rho])
    mask = (traj.times >= 0.1) & (traj.times <= 0.3)
    hl_max = overlaps[mask].max()

    gfg_ok = bool(np.all(diag.gfg < 0))
    report = pmp.check_first_order(diag, res.protocol)
    u_range = float(np.ptp(res.protocol.values))
    devs = [
        abs(res.protocol.values[k] - diag.u_sing[k])
        for k, cls in enumerate(report.segment_class)
        if cls == "singular" and np.isfinite(diag.u_sing[k])
    ]
    sing_dev = max(devs) / u_range if devs else np.inf
    elapsed = time.monotonic() - start
    ok = 2.0 < res.qfi <= 4.0 and hl_max > 0.99 and gfg_ok and sing_dev < 0.05
    record_acceptance(
        "closed-system benchmark (gamma=0, T=1)",
        ok,
        f"QFI {res.qfi:.4f} in (2, 4], HL overlap {hl_max:.4f} (> 0.99), "
        f"gfg<0 {gfg_ok}, singular-arc deviation {sing_dev:.4f} of range, {elapsed:.0f}s",
    )
    assert 2.0 < res.qfi <= 4.0
    assert hl_max > 0.99
    assert gfg_ok
    assert sing_dev < 0.05


def test_gradient_oracle_all_channels():
    """Adjoint gradient vs central finite differences: 20 random protocols
    per channel (N=2, T=1, M=50), every segment, relative error < 1e-4.

    Errors are measured relative to the largest gradient entry of each
    protocol: entries at switching-function zeros are arbitrarily small, so
    a per-entry denominator would compare finite-difference roundoff noise
    (~1e-10 absolute) against itself.
    """
    start = time.monotonic()
    rng = np.random.default_rng(0)
    worst = 0.0
    for channel in ALL_CHANNELS:
        model = ModelSpec(N=2, chi=10.0, channel=channel)
        for _ in range(20):
            u = ControlProtocol(1.0, rng.uniform(-3.0, 3.0, 50))
            grad, _, _ = adjoint_gradient(model, u)
            scale = max(float(np.max(np.abs(grad))), 1e-12)
            for k in range(50):
                fd = fd_cost_gradient(model, u, k)
                worst = max(worst, abs(grad[k] - fd) / scale)
    elapsed = time.monotonic() - start
    ok = worst < 1e-4 and elapsed < 120.0
    record_acceptance(
        "gradient oracle (4 channels x 20 protocols x 50 segments)",
        ok,
        f"worst relative error {worst:.2e} (< 1e-4), {elapsed:.0f}s",
    )
    assert worst < 1e-4
    assert elapsed < 120.0


def test_hoc_oracle():
    """c-Hamiltonian: intra-segment drift < 1e-6 relative under constant
    control; mean value matches finite-difference dC/dT to 0.1%."""
    rng = np.random.default_rng(1)
    worst_drift = 0.0
    worst_fd = 0.0
    for channel in ALL_CHANNELS:
        model = ModelSpec(N=2, chi=10.0, channel=channel)
        for _ in range(3):
            T, M = 0.5, 5
            uc = float(rng.uniform(-2.0, 2.0))
            u = ControlProtocol.constant(T, uc, M)
            _, traj, costate = adjoint_gradient(model, u)
            hoc = pmp.hoc_series(traj, costate, model, u)
            s = traj.substeps
            scale = max(np.max(np.abs(hoc)), 1e-12)
            for k in range(M):
                worst_drift = max(worst_drift, np.ptp(hoc[k * s : k * s + s + 1]) / scale)
            delta = 1e-3
            cp = neg_qfi_of(model, ControlProtocol.constant(T + delta, uc, M), s)
            cm = neg_qfi_of(model, ControlProtocol.constant(T - delta, uc, M), s)
            fd = (cp - cm) / (2 * delta)
            worst_fd = max(worst_fd, abs(np.mean(hoc) - fd) / max(abs(fd), 1e-12))
    ok = worst_drift < 1e-6 and worst_fd < 1e-3
    record_acceptance(
        "c-Hamiltonian oracle (drift and dC/dT)",
        ok,
        f"max drift {worst_drift:.2e} (< 1e-6), dC/dT rel err {worst_fd:.2e} (< 1e-3)",
    )
    assert worst_drift < 1e-6
    assert worst_fd < 1e-3


def test_cfi_closed_form():
    """Asymptotic flipping state, N in {2, 3}: cfi(phi) matches the closed
    form to 1e-6 on [0.05, 1.0] and cfi(1e-3) is within 0.1% of 4N/gamma^2."""
    gamma = 1.5
    worst = 0.0
    worst_small = 0.0
    for n in (2, 3):
        dim = 2**n
        rho = (np.eye(dim) + kron_all([SIGMA["x"]] * n)) / dim
        w = bar_symmetrize([SIGMA["x"]] * (n - 1) + [SIGMA["y"]]) / (2 ** (n - 1) * gamma)
        for phi in np.linspace(0.05, 1.0, 40):
            expected = fisher.asymptotic_cfi_formula(n, gamma, float(phi))
            worst = max(worst, abs(fisher.cfi(rho, w, float(phi)) - expected))
        limit = 4 * n / gamma**2
        worst_small = max(worst_small, abs(fisher.cfi(rho, w, 1e-3) - limit) / limit)
    ok = worst < 1e-6 and worst_small < 1e-3
    record_acceptance(
        "measurement-information closed form (flipping asymptote)",
        ok,
        f"max abs err {worst:.2e} (< 1e-6), small-angle rel err {worst_small:.2e} (< 1e-3)",
    )
    assert worst < 1e-6
    assert worst_small < 1e-3


def test_invariant_suite_via_cli_check():
    """`spinqoc check` runs the full self-check battery and exits 0."""
    code = cli.main(["check", "--seed", "0"])
    record_acceptance(
        "invariant suite (cmd check)",
        code == 0,
        f"exit code {code}",
    )
    assert code == 0
