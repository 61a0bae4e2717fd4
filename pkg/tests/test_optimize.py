import numpy as np
import pytest

from spinqoc.channels import ChannelSpec
from spinqoc.dynamics import ControlProtocol, ModelSpec
from spinqoc.checks import neg_qfi_of
from spinqoc.optimize import (
    OptimizerConfig,
    gradient_step,
    initial_protocols,
    optimize_protocol,
    scan_qfi_vs_T,
    singular_self_consistency,
)


def test_optimizer_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(eta=0.0)
    with pytest.raises(ValueError):
        OptimizerConfig(backtrack=1.5)
    with pytest.raises(ValueError):
        OptimizerConfig(restarts=0)
    with pytest.raises(ValueError):
        OptimizerConfig(cost="fidelity")


def test_gradient_step_projection():
    u = ControlProtocol(1.0, np.array([4.0, -4.0, 0.0]), u_max=5.0)
    phi = np.array([-2.0, 2.0, 1.0])
    out = gradient_step(u, phi, eta=1.0, u_max=5.0)
    assert np.allclose(out.values, [5.0, -5.0, -1.0])  # clamped at the bounds


def test_gradient_step_zero_eta_is_identity():
    u = ControlProtocol(1.0, np.array([1.0, 2.0]))
    out = gradient_step(u, np.array([3.0, -1.0]), eta=0.0, u_max=0.0)
    assert np.array_equal(out.values, u.values)


def test_initial_protocols_structure():
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("none", 0.0))
    cfg = OptimizerConfig(restarts=5, seed=0, u_max=5.0)
    protos = initial_protocols(model, 1.0, 10, cfg)
    assert len(protos) == 5
    assert np.all(protos[0].values == 0.0)
    assert np.all(protos[1].values == 2.5)
    for p in protos[2:]:
        assert np.max(np.abs(p.values)) <= 5.0


def test_initial_protocols_deterministic():
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("none", 0.0))
    cfg = OptimizerConfig(restarts=5, seed=3, u_max=5.0)
    a = initial_protocols(model, 1.0, 10, cfg)
    b = initial_protocols(model, 1.0, 10, cfg)
    for pa, pb in zip(a, b):
        assert np.array_equal(pa.values, pb.values)


def test_descent_is_monotone_and_beats_uncontrolled():
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("dephasing", 1.5))
    cfg = OptimizerConfig(max_iters=40, restarts=2, seed=0)
    res = optimize_protocol(model, 0.5, 10, cfg, with_diagnostics=False)
    hist = np.asarray(res.cost_history)
    assert np.all(np.diff(hist) >= -1e-12)  # QFI history of accepted steps
    uncontrolled = -neg_qfi_of(model, ControlProtocol.constant(0.5, 0.0, 10))
    assert res.qfi >= uncontrolled - 1e-9


def test_optimizer_respects_bounds():
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("flipping", 1.5))
    cfg = OptimizerConfig(max_iters=30, restarts=2, seed=1, u_max=2.0)
    res = optimize_protocol(model, 0.5, 10, cfg, with_diagnostics=False)
    assert np.max(np.abs(res.protocol.values)) <= 2.0 + 1e-12


def test_optimizer_determinism():
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("depolarization", 1.5))
    cfg = OptimizerConfig(max_iters=15, restarts=2, seed=7)
    a = optimize_protocol(model, 0.4, 8, cfg, with_diagnostics=False)
    b = optimize_protocol(model, 0.4, 8, cfg, with_diagnostics=False)
    assert a.qfi == b.qfi
    assert np.array_equal(a.protocol.values, b.protocol.values)


def test_optimizer_cfi_cost_runs():
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("dephasing", 1.5))
    cfg = OptimizerConfig(max_iters=15, restarts=1, seed=0, cost="cfi", phi=0.3)
    res = optimize_protocol(model, 0.4, 8, cfg, with_diagnostics=False)
    assert np.isfinite(res.qfi)


def test_self_consistency_alpha_zero_is_identity():
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("none", 0.0))
    u0 = np.linspace(-1.0, 1.0, 10)
    res = singular_self_consistency(model, 0.5, 10, u0, alpha=0.0)
    assert np.array_equal(res.protocol.values, u0)


def test_self_consistency_divergence_reports_lc():
    # an absurd starting point near the bound must abort with the
    # Legendre-Clebsch report attached
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("flipping", 1.5))
    u0 = np.full(10, 999.0)
    with pytest.raises(RuntimeError, match="Legendre-Clebsch"):
        singular_self_consistency(model, 1.3, 10, u0, divergence_bound=1e3)


def test_scan_reports_monotone_columns():
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("flipping", 1.5))
    cfg = OptimizerConfig(max_iters=20, restarts=2, seed=0, u_max=10.0)
    rows = scan_qfi_vs_T(model, [0.3, 0.6], 10, cfg)
    assert [r.T for r in rows] == [0.3, 0.6]
    for r in rows:
        assert not r.error
        assert r.qfi_opt >= r.qfi_uncontrolled - 1e-9
        assert r.asymptote == pytest.approx(8 / 1.5**2, rel=1e-6)


def test_scan_threads_match_serial():
    model = ModelSpec(N=2, chi=10.0, channel=ChannelSpec("dephasing", 1.5))
    cfg = OptimizerConfig(max_iters=10, restarts=1, seed=0)
    serial = scan_qfi_vs_T(model, [0.2, 0.4], 6, cfg, threads=1)
    threaded = scan_qfi_vs_T(model, [0.2, 0.4], 6, cfg, threads=2)
    for a, b in zip(serial, threaded):
        assert a.qfi_opt == b.qfi_opt
