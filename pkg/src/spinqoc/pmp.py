"""Pontryagin-principle diagnostics: switching function, control Hamiltonian,
second-order quantities, singular control and optimality checkers.

Sign conventions: the switching function is the gradient of the terminal
cost (negative Fisher information) with respect to the control, so optimal
bang controls sit at +u_max where Phi < 0 and -u_max where Phi > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    AugmentedTrajectory,
    ControlProtocol,
    CostateTrajectory,
    ModelSpec,
    model_operators,
    step_pair,
)
from .operators import anticommutator, commutator

REALNESS_TOL = 1e-9

# Below this floor (relative to ffg) the singular-control ratio is undefined;
# near the instability onset the denominator physically crosses zero.
GFG_FLOOR_SCALE = 1e-8


@dataclass
class PmpDiagnostics:
    """Per-segment PMP quantities for one converged (or candidate) protocol."""

    times: np.ndarray  # segment midpoints
    Phi: np.ndarray  # segment-averaged switching function
    Hoc: np.ndarray
    gfg: np.ndarray
    ffg: np.ndarray
    u_sing: np.ndarray  # NaN where undefined
    qfi_T: float
    lc_violations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def _trace_real(value: complex, what: str, scale: float = 1.0) -> float:
    if abs(value.imag) > REALNESS_TOL * max(1.0, scale, abs(value.real)):
        raise ValueError(
            f"{what} has imaginary residual {value.imag:.3e}; "
            "state/costate propagation is inconsistent"
        )
    return float(value.real)


def switching_function(lam, lam_omega, rho, rho_omega, h1) -> float:
    """Phi = -i Tr{lam [H1, rho]} - i Tr{lam_omega [H1, rho_omega]}."""
    val = -1j * (
        np.trace(lam @ commutator(h1, rho))
        + np.trace(lam_omega @ commutator(h1, rho_omega))
    )
    return _trace_real(val, "switching function")


def switching_series(traj: AugmentedTrajectory, costate: CostateTrajectory, model: ModelSpec) -> np.ndarray:
    """Phi on the fine grid, vectorized over time."""
    h1 = model_operators(model).h1
    comm_r = h1 @ traj.fine_rho - traj.fine_rho @ h1
    comm_w = h1 @ traj.fine_rho_omega - traj.fine_rho_omega @ h1
    vals = -1j * (
        np.einsum("nij,nji->n", costate.fine_lam, comm_r)
        + np.einsum("nij,nji->n", costate.fine_lam_omega, comm_w)
    )
    scale = np.max(np.abs(vals.real)) if vals.size else 1.0
    if np.max(np.abs(vals.imag)) > REALNESS_TOL * max(1.0, scale):
        raise ValueError("switching function has non-real trace values")
    return vals.real


def segment_average(fine_series: np.ndarray, M: int, substeps: int) -> np.ndarray:
    """Average of a fine-grid series over each control segment.

    Composite Simpson when the substep count is even (the default), otherwise
    trapezoid.  Multiplying by the segment length gives the exact integral of
    the series, i.e. the gradient of the cost with respect to that segment's
    control value.
    """
    s = substeps
    out = np.empty(M)
    for k in range(M):
        chunk = fine_series[k * s : k * s + s + 1]
        if s % 2 == 0:
            weights = np.ones(s + 1)
            weights[1:-1:2] = 4.0
            weights[2:-1:2] = 2.0
            out[k] = np.dot(weights, chunk) / (3.0 * s)
        else:
            out[k] = np.trapz(chunk) / s
    return out


def cost_gradient(traj, costate, model, u: ControlProtocol) -> np.ndarray:
    """d(C_Q)/d(u_k): integral of Phi over each segment."""
    phi_fine = switching_series(traj, costate, model)
    return segment_average(phi_fine, u.M, traj.substeps) * u.dt


def control_hamiltonian(lam, lam_omega, rho, rho_omega, u_value, model: ModelSpec) -> float:
    """H_oc = Tr{lam drho/dt} + Tr{lam_omega drho_omega/dt} at control u."""
    ops = model_operators(model)
    h = ops.h0 + u_value * ops.h1
    drho = -1j * commutator(h, rho) + ops.dissipate(rho)
    drho_w = -1j * commutator(h, rho_omega) - 1j * commutator(ops.jz, rho) + ops.dissipate(rho_omega)
    val = np.trace(lam @ drho) + np.trace(lam_omega @ drho_w)
    return _trace_real(val, "control Hamiltonian")


def hoc_series(traj: AugmentedTrajectory, costate: CostateTrajectory, model: ModelSpec, u: ControlProtocol) -> np.ndarray:
    """H_oc on the fine grid (each node uses its segment's control value)."""
    s = traj.substeps
    n = traj.fine_times.size
    out = np.empty(n)
    for idx in range(n):
        k = min(idx // s, u.M - 1)
        out[idx] = control_hamiltonian(
            costate.fine_lam[idx],
            costate.fine_lam_omega[idx],
            traj.fine_rho[idx],
            traj.fine_rho_omega[idx],
            float(u.values[k]),
            model,
        )
    return out


class _SecondOrderOps:
    """Commutator operators entering the analytic second-derivative formula."""

    def __init__(self, model: ModelSpec):
        ops = model_operators(model)
        self.ops = ops
        d_op = anticommutator(ops.jz, ops.jy)
        self.a_op = commutator(ops.jx, d_op)
        self.b_op = commutator(ops.jz @ ops.jz, d_op)
        self.e_op = commutator(ops.jz, d_op)
        self.d_op = d_op
        self.jzjx = anticommutator(ops.jz, ops.jx)


def _analytic_gfg_ffg(model: ModelSpec, rho, rho_w, lam, lam_w, so: _SecondOrderOps):
    chi = model.chi
    ops = so.ops
    tr = np.trace
    gfg = (
        -chi * tr(lam @ commutator(so.a_op, rho))
        - chi * tr(lam_w @ commutator(so.a_op, rho_w))
        - 1j * tr(lam_w @ commutator(ops.jz, rho))
    )
    ffg = -(
        chi**2 * tr(lam @ commutator(so.b_op, rho))
        + chi**2 * tr(lam_w @ commutator(so.b_op, rho_w))
        + chi * tr(lam_w @ commutator(so.e_op - 1j * so.jzjx, rho))
    )
    if model.channel.kind == "flipping" and model.channel.gamma > 0:
        dis = ops.dissipate
        n_damp = 1j * (
            tr(dis(lam_w) @ commutator(ops.jy, rho))
            - tr(lam_w @ commutator(ops.jy, dis(rho)))
        )
        n_damp += (1j * chi) * (
            tr(dis(lam) @ commutator(so.d_op, rho))
            - tr(lam @ commutator(so.d_op, dis(rho)))
            + tr(dis(lam_w) @ commutator(so.d_op, rho_w))
            - tr(lam_w @ commutator(so.d_op, dis(rho_w)))
        )
        ffg = ffg - n_damp
    scale = max(abs(gfg), abs(ffg), 1.0)
    return (
        _trace_real(gfg, "second-order <[g,[f,g]]>", scale),
        _trace_real(ffg, "second-order <[f,[f,g]]>", scale),
    )


def _bruteforce_gfg_ffg(model: ModelSpec, rho_pair, lam_pair, u_value, u_max,
                        window: float = 1e-3, nsub: int = 4):
    """Extract the affine decomposition of the second time derivative of Phi.

    Re-propagates state and costate over +-window at two constant control
    offsets, takes central second differences of Phi, and solves
    phi_ddot(u) = gfg * u + ffg for the two unknowns.
    """
    h1 = model_operators(model).h1

    def phi_of(pair_y, pair_z):
        return switching_function(pair_z[0], pair_z[1], pair_y[0], pair_y[1], h1)

    def phi_ddot(u_val):
        phi0 = phi_of(rho_pair, lam_pair)
        yp, zp = step_pair(model, rho_pair, lam_pair, u_val, +window, nsub)
        ym, zm = step_pair(model, rho_pair, lam_pair, u_val, -window, nsub)
        return (phi_of(yp, zp) - 2.0 * phi0 + phi_of(ym, zm)) / window**2

    delta = 1e-3 * max(1.0, u_max)
    f0 = phi_ddot(u_value)
    f1 = phi_ddot(u_value + delta)
    gfg = (f1 - f0) / delta
    ffg = f0 - u_value * gfg
    return gfg, ffg


def second_order_quantities(
    traj: AugmentedTrajectory,
    costate: CostateTrajectory,
    model: ModelSpec,
    u: ControlProtocol,
    method: str = "auto",
):
    """Per-segment (gfg, ffg) evaluated at segment midpoints.

    ``analytic_flipping`` uses the commutator-trace expressions valid for the
    flipping channel (and trivially for no channel); ``bruteforce`` works for
    every channel via short re-propagations.
    """
    if method == "auto":
        method = (
            "analytic_flipping"
            if model.channel.kind in ("none", "flipping")
            else "bruteforce"
        )
    if method == "analytic_flipping" and model.channel.kind not in ("none", "flipping"):
        raise ValueError(
            "analytic second-order quantities are only valid for the flipping "
            f"channel or no channel, not {model.channel.kind!r}"
        )
    s = traj.substeps
    mids = [k * s + s // 2 for k in range(u.M)]
    gfg = np.empty(u.M)
    ffg = np.empty(u.M)
    if method == "analytic_flipping":
        so = _SecondOrderOps(model)
        for k, idx in enumerate(mids):
            gfg[k], ffg[k] = _analytic_gfg_ffg(
                model,
                traj.fine_rho[idx],
                traj.fine_rho_omega[idx],
                costate.fine_lam[idx],
                costate.fine_lam_omega[idx],
                so,
            )
    elif method == "bruteforce":
        for k, idx in enumerate(mids):
            rho_pair = np.stack([traj.fine_rho[idx], traj.fine_rho_omega[idx]])
            lam_pair = np.stack([costate.fine_lam[idx], costate.fine_lam_omega[idx]])
            gfg[k], ffg[k] = _bruteforce_gfg_ffg(
                model, rho_pair, lam_pair, float(u.values[k]), u.u_max
            )
    else:
        raise ValueError(f"unknown method {method!r}")
    return gfg, ffg


def singular_control(gfg: np.ndarray, ffg: np.ndarray) -> np.ndarray:
    """u_sing = -ffg/gfg where defined, NaN where |gfg| is below the floor."""
    gfg = np.atleast_1d(np.asarray(gfg, dtype=float))
    ffg = np.atleast_1d(np.asarray(ffg, dtype=float))
    floor = GFG_FLOOR_SCALE * (np.abs(ffg) + 1.0)
    defined = np.abs(gfg) > floor
    out = np.full(gfg.shape, np.nan)
    out[defined] = -ffg[defined] / gfg[defined]
    return out


@dataclass
class FirstOrderReport:
    """Per-segment classification against the first-order conditions."""

    segment_class: list  # "bang+", "bang-", "singular" or "violation"
    n_violations: int
    hoc_max_deviation: float  # max |Hoc - mean(Hoc)|


def check_first_order(
    diag: PmpDiagnostics,
    u: ControlProtocol,
    tol_phi: float | None = None,
    tol_hoc: float | None = None,
) -> FirstOrderReport:
    """Classify segments as bang or singular and count violations.

    A segment is a bang when the control sits at the bound with the matching
    switching-function sign; otherwise Phi must vanish within tol_phi.
    """
    if tol_phi is None:
        tol_phi = 1e-3 * max(np.max(np.abs(diag.Phi)), 1e-30)
    if tol_hoc is None:
        tol_hoc = 1e-3 * max(abs(float(np.mean(diag.Hoc))), 1e-30)
    classes = []
    violations = 0
    for k in range(u.M):
        uk = float(u.values[k])
        phi_k = float(diag.Phi[k])
        at_upper = u.u_max > 0 and uk >= u.u_max * (1 - 1e-9)
        at_lower = u.u_max > 0 and uk <= -u.u_max * (1 - 1e-9)
        if abs(phi_k) <= tol_phi:
            classes.append("singular")
        elif at_upper and phi_k < 0:
            classes.append("bang+")
        elif at_lower and phi_k > 0:
            classes.append("bang-")
        else:
            classes.append("violation")
            violations += 1
    hoc_dev = float(np.max(np.abs(diag.Hoc - np.mean(diag.Hoc)))) if diag.Hoc.size else 0.0
    return FirstOrderReport(classes, violations, hoc_dev)


def check_legendre_clebsch(times: np.ndarray, gfg: np.ndarray, tol: float = 1e-9):
    """Contiguous time intervals where gfg > tol (second-order violation)."""
    bad = np.asarray(gfg) > tol
    intervals = []
    start = None
    for t, flag in zip(times, bad):
        if flag and start is None:
            start = t
        elif not flag and start is not None:
            intervals.append((start, prev_t))
            start = None
        prev_t = t
    if start is not None:
        intervals.append((start, times[-1]))
    return intervals


def compute_diagnostics(
    traj: AugmentedTrajectory,
    costate: CostateTrajectory,
    model: ModelSpec,
    u: ControlProtocol,
    qfi_value: float,
    second_order_method: str = "auto",
) -> PmpDiagnostics:
    """Bundle every per-segment PMP quantity for one protocol."""
    phi_fine = switching_series(traj, costate, model)
    phi_seg = segment_average(phi_fine, u.M, traj.substeps)
    hoc_fine = hoc_series(traj, costate, model, u)
    hoc_seg = segment_average(hoc_fine, u.M, traj.substeps)
    gfg, ffg = second_order_quantities(traj, costate, model, u, second_order_method)
    return PmpDiagnostics(
        times=u.midpoints(),
        Phi=phi_seg,
        Hoc=hoc_seg,
        gfg=gfg,
        ffg=ffg,
        u_sing=singular_control(gfg, ffg),
        qfi_T=qfi_value,
        lc_violations=gfg > 1e-9,
    )
