"""Projected gradient descent on control protocols against -QFI (or -CFI).

Each iteration: propagate forward, evaluate the terminal costate boundary,
back-propagate, form the per-segment switching function, and take a
backtracking projected step u <- clamp(u - eta * Phi).  Multi-start handles
the landscape's multiple near-optima.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fisher, pmp
from .dynamics import (
    ControlProtocol,
    ModelSpec,
    coherent_x_state,
    default_substeps,
    propagate_costate_backward,
    propagate_forward,
    propagate_terminal,
)


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 400
    eta: float = 1.0
    backtrack: float = 0.5
    tol_grad: float | None = None  # absolute; default 1e-5 * initial grad norm
    restarts: int = 5
    seed: int = 0
    cost: str = "qfi"  # "qfi" or "cfi"
    phi: float = 0.0  # measurement rotation angle, cfi cost only
    u_max: float = 0.0  # 0 = unconstrained
    max_backtracks: int = 30
    substeps: int | None = None

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("learning rate must be positive")
        if not (0.0 < self.backtrack < 1.0):
            raise ValueError("backtracking factor must lie in (0, 1)")
        if self.restarts < 1:
            raise ValueError("need at least one restart")
        if self.cost not in ("qfi", "cfi"):
            raise ValueError(f"unknown cost {self.cost!r}")


@dataclass
class RestartSummary:
    index: int
    qfi: float
    iterations: int
    converged: bool
    message: str = ""


@dataclass
class OptimizationResult:
    protocol: ControlProtocol
    qfi: float
    cost_history: list
    diagnostics: pmp.PmpDiagnostics | None
    restarts: list
    converged: bool
    uncontrolled_qfi: float | None = None


def _cost_functions(cfg: OptimizerConfig):
    if cfg.cost == "qfi":
        def cost(rho_t, rho_w_t):
            return -fisher.qfi(rho_t, rho_w_t)

        def boundary(rho_t, rho_w_t):
            return fisher.qfi_costate_boundary(rho_t, rho_w_t)
    else:
        def cost(rho_t, rho_w_t):
            return -fisher.cfi(rho_t, rho_w_t, cfg.phi)

        def boundary(rho_t, rho_w_t):
            return fisher.cfi_costate_boundary(rho_t, rho_w_t, cfg.phi)
    return cost, boundary


def gradient_step(u: ControlProtocol, phi_seg: np.ndarray, eta: float, u_max: float) -> ControlProtocol:
    """One projected update u_k <- clamp(u_k - eta * Phi_k, -u_max, +u_max)."""
    values = u.values - eta * np.asarray(phi_seg)
    if u_max > 0:
        values = np.clip(values, -u_max, u_max)
    return ControlProtocol(u.T, values, u_max)


def _projected_gradient_norm(u: ControlProtocol, phi_seg: np.ndarray) -> float:
    pg = np.array(phi_seg, dtype=float)
    if u.u_max > 0:
        at_upper = u.values >= u.u_max * (1 - 1e-12)
        at_lower = u.values <= -u.u_max * (1 - 1e-12)
        pg[at_upper] = np.maximum(pg[at_upper], 0.0)
        pg[at_lower] = np.minimum(pg[at_lower], 0.0)
    return float(np.max(np.abs(pg))) if pg.size else 0.0


def _descend(model, u0: ControlProtocol, cfg: OptimizerConfig, rho0, substeps):
    cost_fn, boundary_fn = _cost_functions(cfg)
    u = u0
    traj = propagate_forward(model, u, rho0, substeps)
    cost = cost_fn(traj.rho[-1], traj.rho_omega[-1])
    history = [-cost]
    tol_abs = cfg.tol_grad
    converged = False
    message = "max iterations reached"
    iters = 0
    for iters in range(1, cfg.max_iters + 1):
        costate = propagate_costate_backward(
            model, u, boundary_fn(traj.rho[-1], traj.rho_omega[-1]), substeps
        )
        grad = pmp.cost_gradient(traj, costate, model, u)
        phi_seg = grad / u.dt
        gnorm = _projected_gradient_norm(u, phi_seg)
        if tol_abs is None:
            tol_abs = 1e-5 * max(gnorm, 1e-30)
        if gnorm < tol_abs:
            converged = True
            message = "projected gradient below tolerance"
            break
        eta = cfg.eta
        accepted = False
        for _ in range(cfg.max_backtracks):
            u_trial = gradient_step(u, phi_seg, eta, cfg.u_max)
            if np.array_equal(u_trial.values, u.values):
                break
            rho_t, rho_w_t = propagate_terminal(model, u_trial, rho0, substeps)
            trial_cost = cost_fn(rho_t, rho_w_t)
            if np.isfinite(trial_cost) and trial_cost < cost:
                u, cost = u_trial, trial_cost
                traj = propagate_forward(model, u, rho0, substeps)
                history.append(-cost)
                accepted = True
                break
            eta *= cfg.backtrack
        if not accepted:
            message = "line search stalled"
            break
    return u, traj, history, converged, iters, message


def initial_protocols(model: ModelSpec, T: float, M: int, cfg: OptimizerConfig):
    """Multi-start set: zero, a constant mid-amplitude guess, then random."""
    u_eff = cfg.u_max if cfg.u_max > 0 else (abs(model.chi) or 1.0)
    rng = np.random.default_rng(cfg.seed)
    starts = [
        ControlProtocol.constant(T, 0.0, M, cfg.u_max),
        ControlProtocol.constant(T, 0.5 * u_eff, M, cfg.u_max),
    ]
    while len(starts) < cfg.restarts:
        starts.append(
            ControlProtocol(T, rng.uniform(-u_eff, u_eff, size=M), cfg.u_max)
        )
    return starts[: cfg.restarts]


def optimize_protocol(
    model: ModelSpec,
    T: float,
    M: int,
    cfg: OptimizerConfig,
    rho0: np.ndarray | None = None,
    with_diagnostics: bool = True,
) -> OptimizationResult:
    """Multi-start projected gradient descent; returns the best protocol."""
    substeps = cfg.substeps or default_substeps(T, M)
    if rho0 is None:
        rho0 = coherent_x_state(model.N)
    cost_fn, boundary_fn = _cost_functions(cfg)

    best = None
    summaries = []
    for idx, u0 in enumerate(initial_protocols(model, T, M, cfg)):
        try:
            u, traj, history, conv, iters, msg = _descend(model, u0, cfg, rho0, substeps)
        except RuntimeError as exc:  # propagation blow-up aborts this restart only
            summaries.append(RestartSummary(idx, float("nan"), 0, False, str(exc)))
            continue
        qfi_val = history[-1]
        summaries.append(RestartSummary(idx, qfi_val, iters, conv, msg))
        if best is None or qfi_val > best[0]:
            best = (qfi_val, u, traj, history, conv)
    if best is None:
        raise RuntimeError("every restart failed with non-finite dynamics")

    qfi_val, u, traj, history, conv = best
    diag = None
    if with_diagnostics:
        costate = propagate_costate_backward(
            model, u, boundary_fn(traj.rho[-1], traj.rho_omega[-1]), substeps
        )
        diag = pmp.compute_diagnostics(traj, costate, model, u, qfi_val)
    return OptimizationResult(
        protocol=u,
        qfi=qfi_val,
        cost_history=history,
        diagnostics=diag,
        restarts=summaries,
        converged=conv,
    )


def singular_self_consistency(
    model: ModelSpec,
    T: float,
    M: int,
    u0: ControlProtocol | None = None,
    alpha: float = 0.3,
    max_iters: int = 200,
    tol: float = 1e-4,
    substeps: int | None = None,
    divergence_bound: float = 1e3,
) -> OptimizationResult:
    """Damped self-consistency solve for a fully singular control.

    A singular arc requires the switching function to vanish identically, so
    each iteration solves the linearized condition Phi(u + delta) = 0 with a
    matrix-free Krylov step and mixes it in with damping alpha:
    u <- (1 - alpha) u + alpha (u + delta).  Away from the zeros of the
    Legendre-Clebsch quantity this target coincides with the pointwise ratio
    u_sing = -ffg/gfg; at those zeros u_sing has poles while the Krylov
    target stays finite.  Legendre-Clebsch violations are reported, not
    fatal; diverging iterates (the unbounded-control instability) abort with
    the violation report attached to the raised error.
    """
    from scipy.sparse.linalg import LinearOperator, lgmres

    substeps = substeps or default_substeps(T, M)
    if u0 is None:
        u0 = np.zeros(M)
    values = u0.values if isinstance(u0, ControlProtocol) else np.asarray(u0, dtype=float)
    u = ControlProtocol(T, values, 0.0)  # self-consistency runs unconstrained
    rho0 = coherent_x_state(model.N)

    def switching(vals):
        prot = ControlProtocol(T, vals, 0.0)
        traj = propagate_forward(model, prot, rho0, substeps)
        costate = propagate_costate_backward(
            model,
            prot,
            fisher.qfi_costate_boundary(traj.rho[-1], traj.rho_omega[-1]),
            substeps,
        )
        phi = pmp.cost_gradient(traj, costate, model, prot) / prot.dt
        return phi, traj, costate

    history = []
    converged = False
    iters = 0
    gfg = np.zeros(M)
    for iters in range(1, max_iters + 1):
        phi, traj, costate = switching(u.values)
        qfi_val = fisher.qfi(traj.rho[-1], traj.rho_omega[-1])
        history.append(qfi_val)
        gfg, _ = pmp.second_order_quantities(traj, costate, model, u)
        if alpha == 0.0:
            break
        eps = 1e-6 * max(1.0, float(np.max(np.abs(u.values))))

        def matvec(v):
            phi_p, _, _ = switching(u.values + eps * v)
            return (phi_p - phi) / eps

        jac = LinearOperator((M, M), matvec=matvec, dtype=float)
        delta_u, _ = lgmres(jac, -phi, rtol=1e-2, maxiter=1, inner_m=25, atol=0.0)
        new_values = u.values + alpha * delta_u
        if np.max(np.abs(new_values)) > divergence_bound:
            report = pmp.check_legendre_clebsch(u.midpoints(), gfg)
            raise RuntimeError(
                "self-consistency iteration diverged (unbounded control); "
                f"Legendre-Clebsch violations on {report}"
            )
        delta = float(np.max(np.abs(new_values - u.values)))
        u = ControlProtocol(T, new_values, 0.0)
        if delta < tol:
            converged = True
            break

    traj = propagate_forward(model, u, rho0, substeps)
    qfi_val = fisher.qfi(traj.rho[-1], traj.rho_omega[-1])
    costate = propagate_costate_backward(
        model, u, fisher.qfi_costate_boundary(traj.rho[-1], traj.rho_omega[-1]), substeps
    )
    diag = pmp.compute_diagnostics(traj, costate, model, u, qfi_val)
    return OptimizationResult(
        protocol=u,
        qfi=qfi_val,
        cost_history=history,
        diagnostics=diag,
        restarts=[RestartSummary(0, qfi_val, iters, converged)],
        converged=converged,
    )


@dataclass
class ScanRow:
    T: float
    qfi_opt: float
    qfi_uncontrolled: float
    hoc_at_opt: float
    asymptote: float
    error: str = ""


def scan_qfi_vs_T(
    model: ModelSpec,
    T_list,
    M_per_T,
    cfg: OptimizerConfig,
    threads: int = 1,
) -> list:
    """Optimized and uncontrolled QFI per evolution time, for plotting."""
    if isinstance(M_per_T, int):
        M_per_T = [M_per_T] * len(T_list)

    def segments_for(T, M):
        return M

    def one(i):
        T = float(T_list[i])
        M = segments_for(T, M_per_T[i])
        try:
            res = optimize_protocol(model, T, M, cfg, with_diagnostics=True)
            u0 = ControlProtocol.constant(T, 0.0, M, cfg.u_max)
            traj0 = propagate_forward(model, u0, substeps=cfg.substeps or default_substeps(T, M))
            qfi_unc = fisher.qfi(traj0.rho[-1], traj0.rho_omega[-1])
            hoc = float(np.mean(res.diagnostics.Hoc))
            asym = _asymptote_or_nan(model, traj0)
            return ScanRow(T, res.qfi, qfi_unc, hoc, asym)
        except RuntimeError as exc:
            return ScanRow(T, float("nan"), float("nan"), float("nan"), float("nan"), str(exc))

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(len(T_list))))
    return [one(i) for i in range(len(T_list))]


def _asymptote_or_nan(model: ModelSpec, traj) -> float:
    kind = model.channel.kind
    if model.N != 2 or kind not in ("dephasing", "flipping", "depolarization"):
        return float("nan")
    coeffs = fisher.extract_asymptotic_coeffs(traj.rho[-1], traj.rho_omega[-1])
    if kind == "flipping":
        # a_x is conserved: evaluate on the initial state for robustness.
        coeffs = fisher.extract_asymptotic_coeffs(traj.rho[0], traj.rho_omega[0])
    return fisher.asymptotic_qfi(kind, coeffs, model.channel.gamma)
