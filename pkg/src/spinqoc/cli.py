"""Command-line experiment runner: simulate | optimize | scan | check.

Every output file embeds the config snapshot that produced it ('#'-prefixed
preamble for CSV, a `config` field for JSON).  Floats are written with 17
significant digits so round-trips are lossless.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, checks, fisher, pmp
from .channels import df_basis
from .config import ConfigError, control_values, parse_file
from .dynamics import (
    ControlProtocol,
    coherent_x_state,
    default_substeps,
    propagate_costate_backward,
    propagate_forward,
)
from .optimize import optimize_protocol, scan_qfi_vs_T

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4

_FLOAT_FMT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, float) or isinstance(value, np.floating):
        return _FLOAT_FMT % value
    return str(value)


def _write_csv(path: Path, header: list, rows, config_snapshot: dict) -> None:
    lines = ["# config: " + json.dumps(config_snapshot, sort_keys=True)]
    lines.append("# version: spinqoc-" + __version__)
    lines.append(",".join(header))
    for row in rows:
        if not all(np.isfinite(v) if isinstance(v, (float, np.floating)) else True for v in row):
            raise RuntimeError(f"refusing to serialize non-finite value in row {row}")
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _df_overlap_columns(model):
    basis = df_basis(model.channel, model.N) if model.N == 2 else []
    names = [f"df_overlap_{i}" for i in range(len(basis))]
    norms = [float(np.real(np.trace(b @ b))) for b in basis]
    return basis, names, norms


def cmd_simulate(cfg, out_dir: Path) -> int:
    if cfg.T is None or cfg.segments is None:
        raise ConfigError("simulate requires run.T and run.segments")
    u = ControlProtocol(cfg.T, control_values(cfg), cfg.optimizer.u_max)
    substeps = cfg.substeps or default_substeps(cfg.T, cfg.segments)
    traj = propagate_forward(cfg.model, u, substeps=substeps)
    basis, names, norms = _df_overlap_columns(cfg.model)

    header = ["t", "u", "qfi_running", "tr_rho", "min_eig_rho"] + names
    rows = []
    for i, t in enumerate(traj.times):
        rho, rho_w = traj.rho[i], traj.rho_omega[i]
        row = [
            float(t),
            float(u.values[min(i, u.M - 1)]),
            fisher.qfi(rho, rho_w),
            float(np.real(np.trace(rho))),
            float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()),
        ]
        row += [float(np.real(np.trace(rho @ b))) / n for b, n in zip(basis, norms)]
        rows.append(row)
    _write_csv(out_dir / "trajectory.csv", header, rows, cfg.raw)
    return EXIT_OK


def cmd_optimize(cfg, out_dir: Path) -> int:
    if cfg.T is None or cfg.segments is None:
        raise ConfigError("optimize requires run.T and run.segments")
    opt_cfg = cfg.optimizer
    if cfg.substeps:
        opt_cfg = replace(opt_cfg, substeps=cfg.substeps)
    start = time.monotonic()
    res = optimize_protocol(cfg.model, cfg.T, cfg.segments, opt_cfg)
    duration = time.monotonic() - start
    diag = res.diagnostics
    report = pmp.check_first_order(diag, res.protocol)

    header = ["t", "u", "Phi", "Hoc", "gfg", "ffg", "u_sing", "segment_class"]
    rows = []
    for k in range(res.protocol.M):
        u_sing = diag.u_sing[k]
        rows.append(
            [
                float(diag.times[k]),
                float(res.protocol.values[k]),
                float(diag.Phi[k]),
                float(diag.Hoc[k]),
                float(diag.gfg[k]),
                float(diag.ffg[k]),
                float(u_sing) if np.isfinite(u_sing) else 0.0,
                report.segment_class[k].rstrip("+-"),
            ]
        )
    _write_csv(out_dir / "control.csv", header, rows, cfg.raw)

    summary = {
        "config": cfg.raw,
        "version": "spinqoc-" + __version__,
        "duration_seconds": duration,
        "qfi": res.qfi,
        "iterations": [r.iterations for r in res.restarts],
        "restarts": [
            {"index": r.index, "qfi": r.qfi, "iterations": r.iterations, "converged": r.converged}
            for r in res.restarts
        ],
        "violations": report.n_violations,
        "lc_violation_intervals": pmp.check_legendre_clebsch(diag.times, diag.gfg),
        "converged": res.converged,
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n", encoding="utf-8"
    )
    return EXIT_OK


def cmd_scan(cfg, out_dir: Path, threads: int = 1) -> int:
    if not cfg.scan_T_list:
        raise ConfigError("scan requires scan.T_list")
    seg = cfg.scan_segments
    if seg is None:
        seg = cfg.segments or 50
    opt_cfg = cfg.optimizer
    if cfg.substeps:
        opt_cfg = replace(opt_cfg, substeps=cfg.substeps)
    rows_out = scan_qfi_vs_T(cfg.model, cfg.scan_T_list, seg, opt_cfg, threads=threads)
    header = ["T", "qfi_opt", "qfi_uncontrolled", "hoc_at_opt", "asymptote"]
    rows = []
    for r in rows_out:
        if r.error:
            print(f"scan point T={r.T} failed: {r.error}", file=sys.stderr)
            continue
        rows.append([r.T, r.qfi_opt, r.qfi_uncontrolled, r.hoc_at_opt, r.asymptote])
    _write_csv(out_dir / "scan.csv", header, rows, cfg.raw)
    return EXIT_OK


def cmd_check(seed: int) -> int:
    results = checks.run_all(seed)
    width = max(len(r.name) for r in results)
    failures = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  {r.detail}")
        failures += 0 if r.passed else 1
    return EXIT_OK if failures == 0 else EXIT_CHECK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinqoc",
        description="Optimal control of quantum Fisher information for dissipative spins",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "optimize", "scan"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="optimizer seed override")
        p.add_argument("--threads", type=int, default=1)
    p = sub.add_parser("check")
    p.add_argument("--config", default=None, help="ignored; checks are self-contained")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "check":
        return cmd_check(args.seed or 0)
    try:
        cfg = parse_file(args.config)
        if args.seed is not None:
            cfg.optimizer = replace(cfg.optimizer, seed=args.seed)
        out_dir = Path(args.out or cfg.output_directory)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir)
        if args.command == "optimize":
            return cmd_optimize(cfg, out_dir)
        return cmd_scan(cfg, out_dir, threads=args.threads)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
