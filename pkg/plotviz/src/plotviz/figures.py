"""Load spinqoc CSV outputs and render the two standard figures."""

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CONTROL_HEADER = ["t", "u", "Phi", "Hoc", "gfg", "ffg", "u_sing", "segment_class"]
SCAN_HEADER = ["T", "qfi_opt", "qfi_uncontrolled", "hoc_at_opt", "asymptote"]

KINDS = ("control_trace", "qfi_scan")

# metadata={"Software": None} strips the matplotlib version stamp from the
# PNG so identical inputs produce identical bytes
_SAVE_KWARGS = {"dpi": 150, "metadata": {"Software": None}}


class SchemaError(ValueError):
    """The CSV header does not match the frozen schema."""


@dataclass(frozen=True)
class FigureSpec:
    input_path: str
    kind: str
    output_path: str
    overlays: tuple = field(default=("Phi", "Hoc", "gfg", "u_sing"))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


def load_csv(path: str, expected_header: list[str]) -> dict[str, list[str]]:
    """Read a spinqoc CSV (comment preamble + header + rows) into columns.

    Values are kept as strings; numeric conversion is per-column so the
    segment_class text column survives.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    lines = [line for line in lines if not line.startswith("#")]
    if not lines:
        raise SchemaError(f"{path}: empty CSV, no header found")
    header = lines[0].split(",")
    if header != expected_header:
        raise SchemaError(
            f"{path}: header {header} does not match expected {expected_header}"
        )
    columns: dict[str, list[str]] = {name: [] for name in header}
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(header):
            raise SchemaError(f"{path}: row has {len(parts)} fields, expected {len(header)}")
        for name, value in zip(header, parts):
            columns[name].append(value)
    if not columns[header[0]]:
        raise SchemaError(f"{path}: no data rows")
    return columns


def _floats(columns: dict, name: str) -> np.ndarray:
    return np.array([float(v) for v in columns[name]])


def plot_control_trace(spec: FigureSpec) -> str:
    """Single panel: u(t) with 100*Phi, Hoc, gfg and u_sing overlays; bang
    segments shaded."""
    cols = load_csv(spec.input_path, CONTROL_HEADER)
    t = _floats(cols, "t")
    dt = t[1] - t[0] if t.size > 1 else 1.0

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for k, cls in enumerate(cols["segment_class"]):
        if cls == "bang":
            ax.axvspan(t[k] - dt / 2, t[k] + dt / 2, color="0.85", lw=0, zorder=0)
    ax.step(t, _floats(cols, "u"), where="mid", label="u(t)", color="C0", lw=1.8)
    if "Phi" in spec.overlays:
        ax.plot(t, 100.0 * _floats(cols, "Phi"), label=r"$100\,\Phi(t)$", color="C1")
    if "Hoc" in spec.overlays:
        ax.plot(t, _floats(cols, "Hoc"), label=r"$\mathcal{H}_{oc}(t)$", color="C2")
    if "gfg" in spec.overlays:
        ax.plot(t, _floats(cols, "gfg"), label="gfg(t)", color="C3")
    if "u_sing" in spec.overlays:
        ax.plot(t, _floats(cols, "u_sing"), "--", label=r"$u_{sing}(t)$", color="C4")
    ax.set_xlabel("t")
    ax.set_ylabel("control / diagnostics")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("control trace")
    fig.tight_layout()
    fig.savefig(spec.output_path, **_SAVE_KWARGS)
    plt.close(fig)
    return spec.output_path


def plot_qfi_scan(spec: FigureSpec) -> str:
    """QFI of the optimized and uncontrolled protocols vs T, with the
    long-time asymptote drawn where the scan reports one."""
    cols = load_csv(spec.input_path, SCAN_HEADER)
    T = _floats(cols, "T")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(T, _floats(cols, "qfi_opt"), "o-", label="QFI (optimized)", color="C0")
    ax.plot(T, _floats(cols, "qfi_uncontrolled"), "s-", label="QFI (u = 0)", color="C1")
    asymptote = _floats(cols, "asymptote")
    finite = asymptote[np.isfinite(asymptote)]
    if finite.size:
        ax.axhline(finite[-1], color="0.4", ls=":", label="asymptote")
    ax.set_xlabel("T")
    ax.set_ylabel("QFI")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("QFI vs evolution time")
    fig.tight_layout()
    fig.savefig(spec.output_path, **_SAVE_KWARGS)
    plt.close(fig)
    return spec.output_path


def render(spec: FigureSpec) -> str:
    if spec.kind == "control_trace":
        return plot_control_trace(spec)
    return plot_qfi_scan(spec)
