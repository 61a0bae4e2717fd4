"""Figure rendering for spinqoc CSV outputs.

Consumes only the frozen CSV schemas written by the spinqoc CLI; no physics
is recomputed here.
"""

from .figures import (
    CONTROL_HEADER,
    SCAN_HEADER,
    FigureSpec,
    SchemaError,
    load_csv,
    plot_control_trace,
    plot_qfi_scan,
    render,
)

__all__ = [
    "CONTROL_HEADER",
    "SCAN_HEADER",
    "FigureSpec",
    "SchemaError",
    "load_csv",
    "plot_control_trace",
    "plot_qfi_scan",
    "render",
]
