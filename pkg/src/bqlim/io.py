"""Persistence: binary checkpoints, trace CSVs, report JSON, SVG plots.

Every emitter is deterministic: identical inputs produce byte-identical
files.  Floating-point output uses 17 significant digits so any verdict
in a report can be re-derived from the file alone.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from .dynamics import FlowState
from .spectral import Grid, SpectralField, hermitian_defect

CHECKPOINT_MAGIC = b"BQCHK1"
CHECKPOINT_VERSION = 1
FLOAT_FMT = "{:.17g}"


class CheckpointError(ValueError):
    pass


def _pack_block(coeffs: np.ndarray) -> bytes:
    flat = coeffs.ravel()
    pairs = np.empty((flat.size, 2), dtype="<f8")
    pairs[:, 0] = flat.real
    pairs[:, 1] = flat.imag
    return struct.pack("<Q", flat.size) + pairs.tobytes()


def _unpack_block(buf: bytes, offset: int, n: int):
    if offset + 8 > len(buf):
        raise CheckpointError("truncated checkpoint: missing block header")
    (count,) = struct.unpack_from("<Q", buf, offset)
    offset += 8
    if count != n * n:
        raise CheckpointError(f"block length {count} does not match grid {n}x{n}")
    nbytes = count * 16
    if offset + nbytes > len(buf):
        raise CheckpointError("truncated checkpoint: incomplete block payload")
    pairs = np.frombuffer(buf, dtype="<f8", count=2 * count, offset=offset)
    coeffs = np.empty(count, dtype=np.complex128)
    coeffs.real = pairs[0::2]  # preserves signed zeros bit for bit
    coeffs.imag = pairs[1::2]
    return coeffs.reshape(n, n), offset + nbytes


def write_checkpoint(state: FlowState, path):
    """Serialize one FlowState; row-major wavevector order, little-endian."""
    header = CHECKPOINT_MAGIC + struct.pack(
        "<IIddddd", CHECKPOINT_VERSION, state.grid.n, state.t, state.nu,
        state.kappa, state.mean_u[0], state.mean_u[1])
    payload = header + _pack_block(state.omega_hat.coeffs) + _pack_block(state.theta_hat.coeffs)
    Path(path).write_bytes(payload)


def read_checkpoint(path) -> FlowState:
    """Reconstruct a FlowState, validating header and Hermitian symmetry."""
    buf = Path(path).read_bytes()
    if len(buf) < len(CHECKPOINT_MAGIC):
        raise CheckpointError("truncated checkpoint: no magic")
    if buf[:6] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad magic {buf[:6]!r}")
    header_size = 6 + struct.calcsize("<IIddddd")
    if len(buf) < header_size:
        raise CheckpointError("truncated checkpoint: incomplete header")
    version, n, t, nu, kappa, mu1, mu2 = struct.unpack_from("<IIddddd", buf, 6)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    grid = Grid(n)
    omega, offset = _unpack_block(buf, header_size, n)
    theta, offset = _unpack_block(buf, offset, n)
    if offset != len(buf):
        raise CheckpointError(f"{len(buf) - offset} trailing bytes after payload")
    for name, coeffs in (("omega", omega), ("theta", theta)):
        scale = max(1.0, float(np.max(np.abs(coeffs))))
        if hermitian_defect(coeffs) > 1e-9 * scale:
            raise CheckpointError(f"{name} coefficients are not Hermitian-symmetric")
    return FlowState(SpectralField(omega.copy(), grid), SpectralField(theta.copy(), grid),
                     t=t, nu=nu, kappa=kappa, mean_u=(mu1, mu2))


TRACE_COLUMNS = ("t", "u_l2", "omega_l1", "omega_l2", "omega_l4", "omega_linf",
                 "theta_l2", "theta_linf", "theta_h1", "grad_theta_linf",
                 "d1_theta_linf", "theta_besov", "kinetic", "work", "dissipation",
                 "omega_tail", "theta_diss_cum")


def emit_trace_csv(trace, path):
    """Fixed column order, 17 significant digits, header always present."""
    cols = trace.columns() if hasattr(trace, "columns") else trace
    lines = [",".join(TRACE_COLUMNS)]
    m = len(cols["t"])
    for i in range(m):
        lines.append(",".join(FLOAT_FMT.format(float(cols[name][i]))
                              for name in TRACE_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def emit_report_json(report: dict, path):
    """Versioned, sorted-key JSON; non-finite floats become null."""
    text = json.dumps(_json_safe(report), sort_keys=True, indent=1)
    Path(path).write_text(text + "\n")


# ---------------------------------------------------------------- SVG plots

_SVG_W, _SVG_H = 640, 480
_MARGIN = 60


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def _svg_open():
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" '
            f'height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
            f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>']


def _axes(parts, xlo, xhi, ylo, yhi, xlabel, ylabel, title):
    x0, y0 = _MARGIN, _SVG_H - _MARGIN
    x1, y1 = _SVG_W - _MARGIN, _MARGIN

    def sx(x):
        return x0 + (x - xlo) / (xhi - xlo) * (x1 - x0)

    def sy(y):
        return y0 - (y - ylo) / (yhi - ylo) * (y0 - y1)

    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for tx in _ticks(xlo, xhi):
        px = sx(tx)
        parts.append(f'<line x1="{px:.3f}" y1="{y0}" x2="{px:.3f}" y2="{y0 + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.3f}" y="{y0 + 20}" font-size="11" '
                     f'text-anchor="middle">{tx:.3g}</text>')
    for ty in _ticks(ylo, yhi):
        py = sy(ty)
        parts.append(f'<line x1="{x0 - 5}" y1="{py:.3f}" x2="{x0}" y2="{py:.3f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 8}" y="{py + 4:.3f}" font-size="11" '
                     f'text-anchor="end">{ty:.3g}</text>')
    parts.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{_SVG_H - 15}" font-size="13" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="18" y="{(y0 + y1) / 2:.1f}" font-size="13" text-anchor="middle" '
                 f'transform="rotate(-90 18 {(y0 + y1) / 2:.1f})">{ylabel}</text>')
    parts.append(f'<text x="{(x0 + x1) / 2:.1f}" y="25" font-size="14" '
                 f'text-anchor="middle">{title}</text>')
    return sx, sy


def _polyline(parts, xs, ys, sx, sy, color, dash=None, markers=False):
    pts = " ".join(f"{sx(x):.3f},{sy(y):.3f}" for x, y in zip(xs, ys))
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}"'
                 f'{dash_attr} stroke-width="1.5"/>')
    if markers:
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{sx(x):.3f}" cy="{sy(y):.3f}" r="3" fill="{color}"/>')


def convergence_plot_svg(nus, sup_by_p: dict, path, title="vorticity-gap convergence"):
    """Log-log scatter of sup_t gap norms against nu, one polyline per p."""
    parts = _svg_open()
    all_y = [v for vals in sup_by_p.values() for v in vals if v and v > 0]
    lx = [math.log10(v) for v in nus]
    ly = [math.log10(v) for v in all_y]
    sx, sy = _axes(parts, min(lx) - 0.2, max(lx) + 0.2, min(ly) - 0.2, max(ly) + 0.2,
                   "log10 nu", "log10 sup-gap", title)
    colors = {"l1": "#1f77b4", "l2": "#d62728", "l4": "#2ca02c", "linf": "#9467bd"}
    for key, vals in sorted(sup_by_p.items()):
        pts = [(math.log10(nu), math.log10(v)) for nu, v in zip(nus, vals) if v and v > 0]
        if len(pts) >= 2:
            xs, ys = zip(*pts)
            _polyline(parts, xs, ys, sx, sy, colors.get(key, "black"), markers=True)
            parts.append(f'<text x="{sx(xs[-1]) + 6:.1f}" y="{sy(ys[-1]):.1f}" '
                         f'font-size="11" fill="{colors.get(key, "black")}">{key}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def envelope_plot_svg(times, measured, env_values, env_mask, path,
                      title="measured y(t) vs envelope"):
    """Linear-axes plot of a measured series against its masked envelope."""
    parts = _svg_open()
    measured = [float(v) for v in measured]
    finite_env = [float(v) for v, m in zip(env_values, env_mask)
                  if m and v is not None and math.isfinite(v)]
    ymax = max(measured + finite_env) if (measured or finite_env) else 1.0
    sx, sy = _axes(parts, float(times[0]), float(times[-1]), 0.0, 1.05 * ymax + 1e-300,
                   "t", "y", title)
    _polyline(parts, list(times), measured, sx, sy, "#d62728")
    seg_x, seg_y = [], []
    for t, v, m in zip(times, env_values, env_mask):
        if m and v is not None and math.isfinite(v):
            seg_x.append(float(t))
            seg_y.append(float(v))
        elif seg_x:
            _polyline(parts, seg_x, seg_y, sx, sy, "#1f77b4", dash="4,3")
            seg_x, seg_y = [], []
    if seg_x:
        _polyline(parts, seg_x, seg_y, sx, sy, "#1f77b4", dash="4,3")
    parts.append(f'<text x="{_SVG_W - _MARGIN:.1f}" y="40" font-size="11" text-anchor="end" '
                 f'fill="#d62728">measured</text>')
    parts.append(f'<text x="{_SVG_W - _MARGIN:.1f}" y="55" font-size="11" text-anchor="end" '
                 f'fill="#1f77b4">envelope (valid windows)</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def emit_plot_svg(plot: dict, path):
    """Dispatch on plot kind: 'convergence' (log-log) or 'envelope' (linear)."""
    kind = plot.get("kind")
    if kind == "convergence":
        convergence_plot_svg(plot["nus"], plot["sup_by_p"], path,
                             plot.get("title", "vorticity-gap convergence"))
    elif kind == "envelope":
        envelope_plot_svg(plot["times"], plot["measured"], plot["env_values"],
                          plot["env_mask"], path, plot.get("title", "measured vs envelope"))
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
