"""Render the four figure kinds from snapnet CSV exports.

Inputs are the exact CSV schemas the snapnet CLI writes (trace, events,
tip paths, sweep); nothing else is consumed, so this package stays
decoupled from the simulator internals. Rendering is deterministic:
fixed figure geometry, bundled fonts, no timestamps in the output files,
so re-rendering identical inputs is byte-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("pressure_time", "pv_loop", "trajectory", "speed_freq")

EVENT_MARKER_GID = "event-markers"

_RC = {
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.25,
    "svg.hashsalt": "snapnet-plots",
}

PHASE_COLORS = {
    "instability": ("#b5834c", 0.18),  # weak-lobe bump region
    "snap": ("#9467bd", 0.18),
    "snap_back": ("#e0c040", 0.22),
}


class RenderError(Exception):
    pass


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[Path, ...]
    output: Path
    phase_shading: bool = True
    event_markers: bool = True

    def check(self) -> None:
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r} (have {KINDS})")
        if not self.inputs:
            raise RenderError("no input CSVs given")
        for p in self.inputs:
            if not p.exists():
                raise RenderError(f"input {p} does not exist")
        if self.output.suffix.lower() not in (".png", ".svg"):
            raise RenderError("output must be a .png or .svg file")


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise RenderError(f"{path.name}: empty file, nothing to draw")
    header, data = rows[0], rows[1:]
    if not data:
        raise RenderError(f"{path.name}: no data rows, refusing to draw a blank figure")
    return header, data


def _require(header: list[str], col: str, path: Path) -> int:
    if col not in header:
        raise RenderError(f"{path.name}: missing required column {col!r}")
    return header.index(col)


def _columns(header, data, path, names) -> dict[str, np.ndarray]:
    idx = {n: _require(header, n, path) for n in names}
    out = {}
    for n, i in idx.items():
        try:
            out[n] = np.array([float(r[i]) for r in data])
        except ValueError as exc:
            raise RenderError(f"{path.name}: column {n!r} is not numeric ({exc})") from exc
    return out


def load_trace(path: Path) -> dict:
    header, data = _read_csv(path)
    _require(header, "t_s", path)
    p_cols = [c for c in header if c.startswith("p_") and c.endswith("_mbar")]
    v_cols = [c for c in header if c.startswith("v_") and c.endswith("_uL")]
    if not p_cols:
        raise RenderError(f"{path.name}: missing required column 'p_<node>_mbar'")
    cols = _columns(header, data, path, ["t_s"] + p_cols + v_cols)
    return {
        "t": cols["t_s"],
        "p": {c: cols[c] for c in p_cols},
        "v": {c: cols[c] for c in v_cols},
    }


def load_events(path: Path) -> list[dict]:
    header, data = _read_csv(path)
    for col in ("t_s", "element", "lobe", "kind", "p_mbar"):
        _require(header, col, path)
    it, ie, il, ik, ip = (header.index(c) for c in ("t_s", "element", "lobe", "kind", "p_mbar"))
    return [
        {
            "t": float(r[it]), "element": r[ie], "lobe": r[il],
            "kind": r[ik], "p_mbar": float(r[ip]),
        }
        for r in data
    ]


def _split_inputs(spec: FigureSpec) -> tuple[Path, Path | None]:
    """First input is the main CSV; an events.csv may ride along."""
    main = spec.inputs[0]
    events = None
    for p in spec.inputs[1:]:
        events = p
    return main, events


def _mark_events(ax, events, y_of) -> None:
    xs = [e["t"] for e in events]
    ys = [y_of(e) for e in events]
    ax.plot(
        xs, ys, linestyle="none", marker="v", markersize=5,
        markerfacecolor="#d62728", markeredgecolor="black",
        markeredgewidth=0.5, zorder=5, label="snap events", gid=EVENT_MARKER_GID,
    )


def _fig_pressure_time(spec: FigureSpec):
    main, events_path = _split_inputs(spec)
    tr = load_trace(main)
    events = load_events(events_path) if events_path else []
    fig, ax = plt.subplots(figsize=(6.4, 3.6), constrained_layout=True)
    for name, p in tr["p"].items():
        label = name[2:-5]  # strip p_ and _mbar
        ax.plot(tr["t"], p, linewidth=1.2, label=label)
    if spec.phase_shading and events:
        _shade_phases(ax, events)
    if spec.event_markers and events:
        _mark_events(ax, events, lambda e: e["p_mbar"])
    ax.set_xlabel("time (s)")
    ax.set_ylabel("gauge pressure (mbar)")
    ax.set_title("Chamber pressure during the snap cycle")
    ax.legend(loc="best", fontsize=8)
    return fig


def _shade_phases(ax, events) -> None:
    """Shade the instability bump, the main snap and the snap-back windows
    of each element's strong/weak event sequence."""
    by_elem: dict[str, dict[str, list[float]]] = {}
    for e in events:
        by_elem.setdefault(e["element"], {}).setdefault(
            f"{e['lobe']}:{e['kind']}", []
        ).append(e["t"])
    spans = []
    for elem, table in by_elem.items():
        w_st = table.get("weak:SNAP_THROUGH", [])
        s_st = table.get("strong:SNAP_THROUGH", [])
        w_sb = table.get("weak:SNAP_BACK", [])
        s_sb = table.get("strong:SNAP_BACK", [])
        for t0 in s_st:
            before = [t for t in w_st if t < t0]
            if before:
                spans.append(("instability", max(before), t0))
        if s_st and s_sb:
            width = 0.04 * (max(s_sb) - min(s_st)) if max(s_sb) > min(s_st) else 0.01
            for t0 in s_st:
                spans.append(("snap", t0, t0 + width))
        for t1 in s_sb:
            before = [t for t in w_sb if t < t1]
            if before:
                spans.append(("snap_back", max(before), t1))
    seen_label = set()
    for name, a, b in spans[:24]:
        color, alpha = PHASE_COLORS[name]
        label = name.replace("_", "-") if name not in seen_label else None
        seen_label.add(name)
        ax.axvspan(a, b, color=color, alpha=alpha, label=label, linewidth=0)


def _fig_pv_loop(spec: FigureSpec):
    main, events_path = _split_inputs(spec)
    tr = load_trace(main)
    if not tr["v"]:
        raise RenderError(f"{main.name}: missing required column 'v_<element>_<lobe>_uL'")
    events = load_events(events_path) if events_path else []
    p = next(iter(tr["p"].values()))
    v = np.sum(list(tr["v"].values()), axis=0)
    fig, ax = plt.subplots(figsize=(4.8, 3.8), constrained_layout=True)
    ax.plot(v, p, linewidth=1.2, color="#1f77b4")
    if spec.event_markers and events:
        # threshold annotations at the strong-lobe snap pressures
        for e in events:
            if e["lobe"] != "strong":
                continue
            color = "#2ca02c" if e["kind"] == "SNAP_THROUGH" else "#ff7f0e"
            ax.axhline(e["p_mbar"], color=color, linewidth=0.8, linestyle="--")
            ax.annotate(
                f"{e['kind'].replace('_', '-').lower()} {e['p_mbar']:.1f} mbar",
                xy=(float(v.min()), e["p_mbar"]),
                xytext=(2, 2), textcoords="offset points",
                fontsize=7, color=color,
            )
        tv = {e["t"]: e for e in events}
        t = tr["t"]
        idx = np.searchsorted(t, sorted(tv))
        idx = np.clip(idx, 0, len(t) - 1)
        order = sorted(tv)
        ax.plot(
            [v[i] for i in idx], [tv[tt]["p_mbar"] for tt in order],
            linestyle="none", marker="v", markersize=5,
            markerfacecolor="#d62728", markeredgecolor="black",
            markeredgewidth=0.5, zorder=5, gid=EVENT_MARKER_GID,
        )
    ax.set_xlabel("cavity volume (uL)")
    ax.set_ylabel("gauge pressure (mbar)")
    ax.set_title("Pressure-volume loop")
    return fig


def _fig_trajectory(spec: FigureSpec):
    main, _ = _split_inputs(spec)
    header, data = _read_csv(main)
    for col in ("t_s", "leg", "x_mm", "y_mm"):
        _require(header, col, main)
    il = header.index("leg")
    legs: dict[str, list[tuple[float, float]]] = {}
    ix, iy = header.index("x_mm"), header.index("y_mm")
    for r in data:
        legs.setdefault(r[il], []).append((float(r[ix]), float(r[iy])))
    fig, ax = plt.subplots(figsize=(4.8, 3.8), constrained_layout=True)
    for leg in sorted(legs):
        pts = np.array(legs[leg])
        ax.plot(pts[:, 0], pts[:, 1], linewidth=1.0, label=leg)
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    ax.set_title("Foot-tip trajectory")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best", fontsize=8)
    return fig


def _fig_speed_freq(spec: FigureSpec):
    main, _ = _split_inputs(spec)
    header, data = _read_csv(main)
    for col in ("f_hz", "speed_mm_s", "stride_mm", "regime", "bl_per_s"):
        _require(header, col, main)
    i_f, i_s, i_r = header.index("f_hz"), header.index("speed_mm_s"), header.index("regime")
    rows = [(float(r[i_f]), float(r[i_s]), r[i_r]) for r in data]
    fig, ax = plt.subplots(figsize=(5.2, 3.6), constrained_layout=True)
    ax.plot([r[0] for r in rows], [r[1] for r in rows],
            color="#888888", linewidth=0.8, zorder=1)
    for regime, color in (("WALKING", "#1f77b4"), ("JUMP_LIKE", "#d62728")):
        pts = [(f, s) for f, s, r in rows if r == regime]
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], linestyle="none",
                    marker="o", markersize=6, color=color, label=regime, zorder=2)
    ax.set_xlabel("drive frequency (Hz)")
    ax.set_ylabel("speed (mm/s)")
    ax.set_title("Forward speed vs drive frequency")
    ax.legend(loc="best", fontsize=8)
    return fig


_BUILDERS = {
    "pressure_time": _fig_pressure_time,
    "pv_loop": _fig_pv_loop,
    "trajectory": _fig_trajectory,
    "speed_freq": _fig_speed_freq,
}


def build_figure(spec: FigureSpec):
    spec.check()
    with matplotlib.rc_context(_RC):
        return _BUILDERS[spec.kind](spec)


def render(spec: FigureSpec) -> Path:
    """Render the figure to spec.output; deterministic byte-for-byte."""
    fig = build_figure(spec)
    try:
        with matplotlib.rc_context(_RC):
            metadata = {"Date": None} if spec.output.suffix.lower() == ".svg" else {}
            fig.savefig(spec.output, metadata=metadata)
    finally:
        plt.close(fig)
    return spec.output
