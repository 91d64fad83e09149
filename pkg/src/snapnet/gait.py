"""Foot-tip kinematics and the ratchet locomotion model.

The dome's tilt maps lobe deflections to a planar tip path: the asymmetry
between the lobes swings the pillar tip forward/back, the mean deflection
pushes it down. Over one drive cycle the tip traces a closed loop whose
nonzero enclosed area is what lets a single pressure input produce net
locomotion.

Ground contact is a kinematic ratchet: a tip below the contact height
sticks while moving rearward (dragging the body forward) and slips freely
while moving forward. The body therefore never moves backward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GridMismatchError,
    MissingGroupEventError,
    NoEventsError,
    OpenPathError,
    TooShortError,
    UnknownElementError,
    UnpairedEventError,
)
from .netsim import SNAP_BACK, SNAP_THROUGH, SnapEvent, Trace

BODY_LENGTH = 0.025  # m, side length of the assembled quadruped

WALKING = "WALKING"
JUMP_LIKE = "JUMP_LIKE"


@dataclass(frozen=True)
class TipKinematics:
    """Linear tilt map calibrated against the reference trajectory.

    x = lateral_gain * (w_weak - w_strong)
    y = -vertical_gain * (w_weak + w_strong) / 2

    with w each lobe's deflection normalized by its closed-to-open span.
    The pillar length is carried for reference; the small-angle tilt it
    produces is folded into the gains.
    """

    lateral_gain: float
    vertical_gain: float
    pillar_length: float = 5e-3

    def check(self) -> None:
        if not (self.pillar_length > 0.0):
            raise ValueError("pillar_length must be positive")
        if not (math.isfinite(self.lateral_gain) and math.isfinite(self.vertical_gain)):
            raise ValueError("gains must be finite")


@dataclass(frozen=True)
class TipPath:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    leg: str = ""


@dataclass(frozen=True)
class ContactModel:
    """RATCHET: stick when in contact (y <= contact_height) and the tip
    moves rearward relative to the body, slip otherwise."""

    contact_height: float
    mode: str = "RATCHET"


@dataclass(frozen=True)
class GaitResult:
    t: np.ndarray
    displacement: np.ndarray  # body position, m
    stride: float  # m per cycle (final full period)
    speed: float  # m/s, final displacement / duration
    normalized_speed: float  # body lengths per second
    regime: str | None = None
    phases: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()


def _normalized_deflections(trace: Trace, element: str) -> tuple[np.ndarray, np.ndarray]:
    if element not in trace.element_names:
        raise UnknownElementError(
            f"element {element!r} not in trace (has {list(trace.element_names)})"
        )
    ei = trace.element_names.index(element)
    cols = {
        trace.lobe_labels[l]: l
        for l in range(len(trace.lobe_element))
        if trace.lobe_element[l] == ei
    }
    el = trace.network.elements[ei].element
    out = []
    for label, pv in (("weak", el.weak), ("strong", el.strong)):
        s = pv.spec
        v = trace.volumes[:, cols[label]]
        out.append((v - s.v_closed) / (s.v_open - s.v_closed))
    return out[0], out[1]


def tip_trajectory(trace: Trace, element: str, kin: TipKinematics) -> TipPath:
    """Planar tip path of one element's pillar over the trace."""
    kin.check()
    w_weak, w_strong = _normalized_deflections(trace, element)
    x = kin.lateral_gain * (w_weak - w_strong)
    y = -kin.vertical_gain * 0.5 * (w_weak + w_strong)
    return TipPath(t=trace.t, x=x, y=y, leg=element)


def calibrate_kinematics(
    trace: Trace, element: str, x_range: float, y_range: float
) -> TipKinematics:
    """Gains that make the element's path span the given x/y ranges on
    this reference trace."""
    w_weak, w_strong = _normalized_deflections(trace, element)
    dx = w_weak - w_strong
    yb = 0.5 * (w_weak + w_strong)
    raw_x = float(dx.max() - dx.min())
    raw_y = float(yb.max() - yb.min())
    if raw_x <= 0.0 or raw_y <= 0.0:
        raise OpenPathError("reference trace has a degenerate tip path")
    return TipKinematics(lateral_gain=x_range / raw_x, vertical_gain=y_range / raw_y)


def swept_area(
    path: TipPath, closure_tol: float = 0.02
) -> tuple[float, int]:
    """Absolute shoelace area of the cycle-closed path and its orientation
    (+1 counterclockwise, -1 clockwise, 0 degenerate).

    Raises OpenPathError when the endpoints differ by more than
    closure_tol times the path diameter.
    """
    x = np.asarray(path.x, dtype=float)
    y = np.asarray(path.y, dtype=float)
    if len(x) < 3:
        raise OpenPathError("path too short to enclose area")
    dx = x.max() - x.min()
    dy = y.max() - y.min()
    diam = math.hypot(dx, dy)
    gap = math.hypot(x[-1] - x[0], y[-1] - y[0])
    if diam > 0.0 and gap > closure_tol * diam:
        raise OpenPathError(
            f"path endpoints differ by {gap:.3g} (> {closure_tol:.0%} of diameter "
            f"{diam:.3g}); does it cover a full cycle?"
        )
    xs = np.append(x, x[0])
    ys = np.append(y, y[0])
    signed = 0.5 * float(np.sum(xs[:-1] * ys[1:] - xs[1:] * ys[:-1]))
    if signed > 0.0:
        orient = 1
    elif signed < 0.0:
        orient = -1
    else:
        orient = 0
    return abs(signed), orient


def body_displacement(
    paths: list[TipPath],
    contact: ContactModel,
    period: float,
    phases: dict | None = None,
    body_length: float = BODY_LENGTH,
    regime: str | None = None,
    warnings: tuple[str, ...] = (),
) -> GaitResult:
    """Ratchet gait: at each step the legs in contact and moving rearward
    transfer the mean of their -dx to the body. Requires all paths to share
    one time grid."""
    if not paths:
        raise GridMismatchError("need at least one tip path")
    t = paths[0].t
    for p in paths[1:]:
        if len(p.t) != len(t) or not np.array_equal(p.t, t):
            raise GridMismatchError("tip paths are on different time grids")
    n = len(t)
    disp = np.zeros(n)
    xs = [p.x for p in paths]
    ys = [p.y for p in paths]
    for k in range(1, n):
        push = 0.0
        npush = 0
        for x, y in zip(xs, ys):
            if y[k - 1] <= contact.contact_height:
                dx = x[k] - x[k - 1]
                if dx < 0.0:
                    push += -dx
                    npush += 1
        disp[k] = disp[k - 1] + (push / npush if npush else 0.0)
    duration = float(t[-1] - t[0])
    speed = float(disp[-1]) / duration if duration > 0 else 0.0
    if period > 0 and t[-1] - period >= t[0]:
        d_start = float(np.interp(t[-1] - period, t, disp))
        stride = float(disp[-1]) - d_start
    else:
        stride = float(disp[-1])
    return GaitResult(
        t=t,
        displacement=disp,
        stride=stride,
        speed=speed,
        normalized_speed=speed / body_length,
        regime=regime,
        phases=phases or {},
        warnings=warnings,
    )


def infer_groups(trace: Trace) -> dict[str, list[str]]:
    """Rear/front element groups by graph distance from the driving
    pressure source: the group nearest the inlet acts as the hind legs."""
    from .elements import SourceKind

    net = trace.network
    src_nodes = [
        ns.node for ns in net.sources if ns.source.kind != SourceKind.VENT
    ]
    if not src_nodes:
        raise MissingGroupEventError("network has no driving source")
    neighbors: dict[str, set[str]] = {}
    for e in net.edges:
        neighbors.setdefault(e.node_a, set()).add(e.node_b)
        neighbors.setdefault(e.node_b, set()).add(e.node_a)
    dist = {n: 0 for n in src_nodes}
    frontier = list(src_nodes)
    while frontier:
        nxt = []
        for n in frontier:
            for m in neighbors.get(n, ()):
                if m not in dist:
                    dist[m] = dist[n] + 1
                    nxt.append(m)
        frontier = nxt
    elem_dist = {}
    for ne in net.elements:
        if ne.node in dist:
            elem_dist[ne.name] = dist[ne.node]
    if not elem_dist:
        raise MissingGroupEventError("no element is reachable from the source")
    dmin = min(elem_dist.values())
    dmax = max(elem_dist.values())
    rear = [n for n, d in elem_dist.items() if d == dmin]
    front = [n for n, d in elem_dist.items() if d == dmax]
    if dmin == dmax:
        return {"rear": rear, "front": []}
    return {"rear": rear, "front": front}


def classify_regime(
    trace: Trace,
    period: float | None = None,
    groups: dict[str, list[str]] | None = None,
) -> tuple[str, tuple[str, ...]]:
    """JUMP_LIKE iff the front-group strong lobes register no snap-through
    in the final analyzed period while the rear group still snaps; WALKING
    otherwise. Requires the trace to cover at least 3 drive periods.

    Returns (regime, warnings)."""
    if period is None:
        period = trace.source_period()
    if period is None or period <= 0:
        raise TooShortError("trace has no periodic source to define a period")
    t_end = float(trace.t[-1])
    if t_end < 3.0 * period:
        raise TooShortError(
            f"trace covers {t_end / period:.2f} periods; need at least 3"
        )
    if groups is None:
        groups = infer_groups(trace)
    w0 = t_end - period
    rear = set(groups.get("rear", ()))
    front = set(groups.get("front", ()))
    rear_st = front_st = 0
    for e in trace.events:
        if e.kind != SNAP_THROUGH or e.lobe != "strong" or e.time < w0:
            continue
        if e.element in rear:
            rear_st += 1
        elif e.element in front:
            front_st += 1
    warnings: tuple[str, ...] = ()
    if rear_st == 0:
        warnings = ("no strong-lobe snap-through events in the final period",)
        return WALKING, warnings
    if front and front_st == 0:
        return JUMP_LIKE, warnings
    return WALKING, warnings


def phase_diagram(
    events: list[SnapEvent],
    period: float,
    t_start: float = 0.0,
    t_end: float | None = None,
) -> dict[str, list[tuple[float, float]]]:
    """Per-element activation intervals [snap-through, snap-back) of the
    strong lobe, modulo the period and normalized to [0, 1).

    Intervals may wrap (start > end means the activation spans the period
    boundary). Raises UnpairedEventError when a snap-through in the window
    has no matching snap-back."""
    if period <= 0.0:
        raise TooShortError("period must be positive")
    out: dict[str, list[tuple[float, float]]] = {}
    open_at: dict[str, float] = {}
    for e in sorted(events, key=lambda e: e.time):
        if e.lobe != "strong":
            continue
        if e.time < t_start or (t_end is not None and e.time >= t_end):
            continue
        if e.kind == SNAP_THROUGH:
            if e.element in open_at:
                raise UnpairedEventError(
                    f"element {e.element!r}: two snap-throughs without a snap-back"
                )
            open_at[e.element] = e.time
        elif e.kind == SNAP_BACK:
            if e.element not in open_at:
                continue  # released an activation that began before the window
            t0 = open_at.pop(e.element)
            a = math.fmod(t0 - t_start, period) / period
            b = math.fmod(e.time - t_start, period) / period
            out.setdefault(e.element, []).append((a, b))
    if open_at:
        names = sorted(open_at)
        raise UnpairedEventError(
            f"snap-through without matching snap-back for {names}"
        )
    return out
