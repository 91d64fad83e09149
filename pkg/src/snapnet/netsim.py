"""Pressure-node network assembly and stiff time integration.

A Network is a graph of named pressure nodes joined by fluidic
resistances, with snap elements / plain gas capacitances storing gas at
nodes and sources driving them. Nodes carrying a pressure-type source
(PRESSURE_RAMP_WAVE or VENT) and the ambient node are boundary nodes with
prescribed pressure; all others are free and carry a gas-content state.

simulate() integrates the network with an adaptive implicit scheme (see
snapnet._core) and returns an immutable Trace: sample times, node
pressures, lobe volumes, branch states, snap events and the cumulative
injected/vented volume. Identical inputs produce bit-identical traces.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _core
from .elements import Branch, SnapElement, Source, SourceKind, source_value
from .errors import (
    DanglingReferenceError,
    DisconnectedGraphError,
    NetworkInvariantError,
    NonfiniteStateError,
    NonpositiveResistanceError,
    StepFailureError,
)
from .units import P_ATM, m3_to_ul, pa_to_mbar

SNAP_THROUGH = "SNAP_THROUGH"
SNAP_BACK = "SNAP_BACK"
LOBE_NAMES = ("weak", "strong")


@dataclass(frozen=True)
class Edge:
    node_a: str
    node_b: str
    resistance: float


@dataclass(frozen=True)
class NamedElement:
    name: str
    node: str
    element: SnapElement


@dataclass(frozen=True)
class NamedCapacitance:
    """Plain linear gas capacitance: stored standard volume = C * p."""

    name: str
    node: str
    capacitance: float


@dataclass(frozen=True)
class NamedSource:
    name: str
    node: str
    source: Source


@dataclass(frozen=True)
class Network:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...] = ()
    elements: tuple[NamedElement, ...] = ()
    capacitances: tuple[NamedCapacitance, ...] = ()
    sources: tuple[NamedSource, ...] = ()
    ambient: str | None = None

    def boundary_nodes(self) -> list[str]:
        """Nodes with prescribed pressure, in canonical order: pressure/vent
        source nodes first (declaration order), then the ambient node."""
        out = []
        for ns in self.sources:
            if ns.source.kind != SourceKind.FLOW_RAMP and ns.node not in out:
                out.append(ns.node)
        if self.ambient is not None and self.ambient not in out:
            out.append(self.ambient)
        return out

    def free_nodes(self) -> list[str]:
        bnd = set(self.boundary_nodes())
        return [n for n in self.nodes if n not in bnd]

    def element_names(self) -> list[str]:
        return [ne.name for ne in self.elements]


def validate(network: Network) -> Network:
    """Check all Network invariants; returns the canonicalized network
    (stable node ordering, used for trace columns and state layout).

    Raises DanglingReferenceError / NonpositiveResistanceError /
    DisconnectedGraphError / NetworkInvariantError naming the offending
    entity.
    """
    declared = list(network.nodes)
    if network.ambient is not None and network.ambient not in declared:
        declared.append(network.ambient)
    seen = set()
    for n in declared:
        if n in seen:
            raise NetworkInvariantError(f"duplicate node name {n!r}")
        seen.add(n)

    names = set()
    for group in (network.elements, network.capacitances, network.sources):
        for item in group:
            if item.name in names:
                raise NetworkInvariantError(f"duplicate component name {item.name!r}")
            names.add(item.name)

    for e in network.edges:
        for n in (e.node_a, e.node_b):
            if n not in seen:
                raise DanglingReferenceError(f"edge references unknown node {n!r}")
        if e.node_a == e.node_b:
            raise NetworkInvariantError(f"edge connects node {e.node_a!r} to itself")
        if not (e.resistance > 0.0) or not math.isfinite(e.resistance):
            raise NonpositiveResistanceError(
                f"edge {e.node_a!r}-{e.node_b!r} has resistance {e.resistance}"
            )
    for ne in network.elements:
        if ne.node not in seen:
            raise DanglingReferenceError(
                f"element {ne.name!r} references unknown node {ne.node!r}"
            )
        ne.element.check()
    for nc in network.capacitances:
        if nc.node not in seen:
            raise DanglingReferenceError(
                f"capacitance {nc.name!r} references unknown node {nc.node!r}"
            )
        if not (nc.capacitance > 0.0):
            raise NetworkInvariantError(
                f"capacitance {nc.name!r} must be positive, got {nc.capacitance}"
            )
    for ns in network.sources:
        if ns.node not in seen:
            raise DanglingReferenceError(
                f"source {ns.name!r} references unknown node {ns.node!r}"
            )
        ns.source.check()

    boundary = set(network.boundary_nodes())
    for ne in network.elements:
        if ne.node in boundary:
            raise NetworkInvariantError(
                f"element {ne.name!r} sits on prescribed-pressure node {ne.node!r}; "
                "storage on boundary nodes is not supported"
            )
    for nc in network.capacitances:
        if nc.node in boundary:
            raise NetworkInvariantError(
                f"capacitance {nc.name!r} sits on prescribed-pressure node {nc.node!r}"
            )

    # every free node needs storage (otherwise its pressure state is
    # algebraic, which the integrator does not model) ...
    free = network.free_nodes()
    storage = {n: 0.0 for n in free}
    for ne in network.elements:
        el = ne.element
        vmin = el.base_chamber_volume
        for pv in el.lobes:
            s = pv.spec
            vmin += s.v_closed - el.saturation_margin * (s.v_open - s.v_closed)
        if ne.node in storage:
            storage[ne.node] += vmin
    for nc in network.capacitances:
        if nc.node in storage:
            storage[nc.node] += nc.capacitance * P_ATM
    for n in free:
        if storage[n] <= 0.0:
            raise NetworkInvariantError(
                f"free node {n!r} has no positive gas storage; attach a "
                "capacitance or element (or make it a source node)"
            )

    # ... and must be reachable from a source or the ambient through edges
    neighbors: dict[str, set[str]] = {n: set() for n in seen}
    for e in network.edges:
        neighbors[e.node_a].add(e.node_b)
        neighbors[e.node_b].add(e.node_a)
    anchors = set(boundary)
    anchors.update(ns.node for ns in network.sources)
    reached = set(anchors)
    stack = list(anchors)
    while stack:
        cur = stack.pop()
        for nxt in neighbors[cur]:
            if nxt not in reached:
                reached.add(nxt)
                stack.append(nxt)
    unreachable = [n for n in free if n not in reached]
    if unreachable:
        raise DisconnectedGraphError(
            f"nodes {unreachable} are not connected to any source or boundary"
        )

    ordered_free = tuple(network.free_nodes())
    ordered = ordered_free + tuple(b for b in network.boundary_nodes())
    return replace(network, nodes=ordered)


@dataclass(frozen=True)
class SolverConfig:
    """Adaptive-step limits and tolerances. The dt defaults mirror the
    reference dynamic-implicit protocol (1e-5 .. 1e-4 s)."""

    dt_min: float = 1e-5
    dt_max: float = 1e-4
    rtol: float = 1e-6
    atol: float = 1e-12
    max_steps: int = 2_000_000
    tau_snap_override: float | None = None

    def check(self) -> None:
        if not (0.0 < self.dt_min <= self.dt_max):
            raise NetworkInvariantError(
                f"need 0 < dt_min <= dt_max, got {self.dt_min}, {self.dt_max}"
            )
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise NetworkInvariantError("tolerances must be positive")
        if self.max_steps <= 0:
            raise NetworkInvariantError("max_steps must be positive")


@dataclass(frozen=True)
class SnapEvent:
    time: float
    element: str
    lobe: str
    kind: str  # SNAP_THROUGH | SNAP_BACK
    pressure: float  # node gauge pressure at the event, Pa


@dataclass(frozen=True)
class Trace:
    """Immutable simulation record (adaptive time grid)."""

    t: np.ndarray  # [ns]
    node_names: tuple[str, ...]  # free nodes then boundary nodes
    n_free: int
    pressures: np.ndarray  # [ns, n_nodes] gauge Pa
    element_names: tuple[str, ...]
    lobe_element: tuple[int, ...]  # lobe -> element index
    lobe_labels: tuple[str, ...]  # lobe -> 'weak' | 'strong'
    volumes: np.ndarray  # [ns, nl] m3
    branches: np.ndarray  # [ns, nl] int8, 0 PRE / 1 POST
    events: tuple[SnapEvent, ...]
    injected: np.ndarray  # [ns] m3 (standard volume)
    vented: np.ndarray  # [ns] m3
    stored: np.ndarray  # [ns] m3, isothermal-corrected stored gas
    network: Network
    config: SolverConfig
    stats: dict = field(default_factory=dict)

    def mass_residual(self) -> np.ndarray:
        """injected - vented - stored at every sample (m3); bounded by the
        solver's nonlinear tolerance, far below 1e-9."""
        return self.injected - self.vented - self.stored

    def element_volume(self, element: str) -> np.ndarray:
        """Total cavity volume (base chamber + both lobes) of an element."""
        idx = self.element_names.index(element)
        cols = [k for k, e in enumerate(self.lobe_element) if e == idx]
        base = self.network.elements[idx].element.base_chamber_volume
        return base + self.volumes[:, cols].sum(axis=1)

    def source_period(self) -> float | None:
        """Period of the driving source, if any periodic source exists."""
        for ns in self.network.sources:
            if ns.source.frequency > 0.0:
                return 1.0 / ns.source.frequency
            if ns.source.kind == SourceKind.FLOW_RAMP and ns.source.amplitude > 0.0:
                return ns.source.cycle_time()
        return None


class KernelPack:
    """Flat array form of a validated network, consumed by the kernels."""

    def __init__(self, network: Network, config: SolverConfig, t_end: float):
        free = network.free_nodes()
        bnd = network.boundary_nodes()
        node_index = {n: i for i, n in enumerate(free)}
        for k, b in enumerate(bnd):
            node_index[b] = len(free) + k
        self.free = free
        self.bnd = bnd
        self.nn = len(free)
        self.nb = len(bnd)

        lobes_node: list[int] = []
        coef = []
        folds = []
        thresholds = []
        taus = []
        sats = []
        vinit = []
        branch0 = []
        lobe_element = []
        lobe_labels = []
        clin = np.zeros(self.nn)
        s0 = np.zeros(self.nn)
        for ei, ne in enumerate(network.elements):
            el = ne.element
            ni = node_index[ne.node]
            clin[ni] += el.base_chamber_volume / P_ATM
            if config.tau_snap_override is not None:
                el_taus = (config.tau_snap_override, config.tau_snap_override)
            else:
                el_taus = el.lobe_taus()
            for pos, (lobe_label, pv) in enumerate(zip(LOBE_NAMES, el.lobes)):
                s = pv.spec
                span = s.v_open - s.v_closed
                lobes_node.append(ni)
                coef.append((pv.a3, pv.a2, pv.a1, pv.a0))
                folds.append((s.v_fold_lo, s.v_fold_hi))
                thresholds.append((s.p_snap_through, s.p_snap_back))
                taus.append(el_taus[pos])
                sats.append(
                    (
                        s.v_closed - el.saturation_margin * span,
                        s.v_open + el.saturation_margin * span,
                    )
                )
                vinit.append(s.v_closed)
                branch0.append(int(el.initial_branches[pos]))
                lobe_element.append(ei)
                lobe_labels.append(lobe_label)
                s0[ni] += s.v_closed
        for nc in network.capacitances:
            clin[node_index[nc.node]] += nc.capacitance

        self.nl = len(lobes_node)
        self.lobe_node = np.array(lobes_node, dtype=np.int32)
        arr = np.array(coef, dtype=np.float64).reshape(self.nl, 4)
        self.lobe_c3 = arr[:, 0].copy()
        self.lobe_c2 = arr[:, 1].copy()
        self.lobe_c1 = arr[:, 2].copy()
        self.lobe_c0 = arr[:, 3].copy()
        fold_arr = np.array(folds, dtype=np.float64).reshape(self.nl, 2)
        self.lobe_v_fold_lo = fold_arr[:, 0].copy()
        self.lobe_v_fold_hi = fold_arr[:, 1].copy()
        th = np.array(thresholds, dtype=np.float64).reshape(self.nl, 2)
        self.lobe_p_snap_through = th[:, 0].copy()
        self.lobe_p_snap_back = th[:, 1].copy()
        self.lobe_tau = np.array(taus, dtype=np.float64)
        sat = np.array(sats, dtype=np.float64).reshape(self.nl, 2)
        self.lobe_sat_lo = sat[:, 0].copy()
        self.lobe_sat_hi = sat[:, 1].copy()
        self.lobe_vinit = np.array(vinit, dtype=np.float64)
        self.branch0 = np.array(branch0, dtype=np.int32)
        self.lobe_element = lobe_element
        self.lobe_labels = lobe_labels
        self.node_clin = clin
        self.node_s0 = s0

        # node -> lobe adjacency in CSR form, lobe order preserved
        counts = np.zeros(self.nn + 1, dtype=np.int32)
        for ni in lobes_node:
            counts[ni + 1] += 1
        self.adj_off = np.cumsum(counts).astype(np.int32)
        fill = self.adj_off[:-1].copy()
        self.adj_idx = np.zeros(self.nl, dtype=np.int32)
        for li, ni in enumerate(lobes_node):
            self.adj_idx[fill[ni]] = li
            fill[ni] += 1

        self.ne = len(network.edges)
        self.edge_a = np.array(
            [node_index[e.node_a] for e in network.edges], dtype=np.int32
        )
        self.edge_b = np.array(
            [node_index[e.node_b] for e in network.edges], dtype=np.int32
        )
        self.edge_r = np.array([e.resistance for e in network.edges], dtype=np.float64)

        # boundary sources: kind 0 = fixed zero gauge, 1 = ramp wave
        bkind = np.zeros(self.nb, dtype=np.int32)
        bamp = np.zeros(self.nb)
        bfreq = np.zeros(self.nb)
        for ns in network.sources:
            if ns.source.kind == SourceKind.PRESSURE_RAMP_WAVE:
                k = bnd.index(ns.node)
                bkind[k] = 1
                bamp[k] = ns.source.amplitude
                bfreq[k] = ns.source.frequency
        self.bnd_kind = bkind
        self.bnd_amp = bamp
        self.bnd_freq = bfreq

        flows = [ns for ns in network.sources if ns.source.kind == SourceKind.FLOW_RAMP]
        self.nfs = len(flows)
        self.flow_node = np.array(
            [node_index[ns.node] for ns in flows], dtype=np.int32
        )
        self.flow_amp = np.array([ns.source.amplitude for ns in flows])
        self.flow_target = np.array([ns.source.target_volume for ns in flows])
        self.flow_delay = np.array([ns.source.switching_delay for ns in flows])
        self.flow_freq = np.array([ns.source.frequency for ns in flows])

        marks: set[float] = set()
        for ns in network.sources:
            marks.update(ns.source.breakpoints(t_end))
        marks.add(t_end)
        self.breakpoints = np.array(sorted(marks), dtype=np.float64)

        self.y0 = np.zeros(self.nn + self.nl + 2)
        self.y0[self.nn : self.nn + self.nl] = self.lobe_vinit

        self.dt_min = config.dt_min
        self.dt_max = config.dt_max
        self.rtol = config.rtol
        self.atol = config.atol
        self.max_steps = config.max_steps


def simulate(
    network: Network,
    config: SolverConfig | None = None,
    t_end: float = 1.0,
    backend: str | None = None,
) -> Trace:
    """Integrate the network from rest over [0, t_end]."""
    config = config or SolverConfig()
    config.check()
    if not (t_end > 0.0):
        raise NetworkInvariantError(f"t_end must be positive, got {t_end}")
    net = validate(network)
    pack = KernelPack(net, config, t_end)
    kern = _core.get_backend(backend)
    status, ts, ys, branches, raw_events, stats = kern.integrate(pack)
    if status == 2:
        raise NonfiniteStateError("state became non-finite during integration")
    if status != 0:
        detail = {
            1: "tolerance not attainable at dt_min",
            3: f"exceeded max_steps={config.max_steps}",
        }.get(status, f"kernel status {status}")
        raise StepFailureError(detail)

    t = np.asarray(ts, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    br = np.asarray(branches, dtype=np.int8)
    nn = pack.nn
    nl = pack.nl

    vols = y[:, nn : nn + nl]
    injected = y[:, nn + nl]
    vented = y[:, nn + nl + 1]

    # node pressures: same algebra as the kernel, vectorized
    s_sum = np.zeros((len(t), nn))
    for l in range(nl):
        s_sum[:, pack.lobe_node[l]] += vols[:, l]
    denom = pack.node_clin[None, :] * P_ATM + s_sum
    p_free = (y[:, :nn] + (pack.node_s0[None, :] - s_sum)) * P_ATM / denom
    p_bnd = np.empty((len(t), pack.nb))
    for k, bname in enumerate(pack.bnd):
        if pack.bnd_kind[k] == 0:
            p_bnd[:, k] = 0.0
        else:
            src = Source(
                SourceKind.PRESSURE_RAMP_WAVE,
                amplitude=float(pack.bnd_amp[k]),
                frequency=float(pack.bnd_freq[k]),
            )
            p_bnd[:, k] = np.array([source_value(src, float(tt)) for tt in t])
    pressures = np.hstack([p_free, p_bnd]) if pack.nb else p_free

    # stored gas recomputed from the outputs (isothermal-corrected)
    stored = (pack.node_clin[None, :] * p_free).sum(axis=1)
    for l in range(nl):
        ni = pack.lobe_node[l]
        stored = stored + (
            (p_free[:, ni] + P_ATM) * vols[:, l] - P_ATM * pack.lobe_vinit[l]
        ) / P_ATM

    ev = []
    elem_names = tuple(net.element_names())
    for te, l, kind, pe in raw_events:
        ev.append(
            SnapEvent(
                time=float(te),
                element=elem_names[pack.lobe_element[l]],
                lobe=pack.lobe_labels[l],
                kind=SNAP_THROUGH if kind == 1 else SNAP_BACK,
                pressure=float(pe),
            )
        )

    return Trace(
        t=t,
        node_names=tuple(pack.free + pack.bnd),
        n_free=nn,
        pressures=pressures,
        element_names=elem_names,
        lobe_element=tuple(pack.lobe_element),
        lobe_labels=tuple(pack.lobe_labels),
        volumes=vols.copy(),
        branches=br,
        events=tuple(ev),
        injected=injected.copy(),
        vented=vented.copy(),
        stored=stored,
        network=net,
        config=config,
        stats=stats,
    )


def detect_snap_events(trace: Trace) -> list[SnapEvent]:
    """Events sorted by time (ties keep element declaration order, weak
    lobe first, as emitted by the kernel)."""
    return sorted(trace.events, key=lambda e: e.time)


# ---------------------------------------------------------------------------
# CSV export / import


def _fmt(x: float) -> str:
    return repr(float(x))


def trace_columns(trace: Trace) -> list[str]:
    cols = ["t_s"]
    cols += [f"p_{n}_mbar" for n in trace.node_names]
    for l, ei in enumerate(trace.lobe_element):
        cols.append(f"v_{trace.element_names[ei]}_{trace.lobe_labels[l]}_uL")
    for l, ei in enumerate(trace.lobe_element):
        cols.append(f"state_{trace.element_names[ei]}_{trace.lobe_labels[l]}")
    return cols


def write_trace_csv(trace: Trace, path) -> None:
    """Schema: t_s, p_<node>_mbar..., v_<element>_<lobe>_uL...,
    state_<element>_<lobe>... in canonical node ordering."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trace_columns(trace))
        for k in range(len(trace.t)):
            row = [_fmt(trace.t[k])]
            row += [_fmt(pa_to_mbar(x)) for x in trace.pressures[k]]
            row += [_fmt(m3_to_ul(x)) for x in trace.volumes[k]]
            row += [
                Branch(int(b)).name for b in trace.branches[k]
            ]
            w.writerow(row)


def write_events_csv(trace: Trace, path) -> None:
    """Schema: t_s, element, lobe, kind, p_mbar."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "element", "lobe", "kind", "p_mbar"])
        for e in detect_snap_events(trace):
            w.writerow(
                [_fmt(e.time), e.element, e.lobe, e.kind, _fmt(pa_to_mbar(e.pressure))]
            )
