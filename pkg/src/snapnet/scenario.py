"""Scenario files: the human-editable JSON format the CLI consumes.

Every numeric field name carries its unit (mbar, mL, uL, s); values are
converted to SI on load. Unknown keys are rejected so a typo cannot
silently change a run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .elements import (
    SnapElement,
    SnapSpec,
    Source,
    SourceKind,
    build_cubic_pv,
)
from .errors import ScenarioParseError
from .netsim import (
    Edge,
    NamedCapacitance,
    NamedElement,
    NamedSource,
    Network,
    SolverConfig,
)
from .units import (
    CAP_PER_UL_MBAR,
    M3_PER_ML,
    M3_PER_UL,
    P_ATM,
    PA_PER_MBAR,
    RES_PER_MBAR_S_ML,
)

SCHEMA_VERSION = 1

PRESET_NAMES = ("single_dome", "quadruped_1hz", "freq_sweep")
TARGET_PRESET_NAMES = ("fig10", "experiment")


@dataclass(frozen=True)
class GaitSettings:
    legs: tuple[str, ...]
    lateral_gain: float  # m per unit asymmetry
    vertical_gain: float  # m per unit mean deflection
    contact_height: float | None  # m; None disables locomotion
    body_length: float = 0.025
    pillar_length: float = 5e-3
    groups: dict | None = None


@dataclass(frozen=True)
class SweepSettings:
    frequencies_hz: tuple[float, ...]
    periods: float = 6.0


@dataclass(frozen=True)
class Scenario:
    name: str
    network: Network
    solver: SolverConfig
    t_end: float
    seed: int = 0
    gait: GaitSettings | None = None
    sweep: SweepSettings | None = None
    analysis: tuple[str, ...] = ()
    raw: dict = field(default_factory=dict, repr=False)


class _Ctx:
    """Tracks the JSON path for error messages."""

    def __init__(self, path: str = ""):
        self.path = path

    def at(self, key) -> "_Ctx":
        return _Ctx(f"{self.path}.{key}" if self.path else str(key))

    def fail(self, msg: str):
        where = self.path or "<root>"
        raise ScenarioParseError(f"{where}: {msg}")


def _need(d: dict, key: str, ctx: _Ctx):
    if key not in d:
        ctx.fail(f"missing required field {key!r}")
    return d[key]


def _num(d: dict, key: str, ctx: _Ctx, default=None):
    if key not in d:
        if default is not None:
            return default
        ctx.fail(f"missing required field {key!r}")
    v = d[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        ctx.at(key).fail(f"expected a number, got {v!r}")
    return float(v)


def _check_keys(d: dict, allowed: set[str], ctx: _Ctx):
    for k in d:
        if k not in allowed:
            ctx.fail(f"unknown field {k!r} (allowed: {sorted(allowed)})")


def _parse_lobe(d: dict, ctx: _Ctx) -> SnapSpec:
    _check_keys(
        d,
        {"p_snap_through_mbar", "p_snap_back_mbar", "v_fold_lo_ul", "v_fold_hi_ul"},
        ctx,
    )
    return SnapSpec.from_folds(
        p_snap_through=_num(d, "p_snap_through_mbar", ctx) * PA_PER_MBAR,
        p_snap_back=_num(d, "p_snap_back_mbar", ctx) * PA_PER_MBAR,
        v_fold_lo=_num(d, "v_fold_lo_ul", ctx) * M3_PER_UL,
        v_fold_hi=_num(d, "v_fold_hi_ul", ctx) * M3_PER_UL,
    )


def _parse_element(d: dict, ctx: _Ctx) -> NamedElement:
    allowed = {
        "name", "node", "weak", "strong", "tau_snap_s", "tau_snap_strong_s",
        "base_chamber_volume_ul", "saturation_margin",
    }
    _check_keys(d, allowed, ctx)
    name = _need(d, "name", ctx)
    node = _need(d, "node", ctx)
    weak = build_cubic_pv(_parse_lobe(_need(d, "weak", ctx), ctx.at("weak")))
    strong = build_cubic_pv(_parse_lobe(_need(d, "strong", ctx), ctx.at("strong")))
    tau_strong = d.get("tau_snap_strong_s")
    element = SnapElement(
        weak=weak,
        strong=strong,
        tau_snap=_num(d, "tau_snap_s", ctx, default=5e-3),
        tau_snap_strong=float(tau_strong) if tau_strong is not None else None,
        base_chamber_volume=_num(d, "base_chamber_volume_ul", ctx, default=274.9)
        * M3_PER_UL,
        saturation_margin=_num(d, "saturation_margin", ctx, default=0.5),
    )
    return NamedElement(name=name, node=node, element=element)


def _parse_source(d: dict, ctx: _Ctx) -> NamedSource:
    allowed = {
        "name", "node", "kind", "amplitude_ml_per_s", "amplitude_mbar",
        "frequency_hz", "switching_delay_s", "target_volume_ml",
    }
    _check_keys(d, allowed, ctx)
    kind_s = _need(d, "kind", ctx)
    try:
        kind = SourceKind(kind_s)
    except ValueError:
        ctx.at("kind").fail(f"unknown source kind {kind_s!r}")
    if kind == SourceKind.FLOW_RAMP:
        amplitude = _num(d, "amplitude_ml_per_s", ctx) * M3_PER_ML
    elif kind == SourceKind.PRESSURE_RAMP_WAVE:
        amplitude = _num(d, "amplitude_mbar", ctx) * PA_PER_MBAR
    else:
        amplitude = 0.0
    src = Source(
        kind=kind,
        amplitude=amplitude,
        frequency=_num(d, "frequency_hz", ctx, default=0.0),
        switching_delay=_num(d, "switching_delay_s", ctx, default=0.0),
        target_volume=_num(d, "target_volume_ml", ctx, default=0.0) * M3_PER_ML,
    )
    return NamedSource(name=_need(d, "name", ctx), node=_need(d, "node", ctx), source=src)


def _parse_network(d: dict, ctx: _Ctx) -> Network:
    allowed = {"nodes", "ambient", "edges", "elements", "capacitances", "sources"}
    _check_keys(d, allowed, ctx)
    nodes = _need(d, "nodes", ctx)
    if not isinstance(nodes, list) or not all(isinstance(n, str) for n in nodes):
        ctx.at("nodes").fail("expected a list of node names")
    edges = []
    for i, e in enumerate(d.get("edges", [])):
        ectx = ctx.at(f"edges[{i}]")
        _check_keys(e, {"from", "to", "resistance_mbar_s_per_ml"}, ectx)
        edges.append(
            Edge(
                node_a=_need(e, "from", ectx),
                node_b=_need(e, "to", ectx),
                resistance=_num(e, "resistance_mbar_s_per_ml", ectx)
                * RES_PER_MBAR_S_ML,
            )
        )
    elements = [
        _parse_element(e, ctx.at(f"elements[{i}]"))
        for i, e in enumerate(d.get("elements", []))
    ]
    caps = []
    for i, c in enumerate(d.get("capacitances", [])):
        cctx = ctx.at(f"capacitances[{i}]")
        _check_keys(c, {"name", "node", "capacitance_ul_per_mbar", "volume_ml"}, cctx)
        if "volume_ml" in c:
            cap = _num(c, "volume_ml", cctx) * M3_PER_ML / P_ATM
        else:
            cap = _num(c, "capacitance_ul_per_mbar", cctx) * CAP_PER_UL_MBAR
        caps.append(
            NamedCapacitance(
                name=_need(c, "name", cctx), node=_need(c, "node", cctx), capacitance=cap
            )
        )
    sources = [
        _parse_source(s, ctx.at(f"sources[{i}]"))
        for i, s in enumerate(d.get("sources", []))
    ]
    return Network(
        nodes=tuple(nodes),
        ambient=d.get("ambient"),
        edges=tuple(edges),
        elements=tuple(elements),
        capacitances=tuple(caps),
        sources=tuple(sources),
    )


def parse_scenario(doc: dict, name_hint: str = "") -> Scenario:
    ctx = _Ctx()
    if not isinstance(doc, dict):
        ctx.fail("scenario must be a JSON object")
    allowed = {
        "name", "description", "schema_version", "network", "solver",
        "t_end_s", "seed", "gait", "sweep", "analysis",
    }
    _check_keys(doc, allowed, ctx)
    if "network" not in doc:
        ctx.fail("missing required `network` section")
    network = _parse_network(doc["network"], ctx.at("network"))

    sctx = ctx.at("solver")
    s = doc.get("solver", {})
    _check_keys(
        s, {"dt_min_s", "dt_max_s", "rtol", "atol", "max_steps"}, sctx
    )
    solver = SolverConfig(
        dt_min=_num(s, "dt_min_s", sctx, default=1e-5),
        dt_max=_num(s, "dt_max_s", sctx, default=1e-4),
        rtol=_num(s, "rtol", sctx, default=1e-6),
        atol=_num(s, "atol", sctx, default=1e-12),
        max_steps=int(_num(s, "max_steps", sctx, default=2_000_000)),
    )

    gait = None
    if "gait" in doc:
        g = doc["gait"]
        gctx = ctx.at("gait")
        _check_keys(
            g,
            {
                "legs", "lateral_gain_mm", "vertical_gain_mm", "contact_height_mm",
                "body_length_mm", "pillar_length_mm", "groups",
            },
            gctx,
        )
        legs = _need(g, "legs", gctx)
        contact = g.get("contact_height_mm")
        gait = GaitSettings(
            legs=tuple(legs),
            lateral_gain=_num(g, "lateral_gain_mm", gctx) * 1e-3,
            vertical_gain=_num(g, "vertical_gain_mm", gctx) * 1e-3,
            contact_height=float(contact) * 1e-3 if contact is not None else None,
            body_length=_num(g, "body_length_mm", gctx, default=25.0) * 1e-3,
            pillar_length=_num(g, "pillar_length_mm", gctx, default=5.0) * 1e-3,
            groups=g.get("groups"),
        )

    sweep = None
    if "sweep" in doc:
        w = doc["sweep"]
        wctx = ctx.at("sweep")
        _check_keys(w, {"frequencies_hz", "periods"}, wctx)
        freqs = _need(w, "frequencies_hz", wctx)
        if not isinstance(freqs, list) or not freqs:
            wctx.at("frequencies_hz").fail("expected a non-empty list")
        if any((not isinstance(f, (int, float))) or f <= 0 for f in freqs):
            wctx.at("frequencies_hz").fail("frequencies must be positive numbers")
        sweep = SweepSettings(
            frequencies_hz=tuple(float(f) for f in freqs),
            periods=_num(w, "periods", wctx, default=6.0),
        )

    return Scenario(
        name=doc.get("name", name_hint or "scenario"),
        network=network,
        solver=solver,
        t_end=_num(doc, "t_end_s", ctx),
        seed=int(_num(doc, "seed", ctx, default=0)),
        gait=gait,
        sweep=sweep,
        analysis=tuple(doc.get("analysis", ())),
        raw=doc,
    )


def load_scenario(spec: str | Path) -> tuple[Scenario, bytes]:
    """Load a scenario from a preset name or a file path. Returns the
    parsed scenario and the raw bytes (hashed into the manifest)."""
    raw = _read_source(spec)
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ScenarioParseError(f"{spec}: not valid JSON ({exc})") from exc
    name_hint = Path(str(spec)).stem
    return parse_scenario(doc, name_hint=name_hint), raw


def _read_source(spec: str | Path) -> bytes:
    p = Path(str(spec))
    if p.exists():
        return p.read_bytes()
    name = str(spec)
    if name in PRESET_NAMES or name in TARGET_PRESET_NAMES:
        ref = resources.files("snapnet.presets").joinpath(f"{name}.json")
        return ref.read_bytes()
    raise ScenarioParseError(
        f"scenario {spec!r} is neither an existing file nor a preset "
        f"(presets: {', '.join(PRESET_NAMES)})"
    )


def dump_scenario(doc: dict) -> str:
    """Canonical serialization: emitted files re-parse identically."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
