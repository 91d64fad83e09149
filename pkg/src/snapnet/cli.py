"""Command-line entry point: `snapnet simulate|sweep|analyze|fit`.

Every command is a pure function of its input files: no wall-clock or
environment state reaches the outputs, so repeated runs are bit-identical.
Each run writes a manifest with the scenario hash and artifact checksums.

Exit codes: 0 ok, 2 parse/schema error, 3 validation error, 4 solver
failure, 5 fit budget exhausted (best-so-far still written).
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, _core, analysis, gait, netsim
from .errors import (
    EvaluatorFailure,
    ScenarioParseError,
    SnapnetError,
    StepFailureError,
    NonfiniteStateError,
)
from .netsim import SNAP_BACK, SNAP_THROUGH, Trace, simulate
from .scenario import (
    SCHEMA_VERSION,
    Scenario,
    dump_scenario,
    load_scenario,
    parse_scenario,
)
from .units import pa_to_mbar

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4
EXIT_MAX_EVALS = 5

OUT_DIR_ENV = "SNAPNET_OUT_DIR"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_manifest(
    out_dir: Path, command: str, scenario_name: str, scenario_bytes: bytes,
    seed: int, artifacts: list[Path], extra: dict | None = None
) -> Path:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "snapnet_version": __version__,
        "backend": _core.default_backend_name(),
        "command": command,
        "scenario_name": scenario_name,
        "scenario_sha256": _sha256(scenario_bytes),
        "seed": seed,
        "artifacts": {p.name: _sha256(p.read_bytes()) for p in artifacts},
    }
    if extra:
        doc.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _fmt(x: float) -> str:
    return repr(float(x))


def run_scenario(sc: Scenario, t_end: float | None = None) -> Trace:
    return simulate(sc.network, sc.solver, t_end if t_end is not None else sc.t_end)


def tip_paths(sc: Scenario, trace: Trace) -> list[gait.TipPath]:
    kin = gait.TipKinematics(
        lateral_gain=sc.gait.lateral_gain,
        vertical_gain=sc.gait.vertical_gain,
        pillar_length=sc.gait.pillar_length,
    )
    return [gait.tip_trajectory(trace, leg, kin) for leg in sc.gait.legs]


def write_tips_csv(paths: list[gait.TipPath], out: Path) -> None:
    """Schema: t_s, leg, x_mm, y_mm."""
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "leg", "x_mm", "y_mm"])
        for p in paths:
            for k in range(len(p.t)):
                w.writerow(
                    [_fmt(p.t[k]), p.leg, _fmt(p.x[k] * 1e3), _fmt(p.y[k] * 1e3)]
                )


def scenario_metrics(sc: Scenario, trace: Trace) -> dict:
    """Fit-target observables of a single-element scenario run."""
    out: dict = {}
    element = trace.element_names[0]
    st = [e for e in trace.events
          if e.element == element and e.lobe == "strong" and e.kind == SNAP_THROUGH]
    sb = [e for e in trace.events
          if e.element == element and e.lobe == "strong" and e.kind == SNAP_BACK]
    out["snap_through_mbar"] = pa_to_mbar(st[0].pressure) if st else float("nan")
    out["snap_back_mbar"] = pa_to_mbar(sb[0].pressure) if sb else float("nan")
    loop = analysis.pv_loop_from_trace(trace, element)
    out["hysteresis_ratio"] = analysis.loop_work(loop).ratio
    if sc.gait is not None and sc.gait.legs:
        path = tip_paths(sc, trace)[0]
        out["x_range_mm"] = float(path.x.max() - path.x.min()) * 1e3
        out["y_range_mm"] = float(path.y.max() - path.y.min()) * 1e3
        area, _ = gait.swept_area(path)
        out["swept_area_mm2"] = area * 1e6
    return out


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    sc, raw = load_scenario(args.scenario)
    if args.tol is not None:
        from dataclasses import replace

        sc = Scenario(**{**sc.__dict__, "solver": replace(sc.solver, rtol=args.tol)})
    out_dir = _out_dir(args)
    trace = run_scenario(sc)
    artifacts = []
    trace_path = out_dir / "trace.csv"
    netsim.write_trace_csv(trace, trace_path)
    artifacts.append(trace_path)
    events_path = out_dir / "events.csv"
    netsim.write_events_csv(trace, events_path)
    artifacts.append(events_path)
    if sc.gait is not None and sc.gait.legs:
        tips_path = out_dir / "tips.csv"
        write_tips_csv(tip_paths(sc, trace), tips_path)
        artifacts.append(tips_path)
    _write_manifest(out_dir, "simulate", sc.name, raw, sc.seed, artifacts)
    print(f"simulate {sc.name}: {len(trace.t)} samples, {len(trace.events)} events")
    print(f"  wrote {', '.join(p.name for p in artifacts)} and manifest.json in {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _with_frequency(doc: dict, freq: float) -> dict:
    doc = copy.deepcopy(doc)
    hits = 0
    for src in doc["network"].get("sources", []):
        if src.get("kind") == "PRESSURE_RAMP_WAVE":
            src["frequency_hz"] = freq
            hits += 1
    if hits == 0:
        raise ScenarioParseError(
            "sweep needs a PRESSURE_RAMP_WAVE source in the scenario"
        )
    return doc


def sweep_row(sc_doc: dict, freq: float, periods: float) -> dict:
    doc = _with_frequency(sc_doc, freq)
    doc["t_end_s"] = periods / freq
    sc = parse_scenario(doc)
    trace = run_scenario(sc)
    if sc.gait is None or sc.gait.contact_height is None:
        raise ScenarioParseError("sweep scenario needs a gait section with contact_height_mm")
    paths = tip_paths(sc, trace)
    contact = gait.ContactModel(contact_height=sc.gait.contact_height)
    res = gait.body_displacement(
        paths, contact, period=1.0 / freq, body_length=sc.gait.body_length
    )
    regime, warnings = gait.classify_regime(
        trace, period=1.0 / freq, groups=sc.gait.groups
    )
    return {
        "f_hz": freq,
        "speed_mm_s": res.speed * 1e3,
        "stride_mm": res.stride * 1e3,
        "regime": regime,
        "bl_per_s": res.normalized_speed,
        "warnings": warnings,
    }


def cmd_sweep(args) -> int:
    sc, raw = load_scenario(args.scenario)
    if args.freqs is not None:
        txt = args.freqs.strip()
        if not txt:
            raise ScenarioParseError("empty frequency list")
        try:
            freqs = [float(x) for x in txt.split(",") if x.strip()]
        except ValueError as exc:
            raise ScenarioParseError(f"bad --freqs value: {exc}") from exc
        if not freqs or any(f <= 0 for f in freqs):
            raise ScenarioParseError("frequencies must be positive and non-empty")
    elif sc.sweep is not None:
        freqs = list(sc.sweep.frequencies_hz)
    else:
        raise ScenarioParseError("no --freqs given and scenario has no sweep section")
    periods = sc.sweep.periods if sc.sweep is not None else 6.0
    out_dir = _out_dir(args)
    rows = [sweep_row(sc.raw, f, periods) for f in sorted(freqs)]
    sweep_path = out_dir / "sweep.csv"
    with open(sweep_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f_hz", "speed_mm_s", "stride_mm", "regime", "bl_per_s"])
        for r in rows:
            w.writerow(
                [_fmt(r["f_hz"]), _fmt(r["speed_mm_s"]), _fmt(r["stride_mm"]),
                 r["regime"], _fmt(r["bl_per_s"])]
            )
    _write_manifest(out_dir, "sweep", sc.name, raw, sc.seed, [sweep_path])
    for r in rows:
        print(
            f"  f={r['f_hz']:g} Hz  speed={r['speed_mm_s']:.2f} mm/s  "
            f"stride={r['stride_mm']:.2f} mm  {r['regime']}"
        )
    print(f"wrote {sweep_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def _load_trace_csv(path: Path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ScenarioParseError(f"{path}: empty CSV")
        rows = [row for row in reader]
    cols = {name: i for i, name in enumerate(header)}
    if "t_s" not in cols:
        raise ScenarioParseError(f"{path}: first bad column: expected 't_s', got {header[0]!r}")
    data = np.array(
        [[float(v) if not v.startswith(("PRE", "POST")) else 0.0 for v in row]
         for row in rows]
    ) if rows else np.zeros((0, len(header)))
    p_cols = [c for c in header if c.startswith("p_") and c.endswith("_mbar")]
    v_cols = [c for c in header if c.startswith("v_") and c.endswith("_uL")]
    state_cols = [c for c in header if c.startswith("state_")]
    known = {"t_s"} | set(p_cols) | set(v_cols) | set(state_cols)
    for c in header:
        if c not in known:
            raise ScenarioParseError(f"{path}: first bad column: {c!r}")
    return {
        "t": data[:, cols["t_s"]],
        "p_mbar": {c: data[:, cols[c]] for c in p_cols},
        "v_ul": {c: data[:, cols[c]] for c in v_cols},
    }


def _load_events_csv(path: Path) -> list[netsim.SnapEvent]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["t_s", "element", "lobe", "kind", "p_mbar"]
        if reader.fieldnames != expected:
            raise ScenarioParseError(
                f"{path}: first bad column: expected {expected}, got {reader.fieldnames}"
            )
        for row in reader:
            out.append(
                netsim.SnapEvent(
                    time=float(row["t_s"]),
                    element=row["element"],
                    lobe=row["lobe"],
                    kind=row["kind"],
                    pressure=float(row["p_mbar"]) * 100.0,
                )
            )
    return out


def cmd_analyze(args) -> int:
    trace_path = Path(args.trace)
    if not trace_path.exists():
        raise ScenarioParseError(f"trace file {trace_path} does not exist")
    out_dir = _out_dir(args)
    data = _load_trace_csv(trace_path)
    events_path = (
        Path(args.events) if args.events else trace_path.with_name("events.csv")
    )
    events = _load_events_csv(events_path) if events_path.exists() else []

    artifacts = []
    notes = []

    # thresholds
    th_path = out_dir / "thresholds.csv"
    with open(th_path, "w", newline="") as fh:
        w = csv.writer(fh)
        if events:
            w.writerow(["element", "lobe", "kind", "p_mbar"])
            for e in sorted(events, key=lambda e: e.time):
                w.writerow([e.element, e.lobe, e.kind, _fmt(pa_to_mbar(e.pressure))])
        elif len(data["p_mbar"]) >= 1:
            name, p = next(iter(data["p_mbar"].items()))
            try:
                found = analysis.thresholds_from_pressure_log(data["t"], p)
                w.writerow(["signal", "kind", "p_mbar"])
                for v in found["snap_through_mbar"]:
                    w.writerow([name, SNAP_THROUGH, _fmt(v)])
                for v in found["snap_back_mbar"]:
                    w.writerow([name, SNAP_BACK, _fmt(v)])
                notes.append("thresholds estimated from pressure extrema (no event data)")
            except SnapnetError:
                w.writerow(["status"])
                w.writerow(["NO_EVENTS"])
                notes.append("no snap events found")
        else:
            w.writerow(["status"])
            w.writerow(["NO_EVENTS"])
            notes.append("no pressure columns in trace")
    artifacts.append(th_path)

    # hysteresis (needs volumes and a single pressure node)
    hys_path = out_dir / "hysteresis.csv"
    if data["v_ul"] and len(data["p_mbar"]) >= 1:
        p = next(iter(data["p_mbar"].values())) * 100.0
        v = np.sum([col for col in data["v_ul"].values()], axis=0) * 1e-9
        imax = int(np.argmax(v))
        loop = analysis.PVLoop(
            loading_p=p[: imax + 1], loading_v=v[: imax + 1],
            unloading_p=p[imax:], unloading_v=v[imax:],
        )
        rep = analysis.loop_work(loop)
        with open(hys_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["w_in_j", "w_out_j", "hysteresis_ratio"])
            w.writerow([_fmt(rep.w_in), _fmt(rep.w_out), _fmt(rep.ratio)])
        artifacts.append(hys_path)
        print(
            f"hysteresis: W_in={rep.w_in:.4e} J  W_out={rep.w_out:.4e} J  "
            f"H={rep.ratio:.1%}"
        )
    else:
        notes.append("PV work skipped: trace has no volume columns (pressure log only)")

    # phase diagram (needs events and a period)
    if events and args.period:
        phases = gait.phase_diagram(events, period=args.period)
        ph_path = out_dir / "phases.csv"
        with open(ph_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["element", "activation_start", "activation_end"])
            for elem in sorted(phases):
                for a, b in phases[elem]:
                    w.writerow([elem, _fmt(a), _fmt(b)])
        artifacts.append(ph_path)

    report = out_dir / "analysis.txt"
    lines = [f"analyzed {trace_path.name}"]
    lines += [f"note: {n}" for n in notes]
    report.write_text("\n".join(lines) + "\n")
    artifacts.append(report)
    _write_manifest(out_dir, "analyze", trace_path.stem, trace_path.read_bytes(), 0, artifacts)
    for n in notes:
        print(f"note: {n}")
    print(f"wrote {', '.join(p.name for p in artifacts)} in {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit


def _doc_get(doc, path: str):
    cur = doc
    for part in path.split("."):
        if isinstance(cur, list):
            cur = cur[int(part)]
        else:
            if part not in cur:
                raise ScenarioParseError(f"free parameter path {path!r} not in scenario")
            cur = cur[part]
    return cur


def _doc_set(doc, path: str, value: float):
    parts = path.split(".")
    cur = doc
    for part in parts[:-1]:
        cur = cur[int(part)] if isinstance(cur, list) else cur[part]
    last = parts[-1]
    if isinstance(cur, list):
        cur[int(last)] = value
    else:
        cur[last] = value


def load_targets(spec: str) -> dict:
    from .scenario import _read_source

    raw = _read_source(spec)
    try:
        doc = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{spec}: not valid JSON ({exc})") from exc
    if "targets" not in doc or not doc["targets"]:
        raise ScenarioParseError(f"{spec}: missing `targets` section")
    if "free" not in doc or not doc["free"]:
        raise ScenarioParseError(f"{spec}: missing `free` parameter section")
    return doc


def _check_target_feasibility(targets: list[dict]) -> None:
    vals = {t["name"]: float(t["value"]) for t in targets}
    if "snap_through_mbar" in vals and "snap_back_mbar" in vals:
        if vals["snap_back_mbar"] >= vals["snap_through_mbar"]:
            raise netsim.NetworkInvariantError(
                "infeasible targets: snap_back_mbar "
                f"({vals['snap_back_mbar']}) must be below snap_through_mbar "
                f"({vals['snap_through_mbar']})"
            )


def cmd_fit(args) -> int:
    sc, raw = load_scenario(args.scenario)
    tdoc = load_targets(args.targets)
    _check_target_feasibility(tdoc["targets"])
    out_dir = _out_dir(args)

    params = []
    for f in tdoc["free"]:
        start = f.get("start")
        if start is None:
            start = float(_doc_get(sc.raw, f["name"]))
        params.append(
            analysis.FitParam(
                name=f["name"], lower=float(f["lower"]), upper=float(f["upper"]),
                start=float(start),
            )
        )
    targets = [
        analysis.FitTarget(
            name=t["name"], value=float(t["value"]),
            weight=float(t.get("weight", 1.0)),
            scale=float(t["scale"]) if "scale" in t else None,
        )
        for t in tdoc["targets"]
    ]
    problem = analysis.FitProblem(
        params=tuple(params),
        targets=tuple(targets),
        max_evals=int(tdoc.get("max_evals", 200)),
        seed=args.seed if args.seed is not None else int(tdoc.get("seed", 0)),
        xtol=float(tdoc.get("xtol", 1e-4)),
        ftol=float(tdoc.get("ftol", 1e-8)),
    )

    def evaluator(x: np.ndarray) -> dict:
        doc = copy.deepcopy(sc.raw)
        for p, v in zip(params, x):
            _doc_set(doc, p.name, float(v))
        sc_x = parse_scenario(doc, name_hint=sc.name)
        trace = run_scenario(sc_x)
        return scenario_metrics(sc_x, trace)

    result = analysis.fit_parameters(problem, evaluator)

    fitted_doc = copy.deepcopy(sc.raw)
    for p, v in zip(params, result.x):
        _doc_set(fitted_doc, p.name, float(v))
    fitted_path = out_dir / "fitted_scenario.json"
    fitted_path.write_text(dump_scenario(fitted_doc))

    report = {
        "converged": result.converged,
        "status": result.status,
        "objective": result.objective,
        "n_evals": result.n_evals,
        "parameters": {p.name: float(v) for p, v in zip(params, result.x)},
        "achieved": result.achieved,
        "residuals": result.residuals,
        "evaluation_log": [
            {"eval": k, "params": xs, "objective": f} for k, xs, f in result.log
        ],
    }
    report_path = out_dir / "fit_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_manifest(
        out_dir, "fit", sc.name, raw, problem.seed, [fitted_path, report_path],
        extra={"targets_sha256": _sha256(json.dumps(tdoc, sort_keys=True).encode())},
    )
    print(f"fit {sc.name}: {result.status} after {result.n_evals} evaluations")
    for name, r in result.residuals.items():
        print(f"  {name}: achieved={result.achieved[name]:.4g} residual={r:+.3%}")
    print(f"wrote {fitted_path.name}, {report_path.name} in {out_dir}")
    return EXIT_OK if result.converged else EXIT_MAX_EVALS


# ---------------------------------------------------------------------------


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get(OUT_DIR_ENV) or "out"
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="snapnet",
        description="Lumped-parameter simulation of snap-through pneumatic networks",
    )
    ap.add_argument("--version", action="version", version=f"snapnet {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a scenario, export trace/event CSVs")
    p_sim.add_argument("scenario_pos", nargs="?", help="preset name or scenario file")
    p_sim.add_argument("--scenario", help="preset name or scenario file")
    p_sim.add_argument("--out-dir", help=f"output directory (or ${OUT_DIR_ENV})")
    p_sim.add_argument("--tol", type=float, help="override solver rtol")
    p_sim.set_defaults(func=cmd_simulate)

    p_swp = sub.add_parser("sweep", help="speed vs frequency sweep")
    p_swp.add_argument("scenario_pos", nargs="?")
    p_swp.add_argument("--scenario")
    p_swp.add_argument("--freqs", help="comma-separated frequencies in Hz")
    p_swp.add_argument("--out-dir")
    p_swp.set_defaults(func=cmd_sweep)

    p_ana = sub.add_parser("analyze", help="hysteresis/threshold/phase reports from a trace CSV")
    p_ana.add_argument("trace", help="trace CSV (netsim schema) or sensor pressure log")
    p_ana.add_argument("--events", help="events CSV (default: sibling events.csv)")
    p_ana.add_argument("--period", type=float, help="drive period for the phase report")
    p_ana.add_argument("--out-dir")
    p_ana.set_defaults(func=cmd_analyze)

    p_fit = sub.add_parser("fit", help="fit scenario parameters to targets")
    p_fit.add_argument("scenario_pos", nargs="?")
    p_fit.add_argument("--scenario")
    p_fit.add_argument("--targets", required=True, help="targets file or preset (fig10, experiment)")
    p_fit.add_argument("--seed", type=int)
    p_fit.add_argument("--out-dir")
    p_fit.set_defaults(func=cmd_fit)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if hasattr(args, "scenario_pos"):
        if args.scenario is None:
            args.scenario = args.scenario_pos
        if args.scenario is None:
            print("error: no scenario given", file=sys.stderr)
            return EXIT_PARSE
    try:
        return args.func(args)
    except ScenarioParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except EvaluatorFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (StepFailureError, NonfiniteStateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SnapnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
