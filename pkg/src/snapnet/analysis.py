"""Quantitative trace analysis: PV-loop work and hysteresis ratio, snap
thresholds, group sequencing delays, and derivative-free parameter fitting
against simulation-in-the-loop objectives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal import find_peaks

from .errors import (
    EvaluatorFailure,
    MissingGroupEventError,
    NoEventsError,
    NonmonotoneSegmentError,
)
from .netsim import SNAP_BACK, SNAP_THROUGH, SnapEvent, Trace
from .units import pa_to_mbar


@dataclass(frozen=True)
class PVLoop:
    """One pressure-volume cycle split into loading (volume non-decreasing)
    and unloading (non-increasing) segments."""

    loading_p: np.ndarray
    loading_v: np.ndarray
    unloading_p: np.ndarray
    unloading_v: np.ndarray

    def check(self, tol_frac: float = 1e-3) -> None:
        span = max(
            float(self.loading_v.max() - self.loading_v.min()),
            float(self.unloading_v.max() - self.unloading_v.min()),
        )
        tol = tol_frac * span
        if np.any(np.diff(self.loading_v) < -tol):
            raise NonmonotoneSegmentError("loading segment volume decreases")
        if np.any(np.diff(self.unloading_v) > tol):
            raise NonmonotoneSegmentError("unloading segment volume increases")


@dataclass(frozen=True)
class HysteresisReport:
    w_in: float  # J
    w_out: float  # J
    ratio: float  # (w_in - w_out) / w_in


def pv_loop_from_trace(trace: Trace, element: str | None = None) -> PVLoop:
    """Build the PV loop of an element from a trace: node pressure against
    total cavity volume, split at the peak-volume sample."""
    if element is None:
        if len(trace.element_names) != 1:
            raise NonmonotoneSegmentError(
                "trace has multiple elements; name one for the PV loop"
            )
        element = trace.element_names[0]
    ei = trace.element_names.index(element)
    node = trace.network.elements[ei].node
    ni = trace.node_names.index(node)
    p = trace.pressures[:, ni]
    v = trace.element_volume(element)
    imax = int(np.argmax(v))
    return PVLoop(
        loading_p=p[: imax + 1].copy(),
        loading_v=v[: imax + 1].copy(),
        unloading_p=p[imax:].copy(),
        unloading_v=v[imax:].copy(),
    )


def _trapz(p: np.ndarray, v: np.ndarray) -> float:
    return float(np.sum(0.5 * (p[1:] + p[:-1]) * np.diff(v)))


def loop_work(loop: PVLoop) -> HysteresisReport:
    """Trapezoidal work integrals over the loop.

    w_in is the integral of p dV over loading; w_out the same over the
    unloading path re-oriented to increasing volume, so the difference is
    the enclosed (dissipated) area and the ratio is the hysteresis
    fraction of the input work.
    """
    loop.check()
    w_in = _trapz(loop.loading_p, loop.loading_v)
    w_out = _trapz(loop.unloading_p[::-1], loop.unloading_v[::-1])
    if w_in == 0.0:
        raise NonmonotoneSegmentError("loading segment does no work")
    return HysteresisReport(w_in=w_in, w_out=w_out, ratio=(w_in - w_out) / w_in)


@dataclass(frozen=True)
class ThresholdReport:
    """Per (element, lobe): snap-through / snap-back pressures in mbar
    gauge, one entry per event occurrence."""

    snap_through: dict
    snap_back: dict

    def first(self, element: str, lobe: str, kind: str) -> float:
        table = self.snap_through if kind == SNAP_THROUGH else self.snap_back
        return table[(element, lobe)][0]


def detect_thresholds(trace: Trace) -> ThresholdReport:
    """Thresholds from recorded snap events: the node pressure at each
    event, reported in mbar gauge."""
    if not trace.events:
        raise NoEventsError("trace contains no snap events")
    st: dict = {}
    sb: dict = {}
    for e in sorted(trace.events, key=lambda e: e.time):
        key = (e.element, e.lobe)
        table = st if e.kind == SNAP_THROUGH else sb
        table.setdefault(key, []).append(pa_to_mbar(e.pressure))
    return ThresholdReport(snap_through=st, snap_back=sb)


def thresholds_from_pressure_log(
    t: np.ndarray, p_mbar: np.ndarray, prominence_frac: float = 0.04
) -> dict:
    """Estimate snap thresholds from a bare pressure log (no event data):
    snap-throughs show as prominent local maxima followed by a drop,
    snap-backs as prominent local minima. Used for external sensor CSVs."""
    p = np.asarray(p_mbar, dtype=float)
    span = float(p.max() - p.min())
    if span <= 0.0:
        raise NoEventsError("pressure log is constant")
    prom = prominence_frac * span
    hi, _ = find_peaks(p, prominence=prom)
    lo, _ = find_peaks(-p, prominence=prom)
    if len(hi) == 0 and len(lo) == 0:
        raise NoEventsError("no prominent pressure extrema found")
    return {
        "snap_through_mbar": [float(p[i]) for i in hi],
        "snap_back_mbar": [float(p[i]) for i in lo],
    }


def sequencing_delay(
    events: list[SnapEvent],
    groups: dict[str, list[str]],
    kind: str = SNAP_THROUGH,
    lobe: str = "strong",
) -> float:
    """First front-group snap time minus first rear-group snap time;
    positive means the rear group leads."""
    firsts: dict[str, float] = {}
    for gname, members in groups.items():
        ts = [
            e.time
            for e in events
            if e.kind == kind and e.lobe == lobe and e.element in members
        ]
        if not ts:
            raise MissingGroupEventError(
                f"group {gname!r} has no {lobe} {kind} event"
            )
        firsts[gname] = min(ts)
    return firsts["front"] - firsts["rear"]


# ---------------------------------------------------------------------------
# parameter fitting


@dataclass(frozen=True)
class FitParam:
    name: str
    lower: float
    upper: float
    start: float

    def check(self) -> None:
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError(f"parameter {self.name!r} needs finite bounds")
        if not (self.lower < self.upper):
            raise ValueError(f"parameter {self.name!r}: lower must be < upper")
        if not (self.lower <= self.start <= self.upper):
            raise ValueError(f"parameter {self.name!r}: start outside bounds")


@dataclass(frozen=True)
class FitTarget:
    name: str
    value: float
    weight: float = 1.0
    scale: float | None = None  # residual denominator; default max(|value|, 1)

    def residual(self, achieved: float) -> float:
        s = self.scale if self.scale is not None else max(abs(self.value), 1.0)
        return (achieved - self.value) / s


@dataclass(frozen=True)
class FitProblem:
    """Bounded least-squares problem: objective is the weighted sum of
    squared relative residuals over the targets."""

    params: tuple[FitParam, ...]
    targets: tuple[FitTarget, ...]
    max_evals: int = 200
    seed: int = 0
    xtol: float = 1e-4
    ftol: float = 1e-8

    def check(self) -> None:
        for p in self.params:
            p.check()
        if not self.targets:
            raise ValueError("fit problem needs at least one target")
        if all(t.weight == 0.0 for t in self.targets):
            raise ValueError("at least one target weight must be nonzero")
        for t in self.targets:
            if t.weight < 0.0:
                raise ValueError(f"target {t.name!r} has negative weight")


@dataclass
class FitResult:
    x: np.ndarray
    objective: float
    residuals: dict
    achieved: dict
    n_evals: int
    converged: bool
    status: str
    log: list  # (eval index, params, objective) per evaluation


def fit_parameters(problem: FitProblem, evaluator) -> FitResult:
    """Bounded derivative-free simplex search with deterministic restart on
    stagnation.

    `evaluator` maps a parameter vector (numpy array, ordered as
    problem.params) to {target name: achieved value}. Evaluator exceptions
    abort the search as EVALUATOR_FAILURE carrying the offending vector.
    The returned point never has a higher objective than the start.
    """
    problem.check()
    bounds = [(p.lower, p.upper) for p in problem.params]
    x0 = np.array([p.start for p in problem.params], dtype=float)
    log: list = []
    best: dict = {"x": None, "f": math.inf, "ach": None}
    n_evals = 0

    def objective(x: np.ndarray) -> float:
        nonlocal n_evals
        x = np.clip(np.asarray(x, dtype=float), [b[0] for b in bounds], [b[1] for b in bounds])
        try:
            ach = evaluator(x)
        except Exception as exc:  # noqa: BLE001 - wrapped with parameters
            raise EvaluatorFailure(str(exc), x.tolist()) from exc
        f = 0.0
        for t in problem.targets:
            r = t.residual(float(ach[t.name]))
            f += t.weight * r * r
        n_evals += 1
        log.append((n_evals, x.tolist(), f))
        if f < best["f"]:
            best["x"] = x.copy()
            best["f"] = f
            best["ach"] = dict(ach)
        return f

    rng = np.random.default_rng(problem.seed)
    x_start = x0
    converged = False
    restarts = 0
    while n_evals < problem.max_evals:
        budget = problem.max_evals - n_evals
        res = minimize(
            objective,
            x_start,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "maxfev": budget,
                "xatol": problem.xtol,
                "fatol": problem.ftol,
                "disp": False,
            },
        )
        if res.success or best["f"] <= problem.ftol:
            converged = True
            break
        if n_evals >= problem.max_evals:
            break
        # deterministic restart on stagnation: jitter around the incumbent
        restarts += 1
        if restarts > 2:
            break
        widths = np.array([b[1] - b[0] for b in bounds])
        x_start = np.clip(
            best["x"] + 0.05 * widths * rng.standard_normal(len(bounds)),
            [b[0] for b in bounds],
            [b[1] for b in bounds],
        )

    x_best = best["x"] if best["x"] is not None else x0
    ach = best["ach"] if best["ach"] is not None else evaluator(x_best)
    residuals = {t.name: t.residual(float(ach[t.name])) for t in problem.targets}
    status = "CONVERGED" if converged else "MAX_EVALS_EXCEEDED"
    return FitResult(
        x=np.asarray(x_best, dtype=float),
        objective=best["f"],
        residuals=residuals,
        achieved=dict(ach),
        n_evals=n_evals,
        converged=converged,
        status=status,
        log=log,
    )
