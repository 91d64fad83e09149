"""Physical building blocks: bistable lobe pressure-volume laws, fluidic
resistances, gas capacitances and time-dependent sources.

A dome lobe is modeled by a cubic gauge-pressure law p(v) with exactly two
folds (limit points). Between the folds the curve has negative slope, so a
lobe loaded past the upper fold jumps to the outer branch on the far side:
snap-through on inflation at ``p_snap_through``, snap-back on deflation at
``p_snap_back``. An eccentric dome is two such lobes (a weak and a strong
one) sharing one cavity pressure.

All models here are pure functions of explicit state and safe to evaluate
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

from .errors import InfeasibleSpecError, NoRootOnBranchError, OutOfRangeError
from .units import P_ATM

AIR_VISCOSITY = 1.81e-5  # Pa*s, dry air at 20 C


class Branch(IntEnum):
    """Which outer branch of the pressure-volume curve a lobe sits on."""

    PRE_SNAP = 0
    POST_SNAP = 1


class SourceKind(Enum):
    FLOW_RAMP = "FLOW_RAMP"
    PRESSURE_RAMP_WAVE = "PRESSURE_RAMP_WAVE"
    VENT = "VENT"


# Fraction of the wave period spent on the flyback (fall) edge of the
# pressure ramp wave. A real regulator cannot jump instantaneously; a short
# finite fall also keeps the ODE right-hand side piecewise smooth.
RAMP_WAVE_FALL_FRACTION = 0.05


@dataclass(frozen=True)
class SnapSpec:
    """Fold data of one bistable lobe (all SI: Pa gauge, m3).

    ``v_fold_lo``/``v_fold_hi`` are the volumes of the two limit points;
    the pressure there is ``p_snap_through``/``p_snap_back`` respectively.
    ``v_closed`` is the rest volume on the unsnapped branch at zero gauge;
    ``v_open`` the volume the lobe lands at after snap-through (the zero
    gauge snapped rest volume when the lobe is truly bistable, otherwise
    the post-snap volume at the snap-through pressure).
    """

    p_snap_through: float
    p_snap_back: float
    v_closed: float
    v_open: float
    v_fold_lo: float
    v_fold_hi: float

    def check(self) -> None:
        if not (self.p_snap_through > self.p_snap_back):
            raise InfeasibleSpecError(
                f"p_snap_through ({self.p_snap_through}) must exceed "
                f"p_snap_back ({self.p_snap_back})"
            )
        if not (self.v_closed < self.v_fold_lo < self.v_fold_hi < self.v_open):
            raise InfeasibleSpecError(
                "volumes must satisfy v_closed < v_fold_lo < v_fold_hi < v_open, got "
                f"{self.v_closed}, {self.v_fold_lo}, {self.v_fold_hi}, {self.v_open}"
            )

    @classmethod
    def from_folds(
        cls,
        p_snap_through: float,
        p_snap_back: float,
        v_fold_lo: float,
        v_fold_hi: float,
    ) -> "SnapSpec":
        """Build a full spec from the four fold quantities.

        The rest volumes are derived from the unique cubic through the
        folds: ``v_closed`` is the zero-gauge root on the unsnapped branch
        (requires p_snap_through > 0), ``v_open`` the zero-gauge root on
        the snapped branch when p_snap_back < 0, else the post-snap volume
        at p_snap_through.
        """
        a3, a2, a1, a0 = _cubic_through_folds(
            p_snap_through, p_snap_back, v_fold_lo, v_fold_hi
        )
        if p_snap_through <= 0.0:
            raise InfeasibleSpecError(
                "p_snap_through must be positive so a zero-gauge rest state exists"
            )
        v_closed = _branch_root(a3, a2, a1, a0, 0.0, v_fold_lo, v_fold_hi, Branch.PRE_SNAP)
        p_open = 0.0 if p_snap_back < 0.0 else p_snap_through
        v_open = _branch_root(a3, a2, a1, a0, p_open, v_fold_lo, v_fold_hi, Branch.POST_SNAP)
        spec = cls(p_snap_through, p_snap_back, v_closed, v_open, v_fold_lo, v_fold_hi)
        spec.check()
        return spec


@dataclass(frozen=True)
class PVCharacteristic:
    """Cubic gauge-pressure law p(v) = a3 v^3 + a2 v^2 + a1 v + a0 of one
    lobe (Pa over m3), together with the SnapSpec it realizes."""

    a3: float
    a2: float
    a1: float
    a0: float
    spec: SnapSpec

    def pressure(self, v: float) -> float:
        return ((self.a3 * v + self.a2) * v + self.a1) * v + self.a0

    def slope(self, v: float) -> float:
        return (3.0 * self.a3 * v + 2.0 * self.a2) * v + self.a1

    def folds(self) -> tuple[float, float, float, float]:
        """Extract (p_snap_through, p_snap_back, v_fold_lo, v_fold_hi) from
        the coefficients alone (roots of dp/dv)."""
        a = 3.0 * self.a3
        b = 2.0 * self.a2
        c = self.a1
        disc = b * b - 4.0 * a * c
        if disc <= 0.0 or a == 0.0:
            raise InfeasibleSpecError("characteristic has no pair of fold points")
        # numerically stable quadratic roots
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        r1 = q / a
        r2 = c / q
        v_lo, v_hi = (r1, r2) if r1 < r2 else (r2, r1)
        return self.pressure(v_lo), self.pressure(v_hi), v_lo, v_hi


def _cubic_through_folds(
    p_st: float, p_sb: float, u: float, w: float
) -> tuple[float, float, float, float]:
    """Solve the 4-equation system p(u)=p_st, p(w)=p_sb, p'(u)=p'(w)=0.

    Any cubic with critical points at u and w is A*q(v) + B with
    q(v) = 2v^3 - 3(u+w)v^2 + 6uvw and q(u) - q(w) = (w - u)^3, which
    turns the linear system into two scalar equations for A and B.
    """
    if not (u < w):
        raise InfeasibleSpecError(f"v_fold_lo ({u}) must be below v_fold_hi ({w})")
    if not (p_st > p_sb):
        raise InfeasibleSpecError(
            f"p_snap_through ({p_st}) must exceed p_snap_back ({p_sb}); "
            "no cubic with the required fold ordering exists"
        )
    A = (p_st - p_sb) / ((w - u) ** 3)
    a3 = 2.0 * A
    a2 = -3.0 * A * (u + w)
    a1 = 6.0 * A * u * w
    q_u = ((2.0 * u - 3.0 * (u + w)) * u + 6.0 * u * w) * u
    a0 = p_st - A * q_u
    return a3, a2, a1, a0


def _branch_root(
    a3: float,
    a2: float,
    a1: float,
    a0: float,
    p: float,
    v_fold_lo: float,
    v_fold_hi: float,
    branch: Branch,
) -> float:
    """Root of the cubic = p on the selected outer branch (both branches are
    strictly increasing). Safeguarded Newton on an expanding bracket."""

    def f(v: float) -> float:
        return ((a3 * v + a2) * v + a1) * v + a0 - p

    def df(v: float) -> float:
        return (3.0 * a3 * v + 2.0 * a2) * v + a1

    span = v_fold_hi - v_fold_lo
    if branch == Branch.PRE_SNAP:
        hi = v_fold_lo
        lo = v_fold_lo - span
        while f(lo) > 0.0:
            lo -= (hi - lo)
    else:
        lo = v_fold_hi
        hi = v_fold_hi + span
        while f(hi) < 0.0:
            hi += (hi - lo)
    # f(lo) <= 0 <= f(hi) on an increasing branch
    v = 0.5 * (lo + hi)
    scale = max(abs(lo), abs(hi), span)
    for _ in range(200):
        fv = f(v)
        if fv > 0.0:
            hi = v
        else:
            lo = v
        d = df(v)
        v_new = v - fv / d if d > 0.0 else 0.5 * (lo + hi)
        if not (lo < v_new < hi):
            v_new = 0.5 * (lo + hi)
        if abs(v_new - v) <= 1e-15 * scale:
            v = v_new
            break
        v = v_new
    return v


def build_cubic_pv(spec: SnapSpec) -> PVCharacteristic:
    """Realize a SnapSpec as the unique cubic through its fold points.

    Raises InfeasibleSpecError when no cubic with the required fold
    ordering exists (p_snap_back >= p_snap_through, or misordered fold
    volumes).
    """
    a3, a2, a1, a0 = _cubic_through_folds(
        spec.p_snap_through, spec.p_snap_back, spec.v_fold_lo, spec.v_fold_hi
    )
    return PVCharacteristic(a3, a2, a1, a0, spec)


def lobe_pressure(pv: PVCharacteristic, v: float, margin_frac: float = 0.5) -> float:
    """Gauge pressure of a lobe at volume v.

    Volumes outside [v_closed - margin, v_open + margin] (margin a fraction
    of the open-closed span) are rejected: the cubic is a local model and
    extrapolating it far past the rest states is meaningless.
    """
    s = pv.spec
    margin = margin_frac * (s.v_open - s.v_closed)
    if v < s.v_closed - margin or v > s.v_open + margin:
        raise OutOfRangeError(
            f"volume {v} outside [{s.v_closed - margin}, {s.v_open + margin}]"
        )
    return pv.pressure(v)


def equilibrium_volume(pv: PVCharacteristic, p: float, branch: Branch) -> float:
    """Volume at which the selected outer branch carries gauge pressure p.

    Raises NoRootOnBranchError when p lies beyond the branch's fold
    (p > p_snap_through on PRE_SNAP, p < p_snap_back on POST_SNAP): the
    lobe has no equilibrium there and must switch branch.
    """
    s = pv.spec
    if branch == Branch.PRE_SNAP and p > s.p_snap_through:
        raise NoRootOnBranchError(
            f"p={p} above snap-through threshold {s.p_snap_through} on PRE_SNAP branch"
        )
    if branch == Branch.POST_SNAP and p < s.p_snap_back:
        raise NoRootOnBranchError(
            f"p={p} below snap-back threshold {s.p_snap_back} on POST_SNAP branch"
        )
    return _branch_root(pv.a3, pv.a2, pv.a1, pv.a0, p, s.v_fold_lo, s.v_fold_hi, branch)


@dataclass(frozen=True)
class SnapElement:
    """Two-lobe eccentric dome: weak and strong lobe at one cavity pressure.

    The weak lobe snaps first on inflation and recovers first on deflation
    (lower snap-through, higher snap-back threshold); its fold is the small
    instability bump before the main snap.

    tau_snap regularizes the snap jump as first-order relaxation toward the
    branch equilibrium; the strong lobe's transition (the slow leveling
    motion of the dome center) may carry its own time constant via
    tau_snap_strong. saturation_margin bounds the equilibrium target at
    +/- that fraction of each lobe's span beyond the rest volumes, standing
    in for shell contact/stiffening outside the cubic's validity range.
    """

    weak: PVCharacteristic
    strong: PVCharacteristic
    tau_snap: float = 5e-3
    tau_snap_strong: float | None = None
    base_chamber_volume: float = 2.749e-7  # 10 mm bore x 3.5 mm support chamber
    saturation_margin: float = 0.5
    initial_branches: tuple[Branch, Branch] = (Branch.PRE_SNAP, Branch.PRE_SNAP)

    def check(self) -> None:
        self.weak.spec.check()
        self.strong.spec.check()
        if not (self.weak.spec.p_snap_through < self.strong.spec.p_snap_through):
            raise InfeasibleSpecError(
                "weak lobe must snap through below the strong lobe "
                f"({self.weak.spec.p_snap_through} vs {self.strong.spec.p_snap_through})"
            )
        if not (self.weak.spec.p_snap_back > self.strong.spec.p_snap_back):
            raise InfeasibleSpecError(
                "weak lobe must snap back above the strong lobe "
                f"({self.weak.spec.p_snap_back} vs {self.strong.spec.p_snap_back})"
            )
        if self.tau_snap <= 0.0:
            raise InfeasibleSpecError("tau_snap must be positive")
        if self.tau_snap_strong is not None and self.tau_snap_strong <= 0.0:
            raise InfeasibleSpecError("tau_snap_strong must be positive")
        if self.base_chamber_volume <= 0.0:
            raise InfeasibleSpecError("base_chamber_volume must be positive")

    @property
    def lobes(self) -> tuple[PVCharacteristic, PVCharacteristic]:
        return (self.weak, self.strong)

    def lobe_taus(self) -> tuple[float, float]:
        tau_s = self.tau_snap_strong if self.tau_snap_strong is not None else self.tau_snap
        return (self.tau_snap, tau_s)

    def rest_volume(self) -> float:
        return (
            self.base_chamber_volume
            + self.weak.spec.v_closed
            + self.strong.spec.v_closed
        )


def scaled_weak_spec(
    strong: SnapSpec,
    threshold_ratio: float = 0.8,
    volume_fraction: float = 0.4,
    p_snap_back: float | None = None,
) -> SnapSpec:
    """Weak-lobe spec derived from the strong lobe.

    The weak fold pressure defaults to threshold_ratio x the strong one;
    its snap-back sits above the strong lobe's by the complementary share
    of the threshold gap unless given explicitly. Fold volumes are scaled
    by volume_fraction about the strong lobe's lower fold.
    """
    p_st = threshold_ratio * strong.p_snap_through
    if p_snap_back is None:
        p_sb = strong.p_snap_back + (1.0 - threshold_ratio) * (
            strong.p_snap_through - strong.p_snap_back
        )
    else:
        p_sb = p_snap_back
    u = strong.v_fold_lo * volume_fraction
    w = u + volume_fraction * (strong.v_fold_hi - strong.v_fold_lo)
    return SnapSpec.from_folds(p_st, p_sb, u, w)


@dataclass(frozen=True)
class ChannelGeometry:
    """Circular channel: the molded 0.4 mm rod cross-section."""

    diameter: float
    length: float
    fluid_viscosity: float = AIR_VISCOSITY

    def check(self) -> None:
        if self.diameter <= 0 or self.length <= 0 or self.fluid_viscosity <= 0:
            raise InfeasibleSpecError("channel geometry values must be positive")


def channel_resistance(geom: ChannelGeometry) -> float:
    """Hagen-Poiseuille resistance R = 128 mu L / (pi d^4), Pa*s/m3."""
    geom.check()
    return 128.0 * geom.fluid_viscosity * geom.length / (math.pi * geom.diameter**4)


def gas_capacitance(v: float, p_abs: float) -> float:
    """Isothermal ideal-gas capacitance C = V / P_abs of a rigid chamber."""
    if v <= 0.0 or p_abs <= 0.0:
        raise OutOfRangeError(f"need v > 0 and p_abs > 0, got v={v}, p_abs={p_abs}")
    return v / p_abs


@dataclass(frozen=True)
class Source:
    """Time-dependent boundary condition.

    FLOW_RAMP: constant +amplitude until target_volume is injected, zero
    for switching_delay, then -amplitude until the net injected volume
    returns to zero (the syringe-pump protocol; the pump's mechanical
    switching delay stretches the nominal 2 s cycle to ~2.1 s). frequency 0
    runs one cycle; otherwise the cycle repeats every period.

    PRESSURE_RAMP_WAVE: periodic sawtooth between -amplitude and
    +amplitude; rises over most of the period and falls back during the
    short flyback. frequency 0 degenerates to a held step at +amplitude.

    VENT: fixed gauge pressure 0 (behind whatever edge resistance connects
    it to the network).
    """

    kind: SourceKind
    amplitude: float = 0.0
    frequency: float = 0.0
    switching_delay: float = 0.0
    target_volume: float = 0.0

    def check(self) -> None:
        if not math.isfinite(self.amplitude):
            raise InfeasibleSpecError("source amplitude must be finite")
        if self.frequency < 0.0:
            raise InfeasibleSpecError("source frequency must be >= 0")
        if self.switching_delay < 0.0:
            raise InfeasibleSpecError("switching delay must be >= 0")
        if self.kind == SourceKind.FLOW_RAMP:
            if self.amplitude < 0.0 or self.target_volume < 0.0:
                raise InfeasibleSpecError(
                    "FLOW_RAMP needs non-negative amplitude and target_volume"
                )
            if self.amplitude > 0.0 and self.target_volume <= 0.0:
                raise InfeasibleSpecError("FLOW_RAMP needs a positive target_volume")
            if self.frequency > 0.0 and self.cycle_time() > 1.0 / self.frequency:
                raise InfeasibleSpecError(
                    "FLOW_RAMP cycle does not fit in one period at "
                    f"{self.frequency} Hz"
                )

    def cycle_time(self) -> float:
        """Inject + delay + withdraw duration of one FLOW_RAMP cycle."""
        if self.amplitude == 0.0:
            return self.switching_delay
        t_inj = self.target_volume / self.amplitude
        return 2.0 * t_inj + self.switching_delay

    def breakpoints(self, t_end: float) -> list[float]:
        """Times at which the source law changes segment, up to t_end.
        Integration steps never straddle these."""
        out: list[float] = []
        if self.kind == SourceKind.FLOW_RAMP:
            if self.amplitude == 0.0:
                return []
            t_inj = self.target_volume / self.amplitude
            marks = [t_inj, t_inj + self.switching_delay, self.cycle_time()]
            if self.frequency > 0.0:
                period = 1.0 / self.frequency
                k = 0
                while k * period < t_end:
                    out.extend(k * period + m for m in marks)
                    out.append((k + 1) * period)
                    k += 1
            else:
                out.extend(marks)
        elif self.kind == SourceKind.PRESSURE_RAMP_WAVE and self.frequency > 0.0:
            period = 1.0 / self.frequency
            k = 0
            while k * period < t_end:
                out.append(k * period + period * (1.0 - RAMP_WAVE_FALL_FRACTION))
                out.append((k + 1) * period)
                k += 1
        return [t for t in out if 0.0 < t < t_end]


def source_value(src: Source, t: float) -> float:
    """Flux (m3/s) of a FLOW_RAMP or gauge pressure (Pa) of a pressure-type
    source at time t >= 0."""
    if src.kind == SourceKind.VENT:
        return 0.0
    if src.kind == SourceKind.PRESSURE_RAMP_WAVE:
        if src.frequency == 0.0:
            return src.amplitude
        period = 1.0 / src.frequency
        u = math.fmod(t, period)
        t_rise = period * (1.0 - RAMP_WAVE_FALL_FRACTION)
        if u < t_rise:
            return -src.amplitude + 2.0 * src.amplitude * (u / t_rise)
        return src.amplitude - 2.0 * src.amplitude * ((u - t_rise) / (period - t_rise))
    # FLOW_RAMP
    if src.amplitude == 0.0:
        return 0.0
    t_inj = src.target_volume / src.amplitude
    u = math.fmod(t, 1.0 / src.frequency) if src.frequency > 0.0 else t
    if u < t_inj:
        return src.amplitude
    if u < t_inj + src.switching_delay:
        return 0.0
    if u < 2.0 * t_inj + src.switching_delay:
        return -src.amplitude
    return 0.0
