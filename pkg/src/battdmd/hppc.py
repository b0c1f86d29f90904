"""Synthetic pulse-test data: scripted current protocols driven through a
two-branch RC equivalent cell.

The cell is a series resistance plus two parallel RC branches behind a
SoC-dependent open-circuit voltage:

    v = ocv(soc) - i*r0 - v1 - v2
    dv_j/dt = -v_j/(r_j c_j) + i/c_j          j in {1, 2}
    d(soc)/dt = -i / (3600 * capacity_ah)

with discharge-positive current. Aging scales capacity down and resistances
up per completed cycle.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .timeseries import TimeSeries

# protocol constants
PULSE_DISCHARGE_A = 10.0     # discharge pulse, A
PULSE_DISCHARGE_S = 10.0     # discharge pulse length, s
PULSE_CHARGE_A = 5.0         # charge pulse, A
PULSE_CHARGE_S = 20.0        # charge pulse length, s
SOC_DISCHARGE_A = 10.0       # inter-level discharge, A
SOC_DISCHARGE_S = 1080.0     # inter-level discharge length, s (18 min)
SOC_DISCHARGE_CUTOFF_V = 3.95  # inter-level discharge terminates at this loaded voltage
REST_LONG_S = 3600.0         # settling rest before/after each level, s
REST_AFTER_DISCHARGE_S = 180.0
REST_AFTER_CHARGE_S = 120.0
CC_CHARGE_A = 10.0           # top-up charge current, A
CC_CHARGE_MAX_S = 4 * 3600.0
CV_HOLD_S = 1800.0

GUARD_MARGIN_V = 0.1         # simulation aborts outside [v_min - margin, v_max + margin]

_MODES = ("cc_charge", "cv_charge", "rest", "cc_discharge")

# mildly nonlinear default open-circuit voltage curve, soc -> volts
DEFAULT_OCV_SOC = (0.0, 0.1, 0.5, 0.9, 1.0)
DEFAULT_OCV_V = (2.5, 3.2, 3.7, 4.05, 4.2)


@dataclass(frozen=True)
class CellSpec:
    """Equivalent-circuit parameters of the simulated cell."""

    capacity_ah: float = 30.0   # Ah
    r0: float = 2e-3            # series resistance, ohm
    r1: float = 1e-3            # fast branch resistance, ohm
    c1: float = 1e4             # fast branch capacitance, F (tau1 = 10 s)
    r2: float = 5e-4            # slow branch resistance, ohm
    c2: float = 1e5             # slow branch capacitance, F (tau2 = 50 s)
    ocv_soc: tuple = DEFAULT_OCV_SOC
    ocv_v: tuple = DEFAULT_OCV_V
    v_min: float = 2.5          # V
    v_max: float = 4.2          # V

    def __post_init__(self):
        for name in ("capacity_ah", "r0", "r1", "c1", "r2", "c2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        soc = np.asarray(self.ocv_soc, dtype=float)
        volts = np.asarray(self.ocv_v, dtype=float)
        if soc.size != volts.size or soc.size < 2:
            raise ValueError("ocv curve needs matching soc/volt knots, at least 2")
        if np.any(np.diff(soc) <= 0):
            raise ValueError("ocv soc knots must be strictly increasing")
        if np.any(np.diff(volts) < 0):
            raise ValueError("ocv curve must be monotone non-decreasing")
        if volts[0] < self.v_min or volts[-1] > self.v_max:
            raise ValueError(
                f"ocv endpoints [{volts[0]:g}, {volts[-1]:g}] must lie within "
                f"[v_min, v_max] = [{self.v_min:g}, {self.v_max:g}]"
            )

    def ocv(self, soc: float) -> float:
        """Open-circuit voltage at a state of charge (flat beyond the knot range)."""
        return float(np.interp(soc, self.ocv_soc, self.ocv_v))


@dataclass(frozen=True)
class AgingSpec:
    """Cycle-count degradation: linear capacity fade and resistance growth."""

    cycles: int = 0
    capacity_fade_per_cycle: float = 2e-4
    resistance_growth_per_cycle: float = 3e-4

    def __post_init__(self):
        if self.cycles < 0:
            raise ValueError(f"cycles must be >= 0, got {self.cycles}")
        if self.capacity_fade_per_cycle < 0 or self.resistance_growth_per_cycle < 0:
            raise ValueError("fade/growth rates must be >= 0")


@dataclass(frozen=True)
class ProtocolStep:
    """One scripted step: mode, magnitude (A for cc modes, V for cv), duration, optional cutoff."""

    mode: str
    magnitude: float
    duration_s: float
    cutoff_v: float | None = None

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown step mode '{self.mode}' (expected one of {_MODES})")
        if self.duration_s <= 0:
            raise ValueError(f"step duration must be positive, got {self.duration_s}")
        if self.mode in ("cc_charge", "cc_discharge") and self.magnitude < 0:
            raise ValueError(f"cc magnitude must be >= 0, got {self.magnitude}")


@dataclass(frozen=True)
class ProtocolScript:
    """Ordered step schedule, serializable as a JSON list."""

    steps: tuple[ProtocolStep, ...]

    def to_obj(self) -> list[dict]:
        rows = []
        for step in self.steps:
            row: dict = {"mode": step.mode}
            if step.mode in ("cc_charge", "cc_discharge"):
                row["amps"] = step.magnitude
            elif step.mode == "cv_charge":
                row["volts"] = step.magnitude
            row["seconds"] = step.duration_s
            if step.cutoff_v is not None:
                row["cutoff_v"] = step.cutoff_v
            rows.append(row)
        return rows

    @classmethod
    def from_obj(cls, rows) -> "ProtocolScript":
        steps = []
        for row in rows:
            mode = row["mode"]
            magnitude = row.get("amps", row.get("volts", 0.0))
            steps.append(ProtocolStep(mode, float(magnitude), float(row["seconds"]),
                                      row.get("cutoff_v")))
        return cls(tuple(steps))

    def dumps(self) -> str:
        return json.dumps(self.to_obj())

    @classmethod
    def loads(cls, text: str) -> "ProtocolScript":
        return cls.from_obj(json.loads(text))


def hppc_protocol(spec: CellSpec, repetitions: int = 10) -> ProtocolScript:
    """Pulse-characterization schedule: top-up charge, then `repetitions` SoC levels.

    Each level runs: 1 h rest, 10 s / 10 A discharge pulse, 3 min rest,
    20 s / 5 A charge pulse, 2 min rest, an 18 min / 10 A discharge that
    terminates early once the loaded voltage reaches 3.95 V, and a closing
    1 h rest.
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    steps = [
        ProtocolStep("cc_charge", CC_CHARGE_A, CC_CHARGE_MAX_S, cutoff_v=spec.v_max),
        ProtocolStep("cv_charge", spec.v_max, CV_HOLD_S),
    ]
    for _ in range(repetitions):
        steps += [
            ProtocolStep("rest", 0.0, REST_LONG_S),
            ProtocolStep("cc_discharge", PULSE_DISCHARGE_A, PULSE_DISCHARGE_S),
            ProtocolStep("rest", 0.0, REST_AFTER_DISCHARGE_S),
            ProtocolStep("cc_charge", PULSE_CHARGE_A, PULSE_CHARGE_S),
            ProtocolStep("rest", 0.0, REST_AFTER_CHARGE_S),
            ProtocolStep("cc_discharge", SOC_DISCHARGE_A, SOC_DISCHARGE_S,
                         cutoff_v=SOC_DISCHARGE_CUTOFF_V),
            ProtocolStep("rest", 0.0, REST_LONG_S),
        ]
    return ProtocolScript(tuple(steps))


def age_cell(spec: CellSpec, aging: AgingSpec) -> CellSpec:
    """Effective cell parameters after `aging.cycles` charge-discharge cycles."""
    capacity = spec.capacity_ah * (1.0 - aging.capacity_fade_per_cycle * aging.cycles)
    if capacity <= 0:
        raise ValueError(
            f"aging drives capacity to {capacity:g} Ah after {aging.cycles} cycles"
        )
    growth = 1.0 + aging.resistance_growth_per_cycle * aging.cycles
    return dataclasses.replace(
        spec, capacity_ah=capacity, r0=spec.r0 * growth, r1=spec.r1 * growth, r2=spec.r2 * growth
    )


def _rk4_decay(h: float) -> float:
    # classical Runge-Kutta applied to dv/dt = -v/tau reduces, for one step of
    # size dt = h*tau, to multiplying by its stability polynomial at -h
    return 1.0 - h + h * h / 2.0 - h**3 / 6.0 + h**4 / 24.0


def simulate_cell(
    spec: CellSpec,
    aging: AgingSpec,
    script: ProtocolScript,
    dt: float = 1.0,
    soc0: float = 1.0,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> TimeSeries:
    """Integrate the scripted protocol with fixed-step RK4 at the output rate.

    Current within each dt interval is constant (cc/rest hold their setpoint;
    cv solves the terminal-voltage equation once per sample), so the branch
    updates use the exact RK4 one-step map of the linear RC dynamics. Cutoff
    checks run against the noiseless voltage before a sample is emitted; a
    triggered cutoff ends the step and the next step starts at that sample
    time, keeping the grid uniform. Optional Gaussian measurement noise is
    added to the recorded voltage only.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    eff = age_cell(spec, aging)
    tau1, tau2 = eff.r1 * eff.c1, eff.r2 * eff.c2
    p1, p2 = _rk4_decay(dt / tau1), _rk4_decay(dt / tau2)
    charge_scale = dt / (3600.0 * eff.capacity_ah)
    lo, hi = eff.v_min - GUARD_MARGIN_V, eff.v_max + GUARD_MARGIN_V
    rng = np.random.default_rng(seed)

    for idx, step in enumerate(script.steps):
        if step.cutoff_v is not None and not (eff.v_min <= step.cutoff_v <= eff.v_max):
            raise ValueError(
                f"step {idx}: cutoff {step.cutoff_v:g} V outside "
                f"[{eff.v_min:g}, {eff.v_max:g}] V"
            )

    soc = float(soc0)
    v1 = v2 = 0.0
    currents: list[float] = []
    volts: list[float] = []

    for idx, step in enumerate(script.steps):
        n_sub = int(round(step.duration_s / dt))
        if n_sub < 1 or abs(n_sub * dt - step.duration_s) > 1e-6 * max(step.duration_s, dt):
            raise ValueError(
                f"step {idx}: duration {step.duration_s:g} s is not a positive multiple of dt={dt:g} s"
            )
        mode = step.mode
        for _ in range(n_sub):
            ocv = eff.ocv(soc)
            if mode == "rest":
                i = 0.0
            elif mode == "cc_discharge":
                i = step.magnitude
            elif mode == "cc_charge":
                i = -step.magnitude
            else:  # cv_charge: hold terminal voltage, current from the circuit algebra
                i = (ocv - v1 - v2 - step.magnitude) / eff.r0
            v = ocv - i * eff.r0 - v1 - v2
            if not lo <= v <= hi:
                raise RuntimeError(
                    f"simulated voltage {v:.4f} V left [{lo:g}, {hi:g}] V at sample "
                    f"{len(volts)} (step {idx}, {mode}, soc={soc:.4f})"
                )
            if step.cutoff_v is not None:
                if mode == "cc_discharge" and v <= step.cutoff_v:
                    break
                if mode in ("cc_charge", "cv_charge") and v >= step.cutoff_v:
                    break
            currents.append(i)
            volts.append(v)
            # advance one dt with i held constant
            v1 = p1 * v1 + (1.0 - p1) * i * eff.r1
            v2 = p2 * v2 + (1.0 - p2) * i * eff.r2
            soc -= i * charge_scale

    # terminal sample: script finished, cell at rest
    currents.append(0.0)
    volts.append(eff.ocv(soc) - v1 - v2)

    # every emitted sample advances exactly one dt, so k*dt avoids the
    # accumulated rounding a running "t += dt" would pick up on fine grids
    times = np.arange(len(volts), dtype=float) * dt
    v_arr = np.asarray(volts)
    if noise_sigma > 0.0:
        v_arr = v_arr + rng.normal(0.0, noise_sigma, size=v_arr.size)
    meta = {
        "cycles": aging.cycles,
        "dt": dt,
        "soc_initial": float(soc0),
        "soc_final": float(soc),
        "noise_sigma": float(noise_sigma),
        "seed": int(seed),
        "capacity_ah_effective": eff.capacity_ah,
        "r0_effective": eff.r0,
    }
    return TimeSeries(times, np.asarray(currents), v_arr, meta=meta)
