"""Nonlinear simulation of the pitch plant with additive fault injection.

States per cylinder: rod position/velocity, both chamber pressures, spool
position/velocity; one shared supply pressure.  Integration is fixed-step
RK4 with the switching terms re-evaluated every stage (no event
localization): the switches act on flows, bit-determinism matters more here
than event-time precision.  The boundary convention is H(0) = 1 throughout.

End stops clamp the rod to [0, x_c_max] and zero its velocity on contact.
Pressures below 1 kPa abort the run with a diagnostic rather than being
clamped silently.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .pitchbench import PlantParameters, build_pitch_model, default_parameters, validate_parameters
from .structmodel import ModelFormatError

PRESSURE_FLOOR = 1.0e3  # Pa


class SimulationError(RuntimeError):
    """Numeric abort: NaN/Inf state or pressure underflow, with step context."""

    def __init__(self, message: str, step: int, component: str = ""):
        super().__init__(f"step {step}: {message}")
        self.step = step
        self.component = component


class ScenarioError(ValueError):
    """Scenario or parameter set violates its invariants."""


def heaviside(x: float) -> float:
    return 1.0 if x >= 0.0 else 0.0


# ---------------------------------------------------------------------------
# signals


@dataclass(frozen=True)
class FaultSignal:
    """Additive time signal injected into one fault term."""

    fault: str
    shape: str = "step"  # step | ramp | const | samples
    onset: float = 0.0
    magnitude: float = 0.0
    end: Optional[float] = None
    times: Optional[tuple[float, ...]] = None
    values: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.shape not in ("step", "ramp", "const", "samples"):
            raise ScenarioError(f"unknown signal shape {self.shape!r}")
        if self.onset < 0.0:
            raise ScenarioError("onset must be nonnegative")
        if not math.isfinite(self.magnitude):
            raise ScenarioError("magnitude must be finite")
        if self.shape == "ramp" and (self.end is None or self.end <= self.onset):
            raise ScenarioError("ramp needs end > onset")
        if self.shape == "samples" and (not self.times or not self.values
                                        or len(self.times) != len(self.values)):
            raise ScenarioError("samples need matching times/values")

    def value(self, t: float) -> float:
        if self.shape == "const":
            return self.magnitude
        if self.shape == "step":
            return self.magnitude if t >= self.onset else 0.0
        if self.shape == "ramp":
            if t <= self.onset:
                return 0.0
            if t >= self.end:
                return self.magnitude
            return self.magnitude * (t - self.onset) / (self.end - self.onset)
        return float(np.interp(t, self.times, self.values))


def constant(v: float) -> FaultSignal:
    return FaultSignal("", shape="const", magnitude=v)


# ---------------------------------------------------------------------------
# scenario


def _suffixes(n: int) -> list[str]:
    return [""] if n == 1 else [str(i) for i in range(1, n + 1)]


@dataclass(frozen=True)
class PlantState:
    """Structured view of the flat state vector."""

    x_c: np.ndarray
    v_c: np.ndarray
    p_p: np.ndarray
    p_r: np.ndarray
    x_v: np.ndarray
    v_v: np.ndarray
    p_s: float

    @staticmethod
    def from_vector(y: np.ndarray, n: int) -> "PlantState":
        per = y[: 6 * n].reshape(n, 6)
        return PlantState(per[:, 0], per[:, 1], per[:, 2], per[:, 3], per[:, 4], per[:, 5],
                          float(y[6 * n]))

    def to_vector(self) -> np.ndarray:
        n = len(self.x_c)
        y = np.empty(6 * n + 1)
        y[: 6 * n] = np.column_stack([self.x_c, self.v_c, self.p_p, self.p_r,
                                      self.x_v, self.v_v]).ravel()
        y[6 * n] = self.p_s
        return y


def state_names(n: int) -> list[str]:
    names = []
    for s in _suffixes(n):
        names += [f"x_c{s}", f"v_c{s}", f"p_p{s}", f"p_r{s}", f"x_v{s}", f"v_v{s}"]
    return names + ["p_s"]


def derived_names(n: int) -> list[str]:
    names = []
    for s in _suffixes(n):
        names += [f"Q_p{s}", f"Q_rv{s}", f"Q_v{s}", f"Q_cv{s}", f"Q_r{s}",
                  f"Q_le_p{s}", f"Q_le_r{s}", f"Q_li{s}"]
    return names + ["beta_e", "Q_acc", "Q_rel", "V_oil", "V_gas"]


def switch_names(n: int) -> list[str]:
    out = []
    for s in _suffixes(n):
        out += [f"s_xv{s}", f"s_cv{s}"]
    return out + ["s_rel", "s_gas"]


@dataclass(frozen=True)
class SimScenario:
    parameters: PlantParameters
    n_cylinders: int = 1
    duration: float = 1.0
    step: float = 1.0e-4
    inputs: dict = field(default_factory=dict)   # u{i}/Q_s/F_ext{i} -> FaultSignal
    faults: tuple[FaultSignal, ...] = ()
    initial: Optional[np.ndarray] = None          # None -> equilibrium state
    p_s0: float = 1.8e7
    name: str = "scenario"

    def validated(self) -> "SimScenario":
        bad = list(validate_parameters(self.parameters))
        if self.n_cylinders not in (1, 3):
            bad.append("n_cylinders must be 1 or 3")
        if not self.step > 0.0:
            bad.append("step must be positive")
        if self.duration < self.step:
            bad.append("duration must cover at least one step")
        legal_inputs = {f"u{s}" for s in _suffixes(self.n_cylinders)}
        legal_inputs |= {f"F_ext{s}" for s in _suffixes(self.n_cylinders)} | {"Q_s"}
        for key in self.inputs:
            if key not in legal_inputs:
                bad.append(f"unknown input {key}")
        legal_faults = set(build_pitch_model(self.n_cylinders, "with_Fext_sensor").fault_ids())
        for f in self.faults:
            if f.fault not in legal_faults:
                bad.append(f"unknown fault {f.fault}")
        if bad:
            raise ScenarioError("; ".join(bad))
        return self


def equilibrium_state(params: PlantParameters, n: int = 1, p_s0: float = 1.8e7) -> np.ndarray:
    """Mid-stroke rest state with both chambers at atmospheric pressure."""
    y = np.zeros(6 * n + 1)
    for i in range(n):
        y[6 * i + 0] = 0.5 * params.x_c_max
        y[6 * i + 2] = params.p_atm
        y[6 * i + 3] = params.p_atm
    y[6 * n] = p_s0
    return y


def equilibrium_inputs(params: PlantParameters, n: int = 1) -> dict:
    """Inputs that hold the equilibrium state exactly (rod load balances the
    atmospheric area asymmetry)."""
    hold = params.a_p * params.p_atm - params.a_r * params.p_atm
    ins = {"Q_s": constant(0.0)}
    for s in _suffixes(n):
        ins[f"u{s}"] = constant(0.0)
        ins[f"F_ext{s}"] = constant(hold)
    return ins


def equilibrium_scenario(params: Optional[PlantParameters] = None, n: int = 1,
                         duration: float = 1.0, step: float = 1.0e-4) -> SimScenario:
    p = params or default_parameters()
    return SimScenario(p, n, duration, step, equilibrium_inputs(p, n), (), name="equilibrium")


def step_input_scenario(params: Optional[PlantParameters] = None, n: int = 1,
                        magnitude: float = 2.0, at: float = 0.0,
                        duration: float = 0.5, step: float = 1.0e-4) -> SimScenario:
    p = params or default_parameters()
    ins = equilibrium_inputs(p, n)
    for s in _suffixes(n):
        ins[f"u{s}"] = FaultSignal("", shape="step", onset=at, magnitude=magnitude)
    return SimScenario(p, n, duration, step, ins, (), name="step_input")


# ---------------------------------------------------------------------------
# plant equations


def air_fraction(p: float, params: PlantParameters) -> float:
    """Volumetric air fraction at pressure p; equals eps_a0 at atmospheric."""
    if p <= 0.0:
        raise ScenarioError(f"air_fraction needs positive pressure, got {p}")
    if params.eps_a0 == 0.0:
        return 0.0
    ratio = (1.0 - params.eps_a0) / params.eps_a0
    return 1.0 / (ratio * (params.p_atm / p) ** (-1.0 / params.c_ad) + 1.0)


def effective_bulk_modulus(p: float, params: PlantParameters, f_be: float = 0.0) -> float:
    """Pressure-dependent oil stiffness, reduced by entrained air."""
    if p <= 0.0:
        raise ScenarioError(f"effective_bulk_modulus needs positive pressure, got {p}")
    eps = air_fraction(p, params)
    nominal = 1.0 / (1.0 / params.beta_oil + eps * (1.0 / (params.c_ad * p) - 1.0 / params.beta_oil))
    return nominal + f_be


def cylinder_forces(v_c: float, p_p: float, p_r: float, F_ext: float,
                    params: PlantParameters, f_fr_c: float = 0.0) -> float:
    """Rod acceleration from the force balance."""
    force = (params.a_p * p_p - params.a_r * p_r
             - params.b_v * v_c - params.f_c * math.tanh(v_c / params.gamma)
             + f_fr_c - F_ext)
    return force / params.m_eq


def leakage_flows(p_p: float, p_r: float, params: PlantParameters,
                  f_le_p: float = 0.0, f_le_r: float = 0.0, f_li: float = 0.0):
    q_le_p = params.c_le_p * (p_p - params.p_atm) + f_le_p
    q_le_r = params.c_le_r * (p_r - params.p_atm) + f_le_r
    q_li = params.c_li * (p_p - p_r) + f_li
    return q_le_p, q_le_r, q_li


def chamber_pressure_rates(x_c: float, v_c: float, p_p: float, p_r: float,
                           q_p: float, q_r: float, beta_e: float,
                           params: PlantParameters,
                           f_le_p: float = 0.0, f_le_r: float = 0.0, f_li: float = 0.0):
    """Pressure build-up in both chambers; chamber volumes vary with stroke."""
    q_le_p, q_le_r, q_li = leakage_flows(p_p, p_r, params, f_le_p, f_le_r, f_li)
    v_p = params.v0_p + params.a_p * x_c
    v_r = params.v0_r + params.a_r * (params.x_c_max - x_c)
    dp_p = beta_e / v_p * (q_p - params.a_p * v_c - q_le_p - q_li)
    dp_r = beta_e / v_r * (-q_r + params.a_r * v_c - q_le_r + q_li)
    return dp_p, dp_r


def _signed_sqrt(dp: float) -> float:
    return math.sqrt(abs(dp)) * math.copysign(1.0, dp) if dp != 0.0 else 0.0


def valve_flows(x_v: float, p_s: float, p_p: float, p_r: float,
                params: PlantParameters, f_qp: float = 0.0, f_qrv: float = 0.0):
    """Orifice flows of the proportional valve and the resulting supply draw."""
    kv = params.kv(x_v)
    h_pos = heaviside(x_v)
    h_neg = heaviside(-x_v)
    q_p = kv * (_signed_sqrt(p_s - p_p) * h_pos - _signed_sqrt(p_p - params.p_t) * h_neg) + f_qp
    q_rv = -kv * params.phi_v * _signed_sqrt(p_s - p_r) * h_neg + f_qrv
    q_v = q_p * h_pos - q_rv * h_neg
    return q_p, q_rv, q_v


def spool_dynamics(x_v: float, v_v: float, u: float, params: PlantParameters,
                   f_fr_v: float = 0.0, f_wv_v: float = 0.0) -> float:
    """Spool acceleration of the closed-loop valve; reference is k_u * u."""
    x_ref = params.k_u * u
    return (params.omega0 ** 2 * x_ref + f_wv_v
            - 2.0 * params.xi * params.omega0 * v_v
            - params.omega0 ** 2 * x_v - f_fr_v)


def check_valve_flow(p_r: float, p_s: float, params: PlantParameters,
                     f_qcv: float = 0.0) -> float:
    # Implemented exactly as printed: the gate opens at p_r = p_s - p_cv_c
    # while the linear term vanishes at p_r = p_s + p_cv_c, so a nonzero
    # cracking pressure makes the law discontinuous at the gate.  The shipped
    # default p_cv_c = 0 keeps it continuous.
    gate = heaviside(p_r + params.p_cv_c - p_s)
    return params.k_cv * (p_r - p_s - params.p_cv_c) * gate + f_qcv


def relief_flow(p_s: float, params: PlantParameters, f_qrel: float = 0.0) -> float:
    return params.k_rel * (p_s - params.p_cr_r) * heaviside(p_s - params.p_cr_r) + f_qrel


def gas_volume(p_s: float, params: PlantParameters, f_acc: float = 0.0) -> float:
    nominal = params.v_acc * (params.p_gas0 / p_s) ** (1.0 / params.k_ad)
    return nominal * heaviside(p_s - params.p_gas0) + f_acc


def supply_dynamics(p_s: float, beta_e: float, q_acc: float,
                    params: PlantParameters, f_acc: float = 0.0):
    """Supply pressure rate plus the accumulator bookkeeping quantities."""
    v_gas = gas_volume(p_s, params, f_acc)
    v_oil = params.v_acc + params.v_hose - v_gas
    dp_s = q_acc / (v_oil / beta_e + v_gas / (params.k_ad * p_s))
    return dp_s, v_oil, v_gas


# ---------------------------------------------------------------------------
# assembled derivative


class _FaultTable:
    """Per-cylinder and shared fault lookups evaluated at time t."""

    def __init__(self, faults: Sequence[FaultSignal], n: int):
        self.n = n
        self.by_id: dict[str, FaultSignal] = {f.fault: f for f in faults}

    def at(self, t: float) -> dict[str, float]:
        return {fid: sig.value(t) for fid, sig in self.by_id.items()}


def _input_value(inputs: dict, key: str, t: float) -> float:
    sig = inputs.get(key)
    if sig is None:
        return 0.0
    if isinstance(sig, FaultSignal):
        return sig.value(t)
    if callable(sig):
        return float(sig(t))
    return float(sig)


def plant_derivative(t: float, y: np.ndarray, scn: SimScenario,
                     fvals: Optional[dict[str, float]] = None):
    """Time derivative of the full state plus every derived quantity."""
    n = scn.n_cylinders
    params = scn.parameters
    sfx = _suffixes(n)
    if fvals is None:
        fvals = _FaultTable(scn.faults, n).at(t)

    def fv(name: str) -> float:
        return fvals.get(name, 0.0)

    st = PlantState.from_vector(y, n)
    beta_e = effective_bulk_modulus(st.p_s, params, fv("f_B_e"))

    dy = np.zeros_like(y)
    derived: dict[str, float] = {"beta_e": beta_e}
    q_cv_sum = 0.0
    q_v_sum = 0.0
    for i, s in enumerate(sfx):
        u = _input_value(scn.inputs, f"u{s}", t)
        F_ext = _input_value(scn.inputs, f"F_ext{s}", t)
        q_p, q_rv, q_v = valve_flows(st.x_v[i], st.p_s, st.p_p[i], st.p_r[i], params,
                                     fv(f"f_Q_p{s}"), fv(f"f_Q_rv{s}"))
        q_cv = check_valve_flow(st.p_r[i], st.p_s, params, fv(f"f_Q_cv{s}"))
        q_r = q_rv + q_cv
        q_le_p, q_le_r, q_li = leakage_flows(st.p_p[i], st.p_r[i], params,
                                             fv(f"f_Q_le_p{s}"), fv(f"f_Q_le_r{s}"), fv(f"f_Q_li{s}"))
        dp_p, dp_r = chamber_pressure_rates(st.x_c[i], st.v_c[i], st.p_p[i], st.p_r[i],
                                            q_p, q_r, beta_e, params,
                                            fv(f"f_Q_le_p{s}"), fv(f"f_Q_le_r{s}"), fv(f"f_Q_li{s}"))
        dy[6 * i + 0] = st.v_c[i]
        dy[6 * i + 1] = cylinder_forces(st.v_c[i], st.p_p[i], st.p_r[i], F_ext, params,
                                        fv(f"f_Fr_c{s}"))
        dy[6 * i + 2] = dp_p
        dy[6 * i + 3] = dp_r
        dy[6 * i + 4] = st.v_v[i]
        dy[6 * i + 5] = spool_dynamics(st.x_v[i], st.v_v[i], u, params,
                                       fv(f"f_Fr_v{s}"), fv(f"f_wv_v{s}"))
        q_cv_sum += q_cv
        q_v_sum += q_v
        derived[f"Q_p{s}"] = q_p
        derived[f"Q_rv{s}"] = q_rv
        derived[f"Q_v{s}"] = q_v
        derived[f"Q_cv{s}"] = q_cv
        derived[f"Q_r{s}"] = q_r
        derived[f"Q_le_p{s}"] = q_le_p
        derived[f"Q_le_r{s}"] = q_le_r
        derived[f"Q_li{s}"] = q_li

    q_rel = relief_flow(st.p_s, params, fv("f_Q_rel"))
    q_s = _input_value(scn.inputs, "Q_s", t)
    q_acc = q_s - q_rel + q_cv_sum - q_v_sum + fv("f_Q_ru")
    dp_s, v_oil, v_gas = supply_dynamics(st.p_s, beta_e, q_acc, params, fv("f_acc"))
    dy[6 * n] = dp_s
    derived.update({"Q_acc": q_acc, "Q_rel": q_rel, "V_oil": v_oil, "V_gas": v_gas})
    return dy, derived


def region_of_state(y: np.ndarray, n: int, params: PlantParameters) -> dict[str, bool]:
    """Branch of each switch for the given state; True means positive (H(0)=1)."""
    st = PlantState.from_vector(y, n)
    out: dict[str, bool] = {}
    for i, s in enumerate(_suffixes(n)):
        out[f"s_xv{s}"] = st.x_v[i] >= 0.0
        out[f"s_cv{s}"] = st.p_r[i] + params.p_cv_c - st.p_s >= 0.0
    out["s_rel"] = st.p_s >= params.p_cr_r
    out["s_gas"] = st.p_s >= params.p_gas0
    return out


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class Trajectory:
    scenario: SimScenario
    t: np.ndarray
    states: np.ndarray                    # (steps+1, 6n+1)
    derived: dict[str, np.ndarray]
    regions: dict[str, np.ndarray]        # switch id -> bool array, True = positive

    @property
    def n_cylinders(self) -> int:
        return self.scenario.n_cylinders

    def state(self, name: str) -> np.ndarray:
        return self.states[:, state_names(self.n_cylinders).index(name)]

    def region_assignment(self, k: int) -> dict[str, str]:
        return {sw: ("positive" if self.regions[sw][k] else "negative") for sw in self.regions}

    def region_code(self, k: int) -> str:
        return "".join("+" if self.regions[sw][k] else "-" for sw in sorted(self.regions))

    def to_csv(self) -> str:
        n = self.n_cylinders
        cols = ["t"] + state_names(n) + derived_names(n) + ["region"]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for k in range(len(self.t)):
            row = [f"{self.t[k]:.17g}"]
            row += [f"{v:.17g}" for v in self.states[k]]
            row += [f"{self.derived[name][k]:.17g}" for name in derived_names(n)]
            row.append(self.region_code(k))
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def summary(self) -> dict:
        n = self.n_cylinders
        names = state_names(n)
        occupancy: dict[str, int] = {}
        for k in range(len(self.t)):
            code = self.region_code(k)
            occupancy[code] = occupancy.get(code, 0) + 1
        return {
            "steps": len(self.t) - 1,
            "final_state": {nm: float(self.states[-1, i]) for i, nm in enumerate(names)},
            "pressure_min": float(min(self.state(nm).min() for nm in names if nm.startswith("p_"))),
            "pressure_max": float(max(self.state(nm).max() for nm in names if nm.startswith("p_"))),
            "region_occupancy": occupancy,
        }


def _check_state(y: np.ndarray, n: int, step: int) -> None:
    if not np.all(np.isfinite(y)):
        bad = int(np.argmax(~np.isfinite(y)))
        raise SimulationError(f"non-finite value in {state_names(n)[bad]}", step,
                              state_names(n)[bad])
    st = PlantState.from_vector(y, n)
    for label, vals in (("p_p", st.p_p), ("p_r", st.p_r), ("p_s", np.array([st.p_s]))):
        if np.any(vals < PRESSURE_FLOOR):
            raise SimulationError(
                f"pressure underflow: {label} fell below {PRESSURE_FLOOR:g} Pa", step, label)


def _apply_end_stops(y: np.ndarray, n: int, params: PlantParameters) -> None:
    for i in range(n):
        x = y[6 * i]
        v = y[6 * i + 1]
        if x <= 0.0:
            y[6 * i] = 0.0
            if v < 0.0:
                y[6 * i + 1] = 0.0
        elif x >= params.x_c_max:
            y[6 * i] = params.x_c_max
            if v > 0.0:
                y[6 * i + 1] = 0.0


def simulate(scenario: SimScenario) -> Trajectory:
    """Fixed-step RK4 over the scenario; deterministic for identical inputs."""
    scn = scenario.validated()
    n = scn.n_cylinders
    params = scn.parameters
    h = scn.step
    steps = int(round(scn.duration / h))
    y = np.array(scn.initial if scn.initial is not None
                 else equilibrium_state(params, n, scn.p_s0), dtype=float)
    if y.shape != (6 * n + 1,):
        raise ScenarioError(f"initial state must have shape ({6 * n + 1},)")

    table = _FaultTable(scn.faults, n)
    dnames = derived_names(n)
    t_grid = np.empty(steps + 1)
    states = np.empty((steps + 1, y.size))
    derived = {name: np.empty(steps + 1) for name in dnames}
    regions = {sw: np.empty(steps + 1, dtype=bool) for sw in switch_names(n)}

    def record(k: int, t: float, yk: np.ndarray):
        t_grid[k] = t
        states[k] = yk
        _, der = plant_derivative(t, yk, scn, table.at(t))
        for name in dnames:
            derived[name][k] = der[name]
        reg = region_of_state(yk, n, params)
        for sw, val in reg.items():
            regions[sw][k] = val

    _check_state(y, n, 0)
    record(0, 0.0, y)
    for k in range(1, steps + 1):
        t = (k - 1) * h
        k1, _ = plant_derivative(t, y, scn, table.at(t))
        k2, _ = plant_derivative(t + h / 2, y + h / 2 * k1, scn, table.at(t + h / 2))
        k3, _ = plant_derivative(t + h / 2, y + h / 2 * k2, scn, table.at(t + h / 2))
        k4, _ = plant_derivative(t + h, y + h * k3, scn, table.at(t + h))
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        _apply_end_stops(y, n, params)
        _check_state(y, n, k)
        record(k, k * h, y)
    return Trajectory(scn, t_grid, states, derived, regions)


def sensor_readout(traj: Trajectory, variant: str = "standard",
                   faults: Sequence[FaultSignal] = ()) -> dict[str, np.ndarray]:
    """Measured series y = true signal + injected sensor fault."""
    n = traj.n_cylinders
    by_id = {f.fault: f for f in faults}

    def series(sensor: str, source: str) -> np.ndarray:
        base = traj.state(source).copy()
        sig = by_id.get(f"f_{sensor}")
        if sig is not None:
            base += np.array([sig.value(tk) for tk in traj.t])
        return base

    out: dict[str, np.ndarray] = {}
    if variant not in ("standard", "with_Fext_sensor"):
        raise ScenarioError(f"unknown sensor variant {variant!r}")
    for s in _suffixes(n):
        out[f"y_xc{s}"] = series(f"y_xc{s}", f"x_c{s}")
        out[f"y_pp{s}"] = series(f"y_pp{s}", f"p_p{s}")
        out[f"y_pr{s}"] = series(f"y_pr{s}", f"p_r{s}")
        out[f"y_xv{s}"] = series(f"y_xv{s}", f"x_v{s}")
    out["y_ps"] = series("y_ps", "p_s")
    if variant == "with_Fext_sensor":
        for s in _suffixes(n):
            base = np.array([_input_value(traj.scenario.inputs, f"F_ext{s}", tk)
                             for tk in traj.t])
            sig = by_id.get(f"f_y_Fext{s}")
            if sig is not None:
                base += np.array([sig.value(tk) for tk in traj.t])
            out[f"y_Fext{s}"] = base
    return out


# ---------------------------------------------------------------------------
# trajectory / structural model link


def region_trace_residuals(traj: Trajectory) -> float:
    """Largest normalized residual of the branch relations selected by the
    recorded region trace, re-evaluated from the sampled trajectory.

    Under H(0)=1 the recorded branch must reproduce each sampled switching
    flow; the return value should sit at float-noise level for a healthy run.
    """
    n = traj.n_cylinders
    params = traj.scenario.parameters
    worst = 0.0

    def norm_res(a: float, b: float) -> float:
        return abs(a - b) / (1.0 + abs(a) + abs(b))

    for k in range(len(traj.t)):
        st = PlantState.from_vector(traj.states[k], n)
        fvals = _FaultTable(traj.scenario.faults, n).at(float(traj.t[k]))
        for i, s in enumerate(_suffixes(n)):
            pos = traj.regions[f"s_xv{s}"][k]
            kv = params.kv(st.x_v[i])
            if pos:
                q_p_branch = kv * _signed_sqrt(st.p_s - st.p_p[i]) + fvals.get(f"f_Q_p{s}", 0.0)
                q_rv_branch = fvals.get(f"f_Q_rv{s}", 0.0)
            else:
                q_p_branch = -kv * _signed_sqrt(st.p_p[i] - params.p_t) + fvals.get(f"f_Q_p{s}", 0.0)
                q_rv_branch = (-kv * params.phi_v * _signed_sqrt(st.p_s - st.p_r[i])
                               + fvals.get(f"f_Q_rv{s}", 0.0))
            # at the exact spool boundary both Heavisides are active and the
            # closed orifice contributes zero flow, so the branch forms agree
            worst = max(worst, norm_res(q_p_branch, traj.derived[f"Q_p{s}"][k]))
            worst = max(worst, norm_res(q_rv_branch, traj.derived[f"Q_rv{s}"][k]))

            cv_open = traj.regions[f"s_cv{s}"][k]
            q_cv_branch = fvals.get(f"f_Q_cv{s}", 0.0)
            if cv_open:
                q_cv_branch += params.k_cv * (st.p_r[i] - st.p_s - params.p_cv_c)
            worst = max(worst, norm_res(q_cv_branch, traj.derived[f"Q_cv{s}"][k]))

        rel_open = traj.regions["s_rel"][k]
        q_rel_branch = fvals.get("f_Q_rel", 0.0)
        if rel_open:
            q_rel_branch += params.k_rel * (st.p_s - params.p_cr_r)
        worst = max(worst, norm_res(q_rel_branch, traj.derived["Q_rel"][k]))

        gas_adiabatic = traj.regions["s_gas"][k]
        v_gas_branch = fvals.get("f_acc", 0.0)
        if gas_adiabatic:
            v_gas_branch += params.v_acc * (params.p_gas0 / st.p_s) ** (1.0 / params.k_ad)
        worst = max(worst, norm_res(v_gas_branch, traj.derived["V_gas"][k]))
    return worst


def region_trace_consistent(traj: Trajectory) -> int:
    """Count of steps whose recorded region disagrees with the sampled state
    under H(0)=1; zero for any healthy trajectory."""
    n = traj.n_cylinders
    params = traj.scenario.parameters
    bad = 0
    for k in range(len(traj.t)):
        expected = region_of_state(traj.states[k], n, params)
        got = traj.region_assignment(k)
        for sw, val in expected.items():
            if (got[sw] == "positive") != val:
                bad += 1
    return bad


# ---------------------------------------------------------------------------
# scenario file format
#
#   [scenario]
#   cylinders : 1
#   duration : 1.0
#   step : 1e-4
#   initial : equilibrium
#   p_s0 : 1.8e7
#   param.m_eq : 2600
#   [inputs]
#   u : step 2.0 at 0.1
#   F_ext : const 810.4
#   [faults]
#   f_Q_le_p : ramp 1e-5 from 0.5 to 1.0

_SIG_RE = {
    "const": re.compile(r"const\s+(\S+)$"),
    "step": re.compile(r"step\s+(\S+)\s+at\s+(\S+)$"),
    "ramp": re.compile(r"ramp\s+(\S+)\s+from\s+(\S+)\s+to\s+(\S+)$"),
    "samples": re.compile(r"samples\s+(.+)$"),
}


def _parse_signal(fault: str, body: str, lineno: int) -> FaultSignal:
    body = body.strip()
    try:
        if m := _SIG_RE["const"].fullmatch(body):
            return FaultSignal(fault, "const", magnitude=float(m.group(1)))
        if m := _SIG_RE["step"].fullmatch(body):
            return FaultSignal(fault, "step", magnitude=float(m.group(1)), onset=float(m.group(2)))
        if m := _SIG_RE["ramp"].fullmatch(body):
            return FaultSignal(fault, "ramp", magnitude=float(m.group(1)),
                               onset=float(m.group(2)), end=float(m.group(3)))
        if m := _SIG_RE["samples"].fullmatch(body):
            pts = [pair.split(":") for pair in m.group(1).split()]
            times = tuple(float(a) for a, _ in pts)
            vals = tuple(float(b) for _, b in pts)
            return FaultSignal(fault, "samples", times=times, values=vals,
                               magnitude=max(abs(v) for v in vals))
    except (ValueError, ScenarioError) as exc:
        raise ModelFormatError(f"bad signal: {exc}", lineno) from exc
    raise ModelFormatError(f"unknown signal form {body!r}", lineno)


def parse_scenario(text: str, name: str = "scenario") -> SimScenario:
    params = default_parameters()
    overrides: dict[str, float] = {}
    n = 1
    duration = 1.0
    step = 1.0e-4
    p_s0 = 1.8e7
    initial = "equilibrium"
    inputs: dict[str, FaultSignal] = {}
    faults: list[FaultSignal] = []

    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line not in ("[scenario]", "[inputs]", "[faults]"):
                raise ModelFormatError(f"unknown section {line}", lineno)
            section = line[1:-1]
            continue
        if section is None:
            raise ModelFormatError("content before any section header", lineno)
        head, sep, rest = line.partition(":")
        if not sep:
            raise ModelFormatError("expected '<key> : <value>'", lineno)
        key = head.strip()
        rest = rest.strip()
        if section == "scenario":
            try:
                if key == "cylinders":
                    n = int(rest)
                elif key == "duration":
                    duration = float(rest)
                elif key == "step":
                    step = float(rest)
                elif key == "p_s0":
                    p_s0 = float(rest)
                elif key == "initial":
                    if rest != "equilibrium":
                        raise ModelFormatError("only 'initial : equilibrium' is supported", lineno)
                    initial = rest
                elif key.startswith("param."):
                    overrides[key[len("param."):]] = float(rest)
                else:
                    raise ModelFormatError(f"unknown scenario key {key!r}", lineno)
            except ValueError as exc:
                raise ModelFormatError(f"bad value for {key}: {exc}", lineno) from exc
        elif section == "inputs":
            inputs[key] = _parse_signal("", rest, lineno)
        else:
            faults.append(_parse_signal(key, rest, lineno))

    if overrides:
        unknown = [k for k in overrides if not hasattr(params, k)]
        if unknown:
            raise ModelFormatError(f"unknown parameter override {unknown[0]}", _line_of_key(text, unknown[0]))
        params = replace(params, **overrides)
    base_inputs = equilibrium_inputs(params, n)
    base_inputs.update(inputs)
    scn = SimScenario(params, n, duration, step, base_inputs, tuple(faults),
                      initial=None, p_s0=p_s0, name=name)
    return scn.validated()


def _line_of_key(text: str, key: str) -> int:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if key in line:
            return lineno
    return 0


def load_scenario(path) -> SimScenario:
    from pathlib import Path

    p = Path(path)
    return parse_scenario(p.read_text(encoding="utf-8"), name=p.stem)
