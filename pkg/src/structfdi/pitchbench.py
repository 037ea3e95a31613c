"""The hydraulic blade-pitch benchmark: structural model builder and plant parameters.

One supply circuit (pump flow, accumulator, relief valve) feeds up to three
identical cylinder/proportional-valve circuits with a regenerative check
valve each.  The builder emits the structural incidence of every plant
relation plus the standard sensor set; the analytic equations themselves live
in hydrosim.

Flow relations that switch (spool sign, check valve, relief valve, gas law)
are encoded as gated branch pairs sharing an id stem, so the same document
serves both the whole-model analysis (after condense_gates) and the
per-region sweep (after specialize_region).
"""

from __future__ import annotations

from dataclasses import dataclass

from .structmodel import (
    FAULT,
    KNOWN,
    NEGATIVE,
    POSITIVE,
    UNKNOWN,
    Constraint,
    RegionGate,
    SensorSpec,
    StructuralModel,
    Switch,
    Variable,
    add_sensor,
    expand_differential,
)

VARIANTS = ("standard", "with_Fext_sensor", "sensorless")


def build_pitch_model(n_cylinders: int = 1, variant: str = "standard") -> StructuralModel:
    """Encode the pitch plant for 1 or 3 cylinders with the chosen sensor set.

    standard: rod position + both chamber pressures per cylinder, spool
    position per valve, one supply pressure.  with_Fext_sensor additionally
    measures the external load on each rod.  sensorless ships the bare plant.
    """
    if n_cylinders not in (1, 3):
        raise ValueError("n_cylinders must be 1 or 3")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")

    sfx = [""] if n_cylinders == 1 else [str(i) for i in range(1, n_cylinders + 1)]
    variables: list[Variable] = []
    switches: list[Switch] = []
    constraints: list[Constraint] = []

    def var(vid, kind, desc, deriv=None):
        variables.append(Variable(vid, kind, description=desc, derivative_of=deriv))

    def con(cid, touches, doc, gate=None):
        kinds = {v.id: v.kind for v in variables}
        faults = tuple(t for t in touches if kinds[t] == FAULT)
        constraints.append(Constraint(cid, tuple(touches), faults, gate=gate, doc=doc))

    # shared supply circuit
    var("p_s", UNKNOWN, "supply pressure")
    var("dp_s", UNKNOWN, "supply pressure rate", deriv="p_s")
    var("beta_e", UNKNOWN, "effective bulk modulus")
    var("Q_acc", UNKNOWN, "accumulator exchange flow")
    var("Q_rel", UNKNOWN, "relief valve flow")
    var("V_oil", UNKNOWN, "accumulator oil volume")
    var("V_gas", UNKNOWN, "accumulator gas volume")
    var("Q_s", KNOWN, "pump flow")
    var("p_t", KNOWN, "tank pressure (constant)")
    var("p_atm", KNOWN, "atmospheric pressure (constant)")
    var("f_B_e", FAULT, "oil degradation")
    var("f_Q_ru", FAULT, "rotary-unit leakage")
    var("f_Q_rel", FAULT, "relief valve defect")
    var("f_acc", FAULT, "accumulator gas leakage")

    # per-cylinder circuit
    for s in sfx:
        tag = f" (cylinder {s})" if s else ""
        var(f"x_c{s}", UNKNOWN, f"rod position{tag}")
        var(f"v_c{s}", UNKNOWN, f"rod velocity{tag}", deriv=f"x_c{s}")
        var(f"p_p{s}", UNKNOWN, f"piston-chamber pressure{tag}")
        var(f"p_r{s}", UNKNOWN, f"rod-chamber pressure{tag}")
        var(f"x_v{s}", UNKNOWN, f"spool position{tag}")
        var(f"v_v{s}", UNKNOWN, f"spool velocity{tag}", deriv=f"x_v{s}")
        var(f"F_ext{s}", UNKNOWN, f"external rod load{tag}")
        var(f"Q_p{s}", UNKNOWN, f"PV flow, piston side{tag}")
        var(f"Q_rv{s}", UNKNOWN, f"PV flow, rod side{tag}")
        var(f"Q_r{s}", UNKNOWN, f"rod-chamber flow{tag}")
        var(f"Q_cv{s}", UNKNOWN, f"check valve flow{tag}")
        var(f"Q_v{s}", UNKNOWN, f"supply-to-valve flow{tag}")
        var(f"Q_le_p{s}", UNKNOWN, f"piston-side external leakage{tag}")
        var(f"Q_le_r{s}", UNKNOWN, f"rod-side external leakage{tag}")
        var(f"Q_li{s}", UNKNOWN, f"cross-port leakage{tag}")
        var(f"u{s}", KNOWN, f"valve command{tag}")
        var(f"f_Fr_c{s}", FAULT, f"cylinder friction increase{tag}")
        var(f"f_Q_le_p{s}", FAULT, f"piston-side leakage fault{tag}")
        var(f"f_Q_le_r{s}", FAULT, f"rod-side leakage fault{tag}")
        var(f"f_Q_li{s}", FAULT, f"cross-port leakage fault{tag}")
        var(f"f_Q_p{s}", FAULT, f"PV piston-side flow fault{tag}")
        var(f"f_Q_rv{s}", FAULT, f"PV rod-side flow fault{tag}")
        var(f"f_Fr_v{s}", FAULT, f"valve friction{tag}")
        var(f"f_wv_v{s}", FAULT, f"valve coil fault{tag}")
        var(f"f_Q_cv{s}", FAULT, f"check valve defect{tag}")

    for s in sfx:
        switches.append(Switch(f"s_xv{s}", f"x_v{s} >= 0"))
        switches.append(Switch(f"s_cv{s}", f"p_r{s} + p_cv_c - p_s >= 0"))
    switches.append(Switch("s_rel", "p_s >= p_cr_r"))
    switches.append(Switch("s_gas", "p_s >= p_gas_0"))

    for s in sfx:
        con(f"c_fb{s}", [f"v_c{s}", f"p_p{s}", f"p_r{s}", f"F_ext{s}", f"f_Fr_c{s}"],
            f"force balance{s and ' cyl ' + s}")
        con(f"c_pp{s}", [f"p_p{s}", "beta_e", f"x_c{s}", f"Q_p{s}", f"v_c{s}", f"Q_le_p{s}", f"Q_li{s}"],
            "piston-chamber pressure build-up")
        con(f"c_pr{s}", [f"p_r{s}", "beta_e", f"x_c{s}", f"Q_r{s}", f"v_c{s}", f"Q_le_r{s}", f"Q_li{s}"],
            "rod-chamber pressure build-up")
        con(f"c_lep{s}", [f"Q_le_p{s}", f"p_p{s}", "p_atm", f"f_Q_le_p{s}"], "piston-side leakage law")
        con(f"c_ler{s}", [f"Q_le_r{s}", f"p_r{s}", "p_atm", f"f_Q_le_r{s}"], "rod-side leakage law")
        con(f"c_li{s}", [f"Q_li{s}", f"p_p{s}", f"p_r{s}", f"f_Q_li{s}"], "cross-port leakage law")
        con(f"c_qp{s}_pos", [f"Q_p{s}", f"x_v{s}", "p_s", f"p_p{s}", f"f_Q_p{s}"],
            "PV piston-side orifice, supply branch", gate=RegionGate(f"s_xv{s}", POSITIVE))
        con(f"c_qp{s}_neg", [f"Q_p{s}", f"x_v{s}", f"p_p{s}", "p_t", f"f_Q_p{s}"],
            "PV piston-side orifice, tank branch", gate=RegionGate(f"s_xv{s}", NEGATIVE))
        con(f"c_qrv{s}_pos", [f"Q_rv{s}", f"f_Q_rv{s}"],
            "PV rod-side orifice, closed branch", gate=RegionGate(f"s_xv{s}", POSITIVE))
        con(f"c_qrv{s}_neg", [f"Q_rv{s}", f"x_v{s}", "p_s", f"p_r{s}", f"f_Q_rv{s}"],
            "PV rod-side orifice, supply branch", gate=RegionGate(f"s_xv{s}", NEGATIVE))
        con(f"c_xv{s}", [f"v_v{s}", f"x_v{s}", f"u{s}", f"f_Fr_v{s}", f"f_wv_v{s}"],
            "spool closed-loop dynamics")
        con(f"c_qr{s}", [f"Q_r{s}", f"Q_rv{s}", f"Q_cv{s}"], "rod-side flow composition")
        con(f"c_qcv{s}_pos", [f"Q_cv{s}", f"p_r{s}", "p_s", f"f_Q_cv{s}"],
            "check valve, open branch", gate=RegionGate(f"s_cv{s}", POSITIVE))
        con(f"c_qcv{s}_neg", [f"Q_cv{s}", f"f_Q_cv{s}"],
            "check valve, closed branch", gate=RegionGate(f"s_cv{s}", NEGATIVE))
        # The supply-draw composition switches on the spool sign analytically,
        # but it is not one of the operation-region equations: every region
        # keeps the whole relation, so it ships ungated with full incidence.
        con(f"c_qv{s}", [f"Q_v{s}", f"Q_p{s}", f"Q_rv{s}", f"x_v{s}"], "supply draw per valve")

    con("c_be", ["beta_e", "p_s", "f_B_e"], "effective bulk modulus of the oil")
    con("c_ps", ["dp_s", "p_s", "V_oil", "V_gas", "beta_e", "Q_acc"], "supply pressure dynamics")
    con("c_qacc",
        ["Q_acc", "Q_s", "Q_rel"]
        + [f"Q_cv{s}" for s in sfx] + [f"Q_v{s}" for s in sfx] + ["f_Q_ru"],
        "accumulator flow balance")
    con("c_qrel_pos", ["Q_rel", "p_s", "f_Q_rel"], "relief valve, open branch",
        gate=RegionGate("s_rel", POSITIVE))
    con("c_qrel_neg", ["Q_rel", "f_Q_rel"], "relief valve, closed branch",
        gate=RegionGate("s_rel", NEGATIVE))
    con("c_voil", ["V_oil", "V_gas"], "oil volume from accumulator geometry")
    con("c_vgas_pos", ["V_gas", "p_s", "f_acc"], "gas volume, adiabatic branch",
        gate=RegionGate("s_gas", POSITIVE))
    con("c_vgas_neg", ["V_gas", "f_acc"], "gas volume, below pre-charge branch",
        gate=RegionGate("s_gas", NEGATIVE))

    name = f"pitch_{'single' if n_cylinders == 1 else 'full'}"
    if variant == "with_Fext_sensor":
        name += "_fext"
    elif variant == "sensorless":
        name += "_sensorless"
    model = StructuralModel(name, tuple(variables), tuple(constraints), tuple(switches))
    model = expand_differential(model)

    if variant != "sensorless":
        for s in sfx:
            model = add_sensor(model, SensorSpec(f"x_c{s}", f"xc{s}"))
            model = add_sensor(model, SensorSpec(f"p_p{s}", f"pp{s}"))
            model = add_sensor(model, SensorSpec(f"p_r{s}", f"pr{s}"))
            model = add_sensor(model, SensorSpec(f"x_v{s}", f"xv{s}"))
        model = add_sensor(model, SensorSpec("p_s", "ps"))
    if variant == "with_Fext_sensor":
        for s in sfx:
            model = add_sensor(model, SensorSpec(f"F_ext{s}", f"Fext{s}"))
    return model


@dataclass(frozen=True)
class PlantParameters:
    """Physical parameters of the pitch plant.

    All values shipped by default_parameters() are plausible engineering
    magnitudes for a megawatt-class actuator, chosen for a well-behaved
    simulation; none of them is a measurement of a specific machine.
    """

    m_eq: float        # equivalent moving mass, kg
    a_p: float         # piston-side area, m^2
    a_r: float         # rod-side annulus area, m^2
    b_v: float         # viscous friction, N s/m
    f_c: float         # Coulomb friction level, N
    gamma: float       # tanh friction smoothing velocity, m/s
    beta_oil: float    # bulk modulus of pure oil, Pa
    eps_a0: float      # volumetric air fraction at atmospheric pressure
    c_ad: float        # air polytropic constant in the bulk-modulus law
    p_atm: float       # atmospheric pressure, Pa
    p_t: float         # tank pressure, Pa
    c_le_p: float      # piston-side leakage coefficient, m^3/(s Pa)
    c_le_r: float      # rod-side leakage coefficient, m^3/(s Pa)
    c_li: float        # cross-port leakage coefficient, m^3/(s Pa)
    kv_gain: float     # orifice gain per metre of spool travel, m^3/(s m sqrt(Pa))
    phi_v: float       # rod-side orifice area ratio
    xi: float          # spool loop damping ratio
    omega0: float      # spool loop natural frequency, rad/s
    k_u: float         # spool reference gain, m per command unit
    k_cv: float        # check valve flow gain, m^3/(s Pa)
    k_rel: float       # relief valve flow gain, m^3/(s Pa)
    p_cv_c: float      # check valve cracking pressure, Pa
    p_cr_r: float      # relief valve opening pressure, Pa
    p_gas0: float      # accumulator gas pre-charge pressure, Pa
    v_acc: float       # accumulator volume, m^3
    v_hose: float      # supply hose volume, m^3
    v0_p: float        # piston-side dead volume, m^3
    v0_r: float        # rod-side dead volume, m^3
    x_c_max: float     # cylinder stroke, m
    k_ad: float        # adiabatic index of the accumulator gas
    q_s: float         # nominal pump flow, m^3/s

    def kv(self, x_v: float) -> float:
        """Orifice gain map: proportional to spool opening."""
        return self.kv_gain * abs(x_v)


def default_parameters() -> PlantParameters:
    return PlantParameters(
        m_eq=2.5e3,
        a_p=7.85e-3,
        a_r=4.0e-3,
        b_v=1.5e4,
        f_c=2.5e3,
        gamma=0.01,
        beta_oil=1.6e9,
        eps_a0=0.05,
        c_ad=1.4,
        p_atm=1.013e5,
        p_t=1.013e5,
        c_le_p=5.0e-13,
        c_le_r=5.0e-13,
        c_li=1.0e-12,
        kv_gain=3.2e-5,
        phi_v=0.8,
        xi=0.7,
        omega0=188.5,
        k_u=1.0e-3,
        k_cv=5.0e-9,
        # zero cracking pressure keeps the printed check-valve law continuous
        # at its gate; see README on the gate/term threshold mismatch.
        p_cv_c=0.0,
        k_rel=5.0e-9,
        p_cr_r=2.5e7,
        p_gas0=8.0e6,
        v_acc=2.5e-2,
        v_hose=5.0e-3,
        v0_p=2.0e-3,
        v0_r=2.0e-3,
        x_c_max=0.75,
        k_ad=1.4,
        q_s=1.2e-3,
    )


def validate_parameters(p: PlantParameters) -> tuple[str, ...]:
    """Invariant violations as messages; empty tuple means usable."""
    bad: list[str] = []
    positive = {
        "m_eq": p.m_eq, "a_p": p.a_p, "a_r": p.a_r, "gamma": p.gamma,
        "beta_oil": p.beta_oil, "c_ad": p.c_ad, "p_atm": p.p_atm, "p_t": p.p_t,
        "c_le_p": p.c_le_p, "c_le_r": p.c_le_r, "c_li": p.c_li,
        "kv_gain": p.kv_gain, "phi_v": p.phi_v, "xi": p.xi, "omega0": p.omega0,
        "k_u": p.k_u, "k_cv": p.k_cv, "k_rel": p.k_rel, "p_cr_r": p.p_cr_r,
        "p_gas0": p.p_gas0, "v_acc": p.v_acc, "v_hose": p.v_hose,
        "v0_p": p.v0_p, "v0_r": p.v0_r, "x_c_max": p.x_c_max,
    }
    for name, val in positive.items():
        if not val > 0.0:
            bad.append(f"{name} must be strictly positive, got {val}")
    for name, val in (("b_v", p.b_v), ("f_c", p.f_c), ("p_cv_c", p.p_cv_c), ("q_s", p.q_s)):
        if val < 0.0:
            bad.append(f"{name} must be nonnegative, got {val}")
    if not 0.0 <= p.eps_a0 < 1.0:
        bad.append(f"eps_a0 must lie in [0, 1), got {p.eps_a0}")
    if not 1.0 <= p.k_ad <= 2.0:
        bad.append(f"k_ad must lie in [1, 2], got {p.k_ad}")
    return tuple(bad)
