"""Laboratory-frame design of a quantum FEL oscillator with an optical undulator.

All quantities are SI internally; display units (um^-3, mm mrad, PW/cm^2, ...)
appear only in :func:`report_rows`.

Several coefficients are fixed by closure against the published parameter
tables rather than stated formulas:

* recoil parameter   wrT = 8 gamma0 (hbar/m c) k_W^2 L / (1 + a0^2)
* plasma wavenumber  k_p = sqrt(4 pi r_e n_e / gamma0^3)
* spontaneous decay  R_sp = (alpha_f/3) a0^2 k_W
* undulator field    a0 = 0.855e-9/sqrt(2) * lambda_W[um] * sqrt(I0[W/cm^2])
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping

import numpy as np
from scipy import constants as const

from qfelo.exceptions import ConfigError, DesignError
from qfelo.params import GridSpec, _number, _positive, grid_from_mapping

HBAR_OVER_MC = const.hbar / (const.m_e * const.c)
COMPTON_WAVELENGTH = const.h / (const.m_e * const.c)
ELECTRON_RADIUS = const.physical_constants["classical electron radius"][0]
ALPHA_F = const.alpha
KAPPA_A = 0.855e-9 / math.sqrt(2.0)

# Relative slack on inclusive inequalities; binding constraints are met to rounding.
SLACK = 1e-12
BUDGET_GATE = 0.01


def recoil_parameter(gamma0, lambda_W, L, a0=0.0):
    """Recoil frequency times interaction time for a head-on optical undulator."""
    k_W = 2 * math.pi / lambda_W
    return 8.0 * gamma0 * HBAR_OVER_MC * k_W**2 * L / (1.0 + a0**2)


def plasma_kpL(n_e, gamma0, L):
    return math.sqrt(4 * math.pi * ELECTRON_RADIUS * n_e / gamma0**3) * L


def spontaneous_RspL(a0, lambda_W, L):
    return ALPHA_F / 3.0 * a0**2 * (2 * math.pi / lambda_W) * L


def resonance_wavelength(gamma0, a0, lambda_W, phi=math.pi, vartheta=0.0):
    geometry = 1.0 - math.cos(phi)
    if geometry <= 0:
        raise DesignError("degenerate geometry: cos(phi) = 1")
    if not gamma0 > 1:
        raise DesignError(f"gamma0 must exceed 1, got {gamma0}")
    return lambda_W * (1 + a0**2 + gamma0**2 * vartheta**2) / (2 * geometry * gamma0**2)


def gain_bandwidth(lambda_W, L):
    return lambda_W / (4 * math.pi * L)


def budget_rhs(gain_G1, recoil_wrT):
    """(k_p L)^2 (R_sp L) fixed by the gain and the recoil parameter."""
    return 2 * ALPHA_F / 3 * gain_G1 * recoil_wrT


def undulator_intensity(a0, lambda_W):
    """Peak intensity (W/m^2) of the optical undulator with parameter a0."""
    per_cm2 = (a0 / (KAPPA_A * lambda_W * 1e6)) ** 2
    return per_cm2 * 1e4


def undulator_parameter(I0, lambda_W):
    return KAPPA_A * lambda_W * 1e6 * math.sqrt(I0 * 1e-4)


@dataclass(frozen=True)
class DesignInputs:
    lambda_L: float = 1.0e-10
    lambda_W: float = 1.064e-6
    gain_G1: float = 0.1
    recoil_wrT: float = 2 * math.pi
    kpL_target: float | None = None
    RspL_target: float | None = None
    delta: float = 0.01
    f_rep: float = 10e6
    tau_e: float = 1.2e-12
    phi: float = math.pi
    vartheta: float = 0.0
    energy_spread: float | None = None
    absorption: float = 0.0

    def __post_init__(self):
        for name in ("lambda_L", "lambda_W", "gain_G1", "recoil_wrT", "f_rep", "tau_e"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("kpL_target", "RspL_target"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    def budget_mismatch(self) -> float:
        """Relative violation of the budget identity by the given targets (0 if not both given)."""
        if self.kpL_target is None or self.RspL_target is None:
            return 0.0
        lhs = self.kpL_target**2 * self.RspL_target
        rhs = budget_rhs(self.gain_G1, self.recoil_wrT)
        return abs(lhs - rhs) / rhs

    def budgets(self) -> tuple[float, float]:
        """Space-charge and spontaneous-emission budgets on the identity surface.

        Missing targets are filled from the identity (equal split when both are
        missing); given pairs are rescaled at fixed ratio onto the surface.
        """
        rhs = budget_rhs(self.gain_G1, self.recoil_wrT)
        kp, rs = self.kpL_target, self.RspL_target
        if kp is None and rs is None:
            kp = rs = rhs ** (1 / 3)
        elif rs is None:
            rs = rhs / kp**2
        elif kp is None:
            kp = math.sqrt(rhs / rs)
        else:
            scale = (rhs / (kp**2 * rs)) ** (1 / 3)
            kp, rs = kp * scale, rs * scale
        return kp, rs


@dataclass(frozen=True)
class Verdict:
    name: str
    relation: str
    lhs: float
    rhs: float
    passed: bool
    margin: float


def _verdict(name, lhs, op, rhs, relation):
    if op in ("<=", "<"):
        margin = (rhs - lhs) / abs(rhs)
    else:
        margin = (lhs - rhs) / abs(rhs)
    passed = margin > 0 if op in ("<", ">") else margin >= -SLACK
    return Verdict(name, relation, float(lhs), float(rhs), bool(passed), float(margin))


@dataclass(frozen=True)
class DesignReport:
    lambda_L: float
    lambda_W: float
    gamma0: float
    L: float
    a0: float
    n_e: float
    Gamma: float
    kpL: float
    RspL: float
    recoil_wrT: float
    gain_G1: float
    iterations: int = 0
    # operating point
    eps_n: float | None = None
    sigma_e: float | None = None
    beta_star: float | None = None
    z_R: float | None = None
    w0: float | None = None
    tau0: float | None = None
    I0: float | None = None
    P0: float | None = None
    Ip: float | None = None
    Qb: float | None = None
    N_electrons: float | None = None
    tau_e: float | None = None
    f_rep: float | None = None
    L_cav: float | None = None
    R: float | None = None
    n_st: float | None = None
    n_out: float | None = None
    sigma_max: float | None = None
    sigma_1D: float | None = None
    tolerances: Mapping[str, float] = field(default_factory=dict)
    verdicts: tuple = ()

    @property
    def has_operating_point(self) -> bool:
        return self.eps_n is not None

    def budget_relative_error(self) -> float:
        """Identity check recomputed from the derived laboratory quantities."""
        kpL = plasma_kpL(self.n_e, self.gamma0, self.L)
        RspL = spontaneous_RspL(self.a0, self.lambda_W, self.L)
        rhs = budget_rhs(self.gain_G1, self.recoil_wrT)
        return abs(kpL**2 * RspL - rhs) / rhs

    def failed(self):
        return [v for v in self.verdicts if not v.passed]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tolerances"] = dict(self.tolerances)
        d["verdicts"] = [asdict(v) for v in self.verdicts]
        return d


def fundamentals(lambda_L, lambda_W, gamma0, L, a0, n_e, gain_G1=0.1, recoil_wrT=None) -> DesignReport:
    """Report seeded with externally chosen fundamentals (e.g. tabulated values)."""
    if recoil_wrT is None:
        recoil_wrT = recoil_parameter(gamma0, lambda_W, L, a0)
    return DesignReport(
        lambda_L=lambda_L, lambda_W=lambda_W, gamma0=gamma0, L=L, a0=a0, n_e=n_e,
        Gamma=gain_bandwidth(lambda_W, L), kpL=plasma_kpL(n_e, gamma0, L),
        RspL=spontaneous_RspL(a0, lambda_W, L), recoil_wrT=recoil_wrT, gain_G1=gain_G1,
    )


def solve_design_chain(inputs: DesignInputs, max_iter: int = 200, rtol: float = 1e-10) -> DesignReport:
    """Fixed-point solve for (gamma0, L, a0), then n_e from the space-charge budget.

    gamma0 follows from the resonance condition at the target laser wavelength,
    L from the target recoil parameter and a0 from the spontaneous-emission
    budget; a0 feeds back into the first two.
    """
    mismatch = inputs.budget_mismatch()
    if mismatch > BUDGET_GATE:
        raise DesignError(f"kpL/RspL targets violate the budget identity by {mismatch:.2%} (> 1%)")
    kpL, RspL = inputs.budgets()
    k_W = 2 * math.pi / inputs.lambda_W
    geometry = 2 * (1 - math.cos(inputs.phi)) * inputs.lambda_L - inputs.lambda_W * inputs.vartheta**2
    if geometry <= 0:
        raise DesignError("no real electron energy for this geometry")

    a0 = 0.0
    gamma0 = L = math.nan
    for it in range(1, max_iter + 1):
        gamma0_new = math.sqrt(inputs.lambda_W * (1 + a0**2) / geometry)
        L_new = inputs.recoil_wrT * (1 + a0**2) / (8 * gamma0_new * HBAR_OVER_MC * k_W**2)
        a0_new = math.sqrt(RspL / (ALPHA_F / 3 * k_W * L_new))
        change = max(abs(gamma0_new - gamma0) / gamma0_new if it > 1 else math.inf,
                     abs(L_new - L) / L_new if it > 1 else math.inf,
                     abs(a0_new - a0) / a0_new)
        gamma0, L, a0 = gamma0_new, L_new, a0_new
        if change < rtol:
            break
    else:
        raise DesignError(
            f"design chain not converged in {max_iter} iterations "
            f"(last gamma0={gamma0:.6g}, L={L:.6g} m, a0={a0:.6g})"
        )
    n_e = (kpL / L) ** 2 * gamma0**3 / (4 * math.pi * ELECTRON_RADIUS)
    return DesignReport(
        lambda_L=inputs.lambda_L, lambda_W=inputs.lambda_W, gamma0=gamma0, L=L, a0=a0, n_e=n_e,
        Gamma=gain_bandwidth(inputs.lambda_W, L), kpL=kpL, RspL=RspL,
        recoil_wrT=inputs.recoil_wrT, gain_G1=inputs.gain_G1, iterations=it,
    )


def pauli_coefficient(report: DesignReport) -> float:
    """Fermionic bound reads eps_n > coefficient * sigma_e."""
    return math.sqrt((COMPTON_WAVELENGTH / (2 * math.pi)) ** 3 * math.pi * report.gamma0 * report.n_e / report.Gamma)


def coherence_window(report: DesignReport) -> tuple[float, float]:
    unit = report.gamma0 * report.lambda_L / (2 * math.pi)
    return 0.5 * unit, 10.0 * unit


def sigma_max(report: DesignReport) -> float:
    return (report.Gamma / (2 * report.a0**2)) ** 0.25 * math.sqrt(report.lambda_W * report.L) / (2 * math.pi)


def sigma_1D(report: DesignReport) -> float:
    return math.sqrt(report.L * report.lambda_L)


def derive_operating_point(report: DesignReport, inputs: DesignInputs) -> DesignReport:
    """Electron-beam, undulator-laser and cavity parameters on top of the fundamentals.

    Binding choices: eps_n at the top of the coherence window, sigma_e from the
    divergence bound, z_R from the longitudinal-intensity bound with dz = L/2.
    """
    g, L, a0, Gamma = report.gamma0, report.L, report.a0, report.Gamma
    lam_L, lam_W = report.lambda_L, report.lambda_W

    eps_n = coherence_window(report)[1]
    sigma_e = eps_n / math.sqrt(2 * Gamma)
    beta_star = sigma_e**2 * g / eps_n
    z_R = (L / 2) / math.sqrt(2 * Gamma / a0**2)
    w0 = math.sqrt(z_R * lam_W / math.pi)
    tau0 = 2 * L / const.c
    I0 = undulator_intensity(a0, lam_W)
    P0 = I0 * math.pi * w0**2 / 2
    Ip = const.e * report.n_e * const.c * 2 * math.pi * sigma_e**2
    Qb = Ip * inputs.tau_e
    N = Qb / const.e
    L_cav = const.c / (2 * inputs.f_rep)
    # losses per injection period = (1 - delta) G1
    R = 1 - inputs.gain_G1 * (1 - inputs.delta) / 2
    n_st = 3 * inputs.delta * N / inputs.gain_G1
    n_out = (1 - R - inputs.absorption) * n_st

    values = [g, L, a0, Gamma, eps_n, sigma_e, beta_star, z_R, w0, tau0, I0, P0, Ip, Qb, L_cav, R, n_st]
    if not all(math.isfinite(v) and v > 0 for v in values):
        raise DesignError("non-finite or non-positive intermediate in operating point")

    tolerances = {
        "dgamma0_over_gamma0": Gamma,
        "dlambdaW_over_lambdaW": 2 * Gamma,
        "dI0_over_I0": 2 * Gamma / a0**2,
        "dz_over_zR": math.sqrt(2 * Gamma / a0**2),
        "dx_over_w0": math.sqrt(Gamma / a0**2),
        "dLcav_over_Lcav": 2 * Gamma,
    }
    out = replace(
        report, eps_n=eps_n, sigma_e=sigma_e, beta_star=beta_star, z_R=z_R, w0=w0, tau0=tau0,
        I0=I0, P0=P0, Ip=Ip, Qb=Qb, N_electrons=N, tau_e=inputs.tau_e, f_rep=inputs.f_rep,
        L_cav=L_cav, R=R, n_st=n_st, n_out=n_out, sigma_max=sigma_max(report),
        sigma_1D=sigma_1D(report), tolerances=tolerances,
    )
    return replace(out, verdicts=tuple(evaluate_verdicts(out, inputs)))


def evaluate_verdicts(report: DesignReport, inputs: DesignInputs) -> list[Verdict]:
    r = report
    lo, hi = coherence_window(r)
    out = [
        _verdict("quantum_recoil", r.recoil_wrT, ">", 1.0, "wrT > 1"),
        _verdict("space_charge", r.kpL, "<", 1.0, "k_p L < 1"),
        _verdict("spontaneous_emission", r.RspL, "<", 1.0, "R_sp L < 1"),
        _verdict("budget_identity", r.budget_relative_error(), "<=", 1e-6,
                 "|(k_p L)^2 R_sp L / (2 alpha_f G1 wrT / 3) - 1| <= 1e-6"),
        _verdict("waist_covers_beam", r.w0, ">=", math.sqrt(2 * math.pi) * r.sigma_e, "w0 >= sqrt(2 pi) sigma_e"),
        _verdict("rayleigh_length", 2 * r.z_R, ">=", r.L, "2 z_R >= L"),
        _verdict("beta_star", r.eps_n, "<=", r.sigma_e**2 * r.gamma0 / r.L, "eps_n <= sigma_e^2 gamma0 / L"),
        _verdict("coherence_lower", r.eps_n, ">", lo, "eps_n > 0.5 gamma0 lambda_L / 2 pi"),
        _verdict("coherence_upper", r.eps_n, "<=", hi, "eps_n <= 10 gamma0 lambda_L / 2 pi"),
        _verdict("divergence", r.eps_n, "<=", r.sigma_e * math.sqrt(2 * r.Gamma), "eps_n <= sigma_e sqrt(2 Gamma)"),
        _verdict("pauli", r.eps_n, ">", r.sigma_e * pauli_coefficient(r), "eps_n > sigma_e sqrt((lambda_C/2pi)^3 pi gamma0 n_e / Gamma)"),
        _verdict("one_dimensional", r.sigma_e, ">", r.sigma_1D, "sigma_e > sqrt(L lambda_L)"),
        _verdict("sigma_max", r.sigma_e, "<=", r.sigma_max, "sigma_e <= sigma_max"),
        # tabulated tau0 equals 2L/c, so the bound is taken inclusive
        _verdict("pulse_duration", r.tau0, ">=", 2 * r.L / const.c, "tau0 >= 2 L / c"),
        _verdict("slippage", const.c * r.tau_e, ">", r.L / r.lambda_W * r.lambda_L, "c tau_e > (L/lambda_W) lambda_L"),
        _verdict("crystal_bandwidth", r.tau_e, ">", 1e-12, "tau_e > 1 ps"),
        _verdict("beta_star_window_low", r.beta_star, ">", r.L / 2, "beta* > L/2"),
        _verdict("beta_star_window_high", r.beta_star, "<", r.z_R, "beta* < z_R"),
    ]
    if inputs.energy_spread is not None:
        out.append(_verdict("energy_spread", inputs.energy_spread, "<=", r.Gamma, "dgamma0/gamma0 <= Gamma"))
    return out


def design(inputs: DesignInputs) -> DesignReport:
    return derive_operating_point(solve_design_chain(inputs), inputs)


# -- feasibility region --------------------------------------------------------

CONSTRAINTS = ("beta_star", "coherence", "divergence", "pauli", "one_dimensional", "sigma_max")


def beam_constraints(report: DesignReport, sigma_e, eps_n) -> dict[str, np.ndarray]:
    """Pass masks of the transverse beam constraints, broadcast over sigma_e and eps_n."""
    s = np.asarray(sigma_e, dtype=float)
    e = np.asarray(eps_n, dtype=float)
    lo, hi = coherence_window(report)
    tol = 1 + SLACK
    return {
        "beta_star": e <= s**2 * report.gamma0 / report.L * tol,
        "coherence": (e > lo) & (e <= hi * tol),
        "divergence": e <= s * math.sqrt(2 * report.Gamma) * tol,
        "pauli": e > s * pauli_coefficient(report),
        "one_dimensional": s > sigma_1D(report) + 0 * e,
        "sigma_max": s <= sigma_max(report) * tol + 0 * e,
    }


@dataclass(frozen=True)
class FeasibilityGrid:
    sigma_e: np.ndarray
    eps_n: np.ndarray
    masks: Mapping[str, np.ndarray]  # each indexed [i_sigma, j_eps]
    bits: np.ndarray
    feasible: np.ndarray

    def rows(self):
        for i, s in enumerate(self.sigma_e):
            for j, e in enumerate(self.eps_n):
                yield (float(s), float(e), *(int(self.masks[c][i, j]) for c in CONSTRAINTS),
                       int(self.bits[i, j]), int(self.feasible[i, j]))


def feasibility_scan(report: DesignReport, sigma_grid: GridSpec, eps_grid: GridSpec) -> FeasibilityGrid:
    """Evaluate every transverse constraint on a (sigma_e, eps_n) grid."""
    s = sigma_grid.values()
    e = eps_grid.values()
    masks = beam_constraints(report, s[:, None], e[None, :])
    masks = {k: np.broadcast_to(v, (s.size, e.size)).copy() for k, v in masks.items()}
    bits = np.zeros((s.size, e.size), dtype=np.int64)
    for bit, name in enumerate(CONSTRAINTS):
        bits |= masks[name].astype(np.int64) << bit
    feasible = np.logical_and.reduce([masks[c] for c in CONSTRAINTS])
    return FeasibilityGrid(s, e, masks, bits, feasible)


# -- I/O helpers -------------------------------------------------------------------

DISPLAY = [
    # field, symbol, SI unit, display unit, factor SI -> display
    ("lambda_L", "lambda_L", "m", "Angstrom", 1e10),
    ("lambda_W", "lambda_W", "m", "um", 1e6),
    ("recoil_wrT", "wrT", "1", "1", 1.0),
    ("gain_G1", "G1", "1", "1", 1.0),
    ("kpL", "k_p L", "1", "1", 1.0),
    ("RspL", "R_sp L", "1", "1", 1.0),
    ("Gamma", "Gamma", "1", "1", 1.0),
    ("gamma0", "gamma0", "1", "1", 1.0),
    ("L", "L", "m", "mm", 1e3),
    ("a0", "a0", "1", "1", 1.0),
    ("n_e", "n_e", "m^-3", "um^-3", 1e-18),
    ("sigma_e", "sigma_e", "m", "um", 1e6),
    ("eps_n", "eps_n", "m rad", "mm mrad", 1e6),
    ("beta_star", "beta*", "m", "mm", 1e3),
    ("w0", "w0", "m", "um", 1e6),
    ("z_R", "z_R", "m", "mm", 1e3),
    ("tau_e", "tau_e", "s", "ps", 1e12),
    ("tau0", "tau0", "s", "ps", 1e12),
    ("Ip", "I_p", "A", "A", 1.0),
    ("I0", "I0", "W/m^2", "PW/cm^2", 1e-4 * 1e-15),
    ("Qb", "Q", "C", "pC", 1e12),
    ("P0", "P0", "W", "TW", 1e-12),
    ("N_electrons", "N", "1", "1", 1.0),
    ("f_rep", "f_rep", "Hz", "MHz", 1e-6),
    ("L_cav", "L_cav", "m", "m", 1.0),
    ("R", "R", "1", "%", 100.0),
    ("n_st", "n_st", "1", "1", 1.0),
    ("n_out", "n_out", "1", "1", 1.0),
    ("sigma_max", "sigma_max", "m", "um", 1e6),
    ("sigma_1D", "sigma_1D", "m", "um", 1e6),
]

TOLERANCE_DISPLAY = {
    "dgamma0_over_gamma0": ("permille", 1e3),
    "dlambdaW_over_lambdaW": ("permille", 1e3),
    "dI0_over_I0": ("%", 1e2),
    "dz_over_zR": ("1", 1.0),
    "dx_over_w0": ("1", 1.0),
    "dLcav_over_Lcav": ("permille", 1e3),
}


def report_rows(report: DesignReport):
    """(quantity, value_si, unit_si, value_display, unit_display) rows."""
    rows = []
    for name, _symbol, si, disp, factor in DISPLAY:
        value = getattr(report, name)
        if value is not None:
            rows.append((name, float(value), si, float(value) * factor, disp))
    for name, value in report.tolerances.items():
        disp, factor = TOLERANCE_DISPLAY[name]
        rows.append((f"max_{name}", float(value), "1", float(value) * factor, disp))
    return rows


def inputs_from_mapping(doc: Mapping, source: str = "<config>") -> DesignInputs:
    p = "design."
    kw = {}
    for key in ("lambda_L", "lambda_W", "gain_G1", "recoil_wrT", "f_rep", "tau_e"):
        value = _positive(doc, key, source, p, required=False)
        if value is not None:
            kw[key] = value
    for key in ("kpL_target", "RspL_target", "energy_spread"):
        value = _positive(doc, key, source, p, required=False)
        if value is not None:
            kw[key] = value
    for key in ("delta", "phi", "vartheta", "absorption"):
        value = _number(doc, key, source, p, required=False)
        if value is not None:
            kw[key] = value
    unknown = set(doc) - set(DesignInputs.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", key="design", location=source)
    try:
        return DesignInputs(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc), key="design", location=source) from None


def feasibility_grids_from_mapping(doc: Mapping, source="<config>"):
    """Grid specs for the scan; defaults bracket the region by two decades."""
    if "sigma_e" in doc:
        sg = grid_from_mapping(doc["sigma_e"], source, "feasibility.sigma_e.")
    else:
        sg = GridSpec(1e-7, 1e-5, 200, log=True)
    if "eps_n" in doc:
        eg = grid_from_mapping(doc["eps_n"], source, "feasibility.eps_n.")
    else:
        eg = GridSpec(1e-10, 1e-7, 200, log=True)
    return sg, eg
