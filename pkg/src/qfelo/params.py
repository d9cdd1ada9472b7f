"""Dimensionless oscillator parameters and run configuration.

Configuration documents are YAML (JSON is accepted as a subset)::

    theta: 1.0
    Na: 150
    alpha_at_Na: 0.1        # or wrT: 10.0, or delta: 0.05
    distribution: {kind: gaussian, center_p_over_q: 0.5, width_dp_over_q: 0.02}
    tolerances: {quadrature: 1.0e-10, oracle: 1.0e-9}
    output: {dir: out, tag: sweep}

Sections ``sweep``, ``oracle``, ``classical``, ``design`` and ``feasibility``
are optional and consumed by the corresponding subcommands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
import yaml

from qfelo.exceptions import ConfigError
from qfelo.momentum import DELTA, GAUSSIAN, MomentumDistribution


@dataclass(frozen=True)
class QuantumOscParams:
    """Pump parameter, inverse loss parameter and recoil parameter.

    The coupling ``gT`` and the quantum parameter ``alpha_n`` are derived.
    """

    pump_theta: float
    loss_inverse_Na: float
    recoil_wrT: float

    def __post_init__(self):
        for name in ("pump_theta", "loss_inverse_Na", "recoil_wrT"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.pump_theta < 0:
            raise ValueError(f"negative pump parameter theta={self.pump_theta}")
        if self.loss_inverse_Na <= 0:
            raise ValueError(f"non-positive N_a={self.loss_inverse_Na}")
        if self.recoil_wrT <= 0:
            raise ValueError(f"non-positive recoil parameter wrT={self.recoil_wrT}")

    @classmethod
    def from_alpha(cls, theta, Na, alpha_at_Na):
        """Build from the quantum parameter at n = N_a, which fixes wrT = theta/alpha."""
        if not alpha_at_Na > 0:
            raise ValueError(f"non-positive alpha_at_Na={alpha_at_Na}")
        return cls(theta, Na, theta / alpha_at_Na)

    @classmethod
    def from_delta(cls, delta, Na, wrT):
        """Build at relative threshold deviation ``delta`` on resonance.

        See :func:`coupling_for_delta` for the mapping.
        """
        gT = coupling_for_delta(delta, Na)
        return cls(gT * math.sqrt(Na), Na, wrT)

    @property
    def coupling_gT(self) -> float:
        return self.pump_theta / math.sqrt(self.loss_inverse_Na)

    def quantum_alpha_at(self, n):
        return self.coupling_gT * np.sqrt(n) / self.recoil_wrT

    @property
    def alpha_at_Na(self) -> float:
        return self.pump_theta / self.recoil_wrT

    @property
    def quantum_regime(self) -> bool:
        return self.alpha_at_Na < 1

    @property
    def small_signal(self) -> bool:
        return self.pump_theta < 1

    def flags(self) -> dict:
        return {"quantum_regime": self.quantum_regime, "small_signal": self.small_signal}

    def with_theta(self, theta, hold="alpha"):
        """Copy with a new pump parameter, keeping alpha_at_Na or wrT fixed."""
        if hold == "alpha":
            return QuantumOscParams.from_alpha(theta, self.loss_inverse_Na, self.alpha_at_Na)
        if hold == "recoil":
            return QuantumOscParams(theta, self.loss_inverse_Na, self.recoil_wrT)
        raise ValueError(f"hold must be 'alpha' or 'recoil', got {hold!r}")

    def to_dict(self) -> dict:
        return {"theta": self.pump_theta, "Na": self.loss_inverse_Na, "wrT": self.recoil_wrT}


def coupling_for_delta(delta, Na):
    """Coupling gT that puts the resonant chain at threshold deviation ``delta``.

    The linear gain over the loss, (gT)^2 N / (N / N_a), equals theta^2. With the
    finite-gT sinc factor kept, the first ratio theta^2 sinc^2(gT) = N_a sin^2(gT)
    is set to 1/(1 - delta), i.e. losses are (1 - delta) times the gain at n = 1.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    s = 1.0 / ((1.0 - delta) * Na)
    if s > 1:
        raise ValueError(f"N_a={Na} too small to reach delta={delta}")
    return math.asin(math.sqrt(s))


@dataclass(frozen=True)
class ThresholdDeviation:
    """Relative deviation of losses from linear gain.

    ``linear_gain`` is (gT)^2 N and needs the electron number, which the
    dimensionless model never splits out of N_a; it is ``None`` when unknown.
    """

    delta: float
    linear_gain: float | None = None

    @classmethod
    def from_gain_and_loss(cls, linear_gain, loss):
        return cls((linear_gain - loss) / linear_gain, linear_gain)

    @classmethod
    def from_params(cls, params: QuantumOscParams):
        if params.pump_theta == 0:
            return cls(-math.inf)
        return cls(1.0 - 1.0 / params.pump_theta**2)

    @property
    def small_signal_above_threshold(self) -> bool:
        return 0 < self.delta <= 0.2


@dataclass(frozen=True)
class GridSpec:
    start: float
    stop: float
    num: int
    log: bool = False

    def __post_init__(self):
        if int(self.num) != self.num or self.num < 2:
            raise ValueError(f"grid needs at least 2 points, got num={self.num}")
        if self.log and not (self.start > 0 and self.stop > 0):
            raise ValueError("log-spaced grid needs positive bounds")

    def values(self) -> np.ndarray:
        if self.log:
            return np.geomspace(self.start, self.stop, int(self.num))
        return np.linspace(self.start, self.stop, int(self.num))

    def to_dict(self) -> dict:
        return {"start": self.start, "stop": self.stop, "num": int(self.num), "log": self.log}


@dataclass(frozen=True)
class SweepSpec:
    scenario: str
    theta: GridSpec
    second: GridSpec
    hold: str = "alpha"


@dataclass(frozen=True)
class RunConfig:
    engine: str = "closed_form"
    distribution: MomentumDistribution = MomentumDistribution.delta(0.5)
    rel_tol: float = 1e-10
    oracle_tol: float = 1e-9
    max_kicks: int = 10**7
    injection: str = "poisson"
    nmax_cap: int = 10**7
    sweep: SweepSpec | None = None
    output_dir: str | None = None
    tag: str | None = None
    sections: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.engine not in ("closed_form", "oracle"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.injection not in ("poisson", "regular"):
            raise ValueError(f"unknown injection mode {self.injection!r}")
        if not (self.rel_tol > 0 and self.oracle_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_kicks < 1 or self.nmax_cap < 2:
            raise ValueError("max_kicks and nmax cap must be positive")


# -- parsing ---------------------------------------------------------------

def parse_document(text: str, source: str = "<config>") -> dict:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        location = source if mark is None else f"{source}:{mark.line + 1}:{mark.column + 1}"
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"parse failure: {problem}", location=location) from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping", location=source)
    return doc


def _number(doc, key, source, prefix="", required=True, default=None):
    path = f"{prefix}{key}"
    if key not in doc or doc[key] is None:
        if required:
            raise ConfigError("missing required key", key=path, location=source)
        return default
    value = doc[key]
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}", key=path, location=source)
    try:
        # PyYAML reads "1e-7" (no dot) as a string
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", key=path, location=source) from None
    if not math.isfinite(value):
        raise ConfigError(f"non-finite value {value!r}", key=path, location=source)
    return value


def _positive(doc, key, source, prefix="", label=None, **kw):
    value = _number(doc, key, source, prefix, **kw)
    if value is not None and value <= 0:
        raise ConfigError(f"non-positive {label or key} ({value})", key=f"{prefix}{key}", location=source)
    return value


def _section(doc, key, source):
    value = doc.get(key)
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError("expected a mapping", key=key, location=source)
    return value


def grid_from_mapping(doc, source, prefix) -> GridSpec:
    if not isinstance(doc, dict):
        raise ConfigError("expected a mapping with start/stop/num", key=prefix.rstrip("."), location=source)
    start = _number(doc, "start", source, prefix)
    stop = _number(doc, "stop", source, prefix)
    num = _number(doc, "num", source, prefix)
    try:
        return GridSpec(start, stop, int(num), bool(doc.get("log", False)))
    except ValueError as exc:
        raise ConfigError(str(exc), key=prefix.rstrip("."), location=source) from None


def distribution_from_mapping(doc, source="<config>", prefix="distribution.") -> MomentumDistribution:
    kind = str(doc.get("kind", DELTA)).lower()
    center = _number(doc, "center_p_over_q", source, prefix, required=False, default=0.5)
    if kind == DELTA:
        return MomentumDistribution.delta(center)
    if kind == GAUSSIAN:
        width = _positive(doc, "width_dp_over_q", source, prefix, label="momentum width")
        return MomentumDistribution.gaussian(center, width)
    raise ConfigError(f"unknown distribution kind {kind!r}", key=f"{prefix}kind", location=source)


def params_from_mapping(doc: Mapping, source: str = "<config>") -> QuantumOscParams:
    Na = _positive(doc, "Na", source, label="N_a")
    given = [k for k in ("wrT", "alpha_at_Na", "delta") if doc.get(k) is not None]
    if len(given) != 1:
        raise ConfigError(
            "exactly one of 'wrT', 'alpha_at_Na', 'delta' is required" + (f" (got {given})" if given else ""),
            location=source,
        )
    try:
        if given[0] == "delta":
            delta = _number(doc, "delta", source)
            wrT = _positive(doc, "recoil_wrT", source, required=False, default=None)
            if wrT is None:
                raise ConfigError("'delta' form also needs 'recoil_wrT'", key="recoil_wrT", location=source)
            return QuantumOscParams.from_delta(delta, Na, wrT)
        theta = _number(doc, "theta", source)
        if theta < 0:
            raise ConfigError(f"negative pump parameter ({theta})", key="theta", location=source)
        if given[0] == "wrT":
            return QuantumOscParams(theta, Na, _positive(doc, "wrT", source, label="recoil parameter"))
        alpha = _positive(doc, "alpha_at_Na", source, label="quantum parameter")
        return QuantumOscParams.from_alpha(theta, Na, alpha)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), location=source) from None


def run_config_from_mapping(doc: Mapping, source: str = "<config>") -> RunConfig:
    dist = distribution_from_mapping(_section(doc, "distribution", source), source)
    tol = _section(doc, "tolerances", source)
    rel_tol = _positive(tol, "quadrature", source, "tolerances.", required=False, default=1e-10)
    oracle_tol = _positive(tol, "oracle", source, "tolerances.", required=False, default=1e-9)
    oracle = _section(doc, "oracle", source)
    max_kicks = _positive(oracle, "max_kicks", source, "oracle.", required=False, default=10**7)
    injection = str(oracle.get("injection", "poisson"))
    nmax = _section(doc, "nmax_policy", source)
    cap = _positive(nmax, "cap", source, "nmax_policy.", required=False, default=10**7)
    output = _section(doc, "output", source)

    sweep_spec = None
    if "sweep" in doc:
        sw = _section(doc, "sweep", source)
        for key in ("theta", "second"):
            if key not in sw:
                raise ConfigError("missing required key", key=f"sweep.{key}", location=source)
        sweep_spec = SweepSpec(
            scenario=str(sw.get("scenario", "theta_vs_momentum")),
            theta=grid_from_mapping(sw["theta"], source, "sweep.theta."),
            second=grid_from_mapping(sw["second"], source, "sweep.second."),
            hold=str(sw.get("hold", "alpha")),
        )
    sections = {k: doc[k] for k in ("classical", "design", "feasibility") if k in doc}
    try:
        return RunConfig(
            engine=str(doc.get("engine", "closed_form")),
            distribution=dist,
            rel_tol=rel_tol,
            oracle_tol=oracle_tol,
            max_kicks=int(max_kicks),
            injection=injection,
            nmax_cap=int(cap),
            sweep=sweep_spec,
            output_dir=output.get("dir"),
            tag=output.get("tag"),
            sections=sections,
        )
    except ValueError as exc:
        raise ConfigError(str(exc), location=source) from None


def params_from_config(text: str, source: str = "<config>") -> tuple[QuantumOscParams, RunConfig]:
    """Parse a configuration document into validated parameters and run settings."""
    doc = parse_document(text, source)
    return params_from_mapping(doc, source), run_config_from_mapping(doc, source)


def serialize(params: QuantumOscParams, config: RunConfig | None = None) -> str:
    """Dump parameters (and optionally run settings) back to YAML.

    Floats go through ``repr`` so a parse of the output reproduces them exactly.
    """
    doc: dict[str, Any] = params.to_dict()
    if config is not None:
        doc["engine"] = config.engine
        doc["distribution"] = config.distribution.to_dict()
        doc["tolerances"] = {"quadrature": config.rel_tol, "oracle": config.oracle_tol}
        doc["oracle"] = {"max_kicks": config.max_kicks, "injection": config.injection}
        doc["nmax_policy"] = {"cap": config.nmax_cap}
        if config.sweep is not None:
            doc["sweep"] = {
                "scenario": config.sweep.scenario,
                "theta": config.sweep.theta.to_dict(),
                "second": config.sweep.second.to_dict(),
                "hold": config.sweep.hold,
            }
        output = {k: v for k, v in (("dir", config.output_dir), ("tag", config.tag)) if v is not None}
        if output:
            doc["output"] = output
        doc.update(config.sections)
    return yaml.safe_dump(doc, sort_keys=False)
