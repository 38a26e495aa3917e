"""Flat ``key = value`` run configuration.

One dotted key per line, ``#`` starts a comment. Keys are namespaced per
scenario (``sg.``, ``hit.``, ``evolve.``, ``probe.``) plus the shared ``grid.``
keys, ``seed`` and ``scenario``. Every key has a default; the resolved
configuration records which values were defaulted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import ParseError, ValidationError
from .phase_space import PhaseGrid

SCENARIOS = ("hit-sample", "hit-equivalence", "hybrid-evolve", "stern-gerlach", "positivity-probe")

U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class Key:
    kind: str
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple = ()
    help: str = ""


def _positive(v):
    return v > 0


def _unit(v):
    return 0.0 <= v <= 1.0


def _at_least(n):
    return lambda v: v >= n


GRID_KEYS = {
    "grid.x_min": Key("float", -8.0, help="lower x bound"),
    "grid.x_max": Key("float", 8.0, help="upper x bound"),
    "grid.p_min": Key("float", -8.0, help="lower p bound"),
    "grid.p_max": Key("float", 8.0, help="upper p bound"),
    "grid.n_x": Key("int", 128, _at_least(8), "must be >= 8", help="cells along x"),
    "grid.n_p": Key("int", 128, _at_least(8), "must be >= 8", help="cells along p"),
}

COMMON_KEYS = {
    "scenario": Key("str", "stern-gerlach", choices=SCENARIOS, help="scenario to run"),
    "seed": Key("int", 0, lambda v: 0 <= v <= U64_MAX, "must be an unsigned 64-bit integer", help="base RNG seed"),
}

SCENARIO_KEYS = {
    "stern-gerlach": {
        "sg.g": Key("float", 3.0, _positive, "must be positive", help="impulse strength; precision is 1/g"),
        "sg.c_plus": Key("complex", complex(1 / math.sqrt(2)), help="amplitude of spin up"),
        "sg.c_minus": Key("complex", complex(1 / math.sqrt(2)), help="amplitude of spin down"),
        "sg.path": Key("str", "analytic", choices=("analytic", "numeric"), help="propagator"),
        "sg.n_substeps": Key("int", 1, _at_least(1), "must be >= 1", help="sub-impulses on the numeric path"),
        **GRID_KEYS,
    },
    "hit-sample": {
        "hit.delta": Key("float", 0.1, _positive, "must be positive", help="pointer precision"),
        "hit.weight_plus": Key("float", 0.7, _unit, "must lie in [0, 1]", help="weight of the right peak"),
        "hit.separation": Key("float", 2.0, _positive, "must be positive", help="distance between the peaks"),
        "hit.width": Key("float", 0.1, _positive, "must be positive", help="width of each peak"),
        "hit.half_width": Key("float", 4.0, _positive, "must be positive", help="system grid half width"),
        "hit.spacing": Key("float", 0.01, _positive, "must be positive", help="system grid spacing"),
        "hit.n_runs": Key("int", 100000, _at_least(1), "must be >= 1", help="number of samples"),
    },
    "hit-equivalence": {
        "hit.delta": Key("float", 0.2, _positive, "must be positive", help="pointer precision"),
        "hit.half_width": Key("float", 4.0, _positive, "must be positive", help="system grid half width"),
        "hit.spacing": Key("float", 0.01, _positive, "must be positive", help="system grid spacing"),
        "hit.n_states": Key("int", 10, _at_least(1), "must be >= 1", help="random superpositions to test"),
        "hit.n_outcomes": Key("int", 5, _at_least(1), "must be >= 1", help="outcomes per state"),
    },
    "hybrid-evolve": {
        "evolve.generator": Key("str", "corrected", choices=("naive", "corrected"), help="equation of motion"),
        "evolve.scheme": Key("str", "central", choices=("central", "spectral"), help="state differentiation"),
        "evolve.dt": Key("float", 1e-3, _positive, "must be positive", help="time step"),
        "evolve.t_final": Key("float", 1.0, lambda v: v >= 0, "must be non-negative", help="end time"),
        "evolve.lam": Key("float", 1.0, help="coupling strength"),
        "evolve.coupling": Key("str", "sigma_z", choices=("sigma_x", "sigma_y", "sigma_z"), help="coupling matrix"),
        "evolve.coordinate": Key("str", "x", choices=("x", "p"), help="coupled classical coordinate"),
        "evolve.harmonic": Key("bool", True, help="include 1/2 (x^2 + p^2) in the classical Hamiltonian"),
        "evolve.theta": Key("float", math.pi / 2, help="Bloch polar angle of the initial spin"),
        "evolve.phi": Key("float", 0.0, help="Bloch azimuth of the initial spin"),
        "evolve.x0": Key("float", 0.0, help="initial mean x"),
        "evolve.p0": Key("float", 0.0, help="initial mean p"),
        "evolve.var_x": Key("float", 1.0, _positive, "must be positive", help="initial variance in x"),
        "evolve.var_p": Key("float", 1.0, _positive, "must be positive", help="initial variance in p"),
        "evolve.coarse": Key("bool", True, help="coarse-grain the initial state"),
        "evolve.record_every": Key("int", 10, _at_least(1), "must be >= 1", help="trace sampling stride"),
        **GRID_KEYS,
    },
    "positivity-probe": {
        "probe.generator": Key("str", "naive", choices=("naive", "corrected"), help="equation of motion"),
        "probe.variance": Key("float", 0.05, _positive, "must be positive", help="initial Gaussian variance"),
        "probe.lam": Key("float", 1.0, help="coupling strength"),
        "probe.coupling": Key("str", "sigma_x", choices=("sigma_x", "sigma_y", "sigma_z"), help="coupling matrix"),
        "probe.coarse": Key("bool", False, help="coarse-grain the initial state"),
        "probe.dt": Key("float", 1e-3, _positive, "must be positive", help="time step"),
        "probe.t_final": Key("float", 1.0, lambda v: v >= 0, "must be non-negative", help="end time"),
        "probe.record_every": Key("int", 10, _at_least(1), "must be >= 1", help="trace sampling stride"),
        **GRID_KEYS,
    },
}

NAMESPACE_SCENARIO = {"sg": "stern-gerlach", "evolve": "hybrid-evolve", "probe": "positivity-probe"}


def keys_for(scenario: str) -> dict:
    return {**COMMON_KEYS, **SCENARIO_KEYS[scenario]}


def _convert(raw: str, spec: Key, key: str):
    try:
        if spec.kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if spec.kind == "int":
            return int(raw, 0)
        if spec.kind == "complex":
            return complex(raw.replace(" ", "").replace("i", "j"))
        if spec.kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        return raw
    except ValueError:
        raise ValidationError(f"{key} must be of type {spec.kind}, got {raw!r}", key) from None


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    values: dict
    defaulted: tuple = field(default=())

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def get(self, key: str):
        return self.values[key]

    def grid(self) -> PhaseGrid:
        v = self.values
        return PhaseGrid(v["grid.x_min"], v["grid.x_max"], v["grid.p_min"], v["grid.p_max"],
                         v["grid.n_x"], v["grid.n_p"])

    def with_seed(self, seed: int) -> "RunConfig":
        spec = COMMON_KEYS["seed"]
        if not spec.check(seed):
            raise ValidationError(f"seed {spec.rule}", "seed")
        values = dict(self.values, seed=seed)
        return RunConfig(self.scenario, values, tuple(k for k in self.defaulted if k != "seed"))

    def to_dict(self) -> dict:
        out = {}
        for k, v in sorted(self.values.items()):
            out[k] = [v.real, v.imag] if isinstance(v, complex) else v
        return out


def tokenize(text: str) -> list[tuple[int, str, str]]:
    """``(line_number, key, raw_value)`` per assignment; raises :class:`ParseError`."""
    entries = []
    seen = {}
    for n, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"expected 'key = value', got {body!r}", n)
        key, raw = (part.strip() for part in body.split("=", 1))
        if not key or not raw:
            raise ParseError(f"empty key or value in {body!r}", n)
        if any(c.isspace() for c in key):
            raise ParseError(f"key {key!r} contains whitespace", n)
        if key in seen:
            raise ParseError(f"duplicate key {key!r} (first set on line {seen[key]})", n)
        seen[key] = n
        entries.append((n, key, raw))
    return entries


def _infer_scenario(keys) -> str:
    spaces = {k.split(".", 1)[0] for k in keys if "." in k and not k.startswith("grid.")}
    named = {NAMESPACE_SCENARIO[s] for s in spaces if s in NAMESPACE_SCENARIO}
    if "hit" in spaces and not named:
        raise ValidationError("hit.* keys are shared by hit-sample and hit-equivalence; set 'scenario' explicitly",
                              "scenario")
    if len(named) > 1:
        raise ValidationError(f"keys from several scenarios ({', '.join(sorted(named))}); set 'scenario'",
                              "scenario")
    return named.pop() if named else "stern-gerlach"


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ParseError
        Malformed line (carries ``line``).
    ValidationError
        Unknown key, wrong type or out-of-range value (carries ``key``).
    """
    entries = tokenize(text)
    raw = {k: v for _, k, v in entries}
    scenario = raw.get("scenario")
    if scenario is None:
        scenario = _infer_scenario(raw)
    elif scenario not in SCENARIOS:
        raise ValidationError(f"scenario must be one of {', '.join(SCENARIOS)}; got {scenario!r}", "scenario")
    schema = keys_for(scenario)
    values = {}
    for key, text_value in raw.items():
        if key not in schema:
            raise ValidationError(
                f"unknown key {key!r} for scenario {scenario}; valid keys: {', '.join(sorted(schema))}", key
            )
        spec = schema[key]
        v = _convert(text_value, spec, key)
        if spec.choices and v not in spec.choices:
            raise ValidationError(f"{key} must be one of {', '.join(spec.choices)}; got {v!r}", key)
        if spec.check is not None and not spec.check(v):
            raise ValidationError(f"{key} {spec.rule}", key)
        values[key] = v
    defaulted = tuple(sorted(k for k in schema if k not in values))
    for k in defaulted:
        values[k] = schema[k].default
    values["scenario"] = scenario
    _cross_check(scenario, values)
    return RunConfig(scenario, values, defaulted)


def _cross_check(scenario: str, v: dict) -> None:
    if "grid.x_min" in v:
        if not v["grid.x_max"] > v["grid.x_min"]:
            raise ValidationError("grid.x_max must exceed grid.x_min", "grid.x_max")
        if not v["grid.p_max"] > v["grid.p_min"]:
            raise ValidationError("grid.p_max must exceed grid.p_min", "grid.p_max")
    if scenario == "stern-gerlach":
        norm = abs(v["sg.c_plus"]) ** 2 + abs(v["sg.c_minus"]) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValidationError(f"|sg.c_plus|^2 + |sg.c_minus|^2 must equal 1, got {norm!r}", "sg.c_plus")


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def describe_scenarios() -> str:
    lines = []
    for name in SCENARIOS:
        lines.append(name)
        for key, spec in keys_for(name).items():
            if key == "scenario":
                continue
            default = spec.default
            if isinstance(default, complex):
                default = f"{default.real:.17g}{default.imag:+.17g}j"
            extra = f" [{'|'.join(spec.choices)}]" if spec.choices else ""
            lines.append(f"  {key} = {default}{extra}  # {spec.help}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
