"""Experiment configuration: TOML in, canonical TOML out.

The emitter is a fixed-order, fixed-format serializer so that
emit -> parse -> emit is byte-identical; that property is what makes config
hashes and report reproducibility meaningful.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError
from .torus import (
    DistanceToPoint,
    GeneratorMeasure,
    LatticeMatrix,
    MetricKind,
    TorusPoint,
    TrigPolynomial,
)

COMMAND_BLOCKS = ("simulate", "lln", "clt", "lil", "variance", "dioph",
                  "fourier", "drift", "poisson", "degenerate")

START_PRESETS = {
    "sqrt2_sqrt3": lambda d: tuple([math.sqrt(2) - 1, math.sqrt(3) - 1]
                                   + [0.0] * (d - 2)),
    "zero": lambda d: tuple(Fraction(0) for _ in range(d)),
    "half": lambda d: tuple(Fraction(1, 2) for _ in range(d)),
}


@dataclass(frozen=True)
class StartSpec:
    preset: str | None = None
    coords: tuple[float, ...] | None = None
    rational: tuple[Fraction, ...] | None = None

    def resolve(self, dimension: int):
        """Float tuple, Fraction tuple, or exact TorusPoint for the walk."""
        if self.preset is not None:
            if self.preset not in START_PRESETS:
                raise ValidationError(
                    "start.preset",
                    f"unknown preset {self.preset!r}; "
                    f"known: {sorted(START_PRESETS)}")
            values = START_PRESETS[self.preset](dimension)
        elif self.coords is not None:
            values = self.coords
        else:
            values = self.rational
        if len(values) != dimension:
            raise ValidationError("start", f"needs {dimension} coordinates")
        if all(isinstance(v, Fraction) for v in values):
            return TorusPoint.from_fractions(values)
        return tuple(float(v) for v in values)


@dataclass(frozen=True)
class FunctionSpec:
    kind: str = "cosine"
    frequency: tuple[int, ...] = (1, 0)
    gamma: float = 1.0
    value: float = 0.0

    def build(self, dimension: int):
        if self.kind in ("cosine", "sine"):
            freq = self.frequency
            if len(freq) != dimension:
                raise ValidationError("function.frequency",
                                      f"needs {dimension} entries")
            maker = (TrigPolynomial.cosine if self.kind == "cosine"
                     else TrigPolynomial.sine)
            return maker(freq, gamma=self.gamma)
        if self.kind == "constant":
            return TrigPolynomial.constant(self.value, dimension,
                                           gamma=self.gamma)
        if self.kind == "distance":
            return DistanceToPoint(center=TorusPoint.zero(dimension),
                                   metric=MetricKind.EUCLIDEAN,
                                   gamma=self.gamma)
        raise ValidationError("function.kind",
                              f"unknown kind {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int
    seed: int
    out_dir: str
    atoms: tuple[tuple[tuple[tuple[int, ...], ...], Fraction], ...]
    start: StartSpec
    function: FunctionSpec
    budgets: dict[str, int] = field(default_factory=dict)
    blocks: dict[str, dict] = field(default_factory=dict)

    def measure(self) -> GeneratorMeasure:
        return GeneratorMeasure.from_pairs(
            (LatticeMatrix(entries), w) for entries, w in self.atoms)

    def start_point(self):
        return self.start.resolve(self.dimension)

    def test_function(self):
        return self.function.build(self.dimension)

    def block(self, name: str) -> dict:
        return dict(self.blocks.get(name, {}))

    def budget(self, key: str, default: int) -> int:
        return int(self.budgets.get(key, default))


def _require(table: dict, key: str, kinds, context: str):
    if key not in table:
        raise ValidationError(f"{context}.{key}", "missing required key")
    value = table[key]
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise ValidationError(f"{context}.{key}",
                              f"wrong type {type(value).__name__}")
    return value


def _parse_weight(raw, index: int) -> Fraction:
    context = f"atoms[{index}].weight"
    if isinstance(raw, bool):
        raise ValidationError(context, "weight must be rational")
    if isinstance(raw, int):
        return Fraction(raw)
    if isinstance(raw, str):
        try:
            return Fraction(raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(context, f"not a rational: {raw!r}") from exc
    raise ValidationError(context,
                          "use an integer or a 'p/q' string, not a float")


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError("toml", str(exc)) from exc

    known = {"experiment", "atoms", "start", "function", "budgets",
             *COMMAND_BLOCKS}
    for key in data:
        if key not in known:
            raise ValidationError(key, "unknown section")

    exp = data.get("experiment", {})
    dimension = _require(exp, "dimension", int, "experiment")
    seed = _require(exp, "seed", int, "experiment")
    out_dir = str(exp.get("out_dir", "reports"))
    for key in exp:
        if key not in ("dimension", "seed", "out_dir"):
            raise ValidationError(f"experiment.{key}", "unknown key")

    raw_atoms = data.get("atoms", [])
    if not isinstance(raw_atoms, list) or not raw_atoms:
        raise ValidationError("atoms", "need at least one [[atoms]] entry")
    atoms = []
    for i, entry in enumerate(raw_atoms):
        matrix = _require(entry, "matrix", list, f"atoms[{i}]")
        try:
            rows = tuple(tuple(int(v) for v in row) for row in matrix)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"atoms[{i}].matrix",
                                  "entries must be integers") from exc
        weight = _parse_weight(_require(entry, "weight", (int, str),
                                        f"atoms[{i}]"), i)
        for key in entry:
            if key not in ("matrix", "weight"):
                raise ValidationError(f"atoms[{i}].{key}", "unknown key")
        atoms.append((rows, weight))
    total = sum(w for _, w in atoms)
    if total != 1:
        raise ValidationError("atoms.weights", f"weights sum to {total}, not 1")

    start_tbl = data.get("start", {})
    given = [k for k in ("preset", "coords", "rational") if k in start_tbl]
    if len(given) != 1:
        raise ValidationError(
            "start", "give exactly one of preset / coords / rational")
    for key in start_tbl:
        if key not in ("preset", "coords", "rational"):
            raise ValidationError(f"start.{key}", "unknown key")
    if given[0] == "preset":
        start = StartSpec(preset=str(start_tbl["preset"]))
    elif given[0] == "coords":
        coords = start_tbl["coords"]
        if not isinstance(coords, list):
            raise ValidationError("start.coords", "must be an array")
        start = StartSpec(coords=tuple(float(v) for v in coords))
    else:
        rats = start_tbl["rational"]
        if not isinstance(rats, list):
            raise ValidationError("start.rational", "must be an array")
        try:
            start = StartSpec(rational=tuple(Fraction(str(v)) for v in rats))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError("start.rational",
                                  "entries must be rationals") from exc

    fn_tbl = data.get("function", {})
    for key in fn_tbl:
        if key not in ("kind", "frequency", "gamma", "value"):
            raise ValidationError(f"function.{key}", "unknown key")
    gamma = float(fn_tbl.get("gamma", 1.0))
    if not 0.0 < gamma <= 1.0:
        raise ValidationError("function.gamma", f"{gamma} outside (0, 1]")
    function = FunctionSpec(
        kind=str(fn_tbl.get("kind", "cosine")),
        frequency=tuple(int(v) for v in fn_tbl.get("frequency", (1, 0))),
        gamma=gamma,
        value=float(fn_tbl.get("value", 0.0)),
    )

    budgets = {}
    for key, value in data.get("budgets", {}).items():
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ValidationError(f"budgets.{key}", "must be a positive integer")
        budgets[str(key)] = value

    blocks = {}
    for name in COMMAND_BLOCKS:
        if name in data:
            tbl = data[name]
            if not isinstance(tbl, dict):
                raise ValidationError(name, "must be a table")
            blocks[name] = dict(tbl)

    cfg = ExperimentConfig(dimension=dimension, seed=seed, out_dir=out_dir,
                           atoms=tuple(atoms), start=start, function=function,
                           budgets=budgets, blocks=blocks)
    cfg.measure()       # validates determinant / weights / dimensions
    cfg.start_point()   # validates coordinates against the dimension
    cfg.test_function()
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return parse_config(fh.read().decode("utf-8"))


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Fraction):
        return f'"{value.numerator}/{value.denominator}"'
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ValidationError("emit", f"cannot serialize {type(value).__name__}")


def emit_config(cfg: ExperimentConfig) -> str:
    """Canonical TOML: fixed section order, fixed key order, LF endings."""
    lines = [
        "[experiment]",
        f"dimension = {cfg.dimension}",
        f"seed = {cfg.seed}",
        f"out_dir = {_toml_value(cfg.out_dir)}",
    ]
    for entries, weight in cfg.atoms:
        lines += [
            "",
            "[[atoms]]",
            f"matrix = {_toml_value([list(r) for r in entries])}",
            f"weight = {_toml_value(weight)}",
        ]
    lines.append("")
    lines.append("[start]")
    if cfg.start.preset is not None:
        lines.append(f"preset = {_toml_value(cfg.start.preset)}")
    elif cfg.start.coords is not None:
        lines.append(f"coords = {_toml_value(list(cfg.start.coords))}")
    else:
        lines.append(
            "rational = "
            + _toml_value([f"{f.numerator}/{f.denominator}"
                           for f in cfg.start.rational]))
    lines += [
        "",
        "[function]",
        f"kind = {_toml_value(cfg.function.kind)}",
        f"frequency = {_toml_value(list(cfg.function.frequency))}",
        f"gamma = {_toml_value(cfg.function.gamma)}",
        f"value = {_toml_value(cfg.function.value)}",
    ]
    if cfg.budgets:
        lines += ["", "[budgets]"]
        for key in sorted(cfg.budgets):
            lines.append(f"{key} = {cfg.budgets[key]}")
    for name in COMMAND_BLOCKS:
        if name in cfg.blocks:
            lines += ["", f"[{name}]"]
            for key in sorted(cfg.blocks[name]):
                lines.append(f"{key} = {_toml_value(cfg.blocks[name][key])}")
    return "\n".join(lines) + "\n"
