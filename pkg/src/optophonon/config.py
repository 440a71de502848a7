"""Run configuration: an INI file with sections [system] [signal] [run] [output].

Every number is dimensionless, in units of the cavity damping kappa_c, which
is therefore not a key. Omitted keys take the reference parameter set
(g=0.1, delta_c=0, lambda=6, omega_ph=2, kappa=1, nbar=1, omega=1, A_1=10,
m_max=150). Sweep files add a [sweep] section with ``axis`` and ``values``.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass

from .modulation import ModulationSignal
from .moments import MomentState
from .rates import SystemParams

SECTIONS = ("system", "signal", "run", "output")

SYSTEM_KEYS = {
    "g": "g",
    "delta_c": "delta_c",
    "lambda": "lam",
    "omega_ph": "omega_ph",
    "kappa": "kappa",
    "nbar": "nbar",
}
RUN_FLOATS = ("t_end", "output_dt", "tol", "s_ee0")
RUN_INTS = ("fock_cutoff", "rate_grid")
RUN_BOOLS = ("exact_rates",)
OUTPUT_BOOLS = ("emit_rates", "emit_coeffs")
AMPLITUDE_KEY = re.compile(r"^a_([1-9][0-9]*)$")

DEFAULT_AMPLITUDES = (10.0,)
DEFAULT_M_MAX = 150


class ConfigError(ValueError):
    """Invalid configuration, with the offending line and field when known."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        prefix = ", ".join(where) + ": " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


@dataclass(frozen=True)
class RunOptions:
    t_end: float = 100.0
    output_dt: float = 0.05
    tol: float = 1e-9
    fock_cutoff: int | None = None
    exact_rates: bool = False
    rate_grid: int = 4096


@dataclass(frozen=True)
class OutputOptions:
    path: str | None = None
    emit_rates: bool = False
    emit_coeffs: bool = False


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    signal: ModulationSignal
    m_max: int
    ics: MomentState
    run: RunOptions
    output: OutputOptions


@dataclass(frozen=True)
class SweepSpec:
    base: RunConfig
    axis: str
    values: tuple[float, ...]


def _key_lines(text: str) -> dict:
    """(section, key) -> line number, for diagnostics."""
    lines = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            lines[(section, None)] = no
            continue
        key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
        lines[(section, key)] = no
    return lines


def _parse(text: str):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", exc.lineno, f"[{exc.section}]") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any section", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", lineno) from None
    return parser


class _Reader:
    def __init__(self, parser, lines):
        self.parser = parser
        self.lines = lines

    def fail(self, section, key, message):
        raise ConfigError(message, self.lines.get((section, key)), f"[{section}] {key}")

    def number(self, section, key, default, kind=float):
        if not self.parser.has_option(section, key):
            return default
        raw = self.parser.get(section, key).strip()
        try:
            value = kind(raw)
        except ValueError:
            self.fail(section, key, f"expected {'an integer' if kind is int else 'a number'}, got {raw!r}")
        if kind is float and not math.isfinite(value):
            self.fail(section, key, f"must be finite, got {raw!r}")
        return value

    def flag(self, section, key, default):
        if not self.parser.has_option(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            self.fail(section, key, f"expected true/false, got {self.parser.get(section, key)!r}")

    def check_keys(self, section, allowed):
        if not self.parser.has_section(section):
            return
        for key in self.parser.options(section):
            if not allowed(key):
                self.fail(section, key, "unknown key")


def _amplitudes(reader, section="signal"):
    if not reader.parser.has_section(section):
        return DEFAULT_AMPLITUDES
    found = {}
    for key in reader.parser.options(section):
        m = AMPLITUDE_KEY.match(key)
        if m:
            found[int(m.group(1))] = reader.number(section, key, 0.0)
    if not found:
        return DEFAULT_AMPLITUDES
    return tuple(found.get(j, 0.0) for j in range(1, max(found) + 1))


def _build(reader) -> RunConfig:
    p = reader.parser
    for name in p.sections():
        if name not in SECTIONS and name != "sweep":
            raise ConfigError(f"unknown section [{name}]", reader.lines.get((name, None)))
    reader.check_keys("system", lambda k: k in SYSTEM_KEYS)
    reader.check_keys("signal", lambda k: k in ("omega", "m_max") or AMPLITUDE_KEY.match(k))
    reader.check_keys("run", lambda k: k in RUN_FLOATS + RUN_INTS + RUN_BOOLS)
    reader.check_keys("output", lambda k: k in ("path",) + OUTPUT_BOOLS)

    defaults = SystemParams.__dataclass_fields__
    kwargs = {attr: reader.number("system", key, defaults[attr].default)
              for key, attr in SYSTEM_KEYS.items()}
    try:
        params = SystemParams(**kwargs)
    except ValueError as exc:
        attr = str(exc).split()[0]
        key = next((k for k, a in SYSTEM_KEYS.items() if a == attr), attr)
        reader.fail("system", key, str(exc))

    omega = reader.number("signal", "omega", 1.0)
    try:
        signal = ModulationSignal(omega, _amplitudes(reader))
    except ValueError as exc:
        reader.fail("signal", "omega", str(exc))
    m_max = reader.number("signal", "m_max", DEFAULT_M_MAX, int)
    if m_max < 1:
        reader.fail("signal", "m_max", f"must be >= 1, got {m_max}")

    d = RunOptions()
    run = RunOptions(
        t_end=reader.number("run", "t_end", d.t_end),
        output_dt=reader.number("run", "output_dt", d.output_dt),
        tol=reader.number("run", "tol", d.tol),
        fock_cutoff=reader.number("run", "fock_cutoff", d.fock_cutoff, int),
        exact_rates=reader.flag("run", "exact_rates", d.exact_rates),
        rate_grid=reader.number("run", "rate_grid", d.rate_grid, int),
    )
    if run.t_end <= 0:
        reader.fail("run", "t_end", f"must be > 0, got {run.t_end}")
    if run.output_dt <= 0:
        reader.fail("run", "output_dt", f"must be > 0, got {run.output_dt}")
    if not 1e-12 <= run.tol <= 1e-4:
        reader.fail("run", "tol", f"must lie in [1e-12, 1e-4], got {run.tol}")
    if run.fock_cutoff is not None and run.fock_cutoff < 1:
        reader.fail("run", "fock_cutoff", f"must be >= 1, got {run.fock_cutoff}")
    s_ee0 = reader.number("run", "s_ee0", 1.0)
    if not 0.0 <= s_ee0 <= 1.0:
        reader.fail("run", "s_ee0", f"must lie in [0, 1], got {s_ee0}")

    output = OutputOptions(
        path=p.get("output", "path", fallback=None),
        emit_rates=reader.flag("output", "emit_rates", False),
        emit_coeffs=reader.flag("output", "emit_coeffs", False),
    )
    return RunConfig(params, signal, m_max, MomentState.reference(params.nbar, s_ee0), run, output)


def load_config(text: str) -> RunConfig:
    """Parse and validate a configuration; a [sweep] section is rejected."""
    reader = _Reader(_parse(text), _key_lines(text))
    if reader.parser.has_section("sweep"):
        raise ConfigError("[sweep] is only valid in sweep files", reader.lines.get(("sweep", None)))
    return _build(reader)


def default_config() -> RunConfig:
    return load_config("")


SWEEP_AXES = tuple(SYSTEM_KEYS) + ("omega", "m_max")


def _valid_axis(axis: str) -> bool:
    return axis in SWEEP_AXES or AMPLITUDE_KEY.match(axis) is not None


def with_field(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    """Copy of ``cfg`` with one physical field replaced (validated)."""
    axis = axis.lower()
    if axis in SYSTEM_KEYS:
        params = dataclasses.replace(cfg.params, **{SYSTEM_KEYS[axis]: value})
        ics = MomentState.reference(params.nbar, cfg.ics.s_ee)
        return dataclasses.replace(cfg, params=params, ics=ics)
    if axis == "omega":
        return dataclasses.replace(cfg, signal=ModulationSignal(value, cfg.signal.amplitudes))
    if axis == "m_max":
        if value != int(value) or value < 1:
            raise ConfigError(f"m_max must be a positive integer, got {value!r}", field="m_max")
        return dataclasses.replace(cfg, m_max=int(value))
    m = AMPLITUDE_KEY.match(axis)
    if m:
        j = int(m.group(1))
        amps = list(cfg.signal.amplitudes) + [0.0] * max(0, j - len(cfg.signal.amplitudes))
        amps[j - 1] = value
        return dataclasses.replace(cfg, signal=ModulationSignal(cfg.signal.omega, tuple(amps)))
    raise ConfigError(f"unknown sweep axis {axis!r}", field=axis)


def parse_values(raw: str) -> tuple[float, ...]:
    values = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            v = float(item)
        except ValueError:
            raise ConfigError(f"sweep values must be numbers, got {item!r}", field="values") from None
        if not math.isfinite(v):
            raise ConfigError(f"sweep values must be finite, got {item!r}", field="values")
        values.append(v)
    if not values:
        raise ConfigError("sweep needs at least one value", field="values")
    return tuple(values)


def make_sweep(base: RunConfig, axis: str, values) -> SweepSpec:
    axis = axis.strip().lower()
    if not _valid_axis(axis):
        raise ConfigError(f"axis must be one of {', '.join(SWEEP_AXES)} or A_<j>", field="axis")
    values = tuple(float(v) for v in values)
    if not values or not all(math.isfinite(v) for v in values):
        raise ConfigError("sweep values must be finite and non-empty", field="values")
    # points that violate a physical invariant fail in their own row
    return SweepSpec(base, axis, values)


def load_sweep(text: str, axis: str | None = None, values=None) -> SweepSpec:
    """Parse a sweep file; ``axis``/``values`` override its [sweep] section."""
    reader = _Reader(_parse(text), _key_lines(text))
    reader.check_keys("sweep", lambda k: k in ("axis", "values"))
    base = _build(reader)
    p = reader.parser
    if axis is None:
        axis = p.get("sweep", "axis", fallback=None)
    if values is None and p.has_option("sweep", "values"):
        try:
            values = parse_values(p.get("sweep", "values"))
        except ValueError as exc:
            reader.fail("sweep", "values", str(exc))
    if axis is None or values is None:
        raise ConfigError("a sweep needs an axis and a list of values", field="[sweep]")
    return make_sweep(base, axis, values)
