"""Flat ``key = value`` system configuration.

One canonical unit per key: connection rates per minute, holding times in
minutes, frame length in milliseconds, MMPP rates per frame, SNR in dB.
``#`` starts a comment. The AMC table is given as two comma-separated
lists. Short aliases (``L``, ``A``, ``C``, ``C_tr``, ``S``, ``rho``) are
accepted on input.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any

from .channel import DEFAULT_AMC_PACKETS, DEFAULT_AMC_THRESHOLDS_DB, FADING_MODELS, AmcTable, ChannelModel
from .errors import ConfigError, InvalidParams
from .mmpp import MmppParams
from .traffic import MODES, MS_PER_MINUTE, ConnectionParams

METRIC_MODES = ("consistent", "paper_literal")
SOLVERS = ("auto", "direct", "power")


@dataclass(frozen=True)
class Key:
    name: str
    kind: str  # int | float | str | floats | ints
    unit: str
    doc: str
    required: bool = True
    default: Any = None
    choices: tuple = ()


KEYS = (
    Key("queue_size", "int", "packets", "buffer capacity L"),
    Key("max_arrivals", "int", "packets", "per-connection arrivals per frame are capped at A"),
    Key("mode", "str", "-", "cac: admit while connections < C; no_cac: truncate at C_tr", choices=MODES),
    Key("cac_threshold", "int", "connections", "CAC threshold C"),
    Key("truncation_level", "int", "connections", "numerical cap C_tr in no_cac mode"),
    Key("connection_rate", "float", "1/min", "connection arrival rate"),
    Key("mean_holding", "float", "min", "mean connection duration"),
    Key("frame_ms", "float", "ms", "frame duration", required=False, default=1.0),
    Key("q01", "float", "1/frame", "MMPP phase 0 -> 1 rate"),
    Key("q10", "float", "1/frame", "MMPP phase 1 -> 0 rate"),
    Key("lambda0", "float", "packets/frame", "per-connection Poisson rate in phase 0"),
    Key("lambda1", "float", "packets/frame", "per-connection Poisson rate in phase 1"),
    Key("mean_snr_db", "float", "dB", "average SNR on every subchannel"),
    Key("fading", "str", "-", "deterministic | nakagami", choices=FADING_MODELS),
    Key("nakagami_m", "float", "-", "Nakagami shape (1 = Rayleigh)", required=False, default=1.0),
    Key("subchannels", "int", "-", "subchannels allocated to the station"),
    Key("amc_thresholds_db", "floats", "dB", "minimum SNR of each rate ID, increasing"),
    Key("amc_packets", "ints", "packets", "packets per subchannel per frame for each rate ID"),
    Key("metric_mode", "str", "-", "consistent | paper_literal", required=False,
        default="consistent", choices=METRIC_MODES),
    Key("solver", "str", "-", "auto | direct | power", required=False, default="auto", choices=SOLVERS),
    Key("solver_tol", "float", "-", "bound on ||pi P - pi||_1", required=False, default=1e-10),
    Key("max_iterations", "int", "-", "power-iteration cap", required=False, default=1_000_000),
    Key("state_budget", "int", "states", "refuse chains larger than this", required=False, default=200_000),
)
KEY_BY_NAME = {k.name: k for k in KEYS}
ALIASES = {
    "L": "queue_size",
    "A": "max_arrivals",
    "C": "cac_threshold",
    "C_tr": "truncation_level",
    "S": "subchannels",
    "rho": "connection_rate",
}
SCALAR_KINDS = ("int", "float")


@dataclass(frozen=True)
class FieldError:
    key: str
    kind: str  # unknown-key | missing-required-key | invariant-violation | bad-value | duplicate-key
    message: str
    line: int | None = None

    def __str__(self):
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{where}{self.key}: {self.kind}: {self.message}"


@dataclass(frozen=True)
class SystemConfig:
    queue_size: int
    max_arrivals: int
    mode: str
    cac_threshold: int
    truncation_level: int
    connection_rate: float
    mean_holding: float
    q01: float
    q10: float
    lambda0: float
    lambda1: float
    mean_snr_db: float
    fading: str
    subchannels: int
    amc_thresholds_db: tuple
    amc_packets: tuple
    frame_ms: float = 1.0
    nakagami_m: float = 1.0
    metric_mode: str = "consistent"
    solver: str = "auto"
    solver_tol: float = 1e-10
    max_iterations: int = 1_000_000
    state_budget: int = 200_000

    def __post_init__(self):
        object.__setattr__(self, "amc_thresholds_db", tuple(float(x) for x in self.amc_thresholds_db))
        object.__setattr__(self, "amc_packets", tuple(int(x) for x in self.amc_packets))
        errors = invariant_errors(dataclasses.asdict(self))
        if errors:
            raise ConfigError(errors)

    @property
    def mmpp(self) -> MmppParams:
        return MmppParams(self.q01, self.q10, self.lambda0, self.lambda1)

    @property
    def amc_table(self) -> AmcTable:
        return AmcTable(self.amc_thresholds_db, self.amc_packets)

    @property
    def channel_model(self) -> ChannelModel:
        return ChannelModel(self.mean_snr_db, self.fading, self.nakagami_m, self.subchannels)

    def threshold(self, mode=None) -> int:
        mode = mode or self.mode
        return self.cac_threshold if mode == "cac" else self.truncation_level

    def connection_params(self, mode=None) -> ConnectionParams:
        mode = mode or self.mode
        return ConnectionParams(
            rho=self.connection_rate,
            mean_holding=self.mean_holding,
            threshold=self.threshold(mode),
            frame=self.frame_ms / MS_PER_MINUTE,
            mode=mode,
        )

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **{ALIASES.get(k, k): v for k, v in changes.items()})


def _check(errors, key, fn):
    try:
        fn()
    except InvalidParams as exc:
        errors.append(FieldError(key, "invariant-violation", str(exc)))


def invariant_errors(v: dict) -> list[FieldError]:
    """Every invariant violation in a dict of typed values, each naming its key."""
    errors = []

    def bad(key, msg):
        errors.append(FieldError(key, "invariant-violation", msg))

    if v["queue_size"] < 0:
        bad("queue_size", "must be >= 0")
    if v["max_arrivals"] < 1:
        bad("max_arrivals", "must be >= 1")
    for key in ("cac_threshold", "truncation_level"):
        if v[key] < 1:
            bad(key, "must be >= 1")
    if v["subchannels"] < 0:
        bad("subchannels", "must be >= 0")
    for key in ("connection_rate", "q01", "q10", "lambda0", "lambda1"):
        if not (math.isfinite(v[key]) and v[key] >= 0):
            bad(key, "must be a finite number >= 0")
    for key in ("mean_holding", "frame_ms", "solver_tol"):
        if not (math.isfinite(v[key]) and v[key] > 0):
            bad(key, "must be a finite number > 0")
    if v["q01"] + v["q10"] <= 0:
        bad("q10", "q01 + q10 must be > 0")
    if not math.isfinite(v["mean_snr_db"]):
        bad("mean_snr_db", "must be finite")
    if v["fading"] == "nakagami" and not (v["nakagami_m"] >= 0.5 and math.isfinite(v["nakagami_m"])):
        bad("nakagami_m", "must be >= 0.5")
    for key in ("max_iterations", "state_budget"):
        if v[key] < 1:
            bad(key, "must be >= 1")
    for key in ("mode", "fading", "metric_mode", "solver"):
        choices = KEY_BY_NAME[key].choices
        if v[key] not in choices:
            bad(key, f"must be one of {', '.join(choices)}")
    _check(errors, "amc_thresholds_db", lambda: AmcTable(v["amc_thresholds_db"], v["amc_packets"]))
    return errors


def _convert(kind, raw):
    if kind == "int":
        f = float(raw)
        if not f.is_integer():
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(f)
    if kind == "float":
        return float(raw)
    if kind == "str":
        return raw
    items = [s.strip() for s in raw.split(",") if s.strip()]
    return tuple(_convert(kind[:-1], s) for s in items)


def parse_config(text: str) -> SystemConfig:
    """Parse and validate config text; raises :class:`ConfigError` listing every problem."""
    errors: list[FieldError] = []
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    written: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(FieldError(line, "bad-value", "expected 'key = value'", lineno))
            continue
        name, _, value = (s.strip() for s in line.partition("="))
        key = ALIASES.get(name, name)
        if key not in KEY_BY_NAME:
            errors.append(FieldError(name, "unknown-key", "not a configuration key", lineno))
            continue
        if key in values:
            errors.append(FieldError(name, "duplicate-key", f"already set on line {lines[key]}", lineno))
            continue
        try:
            values[key] = _convert(KEY_BY_NAME[key].kind, value)
        except ValueError as exc:
            errors.append(FieldError(name, "bad-value", str(exc), lineno))
            values[key] = None
        lines[key] = lineno
        written[key] = name

    for spec in KEYS:
        if spec.name not in values:
            if spec.required:
                errors.append(FieldError(spec.name, "missing-required-key", f"{spec.doc} [{spec.unit}]"))
            else:
                values[spec.name] = spec.default
    if errors:
        raise ConfigError(errors)

    inv = invariant_errors(values)
    if inv:
        raise ConfigError(
            FieldError(written.get(e.key, e.key), e.kind, e.message, lines.get(e.key)) for e in inv
        )
    return SystemConfig(**values)


def load_config(path) -> SystemConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def _format_value(v):
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(cfg: SystemConfig, annotate: bool = True) -> str:
    """Serialize ``cfg``; ``parse_config(format_config(cfg)) == cfg``."""
    out = []
    if annotate:
        out += [
            "# ofdma-cac system configuration",
            "# key = value; '#' starts a comment; one fixed unit per key",
            "",
        ]
    width = max(len(k.name) for k in KEYS)
    for spec in KEYS:
        line = f"{spec.name:<{width}} = {_format_value(getattr(cfg, spec.name))}"
        if annotate:
            line = f"{line:<48} # [{spec.unit}] {spec.doc}"
        out.append(line)
    return "\n".join(out) + "\n"


def reference_config(**overrides) -> SystemConfig:
    """The reference scenario: 5 subchannels at 5 dB, L=150, A=30, 0.4 conn/min, 10 min holding.

    MMPP switching rates and the AMC table are not given by the source
    scenario; the values here are documented defaults.
    """
    cfg = SystemConfig(
        queue_size=150,
        max_arrivals=30,
        mode="cac",
        cac_threshold=10,
        truncation_level=25,
        connection_rate=0.4,
        mean_holding=10.0,
        q01=0.2,
        q10=0.2,
        lambda0=1.0,
        lambda1=2.0,
        mean_snr_db=5.0,
        fading="nakagami",
        subchannels=5,
        amc_thresholds_db=DEFAULT_AMC_THRESHOLDS_DB,
        amc_packets=DEFAULT_AMC_PACKETS,
    )
    return cfg.replace(**overrides) if overrides else cfg


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    key: str
    start: float
    step: float
    end: float

    def __post_init__(self):
        key = ALIASES.get(self.key, self.key)
        object.__setattr__(self, "key", key)
        spec = KEY_BY_NAME.get(key)
        if spec is None:
            raise ConfigError([FieldError(self.key, "unknown-key", "cannot sweep an unknown key")])
        if spec.kind not in SCALAR_KINDS:
            raise ConfigError([FieldError(key, "bad-value", "only numeric scalar keys can be swept")])
        if not all(math.isfinite(x) for x in (self.start, self.step, self.end)):
            raise ConfigError([FieldError(key, "bad-value", "sweep bounds must be finite")])
        if self.step == 0:
            raise ConfigError([FieldError(key, "bad-value", "sweep step must be nonzero")])
        if (self.end - self.start) / self.step < -1e-9:
            raise ConfigError([FieldError(key, "bad-value", "sweep step points away from the end value")])

    def points(self) -> list:
        count = int(math.floor((self.end - self.start) / self.step + 1e-9)) + 1
        pts = [round(self.start + n * self.step, 12) for n in range(count)]
        if KEY_BY_NAME[self.key].kind == "int":
            if any(not float(p).is_integer() for p in pts):
                raise ConfigError([FieldError(self.key, "bad-value", "integer key swept with fractional values")])
            pts = [int(p) for p in pts]
        return pts


def parse_sweep(text: str) -> SweepSpec:
    """Parse ``key=start:step:end``."""
    key, sep, rng = text.partition("=")
    parts = rng.split(":")
    if not sep or len(parts) != 3:
        raise ConfigError([FieldError(text, "bad-value", "sweep must look like key=start:step:end")])
    try:
        start, step, end = (float(p) for p in parts)
    except ValueError:
        raise ConfigError([FieldError(key.strip(), "bad-value", f"non-numeric sweep range {rng!r}")]) from None
    return SweepSpec(key.strip(), start, step, end)
