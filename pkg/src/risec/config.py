"""Scenario configuration: defaults, TOML loading with validation, canonical output."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import tomli


class ConfigError(ValueError):
    """Schema or value problem in a configuration file; message names the key path."""


@dataclass
class GeometryConfig:
    alice: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    ris: list = field(default_factory=lambda: [-2.5, 2.5 * math.sqrt(3.0), 5.0])
    bob: list = field(default_factory=lambda: [0.0, 30.0, 10.0 * math.sqrt(3.0)])
    eve: list = field(default_factory=lambda: [45.0, 15.0 * math.sqrt(3.0), 30.0])


@dataclass
class PathLossConfig:
    AI: float = 2.0
    IB: float = 2.0
    IE: float = 2.0
    AE: float = 2.2
    AB: float = 3.2


@dataclass
class ScenarioSection:
    N: int = 4
    M: int = 9
    P_dbm: float = 30.0
    # Bob, Eve, Alice (radar receiver)
    noise_dbm: list = field(default_factory=lambda: [-60.0, -60.0, -110.0])
    gamma_db: float = 15.0
    theta_bar_deg: float = 30.0
    phi_deg: float = 3.0
    beta0_sq_db: float = -15.0
    d0: float = 1.0
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    path_loss_exponents: PathLossConfig = field(default_factory=PathLossConfig)


@dataclass
class Tolerances:
    eps_b: float = 1e-3        # RCCE alternating loop (relative C_s change)
    eps1: float = 0.3          # smoothing width of the radar penalty
    zeta: float = 0.2          # radar penalty weight
    eps2: float = 1e-4         # Riemannian gradient-norm tolerance
    eps3: float = 1e-3         # RCG alternating loop (relative cost change)
    eps_robust: float = 1e-2   # robust alternating loop (relative C_s change)


@dataclass
class RobustSection:
    P_dbm: float = 15.0
    noise_dbm: float = 0.0      # Bob and Eve
    gamma_p_db: float = 0.0     # illumination threshold relative to Eve's noise
    unit_path_loss: bool = True
    eps_bar_G: float = 0.05     # used where the sweep does not set it
    phi_power_deg: float = 2.0  # angle error in the power sweep


@dataclass
class Sweeps:
    power_dbm: list = field(default_factory=lambda: [20.0, 25.0, 30.0, 35.0, 40.0])
    gamma_db: list = field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0, 25.0])
    gamma_N: list = field(default_factory=lambda: [2, 4, 6])
    gamma_alpha_AE: float = 2.4
    ris_elements: list = field(default_factory=lambda: [4, 9, 16])
    robust_eps_bar: list = field(default_factory=lambda: [0.01, 0.05, 0.1])
    robust_power_dbm: list = field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0, 25.0])
    robust_M: list = field(default_factory=lambda: [4, 9, 16])
    quant_bits: list = field(default_factory=lambda: [1, 2, 4])


@dataclass
class ScenarioConfig:
    trials: int = 100
    seed: int = 0
    n_samples: int = 100        # Gaussian randomization draws
    max_outer: int = 20
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    tolerances: Tolerances = field(default_factory=Tolerances)
    robust: RobustSection = field(default_factory=RobustSection)
    sweeps: Sweeps = field(default_factory=Sweeps)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        cfg = replace(self, **kw)
        validate(cfg)
        return cfg


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def _is_section(tp) -> bool:
    return isinstance(tp, type) and hasattr(tp, "__dataclass_fields__")


def _coerce(value, default, path):
    """Check ``value`` against the type of ``default`` (ints may stand in for floats)."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        proto = default[0] if default else 0.0
        return [_coerce(v, proto, f"{path}[{i}]") for i, v in enumerate(value)]
    raise ConfigError(f"{path}: unsupported value")


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected a table")
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"{where}: unknown key")
    default = cls()
    kwargs = {}
    for name in known:
        where = f"{path}.{name}" if path else name
        dv = getattr(default, name)
        if name not in data:
            continue
        if _is_section(type(dv)):
            kwargs[name] = _build(type(dv), data[name], where)
        else:
            kwargs[name] = _coerce(data[name], dv, where)
    return replace(default, **kwargs)


def _require(cond, path, msg):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def validate(cfg: ScenarioConfig) -> None:
    s = cfg.scenario
    _require(cfg.trials >= 1, "trials", "must be >= 1")
    _require(cfg.seed >= 0, "seed", "must be >= 0")
    _require(cfg.n_samples >= 0, "n_samples", "must be >= 0")
    _require(cfg.max_outer >= 1, "max_outer", "must be >= 1")
    _require(s.N >= 1, "scenario.N", "must be >= 1")
    _require(s.M >= 0, "scenario.M", "must be >= 0")
    _require(len(s.noise_dbm) == 3, "scenario.noise_dbm", "needs three entries (Bob, Eve, Alice)")
    _require(s.d0 > 0, "scenario.d0", "must be positive")
    _require(0 <= s.phi_deg < 90, "scenario.phi_deg", "must lie in [0, 90)")
    for f in fields(GeometryConfig):
        p = getattr(s.geometry, f.name)
        _require(len(p) == 3, f"scenario.geometry.{f.name}", "needs three coordinates")
    pts = [tuple(getattr(s.geometry, f.name)) for f in fields(GeometryConfig)]
    _require(len(set(pts)) == len(pts), "scenario.geometry", "node positions must be distinct")
    for f in fields(PathLossConfig):
        _require(getattr(s.path_loss_exponents, f.name) > 0,
                 f"scenario.path_loss_exponents.{f.name}", "must be positive")
    t = cfg.tolerances
    for f in fields(Tolerances):
        _require(getattr(t, f.name) > 0, f"tolerances.{f.name}", "must be positive")
    r = cfg.robust
    _require(r.eps_bar_G >= 0, "robust.eps_bar_G", "must be >= 0")
    _require(0 <= r.phi_power_deg < 90, "robust.phi_power_deg", "must lie in [0, 90)")
    sw = cfg.sweeps
    for f in fields(Sweeps):
        v = getattr(sw, f.name)
        if isinstance(v, list):
            _require(len(v) > 0, f"sweeps.{f.name}", "must not be empty")
    for name in ("gamma_N",):
        _require(all(n >= 1 for n in getattr(sw, name)), f"sweeps.{name}", "entries must be >= 1")
    for name in ("ris_elements", "robust_M"):
        _require(all(n >= 1 for n in getattr(sw, name)), f"sweeps.{name}", "entries must be >= 1")
    _require(all(b >= 1 for b in sw.quant_bits), "sweeps.quant_bits", "entries must be >= 1")
    _require(all(e >= 0 for e in sw.robust_eps_bar), "sweeps.robust_eps_bar", "entries must be >= 0")
    _require(sw.gamma_alpha_AE > 0, "sweeps.gamma_alpha_AE", "must be positive")


def parse_config(text: str) -> ScenarioConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"<syntax>: {exc}") from exc
    cfg = _build(ScenarioConfig, data, "")
    validate(cfg)
    return cfg


def load_config(path=None) -> ScenarioConfig:
    """Read a TOML file; missing keys take the defaults. ``None`` gives the defaults."""
    if path is None:
        return ScenarioConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path}: {exc}") from exc
    return parse_config(text)


# ---------------------------------------------------------------------------
# canonical output
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(type(v))


def _emit(obj, prefix, out):
    scalars, tables = [], []
    for f in fields(obj):
        v = getattr(obj, f.name)
        (tables if _is_section(type(v)) else scalars).append((f.name, v))
    if prefix:
        out.append(f"[{prefix}]")
    for k, v in scalars:
        out.append(f"{k} = {_fmt(v)}")
    out.append("")
    for k, v in tables:
        _emit(v, f"{prefix}.{k}" if prefix else k, out)


def dump_config(cfg: ScenarioConfig) -> str:
    """Canonical TOML text: every key, fixed order, floats in repr form."""
    out = []
    _emit(cfg, "", out)
    return "\n".join(out).rstrip("\n") + "\n"


def as_dict(cfg: ScenarioConfig) -> dict:
    return asdict(cfg)
