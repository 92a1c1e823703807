# scenario.py
"""
Scenario configuration, geometry and seed plumbing.

Every other module consumes a SystemConfig. Config files are flat key-value
text with units in the key names, e.g.

    # default setup
    n_ap = 64
    noise_dbm = -110
    ris_pos_m = 0, 40, 20

All randomness of a trial flows from a TrialSeed, which is derived from
(seed, trial_index) through numpy's SeedSequence mixing.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, Tuple

import numpy as np

from logger import logger

# AQNM modes understood by the quantizer
PAPER_FAITHFUL = "paper-faithful"
STANDARD_AQNM = "standard-aqnm"
AQNM_MODES = (PAPER_FAITHFUL, STANDARD_AQNM)

RIS_GEOMETRIES = ("ula", "upa")

# Named sub-streams of one trial; the numbers are part of the seed contract
STREAMS = {"positions": 0, "channels": 1, "direct": 2, "phases": 3}

Vec3 = Tuple[float, float, float]


class ConfigError(ValueError):
    """Bad scenario file or invariant violation."""

    def __init__(self, message: str, field: str = "", line: int = 0):
        super().__init__(message)
        self.field = field
        self.line = line


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    n_ap: int = 64
    n_ris: int = 16
    n_beams: int = 12
    n_rf: int = 8
    n_users: int = 10
    b_min: int = 1
    b_max: int = 5
    noise_dbm: float = -110.0
    tx_power_dbm: float = 90.0
    ap_pos: Vec3 = (0.0, 0.0, 0.0)
    ris_pos: Vec3 = (0.0, 40.0, 20.0)
    user_lo: Vec3 = (2.0, 30.0, 0.0)
    user_hi: Vec3 = (2.0, 90.0, 0.0)
    n_paths_g: int = 3
    n_paths_h: int = 3
    shadow_db: float = 1.0
    direct_loss_db: float = 100.0            # blockage on the user -> AP link (NO-RIS baseline only)
    array_gain: bool = True
    ris_geometry: str = "ula"
    ris_rows: int = 1
    aqnm_mode: str = PAPER_FAITHFUL
    seed: int = 2024

    def __post_init__(self):
        for name in ("n_ap", "n_ris", "n_beams", "n_rf", "n_users", "n_paths_g", "n_paths_h", "ris_rows"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer", field=name)
        if self.n_rf > self.n_beams:
            raise ConfigError("n_rf exceeds n_beams", field="n_rf")
        if self.n_beams > self.n_ap:
            raise ConfigError("n_beams exceeds n_ap", field="n_beams")
        if self.b_min < 1:
            raise ConfigError("b_min must be at least 1", field="b_min")
        if self.b_min > self.b_max:
            raise ConfigError("b_min exceeds b_max", field="b_min")
        if not math.isfinite(self.noise_dbm):
            raise ConfigError("noise_dbm must be finite", field="noise_dbm")
        if not math.isfinite(self.tx_power_dbm):
            raise ConfigError("tx_power_dbm must be finite", field="tx_power_dbm")
        if self.shadow_db < 0:
            raise ConfigError("shadow_db must be nonnegative", field="shadow_db")
        if not 0 <= self.direct_loss_db < math.inf:
            raise ConfigError("direct_loss_db must be finite and nonnegative", field="direct_loss_db")
        if any(lo > hi for lo, hi in zip(self.user_lo, self.user_hi)):
            raise ConfigError("user region is empty (user_lo > user_hi)", field="user_lo")
        if self.ris_geometry not in RIS_GEOMETRIES:
            raise ConfigError(f"unknown ris_geometry {self.ris_geometry!r}", field="ris_geometry")
        if self.ris_geometry == "upa" and self.n_ris % self.ris_rows:
            raise ConfigError("n_ris must be a multiple of ris_rows", field="ris_rows")
        if self.aqnm_mode not in AQNM_MODES:
            raise ConfigError(f"unknown aqnm_mode {self.aqnm_mode!r}", field="aqnm_mode")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 unsigned bits", field="seed")

    @property
    def noise_power(self) -> float:
        """sigma^2 in watts."""
        return dbm_to_watts(self.noise_dbm)

    @property
    def tx_power(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)

    @property
    def effective_noise(self) -> float:
        # rates depend on transmit power and noise only through this ratio
        return self.noise_power / self.tx_power

    @property
    def bit_range(self) -> range:
        return range(self.b_min, self.b_max + 1)


@dataclass(frozen=True)
class TrialSeed:
    trial_index: int
    derived_stream: int


# ---------------- key-value format ----------------
def _parse_int(text: str) -> int:
    return int(text)


def _parse_float(text: str) -> float:
    return float(text)


def _parse_vec3(text: str) -> Vec3:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected 3 comma-separated numbers, got {text!r}")
    return (float(parts[0]), float(parts[1]), float(parts[2]))


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _fmt_vec3(v: Vec3) -> str:
    return ", ".join(repr(float(x)) for x in v)


# file key -> (field name, parser, formatter)
KEYS: Dict[str, Tuple[str, Callable, Callable]] = {
    "n_ap": ("n_ap", _parse_int, str),
    "n_ris": ("n_ris", _parse_int, str),
    "n_beams": ("n_beams", _parse_int, str),
    "n_rf": ("n_rf", _parse_int, str),
    "n_users": ("n_users", _parse_int, str),
    "b_min": ("b_min", _parse_int, str),
    "b_max": ("b_max", _parse_int, str),
    "noise_dbm": ("noise_dbm", _parse_float, repr),
    "tx_power_dbm": ("tx_power_dbm", _parse_float, repr),
    "ap_pos_m": ("ap_pos", _parse_vec3, _fmt_vec3),
    "ris_pos_m": ("ris_pos", _parse_vec3, _fmt_vec3),
    "user_lo_m": ("user_lo", _parse_vec3, _fmt_vec3),
    "user_hi_m": ("user_hi", _parse_vec3, _fmt_vec3),
    "n_paths_g": ("n_paths_g", _parse_int, str),
    "n_paths_h": ("n_paths_h", _parse_int, str),
    "shadow_db": ("shadow_db", _parse_float, repr),
    "direct_loss_db": ("direct_loss_db", _parse_float, repr),
    "array_gain": ("array_gain", _parse_bool, lambda b: "true" if b else "false"),
    "ris_geometry": ("ris_geometry", str, str),
    "ris_rows": ("ris_rows", _parse_int, str),
    "aqnm_mode": ("aqnm_mode", str, str),
    "seed": ("seed", _parse_int, str),
}
_FIELD_TO_KEY = {name: key for key, (name, _, _) in KEYS.items()}


def _lookup(key: str) -> Tuple[str, Callable]:
    key = key.strip()
    if key in KEYS:
        name, parse, _ = KEYS[key]
        return name, parse
    if key in _FIELD_TO_KEY:
        name, parse, _ = KEYS[_FIELD_TO_KEY[key]]
        return name, parse
    raise KeyError(key)


def _build(values: Dict[str, object]) -> SystemConfig:
    try:
        return SystemConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def load_config(path) -> SystemConfig:
    """Parse a key-value scenario file into a validated SystemConfig."""
    path = Path(path)
    values: Dict[str, object] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'", line=lineno)
            key, text = (part.strip() for part in line.split("=", 1))
            try:
                name, parse = _lookup(key)
            except KeyError:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}", field=key, line=lineno) from None
            try:
                values[name] = parse(text)
            except ValueError as e:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {e}", field=name, line=lineno) from None
    cfg = _build(values)
    logger.debug("load_config(%s) -> %s", path, cfg)
    return cfg


def config_text(cfg: SystemConfig) -> str:
    lines = [f"{key} = {fmt(getattr(cfg, name))}" for key, (name, _, fmt) in KEYS.items()]
    return "\n".join(lines) + "\n"


def write_config(cfg: SystemConfig, path) -> None:
    Path(path).write_text(config_text(cfg), encoding="utf-8")


def apply_overrides(cfg: SystemConfig, items: Iterable[str]) -> SystemConfig:
    """Apply `--set key=value` overrides; keys may be file keys or field names."""
    changes: Dict[str, object] = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, text = (part.strip() for part in item.split("=", 1))
        try:
            name, parse = _lookup(key)
        except KeyError:
            raise ConfigError(f"unknown override key {key!r}", field=key) from None
        try:
            changes[name] = parse(text)
        except ValueError as e:
            raise ConfigError(f"bad value for {key}: {e}", field=name) from None
    if not changes:
        return cfg
    return dataclasses.replace(cfg, **changes)


# ---------------- seeds ----------------
def trial_seed(seed: int, trial_index: int) -> TrialSeed:
    """derived_stream = first 64-bit word of SeedSequence([seed, trial_index])."""
    state = np.random.SeedSequence([int(seed), int(trial_index)]).generate_state(1, dtype=np.uint64)
    return TrialSeed(trial_index=int(trial_index), derived_stream=int(state[0]))


def rng_for(seed: TrialSeed, stream: str) -> np.random.Generator:
    return np.random.default_rng([seed.derived_stream, STREAMS[stream]])


def user_positions(cfg: SystemConfig, seed: TrialSeed) -> np.ndarray:
    """K positions, i.i.d. uniform over the user box; shape (n_users, 3)."""
    lo = np.asarray(cfg.user_lo, dtype=float)
    hi = np.asarray(cfg.user_hi, dtype=float)
    u = rng_for(seed, "positions").random((cfg.n_users, 3))
    return lo + (hi - lo) * u
