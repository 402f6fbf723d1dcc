"""Scenario configuration: defaults, key-value files and validation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..config import ConfigError, parse_float_list, parse_key_values
from ..estimate import ACCOUNTING_MODES

SCENARIOS = ("fig2f", "fig4ab", "fig4cd", "scaling", "tomo-demo", "supp-note2")
NOISE_PRESETS = ("ideal", "paper")
MIN_NU = 1000

# (desk scale, full scale) repetition lists
_NU_DEFAULTS = {
    "fig2f": ((10_000, 40_000, 200_000), (100_000, 400_000, 2_000_000)),
    "fig4ab": ((10_000, 30_000, 100_000, 300_000), (100_000, 300_000, 1_000_000, 2_000_000)),
    "supp-note2": ((10_000, 30_000, 100_000, 300_000), (100_000, 300_000, 1_000_000, 2_000_000)),
    "fig4cd": ((10_000, 30_000, 100_000, 300_000), (100_000, 300_000, 1_000_000, 2_000_000)),
    "scaling": ((100_000,), (1_000_000,)),
    "tomo-demo": ((100_000,), (1_000_000,)),
}
_SWEEP_NU = (100_000, 1_000_000)
_SEED_DEFAULTS = {"fig2f": 200, "fig4ab": 200, "supp-note2": 200, "fig4cd": 200, "scaling": 500,
                  "tomo-demo": 1}


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a scenario run depends on.

    Keys of a config file are the field names. List values are comma separated.
    ``nu`` and ``seeds`` left empty/zero take the scenario defaults, which are
    shrunk for desk use unless ``paper_scale`` is set.
    """

    scenario: str
    phi_deg: float = 30.0
    nu: tuple[int, ...] = ()
    seeds: int = 0
    seed: int = 0
    noise: str = "ideal"
    out: str = "out"
    accounting: str = "per_point"
    weighting: str = "sd"
    paper_scale: bool = False
    shot_noise: bool = True
    sweep_phis_deg: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    sweep_nu: int = 0
    floor_deg: float = 0.5
    n_values: tuple[int, ...] = (1, 2, 3, 4)
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "nu", tuple(int(v) for v in self.nu))
        object.__setattr__(self, "sweep_phis_deg", tuple(float(v) for v in self.sweep_phis_deg))
        object.__setattr__(self, "n_values", tuple(int(v) for v in self.n_values))
        self.validate()

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.noise not in NOISE_PRESETS:
            raise ConfigError(f"noise must be one of {NOISE_PRESETS}, got {self.noise!r}")
        if self.accounting not in ACCOUNTING_MODES:
            raise ConfigError(f"accounting must be one of {ACCOUNTING_MODES}")
        for v in self.nu:
            if v < MIN_NU:
                raise ConfigError(f"nu values must be >= {MIN_NU}, got {v}")
        if self.sweep_nu and self.sweep_nu < MIN_NU:
            raise ConfigError(f"sweep_nu must be >= {MIN_NU}")
        for phi in (self.phi_deg, *self.sweep_phis_deg):
            if not (-180.0 < phi <= 180.0) or math.isnan(phi):
                raise ConfigError(f"phase {phi} deg outside (-180, 180]")
        if self.seeds < 0 or self.seed < 0:
            raise ConfigError("seed and seeds must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.floor_deg < 0:
            raise ConfigError("floor_deg must be >= 0")

    @property
    def nu_values(self) -> tuple[int, ...]:
        if self.nu:
            return self.nu
        return _NU_DEFAULTS[self.scenario][1 if self.paper_scale else 0]

    @property
    def sweep_nu_value(self) -> int:
        """Fixed repetition number of the phase sweep."""
        return self.sweep_nu or _SWEEP_NU[1 if self.paper_scale else 0]

    @property
    def n_seeds(self) -> int:
        return self.seeds or _SEED_DEFAULTS[self.scenario]

    @property
    def phi(self) -> float:
        return math.radians(self.phi_deg)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def snapshot(self) -> dict:
        """Resolved settings (defaults filled in), as stored in the run manifest."""
        d = asdict(self)
        d["nu"] = list(self.nu_values)
        d["seeds"] = self.n_seeds
        d["sweep_nu"] = self.sweep_nu_value
        d.pop("workers")  # does not affect results
        d.pop("out")
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_text(cls, text: str, **defaults) -> "ScenarioConfig":
        raw = parse_key_values(text)
        known = {f.name: f for f in fields(cls)}
        kw = dict(defaults)
        for key, value in raw.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kw[key] = _coerce(known[key].type, value, key)
        if "scenario" not in kw:
            raise ConfigError("config needs a 'scenario' key")
        return cls(**kw)

    @classmethod
    def from_file(cls, path: str | Path, **defaults) -> "ScenarioConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_text(text, **defaults)


def _coerce(type_name, value: str, key: str):
    t = str(type_name)
    try:
        if t == "bool":
            low = value.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(value)
            return low in ("1", "true", "yes", "on")
        if t == "int":
            return int(float(value)) if "e" in value.lower() else int(value)
        if t == "float":
            return float(value)
        if t.startswith("tuple[int"):
            return tuple(int(v) for v in parse_float_list(value))
        if t.startswith("tuple[float"):
            return tuple(parse_float_list(value))
        return value.strip()
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from None
