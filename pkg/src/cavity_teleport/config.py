"""Run configuration: a flat JSON object of scalars with stable defaults.

Frequencies are given in MHz and converted to angular rates (rad/us) when
physical parameters are built; all times are in microseconds.  Schedule
entries left as ``None`` take the defaults of :meth:`ProtocolSchedule.default`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources

from .dynamics import SystemParams
from .protocol import InputState, ProtocolSchedule

_SQRT_HALF = math.sqrt(0.5)


class ConfigError(ValueError):
    """Malformed configuration text, unknown key or invalid value."""


@dataclass(frozen=True)
class RunConfig:
    g_mhz: float = 34.0
    kappa_mhz: float = 4.1
    gamma_mhz: float = 2.6
    eta: float = 0.6
    omega_over_g: float = 300.0
    delta_over_omega: float = 10.0
    cf_re: float = _SQRT_HALF
    cf_im: float = 0.0
    cg_re: float = _SQRT_HALF
    cg_im: float = 0.0
    t1_us: float | None = None
    dt1_frac: float = 0.0
    tau1_us: float | None = None
    tau2_us: float | None = None
    t2_us: float | None = None
    td_us: float | None = None
    seed: int = 0
    n_traj: int = 1000

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("seed", "n_traj"):
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ConfigError(f"{f.name}: expected an integer, got {v!r}")
            elif v is not None:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ConfigError(f"{f.name}: expected a number, got {v!r}")
                if not math.isfinite(v):
                    raise ConfigError(f"{f.name}: must be finite, got {v!r}")
                object.__setattr__(self, f.name, float(v))
        if self.n_traj < 1:
            raise ConfigError("n_traj: must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed: must fit in 64 unsigned bits")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError("eta: must lie in [0, 1]")
        norm = self.cf_re ** 2 + self.cf_im ** 2 + self.cg_re ** 2 + self.cg_im ** 2
        if abs(norm - 1.0) > 1e-10:
            raise ConfigError(f"cf, cg: |cf|^2 + |cg|^2 = {norm!r}, expected 1")

    # -- parsing --------------------------------------------------------------

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_dict(cls, data: dict, base: "RunConfig | None" = None) -> "RunConfig":
        unknown = sorted(set(data) - set(cls.keys()))
        if unknown:
            raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
        base = base or cls()
        try:
            return replace(base, **data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    @classmethod
    def bundled(cls, name: str = "cs.config") -> "RunConfig":
        text = resources.files("cavity_teleport").joinpath("data", name).read_text(encoding="utf-8")
        return cls.from_json(text)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def with_values(self, **changes) -> "RunConfig":
        return self.from_dict(changes, base=self)

    # -- derived objects ------------------------------------------------------

    def params(self) -> SystemParams:
        return SystemParams.from_mhz(self.g_mhz, self.kappa_mhz, self.gamma_mhz, eta=self.eta,
                                     omega_over_g=self.omega_over_g,
                                     delta_over_omega=self.delta_over_omega)

    def input_state(self) -> InputState:
        return InputState(complex(self.cf_re, self.cf_im), complex(self.cg_re, self.cg_im))

    def schedule(self, params: SystemParams | None = None) -> ProtocolSchedule:
        params = params or self.params()
        return ProtocolSchedule.default(params, dt1_frac=self.dt1_frac, t1=self.t1_us,
                                        tau1=self.tau1_us, tau2=self.tau2_us, t2=self.t2_us,
                                        t_d=self.td_us)

    def effective(self, params: SystemParams | None = None) -> dict:
        """All values after defaulting, times in us."""
        s = self.schedule(params)
        out = self.to_dict()
        out.update(t1_us=s.t1, tau1_us=s.tau1, tau2_us=s.tau2, t2_us=s.t2, td_us=s.t_d)
        return out
