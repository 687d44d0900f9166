"""Flat key=value simulation configuration with baked-in defaults.

The format is diff-friendly experiment provenance: one `key = value` per
line, `#` comments, unknown keys rejected.  Serialization is canonical
(fixed key order, 17 significant digits), so parse -> serialize is
idempotent.
"""

from dataclasses import dataclass, fields

from .errors import ConfigError
from .staging import SuvrMapParams
from .trajectory import fmt17


@dataclass
class SimulationConfig:
    domain: str = "mesh"  # mesh | graph
    mesh_path: str | None = None
    graph_path: str | None = None
    atlas_path: str | None = None
    atlas_table: str = "slabs"  # anatomical | slabs
    alpha: float = 0.61  # 1/year
    dt: float = 0.05  # years
    T: float = 40.0  # years
    ell: int = 2
    eta0: float = 10.0
    d_ext: float = 8.0  # mm^2/year
    d_axn: float = 80.0  # mm^2/year
    seed_regions: str = "abeta"  # abeta | tau | all | comma list of stages/ids
    seed_value: float = 0.1
    c_crit: float = 0.5
    solver_tol: float = 1e-10
    solver_maxit_factor: float = 10.0
    paper_literal_rhs: bool = False
    scale_k: float | None = None  # overrides the connectome file's k
    abeta_theta_low: float = 1.3
    abeta_theta_high: float = 2.2
    abeta_positivity_cutoff: float = 1.55
    tau_theta_low: float = 0.75
    tau_theta_high: float = 2.2
    tau_gamma: float = 0.25
    tau_epsilon: float = 0.1
    output_dir: str = "."
    workers: int = 1
    dump_states: bool = False

    def validate(self):
        if self.domain not in ("mesh", "graph"):
            raise ConfigError(f"domain must be mesh or graph, got {self.domain!r}")
        if self.atlas_table not in ("anatomical", "slabs"):
            raise ConfigError(
                f"atlas_table must be anatomical or slabs, got {self.atlas_table!r}"
            )
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not self.T >= self.dt:
            raise ConfigError(f"T must be >= dt, got T={self.T}, dt={self.dt}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if not 0.0 < self.seed_value <= 1.0:
            raise ConfigError(f"seed_value must be in (0,1], got {self.seed_value}")
        if self.ell < 1:
            raise ConfigError(f"ell must be >= 1, got {self.ell}")
        if not self.eta0 > 0:
            raise ConfigError(f"eta0 must be > 0, got {self.eta0}")
        if not self.d_ext > 0:
            raise ConfigError(f"d_ext must be > 0, got {self.d_ext}")
        if self.d_axn < 0:
            raise ConfigError(f"d_axn must be >= 0, got {self.d_axn}")
        if not 0.0 < self.c_crit < 1.0:
            raise ConfigError(f"c_crit must be in (0,1), got {self.c_crit}")
        if not self.solver_tol > 0:
            raise ConfigError(f"solver_tol must be > 0, got {self.solver_tol}")
        if self.solver_maxit_factor < 1:
            raise ConfigError(
                f"solver_maxit_factor must be >= 1, got {self.solver_maxit_factor}"
            )
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        try:
            self.suvr_abeta()
            self.suvr_tau()
        except ValueError as exc:
            raise ConfigError(str(exc))
        return self

    def suvr_abeta(self) -> SuvrMapParams:
        return SuvrMapParams(
            theta_low=self.abeta_theta_low,
            theta_high=self.abeta_theta_high,
            positivity_cutoff=self.abeta_positivity_cutoff,
        )

    def suvr_tau(self) -> SuvrMapParams:
        return SuvrMapParams(
            theta_low=self.tau_theta_low,
            theta_high=self.tau_theta_high,
            gamma=self.tau_gamma,
            epsilon=self.tau_epsilon,
        )


_FIELDS = {f.name: f for f in fields(SimulationConfig)}
_OPTIONAL_STR = {"mesh_path", "graph_path", "atlas_path"}
_OPTIONAL_FLOAT = {"scale_k"}
_BOOLS = {"paper_literal_rhs", "dump_states"}
_INTS = {"ell", "workers"}
_STRS = {"domain", "atlas_table", "seed_regions", "output_dir"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _OPTIONAL_STR:
        return raw or None
    if key in _STRS:
        return raw
    if key in _BOOLS:
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if key in _INTS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}")
    if key in _OPTIONAL_FLOAT:
        if not raw:
            return None
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}")
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}")


def parse_config_text(text: str, base: SimulationConfig | None = None) -> SimulationConfig:
    cfg = base if base is not None else SimulationConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _parse_value(key, raw))
    return cfg


def load_config(path, base: SimulationConfig | None = None) -> SimulationConfig:
    with open(path) as f:
        return parse_config_text(f.read(), base=base)


def _format_value(key: str, value) -> str:
    if value is None:
        return ""
    if key in _BOOLS:
        return "true" if value else "false"
    if key in _INTS or key in _STRS or key in _OPTIONAL_STR:
        return str(value)
    return fmt17(value)


def serialize_config(cfg: SimulationConfig) -> str:
    lines = [f"{name} = {_format_value(name, getattr(cfg, name))}" for name in _FIELDS]
    return "\n".join(lines) + "\n"


def write_config(cfg: SimulationConfig, path):
    with open(path, "w") as f:
        f.write(serialize_config(cfg))
