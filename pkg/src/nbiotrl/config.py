"""Simulation configuration, the per-TTI action space, and resource budgets.

Power quantities are stored in dB/dBm at the configuration boundary and
converted to linear milliwatts internally (see :func:`dbm_to_mw`).  Distances
are kilometers throughout; the received broadcast power used for coverage
grouping is ``P_bcast(mW) * u^-eta`` with ``u`` in km, the one unit reading
under which the default RSRP thresholds partition the default 12 km disk.
"""

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

# one uplink resource element = one 2 ms slot on one of the 48 sub-carriers
SUBCARRIERS = 48
SLOT_MS = 2

N_GROUPS = 3


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SimConfig:
    """All simulator parameters plus calibration knobs.

    Defaults describe the full-scale single-cell scenario (30000 devices,
    937 TTIs of 640 ms). ``snr_offset_db`` shifts every uplink preamble link
    budget; it exists because the literal default link budget leaves all
    groups far above the SNR threshold, and defaults to 0 (no shift).
    """

    cell_radius_km: float = 12.0
    n_devices: int = 30000
    n_tti_per_episode: int = 937
    tti_ms: int = 640

    # link budget
    path_loss_exponent: float = 4.0
    noise_dbm: float = -138.0
    snr_threshold_db: float = 0.0
    power_ctrl_target_dbm: float = 120.0  # target received power, group-0 power control
    bcast_power_dbm: float = 35.0
    max_tx_power_dbm: float = 23.0
    rsrp_threshold1_dbm: float = 0.0
    rsrp_threshold2_dbm: float = -5.0
    snr_offset_db: float = 0.0

    # retry / retention limits
    max_attempts_per_ce: int = 5
    max_attempts_total: int = 10
    max_rrc_wait: int = 5
    backoff_ttis: int = 0

    # resource-element costs and the per-group action sets
    re_per_preamble: int = 4
    re_per_data_rep: int = 32
    rach_set: tuple = (1, 2, 4)
    prea_set: tuple = (12, 24, 36, 48)
    repe_set: tuple = (1, 2, 4, 8, 16, 32)

    # traffic profile (Beta-shaped activation burst over the episode)
    beta_a: float = 3.0
    beta_b: float = 4.0

    # observation window and normalization cap for device counters
    history_window: int = 4
    obs_device_cap: int = 512

    seed: int = 1

    # -- derived, linear-unit views ------------------------------------
    @property
    def noise_mw(self) -> float:
        return dbm_to_mw(self.noise_dbm)

    @property
    def snr_threshold_linear(self) -> float:
        return db_to_linear(self.snr_threshold_db)

    @property
    def max_rao(self) -> int:
        """Largest per-group slot count n_rach * f_prea; observation scale."""
        return max(self.rach_set) * max(self.prea_set)

    def replace(self, **kw) -> "SimConfig":
        return replace(self, **kw)


def validate_config(cfg: SimConfig) -> list:
    """Return every violated invariant as a message; empty list means ok."""
    errs = []

    def positive(name, value):
        if not value > 0:
            errs.append(f"{name} must be strictly positive, got {value}")

    positive("cell_radius_km", cfg.cell_radius_km)
    positive("n_devices", cfg.n_devices)
    positive("n_tti_per_episode", cfg.n_tti_per_episode)
    positive("tti_ms", cfg.tti_ms)
    positive("max_attempts_per_ce", cfg.max_attempts_per_ce)
    positive("max_attempts_total", cfg.max_attempts_total)
    positive("max_rrc_wait", cfg.max_rrc_wait)
    positive("re_per_preamble", cfg.re_per_preamble)
    positive("re_per_data_rep", cfg.re_per_data_rep)
    positive("history_window", cfg.history_window)
    positive("obs_device_cap", cfg.obs_device_cap)
    positive("beta_a", cfg.beta_a)
    positive("beta_b", cfg.beta_b)
    if cfg.backoff_ttis < 0:
        errs.append(f"backoff_ttis must be >= 0, got {cfg.backoff_ttis}")

    if cfg.tti_ms % SLOT_MS != 0:
        errs.append(f"tti_ms must be divisible by {SLOT_MS}, got {cfg.tti_ms}")
    if not cfg.path_loss_exponent > 2:
        errs.append(f"path_loss_exponent must exceed 2, got {cfg.path_loss_exponent}")
    if not cfg.rsrp_threshold1_dbm > cfg.rsrp_threshold2_dbm:
        errs.append(
            "threshold order: rsrp_threshold1_dbm must exceed rsrp_threshold2_dbm, "
            f"got {cfg.rsrp_threshold1_dbm} <= {cfg.rsrp_threshold2_dbm}"
        )

    for name in ("rach_set", "prea_set", "repe_set"):
        values = getattr(cfg, name)
        if len(values) == 0:
            errs.append(f"empty action set: {name}")
            continue
        if any(v <= 0 for v in values):
            errs.append(f"{name} entries must be strictly positive, got {values}")
        if any(b <= a for a, b in zip(values, values[1:])):
            errs.append(f"{name} must be strictly increasing, got {values}")

    return errs


def require_valid(cfg: SimConfig) -> SimConfig:
    errs = validate_config(cfg)
    if errs:
        raise ConfigError("; ".join(errs))
    return cfg


@dataclass(frozen=True)
class GroupAction:
    """Per-group slice of a TTI decision: RACH periods, preambles, repetitions."""

    n_rach: int
    f_prea: int
    n_repe: int

    def validate(self, cfg: SimConfig):
        if self.n_rach not in cfg.rach_set:
            raise ConfigError(f"n_rach={self.n_rach} not in {cfg.rach_set}")
        if self.f_prea not in cfg.prea_set:
            raise ConfigError(f"f_prea={self.f_prea} not in {cfg.prea_set}")
        if self.n_repe not in cfg.repe_set:
            raise ConfigError(f"n_repe={self.n_repe} not in {cfg.repe_set}")


@dataclass(frozen=True)
class ActionVector:
    """The nine per-TTI decision variables: one GroupAction per coverage group."""

    groups: tuple

    def __post_init__(self):
        if len(self.groups) != N_GROUPS:
            raise ConfigError(f"ActionVector needs {N_GROUPS} groups, got {len(self.groups)}")

    def __iter__(self):
        return iter(self.groups)

    def __getitem__(self, i) -> GroupAction:
        return self.groups[i]

    def validate(self, cfg: SimConfig):
        for ga in self.groups:
            ga.validate(cfg)

    @staticmethod
    def uniform(n_rach: int, f_prea: int, n_repe: int) -> "ActionVector":
        return ActionVector(tuple(GroupAction(n_rach, f_prea, n_repe) for _ in range(N_GROUPS)))

    @staticmethod
    def from_indices(cfg: SimConfig, indices) -> "ActionVector":
        """Build from nine agent outputs: indices [n_rach x3, f_prea x3, n_repe x3]."""
        if len(indices) != 3 * N_GROUPS:
            raise ConfigError(f"need {3 * N_GROUPS} indices, got {len(indices)}")
        groups = tuple(
            GroupAction(
                cfg.rach_set[indices[g]],
                cfg.prea_set[indices[N_GROUPS + g]],
                cfg.repe_set[indices[2 * N_GROUPS + g]],
            )
            for g in range(N_GROUPS)
        )
        return ActionVector(groups)

    def to_indices(self, cfg: SimConfig) -> list:
        idx = [cfg.rach_set.index(ga.n_rach) for ga in self.groups]
        idx += [cfg.prea_set.index(ga.f_prea) for ga in self.groups]
        idx += [cfg.repe_set.index(ga.n_repe) for ga in self.groups]
        return idx


def uplink_re_budget(cfg: SimConfig) -> int:
    """Total uplink resource elements per TTI: 48 sub-carriers x 2 ms slots."""
    if cfg.tti_ms % SLOT_MS != 0:
        raise ConfigError(f"tti_ms must be divisible by {SLOT_MS}, got {cfg.tti_ms}")
    return SUBCARRIERS * (cfg.tti_ms // SLOT_MS)


def rach_re_cost(a: ActionVector, cfg: SimConfig) -> int:
    """Resource elements consumed by the RACH configuration of all groups."""
    return cfg.re_per_preamble * sum(ga.n_rach * ga.n_repe * ga.f_prea for ga in a)


def data_re_per_device(group: int, a: ActionVector, cfg: SimConfig) -> int:
    """Resource elements needed to serve one device of the given group."""
    if group not in range(N_GROUPS):
        raise ConfigError(f"group must be in 0..{N_GROUPS - 1}, got {group}")
    return cfg.re_per_data_rep * a[group].n_repe


# ---------------------------------------------------------------------------
# training hyperparameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DqnConfig:
    """Hyperparameters of the nine-agent Q-learning ensemble."""

    hidden_sizes: tuple = (128, 128, 128)
    learning_rate: float = 1e-4
    discount: float = 0.5
    batch_size: int = 32
    replay_capacity: int = 10000
    target_sync_period: int = 1000  # train steps between target-network copies
    eps_start: float = 1.0
    eps_final: float = 0.1
    eps_anneal_frac: float = 0.5  # fraction of total training TTIs spent annealing
    rms_decay: float = 0.9
    rms_eps: float = 1e-8
    target_mode: str = "ddqn"  # "ddqn" or "dqn-max"
    reward_scale: float = 1.0
    init_scale: float = 1.0

    def replace(self, **kw) -> "DqnConfig":
        return replace(self, **kw)


def validate_dqn_config(dcfg: DqnConfig) -> list:
    errs = []
    if len(dcfg.hidden_sizes) == 0 or any(h <= 0 for h in dcfg.hidden_sizes):
        errs.append(f"hidden_sizes must be non-empty positive, got {dcfg.hidden_sizes}")
    for name in ("learning_rate", "batch_size", "replay_capacity", "target_sync_period",
                 "rms_decay", "reward_scale", "init_scale"):
        if not getattr(dcfg, name) > 0:
            errs.append(f"{name} must be strictly positive")
    if not 0 <= dcfg.discount < 1:
        errs.append(f"discount must be in [0, 1), got {dcfg.discount}")
    if not 0.1 <= dcfg.eps_final <= dcfg.eps_start <= 1.0:
        errs.append(
            "exploration range must satisfy 0.1 <= eps_final <= eps_start <= 1.0, "
            f"got [{dcfg.eps_final}, {dcfg.eps_start}]"
        )
    if not 0 < dcfg.eps_anneal_frac <= 1:
        errs.append(f"eps_anneal_frac must be in (0, 1], got {dcfg.eps_anneal_frac}")
    if dcfg.target_mode not in ("ddqn", "dqn-max"):
        errs.append(f"target_mode must be 'ddqn' or 'dqn-max', got {dcfg.target_mode!r}")
    if dcfg.replay_capacity < dcfg.batch_size:
        errs.append("replay_capacity must be >= batch_size")
    return errs


def require_valid_dqn(dcfg: DqnConfig) -> DqnConfig:
    errs = validate_dqn_config(dcfg)
    if errs:
        raise ConfigError("; ".join(errs))
    return dcfg


# ---------------------------------------------------------------------------
# flat key=value config files
# ---------------------------------------------------------------------------

_TUPLE_FIELDS = {"rach_set", "prea_set", "repe_set", "hidden_sizes"}
DQN_KEY_PREFIX = "dqn_"


def _parse_value(name: str, text: str, pytype):
    try:
        if name in _TUPLE_FIELDS:
            return tuple(int(v.strip()) for v in text.split(",") if v.strip())
        if pytype is int:
            return int(text)
        if pytype is float:
            return float(text)
        if pytype is str:
            return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r} ({exc})") from None
    raise ConfigError(f"unsupported field type for {name}")


def parse_config_text(text: str) -> tuple:
    """Parse ``key=value`` lines into (SimConfig, DqnConfig).

    ``#`` starts a comment; blank lines are ignored; unknown keys are errors.
    DqnConfig fields are namespaced with a ``dqn_`` prefix.
    """
    sim_fields = {f.name: f.type for f in fields(SimConfig)}
    dqn_fields = {f.name: f.type for f in fields(DqnConfig)}
    sim_kw, dqn_kw = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in sim_fields:
            sim_kw[key] = _parse_value(key, value, _ftype(sim_fields[key]))
        elif key.startswith(DQN_KEY_PREFIX) and key[len(DQN_KEY_PREFIX):] in dqn_fields:
            name = key[len(DQN_KEY_PREFIX):]
            dqn_kw[name] = _parse_value(name, value, _ftype(dqn_fields[name]))
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return SimConfig(**sim_kw), DqnConfig(**dqn_kw)


def _ftype(annotation):
    # dataclass fields carry string annotations here; map to concrete types
    mapping = {"int": int, "float": float, "str": str, "tuple": tuple}
    if isinstance(annotation, str):
        return mapping.get(annotation, str)
    return annotation


def load_config_file(path) -> tuple:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text)


def config_as_dict(cfg) -> dict:
    """Flat dict of field name -> value (tuples become lists for JSON)."""
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out
