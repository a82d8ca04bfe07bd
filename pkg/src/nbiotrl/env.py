"""Single-cell uplink environment.

One :meth:`UplinkEnv.step` applies a per-group configuration (RACH periods,
preambles, repetitions), runs random-access contention in each coverage
group, splits the TTI's resource-element budget between access and data,
schedules connected devices, advances every device's lifecycle, and returns
the per-group counters plus the flattened learning state.

State layout
------------
The learning state is a window of the last ``history_window`` TTIs, oldest
first, zero-padded while the episode is younger than the window. Each TTI
contributes 24 values in [0, 1]:

* 15 observation counters, group-major:
  ``[v_cp, v_sp, v_ip, v_succ, v_unsc]`` for group 0, then 1, then 2.
  RAO counters are divided by the largest possible RAO count
  (``cfg.max_rao``); device counters by ``cfg.obs_device_cap`` and clipped.
* 9 action features in agent order (``n_rach`` for groups 0..2, then
  ``f_prea``, then ``n_repe``), each encoded as set-index / set-size.
"""

from dataclasses import dataclass, field

import numpy as np

from .config import (
    N_GROUPS,
    ActionVector,
    SimConfig,
    data_re_per_device,
    rach_re_cost,
    require_valid,
    uplink_re_budget,
)
from .errors import ContractViolation
from .phy import mean_snr_linear, place_devices, assign_ce_group
from .rach import RachOutcome, run_rach_group
from .rng import RngStream
from .sched import schedule_data
from .traffic import DeviceState, Population, TrafficProfile, sample_activation_ttis

STATE_FEATURES_PER_TTI = 24


@dataclass(frozen=True)
class ObservationU:
    """Per-group counters the base station sees at the end of a TTI."""

    v_cp: np.ndarray   # collided RAOs
    v_sp: np.ndarray   # RAOs with a single detected chooser
    v_ip: np.ndarray   # RAOs observed unused
    v_succ: np.ndarray # devices granted data resources
    v_unsc: np.ndarray # connected devices carried to the next TTI

    @staticmethod
    def zeros() -> "ObservationU":
        z = lambda: np.zeros(N_GROUPS, dtype=np.int64)
        return ObservationU(z(), z(), z(), z(), z())

    def group_major(self) -> np.ndarray:
        """The 15 counters, 5 per group, groups contiguous."""
        stacked = np.stack([self.v_cp, self.v_sp, self.v_ip, self.v_succ, self.v_unsc])
        return stacked.T.reshape(-1)


@dataclass
class TtiRecord:
    tti: int
    obs: ObservationU
    action: ActionVector
    reward: int
    arrivals: np.ndarray
    drops_rach: np.ndarray
    drops_rrc: np.ndarray


@dataclass
class EpisodeStats:
    """Per-TTI trace of one episode."""

    records: list = field(default_factory=list)

    def append(self, rec: TtiRecord):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    @property
    def total_served(self) -> int:
        return sum(r.reward for r in self.records)

    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.records], dtype=np.int64)

    def rows(self):
        """Flat per-(tti, group) rows matching the metrics schema."""
        for r in self.records:
            for g in range(N_GROUPS):
                a = r.action[g]
                yield {
                    "tti": r.tti,
                    "group": g,
                    "v_cp": int(r.obs.v_cp[g]),
                    "v_sp": int(r.obs.v_sp[g]),
                    "v_ip": int(r.obs.v_ip[g]),
                    "v_succ": int(r.obs.v_succ[g]),
                    "v_unsc": int(r.obs.v_unsc[g]),
                    "n_rach": a.n_rach,
                    "f_prea": a.f_prea,
                    "n_repe": a.n_repe,
                    "reward": r.reward,
                    "arrivals": int(r.arrivals[g]),
                    "drops_rach": int(r.drops_rach[g]),
                    "drops_rrc": int(r.drops_rrc[g]),
                }


def normalize_action(a: ActionVector, cfg: SimConfig) -> np.ndarray:
    """Agent-order action features, each set-index / set-size."""
    idx = np.array(a.to_indices(cfg), dtype=float)
    sizes = np.array([len(cfg.rach_set)] * N_GROUPS + [len(cfg.prea_set)] * N_GROUPS
                     + [len(cfg.repe_set)] * N_GROUPS, dtype=float)
    return idx / sizes


def build_state(history, cfg: SimConfig) -> np.ndarray:
    """Flatten ≤ ``history_window`` (obs, action) pairs, zero-padding the
    missing leading TTIs. See the module docstring for the exact layout."""
    m = cfg.history_window
    if len(history) > m:
        raise ContractViolation("history longer than the configured window")
    state = np.zeros(m * STATE_FEATURES_PER_TTI, dtype=np.float64)
    base = (m - len(history)) * STATE_FEATURES_PER_TTI
    for j, (obs, action) in enumerate(history):
        k = base + j * STATE_FEATURES_PER_TTI
        counts = obs.group_major().astype(float)
        scale = np.empty(15)
        # per group: 3 RAO counters then 2 device counters
        scale.reshape(N_GROUPS, 5)[:, :3] = cfg.max_rao
        scale.reshape(N_GROUPS, 5)[:, 3:] = cfg.obs_device_cap
        state[k:k + 15] = np.minimum(counts / scale, 1.0)
        state[k + 15:k + 24] = normalize_action(action, cfg)
    return state


class UplinkEnv:
    """Discrete-time uplink simulator; strictly sequential per instance."""

    def __init__(self, cfg: SimConfig):
        self.cfg = require_valid(cfg)
        self._rngs = RngStream(cfg.seed)
        self.pop: Population | None = None
        self.t = 0
        self.episode = -1

    # -- episode control ----------------------------------------------------

    def reset(self, episode: int = 0) -> np.ndarray:
        """Start episode ``episode``: new placement, grouping and activation
        schedule, empty history. Returns the all-zero initial state."""
        cfg = self.cfg
        self.episode = episode
        self.t = 0
        rng_place = self._rngs.fresh(f"placement#{episode}")
        rng_traffic = self._rngs.fresh(f"traffic#{episode}")
        self._rng_fading = self._rngs.fresh(f"fading#{episode}")
        self._rng_choice = self._rngs.fresh(f"preamble-choice#{episode}")
        self._rng_sched = self._rngs.fresh(f"scheduling-order#{episode}")

        u = place_devices(cfg.n_devices, cfg.cell_radius_km, rng_place)
        groups = assign_ce_group(u, cfg)
        profile = TrafficProfile(cfg.beta_a, cfg.beta_b, cfg.n_tti_per_episode)
        act = sample_activation_ttis(cfg.n_devices, profile, rng_traffic)
        self.pop = Population(cfg, u, groups, act)
        # mean SNR under the two power rules; group 0 inverts the path loss
        # (clipped at max power), groups 1 and 2 always transmit at max.
        self._snr_inverting = mean_snr_linear(u, 0, cfg)
        self._snr_maxpower = mean_snr_linear(u, 1, cfg)
        self._history: list = []
        self._prev_unsc = np.zeros(N_GROUPS, dtype=np.int64)
        self.stats = EpisodeStats()
        self._budget = uplink_re_budget(cfg)
        return build_state(self._history, cfg)

    @property
    def terminal(self) -> bool:
        return self.t >= self.cfg.n_tti_per_episode

    # -- one TTI ------------------------------------------------------------

    def step(self, a: ActionVector):
        """Advance one TTI under configuration ``a``.

        Returns ``(obs, reward, state, terminal)``.
        """
        if self.pop is None:
            raise ContractViolation("step before reset")
        if self.terminal:
            raise ContractViolation("step after the episode ended")
        cfg = self.cfg
        a.validate(cfg)
        self.t += 1
        t = self.t
        pop = self.pop

        arrivals = pop.activate(t)

        # random access per group
        attempting = pop.backlogged_at(t)
        grp_of = pop.ce_group[attempting]
        snr_all = np.where(pop.ce_group == 0, self._snr_inverting, self._snr_maxpower)
        outcomes: list[RachOutcome] = []
        for g in range(N_GROUPS):
            ids = attempting[grp_of == g]
            ga = a[g]
            out = run_rach_group(ids, snr_all[ids], ga.n_rach, ga.f_prea, ga.n_repe,
                                 cfg.snr_threshold_linear, self._rng_choice,
                                 self._rng_fading)
            outcomes.append(out)

        # budget split
        r_rach = rach_re_cost(a, cfg)
        r_data = max(0, self._budget - r_rach)

        # admit fresh successes at this TTI's data cost, then schedule the
        # whole connected pool
        for g in range(N_GROUPS):
            ids = outcomes[g].success_ids
            pop.register_rach_successes(ids, data_re_per_device(g, a, cfg))
        pool = np.nonzero(pop.state == DeviceState.CONNECTED_WAITING)[0]
        served, unserved, re_used = schedule_data(
            pool, pop.pending_cost[pool], r_data, self._rng_sched)
        if re_used > r_data:
            raise ContractViolation("scheduler exceeded the data budget")
        pop.mark_served(served)
        v_succ = np.bincount(pop.ce_group[served], minlength=N_GROUPS)

        # lifecycle updates: failed attempts (escalation, drops), RRC expiry
        drops_rach = np.zeros(N_GROUPS, dtype=np.int64)
        for g in range(N_GROUPS):
            drops_rach += pop.register_rach_failures(outcomes[g].failed_ids, t)
        retained, drops_rrc = pop.expire_rrc(unserved)
        v_unsc = np.bincount(pop.ce_group[retained], minlength=N_GROUPS)
        pop.check_conservation()

        obs = ObservationU(
            v_cp=np.array([o.v_collided for o in outcomes], dtype=np.int64),
            v_sp=np.array([o.v_success for o in outcomes], dtype=np.int64),
            v_ip=np.array([o.v_idle for o in outcomes], dtype=np.int64),
            v_succ=v_succ.astype(np.int64),
            v_unsc=v_unsc.astype(np.int64),
        )
        if np.any(obs.v_succ > obs.v_sp + self._prev_unsc):
            raise ContractViolation("served more devices than entered the pool")
        self._prev_unsc = obs.v_unsc
        reward = int(v_succ.sum())

        self._history.append((obs, a))
        if len(self._history) > cfg.history_window:
            self._history.pop(0)
        state = build_state(self._history, cfg)

        self.stats.append(TtiRecord(t, obs, a, reward, arrivals,
                                    drops_rach, drops_rrc))
        return obs, reward, state, self.terminal
