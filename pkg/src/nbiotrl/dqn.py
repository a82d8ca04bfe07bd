"""Cooperative multi-agent deep Q-learning.

Nine agents jointly set the uplink configuration: one agent per variable
(RACH periods, preamble count, repetitions) per coverage group. All agents
see the same windowed state and the same scalar reward (total devices
served that TTI), so each learns its variable's contribution to a shared
objective. Every agent owns an online network, a periodically synced
target network, an RMSProp accumulator and a uniform replay buffer.

The TD target supports two bootstrap modes: ``ddqn`` (default) evaluates
the online net's argmax action with the target net; ``dqn-max`` takes the
target net's own maximum.
"""

from dataclasses import dataclass, field

import numpy as np

from . import mlp_backend
from .config import ActionVector, DqnConfig, N_GROUPS, SimConfig, require_valid_dqn
from .env import STATE_FEATURES_PER_TTI, UplinkEnv, EpisodeStats
from .errors import ConfigError, ContractViolation
from .rng import RngStream

N_AGENTS = 3 * N_GROUPS

CHECKPOINT_VERSION = 1


def agent_action_set(cfg: SimConfig, k: int) -> tuple:
    """Agent k's value set: agents 0-2 pick n_rach for groups 0-2, agents
    3-5 pick f_prea, agents 6-8 pick n_repe."""
    if not 0 <= k < N_AGENTS:
        raise ContractViolation(f"agent index {k} out of range")
    return (cfg.rach_set, cfg.prea_set, cfg.repe_set)[k // N_GROUPS]


class Mlp:
    """Weights + biases container over the kernel backend."""

    def __init__(self, weights, biases):
        self.weights = weights
        self.biases = biases

    @classmethod
    def create(cls, sizes, init_scale: float, rng: np.random.Generator) -> "Mlp":
        return cls(*mlp_backend.init_params(sizes, init_scale, rng))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return mlp_backend.forward(self.weights, self.biases, x)

    def q_values(self, state: np.ndarray) -> np.ndarray:
        return self.forward(state[None, :])[0]

    def clone(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def copy_from(self, other: "Mlp"):
        # in place so existing references stay valid
        for dst, src in zip(self.weights, other.weights):
            dst[:] = src
        for dst, src in zip(self.biases, other.biases):
            dst[:] = src


class RmsPropState:
    def __init__(self, net: Mlp):
        self.vw = [np.zeros_like(w) for w in net.weights]
        self.vb = [np.zeros_like(b) for b in net.biases]


class ReplayBuffer:
    """Fixed-capacity ring of transitions, uniform sampling."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.s = np.empty((capacity, state_dim))
        self.a = np.empty(capacity, dtype=np.int64)
        self.r = np.empty(capacity)
        self.s_next = np.empty((capacity, state_dim))
        self.terminal = np.empty(capacity, dtype=bool)
        self.size = 0
        self._head = 0

    def __len__(self):
        return self.size

    def push(self, s, a: int, r: float, s_next, terminal: bool):
        i = self._head
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s_next[i] = s_next
        self.terminal[i] = terminal
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        if self.size < batch:
            raise ContractViolation("sampling from an underfilled buffer")
        idx = rng.integers(0, self.size, size=batch)
        return (np.ascontiguousarray(self.s[idx]), self.a[idx].copy(),
                self.r[idx].copy(), np.ascontiguousarray(self.s_next[idx]),
                self.terminal[idx].copy())


def td_targets(q_next_online: np.ndarray, q_next_target: np.ndarray,
               r: np.ndarray, terminal: np.ndarray, gamma: float,
               mode: str = "ddqn") -> np.ndarray:
    """Bootstrap targets for a batch; terminal transitions use the bare
    reward."""
    if mode == "dqn-max":
        boot = q_next_target.max(axis=1)
    elif mode == "ddqn":
        sel = np.argmax(q_next_online, axis=1)
        boot = q_next_target[np.arange(len(sel)), sel]
    else:
        raise ConfigError(f"unknown target mode {mode!r}")
    y = r + gamma * boot
    return np.where(terminal, r, y)


@dataclass
class Agent:
    online: Mlp
    target: Mlp
    rms: RmsPropState
    buffer: ReplayBuffer
    n_actions: int


def anneal_epsilon(dcfg: DqnConfig, step: int, total_steps: int) -> float:
    """Linear decay over the first ``eps_anneal_frac`` of training, then
    hold at the floor."""
    horizon = max(1.0, total_steps * dcfg.eps_anneal_frac)
    frac = min(1.0, step / horizon)
    return dcfg.eps_start - (dcfg.eps_start - dcfg.eps_final) * frac


class AgentEnsemble:
    """The nine agents plus their shared training bookkeeping."""

    def __init__(self, cfg: SimConfig, dcfg: DqnConfig, rng_init: np.random.Generator):
        self.cfg = cfg
        self.dcfg = require_valid_dqn(dcfg)
        self.state_dim = cfg.history_window * STATE_FEATURES_PER_TTI
        self.agents = []
        for k in range(N_AGENTS):
            n_actions = len(agent_action_set(cfg, k))
            sizes = (self.state_dim, *dcfg.hidden_sizes, n_actions)
            online = Mlp.create(sizes, dcfg.init_scale, rng_init)
            agent = Agent(online=online, target=online.clone(),
                          rms=RmsPropState(online),
                          buffer=ReplayBuffer(dcfg.replay_capacity, self.state_dim),
                          n_actions=n_actions)
            self.agents.append(agent)
        self.train_steps = 0

    def greedy_indices(self, state: np.ndarray) -> np.ndarray:
        """Per-agent argmax actions (ties resolve to the lowest index)."""
        return np.array([int(np.argmax(ag.online.q_values(state)))
                         for ag in self.agents], dtype=np.int64)

    def select_actions(self, state: np.ndarray, eps: float,
                       rng: np.random.Generator):
        """Epsilon-greedy per agent, independently; returns the assembled
        ActionVector and the nine raw indices."""
        idx = np.empty(N_AGENTS, dtype=np.int64)
        for k, ag in enumerate(self.agents):
            if rng.random() < eps:
                idx[k] = rng.integers(ag.n_actions)
            else:
                idx[k] = int(np.argmax(ag.online.q_values(state)))
        return ActionVector.from_indices(self.cfg, idx), idx

    def store(self, s, indices, r: float, s_next, terminal: bool):
        for k, ag in enumerate(self.agents):
            ag.buffer.push(s, int(indices[k]), r, s_next, terminal)

    def trainable(self) -> bool:
        return len(self.agents[0].buffer) >= self.dcfg.batch_size

    def train(self, rng: np.random.Generator):
        """One optimization step for every agent (no-op until the buffers
        cover a minibatch). Returns the mean loss or None."""
        if not self.trainable():
            return None
        d = self.dcfg
        losses = []
        for ag in self.agents:
            s, a, r, s_next, term = ag.buffer.sample(d.batch_size, rng)
            q_next_online = ag.online.forward(s_next)
            q_next_target = ag.target.forward(s_next)
            y = td_targets(q_next_online, q_next_target, r, term,
                           d.discount, d.target_mode)
            losses.append(mlp_backend.train_step(
                ag.online.weights, ag.online.biases, ag.rms.vw, ag.rms.vb,
                s, a, y, d.learning_rate, d.rms_decay, d.rms_eps))
        self.train_steps += 1
        if self.train_steps % d.target_sync_period == 0:
            self.sync_targets()
        return float(np.mean(losses))

    def sync_targets(self):
        for ag in self.agents:
            ag.target.copy_from(ag.online)


@dataclass
class TrainResult:
    ensemble: AgentEnsemble
    episode_stats: list = field(default_factory=list)

    def episode_returns(self) -> np.ndarray:
        return np.array([s.total_served for s in self.episode_stats], dtype=np.int64)


def run_training(cfg: SimConfig, dcfg: DqnConfig, episodes: int,
                 progress=None) -> TrainResult:
    """Train the ensemble for ``episodes`` full episodes.

    Per TTI: select actions epsilon-greedily, step the environment, store
    the shared transition in every agent's buffer, then one train step per
    agent. Exploration anneals over TTIs, not episodes, so restarts mid-run
    reproduce the same schedule.
    """
    env = UplinkEnv(cfg)
    rngs = RngStream(cfg.seed)
    ensemble = AgentEnsemble(cfg, dcfg, rngs.stream("init"))
    rng_explore = rngs.stream("exploration")
    rng_replay = rngs.stream("replay-sampling")
    total_ttis = episodes * cfg.n_tti_per_episode
    result = TrainResult(ensemble=ensemble)
    tti = 0
    for ep in range(episodes):
        s = env.reset(ep)
        done = False
        while not done:
            eps = anneal_epsilon(dcfg, tti, total_ttis)
            action, idx = ensemble.select_actions(s, eps, rng_explore)
            obs, reward, s_next, done = env.step(action)
            ensemble.store(s, idx, reward * dcfg.reward_scale, s_next, done)
            ensemble.train(rng_replay)
            s = s_next
            tti += 1
        result.episode_stats.append(env.stats)
        if progress is not None:
            progress(ep, env.stats)
    return result


class CmaDqnGreedyController:
    """Evaluation-time policy: always the per-agent argmax action."""

    def __init__(self, ensemble: AgentEnsemble):
        self.ensemble = ensemble

    def decide(self, state=None) -> ActionVector:
        if state is None:
            raise ContractViolation("greedy decide needs the current state")
        idx = self.ensemble.greedy_indices(state)
        return ActionVector.from_indices(self.ensemble.cfg, idx)

    def observe(self, obs, reward):
        pass

    def begin_episode(self):
        pass


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, ensemble: AgentEnsemble, extra: dict | None = None):
    """Dump every agent's parameters, target, optimizer state and the train
    counter into one npz; round-trips bit-exactly."""
    arrays = {
        "version": np.array(CHECKPOINT_VERSION, dtype=np.int64),
        "train_steps": np.array(ensemble.train_steps, dtype=np.int64),
    }
    for k, ag in enumerate(ensemble.agents):
        for l, (w, b) in enumerate(zip(ag.online.weights, ag.online.biases)):
            arrays[f"a{k}_w{l}"] = w
            arrays[f"a{k}_b{l}"] = b
            arrays[f"a{k}_tw{l}"] = ag.target.weights[l]
            arrays[f"a{k}_tb{l}"] = ag.target.biases[l]
            arrays[f"a{k}_vw{l}"] = ag.rms.vw[l]
            arrays[f"a{k}_vb{l}"] = ag.rms.vb[l]
    if extra:
        for key, value in extra.items():
            arrays[f"x_{key}"] = np.asarray(value)
    np.savez(path, **arrays)


def load_checkpoint(path, cfg: SimConfig, dcfg: DqnConfig) -> AgentEnsemble:
    """Rebuild an ensemble from :func:`save_checkpoint` output. The config
    must describe the same architecture the checkpoint was written with."""
    with np.load(path) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ConfigError(f"checkpoint version {version} not supported")
        # architecture comes from the config; a throwaway generator seeds
        # shapes that are immediately overwritten
        ensemble = AgentEnsemble(cfg, dcfg, np.random.default_rng(0))
        ensemble.train_steps = int(data["train_steps"])
        for k, ag in enumerate(ensemble.agents):
            for l in range(len(ag.online.weights)):
                for name, dst in ((f"a{k}_w{l}", ag.online.weights[l]),
                                  (f"a{k}_b{l}", ag.online.biases[l]),
                                  (f"a{k}_tw{l}", ag.target.weights[l]),
                                  (f"a{k}_tb{l}", ag.target.biases[l]),
                                  (f"a{k}_vw{l}", ag.rms.vw[l]),
                                  (f"a{k}_vb{l}", ag.rms.vb[l])):
                    src = data[name]
                    if src.shape != dst.shape:
                        raise ConfigError(
                            f"checkpoint tensor {name} has shape {src.shape}, "
                            f"config implies {dst.shape}")
                    dst[:] = src
    return ensemble
