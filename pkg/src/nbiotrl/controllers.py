"""Uplink configuration controllers.

A controller picks the next TTI's per-group configuration from what the
base station observed so far. Besides trivial static and uniform-random
baselines this module implements a load-estimation heuristic: it inverts
the expected-idle-RAO curve to estimate the number of contenders per group,
extrapolates the estimate one TTI ahead, and picks the preamble counts that
maximize the expected number of servable devices under the shared
resource-element budget.
"""

import itertools
import math

from dataclasses import dataclass

import numpy as np

from .config import (
    N_GROUPS,
    ActionVector,
    GroupAction,
    SimConfig,
    data_re_per_device,
    rach_re_cost,
    uplink_re_budget,
)
from .env import ObservationU
from .errors import ContractViolation


class ControllerPolicy:
    """decide() proposes the next ActionVector; observe() feeds back the
    counters and reward that action produced."""

    def decide(self, state=None) -> ActionVector:
        raise NotImplementedError

    def observe(self, obs: ObservationU, reward: int):
        pass

    def begin_episode(self):
        pass


class StaticController(ControllerPolicy):
    def __init__(self, action: ActionVector, cfg: SimConfig):
        action.validate(cfg)
        self.action = action

    def decide(self, state=None) -> ActionVector:
        return self.action


class RandomController(ControllerPolicy):
    """Every variable drawn uniformly from its configured set each TTI."""

    def __init__(self, cfg: SimConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng

    def decide(self, state=None) -> ActionVector:
        cfg, rng = self.cfg, self.rng
        groups = tuple(
            GroupAction(
                int(rng.choice(cfg.rach_set)),
                int(rng.choice(cfg.prea_set)),
                int(rng.choice(cfg.repe_set)),
            )
            for _ in range(N_GROUPS))
        return ActionVector(groups)


# ---------------------------------------------------------------------------
# load estimation
# ---------------------------------------------------------------------------

def zeta(f_prea: int, v_idle: float, load_cap: float = math.inf) -> float:
    """Invert the expected idle count: with n contenders on f preambles the
    expected idle fraction is ((f-1)/f)^n, so n = log_{(f-1)/f}(v_idle/f).

    All-idle observations give zero load; a fully busy observation
    (``v_idle`` = 0) is off the curve and clamps to ``load_cap``.
    """
    if f_prea < 2:
        raise ContractViolation("need at least two preambles to invert the idle curve")
    if v_idle <= 0:
        return load_cap
    if v_idle >= f_prea:
        return 0.0
    est = math.log(v_idle / f_prea) / math.log((f_prea - 1) / f_prea)
    return min(est, load_cap)


def expected_requests(d_hat: float, f_prea: int, v_unsc_prev: float) -> float:
    """Expected connection requests this TTI: singleton-preamble winners
    among ``d_hat`` contenders on ``f_prea`` preambles, plus the backlog of
    already connected but still unserved devices."""
    if f_prea < 2 or d_hat < 0:
        raise ContractViolation("expected_requests needs f_prea >= 2 and d_hat >= 0")
    if d_hat == 0:
        return float(v_unsc_prev)
    return d_hat * (1.0 - 1.0 / f_prea) ** (d_hat - 1.0) + v_unsc_prev


@dataclass(frozen=True)
class LoadEstimate:
    d_hat: float = 0.0
    zeta_prev: float = 0.0
    delta: float = 0.0


def estimate_load(v_cp_prev: float, v_idle_prev: float, f_prev: int, n_rach_prev: int,
                  prev: LoadEstimate, prev2_d_hat: float, load_cap: float) -> LoadEstimate:
    """One step of the load tracker.

    The new estimate is max(2 x last collided count, inverted idle count +
    linear trend), where the trend is the difference of the last two
    estimates. With several RACH periods per TTI the idle count is split
    evenly across periods and the per-period inversion is scaled back up.
    """
    z_per_period = zeta(f_prev, v_idle_prev / n_rach_prev, load_cap)
    z = min(z_per_period * n_rach_prev, load_cap)
    delta = prev.d_hat - prev2_d_hat
    d_hat = max(2.0 * v_cp_prev, z + delta)
    d_hat = min(max(d_hat, 0.0), load_cap)
    return LoadEstimate(d_hat=d_hat, zeta_prev=z, delta=delta)


class LeUrcController(ControllerPolicy):
    """Load-estimation heuristic.

    Repetition values are fixed per group for the whole run and only the
    preamble counts react to load; the RACH-period count stays at 1. Each
    TTI the controller evaluates every joint preamble choice (the groups are
    coupled through the shared budget) and keeps the one maximizing the sum
    over groups of min(expected requests, servable devices).
    """

    def __init__(self, cfg: SimConfig, n_repe_per_group, n_rach: int = 1):
        if len(n_repe_per_group) != N_GROUPS:
            raise ContractViolation(f"need {N_GROUPS} repetition values")
        self.cfg = cfg
        self.n_repe = tuple(int(r) for r in n_repe_per_group)
        self.n_rach = int(n_rach)
        for g in range(N_GROUPS):
            GroupAction(self.n_rach, cfg.prea_set[0], self.n_repe[g]).validate(cfg)
        self._budget = uplink_re_budget(cfg)
        self.begin_episode()

    def begin_episode(self):
        # the first decision has no history and estimates zero load; with
        # both seed estimates at 0 the trend term starts at 0 by itself
        self.estimates = [LoadEstimate() for _ in range(N_GROUPS)]
        self._prev2_d_hat = [0.0] * N_GROUPS
        self._last_obs: ObservationU | None = None
        self._last_action: ActionVector | None = None

    def observe(self, obs: ObservationU, reward: int):
        if self._last_action is None:
            raise ContractViolation("observe before decide")
        cap = float(self.cfg.n_devices)
        for g in range(N_GROUPS):
            prev = self.estimates[g]
            a = self._last_action[g]
            self.estimates[g] = estimate_load(
                float(obs.v_cp[g]), float(obs.v_ip[g]), a.f_prea, a.n_rach,
                prev, self._prev2_d_hat[g], cap)
            self._prev2_d_hat[g] = prev.d_hat
        self._last_obs = obs

    def decide(self, state=None) -> ActionVector:
        cfg = self.cfg
        if self._last_obs is None:
            # nothing observed yet: zero load, the tie-break picks the
            # smallest preamble counts
            d_hat = [0.0] * N_GROUPS
            v_unsc = [0.0] * N_GROUPS
        else:
            d_hat = [self.estimates[g].d_hat for g in range(N_GROUPS)]
            v_unsc = [float(self._last_obs.v_unsc[g]) for g in range(N_GROUPS)]

        best = None
        for combo in itertools.product(cfg.prea_set, repeat=N_GROUPS):
            action = ActionVector(tuple(
                GroupAction(self.n_rach, combo[g], self.n_repe[g])
                for g in range(N_GROUPS)))
            r_rach = rach_re_cost(action, cfg)
            r_data = max(0, self._budget - r_rach)
            score = 0.0
            for g in range(N_GROUPS):
                cost = data_re_per_device(g, action, cfg)
                v_up = r_data / cost
                score += min(expected_requests(d_hat[g], combo[g], v_unsc[g]), v_up)
            key = (-score, r_rach, combo)
            if best is None or key < best[0]:
                best = (key, action)
        self._last_action = best[1]
        return best[1]
