"""Device population lifecycle.

Each device generates a single packet per episode. Its activation TTI is
drawn from a time-limited Beta profile over the episode. After activation
the device retries random access every TTI (plus an optional backoff) until
it connects, escalating its coverage group after too many failures in one
group and dropping the packet after the global attempt limit. A connected
device waits at most ``max_rrc_wait`` TTIs for data resources.

The population is stored as parallel numpy arrays for speed; the scalar
transition functions (:func:`register_rach_failure` etc.) are the readable
reference semantics and are cross-checked against the vectorized path in the
test suite.
"""

from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np
from scipy.special import betainc

from .config import N_GROUPS, SimConfig
from .errors import ContractViolation


class DeviceState(IntEnum):
    IDLE = 0
    BACKLOGGED = 1
    CONNECTED_WAITING = 2
    SERVED = 3
    DROPPED = 4


@dataclass(frozen=True)
class Device:
    """Snapshot of one device's lifecycle state."""

    id: int
    distance_km: float
    ce_group: int
    state: DeviceState
    attempts_in_ce: int = 0
    attempts_total: int = 0
    rrc_wait: int = 0
    activation_tti: int = 0


@dataclass(frozen=True)
class TrafficProfile:
    beta_a: float = 3.0
    beta_b: float = 4.0
    n_tti: int = 937

    def __post_init__(self):
        if self.beta_a <= 0 or self.beta_b <= 0:
            raise ContractViolation("beta shape parameters must be positive")


def activation_pmf(profile: TrafficProfile) -> np.ndarray:
    """Probability that a device activates in each TTI 1..n_tti: the Beta
    density integrated over the TTI's slice of the episode."""
    grid = np.linspace(0.0, 1.0, profile.n_tti + 1)
    cdf = betainc(profile.beta_a, profile.beta_b, grid)
    pmf = np.diff(cdf)
    return pmf / pmf.sum()


def sample_activation_ttis(n_devices: int, profile: TrafficProfile,
                           rng: np.random.Generator) -> np.ndarray:
    """One activation TTI per device, i.i.d. from the Beta-profile pmf."""
    if profile.n_tti < 1:
        raise ContractViolation("n_tti must be >= 1")
    pmf = activation_pmf(profile)
    return rng.choice(profile.n_tti, size=n_devices, p=pmf) + 1


# ---------------------------------------------------------------------------
# scalar reference transitions
# ---------------------------------------------------------------------------

def register_rach_failure(d: Device, cfg: SimConfig) -> Device:
    """Account one failed access attempt: escalate the coverage group after
    ``max_attempts_per_ce`` attempts within it, drop after
    ``max_attempts_total`` attempts overall."""
    if d.state != DeviceState.BACKLOGGED:
        raise ContractViolation(f"device {d.id} is {d.state.name}, not BACKLOGGED")
    in_ce = d.attempts_in_ce + 1
    total = d.attempts_total + 1
    ce = d.ce_group
    if in_ce >= cfg.max_attempts_per_ce:
        if ce < N_GROUPS - 1:
            ce += 1
        in_ce = 0
    state = DeviceState.DROPPED if total >= cfg.max_attempts_total else d.state
    return replace(d, ce_group=ce, attempts_in_ce=in_ce, attempts_total=total, state=state)


def register_rach_success(d: Device) -> Device:
    """Access succeeded: the device now waits for data resources."""
    if d.state != DeviceState.BACKLOGGED:
        raise ContractViolation(f"device {d.id} is {d.state.name}, not BACKLOGGED")
    return replace(d, state=DeviceState.CONNECTED_WAITING, rrc_wait=0)


def tick_rrc_wait(d: Device, cfg: SimConfig) -> Device:
    """One TTI passed without data resources for a connected device."""
    if d.state != DeviceState.CONNECTED_WAITING:
        raise ContractViolation(f"device {d.id} is {d.state.name}, not CONNECTED_WAITING")
    wait = d.rrc_wait + 1
    if wait >= cfg.max_rrc_wait:
        return replace(d, rrc_wait=wait, state=DeviceState.DROPPED)
    return replace(d, rrc_wait=wait)


# ---------------------------------------------------------------------------
# vectorized population
# ---------------------------------------------------------------------------

class Population:
    """Struct-of-arrays population owned by one environment instance."""

    def __init__(self, cfg: SimConfig, distance_km: np.ndarray, ce_group: np.ndarray,
                 activation_tti: np.ndarray):
        n = cfg.n_devices
        if not (len(distance_km) == len(ce_group) == len(activation_tti) == n):
            raise ContractViolation("population arrays must all have n_devices entries")
        self.cfg = cfg
        self.distance_km = np.asarray(distance_km, dtype=float)
        self.initial_ce = np.asarray(ce_group, dtype=np.int64).copy()
        self.ce_group = self.initial_ce.copy()
        self.activation_tti = np.asarray(activation_tti, dtype=np.int64)
        self.state = np.full(n, DeviceState.IDLE, dtype=np.int8)
        self.attempts_in_ce = np.zeros(n, dtype=np.int64)
        self.attempts_total = np.zeros(n, dtype=np.int64)
        self.rrc_wait = np.zeros(n, dtype=np.int64)
        self.next_attempt_tti = np.zeros(n, dtype=np.int64)
        self.pending_cost = np.zeros(n, dtype=np.int64)

    @property
    def n(self) -> int:
        return len(self.state)

    def device(self, i: int) -> Device:
        return Device(
            id=i,
            distance_km=float(self.distance_km[i]),
            ce_group=int(self.ce_group[i]),
            state=DeviceState(int(self.state[i])),
            attempts_in_ce=int(self.attempts_in_ce[i]),
            attempts_total=int(self.attempts_total[i]),
            rrc_wait=int(self.rrc_wait[i]),
            activation_tti=int(self.activation_tti[i]),
        )

    def activate(self, t: int) -> np.ndarray:
        """Move devices whose activation TTI is t from IDLE to BACKLOGGED;
        returns their per-group counts."""
        ids = np.nonzero((self.state == DeviceState.IDLE) & (self.activation_tti == t))[0]
        self.state[ids] = DeviceState.BACKLOGGED
        return np.bincount(self.ce_group[ids], minlength=N_GROUPS)

    def backlogged_at(self, t: int) -> np.ndarray:
        """Devices attempting random access in TTI t (backoff expired)."""
        mask = (self.state == DeviceState.BACKLOGGED) & (self.next_attempt_tti <= t)
        return np.nonzero(mask)[0]

    def register_rach_failures(self, ids: np.ndarray, t: int) -> np.ndarray:
        """Vectorized :func:`register_rach_failure`; returns per-group counts
        of devices that dropped out of the access procedure."""
        if len(ids) == 0:
            return np.zeros(N_GROUPS, dtype=np.int64)
        if np.any(self.state[ids] != DeviceState.BACKLOGGED):
            raise ContractViolation("RACH failure on a device that is not BACKLOGGED")
        cfg = self.cfg
        self.attempts_in_ce[ids] += 1
        self.attempts_total[ids] += 1
        at_limit = ids[self.attempts_in_ce[ids] >= cfg.max_attempts_per_ce]
        escalate = at_limit[self.ce_group[at_limit] < N_GROUPS - 1]
        self.ce_group[escalate] += 1
        self.attempts_in_ce[at_limit] = 0
        dropped = ids[self.attempts_total[ids] >= cfg.max_attempts_total]
        self.state[dropped] = DeviceState.DROPPED
        survivors = ids[self.state[ids] == DeviceState.BACKLOGGED]
        self.next_attempt_tti[survivors] = t + 1 + cfg.backoff_ttis
        return np.bincount(self.ce_group[dropped], minlength=N_GROUPS)

    def register_rach_successes(self, ids: np.ndarray, cost: np.ndarray):
        if len(ids) == 0:
            return
        if np.any(self.state[ids] != DeviceState.BACKLOGGED):
            raise ContractViolation("RACH success on a device that is not BACKLOGGED")
        self.state[ids] = DeviceState.CONNECTED_WAITING
        self.rrc_wait[ids] = 0
        self.pending_cost[ids] = cost

    def mark_served(self, ids: np.ndarray):
        if len(ids) == 0:
            return
        if np.any(self.state[ids] != DeviceState.CONNECTED_WAITING):
            raise ContractViolation("serving a device that is not CONNECTED_WAITING")
        self.state[ids] = DeviceState.SERVED

    def expire_rrc(self, unserved_ids: np.ndarray) -> tuple:
        """Advance the wait counter of unserved connected devices; drop the
        ones that exhausted their retention window. Returns (retained ids,
        per-group dropped counts)."""
        if len(unserved_ids) == 0:
            return unserved_ids, np.zeros(N_GROUPS, dtype=np.int64)
        if np.any(self.state[unserved_ids] != DeviceState.CONNECTED_WAITING):
            raise ContractViolation("RRC expiry on a device that is not CONNECTED_WAITING")
        self.rrc_wait[unserved_ids] += 1
        expired_mask = self.rrc_wait[unserved_ids] >= self.cfg.max_rrc_wait
        expired = unserved_ids[expired_mask]
        retained = unserved_ids[~expired_mask]
        self.state[expired] = DeviceState.DROPPED
        return retained, np.bincount(self.ce_group[expired], minlength=N_GROUPS)

    def state_counts(self) -> np.ndarray:
        return np.bincount(self.state, minlength=len(DeviceState))

    def check_conservation(self):
        if int(self.state_counts().sum()) != self.n:
            raise ContractViolation("population conservation violated")


def write_activation_schedule(path, pop: Population):
    """Debug export of the activation schedule as CSV rows (tti, device_id)."""
    order = np.argsort(pop.activation_tti, kind="stable")
    with open(path, "w") as fh:
        fh.write("tti,device_id\n")
        for i in order:
            fh.write(f"{pop.activation_tti[i]},{i}\n")
