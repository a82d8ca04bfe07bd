"""Geometry, link budget, coverage-group assignment and preamble detection.

The channel is power-law path loss with Rayleigh flat fading. A preamble is
four symbol groups, repeated ``n_repe`` times with frequency hopping; each
symbol group sees an independent unit-mean exponential fading draw, so one
repetition is detected when all four symbol groups clear the SNR threshold
and the preamble is detected when at least one repetition is.
"""

from dataclasses import dataclass

import numpy as np

from .config import N_GROUPS, SimConfig, db_to_linear, dbm_to_mw
from .errors import ContractViolation

SYMBOL_GROUPS_PER_REP = 4


def place_devices(n: int, radius_km: float, rng: np.random.Generator) -> np.ndarray:
    """Radial distances of n points uniform on the disk (density 2u/R^2)."""
    return radius_km * np.sqrt(rng.random(n))


def rsrp_mw(u, cfg: SimConfig):
    """Mean received broadcast power at distance u km, in mW."""
    return dbm_to_mw(cfg.bcast_power_dbm) * np.asarray(u, dtype=float) ** (-cfg.path_loss_exponent)


def assign_ce_group(u, cfg: SimConfig):
    """Coverage group from broadcast received power: 0 above the first
    threshold, 1 between the thresholds (inclusive), 2 below the second."""
    p = rsrp_mw(u, cfg)
    t1 = dbm_to_mw(cfg.rsrp_threshold1_dbm)
    t2 = dbm_to_mw(cfg.rsrp_threshold2_dbm)
    group = np.where(p > t1, 0, np.where(p >= t2, 1, 2))
    return group if group.ndim else int(group)


def preamble_tx_power_mw(u, group, cfg: SimConfig):
    """Preamble transmit power: group 0 inverts its path loss up to the power
    cap (target received power ``power_ctrl_target_dbm``); groups 1 and 2
    always transmit at maximum power."""
    u = np.asarray(u, dtype=float)
    p_max = dbm_to_mw(cfg.max_tx_power_dbm)
    inverting = np.minimum(
        dbm_to_mw(cfg.power_ctrl_target_dbm) * u ** cfg.path_loss_exponent, p_max
    )
    power = np.where(np.asarray(group) == 0, inverting, p_max)
    return power if power.ndim else float(power)


@dataclass(frozen=True)
class LinkBudget:
    """Mean uplink link budget of one device for the preamble channel."""

    distance_km: float
    tx_power_mw: float
    rx_mean_power_mw: float
    mean_snr_linear: float

    @staticmethod
    def build(u: float, group: int, cfg: SimConfig) -> "LinkBudget":
        tx = preamble_tx_power_mw(u, group, cfg)
        rx = tx * u ** (-cfg.path_loss_exponent) * db_to_linear(cfg.snr_offset_db)
        return LinkBudget(u, tx, rx, rx / cfg.noise_mw)


def mean_snr_linear(u, group, cfg: SimConfig):
    """Vectorized mean preamble SNR (linear) for distances u and groups."""
    u = np.asarray(u, dtype=float)
    tx = preamble_tx_power_mw(u, group, cfg)
    rx = tx * u ** (-cfg.path_loss_exponent) * db_to_linear(cfg.snr_offset_db)
    return rx / cfg.noise_mw


def detection_probability(link: LinkBudget, n_repe: int, cfg: SimConfig) -> float:
    """Closed form detection probability; oracle for :func:`sample_detection`."""
    return detection_probability_linear(link.mean_snr_linear, n_repe, cfg.snr_threshold_linear)


def detection_probability_linear(mean_snr, n_repe: int, gamma_th_linear: float):
    """P(at least one of n_repe repetitions has all symbol groups >= threshold)
    under i.i.d. unit-mean exponential fading per symbol group."""
    mean_snr = np.asarray(mean_snr, dtype=float)
    p_sg = np.exp(-gamma_th_linear / mean_snr)
    p = 1.0 - (1.0 - p_sg ** SYMBOL_GROUPS_PER_REP) ** n_repe
    return p if p.ndim else float(p)


def sample_detection(link: LinkBudget, n_repe: int, cfg: SimConfig,
                     rng: np.random.Generator) -> bool:
    """Draw the per-symbol-group fading and decide detection for one preamble."""
    result = sample_detection_many(
        np.array([link.mean_snr_linear]), n_repe, cfg.snr_threshold_linear, rng
    )
    return bool(result[0])


def sample_detection_many(mean_snr: np.ndarray, n_repe: int, gamma_th_linear: float,
                          rng: np.random.Generator) -> np.ndarray:
    """Vectorized detection events: 4 * n_repe exponential draws per device."""
    if np.any(mean_snr <= 0):
        raise ContractViolation("mean SNR must be positive")
    n = mean_snr.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    fading = rng.exponential(size=(n, n_repe, SYMBOL_GROUPS_PER_REP))
    snr = mean_snr[:, None, None] * fading
    rep_ok = np.all(snr >= gamma_th_linear, axis=2)
    return np.any(rep_ok, axis=1)


def ce_boundaries_km(cfg: SimConfig) -> tuple:
    """Distances at which the coverage group changes under the defaults."""
    p0 = cfg.bcast_power_dbm
    eta = cfg.path_loss_exponent
    b1 = 10.0 ** ((p0 - cfg.rsrp_threshold1_dbm) / (10.0 * eta))
    b2 = 10.0 ** ((p0 - cfg.rsrp_threshold2_dbm) / (10.0 * eta))
    return b1, b2


def expected_group_shares(cfg: SimConfig) -> np.ndarray:
    """Area fractions of the three coverage rings on the cell disk."""
    b1, b2 = ce_boundaries_km(cfg)
    r = cfg.cell_radius_km
    b1, b2 = min(b1, r), min(b2, r)
    shares = np.array([b1 ** 2, b2 ** 2 - b1 ** 2, r ** 2 - b2 ** 2]) / r ** 2
    return shares


def group_mean_snr(cfg: SimConfig) -> np.ndarray:
    """Mean SNR (linear) at each group's outer edge; diagnostic helper."""
    b1, b2 = ce_boundaries_km(cfg)
    edges = [min(b1, cfg.cell_radius_km), min(b2, cfg.cell_radius_km), cfg.cell_radius_km]
    return np.array([mean_snr_linear(e, g, cfg) for g, e in enumerate(edges)])
