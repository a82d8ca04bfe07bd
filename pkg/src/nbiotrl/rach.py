"""Random-access contention.

Within one TTI a coverage group offers ``n_rach * f_prea`` random-access
opportunities (RAOs). Every attempting device picks one uniformly. A RAO
with a single chooser succeeds iff that device's preamble is detected; a
RAO with two or more choosers fails for all of them, and counts as a
collided RAO iff at least one of its choosers was individually detected
(otherwise the base station saw nothing and the RAO looks idle). Idle RAOs
are the ones the base station observed as unused.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .phy import sample_detection_many


@dataclass
class RachOutcome:
    """Per-group result of one TTI's random access."""

    n_rao: int
    v_collided: int = 0
    v_success: int = 0
    v_idle: int = 0
    success_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    failed_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def check(self):
        if self.v_collided + self.v_success + self.v_idle != self.n_rao:
            raise ContractViolation(
                f"RAO conservation violated: {self.v_collided}+{self.v_success}"
                f"+{self.v_idle} != {self.n_rao}")
        if self.v_success != len(self.success_ids):
            raise ContractViolation("success count does not match success ids")


def classify_preamble(detected_flags) -> str:
    """Reference classification of one RAO given the detection flags of its
    choosers: 'idle', 'success' (exactly one chooser, detected) or
    'collision' (two or more choosers, at least one detected). A lone
    undetected chooser and an all-undetected pile-up both look idle."""
    flags = list(detected_flags)
    if len(flags) == 0:
        return "idle"
    if len(flags) == 1:
        return "success" if flags[0] else "idle"
    return "collision" if any(flags) else "idle"


def run_rach_group(ids: np.ndarray, mean_snr: np.ndarray, n_rach: int, f_prea: int,
                   n_repe: int, gamma_th_linear: float,
                   rng_choice: np.random.Generator,
                   rng_fading: np.random.Generator) -> RachOutcome:
    """Simulate one TTI of random access for one coverage group.

    ``ids`` are the attempting device ids (ascending), ``mean_snr`` their
    mean received SNRs aligned with ``ids``. Consumes one uniform RAO choice
    per device from ``rng_choice``, then the per-symbol-group fading block
    from ``rng_fading``, in id order, regardless of outcome.
    """
    n_rao = n_rach * f_prea
    if n_rao <= 0:
        raise ContractViolation("group must offer at least one RAO")
    out = RachOutcome(n_rao=n_rao)
    m = len(ids)
    if m == 0:
        out.v_idle = n_rao
        out.check()
        return out

    rao = rng_choice.integers(0, n_rao, size=m)
    detected = sample_detection_many(mean_snr, n_repe, gamma_th_linear, rng_fading)

    choosers = np.bincount(rao, minlength=n_rao)
    detected_per_rao = np.bincount(rao[detected], minlength=n_rao)

    singleton = choosers == 1
    won = singleton[rao] & detected
    out.success_ids = ids[won]
    out.failed_ids = ids[~won]
    out.v_success = int(won.sum())
    out.v_collided = int(np.sum((choosers >= 2) & (detected_per_rao >= 1)))
    out.v_idle = n_rao - out.v_success - out.v_collided
    out.check()
    return out
