"""Uplink data scheduling.

After random access the base station shares the TTI's leftover resource
elements among connected devices. The pending pool (fresh successes plus
devices retained from earlier TTIs) is shuffled uniformly and admitted
greedily in that order; scheduling stops at the first device whose resource
cost exceeds what remains, so a large blocker at the head of the queue can
leave later cheap devices unserved within this TTI.

Each device's cost is fixed once, at the TTI its random access succeeded
(data resource elements scale with that TTI's repetition value).
"""

import numpy as np

from .errors import ContractViolation


def greedy_prefix(costs: np.ndarray, budget: int) -> int:
    """Length of the admitted prefix: cumulative cost stays within budget,
    scanning stops at the first entry that does not fit."""
    total = 0
    for k, c in enumerate(costs):
        if c < 0:
            raise ContractViolation("negative resource cost")
        if total + c > budget:
            return k
        total += c
    return len(costs)


def schedule_data(ids: np.ndarray, costs: np.ndarray, budget: int,
                  rng: np.random.Generator):
    """Schedule the pending pool into ``budget`` resource elements.

    Returns ``(served_ids, unserved_ids, re_used)``. Consumes one
    permutation of the pool from ``rng`` (even when the pool fits whole, so
    the stream advances identically either way).
    """
    if budget < 0:
        raise ContractViolation("negative data budget")
    ids = np.asarray(ids, dtype=np.int64)
    costs = np.asarray(costs, dtype=np.int64)
    if len(ids) != len(costs):
        raise ContractViolation("ids and costs must align")
    if len(ids) == 0:
        return ids, ids, 0
    order = rng.permutation(len(ids))
    k = greedy_prefix(costs[order], budget)
    served = ids[order[:k]]
    unserved = ids[order[k:]]
    return served, unserved, int(costs[order[:k]].sum())
