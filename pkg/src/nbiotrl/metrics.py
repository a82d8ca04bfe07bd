"""Run artifacts: metrics tables, per-episode summaries, manifests.

Everything lands as CSV so runs can be diffed and fed to any plotting
tool. The per-TTI metrics file holds raw integer counters only; identical
run specifications therefore produce byte-identical files.
"""

import csv
import json

from .config import N_GROUPS
from .errors import ContractViolation

METRICS_COLUMNS = (
    "episode", "tti", "group", "v_cp", "v_sp", "v_ip", "v_succ", "v_unsc",
    "n_rach", "f_prea", "n_repe", "reward", "cum_served", "arrivals",
    "drops_rach", "drops_rrc",
)

SUMMARY_COLUMNS = ("episode", "served", "arrivals", "drops_rach", "drops_rrc")


def write_metrics(path, episode_stats):
    """One row per (episode, tti, group); ``cum_served`` accumulates the
    reward within each episode."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRICS_COLUMNS)
        for ep, stats in enumerate(episode_stats):
            cum = 0
            last_tti = None
            for row in stats.rows():
                if row["tti"] != last_tti:
                    cum += row["reward"]
                    last_tti = row["tti"]
                out = dict(row, episode=ep, cum_served=cum)
                w.writerow([out[c] for c in METRICS_COLUMNS])


def write_summary(path, episode_stats):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for ep, stats in enumerate(episode_stats):
            served = arrivals = d_rach = d_rrc = 0
            for r in stats.records:
                served += r.reward
                arrivals += int(r.arrivals.sum())
                d_rach += int(r.drops_rach.sum())
                d_rrc += int(r.drops_rrc.sum())
            w.writerow([ep, served, arrivals, d_rach, d_rrc])


def write_manifest(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def summarize(metrics_paths, out_path):
    """Aggregate one or more metrics files into a per-TTI table: mean
    served devices and arrivals per TTI, and per-group mean repetitions and
    RAO counts (n_rach x f_prea). Pure function of the input files."""
    sums = {}
    counts = {}
    for path in metrics_paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != METRICS_COLUMNS:
                raise ContractViolation(f"unexpected metrics schema in {path}")
            for row in reader:
                tti = int(row["tti"])
                g = int(row["group"])
                acc = sums.setdefault(tti, [0.0] * (2 + 2 * N_GROUPS))
                if g == 0:
                    # per-TTI quantities counted once, on the group-0 row
                    acc[0] += int(row["reward"])
                    counts[tti] = counts.get(tti, 0) + 1
                acc[1] += int(row["arrivals"])
                acc[2 + g] += int(row["n_repe"])
                acc[2 + N_GROUPS + g] += int(row["n_rach"]) * int(row["f_prea"])
    header = (["tti", "mean_v_succ", "mean_arrivals"]
              + [f"mean_repe_g{g}" for g in range(N_GROUPS)]
              + [f"mean_rao_g{g}" for g in range(N_GROUPS)])
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for tti in sorted(sums):
            n = counts[tti]
            acc = sums[tti]
            w.writerow([tti] + [f"{v / n:.6f}" for v in acc])
    return out_path
