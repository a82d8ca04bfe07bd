import numpy as np
import pytest

from nbiotrl.errors import ContractViolation
from nbiotrl.rach import RachOutcome, classify_preamble, run_rach_group


def test_classify_preamble_cases():
    assert classify_preamble([]) == "idle"
    assert classify_preamble([True]) == "success"
    assert classify_preamble([False]) == "idle"
    assert classify_preamble([True, False]) == "collision"
    assert classify_preamble([True, True, True]) == "collision"
    assert classify_preamble([False, False]) == "idle"


def test_outcome_check_rejects_bad_accounting():
    out = RachOutcome(n_rao=12, v_collided=1, v_success=2, v_idle=8)
    with pytest.raises(ContractViolation):
        out.check()


def test_empty_group_is_all_idle():
    rng = np.random.default_rng(0)
    out = run_rach_group(np.empty(0, dtype=np.int64), np.empty(0), 2, 12, 1,
                        1.0, rng, rng)
    assert (out.v_collided, out.v_success, out.v_idle) == (0, 0, 24)


def test_certain_detection_single_device_succeeds():
    rng = np.random.default_rng(1)
    # threshold 0 makes every fading draw pass
    out = run_rach_group(np.array([7]), np.array([2.0]), 1, 12, 1, 0.0, rng, rng)
    assert out.v_success == 1
    assert out.success_ids.tolist() == [7]
    assert out.v_idle == 11 and out.v_collided == 0


def test_conservation_and_id_partition_fuzz():
    rng = np.random.default_rng(2)
    for _ in range(300):
        m = int(rng.integers(0, 120))
        ids = np.sort(rng.choice(10000, size=m, replace=False)).astype(np.int64)
        snr = rng.uniform(0.05, 30.0, size=m)
        n_rach = int(rng.choice([1, 2, 4]))
        f_prea = int(rng.choice([12, 24, 36, 48]))
        n_repe = int(rng.choice([1, 2, 4, 8]))
        out = run_rach_group(ids, snr, n_rach, f_prea, n_repe, 1.0, rng, rng)
        assert out.v_collided + out.v_success + out.v_idle == n_rach * f_prea
        merged = np.sort(np.concatenate([out.success_ids, out.failed_ids]))
        assert np.array_equal(merged, ids)


def test_two_devices_same_slot_always_fail():
    # single RAO forces both devices onto it; threshold 0 means both are
    # detected, so the slot is collided and neither succeeds
    rng = np.random.default_rng(3)
    out = run_rach_group(np.array([1, 2]), np.array([5.0, 5.0]), 1, 1, 1, 0.0,
                        rng, rng)
    assert out.v_success == 0
    assert out.v_collided == 1
    assert out.failed_ids.tolist() == [1, 2]


def test_undetected_pileup_looks_idle():
    # impossible detection: gigantic threshold
    rng = np.random.default_rng(4)
    out = run_rach_group(np.array([1, 2]), np.array([1e-9, 1e-9]), 1, 1, 1,
                        1e12, rng, rng)
    assert out.v_collided == 0
    assert out.v_idle == 1
    assert out.failed_ids.tolist() == [1, 2]


def test_same_generator_states_reproduce():
    ids = np.arange(40, dtype=np.int64)
    snr = np.linspace(0.5, 8.0, 40)
    a = run_rach_group(ids, snr, 1, 24, 2, 1.0,
                      np.random.default_rng(9), np.random.default_rng(10))
    b = run_rach_group(ids, snr, 1, 24, 2, 1.0,
                      np.random.default_rng(9), np.random.default_rng(10))
    assert a.v_success == b.v_success
    assert np.array_equal(a.success_ids, b.success_ids)
    assert (a.v_collided, a.v_idle) == (b.v_collided, b.v_idle)


def test_singleton_expectation_with_certain_detection():
    # 10 devices on 48 RAOs: P(a given device is alone) = (47/48)^9
    rng_choice = np.random.default_rng(11)
    rng_fading = np.random.default_rng(12)
    ids = np.arange(10, dtype=np.int64)
    snr = np.full(10, 1.0)
    trials = 3000
    total = 0
    for _ in range(trials):
        out = run_rach_group(ids, snr, 1, 48, 1, 0.0, rng_choice, rng_fading)
        total += out.v_success
    expect = 10 * (47 / 48) ** 9
    sigma = np.sqrt(trials * 10 * 0.17)  # loose per-trial variance bound
    assert abs(total - trials * expect) < 3 * sigma
