import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfgft.errors import UndefinedSNRError
from sfgft.sensors import (
    NoiseSpec,
    SensorField,
    SignalSpec,
    add_noise,
    cap_snr,
    eval_signal,
    grid_side,
    place_sensors,
    sample_random,
    sample_uniform_grid,
    snr_db,
    standard_normal,
)


def brute_grid(points, m):
    g = int(math.floor(math.sqrt(m) + 0.5))
    chosen = set()
    for a in range(g):
        for b in range(g):
            cx, cy = (a + 0.5) / g, (b + 0.5) / g
            best, best_d = None, math.inf
            for i, (x, y) in enumerate(points):
                d = (x - cx) ** 2 + (y - cy) ** 2
                if d < best_d:
                    best, best_d = i, d
            chosen.add(best)
    return sorted(chosen)


# ---------------------------------------------------------------- placement

def test_placement_deterministic_and_in_square():
    a = place_sensors(300, 17)
    b = place_sensors(300, 17)
    assert np.array_equal(a.positions, b.positions)
    assert a.positions.shape == (300, 2)
    assert np.all((a.positions >= 0) & (a.positions <= 1))
    assert not np.array_equal(a.positions, place_sensors(300, 18).positions)


def test_placement_mean_is_centered():
    pos = place_sensors(10_000, 3).positions
    assert np.all(np.abs(pos.mean(axis=0) - 0.5) <= 0.02)


def test_field_validation():
    with pytest.raises(ValueError):
        SensorField([[0.5, 0.5]])
    with pytest.raises(ValueError):
        SensorField([[0.5, 1.5], [0.1, 0.1]])
    with pytest.raises(ValueError):
        place_sensors(1, 0)


# ---------------------------------------------------------------- signal & noise

def test_signal_examples():
    f = SensorField([[0.0, 0.3], [0.25, 0.9], [0.5, 0.1], [1.0, 0.7]])
    assert np.array_equal(eval_signal(f, SignalSpec(0.0)), np.ones(4))
    y = eval_signal(f, SignalSpec(1.0))
    assert np.allclose(y, [1.0, 0.0, -1.0, 1.0], atol=1e-15)


def test_signal_ignores_y_and_order():
    pos = place_sensors(50, 5).positions
    shifted = pos.copy()
    shifted[:, 1] = np.random.default_rng(0).random(50)
    spec = SignalSpec(2.5)
    assert np.array_equal(eval_signal(SensorField(pos), spec), eval_signal(SensorField(shifted), spec))
    perm = np.random.default_rng(1).permutation(50)
    assert np.array_equal(eval_signal(SensorField(pos[perm]), spec), eval_signal(SensorField(pos), spec)[perm])


def test_signal_rejects_bad_omega():
    for bad in (-1.0, math.nan, math.inf):
        with pytest.raises(ValueError):
            SignalSpec(bad)


def test_noise_zero_sigma_is_identity_copy():
    x = np.linspace(-1, 1, 7)
    y = add_noise(x, NoiseSpec(0.0, 9))
    assert np.array_equal(x, y) and y is not x


def test_noise_variance():
    y = add_noise(np.zeros(100_000), NoiseSpec(0.2, 11))
    assert 0.038 <= y.var() <= 0.042
    assert abs(y.mean()) <= 0.005


def test_noise_deterministic_per_seed():
    x = np.zeros(20)
    assert np.array_equal(add_noise(x, NoiseSpec(0.3, 4)), add_noise(x, NoiseSpec(0.3, 4)))
    assert not np.array_equal(add_noise(x, NoiseSpec(0.3, 4)), add_noise(x, NoiseSpec(0.3, 5)))


def test_box_muller_moments_and_prefix():
    z = standard_normal(8, 200_001)
    assert z.size == 200_001 and np.all(np.isfinite(z))
    assert abs(z.mean()) <= 0.01
    assert abs(z.var() - 1.0) <= 0.015
    assert abs(np.mean(np.abs(z) < 1.0) - 0.6827) <= 0.005
    # odd sizes drop the trailing draw of the last pair
    assert np.array_equal(standard_normal(8, 5), standard_normal(8, 6)[:5])


def test_negative_sigma_rejected():
    with pytest.raises(ValueError):
        NoiseSpec(-0.1)


# ---------------------------------------------------------------- random sampling

def test_random_sampling_examples():
    p = sample_random(10, 9, 0)
    assert p.size == 9 and p.complement.size == 1
    assert sample_random(10, 3, 5).sample_set.tolist() == sample_random(10, 3, 5).sample_set.tolist()
    for bad in (0, 10, 11):
        with pytest.raises(ValueError):
            sample_random(10, bad, 0)


def test_random_sampling_is_uniform():
    counts = np.zeros(10)
    for seed in range(10_000):
        counts[sample_random(10, 3, seed).sample_set] += 1
    assert np.all(np.abs(counts / 10_000 - 0.3) <= 0.02)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 200), st.data())
def test_random_sampling_properties(n, data):
    m = data.draw(st.integers(1, n - 1))
    p = sample_random(n, m, data.draw(st.integers(0, 2**63)))
    s = p.sample_set
    assert s.size == m and np.all(np.diff(s) > 0) and s[0] >= 0 and s[-1] < n


# ---------------------------------------------------------------- grid sampling

def test_grid_side():
    assert [grid_side(m) for m in (1, 2, 3, 4, 6, 7, 100, 110, 150)] == [1, 1, 2, 2, 2, 3, 10, 10, 12]


def test_grid_single_cell_takes_nearest_to_center():
    f = SensorField([[0.1, 0.1], [0.45, 0.55], [0.9, 0.2]])
    assert sample_uniform_grid(f, 1).sample_set.tolist() == [1]


def test_grid_duplicates_collapse():
    # every cell center of a 2x2 grid is closest to sensor 0
    f = SensorField([[0.45, 0.5], [0.0, 0.0]])
    assert sample_uniform_grid(f, 4).sample_set.tolist() == [0]


def test_grid_ties_go_to_lower_index():
    f = SensorField([[0.25, 0.5], [0.75, 0.5], [0.0, 0.0]])
    assert sample_uniform_grid(f, 1).sample_set.tolist() == [0]


def test_grid_selecting_everything_raises():
    f = SensorField([[0.25, 0.25], [0.75, 0.75]])
    with pytest.raises(ValueError, match="every sensor"):
        sample_uniform_grid(f, 4)


def test_grid_500_sensors_matches_brute_force():
    f = place_sensors(500, 21)
    p = sample_uniform_grid(f, 100)
    assert 95 <= p.size <= 100
    assert p.sample_set.tolist() == brute_grid(f.positions.tolist(), 100)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_grid_matches_brute_force_property(seed, m):
    f = place_sensors(120, seed)
    p = sample_uniform_grid(f, m)
    assert p.sample_set.tolist() == brute_grid(f.positions.tolist(), m)
    assert p.size <= grid_side(m) ** 2


def test_grid_is_permutation_equivariant():
    f = place_sensors(200, 2)
    perm = np.random.default_rng(4).permutation(200)
    base = set(sample_uniform_grid(f, 36).sample_set.tolist())
    moved = sample_uniform_grid(SensorField(f.positions[perm]), 36).sample_set
    assert {int(perm[i]) for i in moved} == base


# ---------------------------------------------------------------- snr

def test_snr_examples():
    assert snr_db([1.0, 1.0], [0.0, 0.0]) == pytest.approx(0.0, abs=1e-12)
    assert snr_db([1.0, 1.0], [1.0, 0.0]) == pytest.approx(3.0103, abs=1e-4)
    assert snr_db([2.0, -1.0], [2.0, -1.0]) == math.inf
    assert cap_snr(math.inf) == 300.0 and cap_snr(12.5) == 12.5


def test_snr_eval_set_restricts():
    truth = np.array([5.0, 1.0, 1.0])
    est = np.array([-100.0, 0.0, 0.0])
    assert snr_db(truth, est, eval_set=[1, 2]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError, match="empty"):
        snr_db(truth, est, eval_set=[])


def test_snr_zero_truth_raises():
    with pytest.raises(UndefinedSNRError, match="undefined SNR"):
        snr_db([0.0, 0.0], [1.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_snr_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 10))
    assert snr_db(scale * x, scale * y) == pytest.approx(snr_db(x, y), abs=1e-9)
