import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hydrolab.errors import AsymmetryError, EmptySiteError, NormalizationError, ShapeError
from hydrolab.lattice import (Configuration, Torus, block_average, empirical_pairing,
                              l1_distance, load_snapshot, nearest_neighbor_kernel,
                              save_snapshot, validate_kernel)
from hydrolab.rates import linear_rate, piecewise_rate


class TestKernel:
    def test_nearest_neighbor_1d(self):
        k = nearest_neighbor_kernel(1)
        assert np.allclose(k.gamma, 0.0)
        assert np.allclose(k.A, [[0.5]])
        assert k.is_symmetric

    def test_nearest_neighbor_2d(self):
        k = nearest_neighbor_kernel(2)
        assert np.allclose(k.gamma, [0.0, 0.0])
        assert np.allclose(k.A, np.diag([0.25, 0.25]))

    def test_asymmetric_rejected_under_parabolic(self):
        with pytest.raises(AsymmetryError):
            validate_kernel([((1,), 1.0)], parabolic=True)
        k = validate_kernel([((1,), 1.0)], parabolic=False)
        assert np.allclose(k.gamma, [1.0])
        assert not k.is_symmetric

    def test_normalization(self):
        with pytest.raises(NormalizationError):
            validate_kernel([((1,), 0.5), ((-1,), 0.4)])

    def test_zero_displacement_rejected(self):
        with pytest.raises(ValueError):
            validate_kernel([((0,), 0.5), ((1,), 0.5)])

    def test_A_positive_definite_for_nn(self):
        for d in (1, 2):
            A = nearest_neighbor_kernel(d).A
            assert np.allclose(A, A.T)
            assert np.all(np.linalg.eigvalsh(A) > 0.0)


class TestTorus:
    def test_wraparound_1d(self):
        t = Torus(1, 8)
        assert t.shift_index(7, (1,)) == 0
        assert t.shift_index(0, (-1,)) == 7

    def test_wraparound_2d(self):
        t = Torus(2, 4)
        assert t.shift_index(t.index((3, 3)), (1, 1)) == t.index((0, 0))

    def test_distance_wraps(self):
        t = Torus(1, 8)
        assert t.distance(1, 6) == 3
        t2 = Torus(2, 6)
        assert t2.distance(t2.index((0, 0)), t2.index((5, 3))) == 1 + 3


class TestConfiguration:
    def test_jump_conserves_mass(self):
        c = Configuration(Torus(1, 2), [2, 0], linear_rate())
        c.apply_jump(0, 1)
        assert list(c.eta) == [1, 1]
        assert c.total_mass == 2

    def test_jump_updates_rate(self):
        c = Configuration(Torus(1, 2), [1, 0], linear_rate())
        before = c.total_rate
        c.apply_jump(0, 1)
        assert c.total_rate == pytest.approx(before)  # g(0)+g(1) both sides
        assert c.recompute_caches() == (1, 1.0)

    def test_empty_site_error(self):
        c = Configuration(Torus(1, 2), [0, 1], linear_rate())
        with pytest.raises(EmptySiteError):
            c.apply_jump(0, 1)

    @given(st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=5, deadline=None)
    def test_cache_coherence_random_jumps(self, seed):
        rng = np.random.default_rng(seed)
        rate = piecewise_rate()
        torus = Torus(1, 16)
        c = Configuration(torus, rng.integers(0, 5, torus.n_sites), rate)
        for _ in range(10_000):
            occupied = np.flatnonzero(c.eta)
            x = int(rng.choice(occupied))
            y = torus.shift_index(x, (int(rng.choice([-1, 1])),))
            c.apply_jump(x, y)
        mass, total = c.recompute_caches()
        assert mass == c.total_mass
        assert total == pytest.approx(c.total_rate, abs=1e-9)


class TestDistancesAndAverages:
    def test_l1_examples(self):
        t = Torus(1, 3)
        r = linear_rate()
        a = Configuration(t, [2, 0, 1], r)
        b = Configuration(t, [1, 1, 1], r)
        assert l1_distance(a, a) == 0
        assert l1_distance(a, b) == 2
        t2 = Torus(1, 2)
        assert l1_distance(Configuration(t2, [3, 0], r),
                           Configuration(t2, [0, 3], r)) == 6

    def test_l1_shape_error(self):
        r = linear_rate()
        with pytest.raises(ShapeError):
            l1_distance(Configuration(Torus(1, 2), [1, 0], r),
                        Configuration(Torus(1, 3), [1, 0, 0], r))

    def test_block_average_constant(self):
        c = Configuration(Torus(1, 7), [3] * 7, linear_rate())
        for ell in (0, 1, 3):
            assert block_average(c, lambda k: k, 2, ell) == pytest.approx(3.0)

    def test_block_average_window(self):
        c = Configuration(Torus(1, 5), [0, 1, 2, 3, 4], linear_rate())
        assert block_average(c, lambda k: k, 2, 1) == pytest.approx(2.0)
        # identity observable as an array behaves the same
        assert block_average(c, np.arange(10.0), 2, 1) == pytest.approx(2.0)

    def test_block_average_periodic(self):
        c = Configuration(Torus(1, 5), [0, 1, 2, 3, 4], linear_rate())
        assert block_average(c, lambda k: k, 0, 1) == pytest.approx((4 + 0 + 1) / 3)

    def test_empirical_pairing(self):
        t = Torus(1, 2)
        c = Configuration(t, [1, 3], linear_rate())
        assert empirical_pairing(c, [1.0, 1.0]) == pytest.approx(2.0)  # mass/N
        assert empirical_pairing(c, [1.0, -1.0]) == pytest.approx(-1.0)
        zero = Configuration(t, [0, 0], linear_rate())
        assert empirical_pairing(zero, [5.0, -3.0]) == 0.0

    def test_empirical_pairing_shape(self):
        c = Configuration(Torus(1, 2), [1, 3], linear_rate())
        with pytest.raises(ShapeError):
            empirical_pairing(c, [1.0, 2.0, 3.0])


def test_snapshot_round_trip(tmp_path):
    rate = linear_rate()
    torus = Torus(2, 4)
    rng = np.random.default_rng(7)
    c = Configuration(torus, rng.integers(0, 6, torus.n_sites), rate)
    path = tmp_path / "snap.csv"
    save_snapshot(path, c)
    c2 = load_snapshot(path, torus, rate)
    assert np.array_equal(c.eta, c2.eta)
    assert c2.total_mass == c.total_mass
