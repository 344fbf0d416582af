import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from crowdfind._rng import substream
from crowdfind.config import SimConfig
from crowdfind.protocol import InvalidParameter
from crowdfind.world import Deployment, Location, deploy


def brute_neighbors(pos, d, R):
    dist = np.hypot(pos[:, 0] - pos[d, 0], pos[:, 1] - pos[d, 1])
    return {int(i) for i in np.flatnonzero(dist <= R) if i != d}


def brute_cover(pos, loc, R):
    dist = np.hypot(pos[:, 0] - loc[0], pos[:, 1] - loc[1])
    return {int(i) for i in np.flatnonzero(dist <= R)}


class TestDeploy:
    def test_single_detector(self):
        dep = deploy(SimConfig(C=1, side=100.0, lam=1), np.random.default_rng(0))
        assert dep.C == 1
        assert dep.neighbors(0) == frozenset()

    def test_positions_inside_square(self):
        cfg = SimConfig(C=500, side=300.0)
        dep = deploy(cfg, np.random.default_rng(3))
        assert dep.positions.min() >= 0 and dep.positions.max() <= 300.0
        x, y = dep.lost_tag[1]
        assert 0 <= x <= 300 and 0 <= y <= 300

    def test_fp_mode_has_no_tag(self):
        dep = deploy(SimConfig(C=50, side=200.0, fp_mode=True), np.random.default_rng(1))
        assert dep.lost_tag is None
        assert dep.covering_detectors() == frozenset()

    def test_rejects_bad_dimensions(self):
        cfg = SimConfig(C=10, side=100.0)
        object.__setattr__(cfg, "side", -1.0)
        with pytest.raises(InvalidParameter):
            deploy(cfg, np.random.default_rng(0))
        with pytest.raises(InvalidParameter):
            Deployment(np.zeros((2, 2)), 10.0, 0.0)

    @pytest.mark.slow
    def test_mean_neighbor_count_at_full_scale(self):
        # interior detectors see the full disk; edge loss is about 4R/(pi side) of it
        cfg = SimConfig()
        means = []
        for s in range(100):
            dep = deploy(cfg, substream(s, "deploy"))
            inner = np.all((dep.positions > cfg.R) & (dep.positions < cfg.side - cfg.R), axis=1)
            idx = np.flatnonzero(inner)[:300]
            means.append(np.mean([dep.neighbor_array(d).size for d in idx]))
        expected = math.pi * cfg.R**2 * (cfg.C - 1) / cfg.side**2
        assert abs(np.mean(means) - expected) < 0.05 * expected

    def test_poisson_mode_count_varies(self):
        cfg = SimConfig(C=50, side=2000.0, placement="poisson")
        counts = {deploy(cfg, np.random.default_rng(s)).C for s in range(20)}
        assert len(counts) > 1

    def test_subregion_counts_fit_poisson(self):
        # a 100x100 patch of a 1000x1000 square holding 1000 points: mean 10
        cfg = SimConfig(C=1000, side=1000.0, placement="poisson")
        counts = []
        for s in range(1500):
            pos = deploy(cfg, np.random.default_rng(s)).positions
            counts.append(int(np.sum((pos[:, 0] < 100) & (pos[:, 1] < 100))))
        counts = np.array(counts)
        mean = 10.0
        edges = np.arange(3, 19)
        observed = [np.sum(counts <= edges[0])]
        expected = [stats.poisson.cdf(edges[0], mean)]
        for e in edges[1:]:
            observed.append(np.sum(counts == e))
            expected.append(stats.poisson.pmf(e, mean))
        observed.append(np.sum(counts > edges[-1]))
        expected.append(stats.poisson.sf(edges[-1], mean))
        expected = np.array(expected) * counts.size
        assert stats.chisquare(observed, expected).pvalue > 0.001


class TestNeighbors:
    def test_boundary_inside(self):
        dep = Deployment(np.array([[10.0, 10.0], [10.0 + 50.0 - 1e-9, 10.0]]), 100.0, 50.0)
        assert dep.neighbors(0) == {1} and dep.neighbors(1) == {0}

    def test_boundary_outside(self):
        dep = Deployment(np.array([[10.0, 10.0], [10.0 + 50.0 + 1e-9, 10.0]]), 100.0, 50.0)
        assert dep.neighbors(0) == frozenset()

    def test_exact_distance_included(self):
        dep = Deployment(np.array([[0.0, 0.0], [30.0, 40.0]]), 100.0, 50.0)
        assert dep.neighbors(0) == {1}

    def test_out_of_range(self):
        dep = Deployment(np.zeros((3, 2)), 10.0, 1.0)
        with pytest.raises(IndexError):
            dep.neighbors(3)
        with pytest.raises(IndexError):
            dep.neighbors(-1)

    def test_random_matches_brute_force(self):
        dep = deploy(SimConfig(C=200, side=300.0), np.random.default_rng(11))
        for d in range(dep.C):
            assert dep.neighbors(d) == brute_neighbors(dep.positions, d, dep.R)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 500), st.floats(20.0, 800.0), st.floats(1.0, 120.0), st.integers(0, 2**32))
    def test_grid_matches_brute_force(self, C, side, R, seed):
        pos = np.random.default_rng(seed).uniform(0, side, size=(C, 2))
        dep = Deployment(pos, side, R)
        table = dep.neighbor_table()
        for d in range(C):
            assert set(table[d].tolist()) == brute_neighbors(pos, d, R)

    def test_never_contains_self(self):
        dep = Deployment(np.zeros((4, 2)), 10.0, 1.0)
        for d in range(4):
            assert d not in dep.neighbors(d)
            assert dep.neighbors(d) == set(range(4)) - {d}


class TestCovering:
    def test_colocated_detector_included(self):
        pos = np.array([[5.0, 5.0], [90.0, 90.0]])
        dep = Deployment(pos, 100.0, 10.0, lost_tag=(1, Location(5.0, 5.0)))
        assert 0 in dep.covering_detectors()

    def test_far_tag_uncovered(self):
        pos = np.array([[5.0, 5.0], [90.0, 90.0]])
        dep = Deployment(pos, 100.0, 10.0)
        assert dep.covering_detectors((50.0, 50.0)) == frozenset()

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 300), st.integers(0, 2**32))
    def test_random_matches_brute_force(self, C, seed):
        rng = np.random.default_rng(seed)
        pos = rng.uniform(0, 400, size=(C, 2))
        loc = tuple(rng.uniform(0, 400, size=2))
        dep = Deployment(pos, 400.0, 50.0)
        assert dep.covering_detectors(loc) == brute_cover(pos, loc, 50.0)


@pytest.fixture(scope="module")
def dep():
    return deploy(SimConfig(C=625, side=500.0), np.random.default_rng(5))


class TestDummyElection:
    def test_q_zero(self, dep):
        rng = np.random.default_rng(0)
        assert all(len(dep.elect_dummies(0, d, 0.0, rng)) == 0 for d in range(50))

    def test_q_one(self, dep):
        rng = np.random.default_rng(0)
        for d in range(50):
            e = dep.elect_dummies(0, d, 1.0, rng)
            assert set(e.members) == dep.neighbors(d)
            assert d not in e.members
            assert len(e.pseudonyms) == len(e.members)

    def test_bad_q(self, dep):
        with pytest.raises(InvalidParameter):
            dep.elect_dummies(0, 0, 1.5, np.random.default_rng(0))

    def test_mean_size_binomial(self):
        # a broadcaster with 20 neighbors, q=0.9
        pos = np.vstack([[50.0, 50.0], np.random.default_rng(1).uniform(45, 55, size=(20, 2))])
        dep = Deployment(pos, 100.0, 50.0)
        rng = np.random.default_rng(7)
        sizes = np.array([len(dep.elect_dummies(t, 0, 0.9, rng)) for t in range(10_000)])
        sigma = math.sqrt(20 * 0.9 * 0.1 / sizes.size)
        assert abs(sizes.mean() - 18.0) < 3 * sigma
        observed = np.bincount(sizes, minlength=21)
        expected = stats.binom.pmf(np.arange(21), 20, 0.9) * sizes.size
        low = expected < 5
        obs = np.append(observed[~low], observed[low].sum())
        exp = np.append(expected[~low], expected[low].sum())
        assert stats.chisquare(obs, exp).pvalue > 0.001

    def test_fresh_pseudonyms(self, dep):
        rng = np.random.default_rng(2)
        a = dep.elect_dummies(0, 3, 1.0, rng)
        b = dep.elect_dummies(1, 3, 1.0, rng)
        assert set(a.pseudonyms).isdisjoint(b.pseudonyms)

    def test_round_election_subset_of_neighbors(self, dep):
        owners, members, pseudo = dep.elect_round(0, 0.5, np.random.default_rng(3))
        assert owners.size == members.size == pseudo.size
        assert np.all(owners != members)
        for o, m in zip(owners[:500], members[:500]):
            assert int(m) in dep.neighbors(int(o))

    def test_round_election_q_one_is_all_pairs(self, dep):
        owners, _, _ = dep.elect_round(0, 1.0, np.random.default_rng(3))
        assert owners.size == sum(a.size for a in dep.neighbor_table())


class TestZones:
    def test_single_zone(self):
        dep = Deployment(np.random.default_rng(0).uniform(0, 99.9, size=(30, 2)), 100.0, 10.0, zone_size=100.0)
        assert set(dep.zones()) == {(0, 0)}

    def test_origin(self):
        dep = Deployment(np.array([[0.0, 0.0]]), 100.0, 10.0)
        assert dep.zone_of(0) == (0, 0)

    def test_floor_rule(self):
        dep = deploy(SimConfig(C=100, side=2000.0), np.random.default_rng(4))
        for d in range(dep.C):
            x, y = dep.positions[d]
            assert dep.zone_of(d) == (math.floor(x / 250.0), math.floor(y / 250.0))


class TestTextFormat:
    def test_round_trip(self):
        dep = deploy(SimConfig(C=40, side=300.0), np.random.default_rng(9))
        back = Deployment.from_text(dep.to_text())
        assert np.array_equal(back.positions, dep.positions)
        assert back.lost_tag == dep.lost_tag
        assert (back.side, back.R, back.zone_size) == (dep.side, dep.R, dep.zone_size)

    def test_round_trip_without_tag(self):
        dep = deploy(SimConfig(C=5, side=300.0, fp_mode=True), np.random.default_rng(9))
        assert Deployment.from_text(dep.to_text()).lost_tag is None

    def test_one_line_per_detector(self):
        dep = deploy(SimConfig(C=7, side=300.0), np.random.default_rng(9))
        rows = [ln for ln in dep.to_text().splitlines() if not ln.startswith("#")]
        assert [int(r.split(",")[0]) for r in rows] == list(range(7))
