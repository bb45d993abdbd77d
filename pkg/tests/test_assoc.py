"""Tests for gating, clustering, hypothesis expansion, and enumeration."""

import copy
import math

import numpy as np
import pytest

from coalesce.assoc import (
    MISS,
    AssociationProblem,
    ChildHypothesis,
    ExpandedTrack,
    birth_track,
    build_clusters,
    enumerate_globals,
    expand_hypotheses,
    gate,
    posterior_mixture,
    prune,
    _enumerate_exact,
    _enumerate_kbest,
)
from coalesce.errors import InvalidStateError
from coalesce.gauss import Gaussian, GaussianMixture, LinearGaussianModel
from coalesce.rfscore import (
    BernoulliGaussian,
    GlobalHypothesis,
    Hypothesis,
    IdGen,
    MultiBernoulliMixture,
    Track,
    marginals_from_globals,
)


def cv_model():
    """Planar position-measurement model with a four-dimensional state."""
    f = np.eye(4)
    f[0, 2] = f[1, 3] = 1.0
    q = 0.01 * np.eye(4)
    h = np.zeros((2, 4))
    h[0, 0] = h[1, 1] = 1.0
    r = np.eye(2)
    return LinearGaussianModel(f, q, h, r)


def make_track(idgen, mean, cov, r=0.9):
    g = Gaussian(np.asarray(mean, dtype=float), np.asarray(cov, dtype=float))
    return Track(idgen.track_id(), [Hypothesis(idgen.hyp_id(), BernoulliGaussian(r, g), 1.0)])


def make_problem(tracks, measurements, pd=0.9, lam=1e-4, threshold=16.0):
    return AssociationProblem(
        tracks, np.asarray(measurements, dtype=float), cv_model(), pd, lam, threshold
    )


class TestGate:
    def test_no_measurements_empty_graph(self):
        idgen = IdGen()
        problem = make_problem([make_track(idgen, [0, 0, 0, 0], np.eye(4))], np.empty((0, 2)))
        assert gate(problem).shape == (1, 0)

    def test_origin_measurement_inside_gate(self):
        # Unit state covariance and unit measurement noise give S = 2I, and
        # z at the predicted measurement has squared distance 0.
        idgen = IdGen()
        problem = make_problem(
            [make_track(idgen, [0, 0, 0, 0], np.eye(4))], [[0.0, 0.0]], threshold=9.0
        )
        assert gate(problem)[0, 0]

    def test_distance_just_outside_threshold(self):
        # S = 2I, so z = (sqrt(20), 0) sits at squared Mahalanobis 10.
        idgen = IdGen()
        z = [[math.sqrt(20.0), 0.0]]
        problem = make_problem([make_track(idgen, [0, 0, 0, 0], np.eye(4))], z, threshold=9.0)
        assert not gate(problem)[0, 0]
        problem = make_problem([make_track(idgen, [0, 0, 0, 0], np.eye(4))], z, threshold=10.1)
        assert gate(problem)[0, 0]

    def test_mixture_component_opens_gate(self):
        idgen = IdGen()
        near = Gaussian(np.zeros(4), np.eye(4))
        far = Gaussian(np.array([50.0, 0.0, 0.0, 0.0]), np.eye(4))
        mix = GaussianMixture([0.5, 0.5], [near, far])
        track = Track(
            idgen.track_id(), [Hypothesis(idgen.hyp_id(), BernoulliGaussian(0.5, mix), 1.0)]
        )
        problem = make_problem([track], [[50.0, 0.0]])
        assert gate(problem)[0, 0]

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_direct_mahalanobis(self, seed):
        rng = np.random.default_rng(seed)
        idgen = IdGen()
        model = cv_model()
        tracks = []
        for _ in range(4):
            mean = np.concatenate([rng.normal(0, 10, 2), rng.normal(0, 1, 2)])
            a = rng.normal(0, 1, (4, 4))
            tracks.append(make_track(idgen, mean, a @ a.T + np.eye(4)))
        zs = rng.normal(0, 10, (6, 2))
        problem = make_problem(tracks, zs, threshold=16.0)
        edges = gate(problem)
        for i, track in enumerate(tracks):
            g = track.hypotheses[0].bernoulli.density
            s = model.H @ g.cov @ model.H.T + model.R
            for k, z in enumerate(zs):
                diff = z - model.H @ g.mean
                d2 = diff @ np.linalg.inv(s) @ diff
                assert edges[i, k] == (d2 <= 16.0)


class TestBuildClusters:
    def test_shared_measurement_merges_tracks(self):
        edges = np.array(
            [
                [True, False, False],
                [True, True, False],
                [False, False, False],
            ]
        )
        clusters, unclaimed = build_clusters(edges)
        assert [c.track_indices for c in clusters] == [[0, 1], [2]]
        assert clusters[0].measurement_indices == [0, 1]
        assert clusters[1].measurement_indices == []
        assert unclaimed == [2]

    @pytest.mark.parametrize("seed", range(12))
    def test_partition_invariants(self, seed):
        rng = np.random.default_rng(100 + seed)
        n, m = rng.integers(1, 8), rng.integers(0, 8)
        edges = rng.random((n, m)) < 0.3
        clusters, unclaimed = build_clusters(edges)
        all_tracks = sorted(i for c in clusters for i in c.track_indices)
        assert all_tracks == list(range(n))
        claimed = sorted(k for c in clusters for k in c.measurement_indices)
        assert sorted(claimed + unclaimed) == list(range(m))
        for k in unclaimed:
            assert not edges[:, k].any()
        for c in clusters:
            inside = set(c.track_indices)
            for k in c.measurement_indices:
                owners = set(np.flatnonzero(edges[:, k]).tolist())
                assert owners <= inside and owners

    def test_cross_cluster_edges_absent(self):
        rng = np.random.default_rng(7)
        edges = rng.random((6, 6)) < 0.25
        clusters, _ = build_clusters(edges)
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                for k in clusters[a].measurement_indices:
                    assert not edges[clusters[b].track_indices, k].any()


class TestExpandHypotheses:
    def test_nonexistent_target_single_child(self):
        idgen = IdGen()
        track = make_track(idgen, [0, 0, 0, 0], np.eye(4), r=0.0)
        ex = expand_hypotheses(track, [[0.0, 0.0]], [0], 0.9, 1.0, cv_model(), idgen)
        assert len(ex.children) == 1
        child = ex.children[0]
        assert child.measurement == MISS
        assert child.bernoulli.r == 0.0
        assert child.log_weight == pytest.approx(0.0, abs=1e-15)

    def test_miss_child_existence_and_weight(self):
        idgen = IdGen()
        track = make_track(idgen, [0, 0, 0, 0], np.eye(4), r=0.5)
        ex = expand_hypotheses(track, np.empty((0, 2)), [], 0.7, 1.0, cv_model(), idgen)
        assert len(ex.children) == 1
        child = ex.children[0]
        assert child.bernoulli.r == pytest.approx(0.15 / 0.65, abs=1e-12)
        assert child.log_weight == pytest.approx(math.log(0.65), abs=1e-12)

    def test_sure_detection_weights(self):
        # Prior N(0, I4), H selects position, R = I: S = 2I.  With
        # z = (1, -1), log N = -log(4 pi) - 0.5 and the detect weight is
        # divided by the false-alarm density 2.
        idgen = IdGen()
        track = make_track(idgen, [0, 0, 0, 0], np.eye(4), r=1.0)
        ex = expand_hypotheses(track, [[1.0, -1.0]], [0], 1.0, 2.0, cv_model(), idgen)
        miss, det = ex.children
        assert miss.measurement == MISS
        assert miss.log_weight == -math.inf
        assert miss.bernoulli.r == 0.0
        expected = -math.log(4.0 * math.pi) - 0.5 - math.log(2.0)
        assert det.log_weight == pytest.approx(expected, abs=1e-12)
        assert det.bernoulli.r == 1.0
        np.testing.assert_allclose(
            det.bernoulli.density.mean, [0.5, -0.5, 0.0, 0.0], atol=1e-12
        )
        np.testing.assert_allclose(
            det.bernoulli.density.cov, np.diag([0.5, 0.5, 1.0, 1.0]), atol=1e-12
        )

    def test_mixture_parent_predictive_likelihood(self):
        idgen = IdGen()
        g1 = Gaussian(np.zeros(4), np.eye(4))
        g2 = Gaussian(np.array([4.0, 0.0, 0.0, 0.0]), np.eye(4))
        mix = GaussianMixture([0.3, 0.7], [g1, g2])
        track = Track(
            idgen.track_id(), [Hypothesis(idgen.hyp_id(), BernoulliGaussian(0.8, mix), 1.0)]
        )
        z = np.array([2.0, 1.0])
        ex = expand_hypotheses(track, [z], [0], 0.9, 0.5, cv_model(), idgen)
        det = ex.children[1]

        def log_n(z, mean, cov):
            diff = z - mean
            _, logdet = np.linalg.slogdet(2.0 * math.pi * cov)
            return -0.5 * (logdet + diff @ np.linalg.inv(cov) @ diff)

        s = 2.0 * np.eye(2)
        lik = 0.3 * math.exp(log_n(z, np.zeros(2), s)) + 0.7 * math.exp(
            log_n(z, np.array([4.0, 0.0]), s)
        )
        expected = math.log(0.8) + math.log(0.9) + math.log(lik) - math.log(0.5)
        assert det.log_weight == pytest.approx(expected, abs=1e-10)
        # Posterior component weights are proportional to component likelihoods.
        post = det.bernoulli.density
        w1 = 0.3 * math.exp(log_n(z, np.zeros(2), s))
        np.testing.assert_allclose(post.weights[0], w1 / lik, atol=1e-12)

    def test_zero_false_alarm_density_stays_finite(self):
        idgen = IdGen()
        track = make_track(idgen, [0, 0, 0, 0], np.eye(4), r=1.0)
        ex = expand_hypotheses(track, [[0.0, 0.0]], [0], 1.0, 0.0, cv_model(), idgen)
        assert math.isfinite(ex.children[1].log_weight)
        globals_ = enumerate_globals([ex])
        assert globals_[0].weight == pytest.approx(1.0)
        assert globals_[0].selection == (ex.children[1].hyp_id,)


def simple_child(idgen, weight, measurement, r=0.5):
    g = Gaussian(np.zeros(2), np.eye(2))
    return ChildHypothesis(
        idgen.hyp_id(),
        BernoulliGaussian(r, g),
        math.log(weight) if weight > 0 else -math.inf,
        measurement,
        0,
    )


def brute_force_globals(expanded):
    """Exhaustive product-space enumeration with exclusivity filtering."""
    import itertools

    results = {}
    for combo in itertools.product(*[t.children for t in expanded]):
        used = [c.measurement for c in combo if c.measurement != MISS]
        if len(used) != len(set(used)):
            continue
        results[tuple(c.hyp_id for c in combo)] = math.exp(
            sum(c.log_weight for c in combo)
        )
    total = sum(results.values())
    return {sel: w / total for sel, w in results.items()}


class TestEnumerateGlobals:
    def test_single_track_single_measurement(self):
        idgen = IdGen()
        ex = ExpandedTrack(0, [simple_child(idgen, 0.3, MISS), simple_child(idgen, 0.6, 0)])
        globals_ = enumerate_globals([ex])
        assert len(globals_) == 2
        weights = {g.selection[0]: g.weight for g in globals_}
        assert weights[ex.children[0].hyp_id] == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert weights[ex.children[1].hyp_id] == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_two_tracks_one_shared_measurement(self):
        idgen = IdGen()
        t0 = ExpandedTrack(0, [simple_child(idgen, 0.4, MISS), simple_child(idgen, 0.6, 0)])
        t1 = ExpandedTrack(1, [simple_child(idgen, 0.5, MISS), simple_child(idgen, 0.5, 0)])
        globals_ = enumerate_globals([t0, t1])
        assert len(globals_) == 3
        for g in globals_:
            picked = [
                t.child_by_id(h).measurement for t, h in zip((t0, t1), g.selection)
            ]
            assert picked.count(0) <= 1
        expected = brute_force_globals([t0, t1])
        for g in globals_:
            assert g.weight == pytest.approx(expected[g.selection], abs=1e-12)

    def test_symmetric_cross_has_seven_globals(self):
        idgen = IdGen()
        tracks = []
        for i in range(2):
            tracks.append(
                ExpandedTrack(
                    i,
                    [
                        simple_child(idgen, 0.2, MISS),
                        simple_child(idgen, 0.4, 0),
                        simple_child(idgen, 0.4, 1),
                    ],
                )
            )
        globals_ = enumerate_globals(tracks)
        assert len(globals_) == 7
        expected = brute_force_globals(tracks)
        for g in globals_:
            assert g.weight == pytest.approx(expected[g.selection], abs=1e-12)

    def test_empty_cluster(self):
        globals_ = enumerate_globals([])
        assert len(globals_) == 1
        assert globals_[0].weight == 1.0
        assert globals_[0].selection == ()

    def test_cap_below_one_rejected(self):
        with pytest.raises(ValueError, match="cap"):
            enumerate_globals([], 0)

    def test_zero_weight_everywhere_raises(self):
        idgen = IdGen()
        ex = ExpandedTrack(0, [simple_child(idgen, 0.0, MISS)])
        with pytest.raises(InvalidStateError, match="zero weight"):
            enumerate_globals([ex])

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force_random(self, seed):
        rng = np.random.default_rng(200 + seed)
        idgen = IdGen()
        n, m = int(rng.integers(1, 5)), int(rng.integers(0, 5))
        expanded = []
        for i in range(n):
            children = [simple_child(idgen, float(rng.uniform(0.05, 1.0)), MISS)]
            for k in range(m):
                if rng.random() < 0.6:
                    children.append(simple_child(idgen, float(rng.uniform(0.05, 1.0)), k))
            expanded.append(ExpandedTrack(i, children))
        globals_ = enumerate_globals(expanded, cap=100_000)
        expected = brute_force_globals(expanded)
        assert len(globals_) == len(expected)
        for g in globals_:
            assert g.weight == pytest.approx(expected[g.selection], abs=1e-12)
        total = sum(g.weight for g in globals_)
        assert total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_kbest_equals_exhaustive_at_full_cap(self, seed):
        rng = np.random.default_rng(300 + seed)
        idgen = IdGen()
        expanded = []
        for i in range(3):
            children = [simple_child(idgen, float(rng.uniform(0.05, 1.0)), MISS)]
            for k in range(3):
                children.append(simple_child(idgen, float(rng.uniform(0.05, 1.0)), k))
            expanded.append(ExpandedTrack(i, children))
        exact = _enumerate_exact(expanded, 10_000)
        kbest = _enumerate_kbest(expanded, len(exact))
        exact_map = {sel: lw for lw, sel in exact}
        kbest_map = {sel: lw for lw, sel in kbest}
        assert set(exact_map) == set(kbest_map)
        for sel, lw in exact_map.items():
            assert kbest_map[sel] == pytest.approx(lw, abs=1e-12)

    def test_kbest_returns_top_weights_in_order(self):
        rng = np.random.default_rng(17)
        idgen = IdGen()
        expanded = []
        for i in range(4):
            children = [simple_child(idgen, float(rng.uniform(0.05, 1.0)), MISS)]
            for k in range(4):
                children.append(simple_child(idgen, float(rng.uniform(0.05, 1.0)), k))
            expanded.append(ExpandedTrack(i, children))
        # 4 tracks x 4 measurements, fully gated: 209 feasible selections.
        exact = enumerate_globals(expanded, cap=1_000)
        assert len(exact) == 209
        capped = enumerate_globals(expanded, cap=150)
        assert len(capped) == 150
        top = sorted(exact, key=lambda g: (-g.weight, g.selection))[:150]
        renorm = sum(g.weight for g in top)
        expected = {g.selection: g.weight / renorm for g in top}
        for g in capped:
            assert g.weight == pytest.approx(expected[g.selection], abs=1e-12)

    def test_kbest_deterministic(self):
        rng = np.random.default_rng(23)
        idgen = IdGen()
        expanded = []
        for i in range(4):
            children = [simple_child(idgen, float(rng.uniform(0.05, 1.0)), MISS)]
            for k in range(4):
                children.append(simple_child(idgen, float(rng.uniform(0.05, 1.0)), k))
            expanded.append(ExpandedTrack(i, children))
        first = enumerate_globals(expanded, cap=50)
        second = enumerate_globals(expanded, cap=50)
        assert [g.selection for g in first] == [g.selection for g in second]
        assert [g.weight for g in first] == [g.weight for g in second]

    def test_kbest_rejects_duplicate_events(self):
        idgen = IdGen()
        children = [
            simple_child(idgen, 0.5, MISS),
            simple_child(idgen, 0.5, MISS),
            simple_child(idgen, 0.5, 0),
        ]
        with pytest.raises(ValueError, match="one hypothesis per association event"):
            _enumerate_kbest([ExpandedTrack(0, children)], 2)

    @pytest.mark.parametrize("seed", range(4))
    def test_marginal_total_variation_gap(self, seed):
        # Child weights spread over orders of magnitude, as likelihood
        # ratios do, so the 100 best of the 209 feasible selections carry
        # nearly all of the posterior mass.
        rng = np.random.default_rng(400 + seed)
        idgen = IdGen()
        expanded = []
        for i in range(4):
            children = [simple_child(idgen, float(np.exp(rng.normal(0.0, 2.5))), MISS)]
            for k in range(4):
                children.append(
                    simple_child(idgen, float(np.exp(rng.normal(0.0, 2.5))), k)
                )
            expanded.append(ExpandedTrack(i, children))
        exact = enumerate_globals(expanded, cap=1_000)
        capped = enumerate_globals(expanded, cap=100)

        def marginals(globals_):
            out = []
            for i, t in enumerate(expanded):
                p = {c.hyp_id: 0.0 for c in t.children}
                for g in globals_:
                    p[g.selection[i]] += g.weight
                out.append(p)
            return out

        for p_exact, p_capped in zip(marginals(exact), marginals(capped)):
            tv = 0.5 * sum(abs(p_exact[h] - p_capped[h]) for h in p_exact)
            assert tv <= 0.05


class TestPosteriorMixture:
    def test_marginals_and_validation(self):
        idgen = IdGen()
        t0 = ExpandedTrack(0, [simple_child(idgen, 0.4, MISS), simple_child(idgen, 0.6, 0)])
        t1 = ExpandedTrack(1, [simple_child(idgen, 0.5, MISS), simple_child(idgen, 0.5, 0)])
        globals_ = enumerate_globals([t0, t1])
        mixture = posterior_mixture([t0, t1], globals_)
        mixture.validate()
        for track in mixture.tracks:
            assert sum(h.marginal for h in track.hypotheses) == pytest.approx(1.0)

    def test_unreferenced_children_dropped(self):
        idgen = IdGen()
        t0 = ExpandedTrack(0, [simple_child(idgen, 0.9, MISS), simple_child(idgen, 0.1, 0)])
        top = enumerate_globals([t0], cap=10)[:1]
        total = sum(g.weight for g in top)
        top = [GlobalHypothesis(g.weight / total, g.selection) for g in top]
        mixture = posterior_mixture([t0], top)
        assert len(mixture.tracks[0].hypotheses) == 1
        assert mixture.tracks[0].hypotheses[0].hyp_id == t0.children[0].hyp_id


def two_track_mixture(weights=(0.7, 0.3), rs=((0.9, 0.8), (0.6, 0.4))):
    idgen = IdGen()
    tracks = []
    for i in range(2):
        hyps = []
        for r in rs[i]:
            g = Gaussian(np.array([float(i), 0.0]), np.eye(2))
            hyps.append(Hypothesis(idgen.hyp_id(), BernoulliGaussian(r, g), 0.0))
        tracks.append(Track(idgen.track_id(), hyps))
    globals_ = [
        GlobalHypothesis(weights[0], (tracks[0].hypotheses[0].hyp_id, tracks[1].hypotheses[0].hyp_id)),
        GlobalHypothesis(weights[1], (tracks[0].hypotheses[1].hyp_id, tracks[1].hypotheses[1].hyp_id)),
    ]
    mbm = MultiBernoulliMixture(tracks, globals_)
    marginals_from_globals(mbm)
    return mbm


class TestPrune:
    def test_zero_floors_identity(self):
        mbm = two_track_mixture()
        out = prune(mbm, 0.0, 0.0)
        assert len(out.tracks) == 2
        assert {g.selection: g.weight for g in out.globals} == {
            g.selection: pytest.approx(g.weight) for g in mbm.globals
        }
        for before, after in zip(mbm.tracks, out.tracks):
            assert [h.hyp_id for h in before.hypotheses] == [
                h.hyp_id for h in after.hypotheses
            ]

    def test_weak_track_removed(self):
        mbm = two_track_mixture(rs=((0.9, 0.8), (0.05, 0.02)))
        out = prune(mbm, 0.0, 0.1)
        assert len(out.tracks) == 1
        assert out.tracks[0].track_id == mbm.tracks[0].track_id
        # The two globals collapse onto distinct selections of track 0.
        assert len(out.globals) == 2
        assert sum(g.weight for g in out.globals) == pytest.approx(1.0)

    def test_weak_global_removed_and_renormalized(self):
        mbm = two_track_mixture(weights=(0.99, 0.01))
        out = prune(mbm, 0.02, 0.0)
        assert len(out.globals) == 1
        assert out.globals[0].weight == pytest.approx(1.0)
        # Hypotheses only the pruned global referenced disappear.
        assert all(len(t.hypotheses) == 1 for t in out.tracks)

    def test_all_globals_pruned_raises(self):
        mbm = two_track_mixture(weights=(0.5, 0.5))
        with pytest.raises(InvalidStateError, match="every global"):
            prune(mbm, 0.6, 0.0)

    def test_duplicate_globals_merge_after_track_removal(self):
        mbm = two_track_mixture(rs=((0.9, 0.9), (0.05, 0.02)))
        # Make both globals share track 0's first hypothesis.
        sel0 = mbm.tracks[0].hypotheses[0].hyp_id
        mbm.globals = [
            GlobalHypothesis(0.7, (sel0, mbm.tracks[1].hypotheses[0].hyp_id)),
            GlobalHypothesis(0.3, (sel0, mbm.tracks[1].hypotheses[1].hyp_id)),
        ]
        marginals_from_globals(mbm)
        out = prune(mbm, 0.0, 0.1)
        assert len(out.tracks) == 1
        assert len(out.globals) == 1
        assert out.globals[0].weight == pytest.approx(1.0)

    def test_input_not_mutated(self):
        mbm = two_track_mixture(weights=(0.99, 0.01))
        before = copy.deepcopy(mbm)
        prune(mbm, 0.02, 0.0)
        assert [len(t.hypotheses) for t in mbm.tracks] == [
            len(t.hypotheses) for t in before.tracks
        ]
        assert [g.weight for g in mbm.globals] == [g.weight for g in before.globals]


class TestBirthTrack:
    def test_existence_odds(self):
        idgen = IdGen()
        z = np.array([3.0, -2.0])
        track = birth_track(z, cv_model(), 0.9, 1e-3, idgen, birth_intensity=1e-4)
        expected = (1e-4 * 0.9) / (1e-3 + 1e-4 * 0.9)
        assert track.hypotheses[0].bernoulli.r == pytest.approx(expected, abs=1e-15)

    def test_density_centered_with_velocity_prior(self):
        idgen = IdGen()
        z = np.array([3.0, -2.0])
        track = birth_track(z, cv_model(), 0.9, 1e-3, idgen, velocity_var=4.0)
        density = track.hypotheses[0].bernoulli.density
        np.testing.assert_allclose(density.mean, [3.0, -2.0, 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(density.cov, np.diag([1.0, 1.0, 4.0, 4.0]), atol=1e-15)

    def test_false_alarms_shrink_existence(self):
        idgen = IdGen()
        z = np.zeros(2)
        low = birth_track(z, cv_model(), 0.9, 1e-4, idgen).hypotheses[0].bernoulli.r
        high = birth_track(z, cv_model(), 0.9, 1e-2, idgen).hypotheses[0].bernoulli.r
        assert high < low

    def test_zero_denominator_gives_zero_existence(self):
        idgen = IdGen()
        track = birth_track(np.zeros(2), cv_model(), 0.0, 0.0, idgen)
        assert track.hypotheses[0].bernoulli.r == 0.0


class TestAssociationProblemValidation:
    def test_bad_pd_rejected(self):
        idgen = IdGen()
        with pytest.raises(ValueError, match="detection probability"):
            make_problem([make_track(idgen, [0, 0, 0, 0], np.eye(4))], [[0.0, 0.0]], pd=1.2)

    def test_negative_false_alarm_density_rejected(self):
        idgen = IdGen()
        with pytest.raises(ValueError, match="false-alarm"):
            make_problem([make_track(idgen, [0, 0, 0, 0], np.eye(4))], [[0.0, 0.0]], lam=-1.0)

    def test_nonpositive_threshold_rejected(self):
        idgen = IdGen()
        with pytest.raises(ValueError, match="threshold"):
            make_problem(
                [make_track(idgen, [0, 0, 0, 0], np.eye(4))], [[0.0, 0.0]], threshold=0.0
            )
