from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magicsimplex import analysis as an
from magicsimplex import detectors as det
from magicsimplex import geometry as geo
from magicsimplex import pipeline as pl
from magicsimplex.pipeline import Label

from conftest import simplex_points

# --- PCA ------------------------------------------------------------------------


def test_pca_line_segment_rank_one():
    t = np.linspace(0, 1, 30)[:, None]
    a, b = np.eye(9)[0], np.full(9, 1 / 9)
    m = an.pca_fit(a + t * (b - a))
    assert m.eigenvalues[0] > 1e-3
    assert np.all(np.abs(m.eigenvalues[1:]) < 1e-10)


def test_pca_simplex_at_most_eight(grid6):
    m = an.pca_fit(grid6.coeffs)
    assert abs(m.eigenvalues[-1]) < 1e-10
    assert np.all(np.diff(m.eigenvalues) <= 1e-15)
    assert np.all(m.eigenvalues >= -1e-12)


@given(st.integers(0, 10_000))
def test_pca_invariants(seed):
    rng = np.random.default_rng(seed)
    x = rng.dirichlet(np.ones(9), 40)
    m = an.pca_fit(x)
    assert np.allclose(m.components @ m.components.T, np.eye(9), atol=1e-10)
    p = an.pca_project(m, x, 9)
    assert np.allclose(p.mean(axis=0), 0, atol=1e-10)
    for comp in m.components:
        assert comp[np.argmax(np.abs(comp))] > 0
    # input order does not matter
    m2 = an.pca_fit(x[rng.permutation(len(x))])
    assert np.array_equal(m.components, m2.components)
    assert np.array_equal(m.eigenvalues, m2.eigenvalues)


def test_pca_project_mean_is_origin():
    x = np.random.default_rng(0).dirichlet(np.ones(9), 10)
    m = an.pca_fit(x)
    assert np.allclose(an.pca_project(m, m.mean, 3), 0)
    with pytest.raises(ValueError):
        an.pca_project(m, x, 10)


def test_pca_projection_isometry_in_span():
    rng = np.random.default_rng(1)
    base = rng.normal(size=(2, 9))
    x = rng.normal(size=(50, 2)) @ base
    m = an.pca_fit(x)
    p = an.pca_project(m, x, 2)
    d1 = np.linalg.norm(x[:, None] - x[None], axis=-1)
    d2 = np.linalg.norm(p[:, None] - p[None], axis=-1)
    assert np.allclose(d1, d2, atol=1e-10)


def test_pca_needs_two_points():
    with pytest.raises(ValueError):
        an.pca_fit(np.ones((1, 9)))


def test_unique_projected_points():
    x = np.tile(np.full(9, 1 / 9), (5, 1))
    x[0, 0] += 1e-9
    x[0, 1] -= 1e-9
    m = an.pca_fit(np.random.default_rng(0).dirichlet(np.ones(9), 20))
    assert an.unique_projected_points(x, m) == 1
    assert an.unique_projected_points(np.eye(9), m, dims=9) == 9
    with pytest.raises(ValueError):
        an.unique_points(x, 0.0)


def test_rotation_symmetry():
    ang = 2 * np.pi * np.arange(3) / 3
    tri = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    assert an.rotation_symmetry(tri, 3)
    assert not an.rotation_symmetry(tri + [0.1, 0], 3)


def test_landmarks():
    lm = an.landmarks()
    kinds = [k for _, k, _ in lm]
    assert kinds.count("bell") == 9 and kinds.count("kernel") == 12 and kinds.count("vertex") == 72


# --- kNN ------------------------------------------------------------------------


def brute_neighbors(train_sorted, q, k):
    d = np.linalg.norm(train_sorted - q, axis=1)
    d = np.round(d, 9)
    return np.lexsort((np.arange(len(d)), d))[:k]


@given(st.integers(0, 10_000), st.sampled_from([1, 3, 5]))
def test_knn_neighbors_match_brute_force_with_ties(seed, k):
    rng = np.random.default_rng(seed)
    # lattice data: many exact distance ties
    x = rng.integers(0, 4, size=(60, 3)).astype(float)
    x = np.unique(x, axis=0)
    y = rng.integers(0, 3, len(x))
    m = an.knn_fit(x, k, y)
    q = rng.integers(0, 4, size=(15, 3)) + rng.choice([0.0, 0.5], size=(15, 3))
    nb = an.knn_neighbors(m, q, window=2)
    for row, qq in zip(nb, q):
        assert np.array_equal(row, brute_neighbors(m.points, qq, min(k, len(x))))


def test_knn_self_prediction_k1():
    rng = np.random.default_rng(0)
    x = rng.random((100, 9))
    y = rng.integers(0, 3, 100)
    m = an.knn_fit(x, 1, y)
    assert np.array_equal(an.knn_predict(m, x), y)


def test_knn_fit_errors():
    with pytest.raises(ValueError):
        an.knn_fit(np.ones((3, 2)), 2, [0, 1, 2])
    with pytest.raises(ValueError):
        an.knn_fit(np.ones((3, 2)), 0, [0, 1, 2])
    with pytest.raises(ValueError):
        an.knn_fit(np.zeros((0, 2)), 1, [])


def test_knn_deterministic(grid6):
    m1 = an.knn_fit(grid6, 5)
    m2 = an.knn_fit(grid6.subset(np.random.default_rng(0).permutation(len(grid6))), 5)
    q = np.random.default_rng(1).dirichlet(np.ones(9), 50)
    assert np.array_equal(an.knn_predict(m1, q), an.knn_predict(m2, q))


def test_vote_tie_goes_to_nearest():
    assert an.vote(np.array([[2, 1, 1, 2, 0]])).tolist() == [2]
    assert an.vote(np.array([[1, 2, 1, 2, 0]])).tolist() == [1]
    assert an.vote(np.array([[0, 2, 2, 1, 1]])).tolist() == [2]


def test_majority_vote_threshold(monkeypatch):
    c = np.full((1, 9), 1 / 9)
    for n_bound, want in [(12, Label.BOUND), (6, Label.BOUND), (5, Label.SEP), (0, Label.SEP)]:
        fake = np.array([Label.BOUND] * n_bound + [Label.SEP] * (12 - n_bound))
        monkeypatch.setattr(an, "knn_predict", lambda model, imgs, workers=1, f=fake: f)
        assert an.majority_vote_predict(None, c)[0] == want


@given(simplex_points(), st.integers(0, 215))
def test_majority_vote_orbit_invariant(c, g):
    rng = np.random.default_rng(0)
    x = rng.dirichlet(np.ones(9), 300)
    y = np.where(rng.random(300) < 0.5, Label.BOUND, Label.SEP)
    m = an.knn_fit(x, 3, y)
    a = an.majority_vote_predict(m, c)
    b = an.majority_vote_predict(m, c[geo.group_perms()[g]])
    assert a[0] == b[0]


# --- evaluation -----------------------------------------------------------------


def test_confusion_matrix():
    actual = np.array([0, 0, 1, 1, 2, 2, 2])
    pred = np.array([0, 1, 1, 1, 2, 0, 2])
    cm = an.ConfusionMatrix.from_labels(actual, pred)
    assert cm.matrix.sum(axis=1).tolist() == [2, 2, 3]
    assert cm.accuracy == pytest.approx(5 / 7)
    assert cm.recall("FREE") == 0.5 and cm.recall("BOUND") == 1.0
    assert "accuracy" in cm.format()


def test_stratified_split():
    labels = np.repeat([0, 1, 2, 3], [100, 50, 30, 20])
    tr, te = an.stratified_split(labels, 0.2, seed=1)
    assert len(np.intersect1d(tr, te)) == 0 and len(tr) + len(te) == 200
    assert np.bincount(labels[te]).tolist() == [20, 10, 6, 4]
    tr2, te2 = an.stratified_split(labels, 0.2, seed=1)
    assert np.array_equal(te, te2)
    with pytest.raises(ValueError):
        an.stratified_split(labels, 1.5)


def test_scenarios_without_unknown(grid6):
    ds = grid6.subset(grid6.labels != Label.UNKNOWN)
    r = an.scenario_compare(ds, k=3)
    assert r.no_unknown
    assert np.array_equal(r.sep.matrix, r.bound.matrix)


def test_scenario_sweep_consistent_with_single_k(grid9):
    rs = an.scenario_sweep(grid9, ks=(1, 3))
    one = an.scenario_compare(grid9, k=3)
    assert np.array_equal(rs[1].sep.matrix, one.sep.matrix)
    assert np.array_equal(rs[1].bound.matrix, one.bound.matrix)
    assert an.best_scenario(rs).k in (1, 3)


def test_pca_then_knn_full_dims_equals_plain(grid9):
    ds = grid9
    cm9 = an.pca_then_knn(ds, dims=9, k=3)
    train, test = an.stratified_split(ds.labels)
    y = an.relabel_unknown(ds.labels, Label.SEP)
    m = an.knn_fit(ds.coeffs[train], 3, y[train])
    plain = an.ConfusionMatrix.from_labels(y[test], an.knn_predict(m, ds.coeffs[test]))
    assert np.array_equal(cm9.matrix, plain.matrix)
    with pytest.raises(ValueError):
        an.pca_then_knn(ds, dims=0)


# --- extremal states and stats --------------------------------------------------


def test_extremal_family_values():
    c = an.extremal_family(Fraction(1, 18))
    assert c[2] == c[5] == c[8] == Fraction(5, 18)
    assert c[0] == Fraction(2, 18) and c[4] == Fraction(1, 18)
    assert sum(c) == 1
    c2 = an.extremal_family(Fraction(1, 18), variant=2)
    assert c2[0] == Fraction(1, 18) and c2[4] == Fraction(2, 18)
    f = an.extremal_family(1 / 18)
    assert np.allclose(f, [float(x) for x in c])


def test_extremal_family_limit_is_line_state():
    c = an.extremal_family(1e-12)
    line = np.zeros(9)
    line[[2, 5, 8]] = 1 / 3
    assert np.allclose(c, line, atol=1e-11)
    assert any(l.points == (2, 5, 8) for l in geo.enumerate_lines())


@pytest.mark.parametrize("x", [0, -0.1, Fraction(1, 8), 0.2])
def test_extremal_family_range(x):
    with pytest.raises(ValueError):
        an.extremal_family(x)
    with pytest.raises(ValueError):
        an.extremal_family(Fraction(1, 18), variant=3)


@pytest.mark.parametrize("x", [Fraction(1, 18), Fraction(1, 36), Fraction(1, 72)])
def test_extremal_states_ppt_and_mub_violation_equals_x(x):
    c = np.array([float(v) for v in an.extremal_family(x)])
    assert det.is_ppt(c).is_ppt
    kappa = np.array(det.mub_kappa(4))
    top = (c[geo.group_perms()] @ kappa).max()
    assert top - 2 == pytest.approx(float(x), abs=1e-9)


def test_volume_stats_fractions(grid6):
    rows = an.volume_stats(grid6)
    for group in ("polytope", "simplex"):
        fr = [r.fraction for r in rows if r.group == group]
        assert sum(fr) == pytest.approx(1)
    simplex_total = sum(r.count for r in rows if r.group == "simplex")
    assert simplex_total == pl.GridSpec(Fraction(1, 6)).simplex_points
    assert "polytope" in an.format_stats(rows)


def test_pca_orbit_closed_set_uses_class_plane(grid6):
    # an orbit-closed set has a scalar covariance on the sum-zero space
    ds = grid6.subset(grid6.labels == Label.SEP)
    m = an.pca_fit(ds.coeffs)
    assert np.allclose(m.eigenvalues[:8], m.eigenvalues[0])
    plane = geo.parallel_class_planes()[0]
    assert np.allclose(np.abs(m.components[:2] @ plane.T), np.eye(2))
    sym = an.orbit_action_symmetry(m, ds.coeffs)
    assert sym["threefold"] and 3 in sym["rotation_orders"]


def test_kernel_landmarks_triangle_and_origin(grid6):
    m = an.pca_fit(grid6.subset(grid6.labels == Label.SEP).coeffs)
    kern = np.array([c for _, kind, c in an.landmarks() if kind == "kernel"])
    p = an.pca_project(m, kern, 2)
    r = np.round(np.linalg.norm(p, axis=1), 9)
    assert (r == 0).sum() == 9 and (r > 0).sum() == 3
    assert an.rotation_symmetry(p[r > 0], 3)
