from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magicsimplex import bell_basis as bb
from magicsimplex import detectors as det
from magicsimplex import geometry as geo

from conftest import simplex_points

BELL = np.eye(9)[0]
MIXED = np.full(9, 1 / 9)


def test_partial_transpose_involution():
    rho = bb.state_from_coeffs(np.arange(1, 10) / 45)
    assert np.allclose(det.partial_transpose(det.partial_transpose(rho)), rho)


def test_ppt_reference_states():
    r = det.is_ppt(BELL)
    assert not r.is_ppt and np.isclose(r.min_eigenvalue, -1 / 3)
    assert det.is_ppt(MIXED).is_ppt
    for line in geo.enumerate_lines():
        assert det.is_ppt([float(x) for x in geo.line_state(line)]).is_ppt


def test_ppt_batch_matches_dense():
    rng = np.random.default_rng(1)
    c = rng.dirichlet(np.ones(9), 50)
    fast = det.ppt_min_eigenvalues(c)
    dense = [np.linalg.eigvalsh(det.partial_transpose(bb.state_from_coeffs(x)))[0] for x in c]
    assert np.allclose(fast, dense, atol=1e-12)


def test_ppt_orbit_invariance_all_maps():
    # 216 maps x 200 points
    rng = np.random.default_rng(7)
    c = rng.dirichlet(np.ones(9) * 0.7, 200)
    base = det.ppt_min_eigenvalues(c)
    imgs = geo.orbit_images(c).reshape(-1, 9)
    vals = det.ppt_min_eigenvalues(imgs).reshape(200, 216)
    assert np.allclose(vals, base[:, None], atol=1e-10)


def test_pure_bell_concurrence():
    v = bb.bell_vectors()[0]
    assert abs(det.pure_concurrence(v) - np.sqrt(4 / 3)) < 1e-9
    q = det.quasipure(BELL)
    assert q.applicable and abs(q.c_qp - np.sqrt(4 / 3)) < 1e-9


def test_product_state_concurrence_zero():
    psi = np.kron([1, 0, 0], [0.6, 0.8, 0])
    assert abs(det.pure_concurrence(psi)) < 1e-12


def test_quasipure_tie_inapplicable():
    c = np.zeros(9)
    c[0] = c[1] = 0.5
    q = det.quasipure(c)
    assert not q.applicable and q.c_qp == 0


def test_quasipure_zero_inside_kernel():
    vals, ok = det.quasipure_batch(np.array([MIXED]))
    assert vals[0] <= det.QP_DETECT_TOL


@given(simplex_points(), st.integers(0, 215))
def test_quasipure_orbit_invariant(c, g):
    a, oka = det.quasipure_batch(c[None])
    b, okb = det.quasipure_batch(c[None, geo.group_perms()[g]])
    assert oka[0] == okb[0]
    assert abs(a[0] - b[0]) < 1e-9


def test_quasipure_detects_no_kernel_state():
    rng = np.random.default_rng(2)
    lam = rng.dirichlet(np.ones(12), 300)
    c = lam @ geo.line_matrix() / 3
    vals, ok = det.quasipure_batch(c)
    assert np.all(vals <= det.QP_DETECT_TOL)


def test_seesaw_p00_interval():
    r = det.estimate_operator_interval(bb.bell_projector(0, 0).matrix)
    assert abs(r.lower) < 1e-6 and abs(r.upper - 1 / 3) < 1e-6


def test_seesaw_m4_upper():
    r = det.estimate_operator_interval(bb.mub_witness_operator(4, det.DEFAULT_MUB_PERM))
    assert abs(r.upper - 2) < 1e-6
    assert r.lower < r.upper


def test_seesaw_nested_restarts_monotone():
    kappa = det.generate_random_witness(5)
    op = bb.operator_from_kappa(kappa)
    small = det.estimate_operator_interval(op, restarts=10, seed=3)
    large = det.estimate_operator_interval(op, restarts=40, seed=3)
    assert large.upper >= small.upper - 1e-12
    assert large.lower <= small.lower + 1e-12


def test_seesaw_deterministic():
    op = bb.operator_from_kappa(det.generate_random_witness(11))
    assert det.estimate_operator_interval(op, 20, 4) == det.estimate_operator_interval(op, 20, 4)


def test_seesaw_rejects_zero_restarts():
    with pytest.raises(ValueError):
        det.estimate_operator_interval(np.eye(9), restarts=0)


def test_separable_interval_inner_estimate_contains_products():
    # any product state value lies inside the estimate (up to see-saw optimality)
    kappa = det.generate_random_witness(21)
    lo, hi, _ = det.estimate_separable_interval(kappa, restarts=50, seed=0)
    op = bb.operator_from_kappa(kappa)
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = rng.normal(size=3) + 1j * rng.normal(size=3)
        b = rng.normal(size=3) + 1j * rng.normal(size=3)
        v = np.kron(a / np.linalg.norm(a), b / np.linalg.norm(b))
        val = np.vdot(v, op @ v).real
        assert lo - 1e-9 <= val <= hi + 1e-9


def test_random_witness_unit_and_seeded():
    a = det.generate_random_witness(9)
    assert np.isclose(np.linalg.norm(a), 1)
    assert np.array_equal(a, det.generate_random_witness(9))
    assert det.witness_seed(7, 0) != det.witness_seed(7, 1)


def test_witness_validation():
    with pytest.raises(ValueError):
        det.SimplexWitness(tuple(BELL), 1.0, 0.0)
    with pytest.raises(ValueError):
        det.SimplexWitness(tuple(BELL), 0.0, 1.0, margin=-1)


def test_witness_json_roundtrip(tmp_path):
    w = det.make_witness(det.generate_random_witness(3), 3, restarts=10, witness_id=4)
    assert det.SimplexWitness.from_json(w.to_json()) == w
    path = tmp_path / "ws.jsonl"
    det.write_witness_store(path, [w])
    det.append_witnesses(path, [w])
    assert det.read_witness_store(path) == [w, w]


def test_witness_store_error_has_line_number(tmp_path):
    w = det.make_witness(det.generate_random_witness(3), 3, restarts=5)
    path = tmp_path / "ws.jsonl"
    path.write_text(w.to_json() + "\n{not json\n")
    with pytest.raises(ValueError, match=":2:"):
        det.read_witness_store(path)


def test_timestamp_respects_source_date_epoch(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    assert det.timestamp() == "1970-01-01T00:00:00Z"
    monkeypatch.delenv("SOURCE_DATE_EPOCH")
    assert det.timestamp() == ""


def test_witness_fires_orbit_equals_explicit_images():
    rng = np.random.default_rng(4)
    kap = rng.normal(size=(3, 9))
    c = rng.dirichlet(np.ones(9), 20)
    lower, upper = np.array([-0.3, -0.2, -0.1]), np.array([0.3, 0.2, 0.1])
    fast = det.witness_fires(kap, lower, upper, 0.0, c)
    imgs = geo.orbit_images(c)  # (20, 216, 9)
    vals = imgs @ kap.T  # (20, 216, 3)
    slow = (vals.max(axis=1) > upper) | (vals.min(axis=1) < lower)
    assert np.array_equal(fast, slow)
    plain = det.witness_fires(kap, lower, upper, 0.0, c, orbit=False)
    assert np.array_equal(plain, (c @ kap.T > upper) | (c @ kap.T < lower))


def test_apply_witness_verdict():
    w = det.SimplexWitness(tuple(BELL), 0.0, 1 / 3, margin=1e-7)
    assert det.apply_witness(w, BELL).entangled
    assert not det.apply_witness(w, MIXED).entangled


def test_mub_witness_bounds():
    ws = det.default_mub_witnesses()
    assert [w.m for w in ws] == [4, 3, 2]
    for w in ws:
        assert w.upper == bb.mub_upper_bound(w.m)
        assert 0 < w.lower < w.upper
        assert np.isclose(sum(w.kappa), 3 * w.m)


def test_mub_detects_bell_not_mixed():
    assert det.mub_witness_eval(np.eye(9)[0], 4, bb.IDENTITY_PERM).entangled
    assert not det.mub_witness_eval(MIXED, 4).entangled


def test_no_false_detections_on_kernel_states():
    rng = np.random.default_rng(12)
    lam = rng.dirichlet(np.ones(12) * 0.5, 1000)
    c = np.concatenate([lam @ geo.line_matrix() / 3, geo.line_matrix() / 3])
    for w in det.default_mub_witnesses():
        assert not det.witness_fires(np.array([w.kappa]), w.lower, w.upper, w.margin, c).any()
    ws = [det.make_witness(det.generate_random_witness(s), s, restarts=50) for s in range(5)]
    kap = np.array([w.kappa for w in ws])
    fires = det.witness_fires(kap, [w.lower for w in ws], [w.upper for w in ws], [w.margin for w in ws], c)
    assert not fires.any()


def test_search_mub_permutation_counts():
    # extremal-type state violating M4 with the default permutation
    c = np.zeros(9)
    c[[2, 5, 8]] = 5 / 18
    c[0], c[4] = 2 / 18, 1 / 18
    imgs = geo.orbit_images(c)
    best, counts = det.search_mub_permutation(imgs, m=2)
    assert len(counts) == 36
    assert counts[best] == max(counts.values())
