import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poissonloc import (DegenerateInputError, DetectorArray, DomainError,
                        ParameterBox, ThetaVector, arrival_signature_equal,
                        arrival_time_gradient, arrival_times, confusable_pair,
                        direction_vectors, lies_on_cross, swap_min_error)
from conftest import five_detectors

RNG = np.random.default_rng(987654321)


def test_arrival_time_345_triangle():
    arr = DetectorArray(np.array([[3.0, 4.0], [0.0, 5.0]]), nu=2.0)
    tau = arrival_times(arr, [0.0, 0.0, 1.0, 1.0])
    assert tau[0, 0] == pytest.approx(2.5, abs=1e-15)
    assert tau[0, 1] == pytest.approx(2.5, abs=1e-15)
    # source 2 at (1,1): distance to (3,4) is sqrt(13)
    assert tau[1, 0] == pytest.approx(np.sqrt(13.0) / 2.0, abs=1e-15)


def test_direction_vectors_unit_and_orientation():
    arr = five_detectors()
    m = direction_vectors(arr, [-0.4, 0.1, 0.5, -0.2])
    assert np.allclose(np.linalg.norm(m, axis=2), 1.0, atol=1e-14)
    # vector from source toward detector: moving the source along it shortens tau
    th = np.array([-0.4, 0.1, 0.5, -0.2])
    step = 1e-6 * m[0, 0]
    tau_before = arrival_times(arr, th)[0, 0]
    th2 = th.copy()
    th2[:2] += step
    assert arrival_times(arr, th2)[0, 0] < tau_before


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_arrival_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    arr = five_detectors()
    th = rng.uniform(-0.8, 0.8, size=4)
    grad = arrival_time_gradient(arr, th)
    h = 1e-6
    for a in range(4):
        e = np.zeros(4)
        e[a] = h
        fd = (arrival_times(arr, th + e) - arrival_times(arr, th - e)) / (2 * h)
        assert np.allclose(grad[:, :, a], fd, atol=2e-9)


def test_gradient_zero_blocks():
    arr = five_detectors()
    g = arrival_time_gradient(arr, [-0.3, 0.2, 0.4, -0.1])
    assert np.all(g[0, :, 2:] == 0.0)
    assert np.all(g[1, :, :2] == 0.0)


# --- cross detection -------------------------------------------------------


def _witness_covers(points, w, tol=1e-9):
    d1 = w.line1.distance(points)
    d2 = w.line2.distance(points)
    assert abs(float(w.line1.direction @ w.line2.direction)) < 1e-12
    assert np.all(np.minimum(d1, d2) <= tol)


def test_square_corners_are_a_cross():
    pts = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    w = lies_on_cross(pts)
    assert w is not None
    _witness_covers(pts, w)


def test_axis_aligned_cross_detected():
    pts = np.array([[2.0, 0.0], [-1.0, 0.0], [0.5, 0.0], [0.0, 3.0], [0.0, -0.7]])
    w = lies_on_cross(pts)
    assert w is not None
    _witness_covers(pts, w)


def test_collinear_points_are_a_cross():
    pts = np.array([[0.0, 0.0], [1.0, 0.5], [2.0, 1.0], [4.0, 2.0]])
    w = lies_on_cross(pts)
    assert w is not None
    _witness_covers(pts, w)


def test_five_generic_detectors_not_on_cross(array5):
    assert lies_on_cross(array5.positions) is None


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=60, deadline=None)
def test_any_three_points_lie_on_a_cross(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-3, 3, size=(3, 2))
    if np.min([np.linalg.norm(pts[i] - pts[j]) for i in range(3) for j in range(i)]) < 1e-6:
        return
    w = lies_on_cross(pts)
    assert w is not None
    _witness_covers(pts, w)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 2 * np.pi))
@settings(max_examples=40, deadline=None)
def test_cross_verdict_invariant_under_rigid_motion(seed, angle):
    rng = np.random.default_rng(seed)
    # points planted on two random orthogonal lines
    c = rng.uniform(-1, 1, size=2)
    phi = rng.uniform(0, np.pi)
    e1 = np.array([np.cos(phi), np.sin(phi)])
    e2 = np.array([-e1[1], e1[0]])
    t = rng.uniform(-2, 2, size=5)
    pick = rng.integers(0, 2, size=5)
    pts = c + np.where(pick[:, None] == 0, t[:, None] * e1, t[:, None] * e2)
    R = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    shift = rng.uniform(-5, 5, size=2)
    assert lies_on_cross(pts) is not None
    assert lies_on_cross(pts @ R.T + shift, tol=1e-7) is not None


def _cross_oracle(points, tol=1e-9):
    """Brute-force cover search: every pair line plus every perpendicular
    placement, including the all-collinear degenerate case."""
    pts = np.asarray(points, float)
    K = pts.shape[0]
    if K <= 2:
        return True
    candidates = []
    for i in range(K):
        for j in range(K):
            if i == j or np.linalg.norm(pts[j] - pts[i]) < 1e-12:
                continue
            d = pts[j] - pts[i]
            d = d / np.linalg.norm(d)
            candidates.append((pts[i], d))
            candidates.append((pts[i], np.array([-d[1], d[0]])))
    for p, d in candidates:
        n = np.array([-d[1], d[0]])
        off1 = np.abs((pts - p) @ n)
        rest = pts[off1 > tol]
        if rest.size == 0:
            return True
        for q in rest:
            off2 = np.abs((rest - q) @ d)
            if np.all(off2 <= tol):
                return True
    return False


def test_cross_decision_matches_bruteforce_oracle():
    for trial in range(120):
        rng = np.random.default_rng(1000 + trial)
        K = int(rng.integers(3, 7))
        if trial % 2 == 0:
            pts = rng.uniform(-2, 2, size=(K, 2))
        else:
            c = rng.uniform(-1, 1, size=2)
            phi = rng.uniform(0, np.pi)
            e1 = np.array([np.cos(phi), np.sin(phi)])
            e2 = np.array([-e1[1], e1[0]])
            t = rng.uniform(-2, 2, size=K)
            pick = rng.integers(0, 2, size=K)
            pts = c + np.where(pick[:, None] == 0, t[:, None] * e1, t[:, None] * e2)
        got = lies_on_cross(pts) is not None
        want = _cross_oracle(pts)
        assert got == want, f"trial {trial}: decision {got}, oracle {want}"


# --- confusable pairs ------------------------------------------------------


def test_confusable_pair_square_array():
    arr = DetectorArray(np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]))
    box = ParameterBox([-1, -1, -1, -1], [1, 1, 1, 1])
    pair = confusable_pair(arr, box)
    assert pair is not None
    th, thp = pair
    assert not np.allclose(th.values, thp.values)
    assert not np.allclose(th.values, thp.swapped().values)
    assert box.contains(th) and box.contains(thp)
    assert arrival_signature_equal(arr, th, thp, tol=1e-12)


def test_confusable_pair_without_box_uses_array_scale():
    arr = DetectorArray(np.array([[2.0, 0.0], [-1.0, 0.0], [0.0, 1.5], [0.0, -2.5]]))
    pair = confusable_pair(arr)
    assert pair is not None
    assert arrival_signature_equal(arr, pair[0], pair[1], tol=1e-12)


def test_confusable_pair_none_for_identifiable_array(array5):
    assert confusable_pair(array5) is None


def test_confusable_pair_respects_impossible_box():
    arr = DetectorArray(np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]))
    # both sources forced far to one side: the point-symmetric partner cannot fit
    box = ParameterBox([5.0, 5.0, 6.0, 6.0], [5.5, 5.5, 6.5, 6.5])
    assert confusable_pair(arr, box) is None


def test_signature_differs_for_generic_pair(array5):
    assert not arrival_signature_equal(array5, [-0.4, 0.1, 0.5, -0.2],
                                       [-0.4, 0.1, 0.5, -0.1])


# --- containers and errors -------------------------------------------------


def test_coincident_detectors_rejected():
    with pytest.raises(DegenerateInputError, match="coincide"):
        DetectorArray(np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]]))


def test_source_on_detector_rejected_for_directions():
    arr = five_detectors()
    th = np.concatenate([arr.positions[2], [0.9, 0.9]])
    with pytest.raises(DegenerateInputError, match="source 0"):
        direction_vectors(arr, th)


def test_bad_nu_rejected():
    with pytest.raises(DomainError, match="nu"):
        DetectorArray(np.array([[0.0, 0.0], [1.0, 0.0]]), nu=0.0)


def test_theta_vector_views_and_swap():
    tv = ThetaVector([1.0, 2.0, 3.0, 4.0])
    assert np.all(tv.source1 == [1.0, 2.0]) and np.all(tv.source2 == [3.0, 4.0])
    assert np.all(tv.swapped().values == [3.0, 4.0, 1.0, 2.0])
    assert np.all(np.asarray(tv) == tv.values)
    with pytest.raises(DomainError):
        ThetaVector([np.nan, 0, 0, 0])


def test_box_validation_and_views():
    with pytest.raises(DomainError, match="axis 1"):
        ParameterBox([0, 1, 0, 0], [1, 1, 1, 1])
    box = ParameterBox([-1, -2, 0, 1], [1, 2, 3, 4])
    assert box.contains([0, 0, 1, 2])
    assert not box.contains([0, 0, 1, 5])
    assert np.all(box.clip([0, 0, 1, 9]) == [0, 0, 1, 4])
    assert box.corners().shape == (16, 4)
    lo, hi = box.source_box(1)
    assert np.all(lo == [0, 1]) and np.all(hi == [3, 4])


def test_swap_min_error_picks_best_labeling():
    a = [0.0, 0.0, 1.0, 1.0]
    b = [1.0, 1.0, 0.0, 0.0]
    assert swap_min_error(a, b) == 0.0
    assert swap_min_error(a, [0.1, 0.0, 1.0, 1.0]) == pytest.approx(0.1)
